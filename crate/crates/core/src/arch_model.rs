//! Latency, area and energy of a latch-sharing word, and the design-space
//! sweep over the number of sequential steps.
//!
//! A word of `n_word` inequalities is evaluated by `n_par` latches, each
//! stepping through up to `n_seq` inequalities. Energy assumes independent
//! per-inequality mismatches with probability `p_mm` and early termination at
//! the first mismatching step.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device_model::TechParams;

/// Per-inequality mismatch probability used when none is given.
pub const DEFAULT_P_MM: f64 = 0.05;

/// Trials simulated by one Monte Carlo task.
const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum ArchError {
    #[error("invalid architecture: {0}")]
    InvalidConfig(String),
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchConfig {
    pub n_seq: usize,
    pub n_par: usize,
    pub n_word: usize,
}

impl ArchConfig {
    pub fn new(n_seq: usize, n_par: usize, n_word: usize) -> Result<Self, ArchError> {
        let cfg = Self {
            n_seq,
            n_par,
            n_word,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The tightest point for `n_word` with `n_seq` steps.
    pub fn for_word(n_word: usize, n_seq: usize) -> Result<Self, ArchError> {
        if n_seq == 0 {
            return Err(ArchError::InvalidConfig("n_seq must be at least 1".into()));
        }
        Self::new(n_seq, n_word.div_ceil(n_seq).max(1), n_word)
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        if self.n_seq == 0 || self.n_par == 0 || self.n_word == 0 {
            return Err(ArchError::InvalidConfig(format!(
                "n_seq, n_par and n_word must all be at least 1 (got {}, {}, {})",
                self.n_seq, self.n_par, self.n_word
            )));
        }
        if self.n_word > self.capacity() {
            return Err(ArchError::InvalidConfig(format!(
                "n_word = {} exceeds n_seq * n_par = {}",
                self.n_word,
                self.capacity()
            )));
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.n_seq * self.n_par
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_e: f64,
    pub w_l: f64,
    pub w_a: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_e: 0.45,
            w_l: 0.05,
            w_a: 0.5,
        }
    }
}

impl CostWeights {
    pub fn new(w_e: f64, w_l: f64, w_a: f64) -> Result<Self, ArchError> {
        let w = Self { w_e, w_l, w_a };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let ws = [self.w_e, self.w_l, self.w_a];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ArchError::InvalidWeights(format!(
                "weights must be finite and non-negative, got {ws:?}"
            )));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ArchError::InvalidWeights(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

fn check_probability(p: f64) -> Result<(), ArchError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ArchError::Probability(p))
    }
}

/// Word latency in seconds.
pub fn latency(cfg: &ArchConfig, tech: &TechParams) -> f64 {
    cfg.n_seq as f64 * tech.t_latch
}

/// Word area in µm².
pub fn area(cfg: &ArchConfig, tech: &TechParams) -> f64 {
    cfg.n_par as f64 * (tech.a_latch + cfg.n_seq as f64 * tech.a_1t1r)
}

/// Probability that at least one of `n_par` parallel inequalities mismatches.
pub fn p_mm_par(p_mm: f64, n_par: usize) -> f64 {
    1.0 - (1.0 - p_mm).powi(n_par as i32)
}

/// Mean number of executed steps of a sequence truncated at `n_seq`, when
/// each step aborts with probability `p_step`.
pub fn expected_depth(p_step: f64, n_seq: usize) -> f64 {
    if p_step == 0.0 {
        return n_seq as f64;
    }
    if p_step == 1.0 {
        return 1.0;
    }
    // 1 - (1-p)^n computed without cancellation for tiny p.
    let survive_all = (n_seq as f64 * (-p_step).ln_1p()).exp_m1();
    (-survive_all / p_step).clamp(1.0, n_seq as f64)
}

/// Expected search energy of one lookup, in joules.
pub fn expected_energy(cfg: &ArchConfig, tech: &TechParams, p_mm: f64) -> f64 {
    cfg.n_par as f64 * tech.e_cell * expected_depth(p_mm_par(p_mm, cfg.n_par), cfg.n_seq)
}

/// Executed steps of one simulated lookup.
fn simulate_steps<R: Rng>(rng: &mut R, p_mm: f64, cfg: &ArchConfig) -> usize {
    for step in 1..=cfg.n_seq {
        let mut mismatch = false;
        for _ in 0..cfg.n_par {
            // Every latch draws, so the stream consumed per step is fixed.
            mismatch |= rng.gen::<f64>() < p_mm;
        }
        if mismatch {
            return step;
        }
    }
    cfg.n_seq
}

/// Monte Carlo estimate of [`expected_energy`]: returns the mean energy and
/// its standard error. Trials are split into fixed chunks, each with its own
/// stream of the seeded generator, so the result does not depend on
/// scheduling.
pub fn monte_carlo_energy(
    cfg: &ArchConfig,
    tech: &TechParams,
    p_mm: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64), ArchError> {
    check_probability(p_mm)?;
    if trials == 0 {
        return Err(ArchError::InvalidConfig("trials must be at least 1".into()));
    }
    let n_chunks = trials.div_ceil(MC_CHUNK);
    let (sum, sum_sq) = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let n = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let (mut s, mut s2) = (0u64, 0u64);
            for _ in 0..n {
                let k = simulate_steps(&mut rng, p_mm, cfg) as u64;
                s += k;
                s2 += k * k;
            }
            (s, s2)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let n = trials as f64;
    let mean_steps = sum as f64 / n;
    let var = if trials > 1 {
        ((sum_sq as f64 - n * mean_steps * mean_steps) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let per_step = cfg.n_par as f64 * tech.e_cell;
    Ok((mean_steps * per_step, (var / n).sqrt() * per_step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub cfg: ArchConfig,
    pub t_word: f64,
    pub a_word: f64,
    pub e_word: f64,
    pub t_norm: f64,
    pub a_norm: f64,
    pub e_norm: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<DesignPoint>,
    /// Index into `points` of the cheapest point.
    pub best: usize,
}

impl Sweep {
    pub fn best_point(&self) -> &DesignPoint {
        &self.points[self.best]
    }

    pub fn costs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.cost).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "n_seq,n_par,t_word_s,a_word_um2,e_word_J,t_norm,a_norm,e_norm,cost"
        )?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{:.6e},{:.6},{:.6e},{:.6},{:.6},{:.6},{:.6}",
                p.cfg.n_seq,
                p.cfg.n_par,
                p.t_word,
                p.a_word,
                p.e_word,
                p.t_norm,
                p.a_norm,
                p.e_norm,
                p.cost
            )?;
        }
        Ok(())
    }
}

/// Evaluates every `n_seq` in `1..=n_word` with `n_par = ceil(n_word / n_seq)`.
///
/// Each metric is divided by its smallest value in the sweep, so the best
/// point of every metric scores 1 and the cost does not depend on units.
/// Cost ties go to the smaller `n_seq`.
pub fn sweep(
    n_word: usize,
    tech: &TechParams,
    weights: &CostWeights,
    p_mm: f64,
) -> Result<Sweep, ArchError> {
    weights.validate()?;
    check_probability(p_mm)?;
    if n_word == 0 {
        return Err(ArchError::InvalidConfig("n_word must be at least 1".into()));
    }
    let raw: Vec<(ArchConfig, f64, f64, f64)> = (1..=n_word)
        .into_par_iter()
        .map(|n_seq| {
            let cfg = ArchConfig::for_word(n_word, n_seq).expect("n_seq >= 1");
            (
                cfg,
                latency(&cfg, tech),
                area(&cfg, tech),
                expected_energy(&cfg, tech, p_mm),
            )
        })
        .collect();

    let min_of = |f: fn(&(ArchConfig, f64, f64, f64)) -> f64| {
        raw.iter().map(f).fold(f64::INFINITY, f64::min)
    };
    let (t_min, a_min, e_min) = (min_of(|r| r.1), min_of(|r| r.2), min_of(|r| r.3));

    let points: Vec<DesignPoint> = raw
        .into_iter()
        .map(|(cfg, t, a, e)| {
            let (t_norm, a_norm, e_norm) = (t / t_min, a / a_min, e / e_min);
            DesignPoint {
                cfg,
                t_word: t,
                a_word: a,
                e_word: e,
                t_norm,
                a_norm,
                e_norm,
                cost: weights.w_e * e_norm + weights.w_l * t_norm + weights.w_a * a_norm,
            }
        })
        .collect();
    let mut best = 0;
    for (k, p) in points.iter().enumerate() {
        if p.cost < points[best].cost {
            best = k;
        }
    }
    Ok(Sweep { points, best })
}

/// True if `values` never rises and then falls again: a non-increasing run
/// followed by a non-decreasing run.
pub fn is_unimodal(values: &[f64]) -> bool {
    let mut rising = false;
    for w in values.windows(2) {
        if w[1] > w[0] {
            rising = true;
        } else if rising && w[1] < w[0] {
            return false;
        }
    }
    true
}
