//! NOR match-line discharge.
//!
//! The line is a lumped capacitor precharged to `V_DD`. Every stored
//! inequality drives one pull-down device whose current is read from the
//! pull-down table at the present line voltage; the currents add and the
//! line voltage is advanced with a fixed-step explicit Euler update, clamped
//! at 0 V. The line is sensed once, at `t_max`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device_model::lut::interp1;
use crate::device_model::{LutSet, Polarity, TechParams};
use crate::interval::Interval;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("row has {cells} cells but {voltages} data-line voltages were given")]
    LengthMismatch { cells: usize, voltages: usize },
    #[error("a row needs at least one cell")]
    EmptyRow,
    #[error("cell {index}: conductance {g} outside window [{g_min}, {g_max}]")]
    OutsideWindow {
        index: usize,
        g: f64,
        g_min: f64,
        g_max: f64,
    },
}

/// Programmed conductances of one cell; `None` is a wildcard side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellProgram {
    pub g_lb: Option<f64>,
    pub g_hb: Option<f64>,
}

impl CellProgram {
    pub const WILDCARD: CellProgram = CellProgram {
        g_lb: None,
        g_hb: None,
    };

    pub fn is_wildcard(&self) -> bool {
        self.g_lb.is_none() && self.g_hb.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RowProgram {
    pub cells: Vec<CellProgram>,
}

impl RowProgram {
    pub fn new(cells: Vec<CellProgram>) -> Result<Self, SimError> {
        if cells.is_empty() {
            return Err(SimError::EmptyRow);
        }
        Ok(Self { cells })
    }

    pub fn validate(&self, window: [f64; 2]) -> Result<(), SimError> {
        if self.cells.is_empty() {
            return Err(SimError::EmptyRow);
        }
        for (index, c) in self.cells.iter().enumerate() {
            for g in [c.g_lb, c.g_hb].into_iter().flatten() {
                if !(window[0]..=window[1]).contains(&g) {
                    return Err(SimError::OutsideWindow {
                        index,
                        g,
                        g_min: window[0],
                        g_max: window[1],
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Match,
    Mismatch,
}

impl Decision {
    pub fn is_match(self) -> bool {
        self == Decision::Match
    }

    pub fn from_match(m: bool) -> Self {
        if m {
            Decision::Match
        } else {
            Decision::Mismatch
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlTrace {
    pub times: Vec<f64>,
    pub v_ml: Vec<f64>,
    pub i_total: Vec<f64>,
    pub v_ml_final: f64,
}

impl MlTrace {
    /// CSV with columns `time_s,v_ml_V,i_total_A`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,v_ml_V,i_total_A")?;
        for ((t, v), i) in self.times.iter().zip(&self.v_ml).zip(&self.i_total) {
            writeln!(w, "{t:.6e},{v:.9e},{i:.9e}")?;
        }
        Ok(())
    }
}

/// Comparator outputs `(V_X,LB, V_X,HB)` of one cell. Wildcard sides give 0 V.
pub fn cell_drive(luts: &LutSet, v_dl: f64, cell: &CellProgram) -> (f64, f64) {
    let v_dl = v_dl.clamp(0.0, luts.lb.v_dd());
    let lb = cell
        .g_lb
        .map_or(0.0, |g| luts.drive(Polarity::LowerBound, v_dl, g));
    let hb = cell
        .g_hb
        .map_or(0.0, |g| luts.drive(Polarity::UpperBound, v_dl, g));
    (lb, hb)
}

/// Latched cells resolve their comparator output to a rail before it reaches
/// the pull-down device; an output of exactly half the supply resolves low,
/// matching the closed-interval convention.
#[inline]
fn resolve(luts: &LutSet, v_x: f64, v_dd: f64) -> f64 {
    if !luts.arch_kind.is_latched() {
        return v_x;
    }
    if v_x > 0.5 * v_dd {
        v_dd
    } else {
        0.0
    }
}

/// Pull-down gate voltages of every stored inequality in a row.
fn for_each_drive<'c>(
    cells: impl IntoIterator<Item = (&'c CellProgram, f64)>,
    luts: &LutSet,
    tech: &TechParams,
    mut f: impl FnMut(f64),
) {
    for (cell, v_dl) in cells {
        let (lb, hb) = cell_drive(luts, v_dl, cell);
        if cell.g_lb.is_some() {
            f(resolve(luts, lb, tech.v_dd));
        }
        if cell.g_hb.is_some() {
            f(resolve(luts, hb, tech.v_dd));
        }
    }
}

#[inline]
fn euler_step(v_ml: f64, i_total: f64, tech: &TechParams) -> f64 {
    (v_ml - i_total / tech.c_ml * tech.dt).max(0.0)
}

/// Full transient of one row. Currents are read from the pull-down table for
/// every inequality at every step.
pub fn row_discharge(
    row: &RowProgram,
    v_dls: &[f64],
    luts: &LutSet,
    tech: &TechParams,
) -> Result<MlTrace, SimError> {
    if row.cells.is_empty() {
        return Err(SimError::EmptyRow);
    }
    if row.cells.len() != v_dls.len() {
        return Err(SimError::LengthMismatch {
            cells: row.cells.len(),
            voltages: v_dls.len(),
        });
    }
    let mut drives = Vec::new();
    for_each_drive(row.cells.iter().zip(v_dls.iter().copied()), luts, tech, |v| {
        drives.push(v)
    });

    let n = tech.n_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut v_ml = Vec::with_capacity(n + 1);
    let mut i_total = Vec::with_capacity(n + 1);
    let mut v = tech.v_dd;
    for k in 0..=n {
        let i: f64 = drives.iter().map(|&vx| luts.pulldown.interp(v, vx)).sum();
        times.push(k as f64 * tech.dt);
        v_ml.push(v);
        i_total.push(i);
        if k < n {
            v = euler_step(v, i, tech);
        }
    }
    Ok(MlTrace {
        times,
        v_ml,
        i_total,
        v_ml_final: v,
    })
}

/// Match iff the final line voltage is at or above the sense threshold.
pub fn sense(trace: &MlTrace, tech: &TechParams) -> Decision {
    sense_voltage(trace.v_ml_final, tech)
}

pub fn sense_voltage(v_ml_final: f64, tech: &TechParams) -> Decision {
    Decision::from_match(v_ml_final >= tech.v_ref)
}

/// Reference semantics: every non-wildcard interval contains its feature,
/// closed on both ends.
pub fn row_match_ideal(intervals: &[Interval], x: &[f64]) -> bool {
    debug_assert_eq!(intervals.len(), x.len());
    intervals.iter().zip(x).all(|(iv, &xi)| iv.contains(xi))
}

/// Reusable buffers for [`LineIntegrator`].
#[derive(Debug, Default, Clone)]
pub struct DischargeScratch {
    summed: Vec<f64>,
    column: Vec<f64>,
}

/// Fast discharge of one line. For a fixed gate voltage the bilinear table is
/// piecewise linear in `V_ML` on the table's own knots, so the currents of all
/// cells are summed once into a single curve and each Euler step does one
/// 1-D lookup. Agrees with [`row_discharge`] up to summation rounding.
pub struct LineIntegrator<'a> {
    luts: &'a LutSet,
    tech: &'a TechParams,
    cutoff: f64,
}

impl<'a> LineIntegrator<'a> {
    pub fn new(luts: &'a LutSet, tech: &'a TechParams) -> Self {
        Self {
            luts,
            tech,
            cutoff: luts.pulldown.zero_current_cutoff(),
        }
    }

    fn load<'c>(
        &self,
        cells: impl IntoIterator<Item = (&'c CellProgram, f64)>,
        scratch: &mut DischargeScratch,
    ) -> bool {
        let n = self.luts.pulldown.v_ml_axis().len();
        scratch.summed.clear();
        scratch.summed.resize(n, 0.0);
        scratch.column.resize(n, 0.0);
        let mut any = false;
        let pulldown = &self.luts.pulldown;
        let cutoff = self.cutoff;
        let DischargeScratch { summed, column } = scratch;
        for_each_drive(cells, self.luts, self.tech, |vx| {
            if vx > cutoff {
                pulldown.accumulate_column(vx, summed, column);
                any = true;
            }
        });
        any && scratch.summed.iter().any(|&i| i > 0.0)
    }

    /// Final line voltage at `t_max`.
    pub fn final_voltage<'c>(
        &self,
        cells: impl IntoIterator<Item = (&'c CellProgram, f64)>,
        scratch: &mut DischargeScratch,
    ) -> f64 {
        if !self.load(cells, scratch) {
            return self.tech.v_dd;
        }
        let axis = self.luts.pulldown.v_ml_axis();
        let mut v = self.tech.v_dd;
        for _ in 0..self.tech.n_steps() {
            let i = interp1(axis, &scratch.summed, v);
            v = euler_step(v, i, self.tech);
            if v == 0.0 {
                break;
            }
        }
        v
    }

    /// Sensed decision at `t_max`. Stops as soon as the line falls below the
    /// sense threshold, since it can never recover.
    pub fn decide<'c>(
        &self,
        cells: impl IntoIterator<Item = (&'c CellProgram, f64)>,
        scratch: &mut DischargeScratch,
    ) -> Decision {
        if !self.load(cells, scratch) {
            return sense_voltage(self.tech.v_dd, self.tech);
        }
        let axis = self.luts.pulldown.v_ml_axis();
        let mut v = self.tech.v_dd;
        for _ in 0..self.tech.n_steps() {
            let i = interp1(axis, &scratch.summed, v);
            v = euler_step(v, i, self.tech);
            if v < self.tech.v_ref {
                return Decision::Mismatch;
            }
        }
        sense_voltage(v, self.tech)
    }
}
