//! Parametric stand-ins for SPICE-extracted tables.
//!
//! Transfer tables follow a logistic characteristic around the switching
//! voltage of the programmed conductance; the pull-down table is a square-law
//! device with a linear region below `v_sat`. A large gain gives the steep,
//! rail-to-rail latch characteristic, a small gain the shallow divider one.

use std::collections::BTreeMap;

use super::lut::{ArchKind, Grid2, LutSet, Polarity, PulldownLut, TransferLut};
use super::tech::TechParams;
use super::DeviceError;

/// Transfer gain of the latched cell (1/V).
pub const GAIN_SALM: f64 = 500.0;
/// Transfer gain of the divider cell (1/V).
pub const GAIN_6T2M: f64 = 10.0;
/// Pull-down threshold voltage (V).
pub const PULLDOWN_V_TH: f64 = 0.3;
/// Square-law transconductance factor (A/V²).
pub const PULLDOWN_K: f64 = 80e-6;
/// Match-line voltage below which the pull-down leaves saturation (V).
pub const PULLDOWN_V_SAT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSizes {
    /// Points along both transfer axes. Equal counts keep the switching
    /// diagonal on grid nodes.
    pub transfer: usize,
    /// Points along both pull-down axes.
    pub pulldown: usize,
}

impl Default for GridSizes {
    fn default() -> Self {
        Self {
            transfer: 161,
            pulldown: 81,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulldownParams {
    pub v_th: f64,
    pub k: f64,
    pub v_sat: f64,
}

impl Default for PulldownParams {
    fn default() -> Self {
        Self {
            v_th: PULLDOWN_V_TH,
            k: PULLDOWN_K,
            v_sat: PULLDOWN_V_SAT,
        }
    }
}

impl PulldownParams {
    pub fn current(&self, v_ml: f64, v_x: f64) -> f64 {
        if v_x <= self.v_th || v_ml <= 0.0 {
            return 0.0;
        }
        let ov = v_x - self.v_th;
        self.k * ov * ov * (v_ml / self.v_sat).min(1.0)
    }
}

/// Default transfer gain for a cell family. `Ideal` has no finite gain.
pub fn default_gain(kind: ArchKind) -> f64 {
    match kind {
        ArchKind::Salm => GAIN_SALM,
        ArchKind::SixT2M => GAIN_6T2M,
        ArchKind::Ideal => f64::INFINITY,
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Closed-form comparator output. `v_t` is the switching voltage of the
/// stored bound; an infinite gain gives the exact step with closed bounds.
pub fn transfer_closed_form(polarity: Polarity, v_dl: f64, v_t: f64, gain: f64, v_dd: f64) -> f64 {
    let margin = match polarity {
        Polarity::LowerBound => v_t - v_dl,
        Polarity::UpperBound => v_dl - v_t,
    };
    if gain.is_infinite() {
        return if margin > 0.0 { v_dd } else { 0.0 };
    }
    v_dd * logistic(gain * margin)
}

/// Switching voltage of conductance `g`: the window maps affinely onto the
/// data-line range `[0, v_dd]`.
pub fn switch_voltage(g: f64, tech: &TechParams) -> f64 {
    tech.v_dd * (g - tech.g_min()) / (tech.g_max() - tech.g_min())
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (1.0 - t) * a + t * b
        })
        .collect()
}

/// Generates a LUT set for `kind`. `gain` is ignored for `Ideal`.
pub fn gen_synthetic_luts(
    tech: &TechParams,
    kind: ArchKind,
    gain: f64,
    sizes: GridSizes,
    pulldown: PulldownParams,
) -> Result<LutSet, DeviceError> {
    tech.validate()?;
    if kind != ArchKind::Ideal && !(gain.is_finite() && gain > 0.0) {
        return Err(DeviceError::InvalidSynth(format!(
            "gain must be finite and positive, got {gain}"
        )));
    }
    if sizes.transfer < 2 || sizes.pulldown < 2 {
        return Err(DeviceError::InvalidSynth(format!(
            "grid sizes must be at least 2 per axis, got {sizes:?}"
        )));
    }
    if !(pulldown.k > 0.0 && pulldown.v_sat > 0.0 && pulldown.v_th >= 0.0) {
        return Err(DeviceError::InvalidSynth(format!(
            "invalid pull-down parameters {pulldown:?}"
        )));
    }
    let gain = if kind == ArchKind::Ideal {
        f64::INFINITY
    } else {
        gain
    };

    let v_axis = linspace(0.0, tech.v_dd, sizes.transfer);
    let g_axis = linspace(tech.g_min(), tech.g_max(), sizes.transfer);
    let transfer = |polarity: Polarity| -> Result<TransferLut, DeviceError> {
        let grid = Grid2::sample("v_dl", v_axis.clone(), "g_mem", g_axis.clone(), |i, j| {
            let v_t = switch_voltage(g_axis[j], tech);
            transfer_closed_form(polarity, v_axis[i], v_t, gain, tech.v_dd).clamp(0.0, tech.v_dd)
        })?;
        TransferLut::new(grid, polarity)
    };
    let lb = transfer(Polarity::LowerBound)?;
    let hb = transfer(Polarity::UpperBound)?;

    let pv = linspace(0.0, tech.v_dd, sizes.pulldown);
    let pgrid = Grid2::sample("v_ml", pv.clone(), "v_x", pv.clone(), |i, j| {
        pulldown.current(pv[i], pv[j])
    })?;
    let pull = PulldownLut::new(pgrid)?;

    let mut metadata = BTreeMap::new();
    metadata.insert("source".to_string(), "synthetic".to_string());
    metadata.insert("gain_per_volt".to_string(), format!("{gain}"));
    metadata.insert("v_dd".to_string(), format!("{}", tech.v_dd));
    metadata.insert(
        "pulldown".to_string(),
        format!(
            "square-law v_th={} k={} v_sat={}",
            pulldown.v_th, pulldown.k, pulldown.v_sat
        ),
    );
    LutSet::new(lb, hb, pull, kind, metadata)
}

/// Shipped defaults for `kind`.
pub fn default_luts(tech: &TechParams, kind: ArchKind) -> Result<LutSet, DeviceError> {
    gen_synthetic_luts(
        tech,
        kind,
        default_gain(kind),
        GridSizes::default(),
        PulldownParams::default(),
    )
}
