//! Bound to conductance mapping and level quantization.

use super::tech::TechParams;
use super::DeviceError;

/// Maps a normalized threshold onto the conductance window, `g_min` at 0 and
/// `g_max` at 1.
pub fn bound_to_conductance(threshold: f64, window: [f64; 2]) -> Result<f64, DeviceError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(DeviceError::Domain(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    Ok((1.0 - threshold) * window[0] + threshold * window[1])
}

/// Inverse of [`bound_to_conductance`], without clamping.
pub fn conductance_to_bound(g: f64, window: [f64; 2]) -> f64 {
    (g - window[0]) / (window[1] - window[0])
}

/// Conductance of level `k` out of `n_levels` equally spaced levels.
pub fn level_value(k: u32, tech: &TechParams) -> f64 {
    let t = k as f64 / (tech.n_levels - 1) as f64;
    (1.0 - t) * tech.g_min() + t * tech.g_max()
}

/// Index of the nearest level; exact midpoints go to the lower level.
pub fn level_index(g: f64, tech: &TechParams) -> u32 {
    let top = tech.n_levels - 1;
    let pos = (g - tech.g_min()) / (tech.g_max() - tech.g_min()) * top as f64;
    let k = (pos - 0.5).ceil();
    k.clamp(0.0, top as f64) as u32
}

/// Snaps `g` to the nearest programmable level.
pub fn quantize_conductance(g: f64, tech: &TechParams) -> f64 {
    level_value(level_index(g, tech), tech)
}
