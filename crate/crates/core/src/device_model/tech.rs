//! Technology calibration constants.
//!
//! Every key has a built-in default so a config file only needs to list the
//! values it overrides. The file is flat `key = value` TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DeviceError;

/// Latch-shared cell energy per evaluation step (J).
pub const E_CELL_SALM: f64 = 8.8e-15;
/// Static-divider baseline cell energy per search (J).
pub const E_CELL_6T2M: f64 = 13.13e-15;
/// Area of one latch with two 1T1R branches (µm²).
pub const A_CELL_SALM: f64 = 0.498;
/// Area of one baseline cell (µm²).
pub const A_CELL_6T2M: f64 = 0.170;
/// Default 1T1R branch area (µm²). The latch area is the remainder of
/// [`A_CELL_SALM`] after two branches.
pub const A_1T1R_DEFAULT: f64 = 0.035;
/// Evaluation time of one latch step (s).
pub const T_LATCH_DEFAULT: f64 = 3e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TechParams {
    /// Supply voltage (V). The data-line range is `[0, v_dd]`.
    pub v_dd: f64,
    /// Latch evaluation time per sequential step (s).
    pub t_latch: f64,
    /// Energy per evaluated cell (J).
    pub e_cell: f64,
    /// Latch area (µm²).
    pub a_latch: f64,
    /// 1T1R branch area (µm²).
    pub a_1t1r: f64,
    /// Lumped match-line capacitance (F).
    pub c_ml: f64,
    /// Match-line sense threshold (V).
    pub v_ref: f64,
    /// Programmable conductance window `[g_min, g_max]` (S).
    pub g_window: [f64; 2],
    /// Number of programmable conductance levels across the window.
    pub n_levels: u32,
    /// Integration time step (s).
    pub dt: f64,
    /// End of the evaluation window (s).
    pub t_max: f64,
}

impl Default for TechParams {
    fn default() -> Self {
        Self {
            v_dd: 0.8,
            t_latch: T_LATCH_DEFAULT,
            e_cell: E_CELL_SALM,
            a_latch: A_CELL_SALM - 2.0 * A_1T1R_DEFAULT,
            a_1t1r: A_1T1R_DEFAULT,
            c_ml: 20e-15,
            v_ref: 0.4,
            g_window: [1e-6, 2e-6],
            n_levels: 64,
            dt: 1e-12,
            t_max: 1e-9,
        }
    }
}

impl TechParams {
    /// Shipped calibration for the latch-shared cell.
    pub fn salm() -> Self {
        Self::default()
    }

    /// Shipped calibration for the static-divider baseline. Only the cell
    /// energy differs; the match-line and conductance constants are shared.
    pub fn six_t2m() -> Self {
        Self {
            e_cell: E_CELL_6T2M,
            ..Self::default()
        }
    }

    pub fn g_min(&self) -> f64 {
        self.g_window[0]
    }

    pub fn g_max(&self) -> f64 {
        self.g_window[1]
    }

    /// Number of Euler steps in the evaluation window.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = [
            ("v_dd", self.v_dd),
            ("t_latch", self.t_latch),
            ("e_cell", self.e_cell),
            ("a_latch", self.a_latch),
            ("a_1t1r", self.a_1t1r),
            ("c_ml", self.c_ml),
            ("v_ref", self.v_ref),
            ("g_min", self.g_window[0]),
            ("g_max", self.g_window[1]),
            ("dt", self.dt),
            ("t_max", self.t_max),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DeviceError::InvalidTech(format!(
                    "{key} must be finite and strictly positive, got {value}"
                )));
            }
        }
        if self.g_window[0] >= self.g_window[1] {
            return Err(DeviceError::InvalidTech(format!(
                "g_window must satisfy g_min < g_max, got {:?}",
                self.g_window
            )));
        }
        if self.v_ref >= self.v_dd {
            return Err(DeviceError::InvalidTech(format!(
                "v_ref ({}) must lie strictly below v_dd ({})",
                self.v_ref, self.v_dd
            )));
        }
        if self.dt > self.t_max {
            return Err(DeviceError::InvalidTech(format!(
                "dt ({}) must not exceed t_max ({})",
                self.dt, self.t_max
            )));
        }
        if self.n_levels < 2 {
            return Err(DeviceError::InvalidTech(format!(
                "n_levels must be at least 2, got {}",
                self.n_levels
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DeviceError> {
        let tech: TechParams =
            toml::from_str(text).map_err(|e| DeviceError::InvalidTech(e.to_string()))?;
        tech.validate()?;
        Ok(tech)
    }

    pub fn load(path: &Path) -> Result<Self, DeviceError> {
        let text = std::fs::read_to_string(path).map_err(|source| DeviceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("TechParams always serializes")
    }
}
