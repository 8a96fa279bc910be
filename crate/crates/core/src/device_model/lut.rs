use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DeviceError;

/// Which inequality a transfer table implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    LowerBound,
    UpperBound,
}

impl Polarity {
    pub fn tag(self) -> &'static str {
        match self {
            Polarity::LowerBound => "lb",
            Polarity::UpperBound => "hb",
        }
    }
}

/// Cell family a LUT set was characterized for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchKind {
    /// Latched, rail-to-rail comparator outputs.
    Salm,
    /// Static voltage-divider cell with shallow gain.
    SixT2M,
    /// Exact step characteristic.
    Ideal,
}

impl ArchKind {
    pub fn tag(self) -> &'static str {
        match self {
            ArchKind::Salm => "salm",
            ArchKind::SixT2M => "6t2m",
            ArchKind::Ideal => "ideal",
        }
    }

    /// Whether comparator outputs resolve to the rails before they drive the
    /// match line.
    pub fn is_latched(self) -> bool {
        matches!(self, ArchKind::Salm | ArchKind::Ideal)
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ArchKind {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "salm" => Ok(ArchKind::Salm),
            "6t2m" | "sixt2m" => Ok(ArchKind::SixT2M),
            "ideal" => Ok(ArchKind::Ideal),
            other => Err(DeviceError::UnknownArchKind(other.to_string())),
        }
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 1.0 {
        b
    } else {
        a + (b - a) * t
    }
}

/// Locate the interpolation cell of `x` on a strictly increasing axis,
/// clamping to the end points.
#[inline]
pub(crate) fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    let i = i.min(n - 2);
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t)
}

/// Linear interpolation on a 1-D table with clamping.
#[inline]
pub(crate) fn interp1(axis: &[f64], values: &[f64], x: f64) -> f64 {
    let (i, t) = locate(axis, x);
    lerp(values[i], values[i + 1], t)
}

/// A rectilinear 2-D table, row-major: `values[i * ny + j]` belongs to
/// `(x_axis[i], y_axis[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    x_axis: Vec<f64>,
    y_axis: Vec<f64>,
    values: Vec<f64>,
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<(), DeviceError> {
    if axis.len() < 2 {
        return Err(DeviceError::AxisTooShort {
            axis: name,
            len: axis.len(),
        });
    }
    for (index, w) in axis.windows(2).enumerate() {
        if !(w[0].is_finite() && w[1].is_finite() && w[1] > w[0]) {
            return Err(DeviceError::NonMonotoneAxis {
                axis: name,
                index: index + 1,
            });
        }
    }
    Ok(())
}

impl Grid2 {
    pub fn new(
        x_name: &'static str,
        x_axis: Vec<f64>,
        y_name: &'static str,
        y_axis: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, DeviceError> {
        check_axis(x_name, &x_axis)?;
        check_axis(y_name, &y_axis)?;
        let expected = x_axis.len() * y_axis.len();
        if values.len() != expected {
            return Err(DeviceError::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(DeviceError::ValueOutOfRange {
                row: k / y_axis.len(),
                col: k % y_axis.len(),
                value: values[k],
                reason: "not finite",
            });
        }
        Ok(Self {
            x_axis,
            y_axis,
            values,
        })
    }

    /// Builds a grid by sampling `f(x, y)` on the given axes.
    pub fn sample(
        x_name: &'static str,
        x_axis: Vec<f64>,
        y_name: &'static str,
        y_axis: Vec<f64>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, DeviceError> {
        let mut values = Vec::with_capacity(x_axis.len() * y_axis.len());
        for i in 0..x_axis.len() {
            for j in 0..y_axis.len() {
                values.push(f(i, j));
            }
        }
        Self::new(x_name, x_axis, y_name, y_axis, values)
    }

    pub fn x_axis(&self) -> &[f64] {
        &self.x_axis
    }

    pub fn y_axis(&self) -> &[f64] {
        &self.y_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.y_axis.len() + j]
    }

    /// Bilinear interpolation. Inputs outside the axes are clamped to the
    /// nearest edge, so the result is defined and continuous on all of ℝ².
    /// Interpolates along `y` first, then along `x`.
    #[inline]
    pub fn interp(&self, x: f64, y: f64) -> f64 {
        let (i, tx) = locate(&self.x_axis, x);
        let (j, ty) = locate(&self.y_axis, y);
        let r0 = lerp(self.at(i, j), self.at(i, j + 1), ty);
        let r1 = lerp(self.at(i + 1, j), self.at(i + 1, j + 1), ty);
        lerp(r0, r1, tx)
    }

    /// The column of the table at a fixed `y`, i.e. `interp(x_k, y)` for every
    /// node `x_k` of the x axis.
    pub fn column_at(&self, y: f64, out: &mut [f64]) {
        let (j, ty) = locate(&self.y_axis, y);
        for (i, slot) in out.iter_mut().enumerate().take(self.x_axis.len()) {
            *slot = lerp(self.at(i, j), self.at(i, j + 1), ty);
        }
    }

    fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Direction in which a transfer characteristic moves along the data line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    NonIncreasing,
    NonDecreasing,
    Flat,
}

/// Comparator output `V_X(V_DL, G_MEM)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferLut {
    grid: Grid2,
    polarity: Polarity,
}

impl TransferLut {
    /// `grid` is indexed by `(v_dl, g_mem)`. The data-line axis is taken to
    /// span `[0, V_DD]`; every value must lie in that range and be monotone in
    /// `v_dl` with one direction across all conductance columns.
    pub fn new(grid: Grid2, polarity: Polarity) -> Result<Self, DeviceError> {
        let v_dd = *grid.x_axis.last().unwrap();
        let ny = grid.y_axis.len();
        for (k, &v) in grid.values.iter().enumerate() {
            if v < 0.0 || v > v_dd {
                return Err(DeviceError::ValueOutOfRange {
                    row: k / ny,
                    col: k % ny,
                    value: v,
                    reason: "transfer output outside [0, V_DD]",
                });
            }
        }
        let lut = Self { grid, polarity };
        lut.trend()?;
        Ok(lut)
    }

    /// Monotone direction along `v_dl`, or an error naming the first column
    /// that disagrees.
    pub fn trend(&self) -> Result<Trend, DeviceError> {
        let nx = self.grid.x_axis.len();
        let ny = self.grid.y_axis.len();
        let mut trend = Trend::Flat;
        for j in 0..ny {
            for i in 1..nx {
                let d = self.grid.at(i, j) - self.grid.at(i - 1, j);
                let step = if d > 0.0 {
                    Trend::NonDecreasing
                } else if d < 0.0 {
                    Trend::NonIncreasing
                } else {
                    continue;
                };
                match trend {
                    Trend::Flat => trend = step,
                    t if t != step => {
                        return Err(DeviceError::NonMonotoneTransfer { row: i, col: j });
                    }
                    _ => {}
                }
            }
        }
        Ok(trend)
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn v_dl_axis(&self) -> &[f64] {
        &self.grid.x_axis
    }

    pub fn g_mem_axis(&self) -> &[f64] {
        &self.grid.y_axis
    }

    /// Upper end of the data-line axis.
    pub fn v_dd(&self) -> f64 {
        *self.grid.x_axis.last().unwrap()
    }

    #[inline]
    pub fn interp(&self, v_dl: f64, g_mem: f64) -> f64 {
        self.grid.interp(v_dl, g_mem)
    }

    /// The data-line voltage at which a cell programmed with `g_mem` switches,
    /// assuming the affine conductance to voltage map over the table's axes.
    #[inline]
    pub fn switch_voltage(&self, g_mem: f64) -> f64 {
        let g = &self.grid.y_axis;
        let v = &self.grid.x_axis;
        let (g_lo, g_hi) = (g[0], g[g.len() - 1]);
        let (v_lo, v_hi) = (v[0], v[v.len() - 1]);
        v_lo + (g_mem - g_lo) / (g_hi - g_lo) * (v_hi - v_lo)
    }
}

/// Pull-down current `I_ML(V_ML, V_X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulldownLut {
    grid: Grid2,
}

impl PulldownLut {
    /// `grid` is indexed by `(v_ml, v_x)`. Currents must be non-negative,
    /// non-decreasing in `v_x`, and zero on a fully discharged line.
    pub fn new(grid: Grid2) -> Result<Self, DeviceError> {
        let nx = grid.x_axis.len();
        let ny = grid.y_axis.len();
        if grid.x_axis[0] > 0.0 {
            return Err(DeviceError::ValueOutOfRange {
                row: 0,
                col: 0,
                value: grid.x_axis[0],
                reason: "v_ml axis must start at or below 0 V",
            });
        }
        for i in 0..nx {
            for j in 0..ny {
                let v = grid.at(i, j);
                if v < 0.0 {
                    return Err(DeviceError::ValueOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                        reason: "negative pull-down current",
                    });
                }
                if grid.x_axis[i] <= 0.0 && v != 0.0 {
                    return Err(DeviceError::ValueOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                        reason: "current must vanish at V_ML = 0",
                    });
                }
                if j > 0 && v < grid.at(i, j - 1) {
                    return Err(DeviceError::ValueOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                        reason: "current decreases with V_X",
                    });
                }
            }
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn v_ml_axis(&self) -> &[f64] {
        &self.grid.x_axis
    }

    pub fn v_x_axis(&self) -> &[f64] {
        &self.grid.y_axis
    }

    /// Largest gate voltage at which the device conducts nothing for any
    /// line voltage, or `-inf` if it always conducts.
    pub fn zero_current_cutoff(&self) -> f64 {
        let ny = self.grid.y_axis.len();
        let off = (0..ny)
            .take_while(|&j| (0..self.grid.x_axis.len()).all(|i| self.grid.at(i, j) == 0.0))
            .last();
        off.map_or(f64::NEG_INFINITY, |j| self.grid.y_axis[j])
    }

    #[inline]
    pub fn interp(&self, v_ml: f64, v_x: f64) -> f64 {
        self.grid.interp(v_ml, v_x)
    }

    /// Accumulates `I_ML(v_ml_k, v_x)` for every node `v_ml_k` into `acc`.
    pub fn accumulate_column(&self, v_x: f64, acc: &mut [f64], scratch: &mut [f64]) {
        self.grid.column_at(v_x, scratch);
        for (a, s) in acc.iter_mut().zip(scratch.iter()) {
            *a += *s;
        }
    }
}

/// The three tables describing one cell family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutSet {
    pub lb: TransferLut,
    pub hb: TransferLut,
    pub pulldown: PulldownLut,
    pub arch_kind: ArchKind,
    pub metadata: BTreeMap<String, String>,
}

impl LutSet {
    pub fn new(
        lb: TransferLut,
        hb: TransferLut,
        pulldown: PulldownLut,
        arch_kind: ArchKind,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, DeviceError> {
        if lb.polarity != Polarity::LowerBound || hb.polarity != Polarity::UpperBound {
            return Err(DeviceError::Inconsistent(
                "lb/hb tables carry the wrong polarity".into(),
            ));
        }
        let (lg, hg) = (lb.g_mem_axis(), hb.g_mem_axis());
        if lg[0] != hg[0] || lg[lg.len() - 1] != hg[hg.len() - 1] {
            return Err(DeviceError::Inconsistent(
                "lb and hb tables span different conductance windows".into(),
            ));
        }
        let orientation = (lb.trend()?, hb.trend()?);
        match orientation {
            (Trend::NonIncreasing, Trend::NonDecreasing)
            | (Trend::NonDecreasing, Trend::NonIncreasing)
            | (Trend::Flat, _)
            | (_, Trend::Flat) => {}
            _ => {
                return Err(DeviceError::Inconsistent(
                    "lb and hb transfer tables share one orientation; they must mirror".into(),
                ))
            }
        }
        Ok(Self {
            lb,
            hb,
            pulldown,
            arch_kind,
            metadata,
        })
    }

    pub fn transfer(&self, polarity: Polarity) -> &TransferLut {
        match polarity {
            Polarity::LowerBound => &self.lb,
            Polarity::UpperBound => &self.hb,
        }
    }

    /// Comparator output for one inequality. `Ideal` sets evaluate the exact
    /// step (closed interval: a query on the stored bound matches); all other
    /// kinds interpolate their tables.
    #[inline]
    pub fn drive(&self, polarity: Polarity, v_dl: f64, g_mem: f64) -> f64 {
        let lut = self.transfer(polarity);
        if self.arch_kind != ArchKind::Ideal {
            return lut.interp(v_dl, g_mem);
        }
        let v_dd = lut.v_dd();
        let v_dl = v_dl.clamp(0.0, v_dd);
        let v_t = lut.switch_voltage(g_mem);
        let violated = match polarity {
            Polarity::LowerBound => v_dl < v_t,
            Polarity::UpperBound => v_dl > v_t,
        };
        if violated {
            v_dd
        } else {
            0.0
        }
    }

    /// Range of values stored in the tables, for reporting.
    pub fn summary(&self) -> String {
        let (lo, hi) = self.pulldown.grid.min_max();
        format!(
            "{} lut set: transfer {}x{}, pulldown {}x{} (I_ML {:.3e}..{:.3e} A)",
            self.arch_kind,
            self.lb.v_dl_axis().len(),
            self.lb.g_mem_axis().len(),
            self.pulldown.v_ml_axis().len(),
            self.pulldown.v_x_axis().len(),
            lo,
            hi
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Grid2 {
        let xs: Vec<f64> = (0..nx).map(|i| i as f64 / (nx - 1) as f64).collect();
        let ys: Vec<f64> = (0..ny).map(|j| 10.0 + j as f64).collect();
        let (xa, ya) = (xs.clone(), ys.clone());
        Grid2::sample("x", xs, "y", ys, |i, j| f(xa[i], ya[j])).unwrap()
    }

    #[test]
    fn exact_at_nodes() {
        let g = grid(5, 4, |x, y| x * x + 3.0 * y.sin());
        for i in 0..5 {
            for j in 0..4 {
                assert_eq!(g.interp(g.x_axis()[i], g.y_axis()[j]), g.at(i, j));
            }
        }
    }

    #[test]
    fn midpoint_of_cell() {
        let g = Grid2::new("x", vec![0.0, 1.0], "y", vec![0.0, 1.0], vec![0.0, 0.0, 1.0, 1.0])
            .unwrap();
        assert_eq!(g.interp(0.5, 0.5), 0.5);
    }

    #[test]
    fn clamps_outside() {
        let g = grid(3, 3, |x, y| x + y);
        assert_eq!(g.interp(-5.0, 10.0), g.at(0, 0));
        assert_eq!(g.interp(7.0, 100.0), g.at(2, 2));
        assert_eq!(g.interp(-1.0, 11.5), g.interp(0.0, 11.5));
    }

    #[test]
    fn rejects_decreasing_axis() {
        let err = Grid2::new("v_dl", vec![0.0, 0.5, 0.4], "g", vec![1.0, 2.0], vec![0.0; 6])
            .unwrap_err();
        assert!(matches!(
            err,
            DeviceError::NonMonotoneAxis {
                axis: "v_dl",
                index: 2
            }
        ));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let err = Grid2::new("x", vec![0.0, 1.0], "y", vec![0.0, 1.0], vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, DeviceError::DimensionMismatch { expected: 4, found: 3 }));
    }

    #[test]
    fn pulldown_must_vanish_on_empty_line() {
        let g = Grid2::new("v_ml", vec![0.0, 1.0], "v_x", vec![0.0, 1.0], vec![0.0, 1e-6, 0.0, 1e-6])
            .unwrap();
        assert!(PulldownLut::new(g).is_err());
    }

    #[test]
    fn transfer_rejects_mixed_orientation() {
        let g = Grid2::new(
            "v_dl",
            vec![0.0, 0.4, 0.8],
            "g",
            vec![1.0, 2.0],
            vec![0.8, 0.0, 0.4, 0.4, 0.0, 0.8],
        )
        .unwrap();
        assert!(matches!(
            TransferLut::new(g, Polarity::LowerBound),
            Err(DeviceError::NonMonotoneTransfer { .. })
        ));
    }

    #[test]
    fn arch_kind_parse() {
        assert_eq!("SALM".parse::<ArchKind>().unwrap(), ArchKind::Salm);
        assert_eq!("6t2m".parse::<ArchKind>().unwrap(), ArchKind::SixT2M);
        assert!("7t3m".parse::<ArchKind>().is_err());
    }
}
