use serde::{Deserialize, Serialize};

/// A closed interval whose sides may be wildcards (`None`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Interval {
    pub lb: Option<f64>,
    pub hb: Option<f64>,
}

impl Interval {
    pub const WILDCARD: Interval = Interval { lb: None, hb: None };

    pub fn new(lb: Option<f64>, hb: Option<f64>) -> Self {
        Self { lb, hb }
    }

    pub fn bounded(lb: f64, hb: f64) -> Self {
        Self {
            lb: Some(lb),
            hb: Some(hb),
        }
    }

    pub fn is_wildcard(&self) -> bool {
        self.lb.is_none() && self.hb.is_none()
    }

    /// Number of stored (non-wildcard) inequalities, 0 to 2.
    pub fn n_inequalities(&self) -> usize {
        self.lb.is_some() as usize + self.hb.is_some() as usize
    }

    #[inline]
    pub fn lb_violated(&self, x: f64) -> bool {
        matches!(self.lb, Some(lb) if x < lb)
    }

    #[inline]
    pub fn hb_violated(&self, x: f64) -> bool {
        matches!(self.hb, Some(hb) if x > hb)
    }

    /// Closed containment; wildcard sides always hold.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        !self.lb_violated(x) && !self.hb_violated(x)
    }

    /// Tighten the lower side to `max(lb, t)`.
    pub fn raise_lb(&mut self, t: f64) {
        self.lb = Some(self.lb.map_or(t, |lb| lb.max(t)));
    }

    /// Tighten the upper side to `min(hb, t)`.
    pub fn lower_hb(&mut self, t: f64) {
        self.hb = Some(self.hb.map_or(t, |hb| hb.min(t)));
    }
}

/// Which side of an interval an inequality checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// One stored inequality of a word, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub feature: usize,
    pub side: Side,
    pub bound: f64,
}

impl Inequality {
    #[inline]
    pub fn violated(&self, x: f64) -> bool {
        match self.side {
            Side::Lower => x < self.bound,
            Side::Upper => x > self.bound,
        }
    }
}

/// Non-wildcard inequalities of a word in feature order, lower side first.
pub fn inequalities(intervals: &[Interval]) -> impl Iterator<Item = Inequality> + '_ {
    intervals.iter().enumerate().flat_map(|(feature, iv)| {
        let lo = iv.lb.map(|bound| Inequality {
            feature,
            side: Side::Lower,
            bound,
        });
        let hi = iv.hb.map(|bound| Inequality {
            feature,
            side: Side::Upper,
            bound,
        });
        lo.into_iter().chain(hi)
    })
}
