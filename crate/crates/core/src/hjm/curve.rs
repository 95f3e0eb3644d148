//! Initial discount curves and piecewise-linear knot functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T ↦ P_0^T`, log-linear between pillars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCurve {
    /// `P_0^T = e^{-rT}`.
    Flat { rate: f64 },
    /// Pillars `(T_i, P_0^{T_i})`; `(0, 1)` is implied. Beyond the last
    /// pillar the last forward rate is extended.
    Pillars {
        maturities: Vec<f64>,
        discounts: Vec<f64>,
    },
}

impl InitialCurve {
    pub fn flat(rate: f64) -> Self {
        InitialCurve::Flat { rate }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCurve::Flat { rate } => {
                if !rate.is_finite() {
                    return Err(Error::invalid("rate", "must be finite"));
                }
            }
            InitialCurve::Pillars {
                maturities,
                discounts,
            } => {
                if maturities.is_empty() || maturities.len() != discounts.len() {
                    return Err(Error::invalid(
                        "discounts",
                        "need one discount factor per maturity",
                    ));
                }
                let mut prev = 0.0;
                for (i, (&t, &p)) in maturities.iter().zip(discounts).enumerate() {
                    if !(t > prev) {
                        return Err(Error::invalid(
                            format!("maturities[{i}]"),
                            "must be positive and strictly increasing",
                        ));
                    }
                    if !(p > 0.0) || !p.is_finite() {
                        return Err(Error::invalid(
                            format!("discounts[{i}]"),
                            "must be positive",
                        ));
                    }
                    prev = t;
                }
            }
        }
        Ok(())
    }

    fn nodes(maturities: &[f64], discounts: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut t = vec![0.0];
        let mut y = vec![0.0];
        t.extend_from_slice(maturities);
        y.extend(discounts.iter().map(|p| p.ln()));
        (t, y)
    }

    pub fn ln_discount(&self, maturity: f64) -> f64 {
        match self {
            InitialCurve::Flat { rate } => -rate * maturity,
            InitialCurve::Pillars {
                maturities,
                discounts,
            } => {
                let (t, y) = Self::nodes(maturities, discounts);
                let i = t.partition_point(|&k| k <= maturity).clamp(1, t.len() - 1) - 1;
                let slope = (y[i + 1] - y[i]) / (t[i + 1] - t[i]);
                y[i] + slope * (maturity - t[i])
            }
        }
    }

    pub fn discount(&self, maturity: f64) -> f64 {
        self.ln_discount(maturity).exp()
    }

    /// `f(0, T) = -∂_T log P_0^T`; at a pillar the two one-sided rates are averaged.
    pub fn forward(&self, maturity: f64) -> f64 {
        match self {
            InitialCurve::Flat { rate } => *rate,
            InitialCurve::Pillars {
                maturities,
                discounts,
            } => {
                let (t, y) = Self::nodes(maturities, discounts);
                let seg = |i: usize| -(y[i + 1] - y[i]) / (t[i + 1] - t[i]);
                let last = t.len() - 2;
                let right = t.partition_point(|&k| k <= maturity).clamp(1, t.len() - 1) - 1;
                let left = t.partition_point(|&k| k < maturity).clamp(1, t.len() - 1) - 1;
                0.5 * (seg(right.min(last)) + seg(left.min(last)))
            }
        }
    }
}

/// Piecewise-linear function of time with constant extrapolation; values may
/// have any sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knots {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for Knots {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl Knots {
    pub fn constant(v: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![v],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::invalid("values", "need one value per knot time"));
        }
        if self.times[0] != 0.0 {
            return Err(Error::invalid("times[0]", "first knot must be at time 0"));
        }
        for i in 1..self.times.len() {
            if !(self.times[i] > self.times[i - 1]) {
                return Err(Error::invalid(
                    format!("times[{i}]"),
                    "must be strictly increasing",
                ));
            }
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("values[{i}]"), "must be finite"));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&k| k <= t) - 1;
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }
}
