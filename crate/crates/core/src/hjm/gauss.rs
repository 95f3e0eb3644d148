//! Gaussian HJM bond prices and forward rates along a Brownian path.
//!
//! Stochastic integrals are left-point sums on the path grid; deterministic
//! integrals come from [`VolatilityKernel`].

use crate::error::{Error, Result};
use crate::simulation::PathGrid;

use super::{InitialCurve, VolatilityKernel};

/// Brownian path sampled on a grid, `w[k] = W(t_k)`.
#[derive(Clone, Copy, Debug)]
pub struct BrownianPath<'a> {
    pub grid: &'a PathGrid,
    pub w: &'a [f64],
}

impl<'a> BrownianPath<'a> {
    pub fn new(grid: &'a PathGrid, w: &'a [f64]) -> Result<Self> {
        if w.len() != grid.steps() + 1 {
            return Err(Error::PathGrid(format!(
                "path has {} nodes, grid has {}",
                w.len(),
                grid.steps() + 1
            )));
        }
        Ok(Self { grid, w })
    }

    /// `Σ_{t_k < t} g(t_k) (W_{k+1} - W_k)`.
    pub fn left_sum<G: Fn(f64) -> f64>(&self, t: f64, g: G) -> Result<f64> {
        let n = self.grid.node_index(t)?;
        Ok((0..n)
            .map(|k| g(self.grid.time(k)) * (self.w[k + 1] - self.w[k]))
            .sum())
    }
}

fn check(t: f64, maturity: f64) -> Result<()> {
    if !(maturity >= t) {
        return Err(Error::Precondition(format!(
            "maturity {maturity} precedes the valuation time {t}"
        )));
    }
    Ok(())
}

/// `log P_t^T`.
pub fn gauss_ln_bond(
    vol: &dyn VolatilityKernel,
    curve: &InitialCurve,
    path: &BrownianPath,
    t: f64,
    maturity: f64,
) -> Result<f64> {
    check(t, maturity)?;
    let stoch = path.left_sum(t, |s| vol.h_s(maturity, s) - vol.h_s(t, s))?;
    let det = vol.integrated_variance(maturity, t) - vol.integrated_variance(t, t);
    Ok(curve.ln_discount(maturity) - curve.ln_discount(t) + stoch - 0.5 * det)
}

pub fn gauss_bond(
    vol: &dyn VolatilityKernel,
    curve: &InitialCurve,
    path: &BrownianPath,
    t: f64,
    maturity: f64,
) -> Result<f64> {
    Ok(gauss_ln_bond(vol, curve, path, t, maturity)?.exp())
}

/// `f(t, T) = f(0, T) - ∫_0^t h_ts dW + ∫_0^t h_ts h_s ds`.
pub fn gauss_forward(
    vol: &dyn VolatilityKernel,
    curve: &InitialCurve,
    path: &BrownianPath,
    t: f64,
    maturity: f64,
) -> Result<f64> {
    check(t, maturity)?;
    let stoch = path.left_sum(t, |s| vol.h_ts(maturity, s))?;
    Ok(curve.forward(maturity) - stoch + vol.integrated_drift(maturity, t))
}

/// `log π_t = log P_0^t + ∫_0^t h_s(t, s) dW_s - ½ ∫_0^t h_s(t, s)² ds`.
pub fn gauss_ln_state_price(
    vol: &dyn VolatilityKernel,
    curve: &InitialCurve,
    path: &BrownianPath,
    t: f64,
) -> Result<f64> {
    let stoch = path.left_sum(t, |s| vol.h_s(t, s))?;
    Ok(curve.ln_discount(t) + stoch - 0.5 * vol.integrated_variance(t, t))
}
