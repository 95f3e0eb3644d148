//! Gaussian HJM with jumps from a Poisson random measure on a finite mark set.
//!
//! Each mark `x_j` has intensity `ν_j` and kernel
//! `δ(t, s, x_j) = c_j (1 - e^{-κ_j (t - s)})`. The state price density is
//!
//! ```text
//! π_t = π_t^Gauss exp{Σ_{s_i ≤ t} δ(t, s_i, x_i) - Σ_j ν_j ∫_0^t (e^{δ(t,s,x_j)} - 1) ds}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, SimpsonOptions};
use crate::simulation::JumpEvent;

use super::gauss::{gauss_forward, gauss_ln_bond, gauss_ln_state_price, BrownianPath};
use super::{HjmVolFamily, InitialCurve};

/// `δ(t, s) = c (1 - e^{-κ(t - s)})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpKernel {
    pub c: f64,
    pub kappa: f64,
}

impl JumpKernel {
    pub fn delta(&self, t: f64, s: f64) -> f64 {
        -self.c * (-self.kappa * (t - s)).exp_m1()
    }

    /// `∂_t δ(t, s)`.
    pub fn delta_t(&self, t: f64, s: f64) -> f64 {
        self.c * self.kappa * (-self.kappa * (t - s)).exp()
    }

    /// `∫_0^t (e^{δ(T, s)} - 1) ds`.
    ///
    /// With `u = e^{-κ(T-s)}` the integral of `e^δ` is
    /// `(e^c/κ)[κt + Σ_{n≥1} (-c)^n (u_1^n - u_0^n)/(n·n!)]`. The series is used
    /// while its terms stay small; otherwise adaptive Simpson.
    pub fn compensator(&self, maturity: f64, t: f64) -> f64 {
        if t <= 0.0 || self.c == 0.0 {
            return 0.0;
        }
        let u0 = (-self.kappa * maturity).exp();
        let u1 = (-self.kappa * (maturity - t)).exp();
        if self.c * u1 > 8.0 {
            return self.compensator_numeric(maturity, t);
        }
        let mut sum = 0.0;
        let mut fact = 1.0;
        let (mut p0, mut p1) = (1.0, 1.0);
        let mut cn = 1.0;
        for n in 1..200 {
            let nf = n as f64;
            fact *= nf;
            p0 *= u0;
            p1 *= u1;
            cn *= -self.c;
            let term = cn * (p1 - p0) / (nf * fact);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs().max(1e-300) && n > 4 {
                break;
            }
        }
        self.c.exp() / self.kappa * (self.kappa * t + sum) - t
    }

    pub fn compensator_numeric(&self, maturity: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        adaptive_simpson(
            |s| self.delta(maturity, s).exp_m1(),
            0.0,
            t,
            &SimpsonOptions::with_rel_tol(1e-13),
        )
        .value
    }

    /// `∫_0^t ∂_T δ(T, s) e^{δ(T, s)} ds = e^{δ(T, 0)} - e^{δ(T, t)}`.
    pub fn drift(&self, maturity: f64, t: f64) -> f64 {
        self.delta(maturity, 0.0).exp() - self.delta(maturity, t).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShirakawaSpec {
    pub vol: HjmVolFamily,
    pub curve: InitialCurve,
    /// Mark values `x_j`; they label the kernels.
    pub marks: Vec<f64>,
    pub intensities: Vec<f64>,
    pub kernels: Vec<JumpKernel>,
}

impl ShirakawaSpec {
    pub fn validate(&self) -> Result<()> {
        self.vol.validate()?;
        self.curve.validate()?;
        let m = self.marks.len();
        if self.intensities.len() != m || self.kernels.len() != m {
            return Err(Error::invalid(
                "kernels",
                "need one intensity and one kernel per mark",
            ));
        }
        for j in 0..m {
            if !(self.intensities[j] > 0.0) || !self.intensities[j].is_finite() {
                return Err(Error::invalid(
                    format!("intensities[{j}]"),
                    "must be positive and finite",
                ));
            }
            if !self.kernels[j].c.is_finite() {
                return Err(Error::invalid(format!("kernels[{j}].c"), "must be finite"));
            }
            if !(self.kernels[j].kappa > 0.0) || !self.kernels[j].kappa.is_finite() {
                return Err(Error::invalid(
                    format!("kernels[{j}].kappa"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    fn jump_sum(
        &self,
        jumps: &[JumpEvent],
        t: f64,
        f: impl Fn(&JumpKernel, f64) -> f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for e in jumps.iter().filter(|e| e.time <= t) {
            let k = self.kernels.get(e.mark).ok_or_else(|| {
                Error::Precondition(format!("jump record refers to unknown mark {}", e.mark))
            })?;
            total += f(k, e.time);
        }
        Ok(total)
    }

    fn compensators(&self, f: impl Fn(&JumpKernel) -> f64) -> f64 {
        self.intensities
            .iter()
            .zip(&self.kernels)
            .map(|(nu, k)| nu * f(k))
            .sum()
    }
}

/// `log P_t^T`. Jumps after `t` in the record are ignored.
pub fn shirakawa_ln_bond(
    spec: &ShirakawaSpec,
    path: &BrownianPath,
    jumps: &[JumpEvent],
    t: f64,
    maturity: f64,
) -> Result<f64> {
    let g = gauss_ln_bond(&spec.vol, &spec.curve, path, t, maturity)?;
    let j = spec.jump_sum(jumps, t, |k, s| k.delta(maturity, s) - k.delta(t, s))?;
    let c = spec.compensators(|k| k.compensator(maturity, t) - k.compensator(t, t));
    Ok(g + j - c)
}

pub fn shirakawa_bond(
    spec: &ShirakawaSpec,
    path: &BrownianPath,
    jumps: &[JumpEvent],
    t: f64,
    maturity: f64,
) -> Result<f64> {
    Ok(shirakawa_ln_bond(spec, path, jumps, t, maturity)?.exp())
}

/// `-∂_T log P_t^T = f^Gauss(t, T) - Σ_{s_i ≤ t} ∂_T δ(T, s_i) + Σ_j ν_j ∫_0^t ∂_T δ e^δ ds`.
pub fn shirakawa_forward(
    spec: &ShirakawaSpec,
    path: &BrownianPath,
    jumps: &[JumpEvent],
    t: f64,
    maturity: f64,
) -> Result<f64> {
    let g = gauss_forward(&spec.vol, &spec.curve, path, t, maturity)?;
    let j = spec.jump_sum(jumps, t, |k, s| k.delta_t(maturity, s))?;
    let c = spec.compensators(|k| k.drift(maturity, t));
    Ok(g - j + c)
}

pub fn shirakawa_ln_state_price(
    spec: &ShirakawaSpec,
    path: &BrownianPath,
    jumps: &[JumpEvent],
    t: f64,
) -> Result<f64> {
    let g = gauss_ln_state_price(&spec.vol, &spec.curve, path, t)?;
    let j = spec.jump_sum(jumps, t, |k, s| k.delta(t, s))?;
    let c = spec.compensators(|k| k.compensator(t, t));
    Ok(g + j - c)
}
