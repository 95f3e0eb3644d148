//! Deterministic HJM volatility structures `h(T, s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, SimpsonOptions};

/// Volatility of log bond prices. `h_s(T, s)` is the diffusion coefficient of
/// `log P^T` at time `s`, and `h_ts` its derivative in `T`.
///
/// Implement this trait to add a family; the integrals default to adaptive
/// Simpson and should be overridden when closed forms exist.
pub trait VolatilityKernel: Send + Sync {
    fn h_s(&self, maturity: f64, s: f64) -> f64;

    fn h_ts(&self, maturity: f64, s: f64) -> f64;

    /// `∫_0^t h_s(T, s)² ds`.
    fn integrated_variance(&self, maturity: f64, t: f64) -> f64 {
        quad(|s| self.h_s(maturity, s).powi(2), t)
    }

    /// `∫_0^t h_ts(T, s) h_s(T, s) ds`.
    fn integrated_drift(&self, maturity: f64, t: f64) -> f64 {
        quad(|s| self.h_ts(maturity, s) * self.h_s(maturity, s), t)
    }
}

fn quad<F: Fn(f64) -> f64>(f: F, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    adaptive_simpson(f, 0.0, t, &SimpsonOptions::with_rel_tol(1e-12)).value
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum HjmVolFamily {
    /// `h_s = σ(T - s)`.
    HoLee { sigma: f64 },
    /// `h_s = (σ/κ)(1 - e^{-κ(T - s)})`.
    Vasicek { sigma: f64, kappa: f64 },
}

impl HjmVolFamily {
    /// `σ = 0` is accepted and gives the deterministic curve.
    pub fn validate(&self) -> Result<()> {
        let sigma = match self {
            HjmVolFamily::HoLee { sigma } => *sigma,
            HjmVolFamily::Vasicek { sigma, kappa } => {
                if !(*kappa > 0.0) || !kappa.is_finite() {
                    return Err(Error::invalid("kappa", "must be positive"));
                }
                *sigma
            }
        };
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be non-negative"));
        }
        Ok(())
    }
}

impl VolatilityKernel for HjmVolFamily {
    fn h_s(&self, maturity: f64, s: f64) -> f64 {
        match *self {
            HjmVolFamily::HoLee { sigma } => sigma * (maturity - s),
            HjmVolFamily::Vasicek { sigma, kappa } => {
                sigma / kappa * -(-kappa * (maturity - s)).exp_m1()
            }
        }
    }

    fn h_ts(&self, maturity: f64, s: f64) -> f64 {
        match *self {
            HjmVolFamily::HoLee { sigma } => sigma,
            HjmVolFamily::Vasicek { sigma, kappa } => sigma * (-kappa * (maturity - s)).exp(),
        }
    }

    fn integrated_variance(&self, maturity: f64, t: f64) -> f64 {
        match *self {
            HjmVolFamily::HoLee { sigma } => {
                sigma * sigma * (maturity.powi(3) - (maturity - t).powi(3)) / 3.0
            }
            HjmVolFamily::Vasicek { sigma, kappa } => {
                let (e1, e2) = vasicek_exp_integrals(kappa, maturity, t);
                (sigma / kappa).powi(2) * (t - 2.0 * e1 + e2)
            }
        }
    }

    fn integrated_drift(&self, maturity: f64, t: f64) -> f64 {
        match *self {
            HjmVolFamily::HoLee { sigma } => sigma * sigma * (maturity * t - 0.5 * t * t),
            HjmVolFamily::Vasicek { sigma, kappa } => {
                let (e1, e2) = vasicek_exp_integrals(kappa, maturity, t);
                sigma * sigma / kappa * (e1 - e2)
            }
        }
    }
}

/// `∫_0^t e^{-κ(T-s)} ds` and `∫_0^t e^{-2κ(T-s)} ds`.
fn vasicek_exp_integrals(kappa: f64, maturity: f64, t: f64) -> (f64, f64) {
    let e1 = ((-kappa * (maturity - t)).exp() - (-kappa * maturity).exp()) / kappa;
    let e2 =
        ((-2.0 * kappa * (maturity - t)).exp() - (-2.0 * kappa * maturity).exp()) / (2.0 * kappa);
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Numeric<'a>(&'a HjmVolFamily);

    impl VolatilityKernel for Numeric<'_> {
        fn h_s(&self, maturity: f64, s: f64) -> f64 {
            self.0.h_s(maturity, s)
        }
        fn h_ts(&self, maturity: f64, s: f64) -> f64 {
            self.0.h_ts(maturity, s)
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for v in [
            HjmVolFamily::HoLee { sigma: 0.015 },
            HjmVolFamily::Vasicek {
                sigma: 0.02,
                kappa: 0.5,
            },
            HjmVolFamily::Vasicek {
                sigma: 0.3,
                kappa: 3.0,
            },
        ] {
            let n = Numeric(&v);
            for (maturity, t) in [(1.0, 0.5), (5.0, 2.0), (10.0, 10.0)] {
                let a = v.integrated_variance(maturity, t);
                let b = n.integrated_variance(maturity, t);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{v:?} {a} {b}");
                let a = v.integrated_drift(maturity, t);
                let b = n.integrated_drift(maturity, t);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{v:?} {a} {b}");
            }
        }
    }

    #[test]
    fn h_vanishes_on_the_diagonal() {
        for v in [
            HjmVolFamily::HoLee { sigma: 0.1 },
            HjmVolFamily::Vasicek {
                sigma: 0.1,
                kappa: 0.7,
            },
        ] {
            assert_eq!(v.h_s(1.3, 1.3), 0.0);
            let d = 1e-6;
            let fd = (v.h_s(2.0 + d, 0.5) - v.h_s(2.0 - d, 0.5)) / (2.0 * d);
            assert!((fd - v.h_ts(2.0, 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn validation() {
        assert!(HjmVolFamily::HoLee { sigma: 0.0 }.validate().is_ok());
        assert!(HjmVolFamily::HoLee { sigma: -0.1 }.validate().is_err());
        assert!(HjmVolFamily::Vasicek {
            sigma: 0.1,
            kappa: 0.0
        }
        .validate()
        .is_err());
    }
}
