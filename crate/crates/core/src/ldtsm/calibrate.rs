//! Fitting λ knots to an observed discount curve at time zero.
//!
//! For every maturity `T_i` the knot value solves
//! `p(λ_i + T_i, z0) = P_0^{T_i} p(λ_0, z0)`.

use crate::error::{Error, Result};
use crate::levy::LevySpec;

use super::{LambdaSchedule, TransitionKernel};

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationOptions {
    pub lambda_max: f64,
    pub tol: f64,
    /// Number of bracket samples used to detect sign changes.
    pub samples: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            lambda_max: 1e3,
            tol: 1e-10,
            samples: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResidual {
    pub maturity: f64,
    pub target: f64,
    pub fitted: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub schedule: LambdaSchedule,
    pub residuals: Vec<CalibrationResidual>,
    /// Whether the target curve is non-increasing in maturity. Reported only.
    pub curve_decreasing: bool,
}

/// Solves for λ at each maturity by bisection. `curve` holds `(T_i, P_0^{T_i})`.
pub fn calibrate_lambda(
    spec: &LevySpec,
    z0: &[f64],
    curve: &[(f64, f64)],
    lambda0: f64,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    spec.validate()?;
    if z0.len() != spec.dimension() {
        return Err(Error::invalid("z0", "dimension does not match the driver"));
    }
    if curve.is_empty() {
        return Err(Error::invalid("curve", "at least one maturity is required"));
    }
    let gamma = matches!(spec, LevySpec::Gamma { .. });
    if !(lambda0 > 0.0) {
        return Err(Error::invalid(
            "lambda0",
            "must be positive so p(λ_0, z0) is a density value",
        ));
    }
    let mut prev = 0.0;
    for (i, &(t, p)) in curve.iter().enumerate() {
        if !(t > prev) {
            return Err(Error::invalid(
                format!("curve[{i}].maturity"),
                "maturities must be positive and strictly increasing",
            ));
        }
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid(
                format!("curve[{i}].price"),
                "prices must be positive",
            ));
        }
        prev = t;
    }
    let kernel = TransitionKernel::new(spec)?;
    let ln_base = kernel.ln_pdf(lambda0, z0)?;
    let lo = if gamma { 1e-12 } else { 0.0 };

    let mut times = vec![0.0];
    let mut values = vec![lambda0];
    let mut residuals = Vec::with_capacity(curve.len());
    for &(maturity, price) in curve {
        let target = price.ln() + ln_base;
        let g = |lam: f64| -> Result<f64> { Ok(kernel.ln_pdf(lam + maturity, z0)? - target) };
        let lam = solve(&g, lo, opts, maturity, price)?;
        let fitted = (kernel.ln_pdf(lam + maturity, z0)? - ln_base).exp();
        residuals.push(CalibrationResidual {
            maturity,
            target: price,
            fitted,
            lambda: lam,
        });
        times.push(maturity);
        values.push(lam);
    }
    let curve_decreasing = curve.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(Calibration {
        schedule: LambdaSchedule::new(times, values)?,
        residuals,
        curve_decreasing,
    })
}

fn solve<G: Fn(f64) -> Result<f64>>(
    g: &G,
    lo: f64,
    opts: &CalibrationOptions,
    maturity: f64,
    price: f64,
) -> Result<f64> {
    let n = opts.samples.max(8);
    let span = opts.lambda_max - lo;
    // cubic spacing concentrates samples near small λ where densities move fastest
    let points: Vec<f64> = (0..=n)
        .map(|k| lo + span * (k as f64 / n as f64).powi(3))
        .collect();
    let vals = points.iter().map(|&x| g(x)).collect::<Result<Vec<_>>>()?;
    let mut brackets = Vec::new();
    for k in 0..n {
        if vals[k] == 0.0 {
            brackets.push((points[k], points[k]));
        } else if vals[k] * vals[k + 1] < 0.0 {
            brackets.push((points[k], points[k + 1]));
        }
    }
    if vals[n] == 0.0 {
        brackets.push((points[n], points[n]));
    }
    match brackets.len() {
        0 => {
            let (mn, mx) = vals
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            // g = log(attainable price / target price)
            Err(Error::CurveUnattainable {
                maturity,
                target: price,
                min: price * mn.exp(),
                max: price * mx.exp(),
            })
        }
        1 => {
            let (mut a, mut b) = brackets[0];
            if a == b {
                return Ok(a);
            }
            let mut ga = g(a)?;
            while b - a > opts.tol {
                let m = 0.5 * (a + b);
                let gm = g(m)?;
                if gm == 0.0 {
                    return Ok(m);
                }
                if ga * gm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    ga = gm;
                }
            }
            Ok(0.5 * (a + b))
        }
        _ => Err(Error::AmbiguousRoot {
            maturity,
            intervals: brackets,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldtsm::{bond_price, LdtsmFactor, LdtsmModel, StateSnapshot};

    #[test]
    fn gaussian_round_trip() {
        let c = calibrate_lambda(
            &LevySpec::gaussian_1d(1.0),
            &[0.0],
            &[(1.0, 0.5f64.sqrt())],
            1.0,
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert!((c.schedule.values()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cauchy_round_trip() {
        let c = calibrate_lambda(
            &LevySpec::cauchy_1d(1.0),
            &[0.0],
            &[(1.0, 0.5)],
            1.0,
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert!((c.schedule.values()[1] - 1.0).abs() < 1e-9);
        assert!(c.residuals[0].fitted - 0.5 < 1e-12);
    }

    #[test]
    fn recovers_known_knots() {
        let truth =
            LambdaSchedule::new(vec![0.0, 1.0, 2.0, 5.0], vec![1.0, 0.8, 1.4, 2.0]).unwrap();
        for (spec, z0) in [
            (LevySpec::gaussian_1d(1.0), 0.0),
            (LevySpec::cauchy_1d(0.7), 0.0),
            (LevySpec::gamma(1.0, 1.0), 0.5),
        ] {
            let m = LdtsmModel::single(
                LdtsmFactor::new(spec.clone(), truth.clone(), vec![z0]).unwrap(),
            );
            let curve: Vec<(f64, f64)> = [1.0, 2.0, 5.0]
                .iter()
                .map(|&t| {
                    (
                        t,
                        bond_price(&m, &StateSnapshot::scalar(0.0, 0.0), t).unwrap(),
                    )
                })
                .collect();
            let c = calibrate_lambda(&spec, &[z0], &curve, 1.0, &CalibrationOptions::default())
                .unwrap();
            for (a, b) in c.schedule.values().iter().zip(truth.values()) {
                assert!((a - b).abs() < 1e-8, "{spec:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unattainable_price_reports_range() {
        let err = calibrate_lambda(
            &LevySpec::gaussian_1d(1.0),
            &[0.0],
            &[(1.0, 1.5)],
            1.0,
            &CalibrationOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::CurveUnattainable { min, max, .. } => assert!(min < max && max <= 1.0 + 1e-12),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn non_monotone_bracket_is_ambiguous() {
        // p(s, 2) for a standard Gaussian rises until s = 4 and then falls
        let target_s: f64 = 1.5;
        let p = |s: f64| (-(4.0) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt();
        let price = p(target_s + 0.5) / p(1.0);
        let err = calibrate_lambda(
            &LevySpec::gaussian_1d(1.0),
            &[2.0],
            &[(0.5, price)],
            1.0,
            &CalibrationOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AmbiguousRoot { ref intervals, .. } if intervals.len() == 2));
    }

    #[test]
    fn rejects_bad_curves() {
        let o = CalibrationOptions::default();
        let g = LevySpec::gaussian_1d(1.0);
        assert!(calibrate_lambda(&g, &[0.0], &[(1.0, 0.9), (1.0, 0.8)], 1.0, &o).is_err());
        assert!(calibrate_lambda(&g, &[0.0], &[(1.0, -0.9)], 1.0, &o).is_err());
        assert!(calibrate_lambda(&g, &[0.0], &[], 1.0, &o).is_err());
    }
}
