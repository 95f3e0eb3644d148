//! Driver-process families: parameters, Lévy symbols and closed-form
//! transition densities.
//!
//! The symbol `ψ` is normalised so that `E[exp(i<ξ, Z_t>)] = exp(-t ψ(ξ))`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

fn default_drift() -> Vec<f64> {
    vec![0.0]
}

/// Tagged description of a driver family.
///
/// In JSON the tag is `family`; parameter names follow the usual notation
/// (`theta` scale, `gamma` Cauchy drift, `a`/`b` gamma shape rate and
/// inverse scale).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevySpec {
    /// Brownian motion with covariance rate `Σ` (d×d, row-major).
    Gaussian { covariance: Vec<Vec<f64>> },
    /// Isotropic Cauchy process with scale `θ` and drift `γ`; dimension is `γ.len()`.
    Cauchy {
        theta: f64,
        #[serde(default = "default_drift")]
        gamma: Vec<f64>,
    },
    /// One-dimensional symmetric α-stable process, `ψ(ξ) = θ|ξ|^α`.
    #[serde(rename = "stable")]
    SymmetricStable { alpha: f64, theta: f64 },
    /// Gamma subordinator with shape rate `a` and inverse scale `b`.
    Gamma { a: f64, b: f64 },
    /// Compound Poisson process with finitely many marks.
    CompoundPoisson {
        marks: Vec<f64>,
        intensities: Vec<f64>,
    },
}

impl LevySpec {
    pub fn gaussian_1d(variance: f64) -> Self {
        LevySpec::Gaussian {
            covariance: vec![vec![variance]],
        }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        let covariance = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        LevySpec::Gaussian { covariance }
    }

    pub fn cauchy_1d(theta: f64) -> Self {
        LevySpec::Cauchy {
            theta,
            gamma: vec![0.0],
        }
    }

    pub fn stable(alpha: f64, theta: f64) -> Self {
        LevySpec::SymmetricStable { alpha, theta }
    }

    pub fn gamma(a: f64, b: f64) -> Self {
        LevySpec::Gamma { a, b }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LevySpec::Gaussian { .. } => "gaussian",
            LevySpec::Cauchy { .. } => "cauchy",
            LevySpec::SymmetricStable { .. } => "stable",
            LevySpec::Gamma { .. } => "gamma",
            LevySpec::CompoundPoisson { .. } => "compound_poisson",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            LevySpec::Gaussian { covariance } => covariance.len(),
            LevySpec::Cauchy { gamma, .. } => gamma.len(),
            _ => 1,
        }
    }

    /// Checks the parameter invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        match self {
            LevySpec::Gaussian { covariance } => {
                covariance_matrix(covariance)?;
            }
            LevySpec::Cauchy { theta, gamma } => {
                positive("theta", *theta)?;
                if gamma.is_empty() {
                    return Err(Error::invalid("gamma", "dimension must be at least 1"));
                }
                if gamma.iter().any(|g| !g.is_finite()) {
                    return Err(Error::invalid("gamma", "drift must be finite"));
                }
            }
            LevySpec::SymmetricStable { alpha, theta } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::invalid(
                        "alpha",
                        format!("stability index {alpha} outside (0, 2)"),
                    ));
                }
                positive("theta", *theta)?;
            }
            LevySpec::Gamma { a, b } => {
                positive("a", *a)?;
                positive("b", *b)?;
            }
            LevySpec::CompoundPoisson { marks, intensities } => {
                if marks.is_empty() {
                    return Err(Error::invalid("marks", "at least one mark is required"));
                }
                if marks.len() != intensities.len() {
                    return Err(Error::invalid(
                        "intensities",
                        format!(
                            "{} intensities for {} marks",
                            intensities.len(),
                            marks.len()
                        ),
                    ));
                }
                if marks.iter().any(|m| !m.is_finite()) {
                    return Err(Error::invalid("marks", "marks must be finite"));
                }
                for (j, nu) in intensities.iter().enumerate() {
                    positive(&format!("intensities[{j}]"), *nu)?;
                }
            }
        }
        Ok(())
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be positive, got {value}"),
        ))
    }
}

/// Parses a row-major covariance and checks symmetry and positive definiteness.
pub(crate) fn covariance_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 {
        return Err(Error::invalid("covariance", "dimension must be at least 1"));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("covariance", "matrix must be square"));
    }
    let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    for i in 0..d {
        for j in 0..i {
            let scale = m[(i, j)].abs().max(m[(j, i)].abs()).max(1.0);
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::invalid("covariance", "matrix must be symmetric"));
            }
        }
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::invalid(
            "covariance",
            "matrix must be positive definite",
        ));
    }
    Ok(m)
}

/// The Lévy symbol `ψ` of a validated [`LevySpec`].
#[derive(Clone, Debug)]
pub struct LevySymbol {
    spec: LevySpec,
    covariance: Option<DMatrix<f64>>,
}

/// Builds the symbol of `spec`, rejecting invalid parameters.
pub fn symbol(spec: &LevySpec) -> Result<LevySymbol> {
    LevySymbol::new(spec)
}

impl LevySymbol {
    pub fn new(spec: &LevySpec) -> Result<Self> {
        spec.validate()?;
        let covariance = match spec {
            LevySpec::Gaussian { covariance } => Some(covariance_matrix(covariance)?),
            _ => None,
        };
        Ok(Self {
            spec: spec.clone(),
            covariance,
        })
    }

    pub fn spec(&self) -> &LevySpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    /// `ψ(ξ)` for `ξ ∈ R^d`.
    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        debug_assert_eq!(xi.len(), self.dimension());
        match &self.spec {
            LevySpec::Gaussian { .. } => {
                let sigma = self.covariance.as_ref().expect("validated covariance");
                let v = DVector::from_column_slice(xi);
                Complex64::new(0.5 * v.dot(&(sigma * &v)), 0.0)
            }
            LevySpec::Cauchy { theta, gamma } => {
                let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                let drift: f64 = xi.iter().zip(gamma).map(|(x, g)| x * g).sum();
                Complex64::new(theta * norm, -drift)
            }
            LevySpec::SymmetricStable { alpha, theta } => {
                Complex64::new(theta * xi[0].abs().powf(*alpha), 0.0)
            }
            LevySpec::Gamma { a, b } => {
                // principal branch; Re(1 - iξ/b) = 1 keeps us off the cut
                *a * Complex64::new(1.0, -xi[0] / b).ln()
            }
            LevySpec::CompoundPoisson { marks, intensities } => marks
                .iter()
                .zip(intensities)
                .map(|(x, nu)| {
                    *nu * (Complex64::new(1.0, 0.0) - Complex64::new(0.0, xi[0] * x).exp())
                })
                .sum(),
        }
    }

    pub fn eval1(&self, xi: f64) -> Complex64 {
        self.eval(&[xi])
    }

    /// Characteristic function `E[exp(i<ξ, Z_t>)] = exp(-t ψ(ξ))`.
    pub fn characteristic(&self, t: f64, xi: &[f64]) -> Complex64 {
        (-t * self.eval(xi)).exp()
    }

    /// Whether `Re ψ(ξ) → ∞` as `|ξ| → ∞`, i.e. whether `Z_t` has a density
    /// recoverable by Fourier inversion.
    pub fn has_unbounded_real_part(&self) -> bool {
        !matches!(self.spec, LevySpec::CompoundPoisson { .. })
    }

    /// `ψ` is real (symmetric law), so densities are even in `x`.
    pub fn is_symmetric(&self) -> bool {
        match &self.spec {
            LevySpec::Gaussian { .. } | LevySpec::SymmetricStable { .. } => true,
            LevySpec::Cauchy { gamma, .. } => gamma.iter().all(|g| *g == 0.0),
            LevySpec::Gamma { .. } | LevySpec::CompoundPoisson { .. } => false,
        }
    }

    /// Characteristic width of `Z_t`, used to size numerical grids.
    pub fn width(&self, t: f64) -> f64 {
        match &self.spec {
            LevySpec::Gaussian { .. } => {
                let sigma = self.covariance.as_ref().expect("validated covariance");
                (sigma.diagonal().max() * t).sqrt()
            }
            LevySpec::Cauchy { theta, .. } => theta * t,
            LevySpec::SymmetricStable { alpha, theta } => (theta * t).powf(1.0 / alpha),
            LevySpec::Gamma { a, b } => (a * t).sqrt().max(a * t) / b,
            LevySpec::CompoundPoisson { marks, .. } => {
                marks.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
            }
        }
    }
}

/// Support of a one-dimensional density, as a closed interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub const REAL_LINE: Support = Support {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
}

#[derive(Clone, Debug)]
enum ClosedKind {
    Gaussian {
        dim: usize,
        precision: DMatrix<f64>,
        log_det: f64,
    },
    Cauchy {
        dim: usize,
        theta: f64,
        drift: Vec<f64>,
        log_norm: f64,
    },
    Gamma {
        a: f64,
        b: f64,
    },
}

/// Closed-form transition density `p(t, x)` for the Gaussian, Cauchy
/// (including α = 1 stable) and gamma families.
#[derive(Clone, Debug)]
pub struct ClosedFormDensity {
    kind: ClosedKind,
}

impl ClosedFormDensity {
    pub fn new(spec: &LevySpec) -> Result<Self> {
        spec.validate()?;
        let kind = match spec {
            LevySpec::Gaussian { covariance } => {
                let sigma = covariance_matrix(covariance)?;
                let dim = sigma.nrows();
                let chol = sigma
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::SingularMatrix("covariance".into()))?;
                let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                ClosedKind::Gaussian {
                    dim,
                    precision: chol.inverse(),
                    log_det,
                }
            }
            LevySpec::Cauchy { theta, gamma } => {
                let dim = gamma.len();
                ClosedKind::Cauchy {
                    dim,
                    theta: *theta,
                    drift: gamma.clone(),
                    log_norm: ln_gamma((dim as f64 + 1.0) / 2.0),
                }
            }
            LevySpec::SymmetricStable { alpha, theta } if *alpha == 1.0 => ClosedKind::Cauchy {
                dim: 1,
                theta: *theta,
                drift: vec![0.0],
                log_norm: 0.0,
            },
            LevySpec::Gamma { a, b } => ClosedKind::Gamma { a: *a, b: *b },
            other => {
                return Err(Error::NoClosedForm(match other {
                    LevySpec::SymmetricStable { alpha, .. } => {
                        format!("stable law with alpha = {alpha}")
                    }
                    _ => other.family_name().to_string(),
                }))
            }
        };
        Ok(Self { kind })
    }

    pub fn dimension(&self) -> usize {
        match &self.kind {
            ClosedKind::Gaussian { dim, .. } | ClosedKind::Cauchy { dim, .. } => *dim,
            ClosedKind::Gamma { .. } => 1,
        }
    }

    pub fn support(&self) -> Support {
        match self.kind {
            ClosedKind::Gamma { .. } => Support {
                lower: 0.0,
                upper: f64::INFINITY,
            },
            _ => Support::REAL_LINE,
        }
    }

    /// `log p(t, x)`; `-∞` outside the support.
    pub fn ln_pdf(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!(
                "density time must be positive, got {t}"
            )));
        }
        match &self.kind {
            ClosedKind::Gaussian {
                dim,
                precision,
                log_det,
            } => {
                let d = *dim as f64;
                let q = quad_form(precision, x);
                Ok(-0.5 * d * (2.0 * PI * t).ln() - 0.5 * log_det - q / (2.0 * t))
            }
            ClosedKind::Cauchy {
                dim,
                theta,
                drift,
                log_norm,
            } => {
                let d = *dim as f64;
                let r2: f64 = x
                    .iter()
                    .zip(drift)
                    .map(|(xi, g)| (xi - t * g).powi(2))
                    .sum();
                let st = theta * t;
                Ok(log_norm + st.ln() - 0.5 * (d + 1.0) * (PI * (st * st + r2)).ln())
            }
            ClosedKind::Gamma { a, b } => {
                let x = x[0];
                let at = a * t;
                if x < 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                if x == 0.0 {
                    return if at == 1.0 {
                        Ok(b.ln())
                    } else if at > 1.0 {
                        Ok(f64::NEG_INFINITY)
                    } else {
                        Err(Error::DensityDomain(format!(
                            "gamma density diverges at x = 0 for a·t = {at} < 1"
                        )))
                    };
                }
                Ok(at * b.ln() - ln_gamma(at) + (at - 1.0) * x.ln() - b * x)
            }
        }
    }

    pub fn pdf(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.ln_pdf(t, x)?.exp())
    }

    /// `∂/∂t log p(t, x)`, used for analytic forward rates.
    pub fn d_ln_pdf_dt(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!(
                "density time must be positive, got {t}"
            )));
        }
        match &self.kind {
            ClosedKind::Gaussian { dim, precision, .. } => {
                let q = quad_form(precision, x);
                Ok(-(*dim as f64) / (2.0 * t) + q / (2.0 * t * t))
            }
            ClosedKind::Cauchy {
                dim, theta, drift, ..
            } => {
                let d = *dim as f64;
                let mut r2 = 0.0;
                let mut drift_term = 0.0;
                for (xi, g) in x.iter().zip(drift) {
                    let r = xi - t * g;
                    r2 += r * r;
                    drift_term += g * r;
                }
                let denom = theta * theta * t * t + r2;
                Ok(
                    1.0 / t
                        - 0.5 * (d + 1.0) * (2.0 * theta * theta * t - 2.0 * drift_term) / denom,
                )
            }
            ClosedKind::Gamma { a, b } => {
                let x = x[0];
                if x <= 0.0 {
                    return Err(Error::DensityDomain(format!(
                        "gamma log-density derivative needs x > 0, got {x}"
                    )));
                }
                Ok(a * b.ln() - a * digamma(a * t) + a * x.ln())
            }
        }
    }
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    v.dot(&(m * &v))
}

/// Evaluates the closed-form density of `spec` at `(t, x)`.
pub fn closed_form_density(spec: &LevySpec, t: f64, x: &[f64]) -> Result<f64> {
    let density = ClosedFormDensity::new(spec)?;
    if x.len() != density.dimension() {
        return Err(Error::Precondition(format!(
            "point has dimension {}, density has dimension {}",
            x.len(),
            density.dimension()
        )));
    }
    density.pdf(t, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn symbol_examples() {
        let g = symbol(&LevySpec::gaussian_1d(1.0)).unwrap();
        assert_eq!(g.eval1(2.0), Complex64::new(2.0, 0.0));
        let c = symbol(&LevySpec::cauchy_1d(1.0)).unwrap();
        assert_eq!(c.eval1(-3.0), Complex64::new(3.0, 0.0));
        let s = symbol(&LevySpec::stable(1.0, 1.0)).unwrap();
        assert_eq!(s.eval1(2.0), Complex64::new(2.0, 0.0));
        assert_eq!(s.eval1(2.0), c.eval1(2.0));
    }

    #[test]
    fn symbol_rejects_bad_parameters() {
        let err = symbol(&LevySpec::stable(2.5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref field, .. } if field == "alpha"));
        assert!(symbol(&LevySpec::stable(0.0, 1.0)).is_err());
        assert!(symbol(&LevySpec::cauchy_1d(-1.0)).is_err());
        assert!(symbol(&LevySpec::gamma(1.0, 0.0)).is_err());
        let not_pd = LevySpec::Gaussian {
            covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(symbol(&not_pd).is_err());
        let asym = LevySpec::Gaussian {
            covariance: vec![vec![1.0, 0.1], vec![0.0, 1.0]],
        };
        assert!(symbol(&asym).is_err());
        let cp = LevySpec::CompoundPoisson {
            marks: vec![1.0],
            intensities: vec![0.0],
        };
        assert!(symbol(&cp).is_err());
    }

    #[test]
    fn symbol_invariants_hold_for_all_families() {
        let specs = vec![
            LevySpec::gaussian_1d(0.7),
            LevySpec::Cauchy {
                theta: 0.5,
                gamma: vec![0.3],
            },
            LevySpec::stable(1.5, 0.8),
            LevySpec::gamma(2.0, 3.0),
            LevySpec::CompoundPoisson {
                marks: vec![-0.5, 1.0],
                intensities: vec![1.0, 2.0],
            },
        ];
        for spec in specs {
            let psi = symbol(&spec).unwrap();
            assert!(psi.eval1(0.0).norm() < 1e-15, "{spec:?}");
            for xi in [-7.0, -1.3, 0.2, 4.5] {
                let a = psi.eval1(xi);
                let b = psi.eval1(-xi);
                assert!((a - b.conj()).norm() < 1e-12, "{spec:?} at {xi}");
                assert!(a.re >= -1e-14, "{spec:?} at {xi}");
            }
        }
    }

    #[test]
    fn density_examples() {
        let g = closed_form_density(&LevySpec::gaussian_1d(1.0), 1.0, &[0.0]).unwrap();
        assert!(close(g, 0.398_942_280_401_432_7, 1e-15));
        let c = closed_form_density(&LevySpec::cauchy_1d(1.0), 1.0, &[0.0]).unwrap();
        assert!(close(c, 1.0 / PI, 1e-15));
        let gam = closed_form_density(&LevySpec::gamma(1.0, 1.0), 1.0, &[2.0]).unwrap();
        assert!(close(gam, (-2.0f64).exp(), 1e-15));
    }

    #[test]
    fn stable_alpha_one_uses_cauchy_closed_form() {
        let s = closed_form_density(&LevySpec::stable(1.0, 1.0), 2.0, &[1.5]).unwrap();
        let c = closed_form_density(&LevySpec::cauchy_1d(1.0), 2.0, &[1.5]).unwrap();
        assert!(close(s, c, 1e-15));
        assert!(matches!(
            closed_form_density(&LevySpec::stable(1.5, 1.0), 1.0, &[0.0]),
            Err(Error::NoClosedForm(_))
        ));
        let cp = LevySpec::CompoundPoisson {
            marks: vec![1.0],
            intensities: vec![1.0],
        };
        assert!(matches!(
            closed_form_density(&cp, 1.0, &[0.0]),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn gamma_boundary_behaviour() {
        let spec = LevySpec::gamma(1.0, 3.0);
        assert!(close(
            closed_form_density(&spec, 1.0, &[0.0]).unwrap(),
            3.0,
            1e-15
        ));
        assert_eq!(closed_form_density(&spec, 1.0, &[-1.0]).unwrap(), 0.0);
        assert_eq!(closed_form_density(&spec, 2.0, &[0.0]).unwrap(), 0.0);
        assert!(matches!(
            closed_form_density(&spec, 0.5, &[0.0]),
            Err(Error::DensityDomain(_))
        ));
    }

    #[test]
    fn cauchy_self_similarity() {
        let density = ClosedFormDensity::new(&LevySpec::Cauchy {
            theta: 0.7,
            gamma: vec![0.0, 0.0],
        })
        .unwrap();
        for c in [0.3, 2.0, 5.0] {
            for (t, x) in [(1.0, [0.4, -1.0]), (0.2, [3.0, 0.0])] {
                let lhs = density.pdf(c * t, &[c * x[0], c * x[1]]).unwrap();
                let rhs = c.powi(-2) * density.pdf(t, &x).unwrap();
                assert!((lhs / rhs - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn time_derivative_matches_finite_difference() {
        let specs = vec![
            LevySpec::gaussian_1d(1.3),
            LevySpec::Cauchy {
                theta: 0.9,
                gamma: vec![0.4],
            },
            LevySpec::gamma(1.7, 2.0),
        ];
        for spec in specs {
            let density = ClosedFormDensity::new(&spec).unwrap();
            for (t, x) in [(0.8, 0.6), (2.0, 1.9)] {
                let h = 1e-5;
                let fd = (density.ln_pdf(t + h, &[x]).unwrap()
                    - density.ln_pdf(t - h, &[x]).unwrap())
                    / (2.0 * h);
                let an = density.d_ln_pdf_dt(t, &[x]).unwrap();
                assert!((fd - an).abs() < 1e-7, "{spec:?}: {fd} vs {an}");
            }
        }
    }
}
