//! Quadratic Gaussian model with state price density
//! `π_t(x) = exp{-<A_t x, x> + k_t}` and a standard Brownian state `W`.
//!
//! The bond price with `Δ = T - t` is
//!
//! ```text
//! det(2ΔA_T + I)^{-1/2} exp{-<[A_T - A_t - 2ΔA_T(2ΔA_T + I)^{-1}A_T] W_t, W_t> + k_T - k_t}
//! ```
//!
//! Completing the square in the Gaussian integral puts an `A_T` on both sides
//! of the resolvent in the correction term. A variant without those factors is
//! available as [`qtsm_bond_printed`] so the difference can be measured.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

use super::Knots;

/// `A_t = U diag(a_∞ + (a_0 - a_∞) e^{-ρt}) Uᵀ` and piecewise-linear `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QtsmSpec {
    /// Orthonormal frame `U` (rows); identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
    pub a0: Vec<f64>,
    pub a_inf: Vec<f64>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub k: Knots,
}

impl QtsmSpec {
    /// Constant `A ≡ a I` in dimension `d`, `k ≡ 0`.
    pub fn scalar(d: usize, a: f64) -> Self {
        Self {
            frame: None,
            a0: vec![a; d],
            a_inf: vec![a; d],
            rho: 0.0,
            k: Knots::default(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.a0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.a0.len();
        if d == 0 {
            return Err(Error::invalid("a0", "dimension must be at least one"));
        }
        if self.a_inf.len() != d {
            return Err(Error::invalid("a_inf", "must have the same length as a0"));
        }
        for (name, v) in [("a0", &self.a0), ("a_inf", &self.a_inf)] {
            if let Some(i) = v.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(Error::invalid(
                    format!("{name}[{i}]"),
                    "eigenvalues must be positive",
                ));
            }
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid("rho", "must be non-negative"));
        }
        if let Some(u) = &self.frame {
            if u.len() != d || u.iter().any(|r| r.len() != d) {
                return Err(Error::invalid("frame", format!("must be {d}×{d}")));
            }
            let m = DMatrix::from_fn(d, d, |i, j| u[i][j]);
            let err = (&m * m.transpose() - DMatrix::identity(d, d)).amax();
            if err > 1e-10 {
                return Err(Error::invalid("frame", "must be orthonormal"));
            }
        }
        self.k.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: format!("k.{field}"),
                reason,
            },
            e => e,
        })
    }

    fn frame_matrix(&self) -> DMatrix<f64> {
        let d = self.dimension();
        match &self.frame {
            Some(u) => DMatrix::from_fn(d, d, |i, j| u[i][j]),
            None => DMatrix::identity(d, d),
        }
    }

    pub fn eigenvalues(&self, t: f64) -> Vec<f64> {
        let decay = (-self.rho * t).exp();
        self.a0
            .iter()
            .zip(&self.a_inf)
            .map(|(a0, ai)| ai + (a0 - ai) * decay)
            .collect()
    }

    pub fn a_matrix(&self, t: f64) -> DMatrix<f64> {
        let u = self.frame_matrix();
        let l = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues(t)));
        let a = &u * l * u.transpose();
        // symmetrize away rounding
        (&a + a.transpose()) * 0.5
    }

    pub fn k(&self, t: f64) -> f64 {
        self.k.value(t)
    }

    pub fn ln_state_price(&self, t: f64, w: &[f64]) -> f64 {
        let v = DVector::from_column_slice(w);
        -v.dot(&(self.a_matrix(t) * &v)) + self.k(t)
    }
}

/// Time-`t` and time-`T` ingredients of the quadratic model.
#[derive(Clone, Debug)]
pub struct QtsmInputs {
    pub a_t: DMatrix<f64>,
    pub a_maturity: DMatrix<f64>,
    pub k_t: f64,
    pub k_maturity: f64,
    pub horizon: f64,
}

impl QtsmInputs {
    pub fn from_spec(spec: &QtsmSpec, t: f64, maturity: f64) -> Result<Self> {
        if !(maturity >= t) {
            return Err(Error::Precondition(format!(
                "maturity {maturity} precedes the valuation time {t}"
            )));
        }
        Ok(Self {
            a_t: spec.a_matrix(t),
            a_maturity: spec.a_matrix(maturity),
            k_t: spec.k(t),
            k_maturity: spec.k(maturity),
            horizon: maturity - t,
        })
    }

    fn check(&self, w: &[f64]) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        let d = self.a_t.nrows();
        if w.len() != d || self.a_maturity.nrows() != d {
            return Err(Error::Precondition(
                "state dimension does not match A".into(),
            ));
        }
        if self.a_t.clone().cholesky().is_none() {
            return Err(Error::invalid("A_t", "must be positive definite"));
        }
        let eig = self.a_maturity.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid("A_T", "must be positive definite"));
        }
        Ok(eig)
    }

    fn ln_price_with(&self, w: &[f64], correction: impl Fn(f64) -> f64) -> Result<f64> {
        let eig = self.check(w)?;
        let two_d = 2.0 * self.horizon;
        let ln_det: f64 = eig.eigenvalues.iter().map(|e| (two_d * e).ln_1p()).sum();
        let c = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(&correction))
            * eig.eigenvectors.transpose();
        let v = DVector::from_column_slice(w);
        let m = &self.a_maturity - &self.a_t - c;
        Ok(-0.5 * ln_det - v.dot(&(m * &v)) + self.k_maturity - self.k_t)
    }

    /// `log` of the bond price with the correction `2ΔA_T(2ΔA_T + I)^{-1}A_T`.
    pub fn ln_bond(&self, w: &[f64]) -> Result<f64> {
        let two_d = 2.0 * self.horizon;
        self.ln_price_with(w, |e| two_d * e * e / (1.0 + two_d * e))
    }

    /// `log` of the bond price with the correction `2Δ(2ΔA_T + I)^{-1}`.
    pub fn ln_bond_printed(&self, w: &[f64]) -> Result<f64> {
        let two_d = 2.0 * self.horizon;
        self.ln_price_with(w, |e| two_d / (1.0 + two_d * e))
    }

    /// `E[π_T(W_t + √Δ ξ)] / π_t(W_t)` by tensor Gauss–Hermite quadrature,
    /// doubling the node count until two successive rules agree to `tol`.
    pub fn oracle(&self, w: &[f64], tol: f64) -> Result<f64> {
        let d = w.len();
        if d == 0 || d > 3 {
            return Err(Error::Unsupported(format!(
                "tensor quadrature oracle needs 1 ≤ d ≤ 3, got {d}"
            )));
        }
        self.check(w)?;
        let v = DVector::from_column_slice(w);
        let ln_pi_t = -v.dot(&(&self.a_t * &v)) + self.k_t;
        let sd = self.horizon.sqrt();
        let max_nodes = if d == 3 { 128 } else { 512 };
        let mut prev: Option<f64> = None;
        let mut n = 16;
        loop {
            let gh = GaussHermite::new(n);
            let e = tensor_expectation(&gh, d, |xi| {
                let x = DVector::from_fn(d, |i, _| w[i] + sd * xi[i]);
                (-x.dot(&(&self.a_maturity * &x)) + self.k_maturity - ln_pi_t).exp()
            });
            if let Some(p) = prev {
                if (e - p).abs() <= tol * e.abs().max(1.0) {
                    return Ok(e);
                }
            }
            if n >= max_nodes {
                return Err(Error::QuadratureNonConvergence {
                    estimate: e,
                    error_bound: prev.map_or(f64::INFINITY, |p| (e - p).abs()),
                });
            }
            prev = Some(e);
            n *= 2;
        }
    }
}

/// `E[g(ξ)]` for `ξ ~ N(0, I_d)`.
fn tensor_expectation<G: Fn(&[f64]) -> f64>(gh: &GaussHermite, d: usize, g: G) -> f64 {
    let n = gh.nodes.len();
    let s = std::f64::consts::SQRT_2;
    let norm = std::f64::consts::PI.powf(-0.5 * d as f64);
    let mut idx = vec![0usize; d];
    let mut xi = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = norm;
        for (k, &i) in idx.iter().enumerate() {
            xi[k] = s * gh.nodes[i];
            w *= gh.weights[i];
        }
        total += w * g(&xi);
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn qtsm_bond(spec: &QtsmSpec, w: &[f64], t: f64, maturity: f64) -> Result<f64> {
    let inputs = QtsmInputs::from_spec(spec, t, maturity)?;
    if maturity == t {
        inputs.check(w)?;
        return Ok(1.0);
    }
    Ok(inputs.ln_bond(w)?.exp())
}

pub fn qtsm_bond_printed(spec: &QtsmSpec, w: &[f64], t: f64, maturity: f64) -> Result<f64> {
    Ok(QtsmInputs::from_spec(spec, t, maturity)?
        .ln_bond_printed(w)?
        .exp())
}

/// `-∂_T log P_t^T` by central differences, switching to a one-sided
/// second-order stencil when `T - h < t`.
pub fn qtsm_forward(spec: &QtsmSpec, w: &[f64], t: f64, maturity: f64) -> Result<f64> {
    let h = 1e-5 * maturity.max(1.0);
    let lp = |m: f64| -> Result<f64> { Ok(qtsm_bond(spec, w, t, m)?.ln()) };
    if maturity - h >= t {
        Ok(-(lp(maturity + h)? - lp(maturity - h)?) / (2.0 * h))
    } else {
        Ok(-(-3.0 * lp(maturity)? + 4.0 * lp(maturity + h)? - lp(maturity + 2.0 * h)?) / (2.0 * h))
    }
}

/// Default agreement between successive quadrature rules.
pub const ORACLE_TOL: f64 = 1e-10;

pub fn qtsm_oracle(spec: &QtsmSpec, w: &[f64], t: f64, maturity: f64) -> Result<f64> {
    QtsmInputs::from_spec(spec, t, maturity)?.oracle(w, ORACLE_TOL)
}

/// Quadratic-model price of the Gaussian density model with unit covariance:
/// `A_t = I/(2λ_t)`, `k_t = -(d/2) log(2πλ_t)`.
pub fn gaussian_density_as_qtsm(
    lambda_t: f64,
    lambda_maturity: f64,
    horizon: f64,
    w: &[f64],
) -> Result<f64> {
    if !(lambda_t > 0.0) || !(lambda_maturity > 0.0) {
        return Err(Error::DensityDomain("λ must be positive".into()));
    }
    let d = w.len();
    let k = |l: f64| -0.5 * d as f64 * (2.0 * std::f64::consts::PI * l).ln();
    let inputs = QtsmInputs {
        a_t: DMatrix::identity(d, d) / (2.0 * lambda_t),
        a_maturity: DMatrix::identity(d, d) / (2.0 * lambda_maturity),
        k_t: k(lambda_t),
        k_maturity: k(lambda_maturity),
        horizon,
    };
    Ok(inputs.ln_bond(w)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_examples() {
        let s = QtsmSpec::scalar(1, 0.5);
        let p = qtsm_bond(&s, &[0.0], 0.0, 1.0).unwrap();
        assert!((p - 0.5f64.sqrt()).abs() < 1e-15);
        let p = qtsm_bond(&s, &[1.0], 0.0, 1.0).unwrap();
        assert!((p - 0.5f64.sqrt() * 0.25f64.exp()).abs() < 1e-15);
        assert!((p - 0.907_943_1).abs() < 1e-7);
        assert_eq!(qtsm_bond(&s, &[3.0], 0.4, 0.4).unwrap(), 1.0);
        let printed = qtsm_bond_printed(&s, &[1.0], 0.0, 1.0).unwrap();
        assert!((printed - 0.5f64.sqrt() * 1f64.exp()).abs() < 1e-14);
        assert!((printed - 1.9221).abs() < 1e-4);
        assert!((qtsm_bond_printed(&s, &[0.0], 0.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn oracle_reproduces_examples() {
        let s = QtsmSpec::scalar(1, 0.5);
        for w in [0.0, 1.0] {
            let o = qtsm_oracle(&s, &[w], 0.0, 1.0).unwrap();
            let b = qtsm_bond(&s, &[w], 0.0, 1.0).unwrap();
            assert!((o - b).abs() < 1e-8);
        }
    }

    #[test]
    fn two_dimensional_rotated_frame() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let s = QtsmSpec {
            frame: Some(vec![vec![c, c], vec![-c, c]]),
            a0: vec![0.3, 0.7],
            a_inf: vec![0.5, 0.2],
            rho: 0.4,
            k: Knots {
                times: vec![0.0, 3.0],
                values: vec![0.0, -0.2],
            },
        };
        s.validate().unwrap();
        let w = [0.4, -0.8];
        let o = qtsm_oracle(&s, &w, 0.5, 2.0).unwrap();
        let b = qtsm_bond(&s, &w, 0.5, 2.0).unwrap();
        assert!((o - b).abs() < 1e-8, "{o} {b}");
    }

    #[test]
    fn k_shift_is_additive_in_log_price() {
        let mut s = QtsmSpec::scalar(2, 0.3);
        let w = [0.2, 0.5];
        let base = qtsm_bond(&s, &w, 0.0, 1.5).unwrap().ln();
        s.k = Knots {
            times: vec![0.0, 2.0],
            values: vec![0.1, 0.5],
        };
        let shifted = qtsm_bond(&s, &w, 0.0, 1.5).unwrap().ln();
        assert!((shifted - base - (s.k(1.5) - s.k(0.0))).abs() < 1e-14);
        let o = qtsm_oracle(&s, &w, 0.0, 1.5).unwrap().ln();
        assert!((o - base - (s.k(1.5) - s.k(0.0))).abs() < 1e-8);
    }

    #[test]
    fn det_factor_only_at_origin() {
        let s = QtsmSpec::scalar(2, 0.7);
        let p = qtsm_bond(&s, &[0.0, 0.0], 1.0, 2.0).unwrap();
        assert!((p - 1.0 / (1.0 + 2.0 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn bridge_to_gaussian_density() {
        for (lt, lm, dt, w) in [(1.0, 1.0, 1.0, vec![0.0]), (0.7, 1.3, 0.5, vec![0.4, -1.1])] {
            let q = gaussian_density_as_qtsm(lt, lm, dt, &w).unwrap();
            let s: f64 = lm + dt;
            let d = w.len() as f64;
            let r2: f64 = w.iter().map(|x| x * x).sum();
            let expect = (0.5 * d * (lt / s).ln() - 0.5 * (1.0 / s - 1.0 / lt) * r2).exp();
            assert!((q - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = QtsmSpec::scalar(1, 0.5);
        s.a0 = vec![-0.1];
        assert!(s.validate().is_err());
        let mut s = QtsmSpec::scalar(2, 0.5);
        s.frame = Some(vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(s.validate().is_err());
        let s = QtsmSpec::scalar(1, 0.5);
        assert!(qtsm_bond(&s, &[0.0], 1.0, 0.5).is_err());
        assert!(qtsm_oracle(&QtsmSpec::scalar(4, 0.5), &[0.0; 4], 0.0, 1.0).is_err());
    }
}
