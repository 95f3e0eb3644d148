//! Bond markets whose state price density is `π_t = Π_l p_l(λ^l_t, z^l_0 + Z^l_t)`.
//!
//! For independent factors the zero-coupon price is
//!
//! ```text
//! P_t^T = Π_l p_l(λ^l_T + T - t, z^l_0 + Z^l_t) / p_l(λ^l_t, z^l_0 + Z^l_t)
//! ```
//!
//! Prices above one (negative rates) are legitimate outputs of these models
//! and are returned as-is.

mod calibrate;
mod schedule;

pub use calibrate::{calibrate_lambda, Calibration, CalibrationOptions, CalibrationResidual};
pub use schedule::LambdaSchedule;

use statrs::function::gamma::ln_gamma;

use crate::density::{self, DensityEvaluator, InvertedDensity};
use crate::error::{Error, Result};
use crate::levy::{ClosedFormDensity, LevySpec, LevySymbol};

/// Densities below this floor are treated as outside the support.
pub const DENSITY_FLOOR: f64 = 1e-300;

const POINTWISE_REL_TOL: f64 = 1e-13;

/// Time-parametric transition density of one driver.
#[derive(Clone, Debug)]
pub enum TransitionKernel {
    Closed(ClosedFormDensity),
    /// Stable laws without a closed form: pointwise Fourier inversion, with
    /// optional pre-built tables at selected times for bulk evaluation.
    Fourier {
        symbol: LevySymbol,
        tables: Vec<InvertedDensity>,
    },
}

impl TransitionKernel {
    pub fn new(spec: &LevySpec) -> Result<Self> {
        match spec {
            LevySpec::CompoundPoisson { .. } => Err(Error::AtomicDistribution),
            LevySpec::SymmetricStable { alpha, .. } if *alpha != 1.0 => {
                Ok(TransitionKernel::Fourier {
                    symbol: LevySymbol::new(spec)?,
                    tables: Vec::new(),
                })
            }
            _ => Ok(TransitionKernel::Closed(ClosedFormDensity::new(spec)?)),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, TransitionKernel::Closed(_))
    }

    pub fn ln_pdf(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::DensityDomain(format!(
                "density requested at time {t}; λ must be positive wherever the state price density is evaluated"
            )));
        }
        match self {
            TransitionKernel::Closed(d) => d.ln_pdf(t, x),
            TransitionKernel::Fourier { symbol, tables } => {
                if let Some(table) = tables.iter().find(|tab| tab.time() == t) {
                    let (lo, hi) = table.window();
                    if x[0] >= lo && x[0] <= hi {
                        return Ok(table.pdf(x[0]).ln());
                    }
                }
                Ok(density::fourier_density_at(symbol, t, x[0], POINTWISE_REL_TOL)?.ln())
            }
        }
    }

    /// `∂_t log p(t, x)` when available in closed form.
    pub fn d_ln_pdf_dt(&self, t: f64, x: &[f64]) -> Option<Result<f64>> {
        match self {
            TransitionKernel::Closed(d) => Some(d.d_ln_pdf_dt(t, x)),
            TransitionKernel::Fourier { .. } => None,
        }
    }
}

/// One driver `Z`, its time change `λ` and its starting point `z0`.
#[derive(Clone, Debug)]
pub struct LdtsmFactor {
    spec: LevySpec,
    lambda: LambdaSchedule,
    shift: Vec<f64>,
    kernel: TransitionKernel,
}

impl LdtsmFactor {
    pub fn new(spec: LevySpec, lambda: LambdaSchedule, shift: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if shift.len() != spec.dimension() {
            return Err(Error::invalid(
                "z0",
                format!(
                    "starting point has dimension {}, driver has {}",
                    shift.len(),
                    spec.dimension()
                ),
            ));
        }
        if let LevySpec::Gamma { .. } = spec {
            if !(lambda.min_value() > 0.0) {
                return Err(Error::invalid(
                    "lambda",
                    "gamma factors need λ(t) > 0 for all t",
                ));
            }
            if !(shift[0] > 0.0) {
                return Err(Error::invalid(
                    "z0",
                    "gamma factors need a positive starting point",
                ));
            }
        }
        let kernel = TransitionKernel::new(&spec)?;
        Ok(Self {
            spec,
            lambda,
            shift,
            kernel,
        })
    }

    /// Builds an inverted density table at time `t` covering `[-window, window]`
    /// so bulk evaluations at that time avoid pointwise quadrature.
    pub fn with_table(mut self, t: f64, window: f64) -> Result<Self> {
        if let TransitionKernel::Fourier { symbol, tables } = &mut self.kernel {
            if let DensityEvaluator::Inverted(table) =
                density::invert_auto(symbol, t, window, 1e-9)?
            {
                tables.push(table);
            }
        }
        Ok(self)
    }

    pub fn spec(&self) -> &LevySpec {
        &self.spec
    }

    pub fn lambda(&self) -> &LambdaSchedule {
        &self.lambda
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn dimension(&self) -> usize {
        self.shift.len()
    }

    fn position(&self, driver: &[f64]) -> Vec<f64> {
        self.shift.iter().zip(driver).map(|(a, b)| a + b).collect()
    }

    /// `log p(s, z0 + Z)`.
    pub fn ln_density(&self, s: f64, driver: &[f64]) -> Result<f64> {
        self.kernel.ln_pdf(s, &self.position(driver))
    }

    /// `log p(λ_t, z0 + Z_t)`.
    pub fn ln_state_price(&self, t: f64, driver: &[f64]) -> Result<f64> {
        self.ln_density(self.lambda.value(t), driver)
    }

    /// Log price of this factor alone.
    pub fn ln_bond_price(&self, t: f64, driver: &[f64], maturity: f64) -> Result<f64> {
        let x = self.position(driver);
        let den = self.kernel.ln_pdf(self.lambda.value(t), &x)?;
        if !(den.exp() > DENSITY_FLOOR) {
            return Err(Error::OutsideSupport { density: den.exp() });
        }
        let num = self
            .kernel
            .ln_pdf(self.lambda.value(maturity) + (maturity - t), &x)?;
        if !(num.exp() > DENSITY_FLOOR) {
            return Err(Error::OutsideSupport { density: num.exp() });
        }
        Ok(num - den)
    }
}

/// Product of mutually independent factors.
#[derive(Clone, Debug)]
pub struct LdtsmModel {
    factors: Vec<LdtsmFactor>,
}

impl LdtsmModel {
    pub fn new(factors: Vec<LdtsmFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid(
                "factors",
                "a model needs at least one factor",
            ));
        }
        Ok(Self { factors })
    }

    pub fn single(factor: LdtsmFactor) -> Self {
        Self {
            factors: vec![factor],
        }
    }

    pub fn factors(&self) -> &[LdtsmFactor] {
        &self.factors
    }

    /// Applies [`LdtsmFactor::with_table`] to every factor.
    pub fn with_tables(self, t: f64, window: f64) -> Result<Self> {
        let factors = self
            .factors
            .into_iter()
            .map(|f| f.with_table(t, window))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }

    pub fn initial_state(&self) -> StateSnapshot {
        StateSnapshot {
            t: 0.0,
            states: self
                .factors
                .iter()
                .map(|f| vec![0.0; f.dimension()])
                .collect(),
        }
    }

    fn check_state(&self, state: &StateSnapshot) -> Result<()> {
        if state.states.len() != self.factors.len() {
            return Err(Error::Precondition(format!(
                "state has {} factor entries, model has {} factors",
                state.states.len(),
                self.factors.len()
            )));
        }
        for (l, (f, z)) in self.factors.iter().zip(&state.states).enumerate() {
            if z.len() != f.dimension() {
                return Err(Error::Precondition(format!(
                    "factor {l} state has dimension {}, expected {}",
                    z.len(),
                    f.dimension()
                )));
            }
        }
        Ok(())
    }

    /// `log π_t`.
    pub fn ln_state_price(&self, state: &StateSnapshot) -> Result<f64> {
        self.check_state(state)?;
        self.factors
            .iter()
            .zip(&state.states)
            .map(|(f, z)| f.ln_state_price(state.t, z))
            .sum()
    }

    pub fn state_price(&self, state: &StateSnapshot) -> Result<f64> {
        Ok(self.ln_state_price(state)?.exp())
    }
}

/// Time `t` and per-factor driver values `Z^l_t` (without the shift `z0`).
#[derive(Clone, Debug, PartialEq)]
pub struct StateSnapshot {
    pub t: f64,
    pub states: Vec<Vec<f64>>,
}

impl StateSnapshot {
    pub fn new(t: f64, states: Vec<Vec<f64>>) -> Self {
        Self { t, states }
    }

    pub fn scalar(t: f64, z: f64) -> Self {
        Self {
            t,
            states: vec![vec![z]],
        }
    }
}

fn check_maturity(t: f64, maturity: f64) -> Result<()> {
    if !(maturity >= t) {
        return Err(Error::Precondition(format!(
            "maturity {maturity} precedes the valuation time {t}"
        )));
    }
    Ok(())
}

pub fn ln_bond_price(model: &LdtsmModel, state: &StateSnapshot, maturity: f64) -> Result<f64> {
    model.check_state(state)?;
    check_maturity(state.t, maturity)?;
    model
        .factors
        .iter()
        .zip(&state.states)
        .map(|(f, z)| f.ln_bond_price(state.t, z, maturity))
        .sum()
}

/// Zero-coupon price `P_t^T`; exactly one when `T = t`.
pub fn bond_price(model: &LdtsmModel, state: &StateSnapshot, maturity: f64) -> Result<f64> {
    Ok(ln_bond_price(model, state, maturity)?.exp())
}

fn closed_times(lambda: &LambdaSchedule, t: f64, maturity: f64) -> Result<(f64, f64)> {
    check_maturity(t, maturity)?;
    let lt = lambda.value(t);
    let s = lambda.value(maturity) + (maturity - t);
    if !(lt > 0.0) || !(s > 0.0) {
        return Err(Error::DensityDomain(format!(
            "λ_t = {lt}: the density at time zero is degenerate"
        )));
    }
    Ok((lt, s))
}

/// Gaussian factor in closed form,
/// `(λ_t/s)^{d/2} exp{-½(1/s - 1/λ_t)<Σ^{-1}z, z>}` with `s = λ_T + T - t`.
/// `z` is the full position (shift included).
pub fn gaussian_ldtsm_closed(
    covariance: &[Vec<f64>],
    lambda: &LambdaSchedule,
    t: f64,
    z: &[f64],
    maturity: f64,
) -> Result<f64> {
    let sigma = crate::levy::covariance_matrix(covariance)?;
    let precision = sigma
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("covariance".into()))?;
    if z.len() != precision.nrows() {
        return Err(Error::Precondition(
            "state dimension does not match covariance".into(),
        ));
    }
    let (lt, s) = closed_times(lambda, t, maturity)?;
    let v = nalgebra::DVector::from_column_slice(z);
    let q = v.dot(&(&precision * &v));
    let d = z.len() as f64;
    Ok((0.5 * d * (lt / s).ln() - 0.5 * (1.0 / s - 1.0 / lt) * q).exp())
}

/// Cauchy factor in closed form. Each density carries its own drift
/// `|z - sγ|²`, so the formula is the exact density ratio for any `γ`.
pub fn cauchy_ldtsm_closed(
    theta: f64,
    gamma: &[f64],
    lambda: &LambdaSchedule,
    t: f64,
    z: &[f64],
    maturity: f64,
) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::invalid("theta", "must be positive"));
    }
    if z.len() != gamma.len() {
        return Err(Error::Precondition(
            "state dimension does not match drift".into(),
        ));
    }
    let (lt, s) = closed_times(lambda, t, maturity)?;
    let r2 = |time: f64| -> f64 {
        z.iter()
            .zip(gamma)
            .map(|(x, g)| (x - time * g).powi(2))
            .sum()
    };
    let d = z.len() as f64;
    let th2 = theta * theta;
    let ratio = (th2 * lt * lt + r2(lt)) / (th2 * s * s + r2(s));
    Ok((s / lt) * ratio.powf(0.5 * (d + 1.0)))
}

/// Gamma factor in closed form, assembled in log space:
/// `b^{a(s-λ_t)} Γ(aλ_t)/Γ(as) z^{a(s-λ_t)}` with `s = λ_T + T - t`.
pub fn gamma_ldtsm_closed(
    a: f64,
    b: f64,
    lambda: &LambdaSchedule,
    t: f64,
    z: f64,
    maturity: f64,
) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::invalid(
            if a > 0.0 { "b" } else { "a" },
            "must be positive",
        ));
    }
    if !(z > 0.0) {
        return Err(Error::OutsideSupport { density: 0.0 });
    }
    let (lt, s) = closed_times(lambda, t, maturity)?;
    let excess = a * (s - lt);
    let ln_price = excess * b.ln() + ln_gamma(a * lt) - ln_gamma(a * s) + excess * z.ln();
    if !ln_price.is_finite() || ln_price > 709.0 {
        return Err(Error::Overflow(format!("log price {ln_price}")));
    }
    Ok(ln_price.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMethod {
    Analytic,
    CentralDifference,
    /// `T - h < t`, so a second-order forward difference was used.
    OneSided,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardRate {
    pub value: f64,
    pub method: RateMethod,
}

pub fn default_bump(maturity: f64) -> f64 {
    1e-5 * maturity.max(1.0)
}

/// `f(t,T) = -∂_T log P_t^T` by finite differences of the log price.
pub fn forward_rate_fd(
    model: &LdtsmModel,
    state: &StateSnapshot,
    maturity: f64,
    bump: f64,
) -> Result<ForwardRate> {
    check_maturity(state.t, maturity)?;
    if !(bump > 0.0) {
        return Err(Error::invalid("bump", "must be positive"));
    }
    let lp = |m: f64| ln_bond_price(model, state, m);
    if maturity - bump < state.t {
        let v = -(-3.0 * lp(maturity)? + 4.0 * lp(maturity + bump)? - lp(maturity + 2.0 * bump)?)
            / (2.0 * bump);
        Ok(ForwardRate {
            value: v,
            method: RateMethod::OneSided,
        })
    } else {
        let v = -(lp(maturity + bump)? - lp(maturity - bump)?) / (2.0 * bump);
        Ok(ForwardRate {
            value: v,
            method: RateMethod::CentralDifference,
        })
    }
}

/// Forward rate, analytic when every factor has a closed-form density
/// (`f = -Σ_l (1 + λ_l'(T)) ∂_s log p_l(s_l, z_l)`), otherwise by central
/// difference with `bump` (default [`default_bump`]).
pub fn forward_rate(
    model: &LdtsmModel,
    state: &StateSnapshot,
    maturity: f64,
    bump: Option<f64>,
) -> Result<ForwardRate> {
    model.check_state(state)?;
    check_maturity(state.t, maturity)?;
    if model.factors.iter().all(|f| f.kernel.is_closed_form()) {
        let mut value = 0.0;
        for (f, z) in model.factors.iter().zip(&state.states) {
            let s = f.lambda.value(maturity) + (maturity - state.t);
            let x = f.position(z);
            let dlog = f
                .kernel
                .d_ln_pdf_dt(s, &x)
                .expect("closed-form kernel has a time derivative")?;
            value -= (1.0 + f.lambda.derivative(maturity)) * dlog;
        }
        return Ok(ForwardRate {
            value,
            method: RateMethod::Analytic,
        });
    }
    forward_rate_fd(
        model,
        state,
        maturity,
        bump.unwrap_or_else(|| default_bump(maturity)),
    )
}

/// `r_t = f(t, t)`.
pub fn short_rate(model: &LdtsmModel, state: &StateSnapshot) -> Result<ForwardRate> {
    forward_rate(model, state, state.t, None)
}
