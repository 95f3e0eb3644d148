//! Transition densities by numerical Fourier inversion, and the convolution
//! quadrature oracle.
//!
//! The inversion evaluates `p(t, x) = (2π)^{-1} ∫ e^{-iξx} e^{-tψ(ξ)} dξ` on a
//! uniform grid with one FFT. With `Δξ = 2Ξ/N` and `Δx = π/Ξ` the spatial
//! nodes are `x_j = -X + jΔx`, `X = NΔx/2`, and the discrete sum represents the
//! density periodised with period `2X`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::levy::{ClosedFormDensity, LevySpec, LevySymbol, Support};
use crate::quadrature::{self, SimpsonOptions};

pub const MIN_NODES: usize = 1 << 10;
pub const MAX_NODES: usize = 1 << 22;
pub const DEFAULT_TAIL_TOL: f64 = 1e-13;

/// Frequency cutoff and node count of an FFT inversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionGrid {
    cutoff: f64,
    nodes: usize,
    tail_tol: f64,
}

impl InversionGrid {
    pub fn new(cutoff: f64, nodes: usize) -> Result<Self> {
        Self::with_tail_tol(cutoff, nodes, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(cutoff: f64, nodes: usize, tail_tol: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::invalid(
                "cutoff",
                format!("must be positive, got {cutoff}"),
            ));
        }
        if !nodes.is_power_of_two() || nodes < MIN_NODES {
            return Err(Error::invalid(
                "nodes",
                format!("must be a power of two of at least {MIN_NODES}, got {nodes}"),
            ));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::invalid(
                "tail_tol",
                format!("must lie in (0, 1), got {tail_tol}"),
            ));
        }
        Ok(Self {
            cutoff,
            nodes,
            tail_tol,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn frequency_step(&self) -> f64 {
        2.0 * self.cutoff / self.nodes as f64
    }

    pub fn spatial_step(&self) -> f64 {
        PI / self.cutoff
    }

    /// Half-width `X` of the spatial window `[-X, X)`.
    pub fn half_window(&self) -> f64 {
        0.5 * self.nodes as f64 * self.spatial_step()
    }

    /// Halves `Δx` while keeping the window.
    pub fn refined(&self) -> Result<Self> {
        Self::with_tail_tol(2.0 * self.cutoff, 2 * self.nodes, self.tail_tol)
    }
}

/// Smallest `Ξ` with `exp(-t Re ψ(Ξ)) ≤ ε`: doubling to bracket, then bisection.
pub fn required_cutoff(symbol: &LevySymbol, t: f64, tail_tol: f64) -> Result<f64> {
    if !symbol.has_unbounded_real_part() {
        return Err(Error::AtomicDistribution);
    }
    if symbol.dimension() != 1 {
        return Err(Error::Unsupported(
            "frequency cutoff search in dimension > 1".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "time must be positive, got {t}"
        )));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::invalid(
            "tail_tol",
            format!("must lie in (0, 1), got {tail_tol}"),
        ));
    }
    let target = -tail_tol.ln();
    let decay = |xi: f64| t * symbol.eval1(xi).re;
    let mut hi = 1.0;
    while decay(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Overflow("frequency cutoff search diverged".into()));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if decay(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Tail behaviour used outside the inverted window.
#[derive(Clone, Copy, Debug)]
enum TailModel {
    Zero,
    /// `c |x|^{-1-α}`, the leading term of the symmetric stable tail.
    Power {
        coefficient: f64,
        exponent: f64,
    },
}

/// Density table at a fixed time produced by [`invert`].
#[derive(Clone, Debug)]
pub struct InvertedDensity {
    t: f64,
    x_start: f64,
    dx: f64,
    values: Vec<f64>,
    max_clamp: f64,
    tail: TailModel,
}

impl InvertedDensity {
    pub fn time(&self) -> f64 {
        self.t
    }

    /// Largest magnitude of negative ringing that was clamped to zero.
    pub fn max_clamp(&self) -> f64 {
        self.max_clamp
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(j, p)| (self.x_start + j as f64 * self.dx, *p))
    }

    pub fn spatial_step(&self) -> f64 {
        self.dx
    }

    /// Interior of the window where the cubic stencil is available.
    pub fn window(&self) -> (f64, f64) {
        let n = self.values.len();
        (
            self.x_start + self.dx,
            self.x_start + (n as f64 - 3.0) * self.dx,
        )
    }

    /// Trapezoid mass of the table over the whole window.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.window();
        if !(x >= lo && x <= hi) {
            return match self.tail {
                TailModel::Zero => 0.0,
                TailModel::Power {
                    coefficient,
                    exponent,
                } => coefficient * x.abs().powf(-exponent),
            };
        }
        let s = (x - self.x_start) / self.dx;
        let j = (s.floor() as usize).clamp(1, self.values.len() - 3);
        let u = s - j as f64;
        let (p0, p1, p2, p3) = (
            self.values[j - 1],
            self.values[j],
            self.values[j + 1],
            self.values[j + 2],
        );
        // 4-point Lagrange on nodes -1, 0, 1, 2
        let v = -p0 * u * (u - 1.0) * (u - 2.0) / 6.0
            + p1 * (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0
            - p2 * (u + 1.0) * u * (u - 2.0) / 2.0
            + p3 * (u + 1.0) * u * (u - 1.0) / 6.0;
        v.max(0.0)
    }
}

/// `p(t, ·)` at a fixed time, by closed form or by an inverted table.
#[derive(Clone, Debug)]
pub enum DensityEvaluator {
    ClosedForm {
        density: ClosedFormDensity,
        t: f64,
        width: f64,
    },
    Inverted(InvertedDensity),
}

impl DensityEvaluator {
    pub fn closed_form(spec: &LevySpec, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!(
                "density time must be positive, got {t}"
            )));
        }
        let density = ClosedFormDensity::new(spec)?;
        let width = LevySymbol::new(spec)?.width(t);
        Ok(DensityEvaluator::ClosedForm { density, t, width })
    }

    pub fn time(&self) -> f64 {
        match self {
            DensityEvaluator::ClosedForm { t, .. } => *t,
            DensityEvaluator::Inverted(table) => table.t,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DensityEvaluator::ClosedForm { density, .. } => density.dimension(),
            DensityEvaluator::Inverted(_) => 1,
        }
    }

    pub fn support(&self) -> Support {
        match self {
            DensityEvaluator::ClosedForm { density, .. } => density.support(),
            DensityEvaluator::Inverted(_) => Support::REAL_LINE,
        }
    }

    fn width(&self) -> f64 {
        match self {
            DensityEvaluator::ClosedForm { width, .. } => *width,
            DensityEvaluator::Inverted(table) => 50.0 * table.dx,
        }
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        match self {
            DensityEvaluator::ClosedForm { density, t, .. } => density.pdf(*t, x),
            DensityEvaluator::Inverted(table) => Ok(table.pdf(x[0])),
        }
    }

    pub fn pdf1(&self, x: f64) -> Result<f64> {
        self.pdf(&[x])
    }
}

fn check_invertible(symbol: &LevySymbol, t: f64) -> Result<()> {
    if !symbol.has_unbounded_real_part() {
        return Err(Error::AtomicDistribution);
    }
    if symbol.dimension() != 1 {
        return Err(Error::Unsupported(
            "numerical inversion in dimension > 1".into(),
        ));
    }
    if matches!(symbol.spec(), LevySpec::Gamma { .. }) {
        return Err(Error::Unsupported(
            "gamma densities are evaluated in closed form, not by inversion".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "time must be positive, got {t}"
        )));
    }
    Ok(())
}

fn tail_model(symbol: &LevySymbol, t: f64) -> TailModel {
    match symbol.spec() {
        LevySpec::SymmetricStable { alpha, theta } => TailModel::Power {
            coefficient: theta * t * gamma_fn(1.0 + alpha) * (PI * alpha / 2.0).sin() / PI,
            exponent: 1.0 + alpha,
        },
        LevySpec::Cauchy { theta, gamma } if gamma[0] == 0.0 => TailModel::Power {
            coefficient: theta * t / PI,
            exponent: 2.0,
        },
        _ => TailModel::Zero,
    }
}

/// Inverts `exp(-tψ)` on `grid` by FFT.
///
/// Fails with [`Error::CutoffInsufficient`] when the characteristic function
/// has not decayed below the grid's tail tolerance at `|ξ| = Ξ`.
pub fn invert(symbol: &LevySymbol, t: f64, grid: &InversionGrid) -> Result<DensityEvaluator> {
    check_invertible(symbol, t)?;
    let tail = (-t * symbol.eval1(grid.cutoff).re).exp();
    if tail > grid.tail_tol {
        return Err(Error::CutoffInsufficient {
            given: grid.cutoff,
            required: required_cutoff(symbol, t, grid.tail_tol)?,
        });
    }
    let n = grid.nodes;
    let dxi = grid.frequency_step();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let xi = -grid.cutoff + k as f64 * dxi;
            let phi = symbol.characteristic(t, &[xi]);
            if k % 2 == 0 {
                phi
            } else {
                -phi
            }
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let norm = dxi / (2.0 * PI);
    let mut values: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * norm * b.re
        })
        .collect();
    if symbol.is_symmetric() {
        // node j mirrors node n - j; node 0 has no partner inside the window
        for j in 1..n / 2 {
            let avg = 0.5 * (values[j] + values[n - j]);
            values[j] = avg;
            values[n - j] = avg;
        }
    }
    let mut max_clamp = 0.0_f64;
    for v in values.iter_mut() {
        if *v < 0.0 {
            max_clamp = max_clamp.max(-*v);
            *v = 0.0;
        }
    }
    Ok(DensityEvaluator::Inverted(InvertedDensity {
        t,
        x_start: -grid.half_window(),
        dx: grid.spatial_step(),
        values,
        max_clamp,
        tail: tail_model(symbol, t),
    }))
}

/// Picks a grid whose window covers `[-window, window]` with room for
/// periodisation error, and whose cutoff meets [`DEFAULT_TAIL_TOL`].
pub fn auto_grid(symbol: &LevySymbol, t: f64, window: f64) -> Result<InversionGrid> {
    check_invertible(symbol, t)?;
    let xi_tail = required_cutoff(symbol, t, DEFAULT_TAIL_TOL)?;
    let width = symbol.width(t);
    let period = match symbol.spec() {
        LevySpec::Gaussian { .. } => (8.0 * window).max(40.0 * width),
        _ => (8.0 * window).max(5000.0 * width),
    };
    let dx = (PI / xi_tail).min(width / 100.0);
    let nodes = ((period / dx).ceil() as usize)
        .next_power_of_two()
        .max(MIN_NODES);
    if nodes > MAX_NODES {
        return Err(Error::CutoffInsufficient {
            given: PI * MAX_NODES as f64 / period,
            required: PI / dx,
        });
    }
    let dx = period / nodes as f64;
    let cutoff = (PI / dx).max(xi_tail);
    InversionGrid::new(cutoff, nodes)
}

/// Inverts on [`auto_grid`], doubling the resolution until two successive
/// tables agree to `tol` on `[-window, window]`.
pub fn invert_auto(symbol: &LevySymbol, t: f64, window: f64, tol: f64) -> Result<DensityEvaluator> {
    let mut grid = auto_grid(symbol, t, window)?;
    let mut current = invert(symbol, t, &grid)?;
    let probes: Vec<f64> = (0..=200)
        .map(|i| window * (i as f64 / 100.0 - 1.0) * 0.999)
        .collect();
    loop {
        let next_grid = grid.refined()?;
        if next_grid.nodes() > MAX_NODES {
            return Ok(current);
        }
        let next = invert(symbol, t, &next_grid)?;
        let diff = probes
            .iter()
            .map(|x| (next.pdf1(*x).unwrap_or(0.0) - current.pdf1(*x).unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        grid = next_grid;
        current = next;
        if diff <= tol {
            return Ok(current);
        }
    }
}

/// Pointwise inversion `p(t,x) = π^{-1} ∫_0^Ξ Re[e^{-iξx} e^{-tψ(ξ)}] dξ` by
/// adaptive quadrature.
pub fn fourier_density_at(symbol: &LevySymbol, t: f64, x: f64, rel_tol: f64) -> Result<f64> {
    check_invertible(symbol, t)?;
    let cutoff = required_cutoff(symbol, t, 1e-17)?;
    let panels = ((cutoff * x.abs() / PI).ceil() as usize).clamp(16, 1 << 20);
    let opts = SimpsonOptions {
        rel_tol,
        // roundoff floor of summing O(1) integrand values over [0, cutoff]
        abs_tol: 8.0 * f64::EPSILON * cutoff,
        initial_panels: panels,
        ..SimpsonOptions::default()
    };
    let integrand = |xi: f64| {
        let phi = symbol.characteristic(t, &[xi]);
        let rot = Complex64::new(0.0, -xi * x).exp();
        (rot * phi).re
    };
    let r = if panels > 16 {
        quadrature::adaptive_simpson(integrand, 0.0, cutoff, &opts)
    } else {
        quadrature::integrate_interval(integrand, 0.0, cutoff, &opts)
    };
    Ok((r.into_result()? / PI).max(0.0))
}

fn integrate_1d<F: Fn(f64) -> f64>(
    h: F,
    lower: f64,
    upper: f64,
    center: f64,
    scale: f64,
    opts: &SimpsonOptions,
) -> Result<f64> {
    if lower >= upper {
        return Ok(0.0);
    }
    let r = match (lower.is_finite(), upper.is_finite()) {
        (false, false) => quadrature::integrate_line(h, center, scale, opts),
        _ => quadrature::integrate(h, lower, upper, scale, opts),
    };
    r.into_result()
}

/// `(f ∗ g)(x) = ∫ f(x - y) g(y) dy`.
///
/// For `f = p(s, ·)` and `g = p(u, ·)` this is `p(s + u, x)` by the semigroup
/// property. Both evaluators must be one-dimensional, or both closed-form in
/// dimension two.
pub fn convolve_oracle(
    f: &DensityEvaluator,
    g: &DensityEvaluator,
    x: &[f64],
    opts: &SimpsonOptions,
) -> Result<f64> {
    match (f.dimension(), g.dimension(), x.len()) {
        (1, 1, 1) => {
            let x = x[0];
            let (fs, gs) = (f.support(), g.support());
            let lower = gs.lower.max(x - fs.upper);
            let upper = gs.upper.min(x - fs.lower);
            let scale = f.width().max(g.width());
            let h = |y: f64| f.pdf1(x - y).unwrap_or(f64::NAN) * g.pdf1(y).unwrap_or(f64::NAN);
            integrate_1d(h, lower, upper, 0.5 * x, scale, opts)
        }
        (2, 2, 2) => {
            if !matches!(f, DensityEvaluator::ClosedForm { .. })
                || !matches!(g, DensityEvaluator::ClosedForm { .. })
            {
                return Err(Error::Unsupported(
                    "two-dimensional oracle needs closed-form densities".into(),
                ));
            }
            let scale = f.width().max(g.width());
            let inner_opts = SimpsonOptions {
                rel_tol: opts.rel_tol * 0.01,
                ..*opts
            };
            let outer = |y0: f64| {
                let inner = |y1: f64| {
                    f.pdf(&[x[0] - y0, x[1] - y1]).unwrap_or(f64::NAN)
                        * g.pdf(&[y0, y1]).unwrap_or(f64::NAN)
                };
                quadrature::integrate_line(inner, 0.5 * x[1], scale, &inner_opts)
                    .into_result()
                    .unwrap_or(f64::NAN)
            };
            integrate_1d(
                outer,
                f64::NEG_INFINITY,
                f64::INFINITY,
                0.5 * x[0],
                scale,
                opts,
            )
        }
        (df, dg, dx) => Err(Error::Unsupported(format!(
            "convolution oracle for dimensions ({df}, {dg}) at a point of dimension {dx}"
        ))),
    }
}

/// `E[f(z + ΔZ)] = ∫ f(z + y) g(y) dy` where `g` is the law of the increment.
///
/// This is the conditional expectation the state price density must satisfy.
/// It coincides with [`convolve_oracle`] when `g` is an even function.
pub fn markov_oracle(
    f: &DensityEvaluator,
    g: &DensityEvaluator,
    z: f64,
    opts: &SimpsonOptions,
) -> Result<f64> {
    if f.dimension() != 1 || g.dimension() != 1 {
        return Err(Error::Unsupported("markov oracle in dimension > 1".into()));
    }
    let (fs, gs) = (f.support(), g.support());
    let lower = gs.lower.max(fs.lower - z);
    let upper = gs.upper.min(fs.upper - z);
    let scale = f.width().max(g.width());
    let h = |y: f64| f.pdf1(z + y).unwrap_or(f64::NAN) * g.pdf1(y).unwrap_or(f64::NAN);
    integrate_1d(h, lower, upper, -0.5 * z, scale, opts)
}
