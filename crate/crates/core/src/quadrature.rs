//! One-dimensional quadrature: globally adaptive Simpson on finite, half-line
//! and whole-line domains, plus Gauss–Hermite rules.
//!
//! Infinite domains are mapped onto finite ones with rational substitutions,
//! which keep algebraic (Cauchy-type) tails integrable. Finite domains use a
//! polynomial sigmoid map so integrable endpoint singularities such as
//! `x^{-1/2}` are smoothed out before Simpson sees them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct SimpsonOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub initial_panels: usize,
    /// Integrand evaluations per pass before remaining panels are accepted
    /// unrefined and the result is flagged as not converged.
    pub max_evaluations: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-300,
            max_depth: 48,
            initial_panels: 16,
            max_evaluations: 4_000_000,
        }
    }
}

impl SimpsonOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Sum of the local Richardson error estimates.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadratureResult {
    pub fn into_result(self) -> Result<f64> {
        if self.converged && self.value.is_finite() {
            Ok(self.value)
        } else {
            Err(Error::QuadratureNonConvergence {
                estimate: self.value,
                error_bound: self.error,
            })
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn simpson_pass<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    let n = opts.initial_panels.max(1);
    let h = (b - a) / n as f64;
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: f64| {
        evaluations.set(evaluations.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    };
    let mut stack = Vec::with_capacity(64);
    let mut left = eval(a);
    for i in 0..n {
        let pa = a + i as f64 * h;
        let pb = if i + 1 == n {
            b
        } else {
            a + (i + 1) as f64 * h
        };
        let fm = eval(0.5 * (pa + pb));
        let fb = eval(pb);
        stack.push(Panel {
            a: pa,
            b: pb,
            fa: left,
            fm,
            fb,
            whole: simpson(pa, pb, left, fm, fb),
            depth: 0,
        });
        left = fb;
    }
    let width = b - a;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let flm = eval(0.5 * (p.a + m));
        let frm = eval(0.5 * (m + p.b));
        let sl = simpson(p.a, m, p.fa, flm, p.fm);
        let sr = simpson(m, p.b, p.fm, frm, p.fb);
        let two = sl + sr;
        let diff = two - p.whole;
        let local_tol = tol * (p.b - p.a) / width;
        if !two.is_finite() {
            converged = false;
            value = f64::NAN;
            break;
        }
        let exhausted = p.depth >= opts.max_depth || evaluations.get() >= opts.max_evaluations;
        if diff.abs() <= 15.0 * local_tol || exhausted || (m - p.a) <= f64::EPSILON * m.abs() {
            if diff.abs() > 15.0 * local_tol {
                converged = false;
            }
            value += two + diff / 15.0;
            error += diff.abs() / 15.0;
        } else {
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: sl,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: sr,
                depth: p.depth + 1,
            });
        }
    }
    QuadratureResult {
        value,
        error,
        evaluations: evaluations.get(),
        converged,
    }
}

/// Globally adaptive Simpson with Richardson extrapolation on `[a, b]`.
///
/// The absolute target is `max(abs_tol, rel_tol · |I|)`; `|I|` is taken from
/// a previous pass, so the routine reruns when the first estimate was far
/// too coarse.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    if a == b {
        return QuadratureResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    if a > b {
        let mut r = adaptive_simpson(f, b, a, opts);
        r.value = -r.value;
        return r;
    }
    let coarse = simpson_pass(&f, a, b, f64::INFINITY, opts);
    let mut scale = coarse.value.abs();
    let mut total_evals = coarse.evaluations;
    let mut result = coarse;
    for _ in 0..4 {
        let tol = (opts.rel_tol * scale).max(opts.abs_tol);
        result = simpson_pass(&f, a, b, tol, opts);
        total_evals += result.evaluations;
        if !result.value.is_finite() || result.value.abs() <= 2.0 * scale {
            break;
        }
        scale = result.value.abs();
    }
    result.evaluations = total_evals;
    result
}

/// `∫_{-∞}^{∞} f(y) dy` via `y = c + s·u/(1-u²)`.
pub fn integrate_line<F: Fn(f64) -> f64>(
    f: F,
    center: f64,
    scale: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    let g = |u: f64| {
        let one_minus = 1.0 - u * u;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let y = center + scale * u / one_minus;
        let jac = scale * (1.0 + u * u) / (one_minus * one_minus);
        let v = f(y) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive_simpson(g, -1.0, 1.0, opts)
}

/// `∫_a^∞ f(y) dy`, splitting at `a + s` so both an endpoint singularity at `a`
/// and an algebraic tail are handled.
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    let split = a + scale;
    let near = integrate_interval(&f, a, split, opts);
    let g = |v: f64| {
        if v >= 1.0 {
            return 0.0;
        }
        let y = split + scale * v / (1.0 - v);
        let jac = scale / ((1.0 - v) * (1.0 - v));
        let r = f(y) * jac;
        if r.is_finite() {
            r
        } else {
            0.0
        }
    };
    let far = adaptive_simpson(g, 0.0, 1.0, opts);
    combine(near, far)
}

/// `∫_{-∞}^b f(y) dy`.
pub fn integrate_lower_half_line<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    scale: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    integrate_half_line(|y| f(-y), -b, scale, opts)
}

const SIGMOID_ORDER: i32 = 4;

/// `∫_a^b f(y) dy` through `y = a + (b-a)·w^k / (w^k + (1-w)^k)`, `k = 4`,
/// which tames integrable power singularities at either endpoint.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    let len = b - a;
    let k = SIGMOID_ORDER;
    let g = |w: f64| {
        if w <= 0.0 || w >= 1.0 {
            return 0.0;
        }
        let p = w.powi(k);
        let q = (1.0 - w).powi(k);
        let s = p + q;
        let y = a + len * p / s;
        let jac = len * k as f64 * w.powi(k - 1) * (1.0 - w).powi(k - 1) / (s * s);
        let r = f(y) * jac;
        if r.is_finite() {
            r
        } else {
            0.0
        }
    };
    adaptive_simpson(g, 0.0, 1.0, opts)
}

/// Integrates over `[lower, upper]`, choosing the map from which ends are infinite.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    scale: f64,
    opts: &SimpsonOptions,
) -> QuadratureResult {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => integrate_interval(f, lower, upper, opts),
        (true, false) => integrate_half_line(f, lower, scale, opts),
        (false, true) => integrate_lower_half_line(f, upper, scale, opts),
        (false, false) => integrate_line(f, 0.0, scale, opts),
    }
}

fn combine(a: QuadratureResult, b: QuadratureResult) -> QuadratureResult {
    QuadratureResult {
        value: a.value + b.value,
        error: a.error + b.error,
        evaluations: a.evaluations + b.evaluations,
        converged: a.converged && b.converged,
    }
}

/// Composite Simpson on `n` (even) uniform panels.
pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Gauss–Hermite rule for the weight `exp(-x²)` on the real line.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton
    /// iteration on the orthonormal Hermite recurrence, which also gives the
    /// weights.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        guesses.sort_by(|a, b| b.total_cmp(a));
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = guesses[i];
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        Self { nodes, weights }
    }

    /// `E[g(ξ)]` for `ξ ~ N(0, 1)`.
    pub fn expect_standard_normal<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let s = std::f64::consts::SQRT_2;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(s * x))
            .sum::<f64>()
            / PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_smooth() {
        let r = adaptive_simpson(
            |x| x * x * x - 2.0 * x,
            0.0,
            2.0,
            &SimpsonOptions::default(),
        );
        assert!((r.value - 0.0).abs() < 1e-12);
        let r = adaptive_simpson(f64::sin, 0.0, PI, &SimpsonOptions::default());
        assert!((r.value - 2.0).abs() < 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn whole_line_heavy_tail() {
        let r = integrate_line(
            |x| 1.0 / (PI * (1.0 + x * x)),
            0.0,
            1.0,
            &SimpsonOptions::with_rel_tol(1e-10),
        );
        assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
        let r = integrate_line(
            |x| (-x * x / 2.0).exp(),
            0.0,
            1.0,
            &SimpsonOptions::default(),
        );
        assert!((r.value - (2.0 * PI).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate_interval(
            |x| x.powf(-0.5),
            0.0,
            1.0,
            &SimpsonOptions::with_rel_tol(1e-10),
        );
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
        // ∫_0^∞ x^{-1/2} e^{-x} dx = √π
        let r = integrate_half_line(
            |x| x.powf(-0.5) * (-x).exp(),
            0.0,
            1.0,
            &SimpsonOptions::with_rel_tol(1e-10),
        );
        assert!((r.value - PI.sqrt()).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn lower_half_line() {
        let r = integrate_lower_half_line(|x| x.exp(), 0.0, 1.0, &SimpsonOptions::default());
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let opts = SimpsonOptions {
            max_depth: 2,
            ..SimpsonOptions::default()
        };
        let r = adaptive_simpson(|x: f64| (1.0 / (x + 1e-6)).sin(), 0.0, 1.0, &opts);
        assert!(!r.converged);
        assert!(matches!(
            r.into_result(),
            Err(Error::QuadratureNonConvergence { .. })
        ));
        let opts = SimpsonOptions {
            max_evaluations: 10_000,
            ..SimpsonOptions::with_rel_tol(1e-14)
        };
        let r = adaptive_simpson(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, &opts);
        assert!(!r.converged);
        assert!(r.evaluations < 4 * 10_000 + 1_000);
    }

    #[test]
    fn gauss_hermite_moments() {
        for n in [1, 2, 5, 20, 64, 151, 256, 512] {
            let gh = GaussHermite::new(n);
            let w: f64 = gh.weights.iter().sum();
            assert!((w - PI.sqrt()).abs() < 1e-12, "n = {n}");
            assert!(
                gh.nodes.windows(2).all(|p| p[0] > p[1]),
                "n = {n}: nodes not distinct"
            );
            if n >= 3 {
                let var = gh.expect_standard_normal(|x| x * x);
                assert!((var - 1.0).abs() < 1e-12, "n = {n}");
                let m4 = gh.expect_standard_normal(|x| x.powi(4));
                assert!((m4 - 3.0).abs() < 1e-11, "n = {n}");
            }
        }
        let gh = GaussHermite::new(40);
        // E[exp(-a ξ²)] = (1 + 2a)^{-1/2}
        let v = gh.expect_standard_normal(|x| (-0.5 * x * x).exp());
        assert!((v - 0.5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn composite_simpson_exact_for_cubics() {
        let v = composite_simpson(|x| x.powi(3) + x, 0.0, 2.0, 10);
        assert!((v - 6.0).abs() < 1e-12);
    }
}
