//! Exact-increment path generation.
//!
//! Every path owns an RNG seeded from `SHA-256(master_seed ‖ path_index)`, so a
//! path depends only on its index and never on how paths are scheduled across
//! workers. Bulk helpers collect results in index order before any reduction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::levy::LevySpec;

/// Uniform grid `0, Δt, ..., T_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    horizon: f64,
    steps: usize,
}

impl PathGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("horizon", "must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::invalid("steps", "must be at least one"));
        }
        Ok(Self { horizon, steps })
    }

    /// Grid with step as close as possible to `dt` that lands on `horizon`.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("step", "must be positive"));
        }
        Self::new(horizon, ((horizon / dt).round() as usize).max(1))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of the node at time `t`; `t` must coincide with a node.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::PathGrid(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let k = (t / self.dt()).round() as usize;
        if (self.time(k) - t).abs() > 1e-9 * self.dt().max(t) {
            return Err(Error::PathGrid(format!(
                "time {t} is not a grid node (step {})",
                self.dt()
            )));
        }
        Ok(k)
    }
}

/// 32-byte seed for path `index` under `master`.
pub fn path_seed(master: u64, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    seed
}

pub fn path_rng(master: u64, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(path_seed(master, index))
}

/// A new master seed derived from `master` and a label, for reruns and sub-streams.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Maps `f` over path indices `0..n` in parallel and returns results in index order.
pub fn map_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Draws increments `Z_{s+dt} - Z_s` for one driver family.
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    spec: LevySpec,
    chol: Option<DMatrix<f64>>,
}

impl IncrementSampler {
    pub fn new(spec: &LevySpec) -> Result<Self> {
        spec.validate()?;
        let chol = match spec {
            LevySpec::Gaussian { covariance } => Some(
                crate::levy::covariance_matrix(covariance)?
                    .cholesky()
                    .ok_or_else(|| Error::invalid("covariance", "must be positive definite"))?
                    .l(),
            ),
            _ => None,
        };
        Ok(Self {
            spec: spec.clone(),
            chol,
        })
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Vec<f64> {
        match &self.spec {
            LevySpec::Gaussian { .. } => {
                let l = self.chol.as_ref().expect("gaussian sampler has a factor");
                let g = DVector::from_fn(l.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
                (l * g * dt.sqrt()).iter().copied().collect()
            }
            LevySpec::Cauchy { theta, gamma } => {
                if gamma.len() == 1 {
                    let c = (PI * (rng.random::<f64>() - 0.5)).tan();
                    vec![dt * (gamma[0] + theta * c)]
                } else {
                    // G/|g| has characteristic function exp(-|ξ|)
                    let g: f64 = rng.sample(StandardNormal);
                    let inv = 1.0 / g.abs();
                    gamma
                        .iter()
                        .map(|gm| dt * (gm + theta * inv * rng.sample::<f64, _>(StandardNormal)))
                        .collect()
                }
            }
            LevySpec::SymmetricStable { alpha, theta } => {
                vec![(theta * dt).powf(1.0 / alpha) * standard_stable(*alpha, rng)]
            }
            LevySpec::Gamma { a, b } => {
                let g = Gamma::new(a * dt, 1.0 / b).expect("validated gamma parameters");
                vec![g.sample(rng)]
            }
            LevySpec::CompoundPoisson { marks, intensities } => {
                let mut x = 0.0;
                for (m, nu) in marks.iter().zip(intensities) {
                    x += m * poisson_count(nu * dt, rng) as f64;
                }
                vec![x]
            }
        }
    }
}

/// Chambers–Mallows–Stuck draw with characteristic function `exp(-|ξ|^α)`.
pub fn standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let num = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    num * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// One point of a Poisson random measure: time and index into the mark list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: usize,
}

/// Homogeneous per-mark Poisson event times on `[0, horizon]`, sorted by time.
pub fn simulate_poisson_measure<R: Rng + ?Sized>(
    intensities: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Vec<JumpEvent> {
    let mut events = Vec::new();
    for (j, &nu) in intensities.iter().enumerate() {
        let n = poisson_count(nu * horizon, rng);
        for _ in 0..n {
            events.push(JumpEvent {
                time: horizon * rng.random::<f64>(),
                mark: j,
            });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.mark.cmp(&b.mark)));
    events
}

/// Standard Brownian motion sampled at the grid nodes, starting at zero.
pub fn simulate_brownian<R: Rng + ?Sized>(grid: &PathGrid, rng: &mut R) -> Vec<f64> {
    let sd = grid.dt().sqrt();
    let mut w = Vec::with_capacity(grid.steps() + 1);
    w.push(0.0);
    let mut x = 0.0;
    for _ in 0..grid.steps() {
        x += sd * rng.sample::<f64, _>(StandardNormal);
        w.push(x);
    }
    w
}

/// Realized states of several independent drivers on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub grid: PathGrid,
    /// Starting point `z0` per factor.
    pub origins: Vec<Vec<f64>>,
    /// `drivers[l][k]` is `Z^l` at node `k`, started at zero.
    pub drivers: Vec<Vec<Vec<f64>>>,
    /// Events of compound Poisson factors, as `(factor, event)`.
    pub events: Vec<(usize, JumpEvent)>,
}

impl SamplePath {
    /// `z0 + Z` for factor `l` at node `k`.
    pub fn state(&self, l: usize, k: usize) -> Vec<f64> {
        self.origins[l]
            .iter()
            .zip(&self.drivers[l][k])
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Driver values of all factors at node `k`.
    pub fn drivers_at(&self, k: usize) -> Vec<Vec<f64>> {
        self.drivers.iter().map(|d| d[k].clone()).collect()
    }
}

/// Simulates path `index` of independent drivers started at `origins`.
pub fn simulate(
    specs: &[LevySpec],
    origins: &[Vec<f64>],
    grid: &PathGrid,
    master_seed: u64,
    index: u64,
) -> Result<SamplePath> {
    if specs.len() != origins.len() {
        return Err(Error::Precondition(
            "one origin per factor is required".into(),
        ));
    }
    let samplers = specs
        .iter()
        .map(IncrementSampler::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(simulate_with(
        &samplers,
        origins,
        grid,
        &mut path_rng(master_seed, index),
    ))
}

/// Simulation with prepared samplers and a caller-supplied RNG.
pub fn simulate_with<R: Rng + ?Sized>(
    samplers: &[IncrementSampler],
    origins: &[Vec<f64>],
    grid: &PathGrid,
    rng: &mut R,
) -> SamplePath {
    let dt = grid.dt();
    let mut drivers = Vec::with_capacity(samplers.len());
    let mut events = Vec::new();
    for (l, s) in samplers.iter().enumerate() {
        let d = s.dimension();
        let mut nodes = Vec::with_capacity(grid.steps() + 1);
        nodes.push(vec![0.0; d]);
        if let LevySpec::CompoundPoisson { marks, intensities } = &s.spec {
            let evs = simulate_poisson_measure(intensities, grid.horizon(), rng);
            let mut x = 0.0;
            let mut next = 0;
            for k in 1..=grid.steps() {
                let t = grid.time(k);
                while next < evs.len() && evs[next].time <= t {
                    x += marks[evs[next].mark];
                    next += 1;
                }
                nodes.push(vec![x]);
            }
            events.extend(evs.into_iter().map(|e| (l, e)));
        } else {
            for k in 0..grid.steps() {
                let inc = s.sample(dt, rng);
                let next: Vec<f64> = nodes[k].iter().zip(&inc).map(|(a, b)| a + b).collect();
                nodes.push(next);
            }
        }
        drivers.push(nodes);
    }
    SamplePath {
        grid: grid.clone(),
        origins: origins.to_vec(),
        drivers,
        events,
    }
}

/// Draws `Z_dt` directly (one step) for driver `spec`.
pub fn sample_increment<R: Rng + ?Sized>(
    spec: &LevySpec,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(IncrementSampler::new(spec)?.sample(dt, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{
        ks_critical_one, ks_critical_two, ks_one_sample, ks_two_sample, mean_and_se,
    };

    #[test]
    fn grid_nodes() {
        let g = PathGrid::new(2.0, 200).unwrap();
        assert_eq!(g.node_index(0.5).unwrap(), 50);
        assert_eq!(g.node_index(2.0).unwrap(), 200);
        assert!(g.node_index(0.505).is_err());
        assert!(g.node_index(2.5).is_err());
        assert!(PathGrid::new(1.0, 0).is_err());
        assert!(PathGrid::new(-1.0, 10).is_err());
    }

    #[test]
    fn seeding_is_per_path() {
        assert_eq!(path_seed(7, 3), path_seed(7, 3));
        assert_ne!(path_seed(7, 3), path_seed(7, 4));
        assert_ne!(path_seed(7, 3), path_seed(8, 3));
        let spec = [LevySpec::cauchy_1d(1.0)];
        let g = PathGrid::new(1.0, 10).unwrap();
        let a = simulate(&spec, &[vec![0.0]], &g, 11, 5).unwrap();
        let b = simulate(&spec, &[vec![0.0]], &g, 11, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_map_matches_sequential() {
        let par = map_paths(64, |i| path_rng(1, i).random::<u64>());
        let seq: Vec<u64> = (0..64).map(|i| path_rng(1, i).random::<u64>()).collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn gaussian_moments() {
        let g = PathGrid::new(1.0, 100).unwrap();
        let s = IncrementSampler::new(&LevySpec::gaussian_1d(1.0)).unwrap();
        let z1: Vec<f64> = map_paths(100_000, |i| {
            let p = simulate_with(
                std::slice::from_ref(&s),
                &[vec![0.0]],
                &g,
                &mut path_rng(42, i),
            );
            p.drivers[0][100][0]
        });
        let (m, se) = mean_and_se(&z1);
        assert!(m.abs() < 3.0 * se);
        let sq: Vec<f64> = z1.iter().map(|x| x * x).collect();
        let (v, se_v) = mean_and_se(&sq);
        assert!((v - 1.0).abs() < 3.0 * se_v);
    }

    #[test]
    fn gamma_paths_nondecreasing() {
        let g = PathGrid::new(1.0, 100).unwrap();
        for i in 0..50 {
            let p = simulate(&[LevySpec::gamma(1.0, 1.0)], &[vec![0.5]], &g, 3, i).unwrap();
            for k in 0..100 {
                assert!(p.state(0, k + 1)[0] >= p.state(0, k)[0]);
            }
            assert_eq!(p.state(0, 0), vec![0.5]);
        }
    }

    #[test]
    fn cauchy_ks_against_arctan_law() {
        let g = PathGrid::new(1.0, 100).unwrap();
        let z: Vec<f64> = map_paths(10_000, |i| {
            simulate(&[LevySpec::cauchy_1d(1.0)], &[vec![0.0]], &g, 99, i)
                .unwrap()
                .drivers[0][100][0]
        });
        let d = ks_one_sample(&z, |x| 0.5 + x.atan() / PI);
        assert!(d < ks_critical_one(z.len()), "D = {d}");
    }

    #[test]
    fn semigroup_one_step_vs_many() {
        for spec in [
            LevySpec::gaussian_1d(1.0),
            LevySpec::cauchy_1d(1.0),
            LevySpec::gamma(1.5, 2.0),
        ] {
            let fine = PathGrid::new(1.0, 100).unwrap();
            let coarse = PathGrid::new(1.0, 1).unwrap();
            let a: Vec<f64> = map_paths(5_000, |i| {
                simulate(std::slice::from_ref(&spec), &[vec![0.0]], &fine, 5, i)
                    .unwrap()
                    .drivers[0][100][0]
            });
            let b: Vec<f64> = map_paths(5_000, |i| {
                simulate(std::slice::from_ref(&spec), &[vec![0.0]], &coarse, 6, i)
                    .unwrap()
                    .drivers[0][1][0]
            });
            assert!(
                ks_two_sample(&a, &b) < ks_critical_two(a.len(), b.len()),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn stable_self_similarity_at_alpha_one() {
        let spec = LevySpec::stable(1.0, 1.0);
        let c = 3.0;
        let mut rng = path_rng(17, 0);
        let a: Vec<f64> = (0..5_000)
            .map(|_| sample_increment(&spec, c, &mut rng).unwrap()[0])
            .collect();
        let b: Vec<f64> = (0..5_000)
            .map(|_| c * sample_increment(&spec, 1.0, &mut rng).unwrap()[0])
            .collect();
        assert!(ks_two_sample(&a, &b) < ks_critical_two(a.len(), b.len()));
    }

    #[test]
    fn stable_transform_at_alpha_two_is_gaussian() {
        // exp(-|ξ|^2) is the law N(0, 2)
        let mut rng = path_rng(23, 0);
        let x: Vec<f64> = (0..20_000)
            .map(|_| standard_stable(2.0, &mut rng))
            .collect();
        let d = ks_one_sample(&x, |v| statrs::function::erf::erfc(-v / 2.0) / 2.0);
        assert!(d < ks_critical_one(x.len()));
    }

    #[test]
    fn poisson_measure_counts() {
        let counts: Vec<f64> = map_paths(100_000, |i| {
            simulate_poisson_measure(&[2.0], 1.0, &mut path_rng(8, i)).len() as f64
        });
        let (m, se) = mean_and_se(&counts);
        assert!((m - 2.0).abs() < 3.0 * se);
        assert!(simulate_poisson_measure(&[0.0], 1.0, &mut path_rng(8, 0)).is_empty());

        let pairs: Vec<(f64, f64)> = map_paths(50_000, |i| {
            let ev = simulate_poisson_measure(&[1.0, 3.0], 1.0, &mut path_rng(9, i));
            let n0 = ev.iter().filter(|e| e.mark == 0).count() as f64;
            (n0, ev.len() as f64 - n0)
        });
        let prod: Vec<f64> = pairs.iter().map(|(a, b)| (a - 1.0) * (b - 3.0)).collect();
        let (cov, se) = mean_and_se(&prod);
        assert!(cov.abs() < 3.0 * se);
        let ev = simulate_poisson_measure(&[5.0, 5.0], 2.0, &mut path_rng(10, 0));
        assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(ev.iter().all(|e| e.time <= 2.0));
    }

    #[test]
    fn compound_poisson_path_matches_events() {
        let spec = LevySpec::CompoundPoisson {
            marks: vec![0.5, -1.0],
            intensities: vec![3.0, 2.0],
        };
        let g = PathGrid::new(2.0, 20).unwrap();
        let p = simulate(&[spec], &[vec![0.0]], &g, 4, 0).unwrap();
        let total: f64 = p.events.iter().map(|(_, e)| [0.5, -1.0][e.mark]).sum();
        assert!((p.drivers[0][20][0] - total).abs() < 1e-12);
    }

    #[test]
    fn multivariate_cauchy_margins() {
        let spec = LevySpec::Cauchy {
            theta: 1.0,
            gamma: vec![0.0, 0.0],
        };
        let mut rng = path_rng(12, 0);
        let x: Vec<f64> = (0..10_000)
            .map(|_| sample_increment(&spec, 1.0, &mut rng).unwrap()[1])
            .collect();
        assert!(ks_one_sample(&x, |v| 0.5 + v.atan() / PI) < ks_critical_one(x.len()));
    }
}
