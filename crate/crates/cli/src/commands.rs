use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use ldtsm_core::density::{self, DensityEvaluator};
use ldtsm_core::hjm::{
    gauss_bond, gauss_forward, qtsm_bond, qtsm_forward, shirakawa_bond, shirakawa_forward,
    BrownianPath, QtsmSpec, ShirakawaSpec,
};
use ldtsm_core::ldtsm::{bond_price, calibrate_lambda, forward_rate, CalibrationOptions};
use ldtsm_core::scenario::{load_scenario, EvaluationConfig, HjmConfig, ModelConfig, Scenario};
use ldtsm_core::simulation::{
    derive_seed, map_paths, path_rng, simulate_brownian, simulate_poisson_measure, simulate_with,
    IncrementSampler, PathGrid,
};
use ldtsm_core::stats::mean_and_se;
use ldtsm_core::validation::{
    default_suite, martingale_test, GaussHjmMc, LdtsmMc, QtsmMc, ShirakawaMc, ValidationReport,
};
use ldtsm_core::{Error, LdtsmFactor, LdtsmModel, LevySpec, LevySymbol, StateSnapshot};

use crate::output::{read_curve, write_text, Csv};
use crate::{Command, DensityMethod, Io};

/// Result of a subcommand: files written and a short human-readable summary.
#[derive(Debug)]
pub struct Outcome {
    pub success: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Curve { io } => curve(io),
        Command::Simulate {
            io,
            paths,
            seed,
            steps,
        } => simulate(io, *paths, *seed, *steps),
        Command::Validate {
            config,
            out,
            paths,
            seed,
            scenario_only,
        } => validate(
            config.as_deref(),
            out.as_deref(),
            *paths,
            *seed,
            *scenario_only,
        ),
        Command::Calibrate { io, curve, tol } => calibrate(io, curve.as_deref(), *tol),
        Command::Density {
            io,
            factor,
            t,
            x_min,
            x_max,
            points,
            method,
            tol,
        } => density_cmd(io, *factor, *t, (*x_min, *x_max, *points), *method, *tol),
    }
}

fn load(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn out_dir(flag: Option<&Path>, scenario: Option<&Scenario>) -> Result<PathBuf> {
    let dir = match (flag, scenario) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(s)) => s.outputs.dir.clone(),
        (None, None) => PathBuf::from("out"),
    };
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

enum Pricer {
    Ldtsm(LdtsmModel),
    Hjm(HjmConfig),
    Qtsm(QtsmSpec),
    Shirakawa(ShirakawaSpec),
}

fn pricer(s: &Scenario) -> Result<Pricer> {
    Ok(match &s.model {
        ModelConfig::Ldtsm(_) => Pricer::Ldtsm(s.model.ldtsm().expect("ldtsm model")?),
        ModelConfig::Hjm(h) => Pricer::Hjm(h.clone()),
        ModelConfig::Qtsm(q) => Pricer::Qtsm(q.clone()),
        ModelConfig::Shirakawa(sp) => Pricer::Shirakawa(sp.clone()),
    })
}

fn table_window(spec: &LevySpec, s: f64) -> f64 {
    LevySymbol::new(spec)
        .map(|sym| 400.0 * sym.width(s))
        .unwrap_or(100.0)
}

/// Adds inversion tables at every density time a set of `(t, T)` bond prices touches.
fn with_tables(model: LdtsmModel, pairs: &[(f64, f64)]) -> Result<LdtsmModel> {
    let mut factors: Vec<LdtsmFactor> = Vec::new();
    for f in model.factors() {
        let mut f = f.clone();
        if !f.kernel().is_closed_form() {
            let l = f.lambda().clone();
            let mut times: Vec<f64> = pairs
                .iter()
                .flat_map(|&(t, m)| [l.value(t), l.value(m) + (m - t)])
                .filter(|s| *s > 0.0)
                .collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            for s in times {
                let w = table_window(f.spec(), s);
                f = f.with_table(s, w)?;
            }
        }
        factors.push(f);
    }
    Ok(LdtsmModel::new(factors)?)
}

fn pairs(e: &EvaluationConfig) -> Vec<(f64, f64)> {
    e.times
        .iter()
        .flat_map(|&t| {
            e.maturities
                .iter()
                .filter(move |&&m| m >= t)
                .map(move |&m| (t, m))
        })
        .collect()
}

fn curve(io: &Io) -> Result<Outcome> {
    let s = load(&io.config)?;
    let dir = out_dir(io.out.as_deref(), Some(&s))?;
    let pricer = pricer(&s)?;
    let grid = s.grid.path_grid()?;
    let zero = vec![0.0; grid.steps() + 1];
    let path = BrownianPath::new(&grid, &zero)?;
    let mut files = Vec::new();
    for (i, &t) in s.evaluation.times.iter().enumerate() {
        let maturities: Vec<f64> = s
            .evaluation
            .maturities
            .iter()
            .copied()
            .filter(|m| *m >= t)
            .collect();
        let rows = maturities
            .par_iter()
            .map(|&m| -> Result<[f64; 3]> {
                let (p, f) = match &pricer {
                    Pricer::Ldtsm(model) => {
                        let st = s.ldtsm_state(model, t);
                        (
                            bond_price(model, &st, m)?,
                            forward_rate(model, &st, m, None)?.value,
                        )
                    }
                    Pricer::Hjm(h) => (
                        gauss_bond(&h.vol, &h.curve, &path, t, m)?,
                        gauss_forward(&h.vol, &h.curve, &path, t, m)?,
                    ),
                    Pricer::Qtsm(q) => {
                        let w = s.qtsm_state(q.dimension(), t);
                        (qtsm_bond(q, &w, t, m)?, qtsm_forward(q, &w, t, m)?)
                    }
                    Pricer::Shirakawa(sp) => (
                        shirakawa_bond(sp, &path, &[], t, m)?,
                        shirakawa_forward(sp, &path, &[], t, m)?,
                    ),
                };
                Ok([m, p, f])
            })
            .collect::<Vec<_>>();
        let mut csv = Csv::create(
            &dir.join(format!("curve_{i}.csv")),
            &["T", "P", "forward_rate"],
        )?;
        for (row, m) in rows.into_iter().zip(&maturities) {
            csv.row(&row.with_context(|| format!("pricing t = {t}, T = {m}"))?)?;
        }
        files.push(csv.finish()?);
    }
    Ok(Outcome {
        success: true,
        summary: format!(
            "wrote {} curve(s) for valuation times {:?}",
            files.len(),
            s.evaluation.times
        ),
        files,
    })
}

struct PathOut {
    prices: Vec<f64>,
    rows: Option<Vec<Vec<f64>>>,
    jumps: Option<Vec<[f64; 3]>>,
}

fn simulate(
    io: &Io,
    paths: Option<usize>,
    seed: Option<u64>,
    steps: Option<usize>,
) -> Result<Outcome> {
    let s = load(&io.config)?;
    let dir = out_dir(io.out.as_deref(), Some(&s))?;
    let n = paths.unwrap_or(s.simulation.paths);
    if n == 0 {
        bail!("--paths must be at least 1");
    }
    let seed = seed.unwrap_or(s.simulation.seed);
    let dump = s.simulation.dump_paths.min(n);
    let grid = match steps {
        Some(k) => PathGrid::new(s.grid.horizon, k)?,
        None => s.grid.path_grid()?,
    };
    let pairs = pairs(&s.evaluation);
    let nodes = pairs
        .iter()
        .map(|&(t, _)| {
            grid.node_index(t)
                .with_context(|| format!("evaluation time {t} on a grid of {} steps", grid.steps()))
        })
        .collect::<Result<Vec<_>>>()?;
    let pricer = match pricer(&s)? {
        Pricer::Ldtsm(m) => Pricer::Ldtsm(with_tables(m, &pairs)?),
        p => p,
    };
    let samplers = match &pricer {
        Pricer::Ldtsm(m) => m
            .factors()
            .iter()
            .map(|f| IncrementSampler::new(f.spec()))
            .collect::<ldtsm_core::Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    let times = grid.times();
    let header: Vec<String> = match &pricer {
        Pricer::Ldtsm(m) => {
            let d: usize = m.factors().iter().map(|f| f.dimension()).sum();
            std::iter::once("t".to_string())
                .chain((1..=d).map(|i| format!("Z{i}")))
                .collect()
        }
        Pricer::Hjm(_) => vec!["t".into(), "W".into()],
        Pricer::Qtsm(q) => std::iter::once("t".to_string())
            .chain((1..=q.dimension()).map(|i| format!("W{i}")))
            .collect(),
        Pricer::Shirakawa(_) => vec!["t".into(), "W".into(), "N".into()],
    };

    let one = |i: u64| -> Result<PathOut> {
        let mut rng = path_rng(seed, i);
        let keep = (i as usize) < dump;
        let mut jumps = None;
        let (prices, rows) = match &pricer {
            Pricer::Ldtsm(m) => {
                let origins: Vec<Vec<f64>> =
                    m.factors().iter().map(|f| f.shift().to_vec()).collect();
                let p = simulate_with(&samplers, &origins, &grid, &mut rng);
                let prices = pairs
                    .iter()
                    .zip(&nodes)
                    .map(|(&(t, mat), &k)| {
                        bond_price(m, &StateSnapshot::new(t, p.drivers_at(k)), mat)
                    })
                    .collect::<ldtsm_core::Result<Vec<_>>>()?;
                let rows = keep.then(|| {
                    (0..times.len())
                        .map(|k| {
                            let mut r = vec![times[k]];
                            for l in 0..m.factors().len() {
                                r.extend(p.state(l, k));
                            }
                            r
                        })
                        .collect()
                });
                (prices, rows)
            }
            Pricer::Hjm(h) => {
                let w = simulate_brownian(&grid, &mut rng);
                let bp = BrownianPath::new(&grid, &w)?;
                let prices = pairs
                    .iter()
                    .map(|&(t, mat)| gauss_bond(&h.vol, &h.curve, &bp, t, mat))
                    .collect::<ldtsm_core::Result<Vec<_>>>()?;
                (
                    prices,
                    keep.then(|| times.iter().zip(&w).map(|(t, w)| vec![*t, *w]).collect()),
                )
            }
            Pricer::Qtsm(q) => {
                let ws: Vec<Vec<f64>> = (0..q.dimension())
                    .map(|_| simulate_brownian(&grid, &mut rng))
                    .collect();
                let at = |k: usize| -> Vec<f64> { ws.iter().map(|w| w[k]).collect() };
                let prices = pairs
                    .iter()
                    .zip(&nodes)
                    .map(|(&(t, mat), &k)| qtsm_bond(q, &at(k), t, mat))
                    .collect::<ldtsm_core::Result<Vec<_>>>()?;
                let rows = keep.then(|| {
                    (0..times.len())
                        .map(|k| std::iter::once(times[k]).chain(at(k)).collect())
                        .collect()
                });
                (prices, rows)
            }
            Pricer::Shirakawa(sp) => {
                let w = simulate_brownian(&grid, &mut rng);
                let ev = simulate_poisson_measure(&sp.intensities, grid.horizon(), &mut rng);
                let bp = BrownianPath::new(&grid, &w)?;
                let prices = pairs
                    .iter()
                    .map(|&(t, mat)| shirakawa_bond(sp, &bp, &ev, t, mat))
                    .collect::<ldtsm_core::Result<Vec<_>>>()?;
                let rows = keep.then(|| {
                    times
                        .iter()
                        .zip(&w)
                        .map(|(t, w)| {
                            vec![*t, *w, ev.iter().filter(|e| e.time <= *t).count() as f64]
                        })
                        .collect()
                });
                if keep {
                    jumps = Some(
                        ev.iter()
                            .map(|e| [e.time, e.mark as f64, sp.marks[e.mark]])
                            .collect(),
                    );
                }
                (prices, rows)
            }
        };
        Ok(PathOut {
            prices,
            rows,
            jumps,
        })
    };

    let results = map_paths(n, one).into_iter().collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    for (i, r) in results.iter().enumerate().take(dump) {
        let mut csv = Csv::create(&dir.join(format!("path_{i}.csv")), &header_refs)?;
        for row in r.rows.as_deref().unwrap_or_default() {
            csv.row(row)?;
        }
        files.push(csv.finish()?);
        let mut csv = Csv::create(
            &dir.join(format!("curve_evolution_{i}.csv")),
            &["t", "T", "P"],
        )?;
        for (&(t, m), p) in pairs.iter().zip(&r.prices) {
            csv.row(&[t, m, *p])?;
        }
        files.push(csv.finish()?);
        if let Some(j) = &r.jumps {
            let mut csv = Csv::create(
                &dir.join(format!("jumps_{i}.csv")),
                &["time", "mark_index", "mark"],
            )?;
            for row in j {
                csv.row(row)?;
            }
            files.push(csv.finish()?);
        }
    }
    let mut csv = Csv::create(&dir.join("summary.csv"), &["t", "T", "mean_P", "std_error"])?;
    for (j, &(t, m)) in pairs.iter().enumerate() {
        let v: Vec<f64> = results.iter().map(|r| r.prices[j]).collect();
        let (mean, se) = mean_and_se(&v);
        csv.row(&[t, m, mean, if se.is_nan() { 0.0 } else { se }])?;
    }
    files.push(csv.finish()?);
    Ok(Outcome {
        success: true,
        summary: format!(
            "simulated {n} paths on {} steps with seed {seed}",
            grid.steps()
        ),
        files,
    })
}

/// Martingale checks of the scenario's own model, at `t = 0` and, if the
/// scenario has a positive valuation time below the chosen maturity, at that
/// time too.
fn scenario_checks(s: &Scenario, paths: usize, seed: u64) -> Result<Vec<ValidationReport>> {
    let grid = s.grid.path_grid()?;
    let on_grid = |m: f64| m <= grid.horizon() && grid.node_index(m).is_ok();
    let gridded = matches!(s.model, ModelConfig::Hjm(_) | ModelConfig::Shirakawa(_));
    let Some(maturity) = s
        .evaluation
        .maturities
        .iter()
        .rev()
        .copied()
        .find(|&m| !gridded || on_grid(m))
    else {
        bail!("no maturity of the scenario lies on the simulation grid");
    };
    let mut times = vec![0.0];
    if let Some(&t) = s
        .evaluation
        .times
        .iter()
        .find(|&&t| t > 0.0 && t < maturity)
    {
        times.push(t);
    }
    let mut out = Vec::new();
    for t in times {
        let sub = derive_seed(seed, &format!("scenario-{t}"));
        let r = match &s.model {
            ModelConfig::Ldtsm(_) => {
                let m = s.model.ldtsm().expect("ldtsm model")?;
                martingale_test(
                    &LdtsmMc::for_horizon(m, t, maturity)?,
                    t,
                    maturity,
                    paths,
                    sub,
                )?
            }
            ModelConfig::Hjm(h) => {
                let mc = GaussHjmMc {
                    vol: h.vol.clone(),
                    curve: h.curve.clone(),
                    grid: grid.clone(),
                };
                martingale_test(&mc, t, maturity, paths, sub)?
            }
            ModelConfig::Qtsm(q) => {
                martingale_test(&QtsmMc { spec: q.clone() }, t, maturity, paths, sub)?
            }
            ModelConfig::Shirakawa(sp) => {
                let mc = ShirakawaMc {
                    spec: sp.clone(),
                    grid: grid.clone(),
                };
                martingale_test(&mc, t, maturity, paths, sub)?
            }
        };
        out.push(r);
    }
    Ok(out)
}

fn validate(
    config: Option<&Path>,
    out: Option<&Path>,
    paths: usize,
    seed: u64,
    scenario_only: bool,
) -> Result<Outcome> {
    let scenario = config.map(load).transpose()?;
    let dir = out_dir(out, scenario.as_ref())?;
    let mut reports = Vec::new();
    if let Some(s) = &scenario {
        reports.extend(scenario_checks(s, paths, seed)?);
    }
    if !scenario_only {
        reports.extend(default_suite(paths, seed)?);
    }
    if reports.is_empty() {
        bail!("nothing to validate: --scenario-only needs --config");
    }
    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let mut table: String = reports.iter().map(|r| r.summary_line() + "\n").collect();
    table.push_str(&format!(
        "{} passed, {} failed\n",
        reports.len() - failed,
        failed
    ));
    let files = vec![
        write_text(&dir.join("validation.jsonl"), &jsonl)?,
        write_text(&dir.join("validation_summary.txt"), &table)?,
    ];
    Ok(Outcome {
        success: failed == 0,
        files,
        summary: table,
    })
}

fn calibrate(io: &Io, curve: Option<&Path>, tol: f64) -> Result<Outcome> {
    let s = load(&io.config)?;
    let dir = out_dir(io.out.as_deref(), Some(&s))?;
    let factor = match &s.model {
        ModelConfig::Ldtsm(f) if f.len() == 1 => &f[0],
        _ => bail!("calibration needs a single-factor ldtsm model"),
    };
    let path = match (curve, &s.calibration) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(c)) => c.curve.clone(),
        (None, None) => bail!("no target curve: pass --curve or set calibration.curve"),
    };
    let data = read_curve(&path)?;
    let lambda0 = s
        .calibration
        .as_ref()
        .and_then(|c| c.lambda0)
        .unwrap_or_else(|| factor.lambda.value(0.0));
    let opts = CalibrationOptions {
        tol,
        ..Default::default()
    };
    let cal = calibrate_lambda(&factor.levy, &factor.z0, &data, lambda0, &opts)
        .with_context(|| format!("calibrating to {}", path.display()))?;

    let mut files = vec![write_text(
        &dir.join("lambda.json"),
        &serde_json::to_string_pretty(&cal.schedule)?,
    )?];
    let mut csv = Csv::create(
        &dir.join("residuals.csv"),
        &["T", "target", "fitted", "lambda", "rel_error"],
    )?;
    let mut worst: f64 = 0.0;
    for r in &cal.residuals {
        let rel = (r.fitted - r.target) / r.target;
        worst = worst.max(rel.abs());
        csv.row(&[r.maturity, r.target, r.fitted, r.lambda, rel])?;
    }
    files.push(csv.finish()?);

    let mut calibrated = s.clone();
    if let ModelConfig::Ldtsm(f) = &mut calibrated.model {
        f[0].lambda = cal.schedule.clone();
    }
    calibrated.evaluation = EvaluationConfig {
        times: vec![0.0],
        maturities: data.iter().map(|d| d.0).collect(),
        state: None,
    };
    calibrated.calibration = None;
    files.push(write_text(
        &dir.join("calibrated.json"),
        &calibrated.to_json_pretty(),
    )?);

    let mut summary = format!(
        "calibrated {} knots, max relative residual {worst:.3e}",
        cal.residuals.len()
    );
    if !cal.curve_decreasing {
        summary.push_str(
            "\nnote: the target curve is not non-increasing in maturity (negative forward rates)",
        );
    }
    Ok(Outcome {
        success: true,
        files,
        summary,
    })
}

fn density_cmd(
    io: &Io,
    factor: usize,
    t: f64,
    grid: (f64, f64, usize),
    method: DensityMethod,
    tol: f64,
) -> Result<Outcome> {
    let s = load(&io.config)?;
    let dir = out_dir(io.out.as_deref(), Some(&s))?;
    let ModelConfig::Ldtsm(factors) = &s.model else {
        bail!("the density subcommand needs an ldtsm model");
    };
    let Some(f) = factors.get(factor) else {
        bail!(
            "factor {factor} does not exist, the model has {}",
            factors.len()
        );
    };
    let (x_min, x_max, points) = grid;
    if f.levy.dimension() != 1 {
        bail!("density output supports one-dimensional drivers only");
    }
    if !(t > 0.0) || !(x_max > x_min) || points < 2 {
        bail!("need t > 0, x_max > x_min and at least two points");
    }
    let window = x_min.abs().max(x_max.abs());
    let fft = || -> Result<DensityEvaluator> {
        Ok(density::invert_auto(
            &LevySymbol::new(&f.levy)?,
            t,
            window,
            tol,
        )?)
    };
    let eval = match method {
        DensityMethod::Closed => DensityEvaluator::closed_form(&f.levy, t)?,
        DensityMethod::Fft => fft()?,
        DensityMethod::Auto => match DensityEvaluator::closed_form(&f.levy, t) {
            Ok(e) => e,
            Err(Error::NoClosedForm(_)) => fft()?,
            Err(e) => return Err(e.into()),
        },
    };
    let mut csv = Csv::create(&dir.join("density.csv"), &["x", "p"])?;
    for i in 0..points {
        let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
        csv.row(&[x, eval.pdf1(x)?])?;
    }
    Ok(Outcome {
        success: true,
        files: vec![csv.finish()?],
        summary: format!("density of the {} driver at t = {t}", f.levy.family_name()),
    })
}
