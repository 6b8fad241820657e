//! Subcommands of the `mildflow` binary: each reads a [`RunConfig`] and
//! writes CSV tables, field files and a `manifest.json` into one directory.

mod config;
mod suite;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::calculus::{heat_semigroup, loglog_fit};
use crate::error::{Error, Result};
use crate::field::{ScalarField, State};
use crate::grid::GridSpec;
use crate::io::write_state;
use crate::norms::{morrey_lorentz_norm, state_norm, triple_norm_g, TripleNormParams};
use crate::periodic::{
    cesaro_periodic_datum, check_periodicity, linear_mode, nonlinear_periodic, resolvent_periodic_datum,
    OuterOptions, PeriodicProblem,
};
use crate::presets::{random_scalar, random_vector, RandomSpec};
use crate::solver::{evolve, h_norm, verify_bilinear_estimate, Trajectory};
use crate::stability::{
    constants_c1_c2, default_t_grid, fit_decay_exponent, perturb_and_compare, smallness_report, SmallnessInputs,
};

pub use config::{
    CesaroConfig, EstimateConfig, ForcingConfig, InitialConfig, ModeName, OuterConfig, RunConfig, ShapeConfig,
    StabilityConfig, Target, TermConfig, SCHEMA,
};
pub use suite::{estimate_suite, relative_changes, EstimateRow, ESTIMATES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Norms,
    Evolve,
    PeriodicLinear,
    PeriodicNonlinear,
    Stability,
    VerifyEstimates,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Norms,
        Command::Evolve,
        Command::PeriodicLinear,
        Command::PeriodicNonlinear,
        Command::Stability,
        Command::VerifyEstimates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Norms => "norms",
            Command::Evolve => "evolve",
            Command::PeriodicLinear => "periodic-linear",
            Command::PeriodicNonlinear => "periodic-nonlinear",
            Command::Stability => "stability",
            Command::VerifyEstimates => "verify-estimates",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// What a run wrote, plus headline numbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: &'a str,
    version: &'a str,
    field_format: &'a str,
    seed: u64,
    threads: usize,
    files: &'a [String],
    summary: &'a BTreeMap<String, f64>,
    wall_time_s: f64,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Output directory writer; every CSV ends with a reference to the manifest.
struct Outputs {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
    summary: BTreeMap<String, f64>,
}

impl Outputs {
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        let mut bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        bytes.extend_from_slice(format!("# manifest: manifest.json config_sha256={}\n", self.hash).as_bytes());
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn field(&mut self, name: &str, x: &State) -> Result<()> {
        write_state(&self.dir.join(name), x)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }
}

/// Validates `cfg`, runs `cmd` and writes its artifacts into `dir`.
pub fn run(cmd: Command, cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    fs::create_dir_all(dir)?;
    let mut out = Outputs {
        dir: dir.to_path_buf(),
        hash: cfg.hash(),
        files: Vec::new(),
        summary: BTreeMap::new(),
    };
    out.text("config.json", &(cfg.to_json() + "\n"))?;
    match cmd {
        Command::Norms => norms(cfg, &mut out)?,
        Command::Evolve => run_evolve(cfg, &mut out)?,
        Command::PeriodicLinear => periodic_linear(cfg, &mut out)?,
        Command::PeriodicNonlinear => periodic_nonlinear(cfg, &mut out)?,
        Command::Stability => stability(cfg, &mut out)?,
        Command::VerifyEstimates => verify_estimates(cfg, &mut out)?,
    }
    let manifest = Manifest {
        command: cmd.name(),
        config_sha256: &out.hash,
        version: env!("CARGO_PKG_VERSION"),
        field_format: "BQF1",
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        files: &out.files,
        summary: &out.summary,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(RunReport {
        command: cmd.name().to_string(),
        dir: dir.to_path_buf(),
        files: out.files,
        summary: out.summary,
    })
}

fn norms(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let x0 = cfg.initial_state()?;
    let forcing = cfg.forcing_spec()?;
    let sampler = cfg.sampler();
    let mut spaces = vec![cfg.critical_norm()?];
    spaces.extend(cfg.norms.iter().copied());
    let mut fields: Vec<(&str, ScalarField)> = vec![("velocity", x0.u.magnitude()), ("temperature", x0.theta.clone())];
    if !forcing.gravity.is_zero() {
        fields.push(("gravity", forcing.gravity_at(cfg.grid, 0.0)?.magnitude()));
    }
    let mut rows = Vec::new();
    for (name, f) in &fields {
        for s in &spaces {
            let est = morrey_lorentz_norm(f, *s, &sampler)?;
            rows.push(vec![
                name.to_string(),
                num(s.p),
                num(s.q),
                num(s.lambda),
                num(est.value),
                num(est.radius),
                num(est.center[0]),
                num(est.center[1]),
                num(est.center[2]),
                est.balls.to_string(),
            ]);
        }
    }
    out.note("critical_velocity", morrey_lorentz_norm(&fields[0].1, spaces[0], &sampler)?.value);
    out.csv(
        "norms.csv",
        &["field", "p", "q", "lambda", "value", "radius", "center_x", "center_y", "center_z", "balls"],
        rows,
    )?;
    out.field("initial.bqf", &x0)
}

fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    let div = traj.divergence_residuals();
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&div)
        .zip(&traj.picard_iterations)
        .map(|(((t, x), d), k)| vec![num(*t), num(x.energy()), num(x.max_abs()), num(*d), k.to_string()])
        .collect()
}

const TRAJ_HEADER: [&str; 5] = ["t", "energy", "max_abs", "divergence", "picard_iterations"];

fn run_evolve(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let x0 = cfg.initial_state()?;
    let forcing = cfg.forcing_spec()?;
    let traj = evolve(&x0, &forcing, cfg.t_end(), &cfg.solve, &cfg.mode())?;
    out.note("steps", (traj.times.len() - 1) as f64);
    out.note("final_energy", traj.last().energy());
    out.note("max_divergence", traj.divergence_residuals().into_iter().fold(0.0, f64::max));
    out.csv("trajectory.csv", &TRAJ_HEADER, trajectory_rows(&traj))?;
    out.field("final.bqf", traj.last())
}

fn periodic_linear(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let prob = PeriodicProblem::new(cfg.grid, cfg.forcing_spec()?, cfg.solve, linear_mode(cfg.grid))?;
    let resolvent = resolvent_periodic_datum(&prob)?;
    let ces = cesaro_periodic_datum(&prob, cfg.cesaro.n_max, cfg.cesaro.tol, Some(&resolvent))?;
    let sampler = cfg.sampler();
    let orbit = evolve(&resolvent, &prob.forcing, prob.period(), &prob.cfg, &prob.mode)?;
    let res = check_periodicity(&orbit, prob.residual_norm, &sampler)?;
    let diff = ces.initial.sub(&resolvent).max_abs();

    let ns: Vec<f64> = ces.history.iter().map(|r| r.iteration as f64).collect();
    let errs: Vec<f64> = ces.history.iter().map(|r| r.error.unwrap_or(0.0)).collect();
    let half = ns.len() / 2;
    let slope = loglog_fit(&ns[half..], &errs[half..]).map(|f| f.0).ok();

    out.csv(
        "cesaro.csv",
        &["iteration", "increment", "ratio", "error"],
        ces.history
            .iter()
            .map(|r| vec![r.iteration.to_string(), num(r.increment), opt(r.ratio), opt(r.error)]),
    )?;
    out.csv(
        "summary.csv",
        &["method", "residual_max", "residual_morrey", "diff_to_resolvent", "iterations", "error_slope"],
        [
            vec![
                "resolvent".into(),
                num(res.max_norm),
                num(res.morrey),
                num(0.0),
                "0".into(),
                String::new(),
            ],
            vec![
                "cesaro".into(),
                num(ces.residual.max_norm),
                num(ces.residual.morrey),
                num(diff),
                ces.history.len().to_string(),
                opt(slope),
            ],
        ],
    )?;
    out.note("cesaro_vs_resolvent", diff);
    out.note("cesaro_iterations", ces.history.len() as f64);
    out.note("residual_max", res.max_norm);
    if let Some(s) = slope {
        out.note("cesaro_error_slope", s);
    }
    out.field("datum_resolvent.bqf", &resolvent)?;
    out.field("datum_cesaro.bqf", &ces.initial)
}

fn outer_options(cfg: &RunConfig) -> OuterOptions {
    OuterOptions {
        outer_tol: cfg.outer.outer_tol,
        outer_max: cfg.outer.outer_max,
        p: cfg.p,
        sampler: cfg.sampler(),
        norm_every: cfg.outer.norm_every,
    }
}

fn periodic_nonlinear(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let prob = PeriodicProblem::new(cfg.grid, cfg.forcing_spec()?, cfg.solve, cfg.mode())?;
    let opts = outer_options(cfg);
    let sol = nonlinear_periodic(&prob, &opts, None)?;
    let h = h_norm(&sol.trajectory, cfg.p, &opts.sampler, opts.norm_every)?;
    out.csv(
        "history.csv",
        &["iteration", "increment", "ratio"],
        sol.history
            .iter()
            .map(|r| vec![r.iteration.to_string(), num(r.increment), opt(r.ratio)]),
    )?;
    out.csv("orbit.csv", &TRAJ_HEADER, trajectory_rows(&sol.trajectory))?;
    out.csv(
        "summary.csv",
        &["contraction_ratio", "residual_max", "residual_morrey", "h_norm", "iterations"],
        [vec![
            opt(sol.contraction_ratio),
            num(sol.residual.max_norm),
            num(sol.residual.morrey),
            num(h),
            sol.history.len().to_string(),
        ]],
    )?;
    if let Some(r) = sol.contraction_ratio {
        out.note("contraction_ratio", r);
    }
    out.note("residual_max", sol.residual.max_norm);
    out.note("h_norm", h);
    out.field("datum.bqf", &sol.initial)
}

/// Seeded perturbation of unit max norm in each component.
fn unit_perturbation(grid: GridSpec, seed: u64, with_temperature: bool) -> Result<State> {
    let spec = |s| RandomSpec {
        seed: s,
        ..RandomSpec::default()
    };
    let u = random_vector(grid, &spec(seed));
    let u = u.scaled(1.0 / u.max_abs());
    let th = if with_temperature {
        let t = random_scalar(grid, &spec(seed + 1));
        t.scaled(1.0 / t.max_abs())
    } else {
        ScalarField::zeros(grid)
    };
    State::new(u, th)
}

fn stability(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let params = cfg.stability_params()?;
    let scfg = cfg.stability.unwrap_or(StabilityConfig {
        q: params.q,
        r: params.r,
        b: params.b,
        perturbation: 1e-4,
        forcing_gap: 0.0,
        t_points: 24,
        window: None,
    });
    let forcing = cfg.forcing_spec()?;
    let prob = PeriodicProblem::new(cfg.grid, forcing, cfg.solve, cfg.mode())?;
    let opts = outer_options(cfg);
    let sampler = opts.sampler;
    let base = nonlinear_periodic(&prob, &opts, None)?;

    let shape = unit_perturbation(cfg.grid, cfg.seed.wrapping_add(7), cfg.mode == ModeName::Full)?;
    let delta = shape.scaled(scfg.perturbation);
    let mut x1 = base.initial.clone();
    x1.axpy(1.0, &delta);
    let mut g1 = prob.forcing.clone();
    g1.gravity = prob.forcing.gravity.scaled(1.0 + scfg.forcing_gap);

    let period = prob.period();
    let t_grid = default_t_grid(base.trajectory.dt, period, scfg.t_points);
    let table = perturb_and_compare(&base, &prob, &x1, &g1, &params, &t_grid, &sampler)?;
    out.csv(
        "d_table.csv",
        &["t", "velocity_raw", "temperature_raw", "velocity_gap", "temperature_gap", "d"],
        table.rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.velocity_raw),
                num(r.temperature_raw),
                num(r.velocity_gap),
                num(r.temperature_gap),
                num(r.d),
            ]
        }),
    )?;

    let window = scfg.window.unwrap_or((period, 10.0 * period));
    let ts: Vec<f64> = table.rows.iter().map(|r| r.t).collect();
    let mut fits = Vec::new();
    for (name, gaps, bound) in [
        ("velocity", table.rows.iter().map(|r| r.velocity_raw).collect::<Vec<_>>(), -params.alpha() / 2.0),
        ("temperature", table.rows.iter().map(|r| r.temperature_raw).collect(), -params.gamma() / 2.0),
    ] {
        match fit_decay_exponent(&ts, &gaps, window) {
            Ok(f) => {
                out.note(&format!("{name}_slope"), f.slope);
                fits.push(vec![
                    name.into(),
                    num(f.slope),
                    num(f.half_width),
                    f.points.to_string(),
                    num(window.0),
                    num(window.1),
                    num(bound),
                    (f.slope <= bound).to_string(),
                ]);
            }
            Err(Error::DegenerateFit(_)) if name == "temperature" && gaps.iter().all(|g| *g == 0.0) => {}
            Err(e) => return Err(e),
        }
    }
    out.csv(
        "fit.csv",
        &["quantity", "slope", "half_width", "points", "window_lo", "window_hi", "bound", "within_bound"],
        fits,
    )?;
    out.note("sup_d", table.sup_d);
    out.note("argmax_t", table.argmax_t);

    // Empirical inputs of the smallness expressions.
    let crit = cfg.critical_norm()?;
    let k = verify_bilinear_estimate(&[(base.trajectory.clone(), base.trajectory.clone())], cfg.p, &sampler, 8)?;
    let rho = h_norm(&base.trajectory, cfg.p, &sampler, 8)?;
    let d0 = state_norm(&delta, crit, &sampler)?;
    let du0 = morrey_lorentz_norm(&delta.u, crit, &sampler)?.value;
    let mut c_semigroup = 1.0f64;
    for &t in &table.rows.iter().map(|r| r.t).collect::<Vec<_>>() {
        let v = morrey_lorentz_norm(&heat_semigroup(&delta.u, t)?, crit, &sampler)?.value;
        c_semigroup = c_semigroup.max(v / du0);
    }
    let g_at = |s: f64| prob.forcing.gravity_at(cfg.grid, s);
    let g_norm = triple_norm_g(&g_at, TripleNormParams::new(params.p, params.b)?, params.lambda(), &ts, &sampler)?.value;
    let inputs = SmallnessInputs {
        k: (k.used > 0).then_some(k.k_emp),
        rho: Some(rho),
        perturbation: Some(d0 + table.sup_d),
        g_norm: Some(g_norm),
        g_gap: Some(table.forcing_gap),
        kappa: Some(prob.forcing.kappa),
        c_semigroup: Some(c_semigroup),
    };
    let mut text = String::new();
    text.push_str(&format!(
        "perturbation: initial max gap {:e}, |||g - g'||| = {:e}, sup_t D(t) = {:e} at t = {:e}\n",
        table.initial_gap, table.forcing_gap, table.sup_d, table.argmax_t
    ));
    text.push_str(&format!("fit window: [{:e}, {:e}]\n", window.0, window.1));
    text.push_str("note: on the torus the spectral gap gives exponential decay; polynomial rates are upper bounds only\n");
    match smallness_report(&inputs, &params) {
        Ok(rep) => {
            text.push_str(&format!("M = {:e}, C1 = {:e}, C2 = {:e}\n", rep.m_beta, rep.c1, rep.c2));
            for e in &rep.expressions {
                text.push_str(&format!("{}:\n", e.name));
                for t in &e.terms {
                    text.push_str(&format!("  {} = {:e}\n", t.name, t.value));
                }
                text.push_str(&format!("  total = {:e} ({})\n", e.value, if e.holds { "< 1" } else { ">= 1" }));
                out.note(&format!("smallness_{}", e.name), e.value);
            }
        }
        Err(Error::MissingInputs(names)) => {
            text.push_str(&format!("smallness report skipped; missing inputs: {}\n", names.join(", ")));
        }
        Err(e) => return Err(e),
    }
    text.push_str(&format!("# manifest: manifest.json config_sha256={}\n", out.hash));
    out.text("smallness.txt", &text)
}

fn verify_estimates(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let params = cfg.stability_params()?;
    let sampler = cfg.sampler();
    let mut rows = estimate_suite(cfg.grid, cfg.p, &params, &cfg.estimates, cfg.seed, &sampler)?;
    if cfg.estimates.refine {
        let fine = GridSpec::new(cfg.grid.dim, 2 * cfg.grid.points, cfg.grid.length)?;
        let fine_rows = estimate_suite(fine, cfg.p, &params, &cfg.estimates, cfg.seed, &sampler)?;
        let changes = relative_changes(&rows, &fine_rows);
        for (name, c) in &changes {
            out.note(&format!("refinement_{name}"), *c);
        }
        out.csv(
            "refinement.csv",
            &["estimate", "coarse", "fine", "relative_change"],
            changes.iter().map(|(name, c)| {
                let a = rows.iter().find(|r| r.estimate == *name).map_or(f64::NAN, |r| r.constant);
                let b = fine_rows.iter().find(|r| r.estimate == *name).map_or(f64::NAN, |r| r.constant);
                vec![name.to_string(), num(a), num(b), num(*c)]
            }),
        )?;
        rows.extend(fine_rows);
    }
    for r in rows.iter().filter(|r| r.points == cfg.grid.points) {
        out.note(r.estimate, r.constant);
    }
    out.csv(
        "estimates.csv",
        &["estimate", "points", "constant", "samples"],
        rows.iter()
            .map(|r| vec![r.estimate.to_string(), r.points.to_string(), num(r.constant), r.samples.to_string()]),
    )?;
    let (c1, c2) = constants_c1_c2(params.p, params.q, params.r)?;
    out.note("c1", c1);
    out.note("c2", c2);
    out.csv(
        "constants.csv",
        &["name", "p", "q", "r", "value"],
        [("c1", c1), ("c2", c2)]
            .iter()
            .map(|(n, v)| vec![n.to_string(), num(params.p), num(params.q), num(params.r), num(*v)]),
    )
}
