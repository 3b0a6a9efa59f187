use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use noisereg::acceptance::{self, CRITERIA};
use noisereg::config::{DriftChoice, RunConfig};
use noisereg::counterexample1d::{
    explosion_criterion, explosion_mc_1d, feller_integral, inverse_gaussian_cdf, phi_limit, phi_limit_negative,
    ScalarFn, ScalarModel,
};
use noisereg::integrator::{ode_solve_explosive, power_blowup_time, Recording};
use noisereg::linalg::Vector;
use noisereg::lyapunov::{log_grid, scan_directions, LyapunovProfile};
use noisereg::model::{AdditiveDrift, Driftless};
use noisereg::montecarlo::{
    ergodicity_experiment, explosion_probability, hitting_time_tau_r, ito_stratonovich_consistency, run_ensemble,
    zero_avoidance_y, EnsembleConfig, ErgodicityReport,
};
use noisereg::report::{
    write_bytes, write_decay_csv, write_json, write_paths_csv, write_refinement_csv, Check, Metadata, Summary,
};
use noisereg::rng::derive_seed;
use noisereg::Error;

#[derive(Parser)]
#[command(name = "noisereg", version, about = "Explosion prevention by Stratonovich noise: experiments and checks")]
struct Cli {
    /// TOML run configuration; the built-in default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key=value` override with a dotted key, e.g. `model.eta=1.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the configuration and the model's admissibility conditions.
    Validate,
    /// Noise-free blow-up from `ensemble.x0`.
    OdeBlowup,
    /// Simulate `ensemble.n_paths` paths and write them to paths.csv.
    Simulate,
    /// Explosion fraction of the ensemble.
    ExplodeProb,
    /// Zero-hitting of the transformed process.
    ZeroAvoid,
    /// Entrance into the ball of radius R raced against explosion.
    TauR,
    /// Radial profile of the generator applied to V and its negativity radius.
    LyapunovScan,
    /// Super-Lyapunov constants and the K_T threshold.
    SuperlyapFit,
    /// Discrepancy of the Ito and Stratonovich schemes over step halvings.
    ItoStratCheck,
    /// Distance decay between two ensembles.
    Ergodicity,
    /// One-dimensional explosion despite noise.
    Counterexample1d,
    /// Acceptance criteria 1-13.
    AllAcceptance,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::OdeBlowup => "ode-blowup",
            Command::Simulate => "simulate",
            Command::ExplodeProb => "explode-prob",
            Command::ZeroAvoid => "zero-avoid",
            Command::TauR => "tau-r",
            Command::LyapunovScan => "lyapunov-scan",
            Command::SuperlyapFit => "superlyap-fit",
            Command::ItoStratCheck => "ito-strat-check",
            Command::Ergodicity => "ergodicity",
            Command::Counterexample1d => "counterexample-1d",
            Command::AllAcceptance => "all-acceptance",
        }
    }
}

const EXIT_INVALID: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

#[derive(Serialize)]
struct CommandSummary<'a> {
    command: &'a str,
    experiment: &'a str,
    seed: u64,
    passed: bool,
    checks: Vec<Check>,
    results: serde_json::Value,
}

struct Outcome {
    checks: Vec<Check>,
    results: serde_json::Value,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParams(_) | Error::Precondition(_) => EXIT_INVALID,
        _ => EXIT_ASSERTION,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn run(cli: &Cli) -> noisereg::Result<u8> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let problems = cfg.problems();
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("invalid: {p}");
        }
        return Ok(EXIT_INVALID);
    }
    let out = PathBuf::from(&cfg.out);
    let mut meta = Metadata::start(cli.command.name());

    if cli.command == Command::AllAcceptance {
        let summary = acceptance::run_criteria(&CRITERIA, cfg.seed, |r, secs| {
            println!("{}", r.line());
            meta.elapsed_seconds.push((format!("criterion {}", r.id), secs));
        })?;
        write_bytes(&out.join("summary.json"), &summary.to_bytes()?)?;
        write_acceptance_csvs(&out, &summary)?;
        meta.finish();
        write_json(&out.join("metadata.json"), &meta)?;
        return Ok(if summary.all_passed() { 0 } else { EXIT_ASSERTION });
    }

    let outcome = execute(cli.command, &cfg, &out)?;
    let passed = outcome.checks.iter().all(|c| c.passed);
    for c in &outcome.checks {
        println!("{} {} = {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value);
    }
    let summary = CommandSummary {
        command: cli.command.name(),
        experiment: &cfg.experiment,
        seed: cfg.seed,
        passed,
        checks: outcome.checks,
        results: outcome.results,
    };
    write_json(&out.join("summary.json"), &summary)?;
    meta.finish();
    write_json(&out.join("metadata.json"), &meta)?;
    Ok(if passed { 0 } else { EXIT_ASSERTION })
}

fn write_acceptance_csvs(out: &Path, summary: &Summary) -> noisereg::Result<()> {
    for c in &summary.criteria {
        if c.id == 7 {
            if let Ok(table) = serde_json::from_value::<RefinementRows>(c.details["refinement"].clone()) {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(out.join("refinement.csv"))?;
                w.write_record(["dt", "mean_sup_error"])?;
                for r in table.rows {
                    w.write_record([r.dt.to_string(), r.mean_sup_error.to_string()])?;
                }
                w.flush()?;
            }
        }
        if c.id == 12 {
            let deciding = if c.details["rerun"].is_null() { &c.details["first"] } else { &c.details["rerun"] };
            if let Ok(d) = serde_json::from_value::<DecayRows>(deciding.clone()) {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(out.join("decay.csv"))?;
                w.write_record(["t", "tv", "d1", "noise_floor"])?;
                for k in 0..d.checkpoints.len() {
                    w.write_record([
                        d.checkpoints[k].to_string(),
                        d.tv[k].to_string(),
                        d.d1[k].to_string(),
                        d.noise_floor_d1[k].to_string(),
                    ])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct RefinementRow {
    dt: f64,
    mean_sup_error: f64,
}

#[derive(serde::Deserialize)]
struct RefinementRows {
    rows: Vec<RefinementRow>,
}

#[derive(serde::Deserialize)]
struct DecayRows {
    checkpoints: Vec<f64>,
    tv: Vec<f64>,
    d1: Vec<f64>,
    noise_floor_d1: Vec<f64>,
}

fn execute(command: Command, cfg: &RunConfig, out: &Path) -> noisereg::Result<Outcome> {
    let model = cfg.build_model();
    let scheme = cfg.scheme_config();
    let x0 = Vector::from_column_slice(&cfg.ensemble.x0);
    let outcome = match command {
        Command::Validate => Outcome {
            checks: vec![Check::flag("configuration valid", true)],
            results: json!({ "config": cfg, "ito_correction_vanishes": model.params.d as f64 - 1.0 - 1.0 / model.params.eta == 0.0 }),
        },
        Command::OdeBlowup => {
            let power = (cfg.drift.kind == DriftChoice::Power).then_some((cfg.model.kappa, cfg.model.m));
            let (path, blow) = ode_solve_explosive(&model.without_noise(), &cfg.model, power, &x0, scheme.dt0, scheme.t_end)?;
            write_paths_csv(&out.join("paths.csv"), std::slice::from_ref(&path))?;
            let mut checks = Vec::new();
            if let Some((kappa, m)) = power.filter(|&(_, m)| m > 1.0) {
                let t_star = power_blowup_time(kappa, m, x0.norm());
                if t_star < scheme.t_end {
                    checks.push(Check::between(
                        "time to reach x_max",
                        blow.reach_time.unwrap_or(f64::NAN),
                        t_star - 1e-3,
                        t_star,
                    ));
                }
            }
            Outcome { checks, results: json!({ "blowup": blow, "status": path.status }) }
        }
        Command::Simulate => {
            let mut s = scheme.clone();
            s.record = if cfg.ensemble.checkpoints.is_empty() {
                Recording::Full
            } else {
                Recording::Checkpoints(cfg.ensemble.checkpoints.clone())
            };
            let paths = run_ensemble(&model, &s, &x0, cfg.ensemble.n_paths)?;
            write_paths_csv(&out.join("paths.csv"), &paths)?;
            let statuses: Vec<_> = paths.iter().map(|p| json!({ "path_id": p.path_id, "status": p.status, "steps": p.steps })).collect();
            Outcome { checks: Vec::new(), results: json!({ "paths": statuses }) }
        }
        Command::ExplodeProb => {
            let stats = explosion_probability(&model, &scheme, &cfg.ensemble)?;
            Outcome { checks: Vec::new(), results: json!(stats) }
        }
        Command::ZeroAvoid => {
            let z = &cfg.zero_avoidance;
            let d = cfg.model.d;
            let mut s = scheme.clone();
            s.dt0 = z.dt0;
            s.t_end = z.t_end;
            s.eps_zero = z.eps_zero;
            let mut y0 = vec![0.0; d];
            y0[0] = z.y0_radius;
            let ens = EnsembleConfig::new(z.n_paths, &y0);
            let ctx = model.transform_context();
            let drift: &dyn AdditiveDrift = match cfg.drift.kind {
                DriftChoice::Zero => &Driftless { d },
                DriftChoice::Power => &ctx,
            };
            let stats = zero_avoidance_y(drift, &s, &ens)?;
            let checks = if d >= 2 {
                vec![Check::at_most("hit fraction", stats.hit_zero.estimate, 0.0)]
            } else {
                Vec::new()
            };
            Outcome { checks, results: json!(stats) }
        }
        Command::TauR => {
            let rep = hitting_time_tau_r(&model, &scheme, &cfg.ensemble)?;
            Outcome {
                checks: vec![Check::at_least(
                    "decided paths entering B_R first",
                    rep.entered_before_explosion.estimate,
                    1.0,
                )],
                results: json!(rep),
            }
        }
        Command::LyapunovScan => {
            let v = LyapunovProfile::new(cfg.lyapunov.alpha, cfg.model.r_switch)?;
            let b = cfg.drift_spec();
            let p = &cfg.model;
            let dirs = scan_directions(p.d, 16);
            let radii = log_grid(v.r0 * 0.5, 1e6 * v.closed_form_radius(p), cfg.lyapunov.scan_points.max(2));
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path({
                std::fs::create_dir_all(out)?;
                out.join("lyapunov.csv")
            })?;
            w.write_record(["r", "v", "lv_max"])?;
            for &r in &radii {
                let lv = dirs.iter().map(|u| v.lv_generic(p, &b, &(u * r))).fold(f64::NEG_INFINITY, f64::max);
                w.write_record([r.to_string(), v.radial(r).0.to_string(), lv.to_string()])?;
            }
            w.flush()?;
            match v.negativity_radius(p, &b) {
                Ok(cert) => Outcome {
                    checks: vec![Check::below("max LV on [r*, 1e6 r*]", cert.max_lv_on_grid, 0.0)],
                    results: json!({ "profile": v, "certificate": cert }),
                },
                Err(e) => Outcome {
                    checks: vec![Check::flag("negativity radius exists", false)],
                    results: json!({ "profile": v, "error": e.to_string() }),
                },
            }
        }
        Command::SuperlyapFit => {
            let v = LyapunovProfile::new(cfg.lyapunov.alpha, cfg.model.r_switch)?;
            let fit = v.super_lyapunov_fit(&cfg.model, &cfg.drift_spec(), cfg.lyapunov.gamma, cfg.lyapunov.t_horizon, cfg.seed)?;
            Outcome {
                checks: vec![
                    Check::above("c", fit.c_coef, 0.0),
                    Check::at_most("worst audit slack", fit.audit_worst_slack, 0.0),
                ],
                results: json!(fit),
            }
        }
        Command::ItoStratCheck => {
            let mut r = cfg.refinement.clone();
            if r.x0.len() != cfg.model.d {
                return Err(Error::Config(format!(
                    "refinement.x0 has {} components, model.d = {}",
                    r.x0.len(),
                    cfg.model.d
                )));
            }
            r.seed = derive_seed(cfg.seed, r.seed);
            let table = ito_stratonovich_consistency(&model, &r)?;
            write_refinement_csv(&out.join("refinement.csv"), &table)?;
            Outcome {
                checks: vec![Check::flag("monotone within slack 1.5", table.monotone_within_slack)],
                results: json!(table),
            }
        }
        Command::Ergodicity => {
            let e = &cfg.ergodicity;
            let mut s = scheme.clone();
            s.scheme = e.scheme;
            s.t_end = e.checkpoints.last().copied().unwrap_or(s.t_end);
            let first = ergodicity_experiment(&model, &s, &e.experiment(e.n_paths))?;
            let ok = |r: &ErgodicityReport| r.d1_nonincreasing_within_floor && r.final_tv < 0.1;
            let rerun = if ok(&first) {
                None
            } else {
                let s2 = noisereg::integrator::SchemeConfig { seed: derive_seed(s.seed, e.rerun_n_paths as u64), ..s };
                Some(ergodicity_experiment(&model, &s2, &e.experiment(e.rerun_n_paths))?)
            };
            let deciding = rerun.as_ref().unwrap_or(&first);
            write_decay_csv(&out.join("decay.csv"), deciding)?;
            Outcome {
                checks: vec![
                    Check::flag("d1 nonincreasing within noise floor", deciding.d1_nonincreasing_within_floor),
                    Check::below("final tv", deciding.final_tv, 0.1),
                ],
                results: json!({ "first": first, "rerun": rerun }),
            }
        }
        Command::Counterexample1d => {
            let c = &cfg.counterexample;
            let sm = cfg.scalar_model()?;
            let integral = explosion_criterion(&sm)?;
            let up = phi_limit(&sm)?;
            let down = phi_limit_negative(&sm)?;
            let mc = explosion_mc_1d(&sm, &cfg.mc1d_config())?;
            // A ≡ 1 exactly when b = σ, where the first passage is inverse Gaussian
            let oracle = (c.b.replace(' ', "") == c.sigma.replace(' ', "")).then(|| up.value()).flatten();
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path({
                std::fs::create_dir_all(out)?;
                out.join("explosion_cdf.csv")
            })?;
            w.write_record(["t", "fraction", "inverse_gaussian"])?;
            for (k, &t) in mc.checkpoints.iter().enumerate() {
                let ig = oracle.map_or(String::new(), |level| inverse_gaussian_cdf(level - mc.y0, 1.0, t).to_string());
                w.write_record([t.to_string(), mc.fraction[k].to_string(), ig])?;
            }
            w.flush()?;
            let feller_model = ScalarModel::new(ScalarFn::preset(&c.feller_b)?, ScalarFn::preset("1")?, 0.0);
            let feller = feller_integral(&feller_model)?;
            let mut checks = vec![Check::flag("explosion criterion finite", integral.is_finite())];
            if let Some(holds) = feller.inequality_holds {
                checks.push(Check::flag("Feller integral below the comparison integral", holds));
            }
            Outcome {
                checks,
                results: json!({ "integral": integral, "phi_limit": up, "phi_limit_negative": down, "mc": mc, "feller": feller }),
            }
        }
        Command::AllAcceptance => unreachable!("handled by run"),
    };
    Ok(outcome)
}
