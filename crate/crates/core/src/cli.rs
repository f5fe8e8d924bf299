//! Command line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 failed
//! verification, 3 blow-up.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::calculus::{kernel_periodized, raw_kernel, DEFAULT_TAIL_TERMS};
use crate::config::{Experiment, PreparedRun, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    counterexample_growth, faddeev_demo, isomorphism_check, lifespan_scan, Check, RowStatus,
    ScanResult, ScanRow,
};
use crate::lattice::{make_box, snapshot_string, WaveState};
use crate::solvers::{evolve, Outcome, Trajectory};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lattwave", version, about = "Wave equations with nonlocal lattice derivatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the raw and periodized derivative kernel.
    Kernel {
        #[arg(long)]
        d: usize,
        #[arg(long = "L", alias = "l")]
        l: usize,
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long, default_value_t = DEFAULT_TAIL_TERMS)]
        tail_terms: usize,
    },
    /// Evolve one configuration and write `energy.csv`.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Write a checkpoint every N recorded samples.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run a self-check suite.
    Verify {
        /// identities, adjointness, conservation, counterexample, isomorphism or all.
        suite: String,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a parameter scan and write `<experiment>-<hash>.csv` and `.ndjson`.
    Scan {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Kernel {
            d,
            l,
            axis,
            tail_terms,
        } => cmd_kernel(d, l, axis, tail_terms).map(|t| {
            let _ = write!(out, "{t}");
            EXIT_OK
        }),
        Command::Simulate {
            run,
            snapshot_every,
        } => cmd_simulate(&run, snapshot_every, out),
        Command::Verify {
            suite,
            json,
            seed,
            jobs,
        } => cmd_verify(&suite, json, seed, jobs, out),
        Command::Scan { run } => cmd_scan(&run, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::BlowUp { .. } => EXIT_BLOWUP,
                _ => EXIT_CONFIG,
            }
        }
    }
}

/// Table of offsets, raw kernel, periodized kernel, partial image sum and
/// tail bound, then the column sum of the periodized kernel.
pub fn cmd_kernel(d: usize, l: usize, axis: usize, tail_terms: usize) -> Result<String> {
    let lattice = make_box(d, l)?;
    let k = kernel_periodized(lattice, axis, tail_terms)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# kernel of partial_{axis} on {} (imaginary parts; real parts vanish)",
        lattice.describe()
    );
    let _ = writeln!(s, "{:>5} {:>24} {:>24} {:>24} {:>12}", "a", "raw", "periodized", "partial_sum", "tail_bound");
    let mut total = num_complex::Complex64::default();
    for a in k.offsets() {
        let p = k.at(a);
        total += p;
        let _ = writeln!(
            s,
            "{:>5} {:>24.16e} {:>24.16e} {:>24.16e} {:>12.3e}",
            a,
            raw_kernel(a).im,
            p.im,
            k.partial_sum(a).im,
            k.tail_bound(a)
        );
    }
    let _ = writeln!(s, "{:>5} {:>24} {:>24.16e}", "sum", "", total.im);
    Ok(s)
}

fn load(args: &RunArgs) -> Result<(PreparedRun, PathBuf)> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok((cfg.prepare(&base)?, out_dir))
}

fn with_jobs<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// `energy.csv` body.
pub fn energy_csv(traj: &Trajectory, config_hash: &str) -> String {
    let mut s = format!(
        "# config_hash={config_hash}\nt,kinetic,gradient,potential,total,A_k,sup_u,sup_ut,seam_tail,flag\n"
    );
    let n = traj.samples.len();
    for (i, smp) in traj.samples.iter().enumerate() {
        let flag = if i + 1 == n && traj.blew_up() { "blowup" } else { "ok" };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            num(smp.t),
            num(smp.energy.kinetic),
            num(smp.energy.gradient),
            num(smp.energy.potential),
            num(smp.energy.total),
            num(smp.a.value),
            num(smp.sup_u),
            num(smp.sup_ut),
            num(smp.seam_tail),
            flag
        );
    }
    s
}

/// Comment line, `t=<t> spec_hash=<hex>`, then the `u` and `u_t` snapshots.
pub fn checkpoint_string(state: &WaveState, spec_hash: &str, config_hash: &str) -> String {
    format!(
        "# config_hash={config_hash}\nt={} spec_hash={spec_hash}\n{}{}",
        num(state.t),
        snapshot_string(&state.u),
        snapshot_string(&state.ut)
    )
}

/// Parses a checkpoint written by [`checkpoint_string`].
pub fn read_checkpoint(text: &str) -> Result<(WaveState, String)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let meta = lines.next().ok_or_else(|| Error::Parse("empty checkpoint".into()))?;
    let mut t = None;
    let mut hash = None;
    for tok in meta.split_whitespace() {
        if let Some(v) = tok.strip_prefix("t=") {
            t = v.parse::<f64>().ok();
        } else if let Some(v) = tok.strip_prefix("spec_hash=") {
            hash = Some(v.to_string());
        }
    }
    let (t, hash) = match (t, hash) {
        (Some(t), Some(h)) => (t, h),
        _ => return Err(Error::Parse(format!("bad checkpoint metadata `{meta}`"))),
    };
    let u = crate::lattice::read_snapshot_lines(&mut lines)?;
    let ut = crate::lattice::read_snapshot_lines(&mut lines)?;
    Ok((WaveState::new(u, ut, t)?, hash))
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

fn cmd_simulate(args: &RunArgs, snapshot_every: Option<usize>, out: &mut dyn Write) -> Result<i32> {
    let (run, dir) = load(args)?;
    if run.config.experiment != Experiment::Simulate {
        return Err(Error::Config(format!(
            "experiment `{}` belongs to `scan`",
            run.config.experiment.name()
        )));
    }
    if snapshot_every == Some(0) {
        return Err(Error::Config("--snapshot-every must be at least 1".into()));
    }
    let mut solver = run.config.solver.clone();
    if snapshot_every.is_some() {
        solver.keep_states = true;
    }
    let spec = &run.config.equation;
    let traj = match with_jobs(args.jobs, || evolve(&run.f, &run.g, spec, &solver))? {
        Ok(t) => t,
        Err(Error::BlowUp { t, sup_u, sup_ut }) => {
            let record = serde_json::json!({
                "config_hash": run.hash, "t": t, "sup_u": sup_u, "sup_ut": sup_ut, "action": "halt"
            });
            write_file(&dir, "blowup.json", &format!("{record}\n"))?;
            let _ = writeln!(out, "blow-up at t = {t}");
            return Ok(EXIT_BLOWUP);
        }
        Err(e) => return Err(e),
    };
    write_file(&dir, "energy.csv", &energy_csv(&traj, &run.hash))?;
    if let Some(every) = snapshot_every {
        for (i, st) in traj.states.iter().enumerate() {
            if i % every == 0 || i + 1 == traj.states.len() {
                let name = format!("checkpoint-{i:06}.txt");
                write_file(&dir, &name, &checkpoint_string(st, &traj.spec_hash, &run.hash))?;
            }
        }
    }
    match traj.outcome {
        Outcome::BlowUp(r) => {
            let record = serde_json::json!({
                "config_hash": run.hash,
                "t": r.t,
                "sup_u": r.sup_u,
                "sup_ut": r.sup_ut,
                "last_dt": r.last_dt,
                "action": "record"
            });
            write_file(&dir, "blowup.json", &format!("{record}\n"))?;
            let _ = writeln!(out, "blow-up at t = {}", r.t);
            Ok(EXIT_BLOWUP)
        }
        _ => {
            let last = traj.last();
            let _ = writeln!(
                out,
                "completed t = {} steps = {} energy drift = {:e}",
                last.t,
                traj.steps,
                traj.energy_drift()
            );
            Ok(EXIT_OK)
        }
    }
}

fn cmd_verify(suite: &str, json: bool, seed: u64, jobs: usize, out: &mut dyn Write) -> Result<i32> {
    let outcomes = with_jobs(jobs, || verify::run_suite(suite, seed))??;
    let all = outcomes.iter().all(|o| o.passed);
    if json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&outcomes)?);
    } else {
        for o in &outcomes {
            let _ = writeln!(
                out,
                "{} {}/{} value={:e} tol={:e}",
                if o.passed { "PASS" } else { "FAIL" },
                o.suite,
                o.name,
                o.value,
                o.tolerance
            );
        }
    }
    Ok(if all { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn faddeev_scan(run: &PreparedRun, cfg: &crate::experiments::FaddeevConfig) -> Result<ScanResult> {
    let rep = faddeev_demo(cfg)?;
    let rows = rep
        .run
        .trajectory
        .samples
        .iter()
        .map(|s| ScanRow {
            param: s.t,
            values: vec![s.a.value, s.sup_u, s.sup_ut],
            status: RowStatus::Completed,
        })
        .collect();
    let _ = run;
    Ok(ScanResult {
        experiment: "faddeev".into(),
        parameter: "t".into(),
        columns: vec!["A_k".into(), "sup_u".into(), "sup_ut".into()],
        rows,
        fits: Vec::new(),
        checks: vec![
            Check {
                name: "residual".into(),
                passed: rep.residual <= 1e-6,
                detail: format!("{:e}", rep.residual),
            },
            Check {
                name: "window".into(),
                passed: true,
                detail: format!("{}", rep.window),
            },
        ],
    })
}

fn cmd_scan(args: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let (run, dir) = load(args)?;
    let cfg = &run.config;
    let result = match &cfg.experiment {
        Experiment::Simulate => {
            return Err(Error::Config("`scan` needs a scan experiment in the config".into()))
        }
        Experiment::Lifespan { criterion, .. } => lifespan_scan(
            &cfg.equation,
            &run.f,
            &run.g,
            &cfg.experiment.eps_grid(),
            &cfg.solver,
            *criterion,
            args.jobs,
        )?,
        Experiment::Counterexample { l_grid, d } => {
            counterexample_growth(l_grid, *d).map_err(|e| Error::Config(e.to_string()))?
        }
        Experiment::Isomorphism { trials } => {
            let r = isomorphism_check(cfg.seed, *trials, cfg.lattice.l, cfg.lattice.d)?;
            ScanResult {
                experiment: "isomorphism".into(),
                parameter: "trial".into(),
                columns: vec!["ratio".into()],
                rows: r
                    .ratios
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| ScanRow {
                        param: i as f64,
                        values: vec![x],
                        status: RowStatus::Completed,
                    })
                    .collect(),
                fits: Vec::new(),
                checks: vec![Check {
                    name: "ratios_in_band".into(),
                    passed: r.all_inside,
                    detail: format!("min {} max {}", r.min, r.max),
                }],
            }
        }
        Experiment::Faddeev(f) => with_jobs(args.jobs, || faddeev_scan(&run, f))??,
    };
    let stem = format!("{}-{}", result.experiment, run.hash);
    write_file(&dir, &format!("{stem}.csv"), &result.to_csv(&run.hash))?;
    write_file(&dir, &format!("{stem}.ndjson"), &result.to_ndjson(&run.hash)?)?;
    let _ = writeln!(out, "wrote {}", dir.join(format!("{stem}.csv")).display());
    for c in &result.checks {
        let _ = writeln!(out, "{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for f in &result.fits {
        let _ = writeln!(
            out,
            "fit {} K = {:e} (least squares {:e}) {}",
            f.model,
            f.coefficient,
            f.least_squares,
            if f.satisfied { "satisfied" } else { "not satisfied" }
        );
    }
    Ok(EXIT_OK)
}
