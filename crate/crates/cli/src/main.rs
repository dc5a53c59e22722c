use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgfluid::config::{parse_config, RunConfig};
use sgfluid::diagnostics::{record_norms_with, EnergyResidualObserver};
use sgfluid::exec::Execution;
use sgfluid::harness::{run_sweep, Provenance};
use sgfluid::integrator::{run, Integrator, Observer, StoragePolicy};
use sgfluid::selftest::{diagnose, selftest, CheckResult};
use sgfluid::spectral::snapshot::write_snapshot;
use sgfluid::spectral::SpectralVectorField;
use sgfluid::stochastic::sample_wiener_path;
use sgfluid::Error;

/// Stochastic second-grade fluid and Navier–Stokes simulator.
#[derive(Parser, Debug)]
#[command(name = "sgfluid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Bound on concurrent (alpha, path) jobs.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Master seed (overrides ensemble.seed).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Write a field snapshot every STRIDE steps (simulate only).
    #[arg(long, global = true, value_name = "STRIDE", num_args = 0..=1, default_missing_value = "1")]
    dump_fields: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One trajectory at physics.alpha: norm time series and optional snapshots.
    Simulate,
    /// Alpha sweep against the Navier–Stokes reference on shared paths.
    Sweep,
    /// Moment and increment-modulus estimates only.
    Ensemble,
    /// Operator identities on random fields.
    Diagnose {
        /// Number of random fields.
        #[arg(long, default_value_t = 100)]
        fields: u64,
    },
    /// Run every built-in worked example.
    Selftest,
    /// Run the experiment named in the configuration.
    Run,
}

fn category(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config { .. } => ("config", 3),
        Error::Io(_) | Error::Snapshot(_) => ("io", 4),
        Error::BlowUp { .. } | Error::Sweep(_) => ("numerical", 5),
        _ => ("invalid", 6),
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(dir) = &common.out {
        cfg.output.directory = dir.to_string_lossy().into_owned();
    }
    if let Some(stride) = common.dump_fields {
        cfg.output.snapshot_stride = stride;
    }
    Ok(cfg)
}

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.ensemble.seed,
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Error> {
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `snap_<step>.bin` every `stride` steps.
struct SnapshotWriter<'a> {
    dir: &'a Path,
    stride: usize,
    written: usize,
}

impl Observer for SnapshotWriter<'_> {
    fn observe(&mut self, step: usize, t: f64, u: &SpectralVectorField) -> sgfluid::Result<()> {
        if self.stride > 0 && step.is_multiple_of(self.stride) {
            let mut f = fs::File::create(self.dir.join(format!("snap_{step:07}.bin")))?;
            write_snapshot(&mut f, u, t)?;
            self.written += 1;
        }
        Ok(())
    }
}

fn simulate(cfg: &RunConfig) -> Result<(), Error> {
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let alpha = cfg.physics.alpha;
    let params = cfg.physics_spec().params(alpha)?;
    let path = sample_wiener_path(
        params.horizon,
        params.dt,
        params.noise.len(),
        cfg.ensemble.seed,
        0,
    )?;
    let integrator = Integrator::new(params.clone())?;
    let mut energy = EnergyResidualObserver::new(&params, &path);
    let mut snaps = SnapshotWriter {
        dir: &dir,
        stride: cfg.output.snapshot_stride,
        written: 0,
    };
    let traj = run(&integrator, &path, StoragePolicy::scalars(), &mut [&mut energy, &mut snaps])?;

    let mut csv = prov.comment();
    csv.push_str("t,h,grad,v,w,energy_residual\n");
    for (i, r) in traj.norms.iter().enumerate() {
        let residual = if i == 0 { None } else { energy.residuals.get(i - 1).copied() };
        csv.push_str(&format!("{},{},{},{},{},{}\n", r.t, r.h, r.grad, r.v, r.w, fmt_opt(residual)));
    }
    fs::write(dir.join("norms.csv"), csv)?;
    if path.components() > 0 {
        let mut buf = prov.comment().into_bytes();
        path.write_csv_rows(&mut buf)?;
        fs::write(dir.join("wiener.csv"), buf)?;
    }
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    let last = record_norms_with(integrator.transform(), traj.horizon(), &traj.final_state, alpha, false)?;
    println!(
        "simulate: alpha={alpha} steps={} |u(T)|={} snapshots={} -> {}",
        traj.steps(),
        last.h,
        snaps.written,
        dir.display()
    );
    Ok(())
}

fn sweep(cfg: &RunConfig, compare: bool, exec: Execution) -> Result<(), Error> {
    let mut sc = cfg.sweep_config();
    sc.compare = compare;
    sc.validate().map_err(|e| Error::Config {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;
    let dir = out_dir(cfg)?;
    let prov = provenance(cfg);
    let report = run_sweep(&sc, exec)?;
    report.verify_coupling()?;
    let files = report.write(&dir, &prov)?;
    print!("{}", report.summary(&prov));
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn print_checks(results: &[CheckResult]) -> bool {
    let mut ok = true;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for r in results {
        ok &= r.passed;
        let mark = if r.passed { "PASS" } else { "FAIL" };
        let _ = if r.detail.is_empty() {
            writeln!(out, "{mark} {}", r.name)
        } else {
            writeln!(out, "{mark} {}: {}", r.name, r.detail)
        };
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", results.len());
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = Execution::from_workers(cli.common.workers.map(|w| w as usize));
    let cfg = match load(&cli.common) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let result = match cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Sweep => sweep(&cfg, true, exec),
        Command::Ensemble => sweep(&cfg, false, exec),
        Command::Run => match cfg.experiment {
            sgfluid::config::Experiment::Simulate => simulate(&cfg),
            sgfluid::config::Experiment::Sweep => sweep(&cfg, true, exec),
            sgfluid::config::Experiment::Ensemble => sweep(&cfg, false, exec),
        },
        Command::Diagnose { fields } => {
            return if print_checks(&diagnose(cfg.grid.n, fields, cfg.ensemble.seed)) {
                ExitCode::SUCCESS
            } else {
                eprintln!("error[check]: operator identities failed");
                ExitCode::from(1)
            };
        }
        Command::Selftest => {
            return if print_checks(&selftest()) {
                ExitCode::SUCCESS
            } else {
                eprintln!("error[check]: selftest failed");
                ExitCode::from(1)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let (name, code) = category(e);
    eprintln!("error[{name}]: {e}");
    ExitCode::from(code)
}
