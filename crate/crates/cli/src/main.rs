//! `thermoporo` command-line driver.
//!
//! Exit codes: 0 ok, 1 audit checks failed, 2 invalid input, 3 solver
//! failure, 4 I/O error. `THERMOPORO_THREADS` bounds the worker threads of
//! `sweep`.

use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thermoporo::audits::{audit_run_dir, convergence_sweep, FieldNorms, SweepRun};
use thermoporo::scenario::{parse_config, preset, run, write_outputs, ScenarioConfig};
use thermoporo::Error;

pub const THREADS_ENV: &str = "THERMOPORO_THREADS";

#[derive(Parser)]
#[command(name = "thermoporo", version, about = "Thermo-poro-elastoplastic fault-zone simulator and audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the ledger, snapshots and manifest.
    Run {
        config: PathBuf,
        /// Output directory (default: `outputs.dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        mesh: Option<Vec<usize>>,
    },
    /// Refine a scenario in h, ε and dt, one axis at a time.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        h_levels: usize,
        #[arg(long, value_delimiter = ',')]
        eps_list: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        dt_levels: usize,
        /// Directory for the sweep tables (default: `outputs.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-read a run directory and check its invariants.
    Audit { run_dir: PathBuf },
    /// Write a preset configuration as TOML (`-` for stdout).
    Preset {
        name: String,
        #[arg(long)]
        emit: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Io(_) => 4,
        Error::Parse { .. } | Error::Validation(_) | Error::UnknownPreset(_) | Error::InvalidInitialData(_) => 2,
        _ => 3,
    }
}

fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cmd_run(
    config: &Path,
    out: Option<PathBuf>,
    dt: Option<f64>,
    eps: Option<f64>,
    mesh: Option<Vec<usize>>,
) -> thermoporo::Result<()> {
    let mut cfg = parse_config(config)?;
    if let Some(dt) = dt {
        cfg.solver.dt = dt;
    }
    if let Some(eps) = eps {
        cfg.solver.eps = eps;
    }
    if let Some(m) = mesh {
        cfg.domain.nx = m[0];
        cfg.domain.ny = m[1];
    }
    thermoporo::scenario::validate(&cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir));
    let (model, traj) = run(&cfg)?;
    write_outputs(&traj, &cfg, &model.sp, &dir)?;
    let last = traj.ledger.last().expect("ledger has the initial row");
    println!(
        "{} steps ({} rejected) to t = {}; energy residual {:.3e}; min det P {:.6}; output in {}",
        traj.steps.len(),
        traj.rejections,
        traj.final_state.t,
        last.residual_total,
        traj.steps.iter().map(|s| s.min_det_p).fold(f64::INFINITY, f64::min),
        dir.display()
    );
    Ok(())
}

const NORM_COLUMNS: &str = "y_l2,y_h2,p_w1q,alpha_h1,phi_h1,zeta_h1,mu_h1";

fn norm_values(n: &FieldNorms) -> String {
    [n.y_l2, n.y_h2, n.p_w1q, n.alpha_h1, n.phi_h1, n.zeta_h1, n.mu_h1].map(|v| format!("{v:e}")).join(",")
}

fn run_line(out: &mut String, axis: &str, r: &SweepRun) {
    let _ = writeln!(
        out,
        "{axis},{},{},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{},{}",
        r.nx,
        r.ny,
        r.dt,
        r.eps,
        r.steps,
        r.rejections,
        r.final_residual,
        r.max_residual,
        r.max_zeta_violation,
        r.min_det_p,
        r.min_vartheta,
        norm_values(&r.norms),
        norm_values(&r.monitors),
    );
}

fn cmd_sweep(
    config: &Path,
    h_levels: usize,
    eps_list: &[f64],
    dt_levels: usize,
    out: Option<PathBuf>,
) -> thermoporo::Result<()> {
    let cfg = parse_config(config)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir));
    let res = convergence_sweep(&cfg, h_levels, eps_list, dt_levels, threads())?;

    let monitor_cols = NORM_COLUMNS.split(',').map(|c| format!("sup_{c}")).collect::<Vec<_>>().join(",");
    let mut runs = format!(
        "axis,nx,ny,dt,eps,steps,rejections,final_residual,max_residual,max_zeta_violation,min_detP,min_vartheta,\
         {NORM_COLUMNS},{monitor_cols}\n"
    );
    for (axis, list) in [("h", &res.h_runs), ("eps", &res.eps_runs), ("dt", &res.dt_runs)] {
        for r in list {
            run_line(&mut runs, axis, r);
        }
    }
    let mut diffs = format!("axis,level_a,level_b,{NORM_COLUMNS}\n");
    for (i, j, d) in &res.h_pair_differences {
        let _ = writeln!(diffs, "h,{i},{j},{}", norm_values(d));
    }
    for (k, d) in res.dt_differences.iter().enumerate() {
        let _ = writeln!(diffs, "dt,{k},{},{}", k + 1, norm_values(d));
    }
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("sweep_runs.csv"), &runs)?;
    std::fs::write(dir.join("sweep_differences.csv"), &diffs)?;
    print!("{runs}\n{diffs}");
    Ok(())
}

fn cmd_audit(dir: &Path) -> thermoporo::Result<bool> {
    let a = audit_run_dir(dir)?;
    for (name, ok, detail) in a.checks() {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(a.passed())
}

fn cmd_preset(name: &str, emit: &Path) -> thermoporo::Result<()> {
    let cfg: ScenarioConfig = preset(name)?;
    let text = cfg.to_toml_string()?;
    if emit == Path::new("-") {
        print!("{text}");
    } else {
        std::fs::write(emit, text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, dt, eps, mesh } => cmd_run(&config, out, dt, eps, mesh).map(|_| true),
        Command::Sweep { config, h_levels, eps_list, dt_levels, out } => {
            cmd_sweep(&config, h_levels, &eps_list, dt_levels, out).map(|_| true)
        }
        Command::Audit { run_dir } => cmd_audit(&run_dir),
        Command::Preset { name, emit } => cmd_preset(&name, &emit).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
