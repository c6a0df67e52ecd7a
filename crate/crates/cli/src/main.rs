mod config;
mod output;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vortex_core::Point;

use crate::config::{RunConfig, CONFIG_HELP};
use crate::output::{create_dir, write_json, RunLog, StageError};
use crate::stages::{Seed, Setup, StageResult};

/// Environment variable naming the default output root.
const OUT_ENV: &str = "VORTEXREG_OUT";
const DEFAULT_OUT: &str = "vortexreg-out";
const RUN_LOG: &str = "run_log.json";

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_STAGE_ERROR: u8 = 3;

/// Desingularized point vortices: profile, Kirchhoff-Routh critical points,
/// approximate solutions, Newton solves and verification.
#[derive(Debug, Parser)]
#[command(name = "vortexreg", version, after_long_help = long_help())]
struct Cli {
    /// Output directory. Falls back to `output` in the config, then
    /// $VORTEXREG_OUT, then ./vortexreg-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

fn long_help() -> String {
    format!(
        "EXIT CODES\n  0  success (and all checks passed for verify/pipeline)\n  1  verification checks failed\n  \
         2  usage error\n  3  a stage failed; see {RUN_LOG} in the output directory\n\n{CONFIG_HELP}"
    )
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Radial ground state: profile.csv (r,phi,dphi) and profile.json.
    Profile {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Critical point of W from the configured seed positions.
    CriticalPoints(ConfigArgs),
    /// Approximate solution parameters and grid field for each eps.
    Ansatz {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Positions from a critical_point.json instead of the config seed.
        #[arg(long)]
        critical: Option<PathBuf>,
    },
    /// Newton solve for each eps; writes w.csv, u.csv and solve_report.json.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        critical: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SeedKind::Ansatz)]
        seed: SeedKind,
        /// Grid CSV of w used with --seed file.
        #[arg(long, required_if_eq("seed", "file"))]
        seed_file: Option<PathBuf>,
    },
    /// Checks a directory of solve results; writes verification.json and study.csv.
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory holding eps_*/solve_report.json and eps_*/w.csv.
        #[arg(long)]
        run_dir: PathBuf,
        /// Reference positions; defaults to the positions in the reports.
        #[arg(long)]
        critical: Option<PathBuf>,
    },
    /// Every stage in order.
    Pipeline {
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeedKind {
    Ansatz,
    File,
    Zero,
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// Full run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// File with [domain] and optionally [flow]; replaces those sections.
    #[arg(long)]
    domain_config: Option<PathBuf>,
    /// File with a [vortex] section; replaces it.
    #[arg(long)]
    vortex_config: Option<PathBuf>,
    /// Grid resolution override.
    #[arg(long)]
    grid: Option<usize>,
    /// Exponent override.
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated eps list override.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Solve without subdomain masks.
    #[arg(long)]
    no_masks: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, StageError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.domain_config {
            let d = RunConfig::load(p)?;
            cfg.domain = Some(d.domain.ok_or_else(|| StageError::config(format!("{}: no [domain]", p.display())))?);
            cfg.flow = d.flow.or(cfg.flow);
        }
        if let Some(p) = &self.vortex_config {
            let v = RunConfig::load(p)?;
            cfg.vortex = Some(v.vortex.ok_or_else(|| StageError::config(format!("{}: no [vortex]", p.display())))?);
        }
        if let (Some(n), Some(d)) = (self.grid, cfg.domain.as_mut()) {
            d.resolution = n;
        }
        let mut solver = cfg.solver();
        if let Some(p) = self.p {
            solver.p = p;
        }
        if let Some(eps) = &self.eps {
            solver.eps = eps.clone();
        }
        cfg.solver = Some(solver);
        if let (true, Some(v)) = (self.no_masks, cfg.vortex.as_mut()) {
            v.use_masks = false;
        }
        Ok(cfg)
    }
}

fn output_dir(flag: Option<&Path>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn positions(critical: Option<&Path>, setup: &Setup) -> Result<Vec<Point>, StageError> {
    match critical {
        Some(p) => stages::read_z_star(p),
        None => Ok(setup.vortex.z.clone()),
    }
}

/// Runs one stage, records it and hands back its value.
fn step<T>(log: &mut RunLog, name: &str, f: impl FnOnce() -> StageResult<T>) -> Option<T> {
    let r = f();
    log.record(name, &r);
    if let Err(e) = &r {
        eprintln!("{name}: {e}");
    }
    r.ok().map(|(v, _)| v)
}

fn plain<T>(r: Result<T, StageError>) -> StageResult<T> {
    r.map(|v| (v, Vec::new()))
}

/// Config and setup shared by the config-driven subcommands.
fn prepare(log: &mut RunLog, args: &ConfigArgs, flag: Option<&Path>) -> (PathBuf, Option<(Setup, f64)>) {
    let cfg = step(log, "config", || plain(args.load()));
    let out = output_dir(flag, cfg.as_ref());
    let setup = cfg.and_then(|c| step(log, "background", || plain(Setup::build(&c))));
    (out, setup.map(|s| {
        let p = s.solver.p;
        (s, p)
    }))
}

fn run(cli: Cli) -> (RunLog, PathBuf) {
    let name = match &cli.command {
        Command::Profile { .. } => "profile",
        Command::CriticalPoints(_) => "critical-points",
        Command::Ansatz { .. } => "ansatz",
        Command::Solve { .. } => "solve",
        Command::Verify { .. } => "verify",
        Command::Pipeline { .. } => "pipeline",
    };
    let mut log = RunLog::new(name);
    let flag = cli.out.as_deref();
    let out = match cli.command {
        Command::Profile { p, tol } => {
            let out = output_dir(flag, None);
            step(&mut log, "profile", || stages::profile(&out, p, tol));
            out
        }
        Command::CriticalPoints(args) => {
            let (out, setup) = prepare(&mut log, &args, flag);
            if let Some((s, _)) = setup {
                step(&mut log, "critical-points", || stages::critical(&out, &s));
            }
            out
        }
        Command::Ansatz { cfg, critical } => {
            let (out, setup) = prepare(&mut log, &cfg, flag);
            if let Some((s, p)) = setup {
                let tol = s.solver.profile_tol;
                let _ = (|| {
                    let z = step(&mut log, "positions", || plain(positions(critical.as_deref(), &s)))?;
                    let prof = step(&mut log, "profile", || stages::profile(&out, p, tol))?;
                    step(&mut log, "ansatz", || stages::ansatz(&out, &s, &prof, &z, &s.solver.eps))
                })();
            }
            out
        }
        Command::Solve {
            cfg,
            critical,
            seed,
            seed_file,
        } => {
            let (out, setup) = prepare(&mut log, &cfg, flag);
            if let Some((s, p)) = setup {
                let seed = match seed {
                    SeedKind::Ansatz => Seed::Ansatz,
                    SeedKind::Zero => Seed::Zero,
                    SeedKind::File => Seed::File(seed_file.expect("clap requires --seed-file")),
                };
                let tol = s.solver.profile_tol;
                let _ = (|| {
                    let z = step(&mut log, "positions", || plain(positions(critical.as_deref(), &s)))?;
                    let prof = step(&mut log, "profile", || stages::profile(&out, p, tol))?;
                    step(&mut log, "solve", || stages::solve(&out, &s, &prof, &z, &s.solver.eps, &seed))
                })();
            }
            out
        }
        Command::Verify { cfg, run_dir, critical } => {
            let (out, setup) = prepare(&mut log, &cfg, flag);
            if let Some((s, p)) = setup {
                let tol = s.solver.profile_tol;
                let report = (|| {
                    let solved = step(&mut log, "read-solutions", || plain(stages::read_solutions(&run_dir)))?;
                    let z = match &critical {
                        Some(c) => step(&mut log, "positions", || plain(stages::read_z_star(c)))?,
                        None => solved[0].1.z.clone(),
                    };
                    let prof = step(&mut log, "profile", || stages::profile(&out, p, tol))?;
                    step(&mut log, "verify", || stages::verify(&out, &s, &prof, &z, &solved))
                })();
                log.checks_passed = report.map(|r| r.pass);
            }
            out
        }
        Command::Pipeline { config } => {
            let args = ConfigArgs {
                config: Some(config),
                domain_config: None,
                vortex_config: None,
                grid: None,
                p: None,
                eps: None,
                no_masks: false,
            };
            let (out, setup) = prepare(&mut log, &args, flag);
            if let Some((s, p)) = setup {
                let tol = s.solver.profile_tol;
                let eps = s.solver.eps.clone();
                let report = (|| {
                    let prof = step(&mut log, "profile", || stages::profile(&out, p, tol))?;
                    let cp = step(&mut log, "critical-points", || stages::critical(&out, &s))?;
                    let z = cp.z_star;
                    step(&mut log, "ansatz", || stages::ansatz(&out, &s, &prof, &z, &eps))?;
                    let solved = step(&mut log, "solve", || stages::solve(&out, &s, &prof, &z, &eps, &Seed::Ansatz))?;
                    step(&mut log, "verify", || stages::verify(&out, &s, &prof, &z, &solved))
                })();
                log.checks_passed = report.map(|r| r.pass);
            }
            out
        }
    };
    log.exit_code = if log.failed_stage().is_some() {
        EXIT_STAGE_ERROR as i32
    } else if log.checks_passed == Some(false) {
        EXIT_CHECKS_FAILED as i32
    } else {
        0
    };
    (log, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("--jobs: {e}");
        }
    }
    let (mut log, out) = run(cli);
    let written = create_dir(&out).and_then(|_| write_json(&out.join(RUN_LOG), &log));
    if let Err(e) = written {
        eprintln!("run log: {e}");
        log.exit_code = EXIT_STAGE_ERROR as i32;
    }
    if let Some(s) = log.failed_stage() {
        eprintln!(
            "stage {} failed with {}",
            s.stage,
            s.error_code.as_deref().unwrap_or("?")
        );
    } else if log.checks_passed == Some(false) {
        eprintln!("verification checks failed; see {}", out.join(stages::VERIFICATION_JSON).display());
    }
    ExitCode::from(log.exit_code as u8)
}
