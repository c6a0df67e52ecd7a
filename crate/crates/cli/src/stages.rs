use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vortex_core::ansatz::{assemble_ansatz, solve_params, AnsatzOptions, AnsatzParams, ScaleParams};
use vortex_core::diagnostics::{
    ansatz_residual, circulation, convergence_study, energy, group_cores, reconstruct_flow, Check,
    VerificationReport, SCHEMA_VERSION,
};
use vortex_core::domain::{make_domain, Domain};
use vortex_core::grid::{FieldKind, GridField};
use vortex_core::potential::{solve_background, BackgroundFlow, PotentialEvaluator};
use vortex_core::profile::{solve_profile, ProfileSolution};
use vortex_core::routh::{find_critical, Classification, CriticalOptions, CriticalPoint, VortexConfig};
use vortex_core::solver::{
    continue_in_eps, newton_solve, recover_u, solve_from_ansatz, NewtonOptions, Problem, SolveReport,
};
use vortex_core::Point;

use crate::config::{FlowSource, RunConfig, SolverSection, VerifySection};
use crate::output::{create_dir, read_json, write_csv, write_grid, write_json, StageError, Versioned};

pub type StageResult<T> = Result<(T, Vec<PathBuf>), StageError>;

pub const PROFILE_JSON: &str = "profile.json";
pub const PROFILE_CSV: &str = "profile.csv";
pub const CRITICAL_JSON: &str = "critical_point.json";
pub const TRAJECTORY_CSV: &str = "critical_trajectory.csv";
pub const ANSATZ_JSON: &str = "ansatz_params.json";
pub const ANSATZ_CSV: &str = "ansatz.csv";
pub const W_CSV: &str = "w.csv";
pub const U_CSV: &str = "u.csv";
pub const REPORT_JSON: &str = "solve_report.json";
pub const VERIFICATION_JSON: &str = "verification.json";
pub const STUDY_CSV: &str = "study.csv";
pub const STUDY_COLUMNS: [&str; 5] = ["eps", "circulation_err", "core_radius_over_eps", "dist_to_Zstar", "energy_residual"];

/// Per-`ε` artifacts live in `eps_<value>/`.
pub fn eps_dir(out: &Path, eps: f64) -> PathBuf {
    out.join(format!("eps_{eps}"))
}

/// Domain, background flow and vortex data built from a config.
pub struct Setup {
    pub domain: Arc<Domain>,
    pub flow: BackgroundFlow,
    pub vortex: VortexConfig,
    pub ev: PotentialEvaluator,
    pub solver: SolverSection,
    pub verify: VerifySection,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Setup, StageError> {
        let d = cfg.domain()?;
        let domain = Arc::new(make_domain(d.shape()?, d.resolution)?);
        let flow_cfg = cfg.flow();
        let samples = match flow_cfg.source()? {
            FlowSource::Preset(p) => p.samples(&domain),
            FlowSource::Samples(s) => s,
        };
        let mut flow = solve_background(&domain, &samples)?;
        if flow_cfg.gauge != 0.0 {
            flow = flow.with_gauge(flow_cfg.gauge);
        }
        let vortex = cfg.vortex()?.config()?;
        vortex.validate(&domain)?;
        Ok(Setup {
            ev: PotentialEvaluator::new(domain.clone()),
            domain,
            flow,
            vortex,
            solver: cfg.solver(),
            verify: cfg.verify(),
        })
    }

    pub fn at(&self, z: &[Point]) -> VortexConfig {
        self.vortex.with_positions(z.to_vec())
    }

    pub fn ansatz_options(&self) -> AnsatzOptions {
        AnsatzOptions {
            strict: self.solver.strict_bracket,
            ..AnsatzOptions::default()
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.solver.newton_tol,
            max_iter: self.solver.max_iter,
            ..NewtonOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ProfileSummary {
    pub p: f64,
    pub r0: f64,
    pub phi_prime_1: f64,
    pub I_p: f64,
    pub I_p1: f64,
    pub pohozaev_residuals: [f64; 2],
    pub steps: usize,
}

pub fn profile(out: &Path, p: f64, tol: f64) -> StageResult<ProfileSolution> {
    let sol = solve_profile(p, tol)?;
    create_dir(out)?;
    let (json, csv) = (out.join(PROFILE_JSON), out.join(PROFILE_CSV));
    write_csv(&csv, &["r", "phi", "dphi"], sol.samples.iter().map(|s| s.to_vec()))?;
    let summary = ProfileSummary {
        p: sol.p,
        r0: sol.r0,
        phi_prime_1: sol.phi_prime_1,
        I_p: sol.i_p,
        I_p1: sol.i_p1,
        pohozaev_residuals: sol.pohozaev_residuals,
        steps: sol.steps,
    };
    write_json(&json, &Versioned::new(summary))?;
    Ok((sol, vec![json, csv]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CriticalSummary {
    pub objective: String,
    pub Z_star: Vec<[f64; 2]>,
    pub value: f64,
    pub grad_norm: f64,
    pub hessian_eigs: Vec<f64>,
    pub transversal_eigs: Vec<f64>,
    pub class: Classification,
    pub stable: bool,
    pub iterations: usize,
}

impl CriticalSummary {
    pub fn z_star(&self) -> Vec<Point> {
        self.Z_star.iter().map(|p| Point::new(p[0], p[1])).collect()
    }
}

pub fn critical(out: &Path, s: &Setup) -> StageResult<CriticalPoint> {
    let opts = CriticalOptions {
        tol: s.solver.critical_tol,
        max_iter: s.solver.critical_max_iter,
        ..CriticalOptions::default()
    };
    let cp = find_critical(&s.ev, &s.flow, &s.vortex, &s.vortex.z, &opts)?;
    create_dir(out)?;
    let (json, csv) = (out.join(CRITICAL_JSON), out.join(TRAJECTORY_CSV));
    let summary = CriticalSummary {
        objective: format!("{:?}", cp.objective),
        Z_star: cp.z_star.iter().map(|p| [p.x, p.y]).collect(),
        value: cp.value,
        grad_norm: cp.grad_norm,
        hessian_eigs: cp.hessian_eigs.clone(),
        transversal_eigs: cp.transversal_eigs.clone(),
        class: cp.class,
        stable: cp.stable,
        iterations: cp.iterations,
    };
    write_json(&json, &Versioned::new(summary))?;
    let mut header = vec!["iteration".to_string(), "value".into(), "grad_norm".into()];
    for j in 1..=cp.z_star.len() {
        header.push(format!("x{j}"));
        header.push(format!("y{j}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = cp.trajectory.iter().map(|t| {
        let mut row = vec![t.iteration as f64, t.value, t.grad_norm];
        row.extend(t.z.iter().flat_map(|p| [p.x, p.y]));
        row
    });
    write_csv(&csv, &header, rows)?;
    Ok((cp, vec![json, csv]))
}

/// `Z*` from a critical-point JSON.
pub fn read_z_star(path: &Path) -> Result<Vec<Point>, StageError> {
    let c: Versioned<CriticalSummary> = read_json(path)?;
    Ok(c.body.z_star())
}

fn check_eps(list: &[f64]) -> Result<(), StageError> {
    if list.is_empty() {
        return Err(StageError::config("empty eps list"));
    }
    Ok(())
}

fn at_eps(eps: f64) -> impl Fn(vortex_core::Error) -> StageError {
    move |e| {
        StageError::from(vortex_core::Error::AtEps {
            eps,
            source: Box::new(e),
        })
    }
}

pub fn ansatz(out: &Path, s: &Setup, prof: &ProfileSolution, z: &[Point], eps: &[f64]) -> StageResult<Vec<AnsatzParams>> {
    check_eps(eps)?;
    let cfg = s.at(z);
    let opts = s.ansatz_options();
    let done: Vec<(AnsatzParams, Vec<PathBuf>)> = eps
        .par_iter()
        .map(|&e| {
            let wrap = at_eps(e);
            let scale = ScaleParams::new(e, prof.p).map_err(&wrap)?;
            let params = solve_params(&s.ev, &s.flow, &cfg, &scale, prof, &opts).map_err(&wrap)?;
            let field = assemble_ansatz(&s.ev, &cfg, &params, &scale, prof, &s.domain.grid).map_err(&wrap)?;
            let dir = eps_dir(out, e);
            create_dir(&dir)?;
            let (json, csv) = (dir.join(ANSATZ_JSON), dir.join(ANSATZ_CSV));
            write_json(&json, &Versioned::new(&params))?;
            write_grid(&csv, &field)?;
            Ok((params, vec![json, csv]))
        })
        .collect::<Result<_, StageError>>()?;
    let (params, files): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    Ok((params, files.concat()))
}

/// Where Newton starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    Ansatz,
    File(PathBuf),
    Zero,
}

pub type Solved = Vec<(GridField, SolveReport)>;

pub fn solve(out: &Path, s: &Setup, prof: &ProfileSolution, z: &[Point], eps: &[f64], seed: &Seed) -> StageResult<Solved> {
    check_eps(eps)?;
    let cfg = s.at(z);
    let (aopts, nopts) = (s.ansatz_options(), s.newton_options());
    let solved: Solved = match seed {
        Seed::Ansatz if s.solver.continuation => continue_in_eps(&s.ev, &s.flow, &cfg, prof, eps, &aopts, &nopts)?,
        Seed::Ansatz => eps
            .par_iter()
            .map(|&e| solve_from_ansatz(&s.ev, &s.flow, &cfg, prof, e, &aopts, &nopts).map_err(at_eps(e)))
            .collect::<Result<_, _>>()?,
        Seed::File(_) | Seed::Zero => {
            let start = match seed {
                Seed::File(path) => read_grid(path, FieldKind::W)?,
                _ => GridField::zeros(s.domain.grid, s.domain.interior.clone(), FieldKind::W),
            };
            eps.par_iter()
                .map(|&e| {
                    let wrap = at_eps(e);
                    let scale = ScaleParams::new(e, prof.p).map_err(&wrap)?;
                    let problem = Problem::new(&s.domain, &s.flow, &cfg, scale).map_err(&wrap)?;
                    newton_solve(&start, &s.domain, &problem, &nopts).map_err(wrap)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let mut files = Vec::new();
    for (w, rep) in &solved {
        let dir = eps_dir(out, rep.eps);
        create_dir(&dir)?;
        let scale = ScaleParams::new(rep.eps, rep.p)?;
        let (wp, up, rp) = (dir.join(W_CSV), dir.join(U_CSV), dir.join(REPORT_JSON));
        write_grid(&wp, w)?;
        write_grid(&up, &recover_u(w, &scale))?;
        write_json(&rp, &Versioned::new(rep))?;
        files.extend([wp, up, rp]);
    }
    Ok((solved, files))
}

pub fn read_grid(path: &Path, kind: FieldKind) -> Result<GridField, StageError> {
    let file = fs::File::open(path).map_err(|e| StageError::io(path, e))?;
    Ok(GridField::read_csv(std::io::BufReader::new(file), kind)?)
}

/// Solutions stored under `eps_*/` of a run directory, largest `ε` first.
pub fn read_solutions(dir: &Path) -> Result<Solved, StageError> {
    let entries = fs::read_dir(dir).map_err(|e| StageError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| StageError::io(dir, e))?.path();
        let is_eps = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("eps_"));
        if !is_eps || !path.join(REPORT_JSON).exists() {
            continue;
        }
        let rep: Versioned<SolveReport> = read_json(&path.join(REPORT_JSON))?;
        let w = read_grid(&path.join(W_CSV), FieldKind::W)?;
        out.push((w, rep.body));
    }
    if out.is_empty() {
        return Err(StageError::io(dir, "no solve reports found"));
    }
    out.sort_by(|a, b| b.1.eps.total_cmp(&a.1.eps));
    Ok(out)
}

pub fn verify(out: &Path, s: &Setup, prof: &ProfileSolution, z_star: &[Point], solved: &Solved) -> StageResult<VerificationReport> {
    if solved.iter().any(|(_, r)| r.z.len() != z_star.len()) {
        return Err(vortex_core::Error::InconsistentReports("vortex count differs from Z*".into()).into());
    }
    struct Row {
        circ: vortex_core::diagnostics::Circulation,
        energy: f64,
        energy_residual: f64,
        stationarity: f64,
    }
    let rows: Vec<Row> = solved
        .par_iter()
        .map(|(w, rep)| {
            let wrap = at_eps(rep.eps);
            let cfg = s.at(&rep.z);
            let scale = ScaleParams::new(rep.eps, rep.p).map_err(&wrap)?;
            let problem = Problem::new(&s.domain, &s.flow, &cfg, scale).map_err(&wrap)?;
            let u = recover_u(w, &scale);
            let circ = circulation(&u, &s.domain, &problem).map_err(&wrap)?;
            let fields = reconstruct_flow(&u, &s.flow, &s.domain, &problem).map_err(&wrap)?;
            let e_w = energy(w, &s.domain, &problem).map_err(&wrap)?;
            let (ans, _, _) = ansatz_residual(&s.ev, &s.flow, &cfg, &scale, prof).map_err(&wrap)?;
            let e_a = energy(&ans, &s.domain, &problem).map_err(&wrap)?;
            Ok(Row {
                circ,
                energy: e_w,
                energy_residual: (e_w - e_a).abs() / e_w.abs(),
                stationarity: fields.stationarity,
            })
        })
        .collect::<Result<_, StageError>>()?;

    let entries: Vec<_> = solved.iter().zip(&rows).map(|((_, r), row)| (r.clone(), row.circ.clone())).collect();
    let table = convergence_study(&entries, z_star)?;
    let h = s.domain.grid.h;
    let mut report = VerificationReport {
        schema_version: SCHEMA_VERSION,
        eps: Vec::new(),
        total_circulation: Vec::new(),
        per_core_circulation: Vec::new(),
        centroids: Vec::new(),
        core_radii: Vec::new(),
        dist_to_zstar: Vec::new(),
        energy: Vec::new(),
        energy_residual: Vec::new(),
        stationarity: Vec::new(),
        table: None,
        checks: Vec::new(),
        pass: false,
    };
    for ((_, rep), row) in solved.iter().zip(&rows) {
        let cores = group_cores(&rep.cores, rep.z.len());
        let centroids: Vec<Point> = cores.iter().map(|c| c.map_or(Point::new(f64::NAN, f64::NAN), |c| c.centroid)).collect();
        report.eps.push(rep.eps);
        report.total_circulation.push(row.circ.total);
        report.per_core_circulation.push(row.circ.per_core.clone());
        report.core_radii.push(cores.iter().map(|c| c.map_or(f64::NAN, |c| c.radius)).collect());
        report
            .dist_to_zstar
            .push(centroids.iter().zip(z_star).map(|(c, z)| c.dist(*z)).fold(0.0, f64::max));
        report.centroids.push(centroids);
        report.energy.push(row.energy);
        report.energy_residual.push(row.energy_residual);
        report.stationarity.push(row.stationarity);
    }
    let v = &s.verify;
    let iters = solved.iter().map(|(_, r)| r.iterations).max().unwrap_or(0);
    let smallest = table.rows.last().map_or(f64::INFINITY, |r| r.circulation_err);
    let worst_dist = report.dist_to_zstar.iter().copied().fold(0.0, f64::max);
    let split = solved.iter().any(|(_, r)| !r.core_split.is_empty());
    report.checks = vec![
        Check::at_most("newton_iterations", iters as f64, v.max_newton_iter as f64),
        Check::at_most("circulation_error", smallest, v.circulation_tol),
        Check::flag("circulation_error_decreasing", table.circulation_err_decreasing),
        Check::at_most("centroid_distance_cells", worst_dist / h, v.centroid_cells),
        Check::at_most("core_radius_ratio_spread", table.radius_ratio_spread, v.radius_spread),
        Check::flag("single_core_per_vortex", !split),
    ];
    report.table = Some(table);
    let report = report.finish();

    create_dir(out)?;
    let (json, csv) = (out.join(VERIFICATION_JSON), out.join(STUDY_CSV));
    write_json(&json, &report)?;
    let table = report.table.as_ref().expect("table set above");
    let study = table.rows.iter().map(|r| {
        let k = report.eps.iter().position(|e| *e == r.eps).expect("row eps from the reports");
        vec![r.eps, r.circulation_err, r.core_radius_over_eps, r.dist_to_zstar, report.energy_residual[k]]
    });
    write_csv(&csv, &STUDY_COLUMNS, study)?;
    Ok((report, vec![json, csv]))
}
