use std::sync::Arc;

use vortex_core::ansatz::{
    assemble_ansatz, core_radius_asymptote, plateau_expansion, solve_params, Ansatz, AnsatzOptions, ScaleParams,
};
use vortex_core::domain::{make_domain, Domain, Shape};
use vortex_core::potential::{solve_background, BackgroundFlow, FlowPreset, FluxSamples, PotentialEvaluator};
use vortex_core::profile::{solve_profile, ProfileSolution};
use vortex_core::routh::VortexConfig;
use vortex_core::{ErrorCode, Point};

fn disk(res: usize) -> Arc<Domain> {
    Arc::new(make_domain(Shape::unit_disk(), res).unwrap())
}

fn still(d: &Domain) -> BackgroundFlow {
    solve_background(d, &FluxSamples::zero(d)).unwrap()
}

fn opts() -> AnsatzOptions {
    AnsatzOptions::default()
}

#[test]
fn core_radius_follows_matching_identity() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = still(&d);
    let cfg = VortexConfig::new(vec![1.0], vec![Point::new(0.2, -0.1)]);
    for p in [1.5, 2.0, 3.0] {
        let prof = solve_profile(p, 1e-10).unwrap();
        let mut gaps = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4, 1e-6, 1e-8] {
            let scale = ScaleParams::new(eps, p).unwrap();
            let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()).unwrap();
            let ratio = par.s[0] / core_radius_asymptote(&scale, &prof, par.a[0]);
            // The matching condition makes the ratio (ln(R/s)/|ln δ|)^{(p-1)/2}.
            let oracle = (par.log_ratio(0) / scale.delta.ln().abs()).powf(0.5 * (p - 1.0));
            assert!((ratio - oracle).abs() < 1e-9, "p={p} eps={eps}: {ratio} {oracle}");
            gaps.push((ratio - 1.0).abs());
        }
        // Only logarithmic decay, and the offset can change sign on the way.
        assert!(gaps[4] < gaps[0], "p={p}: {gaps:?}");
    }
}

#[test]
fn plateau_expansion_residual_does_not_grow() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = solve_background(&d, &FlowPreset::Uniform { u: 0.1, v: 0.05 }.samples(&d)).unwrap();
    let prof = solve_profile(2.0, 1e-10).unwrap();
    let cfg = VortexConfig::new(vec![1.0], vec![Point::new(0.3, 0.2)]);
    let mut scaled = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
        let scale = ScaleParams::new(eps, 2.0).unwrap();
        let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()).unwrap();
        let lead = plateau_expansion(&ev, &flow, &cfg, &scale).unwrap();
        let l = scale.ln_eps;
        scaled.push((par.a[0] - lead[0]).abs() * l * l / l.ln());
    }
    for w in scaled.windows(2) {
        assert!(w[1] <= w[0], "{scaled:?}");
    }
}

#[test]
fn core_radius_shrinks_and_level_tends_to_strength() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = still(&d);
    let prof = solve_profile(2.0, 1e-10).unwrap();
    let cfg = VortexConfig::new(vec![1.5], vec![Point::ORIGIN]);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for eps in [0.05, 1e-2, 1e-3, 1e-4, 1e-6] {
        let scale = ScaleParams::new(eps, 2.0).unwrap();
        let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()).unwrap();
        let dev = (par.a[0] - 1.5).abs();
        assert!(par.s[0] < last.0 && dev < last.1);
        last = (par.s[0], dev);
    }
}

#[test]
fn symmetric_pair_gives_symmetric_field() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = still(&d);
    let prof = solve_profile(2.0, 1e-10).unwrap();
    let cfg = VortexConfig::new(vec![1.0, 1.0], vec![Point::new(0.3, 0.0), Point::new(-0.3, 0.0)]);
    let scale = ScaleParams::new(0.02, 2.0).unwrap();
    let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()).unwrap();
    assert!((par.s[0] - par.s[1]).abs() < 1e-12 * par.s[0]);
    assert!((par.a[0] - par.a[1]).abs() < 1e-12);
    let field = assemble_ansatz(&ev, &cfg, &par, &scale, &prof, &d.grid).unwrap();
    let g = d.grid;
    let mut worst: f64 = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            let mirror = g.index(g.nx - 1 - i, j);
            if d.interior[k] && d.interior[mirror] {
                worst = worst.max((field.values[k] - field.values[mirror]).abs());
            }
        }
    }
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn ansatz_vanishes_on_the_boundary() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = still(&d);
    let prof: ProfileSolution = solve_profile(2.0, 1e-10).unwrap();
    let cfg = VortexConfig::new(vec![1.0, 0.5], vec![Point::new(0.4, 0.1), Point::new(-0.2, -0.3)]);
    let scale = ScaleParams::new(1e-3, 2.0).unwrap();
    let par = solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()).unwrap();
    let ans = Ansatz {
        ev: &ev,
        cfg: &cfg,
        params: &par,
        scale,
        profile: &prof,
    };
    let peak = ans.value(cfg.z[0]).unwrap();
    for k in 0..64 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
        let v = ans.value(Point::polar(1.0 - 1e-12, t)).unwrap();
        assert!(v.abs() < 1e-9 * peak, "{t}: {v:e}");
    }
}

#[test]
fn strict_mode_forbids_bracket_extension() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = still(&d);
    let prof = solve_profile(2.0, 1e-10).unwrap();
    let cfg = VortexConfig::new(vec![1.0], vec![Point::ORIGIN]);
    let scale = ScaleParams::new(0.1, 2.0).unwrap();
    let loose = solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()).unwrap();
    assert!(loose.bracket_extended[0] && !loose.in_bracket[0]);
    let strict = AnsatzOptions {
        strict: true,
        ..opts()
    };
    let e = solve_params(&ev, &flow, &cfg, &scale, &prof, &strict).unwrap_err();
    assert_eq!(e.code(), ErrorCode::BracketSign);
    let small = ScaleParams::new(1e-4, 2.0).unwrap();
    let par = solve_params(&ev, &flow, &cfg, &small, &prof, &strict).unwrap();
    assert!(par.in_bracket[0] && par.a_in_range[0]);
}

#[test]
fn core_near_wall_is_rejected() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = still(&d);
    let prof = solve_profile(2.0, 1e-10).unwrap();
    let cfg = VortexConfig::new(vec![1.0], vec![Point::new(0.85, 0.0)]);
    let scale = ScaleParams::new(0.1, 2.0).unwrap();
    let code = match solve_params(&ev, &flow, &cfg, &scale, &prof, &opts()) {
        Err(e) => e.code(),
        Ok(par) => assemble_ansatz(&ev, &cfg, &par, &scale, &prof, &d.grid).unwrap_err().code(),
    };
    assert!(matches!(code, ErrorCode::BracketSign | ErrorCode::CoreIntersectsBoundary), "{code:?}");
}
