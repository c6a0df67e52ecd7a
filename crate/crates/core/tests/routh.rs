use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortex_core::domain::{make_domain, Domain, Shape};
use vortex_core::potential::{solve_background, BackgroundFlow, FlowPreset, FluxSamples, PotentialEvaluator};
use vortex_core::routh::{
    eval_phi, eval_w, find_critical, grad_phi, grad_w, Classification, CriticalOptions, Objective,
    VortexConfig,
};
use vortex_core::Point;

fn disk(res: usize) -> Arc<Domain> {
    Arc::new(make_domain(Shape::unit_disk(), res).unwrap())
}

fn random_config(rng: &mut ChaCha8Rng, m: usize) -> VortexConfig {
    loop {
        let z: Vec<Point> = (0..m)
            .map(|_| Point::polar(0.8 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let ok = (0..m).all(|i| (0..i).all(|j| z[i].dist(z[j]) > 0.15));
        if ok {
            let kappa = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
            return VortexConfig::new(kappa, z);
        }
    }
}

fn identity_defect(ev: &PotentialEvaluator, flow: &BackgroundFlow, cfg: &VortexConfig) -> f64 {
    let r = ev.enclosing_radius();
    let lhs = eval_phi(ev, flow, cfg).unwrap() + 4.0 * PI * PI * eval_w(ev, flow, cfg).unwrap();
    let rhs: f64 = cfg.kappa.iter().map(|k| PI * k * k * r.ln()).sum();
    lhs - rhs
}

#[test]
fn phi_w_identity_analytic() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = solve_background(&d, &FlowPreset::Strain { c: 0.2 }.samples(&d)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in 1..=3 {
        for _ in 0..30 {
            let cfg = random_config(&mut rng, m);
            let e = identity_defect(&ev, &flow, &cfg);
            assert!(e.abs() < 1e-9, "m={m}: {e:e}");
        }
    }
}

#[test]
fn phi_w_identity_grid() {
    let d = Arc::new(
        make_domain(
            Shape::Ellipse {
                a: 1.0,
                b: 0.7,
                center: Point::ORIGIN,
            },
            96,
        )
        .unwrap(),
    );
    let ev = PotentialEvaluator::new(d.clone());
    let flow = solve_background(&d, &FluxSamples::zero(&d)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vals: Vec<f64> = (0..20)
        .map(|_| {
            let mut cfg = random_config(&mut rng, 2);
            for p in &mut cfg.z {
                p.y *= 0.6;
            }
            identity_defect(&ev, &flow, &cfg)
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
    assert!(sd < 1e-3, "{sd:e}");
}

#[test]
fn analytic_gradients_match_differences() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = solve_background(&d, &FlowPreset::Strain { c: 0.2 }.samples(&d)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let cfg = random_config(&mut rng, 2);
        let gw = grad_w(&ev, &flow, &cfg, 0.0).unwrap();
        let gp = grad_phi(&ev, &flow, &cfg, 0.0).unwrap();
        let e = 1e-6;
        for c in 0..4 {
            let shift = |s: f64| {
                let mut z = cfg.z.clone();
                if c % 2 == 0 {
                    z[c / 2].x += s;
                } else {
                    z[c / 2].y += s;
                }
                cfg.with_positions(z)
            };
            let fd = (eval_w(&ev, &flow, &shift(e)).unwrap() - eval_w(&ev, &flow, &shift(-e)).unwrap()) / (2.0 * e);
            assert!((fd - gw[c]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} {}", gw[c]);
            // Φ was differentiated from its own formula.
            assert!((gp[c] + 4.0 * PI * PI * gw[c]).abs() < 1e-8 * (1.0 + gp[c].abs()));
        }
    }
}

#[test]
fn pair_in_strain_matches_symmetric_scan() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let c = 0.2;
    let flow = solve_background(&d, &FlowPreset::Strain { c }.samples(&d)).unwrap();
    // Oracle: with z = ±(s, 0) and unit strengths,
    // W(s) = (ln((1 + s²)/(2s)) + ln(1 - s²))/2π + 2c s² + const.
    let dw = |s: f64| (2.0 * s / (1.0 + s * s) - 1.0 / s - 2.0 * s / (1.0 - s * s)) / (2.0 * PI) + 4.0 * c * s;
    let mut roots = Vec::new();
    let n = 2000;
    for k in 1..n {
        let (a, b) = (0.2 + 0.7 * (k - 1) as f64 / n as f64, 0.2 + 0.7 * k as f64 / n as f64);
        if dw(a) * dw(b) < 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if dw(lo) * dw(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    assert_eq!(roots.len(), 2, "{roots:?}");
    let cfg = VortexConfig::new(vec![1.0, 1.0], vec![Point::new(0.5, 0.0), Point::new(-0.5, 0.0)]);
    for &s in &roots {
        let seed = [Point::new(s + 0.02, 0.01), Point::new(-s + 0.01, -0.02)];
        let cp = find_critical(&ev, &flow, &cfg, &seed, &CriticalOptions::default()).unwrap();
        assert!((cp.z_star[0].x - s).abs() < 1e-8, "{:?} vs {s}", cp.z_star);
        assert!((cp.z_star[1].x + s).abs() < 1e-8);
        assert!(cp.z_star[0].y.abs() < 1e-8);
        assert!(cp.stable);
    }
}

#[test]
fn phi_and_w_share_critical_points() {
    let d = disk(64);
    let ev = PotentialEvaluator::new(d.clone());
    let flow = solve_background(&d, &FlowPreset::Strain { c: 0.2 }.samples(&d)).unwrap();
    let cfg = VortexConfig::new(vec![1.0, 1.0], vec![Point::new(0.5, 0.0), Point::new(-0.5, 0.0)]);
    let seed = [Point::new(0.52, 0.03), Point::new(-0.47, -0.01)];
    let w = find_critical(&ev, &flow, &cfg, &seed, &CriticalOptions::default()).unwrap();
    let phi_opts = CriticalOptions {
        objective: Objective::Phi,
        tol: 1e-8,
        ..Default::default()
    };
    let p = find_critical(&ev, &flow, &cfg, &seed, &phi_opts).unwrap();
    for (a, b) in w.z_star.iter().zip(&p.z_star) {
        assert!(a.dist(*b) < 1e-6, "{a:?} {b:?}");
    }
    // Φ = -4π² W + const reverses the type.
    let flip = |c: Classification| match c {
        Classification::NondegenerateMax => Classification::NondegenerateMin,
        Classification::NondegenerateMin => Classification::NondegenerateMax,
        other => other,
    };
    assert_eq!(flip(w.class), p.class);
}

#[test]
fn annulus_orbit_matches_radial_scan() {
    let d = Arc::new(
        make_domain(
            Shape::Annulus {
                inner: 0.4,
                outer: 1.0,
                center: Point::ORIGIN,
            },
            96,
        )
        .unwrap(),
    );
    let ev = PotentialEvaluator::new(d.clone());
    let flow = solve_background(&d, &FluxSamples::zero(&d)).unwrap();
    let base = VortexConfig::new(vec![1.0], vec![Point::new(0.7, 0.0)]);
    let w_at = |r: f64| eval_w(&ev, &flow, &base.with_positions(vec![Point::new(r, 0.0)])).unwrap();
    // Golden-section search on the ray.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.5, 0.9);
    let (mut c, mut e) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fe) = (w_at(c), w_at(e));
    while b - a > 1e-7 {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = w_at(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = w_at(e);
        }
    }
    let r_scan = 0.5 * (a + b);
    let w_scan = w_at(r_scan);
    let opts = CriticalOptions {
        tol: 1e-7,
        ..Default::default()
    };
    let cp = find_critical(&ev, &flow, &base, &[Point::new(0.75, 0.0)], &opts).unwrap();
    assert!(cp.rotation_orbit);
    assert!((cp.value - w_scan).abs() < 1e-6, "{} vs {w_scan}", cp.value);
    assert!((cp.z_star[0].norm() - r_scan).abs() < 5e-3, "{:?} vs {r_scan}", cp.z_star);
    assert_eq!(cp.class, Classification::NondegenerateMax);
}
