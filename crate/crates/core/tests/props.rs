use std::f64::consts::PI;
use std::io::Cursor;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortex_core::ansatz::ScaleParams;
use vortex_core::domain::{make_domain, Domain, Shape};
use vortex_core::grid::{FieldKind, GridField};
use vortex_core::potential::{solve_background, BackgroundFlow, FlowPreset, PotentialEvaluator};
use vortex_core::profile::{eval_profile, solve_profile, ProfileSolution};
use vortex_core::routh::{eval_phi, eval_w, VortexConfig};
use vortex_core::Point;

struct Disk {
    d: Arc<Domain>,
    ev: PotentialEvaluator,
    flow: BackgroundFlow,
    still: BackgroundFlow,
}

fn disk() -> &'static Disk {
    static CELL: OnceLock<Disk> = OnceLock::new();
    CELL.get_or_init(|| {
        let d = Arc::new(make_domain(Shape::unit_disk(), 32).unwrap());
        let flow = solve_background(&d, &FlowPreset::Uniform { u: 0.2, v: -0.1 }.samples(&d)).unwrap();
        let still = solve_background(&d, &FlowPreset::None.samples(&d)).unwrap();
        Disk {
            ev: PotentialEvaluator::new(d.clone()),
            d,
            flow,
            still,
        }
    })
}

fn p2() -> &'static ProfileSolution {
    static CELL: OnceLock<ProfileSolution> = OnceLock::new();
    CELL.get_or_init(|| solve_profile(2.0, 1e-10).unwrap())
}

fn inside(r: f64) -> impl Strategy<Value = Point> {
    (0.0..r, 0.0..2.0 * PI).prop_map(|(a, t)| Point::polar(a, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_is_symmetric(x in inside(0.9), y in inside(0.9)) {
        prop_assume!(x.dist(y) > 1e-3);
        let ev = &disk().ev;
        let (a, b) = (ev.green(x, y).unwrap(), ev.green(y, x).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        prop_assert!(a > 0.0);
    }

    #[test]
    fn g_bar_is_scaled_green(x in inside(0.9), z in inside(0.9)) {
        prop_assume!(x.dist(z) > 1e-3);
        let ev = &disk().ev;
        // ln(R/|x - z|) - (ln R + 2π h) = 2π G
        let gb = ev.g_bar(x, z).unwrap();
        let g = ev.green(x, z).unwrap();
        prop_assert!((gb - 2.0 * PI * g).abs() < 1e-11 * (1.0 + gb.abs()));
    }

    #[test]
    fn phi_plus_w_is_fixed_by_strengths(
        z in prop::collection::vec(inside(0.8), 1..4),
        k in prop::collection::vec(0.3..3.0f64, 3),
    ) {
        let m = z.len();
        prop_assume!((0..m).all(|i| (0..i).all(|j| z[i].dist(z[j]) > 0.15)));
        let s = disk();
        let cfg = VortexConfig::new(k[..m].to_vec(), z);
        let lhs = eval_phi(&s.ev, &s.flow, &cfg).unwrap() + 4.0 * PI * PI * eval_w(&s.ev, &s.flow, &cfg).unwrap();
        let rhs: f64 = cfg.kappa.iter().map(|k| PI * k * k * s.ev.enclosing_radius().ln()).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn grid_csv_round_trips(seed in any::<u64>(), scale in -30i32..30) {
        let d = &disk().d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = GridField::zeros(d.grid, d.interior.clone(), FieldKind::U);
        for (v, inside) in f.values.iter_mut().zip(&d.interior) {
            if *inside {
                *v = rng.gen_range(-1.0..1.0) * 2f64.powi(scale);
            }
        }
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridField::read_csv(Cursor::new(buf), FieldKind::U).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn delta_grows_with_eps(a in 1e-8..0.3f64, b in 1e-8..0.3f64, p in 1.1..5.0f64) {
        prop_assume!(a < b);
        let (sa, sb) = (ScaleParams::new(a, p).unwrap(), ScaleParams::new(b, p).unwrap());
        prop_assert!(sa.delta < sb.delta);
        let ratio = (2.0 * PI / a.ln().abs()).powf(0.5 * (p - 1.0));
        prop_assert!((sa.delta / a - ratio).abs() < 1e-12 * ratio);
        prop_assert!((sa.w_to_u() * 2.0 * PI - a.ln().abs()).abs() < 1e-12 * a.ln().abs());
    }

    #[test]
    fn profile_decreases_and_stays_positive(r in 0.0..1.0f64, t in 0.0..1.0f64) {
        let sol = p2();
        let (lo, hi) = (r.min(t), r.max(t));
        prop_assume!(hi - lo > 1e-9);
        let (a, da) = eval_profile(sol, lo);
        let (b, _) = eval_profile(sol, hi);
        prop_assert!(a > b && b >= -1e-12);
        prop_assert!(da <= 1e-12);
    }

    #[test]
    fn rotating_the_disk_leaves_w_unchanged(
        z in prop::collection::vec(inside(0.8), 2..4),
        theta in 0.0..2.0 * PI,
    ) {
        let m = z.len();
        prop_assume!((0..m).all(|i| (0..i).all(|j| z[i].dist(z[j]) > 0.15)));
        let s = disk();
        let cfg = VortexConfig::new(vec![1.0; m], z.clone());
        let turned = cfg.with_positions(z.iter().map(|p| p.rotate(theta)).collect());
        let (a, b) = (eval_w(&s.ev, &s.still, &cfg).unwrap(), eval_w(&s.ev, &s.still, &turned).unwrap());
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }
}
