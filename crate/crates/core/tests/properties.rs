use proptest::prelude::*;
use wpcn_core::*;

fn consts(d1: f64, d2: f64) -> ConstantsRho {
    let p = SystemParams::default();
    let g = gains_from_geometry(&Geometry::collinear(d1, d2).unwrap(), &p).unwrap();
    ConstantsRho::new(&p, &g)
}

/// (time, other) pairs in the ranges the solver visits: times in [0, 1],
/// energies up to the largest phase-1 harvest at 2 m.
fn pair() -> impl Strategy<Value = (f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64)
}

fn energy_scale() -> f64 {
    let p = SystemParams::default();
    p.eta * p.p1 * channel_gain(2.0, &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rates_are_midpoint_concave(
        d1 in 6.0..10.0f64,
        d2 in 2.0..5.0f64,
        a in pair(),
        b in pair(),
    ) {
        let c = consts(d1, d2);
        let e = energy_scale();
        let mid = |x: (f64, f64), y: (f64, f64)| ((x.0 + y.0) / 2.0, (x.1 + y.1) / 2.0);
        let m = mid(a, b);
        let checks: [&dyn Fn((f64, f64)) -> f64; 4] = [
            &|(t1, t3)| rate_r12(&c, t1, t3),
            &|(t1, t3)| rate_r13(&c, t1, t3),
            &|(t, x)| rate_relay(&c, t, x * e).bits,
            &|(t, x)| rate_wd2(&c, t, x * e).bits,
        ];
        for f in checks {
            let slack = f(m) - (f(a) + f(b)) / 2.0;
            prop_assert!(slack >= -1e-12, "slack {slack}");
        }
    }

    #[test]
    fn rates_nondecreasing_in_every_argument(
        t in 0.0..1.0f64,
        x in 0.0..1.0f64,
        dt in 0.0..0.5f64,
        dx in 0.0..0.5f64,
    ) {
        let c = consts(9.0, 3.0);
        let e = energy_scale();
        prop_assert!(rate_r12(&c, x + dx, t + dt) >= rate_r12(&c, x, t));
        prop_assert!(rate_r13(&c, x + dx, t + dt) >= rate_r13(&c, x, t));
        prop_assert!(rate_relay(&c, t + dt, (x + dx) * e).bits >= rate_relay(&c, t, x * e).bits);
        prop_assert!(rate_wd2(&c, t + dt, (x + dx) * e).bits >= rate_wd2(&c, t, x * e).bits);
    }

    #[test]
    fn harvest_monotone_in_gains(
        h1 in 0.0..1e-3f64,
        h2 in 0.0..1e-3f64,
        h12 in 0.0..1e-3f64,
        k in 1.0..3.0f64,
        t in 0.0..1.0f64,
    ) {
        let p = SystemParams::default();
        let lo = ChannelGains::new(h1, h2, h12).unwrap();
        let hi = ChannelGains::new(h1 * k, h2 * k, h12 * k).unwrap();
        let (a1, a2) = harvest_phase1(&p, &lo, t).unwrap();
        let (b1, b2) = harvest_phase1(&p, &hi, t).unwrap();
        prop_assert!(b1 >= a1 && b2 >= a2);
        prop_assert!(harvest_phase2(&p, &hi, t).unwrap() >= harvest_phase2(&p, &lo, t).unwrap());
    }

    #[test]
    fn perspective_matches_power_form(
        d1 in 6.0..10.0f64,
        d2 in 2.0..5.0f64,
        raw in prop::array::uniform5(0.0..1.0f64),
        share in 0.0..1.0f64,
    ) {
        let p = SystemParams::default();
        let g = gains_from_geometry(&Geometry::collinear(d1, d2).unwrap(), &p).unwrap();
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let k = p.usable_time() / total;
        let alloc = TimeAllocation {
            t1: raw[0] * k,
            t2: raw[1] * k,
            t3: raw[2] * k,
            t41: raw[3] * k,
            t42: raw[4] * k,
        };
        let budget = energy_budget(&p, &g, &alloc).unwrap();
        let split = EnergySplit { tau41: budget * share, tau42: budget * (1.0 - share) };
        let powers = recover_powers(&alloc, &split, &p, &g);
        for scheme in [SchemeKind::AbCoop] {
            let a = evaluate(&p, &g, &alloc, &split, scheme).unwrap();
            let b = wpcn_core::rates::evaluate_physical(&p, &g, &alloc, &powers, scheme).unwrap();
            for (x, y) in [(a.r1_to_wd2, b.r1_to_wd2), (a.r1_to_hap, b.r1_to_hap), (a.r1_relayed, b.r1_relayed), (a.r2, b.r2)] {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(f64::MIN_POSITIVE), "{x} vs {y}");
            }
            let c = ConstantsRho::new(&p, &g);
            let direct = alloc.t41 * (c.rho2 * split.tau41 / alloc.t41).ln_1p() / std::f64::consts::LN_2;
            prop_assert!((a.r1_relayed - direct).abs() <= 1e-12 * direct.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn ber_monotone_in_power(p1 in 0.01..10.0f64, k in 1.0..4.0f64, n in 1u32..2000) {
        let p = SystemParams { p1, nsamp: n, ..Default::default() };
        let q = SystemParams { p1: p1 * k, ..p.clone() };
        let g = gains_from_geometry(&Geometry::collinear(9.0, 3.0).unwrap(), &p).unwrap();
        prop_assert!(backscatter_ber(&q, &g).epsilon <= backscatter_ber(&p, &g).epsilon);
        let eps = backscatter_ber(&p, &g).epsilon;
        prop_assert!((0.0..=0.5).contains(&eps));
        let c = bsc_capacity(eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }
}
