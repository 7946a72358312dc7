use std::f64::consts::TAU;

use circssm::circ::{convert, split_turns, to_unit, unwrap, wrap, wrapped_normal_logpdf, Angle, AngleUnit};
use circssm::gp::{kernel, KernelMatrices, TimeAnglePoint};
use circssm::inference::{hpd_circular, PosteriorSamples};
use circssm::io::RunConfig;
use circssm::mle::anneal_accept;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = Angle> {
    (0.0..TAU).prop_map(|x| Angle::new(x).unwrap())
}

fn point() -> impl Strategy<Value = TimeAnglePoint> {
    (-20.0..20.0f64, angle()).prop_map(|(t, z)| TimeAnglePoint::new(t, z))
}

proptest! {
    #[test]
    fn wrap_lands_in_range(x in -1e6..1e6f64) {
        let a = wrap(x).unwrap().radians();
        prop_assert!((0.0..TAU).contains(&a));
        let d = (a - x).rem_euclid(TAU);
        prop_assert!(d < 1e-6 || TAU - d < 1e-6);
    }

    #[test]
    fn split_turns_reassembles(x in -1e4..1e4f64) {
        let (a, k) = split_turns(x);
        prop_assert!((0.0..TAU).contains(&a.radians()));
        prop_assert!((unwrap(a, k) - x).abs() < 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn unit_round_trip(a in angle(), u in prop_oneof![Just(AngleUnit::Radians), Just(AngleUnit::Degrees), Just(AngleUnit::Clock24)]) {
        let back = convert(to_unit(a, u), u).unwrap().radians();
        let d = (back - a.radians()).abs();
        prop_assert!(d < 1e-12 || (TAU - d) < 1e-12);
    }

    #[test]
    fn kernel_symmetric_and_bounded(p in point(), q in point(), sigma in 0.05..3.0f64) {
        let k = kernel(p, q, sigma);
        prop_assert_eq!(k, kernel(q, p, sigma));
        prop_assert!(k.abs() <= 1.0);
        prop_assert!((kernel(p, p, sigma) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_gram_is_psd(pts in prop::collection::vec(point(), 1..12), sigma in 0.05..3.0f64) {
        let km = KernelMatrices::build(&pts, sigma, 1e-10).unwrap();
        let eig = SymmetricEigen::new(km.a().clone()).eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min > -1e-9 * pts.len() as f64, "min eigenvalue {}", min);
    }

    #[test]
    fn hpd_covers_its_mass(
        raw in prop::collection::vec(0.0..TAU, 100..600),
        mass in 0.05..0.99f64,
        bins in 2usize..400,
    ) {
        let draws: Vec<Angle> = raw.into_iter().map(|x| Angle::new(x).unwrap()).collect();
        let r = hpd_circular(&draws, mass, bins).unwrap();
        prop_assert!(r.covered_mass >= mass - 1e-12);
        prop_assert!(r.measure() <= 1.0 + 1e-12);
        for a in &r.intervals {
            prop_assert!((0.0..=TAU).contains(&a.lo) && (0.0..=TAU).contains(&a.hi));
        }
    }

    #[test]
    fn anneal_accept_is_monotone(
        d1 in -50.0..5.0f64,
        d2 in -50.0..5.0f64,
        temp in 1e-3..100.0f64,
        u in 0.0..1.0f64,
    ) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        // a better move is accepted whenever a worse one is
        if anneal_accept(lo, temp, u) {
            prop_assert!(anneal_accept(hi, temp, u));
        }
        prop_assert!(anneal_accept(hi.abs(), temp, u));
    }

    #[test]
    fn config_text_round_trip(
        seed in any::<u64>(),
        sf in 1e-3..1e3f64,
        se in 1e-3..1e3f64,
        n_iter in 1usize..100_000,
        grid in 1usize..200,
        col in "[a-z][a-z0-9_]{0,8}",
    ) {
        let mut c = RunConfig::default().with_seed(seed);
        c.variances.sigma_f = sf;
        c.variances.sigma_eps = se;
        c.chain.n_iter = n_iter;
        c.chain.burn_in = n_iter / 2;
        c.grid_size = grid;
        c.column = col;
        let back = RunConfig::parse(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn wrapped_normal_is_periodic_in_mean(theta in angle(), mu in -20.0..20.0f64, s2 in 0.01..50.0f64, k in -3i32..3) {
        let a = wrapped_normal_logpdf(theta, mu, s2).unwrap();
        let b = wrapped_normal_logpdf(theta, mu + TAU * k as f64, s2).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn samples_csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e12..1e12f64, 3), 0..30)) {
        let mut s = PosteriorSamples::new(vec!["x_1".into(), "gstar".into(), "sigma_eps".into()]);
        for r in &rows {
            s.push_row(r).unwrap();
        }
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = PosteriorSamples::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.names(), s.names());
        for n in s.names() {
            prop_assert_eq!(back.column(n), s.column(n));
        }
    }
}
