use laguerre_lab::ensemble::{eigenvalues, gram, rng_for, sample_entries, SigmaSpectrum};
use laguerre_lab::limit_density::{density, Measure};
use laguerre_lab::mc_stats::{Unfolder, Unfolding};
use laguerre_lab::saddle_contour::SaddleEquation;
use laguerre_lab::sine_stats::{cluster_det, gap_probability};
use proptest::prelude::*;

fn taus() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.3f64..3.0, 2..24)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn tracked_root_solves_equation(taus in taus(), c in 1.2f64..5.0, u in 0.02f64..0.98) {
        let eq = SaddleEquation::from_taus(&taus, c).unwrap();
        let iv = eq.bulk_lambda_intervals();
        let (lo, hi) = iv[iv.len() - 1];
        let lambda = lo + u * (hi - lo);
        let z = eq.root_at(lambda).unwrap();
        prop_assert!(z.im >= 0.0);
        prop_assert!(eq.residual(z, lambda) <= 1e-10);
        if z.im > 1e-6 {
            prop_assert!(eq.imaginary_identity_residual(z) <= 1e-9);
            prop_assert!((c - 1.0) * z.im * z.im <= z.re * z.re + 1e-12);
        }
    }

    #[test]
    fn density_is_nonnegative(t1 in 0.3f64..3.0, t2 in 0.3f64..3.0, p in 0.05f64..0.95, c in 1.2f64..4.0, l in 0.01f64..12.0) {
        let m = Measure::two_point(t1, t2, p).unwrap();
        prop_assert!(density(l, &m, c).unwrap() >= 0.0);
    }

    #[test]
    fn measure_mass_is_additive(locs in prop::collection::vec(0.1f64..5.0, 1..30), a in 0.0f64..5.0, w in 0.0f64..3.0, x in 0.0f64..1.0) {
        let m = Measure::empirical(&locs).unwrap();
        let b = a + w;
        let mid = a + x * w;
        let split = m.mass(a, mid) + m.mass(mid, b);
        let shared = if locs.contains(&mid) { m.mass(mid, mid) } else { 0.0 };
        prop_assert!((m.mass(a, b) - (split - shared)).abs() < 1e-12);
        prop_assert!(m.mass(0.0, 10.0) > 1.0 - 1e-12);
    }

    #[test]
    fn gap_probability_is_a_translation_invariant_probability(a in -5.0f64..5.0, s in 0.0f64..2.5, shift in -10.0f64..10.0) {
        let e = gap_probability(a, a + s, 16).unwrap().value;
        let moved = gap_probability(a + shift, a + s + shift, 16).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((e - moved).abs() < 1e-10);
        let longer = gap_probability(a, a + s + 0.1, 16).unwrap().value;
        prop_assert!(longer <= e + 1e-12);
    }

    #[test]
    fn two_point_cluster_in_unit_interval(x in -20.0f64..20.0, y in -20.0f64..20.0) {
        let d = cluster_det(&[x, y]);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
    }

    #[test]
    fn gram_spectrum_is_psd_with_trace(n in 1usize..12, extra in 1usize..10, seed in any::<u64>(), ts in prop::collection::vec(0.2f64..4.0, 12)) {
        let m = n + extra;
        let sigma = SigmaSpectrum::new(ts[..n].to_vec()).unwrap();
        let a = sample_entries(n, m, &mut rng_for(seed, 0));
        let h = gram(a.as_ref(), &sigma).unwrap();
        let eig = eigenvalues(h.as_ref()).unwrap();
        let trace: f64 = (0..n).map(|i| h[(i, i)].re).sum();
        prop_assert!(eig[0] >= -1e-12 * trace.max(1.0));
        prop_assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((eig.iter().sum::<f64>() - trace).abs() <= 1e-10 * trace.max(1.0));
    }

    #[test]
    fn unfolding_is_increasing(u in 0.2f64..0.8, d1 in -0.05f64..0.05, d2 in -0.05f64..0.05) {
        let taus = vec![1.0; 100];
        let l0 = 0.3 + 2.0 * u;
        let unf = Unfolder::new(&taus, 200, l0, Unfolding::Integrated, 1e3).unwrap();
        let (a, b) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assume!(b - a > 1e-9);
        let (xa, xb) = (unf.xi(l0 + a).unwrap(), unf.xi(l0 + b).unwrap());
        prop_assert!(xa < xb);
    }
}
