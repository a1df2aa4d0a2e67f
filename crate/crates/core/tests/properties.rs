use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use splidar::crlb;
use splidar::estimators::{self, SolverConfig};
use splidar::experiments;
use splidar::model::{AcquisitionConfig, PixelScene, PulseShape, SbrConvention};
use splidar::quadrature::QuadratureConfig;
use splidar::simulator;

prop_compose! {
    fn scenes()(
        n_r in 100u64..5000,
        eta in 0.2f64..=1.0,
        energy in 0.001f64..0.05,
        sigma in 0.1f64..0.6,
        alpha in 0.1f64..2.0,
        tau in 3.0f64..7.0,
        b in 1e-5f64..2e-3,
    ) -> PixelScene {
        let acq = AcquisitionConfig::new(10.0, n_r, eta).unwrap();
        PixelScene::new(alpha, tau, b, PulseShape::new(energy, sigma).unwrap(), acq).unwrap()
    }
}

fn draw(scene: &PixelScene, m: usize, seed: u64) -> Vec<f64> {
    simulator::sample_timestamps(scene, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn estimates_respect_constraints(scene in scenes(), m in 1usize..25, seed in any::<u64>()) {
        let ts = draw(&scene, m, seed);
        let solver = SolverConfig::default();
        let a = estimators::reflectivity_mle_known_tau(&ts, scene.tau(), &scene, &solver).unwrap();
        prop_assert!(a.value >= 0.0);
        prop_assert!(estimators::reflectivity_count_mle(m, &scene).value >= 0.0);
        if let Ok(d) = estimators::depth_mle_known_alpha(&ts, scene.alpha(), &scene, scene.tau(), &solver) {
            prop_assert!(d.value > 0.0 && d.value < scene.period());
        }
        let j = estimators::joint_mle(&ts, &scene, (scene.tau(), scene.alpha()), &solver).unwrap();
        prop_assert!(j.reflectivity.value >= 0.0);
        prop_assert!(j.depth.value > 0.0 && j.depth.value < scene.period());
    }

    #[test]
    fn derivatives_match_central_differences(
        scene in scenes(),
        m in 1usize..25,
        seed in any::<u64>(),
        alpha in 0.05f64..3.0,
        tau in 1.0f64..9.0,
    ) {
        let ts = draw(&scene, m, seed);
        let ll = |a: f64, t: f64| estimators::loglik(&ts, a, t, &scene).unwrap();
        let h = 1e-6 * scene.period();
        let fd = (ll(alpha, tau + h) - ll(alpha, tau - h)) / (2.0 * h);
        let an = estimators::dloglik_dtau(&ts, alpha, tau, &scene).unwrap();
        prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{} vs {}", fd, an);
        let h = 1e-6 * alpha;
        let fd = (ll(alpha + h, tau) - ll(alpha - h, tau)) / (2.0 * h);
        let an = estimators::dloglik_dalpha(&ts, alpha, tau, &scene).unwrap();
        prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{} vs {}", fd, an);
    }

    #[test]
    fn reflectivity_derivative_decreases(scene in scenes(), m in 1usize..25, seed in any::<u64>()) {
        let ts = draw(&scene, m, seed);
        // far from every photon the decrease is below double precision
        prop_assume!(ts.iter().any(|t| (t - scene.tau()).abs() <= 5.0 * scene.pulse().width()));
        let d = |a: f64| estimators::dloglik_dalpha(&ts, a, scene.tau(), &scene).unwrap();
        prop_assert!(d(0.1) > d(1.0));
    }

    #[test]
    fn constraints_round_trip(
        level in 0.5f64..50.0,
        sbr in 0.1f64..20.0,
        alpha in 0.1f64..2.0,
        n_r in 100u64..5000,
    ) {
        let acq = AcquisitionConfig::new(10.0, n_r, 1.0).unwrap();
        let s = PixelScene::from_constraints(level, sbr, alpha, 4.0, acq, 0.2, SbrConvention::SignalEnergy).unwrap();
        prop_assert!((s.photon_level() / level - 1.0).abs() < 1e-12);
        prop_assert!((s.sbr().value() / sbr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_are_ordered(scene in scenes()) {
        let a = crlb::crlb_count(&scene);
        let b = crlb::crlb_count_sbr_form(&scene);
        prop_assert!((a / b - 1.0).abs() < 1e-12);
        let t = crlb::crlb_timestamp(&scene, &QuadratureConfig::default()).unwrap();
        prop_assert!(t.value > 0.0 && t.value < a);
        prop_assert!(crlb::cauchy_schwarz_certificate(&scene, &QuadratureConfig::default()).unwrap() >= 1.0);
    }

    #[test]
    fn mse_matches_two_pass(values in prop::collection::vec(-10.0f64..10.0, 1..200), truth in -5.0f64..5.0) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expected = var + (mean - truth).powi(2);
        let got = experiments::mse(&values, truth).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}
