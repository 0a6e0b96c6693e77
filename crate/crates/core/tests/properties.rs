use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use rfsense_core::agents::{FrameFeatures, PolicyEvaluator, PolicyNet};
use rfsense_core::baselines::tiny_config;
use rfsense_core::beamforming::{encode_pattern, mrc_weights, RadioSystem};
use rfsense_core::channel::{build_jammer_los, path_gain, Source};
use rfsense_core::mdp::{rollout, Policy};
use rfsense_core::neuralnet::pinv;
use rfsense_core::rng::{stream, sub_stream, Stream};
use rfsense_core::scene::{build_scene, distance, sample_jammer_position, sample_scenarios, ElementResponseTable};
use rfsense_core::ExperimentConfig;

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b))
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    y.min(2.0 * PI - y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenarios_match_their_labels(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut cfg = ExperimentConfig::default();
        cfg.p_occupied = p;
        cfg.n_scenarios = 20;
        let a = sample_scenarios(&cfg, &mut stream(seed, Stream::Scenarios));
        for s in &a {
            for (occ, v) in s.occupancy.iter().zip(&s.reflection) {
                prop_assert_eq!(*occ, v.norm() > 0.0);
                prop_assert!(v.norm() <= 1.0 + 1e-15);
            }
        }
        prop_assert_eq!(a, sample_scenarios(&cfg, &mut stream(seed, Stream::Scenarios)));
    }

    #[test]
    fn path_gain_phase_and_bound(m in 0usize..27, chain in 0usize..3, n in 0usize..16, i in 0usize..4) {
        let cfg = ExperimentConfig::default();
        let scene = build_scene(&cfg).unwrap();
        let table = ElementResponseTable::from_config(&cfg);
        let src = Source::transmitter(&scene, &cfg);
        let g = path_gain(&scene, &table, &src, m, chain, n, i).unwrap();
        let lambda = scene.wavelength_m;
        let d = distance(src.pos, scene.grid_centers[m]) + distance(scene.grid_centers[m], scene.element_pos[chain][n]);
        let resid = g.arg() + 2.0 * PI * d / lambda - table.r[i].arg();
        prop_assert!(wrap(resid) < 1e-6, "phase residual {}", resid);
        let d_min = scene.min_signal_distance();
        let bound = lambda * lambda * src.gain.sqrt() / ((4.0 * PI).powi(2) * d_min * d_min);
        prop_assert!(g.norm() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn jammer_direct_path_hits_one_chain(seed in any::<u64>()) {
        let cfg = ExperimentConfig::default();
        let scene = build_scene(&cfg).unwrap();
        let pos = sample_jammer_position(&scene, &mut sub_stream(seed, 0));
        let los = build_jammer_los(&scene, pos, cfg.jammer_gain_linear());
        for (c, h) in los.h.iter().enumerate() {
            prop_assert_eq!(c == scene.attacked_chain, h.norm() > 0.0);
        }
    }

    #[test]
    fn onehot_has_one_entry_per_element(configs in proptest::collection::vec(0usize..4, 1..20)) {
        let p = encode_pattern(&configs, 4).unwrap();
        let v = p.onehot();
        prop_assert_eq!(v.len(), configs.len() * 4);
        for (n, block) in v.chunks(4).enumerate() {
            prop_assert_eq!(block.iter().map(|&x| x as usize).sum::<usize>(), 1);
            prop_assert_eq!(block[configs[n]], 1);
        }
    }

    #[test]
    fn pinv_is_least_squares(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let mut rng = sub_stream(seed, 1);
        let mut draw = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(rows, cols, |_, _| draw());
        let y = DVector::from_fn(rows, |_, _| draw());
        let p = pinv(&g);
        let best = (&g * (&p * &y) - &y).norm();
        for _ in 0..50 {
            let u = DVector::from_fn(cols, |_, _| draw());
            prop_assert!(best <= (&g * u - &y).norm() + 1e-9);
        }
        let gpg = &g * &p * &g;
        prop_assert!((gpg - &g).iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn mrc_has_unit_gain(h in proptest::collection::vec(cplx(), 1..8)) {
        prop_assume!(h.iter().any(|z| z.norm() > 1e-6));
        let w = mrc_weights(&h).unwrap();
        let wh: Complex64 = w.iter().zip(&h).map(|(a, b)| a * b).sum();
        prop_assert!((wh - 1.0).norm() < 1e-12);
    }

    #[test]
    fn policy_distributions_are_proper(seed in any::<u64>()) {
        let cfg = tiny_config();
        let system = RadioSystem::from_config(&cfg).unwrap();
        let feats = FrameFeatures::from_system(&system);
        let net = PolicyNet::new(&cfg, &mut sub_stream(seed, 2));
        let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
        let mut state = net.dims.initial_state();
        let mut rng = sub_stream(seed, 3);
        let mut steps = 0;
        while !state.is_terminal() {
            let p = ev.distribution(&state);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let a = rng.random_range(0..cfg.n_states);
            ev.observe(&state, a);
            state.step_in_place(a).unwrap();
            steps += 1;
        }
        prop_assert_eq!(steps, cfg.n_frames * cfg.n_rf * cfg.n_elements);
        let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
        let t = rollout(&mut ev, net.dims.initial_state(), false, &mut sub_stream(seed, 4)).unwrap();
        prop_assert_eq!(t.actions.len(), steps);
        prop_assert!(t.log_probs.iter().all(|&l| l <= 0.0));
    }
}
