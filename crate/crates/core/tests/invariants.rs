use loopwalk::dispersion::{band_structure_model, group_velocities, BlochModel, FourierSign};
use loopwalk::graphs::{circle_program, map_sites, CircleSpec, Flavor, Start};
use loopwalk::linalg::{c64, max_abs_diff, random_unitary, unitarity_deviation, Unitary2, Unitary4};
use loopwalk::optics::{coin_ab, coin_ll, eom_matrix, full_coin, hwp_matrix, minus_i_x, qwp_matrix, ArmSetting, CoinSetting, OpticalElement};
use loopwalk::synthesis::{factor_universal, one_trip_reconstruct, one_trip_test};
use loopwalk::walk::{apply_step, evolve, CoinProgram, Direction, Polarization, WalkerState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unitary4(seed: u64) -> Unitary4 {
    random_unitary(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn unitary2(seed: u64) -> Unitary2 {
    random_unitary(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn element() -> impl Strategy<Value = OpticalElement> {
    prop_oneof![
        (-90.0f64..90.0).prop_map(OpticalElement::qwp),
        (-90.0f64..90.0).prop_map(OpticalElement::hwp),
        (-180.0f64..180.0).prop_map(OpticalElement::eom),
    ]
}

fn setting() -> impl Strategy<Value = CoinSetting> {
    fn arm() -> impl Strategy<Value = ArmSetting> {
        (prop::collection::vec(element(), 0..3), -180.0f64..180.0).prop_map(|(e, phi)| ArmSetting::new(e, phi))
    }
    (arm(), arm(), prop::collection::vec(element(), 1..4))
        .prop_map(|(arm_a, arm_b, loop_elements)| CoinSetting { arm_a, arm_b, loop_elements })
}

fn random_state(seed: u64, width: i64) -> WalkerState {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = WalkerState::new();
    for x in -width..=width {
        s.set(x, std::array::from_fn(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
    }
    s.scaled(c64(1.0 / s.norm_sqr().sqrt(), 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn waveplates_at_45_commute_with_eom(phi in -360.0f64..360.0) {
        let e = eom_matrix(phi);
        for w in [qwp_matrix(45.0), hwp_matrix(45.0)] {
            prop_assert!(max_abs_diff(&(w.matrix() * e.matrix()), &(e.matrix() * w.matrix())) <= 1e-12);
        }
    }

    #[test]
    fn element_coins_are_unitary_and_one_trip(s in setting()) {
        let c = s.coin();
        prop_assert!(unitarity_deviation(c.matrix()) <= 1e-12);
        prop_assert!(one_trip_test(&c, 1e-9).0);
        let f = one_trip_reconstruct(&c).unwrap();
        prop_assert!(max_abs_diff(f.compose().matrix(), c.matrix()) <= 1e-9);
    }

    #[test]
    fn block_structure_is_exact(a in any::<u64>(), b in any::<u64>(), l in any::<u64>()) {
        let ab = coin_ab(&unitary2(a), &unitary2(b));
        let ll = coin_ll(&unitary2(l));
        for (i, j) in [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)] {
            prop_assert_eq!(ab.matrix()[(i, j)], c64(0.0, 0.0));
        }
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
            prop_assert_eq!(ll.matrix()[(i, j)], c64(0.0, 0.0));
        }
    }

    #[test]
    fn universal_factorization_recomposes(seed in any::<u64>()) {
        let c = unitary4(seed);
        let f = factor_universal(&c);
        prop_assert!(f.residual(&c) <= 1e-9);
        for b in f.blocks() {
            prop_assert!(unitarity_deviation(b.matrix()) <= 1e-10);
        }
    }

    #[test]
    fn norm_is_conserved(seeds in prop::collection::vec(any::<u64>(), 1..4), start in any::<u64>()) {
        let program = CoinProgram::periodic(seeds.iter().map(|&s| unitary4(s)).collect()).unwrap();
        let rec = evolve(&random_state(start, 2), &program, 50).unwrap();
        for t in 0..=50 {
            prop_assert!((rec.total(t) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn step_is_an_involution(seed in any::<u64>()) {
        let s = random_state(seed, 3);
        prop_assert!(apply_step(&apply_step(&s)).max_abs_diff(&s) <= 1e-15);
    }

    #[test]
    fn swap_arms_keep_cc_subspace(l in any::<u64>(), pol in 0usize..4) {
        let c = full_coin(&minus_i_x(), &minus_i_x(), &unitary2(l));
        let p = [Polarization::H, Polarization::V, Polarization::D, Polarization::A][pol];
        let rec = evolve(&loopwalk::walk::make_initial(Direction::Ccw, p, 0), &CoinProgram::uniform(c), 30).unwrap();
        for step in &rec.steps {
            for v in step.values() {
                prop_assert!(v[0] <= 1e-14 && v[1] <= 1e-14);
            }
        }
    }

    #[test]
    fn circles_hold_random_starts(size in prop::sample::select(vec![4usize, 8, 10, 16]), hl in any::<bool>(), seed in any::<u64>()) {
        let flavor = if hl { Flavor::HadamardLike } else { Flavor::NonMixing };
        let left = -((size / 2) as i64) / 2;
        let spec = CircleSpec { num_sites: size, left_end: left, flavor, start: Start { x: left + 1, direction: Direction::Ccw, polarization: Polarization::D } };
        let (prog, map) = circle_program(&spec).unwrap();
        // random superposition over the circle's admissible modes
        let raw = random_state(seed, size as i64);
        let mut s = WalkerState::new();
        for (x, a) in raw.iter() {
            let mut keep = [c64(0.0, 0.0); 4];
            for (d, k) in keep.iter_mut().enumerate() {
                if map.site(x, d).is_some() {
                    *k = a[d];
                }
            }
            s.set(x, keep);
        }
        let s = s.scaled(c64(1.0 / s.norm_sqr().sqrt(), 0.0));
        let sites = map_sites(&map, &evolve(&s, &prog, 25).unwrap());
        for t in 0..=25 {
            prop_assert!(sites.leakage[t] <= 1e-12);
            prop_assert!((sites.total(t) - 1.0).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fourier_sign_negates_group_velocity(seed in any::<u64>()) {
        let model = BlochModel::FlipFlop(unitary4(seed));
        let a = band_structure_model(model, 128, FourierSign::Standard).unwrap();
        let b = band_structure_model(model, 128, FourierSign::Flipped).unwrap();
        let mut sa: Vec<f64> = group_velocities(&a).concat().iter().map(|v| v.abs()).collect();
        let mut sb: Vec<f64> = group_velocities(&b).concat().iter().map(|v| v.abs()).collect();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }
}
