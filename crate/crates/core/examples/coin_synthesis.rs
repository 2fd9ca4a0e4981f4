//! Single-roundtrip test, reconstruction, two-roundtrip factorization and
//! the three-step schedule for coins that need it.

use loopwalk::linalg::{max_abs_diff, RANK_REL_TOL};
use loopwalk::optics::{full_coin, h_prime};
use loopwalk::synthesis::{factor_universal, fourier_coin, grover_coin, one_trip_reconstruct, one_trip_test, su2_normalize, three_step_schedule};
use loopwalk::walk::{apply_coin, apply_step, evolve_states, make_initial, CoinProgram, Direction, Polarization};

fn main() {
    let hp = h_prime();
    let composed = full_coin(&hp, &hp, &hp);
    let (ok, w) = one_trip_test(&composed, RANK_REL_TOL);
    println!("H′ coin: one roundtrip = {ok}, singular values {:.3?} / {:.3?}", w.sigma_1, w.sigma_2);
    let f = one_trip_reconstruct(&composed).unwrap();
    println!("  reconstruction residual {:.2e}", max_abs_diff(f.compose().matrix(), composed.matrix()));

    for (name, c) in [("Grover", grover_coin()), ("Fourier", fourier_coin())] {
        let (ok, w) = one_trip_test(&c, RANK_REL_TOL);
        println!("\n{name}: one roundtrip = {ok}, singular values {:.3?} / {:.3?}", w.sigma_1, w.sigma_2);
        let u = su2_normalize(&factor_universal(&c));
        println!("  two roundtrips: branch {:?}, residual {:.2e}, phase {:.4}", u.branch, u.residual(&c), u.global_phase);

        // three roundtrips (C₁, 𝟙, C₂) act as one step of Ŝ·C
        let sched = three_step_schedule(&c);
        let init = make_initial(Direction::Ccw, Polarization::D, 0);
        let three = evolve_states(&init, &sched.program().unwrap(), 3).unwrap().pop().unwrap();
        let one = apply_step(&apply_coin(&init, &CoinProgram::uniform(c), 0).unwrap()).scaled(sched.global_phase);
        println!("  three-step schedule vs Ŝ·C: {:.2e}", three.max_abs_diff(&one));
    }
}
