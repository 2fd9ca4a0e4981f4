//! Walks on circles: equidistribution on the 8-site circle and revivals on
//! circles of several sizes.

use loopwalk::analysis::{find_revivals, site_equidistribution, RevivalKind, REVIVAL_TOL};
use loopwalk::graphs::{circle_program, map_sites, CircleSpec, Flavor, Start};
use loopwalk::walk::{evolve, Direction, Polarization};

fn run(spec: &CircleSpec, steps: usize) -> Vec<Vec<f64>> {
    let (program, map) = circle_program(spec).unwrap();
    let record = evolve(&spec.start.state(), &program, steps).unwrap();
    let sites = map_sites(&map, &record);
    assert!(sites.warnings.is_empty());
    sites.sites
}

fn main() {
    let start = |x, polarization| Start { x, direction: Direction::Ccw, polarization };
    let eight = CircleSpec { num_sites: 8, left_end: -2, flavor: Flavor::HadamardLike, start: start(-1, Polarization::V) };
    let sites = run(&eight, 24);
    println!("8-site circle, start at m = 2");
    for (t, p) in sites.iter().enumerate().take(13) {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.3}")).collect();
        println!("  step {t:>2}: {}", row.join(" "));
    }
    println!("  similarity to flat on odd sites at step 11: {:.6}", site_equidistribution(&sites[11], &[1, 3, 5, 7], false).unwrap());

    for (n, left, x, pol) in [(4, 0, 1, Polarization::D), (8, -2, -1, Polarization::V), (10, -1, 0, Polarization::V), (16, -4, 0, Polarization::V)] {
        for flavor in [Flavor::NonMixing, Flavor::HadamardLike] {
            let spec = CircleSpec { num_sites: n, left_end: left, flavor, start: start(x, pol) };
            let found = find_revivals(&run(&spec, 3 * n), REVIVAL_TOL, true).unwrap();
            let perfect: Vec<usize> = found.iter().filter(|r| r.kind == RevivalKind::Perfect).map(|r| r.step).collect();
            let shifted = found.len() - perfect.len();
            println!("{n:>2} sites, {flavor:?}: perfect revivals {perfect:?}, {shifted} shifted within {} steps", 3 * n);
        }
    }
}
