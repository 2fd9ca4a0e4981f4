//! Monte Carlo error bars for imperfect detectors and element angles, and
//! the resulting uncertainty of the equidistribution similarity.

use loopwalk::analysis::{flat_similarity, flat_similarity_error, monte_carlo_error_bars, MonteCarloConfig};
use loopwalk::graphs::{circle_program, map_sites, CircleSpec, Flavor, Start};
use loopwalk::walk::{Direction, Polarization};

fn main() {
    let spec = CircleSpec {
        num_sites: 8,
        left_end: -2,
        flavor: Flavor::HadamardLike,
        start: Start { x: -1, direction: Direction::Ccw, polarization: Polarization::V },
    };
    let (program, map) = circle_program(&spec).unwrap();
    let cfg = MonteCarloConfig { n_samples: 500, seed: 7, ..MonteCarloConfig::default() };
    let report = monte_carlo_error_bars(&spec.start.state(), &program, 12, &cfg, "circle8").unwrap();
    let sites = map_sites(&map, &report.reference);
    println!("{} samples, ±{}° angles, ±{}% efficiencies", cfg.n_samples, cfg.angle_err, 100.0 * cfg.eff_err);
    for t in [1, 5, 11] {
        let sigma = report.site_sigma(&map, t);
        let row: Vec<String> = sites.sites[t].iter().zip(&sigma).map(|(p, s)| format!("{p:.3}±{s:.3}")).collect();
        println!("step {t:>2}: {}", row.join(" "));
    }
    let odd = [1, 3, 5, 7];
    let values: Vec<f64> = odd.iter().map(|&m| sites.sites[11][m]).collect();
    let sigmas: Vec<f64> = odd.iter().map(|&m| report.site_sigma(&map, 11)[m]).collect();
    println!(
        "flat similarity at step 11: {:.4} ± {:.4}",
        flat_similarity(&values, false).unwrap(),
        flat_similarity_error(&values, &sigmas).unwrap()
    );
}
