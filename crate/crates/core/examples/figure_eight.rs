//! Figure-eight graph: two circles sharing a center node.

use loopwalk::graphs::{figure_eight_program, map_sites, FigureEightSpec, Flavor};
use loopwalk::walk::evolve;

fn main() {
    for flavor in [Flavor::NonMixing, Flavor::HadamardLike] {
        let spec = FigureEightSpec { flavor, ..FigureEightSpec::default() };
        let (program, map) = figure_eight_program(&spec).unwrap();
        let record = evolve(&spec.start.state(), &program, 16).unwrap();
        let sites = map_sites(&map, &record);
        println!("{flavor:?}: {} nodes, center node {}", spec.num_nodes(), spec.center_node());
        for (t, p) in sites.sites.iter().enumerate() {
            let row: String = p.iter().map(|&v| if v > 0.5 { '#' } else if v > 0.05 { '+' } else if v > 1e-9 { '.' } else { ' ' }).collect();
            println!("  step {t:>2} |{row}| leak {:.1e}", sites.leakage[t]);
        }
    }
}
