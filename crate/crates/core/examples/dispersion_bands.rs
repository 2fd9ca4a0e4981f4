//! Band structure, wavefront speeds and crossing classification for the two
//! waveplate coins, plus the closed-form split-step walk.

use loopwalk::dispersion::{band_structure, classify_crossings, split_step_bands, wavefront_speeds, CrossingKind, SplitStepParams, DEFAULT_GRID, DEFAULT_MERGE_TOL};
use loopwalk::linalg::c64;
use loopwalk::presets;

fn main() {
    for (name, setting) in [("level crossings", presets::crossing_bands()), ("avoided crossings", presets::avoided_crossing_bands())] {
        let spec = band_structure(&setting.coin(), DEFAULT_GRID).unwrap();
        let fronts = wavefront_speeds(&spec, DEFAULT_MERGE_TOL);
        println!("{name}");
        for c in &fronts.speeds {
            println!("  wavefront speed {:+.4} ({} inflections)", c.speed, c.multiplicity);
        }
        for g in classify_crossings(&spec, 1e-9) {
            let kind = if g.kind == CrossingKind::Crossing { "crossing" } else { "avoided" };
            println!("  branches {:?} at k = {:+.4}: gap {:.2e} ({kind})", g.branches, g.k, g.gap);
        }
    }

    let s = 0.6f64;
    let c = (1.0 - s * s).sqrt();
    let p = SplitStepParams::from_coins(c64(c, 0.0), c64(s, 0.0), c64(c, 0.3), c64((s * s - 0.09).sqrt(), 0.0)).unwrap();
    let bands = split_step_bands(p);
    println!("\nsplit-step walk ũ = {:.4}, ṽ = {:.4}", p.u_tilde, p.v_tilde);
    println!("  inflection points {:.4?}", bands.inflection_points());
    println!("  wavefront speeds {:.4?}", bands.wavefront_speeds(1e-9));
}
