//! Compares the root-scan solver with the brute-force grid oracle.

use roteval::pipeline::cross_check;
use roteval::reliability::{forward, SolveOptions, StatTriple};

fn main() {
    let resolution = 400;
    let cases = [
        ("planted", forward(0.7, 0.95, 0.3).unwrap()),
        ("low knowledge", forward(0.2, 0.8, 0.1).unwrap()),
        ("no structure", StatTriple::new(0.0625, 0.5, 0.0625)),
        ("off the model", StatTriple::new(0.4, 0.6, 0.35)),
    ];
    for (name, stats) in cases {
        let row = cross_check(name, stats, resolution, &SolveOptions::default()).unwrap();
        println!(
            "{name:<14} solver {:<12} oracle {:<12} gap {:<10} step {:.4} agree {:?}",
            row.solver.map_or("-".to_string(), |c| c.to_string()),
            format!("{:?}", row.oracle),
            row.max_diff.map_or("-".into(), |d| format!("{d:.2e}")),
            row.grid_step,
            row.agree
        );
    }
}
