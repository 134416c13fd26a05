//! Recovers (θ, r, g) from observed statistics.
//!
//! ```text
//! cargo run --example solve_reliability -- 0.8559 0.9337 0.0252
//! ```

use roteval::reliability::{forward, solve, SolveOptions, StatTriple};

fn report(label: &str, stats: StatTriple, opts: &SolveOptions) {
    print!(
        "{label:<28} RE {:.4} VE {:.4} MA {:.4}  ",
        stats.re, stats.ve_bar, stats.ma
    );
    match solve(stats, opts) {
        Ok(res) => {
            print!("{}", res.classification);
            for p in &res.solutions {
                print!(
                    "  θ {:.4} r {:.4} g {:.4} A_adj {:.4}",
                    p.theta, p.r, p.g, p.a_adj
                );
            }
            if let Some(d) = res.discriminant {
                print!("  disc {d:.2e}");
            }
            println!();
        }
        Err(e) => println!("rejected: {e}"),
    }
}

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("a number"))
        .collect();
    let strict = SolveOptions::default();
    if let [re, ve, ma] = args[..] {
        let stats = StatTriple::new(re, ve, ma);
        report("strict", stats, &strict);
        report("reconcile", stats, &SolveOptions::reconcile());
        return;
    }

    report(
        "planted (0.6, 0.9, 0.2)",
        forward(0.6, 0.9, 0.2).unwrap(),
        &strict,
    );
    report("perfect knower", StatTriple::new(0.5, 0.5, 0.5), &strict);
    report(
        "coin-flip guesser",
        StatTriple::new(0.0625, 0.5, 0.0625),
        &strict,
    );
    report(
        "below the Jensen floor",
        StatTriple::new(0.01, 0.5, 0.1),
        &strict,
    );
    let rounded = StatTriple::new(0.740, 0.864, 0.044);
    report("three-decimal table row", rounded, &strict);
    report("  same, reconciled", rounded, &SolveOptions::reconcile());
}
