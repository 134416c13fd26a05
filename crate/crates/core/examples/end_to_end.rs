//! Runs every stage on a synthetic manifest answered by a simulated model
//! with known parameters, then prints the report.
//!
//! ```text
//! cargo run --release --example end_to_end -- 2000
//! ```

use roteval::pipeline::simulate::{synthetic_manifest, SimulatedResponder};
use roteval::pipeline::{
    cmd_aggregate, cmd_collect, cmd_report, cmd_rotate, cmd_score, cmd_solve, files,
    EndpointDescriptor, RunConfig,
};
use roteval::reliability::ReliabilityParams;

fn main() {
    let n = std::env::args()
        .nth(1)
        .map_or(2000, |a| a.parse().expect("a question count"));
    let planted = ReliabilityParams::new(0.6, 0.95, 0.25);
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.jsonl");
    synthetic_manifest(n, 1).write(&manifest).unwrap();

    let mut cfg = RunConfig::new(&manifest, dir.path().join("out"));
    cfg.seed = 1;
    cfg.endpoint = Some(EndpointDescriptor::new(
        "http://simulated.invalid",
        "simulated",
    ));
    cmd_rotate(&cfg).unwrap();
    cmd_collect(&cfg, Some(&SimulatedResponder::new(planted, 1))).unwrap();
    cmd_score(&cfg).unwrap();
    cmd_aggregate(&cfg).unwrap();
    cmd_solve(&cfg).unwrap();
    cmd_report(&cfg).unwrap();

    println!(
        "planted theta {} r {} g {}\n",
        planted.theta, planted.r, planted.g
    );
    print!(
        "{}",
        std::fs::read_to_string(cfg.out(files::REPORT_TXT)).unwrap()
    );
}
