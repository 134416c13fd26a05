use std::path::{Path, PathBuf};
use std::process::Command;

use image::{GenericImageView, Rgb, RgbImage};
use roteval::dataset::{Orientation, QuestionSet, TaskKind};
use roteval::pipeline::simulate::{synthetic_manifest, SimulatedResponder};
use roteval::pipeline::{
    cmd_aggregate, cmd_collect, cmd_report, cmd_rotate, cmd_score, cmd_solve, cmd_verify, files,
    load_realized, EndpointDescriptor, RunConfig,
};
use roteval::reliability::ReliabilityParams;

fn write_manifest(dir: &Path, set: &QuestionSet) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("manifest.jsonl");
    set.write(&path).unwrap();
    path
}

/// Runs every stage with a simulated model and returns the config.
fn run_all(dir: &Path, set: &QuestionSet, seed: u64) -> RunConfig {
    let manifest = write_manifest(dir, set);
    let mut cfg = RunConfig::new(manifest, dir.join("out"));
    cfg.seed = seed;
    cfg.endpoint = Some(EndpointDescriptor::new("http://unused.invalid", "sim"));
    cmd_rotate(&cfg).unwrap();
    let responder = SimulatedResponder::new(ReliabilityParams::new(0.7, 0.9, 0.3), seed);
    let collected = cmd_collect(&cfg, Some(&responder)).unwrap();
    assert!(collected.failures.is_empty());
    cmd_score(&cfg).unwrap();
    cmd_aggregate(&cfg).unwrap();
    cmd_solve(&cfg).unwrap();
    cmd_report(&cfg).unwrap();
    cfg
}

fn read(cfg: &RunConfig, name: &str) -> Vec<u8> {
    std::fs::read(cfg.out(name)).unwrap()
}

#[test]
fn stages_produce_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let set = synthetic_manifest(400, 2);
    let cfg = run_all(dir.path(), &set, 5);

    for phi in Orientation::ALL {
        let (_, realized) = load_realized(&cfg.out(&files::realized(phi))).unwrap();
        assert_eq!(realized.len(), 400);
        assert!(realized.iter().all(|q| q.phi == phi && q.shuffle_seed == 5));
    }
    let report = String::from_utf8(read(&cfg, files::REPORT_CSV)).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert!(lines[0].starts_with("group,n,RE,VE0,VEbar,MA,delta,theta,r,g,a_adj,classification"));
    // ten categories, the headline average and the other average
    assert_eq!(lines.len(), 1 + 10 + 2);
    assert!(lines.iter().any(|l| l.starts_with("overall,400,")));
    assert!(lines.iter().any(|l| l.starts_with("overall_micro,400,")));

    let run = String::from_utf8(read(&cfg, files::RUN)).unwrap();
    assert!(run.contains("seed = 5"));
    let txt = String::from_utf8(read(&cfg, files::REPORT_TXT)).unwrap();
    assert!(txt.starts_with("seed: 5\n"));

    let verify = cmd_verify(&cfg, 200).unwrap();
    assert_eq!(verify.len(), 12);
}

#[test]
fn rerun_is_byte_identical() {
    let set = synthetic_manifest(120, 8);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = run_all(a.path(), &set, 21);
    let cb = run_all(b.path(), &set, 21);
    let mut names: Vec<String> = Orientation::ALL
        .iter()
        .map(|&p| files::realized(p))
        .collect();
    names.extend(
        [
            files::RESPONSES,
            files::OUTCOMES,
            files::AGGREGATION,
            files::SOLVE,
            files::REPORT_CSV,
            files::REPORT_TXT,
        ]
        .map(String::from),
    );
    for name in names {
        assert_eq!(read(&ca, &name), read(&cb, &name), "{name} differs");
    }
}

#[test]
fn different_seed_changes_choice_order_only() {
    let set = synthetic_manifest(60, 8);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = RunConfig::new(write_manifest(a.path(), &set), a.path().join("out"));
    let mut cb = RunConfig::new(write_manifest(b.path(), &set), b.path().join("out"));
    ca.seed = 1;
    cb.seed = 2;
    cmd_rotate(&ca).unwrap();
    cmd_rotate(&cb).unwrap();
    let (_, qa) = load_realized(&ca.out(&files::realized(Orientation::Deg90))).unwrap();
    let (_, qb) = load_realized(&cb.out(&files::realized(Orientation::Deg90))).unwrap();
    assert!(qa
        .iter()
        .zip(&qb)
        .any(|(x, y)| x.rendered_choices != y.rendered_choices));
    for (x, y) in qa.iter().zip(&qb) {
        assert_eq!(x.rendered_text, y.rendered_text);
        assert_eq!(x.correct_choice(), y.correct_choice());
        assert_eq!(x.gt_box, y.gt_box);
    }
}

#[test]
fn empty_manifest_gives_four_empty_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(&manifest, "").unwrap();
    let cfg = RunConfig::new(&manifest, dir.path().join("out"));
    let summary = cmd_rotate(&cfg).unwrap();
    assert_eq!(summary.files.len(), 4);
    assert_eq!(summary.warnings.len(), 1);
    for f in &summary.files {
        assert_eq!(std::fs::read_to_string(f).unwrap(), "");
    }
}

#[test]
fn images_are_quarter_turned() {
    let dir = tempfile::tempdir().unwrap();
    let img_dir = dir.path().join("img");
    std::fs::create_dir_all(&img_dir).unwrap();
    // 3 wide, 2 tall, red marker in the top-left pixel
    let mut img = RgbImage::from_pixel(3, 2, Rgb([0, 0, 0]));
    img.put_pixel(0, 0, Rgb([255, 0, 0]));
    img.save(img_dir.join("syn000000.png")).unwrap();

    let set = synthetic_manifest(2, 4);
    let cfg = RunConfig::new(write_manifest(dir.path(), &set), dir.path().join("out"));
    let summary = cmd_rotate(&cfg).unwrap();
    assert_eq!(summary.images_written, 4);
    assert_eq!(
        summary.images_missing,
        vec!["img/syn000001.png".to_string()]
    );

    let (_, realized) = load_realized(&cfg.out(&files::realized(Orientation::Deg90))).unwrap();
    assert_eq!(realized[0].image_ref, "images/090/img/syn000000.png");
    assert_eq!(realized[1].image_ref, "img/syn000001.png");

    let red = |phi: &str| {
        let img = image::open(cfg.out(&format!("images/{phi}/img/syn000000.png"))).unwrap();
        let (w, h) = img.dimensions();
        let pos = img
            .to_rgb8()
            .enumerate_pixels()
            .find(|(_, _, p)| p.0 == [255, 0, 0])
            .map(|(x, y, _)| (x, y))
            .unwrap();
        ((w, h), pos)
    };
    // clockwise turns carry the top-left corner round to top-right, bottom-right, bottom-left
    assert_eq!(red("000"), ((3, 2), (0, 0)));
    assert_eq!(red("090"), ((2, 3), (1, 0)));
    assert_eq!(red("180"), ((3, 2), (2, 1)));
    assert_eq!(red("270"), ((2, 3), (0, 2)));
}

#[test]
fn grounding_questions_report_iou() {
    let dir = tempfile::tempdir().unwrap();
    let set = synthetic_manifest(100, 3);
    let cfg = run_all(dir.path(), &set, 9);
    let outcomes = roteval::pipeline::read_outcomes(&cfg.out(files::OUTCOMES)).unwrap();
    let vg: Vec<_> = outcomes
        .iter()
        .filter(|o| set.get(&o.question_id).unwrap().task_kind == TaskKind::Vg)
        .collect();
    assert!(!vg.is_empty());
    for o in vg {
        let iou = o.iou.unwrap();
        assert_eq!(o.correct, iou == 1.0, "{o:?}");
    }
}

#[test]
fn cli_runs_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let set = synthetic_manifest(80, 6);
    // answers produced up front, then fed in as a responses file
    let prepared = run_all(&dir.path().join("prep"), &set, 3);
    let manifest = write_manifest(dir.path(), &set);
    let out = dir.path().join("cli");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "manifest = {:?}\nresponses = {:?}\nseed = 3\noutput_dir = {:?}\n",
            manifest,
            prepared.out(files::RESPONSES),
            out
        ),
    )
    .unwrap();

    let bin = env!("CARGO_BIN_EXE_roteval");
    for sub in ["rotate", "score", "aggregate", "solve", "report"] {
        let run = Command::new(bin)
            .args([sub, "--config", config.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(
            run.status.success(),
            "{sub} failed: {}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    let verify = Command::new(bin)
        .args([
            "verify",
            "--config",
            config.to_str().unwrap(),
            "--resolution",
            "150",
        ])
        .output()
        .unwrap();
    assert!(verify.status.code().is_some());
    assert!(String::from_utf8_lossy(&verify.stdout).contains("overall"));

    // collect refuses to run without an endpoint
    let collect = Command::new(bin)
        .args(["collect", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!collect.status.success());

    assert_eq!(
        std::fs::read(out.join(files::REPORT_CSV)).unwrap(),
        read(&prepared, files::REPORT_CSV)
    );
}
