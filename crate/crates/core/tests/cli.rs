use seizureformer::cli::main_with_args;
use std::path::Path;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["seizureformer"];
    full.extend_from_slice(args);
    let code = main_with_args(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    assert_eq!(run(&["synth", "--seed", "7", "--days", "300", "--out", p(&a)]).0, 0);
    assert_eq!(run(&["synth", "--seed", "7", "--days", "300", "--out", p(&b)]).0, 0);
    assert_eq!(run(&["synth", "--seed", "8", "--days", "300", "--out", p(&c)]).0, 0);
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 301);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    assert_eq!(run(&["synth", "--seed", "1", "--out", p(&good)]).0, 0);

    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["synth", "--days", "10", "--out", p(&dir.path().join("x.csv"))]).0, 1);
    assert_eq!(run(&["--set", "bogus=1", "gradcheck"]).0, 1);
    let (code, _, err) = run(&["train", "--data", p(&good), "--horizon", "5"]);
    assert_eq!(code, 1);
    assert!(err.contains("1,3,7,14"), "{err}");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "date,ab_ch1,ab_ch2,le_count\n2020-01-01,1,2,x\n").unwrap();
    assert_eq!(run(&["export-plot", "--data", p(&bad), "--out", p(&dir.path().join("o.csv"))]).0, 2);
    assert_eq!(run(&["export-plot", "--data", p(&dir.path().join("missing.csv")), "--out", "o.csv"]).0, 2);

    assert_eq!(run(&["gradcheck", "--inject-fault", "conv2d:1.5"]).0, 3);
}

#[test]
fn gradcheck_reports_every_check() {
    let (code, out, _) = run(&["gradcheck"]);
    assert_eq!(code, 0);
    assert!(out.lines().filter(|l| l.ends_with("PASS")).count() >= 31, "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn export_plot_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.csv");
    let out = dir.path().join("plot.csv");
    assert_eq!(run(&["synth", "--seed", "2", "--days", "200", "--out", p(&data)]).0, 0);
    assert_eq!(run(&["export-plot", "--data", p(&data), "--out", p(&out)]).0, 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("date,z_ch1,z_ch2,risk\n"));
    assert_eq!(csv.lines().count(), 201);
    assert!(std::fs::read_to_string(out.with_extension("svg")).unwrap().contains("<polyline"));
}

#[test]
fn train_manifest_replays_and_eval_reads_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.csv");
    let (first, second) = (dir.path().join("r1"), dir.path().join("r2"));
    assert_eq!(run(&["synth", "--seed", "3", "--days", "400", "--out", p(&data)]).0, 0);
    let (code, _, err) = run(&[
        "--set", "max_epochs=4", "--set", "embed_dim=8", "train", "--data", p(&data), "--horizon", "1", "--ablate",
        "se", "--out", p(&first),
    ]);
    assert_eq!(code, 0, "{err}");
    let manifest = std::fs::read_to_string(first.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.embed_dim=8"));
    assert!(manifest.contains("config.use_se=false"));
    assert!(manifest.contains("run.data_sha256="));

    let replay = first.join("manifest.txt");
    let (code, _, err) = run(&["--config", p(&replay), "train", "--data", p(&data), "--horizon", "1", "--out", p(&second)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        std::fs::read(first.join("checkpoint.txt")).unwrap(),
        std::fs::read(second.join("checkpoint.txt")).unwrap()
    );

    let (code, out, err) =
        run(&["eval", "--checkpoint", p(&first.join("checkpoint.txt")), "--data", p(&data), "--horizon", "1"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("split,roc_auc,pr_auc,samples"), "{out}");
    assert_eq!(out.lines().count(), 4);
}
