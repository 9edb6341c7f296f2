mod common;

use std::fs;

use hyperrec_cli::compare::{cmd_compare, CompareArgs, Winner};
use hyperrec_cli::evaluate::{cmd_eval, EvalArgs};
use hyperrec_cli::prep::cmd_prep;
use hyperrec_cli::sweep::{cells_per_seed, cmd_sweep};
use hyperrec_cli::train::cmd_train;
use hyperrec_core::eval::{read_report_csv, write_report_csv, EvalTarget, Protocol, ReportRow};
use hyperrec_core::models::Model;

use common::{experiment, prep_args, prepared_small, snapshot, write_synthetic};

#[test]
fn prep_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.tsv");
    write_synthetic(&raw, &common::small_config(9));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let first = cmd_prep(&prep_args(&raw, &a)).unwrap();
    let snap = snapshot(&a);
    assert_eq!(cmd_prep(&prep_args(&raw, &a)).unwrap(), first);
    assert_eq!(snapshot(&a), snap);
    cmd_prep(&prep_args(&raw, &b)).unwrap();
    assert_eq!(snapshot(&b), snap);
    for name in [
        "interactions.tsv",
        "idmap.tsv",
        "train.tsv",
        "validation.tsv",
        "test.tsv",
        "stats.txt",
        "split.txt",
    ] {
        assert!(snap.keys().any(|p| p.to_str() == Some(name)), "missing {name}");
    }
    let stats = String::from_utf8(snap[std::path::Path::new("stats.txt")].clone()).unwrap();
    assert!(stats.contains(&format!("users={}", first.users)));
}

#[test]
fn zero_epochs_store_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, stats) = prepared_small(tmp.path());
    let out = tmp.path().join("run");
    let exp = experiment(&data, &out, &["epochs=0", "seeds=7", "space=poincare", "dim=6"]);
    cmd_train(&exp).unwrap();
    let (loaded, meta) = Model::load(&out.join("seed-7")).unwrap();
    assert_eq!(meta.epoch, 0);
    let config = exp.model_config(exp.model, exp.space, exp.dim, 7).unwrap();
    let init = Model::init(config, stats.users, stats.items, loaded.global_mean).unwrap();
    assert_eq!(loaded, init);
}

#[test]
fn five_seeds_give_five_checkpoints_and_a_mean_row() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = prepared_small(tmp.path());
    let out = tmp.path().join("run");
    let exp = experiment(&data, &out, &["epochs=1", "seeds=0,1,2,3,4"]);
    let outcomes = cmd_train(&exp).unwrap();
    assert_eq!(outcomes.len(), 5);
    for s in 0..5 {
        let dir = out.join(format!("seed-{s}"));
        for f in [
            "meta.json",
            "users.hrec",
            "items.hrec",
            "train_log.csv",
            "report.csv",
            "report.json",
        ] {
            assert!(dir.join(f).exists(), "seed {s}: missing {f}");
        }
        let log = fs::read_to_string(dir.join("train_log.csv")).unwrap();
        assert!(log.starts_with("epoch,loss,val_hr@10,wall_time\n"));
        assert_eq!(log.lines().count(), 2);
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 7);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "hr@10").unwrap();
    let mean: f64 = lines[6].split(',').nth(col).unwrap().parse().unwrap();
    assert!(lines[6].starts_with("mean,"));
    let expected = outcomes.iter().map(|o| o.report.hr_at(10).unwrap()).sum::<f64>() / 5.0;
    assert!((mean - expected).abs() < 1e-12);
}

#[test]
fn invalid_config_fails_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let exp = hyperrec_cli::config::ExperimentConfig::parse(
        "",
        &[
            format!("dataset={}", tmp.path().join("missing").display()),
            format!("output={}", out.display()),
        ],
    )
    .unwrap();
    assert!(cmd_train(&exp).is_err());
    assert!(!out.exists());
}

#[test]
fn sweep_covers_the_grid_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = prepared_small(tmp.path());
    let out = tmp.path().join("sweep");
    let exp = experiment(&data, &out, &["epochs=1", "dims=4,8", "seeds=0,1"]);
    assert_eq!(cells_per_seed(&exp), 4);
    let first = cmd_sweep(&exp).unwrap();
    assert_eq!((first.trained, first.reused, first.failed.len()), (8, 0, 0));
    let reports = fs::read(out.join("reports.csv")).unwrap();
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert!(curve.starts_with("model,dim,space,metric,mean,stddev\n"));
    // 2 dims × 2 spaces × (5 hr + 5 ndcg)
    assert_eq!(curve.lines().count(), 1 + 40);

    // Simulate an interruption that lost one finished cell.
    let cells: Vec<_> = fs::read_dir(out.join("cells"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(cells.len(), 8);
    fs::remove_dir_all(&cells[3]).unwrap();
    let second = cmd_sweep(&exp).unwrap();
    assert_eq!((second.trained, second.reused), (1, 7));
    assert_eq!(fs::read(out.join("reports.csv")).unwrap(), reports);
    assert_eq!(fs::read_to_string(out.join("curve.csv")).unwrap(), curve);
}

fn rows_with(rows: &[ReportRow], f: impl Fn(f64) -> f64) -> Vec<ReportRow> {
    rows.iter()
        .map(|r| ReportRow {
            value: f(r.value),
            ..r.clone()
        })
        .collect()
}

#[test]
fn compare_flags_ties_and_dominance() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = prepared_small(tmp.path());
    let run = tmp.path().join("run");
    cmd_train(&experiment(&data, &run, &["epochs=1", "seeds=0,1"])).unwrap();
    let mut rows = Vec::new();
    for s in 0..2 {
        rows.extend(read_report_csv(fs::File::open(run.join(format!("seed-{s}/report.csv"))).unwrap()).unwrap());
    }
    let write = |name: &str, rows: &[ReportRow]| {
        let p = tmp.path().join(name);
        write_report_csv(fs::File::create(&p).unwrap(), rows).unwrap();
        p
    };
    let a = write("a.csv", &rows);
    let worse = write("worse.csv", &rows_with(&rows, |v| v * 0.5 - 0.01));
    let args = |b: &std::path::Path, out: &str| CompareArgs {
        a: a.clone(),
        b: b.to_path_buf(),
        space_a: None,
        space_b: None,
        label_a: "a".into(),
        label_b: "b".into(),
        out: tmp.path().join(out),
    };

    let same = cmd_compare(&args(&a, "same")).unwrap();
    assert_eq!(same.len(), 10);
    assert!(same.iter().all(|r| r.delta == 0.0 && r.winner == Winner::Tie));

    let dominated = cmd_compare(&args(&worse, "dom")).unwrap();
    assert!(dominated.iter().all(|r| r.winner == Winner::A && r.delta < 0.0));
    let md = fs::read_to_string(tmp.path().join("dom/comparison.md")).unwrap();
    assert_eq!(md.lines().filter(|l| l.ends_with("| a |")).count(), 10);

    let other = write(
        "other.csv",
        &rows
            .iter()
            .map(|r| ReportRow {
                protocol: "sampled:99".into(),
                ..r.clone()
            })
            .collect::<Vec<_>>(),
    );
    let err = cmd_compare(&args(&other, "bad")).unwrap_err();
    assert!(format!("{err:#}").contains("protocol mismatch"));
}

#[test]
fn eval_protocols_and_compatibility_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, _) = prepared_small(tmp.path());
    let run = tmp.path().join("run");
    cmd_train(&experiment(&data, &run, &["epochs=2", "seeds=0"])).unwrap();
    let eval = |protocol: Protocol, checkpoint: &std::path::Path, out: &str| {
        cmd_eval(&EvalArgs {
            checkpoint: checkpoint.to_path_buf(),
            dataset: data.clone(),
            dataset_name: None,
            protocol,
            seed: 5,
            target: EvalTarget::Test,
            out: tmp.path().join(out),
        })
    };
    let ckpt = run.join("seed-0");
    let full = eval(Protocol::Full, &ckpt, "full").unwrap();
    let sampled = eval(Protocol::Sampled(10), &ckpt, "sampled").unwrap();
    assert_eq!(full.protocol, Protocol::Full);
    assert_eq!(sampled.protocol, Protocol::Sampled(10));
    // Sampled candidates are a subset of the full candidates.
    for k in [1, 5, 10, 15, 20] {
        assert!(sampled.hr_at(k).unwrap() >= full.hr_at(k).unwrap());
    }
    let csv = fs::read_to_string(tmp.path().join("sampled/report.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",sampled:10")));
    assert_eq!(eval(Protocol::Full, &ckpt, "again").unwrap(), full);

    let bad = tmp.path().join("bad");
    fs::create_dir_all(&bad).unwrap();
    for f in ["users.hrec", "items.hrec", "meta.json"] {
        fs::copy(ckpt.join(f), bad.join(f)).unwrap();
    }
    let meta = fs::read_to_string(bad.join("meta.json"))
        .unwrap()
        .replace("\"dim\": 10", "\"dim\": 12");
    fs::write(bad.join("meta.json"), meta).unwrap();
    let err = format!("{:#}", eval(Protocol::Full, &bad, "never").unwrap_err());
    assert!(err.contains("10") && err.contains("12"), "{err}");
}
