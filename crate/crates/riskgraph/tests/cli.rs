//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn riskgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskgraph"))
        .args(args)
        .env_remove("RISKGRAPH_DATA")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = riskgraph(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    riskgraph(args).status.code().expect("exit code")
}

fn synth(dir: &Path, n: usize) -> String {
    let data = dir.join("data");
    let s = data.to_str().unwrap().to_string();
    ok(&[
        "gen-synth",
        "--seed",
        "2",
        "--n",
        &n.to_string(),
        "--out",
        &s,
    ]);
    s
}

#[test]
fn gen_train_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 60);
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    let printed = ok(&[
        "train", "--data", &data, "--out", run_s, "--epochs", "40", "--seed", "3",
    ]);
    assert!(printed.contains("best epoch"), "{printed}");
    for f in ["checkpoint.json", "epochs.jsonl", "summary.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert_eq!(
        fs::read_to_string(run.join("epochs.jsonl"))
            .unwrap()
            .lines()
            .count(),
        41,
        "epochs plus the final evaluation"
    );

    let ck = run.join("checkpoint.json");
    let eval = ok(&[
        "eval",
        "--data",
        &data,
        "--checkpoint",
        ck.to_str().unwrap(),
        "--split",
        "test",
    ]);
    let v: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(v["split"], "test");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["metrics"], summary["test"]);
}

#[test]
fn training_is_deterministic_across_processes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 40);
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        ok(&[
            "train",
            "--data",
            &data,
            "--out",
            out.to_str().unwrap(),
            "--epochs",
            "15",
        ]);
        bytes.push((
            fs::read(out.join("checkpoint.json")).unwrap(),
            fs::read(out.join("epochs.jsonl")).unwrap(),
        ));
    }
    assert!(bytes[0] == bytes[1]);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 40);
    let cfg = tmp.path().join("cfg.json");
    let out = tmp.path().join("run");
    fs::write(
        &cfg,
        serde_json::json!({"data": data, "out": out, "train": {"epochs": 30, "seed": 9}})
            .to_string(),
    )
    .unwrap();
    ok(&["--config", cfg.to_str().unwrap(), "train", "--epochs", "12"]);
    let ck: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(ck["config"]["epochs"], 12);
    assert_eq!(ck["config"]["seed"], 9);
}

#[test]
fn configuration_and_data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let missing = missing.to_str().unwrap();
    assert_eq!(code(&["analyze", "--data", missing]), 2);
    assert_eq!(code(&["train", "--data", missing]), 2);
    assert_eq!(code(&["analyze"]), 2, "no data root anywhere");

    let data = synth(tmp.path(), 30);
    assert_eq!(
        code(&["train", "--data", &data, "--set", "no_such_key=1"]),
        2
    );
    assert_eq!(
        code(&["train", "--data", &data, "--ablation", "no_everything"]),
        2
    );
    assert_eq!(code(&["analyze", "--data", &data, "--ttest", "exact"]), 2);
    assert_eq!(
        code(&["sweep", "--param", "epochs", "--grid", "1,2", "--data", &data]),
        2
    );
    assert_eq!(code(&["frobnicate"]), 2);

    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"train": {"epochz": 3}}"#).unwrap();
    assert_eq!(
        code(&["--config", cfg.to_str().unwrap(), "train", "--data", &data]),
        2
    );

    fs::write(
        Path::new(&data).join("edges.jsonl"),
        "{\"src\":\"x\",\"dst\":\"y\",\"rel\":\"branch\"}\n",
    )
    .unwrap();
    let out = riskgraph(&["analyze", "--data", &data]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edges.jsonl:1"));
}

#[test]
fn analyze_formats_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), 120);
    let text = ok(&["analyze", "--data", &data]);
    let csv = ok(&["analyze", "--data", &data, "--format", "csv"]);

    let csv_rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(csv_rows.len(), 12);
    let text_rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .take(12)
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect();
    for (c, t) in csv_rows.iter().zip(&text_rows) {
        let c: Vec<&String> = c.iter().filter(|s| !s.is_empty()).collect();
        let t: Vec<&String> = t.iter().collect();
        assert_eq!(c, t);
    }
    assert!(text.contains("two-sided"));

    let pooled = ok(&[
        "analyze", "--data", &data, "--format", "csv", "--ttest", "pooled",
    ]);
    assert_eq!(pooled.lines().count(), 13);
}

#[test]
fn sweep_writes_one_row_per_grid_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep.csv");
    ok(&[
        "sweep",
        "--param",
        "output_dim",
        "--grid",
        "2,4,6,8,10,12",
        "--synth-n",
        "60",
        "--epochs",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    let body = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(
        lines[0],
        "param,value,accuracy,precision,recall,f1,auc,best_epoch"
    );
    assert_eq!(lines.len(), 7);
    for (line, v) in lines[1..].iter().zip([2, 4, 6, 8, 10, 12]) {
        assert!(line.starts_with(&format!("output_dim,{v},")), "{line}");
    }
}

#[test]
fn gradcheck_reports_and_sets_exit_status() {
    // a loose threshold passes; the printed error decides the verdict
    let out = riskgraph(&["gradcheck", "--n", "10", "--seed", "1", "--threshold", "1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("max relative error") && text.contains("PASS"));
    let strict = riskgraph(&["gradcheck", "--n", "10", "--seed", "1", "--threshold", "0"]);
    assert_eq!(strict.status.code(), Some(1));
}

fn write_fixture(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let files = [
        (
            "enterprises.csv",
            "id,established_time,registered_capital,paid_in_capital,label,bankrupt_date\n\
             E1,2005,100.0,80.0,0,\n\
             E2,2010,50.5,50.5,1,2019-06-30\n\
             E3,2012,20.0,10.0,0,\n\
             E4,2015,5.0,1.0,1,2020-01-15\n\
             E5,2001,900.0,900.0,,\n",
        ),
        ("persons.csv", "id\nP1\nP2\n"),
        (
            "relations.csv",
            "src,dst,relation,weight\n\
             E1,E2,holder_investor,0.4\n\
             E3,E4,branch,\n\
             P1,E1,manager,\n\
             P2,E4,shareholder,\n",
        ),
        (
            "hyperedges.csv",
            "type,hyperedge,member\n\
             industry,I1,E1\nindustry,I1,E2\nindustry,I2,E3\nindustry,I2,E4\nindustry,I2,E5\n\
             area,A1,E1\narea,A1,E3\n",
        ),
        (
            "lawsuits.csv",
            "enterprise,cause,court,verdict,date\n\
             E2,loan_contract_dispute,grassroots,defendant_loser,2018-03-01\n\
             E4,labour dispute,higher,plaintiff_winner,2019-11-11\n",
        ),
        (
            "splits.csv",
            "id,split\nE1,train\nE2,train\nE3,validation\nE4,test\n",
        ),
    ];
    for (name, body) in files {
        fs::write(dir.join(name), body).unwrap();
    }
}

#[test]
fn convert_smesd_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("csv");
    write_fixture(&input);
    let out = tmp.path().join("json");
    ok(&[
        "convert-smesd",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);

    let kg = riskgraph::io::load_ekg(&out).unwrap();
    assert_eq!(kg.enterprises.len(), 5);
    assert_eq!(kg.persons.len(), 2);
    assert_eq!(kg.hyperedges.len(), 3);
    assert_eq!(kg.splits.val.len(), 1);
    let text = ok(&[
        "analyze",
        "--data",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(text.lines().count(), 13);

    fs::write(
        input.join("relations.csv"),
        "src,dst,relation,weight\nE1,E9,branch,\n",
    )
    .unwrap();
    let bad = riskgraph(&[
        "convert-smesd",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("E9"));
}
