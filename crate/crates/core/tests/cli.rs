use std::path::Path;
use std::process::{Command, Output};

fn efid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efid")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sweep_is_deterministic_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = efid(&[
            "sweep", "--kernel", "adpcm", "--mode", "rate", "--rates", "0,0.04", "--bits", "0-7",
            "--trials", "10", "--seed", "7", "--csv", p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let stamp = std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&stamp).unwrap();
    assert_eq!(v["master_seed"], 7);
    assert_eq!(v["rng"], "splitmix64-labels-v1");
}

#[test]
fn sweep_without_csv_prints_to_stdout() {
    let o = efid(&["sweep", "--kernel", "adpcm", "--mode", "rate", "--rates", "0", "--trials", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("swept_param,value,"));
}

#[test]
fn unknown_region_exits_1_and_names_it() {
    let o = efid(&["sweep", "--kernel", "mini_jpeg", "--mode", "rate", "--rates", "0.01", "--region", "dequant"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("\"dequant\""), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_1() {
    assert_eq!(efid(&["sweep", "--kernel", "nope"]).status.code(), Some(1));
    assert_eq!(efid(&["sweep", "--kernel", "adpcm", "--bits", "9-3"]).status.code(), Some(1));
    assert_eq!(efid(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn decode_failure_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bs = dir.path().join("img.efb");
    let o = efid(&["encode", "--kernel", "mini_jpeg", "-o", p(&bs)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = dir.path().join("regions.json");
    std::fs::write(&table, r#"{"entropy_decode": {"rate": 0.5, "bits": "0-31"}}"#).unwrap();
    let out = dir.path().join("out.ppm");
    let o = efid(&["decode", "-i", p(&bs), "-o", p(&out), "--regions", p(&table), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("decode failed"));
    assert!(!out.exists());
    assert!(!dir.path().join("out.ppm.meta.json").exists());
}

#[test]
fn reliable_decode_round_trip_scores_against_reference() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("ref.wav");
    let bs = dir.path().join("a.efb");
    let out = dir.path().join("out.wav");
    assert!(efid(&["gen-corpus", "--kernel", "adpcm", "-o", p(&wav)]).status.success());
    assert!(efid(&["encode", "--kernel", "adpcm", "-i", p(&wav), "-o", p(&bs)]).status.success());
    let o = efid(&["decode", "-i", p(&bs), "-o", p(&out), "--reference", p(&wav)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("SNRseg:"));
    assert!(out.exists());
}

#[test]
fn power_bundled_workload() {
    let o = efid(&["power", "--workload", "table2_g721.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("normalized_power"), "{}", stdout(&o));
}

#[test]
fn plot_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let svg = dir.path().join("s.svg");
    let o = efid(&[
        "sweep", "--kernel", "adpcm", "--mode", "bits", "--bits", "0-5", "--trials", "4", "--csv", p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = efid(&["plot", "--csv", p(&csv), "--svg", p(&svg), "--title", "adpcm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert!(text.trim_end().ends_with("</svg>"));
}
