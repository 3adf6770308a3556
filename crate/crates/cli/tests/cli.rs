use std::process::Command as Process;

use clap::Parser;
use confdim::annulus::Truncation;
use confdim::dimension::DimensionConfig;
use confdim::modulus::AdjacencyRule;
use confdim_cli::*;
use serde_json::Value;

const TUNED: &[&str] = &[
    "--base", "3", "--lambda", "1", "--L1", "1", "--L2", "2", "--imax", "1", "--k-first", "1", "--k-tail", "2",
    "--slope-band", "0.05", "--decay-eps", "0.01", "--tol", "1e-4",
];

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_confdim"))
}

fn dimension_options(extra: &[&str]) -> DimensionOptions {
    let mut args = vec!["confdim", "dimension", "{}"];
    args.extend_from_slice(extra);
    match Cli::try_parse_from(args).unwrap().command {
        Command::Dimension { options, .. } => options,
        _ => unreachable!(),
    }
}

fn generated(descriptor: &str) -> Value {
    serde_json::from_str(&cmd_generate(descriptor).unwrap().body).unwrap()
}

#[test]
fn generate_point_counts() {
    assert_eq!(generated(r#"{"kind":"cantor","n":1,"depth":6}"#)["points"], 128);
    assert_eq!(generated(r#"{"kind":"interval","depth":5}"#)["points"], 33);
    assert_eq!(generated(r#"{"kind":"carpet","n":1,"depth":1}"#)["points"], 16);
}

#[test]
fn generated_documents_load_back() {
    for d in [r#"{"kind":"cantor","n":2,"depth":3}"#, r#"{"kind":"snowflake","eps":0.5,"inner":{"kind":"interval","depth":4}}"#] {
        let body = cmd_generate(d).unwrap().body;
        let loaded = load_space(&body).unwrap();
        let direct = load_space(d).unwrap();
        assert_eq!(loaded.space.len(), direct.space.len());
        for i in 0..direct.space.len() {
            for j in 0..direct.space.len() {
                let (a, b) = (loaded.space.dist(i, j), direct.space.dist(i, j));
                assert!((a - b).abs() <= 1e-11 * b.max(1.0), "{d}: {a} vs {b}");
            }
        }
        assert!(loaded.descriptor.is_some());
    }
}

#[test]
fn options_default_and_override() {
    let c = dimension_options(&[]).resolve(None, None).unwrap();
    assert_eq!((c.base, c.curve.lambda, c.curve.l1, c.curve.l2), (10.0, 10.0, 3.0, 4.0));
    assert_eq!(c.curve.rule, AdjacencyRule::DistanceSurrogate);

    let file = DimensionConfig { base: 3.0, p_hi: 3.0, ..DimensionConfig::default() };
    let c = dimension_options(&["--lambda", "2", "--adjacency", "witness", "--imax", "2"])
        .resolve(Some(file), None)
        .unwrap();
    assert_eq!((c.base, c.p_hi, c.curve.lambda), (3.0, 3.0, 2.0));
    assert_eq!(c.curve.rule, AdjacencyRule::WitnessPoint);
    assert_eq!(c.truncation, Truncation::Full { i_max: 2 });

    let inline = dimension_options(&["--config", r#"{"base":3.0,"p_lo":0.5}"#, "--p-tol", "0.1"]);
    let c = inline.resolve(None, None).unwrap();
    assert_eq!((c.base, c.p_lo, c.p_tol), (3.0, 0.5, 0.1));
}

#[test]
fn scale_truncation_from_flags_or_certificate() {
    let c = dimension_options(&["--use-n0", "--base", "3", "--L0", "3", "--rho0", "1"]).resolve(None, None).unwrap();
    assert!(matches!(c.truncation, Truncation::Truncated { .. }));
    let cert = load_space(r#"{"kind":"interval","depth":4}"#).unwrap().certificate.unwrap();
    let from_cert = dimension_options(&["--use-n0", "--base", "3"]).resolve(None, Some(&cert)).unwrap();
    let explicit = dimension_options(&["--use-n0", "--base", "3", "--L0", &cert.l0.to_string(), "--rho0", &cert.rho0.to_string()])
        .resolve(None, None)
        .unwrap();
    assert_eq!(from_cert.truncation, explicit.truncation);
    let missing = dimension_options(&["--use-n0"]).resolve(None, None).unwrap_err();
    assert_eq!(missing.code, EXIT_INVALID);
    assert!(Cli::try_parse_from(["confdim", "dimension", "{}", "--imax", "1", "--use-n0"]).is_err());
    assert!(Cli::try_parse_from(["confdim", "dimension", "{}", "--adjacency", "other"]).is_err());
}

#[test]
fn floats_have_twelve_significant_digits() {
    let mut v = serde_json::json!({"a": [1.0 / 3.0, 0.1 + 0.2], "b": {"c": 2.0e-20 / 3.0}, "n": 7});
    round_floats(&mut v);
    assert_eq!(v["a"][0].as_f64(), Some(0.333333333333));
    assert_eq!(v["a"][1].as_f64(), Some(0.3));
    assert_eq!(v["b"]["c"].as_f64(), Some(6.66666666667e-21));
    assert_eq!(v["n"], 7);
}

#[test]
fn inputs_in_every_form() {
    let tree = r#"{"edges":[[0,1,1.0],[0,2,2.0],[2,3,0.5]],"root":0}"#;
    assert_eq!(load_space(tree).unwrap().space.dist(1, 3), 3.5);
    let cloud = r#"{"type":"cloud","dim":1,"points":[[0.0],[1.0],[3.0]]}"#;
    assert_eq!(load_space(cloud).unwrap().space.dist(0, 2), 3.0);
    let path = std::env::temp_dir().join(format!("confdim-input-{}.json", std::process::id()));
    std::fs::write(&path, cloud).unwrap();
    assert_eq!(load_space(&read_input(path.to_str().unwrap()).unwrap()).unwrap().space.len(), 3);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(read_input("/no/such/file.json").unwrap_err().code, EXIT_INVALID);
    assert_eq!(load_space("[1,2]").err().unwrap().code, EXIT_INVALID);
}

#[test]
fn hyperbolicity_reports() {
    let r: Value = serde_json::from_str(
        &cmd_hyperbolicity(r#"{"edges":[[0,1,1.0],[1,2,1.0],[1,3,1.0],[3,4,2.0]],"root":0}"#, None, 0, None).unwrap().body,
    )
    .unwrap();
    assert_eq!(r["delta"], 0.0);
    assert_eq!(r["exhaustive"], true);
    assert_eq!(r["product_inequality_violations"], 0);
    let square = r#"{"type":"cloud","dim":2,"points":[[0,0],[1,0],[1,1],[0,1]]}"#;
    let r: Value = serde_json::from_str(&cmd_hyperbolicity(square, None, 0, Some(2)).unwrap().body).unwrap();
    assert_eq!(r["delta"].as_f64(), Some(0.414213562373));
    let big: Value =
        serde_json::from_str(&cmd_hyperbolicity(r#"{"kind":"interval","depth":8}"#, None, 3, None).unwrap().body).unwrap();
    assert_eq!(big["exhaustive"], false);
    assert_eq!(big["delta"], 0.0);
    assert!(big["product_inequality_violations"].is_null());
}

#[test]
fn exit_codes() {
    let out = bin().args(["generate", r#"{"kind":"nope"}"#]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID));
    let out = bin().args(["dimension", r#"{"kind":"interval","depth":3}"#, "--kmax", "12", "--base", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_RESOLUTION));
    let out = bin().args(["dimension", r#"{"kind":"interval","depth":3}"#, "--threads", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID));
}

#[test]
fn inconclusive_runs_still_write_output() {
    let path = std::env::temp_dir().join(format!("confdim-inconclusive-{}.json", std::process::id()));
    let mut args = vec!["dimension", r#"{"kind":"interval","depth":8}"#, "--p-lo", "0.1", "--p-hi", "4", "--p-tol", "0.01"];
    args.extend_from_slice(TUNED);
    args.extend(["--out", path.to_str().unwrap()]);
    let out = bin().args(&args).output().unwrap();
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    let e = &doc["estimate"];
    let inconclusive = e["inconclusive"].as_bool().unwrap() || e["vanishes_witness"].is_null();
    assert_eq!(out.status.code(), Some(if inconclusive { EXIT_INCONCLUSIVE } else { EXIT_OK }));
    assert!(e["cd_low"].as_f64().unwrap() <= e["cd_high"].as_f64().unwrap());
}

#[test]
fn dimension_csv_lists_every_probe() {
    let mut args = vec!["dimension", r#"{"kind":"cantor","n":1,"depth":6}"#, "--format", "csv"];
    args.extend_from_slice(TUNED);
    let options = match Cli::try_parse_from(std::iter::once("confdim").chain(args.iter().copied())).unwrap().command {
        Command::Dimension { options, .. } => options,
        _ => unreachable!(),
    };
    let csv = cmd_dimension(args[1], &options, Format::Csv).unwrap().body;
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,p,value,i_star,y_star,truncation,lambda,L1,L2,base,adjacency_rule"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.len() == 11 && r[9] == "3" && r[10] == "surrogate"));
}

#[test]
fn converge_writes_a_csv_directory() {
    let dir = std::env::temp_dir().join(format!("confdim-converge-{}", std::process::id()));
    let config = r#"{"sequence":[{"kind":"cantor","n":1,"depth":5},{"kind":"cantor","n":2,"depth":4}],
                     "limit":{"kind":"interval","depth":6}}"#;
    let mut args = vec!["converge", config, "--format", "csv", "--p-lo", "0.1", "--p-hi", "3"];
    args.extend_from_slice(TUNED);
    args.extend(["--out", dir.to_str().unwrap()]);
    let out = bin().args(&args).output().unwrap();
    assert!(matches!(out.status.code(), Some(EXIT_OK) | Some(EXIT_INCONCLUSIVE)), "{out:?}");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("experiment.json")).unwrap()).unwrap();
    assert_eq!(doc["estimates"].as_array().unwrap().len(), 2);
    assert_eq!(doc["distances"].as_array().unwrap().len(), 2);
    for name in ["curves_0.csv", "curves_1.csv", "curves_limit.csv"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        assert!(text.starts_with("k,p,value,"));
    }
    std::fs::remove_dir_all(&dir).unwrap();
    let stdout_only = bin().args(["converge", config, "--format", "csv"]).args(TUNED).output().unwrap();
    assert_eq!(stdout_only.status.code(), Some(EXIT_INVALID));
}

#[test]
fn command_line_definition_is_consistent() {
    use clap::CommandFactory;
    Cli::command().debug_assert();
}
