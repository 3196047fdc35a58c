use std::path::Path;
use std::process::Command;

use cantor_tits::rational::q;
use cantor_tits_cli::run::{run_scenario, write_outputs};
use cantor_tits_cli::scenario::{fixture, parse_scenario, to_json, BudgetSpec, Kind, Profile, Rat, Scenario, FIXTURES};
use cantor_tits_cli::Status;
use proptest::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_cantor-tits");

fn load(name: &str) -> Scenario {
    parse_scenario(fixture(name).unwrap()).unwrap()
}

#[test]
fn fixtures_parse_and_round_trip() {
    for (name, text) in FIXTURES {
        let s = parse_scenario(text).unwrap_or_else(|e| panic!("{name}: {e:#}"));
        assert_eq!(parse_scenario(&to_json(&s)).unwrap(), s, "{name}");
    }
    let free = load("free_pair.json");
    assert_eq!(free.kind, Kind::CertifyFree);
    let inst = free.build().unwrap();
    let names = inst.model().unwrap().names().to_vec();
    assert_eq!(names, ["A1", "A2", "A1^-1", "A2^-1"]);
    assert!(inst.model().unwrap().probs().iter().all(|p| *p == q(1, 4)));
    assert!(inst.model().unwrap().symmetric());
}

#[test]
fn schema_errors_are_reported() {
    let mut s = load("klein_four.json");
    s.probabilities = Some(vec![Rat(q(1, 2)), Rat(q(1, 3))]);
    let err = parse_scenario(&to_json(&s)).unwrap_err();
    assert!(format!("{err:#}").contains("probabilities sum 5/6 ≠ 1"), "{err:#}");

    let mut s = load("g3.json");
    s.budgets.map = Some("G4".into());
    let err = parse_scenario(&to_json(&s)).unwrap_err();
    assert!(format!("{err:#}").contains("unknown generator name `G4`"), "{err:#}");

    let err = parse_scenario("{\n  \"kind\": \"simulate\",\n  \"sede\": 3\n}").unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("sede") && msg.contains("line 3"), "{msg}");

    let mut s = load("klein_four.json");
    s.generators[0].prefix.as_mut().unwrap().rules[0].dst = "0000000000".into();
    assert!(parse_scenario(&to_json(&s)).is_err());
}

#[test]
fn library_runs_match_the_fixture_verdicts() {
    let here = Path::new(".");
    let free = run_scenario(&load("free_pair"), Profile::Default, here).unwrap();
    assert_eq!(free.status, Status::Certified);
    assert_eq!(free.verdict, "FREE (ping-pong verified)");
    assert_eq!(free.report["sanity"]["ok"], true);

    let klein = run_scenario(&load("klein_four"), Profile::Default, here).unwrap();
    assert_eq!(klein.status, Status::Certified);
    assert_eq!(klein.report["result"]["measure"]["masses"]["values"], serde_json::json!(["1/2", "1/2"]));
    assert_eq!(klein.report["result"]["consistency_depth"], 6);

    let id = run_scenario(&load("identity"), Profile::Default, here).unwrap();
    assert_eq!(id.status, Status::Undecided);
    assert!(id.verdict.starts_with("UNDECIDED within budget"));

    let rot = run_scenario(&load("rotation_third"), Profile::Default, here).unwrap();
    assert_eq!(rot.report["components"], 3);
    assert_eq!(rot.report["finite_orbit"].as_array().unwrap().len(), 3);
}

fn cli(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(BIN).args(args).current_dir(dir).env("CANTOR_TITS_PROFILE", "quick").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn binary_exit_codes_and_certificates() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(cli(&["run", "free_pair", "--out", "free"], d), (0, "FREE (ping-pong verified)\n".into()));
    assert_eq!(cli(&["run", "identity", "--out", "id"], d).0, 2);
    assert_eq!(cli(&["run", "klein_four", "--out", "klein"], d).0, 0);
    assert_eq!(cli(&["run", "g3", "--out", "g3"], d).0, 0);
    assert_eq!(cli(&["giet-blowup", "rotation_third", "--out", "rot"], d).0, 0);
    assert_eq!(cli(&["run", "no_such_scenario"], d).0, 1);
    std::fs::write(d.join("bad.json"), "{\"kind\": \"simulate\", \"seed\": -1}").unwrap();
    assert_eq!(cli(&["run", "bad.json"], d).0, 1);

    let mut certs = 0;
    for sub in ["free", "id", "klein", "g3", "rot"] {
        for e in std::fs::read_dir(d.join(sub)).unwrap() {
            let p = e.unwrap().path();
            if p.to_string_lossy().ends_with(".cert.json") {
                let (code, line) = cli(&["verify", p.to_str().unwrap()], d);
                assert_eq!(code, 0, "{}: {line}", p.display());
                certs += 1;
            }
        }
    }
    assert_eq!(certs, 6);

    let cert = d.join("free/ping_pong.cert.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    v["regions"]["B1"] = v["regions"]["A1"].clone();
    std::fs::write(d.join("tampered.json"), v.to_string()).unwrap();
    let (code, line) = cli(&["verify", "tampered.json"], d);
    assert_eq!(code, 2);
    assert!(line.starts_with("REJECTED"));
    std::fs::write(d.join("garbage.json"), "{}").unwrap();
    assert_eq!(cli(&["verify", "garbage.json"], d).0, 1);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        let (code, _) = cli(&["simulate", "free_pair", "--runs", "3", "--seed", "7", "--emit-series", "--out", out], d);
        assert_eq!(code, 0);
    }
    for f in ["report.json", "delta_sum.csv"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("a/meta.json")).unwrap()).unwrap();
    assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
    let report = std::fs::read_to_string(d.join("a/report.json")).unwrap();
    assert!(!report.contains("timestamp"));
}

#[test]
fn outputs_replace_existing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_scenario(&load("g3"), Profile::Quick, Path::new(".")).unwrap();
    let meta = serde_json::json!({});
    write_outputs(&out, tmp.path(), false, &meta).unwrap();
    let written = write_outputs(&out, tmp.path(), false, &meta).unwrap();
    assert_eq!(written.len(), 3);
    let names: Vec<String> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names.len(), 3, "{names:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn scenario_round_trip(seed in any::<u64>(), runs in proptest::option::of(1usize..500), n in 1i64..100, d in 2i64..100, depth in proptest::option::of(0u32..8)) {
        let mut s = load("free_pair");
        s.seed = seed;
        s.budgets = BudgetSpec { runs, depth, eps: Some(Rat(q(n.min(d - 1), d))), ..BudgetSpec::default() };
        let back = parse_scenario(&to_json(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}
