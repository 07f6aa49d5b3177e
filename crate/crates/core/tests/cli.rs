use std::path::Path;
use std::process::{Command, Output};

use trustsim::envs::BetaSpec;
use trustsim::experiments::{load_grid, save_grid, CellSummary, GridResult, Summary};
use trustsim::graph::CommunityGraph;

const TINY: &str = "c_values = [0.5]\npriors = [[8, 2]]\nvariants = [\"aware\"]\nrepetitions = 1\n\n[ddpg]\nepisodes = 4\nwarmup_steps = 40\nbatch_size = 16\nhidden = [16]\n";

fn trustsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustsim")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Map<String, serde_json::Value> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<serde_json::Value>(&out.stdout)
        .unwrap()
        .as_object()
        .unwrap()
        .clone()
}

#[test]
fn gen_network_writes_loadable_graph() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    let out = trustsim(&["gen-network", "--seed", "3", "--n", "12", "--out", path(&file)]);
    assert!(out.status.success());
    assert_eq!(CommunityGraph::load(&file).unwrap().n(), 12);
}

#[test]
fn eval_zero_policy_reaches_fixed_point() {
    let out = trustsim(&["eval", "--policy", "zero", "--variant", "learned", "--c", "0.25", "--prior", "2,2"]);
    let m = stdout_json(&out);
    let mut keys: Vec<&str> = m.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["avg_trust", "fairness", "org_utility"]);
    assert!((m["avg_trust"].as_f64().unwrap() - 0.2).abs() <= 1e-6);
}

#[test]
fn eval_builtin_policies_are_deterministic() {
    for policy in ["equal-split", "random"] {
        let args = ["eval", "--policy", policy, "--seed", "9", "--eval-mode", "adaptive"];
        assert_eq!(trustsim(&args).stdout, trustsim(&args).stdout);
    }
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(&config, TINY).unwrap();
    let policy = dir.path().join("policy.json");
    let out = trustsim(&["train", "--config", path(&config), "--variant", "aware", "--out", path(&policy)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = stdout_json(&trustsim(&["eval", "--config", path(&config), "--policy", path(&policy)]));
    assert!((0.0..=1.0).contains(&m["fairness"].as_f64().unwrap()));

    // wrong layout and wrong network size are both refused
    let out = trustsim(&["eval", "--policy", path(&policy), "--variant", "unaware"]);
    assert!(!out.status.success());
    let small = dir.path().join("small.toml");
    std::fs::write(&small, format!("n = 10\n{TINY}")).unwrap();
    let out = trustsim(&["eval", "--config", path(&small), "--policy", path(&policy)]);
    assert!(!out.status.success());
}

#[test]
fn sweep_writes_outputs_and_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(&config, TINY).unwrap();
    let out_dir = dir.path().join("out");
    let out = trustsim(&["sweep", "--config", path(&config), "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["runs.csv", "aggregate.csv", "manifest.json"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 1);
    assert_eq!(load_grid(&out_dir.join("aggregate.csv")).unwrap().cells.len(), 1);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"variants": ["aware", "psychic"]}"#).unwrap();
    let out = trustsim(&["sweep", "--config", path(&bad), "--out", path(&dir.path().join("never"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("variants"));
    assert!(!dir.path().join("never").exists());

    let out = trustsim(&["sweep", "--config", path(&dir.path().join("missing.toml")), "--out", path(&out_dir)]);
    assert!(!out.status.success());
}

fn synthetic_grid(variant: &str) -> GridResult {
    let priors = [(2.0, 8.0), (2.0, 6.0), (2.0, 4.0), (2.0, 2.0), (4.0, 2.0), (6.0, 2.0), (8.0, 2.0)];
    let mut cells = Vec::new();
    for c in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for &(a, b) in &priors {
            let s = Summary {
                mean: c * 0.5 + a / (a + b) * 0.25,
                stderr: 0.01,
            };
            cells.push(CellSummary {
                variant: variant.to_string(),
                c,
                prior: BetaSpec { a, b },
                org_utility: s,
                fairness: s,
                avg_trust: s,
            });
        }
    }
    GridResult { cells }
}

#[test]
fn diff_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let agg = dir.path().join("aggregate.csv");
    let mut grid = synthetic_grid("aware");
    grid.cells.extend(synthetic_grid("unaware").cells);
    save_grid(&grid, &agg).unwrap();

    let diff = dir.path().join("diff.csv");
    let out = trustsim(&["diff", path(&agg), "--variant", "aware", "--base-variant", "unaware", "--out", path(&diff)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = load_grid(&diff).unwrap();
    assert_eq!(d.cells.len(), 35);
    assert!(d.cells.iter().all(|c| c.org_utility.mean == 0.0 && c.variant == "aware-unaware"));

    let svg = dir.path().join("diff.svg");
    let out = trustsim(&["plot", path(&diff), "--metric", "org_utility", "--out", path(&svg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches(r#"<rect class="cell""#).count(), 35);

    let svg = dir.path().join("aware.svg");
    let out = trustsim(&["plot", path(&agg), "--variant", "aware", "--metric", "avg_trust", "--out", path(&svg)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    for cell in &synthetic_grid("aware").cells {
        assert!(text.contains(&format!(">{:.3}</text>", cell.avg_trust.mean)));
    }

    let out = trustsim(&["plot", path(&agg), "--variant", "aware", "--metric", "joy", "--out", path(&svg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("joy"));
    // two variants without a selection are ambiguous
    let out = trustsim(&["plot", path(&agg), "--metric", "fairness", "--out", path(&svg)]);
    assert!(!out.status.success());
}
