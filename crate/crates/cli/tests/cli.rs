use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use chordcorr_core::ensemble::{load_ensemble, SyntheticSpec};

fn chordcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordcorr")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a two-cluster ensemble and returns its path.
fn synth_file(dir: &TempDir, dims: &str, members: &str) -> PathBuf {
    let out = dir.path().join("synth.cens");
    let o = chordcorr(&["gen-synth", "--dims", dims, "--members", members, "--seed", "7", "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

/// Pearson correlation in plain two-pass form.
fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn gen_synth_round_trips() {
    let dir = TempDir::new().unwrap();
    let f = synth_file(&dir, "8,8,4", "12");
    let g = load_ensemble(&f).unwrap();
    assert_eq!(g.dims().as_array(), [8, 8, 4]);
    assert_eq!(g.members(), 12);
}

#[test]
fn gen_synth_reports_spec_line() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "dims = [8, 8, 4]\nmembers = 10\n\n[[cluster]]\ncenter = [1, 2]\nradius = 2.0\n").unwrap();
    let o = chordcorr(&["gen-synth", "--spec", p(&spec), "-o", p(&dir.path().join("x.cens"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn exhaustive_context_matches_brute_force() {
    let dir = TempDir::new().unwrap();
    let f = synth_file(&dir, "8,8,4", "16");
    let json = dir.path().join("c.json");
    let o = chordcorr(&["context", "-i", p(&f), "--brick-edge", "4", "--strategy", "exhaustive", "--json", p(&json)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let g = load_ensemble(&f).unwrap();
    let dims = g.dims();
    let series = |q: [usize; 3]| -> Vec<f64> {
        let v = dims.linear(q);
        (0..g.members()).map(|m| g.value(0, m, v) as f64).collect()
    };
    let brick = |n: &Value| -> Vec<[usize; 3]> {
        let lo: Vec<usize> = n["brick"]["lo"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        let hi: Vec<usize> = n["brick"]["hi"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        let mut out = Vec::new();
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    out.push([x, y, z]);
                }
            }
        }
        out
    };
    let nodes = d["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 4);
    assert_eq!(d["candidate_edges"], 6);
    for e in d["edges"].as_array().unwrap() {
        let (a, b) = (e["a"].as_u64().unwrap() as usize, e["b"].as_u64().unwrap() as usize);
        let mut best = f64::NEG_INFINITY;
        for p in brick(&nodes[a]) {
            let x = series(p);
            for q in brick(&nodes[b]) {
                best = best.max(pearson(&x, &series(q)));
            }
        }
        let v = e["value"].as_f64().unwrap();
        assert!((v - best).abs() < 1e-9, "edge {}: {v} vs {best}", e["id"]);
    }
}

#[test]
fn context_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let f = synth_file(&dir, "16,16,4", "20");
    let run = |tag: &str| {
        let (j, s) = (dir.path().join(format!("{tag}.json")), dir.path().join(format!("{tag}.svg")));
        let o = chordcorr(&[
            "context", "-i", p(&f), "--brick-edge", "8", "--strategy", "bos", "--budget", "24", "--acq-budget", "100",
            "--seed", "5", "--json", p(&j), "--svg", p(&s),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(j).unwrap(), std::fs::read(s).unwrap())
    };
    let (j1, s1) = run("a");
    let (j2, s2) = run("b");
    assert_eq!(j1, j2);
    assert_eq!(s1, s2);
    assert!(String::from_utf8(s1).unwrap().contains("<svg"));
}

#[test]
fn two_clusters_show_a_strong_inter_cluster_edge() {
    let dir = TempDir::new().unwrap();
    let f = synth_file(&dir, "16,16,4", "30");
    let spec = SyntheticSpec::two_cluster([16, 16, 4], 30, 7);
    let o = chordcorr(&["context", "-i", p(&f), "--brick-edge", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let nodes = d["nodes"].as_array().unwrap();
    let cluster_of = |n: &Value| -> Option<usize> {
        let lo: Vec<usize> = n["brick"]["lo"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        let hi: Vec<usize> = n["brick"]["hi"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        let mut found = None;
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    if spec.weight([x, y, z]).0 >= 1.0 {
                        found = spec.nearest_cluster([x, y, z]).map(|c| c.0);
                    }
                }
            }
        }
        found
    };
    let strong = d["edges"].as_array().unwrap().iter().filter(|e| {
        let ca = cluster_of(&nodes[e["a"].as_u64().unwrap() as usize]);
        let cb = cluster_of(&nodes[e["b"].as_u64().unwrap() as usize]);
        matches!((ca, cb), (Some(x), Some(y)) if x != y) && e["value"].as_f64().unwrap() >= 0.99
    });
    assert!(strong.count() >= 1);
}

#[test]
fn matrix_mode_and_single_variable_fallback() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("two.toml");
    std::fs::write(
        &spec,
        "dims = [8, 8, 4]\nmembers = 16\nvariables = [\"t\", \"q\"]\n\n[[cluster]]\ncenter = [2, 2, 2]\nradius = 3.0\n",
    )
    .unwrap();
    let o = chordcorr(&["context", "--synth", p(&spec), "--variables", "t,q", "--brick-edge", "4", "--matrix"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(d["mode"], "matrix");
    let cells = d["matrix"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|r| r.as_array().unwrap().len() == 4));

    let o = chordcorr(&["context", "--synth", p(&spec), "--variables", "t", "--brick-edge", "4", "--matrix"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("two variables"));
    let d: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(d["mode"], "context");
}

#[test]
fn bench_csv_shape_and_summary() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("b.csv");
    let o = chordcorr(&[
        "bench", "--brick", "8,8,8", "--pairs", "2", "--runs", "2", "--acq-budget", "80", "-o", p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "strategy,budget,run,pair_id,normalized_error,elapsed_ms");
    assert_eq!(text.lines().count(), 1 + 4 * 3 * 2 * 2);
    let summary: Vec<String> = stderr(&o).lines().skip(1).map(str::to_string).collect();
    assert_eq!(summary.len(), 12);
    for s in ["uniform_random", "halton", "plastic", "bos"] {
        assert_eq!(summary.iter().filter(|l| l.starts_with(s)).count(), 3);
    }
}

#[test]
fn bench_full_budget_has_zero_error() {
    let o = chordcorr(&["bench", "--brick", "3,3,2", "--pairs", "3", "--runs", "2", "--budgets", "324"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for line in stdout(&o).lines().skip(1) {
        assert_eq!(line.split(',').nth(4), Some("0"), "{line}");
    }
}

#[test]
fn bench_bos_beats_uniform() {
    let o = chordcorr(&[
        "bench", "--brick", "16,16,16", "--pairs", "5", "--runs", "2", "--budgets", "100", "--strategies", "uniform,bos",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = |s: &str| -> f64 {
        let rows: Vec<f64> = stdout(&o)
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(s))
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    assert!(err("bos") < err("uniform_random"), "bos {} uniform {}", err("bos"), err("uniform_random"));
}

#[test]
fn bench_dataset_oracle() {
    let dir = TempDir::new().unwrap();
    let f = synth_file(&dir, "8,8,4", "16");
    let o = chordcorr(&[
        "bench", "--oracle", "dataset", "-i", p(&f), "--brick-edge", "4", "--pairs", "3", "--runs", "1", "--budgets",
        "10,4096", "--strategies", "halton",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(str::to_string).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().filter(|l| l.contains(",4096,")).all(|l| l.split(',').nth(4) == Some("0")));
}

const QUICK: [&str; 16] = [
    "--seeds", "3", "--samples", "500", "--knn-instances", "20", "--fidelity-pairs", "4", "--fidelity-runs", "1",
    "--fidelity-strategy", "uniform", "--fidelity-budget", "20", "--fidelity-members", "20",
];

#[test]
fn validate_reports_every_criterion() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let mut args = vec!["validate", "-o", p(&report)];
    args.extend(QUICK);
    let o = chordcorr(&args);
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", stderr(&o));
    let out = stdout(&o);
    for name in ["gaussian_mi_rho_0", "gaussian_mi_rho_0.5", "gaussian_mi_rho_0.9", "knn_tree_equals_brute_force"] {
        assert!(out.lines().any(|l| l.starts_with(&format!("PASS {name}:"))), "{out}");
    }
    for f in [1, 2, 4] {
        assert!(out.contains(&format!("aggregate_fidelity_f{f}:")), "{out}");
    }
    assert!(out.contains("reference 1.6%"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["criteria"].as_array().unwrap().len(), 7);
    assert_eq!(r["passed"] == true, o.status.code() == Some(0));
}

#[test]
fn perturbed_digamma_fails_validation() {
    let mut args = vec!["validate", "--perturb-digamma"];
    args.extend(QUICK);
    let o = chordcorr(&args);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL gaussian_mi")));
}

#[test]
fn usage_and_data_errors() {
    assert_eq!(chordcorr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(chordcorr(&["context"]).status.code(), Some(2));
    assert_eq!(chordcorr(&["context", "-i", "/no/such.cens", "--strategy", "sideways"]).status.code(), Some(2));
    assert_eq!(chordcorr(&["context", "-i", "/no/such.cens"]).status.code(), Some(3));
    assert_eq!(chordcorr(&["bench", "--oracle", "magic"]).status.code(), Some(2));
    assert_eq!(chordcorr(&["serve", "--memory-budget", "0"]).status.code(), Some(2));
}
