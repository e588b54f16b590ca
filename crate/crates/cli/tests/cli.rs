use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qrmlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrmlab")).args(args).current_dir(cwd).output().expect("spawn qrmlab")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

/// Every file in `dir`, sorted, with contents.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

const SMALL_FRONTIER: &str = "kind = \"fig2a-frontier\"\nseed = 3\n\
[environment]\ndomains = 60\ntest_domains = 500\n\
[objective]\nalphas = [0.5, 0.9]\n\
[train]\nsteps = 300\npost_pretrain_lr = 0.05\n";

#[test]
fn coefficients_approach_the_causal_predictor() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", "kind = \"fig2c-coefficients\"\n");
    ok(&qrmlab(&["run", "c.toml"], tmp.path()));
    let rows = read_rows(&tmp.path().join("fig2c-coefficients/coefficients.csv"));
    assert_eq!(rows.len(), 7);
    let last = rows.last().unwrap();
    assert_eq!(last[1], "-1000");
    let (b1, b2): (f64, f64) = (last[2].parse().unwrap(), last[3].parse().unwrap());
    assert!((b1 - 1.0).abs() <= 0.05 && b2.abs() <= 0.05, "{last:?}");
    // the effect coefficient shrinks as the level rises
    let b2s: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(b2s.windows(2).all(|w| w[1] < w[0]), "{b2s:?}");
}

#[test]
fn causal_verify_writes_unique() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "v.toml", "kind = \"causal-verify\"\n[verify]\nfixture = \"two-noise\"\n");
    ok(&qrmlab(&["run", "v.toml"], tmp.path()));
    let rows = read_rows(&tmp.path().join("causal-verify/verify.csv"));
    assert_eq!(rows[0][0], "two-noise");
    assert_eq!(rows[0][1], "true");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.toml", SMALL_FRONTIER);
    ok(&qrmlab(&["run", "a.toml", "--out", "one", "--jobs", "1"], tmp.path()));
    ok(&qrmlab(&["run", "a.toml", "--out", "two", "--jobs", "3"], tmp.path()));
    let one = snapshot(&tmp.path().join("one"));
    assert!(one.iter().any(|(n, _)| n == "frontier.csv") && one.iter().any(|(n, _)| n == "frontier.svg"));
    assert_eq!(one, snapshot(&tmp.path().join("two")));
}

#[test]
fn manifest_reruns_the_experiment() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.toml", SMALL_FRONTIER);
    ok(&qrmlab(&["run", "a.toml", "--out", "first"], tmp.path()));
    let first = snapshot(&tmp.path().join("first"));
    ok(&qrmlab(&["run", "first/manifest.csv", "--out", "again"], tmp.path()));
    assert_eq!(first, snapshot(&tmp.path().join("again")));
    // without --out a manifest re-runs into its own directory
    ok(&qrmlab(&["run", "first/manifest.csv"], tmp.path()));
    assert_eq!(first, snapshot(&tmp.path().join("first")));

    let manifest = read_rows(&tmp.path().join("first/manifest.csv"));
    let get = |k: &str| manifest.iter().find(|r| r[0] == k).map(|r| r[1].clone());
    assert_eq!(get("seed").as_deref(), Some("3"));
    assert!(get("build_id").is_some_and(|b| b.starts_with("qrmlab-v")));
    assert_eq!(get("train.steps").as_deref(), Some("300"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.toml", SMALL_FRONTIER);
    ok(&qrmlab(&["run", "a.toml", "--out", "base"], tmp.path()));
    ok(&qrmlab(&["run", "a.toml", "--out", "other", "--seed", "11"], tmp.path()));
    let base = fs::read(tmp.path().join("base/frontier.csv")).unwrap();
    assert_ne!(base, fs::read(tmp.path().join("other/frontier.csv")).unwrap());
    let manifest = read_rows(&tmp.path().join("other/manifest.csv"));
    assert!(manifest.iter().any(|r| r[0] == "seed" && r[1] == "11"));
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let tmp = TempDir::new().unwrap();
    for (i, text) in [
        "kind = \"fig2a-frontier\"\nunknown_key = 1\n",
        "kind = \"fig2a-frontier\"\n[train]\nlearning_rte = 0.1\n",
        "kind = \"fig2a-frontier\"\n[objective]\nalphas = [0.0]\n",
        "kind = \"no-such-kind\"\n",
        "not toml at all",
    ]
    .iter()
    .enumerate()
    {
        write(tmp.path(), &format!("bad{i}.toml"), text);
        let out = qrmlab(&["run", &format!("bad{i}.toml"), "--out", "bad"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!tmp.path().join("bad").exists());
    }
    let missing = qrmlab(&["run", "a.toml", "--bogus-flag"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_and_cleans_up() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "d.toml",
        "kind = \"fig2c-coefficients\"\n[environment]\ndomains = 20\n[train]\nlearning_rate = 40.0\nsteps = 50\n",
    );
    let out = qrmlab(&["run", "d.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("fig2c-coefficients").exists());
}

fn polylines(svg: &str) -> Vec<usize> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .map(|l| l.split("points=\"").nth(1).unwrap().split(' ').count())
        .collect()
}

#[test]
fn plot_kinds() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "two.csv", "x,y\n0,1\n1,3\n");
    ok(&qrmlab(&["plot", "two.csv", "--kind", "line", "--out", "two.svg"], tmp.path()));
    let svg = fs::read_to_string(tmp.path().join("two.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(polylines(&svg), vec![2]);

    write(tmp.path(), "curve.csv", "t,pdf,cdf\n0,0.1,0\n1,0.4,0.5\n2,0.1,1\n");
    ok(&qrmlab(&["plot", "curve.csv", "--kind", "cdf", "--out", "cdf.svg"], tmp.path()));
    let svg = fs::read_to_string(tmp.path().join("cdf.svg")).unwrap();
    assert_eq!(polylines(&svg), vec![3]);
    assert!(svg.contains(">0</text>") && svg.contains(">1</text>"));

    ok(&qrmlab(&["plot", "two.csv", "--kind", "qq", "--out", "qq.svg"], tmp.path()));
    assert!(fs::read_to_string(tmp.path().join("qq.svg")).unwrap().contains("class=\"identity\""));

    write(tmp.path(), "bad.csv", "x,y\n0,oops\n");
    let out = qrmlab(&["plot", "bad.csv", "--kind", "line", "--out", "bad.svg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = qrmlab(&["plot", "two.csv", "--kind", "pdf", "--out", "bad.svg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_subcommand() {
    let tmp = TempDir::new().unwrap();
    let out = qrmlab(&["verify", "two-noise"], tmp.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("unique: true"));
    let out = qrmlab(&["verify", "descendant-twins"], tmp.path());
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("unique: false"), "{text}");

    write(
        tmp.path(),
        "same.toml",
        "[[domains]]\nsigma1 = 1.0\nsigma_y = 1.0\nsigma2 = 1.0\n[[domains]]\nsigma1 = 1.0\nsigma_y = 1.0\nsigma2 = 1.0\n",
    );
    let out = qrmlab(&["verify", "same.toml"], tmp.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("unique: false"));

    assert_eq!(qrmlab(&["verify", "no-such-fixture"], tmp.path()).status.code(), Some(2));
}
