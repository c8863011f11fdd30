use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_smoothlab");

fn run(args: &[&str], root: &Path) -> Output {
    Command::new(BIN).args(args).env("SMOOTHLAB_OUTPUT_ROOT", root).output().expect("spawn smoothlab")
}

fn tiny_config(dir: &Path, run_id: &str) -> std::path::PathBuf {
    let p = dir.join(format!("{run_id}.toml"));
    std::fs::write(
        &p,
        format!(
            r#"run_id = "{run_id}"
total_steps = 1300
warmup_steps = 1000
eval_interval = 650
eval_episodes = 2
seeds = [3]

[env]
type = "wave"
wave = "square"

[agent]
algorithm = "td3"
hidden = [8, 8]
batch_size = 16

[regularizer]
kind = "caps"
lambda_t = 0.5
"#
        ),
    )
    .unwrap();
    p
}

#[test]
fn help_and_version_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"], d.path()).status.code(), Some(0));
    assert_eq!(run(&["--version"], d.path()).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], d.path()).status.code(), Some(1));
    assert_eq!(run(&["train"], d.path()).status.code(), Some(1));
}

#[test]
fn loss_inspect_reads_stdin() {
    let mut child = Command::new(BIN)
        .args(["loss-inspect", "--input", "-", "--mode", "tanh"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"0,2,4,6,8,10\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row,caps,gradcaps_raw,gradcaps_tanh");
    let f: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(f[0], 1.0);
    assert_eq!(f[1], 20f64.sqrt());
    assert_eq!(f[2], 0.0);
    assert_eq!(f[3], 0.0);
}

#[test]
fn loss_inspect_rejects_short_rows_and_missing_files() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("short.csv");
    std::fs::write(&p, "1,2\n").unwrap();
    let out = run(&["loss-inspect", "--input", p.to_str().unwrap()], d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 3"));
    let out = run(&["loss-inspect", "--input", "/nonexistent/x.csv"], d.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_eval_report_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path().join("runs");
    let cfg = tiny_config(d.path(), "rt");
    let out = run(&["train", "--config", cfg.to_str().unwrap()], &root);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = root.join("rt");
    for f in ["manifest.json", "config.toml", "seed3_metrics.csv", "seed3_best.json", "seed3_trace.csv"] {
        assert!(run_dir.join(f).is_file(), "missing {f}");
    }

    let again = run(&["train", "--config", cfg.to_str().unwrap()], &root);
    assert_eq!(again.status.code(), Some(1));

    let ckpt = run_dir.join("seed3_best.json");
    let ev = run(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "2"], &root);
    assert_eq!(ev.status.code(), Some(0));
    let text = String::from_utf8(ev.stdout).unwrap();
    assert!(text.starts_with("mean_return,std_return,action_fluctuation"));

    let rep = run(&["report", "--runs", run_dir.to_str().unwrap()], &root);
    assert_eq!(rep.status.code(), Some(0), "{}", String::from_utf8_lossy(&rep.stderr));
    for f in ["comparison.csv", "overlay.csv", "overlay.svg"] {
        assert!(root.join("report").join(f).is_file(), "missing report/{f}");
    }
}

#[test]
fn seed_override_replaces_seed_list() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path().join("runs");
    let cfg = tiny_config(d.path(), "ov");
    let out = run(&["train", "--config", cfg.to_str().unwrap(), "--seed", "9"], &root);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("ov/seed9_metrics.csv").is_file());
    assert!(!root.join("ov/seed3_metrics.csv").exists());
}

#[test]
fn non_finite_policy_is_a_runtime_abort() {
    let d = tempfile::tempdir().unwrap();
    let root = d.path().join("runs");
    let cfg = tiny_config(d.path(), "nf");
    assert!(run(&["train", "--config", cfg.to_str().unwrap()], &root).status.success());
    let ckpt = root.join("nf/seed3_best.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ckpt).unwrap()).unwrap();
    let mut k = 0u64;
    blow_up(&mut v["policy"]["net"], &mut k);
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = run(&["eval", "--checkpoint", bad.to_str().unwrap()], &root);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

fn blow_up(v: &mut serde_json::Value, k: &mut u64) {
    match v {
        serde_json::Value::Array(a) => a.iter_mut().for_each(|x| blow_up(x, k)),
        serde_json::Value::Object(o) => o.values_mut().for_each(|x| blow_up(x, k)),
        serde_json::Value::Number(n) if n.is_f64() => {
            *k += 1;
            *v = serde_json::json!(if (*k).is_multiple_of(2) { 1e300 } else { -1e300 });
        }
        _ => {}
    }
}
