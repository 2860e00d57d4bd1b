use std::path::Path;
use std::process::{Command, Output};

fn longact(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_longact"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("LONGACT_")) {
        cmd.env_remove(k);
    }
    cmd.envs(env.iter().copied());
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn generate_run_evaluate_replay_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for tag in ["a", "b"] {
        let eps = format!("eps-{tag}");
        let run = format!("run-{tag}");
        longact(d, &["generate", "--seed", "40", "--count", "6", "--out", &eps], &[]);
        longact(d, &["run", "--episodes", &eps, "--out", &run, "--parallelism", "3"], &[]);
        let csv = longact(d, &["evaluate", "--episodes", &eps, &format!("{run}/logs")], &[]).stdout;
        std::fs::write(d.join(format!("{tag}.csv")), csv).unwrap();
        let replayed = longact(d, &["replay", "--episodes", &eps, "--manifest", &format!("{run}/manifest.json")], &[]);
        assert_eq!(String::from_utf8_lossy(&replayed.stdout).matches("ok ").count(), 6);
    }
    assert_eq!(read(d.join("eps-a/corpus.json")), read(d.join("eps-b/corpus.json")));
    assert_eq!(read(d.join("run-a/manifest.json")), read(d.join("run-b/manifest.json")));
    assert_eq!(read(d.join("a.csv")), read(d.join("b.csv")));
    let mut logs: Vec<_> = std::fs::read_dir(d.join("run-a/logs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    logs.sort();
    assert_eq!(logs.len(), 6);
    for f in logs {
        assert_eq!(read(d.join("run-a/logs").join(&f)), read(d.join("run-b/logs").join(&f)));
    }
    let csv = String::from_utf8(read(d.join("a.csv"))).unwrap();
    let mean = csv.lines().last().unwrap();
    assert!(mean.starts_with("mean,,1.0000,"), "{mean}");
}

#[test]
fn flag_beats_env_beats_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("longact.toml"), "[generate]\ncount = 3\nout = \"from-file\"\n").unwrap();
    let count = |dir: &str| std::fs::read_dir(d.join(dir)).unwrap().count() - 1;

    longact(d, &["generate"], &[]);
    assert_eq!(count("from-file"), 3);
    longact(d, &["generate", "--out", "env"], &[("LONGACT_COUNT", "2")]);
    assert_eq!(count("env"), 2);
    longact(d, &["generate", "--out", "flag", "--count", "1"], &[("LONGACT_COUNT", "2")]);
    assert_eq!(count("flag"), 1);

    std::fs::write(d.join("other.toml"), "[generate]\ncount = 4\n").unwrap();
    longact(d, &["generate", "--out", "explicit"], &[("LONGACT_CONFIG", "other.toml")]);
    assert_eq!(count("explicit"), 4);
}

#[test]
fn ir_of_a_linear_series_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let series: Vec<String> = (0..=300).map(|t| (t as f64 / 300.0).to_string()).collect();
    std::fs::write(tmp.path().join("s.txt"), series.join("\n")).unwrap();
    let out = longact(tmp.path(), &["ir", "-n", "10", "s.txt"], &[]);
    let v: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(v.abs() < 1e-9, "{v}");
}

#[test]
fn curves_hit_their_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = longact(tmp.path(), &["curves", "--targets", "0,1", "--points", "2"], &[]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "ir,exponent,t,s");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("0,1.000000,0,"), "{}", rows[1]);
}
