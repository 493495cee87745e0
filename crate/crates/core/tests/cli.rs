use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_coupled-plates");

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL: &str = "n = 24\nd = 1.0\nc = 2.0\ndamping.kind = \"indicator\"\ndamping.omega = [0.7, 1.0]\n\
sweep.lambda_min = 1.0\nsweep.lambda_max = 1.0e3\nsweep.points = 12\nevolve.horizon = 0.5\nevolve.steps = 200\n\
abstract.thetas = [0.5]\nabstract.lambda_max = 1.0e4\nabstract.points = 10\n";

#[test]
fn undamped_spectrum_is_imaginary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 20\ndamping.kind = \"zero\"\n");
    let out = dir.path().join("o");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "re[1/time],im[rad/time]");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 80);
    let top = rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    assert!(rows.iter().all(|r| r.0.abs() <= 1e-10 * top));
    let j = read_json(&out.join("spectrum.json"));
    assert_eq!(j["results"]["axis_count"], 80);
    assert_eq!(j["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn validate_damping_on_smooth_bump_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 50\ndamping.kind = \"smooth\"\ndamping.omega = [0.6, 1.0]\n");
    let out = dir.path().join("o");
    let o = run(&["validate-damping", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let j = read_json(&out.join("validate-damping.json"));
    assert_eq!(j["results"]["pass"], true);
    assert!(j["results"]["m1"].as_f64().unwrap().is_finite());
    assert!(j["results"]["m2"].as_f64().unwrap().is_finite());
}

#[test]
fn bad_configs_are_rejected_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [("foo = 1\n", "foo"), ("d = -1\n", "`d`")] {
        let cfg = write_config(dir.path(), text);
        let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for sub in ["spectrum", "resolvent-sweep", "evolve", "abstract-sweep"] {
        let mut seen = Vec::new();
        for (k, threads) in ["1", "3"].iter().enumerate() {
            let out = dir.path().join(format!("{sub}-{k}"));
            let o = run(&[
                sub,
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "11",
                "--threads",
                threads,
            ]);
            assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
            let mut files: Vec<(String, String)> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .map(|p| {
                    let name = p.file_name().unwrap().to_string_lossy().into_owned();
                    let body = if name.ends_with(".json") {
                        let mut v = read_json(&p);
                        v.as_object_mut().unwrap().remove("timing_seconds");
                        v.to_string()
                    } else {
                        std::fs::read_to_string(&p).unwrap()
                    };
                    (name, body)
                })
                .collect();
            files.sort();
            seen.push(files);
        }
        assert!(!seen[0].is_empty());
        assert_eq!(seen[0], seen[1], "{sub} output differs between runs");
    }
}

#[test]
fn csv_headers_name_units() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    for sub in ["resolvent-sweep", "evolve", "abstract-sweep"] {
        let o = run(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in ["sweep.csv", "peaks.csv", "trace.csv", "theta.csv", "theta_samples.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.split(',').all(|c| c.contains('[') && c.ends_with(']')), "{f}: {header}");
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 202);
    assert!(trace.lines().next().unwrap().starts_with("t[time],energy[energy],q_energy"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        coupled_plates::config::parse_config(&p).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
        count += 1;
    }
    assert!(count >= 4);
}
