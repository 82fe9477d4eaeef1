use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BALL: &str = r#"
[profile]
kind = "spaceform-hyperbolic"
n = 2

[domain]
boundary = { kind = "geodesic-ball", radius = 1.0 }
topology = "null-homologous"

[solver]
h = 0.04
"#;

const SCHWARZSCHILD: &str = r#"
[profile]
kind = "schwarzschild"
n = 2
kappa = 0
mass = 0.5

[experiment]
kind = "verify-hypotheses"
grid_points = 100
random_points = 40
"#;

fn warpstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpstab"))
        .args(args)
        .env_remove("WARPSTAB_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    warpstab(&args)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn f(v: &Value, pointer: &str) -> f64 {
    v.pointer(pointer).and_then(Value::as_f64).unwrap_or_else(|| panic!("missing {pointer}"))
}

#[test]
fn solve_serrin_on_a_hyperbolic_ball_matches_the_radial_solution() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "ball.toml", BALL);
    let out = tmp.path().join("run");
    let o = run("solve-serrin", &cfg, &out, &["--h", "0.02", "--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let r = report(&out);
    assert_eq!(r["schema"], "warpstab-report/1");
    assert_eq!(r["kind"], "solve-serrin");
    assert!(f(&r, "/result/oracle_max_error") < 1e-6);
    let exact_flux = 1f64.tanh() / 3.0;
    assert!((f(&r, "/result/deficits/serrin/r_constant") - exact_flux).abs() < 1e-6);
    for c in ["source", "primitive", "second_primitive"] {
        assert!(f(&r, &format!("/result/deficits/serrin/{c}")) < 1e-5, "{c}");
    }
    // the Neumann part is an integral over M; its area average is the pointwise scale
    let area = f(&r, "/result/boundary_area");
    assert!(f(&r, "/result/deficits/serrin/neumann") / area < 1e-5);
    assert!(f(&r, "/result/deficits/hk/deficit").abs() < 1e-10);

    let csv = std::fs::read_to_string(out.join("field.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,s,f,f_r,f_s"));
    assert_eq!(lines.count() as f64, f(&r, "/result/nodes"));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["created_unix_seconds"].as_u64().unwrap() > 0);
    assert!(r.get("created_unix_seconds").is_none());
}

#[test]
fn schwarzschild_passes_all_five_hypotheses() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "sch.toml", SCHWARZSCHILD);
    let out = tmp.path().join("hyp");
    let o = run("verify-hypotheses", &cfg, &out, &["--strict"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    let records = r["result"]["records"].as_array().unwrap();
    assert_eq!(records.len(), 5);
    for (rec, name) in records.iter().zip(["H1", "H2", "H3", "H4", "H5"]) {
        assert_eq!(rec["hypothesis"], name);
        assert_eq!(rec["pass"], true, "{rec}");
        for key in ["witness_r", "value"] {
            assert!(rec[key].is_number());
        }
    }
    assert_eq!(r["result"]["grid_size"], 140);
}

#[test]
fn identical_config_and_seed_give_identical_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "sch.toml", SCHWARZSCHILD);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for dir in [&a, &b] {
        assert!(run("verify-hypotheses", &cfg, dir, &["--seed", "11"]).status.success());
    }
    assert!(run("verify-hypotheses", &cfg, &c, &["--seed", "12"]).status.success());
    let read = |d: &Path| std::fs::read(d.join("report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let ball = write_config(&tmp, "ball.toml", BALL);
    let (d, e) = (tmp.path().join("d"), tmp.path().join("e"));
    for dir in [&d, &e] {
        assert!(run("solve-warped", &ball, dir, &[]).status.success());
    }
    assert_eq!(read(&d), read(&e));
    assert_eq!(std::fs::read(d.join("field.csv")).unwrap(), std::fs::read(e.join("field.csv")).unwrap());
}

#[test]
fn malformed_configs_exit_2_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("syntax.toml", "[profile\nkind = 1"),
        ("unknown.toml", &format!("{BALL}\nresolution = 3\n")),
        ("nested.toml", &BALL.replace("h = 0.04", "h = 0.04\nmesh = \"fine\"")),
        ("range.toml", &BALL.replace("radius = 1.0", "radius = -2.0")),
        ("horizonless.toml", "[profile]\nkind = \"schwarzschild\"\nn = 2\nkappa = -1\nmass = 0.5\n"),
    ];
    for (name, text) in cases {
        let cfg = write_config(&tmp, name, text);
        let out = tmp.path().join(name.replace(".toml", ""));
        let command = if name == "horizonless.toml" { "verify-hypotheses" } else { "hk-deficit" };
        let o = run(command, &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} produced outputs");
    }
    let missing = run("cmc-deficit", &tmp.path().join("absent.toml"), &tmp.path().join("x"), &[]);
    assert_eq!(missing.status.code(), Some(2));

    let cfg = write_config(&tmp, "sch.toml", SCHWARZSCHILD);
    let o = run("solve-serrin", &cfg, &tmp.path().join("wrong-kind"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_3() {
    let tmp = TempDir::new().unwrap();
    let starved = write_config(&tmp, "starved.toml", &BALL.replace("h = 0.04", "h = 0.04\nlinear_max_iter = 1"));
    let out = tmp.path().join("starved");
    assert_eq!(run("solve-serrin", &starved, &out, &[]).status.code(), Some(3));
    assert!(!out.exists());

    let flower = BALL.replace(
        "{ kind = \"geodesic-ball\", radius = 1.0 }",
        "{ kind = \"cosine-series\", r0 = 1.0, coeffs = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.15] }",
    );
    let flower = write_config(&tmp, "flower.toml", &flower);
    assert_eq!(run("hk-deficit", &flower, &tmp.path().join("flower"), &[]).status.code(), Some(3));
}

#[test]
fn strict_mode_turns_failed_checks_into_exit_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "hyp.toml", "[profile]\nkind = \"spaceform-hyperbolic\"\nn = 2\n");
    let lax = tmp.path().join("lax");
    assert_eq!(run("verify-hypotheses", &cfg, &lax, &[]).status.code(), Some(0));
    let strict = tmp.path().join("strict");
    assert_eq!(run("verify-hypotheses", &cfg, &strict, &["--strict"]).status.code(), Some(4));
    let r = report(&strict);
    assert_eq!(r["result"]["records"][0]["pass"], false);
    assert_eq!(std::fs::read(lax.join("report.json")).unwrap(), std::fs::read(strict.join("report.json")).unwrap());

    let ball = write_config(&tmp, "ball.toml", &format!("{BALL}\n[tolerances]\nidentity = 1e-12\nidentity_absolute = 0.0\n"));
    let ids = format!("{}\n[experiment]\nkind = \"identities\"\nproblem = \"serrin\"\nlevels = 1\n", std::fs::read_to_string(&ball).unwrap());
    let ids = write_config(&tmp, "ids.toml", &ids);
    assert_eq!(run("identities", &ids, &tmp.path().join("ids"), &["--strict"]).status.code(), Some(4));
}

#[test]
fn compare_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "ball.toml", BALL);
    let (coarse, fine) = (tmp.path().join("coarse"), tmp.path().join("fine"));
    assert!(run("solve-serrin", &cfg, &coarse, &[]).status.success());
    assert!(run("solve-serrin", &cfg, &fine, &["--h", "0.02"]).status.success());
    let path = |d: &Path| d.join("report.json").to_str().unwrap().to_string();

    let same = warpstab(&["compare", &path(&coarse), &path(&coarse), "--rel-tol", "0"]);
    assert_eq!(same.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&same.stdout).contains("max relative difference 0e0"));

    let diff_file = tmp.path().join("diff.json");
    let refined = warpstab(&["compare", &path(&coarse), &path(&fine), "--out", diff_file.to_str().unwrap()]);
    assert_eq!(refined.status.code(), Some(1));
    let diff: Value = serde_json::from_str(&std::fs::read_to_string(&diff_file).unwrap()).unwrap();
    let entry = |p: &str| diff["diffs"].as_array().unwrap().iter().find(|d| d["path"] == p).unwrap().clone();
    // the nodal error of quadratic elements drops by at least 2^2 when h is halved
    let e = entry("/oracle_max_error");
    let ratio = e["a"].as_f64().unwrap() / e["b"].as_f64().unwrap();
    assert!(ratio > 4.0, "ratio {ratio}");
    let relative = e["relative"].as_f64().unwrap();
    assert!((relative - (1.0 - 1.0 / ratio)).abs() < 1e-12);

    let hk = tmp.path().join("hk");
    assert!(run("hk-deficit", &cfg, &hk, &[]).status.success());
    assert_eq!(warpstab(&["compare", &path(&coarse), &path(&hk)]).status.code(), Some(2));
}

#[test]
fn sweep_and_identities_write_tables() {
    let tmp = TempDir::new().unwrap();
    let sweep = r#"
[profile]
kind = "schwarzschild"
n = 2
mass = 0.5

[experiment]
kind = "sweep"
r0 = 1.2
coeffs = [0.0, 1.0]
amplitudes = [0.1, 0.0, 0.05, 0.02]
problem = { kind = "heintze-karcher" }
topology = "homologous"
"#;
    let cfg = write_config(&tmp, "sweep.toml", sweep);
    let out = tmp.path().join("sweep");
    assert_eq!(run("sweep", &cfg, &out, &["--strict"]).status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,deficit,ring_a_norm,slice_distance,energy");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("# exponent_ring="));
    let ts: Vec<f64> = lines[1..5].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts, [0.0, 0.02, 0.05, 0.1]);
    for i in 0..4 {
        let member: Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(format!("members/member_{i:03}.json"))).unwrap())
                .unwrap();
        assert_eq!(member["t"].as_f64().unwrap(), ts[i]);
        assert!(member["report"]["hk"]["deficit"].is_number());
    }

    let ids = format!("{BALL}\n[experiment]\nkind = \"identities\"\nproblem = \"serrin\"\nlevels = 2\n");
    let ids = write_config(&tmp, "ids.toml", &ids);
    let out = tmp.path().join("ids");
    assert_eq!(run("identities", &ids, &out, &["--h", "0.08", "--strict"]).status.code(), Some(0));
    let table = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(table.starts_with("id,h,residual,order\n"));
    for id in ["divergence", "reilly", "pohozaev", "serrin-master"] {
        assert_eq!(table.lines().filter(|l| l.starts_with(&format!("{id},"))).count(), 2, "{id}\n{table}");
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "sch.toml", SCHWARZSCHILD);
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_warpstab"))
        .args(["verify-hypotheses", "--config", cfg.to_str().unwrap()])
        .env("WARPSTAB_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(root.join("sch").join("report.json").exists());
}
