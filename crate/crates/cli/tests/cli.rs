use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mfs(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfs"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("run mfs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn vec3(v: &Value) -> [f64; 3] {
    let a = v.as_array().unwrap();
    [a[0].as_f64().unwrap(), a[1].as_f64().unwrap(), a[2].as_f64().unwrap()]
}

#[test]
fn single_sphere_mobility_recovers_stokes_drag() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "run.toml",
        r#"
problem = "mobility"
[discretization]
n = 1000
rp = 0.7
[data]
forces = [[0.0, 0.0, -18.84955592153876]]
"#,
    );
    let out = dir.path().join("out");
    let o = mfs("solve", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(out.join("report.json"));
    assert_eq!(r["solve"]["converged"], Value::Bool(true));
    let v = vec3(&r["outputs"][0]["velocity"]);
    for (got, want) in v.iter().zip([0.0, 0.0, -1.0]) {
        assert!((got - want).abs() <= 1e-8, "{v:?}");
    }
    for f in ["cluster.toml", "solution.json", "strengths.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn strengths_csv_is_lossless() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "run.toml",
        r#"
problem = "resistance"
[geometry]
count = 2
delta = 0.5
[discretization]
n = 80
delta_sep = 0.3
[data]
random = true
"#,
    );
    let out = dir.path().join("out");
    assert_eq!(code(&mfs("solve", &cfg, &out, &[])), 0);
    let sol = json(out.join("solution.json"));
    let csv = fs::read_to_string(out.join("strengths.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("body,node,x,y,z,sx,sy,sz"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (k, j): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        for c in 0..3 {
            let parsed: f64 = f[5 + c].parse().unwrap();
            assert_eq!(parsed, sol["strengths"][k][3 * j + c].as_f64().unwrap());
        }
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = write_config(&dir, "missing.toml", "problem = \"capacitance\"\n[geometry]\nfile = \"nowhere.toml\"\n");
    assert_eq!(code(&mfs("solve", &missing, &out, &[])), 2);
    let zero = write_config(&dir, "zero.toml", "[geometry]\ncount = 10\ndelta = 0.0\n[discretization]\nn = 50\nrp = 0.7\n");
    assert_eq!(code(&mfs("cluster", &zero, &out, &[])), 2);
    let short = write_config(
        &dir,
        "short.toml",
        "problem = \"elastance\"\n[discretization]\nn = 50\nrp = 0.7\n[sweep]\nvariable = \"n\"\nvalues = [50.0, 100.0]\n",
    );
    assert_eq!(code(&mfs("convergence", &short, &out, &[])), 2);
    let bad_problem = write_config(&dir, "bad.toml", "problem = \"heat\"\n[discretization]\nn = 50\nrp = 0.7\n");
    assert_eq!(code(&mfs("solve", &bad_problem, &out, &[])), 2);
    let unknown_key = write_config(&dir, "unknown.toml", "problem = \"elastance\"\nbogus = 1\n");
    assert_eq!(code(&mfs("solve", &unknown_key, &out, &[])), 2);
    let rp_ellipsoid = write_config(
        &dir,
        "rp.toml",
        "problem = \"mobility\"\n[geometry]\nshape = { kind = \"ellipsoid\", axes = [0.4, 0.6, 1.0] }\n[discretization]\nnv = 10\nrp = 0.7\n",
    );
    assert_eq!(code(&mfs("solve", &rp_ellipsoid, &out, &[])), 2);
    assert_eq!(code(&mfs("solve", &rp_ellipsoid, &out, &["--threads", "0"])), 2);
}

#[test]
fn non_convergence_exits_3_with_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "run.toml",
        r#"
problem = "resistance"
[geometry]
count = 4
delta = 0.1
[discretization]
n = 150
rp = 0.7
[solver]
max_iters = 2
tolerance = 1e-14
[data]
random = true
"#,
    );
    let out = dir.path().join("out");
    assert_eq!(code(&mfs("solve", &cfg, &out, &[])), 3);
    let r = json(out.join("report.json"));
    assert_eq!(r["solve"]["converged"], Value::Bool(false));
    assert_eq!(r["solve"]["iterations"], 2);
}

#[test]
fn cluster_files_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "grow.toml", "[geometry]\ncount = 10\ndelta = 0.1\n[discretization]\nn = 100\nrp = 0.7\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&mfs("cluster", &cfg, &a, &["--seed", "1"])), 0);
    assert_eq!(code(&mfs("cluster", &cfg, &b, &["--seed", "1"])), 0);
    let (ta, tb) = (fs::read(a.join("cluster.toml")).unwrap(), fs::read(b.join("cluster.toml")).unwrap());
    assert_eq!(ta, tb);
    let c = dir.path().join("c");
    assert_eq!(code(&mfs("cluster", &cfg, &c, &["--seed", "2"])), 0);
    assert_ne!(ta, fs::read(c.join("cluster.toml")).unwrap());
}

#[test]
fn ellipsoid_cluster_loads_back_with_its_separation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "grow.toml",
        r#"
[geometry]
count = 100
delta = 0.5
orientation = "random"
shape = { kind = "ellipsoid", axes = [0.4, 0.6, 1.0] }
[discretization]
nv = 8
delta_sep = 0.125
"#,
    );
    let out = dir.path().join("out");
    let o = mfs("cluster", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout).to_string();
    let d: f64 = stdout.split("min distance ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!((d - 0.5).abs() <= 1e-6, "{d}");
    let text = fs::read_to_string(out.join("cluster.toml")).unwrap();
    assert_eq!(text.matches("[[particle]]").count(), 100);
    assert!(text.contains("quaternion") && text.contains("nv = 8") && text.contains("delta_sep = 0.125"));
}

fn solve_then_eval(dir: &TempDir, solve_cfg: &str, eval_cfg: &str) -> (Value, PathBuf) {
    let cfg = write_config(dir, "solve.toml", solve_cfg);
    let out = dir.path().join("solve");
    let o = mfs("solve", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let eval = write_config(dir, "eval.toml", &format!("solution = \"solve/solution.json\"\n{eval_cfg}"));
    let field = dir.path().join("field");
    let o = mfs("eval-field", &eval, &field, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (json(out.join("report.json")), field)
}

#[test]
fn surface_grid_matches_reported_residual() {
    let dir = TempDir::new().unwrap();
    let (report, field) = solve_then_eval(
        &dir,
        "problem = \"elastance\"\n[geometry]\ncount = 2\ndelta = 0.3\n[discretization]\nn = 200\nrp = 0.7\n[data]\nvalues = [1.0, -0.5]\n",
        "[targets]\nsurface_multiplier = 2.0\n",
    );
    let reported = report["surface_residual"]["max"].as_f64().unwrap();
    let fr = json(field.join("field_report.json"));
    let max = fr["max_surface_residual"].as_f64().unwrap();
    assert!((max - reported).abs() <= 0.1 * reported, "{max:e} vs {reported:e}");
    assert_eq!(fr["inside"], 0);
}

#[test]
fn far_probe_decays_like_a_stokeslet_and_interior_targets_are_flagged() {
    let dir = TempDir::new().unwrap();
    let (_, field) = solve_then_eval(
        &dir,
        "problem = \"mobility\"\n[discretization]\nn = 300\nrp = 0.7\n[data]\nforces = [[1.0, 0.0, 0.0]]\n",
        "[targets]\npoints = [[0.0, 0.0, 1000.0], [0.1, 0.2, 0.0]]\n",
    );
    let csv = fs::read_to_string(field.join("field.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let ux: f64 = rows[0][4].parse().unwrap();
    let want = 1.0 / (8.0 * std::f64::consts::PI * 1000.0);
    assert!((ux - want).abs() <= 1e-3 * want, "{ux:e} vs {want:e}");
    assert_eq!(rows[1][3], "1");
    assert!(rows[1][4].is_empty());
    assert_eq!(json(field.join("field_report.json"))["inside"], 1);
}

#[test]
fn empty_target_list_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let (_, field) = solve_then_eval(&dir, "problem = \"capacitance\"\n[discretization]\nn = 100\nrp = 0.7\n", "[targets]\npoints = []\n");
    assert_eq!(fs::read_to_string(field.join("field.csv")).unwrap(), "x,y,z,inside,potential,residual\n");
}

#[test]
fn convergence_sweep_writes_monotone_csv_and_rates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.toml",
        r#"
problem = "elastance"
[geometry]
count = 2
delta = 0.5
[discretization]
n = 100
rp = 0.7
[data]
values = [1.0, -1.0]
[sweep]
variable = "n"
values = [100.0, 150.0, 200.0, 300.0, 400.0]
"#,
    );
    let out = dir.path().join("out");
    let o = mfs("convergence", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sweep_value,n,max_residual,output_error,iterations,max_strength,seconds,converged"));
    let values: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 5);
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    let r = json(out.join("report.json"));
    let rate = r["residual_fit"]["rate"].as_f64().expect("residual rate");
    assert!(rate > 0.0 && rate < 1.0);
    assert!(r["accumulation_radius"]["r_acc"].as_f64().unwrap() > 0.0);
}

#[test]
fn ellipsoid_mobility_report_has_table_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "run.toml",
        r#"
problem = "mobility"
seed = 1
[geometry]
count = 20
delta = 0.5
orientation = "random"
shape = { kind = "ellipsoid", axes = [0.4, 0.6, 1.0] }
[discretization]
nv = 12
delta_sep = 0.125
rectangularity = 1.3
[data]
random = true
"#,
    );
    let out = dir.path().join("out");
    let o = mfs("solve", &cfg, &out, &["--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(out.join("report.json"));
    assert!(r["solve"]["iterations"].as_u64().unwrap() > 0);
    assert!(r["solve"]["max_strength"].as_f64().unwrap() > 0.0);
    assert!(r["surface_residual"]["max"].as_f64().unwrap() > 0.0);
    assert_eq!(r["outputs"].as_array().unwrap().len(), 20);
    // the written cluster file reproduces the run
    let again = write_config(&dir, "again.toml", "problem = \"mobility\"\n[geometry]\nfile = \"out/cluster.toml\"\n[data]\nrandom = true\n");
    let out2 = dir.path().join("out2");
    assert_eq!(code(&mfs("solve", &again, &out2, &["--seed", "1"])), 0);
    let r2 = json(out2.join("report.json"));
    let (a, b) = (vec3(&r["outputs"][3]["velocity"]), vec3(&r2["outputs"][3]["velocity"]));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-3), "{a:?} {b:?}");
    }
}
