use std::path::Path;
use std::process::{Command, Output};

use quadric_cli::config::{Axis, Command as Job, PointSet, QuadricSource, Syntax};
use quadric_cli::{emit_config, parse_config};
use quadric_core::closed_forms::{product_heisenberg_szego, Preset};
use quadric_core::Complex64;
use tempfile::TempDir;

fn quadric(dir: &Path, name: &str, text: &str, args: &[&str]) -> Output {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    Command::new(env!("CARGO_BIN_EXE_quadric"))
        .arg("--config")
        .arg(&path)
        .args(args)
        .output()
        .unwrap()
}

fn rows(csv_text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let body = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (head, body)
}

fn col(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn config_round_trips_for_every_preset() {
    for preset in Preset::catalog() {
        let n = preset.quadric().n();
        let m = preset.quadric().m();
        let axes: Vec<String> = (0..2 * n + m)
            .map(|i| format!("{{ min = {}, max = 0.7, count = 3 }}", 0.1 * i as f64 - 0.3))
            .collect();
        let text = format!(
            "command = \"green\"\nq = 0\n[quadric]\npreset = \"{preset}\"\n[grid]\naxes = [{}]\n[quadrature]\nrel_tol = 1e-7\nsphere_rule = \"ADAPTIVE_ANGLES\"\n[output]\npath = \"out.csv\"\nformat = \"json\"\n",
            axes.join(", ")
        );
        let job = parse_config(&text).unwrap();
        assert_eq!(job.quadric, QuadricSource::Preset(preset.clone()));
        for syntax in [Syntax::Toml, Syntax::Json] {
            let back = parse_config(&emit_config(&job, syntax)).unwrap();
            assert_eq!(back, job, "{preset} via {syntax:?}");
        }
    }
}

#[test]
fn inline_config_round_trips_bit_exactly() {
    let text = r#"{
        "command": "szego", "q": 1, "K": [2],
        "quadric": {"matrices": [
            [[[0.1, 0.0], [0.30000000000000004, -0.7]], [[0.30000000000000004, 0.7], [-1e-300, 0.0]]],
            [[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [3.0, 0.0]]]]},
        "points": [{"z": [[0.1, 0.2], [1e-17, -0.5]], "t": [0.25, -1.0]}]
    }"#;
    let job = parse_config(text).unwrap();
    for syntax in [Syntax::Toml, Syntax::Json] {
        assert_eq!(parse_config(&emit_config(&job, syntax)).unwrap(), job);
    }
}

#[test]
fn spectrum_scales_with_lambda() {
    let dir = TempDir::new().unwrap();
    let o = quadric(
        dir.path(),
        "s.toml",
        "command = \"spectrum\"\nlambda = [[0.0, 2.0], [3.0, 4.0]]\n[quadric]\npreset = \"M2\"\n",
        &[],
    );
    let (head, body) = rows(&stdout(&o));
    let mu1 = col(&head, "mu_1");
    let mu2 = col(&head, "mu_2");
    for (row, norm) in body.iter().zip([2.0, 5.0]) {
        let a: f64 = row[mu1].parse().unwrap();
        let b: f64 = row[mu2].parse().unwrap();
        assert!((a - norm).abs() < 1e-13 && (b + norm).abs() < 1e-13, "{row:?}");
        assert_eq!(row[col(&head, "n_plus")], "1");
        assert_eq!(row[col(&head, "n_minus")], "1");
    }
}

#[test]
fn classify_m2_table() {
    let dir = TempDir::new().unwrap();
    let o = quadric(dir.path(), "c.toml", "command = \"classify\"\n[quadric]\npreset = \"M2\"\n", &[]);
    let (head, body) = rows(&stdout(&o));
    assert_eq!(body.len(), 3);
    for (q, row) in body.iter().enumerate() {
        let expect = if q == 1 { "false" } else { "true" };
        assert_eq!(row[col(&head, "solvable")], expect);
        assert_eq!(row[col(&head, "hypoelliptic")], expect);
        assert_eq!(row[col(&head, "signature_set")], "(1,1)");
    }
}

#[test]
fn gamma_of_product_heisenberg_top_degree() {
    let dir = TempDir::new().unwrap();
    let o = quadric(
        dir.path(),
        "g.toml",
        "command = \"gamma\"\nq = 2\n[quadric]\npreset = \"product-heisenberg:1,1\"\n",
        &[],
    );
    let (head, body) = rows(&stdout(&o));
    assert_eq!(body.len(), 1);
    assert_eq!(body[0][col(&head, "L")], "1|2");
    assert_eq!(body[0][col(&head, "nonempty")], "true");
    let frac: f64 = body[0][col(&head, "sphere_fraction")].parse().unwrap();
    assert!((frac - 0.25).abs() < 0.01, "{frac}");
}

#[test]
fn green_on_m2_grid_follows_the_power_law() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"green\"\n[quadric]\npreset = \"M2\"\n[grid]\naxes = [\
        { min = 0.3, max = 0.9, count = 2 }, { min = 0.1, max = 0.1, count = 1 },\
        { min = -0.4, max = -0.4, count = 1 }, { min = 0.0, max = 0.5, count = 2 },\
        { min = -0.5, max = 0.5, count = 2 }, { min = 0.2, max = 0.2, count = 1 }]\n";
    let o = quadric(dir.path(), "m2.toml", text, &["--threads", "2"]);
    let (head, body) = rows(&stdout(&o));
    assert_eq!(body.len(), 8);
    let get = |row: &Vec<String>, name: &str| -> f64 { row[col(&head, name)].parse().unwrap() };
    let consts: Vec<f64> = body
        .iter()
        .map(|r| {
            let z2: f64 = ["z_1_re", "z_1_im", "z_2_re", "z_2_im"].iter().map(|c| get(r, c).powi(2)).sum();
            let t2 = get(r, "t_1").powi(2) + get(r, "t_2").powi(2);
            assert_eq!(r[col(&head, "formula_used")], "N_NO_SZEGO");
            assert!(get(r, "value_im").abs() < 1e-9 * get(r, "value_re").abs());
            get(r, "value_re") * (z2 * z2 + t2).powf(1.5)
        })
        .collect();
    for c in &consts {
        assert!((c - consts[0]).abs() < 1e-6 * consts[0].abs(), "{consts:?}");
    }
}

#[test]
fn szego_on_product_heisenberg_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"command": "szego", "quadric": {"preset": "product-heisenberg:1,1"},
        "points": [{"z": [[0.3, 0.1], [-0.5, 0.8]], "t": [0.7, -1.2]},
                   {"z": [[1.0, 0.0], [0.0, 0.2]], "t": [0.0, 0.4]}]}"#;
    let out = dir.path().join("sz.csv");
    let o = quadric(dir.path(), "sz.json", text, &["--out", out.to_str().unwrap()]);
    assert!(stdout(&o).is_empty());
    let (head, body) = rows(&std::fs::read_to_string(out).unwrap());
    let get = |row: &Vec<String>, name: &str| -> f64 { row[col(&head, name)].parse().unwrap() };
    for r in &body {
        let z = [
            Complex64::new(get(r, "z_1_re"), get(r, "z_1_im")),
            Complex64::new(get(r, "z_2_re"), get(r, "z_2_im")),
        ];
        let exact = product_heisenberg_szego(&z, &[get(r, "t_1"), get(r, "t_2")]).unwrap();
        let v = Complex64::new(get(r, "value_re"), get(r, "value_im"));
        assert!((v - exact).norm() < 1e-8 * exact.norm(), "{v} vs {exact}");
        assert_eq!(r[col(&head, "Kprime")], "");
        assert_eq!(r[col(&head, "formula_used")], "SZEGO");
    }
}

#[test]
fn form_output_has_one_row_per_component() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"green\"\nq = 1\nK = [2]\n[quadric]\npreset = \"M3\"\n\
        [[points]]\nz = [[0.6, 0.1], [-0.2, 0.4]]\nt = [0.3, -0.2]\n";
    let o = quadric(dir.path(), "f.toml", text, &["--tol", "1e-6"]);
    let (head, body) = rows(&stdout(&o));
    let ks: Vec<&str> = body.iter().map(|r| r[col(&head, "Kprime")].as_str()).collect();
    assert_eq!(ks, ["1", "2"]);
}

#[test]
fn heat_rows_reach_szego_for_large_times() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"heat\"\nlambda = [[-1.0]]\ns = [0.5, 40.0]\nL = []\n\
        [quadric]\npreset = \"heisenberg:1\"\n[[points]]\nz = [[0.3, 0.2]]\n";
    let o = quadric(dir.path(), "h.toml", text, &[]);
    let (head, body) = rows(&stdout(&o));
    let get = |row: &Vec<String>, name: &str| -> f64 { row[col(&head, name)].parse().unwrap() };
    let sz = 4.0 / (2.0 * std::f64::consts::PI).powf(1.5) * (-0.13f64).exp();
    assert!((get(&body[1], "szego") - sz).abs() < 1e-15);
    assert!((get(&body[1], "heat") - sz).abs() < 1e-12);
    assert!(get(&body[0], "heat") > sz);
}

#[test]
fn output_is_deterministic_across_threads() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"green\"\n[quadric]\npreset = \"heisenberg:2\"\n[grid]\naxes = [\
        { min = -1.0, max = 1.0, count = 3 }, { min = 0.5, max = 0.5, count = 1 },\
        { min = 0.0, max = 0.0, count = 1 }, { min = 0.2, max = 0.4, count = 2 },\
        { min = -1.0, max = 1.0, count = 3 }]\n";
    let a = stdout(&quadric(dir.path(), "d.toml", text, &["--threads", "1"]));
    let b = stdout(&quadric(dir.path(), "d.toml", text, &["--threads", "4"]));
    assert_eq!(a, b);
    assert_eq!(rows(&a).1.len(), 18);
}

#[test]
fn json_output_format() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"classify\"\nq = 0\n[quadric]\npreset = \"M1\"\n[output]\nformat = \"json\"\n";
    let v: serde_json::Value = serde_json::from_str(&stdout(&quadric(dir.path(), "j.toml", text, &[]))).unwrap();
    assert_eq!(v[0]["q"], 0);
    assert_eq!(v[0]["solvable"], false);
    assert_eq!(v[0]["signature_set"], "(0,1)|(0,2)|(1,0)|(1,1)|(2,0)");
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [
        ("bad.toml", "command = \"green\"\nq = 1\nK = [2, 1]\n[quadric]\npreset = \"M2\"\n"),
        ("syntax.toml", "command = = \"green\"\n"),
        ("herm.json", r#"{"command": "classify", "quadric": {"matrices": [[[[1.0, 1.0]]]]}}"#),
        ("preset.toml", "command = \"classify\"\n[quadric]\npreset = \"M7\"\n"),
    ] {
        let o = quadric(dir.path(), name, text, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let rec = error_record(&o);
        assert_eq!(rec["error"], "config");
        assert_eq!(rec["exit_code"], 2);
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_quadric")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let absent = Command::new(env!("CARGO_BIN_EXE_quadric"))
        .args(["--config", "/nonexistent/job.toml"])
        .output()
        .unwrap();
    assert_eq!(absent.status.code(), Some(2));
}

#[test]
fn origin_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"green\"\n[quadric]\npreset = \"heisenberg:1\"\n[[points]]\nz = [[0.0, 0.0]]\nt = [0.0]\n";
    let o = quadric(dir.path(), "o.toml", text, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_record(&o)["error"], "domain");
}

#[test]
fn unmet_tolerance_exits_3_after_writing() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"green\"\n[quadric]\npreset = \"M2\"\n[quadrature]\nradial_max_level = 3\nmax_panels = 1\n\
        [[points]]\nz = [[0.4, 0.1], [-0.3, 0.2]]\nt = [0.5, -0.1]\n";
    let o = quadric(dir.path(), "t.toml", text, &["--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_record(&o)["error"], "tolerance");
    let (_, body) = rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(body.len(), 1);
}

#[test]
fn verify_selected_checks() {
    let dir = TempDir::new().unwrap();
    let text = "command = \"verify\"\n[quadric]\npreset = \"M1\"\n";
    let o = quadric(dir.path(), "v.toml", text, &["--suite", "classification,linear-algebra"]);
    let (head, body) = rows(&stdout(&o));
    assert_eq!(body.len(), 2);
    assert!(body.iter().all(|r| r[col(&head, "passed")] == "true"));
    let bad = quadric(dir.path(), "v.toml", text, &["--suite", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn grid_axes_are_checked() {
    let job = parse_config(
        "command = \"classify\"\n[quadric]\npreset = \"M1\"\n[grid]\naxes = [{ min = 0.0, max = 1.0, count = 2 }]\n",
    )
    .unwrap();
    assert_eq!(job.command, Job::Classify);
    assert_eq!(job.points, Some(PointSet::Grid(vec![Axis { min: 0.0, max: 1.0, count: 2 }])));
    let e = parse_config(
        "command = \"heat\"\nlambda = [[1.0]]\ns = [1.0]\nL = []\n[quadric]\npreset = \"heisenberg:1\"\n[grid]\naxes = [{ min = 0.0, max = 1.0, count = 2 }]\n",
    )
    .unwrap_err();
    assert!(e.message.contains("axes"), "{e}");
}
