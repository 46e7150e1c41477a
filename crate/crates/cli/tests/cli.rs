use std::path::Path;
use std::process::{Command, Output};

use polartrap_cli::sweep::{read_csv, Axis, TIMESTAMP_KEY};

fn polartrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polartrap")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn without_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.contains(TIMESTAMP_KEY)).collect::<Vec<_>>().join("\n")
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(polartrap(&[]).status.code(), Some(1));
    assert_eq!(polartrap(&["levels"]).status.code(), Some(1), "missing --e-max");
    assert_eq!(polartrap(&["figure", "fig9"]).status.code(), Some(1));
    assert_eq!(polartrap(&["sweep", "--axis", "spin", "--grid", "0:1:3"]).status.code(), Some(1));
    assert_eq!(polartrap(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "b_rot = not-a-number\n").unwrap();
    let out = polartrap(&["alpha", "--molecule", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(polartrap(&["alpha", "--molecule", missing.to_str().unwrap()]).status.code(), Some(2));
    // field bracket without a crossing
    let out = polartrap(&["magic-field", "--pure-rotor", "--bracket", "0.1:1", "--no-convergence"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn levels_row_count_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.csv");
    let out = polartrap(&[
        "levels", "--e-max", "1", "--points", "4", "--states", "10", "--nmax", "1", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let (axis, rows) = read_csv(&text).unwrap();
    assert_eq!(axis, Axis::Field);
    assert_eq!(rows.len(), 4 * 10);
    let fields: Vec<f64> = rows.iter().step_by(10).map(|r| r.axis).collect();
    for (f, expected) in fields.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
        assert!((f - expected).abs() < 1e-12);
    }
    assert!(text.lines().any(|l| l.starts_with("# n_max: 1")));
    assert!(text.lines().any(|l| l.starts_with("# command: levels")));
}

#[test]
fn output_is_deterministic_and_independent_of_jobs() {
    let args = ["sweep", "--axis", "theta", "--grid", "0:90:4", "--e", "0.5", "--nmax", "1", "--states", "12"];
    let one = polartrap(&[&args[..], &["--jobs", "1"]].concat());
    let again = polartrap(&[&args[..], &["--jobs", "1"]].concat());
    let two = polartrap(&[&args[..], &["--jobs", "2"]].concat());
    assert!(one.status.success());
    assert_eq!(without_timestamp(&stdout(&one)), without_timestamp(&stdout(&again)));
    assert_eq!(without_timestamp(&stdout(&one)), without_timestamp(&stdout(&two)));
}

#[test]
fn alpha_at_one_point() {
    let out = polartrap(&["alpha", "--pure-rotor", "--e", "2", "--theta", "35.3", "--states", "4"]);
    assert!(out.status.success());
    let (axis, rows) = read_csv(&stdout(&out)).unwrap();
    assert_eq!(axis, Axis::Theta);
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0].lambda, rows[0].m.to_string().as_str()), (0, "0"));
    assert!(rows.iter().all(|r| r.alpha_au > 300.0 && r.alpha_au < 1100.0));
}

#[test]
fn pendular_report() {
    let out = polartrap(&["pendular", "--e-sweep", "0:4:3", "--lambda-max", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "e_kv_cm,omega,lambda,m,energy_mhz,reduced_energy,c20");
    let rows: Vec<Vec<f64>> =
        data[1..].iter().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    let fields: std::collections::BTreeSet<String> = rows.iter().map(|r| format!("{}", r[0])).collect();
    assert_eq!(fields.len(), 3);
    // free rotor ground state
    let ground = rows.iter().find(|r| r[0] == 0.0 && r[2] == 0.0 && r[3] == 0.0).unwrap();
    assert!(ground[4].abs() < 1e-9);
    assert!(rows.iter().all(|r| r[2] <= 1.0));
}

#[test]
fn magic_angle_of_the_rotor() {
    let out = polartrap(&["magic-angle", "--pure-rotor", "--e", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().last().unwrap();
    let psi: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((psi - 54.7356).abs() < 0.01, "{psi}");
}

#[test]
fn small_figure_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let out = polartrap(&[
        "figure", "fig6", "--points", "3", "--nmax", "1", "--states", "8", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for tag in ["a", "b", "c", "d"] {
        let path = dir.path().join(format!("fig6{tag}.csv"));
        let (axis, rows) = read_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(axis, Axis::Intensity);
        assert_eq!(rows.len(), 3 * 8);
    }
    assert!(!Path::new(&dir.path().join("fig6e.csv")).exists());
}
