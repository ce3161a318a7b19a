use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxorder")).args(args).output().expect("binary runs")
}

fn run_with(config: &str, args: &[&str]) -> Output {
    let mut file = NamedTempFile::new().unwrap();
    file.write_all(config.as_bytes()).unwrap();
    let path = file.path().to_str().unwrap().to_string();
    let mut full = vec!["--config", path.as_str()];
    full.extend_from_slice(args);
    run(&full)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid json")
}

/// Data rows of a CSV report, split into cells.
fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let text = stdout(out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema_version: 1"));
    lines.next().expect("header");
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn rho_unitary_small_primes() {
    let out = run_with("[analysis]\nprime_bound = 10\n", &["rho", "--system", "unitary"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    let got: Vec<(u64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert_eq!(got.len(), 4);
    for (p, v) in got {
        assert!((v - (1.0 + 1.0 / p as f64)).abs() < 1e-15, "p = {p}: {v}");
    }
}

#[test]
fn rho_standard_at_two_is_exact() {
    let out = run(&["rho"]);
    assert_eq!(code(&out), 0);
    let row = &csv_rows(&out)[0];
    assert_eq!((row[0].as_str(), row[1].parse::<f64>().unwrap(), row[2].as_str()), ("2", 2.0, "exact"));
}

#[test]
fn rho_empty_range() {
    let out = run_with("[analysis]\nprime_bound = 1\n", &["rho"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "# schema_version: 1\np,rho,status,attained_at\n");
}

#[test]
fn rho_renders_unsolvable_phi_as_audit_failure() {
    let config = r#"
        [system]
        kind = "table"
        exponent = [{ nu = 2, exponents = [0, 1] }]
    "#;
    let out = run_with(config, &["rho", "--function", "phi"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsolvable"));
}

#[test]
fn constant_unitary_encloses_known_value() {
    let out = run(&["constant", "--system", "unitary", "--cutoff", "1000000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    let (lo, hi) = (v["constant_lower"].as_f64().unwrap(), v["constant_upper"].as_f64().unwrap());
    let target = 6.0 / std::f64::consts::PI.powi(2) * 0.577_215_664_901_532_9f64.exp();
    assert!(lo <= target && target <= hi, "[{lo}, {hi}]");
    assert_eq!(v["cutoff"], 1_000_000);
    assert_eq!(v["hypothesis_audit"]["passed"], true);
}

#[test]
fn constant_minimal_phi_standard() {
    let out = run_with("[analysis]\norder = \"minimal\"\n", &["constant", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let (lo, hi) = (v["constant_lower"].as_f64().unwrap(), v["constant_upper"].as_f64().unwrap());
    let target = (-0.577_215_664_901_532_9f64).exp();
    assert!(lo <= target && target <= hi, "[{lo}, {hi}]");
    assert!(hi - lo < 1e-6);
    assert_eq!(v["kind"], "minimal-phi");
}

#[test]
fn constant_flags_uncertified_table_function() {
    let config = r#"
        [analysis]
        cutoff = 10

        [function]
        kind = "table"
        default = 1.0
        value = [
            { prime = 2, nu = 1, value = 1.5 },
            { prime = 3, nu = 1, value = 1.4 },
            { prime = 5, nu = 1, value = 1.2 },
            { prime = 7, nu = 1, value = 1.15 },
        ]
    "#;
    let out = run_with(config, &["constant", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["certified"], false);
    let flags: Vec<&str> = v["assertion_flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(flags.contains(&"uncertified: no tail envelope"), "{flags:?}");
}

#[test]
fn constant_hypothesis_violation_names_prime() {
    let out = run_with("[function]\nkind = \"table\"\ndefault = 1.0\n", &["constant"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("p = 2"));
}

#[test]
fn constant_with_thin_witness() {
    let n_set: Vec<String> = (1..=20).map(|k| (1u64 << k).to_string()).collect();
    let config = format!(
        "[system]\nkind = \"pathological\"\nn_set = [{}]\n\n[function]\nkind = \"phi\"\n\n\
         [analysis]\ncutoff = 1000\nx_grid = [1000000]\nwitness_target = 17.9\n\n[filter]\nkind = \"finite\"\nprimes = [2]\n",
        n_set.join(", ")
    );
    let out = run_with(&config, &["constant", "--format", "json"]);
    let v = json(&out);
    assert!(v["witness"]["ratio"].as_f64().unwrap() >= 17.9, "{v}");
}

#[test]
fn phi_exponential_two_power_table() {
    let out = run_with("[analysis]\nprimes = [2]\nnu_max = 6\n", &["phi", "--system", "exponential"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows.last().unwrap(), &["2", "6", "54"]);
    let values: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(values, ["1", "2", "2", "6", "12", "30", "54"]);
}

#[test]
fn phi_n_list() {
    let out = run_with("[analysis]\nn_list = [1, 12, 360]\n", &["phi"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows[1][..2], ["12", "4"]);
    assert_eq!(rows[2][..2], ["360", "96"]);
}

#[test]
fn check_unitary_passes() {
    let out = run(&["check", "--system", "unitary", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["system_witness"]["verdict"], "multiplicative-up-to-bound");
    assert_eq!(v["system_witness"]["bound"], 10_000);
    assert_eq!(v["reconstruction"]["passed"], true);
}

#[test]
fn check_skips_reconstruction_for_unsolvable_table() {
    let config =
        "[system]\nkind = \"table\"\nexponent = [{ nu = 3, exponents = [0, 1] }]\n\n[analysis]\ncheck_bound = 500\n";
    let out = run_with(config, &["check"]);
    assert_eq!(code(&out), 0);
    assert_eq!(csv_rows(&out)[1][3], "skipped");
}

/// Record values of `sigma(n)/n` by trial division, over the scan range.
fn brute_records(n_max: u64) -> Vec<u64> {
    let mut best = 0.0;
    let mut out = Vec::new();
    for n in 16..=n_max {
        let sigma: u64 = (1..=n).filter(|d| n % d == 0).sum();
        let v = sigma as f64 / n as f64;
        if v > best {
            best = v;
            out.push(n);
        }
    }
    out
}

#[test]
fn scan_matches_brute_force() {
    let out = run(&["scan"]);
    assert_eq!(code(&out), 0);
    let got: Vec<u64> = csv_rows(&out).iter().map(|r| r[0].parse().unwrap()).collect();
    let expected = brute_records(10_000);
    assert_eq!(got.last(), expected.last());
    assert_eq!(got, expected);
}

#[test]
fn champion_columns_and_target() {
    let out = run(&["champion", "--x-grid", "10000,100000"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().nth(1), Some("x,big_p,log_n,ratio,target,deviation"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    let dev: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(dev[1] < dev[0]);
}

#[test]
fn champion_schedule_failure_exits_one() {
    let out = run_with("[analysis]\neps = 0.0001\nx_grid = [10000]\n", &["champion"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedule fails"));
}

#[test]
fn counterexample_default_run() {
    let out = run(&["counterexample", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["schedule"].as_array().unwrap().len(), 1);
    assert_eq!(v["maxima_non_increasing"], true);
    assert_eq!(v["height_maxima"].as_array().unwrap().len(), 5);
}

#[test]
fn counterexample_beyond_sieve_is_resource_error() {
    let out = run_with("[counterexample]\nj_max = 3\n", &["counterexample"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(code(&run_with("colour = 1\n", &["rho"])), 2);
    assert_eq!(code(&run_with("[analysis]\ncutof = 10\n", &["rho"])), 2);
    assert_eq!(code(&run_with("[analysis]\nn_max = 100000000\n", &["scan"])), 2);
    assert_eq!(code(&run(&["rho", "--config", "/nonexistent/run.toml"])), 2);
    assert_eq!(code(&run(&["champion", "--x-grid", "1000,100"])), 2);
    assert_eq!(code(&run(&["rho", "--system", "bogus"])), 2);
    assert_eq!(code(&run_with("[system]\nkind = \"pathological\"\nn_set = [0]\n", &["rho"])), 2);
    let fat_declared_thin = "[filter]\nkind = \"residue\"\nmodulus = 4\nresidues = [3]\nthin = true\n";
    assert_eq!(code(&run_with(fat_declared_thin, &["constant"])), 2);
}

#[test]
fn output_is_deterministic() {
    for args in [&["champion", "--format", "json"][..], &["rho", "--system", "exponential"], &["scan"]] {
        let a = run(args);
        let b = run(args);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn out_flag_writes_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.csv");
    let to_file = run(&["rho", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&to_file), 0);
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), run(&["rho"]).stdout);
}

#[test]
fn effective_config_round_trips() {
    let out = run(&["scan", "--system", "unitary", "--cutoff", "5000", "--print-effective-config"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("kind = \"unitary\"") && text.contains("cutoff = 5000"));
    let again = run_with(&text, &["scan", "--print-effective-config"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn json_reports_reparse_with_schema_version() {
    for args in [&["rho"][..], &["scan"], &["phi"], &["check", "--system", "exponential"]] {
        let mut full = args.to_vec();
        full.extend(["--format", "json"]);
        let v = json(&run(&full));
        assert_eq!(v["schema_version"], 1, "{args:?}");
        assert!(v["rows"].is_array());
    }
}
