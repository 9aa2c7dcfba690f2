use std::path::Path;
use std::process::{Command, Output};

use inline_snspd::simkernel::read_tag_file;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inline-snspd"))
}

fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn design_five_way_split() {
    let o = run(&["design", "--n", "5"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "wire,length_um,conditional_absorption,input_fraction,cumulative_absorption");
    assert_eq!(rows.len(), 6);
    let fractions: Vec<String> = rows[1..].iter().map(|r| r.split(',').nth(3).unwrap().to_string()).collect();
    assert_eq!(fractions, ["0.200000", "0.200000", "0.200000", "0.200000", "0.199800"]);
}

#[test]
fn design_hbt_table() {
    let o = run(&["design", "--fractions", "0.5,0.5"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().contains(",0.500000,0.500000,"));
}

#[test]
fn overfull_fractions_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[cascade]\nfractions = [0.6, 0.6]\n");
    let o = run(&["design"], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[cascade]"));
    let o = run(&["design", "--fractions", "0.7,0.5"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[detector]\neta_int = 1.0\ndark_rate_hz = 0.0\ndead_time_ps = 0.0\n\
         [source]\nkind = \"fock_pulsed\"\nn = 1\n[run]\nn_triggers = 200000\n",
    );
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for out in [&a, &b] {
        let o = run(&["simulate", "--seed", "9", "--out", out.to_str().unwrap()], Some(&cfg));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let s = read_tag_file(&a).unwrap();
    let counts = s.counts_per_channel();
    assert_eq!(counts[0], 200_000);
    let clicks: u64 = counts[1..].iter().sum();
    assert!(clicks <= 200_000 && clicks > 199_700, "{counts:?}");
}

#[test]
fn ideal_hbt_channel_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[detector]\neta_int = 1.0\ndark_rate_hz = 0.0\ndead_time_ps = 0.0\n\
         [cascade]\nn = 2\nlast_cap = 0.999999999\n\
         [source]\nkind = \"fock_pulsed\"\nn = 1\n[run]\nn_triggers = 1000000\n",
    );
    let out = dir.path().join("t.csv");
    let o = run(&["simulate", "--format", "csv", "--out", out.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("channel,t_ps\n"));
    let s = read_tag_file(&out).unwrap();
    let c = s.counts_per_channel();
    let sigma = (1e6f64 * 0.25).sqrt();
    for ch in [1, 2] {
        assert!((c[ch] as f64 - 500_000.0).abs() < 3.0 * sigma, "{c:?}");
    }
}

#[test]
fn zero_duration_run_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nduration_s = 0.0\n");
    let out = dir.path().join("z.bin");
    let o = run(&["simulate", "--out", out.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap().len(), 15);
}

#[test]
fn conditional_correlation_on_spdc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[source]\nkind = \"spdc_cw\"\npair_rate_hz = 5e6\nherald_efficiency = 0.8\n\
         signal_transmission = 0.8\nherald_jitter_fwhm_ps = 450.0\n[run]\nduration_s = 0.5\n\
         [analysis]\nw_bin_ps = 500\ntau_range_ps = 5000\n",
    );
    let tags = dir.path().join("spdc.bin");
    assert!(run(&["simulate", "--out", tags.to_str().unwrap()], Some(&cfg)).status.success());
    let o = run(&["analyze", "correlate", "--conditional", tags.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau_ps,value,rel_uncertainty"));
    let rows: Vec<(i64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    let zero = rows.iter().find(|r| r.0 == 0).unwrap().1;
    let far = rows.iter().filter(|r| r.0.abs() >= 3000).map(|r| r.1).sum::<f64>()
        / rows.iter().filter(|r| r.0.abs() >= 3000).count() as f64;
    assert!(zero < 0.2 * far, "dip {zero} vs {far}");
}

#[test]
fn missing_channel_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nn_triggers = 1000\n");
    let tags = dir.path().join("t.bin");
    assert!(run(&["simulate", "--out", tags.to_str().unwrap()], Some(&cfg)).status.success());
    let o = run(&["correlate", "--a", "1", "--b", "9", tags.to_str().unwrap()], Some(&cfg));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("channel 9 not present"));
}

#[test]
fn pnr_sweep_tracks_theory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nn_triggers = 200000\n[analysis]\npnr_points = 3\n");
    let o = run(&["pnr"], Some(&cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("nbar,P0,P1,P2,P0_theory,P1_theory,P2_theory"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        for k in 0..3 {
            let p = r[4 + k];
            let se = (p * (1.0 - p) / 2e5).sqrt();
            assert!((r[1 + k] - p).abs() < 5.0 * se.max(1e-6), "{r:?}");
        }
    }
    assert!((rows[0][0] - 0.01).abs() < 1e-12 && (rows[2][0] - 3.0).abs() < 1e-9);
}

#[test]
fn analyze_pnr_and_jitter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[source]\nkind = \"fock_pulsed\"\nn = 1\n[run]\nn_triggers = 1000000\n",
    );
    let tags = dir.path().join("t.bin");
    assert!(run(&["simulate", "--out", tags.to_str().unwrap()], Some(&cfg)).status.success());
    let hist = dir.path().join("h.csv");
    let o = run(&["analyze", "jitter", tags.to_str().unwrap(), "--out", hist.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fwhm: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("fwhm_ps="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((fwhm - 75.0).abs() <= 1.0, "{fwhm}");
    assert!(std::fs::read_to_string(&hist).unwrap().starts_with("bin_start_ps,count\n"));

    let o = run(&["analyze", "pnr", tags.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("nbar,P0,P1,P2,"));
}

#[test]
fn fit_reports_parameters_and_fwhm() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g.csv");
    let sigma = 75.0 / 2.354_820_045_030_949_3;
    let mut text = String::from("x,y\n");
    for i in 0..=120 {
        let x = -300.0 + 5.0 * f64::from(i);
        text.push_str(&format!("{x},{}\n", 200.0 * (-0.5 * (x / sigma).powi(2)).exp()));
    }
    std::fs::write(&data, text).unwrap();
    let o = run(&["fit", "gaussian", data.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("converged=true"));
    let fwhm: f64 = out.lines().find_map(|l| l.strip_prefix("fwhm=")).unwrap().parse().unwrap();
    assert!((fwhm - 75.0).abs() < 1e-6);
    assert_eq!(run(&["fit", "lorentzian", data.to_str().unwrap()], None).status.code(), Some(1));
}

#[test]
fn defaults_profile_is_printed() {
    let o = run(&["defaults"], None);
    assert!(o.status.success());
    assert!(stdout(&o).contains("[analysis]"));
}
