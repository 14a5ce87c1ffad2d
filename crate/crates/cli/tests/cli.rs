use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nnpilot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnpilot"))
        .args(args)
        .output()
        .expect("run nnpilot")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const PRELOG: &str = "schema_version = 1
n_t = 1
n_r = 1
period = 4
window = 2
snr_db = [20.0, 30.0, 40.0, 50.0]
mc_samples = 500
variants = [\"finite-t\", \"asymptotic\"]
";

#[test]
fn prelog_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PRELOG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = nnpilot(&["prelog", "--config", &cfg, "--seed", "7", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["prelog.csv", "prelog_fit.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let fit = fs::read_to_string(a.join("prelog_fit.csv")).unwrap();
    assert!(fit.starts_with("variant,slope,intercept_nats,residual_nats,expected_slope\n"));
    let rows = fs::read_to_string(a.join("prelog.csv")).unwrap();
    assert!(rows.starts_with("variant,snr_db,L,n_t,n_r,T,value_nats,value_bits,se,theta\n"));
    assert_eq!(rows.lines().count(), 1 + 2 * 4);
}

#[test]
fn seed_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PRELOG);
    let out = |seed: &str| {
        let d = dir.path().join(seed);
        assert!(nnpilot(&["prelog", "--config", &cfg, "--seed", seed, "--out", d.to_str().unwrap()]).status.success());
        fs::read(d.join("prelog.csv")).unwrap()
    };
    assert_ne!(out("1"), out("2"));
}

#[test]
fn invalid_config_reports_field_paths_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "schema_version = 1\nn_t = 2\nperiod = 5\ncode_lengths = [7]\nframes = 0\n",
    );
    let out = dir.path().join("out");
    let o = nnpilot(&["decode-sim", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config.code_lengths[0]"), "{err}");
    assert!(err.contains("config.frames"), "{err}");
    assert!(!out.exists());

    let cfg = write_config(dir.path(), "nov.toml", "period = 4\n");
    let o = nnpilot(&["scenario", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("config.schema_version: missing"));
}

#[test]
fn partial_outputs_are_removed_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", PRELOG);
    let out = dir.path().join("out");
    // the second artifact cannot replace a non-empty directory
    fs::create_dir_all(out.join("prelog_fit.csv")).unwrap();
    fs::write(out.join("prelog_fit.csv").join("keep"), b"x").unwrap();
    let o = nnpilot(&["prelog", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!out.join("prelog.csv").exists());
    assert!(!out.join(".prelog_fit.csv.partial").exists());
}

#[test]
fn mac_region_matches_exact_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", "schema_version = 1\nn_r = 2\nl_star = 8\nbeta_steps = 4\n");
    let out = dir.path().join("out");
    assert!(nnpilot(&["mac-region", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("region.csv")).unwrap();
    let jt: Vec<&str> = csv.lines().filter(|l| l.starts_with("jt,vertex")).collect();
    assert_eq!(
        jt,
        vec![
            "jt,vertex,0,0.0,0.0,0,0,,,",
            "jt,vertex,1,0.75,0.0,3/4,0,,,",
            "jt,vertex,2,0.75,0.75,3/4,3/4,,,",
            "jt,vertex,3,0.0,0.75,0,3/4,,,",
        ]
    );
    assert!(csv.contains("tdma,vertex,1,0.875,0.0,7/8,0,,,"));
    assert!(csv.contains("tdma,sweep,1/2,0.4375,0.4375,7/16,7/16,,,"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("tdma,sweep")).count(), 5);
}

#[test]
fn mac_verdict_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (l, verdict) in [(5, "tdma_superior"), (7, "indeterminate"), (9, "jt_superior")] {
        let cfg = write_config(
            dir.path(),
            "v.toml",
            &format!("schema_version = 1\nn_t1 = 2\nn_t2 = 2\nn_r = 4\nl_star = {l}\n"),
        );
        assert!(nnpilot(&["mac-verdict", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("verdict.json")).unwrap()).unwrap();
        assert_eq!(v["verdict"], verdict);
        assert_eq!(v["thresholds"]["jt"], "8");
        assert_eq!(v["thresholds"]["tdma"], "6");
        assert_eq!(v["l_star"], l);
    }
}

#[test]
fn fading_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", "schema_version = 1\nn_r = 2\nn_t = 3\nlength = 100\n");
    let out = dir.path().join("out");
    assert!(nnpilot(&["dump-fading", "--config", &cfg, "--seed", "11", "--out", out.to_str().unwrap()]).status.success());
    let bytes = fs::read(out.join("fading.bin")).unwrap();
    assert_eq!(bytes.len(), 32 + 2 * 3 * 100 * 8);
    assert_eq!(&bytes[..8], b"NNPFADE1");
    let path = nnpilot_core::FadingPath::read_dump(&bytes[..]).unwrap();
    assert_eq!(path.dims(), (2, 3));
    assert_eq!(path.seed(), 11);
}

#[test]
fn scenario_rows_are_within_typical_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.toml",
        "schema_version = 1\ndelay_spread_s = 1e-6\nspeed_kmh = 5.0\ncarrier_hz = 8e8\n",
    );
    let out = dir.path().join("out");
    assert!(nnpilot(&["scenario", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("scenario.csv")).unwrap();
    let mut lines = csv.lines().skip(1);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "config");
    assert_eq!(first[5], "27000");
    assert!(lines.all(|l| l.ends_with(",true")));
}

#[test]
fn interp_error_and_decode_sim_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "i.toml", "schema_version = 1\nn = 3\nwindow = 2\nframes = 20\nsnr_db = [10.0, 20.0]\n");
    assert!(nnpilot(&["interp-error", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("interp_error.csv")).unwrap();
    assert!(csv.starts_with("l,t,T,snr_db,snr,analytic,empirical,se\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * (3 + 3));

    let cfg = write_config(
        dir.path(),
        "d.toml",
        "schema_version = 1\nwindow = 2\ncode_lengths = [6, 12]\ncode_sizes = [2, 4]\nframes = 10\n",
    );
    assert!(nnpilot(&["decode-sim", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = fs::read_to_string(out.join("decode.csv")).unwrap();
    assert!(csv.starts_with("snr_db,n,M,frames,block_errors,bler,ber_se,ties,rate_nats,rate_bits\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn help_documents_columns() {
    for (sub, col) in [
        ("prelog", "value_nats"),
        ("interp-error", "empirical"),
        ("decode-sim", "block_errors"),
        ("mac-region", "pi1_exact"),
        ("mac-verdict", "thresholds.jt"),
        ("scenario", "lambda_d"),
        ("dump-fading", "32-byte header"),
    ] {
        let o = nnpilot(&[sub, "--help"]);
        assert!(String::from_utf8_lossy(&o.stdout).contains(col), "{sub}");
    }
}
