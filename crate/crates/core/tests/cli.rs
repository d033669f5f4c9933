use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tsc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn write_config(dir: &Path, agent: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{agent}.toml"));
    fs::write(&path, format!("[experiment]\nagent = \"{agent}\"\nscenario = \"grid1x1\"\n{extra}")).unwrap();
    path
}

/// `episodes.csv` with the wall-clock column blanked.
fn log_without_wall_time(dir: &Path) -> String {
    let text = fs::read_to_string(dir.join("episodes.csv")).unwrap();
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_is_reproducible_and_comparable() {
    let tmp = tempfile::tempdir().unwrap();
    let ft = write_config(tmp.path(), "fixedtime", "");
    let mp = write_config(tmp.path(), "maxpressure", "");
    for (cfg, out) in [(&ft, "a"), (&ft, "b"), (&mp, "c")] {
        let o = tsc(&["run", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(log_without_wall_time(&tmp.path().join("a")), log_without_wall_time(&tmp.path().join("b")));
    let header = log_without_wall_time(&tmp.path().join("a"));
    assert!(header.starts_with("episode,travel_time,queue,delay,real_delay,throughput"));

    let o = tsc(&["compare", "a", "c"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("travel_time") && text.contains("maxpressure"), "{text}");
}

#[test]
fn compare_rejects_different_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "fixedtime", "");
    let b = tmp.path().join("other.toml");
    fs::write(&b, "[experiment]\nagent = \"fixedtime\"\nscenario = \"grid1x1_4phase\"\n").unwrap();
    for (cfg, out) in [(&a, "a"), (&b, "b")] {
        let o = tsc(&["run", "--config", cfg.to_str().unwrap(), "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let o = tsc(&["compare", "a", "b"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fixedtime", "bogus_key = 1\n");
    let o = tsc(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_key"));

    let o = tsc(&["run", "--config", "missing.toml"], tmp.path());
    assert_ne!(o.status.code(), Some(0));

    let o = tsc(&["compare", "only-one"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convert_both_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tsc(
        &[
            "convert",
            "--from",
            "cityflow_style_json",
            "--to",
            "sumo_style_xml",
            "--net",
            &fixture("arterial1x3.roadnet.json"),
            "--flow",
            &fixture("arterial1x3.flow.json"),
            "--out",
            "xml",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(tmp.path().join("xml/arterial1x3.net.xml")).unwrap(),
        fs::read(fixture("arterial1x3.net.xml")).unwrap()
    );

    let o = tsc(
        &[
            "convert",
            "--from",
            "sumo_style_xml",
            "--to",
            "cityflow_style_json",
            "--net",
            &fixture("grid4x4.net.xml"),
            "--flow",
            &fixture("grid4x4_od.rou.xml"),
            "--out",
            "json",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("json").read_dir().unwrap().count() == 2);
}

#[test]
fn unreachable_destination_names_the_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let flow = tmp.path().join("bad.rou.xml");
    fs::write(
        &flow,
        r#"<routes><flow id="f" begin="0" end="100" period="10" from="road_1_1_0" to="road_0_1_0"/></routes>"#,
    )
    .unwrap();
    let o = tsc(
        &[
            "convert",
            "--from",
            "sumo_style_xml",
            "--to",
            "cityflow_style_json",
            "--net",
            &fixture("grid1x1.net.xml"),
            "--flow",
            flow.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("flow_0"), "{}", String::from_utf8_lossy(&o.stderr));
}
