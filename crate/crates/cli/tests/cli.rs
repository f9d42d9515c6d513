use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pathgeom_cli::config::{self, parse, resolve, ExperimentConfig};
use pathgeom_cli::{experiment, output, presets, run_experiment};

const SMALL: &str = r#"
[action]
potential = "free"

[[action.series]]
variant = "naive"

[[action.series]]
variant = "f-modified"
f = "gamma"
gamma = -1.0
box_width = 1.0

[lattice]
n_sites = [8, 16, 32, 64]

[sampler]
sweeps = 5000
burn_in = 200
thinning = 5
seed = 11

[analysis]
histogram = true
sample_paths = true

[output]
experiment = "small"
"#;

fn small() -> ExperimentConfig {
    parse(SMALL).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pathgeom"))
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir.join("data"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn rows(csv: &[u8]) -> Vec<Vec<String>> {
    let text = String::from_utf8(csv.to_vec()).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

fn with_series_field(key: &str, value: &str) -> String {
    SMALL.replacen("gamma = -1.0", &format!("gamma = -1.0\n{key} = {value}"), 1)
}

#[test]
fn critical_gamma_is_rejected() {
    let cfg = parse(&SMALL.replace("gamma = -1.0", "gamma = 0.0")).unwrap();
    let e = resolve(&cfg, true).unwrap_err();
    assert!(e.to_string().contains("critical point"), "{e}");
    assert!(e.field.starts_with("action.series"), "{}", e.field);
}

#[test]
fn zero_thinning_is_rejected() {
    let cfg = parse(&SMALL.replace("thinning = 5", "thinning = 0")).unwrap();
    let e = resolve(&cfg, false).unwrap_err();
    assert!(e.field.starts_with("sampler"), "{e}");
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(parse(&SMALL.replace("seed = 11", "seed = 11\nsweep_count = 3")).is_err());
    assert!(parse(&with_series_field("colour", "\"red\"")).is_err());
}

#[test]
fn parameters_a_variant_does_not_use_are_rejected() {
    let cfg = parse(&SMALL.replacen("variant = \"naive\"", "variant = \"naive\"\nalpha = 3.0", 1)).unwrap();
    let e = resolve(&cfg, false).unwrap_err();
    assert!(e.field.contains("alpha"), "{e}");
}

#[test]
fn small_gamma_needs_the_flag() {
    let cfg = parse(&SMALL.replace("gamma = -1.0\nbox_width = 1.0", "gamma = 0.2")).unwrap();
    let e = resolve(&cfg, false).unwrap_err();
    assert!(e.message.contains("--allow-small-gamma"), "{e}");
    assert!(resolve(&cfg, true).is_ok());
}

#[test]
fn invalid_site_lists_are_rejected() {
    for bad in ["[8, 8, 16, 32]", "[1, 8, 16, 32]", "[]"] {
        let cfg = parse(&SMALL.replace("[8, 16, 32, 64]", bad)).unwrap();
        let e = resolve(&cfg, false).unwrap_err();
        assert_eq!(e.field, "lattice.n_sites", "{bad}: {e}");
    }
}

#[test]
fn fits_need_four_lattice_sizes() {
    let cfg = parse(&SMALL.replace("[8, 16, 32, 64]", "[8, 16, 32]")).unwrap();
    assert!(resolve(&cfg, false).is_err());
}

#[test]
fn presets_are_valid_and_round_trip_through_toml() {
    for p in presets::PRESETS {
        let cfg = p.config();
        let back = parse(&config::to_toml(&cfg)).unwrap();
        assert_eq!(back, cfg, "{}", p.name);
        resolve(&back, false).unwrap();
    }
}

#[test]
fn identical_seeds_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_experiment(&small(), false, Some(tmp.path())).unwrap();
    let b = run_experiment(&small(), false, Some(tmp.path())).unwrap();
    assert_ne!(a.directory, b.directory);
    assert_eq!(a.manifest.run.status, "complete");
    let (da, db) = (data_files(&a.directory), data_files(&b.directory));
    assert_eq!(da.len(), 5);
    assert_eq!(da, db);

    let mut other = small();
    other.sampler.seed = 12;
    let c = run_experiment(&other, false, Some(tmp.path())).unwrap();
    assert_ne!(data_files(&c.directory), da);
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = run_experiment(&small(), false, Some(tmp.path())).unwrap();
    let manifest = first.directory.join(output::MANIFEST);
    let (cfg, flag) = config::load_with_flags(&manifest).unwrap();
    assert!(!flag);
    assert_eq!(cfg, first.manifest.config);
    let second = run_experiment(&cfg, flag, Some(tmp.path())).unwrap();
    assert_eq!(data_files(&first.directory), data_files(&second.directory));
    let again = fs::read_to_string(second.directory.join(output::MANIFEST)).unwrap();
    let reparsed: output::Manifest = toml::from_str(&again).unwrap();
    assert_eq!(reparsed.config, first.manifest.config);
    assert_eq!(reparsed.run.series_seeds, first.manifest.run.series_seeds);
}

#[test]
fn svgs_are_well_formed_and_match_the_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_experiment(&small(), false, Some(tmp.path())).unwrap();
    let length = rows(&fs::read(r.directory.join("data/length.csv")).unwrap());
    for name in ["length_scaling", "jaggedness", "paths"] {
        let text = fs::read_to_string(r.directory.join(format!("figs/{name}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let class = |c: &str| doc.descendants().filter(|n| n.attribute("class") == Some(c)).count();
        assert_eq!(class("axes"), 1, "{name}");
        assert!(class("series") > 0, "{name}");
        if name == "length_scaling" {
            assert_eq!(class("error-bar"), length.len());
            let labels: Vec<&str> = doc
                .descendants()
                .filter(|n| n.attribute("class") == Some("series"))
                .filter_map(|n| n.attribute("data-label"))
                .collect();
            for row in &length {
                assert!(labels.iter().any(|l| l.starts_with(row[0].as_str())), "{}", row[0]);
            }
        }
    }
    let summary = rows(&fs::read(r.directory.join("data/jaggedness_summary.csv")).unwrap());
    assert_eq!(summary.len(), 8);
    let paths = rows(&fs::read(r.directory.join("data/paths.csv")).unwrap());
    assert_eq!(paths.len(), 2 * (9 + 17 + 33 + 65));
}

#[test]
fn sampler_failures_keep_partial_results() {
    let tmp = tempfile::tempdir().unwrap();
    let mut resolved = resolve(&small(), false).unwrap();
    // Unreachable through the config; forces a runtime error in one series.
    resolved.series[1].params.thinning = 0;
    let outcome = experiment::run(&resolved);
    assert!(!outcome.is_complete());
    assert!(outcome.failures.iter().all(|f| f.series == 1));
    let dir = output::create_run_dir(tmp.path(), "partial", "t").unwrap();
    let m = output::write_run(&dir, &resolved, &outcome, false, "t").unwrap();
    assert_eq!(m.run.status, "incomplete");
    assert!(!m.run.failures.is_empty());
    let length = rows(&fs::read(dir.join("data/length.csv")).unwrap());
    assert_eq!(length.len(), 4);
    assert!(length.iter().all(|r| r[0] == "naive"));
    assert!(dir.join(output::MANIFEST).exists());
}

fn out_dir(stdout: &[u8]) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(stdout).lines().next().unwrap().trim())
}

#[test]
fn binary_validate_reports_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, SMALL.replace("gamma = -1.0", "gamma = 0.0")).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("critical point") && err.contains("action.series"), "{err}");

    fs::write(&path, SMALL.replace("[lattice]", "[lattice]\nspacing = 3")).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("spacing") && err.contains("line"), "{err}");

    for p in presets::PRESETS {
        let out = bin().args(["validate", "--preset", p.name]).output().unwrap();
        assert!(out.status.success(), "{}", p.name);
    }
}

#[test]
fn binary_run_and_rerun_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, SMALL).unwrap();
    let out = bin()
        .args(["run", "--threads", "1", "--seed", "5", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = out_dir(&out.stdout);
    let m = fs::read_to_string(first.join(output::MANIFEST)).unwrap();
    assert!(m.contains("seed = 5"));
    let out = bin()
        .args(["run", "--config"])
        .arg(first.join(output::MANIFEST))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(data_files(&first), data_files(&out_dir(&out.stdout)));
}

#[test]
fn binary_renorm_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["renorm-scan", "--f", "gamma", "--gamma", "-1", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = out_dir(&out.stdout);
    let div = rows(&fs::read(dir.join("data/divergence.csv")).unwrap());
    assert_eq!(div[0][6], "non-existent as a->0");
    roxmltree::Document::parse(&fs::read_to_string(dir.join("figs/renorm.svg")).unwrap()).unwrap();

    let out = bin()
        .args(["renorm-scan", "--f", "tanh"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    let dir = out_dir(&out.stdout);
    let div = rows(&fs::read(dir.join("data/divergence.csv")).unwrap());
    assert_eq!(div[0][6], "diverges like L^2/a");

    let out = bin()
        .args(["renorm-scan", "--f", "gamma", "--gamma", "0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("critical point"));
}

#[test]
fn binary_lists_presets() {
    let out = bin().arg("presets").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for p in presets::PRESETS {
        assert!(text.contains(p.name));
    }
    let out = bin().args(["presets", "--show", "fig6"]).output().unwrap();
    let cfg = parse(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(cfg, presets::find("fig6").unwrap().config());
}
