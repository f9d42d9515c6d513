//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run all with `cargo test --release -p pathgeom-cli --test acceptance`, or a
//! subset by number: `... --test acceptance -- 2 5`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, ensure, Context};

use pathgeom::analysis::{least_squares, oracle_check, oracle_converged, theory_df, OracleGrid};
use pathgeom::observables::{gaussian_summary, JaggednessHistogram};
use pathgeom::renorm::{classify_divergence, compute_s, DivergenceClass};
use pathgeom::sampler::pooled_estimate;
use pathgeom::*;
use pathgeom_cli::config::{parse, resolve, Resolved};
use pathgeom_cli::experiment::{self, Outcome};
use pathgeom_cli::{presets, run_experiment};

type Check = anyhow::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn preset(name: &str) -> anyhow::Result<(Resolved, Outcome)> {
    let p = presets::find(name).ok_or_else(|| anyhow!("no preset {name}"))?;
    let resolved = resolve(&p.config(), false)?;
    let outcome = experiment::run(&resolved);
    if let Some(f) = outcome.failures.first() {
        return Err(anyhow!("{name}: {}", f.message));
    }
    Ok((resolved, outcome))
}

fn label_index(r: &Resolved, label: &str) -> anyhow::Result<usize> {
    r.series
        .iter()
        .position(|s| s.label == label)
        .ok_or_else(|| anyhow!("no series {label}"))
}

fn fitted_beta(r: &Resolved, o: &Outcome, label: &str) -> anyhow::Result<(f64, f64)> {
    let f = o
        .fit_of(label_index(r, label)?)
        .ok_or_else(|| anyhow!("no fit for {label}"))?;
    Ok((f.beta, f.beta_std_error))
}

/// β against `target ± band` for each listed series.
fn beta_bands(r: &Resolved, o: &Outcome, targets: &[(&str, f64, f64)]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(label, target, band) in targets {
        let (b, e) = fitted_beta(r, o, label)?;
        let hit = (b - target).abs() <= band;
        ok &= hit;
        parts.push(format!(
            "{label}: b = {b:.4} +/- {e:.4} (want {target:.3} +/- {band}){}",
            if hit { "" } else { " <-- out of band" }
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn criterion_1() -> Check {
    let (r, o) = preset("naive")?;
    beta_bands(&r, &o, &[("naive", 0.5, 0.02)])
}

fn criterion_2() -> Check {
    let (r, o) = preset("fig1")?;
    let (ok1, d1) = beta_bands(
        &r,
        &o,
        &[
            ("xi=2 alpha=3", 0.5, 0.03),
            ("xi=2 alpha=4", 0.5, 0.03),
            ("xi=2 alpha=5", 0.4, 0.03),
            ("xi=2 alpha=6", 1.0 / 3.0, 0.03),
        ],
    )?;
    let (r, o) = preset("fig2")?;
    let mut worst = (0.0f64, String::new());
    for (i, s) in r.series.iter().enumerate() {
        let (xi, alpha) = (s.spec.xi.unwrap(), s.spec.alpha.unwrap());
        let f = o.fit_of(i).ok_or_else(|| anyhow!("no fit for {}", s.label))?;
        let dev = (f.d_f - theory_df(xi, alpha)).abs();
        if dev.is_nan() || dev > worst.0 {
            worst = (
                dev,
                format!("{} (d_f = {:.3}, theory {:.3})", s.label, f.d_f, theory_df(xi, alpha)),
            );
        }
    }
    let ok2 = worst.0 <= 0.1;
    Ok((
        ok1 && ok2,
        format!(
            "{d1}; d_f scan over {} series, worst |d_f - theory| = {:.3} at {} (want <= 0.1)",
            r.series.len(),
            worst.0,
            worst.1
        ),
    ))
}

fn criterion_3() -> Check {
    let (r, o) = preset("fig4")?;
    beta_bands(
        &r,
        &o,
        &[
            ("gamma=2", 0.5, 0.02),
            ("gamma=1", 0.5, 0.02),
            ("gamma=0.5", 0.5, 0.03),
            ("gamma=-1", 1.0, 0.03),
            ("tanh", 1.0, 0.03),
            ("sin", 1.0, 0.03),
        ],
    )
}

fn criterion_4() -> Check {
    let (r, o) = preset("fig6")?;
    let summary = |label: &str| -> anyhow::Result<(f64, f64)> {
        let i = label_index(&r, label)?;
        let cell = o.cells_of(i).next().ok_or_else(|| anyhow!("no cell for {label}"))?;
        Ok(gaussian_summary(&JaggednessHistogram::from_values(&cell.jaggedness)?))
    };
    let (nc, nw) = summary("naive")?;
    let (sc, _) = summary("xi=1 alpha=10")?;
    let (gc, _) = summary("gamma=-1")?;
    let (uc, _) = summary("uniform")?;
    let checks = [
        (
            (nc - 0.5).abs() <= 0.01,
            format!("naive center {nc:.4} (0.50 +/- 0.01)"),
        ),
        (
            (nw - 0.022).abs() <= 0.006,
            format!("naive width {nw:.4} (0.022 +/- 0.006)"),
        ),
        (
            (sc - nc).abs() < 0.01,
            format!(
                "sub-diffusive center {sc:.4}, differs by {:.4} (< 0.01)",
                (sc - nc).abs()
            ),
        ),
        (
            (gc - 0.625).abs() <= 0.01,
            format!("gamma=-1 box center {gc:.4} (0.625 +/- 0.01)"),
        ),
        (
            (uc - 2.0 / 3.0).abs() <= 0.005,
            format!("uniform center {uc:.4} (2/3 +/- 0.005)"),
        ),
    ];
    Ok(summarize(&checks))
}

fn summarize(checks: &[(bool, String)]) -> (bool, String) {
    let ok = checks.iter().all(|c| c.0);
    let text = checks
        .iter()
        .map(|(hit, s)| {
            if *hit {
                s.clone()
            } else {
                format!("{s} <-- out of band")
            }
        })
        .collect::<Vec<_>>()
        .join("; ");
    (ok, text)
}

fn criterion_5() -> Check {
    let mut checks = Vec::new();

    // Identity f is exactly naive only once the cutoff no longer truncates the
    // Gaussian link weight, i.e. for L/sqrt(a) well past a few units.
    let mut worst = 0.0f64;
    let mut grid = 0;
    for l in [0.5, 1.0, 3.0] {
        for a in [1e-2, 1e-3, 1e-4, 1e-6] {
            if l / f64::sqrt(a) < 10.0 {
                continue;
            }
            grid += 1;
            let r = renormalize(FKind::Identity, l, a)?;
            worst = worst.max((r.s_value - 1.0).abs()).max((r.g_value - 1.0).abs());
        }
    }
    checks.push((
        worst <= 1e-8,
        format!("identity max |s-1|, |g-1| = {worst:.1e} over {grid} (L, a) with L/sqrt(a) >= 10 (<= 1e-8)"),
    ));

    // With a free end the increments are independent, so ⟨Δx²⟩/a is s[f] itself.
    // Local updates relax the longest path mode in about N² sweeps, longer than
    // blocking can resolve, so the burn-in covers it and the error comes from
    // the spread of independent chains.
    let n = 256;
    let n_chains = 16;
    let cfg = LatticeConfig::new(n, 1.0)?.with_cutoff(1.0)?.with_free_end();
    for (i, gamma) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let kind = FKind::Gamma(gamma);
        let spec = ActionSpec::f_modified(kind)?;
        let params = SamplerParams {
            n_sweeps: 40_000,
            burn_in: 80_000,
            thinning: 100,
            seed: 500 + i as u64,
            ..SamplerParams::for_action(&spec)
        };
        let obs = Observable::IncrementMoment(2.0);
        let chains = run_chains(&spec, &params, &cfg, &[obs], n_chains)?;
        let means = chains
            .iter()
            .map(|c| {
                let xs = c.series(&obs).ok_or_else(|| anyhow!("missing series"))?;
                Ok(xs.iter().sum::<f64>() / xs.len() as f64 / cfg.spacing)
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
        let k = means.len() as f64;
        let sampled = means.iter().sum::<f64>() / k;
        let spread = (means.iter().map(|m| (m - sampled).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
        let s = compute_s(kind, 1.0, cfg.spacing)?;
        let err = spread.hypot(s.quadrature_error);
        let z = (sampled - s.value).abs() / err;
        checks.push((
            z < 3.0,
            format!(
                "gamma={gamma}: <dx^2>/a = {sampled:.4} +/- {err:.4} vs s = {:.4} (z = {z:.2})",
                s.value
            ),
        ));
    }

    let d = classify_divergence(FKind::Tanh, 1.0, &[1e-2, 1e-3, 1e-4])?;
    checks.push((
        (d.slope - 1.0).abs() <= 0.05 && d.class == DivergenceClass::BoundedDivergent,
        format!("tanh slope {:.4} ({}) (1.00 +/- 0.05)", d.slope, d.class),
    ));
    Ok(summarize(&checks))
}

fn oracle_variants() -> Vec<ActionSpec> {
    vec![
        ActionSpec::naive(),
        ActionSpec::naive().with_potential(Potential::Harmonic { omega: 1.5 }),
        ActionSpec::sub_diffusive(1.0, 2.0, 3.0).unwrap(),
        ActionSpec::sub_diffusive(0.5, 1.0, 4.0).unwrap(),
        ActionSpec::f_modified(FKind::Identity).unwrap(),
        ActionSpec::f_modified(FKind::Gamma(2.0)).unwrap(),
        ActionSpec::f_modified(FKind::Gamma(1.0)).unwrap(),
        ActionSpec::f_modified(FKind::Gamma(0.5)).unwrap(),
        ActionSpec::f_modified(FKind::Gamma(-1.0)).unwrap(),
        ActionSpec::f_modified(FKind::Tanh).unwrap(),
        ActionSpec::f_modified(FKind::Sin).unwrap(),
    ]
}

fn criterion_6() -> Check {
    let mut rows = 0;
    let mut worst = (0.0f64, String::new());
    for (i, spec) in oracle_variants().iter().enumerate() {
        for n in 2..=6 {
            for (j, cutoff) in [0.5, 1.0].into_iter().enumerate() {
                let cfg = LatticeConfig::new(n, 0.25 * n as f64)?.with_cutoff(cutoff)?;
                let params = SamplerParams {
                    n_sweeps: 40_000,
                    burn_in: 2_000,
                    thinning: 5,
                    seed: 7_000 + 100 * i as u64 + 10 * n as u64 + j as u64,
                    ..SamplerParams::for_action(spec)
                };
                for r in oracle_check(spec, &cfg, &params, 4, 0.0, 1e-6).with_context(|| format!("{spec}, N = {n}"))? {
                    rows += 1;
                    let z = r.z_score();
                    if z.is_nan() || z > worst.0 {
                        worst = (z, format!("{spec}, N = {n}, L = {cutoff}, {}", r.observable.name()));
                    }
                }
            }
        }
    }
    let (g, drift) = oracle_converged(
        &ActionSpec::naive(),
        &LatticeConfig::new(2, 1.0)?,
        OracleGrid { cells: 64, extent: 6.0 },
        1e-6,
        4096,
    )?;
    let dev = (g.sq_increment_0 - 0.25).abs();
    let checks = [
        (
            worst.0 < 3.0,
            format!("{rows} comparisons, max z = {:.2} at {} (< 3)", worst.0, worst.1),
        ),
        (
            dev <= 1e-6,
            format!(
                "Gaussian self-test <dx^2> = {:.9} vs a/2 = 0.25 (drift {drift:.1e}, want 1e-6)",
                g.sq_increment_0
            ),
        ),
    ];
    Ok(summarize(&checks))
}

fn criterion_7() -> Check {
    let mut checks = Vec::new();
    let n = 16;
    let cfg = LatticeConfig::new(n, 1.0)?;
    let obs: Vec<Observable> = (1..n).map(Observable::SchwingerDyson).collect();
    let params = SamplerParams {
        n_sweeps: 40_000,
        burn_in: 2_000,
        thinning: 10,
        seed: 11,
        ..SamplerParams::default()
    };
    let chains = run_chains(&ActionSpec::naive(), &params, &cfg, &obs, 4)?;
    let mut worst = (0.0f64, 0);
    for (k, o) in obs.iter().enumerate() {
        let e = pooled_estimate(&chains, o)?;
        let z = (e.mean - 1.0).abs() / e.std_error;
        if z > worst.0 {
            worst = (z, k + 1);
        }
    }
    checks.push((
        worst.0 < 3.0,
        format!(
            "naive <x_k dS/dx_k> = 1 at {} sites, max z = {:.2} at k = {}",
            n - 1,
            worst.0,
            worst.1
        ),
    ));

    // Bounded means no power of N: a growth exponent near 1 would signal L²/a.
    let spec = ActionSpec::f_modified(FKind::Tanh)?;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for (i, n) in [64usize, 128, 256].into_iter().enumerate() {
        let cfg = LatticeConfig::new(n, 1.0)?.with_cutoff(1.0)?;
        let params = SamplerParams {
            n_sweeps: 20_000,
            burn_in: 2_000,
            thinning: 10,
            seed: 90 + i as u64,
            ..SamplerParams::for_action(&spec)
        };
        let chains = run_chains(&spec, &params, &cfg, &[Observable::ModifiedSd], 2)?;
        let e = pooled_estimate(&chains, &Observable::ModifiedSd)?;
        let v = e.mean / cfg.spacing;
        ensure!(v.is_finite() && v > 0.0, "modified SD/a = {v} at N = {n}");
        pts.push(((n as f64).ln(), v.ln()));
        vals.push(format!("N={n}: {v:.4}"));
    }
    let slope = least_squares(&pts).slope;
    checks.push((
        slope < 0.5,
        format!(
            "tanh <f'(S_k) dx_k^2>/a: {}, growth exponent {slope:.3} (< 0.5)",
            vals.join(", ")
        ),
    ));
    Ok(summarize(&checks))
}

const DETERMINISM: &str = r#"
[action]
potential = "free"

[[action.series]]
variant = "naive"

[[action.series]]
variant = "sub-diffusive"
xi = 1.0
alpha = 10.0

[[action.series]]
variant = "f-modified"
f = "tanh"

[lattice]
n_sites = [16, 32, 64, 128]

[sampler]
sweeps = 5000
burn_in = 500
thinning = 5
seed = 2024
chains = 3

[analysis]
histogram = true
sample_paths = true

[output]
experiment = "determinism"
"#;

fn csvs(dir: &Path) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir.join("data"))? {
        let p = e?.path();
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?));
    }
    out.sort();
    Ok(out)
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir()?;
    let cfg = parse(DETERMINISM)?;
    let a = run_experiment(&cfg, false, Some(tmp.path()))?;
    // A different worker count must not change anything.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build()?;
    let b = pool.install(|| run_experiment(&cfg, false, Some(tmp.path())))?;
    let (ca, cb) = (csvs(&a.directory)?, csvs(&b.directory)?);
    let bytes: usize = ca.iter().map(|f| f.1.len()).sum();
    Ok((
        ca == cb && !ca.is_empty(),
        format!(
            "{} CSV files, {bytes} bytes, identical across two runs: {}",
            ca.len(),
            ca == cb
        ),
    ))
}

const CRITERIA: [Criterion; 8] = [
    ("naive baseline", criterion_1),
    ("sub-diffusive family", criterion_2),
    ("super-diffusive fits", criterion_3),
    ("jaggedness", criterion_4),
    ("renormalization functionals", criterion_5),
    ("oracle equivalence", criterion_6),
    ("Schwinger-Dyson suite", criterion_7),
    ("determinism", criterion_8),
];

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{:.0} s]",
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
