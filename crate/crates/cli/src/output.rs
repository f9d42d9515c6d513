//! CSV tables, figures and the run manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use pathgeom::analysis::theory_df;
use pathgeom::observables::{gaussian_summary, JaggednessHistogram};

use crate::config::{ExperimentConfig, FName, Figure, Format, Resolved, Variant};
use crate::experiment::Outcome;
use crate::svg::{Chart, Series, Style};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal; `inf`/`-inf`/`nan` for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV table: `#` metadata lines, a header row, then records.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            meta: Vec::new(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn to_bytes(&self) -> anyhow::Result<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_bytes()?).with_context(|| format!("writing {}", path.display()))
    }
}

fn base_meta(table: Table, resolved: &Resolved) -> Table {
    table
        .meta("generator", format!("pathgeom {VERSION}"))
        .meta("experiment", &resolved.config.output.experiment)
        .meta("seed", resolved.config.sampler.seed)
        .meta("total_time", num(resolved.config.lattice.total_time))
}

pub fn length_table(resolved: &Resolved, outcome: &Outcome) -> Table {
    let mut t = base_meta(
        Table::new(&[
            "series",
            "N",
            "a",
            "L_mean",
            "L_err",
            "n_samples",
            "plateau_found",
            "acceptance",
        ]),
        resolved,
    );
    for c in &outcome.cells {
        let Some(l) = c.length else { continue };
        let s = &resolved.series[c.series];
        t.rows.push(vec![
            s.label.clone(),
            c.n_sites.to_string(),
            num(s.lattice_at(c.n_sites).spacing),
            num(l.mean),
            num(l.std_error),
            l.n_samples.to_string(),
            l.plateau_found.to_string(),
            num(c.acceptance_rate),
        ]);
    }
    t
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Naive => "naive",
        Variant::SubDiffusive => "sub-diffusive",
        Variant::FModified => "f-modified",
        Variant::UniformReference => "uniform-reference",
    }
}

fn f_name(f: Option<FName>) -> &'static str {
    match f {
        None => "",
        Some(FName::Identity) => "identity",
        Some(FName::Gamma) => "gamma",
        Some(FName::Tanh) => "tanh",
        Some(FName::Sin) => "sin",
    }
}

/// `d_f` error propagated from β.
pub fn df_error(beta: f64, beta_err: f64) -> f64 {
    beta_err / (1.0 - beta).powi(2)
}

pub fn fit_table(resolved: &Resolved, outcome: &Outcome) -> Table {
    let mut t = base_meta(
        Table::new(&[
            "series",
            "variant",
            "xi",
            "alpha",
            "f",
            "gamma",
            "beta",
            "beta_err",
            "intercept",
            "d_f",
            "d_f_err",
            "d_f_theory",
        ]),
        resolved,
    );
    for sf in &outcome.fits {
        let s = &resolved.series[sf.series];
        let f = sf.fit;
        let theory = match (s.spec.variant, s.spec.xi, s.spec.alpha) {
            (Variant::SubDiffusive, Some(xi), Some(alpha)) => Some(theory_df(xi, alpha)),
            _ => None,
        };
        t.rows.push(vec![
            s.label.clone(),
            variant_name(s.spec.variant).into(),
            opt(s.spec.xi),
            opt(s.spec.alpha),
            f_name(s.spec.f).into(),
            opt(s.spec.gamma),
            num(f.beta),
            num(f.beta_std_error),
            num(f.intercept),
            num(f.d_f),
            if f.is_infinite() {
                String::new()
            } else {
                num(df_error(f.beta, f.beta_std_error))
            },
            opt(theory),
        ]);
    }
    t
}

/// Histogram and summary tables, one block per (series, N) cell.
pub fn jaggedness_tables(resolved: &Resolved, outcome: &Outcome) -> anyhow::Result<(Table, Table)> {
    let mut hist = base_meta(
        Table::new(&["series", "N", "bin_lo", "bin_hi", "count", "density"]),
        resolved,
    );
    let mut summary = base_meta(Table::new(&["series", "N", "n_paths", "center", "width"]), resolved);
    for c in &outcome.cells {
        if c.jaggedness.is_empty() {
            continue;
        }
        let label = &resolved.series[c.series].label;
        let h = JaggednessHistogram::from_values(&c.jaggedness)?;
        let total = h.n_paths as f64;
        for (lo, hi, count) in h.bins() {
            hist.rows.push(vec![
                label.clone(),
                c.n_sites.to_string(),
                num(lo),
                num(hi),
                count.to_string(),
                num(count as f64 / (total * (hi - lo))),
            ]);
        }
        let (center, width) = gaussian_summary(&h);
        summary.rows.push(vec![
            label.clone(),
            c.n_sites.to_string(),
            h.n_paths.to_string(),
            num(center),
            num(width),
        ]);
    }
    Ok((hist, summary))
}

pub fn path_table(resolved: &Resolved, outcome: &Outcome) -> Table {
    let mut t = base_meta(Table::new(&["series", "N", "k", "t", "x"]), resolved);
    for c in &outcome.cells {
        let Some(xs) = &c.sample_path else { continue };
        let s = &resolved.series[c.series];
        let a = s.lattice_at(c.n_sites).spacing;
        for (k, x) in xs.iter().enumerate() {
            t.rows.push(vec![
                s.label.clone(),
                c.n_sites.to_string(),
                k.to_string(),
                num(k as f64 * a),
                num(*x),
            ]);
        }
    }
    t
}

pub fn figure(fig: Figure, resolved: &Resolved, outcome: &Outcome) -> anyhow::Result<Chart> {
    let exp = &resolved.config.output.experiment;
    Ok(match fig {
        Figure::LengthScaling => {
            let mut c = Chart::new(&format!("{exp}: length scaling"), "N", "<L>").log_log();
            for (i, s) in resolved.series.iter().enumerate() {
                let label = match outcome.fit_of(i) {
                    Some(f) => format!("{} (b={:.3})", s.label, f.beta),
                    None => s.label.clone(),
                };
                let mut ser = Series::new(label, Style::LineMarkers);
                for cell in outcome.cells_of(i) {
                    if let Some(l) = cell.length {
                        ser.points.push((cell.n_sites as f64, l.mean, l.std_error));
                    }
                }
                c.series.push(ser);
            }
            c
        }
        Figure::DfVsAlpha => {
            let mut c = Chart::new(&format!("{exp}: fractal dimension"), "alpha", "d_f");
            let mut xis: Vec<f64> = resolved.series.iter().filter_map(|s| s.spec.xi).collect();
            xis.sort_by(f64::total_cmp);
            xis.dedup();
            for (slot, xi) in xis.into_iter().enumerate() {
                let mut dots = Series::new(format!("xi={xi}"), Style::Markers).colored(slot);
                let mut alphas = Vec::new();
                for (i, s) in resolved.series.iter().enumerate() {
                    if s.spec.xi != Some(xi) {
                        continue;
                    }
                    let alpha = s.spec.alpha.unwrap_or(f64::NAN);
                    alphas.push(alpha);
                    if let Some(f) = outcome.fit_of(i) {
                        if !f.is_infinite() {
                            dots.points.push((alpha, f.d_f, df_error(f.beta, f.beta_std_error)));
                        }
                    }
                }
                let (lo, hi) = alphas
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
                let mut theory = Series::new(format!("theory xi={xi}"), Style::Line).colored(slot);
                if lo.is_finite() {
                    for k in 0..=200 {
                        let a = lo + (hi - lo) * k as f64 / 200.0;
                        theory.points.push((a, theory_df(xi, a), 0.0));
                    }
                }
                c.series.push(dots);
                c.series.push(theory);
            }
            c
        }
        Figure::BetaVsGamma => {
            let mut c = Chart::new(&format!("{exp}: length exponent"), "gamma", "beta");
            let mut dots = Series::new("fit", Style::Markers);
            let mut gammas = Vec::new();
            for (i, s) in resolved.series.iter().enumerate() {
                let g = s.spec.gamma.unwrap_or(f64::NAN);
                gammas.push(g);
                if let Some(f) = outcome.fit_of(i) {
                    dots.points.push((g, f.beta, f.beta_std_error));
                }
            }
            c.series.push(dots);
            let lo = gammas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo < 0.0 {
                let mut l = Series::new("d_f = inf", Style::Line);
                l.points = vec![(lo, 1.0, 0.0), (0.0, 1.0, 0.0)];
                c.series.push(l);
            }
            if hi > 0.0 {
                let mut l = Series::new("d_f = 2", Style::Line);
                l.points = vec![(0.0, 0.5, 0.0), (hi, 0.5, 0.0)];
                c.series.push(l);
            }
            c
        }
        Figure::Jaggedness => {
            let mut c = Chart::new(&format!("{exp}: jaggedness"), "J", "p(J)");
            let cells = outcome.cells.iter().filter(|c| !c.jaggedness.is_empty());
            for (slot, cell) in cells.enumerate() {
                let label = &resolved.series[cell.series].label;
                let h = JaggednessHistogram::from_values(&cell.jaggedness)?;
                let total = h.n_paths as f64;
                let mut dots = Series::new(format!("{label} N={}", cell.n_sites), Style::Markers).colored(slot);
                for (lo, hi, count) in h.bins() {
                    if count > 0 {
                        dots.points
                            .push((0.5 * (lo + hi), count as f64 / (total * (hi - lo)), 0.0));
                    }
                }
                let (m, sd) = gaussian_summary(&h);
                let mut g = Series::new(format!("gaussian {m:.3} +/- {sd:.3}"), Style::Line).colored(slot);
                if sd > 0.0 {
                    for k in 0..=120 {
                        let x = m + sd * (-4.0 + 8.0 * k as f64 / 120.0);
                        let z = (x - m) / sd;
                        g.points.push((
                            x,
                            (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()),
                            0.0,
                        ));
                    }
                }
                c.series.push(dots);
                c.series.push(g);
            }
            c
        }
        Figure::Paths => {
            let mut c = Chart::new(&format!("{exp}: sample paths"), "t", "x");
            for cell in &outcome.cells {
                let Some(xs) = &cell.sample_path else { continue };
                let s = &resolved.series[cell.series];
                let a = s.lattice_at(cell.n_sites).spacing;
                let mut ser = Series::new(format!("{} N={}", s.label, cell.n_sites), Style::Line);
                ser.points = xs.iter().enumerate().map(|(k, &x)| (k as f64 * a, x, 0.0)).collect();
                c.series.push(ser);
            }
            c
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSeed {
    pub label: String,
    /// Decimal string: derived seeds span the full `u64` range, TOML integers do not.
    pub seed: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    /// `complete` or `incomplete`.
    pub status: String,
    pub version: String,
    pub experiment: String,
    pub created: String,
    pub allow_small_gamma: bool,
    pub series_seeds: Vec<SeriesSeed>,
    pub files: Vec<String>,
    pub failures: Vec<String>,
}

/// Everything needed to repeat a run: `pathgeom run --config manifest.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub config: ExperimentConfig,
}

pub const MANIFEST: &str = "manifest.toml";

/// `<base>/<experiment>/<timestamp>`, suffixed if that directory already exists.
pub fn create_run_dir(base: &Path, experiment: &str, stamp: &str) -> anyhow::Result<PathBuf> {
    let parent = base.join(experiment);
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    for k in 0.. {
        let name = if k == 0 {
            stamp.to_string()
        } else {
            format!("{stamp}-{k}")
        };
        let dir = parent.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

pub fn timestamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

/// Writes tables, figures and the manifest into `dir`. Returns the manifest.
pub fn write_run(
    dir: &Path,
    resolved: &Resolved,
    outcome: &Outcome,
    allow_small_gamma: bool,
    created: &str,
) -> anyhow::Result<Manifest> {
    let formats = &resolved.config.output.formats;
    let an = &resolved.config.analysis;
    let mut files = Vec::new();
    if formats.contains(&Format::Csv) {
        fs::create_dir_all(dir.join("data"))?;
        let mut tables = Vec::new();
        if an.fit {
            tables.push(("length.csv", length_table(resolved, outcome)));
            tables.push(("fits.csv", fit_table(resolved, outcome)));
        }
        if an.histogram {
            let (h, s) = jaggedness_tables(resolved, outcome)?;
            tables.push(("jaggedness_hist.csv", h));
            tables.push(("jaggedness_summary.csv", s));
        }
        if an.sample_paths {
            tables.push(("paths.csv", path_table(resolved, outcome)));
        }
        for (name, t) in tables {
            t.write(&dir.join("data").join(name))?;
            files.push(format!("data/{name}"));
        }
    }
    if formats.contains(&Format::Svg) {
        fs::create_dir_all(dir.join("figs"))?;
        for fig in &resolved.figures {
            let name = format!("{}.svg", fig.file_stem());
            let chart = figure(*fig, resolved, outcome)?;
            fs::write(dir.join("figs").join(&name), chart.render())?;
            files.push(format!("figs/{name}"));
        }
    }
    let failures = outcome
        .failures
        .iter()
        .map(|f| {
            let label = &resolved.series[f.series].label;
            if f.n_sites == 0 {
                format!("{label}: {}", f.message)
            } else {
                format!("{label}, N = {}: {}", f.n_sites, f.message)
            }
        })
        .collect();
    let manifest = Manifest {
        run: RunInfo {
            status: if outcome.is_complete() {
                "complete"
            } else {
                "incomplete"
            }
            .into(),
            version: VERSION.into(),
            experiment: resolved.config.output.experiment.clone(),
            created: created.into(),
            allow_small_gamma,
            series_seeds: resolved
                .series
                .iter()
                .map(|s| SeriesSeed {
                    label: s.label.clone(),
                    seed: s.params.seed.to_string(),
                })
                .collect(),
            files,
            failures,
        },
        config: resolved.config.clone(),
    };
    let text = toml::to_string(&manifest).context("serializing the manifest")?;
    fs::write(dir.join(MANIFEST), text)?;
    Ok(manifest)
}
