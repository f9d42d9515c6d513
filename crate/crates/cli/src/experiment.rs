//! Runs the (series, N) cells of a resolved experiment.

use rand::SeedableRng;
use rand_pcg::Pcg64;
use rayon::prelude::*;

use pathgeom::analysis::{fit_power_law, ScalingEntry, ScalingSeries};
use pathgeom::observables::{jaggedness, uniform_reference_paths, Estimate, Observable, MIN_HISTOGRAM_PATHS};
use pathgeom::sampler::{chain_seed, run_chain_with};
use pathgeom::{ChainOutput, FitResult, SamplerParams};

use crate::config::{Resolved, ResolvedSeries, SeriesKind};

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub series: usize,
    pub n_sites: usize,
    pub length: Option<Estimate>,
    /// Jaggedness of every recorded path, chains concatenated in index order.
    pub jaggedness: Vec<f64>,
    pub sample_path: Option<Vec<f64>>,
    pub acceptance_rate: f64,
    pub final_delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub series: usize,
    pub n_sites: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFit {
    pub series: usize,
    pub fit: FitResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    /// Successful cells ordered by series, then N.
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub fits: Vec<SeriesFit>,
}

impl Outcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn cells_of(&self, series: usize) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.series == series)
    }

    pub fn fit_of(&self, series: usize) -> Option<&FitResult> {
        self.fits.iter().find(|f| f.series == series).map(|f| &f.fit)
    }
}

/// Seed of chain `chain` in cell `n_index` of a series.
pub fn cell_seed(series_seed: u64, n_index: usize, chain: usize) -> u64 {
    chain_seed(series_seed, (n_index as u64) << 16 | chain as u64)
}

fn chain_cell(s: &ResolvedSeries, n_index: usize, n: usize, want: &Wants) -> pathgeom::Result<CellResult> {
    let SeriesKind::Chain(spec) = &s.kind else {
        unreachable!("chain cell for a non-chain series")
    };
    let cfg = s.lattice_at(n);
    let mut obs = vec![Observable::Length];
    if want.histogram {
        obs.push(Observable::Jaggedness);
    }
    let runs: Vec<(ChainOutput, Option<Vec<f64>>)> = (0..s.chains)
        .into_par_iter()
        .map(|c| {
            let params = SamplerParams {
                seed: cell_seed(s.params.seed, n_index, c),
                ..s.params.clone()
            };
            let mut last = None;
            let keep = want.sample_paths && c == 0;
            let out = run_chain_with(spec, &params, &cfg, &obs, |_, p| {
                if keep {
                    last = Some(p.positions().to_vec());
                }
            })?;
            Ok((out, last))
        })
        .collect::<pathgeom::Result<_>>()?;
    let parts = runs
        .iter()
        .map(|(c, _)| c.estimate(&Observable::Length))
        .collect::<pathgeom::Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    Ok(CellResult {
        series: 0,
        n_sites: n,
        length: Some(Estimate::pool(&parts)?),
        jaggedness: if want.histogram {
            runs.iter()
                .flat_map(|(c, _)| c.series(&Observable::Jaggedness).unwrap_or(&[]).iter().copied())
                .collect()
        } else {
            Vec::new()
        },
        sample_path: runs.first().and_then(|(_, p)| p.clone()),
        acceptance_rate: runs.iter().map(|(c, _)| c.acceptance_rate).sum::<f64>() / k,
        final_delta: runs.iter().map(|(c, _)| c.final_delta).sum::<f64>() / k,
    })
}

fn uniform_cell(s: &ResolvedSeries, width: f64, n_index: usize, n: usize) -> pathgeom::Result<CellResult> {
    let records = (s.params.n_sweeps / s.params.thinning) as usize * s.chains;
    let mut rng = Pcg64::seed_from_u64(cell_seed(s.params.seed, n_index, 0));
    let paths = uniform_reference_paths(n, width, records.max(MIN_HISTOGRAM_PATHS), &mut rng);
    let jag = paths.iter().map(jaggedness).collect::<pathgeom::Result<Vec<_>>>()?;
    Ok(CellResult {
        series: 0,
        n_sites: n,
        length: None,
        jaggedness: jag,
        sample_path: None,
        acceptance_rate: 1.0,
        final_delta: 0.0,
    })
}

struct Wants {
    histogram: bool,
    sample_paths: bool,
}

/// Runs every cell. Cells are independent and may finish in any order; results
/// are reassembled in config order, so output depends only on the config.
pub fn run(resolved: &Resolved) -> Outcome {
    let an = &resolved.config.analysis;
    let want = Wants {
        histogram: an.histogram,
        sample_paths: an.sample_paths,
    };
    let jobs: Vec<(usize, usize, usize)> = resolved
        .series
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.n_sites.iter().enumerate().map(move |(j, &n)| (i, j, n)))
        .collect();
    let results: Vec<(usize, usize, pathgeom::Result<CellResult>)> = jobs
        .par_iter()
        .map(|&(i, j, n)| {
            let s = &resolved.series[i];
            let r = match &s.kind {
                SeriesKind::Chain(_) => chain_cell(s, j, n, &want),
                SeriesKind::Uniform { width } => uniform_cell(s, *width, j, n),
            };
            (i, n, r.map(|c| CellResult { series: i, ..c }))
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (i, n, r) in results {
        match r {
            Ok(c) => cells.push(c),
            Err(e) => failures.push(CellFailure {
                series: i,
                n_sites: n,
                message: e.to_string(),
            }),
        }
    }

    let mut fits = Vec::new();
    if an.fit {
        for (i, s) in resolved.series.iter().enumerate() {
            let SeriesKind::Chain(spec) = &s.kind else { continue };
            let entries: Vec<ScalingEntry> = cells
                .iter()
                .filter(|c| c.series == i)
                .filter_map(|c| {
                    c.length.map(|length| ScalingEntry {
                        n_sites: c.n_sites,
                        length,
                        acceptance_rate: c.acceptance_rate,
                        final_delta: c.final_delta,
                    })
                })
                .collect();
            if entries.len() != s.n_sites.len() {
                continue;
            }
            let series = ScalingSeries {
                entries,
                total_time: s.lattice.total_time(),
                action: *spec,
            };
            match fit_power_law(&series) {
                Ok(fit) => fits.push(SeriesFit { series: i, fit }),
                Err(e) => failures.push(CellFailure {
                    series: i,
                    n_sites: 0,
                    message: format!("fit failed: {e}"),
                }),
            }
        }
    }
    Outcome { cells, failures, fits }
}
