//! Per-path measurements and blocking-based error estimates.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{ActionKind, LinkKernel, Path};

/// Minimum series length accepted by [`blocked_estimate`].
pub const MIN_BLOCKING_SAMPLES: usize = 64;
/// Minimum number of paths for a jaggedness histogram.
pub const MIN_HISTOGRAM_PATHS: usize = 1000;
pub const HISTOGRAM_BINS: usize = 64;

/// Relative change below which the blocked error counts as converged.
const PLATEAU_TOLERANCE: f64 = 0.05;
/// Fewest blocks a blocking level may have and still be trusted.
const MIN_BLOCKS: usize = 32;

/// A quantity recorded once per measured sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    /// `Σ_k |Δx_k|`
    Length,
    /// `(1/N) Σ_k |Δx_k|^p`
    IncrementMoment(f64),
    Jaggedness,
    /// `|Δx_k|` on one link.
    AbsIncrement(usize),
    /// `Δx_k²` on one link.
    SquaredIncrement(usize),
    /// `x_k ∂S_N/∂x_k` at one site.
    SchwingerDyson(usize),
    /// `(1/N) Σ_k f'(S_k) Δx_k²` for f-modified actions.
    ModifiedSd,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Length => "length".into(),
            Observable::IncrementMoment(p) => format!("increment_moment_{p}"),
            Observable::Jaggedness => "jaggedness".into(),
            Observable::AbsIncrement(k) => format!("abs_increment_{k}"),
            Observable::SquaredIncrement(k) => format!("sq_increment_{k}"),
            Observable::SchwingerDyson(k) => format!("schwinger_dyson_{k}"),
            Observable::ModifiedSd => "modified_sd".into(),
        }
    }

    /// Checks that the observable is defined for this kernel and a lattice of `n_sites` links.
    pub fn check(&self, kernel: &LinkKernel, n_sites: usize) -> Result<()> {
        match *self {
            Observable::IncrementMoment(p) if !(p > 0.0 && p.is_finite()) => {
                Err(Error::Contract(format!("increment moment needs p > 0, got {p}")))
            }
            Observable::Jaggedness if n_sites < 2 => Err(Error::Contract("jaggedness needs at least two links".into())),
            Observable::AbsIncrement(k) | Observable::SquaredIncrement(k) if k >= n_sites => {
                Err(Error::Contract(format!("link {k} out of range")))
            }
            Observable::SchwingerDyson(k) if k == 0 || k > n_sites => {
                Err(Error::Contract(format!("site {k} is not a movable site")))
            }
            Observable::ModifiedSd if !matches!(kernel.spec().kind, ActionKind::FModified(_)) => Err(Error::Contract(
                "the modified Schwinger-Dyson combination needs an f-modified action".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Evaluates on a path already validated by [`Observable::check`].
    pub fn measure(&self, path: &Path, kernel: &LinkKernel) -> f64 {
        let xs = path.positions();
        match *self {
            Observable::Length => path_length(path),
            Observable::IncrementMoment(p) => increment_moment(path, p),
            Observable::Jaggedness => jaggedness_of(xs),
            Observable::AbsIncrement(k) => (xs[k + 1] - xs[k]).abs(),
            Observable::SquaredIncrement(k) => {
                let d = xs[k + 1] - xs[k];
                d * d
            }
            Observable::SchwingerDyson(k) => xs[k] * kernel.site_gradient(xs, k),
            Observable::ModifiedSd => modified_sd_unchecked(path, kernel),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub sweep_index: u64,
}

pub fn path_length(path: &Path) -> f64 {
    path.increments().map(f64::abs).sum()
}

pub fn increment_moment(path: &Path, p: f64) -> f64 {
    let n = path.n_links() as f64;
    let sum: f64 = if p == 2.0 {
        path.increments().map(|d| d * d).sum()
    } else {
        path.increments().map(|d| d.abs().powf(p)).sum()
    };
    sum / n
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn jaggedness_of(xs: &[f64]) -> f64 {
    let n = xs.len() - 1;
    let mut acc = 0.0;
    for w in xs.windows(3) {
        let s = sgn(w[1] - w[0]) * sgn(w[2] - w[1]);
        acc += 0.5 * (1.0 - s);
    }
    acc / (n - 1) as f64
}

/// Fraction of interior sites that are strict local extrema, with `sgn(0) = 0`.
pub fn jaggedness(path: &Path) -> Result<f64> {
    if path.n_links() < 2 {
        return Err(Error::Contract("jaggedness needs at least two links".into()));
    }
    Ok(jaggedness_of(path.positions()))
}

fn modified_sd_unchecked(path: &Path, kernel: &LinkKernel) -> f64 {
    let ActionKind::FModified(f) = kernel.spec().kind else {
        return f64::NAN;
    };
    let xs = path.positions();
    let sum: f64 = xs
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            f.eval_derivative(kernel.naive(w[0], w[1])) * d * d
        })
        .sum();
    sum / path.n_links() as f64
}

/// `(1/N) Σ_k f'(S_k) Δx_k²` with `S_k` the naive link action.
pub fn modified_sd_combination(path: &Path, kernel: &LinkKernel) -> Result<f64> {
    Observable::ModifiedSd.check(kernel, path.n_links())?;
    Ok(modified_sd_unchecked(path, kernel))
}

/// Mean and blocking-analysis standard error of a correlated series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Block size at which the error estimate stabilised.
    pub blocking_plateau: usize,
    /// False when no level met the plateau criterion; the largest trusted error is reported.
    pub plateau_found: bool,
}

impl Estimate {
    /// Pools independent chains, weighting each by its sample count.
    ///
    /// The result does not depend on the order of `parts`.
    pub fn pool(parts: &[Estimate]) -> Result<Estimate> {
        if parts.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let mut sorted = parts.to_vec();
        sorted.sort_by(|a, b| {
            (a.mean, a.std_error, a.n_samples)
                .partial_cmp(&(b.mean, b.std_error, b.n_samples))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let total: usize = sorted.iter().map(|e| e.n_samples).sum();
        let (mut mean, mut var) = (0.0, 0.0);
        for e in &sorted {
            let w = e.n_samples as f64 / total as f64;
            mean += w * e.mean;
            var += w * w * e.std_error * e.std_error;
        }
        Ok(Estimate {
            mean,
            std_error: var.sqrt(),
            n_samples: total,
            blocking_plateau: sorted.iter().map(|e| e.blocking_plateau).max().unwrap_or(1),
            plateau_found: sorted.iter().all(|e| e.plateau_found),
        })
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ± {:.6} (n={})", self.mean, self.std_error, self.n_samples)
    }
}

/// Standard error of the mean for each blocking level, with the block size.
pub fn blocking_levels(series: &[f64]) -> Vec<(usize, f64)> {
    let mut levels = Vec::new();
    let mut data = series.to_vec();
    let mut block = 1;
    while data.len() >= MIN_BLOCKS {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        levels.push((block, (var / n).sqrt()));
        data = data.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        block *= 2;
    }
    levels
}

/// Mean with a block-doubling standard error reported at the plateau.
pub fn blocked_estimate(series: &[f64]) -> Result<Estimate> {
    if series.len() < MIN_BLOCKING_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_BLOCKING_SAMPLES,
            got: series.len(),
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("measurement series"));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let levels = blocking_levels(series);
    let plateau = levels.windows(2).find(|w| {
        let (a, b) = (w[0].1, w[1].1);
        if a == 0.0 {
            b == 0.0
        } else {
            ((b - a) / a).abs() < PLATEAU_TOLERANCE
        }
    });
    let (block, err, found) = match plateau {
        Some(w) => (w[0].0, w[0].1, true),
        None => {
            let &(block, err) = levels
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one blocking level");
            (block, err, false)
        }
    };
    Ok(Estimate {
        mean,
        std_error: err,
        n_samples: series.len(),
        blocking_plateau: block,
        plateau_found: found,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct JaggednessHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_paths: usize,
    mean: f64,
    std_dev: f64,
}

impl JaggednessHistogram {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < MIN_HISTOGRAM_PATHS {
            return Err(Error::TooFewSamples {
                needed: MIN_HISTOGRAM_PATHS,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Contract(format!("jaggedness {v} outside [0, 1]")));
        }
        let bins = HISTOGRAM_BINS;
        let bin_edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = ((v * bins as f64) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            bin_edges,
            counts,
            n_paths: values.len(),
            mean,
            std_dev: var.sqrt(),
        })
    }

    pub fn from_paths(paths: &[Path]) -> Result<Self> {
        let values = paths.iter().map(jaggedness).collect::<Result<Vec<_>>>()?;
        Self::from_values(&values)
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.bin_edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| (e[0], e[1], c))
    }
}

/// Moment-matched Gaussian `(center, width)` of a jaggedness histogram.
pub fn gaussian_summary(hist: &JaggednessHistogram) -> (f64, f64) {
    (hist.mean, hist.std_dev)
}

/// Probability that `x` is a strict extremum between two independent uniform
/// neighbours on a box of width `width` centred at the origin.
pub fn uniform_peak_probability(x: f64, width: f64) -> f64 {
    let u = x / width;
    (0.5 + u).powi(2) + (0.5 - u).powi(2)
}

/// Paths whose `n_sites + 1` positions are i.i.d. uniform on the box.
pub fn uniform_reference_paths<R: Rng>(n_sites: usize, width: f64, count: usize, rng: &mut R) -> Vec<Path> {
    (0..count)
        .map(|_| {
            let xs = (0..=n_sites).map(|_| width * (rng.gen::<f64>() - 0.5)).collect();
            Path::new(xs).expect("finite uniform positions")
        })
        .collect()
}
