//! Length-scaling fits, fractal dimensions and the transfer-matrix oracle.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{ActionSpec, LatticeConfig};
use crate::observables::{Estimate, Observable};
use crate::sampler::{chain_seed, pooled_estimate, run_chains, SamplerParams};

/// β above which a fit may be reported as `d_f = ∞`.
pub const INFINITE_DF_BETA: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_error: f64,
    pub intercept_error: f64,
}

/// Ordinary least squares with residual-based standard errors.
pub fn least_squares(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_error, intercept_error) = if points.len() > 2 {
        let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let sigma2 = ssr / (n - 2.0);
        let se = (sigma2 / sxx).sqrt();
        (se, (sigma2 * (1.0 / n + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    LineFit {
        slope,
        intercept,
        slope_error,
        intercept_error,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingEntry {
    pub n_sites: usize,
    pub length: Estimate,
    pub acceptance_rate: f64,
    pub final_delta: f64,
}

/// `⟨L⟩` against `N` at fixed total time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSeries {
    pub entries: Vec<ScalingEntry>,
    pub total_time: f64,
    pub action: ActionSpec,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub beta: f64,
    pub intercept: f64,
    pub beta_std_error: f64,
    /// `1/(1-β)`, or `f64::INFINITY` when β is consistent with one.
    pub d_f: f64,
}

impl FitResult {
    pub fn is_infinite(&self) -> bool {
        self.d_f.is_infinite()
    }
}

fn df_from_beta(beta: f64, err: f64) -> f64 {
    if beta > INFINITE_DF_BETA && beta + 3.0 * err >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - beta)
    }
}

/// Fits `log ⟨L⟩ = β log N + b` to `(N, ⟨L⟩)` pairs.
pub fn fit_power_law_points(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::Contract(format!(
            "power-law fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Contract(format!(
            "power-law fit needs positive data, got ({}, {})",
            p.0, p.1
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, l)| (n.ln(), l.ln())).collect();
    let fit = least_squares(&logs);
    Ok(FitResult {
        beta: fit.slope,
        intercept: fit.intercept,
        beta_std_error: fit.slope_error,
        d_f: df_from_beta(fit.slope, fit.slope_error),
    })
}

pub fn fit_power_law(series: &ScalingSeries) -> Result<FitResult> {
    if series.entries.windows(2).any(|w| w[1].n_sites <= w[0].n_sites) {
        return Err(Error::Contract("site counts must be strictly increasing".into()));
    }
    let pts: Vec<(f64, f64)> = series
        .entries
        .iter()
        .map(|e| (e.n_sites as f64, e.length.mean))
        .collect();
    fit_power_law_points(&pts)
}

/// Predicted fractal dimension of the sub-diffusive action: 2 up to the
/// critical point `α = 2ξ`, `α/(α-ξ)` beyond it.
pub fn theory_df(xi: f64, alpha: f64) -> f64 {
    if alpha <= 2.0 * xi {
        2.0
    } else {
        alpha / (alpha - xi)
    }
}

/// Length slope `β = 1 - 1/d_f` implied by a fractal dimension.
pub fn beta_from_df(d_f: f64) -> f64 {
    1.0 - 1.0 / d_f
}

/// Runs `n_chains` chains at each `N` with the total time of `template` held fixed.
pub fn scaling_experiment(
    spec: &ActionSpec,
    n_list: &[usize],
    template: &LatticeConfig,
    params: &SamplerParams,
    n_chains: usize,
) -> Result<ScalingSeries> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("site counts must be strictly increasing".into()));
    }
    let total_time = template.total_time();
    let entries = n_list
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = LatticeConfig {
                n_sites: n,
                spacing: total_time / n as f64,
                ..template.clone()
            };
            let p = SamplerParams {
                seed: chain_seed(params.seed, 1000 + i as u64),
                ..params.clone()
            };
            let chains = run_chains(spec, &p, &cfg, &[Observable::Length], n_chains)?;
            let length = pooled_estimate(&chains, &Observable::Length)?;
            let k = chains.len() as f64;
            Ok(ScalingEntry {
                n_sites: n,
                length,
                acceptance_rate: chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / k,
                final_delta: chains.iter().map(|c| c.final_delta).sum::<f64>() / k,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingSeries {
        entries,
        total_time,
        action: *spec,
    })
}

/// Exact expectations from the transfer matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleExpectations {
    pub abs_increment_0: f64,
    pub sq_increment_0: f64,
    pub length: f64,
    /// `NaN` for lattices with fewer than two links.
    pub jaggedness: f64,
}

impl OracleExpectations {
    fn as_array(&self) -> [f64; 4] {
        [self.abs_increment_0, self.sq_increment_0, self.length, self.jaggedness]
    }

    fn max_relative_drift(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .filter(|(a, _)| a.is_finite())
            .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
            .fold(0.0, f64::max)
    }

    fn richardson(coarse: &Self, fine: &Self) -> Self {
        let r = |c: f64, f: f64| (4.0 * f - c) / 3.0;
        Self {
            abs_increment_0: r(coarse.abs_increment_0, fine.abs_increment_0),
            sq_increment_0: r(coarse.sq_increment_0, fine.sq_increment_0),
            length: r(coarse.length, fine.length),
            jaggedness: r(coarse.jaggedness, fine.jaggedness),
        }
    }
}

/// Discretized single-step kernel `K(x, y) = exp(-S_link(x, y))` on a uniform
/// grid over `[-X, X]` with trapezoidal weights.
///
/// Where the increment cutoff falls exactly on a grid separation the kernel is
/// halved, so jumps at the cutoff integrate to second order.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    kernel: Vec<f64>,
    shift: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Any,
    Up,
    Down,
}

struct KernelFn<'a> {
    kernel: crate::lattice::LinkKernel,
    cfg: &'a LatticeConfig,
    tie: f64,
}

impl KernelFn<'_> {
    /// Unnormalized `exp(-(S - shift))`, zero outside the constraints.
    fn eval(&self, x: f64, y: f64, shift: f64) -> f64 {
        let dx = y - x;
        let mut factor = 1.0;
        if let Some(l) = self.cfg.increment_cutoff {
            let over = dx.abs() - l;
            if over > self.tie {
                return 0.0;
            }
            if over.abs() <= self.tie {
                factor = 0.5;
            }
        }
        factor * (-(self.kernel.action(x, y) - shift)).exp()
    }

    /// Link to a pinned endpoint. On the grid boundary the trapezoid weight already
    /// halves the point, so a coincident cutoff tie is not halved again.
    fn eval_pinned(&self, x: f64, y: f64, shift: f64, at_edge: bool) -> f64 {
        let v = self.eval(x, y, shift);
        if at_edge && self.admits(y - x) == 0.5 {
            2.0 * v
        } else {
            v
        }
    }

    /// 1 inside the cutoff, ½ on it, 0 beyond.
    fn admits(&self, dx: f64) -> f64 {
        match self.cfg.increment_cutoff {
            Some(l) if dx.abs() - l > self.tie => 0.0,
            Some(l) if (dx.abs() - l).abs() <= self.tie => 0.5,
            _ => 1.0,
        }
    }
}

/// Pinned `N = 2`: one free site whose two links can hit the cutoff at the same
/// point, so the tie weight is applied once to the joint indicator.
fn two_site_oracle(tm: &TransferMatrix, kf: &KernelFn<'_>, x0: f64, xn: f64) -> Result<OracleExpectations> {
    let (mut z, mut abs0, mut sq0, mut len, mut jag) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let eps = 1e-6 * (tm.grid[1] - tm.grid[0]);
    let turn = |x: f64| ((x - x0) * (xn - x) < 0.0) as u8 as f64;
    for (i, (&x, &w)) in tm.grid.iter().zip(&tm.weights).enumerate() {
        if !kf.cfg.admits_position(x) {
            continue;
        }
        let mut ind = kf.admits(x - x0).min(kf.admits(xn - x));
        if i == 0 || i + 1 == tm.size() {
            ind = ind.ceil();
        }
        if ind == 0.0 {
            continue;
        }
        let p = w * ind * (-(kf.kernel.action(x0, x) + kf.kernel.action(x, xn) - 2.0 * tm.shift)).exp();
        let d = x - x0;
        z += p;
        abs0 += p * d.abs();
        sq0 += p * d * d;
        len += p * (d.abs() + (xn - x).abs());
        jag += p * 0.5 * (turn(x - eps) + turn(x + eps));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::NonFinite("oracle partition function"));
    }
    Ok(OracleExpectations {
        abs_increment_0: abs0 / z,
        sq_increment_0: sq0 / z,
        length: len / z,
        jaggedness: jag / z,
    })
}

impl TransferMatrix {
    fn build(kf: &KernelFn<'_>, extent: f64, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Contract("transfer matrix needs at least 3 grid points".into()));
        }
        let h = 2.0 * extent / cells as f64;
        let m = cells + 1;
        let grid: Vec<f64> = (0..m).map(|i| -extent + h * i as f64).collect();
        let mut weights = vec![h; m];
        weights[0] = 0.5 * h;
        weights[m - 1] = 0.5 * h;
        // the action is at least its value on the diagonal near the origin; shifting by
        // the smallest entry keeps exp() in range
        let mut shift = f64::INFINITY;
        for &x in &grid {
            shift = shift.min(kf.kernel.action(x, x));
        }
        let mut kernel = vec![0.0; m * m];
        for (i, &x) in grid.iter().enumerate() {
            for (j, &y) in grid.iter().enumerate() {
                kernel[i * m + j] = kf.eval(x, y, shift);
            }
        }
        if kernel.iter().any(|k| !k.is_finite()) {
            return Err(Error::NonFinite("transfer matrix entry"));
        }
        Ok(Self {
            grid,
            weights,
            kernel,
            shift,
        })
    }

    fn at_edge(&self, i: usize) -> bool {
        i == 0 || i + 1 == self.size()
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.size() + j]
    }

    fn split(&self, i: usize, j: usize, sign: Sign) -> f64 {
        let k = self.entry(i, j);
        match sign {
            Sign::Any => k,
            _ if i == j => 0.5 * k,
            Sign::Up if j > i => k,
            Sign::Down if j < i => k,
            _ => 0.0,
        }
    }

    /// `u(y) = Σ_x v(x) w(x) K±(x, y)`
    fn forward(&self, v: &[f64], sign: Sign) -> Vec<f64> {
        let m = self.size();
        let mut out = vec![0.0; m];
        for i in 0..m {
            let c = v[i] * self.weights[i];
            if c == 0.0 {
                continue;
            }
            match sign {
                Sign::Any => {
                    let row = &self.kernel[i * m..(i + 1) * m];
                    for (o, k) in out.iter_mut().zip(row) {
                        *o += c * k;
                    }
                }
                _ => {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += c * self.split(i, j, sign);
                    }
                }
            }
        }
        out
    }

    /// `u(x) = Σ_y K(x, y) w(y) v(y)`
    fn backward(&self, v: &[f64]) -> Vec<f64> {
        let m = self.size();
        let wv: Vec<f64> = v.iter().zip(&self.weights).map(|(a, b)| a * b).collect();
        (0..m)
            .map(|i| {
                self.kernel[i * m..(i + 1) * m]
                    .iter()
                    .zip(&wv)
                    .map(|(k, x)| k * x)
                    .sum()
            })
            .collect()
    }
}

/// Grid resolution used by [`oracle_expectations`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleGrid {
    /// Number of cells on `[-X, X]`.
    pub cells: usize,
    /// Half-width `X`; ignored when the box or cutoff fixes the support.
    pub extent: f64,
}

/// Half-width of the grid implied by the constraints, if they bound the support.
fn constrained_extent(cfg: &LatticeConfig) -> Option<f64> {
    let from_box = cfg.position_box.map(|w| 0.5 * w);
    let from_cut = cfg.increment_cutoff.map(|l| {
        // one cutoff of margin keeps the reachable edge off the grid boundary
        let reach = if cfg.right_endpoint.is_some() {
            cfg.n_sites / 2 + 1
        } else {
            cfg.n_sites + 1
        };
        cfg.left_endpoint.abs().max(cfg.right_endpoint.unwrap_or(0.0).abs()) + l * reach as f64
    });
    match (from_box, from_cut) {
        (Some(b), Some(c)) => Some(b.min(c)),
        (b, c) => b.or(c),
    }
}

/// Expectations at one grid resolution. Interior sites (and a free end) range over
/// the grid; pinned endpoints enter as exact positions.
pub fn oracle_expectations(spec: &ActionSpec, cfg: &LatticeConfig, grid: OracleGrid) -> Result<OracleExpectations> {
    cfg.validate()?;
    let n = cfg.n_sites;
    if n < 2 {
        return Err(Error::Contract("the oracle needs at least two links".into()));
    }
    let extent = constrained_extent(cfg).unwrap_or(grid.extent);
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::InvalidConfig("oracle extent must be positive".into()));
    }
    let h = 2.0 * extent / grid.cells as f64;
    let tie = 1e-9 * h;
    if let Some(l) = cfg.increment_cutoff {
        if ((l / h) - (l / h).round()).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "grid spacing {h} does not divide the cutoff {l}"
            )));
        }
    }
    let kf = KernelFn {
        kernel: spec.kernel(cfg.spacing)?,
        cfg,
        tie,
    };
    let tm = TransferMatrix::build(&kf, extent, grid.cells)?;
    let m = tm.size();
    let x0 = cfg.left_endpoint;
    let admit: Vec<f64> = tm
        .grid
        .iter()
        .map(|&x| if cfg.admits_position(x) { 1.0 } else { 0.0 })
        .collect();

    if let (2, Some(xn)) = (n, cfg.right_endpoint) {
        return two_site_oracle(&tm, &kf, x0, xn);
    }

    // alpha[k](x): weight of paths from x_0 to x_k = x, for k = 1..N-1 (and N if free)
    let last = cfg.last_mobile_site();
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
    alpha.push(Vec::new());
    alpha.push(
        tm.grid
            .iter()
            .zip(&admit)
            .enumerate()
            .map(|(i, (&y, &ad))| ad * kf.eval_pinned(x0, y, tm.shift, tm.at_edge(i)))
            .collect(),
    );
    for k in 2..=last {
        let mut next = tm.forward(&alpha[k - 1], Sign::Any);
        next.iter_mut().zip(&admit).for_each(|(v, a)| *v *= a);
        alpha.push(next);
    }
    // beta[k](x): weight of paths from x_k = x to the end
    let mut beta: Vec<Vec<f64>> = vec![Vec::new(); last + 1];
    beta[last] = match cfg.right_endpoint {
        Some(xn) => (0..m)
            .map(|i| kf.eval_pinned(tm.grid[i], xn, tm.shift, tm.at_edge(i)))
            .collect(),
        None => vec![1.0; m],
    };
    for k in (1..last).rev() {
        let mut prev = tm.backward(&beta[k + 1]);
        prev.iter_mut().zip(&admit).for_each(|(v, a)| *v *= a);
        beta[k] = prev;
    }
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).zip(&tm.weights).map(|((a, b), w)| a * b * w).sum() };
    let z = dot(&alpha[1], &beta[1]);
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::NonFinite("oracle partition function"));
    }

    // link observables: link 0 runs from the pinned x_0 to the grid
    let link0 = |g: &dyn Fn(f64) -> f64| -> f64 {
        tm.grid
            .iter()
            .enumerate()
            .map(|(j, &y)| alpha[1][j] * g(y - x0) * tm.weights[j] * beta[1][j])
            .sum::<f64>()
            / z
    };
    let abs0 = link0(&|d: f64| d.abs());
    let sq0 = link0(&|d: f64| d * d);

    let mut length = abs0;
    for k in 1..n {
        if k < last {
            // both ends on the grid
            let mut acc = 0.0;
            for i in 0..m {
                let c = alpha[k][i] * tm.weights[i];
                if c == 0.0 {
                    continue;
                }
                let mut row = 0.0;
                for j in 0..m {
                    let d = (tm.grid[j] - tm.grid[i]).abs();
                    row += tm.entry(i, j) * d * tm.weights[j] * beta[k + 1][j];
                }
                acc += c * row;
            }
            length += acc / z;
        } else if let Some(xn) = cfg.right_endpoint {
            // last link into the pinned endpoint
            let acc: f64 = (0..m)
                .map(|i| {
                    alpha[k][i]
                        * tm.weights[i]
                        * kf.eval_pinned(tm.grid[i], xn, tm.shift, tm.at_edge(i))
                        * (xn - tm.grid[i]).abs()
                })
                .sum();
            length += acc / z;
        } else {
            // free end: k == last == N, handled by the grid branch above
            unreachable!("free-end lattices have last == n");
        }
    }

    let jaggedness = jaggedness_oracle(&tm, &kf, cfg, &alpha, &beta, &admit, z);

    Ok(OracleExpectations {
        abs_increment_0: abs0,
        sq_increment_0: sq0,
        length,
        jaggedness,
    })
}

/// `⟨J⟩` from the probabilities that consecutive increments change sign.
fn jaggedness_oracle(
    tm: &TransferMatrix,
    kf: &KernelFn<'_>,
    cfg: &LatticeConfig,
    alpha: &[Vec<f64>],
    beta: &[Vec<f64>],
    admit: &[f64],
    z: f64,
) -> f64 {
    let n = cfg.n_sites;
    let m = tm.size();
    let last = cfg.last_mobile_site();
    let x0 = cfg.left_endpoint;
    let masked = |mut v: Vec<f64>| {
        v.iter_mut().zip(admit).for_each(|(a, b)| *a *= b);
        v
    };
    let mut total = 0.0;
    // peak at site k+1 between links k and k+1
    for k in 0..n - 1 {
        let mid = k + 1;
        let mut p_turn = 0.0;
        for (first, second) in [(Sign::Up, Sign::Down), (Sign::Down, Sign::Up)] {
            // weight at the middle site of paths whose link k has the first sign
            let at_mid: Vec<f64> = if k == 0 {
                tm.grid
                    .iter()
                    .enumerate()
                    .map(|(j, &y)| {
                        let base = alpha[1][j];
                        let d = y - x0;
                        let s = if d > 0.0 {
                            Sign::Up
                        } else if d < 0.0 {
                            Sign::Down
                        } else {
                            Sign::Any
                        };
                        match s {
                            Sign::Any => 0.5 * base,
                            s if s == first => base,
                            _ => 0.0,
                        }
                    })
                    .collect()
            } else {
                masked(tm.forward(&alpha[k], first))
            };
            // then link k+1 with the second sign, and the rest of the path
            let contribution: f64 = if mid + 1 <= last {
                let after = masked(tm.forward(&at_mid, second));
                after
                    .iter()
                    .zip(&beta[mid + 1])
                    .zip(&tm.weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum()
            } else {
                let xn = cfg.right_endpoint.expect("pinned end when mid == last");
                (0..m)
                    .map(|i| {
                        let x = tm.grid[i];
                        let d = xn - x;
                        let frac = if d == 0.0 {
                            0.5
                        } else if (d > 0.0) == (second == Sign::Up) {
                            1.0
                        } else {
                            0.0
                        };
                        at_mid[i] * tm.weights[i] * frac * kf.eval_pinned(x, xn, tm.shift, tm.at_edge(i))
                    })
                    .sum()
            };
            p_turn += contribution;
        }
        total += p_turn / z;
    }
    total / (n - 1) as f64
}

/// Richardson-extrapolated oracle, refining the grid until successive extrapolants
/// agree to `tol` (relative).
///
/// Unconstrained supports are additionally checked by doubling the extent.
pub fn oracle_converged(
    spec: &ActionSpec,
    cfg: &LatticeConfig,
    base: OracleGrid,
    tol: f64,
    max_cells: usize,
) -> Result<(OracleExpectations, f64)> {
    let mut grid = base;
    let mut prev = oracle_expectations(spec, cfg, grid)?;
    let mut prev_rich: Option<OracleExpectations> = None;
    let mut drift = f64::INFINITY;
    while grid.cells * 2 <= max_cells {
        grid.cells *= 2;
        let cur = oracle_expectations(spec, cfg, grid)?;
        let rich = OracleExpectations::richardson(&prev, &cur);
        if let Some(p) = prev_rich {
            drift = rich.max_relative_drift(&p);
            if drift < tol {
                if constrained_extent(cfg).is_none() {
                    let wide = OracleGrid {
                        cells: grid.cells * 2,
                        extent: grid.extent * 2.0,
                    };
                    let check = oracle_expectations(spec, cfg, wide)?;
                    let x_drift = check.max_relative_drift(&cur);
                    if x_drift >= tol {
                        return Err(Error::NotConverged(format!(
                            "doubling the extent moved results by {x_drift:.2e}"
                        )));
                    }
                }
                return Ok((rich, drift));
            }
        }
        prev = cur;
        prev_rich = Some(rich);
    }
    Err(Error::NotConverged(format!(
        "relative drift {drift:.2e} above {tol:.1e} at {} cells",
        grid.cells
    )))
}

/// One observable compared between Monte Carlo and the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub observable: Observable,
    pub sampled: Estimate,
    pub exact: f64,
    /// Absolute uncertainty of `exact` from the last refinement step.
    pub exact_error: f64,
}

impl OracleRow {
    /// Deviation in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let se = self.sampled.std_error.hypot(self.exact_error);
        (self.sampled.mean - self.exact).abs() / se
    }
}

/// Smallest cell count of at least `min_cells` that puts the cutoff on a grid separation.
pub fn aligned_cells(cfg: &LatticeConfig, extent: f64, min_cells: usize) -> Option<usize> {
    let extent = constrained_extent(cfg).unwrap_or(extent);
    match cfg.increment_cutoff {
        None => Some(min_cells),
        Some(l) => (min_cells..=64 * min_cells).find(|&c| {
            let r = c as f64 * l / (2.0 * extent);
            (r - r.round()).abs() < 1e-9 && r.round() >= 1.0
        }),
    }
}

/// Runs `n_chains` chains and compares `⟨|Δx_0|⟩`, `⟨Δx_0²⟩` and `⟨J⟩` with the
/// converged oracle.
pub fn oracle_check(
    spec: &ActionSpec,
    cfg: &LatticeConfig,
    params: &SamplerParams,
    n_chains: usize,
    extent: f64,
    tol: f64,
) -> Result<Vec<OracleRow>> {
    let cells = aligned_cells(cfg, extent, 24)
        .ok_or_else(|| Error::Contract("cannot align the oracle grid with the cutoff".into()))?;
    let (exact, drift) = oracle_converged(spec, cfg, OracleGrid { cells, extent }, tol, 1 << 12)?;
    let obs = [
        Observable::AbsIncrement(0),
        Observable::SquaredIncrement(0),
        Observable::Jaggedness,
    ];
    let chains = run_chains(spec, params, cfg, &obs, n_chains)?;
    let values = [exact.abs_increment_0, exact.sq_increment_0, exact.jaggedness];
    obs.iter()
        .zip(values)
        .map(|(o, v)| {
            Ok(OracleRow {
                observable: *o,
                sampled: pooled_estimate(&chains, o)?,
                exact: v,
                exact_error: drift * v.abs(),
            })
        })
        .collect()
}
