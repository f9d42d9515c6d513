//! Metropolis sampling of the lattice measure `e^{-S_N}`.
//!
//! Sites are updated sequentially. A proposal is either a local uniform move of
//! half-width `δ` or, with probability `jump_probability`, a draw uniform over the
//! window that the neighbours leave open under the increment cutoff and position
//! box. That window does not depend on the current `x_k`, so both proposal kinds
//! are symmetric and the plain Metropolis ratio applies.
//!
//! `δ` is tuned multiplicatively during burn-in and frozen for measurement.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{ActionSpec, LatticeConfig, LinkKernel, Path};
use crate::observables::{blocked_estimate, Estimate, Measurement, Observable};

/// Acceptance below which a tuned chain is declared non-ergodic.
pub const MIN_ACCEPTANCE: f64 = 1e-3;
/// Sweeps between two `δ` updates during burn-in.
const TUNE_INTERVAL: u64 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerParams {
    pub n_sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// Initial half-width of the local proposal; `None` starts from `√a`.
    pub local_width: Option<f64>,
    pub jump_probability: f64,
    pub seed: u64,
    pub target_acceptance: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            n_sweeps: 10_000,
            burn_in: 10_000,
            thinning: 10,
            local_width: None,
            jump_probability: 0.0,
            seed: 0,
            target_acceptance: 0.5,
        }
    }
}

impl SamplerParams {
    /// Defaults with global jumps switched on for bounded f-modified actions.
    pub fn for_action(spec: &ActionSpec) -> Self {
        Self {
            jump_probability: if spec.is_bounded() { 0.5 } else { 0.0 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 {
            return Err(Error::InvalidConfig("n_sweeps must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.jump_probability) {
            return Err(Error::InvalidConfig(format!(
                "jump_probability must lie in [0, 1], got {}",
                self.jump_probability
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_acceptance must lie in (0, 1), got {}",
                self.target_acceptance
            )));
        }
        if let Some(w) = self.local_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidConfig(format!("local_width must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub path: Path,
    pub accepted: u64,
    pub proposed: u64,
    local_accepted: u64,
    local_proposed: u64,
    /// Current half-width of local proposals.
    pub delta: f64,
    rng: Pcg64,
}

impl ChainState {
    pub fn new(cfg: &LatticeConfig, params: &SamplerParams) -> Self {
        Self::from_path(Path::initial(cfg), cfg, params)
    }

    pub fn from_path(path: Path, cfg: &LatticeConfig, params: &SamplerParams) -> Self {
        let delta = params.local_width.unwrap_or_else(|| cfg.spacing.sqrt());
        Self {
            path,
            accepted: 0,
            proposed: 0,
            local_accepted: 0,
            local_proposed: 0,
            delta,
            rng: Pcg64::seed_from_u64(params.seed),
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
        self.local_accepted = 0;
        self.local_proposed = 0;
    }
}

/// Interval of positions for site `k` allowed by the neighbours and the box.
fn allowed_window(xs: &[f64], k: usize, cfg: &LatticeConfig) -> (f64, f64) {
    let (mut lo, mut hi) = match cfg.position_box {
        Some(w) => (-0.5 * w, 0.5 * w),
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    if let Some(l) = cfg.increment_cutoff {
        let prev = xs[k - 1];
        lo = lo.max(prev - l);
        hi = hi.min(prev + l);
        if let Some(&next) = xs.get(k + 1) {
            lo = lo.max(next - l);
            hi = hi.min(next + l);
        }
    }
    (lo, hi)
}

#[inline]
fn admissible(xs: &[f64], k: usize, x: f64, cfg: &LatticeConfig) -> bool {
    cfg.admits_position(x)
        && cfg.admits_increment(x - xs[k - 1])
        && xs.get(k + 1).map_or(true, |&n| cfg.admits_increment(n - x))
}

/// One Metropolis update of site `k`. Returns whether the proposal was accepted.
pub fn metropolis_step(
    state: &mut ChainState,
    kernel: &LinkKernel,
    params: &SamplerParams,
    cfg: &LatticeConfig,
    k: usize,
) -> bool {
    let xs = state.path.positions();
    let current = xs[k];
    let (lo, hi) = allowed_window(xs, k, cfg);
    let global = params.jump_probability > 0.0
        && lo.is_finite()
        && hi.is_finite()
        && state.rng.gen::<f64>() < params.jump_probability;
    let proposal = if global {
        lo + (hi - lo) * state.rng.gen::<f64>()
    } else {
        current + state.delta * (2.0 * state.rng.gen::<f64>() - 1.0)
    };
    state.proposed += 1;
    if !global {
        state.local_proposed += 1;
    }
    if !admissible(xs, k, proposal, cfg) {
        return false;
    }
    let ds = kernel.local_change(xs, k, proposal);
    let accept = ds <= 0.0 || (ds.is_finite() && state.rng.gen::<f64>() < (-ds).exp());
    if accept {
        state.path.positions_mut()[k] = proposal;
        state.accepted += 1;
        if !global {
            state.local_accepted += 1;
        }
    }
    accept
}

/// Updates every movable site once, in order.
pub fn sweep(state: &mut ChainState, kernel: &LinkKernel, params: &SamplerParams, cfg: &LatticeConfig) {
    for k in 1..=cfg.last_mobile_site() {
        metropolis_step(state, kernel, params, cfg, k);
    }
}

/// Time-ordered measurements of one chain plus its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub observables: Vec<Observable>,
    pub sweep_indices: Vec<u64>,
    /// `values[i][j]`: observable `i` at measurement `j`.
    pub values: Vec<Vec<f64>>,
    pub final_delta: f64,
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl ChainOutput {
    pub fn series(&self, obs: &Observable) -> Option<&[f64]> {
        self.observables
            .iter()
            .position(|o| o == obs)
            .map(|i| self.values[i].as_slice())
    }

    pub fn estimate(&self, obs: &Observable) -> Result<Estimate> {
        let s = self
            .series(obs)
            .ok_or_else(|| Error::Contract(format!("{} was not recorded", obs.name())))?;
        blocked_estimate(s)
    }

    pub fn measurements(&self) -> Vec<Measurement> {
        let mut out = Vec::with_capacity(self.observables.len() * self.sweep_indices.len());
        for (j, &sweep) in self.sweep_indices.iter().enumerate() {
            for (obs, vals) in self.observables.iter().zip(&self.values) {
                out.push(Measurement {
                    name: obs.name(),
                    value: vals[j],
                    sweep_index: sweep,
                });
            }
        }
        out
    }
}

fn check_inputs(
    spec: &ActionSpec,
    params: &SamplerParams,
    cfg: &LatticeConfig,
    observables: &[Observable],
) -> Result<LinkKernel> {
    params.validate()?;
    cfg.validate()?;
    if cfg.last_mobile_site() == 0 {
        return Err(Error::InvalidConfig("lattice has no movable sites".into()));
    }
    if spec.is_bounded() && cfg.increment_cutoff.is_none() && cfg.position_box.is_none() {
        return Err(Error::InvalidConfig(format!(
            "{spec} is not normalizable without an increment cutoff or a position box"
        )));
    }
    let kernel = spec.kernel(cfg.spacing)?;
    for obs in observables {
        obs.check(&kernel, cfg.n_sites)?;
    }
    Ok(kernel)
}

/// Burn-in with `δ` tuning, then `n_sweeps` measured sweeps.
///
/// `on_measure` sees every measured path. Identical inputs give bit-identical output.
pub fn run_chain_with<F>(
    spec: &ActionSpec,
    params: &SamplerParams,
    cfg: &LatticeConfig,
    observables: &[Observable],
    mut on_measure: F,
) -> Result<ChainOutput>
where
    F: FnMut(u64, &Path),
{
    let kernel = check_inputs(spec, params, cfg, observables)?;
    let mut state = ChainState::new(cfg, params);
    let target = params.target_acceptance;

    for i in 0..params.burn_in {
        sweep(&mut state, &kernel, params, cfg);
        if (i + 1) % TUNE_INTERVAL == 0 {
            if state.local_proposed > 0 {
                let rate = state.local_accepted as f64 / state.local_proposed as f64;
                let factor = (rate / target).clamp(0.5, 2.0);
                state.delta = (state.delta * factor).clamp(1e-12, 1e12);
            }
            state.reset_counters();
        }
    }
    state.reset_counters();

    let n_records = (params.n_sweeps / params.thinning) as usize;
    let mut values = vec![Vec::with_capacity(n_records); observables.len()];
    let mut sweep_indices = Vec::with_capacity(n_records);
    for i in 0..params.n_sweeps {
        sweep(&mut state, &kernel, params, cfg);
        if (i + 1) % params.thinning == 0 {
            sweep_indices.push(i);
            for (obs, vals) in observables.iter().zip(values.iter_mut()) {
                vals.push(obs.measure(&state.path, &kernel));
            }
            on_measure(i, &state.path);
        }
    }

    let rate = state.acceptance_rate();
    if rate < MIN_ACCEPTANCE {
        return Err(Error::NonErgodic { rate });
    }
    Ok(ChainOutput {
        observables: observables.to_vec(),
        sweep_indices,
        values,
        final_delta: state.delta,
        acceptance_rate: rate,
        seed: params.seed,
    })
}

pub fn run_chain(
    spec: &ActionSpec,
    params: &SamplerParams,
    cfg: &LatticeConfig,
    observables: &[Observable],
) -> Result<ChainOutput> {
    run_chain_with(spec, params, cfg, observables, |_, _| {})
}

/// Seed of chain `index` in a family started from `base`.
pub fn chain_seed(base: u64, index: u64) -> u64 {
    // splitmix64 step
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent chains with seeds derived from `params.seed`, run in parallel.
///
/// Output order follows the chain index, not completion order.
pub fn run_chains(
    spec: &ActionSpec,
    params: &SamplerParams,
    cfg: &LatticeConfig,
    observables: &[Observable],
    n_chains: usize,
) -> Result<Vec<ChainOutput>> {
    (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let p = SamplerParams {
                seed: chain_seed(params.seed, i),
                ..params.clone()
            };
            run_chain(spec, &p, cfg, observables)
        })
        .collect()
}

/// Pooled blocked estimate of one observable over several chains.
pub fn pooled_estimate(chains: &[ChainOutput], obs: &Observable) -> Result<Estimate> {
    let parts = chains.iter().map(|c| c.estimate(obs)).collect::<Result<Vec<_>>>()?;
    Estimate::pool(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::FKind;

    fn quick(seed: u64) -> SamplerParams {
        SamplerParams {
            n_sweeps: 2_000,
            burn_in: 500,
            thinning: 5,
            seed,
            ..SamplerParams::default()
        }
    }

    #[test]
    fn bounded_action_needs_a_constraint() {
        let spec = ActionSpec::f_modified(FKind::Tanh).unwrap();
        let cfg = LatticeConfig::new(8, 1.0).unwrap();
        let p = SamplerParams::for_action(&spec);
        assert!(matches!(
            run_chain(&spec, &p, &cfg, &[Observable::Length]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(run_chain(&spec, &p, &cfg.with_box(1.0).unwrap(), &[Observable::Length]).is_ok());
    }

    #[test]
    fn zero_change_is_accepted() {
        let cfg = LatticeConfig::new(2, 1.0).unwrap();
        let kernel = ActionSpec::naive().kernel(cfg.spacing).unwrap();
        let params = SamplerParams {
            local_width: Some(1e-300),
            ..quick(1)
        };
        let mut state = ChainState::new(&cfg, &params);
        // δ so small that the proposal equals x_k in floating point
        for _ in 0..100 {
            assert!(metropolis_step(&mut state, &kernel, &params, &cfg, 1));
        }
        assert_eq!(state.accepted, 100);
    }

    #[test]
    fn downhill_moves_always_accepted() {
        // x_1 far from both pinned neighbours: any move toward 0 lowers both links
        let cfg = LatticeConfig::new(2, 1.0).unwrap();
        let kernel = ActionSpec::naive().kernel(cfg.spacing).unwrap();
        let mut downhill = 0;
        for seed in 0..200 {
            let params = SamplerParams {
                local_width: Some(0.5),
                ..quick(seed)
            };
            let start = Path::new(vec![0.0, 10.0, 0.0]).unwrap();
            let mut state = ChainState::from_path(start, &cfg, &params);
            // replay the proposal draw
            let mut rng = Pcg64::seed_from_u64(seed);
            let proposal = 10.0 + 0.5 * (2.0 * rng.gen::<f64>() - 1.0);
            let accepted = metropolis_step(&mut state, &kernel, &params, &cfg, 1);
            if proposal < 10.0 {
                downhill += 1;
                assert!(accepted, "rejected downhill proposal {proposal}");
                assert_eq!(state.path.positions()[1], proposal);
            }
        }
        assert!(downhill > 50);
    }

    #[test]
    fn sweep_counts() {
        let cfg = LatticeConfig::new(2, 1.0).unwrap();
        let kernel = ActionSpec::naive().kernel(cfg.spacing).unwrap();
        let params = quick(3);
        let mut state = ChainState::new(&cfg, &params);
        sweep(&mut state, &kernel, &params, &cfg);
        assert_eq!(state.proposed, 1);

        let cfg = LatticeConfig::new(16, 1.0).unwrap();
        let mut state = ChainState::new(&cfg, &params);
        for _ in 0..10 {
            let before = state.accepted;
            sweep(&mut state, &kernel, &params, &cfg);
            assert!(state.accepted - before <= 15);
            assert!(state.accepted <= state.proposed);
        }
        assert_eq!(state.proposed, 150);
    }

    #[test]
    fn record_count_and_determinism() {
        let cfg = LatticeConfig::new(8, 1.0).unwrap();
        let spec = ActionSpec::naive();
        let params = SamplerParams {
            n_sweeps: 1000,
            thinning: 10,
            burn_in: 100,
            seed: 42,
            ..SamplerParams::default()
        };
        let obs = [Observable::Length, Observable::Jaggedness];
        let a = run_chain(&spec, &params, &cfg, &obs).unwrap();
        let b = run_chain(&spec, &params, &cfg, &obs).unwrap();
        assert_eq!(a.sweep_indices.len(), 100);
        assert_eq!(a, b);
        assert_eq!(a.measurements().len(), 200);
        let c = run_chain(&spec, &SamplerParams { seed: 43, ..params }, &cfg, &obs).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn tuning_reaches_target_band() {
        let cfg = LatticeConfig::new(64, 1.0).unwrap();
        let params = SamplerParams {
            n_sweeps: 2000,
            burn_in: 2000,
            thinning: 10,
            seed: 5,
            ..SamplerParams::default()
        };
        let out = run_chain(&ActionSpec::naive(), &params, &cfg, &[Observable::Length]).unwrap();
        assert!(
            (0.35..=0.65).contains(&out.acceptance_rate),
            "acceptance {}",
            out.acceptance_rate
        );
    }

    #[test]
    fn constraints_never_violated() {
        let cfg = LatticeConfig::new(32, 1.0)
            .unwrap()
            .with_cutoff(0.3)
            .unwrap()
            .with_box(1.0)
            .unwrap();
        let specs = [
            ActionSpec::naive(),
            ActionSpec::sub_diffusive(1.0, 1.0, 4.0).unwrap(),
            ActionSpec::f_modified(FKind::Gamma(-1.0)).unwrap(),
            ActionSpec::f_modified(FKind::Tanh).unwrap(),
            ActionSpec::f_modified(FKind::Sin).unwrap(),
        ];
        for spec in specs {
            let params = SamplerParams {
                thinning: 1,
                n_sweeps: 1000,
                burn_in: 200,
                jump_probability: 0.5,
                seed: 17,
                ..SamplerParams::default()
            };
            let mut checked = 0;
            run_chain_with(&spec, &params, &cfg, &[], |_, p| {
                p.check(&cfg).expect("constraint violated");
                checked += 1;
            })
            .unwrap();
            assert_eq!(checked, 1000);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let cfg = LatticeConfig::new(8, 1.0).unwrap();
        let bad = [
            SamplerParams {
                thinning: 0,
                ..quick(0)
            },
            SamplerParams {
                jump_probability: 1.5,
                ..quick(0)
            },
            SamplerParams {
                n_sweeps: 0,
                ..quick(0)
            },
            SamplerParams {
                target_acceptance: 1.0,
                ..quick(0)
            },
        ];
        for p in bad {
            assert!(matches!(
                run_chain(&ActionSpec::naive(), &p, &cfg, &[]),
                Err(Error::InvalidConfig(_))
            ));
        }
        assert!(matches!(
            run_chain(&ActionSpec::naive(), &quick(0), &cfg, &[Observable::ModifiedSd]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn frozen_chain_is_reported_non_ergodic() {
        // a huge coupling pins every site: all moves are rejected
        let cfg = LatticeConfig::new(8, 1.0).unwrap();
        let spec = ActionSpec::sub_diffusive(1e300, 1.0, 0.5).unwrap();
        let params = SamplerParams {
            burn_in: 0,
            n_sweeps: 200,
            thinning: 1,
            local_width: Some(1.0),
            ..quick(0)
        };
        let err = run_chain(&spec, &params, &cfg, &[]).unwrap_err();
        assert!(matches!(err, Error::NonErgodic { .. }), "{err:?}");
    }

    #[test]
    fn parallel_chains_are_deterministic() {
        let cfg = LatticeConfig::new(8, 1.0).unwrap();
        let params = SamplerParams {
            n_sweeps: 640,
            ..quick(9)
        };
        let a = run_chains(&ActionSpec::naive(), &params, &cfg, &[Observable::Length], 3).unwrap();
        let b = run_chains(&ActionSpec::naive(), &params, &cfg, &[Observable::Length], 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].seed, a[1].seed);
        let e = pooled_estimate(&a, &Observable::Length).unwrap();
        assert_eq!(e.n_samples, 3 * 128);
    }
}
