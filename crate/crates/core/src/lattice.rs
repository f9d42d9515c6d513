//! Lattice geometry, paths, potentials and the family of link actions.
//!
//! Units are m = ħ = 1. A path on `N` links is the sequence `x_0..x_N`; the
//! imaginary-time step is `a = T / N`. Every action here is a sum of link terms
//! `S_k(x_k, x_{k+1})`:
//!
//! * naive: `S_k = a [ ½ (Δx_k / a)² + V(x_k) ]`
//! * sub-diffusive: `S_k + g a^ξ |Δx_k / a|^α`
//! * f-modified: `f(S_k)` for `f ∈ {f_γ, tanh, sin}` (plus the identity reference)

use std::fmt;

use crate::error::{Error, Result};

/// Geometry of the time lattice and the optional constraints on paths.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeConfig {
    pub n_sites: usize,
    pub spacing: f64,
    pub left_endpoint: f64,
    /// `None` leaves `x_N` free (open boundary).
    pub right_endpoint: Option<f64>,
    /// Infrared cutoff on single-step displacements, `|Δx_k| <= L`.
    pub increment_cutoff: Option<f64>,
    /// Width of a box centred on the origin, `|x_k| <= width / 2`.
    pub position_box: Option<f64>,
}

impl LatticeConfig {
    /// `n_sites` links spanning `total_time`, both endpoints pinned at the origin.
    pub fn new(n_sites: usize, total_time: f64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidConfig("n_sites must be positive".into()));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "total_time must be positive, got {total_time}"
            )));
        }
        let cfg = Self {
            n_sites,
            spacing: total_time / n_sites as f64,
            left_endpoint: 0.0,
            right_endpoint: Some(0.0),
            increment_cutoff: None,
            position_box: None,
        };
        Ok(cfg)
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Result<Self> {
        self.increment_cutoff = Some(cutoff);
        self.validate()?;
        Ok(self)
    }

    pub fn with_box(mut self, width: f64) -> Result<Self> {
        self.position_box = Some(width);
        self.validate()?;
        Ok(self)
    }

    pub fn with_free_end(mut self) -> Self {
        self.right_endpoint = None;
        self
    }

    pub fn total_time(&self) -> f64 {
        self.n_sites as f64 * self.spacing
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidConfig("n_sites must be positive".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if let Some(l) = self.increment_cutoff {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "increment_cutoff must be positive, got {l}"
                )));
            }
        }
        if let Some(w) = self.position_box {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidConfig(format!("position_box must be positive, got {w}")));
            }
        }
        let ends = std::iter::once(self.left_endpoint).chain(self.right_endpoint);
        for e in ends {
            if !e.is_finite() {
                return Err(Error::NonFinite("endpoint"));
            }
            if !self.admits_position(e) {
                return Err(Error::InvalidConfig(format!(
                    "endpoint {e} lies outside the position box"
                )));
            }
        }
        if let (Some(r), Some(l)) = (self.right_endpoint, self.increment_cutoff) {
            if (r - self.left_endpoint).abs() > l * self.n_sites as f64 {
                return Err(Error::InvalidConfig(
                    "endpoints cannot be joined under the increment cutoff".into(),
                ));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn admits_position(&self, x: f64) -> bool {
        match self.position_box {
            Some(w) => x.abs() <= 0.5 * w,
            None => true,
        }
    }

    #[inline]
    pub fn admits_increment(&self, dx: f64) -> bool {
        match self.increment_cutoff {
            Some(l) => dx.abs() <= l,
            None => true,
        }
    }

    /// Index of the last site the sampler may move.
    pub fn last_mobile_site(&self) -> usize {
        if self.right_endpoint.is_some() {
            self.n_sites - 1
        } else {
            self.n_sites
        }
    }

    pub fn is_mobile(&self, k: usize) -> bool {
        k >= 1 && k <= self.last_mobile_site()
    }
}

/// Positions `x_0..x_N` of one lattice path.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    positions: Vec<f64>,
}

impl Path {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::Contract("a path needs at least two positions".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("path positions"));
        }
        Ok(Self { positions })
    }

    /// Straight line between the endpoints; the free end, if any, stays at the left endpoint.
    pub fn initial(cfg: &LatticeConfig) -> Self {
        let n = cfg.n_sites;
        let right = cfg.right_endpoint.unwrap_or(cfg.left_endpoint);
        let positions = (0..=n)
            .map(|k| cfg.left_endpoint + (right - cfg.left_endpoint) * k as f64 / n as f64)
            .collect();
        Self { positions }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn n_links(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.windows(2).map(|w| w[1] - w[0])
    }

    /// Checks length, endpoints and constraints against `cfg`.
    pub fn check(&self, cfg: &LatticeConfig) -> Result<()> {
        if self.positions.len() != cfg.n_sites + 1 {
            return Err(Error::Contract(format!(
                "path has {} positions, lattice expects {}",
                self.positions.len(),
                cfg.n_sites + 1
            )));
        }
        if self.positions[0] != cfg.left_endpoint {
            return Err(Error::Contract("left endpoint moved".into()));
        }
        if let Some(r) = cfg.right_endpoint {
            if self.positions[cfg.n_sites] != r {
                return Err(Error::Contract("right endpoint moved".into()));
            }
        }
        if let Some(x) = self.positions.iter().find(|&&x| !cfg.admits_position(x)) {
            return Err(Error::Contract(format!("position {x} outside the box")));
        }
        if let Some(dx) = self.increments().find(|&dx| !cfg.admits_increment(dx)) {
            return Err(Error::Contract(format!("increment {dx} exceeds the cutoff")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Potential {
    #[default]
    Free,
    Harmonic {
        omega: f64,
    },
    /// Constant offset; used to check that normalised expectations ignore it.
    Constant {
        value: f64,
    },
}

impl Potential {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => 0.5 * omega * omega * x * x,
            Potential::Constant { value } => value,
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Potential::Free | Potential::Constant { .. } => 0.0,
            Potential::Harmonic { omega } => omega * omega * x,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Potential::Free => Ok(()),
            Potential::Harmonic { omega } if omega.is_finite() && omega > 0.0 => Ok(()),
            Potential::Harmonic { omega } => Err(Error::InvalidConfig(format!(
                "harmonic frequency must be positive, got {omega}"
            ))),
            Potential::Constant { value } if value.is_finite() => Ok(()),
            Potential::Constant { .. } => Err(Error::NonFinite("potential constant")),
        }
    }
}

/// The function applied to each naive link action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FKind {
    /// `f(x) = x`, which reproduces the naive action.
    Identity,
    /// `+(1+x)^γ` for γ > 0 and `-(1+x)^γ` for γ < 0.
    Gamma(f64),
    Tanh,
    Sin,
}

impl FKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FKind::Gamma(g) if g == 0.0 => Err(Error::CriticalGamma),
            FKind::Gamma(g) if !g.is_finite() => Err(Error::NonFinite("gamma")),
            _ => Ok(()),
        }
    }

    /// `f(x)`, unchecked.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FKind::Identity => x,
            FKind::Gamma(g) if g > 0.0 => (1.0 + x).powf(g),
            FKind::Gamma(g) => -(1.0 + x).powf(g),
            FKind::Tanh => x.tanh(),
            FKind::Sin => x.sin(),
        }
    }

    /// `f'(x)`, unchecked.
    #[inline]
    pub fn eval_derivative(&self, x: f64) -> f64 {
        match *self {
            FKind::Identity => 1.0,
            FKind::Gamma(g) if g > 0.0 => g * (1.0 + x).powf(g - 1.0),
            FKind::Gamma(g) => -g * (1.0 + x).powf(g - 1.0),
            FKind::Tanh => {
                let c = x.cosh();
                1.0 / (c * c)
            }
            FKind::Sin => x.cos(),
        }
    }

    /// Whether `f` stays bounded on `[0, ∞)`.
    pub fn is_bounded(&self) -> bool {
        match *self {
            FKind::Identity => false,
            FKind::Gamma(g) => g < 0.0,
            FKind::Tanh | FKind::Sin => true,
        }
    }

    /// Minimum of `f` on `[0, x_max]`.
    pub fn min_on(&self, x_max: f64) -> f64 {
        match *self {
            // increasing on [0, ∞)
            FKind::Identity | FKind::Gamma(_) | FKind::Tanh => self.eval(0.0),
            FKind::Sin => {
                if x_max >= 1.5 * std::f64::consts::PI {
                    -1.0
                } else {
                    0.0f64.min(x_max.sin())
                }
            }
        }
    }

    fn check_arg(&self, x: f64) -> Result<()> {
        self.validate()?;
        if !x.is_finite() {
            return Err(Error::NonFinite("f argument"));
        }
        if matches!(self, FKind::Gamma(_)) && x <= -1.0 {
            return Err(Error::Contract(format!("f_gamma undefined at x = {x}")));
        }
        Ok(())
    }
}

impl fmt::Display for FKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FKind::Identity => write!(f, "identity"),
            FKind::Gamma(g) => write!(f, "gamma({g})"),
            FKind::Tanh => write!(f, "tanh"),
            FKind::Sin => write!(f, "sin"),
        }
    }
}

pub fn f_value(kind: FKind, x: f64) -> Result<f64> {
    kind.check_arg(x)?;
    Ok(kind.eval(x))
}

pub fn f_derivative(kind: FKind, x: f64) -> Result<f64> {
    kind.check_arg(x)?;
    Ok(kind.eval_derivative(x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionKind {
    Naive,
    SubDiffusive {
        g: f64,
        xi: f64,
        alpha: f64,
    },
    FModified(FKind),
    /// Naive form with rescaled terms, `κ Δx²/2a + λ a V(x_k)`; the effective
    /// theory of an f-modified action has `κ = 1/s[f]`, `λ = g[f]`.
    Effective {
        kinetic: f64,
        potential: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionSpec {
    pub kind: ActionKind,
    pub potential: Potential,
}

impl ActionSpec {
    pub fn naive() -> Self {
        Self {
            kind: ActionKind::Naive,
            potential: Potential::Free,
        }
    }

    pub fn sub_diffusive(g: f64, xi: f64, alpha: f64) -> Result<Self> {
        let spec = Self {
            kind: ActionKind::SubDiffusive { g, xi, alpha },
            potential: Potential::Free,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn f_modified(kind: FKind) -> Result<Self> {
        let spec = Self {
            kind: ActionKind::FModified(kind),
            potential: Potential::Free,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        match self.kind {
            ActionKind::Naive => Ok(()),
            ActionKind::SubDiffusive { g, xi, alpha } => {
                if !(g.is_finite() && xi.is_finite() && alpha.is_finite()) {
                    return Err(Error::NonFinite("sub-diffusive parameters"));
                }
                if xi < 1.0 {
                    return Err(Error::InvalidConfig(format!("xi must be >= 1, got {xi}")));
                }
                if alpha < 0.0 {
                    return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
                }
                Ok(())
            }
            ActionKind::FModified(f) => f.validate(),
            ActionKind::Effective { kinetic, potential } => {
                if !(kinetic.is_finite() && kinetic > 0.0 && potential.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "effective coefficients must be finite with kinetic > 0, got ({kinetic}, {potential})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Bounded f-modified actions, whose typical increments reach the cutoff.
    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, ActionKind::FModified(f) if f.is_bounded())
    }

    pub fn kernel(&self, spacing: f64) -> Result<LinkKernel> {
        self.validate()?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidConfig(format!("spacing must be positive, got {spacing}")));
        }
        Ok(LinkKernel::new(*self, spacing))
    }
}

impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Naive => write!(f, "naive"),
            ActionKind::SubDiffusive { g, xi, alpha } => {
                write!(f, "subdiffusive(g={g},xi={xi},alpha={alpha})")
            }
            ActionKind::FModified(k) => write!(f, "f:{k}"),
            ActionKind::Effective { kinetic, potential } => {
                write!(f, "effective(kinetic={kinetic},potential={potential})")
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Extra {
    None,
    /// `coef · |Δx|^alpha` with `coef = g a^(ξ-α)`.
    Power {
        coef: f64,
        alpha: f64,
        int_alpha: Option<i32>,
    },
    F(FKind),
    Scaled {
        kinetic: f64,
        potential: f64,
    },
}

/// An [`ActionSpec`] with its spacing-dependent constants folded in.
#[derive(Clone, Copy, Debug)]
pub struct LinkKernel {
    spec: ActionSpec,
    spacing: f64,
    inv_2a: f64,
    extra: Extra,
}

impl LinkKernel {
    fn new(spec: ActionSpec, spacing: f64) -> Self {
        let extra = match spec.kind {
            ActionKind::Naive => Extra::None,
            ActionKind::SubDiffusive { g, xi, alpha } => {
                let int_alpha = (alpha.fract() == 0.0 && alpha <= 64.0).then_some(alpha as i32);
                Extra::Power {
                    coef: g * spacing.powf(xi - alpha),
                    alpha,
                    int_alpha,
                }
            }
            ActionKind::FModified(f) => Extra::F(f),
            ActionKind::Effective { kinetic, potential } => Extra::Scaled { kinetic, potential },
        };
        Self {
            spec,
            spacing,
            inv_2a: 0.5 / spacing,
            extra,
        }
    }

    pub fn spec(&self) -> &ActionSpec {
        &self.spec
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Naive link action `Δx²/2a + a V(x_k)`.
    #[inline]
    pub fn naive(&self, x: f64, next: f64) -> f64 {
        let dx = next - x;
        dx * dx * self.inv_2a + self.spacing * self.spec.potential.value(x)
    }

    #[inline]
    pub fn action(&self, x: f64, next: f64) -> f64 {
        let s = self.naive(x, next);
        match self.extra {
            Extra::None => s,
            Extra::Power { coef, alpha, int_alpha } => {
                let u = (next - x).abs();
                let p = match int_alpha {
                    Some(n) => u.powi(n),
                    None => u.powf(alpha),
                };
                s + coef * p
            }
            Extra::F(f) => f.eval(s),
            Extra::Scaled { kinetic, potential } => {
                let dx = next - x;
                kinetic * dx * dx * self.inv_2a + potential * self.spacing * self.spec.potential.value(x)
            }
        }
    }

    /// Partial derivatives `(∂S/∂x_k, ∂S/∂x_{k+1})` of one link.
    pub fn gradient(&self, x: f64, next: f64) -> (f64, f64) {
        let dx = next - x;
        let dkin = dx / self.spacing;
        let dpot = self.spacing * self.spec.potential.derivative(x);
        let (left, right) = (-dkin + dpot, dkin);
        match self.extra {
            Extra::None => (left, right),
            Extra::Power { coef, alpha, .. } => {
                let d = if dx == 0.0 || alpha == 0.0 {
                    0.0
                } else {
                    coef * alpha * dx.abs().powf(alpha - 1.0) * dx.signum()
                };
                (left - d, right + d)
            }
            Extra::F(f) => {
                let fp = f.eval_derivative(self.naive(x, next));
                (fp * left, fp * right)
            }
            Extra::Scaled { kinetic, potential } => (-kinetic * dkin + potential * dpot, kinetic * dkin),
        }
    }

    pub fn total(&self, positions: &[f64]) -> f64 {
        positions.windows(2).map(|w| self.action(w[0], w[1])).sum()
    }

    /// Sum of the (one or two) links touching site `k` with `x_k = value`.
    #[inline]
    pub fn site_action(&self, positions: &[f64], k: usize, value: f64) -> f64 {
        let mut s = self.action(positions[k - 1], value);
        if let Some(&next) = positions.get(k + 1) {
            s += self.action(value, next);
        }
        s
    }

    /// `ΔS` for moving site `k` to `proposed`; unchecked.
    #[inline]
    pub fn local_change(&self, positions: &[f64], k: usize, proposed: f64) -> f64 {
        self.site_action(positions, k, proposed) - self.site_action(positions, k, positions[k])
    }

    /// `∂S_N/∂x_k` at an interior or free-end site.
    pub fn site_gradient(&self, positions: &[f64], k: usize) -> f64 {
        let mut d = self.gradient(positions[k - 1], positions[k]).1;
        if let Some(&next) = positions.get(k + 1) {
            d += self.gradient(positions[k], next).0;
        }
        d
    }
}

/// Link action `S_k(x_k, x_{k+1})` for spacing `a`.
pub fn link_action(spec: &ActionSpec, x: f64, next: f64, spacing: f64) -> Result<f64> {
    if !(x.is_finite() && next.is_finite()) {
        return Err(Error::NonFinite("link endpoints"));
    }
    let s = spec.kernel(spacing)?.action(x, next);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::NonFinite("link action"))
    }
}

pub fn total_action(spec: &ActionSpec, path: &Path, cfg: &LatticeConfig) -> Result<f64> {
    if path.positions().len() != cfg.n_sites + 1 {
        return Err(Error::Contract(format!(
            "path has {} positions, lattice expects {}",
            path.positions().len(),
            cfg.n_sites + 1
        )));
    }
    Ok(spec.kernel(cfg.spacing)?.total(path.positions()))
}

pub fn local_action_change(
    spec: &ActionSpec,
    path: &Path,
    k: usize,
    proposed: f64,
    cfg: &LatticeConfig,
) -> Result<f64> {
    if path.positions().len() != cfg.n_sites + 1 {
        return Err(Error::Contract("path length does not match lattice".into()));
    }
    if !cfg.is_mobile(k) {
        return Err(Error::Contract(format!(
            "site {k} is not a movable site of a {}-link lattice",
            cfg.n_sites
        )));
    }
    if !proposed.is_finite() {
        return Err(Error::NonFinite("proposed position"));
    }
    if proposed == path.positions()[k] {
        return Ok(0.0);
    }
    Ok(spec.kernel(cfg.spacing)?.local_change(path.positions(), k, proposed))
}
