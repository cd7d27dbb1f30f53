//! Explicit monotone finite differences for `u_t = u_xx + f(u)` on a
//! truncated line with zero-flux ends.
//!
//! One step reads `u_i <- G(u_i) + r (u_{i-1} + u_{i+1})` with `r = dt/dx^2`
//! and `G(u) = (1 - 2r) u + dt F(u)`. The scheme is order preserving as long as
//! `G` is nondecreasing, which `dt = min(0.4 dx^2, 0.1 / Lip F)` gives for
//! continuous `F`. For the envelope variants `F` jumps down at every stable
//! state `theta`; there `G` is replaced by `min(G, G(theta))` just below and
//! `max(G, G(theta))` just above, so nodes that would cross the jump slide to
//! the value they would have at `theta` itself.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::PiecewiseCubic;
use crate::reaction::{Envelope, Location, MultistableReaction, ReactionError, RegularizedReaction, ScalarFn};

/// Largest `dt / dx^2`.
pub const DIFFUSION_NUMBER: f64 = 0.4;
/// Largest `dt * Lip F`.
pub const REACTION_NUMBER: f64 = 0.1;
/// Relative accuracy of the tabulated regularized reaction.
const FIT_TOL: f64 = 1e-13;
/// Slack for the per-step range and monotonicity checks.
pub const CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CauchyError {
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("non-finite value at t = {t}, x = {x}")]
    NonFinite { t: f64, x: f64 },
    #[error("value {u} left the invariant range [{lo}, {hi}] at t = {t}, x = {x}")]
    Range { t: f64, x: f64, u: f64, lo: f64, hi: f64 },
    #[error("monotonicity lost at t = {t}, x = {x}: rise {rise}")]
    Monotonicity { t: f64, x: f64, rise: f64 },
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

/// How the jumps of `f` are treated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Regularized { epsilon: f64 },
    LowerEnvelope,
    UpperEnvelope,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Regularized { .. } => "regularized",
            Variant::LowerEnvelope => "lower_envelope",
            Variant::UpperEnvelope => "upper_envelope",
        }
    }
}

#[derive(Clone)]
enum Source {
    Regularized { reg: RegularizedReaction, fast: PiecewiseCubic },
    Envelope { r: MultistableReaction, which: Envelope, at_states: Vec<f64> },
    Plain(ScalarFn),
}

/// The right-hand side `F` used by the scheme.
#[derive(Clone)]
pub struct Kinetics {
    source: Source,
    lipschitz: f64,
    /// `sup |F|` on `[-1, 2]`.
    bound: f64,
    /// Upper end of the regularized invariant range.
    cap: f64,
}

impl std::fmt::Debug for Kinetics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kinetics").field("lipschitz", &self.lipschitz).field("bound", &self.bound).finish()
    }
}

fn branch_lipschitz(r: &MultistableReaction) -> f64 {
    let thetas = r.thetas();
    let mut l = 0.0_f64;
    for k in 0..=thetas.len() {
        let lo = if k == 0 { thetas[0] - 1.0 } else { thetas[k - 1] };
        let hi = if k == thetas.len() { thetas[k - 1] + 1.0 } else { thetas[k] };
        let n = 2000;
        for i in 0..=n {
            let u = lo + (hi - lo) * i as f64 / n as f64;
            l = l.max(r.branch_deriv(k, u).abs());
        }
    }
    l
}

impl Kinetics {
    pub fn new(r: &MultistableReaction, variant: Variant) -> Result<Self, CauchyError> {
        match variant {
            Variant::Regularized { epsilon } => {
                let reg = r.regularize(epsilon)?;
                let lipschitz = reg.lipschitz(-1.0, 2.0);
                let bound = r.sup_abs(-1.0, 2.0);
                let cap = 1.0 + reg.delta();
                let mut breaks = vec![-1.0, 2.0, cap];
                breaks.extend_from_slice(r.thetas());
                breaks.extend(reg.collars().iter().map(|c| c.1));
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                let fast = PiecewiseCubic::fit(|u| reg.eval(u), &breaks, FIT_TOL);
                Ok(Self { source: Source::Regularized { reg, fast }, lipschitz, bound, cap })
            }
            Variant::LowerEnvelope | Variant::UpperEnvelope => {
                let which = if variant == Variant::LowerEnvelope { Envelope::Lower } else { Envelope::Upper };
                let at_states = r.stable_states().iter().map(|&s| r.envelope(s, which)).collect();
                Ok(Self {
                    source: Source::Envelope { r: r.clone(), which, at_states },
                    lipschitz: branch_lipschitz(r),
                    bound: r.sup_abs(-1.0, 2.0),
                    cap: 1.0,
                })
            }
        }
    }

    /// Continuous `F` with a known Lipschitz constant and bound on `[-1, 2]`.
    pub fn plain(f: ScalarFn, lipschitz: f64, bound: f64) -> Self {
        Self { source: Source::Plain(f), lipschitz, bound, cap: 1.0 }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `F(u)`; for the envelope variants the envelope value at the jumps.
    pub fn eval(&self, u: f64) -> f64 {
        match &self.source {
            Source::Regularized { reg, .. } => reg.eval(u),
            Source::Envelope { r, which, .. } => r.envelope(u, *which),
            Source::Plain(f) => f(u),
        }
    }

    /// Largest stable `dt` for grid spacing `dx`.
    pub fn stable_dt(&self, dx: f64) -> f64 {
        let dt = DIFFUSION_NUMBER * dx * dx;
        if self.lipschitz > 0.0 {
            dt.min(REACTION_NUMBER / self.lipschitz)
        } else {
            dt
        }
    }

    /// Invariant range for data in `[lo, hi]` under step `dt` with `1 - 2r = coef`.
    fn range(&self, lo: f64, hi: f64, dt: f64, coef: f64) -> (f64, f64) {
        match &self.source {
            Source::Regularized { .. } => (lo.min(0.0) - CHECK_TOL, hi.max(self.cap) + CHECK_TOL),
            Source::Envelope { .. } => {
                let band = dt * self.bound / coef + CHECK_TOL;
                (lo.min(-band), hi.max(1.0 + band))
            }
            Source::Plain(_) => {
                let band = dt * self.bound / coef + CHECK_TOL;
                (lo - band, hi + band)
            }
        }
    }

    fn update_slice(&self, u: &[f64], g: &mut [f64], coef: f64, dt: f64) {
        match &self.source {
            Source::Regularized { reg, fast } => {
                for (g, &v) in g.iter_mut().zip(u) {
                    let f = if fast.contains(v) { fast.eval(v) } else { reg.eval(v) };
                    *g = coef * v + dt * f;
                }
            }
            _ => {
                for (g, &v) in g.iter_mut().zip(u) {
                    *g = self.update(v, coef, dt);
                }
            }
        }
    }

    /// Monotone update map `G`.
    #[inline]
    fn update(&self, u: f64, coef: f64, dt: f64) -> f64 {
        match &self.source {
            Source::Regularized { reg, fast } => {
                let f = if fast.contains(u) { fast.eval(u) } else { reg.eval(u) };
                coef * u + dt * f
            }
            Source::Plain(f) => coef * u + dt * f(u),
            Source::Envelope { r, at_states, .. } => {
                let thetas = r.thetas();
                let g_state = |k: usize| coef * thetas[k] + dt * at_states[k / 2];
                match r.locate(u) {
                    Location::State(k) if k % 2 == 0 => g_state(k),
                    Location::State(k) => coef * u + dt * r.branch(k, u),
                    Location::Interval(k) => {
                        let mut v = coef * u + dt * r.branch(k, u);
                        if k < thetas.len() && k % 2 == 0 {
                            v = v.min(g_state(k));
                        }
                        if k >= 1 && (k - 1) % 2 == 0 {
                            v = v.max(g_state(k - 1));
                        }
                        v
                    }
                }
            }
        }
    }
}

/// Initial profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `(1 - tanh((x - center) / width)) / 2`.
    Tanh { center: f64, width: f64 },
    Constant { value: f64 },
    /// Piecewise linear through `(x, u)`, held constant outside.
    Table { x: Vec<f64>, u: Vec<f64> },
}

impl InitialData {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialData::Tanh { center, width } => 0.5 * (1.0 - ((x - center) / width).tanh()),
            InitialData::Constant { value } => *value,
            InitialData::Table { x: xs, u } => {
                if x <= xs[0] {
                    return u[0];
                }
                if x >= xs[xs.len() - 1] {
                    return u[u.len() - 1];
                }
                let k = xs.partition_point(|&v| v <= x);
                let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                u[k - 1] + s * (u[k] - u[k - 1])
            }
        }
    }

    /// Values at `-inf` and `+inf`.
    pub fn limits(&self) -> (f64, f64) {
        match self {
            InitialData::Tanh { .. } => (1.0, 0.0),
            InitialData::Constant { value } => (*value, *value),
            InitialData::Table { u, .. } => (u[0], u[u.len() - 1]),
        }
    }

    pub fn check(&self) -> Result<(), CauchyError> {
        match self {
            InitialData::Tanh { width, .. } if !(*width > 0.0) => {
                Err(CauchyError::Precondition(format!("tanh width {width} must be positive")))
            }
            InitialData::Table { x, u } if x.len() != u.len() || x.len() < 2 => {
                Err(CauchyError::Precondition("table needs matching x and u with at least two points".into()))
            }
            InitialData::Table { x, .. } if x.windows(2).any(|w| w[0] >= w[1]) => {
                Err(CauchyError::Precondition("table x must increase strictly".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Uniform grid `x_i = x_min + (offset + i) dx` with the solution at time `t`.
#[derive(Clone, Debug)]
pub struct GridState {
    x_min: f64,
    dx: f64,
    offset: i64,
    t: f64,
    u: Vec<f64>,
    monotone: bool,
    g: Vec<f64>,
    next: Vec<f64>,
}

impl GridState {
    /// Samples `u0` with the end nodes set to its limits. Requires values in
    /// `[0, 1]`, nonincreasing data and, when `r` is given, a left limit in
    /// `(theta_{2I-1}, 1]` and a right limit in `[0, theta_1)`.
    pub fn init(
        x_min: f64,
        x_max: f64,
        n: usize,
        u0: impl Fn(f64) -> f64,
        limits: (f64, f64),
        r: Option<&MultistableReaction>,
    ) -> Result<Self, CauchyError> {
        if n < 3 || !(x_max > x_min) {
            return Err(CauchyError::Precondition(format!("bad grid [{x_min}, {x_max}] with n = {n}")));
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        let mut u: Vec<f64> = (0..n).map(|i| u0(x_min + i as f64 * dx)).collect();
        u[0] = limits.0;
        u[n - 1] = limits.1;
        if let Some(i) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(CauchyError::Precondition(format!("u0 = {} outside [0, 1] at x = {}", u[i], x_min + i as f64 * dx)));
        }
        if let Some(i) = u.windows(2).position(|w| w[1] > w[0] + CHECK_TOL) {
            return Err(CauchyError::Precondition(format!("u0 increases at x = {}", x_min + (i + 1) as f64 * dx)));
        }
        if let Some(r) = r {
            let th = r.thetas();
            let (below_top, above_bottom) = (th[th.len() - 2], th[1]);
            if !(limits.0 > below_top && limits.0 <= 1.0) {
                return Err(CauchyError::Precondition(format!(
                    "left limit {} must lie in ({below_top}, 1]",
                    limits.0
                )));
            }
            if !(limits.1 >= 0.0 && limits.1 < above_bottom) {
                return Err(CauchyError::Precondition(format!(
                    "right limit {} must lie in [0, {above_bottom})",
                    limits.1
                )));
            }
        }
        Ok(Self { x_min, dx, offset: 0, t: 0.0, u, monotone: true, g: Vec::new(), next: Vec::new() })
    }

    /// Raw values on `[x_min, x_max]`.
    pub fn from_values(x_min: f64, x_max: f64, u: Vec<f64>) -> Result<Self, CauchyError> {
        let n = u.len();
        if n < 3 || !(x_max > x_min) {
            return Err(CauchyError::Precondition(format!("bad grid [{x_min}, {x_max}] with n = {n}")));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(CauchyError::Precondition("non-finite initial value".into()));
        }
        let monotone = u.windows(2).all(|w| w[1] <= w[0]);
        Ok(Self { x_min, dx: (x_max - x_min) / (n - 1) as f64, offset: 0, t: 0.0, u, monotone, g: Vec::new(), next: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// Cells the window has moved right since the start.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (self.offset + i as i64) as f64 * self.dx
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { t: self.t, x0: self.x(0), dx: self.dx, u: self.u.clone() }
    }

    /// Moves the window by `cells` (positive: right), filling with boundary data.
    fn shift(&mut self, cells: i64) {
        let n = self.u.len();
        let s = cells.unsigned_abs() as usize;
        if s == 0 {
            return;
        }
        let (left, right) = (self.u[0], self.u[n - 1]);
        if s >= n {
            let fill = if cells > 0 { right } else { left };
            self.u.iter_mut().for_each(|v| *v = fill);
        } else if cells > 0 {
            self.u.copy_within(s.., 0);
            self.u[n - s..].iter_mut().for_each(|v| *v = right);
        } else {
            self.u.copy_within(..n - s, s);
            self.u[..s].iter_mut().for_each(|v| *v = left);
        }
        self.offset += cells;
    }

    /// One explicit step of length `dt`, checked against the invariant range
    /// of the current data.
    pub fn step(&mut self, kin: &Kinetics, dt: f64) -> Result<(), CauchyError> {
        let (lo, hi) = self.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let coef = 1.0 - 2.0 * dt / (self.dx * self.dx);
        self.step_checked(kin, dt, kin.range(lo, hi, dt, coef))
    }

    fn step_checked(&mut self, kin: &Kinetics, dt: f64, range: (f64, f64)) -> Result<(), CauchyError> {
        let n = self.u.len();
        let r = dt / (self.dx * self.dx);
        let coef = 1.0 - 2.0 * r;
        // zero-flux ends: ghost values mirror the end nodes
        self.g.resize(n, 0.0);
        kin.update_slice(&self.u, &mut self.g, coef, dt);
        self.next.resize(n, 0.0);
        // zero-flux ends: ghost values mirror the end nodes
        let (u, g, next) = (&self.u, &self.g, &mut self.next);
        next[0] = g[0] + r * (u[0] + u[1]);
        let (mut lo, mut hi, mut rise) = (next[0], next[0], 0.0_f64);
        let mut last = next[0];
        for i in 1..n {
            let right = if i + 1 < n { u[i + 1] } else { u[i] };
            let v = g[i] + r * (u[i - 1] + right);
            next[i] = v;
            lo = if v < lo { v } else { lo };
            hi = if v > hi { v } else { hi };
            let d = v - last;
            rise = if d > rise { d } else { rise };
            last = v;
        }
        std::mem::swap(&mut self.u, &mut self.next);
        let rise_at = || self.u.windows(2).position(|w| w[1] - w[0] >= rise).map_or(0, |i| i + 1);
        self.t += dt;
        if !(lo.is_finite() && hi.is_finite()) || self.u.iter().any(|v| v.is_nan()) {
            let i = self.u.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(CauchyError::NonFinite { t: self.t, x: self.x(i) });
        }
        if lo < range.0 || hi > range.1 {
            let i = self.u.iter().position(|&v| v < range.0 || v > range.1).unwrap_or(0);
            return Err(CauchyError::Range { t: self.t, x: self.x(i), u: self.u[i], lo: range.0, hi: range.1 });
        }
        if self.monotone && rise > CHECK_TOL {
            let i = rise_at();
            return Err(CauchyError::Monotonicity { t: self.t, x: self.x(i), rise });
        }
        Ok(())
    }
}

/// Solution values on a uniform grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Position of the first node.
    pub x0: f64,
    pub dx: f64,
    pub u: Vec<f64>,
}

impl Snapshot {
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.u.len() - 1)
    }

    /// Linear interpolation, clamped at the ends.
    pub fn sample(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        if s <= 0.0 {
            return self.u[0];
        }
        let n = self.u.len();
        if s >= (n - 1) as f64 {
            return self.u[n - 1];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        self.u[i] * (1.0 - w) + self.u[i + 1] * w
    }
}

/// Front positions of one band `(p_{j-1}, p_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandFronts {
    /// Leftmost point where `u < p_j - tau`.
    pub upper: f64,
    /// Rightmost point where `u > p_{j-1} + tau`.
    pub lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontSample {
    pub t: f64,
    /// Rightmost point where `u > p_0 + tau`.
    pub x0: f64,
    /// Leftmost point where `u < p_J - tau`.
    pub x1: f64,
    pub bands: Vec<BandFronts>,
}

/// Time series of front positions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FrontTrack {
    pub platforms: Vec<f64>,
    pub tau: f64,
    pub samples: Vec<FrontSample>,
}

impl FrontTrack {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Series of `x_j^u` (`upper = true`) or `x_j^l` for band `j` (1-based).
    pub fn band_series(&self, j: usize, upper: bool) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| if upper { s.bands[j - 1].upper } else { s.bands[j - 1].lower })
            .collect()
    }

    pub fn x0_series(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x0).collect()
    }
}

/// Default front margin: a tenth of the smallest platform gap.
pub fn default_tau(platforms: &[f64]) -> f64 {
    platforms.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) / 10.0
}

fn leftmost_below(s: &Snapshot, level: f64) -> f64 {
    match s.u.iter().position(|&v| v < level) {
        None => f64::INFINITY,
        Some(0) => f64::NEG_INFINITY,
        Some(i) => {
            let (a, b) = (s.u[i - 1], s.u[i]);
            s.x(i - 1) + s.dx * (a - level) / (a - b)
        }
    }
}

fn rightmost_above(s: &Snapshot, level: f64) -> f64 {
    let n = s.u.len();
    match s.u.iter().rposition(|&v| v > level) {
        None => f64::NEG_INFINITY,
        Some(i) if i == n - 1 => f64::INFINITY,
        Some(i) => {
            let (a, b) = (s.u[i], s.u[i + 1]);
            s.x(i) + s.dx * (a - level) / (a - b)
        }
    }
}

/// Per-band fronts of a snapshot for platforms `p_0 < ... < p_J`.
pub fn fronts(s: &Snapshot, platforms: &[f64], tau: f64) -> FrontSample {
    let bands = platforms
        .windows(2)
        .map(|p| BandFronts { upper: leftmost_below(s, p[1] - tau), lower: rightmost_above(s, p[0] + tau) })
        .collect();
    FrontSample {
        t: s.t,
        x0: rightmost_above(s, platforms[0] + tau),
        x1: leftmost_below(s, platforms[platforms.len() - 1] - tau),
        bands,
    }
}

/// `max(0, theta1 - A exp(sqrt(M) (x + 2 sqrt(M) t)))`.
pub fn sub_solution_floor(t: f64, x: f64, a: f64, m: f64, theta1: f64) -> f64 {
    let k = m.sqrt();
    (theta1 - a * (k * (x + 2.0 * k * t)).exp()).max(0.0)
}

/// Sampled `sup_{0 < s <= theta_1} -f(s) / (theta_1 - s)`, the smallest
/// admissible `M` for [`sub_solution_floor`].
pub fn sub_solution_rate(r: &MultistableReaction) -> f64 {
    let th1 = r.thetas()[1];
    let n = 10_000;
    (1..n)
        .map(|i| {
            let s = th1 * i as f64 / n as f64;
            -r.branch(1, s) / (th1 - s)
        })
        .fold(0.0_f64, f64::max)
        .max(-r.branch_deriv(1, th1))
}

/// Smallest `A` (times `1 + 1e-9`) that puts the floor below the snapshot.
pub fn sub_solution_amplitude(s: &Snapshot, m: f64, theta1: f64) -> f64 {
    let k = m.sqrt();
    let need = (0..s.u.len())
        .filter(|&i| s.u[i] < theta1)
        .map(|i| (theta1 - s.u[i]) * (-k * s.x(i)).exp())
        .fold(0.0_f64, f64::max);
    need * (1.0 + 1e-9)
}

/// Options for [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Times at which to store snapshots (sorted, within `[0, t_end]`).
    pub snapshot_times: Vec<f64>,
    /// Spacing of front samples; `None` records fronts only at snapshots.
    pub front_dt: Option<f64>,
    /// Keep the mid-level crossing centered by shifting the window.
    pub follow: bool,
    /// Platforms for front tracking.
    pub platforms: Vec<f64>,
    pub tau: f64,
    /// Warn when a front comes closer than this to either edge.
    pub edge_margin: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub fronts: FrontTrack,
    pub warnings: Vec<String>,
    pub dt: f64,
    pub steps: u64,
}

fn mid_crossing(u: &[f64], level: f64) -> Option<usize> {
    u.iter().position(|&v| v < level)
}

/// Steps `state` to `t_end`, recording snapshots and fronts at the requested
/// times; the step is shortened to land on each of them exactly.
pub fn run(state: &mut GridState, kin: &Kinetics, t_end: f64, opts: &RunOptions) -> Result<RunOutput, CauchyError> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(CauchyError::Precondition(format!("t_end = {t_end} must be finite and >= 0")));
    }
    if opts.platforms.len() < 2 {
        return Err(CauchyError::Precondition("front tracking needs at least two platforms".into()));
    }
    let dt = kin.stable_dt(state.dx);
    let coef = 1.0 - 2.0 * dt / (state.dx * state.dx);
    let (lo0, hi0) = state.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = kin.range(lo0, hi0, dt, coef);

    let mut events: Vec<(f64, bool)> = opts.snapshot_times.iter().filter(|&&t| t <= t_end).map(|&t| (t, true)).collect();
    if let Some(fdt) = opts.front_dt.filter(|d| *d > 0.0) {
        let count = (t_end / fdt + 1e-9).floor() as usize;
        events.extend((0..=count).map(|k| (k as f64 * fdt, false)));
    }
    events.push((t_end, false));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));

    let mid = 0.5 * (opts.platforms[0] + opts.platforms[opts.platforms.len() - 1]);
    let mut out = RunOutput {
        snapshots: Vec::new(),
        fronts: FrontTrack { platforms: opts.platforms.clone(), tau: opts.tau, samples: Vec::new() },
        warnings: Vec::new(),
        dt,
        steps: 0,
    };
    let mut last_front_t = f64::NEG_INFINITY;
    let mut since_follow = 0u32;
    for (te, is_snap) in events {
        while state.t < te {
            let remaining = te - state.t;
            let h = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
            state.step_checked(kin, h, range)?;
            if h == remaining {
                state.t = te;
            }
            out.steps += 1;
            since_follow += 1;
            if opts.follow && since_follow >= 16 {
                since_follow = 0;
                if let Some(i) = mid_crossing(&state.u, mid) {
                    let drift = i as i64 - (state.u.len() / 2) as i64;
                    if drift.abs() >= 1 {
                        state.shift(drift);
                    }
                }
            }
        }
        let snap = state.snapshot();
        if is_snap {
            out.snapshots.push(snap.clone());
        }
        if snap.t > last_front_t {
            last_front_t = snap.t;
            let f = fronts(&snap, &opts.platforms, opts.tau);
            if let Some(margin) = opts.edge_margin {
                let (a, b) = (snap.x0, snap.x_end());
                let near = std::iter::once(f.x0)
                    .chain(std::iter::once(f.x1))
                    .filter(|x| x.is_finite())
                    .any(|x| x - a < margin || b - x < margin);
                if near && out.warnings.is_empty() {
                    out.warnings.push(format!(
                        "front closer than the margin {margin} to the domain edge at t = {} (domain [{a}, {b}])",
                        snap.t
                    ));
                }
            }
            out.fronts.samples.push(f);
        }
    }
    Ok(out)
}

/// Zero reaction, for tests of the pure diffusion part.
pub fn zero_kinetics() -> Kinetics {
    Kinetics::plain(Arc::new(|_| 0.0), 0.0, 0.0)
}
