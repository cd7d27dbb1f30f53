//! Compact traveling waves by phase-plane shooting, and the propagating
//! terrace by enumeration of stable-state chains.
//!
//! A wave `phi(x - ct)` solves `phi'' + c phi' + f(phi) = 0`. Writing
//! `p = phi'` as a function of `phi` gives `p dp/dphi = -c p - f(phi)`. We
//! integrate `w = p^2` instead, in the variable `s = theta_hi - phi`:
//!
//! ```text
//! dw/ds = 2 f(theta_hi - s) - 2 c sqrt(w),    w(0) = 0
//! ```
//!
//! which has no singularity where `p` vanishes. Both endpoints are stable
//! states where `f` jumps, so `p` leaves `theta_hi` and reaches `theta_lo` with
//! a square-root law and the profile has compact support.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::MonotoneCubic;
use crate::reaction::{MultistableReaction, ReactionError};
use crate::terrace::{Terrace, TerraceError};

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("{u} is not a stable state of the reaction")]
    NotStableState { u: f64 },
    #[error("endpoints out of order: theta_lo = {lo} >= theta_hi = {hi}")]
    Endpoints { lo: f64, hi: f64 },
    #[error("non-finite phase-plane state at phi = {phi} (c = {c})")]
    NonFinite { phi: f64, c: f64 },
    #[error("chain enumeration supports at most 4 stable blocks, reaction has {0}")]
    TooManyStates(usize),
    #[error("terrace decomposition is not unique: {survivors} surviving chains ({detail})")]
    Inconsistent { survivors: usize, detail: String },
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Terrace(#[from] TerraceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveOptions {
    /// Phase-plane step in `phi`.
    pub dphi: f64,
    /// Bisection must shrink the speed bracket at least this far.
    pub tol_c: f64,
    /// `|p(theta_lo)|` below which a shot counts as a connection.
    pub conn_tol: f64,
    /// Largest `|c|` tried while expanding the bracket.
    pub c_max: f64,
    /// `|p|` at an intermediate stable state below which the trajectory is
    /// considered pinned there.
    pub pin_tol: f64,
    /// Speed tolerance for the nonincreasing-speed test in the decomposition.
    pub order_tol: f64,
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self { dphi: 1e-4, tol_c: 1e-8, conn_tol: 1e-6, c_max: 50.0, pin_tol: 1e-5, order_tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    /// `p -> 0` exactly as `phi -> theta_lo`.
    Connection,
    /// `p` vanished at `phi_star > theta_lo`: the speed is too large.
    Undershoot { phi_star: f64 },
    /// `p(theta_lo) = p_end < 0`: the speed is too small.
    Overshoot { p_end: f64 },
}

/// Sampled phase-plane trajectory `(phi, p)`, ordered from `theta_hi` down.
#[derive(Clone, Debug)]
pub struct PhaseTrajectory {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub c: f64,
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub outcome: Outcome,
}

impl PhaseTrajectory {
    /// `p` at the sample sitting exactly on `u` (segment ends are aligned with
    /// the steady states).
    pub fn p_at(&self, u: f64) -> Option<f64> {
        self.phi.iter().position(|&v| v == u).map(|k| self.p[k])
    }
}

fn stable_index(r: &MultistableReaction, u: f64) -> Result<usize, WaveError> {
    r.stable_index(u).ok_or(WaveError::NotStableState { u })
}

/// Shoots from `theta_hi` at speed `c` with the default connection tolerance.
pub fn shoot(
    r: &MultistableReaction,
    theta_lo: f64,
    theta_hi: f64,
    c: f64,
    dphi: f64,
) -> Result<PhaseTrajectory, WaveError> {
    shoot_with(r, theta_lo, theta_hi, c, dphi, WaveOptions::default().conn_tol)
}

/// Integrates `w = p^2` downward from `theta_hi`. Steps are aligned so every
/// steady state in between is a step boundary; inside a segment the branch
/// serving that open interval is used, so a jump is never straddled by a
/// Runge-Kutta stage.
pub fn shoot_with(
    r: &MultistableReaction,
    theta_lo: f64,
    theta_hi: f64,
    c: f64,
    dphi: f64,
    conn_tol: f64,
) -> Result<PhaseTrajectory, WaveError> {
    let k_lo = stable_index(r, theta_lo)?;
    let k_hi = stable_index(r, theta_hi)?;
    if k_lo >= k_hi {
        return Err(WaveError::Endpoints { lo: theta_lo, hi: theta_hi });
    }
    let thetas = r.thetas();
    let mut phi = vec![theta_hi];
    let mut w = vec![0.0_f64];
    let mut first = true;
    for k in (k_lo + 1..=k_hi).rev() {
        let (bot, top) = (thetas[k - 1], thetas[k]);
        let n = ((top - bot) / dphi).ceil().max(2.0) as usize;
        let h = (top - bot) / n as f64;
        let f = |s: f64| r.branch(k, top - s);
        let rhs = |s: f64, w: f64| 2.0 * f(s) - 2.0 * c * w.max(0.0).sqrt();
        for j in 0..n {
            let s0 = j as f64 * h;
            let w0 = *w.last().unwrap();
            let w1 = if first {
                first = false;
                // w = 2 int_0^s f - (4/3) c sqrt(2 f0) s^1.5 + (2/3) c^2 s^2 + O(c s^2.5),
                // whose leading term is p = -sqrt(2 f(theta_hi^-) s)
                let f0 = f(0.0);
                let lead = h / 3.0 * (f0 + 4.0 * f(0.5 * h) + f(h));
                let drag = 4.0 / 3.0 * c * (2.0 * f0).sqrt() * h.powf(1.5);
                let curv = 2.0 / 3.0 * c * c * h * h;
                if lead - drag + curv < 0.0 {
                    let s_star = 9.0 * f0 / (8.0 * c * c);
                    return Ok(undershoot(theta_lo, theta_hi, c, phi, w, top - s_star.min(h)));
                }
                lead - drag + curv
            } else {
                let k1 = rhs(s0, w0);
                let k2 = rhs(s0 + 0.5 * h, w0 + 0.5 * h * k1);
                let k3 = rhs(s0 + 0.5 * h, w0 + 0.5 * h * k2);
                let k4 = rhs(s0 + h, w0 + h * k3);
                w0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            };
            let phi1 = if j + 1 == n { bot } else { top - (j + 1) as f64 * h };
            if !w1.is_finite() {
                return Err(WaveError::NonFinite { phi: phi1, c });
            }
            let last_step = k == k_lo + 1 && j + 1 == n;
            if w1 < 0.0 && !(last_step && -w1 < conn_tol * conn_tol) {
                let s_star = s0 + h * w0 / (w0 - w1);
                return Ok(undershoot(theta_lo, theta_hi, c, phi, w, top - s_star));
            }
            phi.push(phi1);
            w.push(w1.max(0.0));
        }
    }
    let p: Vec<f64> = w.iter().map(|&v| -v.sqrt()).collect();
    let p_end = *p.last().unwrap();
    let outcome = if p_end.abs() < conn_tol { Outcome::Connection } else { Outcome::Overshoot { p_end } };
    Ok(PhaseTrajectory { theta_lo, theta_hi, c, phi, p, outcome })
}

fn undershoot(lo: f64, hi: f64, c: f64, mut phi: Vec<f64>, mut w: Vec<f64>, phi_star: f64) -> PhaseTrajectory {
    phi.push(phi_star);
    w.push(0.0);
    let p = w.iter().map(|&v| -v.sqrt()).collect();
    PhaseTrajectory { theta_lo: lo, theta_hi: hi, c, phi, p, outcome: Outcome::Undershoot { phi_star } }
}

/// Why no wave connects the requested pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum NoWave {
    /// No sign change of the classification for `|c| <= c_max`.
    BracketNotFound { c_max: f64 },
    /// The limiting trajectory stops at an intermediate stable state.
    Pinned { state: f64, c: f64 },
    /// Bracket collapsed without a connection.
    Unresolved { c: f64, p_end: f64 },
}

#[derive(Clone, Debug)]
pub enum WaveSolution {
    Found(WaveProfile),
    NoWave(NoWave),
}

impl WaveSolution {
    pub fn wave(self) -> Option<WaveProfile> {
        match self {
            WaveSolution::Found(w) => Some(w),
            WaveSolution::NoWave(_) => None,
        }
    }
}

fn too_fast(o: &Outcome) -> bool {
    matches!(o, Outcome::Undershoot { .. })
}

/// Finds the unique speed connecting `theta_hi` (behind) to `theta_lo` (ahead).
pub fn solve_wave(
    r: &MultistableReaction,
    theta_lo: f64,
    theta_hi: f64,
    opts: &WaveOptions,
) -> Result<WaveSolution, WaveError> {
    let shot = |c: f64| shoot_with(r, theta_lo, theta_hi, c, opts.dphi, opts.conn_tol);

    let mut lo = shot(-1.0)?;
    while too_fast(&lo.outcome) {
        let c = 2.0 * lo.c;
        if c.abs() > opts.c_max {
            return Ok(WaveSolution::NoWave(NoWave::BracketNotFound { c_max: opts.c_max }));
        }
        lo = shot(c)?;
    }
    let mut hi = shot(1.0)?;
    while matches!(hi.outcome, Outcome::Overshoot { .. }) {
        let c = 2.0 * hi.c;
        if c.abs() > opts.c_max {
            return Ok(WaveSolution::NoWave(NoWave::BracketNotFound { c_max: opts.c_max }));
        }
        hi = shot(c)?;
    }

    let mut found = [&lo, &hi].into_iter().find(|t| t.outcome == Outcome::Connection).cloned();
    if found.is_none() {
        // lo overshoots, hi undershoots: keep that invariant while halving.
        for _ in 0..400 {
            let mid = 0.5 * (lo.c + hi.c);
            if mid <= lo.c || mid >= hi.c {
                break;
            }
            let t = shot(mid)?;
            match t.outcome {
                Outcome::Connection => {
                    found = Some(t);
                    break;
                }
                Outcome::Undershoot { .. } => hi = t,
                Outcome::Overshoot { .. } => lo = t,
            }
        }
    }
    let bracket = (lo.c, hi.c);
    let traj = found.unwrap_or(lo);

    let k_lo = stable_index(r, theta_lo)?;
    let k_hi = stable_index(r, theta_hi)?;
    for k in (k_lo + 2..k_hi).step_by(2) {
        let state = r.thetas()[k];
        if let Some(p) = traj.p_at(state) {
            if p.abs() < opts.pin_tol {
                return Ok(WaveSolution::NoWave(NoWave::Pinned { state, c: traj.c }));
            }
        }
    }
    match traj.outcome {
        Outcome::Connection => Ok(WaveSolution::Found(WaveProfile::from_trajectory(&traj, bracket, opts.dphi)?)),
        Outcome::Overshoot { p_end } => Ok(WaveSolution::NoWave(NoWave::Unresolved { c: traj.c, p_end })),
        Outcome::Undershoot { .. } => Ok(WaveSolution::NoWave(NoWave::Unresolved { c: traj.c, p_end: 0.0 })),
    }
}

/// One compact traveling wave, normalized so `spt(phi') = (0, eta)`.
#[derive(Clone, Debug)]
pub struct WaveProfile {
    theta_lo: f64,
    theta_hi: f64,
    c: f64,
    eta: f64,
    step: f64,
    bracket: (f64, f64),
    z: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    interp: MonotoneCubic,
}

impl WaveProfile {
    /// `z(phi) = int dphi / |p|`, integrated exactly for `w = p^2` linear on
    /// each step, which also resolves the inverse square-root ends.
    fn from_trajectory(t: &PhaseTrajectory, bracket: (f64, f64), step: f64) -> Result<Self, WaveError> {
        let n = t.phi.len();
        let mut z = Vec::with_capacity(n);
        z.push(0.0);
        for k in 0..n - 1 {
            let denom = t.p[k].abs() + t.p[k + 1].abs();
            let dz = 2.0 * (t.phi[k] - t.phi[k + 1]) / denom;
            if !dz.is_finite() || dz <= 0.0 {
                return Err(WaveError::NonFinite { phi: t.phi[k], c: t.c });
            }
            z.push(z[k] + dz);
        }
        let eta = z[n - 1];
        let interp = MonotoneCubic::new(z.clone(), t.phi.clone(), &t.p);
        Ok(Self {
            theta_lo: t.theta_lo,
            theta_hi: t.theta_hi,
            c: t.c,
            eta,
            step,
            bracket,
            z,
            phi: t.phi.clone(),
            dphi: t.p.clone(),
            interp,
        })
    }

    pub fn theta_lo(&self) -> f64 {
        self.theta_lo
    }

    pub fn theta_hi(&self) -> f64 {
        self.theta_hi
    }

    pub fn speed(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Phase-plane step the wave was computed with.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Final bisection bracket `(overshooting c, undershooting c)`.
    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    pub fn samples(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.z, &self.phi, &self.dphi)
    }

    /// `phi(z)`, equal to `theta_hi` for `z <= 0` and `theta_lo` for `z >= eta`.
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        if z <= 0.0 {
            self.theta_hi
        } else if z >= self.eta {
            self.theta_lo
        } else {
            self.interp.eval(z)
        }
    }

    #[inline]
    pub fn deriv(&self, z: f64) -> f64 {
        if z <= 0.0 || z >= self.eta {
            0.0
        } else {
            self.interp.deriv(z)
        }
    }

    /// Smallest `z` with `phi(z) <= level` on the stored samples, linearly interpolated.
    pub fn z_at_level(&self, level: f64) -> f64 {
        if level >= self.theta_hi {
            return 0.0;
        }
        if level <= self.theta_lo {
            return self.eta;
        }
        let k = self.phi.partition_point(|&v| v > level);
        let (z0, z1, p0, p1) = (self.z[k - 1], self.z[k], self.phi[k - 1], self.phi[k]);
        z0 + (z1 - z0) * (p0 - level) / (p0 - p1)
    }

    /// Copy with a different speed, profile untouched. Used to probe the
    /// sensitivity of the speed identity.
    pub fn with_speed(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    /// Max of `|phi'' + c phi' + f(phi)|` over interior samples, with `phi''`
    /// from centered differences of `p` in `z`. Samples closer to a stable
    /// state than 1% of the span (or two steps) are skipped, since `p` has a
    /// square-root singularity there.
    pub fn ode_residual(&self, r: &MultistableReaction) -> f64 {
        let stable = r.stable_states();
        let margin = (2.0 * self.step).max(0.01 * (self.theta_hi - self.theta_lo));
        let mut worst = 0.0_f64;
        for k in 1..self.z.len() - 1 {
            let v = self.phi[k];
            if stable.iter().any(|&s| (v - s).abs() <= margin) {
                continue;
            }
            let d2 = (self.dphi[k + 1] - self.dphi[k - 1]) / (self.z[k + 1] - self.z[k - 1]);
            let f = r.envelope(v, crate::reaction::Envelope::Upper);
            worst = worst.max((d2 + self.c * self.dphi[k] + f).abs());
        }
        worst
    }

    /// Log-log slope of `|p|` against the distance to `theta_lo` over relative
    /// distances in `[1e-4, 1e-2]`; 1/2 for square-root arrival.
    pub fn arrival_exponent(&self) -> f64 {
        let span = self.theta_hi - self.theta_lo;
        let pts = self
            .phi
            .iter()
            .zip(&self.dphi)
            .map(|(&v, &p)| ((v - self.theta_lo) / span, p.abs()))
            .filter(|&(d, p)| (1e-4..=1e-2).contains(&d) && p > 0.0);
        loglog_slope(pts)
    }

    /// Same as [`Self::arrival_exponent`] at the departure end `theta_hi`.
    pub fn departure_exponent(&self) -> f64 {
        let span = self.theta_hi - self.theta_lo;
        let pts = self
            .phi
            .iter()
            .zip(&self.dphi)
            .map(|(&v, &p)| ((self.theta_hi - v) / span, p.abs()))
            .filter(|&(d, p)| (1e-4..=1e-2).contains(&d) && p > 0.0);
        loglog_slope(pts)
    }
}

fn loglog_slope(pts: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.map(|(d, p)| (d.ln(), p.ln())).unzip();
    let n = xs.len() as f64;
    if xs.len() < 5 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `int_{lo}^{hi} f(s) ds` by composite Simpson on each inter-state segment.
pub fn reaction_integral(r: &MultistableReaction, lo: f64, hi: f64, step: f64) -> f64 {
    let thetas = r.thetas();
    let mut total = 0.0;
    for k in 1..thetas.len() {
        let (a, b) = (thetas[k - 1].max(lo), thetas[k].min(hi));
        if b <= a {
            continue;
        }
        let n = 2 * ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let mut acc = r.branch(k, a) + r.branch(k, b);
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * r.branch(k, a + i as f64 * h);
        }
        total += acc * h / 3.0;
    }
    total
}

/// Relative defect of `c int (phi')^2 dz = int_{theta_lo}^{theta_hi} f`,
/// normalized by `1 + |c| int (phi')^2`.
pub fn speed_identity_residual(w: &WaveProfile, r: &MultistableReaction) -> f64 {
    let (z, _, p) = w.samples();
    let kinetic: f64 = (0..z.len() - 1).map(|k| 0.5 * (p[k] * p[k] + p[k + 1] * p[k + 1]) * (z[k + 1] - z[k])).sum();
    let source = reaction_integral(r, w.theta_lo(), w.theta_hi(), w.step());
    (w.speed() * kinetic - source).abs() / (1.0 + w.speed().abs() * kinetic)
}

/// Enumerates every increasing chain of stable states from 0 to 1 and keeps
/// the ones whose consecutive waves all exist with nonincreasing speeds
/// (bottom wave fastest). Exactly one chain must survive.
pub fn minimal_decomposition(r: &MultistableReaction, opts: &WaveOptions) -> Result<Terrace, WaveError> {
    let stable = r.stable_states();
    let blocks = stable.len() - 1;
    if blocks > 4 {
        return Err(WaveError::TooManyStates(blocks));
    }
    let mut cache: HashMap<(usize, usize), Option<WaveProfile>> = HashMap::new();
    let mut survivors: Vec<Vec<WaveProfile>> = Vec::new();
    let inner = blocks - 1;
    for mask in 0..(1u32 << inner) {
        let mut chain = vec![0usize];
        chain.extend((1..blocks).filter(|i| mask & (1 << (i - 1)) != 0));
        chain.push(blocks);
        let mut waves = Vec::with_capacity(chain.len() - 1);
        for pair in chain.windows(2) {
            let key = (pair[0], pair[1]);
            if !cache.contains_key(&key) {
                let sol = solve_wave(r, stable[key.0], stable[key.1], opts)?;
                cache.insert(key, sol.wave());
            }
            match &cache[&key] {
                Some(w) => waves.push(w.clone()),
                None => break,
            }
        }
        if waves.len() != chain.len() - 1 {
            continue;
        }
        let ordered = waves.windows(2).all(|p| p[0].speed() >= p[1].speed() - opts.order_tol);
        if ordered {
            survivors.push(waves);
        }
    }
    if survivors.len() != 1 {
        let detail = survivors
            .iter()
            .map(|ws| {
                let plats: Vec<String> = std::iter::once(0.0)
                    .chain(ws.iter().map(|w| w.theta_hi()))
                    .map(|p| format!("{p:.4}"))
                    .collect();
                plats.join("->")
            })
            .collect::<Vec<_>>()
            .join(", ");
        return Err(WaveError::Inconsistent { survivors: survivors.len(), detail });
    }
    let waves = survivors.pop().unwrap();
    let shifts = vec![0.0; waves.len()];
    Ok(Terrace::assemble(waves, shifts, false)?)
}
