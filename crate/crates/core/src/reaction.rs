//! Discontinuous multistable reactions.
//!
//! A reaction is stored as an ordered ladder of steady states
//! `0 = theta_0 < theta_1 < ... < theta_2I = 1` and one smooth branch per open
//! interval between consecutive states (plus the two half-lines outside
//! `[0, 1]`). Even-indexed states are stable and carry a jump
//! `f(theta^-) > 0 > f(theta^+)`; odd-indexed states are unstable zeros where
//! the branches must join continuously.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::HermiteSegment;

/// A smooth scalar map used as one branch of a reaction.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Points sampled per branch when checking the sign pattern.
pub const SIGN_SAMPLES: usize = 10_000;

const CONTINUITY_TOL: f64 = 1e-9;
const DERIV_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactionError {
    #[error("malformed steady-state ladder: {0}")]
    Structure(String),
    #[error("u = {u} is a stable state where the reaction jumps; pick a side")]
    JumpPoint { u: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("reaction violates {0}")]
    Hypothesis(Violation),
}

/// Which one-sided value to take at a stable state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    Lower,
    Upper,
}

/// The three structural hypotheses on the reaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Sign pattern between consecutive steady states.
    H1,
    /// Regularity away from the stable states (finite values, continuity at
    /// the unstable zeros).
    H2,
    /// Jump `f(theta^-) > 0 > f(theta^+)` at every stable state.
    H3,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    /// Offending sample point (or steady state).
    pub point: f64,
    pub value: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at u = {}: {} (value {})", self.hypothesis, self.point, self.detail, self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationReport {
    Pass,
    Fail(Violation),
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        matches!(self, ValidationReport::Pass)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            ValidationReport::Pass => None,
            ValidationReport::Fail(v) => Some(v),
        }
    }
}

/// Declarative description of a reaction, mirrored by the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSpec {
    /// Bistable cubic with jumps of size `gamma` at 0 and 1.
    Dcubic { a: f64, gamma: f64 },
    /// DCUBIC blocks `(a_k, gamma_k)` rescaled onto `[cuts[k], cuts[k+1]]`.
    Stacked { blocks: Vec<[f64; 2]>, cuts: Vec<f64> },
    /// Explicit ladder with one polynomial branch per interval
    /// (coefficients in ascending powers of `u`).
    Table { thetas: Vec<f64>, branches: Vec<Vec<f64>> },
}

impl ReactionSpec {
    pub fn build(&self) -> Result<MultistableReaction, ReactionError> {
        match self {
            ReactionSpec::Dcubic { a, gamma } => make_dcubic(*a, *gamma),
            ReactionSpec::Stacked { blocks, cuts } => {
                let blocks: Vec<(f64, f64)> = blocks.iter().map(|b| (b[0], b[1])).collect();
                make_stacked(&blocks, cuts)
            }
            ReactionSpec::Table { thetas, branches } => {
                let fns = branches
                    .iter()
                    .map(|coeffs| {
                        let coeffs = coeffs.clone();
                        Arc::new(move |u: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)) as ScalarFn
                    })
                    .collect();
                let r = MultistableReaction::new(thetas.clone(), fns)?.with_spec(self.clone());
                if let ValidationReport::Fail(v) = r.validate() {
                    return Err(ReactionError::Hypothesis(v));
                }
                Ok(r)
            }
        }
    }
}

/// Discontinuous multistable reaction `f`.
#[derive(Clone)]
pub struct MultistableReaction {
    thetas: Vec<f64>,
    branches: Vec<ScalarFn>,
    spec: Option<ReactionSpec>,
}

impl fmt::Debug for MultistableReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultistableReaction")
            .field("thetas", &self.thetas)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

/// Where a point sits on the steady-state ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// Inside the open interval served by branch `k`.
    Interval(usize),
    /// Exactly on `theta_k`.
    State(usize),
}

impl MultistableReaction {
    /// `thetas` must be `0 = theta_0 < ... < theta_2I = 1` (odd length >= 3) and
    /// `branches` must have one more entry than `thetas`.
    pub fn new(thetas: Vec<f64>, branches: Vec<ScalarFn>) -> Result<Self, ReactionError> {
        if thetas.len() < 3 || thetas.len() % 2 == 0 {
            return Err(ReactionError::Structure(format!(
                "need 2I+1 >= 3 steady states, got {}",
                thetas.len()
            )));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(ReactionError::Structure("non-finite steady state".into()));
        }
        if thetas[0] != 0.0 || thetas[thetas.len() - 1] != 1.0 {
            return Err(ReactionError::Structure("ladder must start at 0 and end at 1".into()));
        }
        if let Some(k) = thetas.windows(2).position(|w| w[0] >= w[1]) {
            return Err(ReactionError::Structure(format!(
                "steady states not strictly increasing at index {}: {} >= {}",
                k + 1,
                thetas[k],
                thetas[k + 1]
            )));
        }
        if branches.len() != thetas.len() + 1 {
            return Err(ReactionError::Structure(format!(
                "expected {} branches, got {}",
                thetas.len() + 1,
                branches.len()
            )));
        }
        Ok(Self { thetas, branches, spec: None })
    }

    pub fn with_spec(mut self, spec: ReactionSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn spec(&self) -> Option<&ReactionSpec> {
        self.spec.as_ref()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Number of stable states above 0 (the `I` of the ladder).
    pub fn num_blocks(&self) -> usize {
        (self.thetas.len() - 1) / 2
    }

    pub fn stable_states(&self) -> Vec<f64> {
        self.thetas.iter().copied().step_by(2).collect()
    }

    pub fn unstable_states(&self) -> Vec<f64> {
        self.thetas.iter().copied().skip(1).step_by(2).collect()
    }

    /// Index into `thetas` when `u` is exactly a stable state.
    pub fn stable_index(&self, u: f64) -> Option<usize> {
        self.thetas.iter().position(|&t| t == u).filter(|k| k % 2 == 0)
    }

    pub fn locate(&self, u: f64) -> Location {
        let k = self.thetas.partition_point(|&t| t < u);
        if k < self.thetas.len() && self.thetas[k] == u {
            Location::State(k)
        } else {
            Location::Interval(k)
        }
    }

    /// Raw value of branch `k` (the branch serving `(theta_{k-1}, theta_k)`).
    #[inline]
    pub fn branch(&self, k: usize, u: f64) -> f64 {
        (self.branches[k])(u)
    }

    /// Central-difference derivative of branch `k`.
    pub fn branch_deriv(&self, k: usize, u: f64) -> f64 {
        (self.branch(k, u + DERIV_STEP) - self.branch(k, u - DERIV_STEP)) / (2.0 * DERIV_STEP)
    }

    /// One-sided limit at `theta_k`.
    pub fn one_sided(&self, k: usize, side: Side) -> f64 {
        match side {
            Side::Right => self.branch(k + 1, self.thetas[k]),
            Side::Left | Side::Auto => self.branch(k, self.thetas[k]),
        }
    }

    /// `(f(theta^-), f(theta^+))` at each stable state, bottom to top.
    pub fn jump_limits(&self) -> Vec<(f64, f64)> {
        (0..self.thetas.len())
            .step_by(2)
            .map(|k| (self.one_sided(k, Side::Left), self.one_sided(k, Side::Right)))
            .collect()
    }

    pub fn eval(&self, u: f64, side: Side) -> Result<f64, ReactionError> {
        match self.locate(u) {
            Location::Interval(k) => Ok(self.branch(k, u)),
            Location::State(k) if k % 2 == 0 && side == Side::Auto => Err(ReactionError::JumpPoint { u }),
            Location::State(k) => Ok(self.one_sided(k, side)),
        }
    }

    /// `min`/`max` of the one-sided limits; equals `f(u)` where `f` is continuous.
    pub fn envelope(&self, u: f64, which: Envelope) -> f64 {
        match self.locate(u) {
            Location::Interval(k) => self.branch(k, u),
            Location::State(k) => {
                let l = self.one_sided(k, Side::Left);
                let r = self.one_sided(k, Side::Right);
                match which {
                    Envelope::Lower => l.min(r),
                    Envelope::Upper => l.max(r),
                }
            }
        }
    }

    /// Value used when the location is already known to be away from the jumps,
    /// or when the caller accepts the left limit at a stable state.
    #[inline]
    pub(crate) fn eval_left(&self, u: f64) -> f64 {
        let k = self.thetas.partition_point(|&t| t < u);
        self.branch(k, u)
    }

    /// Sampled `sup |f|` over `[lo, hi]`, one-sided limits included.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        let n = 20_000;
        let mut m = self
            .jump_limits()
            .iter()
            .fold(0.0_f64, |acc, &(l, r)| acc.max(l.abs()).max(r.abs()));
        for i in 0..=n {
            let u = lo + (hi - lo) * i as f64 / n as f64;
            m = m.max(self.envelope(u, Envelope::Upper).abs());
            m = m.max(self.envelope(u, Envelope::Lower).abs());
        }
        m
    }

    /// Checks (H1)-(H3) by dense sampling.
    pub fn validate(&self) -> ValidationReport {
        let nb = self.branches.len();
        // H1: branch k is positive for even k, negative for odd k.
        for k in 0..nb {
            let (lo, hi) = if k == 0 {
                (self.thetas[0] - 1.0, self.thetas[0])
            } else if k == nb - 1 {
                (self.thetas[k - 1], self.thetas[k - 1] + 1.0)
            } else {
                (self.thetas[k - 1], self.thetas[k])
            };
            let positive = k % 2 == 0;
            for i in 0..SIGN_SAMPLES {
                let u = lo + (hi - lo) * (i as f64 + 0.5) / SIGN_SAMPLES as f64;
                let v = self.branch(k, u);
                if !v.is_finite() {
                    return ValidationReport::Fail(Violation {
                        hypothesis: Hypothesis::H2,
                        point: u,
                        value: v,
                        detail: "non-finite branch value".into(),
                    });
                }
                let ok = if positive { v > 0.0 } else { v < 0.0 };
                if !ok {
                    return ValidationReport::Fail(Violation {
                        hypothesis: Hypothesis::H1,
                        point: u,
                        value: v,
                        detail: format!("expected {} sign on branch {k}", if positive { "positive" } else { "negative" }),
                    });
                }
            }
        }
        // H2: no jump at the unstable zeros.
        for k in (1..self.thetas.len()).step_by(2) {
            let l = self.one_sided(k, Side::Left);
            let r = self.one_sided(k, Side::Right);
            if (l - r).abs() > CONTINUITY_TOL || l.abs() > CONTINUITY_TOL {
                return ValidationReport::Fail(Violation {
                    hypothesis: Hypothesis::H2,
                    point: self.thetas[k],
                    value: l - r,
                    detail: "unstable state must be a continuous zero".into(),
                });
            }
        }
        // H3
        for k in (0..self.thetas.len()).step_by(2) {
            let l = self.one_sided(k, Side::Left);
            let r = self.one_sided(k, Side::Right);
            if !(l > 0.0 && r < 0.0) {
                return ValidationReport::Fail(Violation {
                    hypothesis: Hypothesis::H3,
                    point: self.thetas[k],
                    value: l - r,
                    detail: format!("jump limits ({l}, {r}) must satisfy f(-) > 0 > f(+)"),
                });
            }
        }
        ValidationReport::Pass
    }

    /// Smallest gap between consecutive steady states.
    pub fn min_gap(&self) -> f64 {
        self.thetas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn regularize(&self, epsilon: f64) -> Result<RegularizedReaction, ReactionError> {
        RegularizedReaction::new(self.clone(), epsilon)
    }
}

/// Interior branch of the bistable cubic family.
fn dcubic_interior(a: f64, gamma: f64, u: f64) -> f64 {
    u * (1.0 - u) * (u - a) + gamma * (2.0 * u - 1.0)
}

/// Unique sign change of `g` on `(lo, hi)` located by sampling, then refined by
/// bisection to machine precision.
fn single_root(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64, usize> {
    let n = SIGN_SAMPLES;
    let mut cells = Vec::new();
    // zeros are skipped so that roots sitting on the end points do not count
    let mut last: Option<(f64, f64)> = None;
    for i in 1..n {
        let u = lo + (hi - lo) * i as f64 / n as f64;
        let v = g(u);
        if v == 0.0 {
            continue;
        }
        if let Some((pu, pv)) = last {
            if (pv < 0.0) != (v < 0.0) {
                cells.push((pu, u));
            }
        }
        last = Some((u, v));
    }
    if cells.len() != 1 {
        return Err(cells.len());
    }
    let (mut a, mut b) = cells[0];
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// DCUBIC(a, gamma): `gamma - u` below 0, `u(1-u)(u-a) + gamma(2u-1)` on
/// `(0, 1)`, `(1-u) - gamma` above 1.
///
/// `gamma = 0` is accepted so that the jump-free limit can be built and
/// rejected by [`MultistableReaction::validate`].
pub fn make_dcubic(a: f64, gamma: f64) -> Result<MultistableReaction, ReactionError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(ReactionError::Precondition(format!("a = {a} must lie in (0, 1)")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(ReactionError::Precondition(format!("gamma = {gamma} must be >= 0")));
    }
    let theta1 = single_root(|u| dcubic_interior(a, gamma, u), 0.0, 1.0).map_err(|count| {
        ReactionError::Precondition(format!("interior branch has {count} roots in (0,1), need exactly 1"))
    })?;
    // Small-gamma regime: the smooth part stays decreasing at both stable states.
    if 2.0 * gamma >= a.min(1.0 - a) {
        return Err(ReactionError::Precondition(format!(
            "gamma = {gamma} too large: need 2*gamma < min(a, 1-a) = {}",
            a.min(1.0 - a)
        )));
    }
    let branches: Vec<ScalarFn> = vec![
        Arc::new(move |u| gamma - u),
        Arc::new(move |u| dcubic_interior(a, gamma, u)),
        Arc::new(move |u| dcubic_interior(a, gamma, u)),
        Arc::new(move |u| (1.0 - u) - gamma),
    ];
    Ok(MultistableReaction::new(vec![0.0, theta1, 1.0], branches)?.with_spec(ReactionSpec::Dcubic { a, gamma }))
}

/// Stacks DCUBIC blocks: block `k` is rescaled onto `[cuts[k], cuts[k+1]]` as
/// `f(u) = L g_k((u - cuts[k]) / L)` with `L = cuts[k+1] - cuts[k]`, which
/// keeps each block's wave speed unchanged.
pub fn make_stacked(blocks: &[(f64, f64)], cuts: &[f64]) -> Result<MultistableReaction, ReactionError> {
    if blocks.is_empty() {
        return Err(ReactionError::Structure("no blocks".into()));
    }
    if cuts.len() != blocks.len() + 1 {
        return Err(ReactionError::Structure(format!(
            "{} blocks need {} cut points, got {}",
            blocks.len(),
            blocks.len() + 1,
            cuts.len()
        )));
    }
    if cuts[0] != 0.0 || cuts[cuts.len() - 1] != 1.0 || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ReactionError::Structure("cut points must increase strictly from 0 to 1".into()));
    }
    let mut thetas = Vec::with_capacity(2 * blocks.len() + 1);
    let mut branches: Vec<ScalarFn> = Vec::with_capacity(2 * blocks.len() + 2);
    for (k, &(a, gamma)) in blocks.iter().enumerate() {
        let block = make_dcubic(a, gamma)?;
        let (p, len) = (cuts[k], cuts[k + 1] - cuts[k]);
        if k == 0 {
            branches.push(Arc::new(move |u| len * (gamma - (u - p) / len)));
        }
        thetas.push(p);
        thetas.push(p + len * block.thetas()[1]);
        let interior: ScalarFn = Arc::new(move |u| len * dcubic_interior(a, gamma, (u - p) / len));
        branches.push(interior.clone());
        branches.push(interior);
        if k == blocks.len() - 1 {
            branches.push(Arc::new(move |u| len * ((1.0 - (u - p) / len) - gamma)));
        }
    }
    thetas.push(1.0);
    let spec = ReactionSpec::Stacked { blocks: blocks.iter().map(|&(a, g)| [a, g]).collect(), cuts: cuts.to_vec() };
    let r = MultistableReaction::new(thetas, branches)?.with_spec(spec);
    match r.validate() {
        ValidationReport::Pass => Ok(r),
        ValidationReport::Fail(v) => Err(ReactionError::Hypothesis(v)),
    }
}

/// Smooth approximation `f^eps` of a discontinuous reaction.
///
/// On each collar `[theta_2i, theta_2i + eps]` the jump is replaced by a
/// monotone cubic Hermite bridge from `f(theta_2i^-)` down to
/// `f(theta_2i + eps)`. Above 1 the bridge is split so that `f^eps(1 + delta) = 0`
/// with `delta = eps / 2`. Everywhere else `f^eps = f`.
#[derive(Clone, Debug)]
pub struct RegularizedReaction {
    base: MultistableReaction,
    epsilon: f64,
    delta: f64,
    collars: Vec<Collar>,
}

#[derive(Clone, Debug)]
struct Collar {
    start: f64,
    end: f64,
    pieces: Vec<HermiteSegment>,
}

impl Collar {
    fn eval(&self, u: f64) -> f64 {
        let piece = self.pieces.iter().find(|p| u <= p.x1).unwrap_or(&self.pieces[self.pieces.len() - 1]);
        piece.eval(u)
    }
}

impl RegularizedReaction {
    pub fn new(base: MultistableReaction, epsilon: f64) -> Result<Self, ReactionError> {
        let eps0 = 0.5 * base.min_gap();
        if !(epsilon > 0.0 && epsilon < eps0) {
            return Err(ReactionError::Precondition(format!(
                "epsilon = {epsilon} must lie in (0, {eps0})"
            )));
        }
        let delta = 0.5 * epsilon;
        let top = base.thetas.len() - 1;
        let mut collars = Vec::new();
        for k in (0..base.thetas.len()).step_by(2) {
            let th = base.thetas[k];
            let y0 = base.one_sided(k, Side::Left);
            let m0 = base.branch_deriv(k, th).min(0.0);
            let end = th + epsilon;
            let y1 = base.branch(k + 1, end);
            let m1 = base.branch_deriv(k + 1, end).min(0.0);
            let pieces = if k == top {
                let mid = th + delta;
                let s_left = (0.0 - y0) / delta;
                let s_right = (y1 - 0.0) / (epsilon - delta);
                let m_mid = 0.5 * (s_left + s_right);
                vec![
                    HermiteSegment::monotone(th, mid, y0, 0.0, m0, m_mid),
                    HermiteSegment::monotone(mid, end, 0.0, y1, m_mid, m1),
                ]
            } else {
                vec![HermiteSegment::monotone(th, end, y0, y1, m0, m1)]
            };
            collars.push(Collar { start: th, end, pieces });
        }
        Ok(Self { base, epsilon, delta, collars })
    }

    pub fn base(&self) -> &MultistableReaction {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Collar intervals `[theta_2i, theta_2i + eps]`.
    pub fn collars(&self) -> Vec<(f64, f64)> {
        self.collars.iter().map(|c| (c.start, c.end)).collect()
    }

    pub fn in_collar(&self, u: f64) -> bool {
        self.collars.iter().any(|c| u >= c.start && u <= c.end)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        for c in &self.collars {
            if u < c.start {
                break;
            }
            if u <= c.end {
                return c.eval(u);
            }
        }
        self.base.eval_left(u)
    }

    /// Sampled Lipschitz bound over `[lo, hi]`.
    pub fn lipschitz(&self, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mut prev = self.eval(lo);
        let mut l = 0.0_f64;
        for i in 1..=n {
            let v = self.eval(lo + h * i as f64);
            l = l.max(((v - prev) / h).abs());
            prev = v;
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dcubic() -> MultistableReaction {
        make_dcubic(0.25, 0.05).unwrap()
    }

    #[test]
    fn dcubic_validates() {
        assert_eq!(dcubic().validate(), ValidationReport::Pass);
    }

    #[test]
    fn zero_jump_fails_h3_at_zero() {
        let r = make_dcubic(0.25, 0.0).unwrap();
        let v = r.validate();
        let v = v.violation().expect("must fail");
        assert_eq!(v.hypothesis, Hypothesis::H3);
        assert_eq!(v.point, 0.0);
    }

    #[test]
    fn unordered_thetas_structural_error() {
        let zero: ScalarFn = Arc::new(|_| 0.0);
        let err = MultistableReaction::new(vec![0.0, 0.3, 0.2, 0.6, 1.0], vec![zero; 6]).unwrap_err();
        assert!(matches!(err, ReactionError::Structure(_)));
    }

    #[test]
    fn eval_one_sided_limits() {
        let r = dcubic();
        assert!((r.eval(0.0, Side::Right).unwrap() + 0.05).abs() < 1e-15);
        assert!((r.eval(1.0, Side::Left).unwrap() - 0.05).abs() < 1e-15);
        assert!((r.eval(0.25, Side::Auto).unwrap() + 0.025).abs() < 1e-15);
        assert_eq!(r.eval(0.0, Side::Auto), Err(ReactionError::JumpPoint { u: 0.0 }));
        assert_eq!(r.eval(1.0, Side::Auto), Err(ReactionError::JumpPoint { u: 1.0 }));
    }

    #[test]
    fn envelopes() {
        let r = dcubic();
        assert!((r.envelope(0.0, Envelope::Upper) - 0.05).abs() < 1e-15);
        assert!((r.envelope(1.0, Envelope::Lower) + 0.05).abs() < 1e-15);
        let mid = r.eval(0.5, Side::Auto).unwrap();
        assert_eq!(r.envelope(0.5, Envelope::Lower), mid);
        assert_eq!(r.envelope(0.5, Envelope::Upper), mid);
    }

    #[test]
    fn symmetric_dcubic_is_odd() {
        let r = make_dcubic(0.5, 0.05).unwrap();
        for k in 1..100 {
            let v = 0.5 * k as f64 / 100.0;
            let a = r.eval(0.5 + v, Side::Auto).unwrap();
            let b = r.eval(0.5 - v, Side::Auto).unwrap();
            assert!((a + b).abs() < 1e-15);
            let closed = v * (0.25 - v * v) + 2.0 * 0.05 * v;
            assert!((a - closed).abs() < 1e-15);
        }
        assert!((r.thetas()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta1_matches_independent_bisection() {
        let g = |u: f64| u * (1.0 - u) * (u - 0.25) + 0.05 * (2.0 * u - 1.0);
        // plain bisection on [0, 0.5], where g(0) < 0 < g(0.5)
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if g(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let t1 = dcubic().thetas()[1];
        assert!(t1 > 0.0 && t1 < 0.5);
        assert!((t1 - lo).abs() < 1e-14);
    }

    #[test]
    fn large_gamma_rejected() {
        assert!(matches!(make_dcubic(0.25, 10.0), Err(ReactionError::Precondition(_))));
    }

    #[test]
    fn stacked_two_symmetric_blocks() {
        let r = make_stacked(&[(0.5, 0.05), (0.5, 0.05)], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(r.num_blocks(), 2);
        assert_eq!(r.stable_states(), vec![0.0, 0.5, 1.0]);
        assert!(r.validate().is_pass());
    }

    #[test]
    fn single_block_matches_dcubic() {
        let s = make_stacked(&[(0.25, 0.05)], &[0.0, 1.0]).unwrap();
        let d = dcubic();
        assert_eq!(s.thetas(), d.thetas());
        for k in 0..=300 {
            let u = -0.5 + 2.0 * k as f64 / 300.0;
            let a = s.envelope(u, Envelope::Lower);
            let b = d.envelope(u, Envelope::Lower);
            assert!((a - b).abs() < 1e-15, "u = {u}");
        }
    }

    #[test]
    fn stacked_zero_jump_block_fails_h3() {
        let err = make_stacked(&[(0.5, 0.05), (0.5, 0.0)], &[0.0, 0.5, 1.0]).unwrap_err();
        match err {
            ReactionError::Hypothesis(v) => {
                assert_eq!(v.hypothesis, Hypothesis::H3);
                assert_eq!(v.point, 0.5);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn table_spec_round_trip() {
        // DCUBIC(0.5, 0.05) as polynomials: gamma - u | -u^3 + 1.5u^2 - 0.4u - 0.05 | 1 - gamma - u
        let spec = ReactionSpec::Table {
            thetas: vec![0.0, 0.5, 1.0],
            branches: vec![
                vec![0.05, -1.0],
                vec![-0.05, -0.4, 1.5, -1.0],
                vec![-0.05, -0.4, 1.5, -1.0],
                vec![0.95, -1.0],
            ],
        };
        let r = spec.build().unwrap();
        let d = make_dcubic(0.5, 0.05).unwrap();
        for k in 1..100 {
            let u = k as f64 / 100.0;
            if u == 0.5 {
                continue;
            }
            let a = r.eval(u, Side::Auto).unwrap();
            let b = d.eval(u, Side::Auto).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn regularized_conditions() {
        let r = dcubic();
        let eps = 1e-3;
        let fe = r.regularize(eps).unwrap();
        assert_eq!(fe.eval(0.0), 0.05);
        assert_eq!(fe.eval(1.0), 0.05);
        assert!(fe.eval(1.0 + eps / 2.0).abs() < 1e-15);
        assert_eq!(fe.eval(0.5), r.eval(0.5, Side::Auto).unwrap());
        let bound = r.sup_abs(-1.0, 2.0) + 1.0;
        for k in 0..=10_000 {
            let u = -0.5 + 2.0 * k as f64 / 10_000.0;
            assert!(fe.eval(u).abs() <= bound);
        }
    }

    #[test]
    fn regularize_rejects_wide_collar() {
        let r = dcubic();
        let eps0 = 0.5 * r.min_gap();
        assert!(matches!(r.regularize(eps0), Err(ReactionError::Precondition(_))));
        assert!(matches!(r.regularize(-1.0), Err(ReactionError::Precondition(_))));
    }

    #[test]
    fn regularized_dominates_inside_collars() {
        // the bridge sits above f on the collar, which is what makes f^eps decrease in eps
        let r = make_stacked(&[(0.3, 0.05), (0.7, 0.04)], &[0.0, 0.4, 1.0]).unwrap();
        let fe = r.regularize(0.01).unwrap();
        for (lo, hi) in fe.collars() {
            for k in 1..1000 {
                let u = lo + (hi - lo) * k as f64 / 1000.0;
                assert!(fe.eval(u) >= r.envelope(u, Envelope::Upper) - 1e-15);
            }
        }
    }
}
