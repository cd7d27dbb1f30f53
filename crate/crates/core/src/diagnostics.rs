//! Post-processing of recorded runs: sup-norm fits of waves and terraces,
//! front-speed regression, comoving-frame checks and the comparison harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cauchy::{run, CauchyError, GridState, Kinetics, RunOptions, Snapshot};
use crate::terrace::Terrace;
use crate::wave::WaveProfile;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("need at least {need} samples in the window, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("front position is infinite at t = {t}")]
    InfiniteFront { t: f64 },
    #[error("observation window [{lo}, {hi}] leaves the grid [{x0}, {x1}]")]
    WindowOutsideGrid { lo: f64, hi: f64, x0: f64, x1: f64 },
    #[error("no snapshots recorded")]
    NoSnapshots,
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
}

/// Closed interval of `x` over which distances are measured.
pub type Window = (f64, f64);

/// `max |u - model|` over the nodes of `s` inside `window` (all nodes if `None`).
pub fn sup_distance(s: &Snapshot, window: Option<Window>, model: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = node_range(s, window);
    (lo..hi).map(|i| (s.u[i] - model(s.x(i))).abs()).fold(0.0, f64::max)
}

fn node_range(s: &Snapshot, window: Option<Window>) -> (usize, usize) {
    let n = s.u.len();
    match window {
        None => (0, n),
        Some((a, b)) => {
            let lo = ((a - s.x0) / s.dx).ceil().max(0.0) as usize;
            let hi = (((b - s.x0) / s.dx).floor() + 1.0).clamp(0.0, n as f64) as usize;
            (lo.min(n), hi.max(lo.min(n)))
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Scan `[a, b]` at `points` nodes, then golden-section around the best node
/// down to width `tol`. Returns the minimizer and the minimum.
fn scan_golden(a: f64, b: f64, points: usize, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    if b <= a {
        return (a, f(a));
    }
    let h = (b - a) / (points - 1) as f64;
    let (mut best_x, mut best_v) = (a, f(a));
    for i in 1..points {
        let x = a + i as f64 * h;
        let v = f(x);
        if v < best_v {
            best_x = x;
            best_v = v;
        }
    }
    let (mut lo, mut hi) = ((best_x - h).max(a), (best_x + h).min(b));
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best_v {
            best_x = x;
            best_v = v;
        }
    }
    (best_x, best_v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftFit {
    pub xi: f64,
    pub distance: f64,
    /// Range of shifts that was scanned.
    pub scan: (f64, f64),
}

/// Leftmost position where the snapshot drops below `level`.
fn crossing(s: &Snapshot, level: f64) -> Option<f64> {
    let i = s.u.iter().position(|&v| v < level)?;
    if i == 0 {
        return Some(s.x0);
    }
    let (a, b) = (s.u[i - 1], s.u[i]);
    Some(s.x(i - 1) + s.dx * (a - level) / (a - b))
}

/// Best `xi` for `u(t, x) ~ phi(x - xi - c t)` in the sup norm.
pub fn fit_shift_single(s: &Snapshot, w: &WaveProfile, t: f64) -> ShiftFit {
    fit_shift_window(s, w, t, None)
}

/// [`fit_shift_single`] with distances restricted to `window`.
pub fn fit_shift_window(s: &Snapshot, w: &WaveProfile, t: f64, window: Option<Window>) -> ShiftFit {
    let mid = 0.5 * (w.theta_lo() + w.theta_hi());
    let x_mid = crossing(&restrict(s, window), mid).unwrap_or(0.5 * (s.x0 + s.x_end()));
    let guess = x_mid - w.speed() * t - w.z_at_level(mid);
    let half = w.eta().max(20.0 * s.dx);
    let scan = (guess - half, guess + half);
    let (xi, distance) = scan_golden(scan.0, scan.1, 81, s.dx / 100.0, |xi| {
        sup_distance(s, window, |x| w.eval(x - xi - w.speed() * t))
    });
    ShiftFit { xi, distance, scan }
}

fn restrict(s: &Snapshot, window: Option<Window>) -> Snapshot {
    let (lo, hi) = node_range(s, window);
    Snapshot { t: s.t, x0: s.x(lo), dx: s.dx, u: s.u[lo..hi].to_vec() }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerraceFit {
    pub xi: Vec<f64>,
    pub distance: f64,
    pub sweeps: usize,
    /// False when the sweep limit was hit; `xi` is then the best iterate.
    pub converged: bool,
}

/// Pushes shifts up so that `xi_j >= xi_{j+1} + eta_{j+1}`.
pub fn project_gluing(t: &Terrace, xi: &mut [f64]) {
    let etas = t.etas();
    for j in (0..xi.len().saturating_sub(1)).rev() {
        xi[j] = xi[j].max(xi[j + 1] + etas[j + 1]);
    }
}

pub const MAX_SWEEPS: usize = 100;

/// Coordinate descent on the shift vector of `T`, each coordinate by scan and
/// golden section; with `constrained` the iterates stay glued.
pub fn fit_terrace_shifts(s: &Snapshot, terrace: &Terrace, t: f64, constrained: bool) -> TerraceFit {
    fit_terrace_window(s, terrace, t, constrained, None)
}

pub fn fit_terrace_window(
    s: &Snapshot,
    terrace: &Terrace,
    t: f64,
    constrained: bool,
    window: Option<Window>,
) -> TerraceFit {
    let waves = terrace.waves();
    let n = waves.len();
    let local = restrict(s, window);
    let distance = |xi: &[f64]| sup_distance(s, window, |x| terrace.eval_shifted(xi, t, x));
    let mut xi: Vec<f64> = waves
        .iter()
        .map(|w| {
            let mid = 0.5 * (w.theta_lo() + w.theta_hi());
            let x = crossing(&local, mid).unwrap_or(0.5 * (local.x0 + local.x_end()));
            x - w.speed() * t - w.z_at_level(mid)
        })
        .collect();
    if constrained {
        project_gluing(terrace, &mut xi);
    }
    let etas = terrace.etas();
    let mut best = distance(&xi);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut moved = 0.0_f64;
        for j in 0..n {
            let half = etas[j].max(20.0 * s.dx);
            let (mut a, mut b) = (xi[j] - half, xi[j] + half);
            if constrained {
                if j + 1 < n {
                    a = a.max(xi[j + 1] + etas[j + 1]);
                }
                if j > 0 {
                    b = b.min(xi[j - 1] - etas[j]);
                }
            }
            let mut trial = xi.clone();
            let (x, v) = scan_golden(a, b, 41, s.dx / 100.0, |z| {
                trial[j] = z;
                distance(&trial)
            });
            if v < best {
                moved = moved.max((x - xi[j]).abs());
                xi[j] = x;
                best = v;
            }
        }
        if moved < s.dx / 100.0 {
            converged = true;
            break;
        }
    }
    TerraceFit { xi, distance: best, sweeps, converged }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub speed: f64,
    /// Largest absolute residual of the linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares slope of `x(t)` over samples with `t` in `window`.
pub fn speed_estimate(times: &[f64], xs: &[f64], window: (f64, f64)) -> Result<SpeedEstimate, DiagnosticsError> {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(xs).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(&t, &x)| (t, x)).collect();
    if pts.len() < 10 {
        return Err(DiagnosticsError::TooFewSamples { need: 10, got: pts.len() });
    }
    if let Some(&(t, _)) = pts.iter().find(|(_, x)| !x.is_finite()) {
        return Err(DiagnosticsError::InfiniteFront { t });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let speed = stx / stt;
    let residual = pts.iter().map(|p| (p.1 - mx - speed * (p.0 - mt)).abs()).fold(0.0, f64::max);
    Ok(SpeedEstimate { speed, residual, samples: pts.len() })
}

/// What the solution should look like in a frame moving at speed `c`.
#[derive(Clone, Debug)]
pub enum Expectation {
    Platform(f64),
    Partial(Terrace),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComovingVerdict {
    pub speed: f64,
    pub t: f64,
    pub window: Window,
    pub distance: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the latest snapshot with the expectation on `[c t - L, c t + L]`.
pub fn comoving_check(
    snapshots: &[Snapshot],
    c: f64,
    expectation: &Expectation,
    half_width: f64,
    tol: f64,
) -> Result<ComovingVerdict, DiagnosticsError> {
    let s = snapshots.last().ok_or(DiagnosticsError::NoSnapshots)?;
    let window = (c * s.t - half_width, c * s.t + half_width);
    if window.0 < s.x0 || window.1 > s.x_end() {
        return Err(DiagnosticsError::WindowOutsideGrid { lo: window.0, hi: window.1, x0: s.x0, x1: s.x_end() });
    }
    let distance = match expectation {
        Expectation::Platform(p) => sup_distance(s, Some(window), |_| *p),
        Expectation::Partial(tt) => fit_terrace_window(s, tt, s.t, true, Some(window)).distance,
    };
    Ok(ComovingVerdict { speed: c, t: s.t, window, distance, tol, pass: distance <= tol })
}

/// `D(t_end) <= tol` and `D(t_end) <= D(t_end / 4) / 5`.
pub fn converged(d_quarter: f64, d_end: f64, tol: f64) -> bool {
    d_end <= tol && d_end <= d_quarter / 5.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessReport {
    pub pairs: usize,
    pub seed: u64,
    /// `max(0, u - v)` over all pairs, nodes and recorded times.
    pub worst_violation: f64,
    /// Seed of the pair that produced a positive violation, if any.
    pub offending_seed: Option<u64>,
}

impl HarnessReport {
    pub fn pass(&self) -> bool {
        self.worst_violation <= 0.0
    }
}

/// Random nonincreasing profile in `[0, 1]` on `n` nodes.
pub fn random_monotone(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let knots = rng.gen_range(2..8);
    let mut levels: Vec<f64> = (0..knots).map(|_| rng.gen::<f64>()).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    let mut pos: Vec<f64> = (0..knots).map(|_| rng.gen::<f64>()).collect();
    pos.sort_by(f64::total_cmp);
    (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            let k = pos.partition_point(|&p| p <= x);
            if k == 0 {
                levels[0]
            } else if k == knots {
                levels[knots - 1]
            } else {
                let s = (x - pos[k - 1]) / (pos[k] - pos[k - 1]);
                levels[k - 1] + s * (levels[k] - levels[k - 1])
            }
        })
        .collect()
}

/// Grid and horizon used by [`comparison_harness`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarnessGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub t_end: f64,
    pub records: usize,
}

/// Runs `n_pairs` seeded ordered pairs `u0 <= v0` with the same kinetics and
/// reports the largest `u - v` seen at the recorded times.
pub fn comparison_harness(
    kin: &Kinetics,
    grid: HarnessGrid,
    n_pairs: usize,
    seed: u64,
) -> Result<HarnessReport, DiagnosticsError> {
    let times: Vec<f64> = (1..=grid.records).map(|k| grid.t_end * k as f64 / grid.records as f64).collect();
    let opts = RunOptions {
        snapshot_times: times,
        front_dt: None,
        follow: false,
        platforms: vec![0.0, 1.0],
        tau: 0.1,
        edge_margin: None,
    };
    let mut worst = f64::NEG_INFINITY;
    let mut offending = None;
    for k in 0..n_pairs {
        let pair_seed = seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
        let u0 = random_monotone(&mut rng, grid.n);
        let other = random_monotone(&mut rng, grid.n);
        let v0: Vec<f64> = u0.iter().zip(&other).map(|(a, b)| a.max(*b)).collect();
        let mut u = GridState::from_values(grid.x_min, grid.x_max, u0)?;
        let mut v = GridState::from_values(grid.x_min, grid.x_max, v0)?;
        let ru = run(&mut u, kin, grid.t_end, &opts)?;
        let rv = run(&mut v, kin, grid.t_end, &opts)?;
        for (a, b) in ru.snapshots.iter().zip(&rv.snapshots) {
            let viol = a.u.iter().zip(&b.u).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
            if viol > worst {
                worst = viol;
            }
            if viol > 0.0 && offending.is_none() {
                offending = Some(pair_seed);
            }
        }
    }
    Ok(HarnessReport { pairs: n_pairs, seed, worst_violation: worst.max(0.0), offending_seed: offending })
}
