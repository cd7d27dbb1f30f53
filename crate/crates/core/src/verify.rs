//! The acceptance suite: nine criteria, each a scenario pipeline with a
//! structured verdict.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cauchy::{
    run, sub_solution_amplitude, sub_solution_floor, sub_solution_rate, CauchyError, GridState, InitialData, Kinetics,
    RunOptions, RunOutput, Variant,
};
use crate::diagnostics::{
    comoving_check, comparison_harness, fit_shift_single, fit_shift_window, fit_terrace_shifts, speed_estimate,
    DiagnosticsError, Expectation, HarnessGrid,
};
use crate::output::{config_hash, write_csv, write_json};
use crate::reaction::{make_dcubic, make_stacked, MultistableReaction, ReactionError};
use crate::terrace::TerraceError;
use crate::wave::{
    minimal_decomposition, solve_wave, speed_identity_residual, reaction_integral, WaveError, WaveOptions,
    WaveProfile, WaveSolution,
};

pub const ALL_CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown criterion {0}; valid ids are 1..=9")]
    UnknownCriterion(u8),
    #[error("no wave between {lo} and {hi}")]
    NoWave { lo: f64, hi: f64 },
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Terrace(#[from] TerraceError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

/// Pass thresholds. Every field can be overridden from the verify config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub symmetric_wave_speed: f64,
    pub symmetric_front_speed: f64,
    pub speed_identity: f64,
    pub eta_change: f64,
    pub arrival_exponent: f64,
    pub single_distance: f64,
    pub decay_factor: f64,
    pub front_speed_rel: f64,
    pub platform: f64,
    pub front_fit: f64,
    pub terrace_fit: f64,
    pub comparison: f64,
    pub envelope_order: f64,
    pub floor_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetric_wave_speed: 1e-6,
            symmetric_front_speed: 0.02,
            speed_identity: 1e-4,
            eta_change: 1e-3,
            arrival_exponent: 0.05,
            single_distance: 0.01,
            decay_factor: 5.0,
            front_speed_rel: 0.02,
            platform: 0.02,
            front_fit: 0.02,
            terrace_fit: 0.02,
            comparison: 0.0,
            envelope_order: 0.0,
            floor_margin: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub criteria: Vec<u8>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { criteria: ALL_CRITERIA.to_vec(), seed: 20_240_601, tolerances: Tolerances::default() }
    }
}

impl VerifyConfig {
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// One check inside a criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `"<="`, `"<"` or `">="`.
    pub relation: &'static str,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn le(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, relation: "<=", tolerance, pass: measured <= tolerance }
    }

    fn lt(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, relation: "<", tolerance, pass: measured < tolerance }
    }

    fn ge(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, relation: ">=", tolerance, pass: measured >= tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Measurements reported without a pass threshold.
    pub info: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionResult {
    fn new(id: u8) -> Self {
        Self { id, title: title(id), pass: false, checks: Vec::new(), info: BTreeMap::new(), notes: Vec::new(), seconds: 0.0 }
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn info(&mut self, key: impl Into<String>, v: f64) {
        self.info.insert(key.into(), v);
    }

    /// `PASS`/`FAIL` line; a failing line lists only the failing checks.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{verdict} criterion {}: {}", self.id, self.title);
        let shown: Vec<String> = self
            .checks
            .iter()
            .filter(|c| c.pass == self.pass)
            .map(|c| format!("{} = {:.4e} {} {:.4e}", c.name, c.measured, c.relation, c.tolerance))
            .collect();
        if !shown.is_empty() {
            s.push_str(" [");
            s.push_str(&shown.join("; "));
            s.push(']');
        }
        for n in &self.notes {
            s.push_str(&format!(" ({n})"));
        }
        s
    }
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "symmetric bistable speed is zero",
        2 => "speed identity",
        3 => "compact support and square-root arrival",
        4 => "convergence to a single wave",
        5 => "convergence to a terrace",
        6 => "discrete comparison principle",
        7 => "envelope bracketing",
        8 => "sub-solution floor and finite front",
        9 => "unique minimal decomposition",
        _ => "unknown",
    }
}

/// CSV written next to the verdict.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub criteria: Vec<CriterionResult>,
}

/// Runs the selected criteria in order. With `out`, writes `verdict.json`
/// plus per-criterion CSV files under `out/criterion_<id>/`.
pub fn run_suite(
    cfg: &VerifyConfig,
    out: Option<&Path>,
    mut progress: impl FnMut(&CriterionResult),
) -> Result<SuiteReport, VerifyError> {
    if let Some(&bad) = cfg.criteria.iter().find(|c| !ALL_CRITERIA.contains(c)) {
        return Err(VerifyError::UnknownCriterion(bad));
    }
    let hash = cfg.hash();
    let mut results = Vec::new();
    for &id in &cfg.criteria {
        let start = std::time::Instant::now();
        let mut res = CriterionResult::new(id);
        let mut artifacts = Vec::new();
        if let Err(e) = run_criterion(id, cfg, &mut res, &mut artifacts) {
            res.notes.push(format!("error: {e}"));
            res.checks.push(Check { name: "completed".into(), measured: 0.0, relation: ">=", tolerance: 1.0, pass: false });
        }
        res.pass = !res.checks.is_empty() && res.checks.iter().all(|c| c.pass);
        res.seconds = start.elapsed().as_secs_f64();
        if let Some(dir) = out {
            let sub = dir.join(format!("criterion_{id}"));
            std::fs::create_dir_all(&sub)?;
            for a in &artifacts {
                write_csv(&sub.join(&a.file), &hash, &a.header, a.rows.clone())?;
            }
            write_json(&sub.join("result.json"), &hash, &res)?;
        }
        progress(&res);
        results.push(res);
    }
    let report = SuiteReport {
        pass: results.iter().all(|r| r.pass),
        seed: cfg.seed,
        tolerances: cfg.tolerances.clone(),
        criteria: results,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("verdict.json"), &hash, &report)?;
    }
    Ok(report)
}

fn run_criterion(
    id: u8,
    cfg: &VerifyConfig,
    res: &mut CriterionResult,
    artifacts: &mut Vec<Artifact>,
) -> Result<(), VerifyError> {
    let tol = &cfg.tolerances;
    match id {
        1 => symmetric_speed(tol, res),
        2 | 3 => wave_quality(id, tol, res),
        4 => single_wave(tol, res, artifacts),
        5 => terrace_convergence(tol, res, artifacts),
        6 => comparison(cfg, res),
        7 => envelopes(tol, res),
        8 => sub_solution(tol, res),
        9 => decompositions(cfg.seed, res),
        other => Err(VerifyError::UnknownCriterion(other)),
    }
}

fn wave(r: &MultistableReaction, lo: f64, hi: f64, opts: &WaveOptions) -> Result<WaveProfile, VerifyError> {
    match solve_wave(r, lo, hi, opts)? {
        WaveSolution::Found(w) => Ok(w),
        WaveSolution::NoWave(_) => Err(VerifyError::NoWave { lo, hi }),
    }
}

/// Grid, data and recording plan of one simulation.
struct Scenario {
    x_min: f64,
    x_max: f64,
    n: usize,
    variant: Option<Variant>,
    init: InitialData,
    t_end: f64,
    snapshots: Vec<f64>,
    front_dt: Option<f64>,
    follow: bool,
}

impl Scenario {
    fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    fn epsilon(&self) -> f64 {
        match self.variant {
            Some(Variant::Regularized { epsilon }) => epsilon,
            _ => self.dx(),
        }
    }

    fn run(&self, r: &MultistableReaction) -> Result<RunOutput, VerifyError> {
        let variant = self.variant.unwrap_or(Variant::Regularized { epsilon: self.dx() });
        let kin = Kinetics::new(r, variant)?;
        let mut s = GridState::init(self.x_min, self.x_max, self.n, |x| self.init.eval(x), self.init.limits(), Some(r))?;
        let platforms = r.stable_states();
        let opts = RunOptions {
            snapshot_times: self.snapshots.clone(),
            front_dt: self.front_dt,
            follow: self.follow,
            tau: crate::cauchy::default_tau(&platforms),
            platforms,
            edge_margin: None,
        };
        Ok(run(&mut s, &kin, self.t_end, &opts)?)
    }
}

/// Criterion 1.
fn symmetric_speed(tol: &Tolerances, res: &mut CriterionResult) -> Result<(), VerifyError> {
    let r = make_dcubic(0.5, 0.05)?;
    let w = wave(&r, 0.0, 1.0, &WaveOptions::default())?;
    res.check(Check::le("|c| phase plane", w.speed().abs(), tol.symmetric_wave_speed));
    let sc = Scenario {
        x_min: -10.0,
        x_max: 10.0,
        n: 2048,
        variant: None,
        init: InitialData::Tanh { center: 0.0, width: 1.0 },
        t_end: 50.0,
        snapshots: vec![50.0],
        front_dt: Some(0.5),
        follow: true,
    };
    let out = sc.run(&r)?;
    let est = speed_estimate(&out.fronts.times(), &out.fronts.x0_series(), (25.0, 50.0))?;
    res.check(Check::le("|c| fronts", est.speed.abs(), tol.symmetric_front_speed));
    res.info("front_residual", est.residual);
    res.info("epsilon", sc.epsilon());
    Ok(())
}

/// Reference waves: bistable cubics at several thresholds and both layers of
/// an ordered tristable stack.
fn reference_waves(opts: &WaveOptions) -> Result<Vec<(String, MultistableReaction, WaveProfile)>, VerifyError> {
    let mut out = Vec::new();
    for a in [0.25, 0.5, 0.2, 0.8] {
        let r = make_dcubic(a, 0.05)?;
        let w = wave(&r, 0.0, 1.0, opts)?;
        out.push((format!("dcubic({a})"), r, w));
    }
    let r = make_stacked(&[(0.2, 0.05), (0.8, 0.05)], &[0.0, 0.5, 1.0])?;
    for (lo, hi) in [(0.0, 0.5), (0.5, 1.0)] {
        let w = wave(&r, lo, hi, opts)?;
        out.push((format!("stacked[{lo},{hi}]"), r.clone(), w));
    }
    Ok(out)
}

/// Relative defect of the speed identity; scaled by the larger side, or by
/// one when both sides vanish.
fn identity_defect(w: &WaveProfile, r: &MultistableReaction) -> f64 {
    let (z, _, p) = w.samples();
    let kinetic: f64 = (0..z.len() - 1).map(|k| 0.5 * (p[k] * p[k] + p[k + 1] * p[k + 1]) * (z[k + 1] - z[k])).sum();
    let source = reaction_integral(r, w.theta_lo(), w.theta_hi(), w.step());
    let scale = (w.speed() * kinetic).abs().max(source.abs());
    if scale > 1e-9 {
        (w.speed() * kinetic - source).abs() / scale
    } else {
        speed_identity_residual(w, r)
    }
}

/// Criteria 2 and 3.
fn wave_quality(id: u8, tol: &Tolerances, res: &mut CriterionResult) -> Result<(), VerifyError> {
    let opts = WaveOptions::default();
    let fine = WaveOptions { dphi: opts.dphi / 2.0, ..opts };
    let coarse = reference_waves(&opts)?;
    let halved = reference_waves(&fine)?;
    for ((name, r, w), (_, _, w2)) in coarse.iter().zip(&halved) {
        if id == 2 {
            res.check(Check::le(format!("{name} residual"), identity_defect(w, r), tol.speed_identity));
            res.check(Check::le(format!("{name} residual at dphi/2"), identity_defect(w2, r), tol.speed_identity));
        } else {
            let change = (w.eta() - w2.eta()).abs() / w2.eta();
            res.check(Check::le(format!("{name} eta change"), change, tol.eta_change));
            let e = w.arrival_exponent();
            res.check(Check::le(format!("{name} |exponent - 1/2|"), (e - 0.5).abs(), tol.arrival_exponent));
            res.info(format!("{name} eta"), w.eta());
        }
        res.info(format!("{name} c"), w.speed());
    }
    Ok(())
}

/// Criterion 4.
fn single_wave(tol: &Tolerances, res: &mut CriterionResult, artifacts: &mut Vec<Artifact>) -> Result<(), VerifyError> {
    let r = make_dcubic(0.25, 0.05)?;
    let w = wave(&r, 0.0, 1.0, &WaveOptions::default())?;
    let t_end = 80.0;
    let sc = Scenario {
        x_min: -8.0,
        x_max: 8.0,
        n: 2048,
        variant: None,
        init: InitialData::Tanh { center: 0.0, width: 1.0 },
        t_end,
        snapshots: (1..=16).map(|k| 5.0 * k as f64).collect(),
        front_dt: Some(0.5),
        follow: true,
    };
    let out = sc.run(&r)?;
    let fits: Vec<(f64, f64, f64)> = out
        .snapshots
        .iter()
        .map(|s| {
            let f = fit_shift_single(s, &w, s.t);
            (s.t, f.distance, f.xi)
        })
        .collect();
    let at = |t: f64| fits.iter().find(|f| f.0 == t).map_or(f64::NAN, |f| f.1);
    let (d_quarter, d_end) = (at(t_end / 4.0), at(t_end));
    res.check(Check::le("D(t_end)", d_end, tol.single_distance));
    res.check(Check::ge("D(t_end/4) / D(t_end)", d_quarter / d_end, tol.decay_factor));
    let est = speed_estimate(&out.fronts.times(), &out.fronts.x0_series(), (t_end / 2.0, t_end))?;
    res.check(Check::le("|c_fronts / c - 1|", (est.speed / w.speed() - 1.0).abs(), tol.front_speed_rel));
    res.info("c", w.speed());
    res.info("c_fronts", est.speed);
    res.info("epsilon", sc.epsilon());
    res.info("trailing_half_rise", trailing_rise(&fits, t_end));
    artifacts.push(Artifact {
        file: "distance.csv".into(),
        header: vec!["t", "D", "xi"],
        rows: fits.iter().map(|f| vec![f.0, f.1, f.2]).collect(),
    });
    Ok(())
}

/// Largest relative increase of `D` between consecutive samples over the
/// trailing half.
fn trailing_rise(fits: &[(f64, f64, f64)], t_end: f64) -> f64 {
    let tail: Vec<f64> = fits.iter().filter(|f| f.0 >= t_end / 2.0).map(|f| f.1).collect();
    tail.windows(2).map(|p| (p[1] - p[0]) / p[0]).fold(0.0, f64::max)
}

/// Criterion 5.
fn terrace_convergence(tol: &Tolerances, res: &mut CriterionResult, artifacts: &mut Vec<Artifact>) -> Result<(), VerifyError> {
    // (a) Ordered speeds: the fronts separate and the platform opens up.
    let r = make_stacked(&[(0.2, 0.05), (0.8, 0.05)], &[0.0, 0.5, 1.0])?;
    let tt = minimal_decomposition(&r, &WaveOptions::default())?;
    let speeds = tt.speeds();
    let t_end = 180.0;
    let sc = Scenario {
        x_min: -80.0,
        x_max: 80.0,
        n: 4096,
        variant: Some(Variant::Regularized { epsilon: 0.01 }),
        init: InitialData::Tanh { center: 0.0, width: 1.0 },
        t_end,
        snapshots: vec![t_end / 4.0, t_end / 2.0, t_end],
        front_dt: Some(1.0),
        follow: false,
    };
    let out = sc.run(&r)?;
    let c_mid = 0.5 * (speeds[0] + speeds[1]);
    let half = 5.0 * tt.etas().iter().cloned().fold(0.0, f64::max);
    let v = comoving_check(&out.snapshots, c_mid, &Expectation::Platform(tt.platforms()[1]), half, tol.platform)?;
    res.check(Check::le("(a) platform distance", v.distance, tol.platform));
    let last = out.snapshots.last().ok_or(DiagnosticsError::NoSnapshots)?;
    let times = out.fronts.times();
    for (j, w) in tt.waves().iter().enumerate() {
        let mid = 0.5 * (w.theta_lo() + w.theta_hi());
        let x_mid = last.u.iter().position(|&u| u < mid).map_or(0.0, |i| last.x(i));
        let start = x_mid - w.z_at_level(mid);
        let window = (start - 0.5 * w.eta(), start + 1.5 * w.eta());
        let f = fit_shift_window(last, w, last.t, Some(window));
        res.check(Check::le(format!("(a) front {} fit", j + 1), f.distance, tol.front_fit));
        let est = speed_estimate(&times, &out.fronts.band_series(j + 1, true), (t_end / 2.0, t_end))?;
        res.info(format!("(a) c{} phase plane", j + 1), w.speed());
        res.info(format!("(a) c{} fronts", j + 1), est.speed);
    }
    res.info("(a) epsilon", sc.epsilon());
    res.info("(a) dx", sc.dx());

    // (b) Equal zero speeds: a standing two-step terrace.
    let r = make_stacked(&[(0.5, 0.05), (0.5, 0.05)], &[0.0, 0.5, 1.0])?;
    let tt = minimal_decomposition(&r, &WaveOptions::default())?;
    let classes = tt.speed_classes();
    let phi_c = tt.partial_by_speed(classes[0])?;
    let t_end = 40.0;
    let sc = Scenario {
        x_min: -30.0,
        x_max: 30.0,
        n: 2048,
        variant: None,
        init: InitialData::Tanh { center: 0.0, width: 10.0 },
        t_end,
        snapshots: (1..=8).map(|k| 5.0 * k as f64).collect(),
        front_dt: None,
        follow: false,
    };
    let out = sc.run(&r)?;
    let mut rows = Vec::new();
    for s in &out.snapshots {
        let f = fit_terrace_shifts(s, &phi_c, s.t, true);
        let mut row = vec![s.t, f.distance];
        row.extend(&f.xi);
        rows.push(row);
    }
    let d_end = rows.last().map_or(f64::NAN, |r| r[1]);
    res.check(Check::le("(b) constrained terrace fit D(t_end)", d_end, tol.terrace_fit));
    res.info("(b) speed classes", classes.len() as f64);
    res.info("(b) epsilon", sc.epsilon());
    artifacts.push(Artifact { file: "terrace_distance.csv".into(), header: vec!["t", "D", "xi_1", "xi_2"], rows });
    Ok(())
}

/// Criterion 6.
fn comparison(cfg: &VerifyConfig, res: &mut CriterionResult) -> Result<(), VerifyError> {
    let r = make_dcubic(0.25, 0.05)?;
    let grid = HarnessGrid { x_min: -10.0, x_max: 10.0, n: 201, t_end: 2.0, records: 10 };
    let dx = (grid.x_max - grid.x_min) / (grid.n - 1) as f64;
    let kin = Kinetics::new(&r, Variant::Regularized { epsilon: dx })?;
    let rep = comparison_harness(&kin, grid, 100, cfg.seed)?;
    res.check(Check::le("worst violation", rep.worst_violation, cfg.tolerances.comparison));
    if let Some(s) = rep.offending_seed {
        res.notes.push(format!("offending pair seed {s}"));
    }
    for v in [Variant::LowerEnvelope, Variant::UpperEnvelope] {
        let kin = Kinetics::new(&r, v)?;
        let rep = comparison_harness(&kin, grid, 100, cfg.seed)?;
        res.check(Check::le(format!("worst violation {}", v.name()), rep.worst_violation, cfg.tolerances.comparison));
    }
    Ok(())
}

/// Criterion 7.
fn envelopes(tol: &Tolerances, res: &mut CriterionResult) -> Result<(), VerifyError> {
    let r = make_dcubic(0.25, 0.05)?;
    let t_end = 10.0;
    let mut widths = Vec::new();
    for n in [512, 1024] {
        let lower = envelope_scenario(n, Some(Variant::LowerEnvelope)).run(&r)?;
        let upper = envelope_scenario(n, Some(Variant::UpperEnvelope)).run(&r)?;
        let base = envelope_scenario(n, None);
        let reg = base.run(&r)?;
        let eps = base.epsilon();
        let (mut order, mut width, mut sandwich) = (f64::NEG_INFINITY, 0.0_f64, f64::NEG_INFINITY);
        for ((lo, up), rg) in lower.snapshots.iter().zip(&upper.snapshots).zip(&reg.snapshots) {
            for i in 0..lo.u.len() {
                order = order.max(lo.u[i] - up.u[i]);
                sandwich = sandwich.max(lo.u[i] - rg.u[i] - eps * lo.t).max(rg.u[i] - up.u[i] - eps * lo.t);
            }
            if lo.t == t_end {
                width = lo.u.iter().zip(&up.u).map(|(a, b)| b - a).fold(0.0, f64::max);
            }
        }
        res.check(Check::le(format!("max(lower - upper) n={n}"), order.max(0.0), tol.envelope_order));
        res.info(format!("bracket width n={n}"), width);
        res.info(format!("regularized sandwich excess n={n}"), sandwich.max(0.0));
        widths.push(width);
    }
    res.check(Check::lt("width(dx/2) / width(dx)", widths[1] / widths[0], 1.0));
    Ok(())
}

fn envelope_scenario(n: usize, variant: Option<Variant>) -> Scenario {
    Scenario {
        x_min: -10.0,
        x_max: 10.0,
        n,
        variant,
        init: InitialData::Tanh { center: 0.0, width: 1.0 },
        t_end: 10.0,
        snapshots: vec![2.5, 5.0, 7.5, 10.0],
        front_dt: None,
        follow: false,
    }
}

/// Criterion 8.
fn sub_solution(tol: &Tolerances, res: &mut CriterionResult) -> Result<(), VerifyError> {
    let r = make_dcubic(0.25, 0.05)?;
    let w = wave(&r, 0.0, 1.0, &WaveOptions::default())?;
    let theta1 = r.thetas()[1];
    let m = sub_solution_rate(&r);
    let sc = Scenario {
        x_min: -20.0,
        x_max: 30.0,
        n: 2048,
        variant: None,
        init: InitialData::Tanh { center: 0.0, width: 1.0 },
        t_end: 20.0,
        snapshots: vec![0.0, 2.5, 5.0, 10.0, 15.0, 20.0],
        front_dt: None,
        follow: false,
    };
    let out = sc.run(&r)?;
    let first = out.snapshots.first().ok_or(DiagnosticsError::NoSnapshots)?;
    let a = sub_solution_amplitude(first, m, theta1);
    let mut deficit = f64::NEG_INFINITY;
    for s in &out.snapshots {
        for (i, &u) in s.u.iter().enumerate() {
            deficit = deficit.max(sub_solution_floor(s.t, s.x(i), a, m, theta1) - u);
        }
    }
    res.check(Check::le("max(floor - u)", deficit.max(0.0), tol.floor_margin));
    let last = out.snapshots.last().ok_or(DiagnosticsError::NoSnapshots)?;
    let x0 = out.fronts.samples.last().map_or(f64::INFINITY, |f| f.x0);
    let beyond: Vec<f64> = (0..last.u.len()).filter(|&i| last.x(i) >= x0 + w.eta()).map(|i| last.u[i]).collect();
    let eps = sc.epsilon();
    if beyond.is_empty() {
        res.notes.push("no grid points beyond x_0 + eta".into());
        res.check(Check::ge("points beyond x_0 + eta", 0.0, 1.0));
    } else {
        let peak = beyond.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        res.check(Check::lt("max u beyond x_0 + eta", peak, eps));
        res.info("max u beyond x_0 + eta", peak);
    }
    res.info("A", a);
    res.info("M", m);
    res.info("x_0(t_end)", x0);
    res.info("epsilon", eps);
    Ok(())
}

/// Random stacked reaction with one to three blocks.
pub fn random_stacked(rng: &mut ChaCha8Rng) -> Result<MultistableReaction, ReactionError> {
    let blocks = rng.gen_range(1..=3);
    let specs: Vec<(f64, f64)> = (0..blocks)
        .map(|_| {
            let a: f64 = rng.gen_range(0.15..0.85);
            let gamma = rng.gen_range(0.1..0.9) * 0.5 * a.min(1.0 - a);
            (a, gamma)
        })
        .collect();
    let widths: Vec<f64> = (0..blocks).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = widths.iter().sum();
    let mut cuts = vec![0.0];
    let mut acc = 0.0;
    for w in &widths[..blocks - 1] {
        acc += w / total;
        cuts.push(acc);
    }
    cuts.push(1.0);
    make_stacked(&specs, &cuts)
}

/// Criterion 9.
fn decompositions(seed: u64, res: &mut CriterionResult) -> Result<(), VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = WaveOptions::default();
    let (mut ok, mut ordered) = (0usize, 0usize);
    for k in 0..20 {
        let r = random_stacked(&mut rng)?;
        match minimal_decomposition(&r, &opts) {
            Ok(t) => {
                ok += 1;
                let s = t.speeds();
                if s.windows(2).all(|p| p[1] <= p[0] + opts.order_tol) {
                    ordered += 1;
                }
                res.info(format!("reaction {k:02} waves"), t.len() as f64);
            }
            Err(e) => res.notes.push(format!("reaction {k}: {e}")),
        }
    }
    res.check(Check::ge("reactions with one surviving chain", ok as f64, 20.0));
    res.check(Check::ge("reactions with nonincreasing speeds", ordered as f64, 20.0));
    Ok(())
}
