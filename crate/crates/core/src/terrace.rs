//! Terrace functions: sums of shifted compact waves stacked through
//! intermediate platforms.

use serde::Serialize;
use thiserror::Error;

use crate::wave::WaveProfile;

/// Speeds closer than this are treated as one speed class.
pub const SPEED_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum TerraceError {
    #[error("wave {index} starts at {found}, expected platform {expected}")]
    ChainMismatch { index: usize, expected: f64, found: f64 },
    #[error("wave {index} is faster than the wave below it ({above} > {below})")]
    SpeedOrder { index: usize, above: f64, below: f64 },
    #[error("{shifts} shifts given for {waves} waves")]
    ShiftCount { waves: usize, shifts: usize },
    #[error("gluing violated at index {index}: xi_{index} - xi_{next} - eta_{next} = {gap}", next = index + 1)]
    Gluing { index: usize, gap: f64 },
    #[error("no wave has speed {speed}; available speeds: {available:?}")]
    NoSuchSpeed { speed: f64, available: Vec<f64> },
    #[error("partial terrace index {ell} out of range 0..={len}")]
    LevelOutOfRange { ell: usize, len: usize },
}

/// `Phi(t, x) = base + sum_j (phi_j(x - xi_j - c_j t) - p_{j-1})`.
#[derive(Clone, Debug)]
pub struct Terrace {
    base: f64,
    waves: Vec<WaveProfile>,
    shifts: Vec<f64>,
    solution: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TerraceSummary {
    pub platforms: Vec<f64>,
    pub speeds: Vec<f64>,
    pub shifts: Vec<f64>,
    pub etas: Vec<f64>,
    pub solution: bool,
}

impl Terrace {
    /// Waves are ordered bottom to top. With `require_solution` the shifts
    /// must satisfy `xi_j >= xi_{j+1} + eta_{j+1}`.
    pub fn assemble(waves: Vec<WaveProfile>, shifts: Vec<f64>, require_solution: bool) -> Result<Self, TerraceError> {
        if waves.len() != shifts.len() {
            return Err(TerraceError::ShiftCount { waves: waves.len(), shifts: shifts.len() });
        }
        for (j, pair) in waves.windows(2).enumerate() {
            if pair[1].theta_lo() != pair[0].theta_hi() {
                return Err(TerraceError::ChainMismatch {
                    index: j + 2,
                    expected: pair[0].theta_hi(),
                    found: pair[1].theta_lo(),
                });
            }
            if pair[1].speed() > pair[0].speed() + SPEED_TOL {
                return Err(TerraceError::SpeedOrder { index: j + 2, above: pair[1].speed(), below: pair[0].speed() });
            }
        }
        let base = waves.first().map_or(0.0, |w| w.theta_lo());
        let mut t = Self { base, waves, shifts, solution: false };
        match t.gluing_violation() {
            Some((index, gap)) if require_solution => Err(TerraceError::Gluing { index, gap }),
            Some(_) => Ok(t),
            None => {
                t.solution = true;
                Ok(t)
            }
        }
    }

    /// The constant terrace with no waves.
    pub fn constant(level: f64) -> Self {
        Self { base: level, waves: Vec::new(), shifts: Vec::new(), solution: true }
    }

    /// First 1-based index `j` with `xi_j < xi_{j+1} + eta_{j+1}`, and the gap.
    /// Gaps within a few rounding units of zero count as glued.
    pub fn gluing_violation(&self) -> Option<(usize, f64)> {
        (0..self.waves.len().saturating_sub(1)).find_map(|j| {
            let edge = self.shifts[j + 1] + self.waves[j + 1].eta();
            let gap = self.shifts[j] - edge;
            let slack = 4.0 * f64::EPSILON * self.shifts[j].abs().max(edge.abs()).max(1.0);
            (gap < -slack).then_some((j + 1, gap))
        })
    }

    /// Shifts that glue the waves edge to edge with `xi_J = anchor`.
    pub fn solution_shifts(&self, anchor: f64) -> Vec<f64> {
        let n = self.waves.len();
        let mut xi = vec![anchor; n];
        for j in (0..n.saturating_sub(1)).rev() {
            xi[j] = xi[j + 1] + self.waves[j + 1].eta();
        }
        xi
    }

    /// Same waves with new shifts.
    pub fn with_shifts(&self, shifts: Vec<f64>, require_solution: bool) -> Result<Self, TerraceError> {
        let mut t = Self::assemble(self.waves.clone(), shifts, require_solution)?;
        t.base = self.base;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    pub fn is_solution(&self) -> bool {
        self.solution
    }

    pub fn waves(&self) -> &[WaveProfile] {
        &self.waves
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.waves.iter().map(|w| w.speed()).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.waves.iter().map(|w| w.eta()).collect()
    }

    /// `p_0 < p_1 < ... < p_J`, starting from the base level.
    pub fn platforms(&self) -> Vec<f64> {
        std::iter::once(self.base).chain(self.waves.iter().map(|w| w.theta_hi())).collect()
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn top(&self) -> f64 {
        self.waves.last().map_or(self.base, |w| w.theta_hi())
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.eval_shifted(&self.shifts, t, x)
    }

    /// [`Self::eval`] with the shifts replaced by `shifts`.
    #[inline]
    pub fn eval_shifted(&self, shifts: &[f64], t: f64, x: f64) -> f64 {
        self.waves
            .iter()
            .zip(shifts)
            .map(|(w, xi)| w.eval(x - xi - w.speed() * t) - w.theta_lo())
            .sum::<f64>()
            + self.base
    }

    /// Spatial derivative.
    pub fn deriv(&self, t: f64, x: f64) -> f64 {
        self.waves.iter().zip(&self.shifts).map(|(w, xi)| w.deriv(x - xi - w.speed() * t)).sum()
    }

    /// Sub-terrace of the waves whose speed is within [`SPEED_TOL`] of `c`.
    pub fn partial_by_speed(&self, c: f64) -> Result<Self, TerraceError> {
        let idx: Vec<usize> = (0..self.len()).filter(|&j| (self.waves[j].speed() - c).abs() <= SPEED_TOL).collect();
        if idx.is_empty() {
            return Err(TerraceError::NoSuchSpeed { speed: c, available: self.speeds() });
        }
        let waves = idx.iter().map(|&j| self.waves[j].clone()).collect();
        let shifts = idx.iter().map(|&j| self.shifts[j]).collect();
        Self::assemble(waves, shifts, false)
    }

    /// `Phi_ell`: the lowest `ell` waves on top of the base level.
    pub fn lower_partial(&self, ell: usize) -> Result<Self, TerraceError> {
        if ell > self.len() {
            return Err(TerraceError::LevelOutOfRange { ell, len: self.len() });
        }
        if ell == 0 {
            return Ok(Self::constant(self.base));
        }
        Self::assemble(self.waves[..ell].to_vec(), self.shifts[..ell].to_vec(), false)
    }

    /// Distinct speeds, fastest first.
    pub fn speed_classes(&self) -> Vec<f64> {
        let mut classes: Vec<f64> = Vec::new();
        for c in self.speeds() {
            if classes.last().is_none_or(|&last| (last - c).abs() > SPEED_TOL) {
                classes.push(c);
            }
        }
        classes
    }

    pub fn summary(&self) -> TerraceSummary {
        TerraceSummary {
            platforms: self.platforms(),
            speeds: self.speeds(),
            shifts: self.shifts.clone(),
            etas: self.etas(),
            solution: self.solution,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::make_stacked;
    use crate::wave::{minimal_decomposition, WaveOptions};

    fn symmetric() -> Terrace {
        let r = make_stacked(&[(0.5, 0.05), (0.5, 0.05)], &[0.0, 0.5, 1.0]).unwrap();
        minimal_decomposition(&r, &WaveOptions { dphi: 1e-3, ..Default::default() }).unwrap()
    }

    #[test]
    fn boundary_gluing_accepted() {
        let t = symmetric();
        let xi = t.solution_shifts(-3.0);
        assert_eq!(xi[0], -3.0 + t.waves()[1].eta());
        assert!(t.with_shifts(xi, true).unwrap().is_solution());
    }

    #[test]
    fn gluing_violation_names_index() {
        let t = symmetric();
        let eta2 = t.waves()[1].eta();
        let err = t.with_shifts(vec![eta2 - 0.1, 0.0], true).unwrap_err();
        match err {
            TerraceError::Gluing { index, gap } => {
                assert_eq!(index, 1);
                assert!((gap + 0.1).abs() < 1e-12);
            }
            e => panic!("{e}"),
        }
        assert!(!t.with_shifts(vec![eta2 - 0.1, 0.0], false).unwrap().is_solution());
    }

    #[test]
    fn chain_mismatch_rejected() {
        let t = symmetric();
        let w = t.waves()[0].clone();
        let err = Terrace::assemble(vec![w.clone(), w], vec![0.0, 0.0], false).unwrap_err();
        assert!(matches!(err, TerraceError::ChainMismatch { index: 2, .. }));
    }

    #[test]
    fn limits_and_glue_point() {
        let t = symmetric();
        let t = t.with_shifts(t.solution_shifts(0.0), true).unwrap();
        assert_eq!(t.eval(0.0, 1e6), 0.0);
        assert_eq!(t.eval(0.0, -1e6), 1.0);
        let glue = t.shifts()[0];
        assert!((t.eval(0.0, glue) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let left = (t.eval(0.0, glue) - t.eval(0.0, glue - h)) / h;
        let right = (t.eval(0.0, glue + h) - t.eval(0.0, glue)) / h;
        assert!((left - right).abs() < 1e-3, "{left} {right}");
    }

    #[test]
    fn partial_selections() {
        let t = symmetric();
        assert_eq!(t.partial_by_speed(t.speeds()[0]).unwrap().len(), 2);
        assert!(matches!(t.partial_by_speed(3.0), Err(TerraceError::NoSuchSpeed { .. })));
        let zero = t.lower_partial(0).unwrap();
        assert!(zero.is_empty());
        assert_eq!(zero.eval(1.0, -5.0), 0.0);
        let one = t.lower_partial(1).unwrap();
        assert_eq!(one.platforms(), vec![0.0, 0.5]);
        assert_eq!(one.eval(0.0, -1e3), 0.5);
        assert_eq!(t.lower_partial(2).unwrap().len(), 2);
        assert!(t.lower_partial(3).is_err());
        assert_eq!(t.speed_classes().len(), 1);
    }

    #[test]
    fn summary_serializes_in_field_order() {
        let json = serde_json::to_string(&symmetric().summary()).unwrap();
        let keys = ["platforms", "speeds", "shifts", "etas", "solution"];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|p| p[0] < p[1]));
    }
}
