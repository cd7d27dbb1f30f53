//! Cubic Hermite pieces and monotone (Fritsch-Carlson) slope limiting.

/// One cubic Hermite segment on `[x0, x1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermiteSegment {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub m0: f64,
    pub m1: f64,
}

impl HermiteSegment {
    /// Builds a segment whose end slopes are limited so the cubic stays
    /// monotone between `y0` and `y1`.
    pub fn monotone(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> Self {
        let (m0, m1) = limit_slopes(y1 - y0, x1 - x0, m0, m1);
        Self { x0, x1, y0, y1, m0, m1 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let h = self.x1 - self.x0;
        let t = (x - self.x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y0 + h10 * h * self.m0 + h01 * self.y1 + h11 * h * self.m1
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let h = self.x1 - self.x0;
        let t = (x - self.x0) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.y0 + d10 * self.m0 + d01 * self.y1 + d11 * self.m1
    }
}

/// Fritsch-Carlson limiter. Slopes with the wrong sign are zeroed and the
/// pair is scaled back into the circle `alpha^2 + beta^2 <= 9`.
pub fn limit_slopes(dy: f64, dx: f64, m0: f64, m1: f64) -> (f64, f64) {
    let secant = dy / dx;
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let mut m0 = if m0 * secant < 0.0 { 0.0 } else { m0 };
    let mut m1 = if m1 * secant < 0.0 { 0.0 } else { m1 };
    let alpha = m0 / secant;
    let beta = m1 / secant;
    let r2 = alpha * alpha + beta * beta;
    if r2 > 9.0 {
        let tau = 3.0 / r2.sqrt();
        m0 *= tau;
        m1 *= tau;
    }
    (m0, m1)
}

/// Monotone piecewise-cubic interpolant through `(x, y)` with supplied slopes.
/// Outside `[x_first, x_last]` the end values are held constant.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<(f64, f64)>,
}

impl MonotoneCubic {
    /// `x` must be strictly increasing and `y` monotone.
    pub fn new(x: Vec<f64>, y: Vec<f64>, slopes: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), slopes.len());
        assert!(x.len() >= 2, "need at least two nodes");
        let m = (0..x.len() - 1)
            .map(|k| limit_slopes(y[k + 1] - y[k], x[k + 1] - x[k], slopes[k], slopes[k + 1]))
            .collect();
        Self { x, y, m }
    }

    fn segment(&self, k: usize) -> HermiteSegment {
        HermiteSegment {
            x0: self.x[k],
            x1: self.x[k + 1],
            y0: self.y[k],
            y1: self.y[k + 1],
            m0: self.m[k].0,
            m1: self.m[k].1,
        }
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let n = self.x.len();
        if x <= self.x[0] || x >= self.x[n - 1] {
            return None;
        }
        // partition_point gives the first node strictly greater than x
        let k = self.x.partition_point(|&xi| xi <= x);
        Some(k - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(k) => self.segment(k).eval(x),
            None if x <= self.x[0] => self.y[0],
            None => self.y[self.y.len() - 1],
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(k) => self.segment(k).deriv(x),
            None => 0.0,
        }
    }
}

/// Piecewise cubic on `[lo, hi]` fitted to a function that is polynomial of
/// degree at most three between the given breakpoints. Pieces that are not
/// reproduced to `tol` are bisected until they are. Lookup goes through a
/// uniform bucket index.
#[derive(Clone, Debug)]
pub struct PiecewiseCubic {
    lo: f64,
    hi: f64,
    inv_bucket: f64,
    bucket: Vec<u32>,
    starts: Vec<f64>,
    coef: Vec<[f64; 4]>,
    single_step: bool,
}

const MAX_BUCKETS: usize = 1 << 20;
const FIT_CHECKS: usize = 24;
const MIN_PIECE: f64 = 1e-7;

impl PiecewiseCubic {
    /// `breaks` must be sorted; the range is `[breaks[0], breaks[last]]`.
    pub fn fit(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> Self {
        let mut starts = Vec::new();
        let mut coef = Vec::new();
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                Self::fit_piece(&f, w[0], w[1], tol, &mut starts, &mut coef);
            }
        }
        let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
        starts.push(hi);
        // buckets narrower than every piece hold at most one piece boundary
        let narrowest = starts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let nb = ((2.0 * (hi - lo) / narrowest).ceil() as usize).clamp(1024, MAX_BUCKETS);
        let single_step = (hi - lo) / (nb as f64) < 0.5 * narrowest;
        let inv_bucket = nb as f64 / (hi - lo);
        let bucket = (0..nb)
            .map(|k| {
                let x = lo + k as f64 / inv_bucket;
                (starts.partition_point(|&s| s <= x).max(1) - 1).min(coef.len() - 1) as u32
            })
            .collect();
        Self { lo, hi, inv_bucket, bucket, starts, coef, single_step }
    }

    fn fit_piece(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, starts: &mut Vec<f64>, coef: &mut Vec<[f64; 4]>) {
        // interior nodes only, so a branch switch at either end is never sampled
        let ts = [0.05, 0.35, 0.65, 0.95].map(|q| q * (b - a));
        let ys = ts.map(|t| f(a + t));
        let d1 = [0, 1, 2].map(|i| (ys[i + 1] - ys[i]) / (ts[i + 1] - ts[i]));
        let d2 = [0, 1].map(|i| (d1[i + 1] - d1[i]) / (ts[i + 2] - ts[i]));
        let d3 = (d2[1] - d2[0]) / (ts[3] - ts[0]);
        // p(t) = y0 + d1 (t - t0) + d2 (t - t0)(t - t1) + d3 (t - t0)(t - t1)(t - t2)
        let (t0, t1, t2) = (ts[0], ts[1], ts[2]);
        let c = [
            ys[0] - d1[0] * t0 + d2[0] * t0 * t1 - d3 * t0 * t1 * t2,
            d1[0] - d2[0] * (t0 + t1) + d3 * (t0 * t1 + t0 * t2 + t1 * t2),
            d2[0] - d3 * (t0 + t1 + t2),
            d3,
        ];
        let eval = |t: f64| ((c[3] * t + c[2]) * t + c[1]) * t + c[0];
        let ok = (1..FIT_CHECKS).all(|i| {
            let x = a + (b - a) * i as f64 / FIT_CHECKS as f64;
            (eval(x - a) - f(x)).abs() <= tol * (1.0 + f(x).abs())
        });
        if ok || b - a < MIN_PIECE {
            starts.push(a);
            coef.push(c);
        } else {
            let m = 0.5 * (a + b);
            Self::fit_piece(f, a, m, tol, starts, coef);
            Self::fit_piece(f, m, b, tol, starts, coef);
        }
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.lo && u < self.hi
    }

    pub fn pieces(&self) -> usize {
        self.coef.len()
    }

    /// Value at `u`, which must lie in `[lo, hi)`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let k = (((u - self.lo) * self.inv_bucket) as usize).min(self.bucket.len() - 1);
        let mut i = self.bucket[k] as usize;
        if self.single_step {
            i += (self.starts[i + 1] <= u) as usize;
        } else {
            while self.starts[i + 1] <= u {
                i += 1;
            }
        }
        let c = &self.coef[i];
        let t = u - self.starts[i];
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubic() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let s = HermiteSegment { x0: 0.5, x1: 1.5, y0: f(0.5), y1: f(1.5), m0: df(0.5), m1: df(1.5) };
        for k in 0..=10 {
            let x = 0.5 + k as f64 / 10.0;
            assert!((s.eval(x) - f(x)).abs() < 1e-13);
            assert!((s.deriv(x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn limiter_keeps_monotone() {
        let s = HermiteSegment::monotone(0.0, 1.0, 1.0, 0.0, -20.0, -20.0);
        let mut prev = s.eval(0.0);
        for k in 1..=1000 {
            let v = s.eval(k as f64 / 1000.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn wrong_sign_slopes_zeroed() {
        assert_eq!(limit_slopes(-1.0, 1.0, 0.5, -0.5), (0.0, -0.5));
        assert_eq!(limit_slopes(0.0, 1.0, 0.5, -0.5), (0.0, 0.0));
    }

    #[test]
    fn piecewise_cubic_reproduces_pieces() {
        let f = |u: f64| if u < 0.3 { 1.0 - u } else { u * u * u - 0.2 * u };
        let p = PiecewiseCubic::fit(f, &[-1.0, 0.3, 2.0], 1e-13);
        assert_eq!(p.pieces(), 2);
        for k in 0..3000 {
            let u = -1.0 + 3.0 * k as f64 / 3000.0;
            assert!((p.eval(u) - f(u)).abs() < 1e-13, "{u}");
        }
        let g = |u: f64| u.sin();
        let p = PiecewiseCubic::fit(g, &[0.0, 1.0], 1e-12);
        assert!(p.pieces() > 1);
        for k in 0..1000 {
            let u = k as f64 / 1000.0;
            assert!((p.eval(u) - g(u)).abs() < 1e-11);
        }
    }

    #[test]
    fn clamped_outside_nodes() {
        let c = MonotoneCubic::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0], &[0.0, -0.5, 0.0]);
        assert_eq!(c.eval(-3.0), 1.0);
        assert_eq!(c.eval(5.0), 0.0);
        assert_eq!(c.deriv(5.0), 0.0);
        assert!((c.eval(1.0) - 0.5).abs() < 1e-15);
    }
}
