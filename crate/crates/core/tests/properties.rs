use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use terrace_lab::cauchy::{GridState, Kinetics, Variant};
use terrace_lab::diagnostics::random_monotone;
use terrace_lab::reaction::{make_dcubic, make_stacked, Envelope, MultistableReaction, Side};
use terrace_lab::terrace::Terrace;
use terrace_lab::wave::{minimal_decomposition, shoot, Outcome, WaveOptions};

fn opts() -> WaveOptions {
    WaveOptions { dphi: 1e-3, ..Default::default() }
}

/// Ordered speeds `c1 > c2`.
fn ordered() -> &'static Terrace {
    static T: OnceLock<Terrace> = OnceLock::new();
    T.get_or_init(|| {
        let r = make_stacked(&[(0.2, 0.05), (0.8, 0.05)], &[0.0, 0.5, 1.0]).unwrap();
        minimal_decomposition(&r, &opts()).unwrap()
    })
}

/// Two waves with one common nonzero speed.
fn equal_speed() -> &'static Terrace {
    static T: OnceLock<Terrace> = OnceLock::new();
    T.get_or_init(|| {
        let r = make_stacked(&[(0.3, 0.05), (0.3, 0.05)], &[0.0, 0.5, 1.0]).unwrap();
        minimal_decomposition(&r, &opts()).unwrap()
    })
}

fn reaction(blocks: &[(f64, f64)], cut: f64) -> MultistableReaction {
    if blocks.len() == 1 {
        make_dcubic(blocks[0].0, blocks[0].1).unwrap()
    } else {
        make_stacked(blocks, &[0.0, cut, 1.0]).unwrap()
    }
}

fn block() -> impl Strategy<Value = (f64, f64)> {
    (0.15..0.85f64, 0.05..0.9f64).prop_map(|(a, s)| (a, s * 0.5 * a.min(1.0 - a)))
}

fn reactions() -> impl Strategy<Value = MultistableReaction> {
    (prop::collection::vec(block(), 1..=2), 0.3..0.7f64).prop_map(|(b, cut)| reaction(&b, cut))
}

/// Shifts with `xi_1 = xi_2 + eta_2 + gap`.
fn glued(t: &Terrace, xi2: f64, gap: f64) -> Terrace {
    t.with_shifts(vec![xi2 + t.etas()[1] + gap, xi2], true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn envelopes_straddle_zero_at_stable_states(r in reactions()) {
        for s in r.stable_states() {
            prop_assert!(r.envelope(s, Envelope::Lower) < 0.0);
            prop_assert!(r.envelope(s, Envelope::Upper) > 0.0);
        }
    }

    #[test]
    fn regularization_dominates_within_epsilon(r in reactions(), eps in 1e-3..0.05f64) {
        let reg = r.regularize(eps).unwrap();
        for i in 0..=10_000 {
            let u = -0.2 + 1.4 * i as f64 / 10_000.0;
            if reg.in_collar(u) || r.stable_index(u).is_some() {
                continue;
            }
            let diff = reg.eval(u) - r.eval(u, Side::Left).unwrap();
            prop_assert!((0.0..=eps).contains(&diff), "u = {u}: f_eps - f = {diff}");
        }
    }

    #[test]
    fn eval_sides_agree_off_stable_states(r in reactions(), u in -0.5..1.5f64) {
        prop_assume!(r.stable_index(u).is_none());
        prop_assert_eq!(r.eval(u, Side::Left).unwrap(), r.eval(u, Side::Right).unwrap());
    }

    #[test]
    fn terrace_nonincreasing_in_x(xi2 in -20.0..20.0f64, gap in 0.0..10.0f64, t in 0.0..30.0f64) {
        let tt = glued(ordered(), xi2, gap);
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let x = -80.0 + 0.16 * i as f64;
            let v = tt.eval(t, x);
            prop_assert!(v <= prev, "rise at x = {x}");
            prev = v;
        }
    }

    #[test]
    fn glue_point_is_c1(xi2 in -20.0..20.0f64) {
        let tt = glued(equal_speed(), xi2, 0.0);
        let x = tt.shifts()[0];
        let h = 1e-5;
        let (l, m, r) = (tt.eval(0.0, x - h), tt.eval(0.0, x), tt.eval(0.0, x + h));
        prop_assert!((m - 0.5).abs() < 1e-12);
        prop_assert!(((m - l) / h - (r - m) / h).abs() < 1e-2);
        prop_assert!((tt.deriv(0.0, x - h) - tt.deriv(0.0, x + h)).abs() < 1e-2);
    }

    #[test]
    fn equal_speeds_commute_with_time_shift(xi2 in -10.0..10.0f64, gap in 0.0..5.0f64, t in 0.0..10.0f64, s in 0.0..10.0f64, x in -30.0..30.0f64) {
        let tt = glued(equal_speed(), xi2, gap);
        let c = tt.speeds()[0];
        let a = tt.eval(t + s, x + c * s);
        let b = tt.eval(t, x);
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn speed_classes_sum_to_terrace(xi2 in -10.0..10.0f64, gap in 0.0..5.0f64, t in 0.0..20.0f64) {
        for base in [ordered(), equal_speed()] {
            let tt = glued(base, xi2, gap);
            let parts: Vec<Terrace> = tt.speed_classes().iter().map(|&c| tt.partial_by_speed(c).unwrap()).collect();
            for i in 0..400 {
                let x = -60.0 + 0.3 * i as f64;
                let sum: f64 = parts.iter().map(|p| p.eval(t, x) - p.base()).sum::<f64>() + tt.base();
                prop_assert!((sum - tt.eval(t, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ordered_pairs_stay_ordered(seed in any::<u64>(), regularized in any::<bool>()) {
        let r = make_dcubic(0.3, 0.05).unwrap();
        let n = 60;
        let (x_min, x_max) = (-3.0, 3.0);
        let dx = (x_max - x_min) / (n - 1) as f64;
        let variant = if regularized { Variant::Regularized { epsilon: dx } } else { Variant::UpperEnvelope };
        let kin = Kinetics::new(&r, variant).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = random_monotone(&mut rng, n);
        let w0 = random_monotone(&mut rng, n);
        let v0: Vec<f64> = u0.iter().zip(&w0).map(|(a, b)| a.max(*b)).collect();
        let mut u = GridState::from_values(x_min, x_max, u0).unwrap();
        let mut v = GridState::from_values(x_min, x_max, v0).unwrap();
        let dt = kin.stable_dt(dx);
        for _ in 0..200 {
            u.step(&kin, dt).unwrap();
            v.step(&kin, dt).unwrap();
            prop_assert!(u.values().iter().zip(v.values()).all(|(a, b)| a <= b));
            prop_assert!(u.values().windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}

#[test]
fn profiles_are_normalized() {
    for t in [ordered(), equal_speed()] {
        for w in t.waves() {
            assert_eq!(w.eval(0.0), w.theta_hi());
            assert_eq!(w.eval(w.eta()), w.theta_lo());
            assert_eq!(w.deriv(-0.5), 0.0);
            assert_eq!(w.deriv(w.eta() + 0.5), 0.0);
            assert!(w.deriv(0.5 * w.eta()) < 0.0);
        }
    }
}

#[test]
fn final_bracket_straddles_the_classification() {
    let r = make_dcubic(0.25, 0.05).unwrap();
    let t = minimal_decomposition(&r, &opts()).unwrap();
    let w = &t.waves()[0];
    let (lo, hi) = w.bracket();
    let at_lo = shoot(&r, 0.0, 1.0, lo, 1e-3).unwrap().outcome;
    let at_hi = shoot(&r, 0.0, 1.0, hi, 1e-3).unwrap().outcome;
    assert!(!matches!(at_lo, Outcome::Undershoot { .. }), "{at_lo:?}");
    assert!(!matches!(at_hi, Outcome::Overshoot { .. }), "{at_hi:?}");
    assert_ne!(std::mem::discriminant(&at_lo), std::mem::discriminant(&at_hi));
}

#[test]
fn ode_residual_shrinks_with_step() {
    let r = make_dcubic(0.25, 0.05).unwrap();
    let res: Vec<f64> = [2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&d| minimal_decomposition(&r, &WaveOptions { dphi: d, ..Default::default() }).unwrap().waves()[0].ode_residual(&r))
        .collect();
    let order = (res[0] / res[2]).log2() / 2.0;
    assert!(order >= 1.0, "residuals {res:?}, observed order {order}");
}
