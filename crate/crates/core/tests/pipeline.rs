use std::sync::Arc;

use terrace_lab::cauchy::{fronts, run, GridState, InitialData, Kinetics, RunOptions, Variant};
use terrace_lab::diagnostics::{comoving_check, fit_shift_single, speed_estimate, Expectation};
use terrace_lab::reaction::make_dcubic;
use terrace_lab::wave::{solve_wave, WaveOptions};

fn tanh() -> InitialData {
    InitialData::Tanh { center: 0.0, width: 1.0 }
}

fn opts(times: Vec<f64>, front_dt: Option<f64>, follow: bool) -> RunOptions {
    RunOptions { snapshot_times: times, front_dt, follow, platforms: vec![0.0, 1.0], tau: 0.1, edge_margin: None }
}

#[test]
fn bistable_front_moves_forward_at_the_wave_speed() {
    let r = make_dcubic(0.25, 0.05).unwrap();
    let w = solve_wave(&r, 0.0, 1.0, &WaveOptions::default()).unwrap().wave().unwrap();
    let (x_min, x_max, n) = (-15.0, 25.0, 1024);
    let dx = (x_max - x_min) / (n - 1) as f64;
    let kin = Kinetics::new(&r, Variant::Regularized { epsilon: dx }).unwrap();
    let init = tanh();
    let mut s = GridState::init(x_min, x_max, n, |x| init.eval(x), init.limits(), Some(&r)).unwrap();
    let out = run(&mut s, &kin, 30.0, &opts(vec![30.0], Some(0.5), false)).unwrap();
    let est = speed_estimate(&out.fronts.times(), &out.fronts.x0_series(), (15.0, 30.0)).unwrap();
    assert!(est.speed > 0.0);
    assert!((est.speed / w.speed() - 1.0).abs() < 0.1, "{} vs {}", est.speed, w.speed());

    let last = out.snapshots.last().unwrap();
    let f = fronts(last, &[0.0, 1.0], 0.1);
    let b = f.bands[0];
    assert!(b.upper.is_finite() && b.lower.is_finite());
    assert!((b.lower - b.upper).abs() <= w.eta());
    assert!(fit_shift_single(last, &w, last.t).distance < 0.03);

    // Observers much faster or slower than the front see the two platforms.
    let far = comoving_check(&out.snapshots, w.speed() + 0.3, &Expectation::Platform(0.0), 3.0, 0.05).unwrap();
    assert!(far.pass, "{far:?}");
    let behind = comoving_check(&out.snapshots, w.speed() - 0.3, &Expectation::Platform(1.0), 3.0, 0.05).unwrap();
    assert!(behind.pass, "{behind:?}");
}

#[test]
fn symmetric_front_settles() {
    let r = make_dcubic(0.5, 0.05).unwrap();
    let (x_min, x_max, n) = (-10.0, 10.0, 1024);
    let dx = (x_max - x_min) / (n - 1) as f64;
    let kin = Kinetics::new(&r, Variant::Regularized { epsilon: dx }).unwrap();
    let init = tanh();
    let mut s = GridState::init(x_min, x_max, n, |x| init.eval(x), init.limits(), Some(&r)).unwrap();
    let out = run(&mut s, &kin, 50.0, &opts(vec![50.0], Some(0.5), true)).unwrap();
    let est = speed_estimate(&out.fronts.times(), &out.fronts.x0_series(), (25.0, 50.0)).unwrap();
    assert!(est.speed.abs() <= 0.02, "{est:?}");
}

#[test]
fn halving_dx_converges_at_first_order_or_better() {
    // Smooth cubic, so the scheme's own accuracy is what is measured.
    let f = Arc::new(|u: f64| u * (1.0 - u) * (u - 0.3));
    let kin = Kinetics::plain(f, 1.0, 0.2);
    let init = tanh();
    let solve = |n: usize| {
        let mut s = GridState::init(-10.0, 10.0, n, |x| init.eval(x), init.limits(), None).unwrap();
        run(&mut s, &kin, 2.0, &opts(vec![2.0], None, false)).unwrap().snapshots.pop().unwrap()
    };
    let (a, b, c) = (solve(101), solve(201), solve(401));
    let diff = |coarse: &terrace_lab::cauchy::Snapshot, fine: &terrace_lab::cauchy::Snapshot| {
        (0..coarse.u.len()).map(|i| (coarse.u[i] - fine.u[2 * i]).abs()).fold(0.0, f64::max)
    };
    let (d1, d2) = (diff(&a, &b), diff(&b, &c));
    assert!(d1 < 0.2 * a.dx, "{d1}");
    assert!(d1 / d2 > 1.8, "{d1} {d2}");
}

#[test]
fn constant_data_under_zero_reaction_stays_constant() {
    let kin = terrace_lab::cauchy::zero_kinetics();
    let mut s = GridState::from_values(-1.0, 1.0, vec![0.3; 41]).unwrap();
    let out = run(&mut s, &kin, 1.0, &opts(vec![1.0], None, false)).unwrap();
    assert!(out.snapshots[0].u.iter().all(|&v| v == 0.3));
}
