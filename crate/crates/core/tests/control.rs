use std::f64::consts::TAU;

use obstacle_shape::control::{
    control_jacobian, control_trace, fc_slopes, kink_sweep, pchip_eval, ControlVector, HermitePatch,
};
use proptest::prelude::*;

fn values(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..10.0, n)
}

fn ctrl(a: Vec<f64>) -> ControlVector {
    ControlVector::new(a, 0.01, 10.0).unwrap()
}

/// Derivative at the right end of interval `k`, from that interval's cubic.
fn left_derivative(x: &[f64], y: &[f64], d: &[f64], k: usize) -> f64 {
    let h = x[k + 1] - x[k];
    HermitePatch { y0: y[k], y1: y[k + 1], d0: d[k], d1: d[k + 1], h }.eval(h).1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trace_interpolates_knot_values(a in values(3..40)) {
        let c = ctrl(a.clone());
        let n = a.len();
        let thetas: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        prop_assert_eq!(control_trace(&c, &thetas), a);
    }

    #[test]
    fn derivative_is_continuous_including_seam(a in values(3..40)) {
        let c = ctrl(a);
        let (x, n) = (c.knots(), c.n());
        let mut y = c.values().to_vec();
        y.push(y[0]);
        let d = c.slopes();
        let scale = d.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for k in 1..n {
            let right = pchip_eval(&x, &y, &d, x[k], true).unwrap().1;
            prop_assert!((left_derivative(&x, &y, &d, k - 1) - right).abs() <= 1e-12 * scale);
        }
        let at_zero = pchip_eval(&x, &y, &d, 0.0, true).unwrap().1;
        prop_assert!((left_derivative(&x, &y, &d, n - 1) - at_zero).abs() <= 1e-12 * scale);
        prop_assert_eq!(d[0], d[n]);
    }

    #[test]
    fn no_overshoot_within_each_interval(a in values(3..30), t in proptest::collection::vec(0.0..TAU, 200)) {
        let c = ctrl(a.clone());
        let n = a.len();
        for &theta in &t {
            let k = ((theta / TAU * n as f64) as usize).min(n - 1);
            let (lo, hi) = (a[k].min(a[(k + 1) % n]), a[k].max(a[(k + 1) % n]));
            let u = c.eval(theta).0;
            prop_assert!(u >= lo - 1e-12 * hi && u <= hi + 1e-12 * hi, "u = {u} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant(
        steps in proptest::collection::vec((0.05f64..2.0, 0.0f64..3.0), 2..15),
        increasing in any::<bool>(),
    ) {
        let mut x = vec![0.0];
        let mut y = vec![0.0];
        for (dx, dy) in &steps {
            x.push(x.last().unwrap() + dx);
            y.push(y.last().unwrap() + if increasing { *dy } else { -dy });
        }
        let d = fc_slopes(&x, &y, false).unwrap();
        let end = *x.last().unwrap();
        for i in 0..=2000 {
            let t = (end * i as f64 / 2000.0).min(end);
            let slope = pchip_eval(&x, &y, &d, t, false).unwrap().1;
            let signed = if increasing { slope } else { -slope };
            prop_assert!(signed >= -1e-12, "slope {slope} at {t}");
        }
    }

    #[test]
    fn adding_a_constant_shifts_the_trace(a in values(3..30), c in -5.0f64..5.0) {
        let thetas: Vec<f64> = (0..97).map(|i| TAU * i as f64 / 97.0).collect();
        let base = control_trace(&ctrl(a.clone()), &thetas);
        let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
        let moved = control_trace(&ControlVector::new(shifted, -100.0, 100.0).unwrap(), &thetas);
        for (u, v) in base.iter().zip(&moved) {
            prop_assert!((v - u - c).abs() <= 1e-12 * u.abs().max(1.0) * 10.0);
        }
    }

    #[test]
    fn rotating_knots_rotates_the_trace(a in values(3..20), j in 0usize..20) {
        let n = a.len();
        let j = j % n;
        let mut rotated = a.clone();
        rotated.rotate_left(j);
        let thetas: Vec<f64> = (0..50).map(|i| TAU * (i as f64 + 0.37) / 50.0).collect();
        let shifted: Vec<f64> = thetas.iter().map(|t| (t + TAU * j as f64 / n as f64) % TAU).collect();
        let u = control_trace(&ctrl(a), &shifted);
        let v = control_trace(&ctrl(rotated), &thetas);
        for (p, q) in u.iter().zip(&v) {
            prop_assert!((p - q).abs() <= 1e-10 * p.abs().max(1.0));
        }
    }
}

#[test]
fn jacobian_matches_finite_differences_away_from_branch_switches() {
    let thetas: Vec<f64> = (0..73).map(|i| TAU * (i as f64 + 0.5) / 73.0).collect();
    let mut checked = 0;
    for seed in 0..20u32 {
        let a: Vec<f64> = (0..12).map(|k| 2.0 + ((k as f64 + 1.0) * (seed as f64 + 1.3)).sin()).collect();
        let c = ctrl(a.clone());
        let jac = control_jacobian(&c, &thetas);
        let step = 1e-6;
        for k in 0..a.len() {
            let mut plus = a.clone();
            let mut minus = a.clone();
            plus[k] += step;
            minus[k] -= step;
            // Skip directions that flip the sign of a neighbouring secant.
            let signs = |v: &[f64]| -> Vec<i8> {
                (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).signum() as i8).collect()
            };
            if signs(&plus) != signs(&a) || signs(&minus) != signs(&a) {
                continue;
            }
            let up = control_trace(&ctrl(plus), &thetas);
            let down = control_trace(&ctrl(minus), &thetas);
            for i in 0..thetas.len() {
                let fd = (up[i] - down[i]) / (2.0 * step);
                let exact = jac.get(i, k);
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "seed {seed} k {k} i {i}: {fd} vs {exact}");
            }
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn jacobian_at_a_kink_equals_a_one_sided_derivative() {
    // Knot 1 has a zero secant on its left, the sign rule is active.
    let a = vec![1.0, 1.0, 3.0, 2.0, 0.5];
    let thetas = [0.9, 1.7, 2.2];
    let jac = control_jacobian(&ctrl(a.clone()), &thetas);
    let step = 1e-7;
    for (i, &t) in thetas.iter().enumerate() {
        let mut plus = a.clone();
        plus[0] += step;
        let mut minus = a.clone();
        minus[0] -= step;
        let base = ctrl(a.clone()).eval(t).0;
        let right = (ctrl(plus).eval(t).0 - base) / step;
        let left = (base - ctrl(minus).eval(t).0) / step;
        let exact = jac.get(i, 0);
        assert!(
            (exact - right).abs() < 1e-5 || (exact - left).abs() < 1e-5,
            "theta {t}: {exact} vs one-sided {left}, {right}"
        );
    }
}

#[test]
fn kink_sweep_is_continuous() {
    let sweep = kink_sweep((-0.5, 1.0), 3001, 0.3).unwrap();
    let max_jump = sweep.windows(2).map(|w| (w[1].1 - w[0].1).abs()).fold(0.0, f64::max);
    let coarse = kink_sweep((-0.5, 1.0), 301, 0.3).unwrap();
    let coarse_jump = coarse.windows(2).map(|w| (w[1].1 - w[0].1).abs()).fold(0.0, f64::max);
    assert!(max_jump < coarse_jump / 5.0, "{max_jump} vs {coarse_jump}");
}
