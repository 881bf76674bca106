//! Shape-preserving piecewise cubic Hermite interpolation and the periodic
//! boundary control `u_a(θ)` it induces.
//!
//! Slopes follow the Fritsch–Carlson rule: zero at local extrema (including
//! flat neighbouring intervals), otherwise a weighted harmonic mean of the
//! neighbouring secants. The resulting interpolant never leaves the range of
//! the data. The slope map is only piecewise smooth in the data, so
//! [`control_jacobian`] returns the derivative of whichever branch is active.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// One cubic Hermite piece on an interval of width `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitePatch {
    pub y0: f64,
    pub y1: f64,
    pub d0: f64,
    pub d1: f64,
    pub h: f64,
}

impl HermitePatch {
    /// Basis weights of `(y0, y1, d0, d1)` at local coordinate `s ∈ [0, h]`.
    pub fn basis(h: f64, s: f64) -> [f64; 4] {
        let (h2, h3) = (h * h, h * h * h);
        [
            (h3 - 3.0 * h * s * s + 2.0 * s * s * s) / h3,
            (3.0 * h * s * s - 2.0 * s * s * s) / h3,
            s * (s - h) * (s - h) / h2,
            s * s * (s - h) / h2,
        ]
    }

    /// Value and derivative at local coordinate `s`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let [b0, b1, c0, c1] = Self::basis(self.h, s);
        let value = b0 * self.y0 + b1 * self.y1 + c0 * self.d0 + c1 * self.d1;
        let h = self.h;
        let deriv = 6.0 * s * (h - s) / (h * h * h) * (self.y1 - self.y0)
            + (s - h) * (3.0 * s - h) / (h * h) * self.d0
            + s * (3.0 * s - 2.0 * h) / (h * h) * self.d1;
        (value, deriv)
    }
}

/// Slope at a knot between secants `delta_prev` (width `h_prev`) and
/// `delta_next` (width `h_next`), with its partial derivatives with respect
/// to the two secants.
pub fn knot_slope(h_prev: f64, delta_prev: f64, h_next: f64, delta_next: f64) -> (f64, f64, f64) {
    if delta_prev == 0.0 || delta_next == 0.0 || (delta_prev > 0.0) != (delta_next > 0.0) {
        return (0.0, 0.0, 0.0);
    }
    if h_prev == h_next {
        let sum = delta_prev + delta_next;
        let d = 2.0 * delta_prev * delta_next / sum;
        let dp = 2.0 * delta_next * delta_next / (sum * sum);
        let dn = 2.0 * delta_prev * delta_prev / (sum * sum);
        (d, dp, dn)
    } else {
        let w1 = 2.0 * h_next + h_prev;
        let w2 = h_next + 2.0 * h_prev;
        let denom = w1 / delta_prev + w2 / delta_next;
        let d = (w1 + w2) / denom;
        let dp = (w1 + w2) * w1 / (delta_prev * delta_prev * denom * denom);
        let dn = (w1 + w2) * w2 / (delta_next * delta_next * denom * denom);
        (d, dp, dn)
    }
}

fn check_abscissae(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "abscissae and values differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("interpolation needs at least 2 points".into()));
    }
    if let Some(k) = x.windows(2).position(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater)) {
        return Err(Error::InvalidInput(format!(
            "abscissae must be strictly increasing (x[{k}] = {}, x[{}] = {})",
            x[k],
            k + 1,
            x[k + 1]
        )));
    }
    Ok(())
}

// Shape-preserving one-sided three-point end slope.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    let sgn = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    if sgn(d) != sgn(del0) {
        0.0
    } else if sgn(del0) != sgn(del1) && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Fritsch–Carlson slopes for data `(x, y)`.
///
/// In periodic mode `x` includes the closing abscissa and `y` must repeat
/// its first value there; secant and width sequences wrap around so the
/// derivative is continuous across the seam.
pub fn fc_slopes(x: &[f64], y: &[f64], periodic: bool) -> Result<Vec<f64>> {
    check_abscissae(x, y)?;
    let n = x.len() - 1;
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n + 1];
    if periodic {
        let scale = y[0].abs().max(1.0);
        if (y[n] - y[0]).abs() > 1e-14 * scale {
            return Err(Error::InvalidInput(format!(
                "periodic data must close: y[0] = {}, y[{n}] = {}",
                y[0], y[n]
            )));
        }
        for k in 0..n {
            let prev = (k + n - 1) % n;
            d[k] = knot_slope(h[prev], delta[prev], h[k], delta[k]).0;
        }
        d[n] = d[0];
    } else if n == 1 {
        d[0] = delta[0];
        d[1] = delta[0];
    } else {
        for k in 1..n {
            d[k] = knot_slope(h[k - 1], delta[k - 1], h[k], delta[k]).0;
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[n] = end_slope(h[n - 1], h[n - 2], delta[n - 1], delta[n - 2]);
    }
    Ok(d)
}

/// Index of the interval containing `t` (the last interval for `t = x_end`).
fn locate(x: &[f64], t: f64) -> usize {
    let k = x.partition_point(|&xk| xk <= t);
    k.saturating_sub(1).min(x.len() - 2)
}

/// Value and derivative of the Hermite interpolant with slopes `d` at `t`.
/// In periodic mode `t` is first reduced into `[x_0, x_end)`.
pub fn pchip_eval(x: &[f64], y: &[f64], d: &[f64], t: f64, periodic: bool) -> Result<(f64, f64)> {
    check_abscissae(x, y)?;
    if d.len() != x.len() {
        return Err(Error::InvalidInput("slope vector has wrong length".into()));
    }
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let t = if periodic {
        let r = lo + (t - lo).rem_euclid(hi - lo);
        if r >= hi { lo } else { r }
    } else if !(lo..=hi).contains(&t) {
        return Err(Error::InvalidInput(format!("query point {t} outside [{lo}, {hi}]")));
    } else {
        t
    };
    let k = locate(x, t);
    let patch = HermitePatch {
        y0: y[k],
        y1: y[k + 1],
        d0: d[k],
        d1: d[k + 1],
        h: x[k + 1] - x[k],
    };
    Ok(patch.eval(t - x[k]))
}

/// Knot values of the periodic boundary control on uniform knots
/// `θ_k = kΔ`, `Δ = 2π/n`, with the admissible box `[u_min, u_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    values: Vec<f64>,
    pub u_min: f64,
    pub u_max: f64,
}

/// Dense row-major `∂u_a(θ_i)/∂a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Jacobian {
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `Bᵀ v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.row(i)) {
                *o += b * vi;
            }
        }
        out
    }
}

impl ControlVector {
    pub fn new(values: Vec<f64>, u_min: f64, u_max: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "control needs at least 3 knots, got {}",
                values.len()
            )));
        }
        if u_min.partial_cmp(&u_max) != Some(Ordering::Less) {
            return Err(Error::InvalidInput(format!("control bounds need u_min < u_max, got [{u_min}, {u_max}]")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("control values must be finite".into()));
        }
        Ok(Self { values, u_min, u_max })
    }

    pub fn constant(n: usize, value: f64, u_min: f64, u_max: f64) -> Result<Self> {
        Self::new(vec![value; n], u_min, u_max)
    }

    /// Same knots and bounds with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.n() {
            return Err(Error::InvalidInput("knot count changed".into()));
        }
        Self::new(values, self.u_min, self.u_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.n() as f64
    }

    /// Knot angles `θ_0 … θ_n` including the closing knot at `2π`.
    pub fn knots(&self) -> Vec<f64> {
        let n = self.n();
        (0..=n).map(|k| if k == n { TAU } else { TAU * k as f64 / n as f64 }).collect()
    }

    fn closed_values(&self) -> Vec<f64> {
        let mut y = self.values.clone();
        y.push(self.values[0]);
        y
    }

    /// Periodic slopes at the knots (length `n + 1`).
    pub fn slopes(&self) -> Vec<f64> {
        fc_slopes(&self.knots(), &self.closed_values(), true).expect("uniform periodic knots are valid")
    }

    /// `u_a(θ)` and `u_a'(θ)`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        pchip_eval(&self.knots(), &self.closed_values(), &self.slopes(), theta, true)
            .expect("uniform periodic knots are valid")
    }

    /// Whether all knot values lie in `[u_min, u_max]`.
    pub fn in_bounds(&self) -> bool {
        self.values.iter().all(|&v| (self.u_min..=self.u_max).contains(&v))
    }
}

/// Boundary values `u_a(θ_i)` at the given angles.
pub fn control_trace(ctrl: &ControlVector, thetas: &[f64]) -> Vec<f64> {
    let x = ctrl.knots();
    let y = ctrl.closed_values();
    let d = ctrl.slopes();
    thetas
        .iter()
        .map(|&t| pchip_eval(&x, &y, &d, t, true).expect("valid periodic data").0)
        .collect()
}

/// Formal Jacobian `B_ik = ∂u_a(θ_i)/∂a_k`, differentiating the slope
/// branch active at the current knot values.
pub fn control_jacobian(ctrl: &ControlVector, thetas: &[f64]) -> Jacobian {
    let n = ctrl.n();
    let x = ctrl.knots();
    let a = ctrl.values();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n).map(|k| (a[(k + 1) % n] - a[k]) / h[k]).collect();

    // Slope at knot k as a linear form in the knot values a_{k-1}, a_k, a_{k+1}.
    let slope_grad: Vec<[(usize, f64); 3]> = (0..n)
        .map(|k| {
            let prev = (k + n - 1) % n;
            let (_, dp, dn) = knot_slope(h[prev], delta[prev], h[k], delta[k]);
            [
                (prev, -dp / h[prev]),
                (k, dp / h[prev] - dn / h[k]),
                ((k + 1) % n, dn / h[k]),
            ]
        })
        .collect();

    let mut jac = Jacobian {
        rows: thetas.len(),
        cols: n,
        data: vec![0.0; thetas.len() * n],
    };
    for (i, &theta) in thetas.iter().enumerate() {
        let t = theta.rem_euclid(TAU);
        let t = if t >= TAU { 0.0 } else { t };
        let k = locate(&x, t);
        let k1 = (k + 1) % n;
        let [b0, b1, c0, c1] = HermitePatch::basis(h[k], t - x[k]);
        let row = &mut jac.data[i * n..(i + 1) * n];
        row[k] += b0;
        row[k1] += b1;
        for &(j, g) in &slope_grad[k] {
            row[j] += c0 * g;
        }
        for &(j, g) in &slope_grad[k1] {
            row[j] += c1 * g;
        }
    }
    jac
}

/// Abscissae and values of the three-knot periodic demonstration data
/// `x = (0, 2π/3, 4π/3, 2π)`, `y = (0, a, ½, 0)`.
pub fn kink_template(a: f64) -> ([f64; 4], [f64; 4]) {
    ([0.0, TAU / 3.0, 2.0 * TAU / 3.0, TAU], [0.0, a, 0.5, 0.0])
}

/// Samples `(a, u_a(t))` of the periodic demonstration interpolant on a
/// uniform grid of `samples` values of `a` spanning `range`.
pub fn kink_sweep(range: (f64, f64), samples: usize, t: f64) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {samples}")));
    }
    if range.0.partial_cmp(&range.1) != Some(Ordering::Less) {
        return Err(Error::InvalidInput(format!("empty parameter range [{}, {}]", range.0, range.1)));
    }
    (0..samples)
        .map(|i| {
            let a = range.0 + (range.1 - range.0) * i as f64 / (samples - 1) as f64;
            let (x, y) = kink_template(a);
            let d = fc_slopes(&x, &y, true)?;
            Ok((a, pchip_eval(&x, &y, &d, t, true)?.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_mean_slopes() {
        assert_eq!(knot_slope(1.0, 1.0, 1.0, 1.0).0, 1.0);
        assert!((knot_slope(1.0, 1.0, 1.0, 3.0).0 - 1.5).abs() < 1e-15);
        assert_eq!(knot_slope(1.0, 1.0, 1.0, -1.0).0, 0.0);
        assert_eq!(knot_slope(1.0, 0.0, 1.0, 2.0).0, 0.0);
        assert_eq!(knot_slope(1.0, -2.0, 1.0, -0.0).0, 0.0);
    }

    #[test]
    fn weighted_mean_reduces_to_harmonic_mean_for_equal_widths() {
        let (d, _, _) = knot_slope(0.5, 1.0, 0.5 * (1.0 + 1e-12), 3.0);
        assert!((d - 1.5).abs() < 1e-11);
        // Unequal widths: (w1 + w2)/d = w1/δp + w2/δn.
        let (hp, hn, dp, dn) = (1.0, 2.0, 1.0, 4.0);
        let (w1, w2) = (2.0 * hn + hp, hn + 2.0 * hp);
        let d = knot_slope(hp, dp, hn, dn).0;
        assert!(((w1 + w2) / d - (w1 / dp + w2 / dn)).abs() < 1e-14);
    }

    #[test]
    fn slopes_in_fc_slopes_use_sign_rule() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 0.0, 1.0];
        let d = fc_slopes(&x, &y, false).unwrap();
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn rejects_non_increasing_abscissae() {
        assert!(fc_slopes(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0], false).is_err());
        assert!(fc_slopes(&[0.0, 2.0, 1.0], &[0.0, 1.0, 2.0], false).is_err());
        assert!(fc_slopes(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], true).is_err());
    }

    #[test]
    fn reproduces_knot_values_exactly() {
        let x = [0.0, 0.7, 1.1, 2.5, 3.0];
        let y = [1.0, -2.0, 0.3, 0.3, 5.0];
        let d = fc_slopes(&x, &y, false).unwrap();
        for k in 0..x.len() {
            let (v, dv) = pchip_eval(&x, &y, &d, x[k], false).unwrap();
            assert_eq!(v, y[k]);
            assert!((dv - d[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn reproduces_lines() {
        let x = [0.0, 0.5, 1.5, 1.75, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 + 3.0 * t).collect();
        let d = fc_slopes(&x, &y, false).unwrap();
        for dk in &d {
            assert!((dk - 3.0).abs() < 1e-14);
        }
        for i in 0..=60 {
            let t = 3.0 * i as f64 / 60.0;
            let (v, dv) = pchip_eval(&x, &y, &d, t, false).unwrap();
            assert!((v - (2.0 + 3.0 * t)).abs() < 1e-13, "{t}");
            assert!((dv - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_query_rejected_when_not_periodic() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 1.0, 0.5];
        let d = fc_slopes(&x, &y, false).unwrap();
        assert!(pchip_eval(&x, &y, &d, 2.5, false).is_err());
        assert!(pchip_eval(&x, &y, &d, -0.1, false).is_err());
    }

    /// Straightforward re-derivation of u_a(0.3) for the demonstration data,
    /// written out term by term.
    fn demo_value_by_hand(a: f64) -> f64 {
        let h = TAU / 3.0;
        let (d_last, d0, d1) = ((0.0 - 0.5) / h, (a - 0.0) / h, (0.5 - a) / h);
        let hm = |p: f64, q: f64| {
            if p * q > 0.0 {
                1.0 / (0.5 * (1.0 / p + 1.0 / q))
            } else {
                0.0
            }
        };
        let slope0 = hm(d_last, d0);
        let slope1 = hm(d0, d1);
        let s: f64 = 0.3;
        (3.0 * h * s * s - 2.0 * s.powi(3)) / h.powi(3) * a
            + (h.powi(3) - 3.0 * h * s * s + 2.0 * s.powi(3)) / h.powi(3) * 0.0
            + s * s * (s - h) / (h * h) * slope1
            + s * (s - h).powi(2) / (h * h) * slope0
    }

    #[test]
    fn demonstration_value_matches_hand_evaluation() {
        for a in [-0.4, -0.1, 0.25, 0.4, 0.8] {
            let (x, y) = kink_template(a);
            let d = fc_slopes(&x, &y, true).unwrap();
            let v = pchip_eval(&x, &y, &d, 0.3, true).unwrap().0;
            assert!((v - demo_value_by_hand(a)).abs() < 1e-14, "a = {a}");
        }
    }

    #[test]
    fn constant_control_has_constant_trace() {
        let c = ControlVector::constant(30, 2.0, 0.01, 10.0).unwrap();
        let thetas: Vec<f64> = (0..97).map(|i| TAU * i as f64 / 97.0).collect();
        assert!(control_trace(&c, &thetas).iter().all(|&u| (u - 2.0).abs() < 1e-15));
    }

    #[test]
    fn trace_at_knots_returns_knot_values() {
        let vals: Vec<f64> = (0..12).map(|k| 1.0 + ((k * 7) % 5) as f64).collect();
        let c = ControlVector::new(vals.clone(), 0.01, 10.0).unwrap();
        let knots = c.knots();
        let u = control_trace(&c, &knots[..12]);
        assert_eq!(u, vals);
    }

    #[test]
    fn jacobian_rows_sum_to_one_at_constant_control() {
        let c = ControlVector::constant(8, 3.0, 0.01, 10.0).unwrap();
        let thetas: Vec<f64> = (0..50).map(|i| 0.1 + 0.12 * i as f64).collect();
        let b = control_jacobian(&c, &thetas);
        for i in 0..b.rows {
            let s: f64 = b.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn control_rejects_bad_inputs() {
        assert!(ControlVector::new(vec![1.0, 2.0], 0.0, 1.0).is_err());
        assert!(ControlVector::new(vec![1.0; 4], 1.0, 1.0).is_err());
        assert!(ControlVector::new(vec![1.0, f64::NAN, 1.0], 0.0, 2.0).is_err());
    }

    #[test]
    fn sweep_returns_requested_samples() {
        let s = kink_sweep((-0.5, 1.0), 7, 0.3).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s[0].0, -0.5);
        assert_eq!(s[6].0, 1.0);
        assert!(kink_sweep((0.0, 1.0), 1, 0.3).is_err());
    }
}
