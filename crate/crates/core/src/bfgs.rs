//! BFGS minimization with either a strong-Wolfe line search or the
//! bracketing weak-Wolfe line search used for nonsmooth objectives.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Strong-Wolfe line search with cubic interpolation.
    Standard,
    /// Bracketing bisection on the weak Wolfe conditions.
    WeakWolfe,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::WeakWolfe => "weak_wolfe",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "weak_wolfe" => Ok(Variant::WeakWolfe),
            _ => Err(Error::InvalidInput(format!(
                "unknown optimizer variant {s:?}, expected standard or weak_wolfe"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub max_feval: usize,
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// First trial step of the first iteration, divided by `‖g₀‖` when that
    /// exceeds one. Later iterations start from the unit step.
    pub init_step: f64,
    /// Keep every evaluated point in the trace.
    pub record_points: bool,
}

impl OptimizerConfig {
    pub fn new(variant: Variant) -> Self {
        let c2 = match variant {
            Variant::Standard => 0.9,
            Variant::WeakWolfe => 0.5,
        };
        Self {
            variant,
            max_feval: 400,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2,
            init_step: 1.0,
            record_points: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "line search needs 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.max_feval == 0 {
            return Err(Error::InvalidInput("max_feval must be at least 1".into()));
        }
        if !(self.grad_tol >= 0.0 && self.init_step > 0.0 && self.init_step.is_finite()) {
            return Err(Error::InvalidInput("grad_tol must be >= 0 and init_step > 0".into()));
        }
        Ok(())
    }
}

/// One callback evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub feval: usize,
    pub value: f64,
    pub best: f64,
    pub grad_norm: f64,
    /// Line-search step that produced the point, 0 for the starting point.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    BudgetExhausted,
    LineSearchFailure,
    NoDecrease,
    NonFiniteStart,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::LineSearchFailure => "line_search_failure",
            Termination::NoDecrease => "no_decrease",
            Termination::NonFiniteStart => "non_finite_start",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRunTrace {
    pub variant: Variant,
    pub records: Vec<TraceRecord>,
    /// Evaluated points, when requested.
    pub points: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Best point evaluated.
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub iterations: usize,
    pub wall_clock: Duration,
}

pub const TRACE_CSV_HEADER: &str = "feval,J,bestJ,gradnorm,step";

impl OptRunTrace {
    pub fn initial_value(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.value)
    }

    pub fn best_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TRACE_CSV_HEADER}\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.feval, r.value, r.best, r.grad_norm, r.step
            ));
        }
        out
    }
}

/// Callback failure, with the trace up to the failing evaluation.
#[derive(Debug)]
pub struct Interrupted<E> {
    pub source: E,
    pub trace: OptRunTrace,
}

impl<E: fmt::Display> fmt::Display for Interrupted<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "objective evaluation {} failed: {}",
            self.trace.records.len() + 1,
            self.source
        )
    }
}

impl<E: std::error::Error + 'static> std::error::Error for Interrupted<E> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

enum Stop<E> {
    Budget,
    Callback(E),
}

type Callback<'a, E> = dyn FnMut(&[f64]) -> std::result::Result<(f64, Vec<f64>), E> + 'a;

struct Evaluator<'a, E> {
    callback: &'a mut Callback<'a, E>,
    budget: usize,
    record_points: bool,
    records: Vec<TraceRecord>,
    points: Vec<Vec<f64>>,
    best: Option<(f64, Vec<f64>)>,
}

impl<E> Evaluator<'_, E> {
    fn eval(&mut self, x: Vec<f64>, step: f64) -> std::result::Result<Point, Stop<E>> {
        if self.records.len() >= self.budget {
            return Err(Stop::Budget);
        }
        let (f, g) = (self.callback)(&x).map_err(Stop::Callback)?;
        assert_eq!(g.len(), x.len(), "gradient length must match the point");
        // Non-finite values count as +∞ so that line searches back off.
        let f = if f.is_finite() && g.iter().all(|v| v.is_finite()) { f } else { f64::INFINITY };
        if self.best.as_ref().is_none_or(|(b, _)| f < *b) {
            self.best = Some((f, x.clone()));
        }
        let best = self.best.as_ref().map_or(f, |b| b.0);
        self.records.push(TraceRecord {
            feval: self.records.len() + 1,
            value: f,
            best,
            grad_norm: norm(&g),
            step,
        });
        if self.record_points {
            self.points.push(x.clone());
        }
        Ok(Point { x, f, g })
    }

    fn remaining(&self) -> usize {
        self.budget - self.records.len()
    }
}

enum Search {
    Accepted(Point),
    /// No Wolfe point found; carries the best trial with sufficient decrease.
    Failed(Option<Point>),
}

fn trial(x: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + t * di).collect()
}

const MAX_ZOOM: usize = 30;
const MAX_EXPAND: usize = 60;
const MAX_BISECT: usize = 30;

/// Minimizer of the cubic interpolating values and slopes at `a` and `b`,
/// safeguarded to stay well inside the interval.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc >= 0.0 && fa.is_finite() && fb.is_finite() {
        let d2 = (b - a).signum() * disc.sqrt();
        let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
        if t.is_finite() && t >= lo + margin && t <= hi - margin {
            return t;
        }
    }
    0.5 * (a + b)
}

fn strong_wolfe<E>(
    ev: &mut Evaluator<'_, E>,
    cur: &Point,
    d: &[f64],
    t0: f64,
    c1: f64,
    c2: f64,
) -> std::result::Result<Search, Stop<E>> {
    let f0 = cur.f;
    let dphi0 = dot(&cur.g, d);
    let armijo = |t: f64, f: f64| f <= f0 + c1 * t * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -c2 * dphi0;

    let mut prev = (0.0, f0, dphi0, None::<Point>);
    let mut t = t0;
    for i in 0..MAX_EXPAND {
        let p = ev.eval(trial(&cur.x, d, t), t)?;
        let dphi = dot(&p.g, d);
        let (lo, hi) = if !armijo(t, p.f) || (i > 0 && p.f >= prev.1) {
            (prev, (t, p.f, dphi, Some(p)))
        } else if curvature(dphi) {
            return Ok(Search::Accepted(p));
        } else if dphi >= 0.0 {
            ((t, p.f, dphi, Some(p)), prev)
        } else {
            prev = (t, p.f, dphi, Some(p));
            t *= 2.0;
            continue;
        };
        return zoom(ev, cur, d, lo, hi, f0, dphi0, c1, c2);
    }
    Ok(Search::Failed(prev.3))
}

type Bracket = (f64, f64, f64, Option<Point>);

#[allow(clippy::too_many_arguments)]
fn zoom<E>(
    ev: &mut Evaluator<'_, E>,
    cur: &Point,
    d: &[f64],
    mut lo: Bracket,
    mut hi: Bracket,
    f0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
) -> std::result::Result<Search, Stop<E>> {
    for _ in 0..MAX_ZOOM {
        if (hi.0 - lo.0).abs() <= f64::EPSILON * lo.0.abs().max(hi.0.abs()) {
            break;
        }
        let t = cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        let p = ev.eval(trial(&cur.x, d, t), t)?;
        let dphi = dot(&p.g, d);
        if p.f > f0 + c1 * t * dphi0 || p.f >= lo.1 {
            hi = (t, p.f, dphi, Some(p));
        } else {
            if dphi.abs() <= -c2 * dphi0 {
                return Ok(Search::Accepted(p));
            }
            if dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (t, p.f, dphi, Some(p));
        }
    }
    Ok(Search::Failed(lo.3))
}

fn weak_wolfe<E>(
    ev: &mut Evaluator<'_, E>,
    cur: &Point,
    d: &[f64],
    t0: f64,
    c1: f64,
    c2: f64,
) -> std::result::Result<Search, Stop<E>> {
    let f0 = cur.f;
    let dphi0 = dot(&cur.g, d);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut best: Option<Point> = None;
    let (mut nbisect, mut nexpand) = (0, 0);
    let mut t = t0;
    loop {
        let p = ev.eval(trial(&cur.x, d, t), t)?;
        if p.f > f0 + c1 * t * dphi0 {
            hi = t;
        } else if dot(&p.g, d) < c2 * dphi0 {
            lo = t;
            if best.as_ref().is_none_or(|b| p.f < b.f) {
                best = Some(p);
            }
        } else {
            return Ok(Search::Accepted(p));
        }
        if hi.is_finite() {
            nbisect += 1;
            if nbisect > MAX_BISECT {
                break;
            }
            t = 0.5 * (lo + hi);
        } else {
            nexpand += 1;
            if nexpand > MAX_EXPAND {
                break;
            }
            t = 2.0 * lo;
        }
    }
    Ok(Search::Failed(best))
}

/// Positive-definite check of `H` along fixed pseudo-random directions.
fn check_positive_definite(h: &[Vec<f64>]) -> bool {
    let n = h.len();
    (0..10).all(|j| {
        let d: Vec<f64> = (0..n).map(|i| ((i * 7 + j * 13 + 1) as f64 * 0.618).sin()).collect();
        let hd: Vec<f64> = h.iter().map(|row| dot(row, &d)).collect();
        dot(&d, &hd) > 0.0
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let n = s.len();
    let rho = 1.0 / dot(s, y);
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Minimizes `f` from `a0` with BFGS.
///
/// `f` returns the value and gradient. The returned point is the best point
/// evaluated; the number of evaluations never exceeds `cfg.max_feval`.
pub fn minimize<E, F>(
    mut f: F,
    a0: &[f64],
    cfg: &OptimizerConfig,
) -> std::result::Result<(Vec<f64>, OptRunTrace), Interrupted<E>>
where
    F: FnMut(&[f64]) -> std::result::Result<(f64, Vec<f64>), E>,
{
    cfg.validate().expect("invalid optimizer configuration");
    assert!(a0.iter().all(|v| v.is_finite()), "starting point must be finite");
    let start = Instant::now();
    let n = a0.len();
    let mut ev = Evaluator {
        callback: &mut f,
        budget: cfg.max_feval,
        record_points: cfg.record_points,
        records: Vec::new(),
        points: Vec::new(),
        best: None,
    };
    let mut iterations = 0;

    let outcome: std::result::Result<Termination, Stop<E>> = (|| {
        let mut cur = ev.eval(a0.to_vec(), 0.0)?;
        if !cur.f.is_finite() {
            return Ok(Termination::NonFiniteStart);
        }
        let mut h = identity(n);
        let mut scaled = false;
        let mut restarted = false;
        loop {
            if norm(&cur.g) <= cfg.grad_tol {
                return Ok(Termination::GradientTolerance);
            }
            if ev.remaining() == 0 {
                return Ok(Termination::BudgetExhausted);
            }
            let mut d: Vec<f64> = h.iter().map(|row| -dot(row, &cur.g)).collect();
            if dot(&d, &cur.g) >= 0.0 {
                h = identity(n);
                d = cur.g.iter().map(|g| -g).collect();
            }
            let t0 = if iterations == 0 {
                cfg.init_step * (1.0 / norm(&cur.g)).min(1.0)
            } else {
                1.0
            };
            iterations += 1;
            let search = match cfg.variant {
                Variant::Standard => strong_wolfe(&mut ev, &cur, &d, t0, cfg.c1, cfg.c2)?,
                Variant::WeakWolfe => weak_wolfe(&mut ev, &cur, &d, t0, cfg.c1, cfg.c2)?,
            };
            let next = match search {
                Search::Accepted(p) => p,
                Search::Failed(fallback) => {
                    if let Some(p) = fallback.filter(|p| p.f < cur.f) {
                        cur = p;
                    }
                    if cfg.variant == Variant::WeakWolfe && !restarted {
                        restarted = true;
                        h = identity(n);
                        scaled = false;
                        continue;
                    }
                    return Ok(Termination::LineSearchFailure);
                }
            };
            if next.f >= cur.f {
                return Ok(Termination::NoDecrease);
            }
            restarted = false;
            let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if !scaled {
                    let gamma = sy / dot(&y, &y);
                    h = identity(n);
                    for (i, row) in h.iter_mut().enumerate() {
                        row[i] = gamma;
                    }
                    scaled = true;
                }
                let mut updated = h.clone();
                bfgs_update(&mut updated, &s, &y);
                // Near a kink H shrinks to rounding level and the update can
                // lose definiteness numerically; such updates are dropped.
                if check_positive_definite(&updated) {
                    h = updated;
                }
                debug_assert!(check_positive_definite(&h), "inverse Hessian lost definiteness");
            }
            cur = next;
        }
    })();

    let (best_value, best_point) = ev.best.take().unwrap_or((f64::NAN, a0.to_vec()));
    let mut trace = OptRunTrace {
        variant: cfg.variant,
        records: std::mem::take(&mut ev.records),
        points: std::mem::take(&mut ev.points),
        termination: Termination::BudgetExhausted,
        best_point,
        best_value,
        iterations,
        wall_clock: start.elapsed(),
    };
    match outcome {
        Ok(t) => {
            trace.termination = t;
            Ok((trace.best_point.clone(), trace))
        }
        Err(Stop::Budget) => Ok((trace.best_point.clone(), trace)),
        Err(Stop::Callback(source)) => Err(Interrupted { source, trace }),
    }
}

/// Best-so-far series of several runs on a shared evaluation axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub fevals: Vec<usize>,
    /// One column per run; a run shorter than the axis holds its final value.
    pub columns: Vec<Vec<f64>>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feval");
        for name in &self.names {
            out.push_str(&format!(",{name}"));
        }
        out.push('\n');
        for (row, feval) in self.fevals.iter().enumerate() {
            out.push_str(&feval.to_string());
            for col in &self.columns {
                out.push_str(&format!(",{:e}", col[row]));
            }
            out.push('\n');
        }
        out
    }
}

/// Aligns the best-so-far series of `traces` on evaluations `1..=max_len`.
pub fn compare_runs(traces: &[(&str, &OptRunTrace)]) -> Result<Comparison> {
    let series: Vec<(&str, Vec<f64>)> = traces.iter().map(|(n, t)| (*n, t.best_series())).collect();
    compare_series(&series)
}

/// [`compare_runs`] on bare best-so-far series, e.g. read back from trace
/// files.
pub fn compare_series(series: &[(&str, Vec<f64>)]) -> Result<Comparison> {
    if series.is_empty() {
        return Err(Error::InvalidInput("a comparison needs at least one trace".into()));
    }
    if let Some((name, _)) = series.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::InvalidInput(format!("trace {name} has no evaluations")));
    }
    let len = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let columns = series
        .iter()
        .map(|(_, best)| {
            let last = *best.last().expect("non-empty");
            (0..len).map(|k| best.get(k).copied().unwrap_or(last)).collect()
        })
        .collect();
    Ok(Comparison {
        names: series.iter().map(|(n, _)| n.to_string()).collect(),
        fevals: (1..=len).collect(),
        columns,
    })
}
