//! Box-constrained global optimization: DIRECT (dividing rectangles)
//! followed by a projected quasi-Newton refinement.
//!
//! DIRECT works on the unit cube spanned by the free dimensions. Every
//! rectangle is a center plus a per-dimension trisection level; side
//! length along dimension `i` is `3^-level[i]`. Each iteration selects the
//! potentially-optimal rectangles (lower-right convex hull of size vs.
//! value, with a relative improvement slack) and trisects them along their
//! longest sides.
//!
//! The refinement stage is a bound-projected BFGS descent with
//! finite-difference gradients, started from the best few DIRECT centers.
//! One evaluation budget covers both stages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("no free dimensions to optimize")]
    NoFreeDimensions,
    #[error("dimension {dim}: lower bound {lower} exceeds upper bound {upper}")]
    InvertedBounds { dim: usize, lower: f64, upper: f64 },
    #[error("dimension {dim}: non-finite bound")]
    NonFiniteBound { dim: usize },
    #[error("start point outside the box at dimension {dim}")]
    StartOutsideBox { dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid optimizer setting: {0}")]
    InvalidConfig(String),
}

/// Per-dimension bounds with optional fixed values. A fixed dimension is
/// never varied; a dimension whose bounds coincide is treated as fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    fixed: Vec<Option<f64>>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimizerError> {
        if lower.len() != upper.len() {
            return Err(OptimizerError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (dim, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(OptimizerError::NonFiniteBound { dim });
            }
            if lo > hi {
                return Err(OptimizerError::InvertedBounds {
                    dim,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        let fixed = lower
            .iter()
            .zip(&upper)
            .map(|(&lo, &hi)| (lo == hi).then_some(lo))
            .collect();
        Ok(Self {
            lower,
            upper,
            fixed,
        })
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit box is valid")
    }

    /// Pins dimension `dim` to `value`; the bounds widen to include it.
    pub fn fix(mut self, dim: usize, value: f64) -> Self {
        self.lower[dim] = self.lower[dim].min(value);
        self.upper[dim] = self.upper[dim].max(value);
        self.fixed[dim] = Some(value);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn fixed(&self) -> &[Option<f64>] {
        &self.fixed
    }

    pub fn free_dims(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.fixed[i].is_none()).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(i, &v)| match self.fixed[i] {
                Some(f) => v == f,
                None => v >= self.lower[i] && v <= self.upper[i],
            })
    }

    pub fn center(&self) -> Vec<f64> {
        let free = self.free_dims();
        self.from_unit(&free, &vec![0.5; free.len()])
    }

    /// Maps unit coordinates over `free` to a full point. Results are
    /// clamped so rounding never leaves the box.
    fn from_unit(&self, free: &[usize], u: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.dim())
            .map(|i| self.fixed[i].unwrap_or(self.lower[i]))
            .collect();
        for (&i, &ui) in free.iter().zip(u) {
            let v = self.lower[i] + ui * (self.upper[i] - self.lower[i]);
            x[i] = v.clamp(self.lower[i], self.upper[i]);
        }
        x
    }

    fn to_unit(&self, free: &[usize], x: &[f64]) -> Vec<f64> {
        free.iter()
            .map(|&i| ((x[i] - self.lower[i]) / (self.upper[i] - self.lower[i])).clamp(0.0, 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_direct_iterations: usize,
    pub max_function_evaluations: usize,
    pub max_rectangle_divisions: usize,
    /// Half-diagonal in unit coordinates below which a rectangle is no
    /// longer divided.
    pub min_rectangle_size: f64,
    pub refine_constraint_tolerance: f64,
    pub refine_optimality_tolerance: f64,
    pub refine_max_iterations: usize,
    pub refine_start_count: usize,
    pub po_epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_direct_iterations: 50,
            max_function_evaluations: 10_000,
            max_rectangle_divisions: 10_000,
            min_rectangle_size: 0.01,
            refine_constraint_tolerance: 1e-10,
            refine_optimality_tolerance: 1e-10,
            refine_max_iterations: 2000,
            refine_start_count: 3,
            po_epsilon: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let positive_counts = [
            ("max_direct_iterations", self.max_direct_iterations),
            ("max_function_evaluations", self.max_function_evaluations),
            ("max_rectangle_divisions", self.max_rectangle_divisions),
            ("refine_max_iterations", self.refine_max_iterations),
            ("refine_start_count", self.refine_start_count),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(OptimizerError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let positive_reals = [
            ("min_rectangle_size", self.min_rectangle_size),
            ("refine_constraint_tolerance", self.refine_constraint_tolerance),
            ("refine_optimality_tolerance", self.refine_optimality_tolerance),
            ("po_epsilon", self.po_epsilon),
        ];
        for (name, v) in positive_reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(OptimizerError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterationLimit,
    EvaluationLimit,
    DivisionLimit,
    MinRectangleSize,
    Converged,
    NoProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    /// Incumbent value after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub refinement_improved: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Values the optimizer cannot order (NaN, infinities) are replaced by
/// this large finite number.
const UNUSABLE_VALUE: f64 = 1e300;

/// Counts evaluations against a budget and maps unit coordinates to the box.
struct Evaluator<'a, F> {
    f: F,
    bounds: &'a Bounds,
    free: Vec<usize>,
    evaluations: usize,
    budget: usize,
}

impl<'a, F: FnMut(&[f64]) -> f64> Evaluator<'a, F> {
    fn new(f: F, bounds: &'a Bounds, budget: usize) -> Result<Self, OptimizerError> {
        let free = bounds.free_dims();
        if free.is_empty() {
            return Err(OptimizerError::NoFreeDimensions);
        }
        Ok(Self {
            f,
            bounds,
            free,
            evaluations: 0,
            budget,
        })
    }

    fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.evaluations)
    }

    fn eval(&mut self, u: &[f64]) -> Option<f64> {
        if self.evaluations >= self.budget {
            return None;
        }
        self.evaluations += 1;
        let x = self.bounds.from_unit(&self.free, u);
        let v = (self.f)(&x);
        Some(if v.is_finite() { v } else { UNUSABLE_VALUE })
    }

    fn point(&self, u: &[f64]) -> Vec<f64> {
        self.bounds.from_unit(&self.free, u)
    }
}

#[derive(Debug, Clone)]
struct Rect {
    center: Vec<f64>,
    levels: Vec<u32>,
    value: f64,
    size: f64,
}

fn half_diagonal(levels: &[u32]) -> f64 {
    // Sorting makes equal level multisets produce bit-identical sizes.
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    0.5 * sorted
        .iter()
        .map(|&l| 3f64.powi(-2 * l as i32))
        .sum::<f64>()
        .sqrt()
}

struct DirectState {
    rects: Vec<Rect>,
    best: usize,
    trace: Vec<f64>,
    iterations: usize,
    stop_reason: StopReason,
}

/// Indices of potentially-optimal rectangles, ascending by size.
fn potentially_optimal(rects: &[Rect], fmin: f64, eps: f64) -> Vec<usize> {
    // Lowest value per distinct size, ties to the lowest index.
    let mut by_size: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&i, &j| {
        rects[i]
            .size
            .total_cmp(&rects[j].size)
            .then(rects[i].value.total_cmp(&rects[j].value))
            .then(i.cmp(&j))
    });
    for i in order {
        match by_size.last() {
            Some(&last) if rects[last].size == rects[i].size => {}
            _ => by_size.push(i),
        }
    }

    let threshold = fmin - eps * fmin.abs();
    let mut selected = Vec::new();
    for (k, &j) in by_size.iter().enumerate() {
        let (dj, fj) = (rects[j].size, rects[j].value);
        let k_low = by_size[..k]
            .iter()
            .map(|&i| (fj - rects[i].value) / (dj - rects[i].size))
            .fold(f64::NEG_INFINITY, f64::max);
        let k_high = by_size[k + 1..]
            .iter()
            .map(|&i| (rects[i].value - fj) / (rects[i].size - dj))
            .fold(f64::INFINITY, f64::min);
        if k_high <= 0.0 || k_low > k_high {
            continue;
        }
        if k_high.is_finite() && fj - k_high * dj > threshold {
            continue;
        }
        selected.push(j);
    }
    selected
}

fn run_direct<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    cfg: &OptimizerConfig,
) -> DirectState {
    let n = ev.free.len();
    let center = vec![0.5; n];
    let value = ev.eval(&center).expect("budget checked positive");
    let levels = vec![0; n];
    let mut state = DirectState {
        rects: vec![Rect {
            size: half_diagonal(&levels),
            center,
            levels,
            value,
        }],
        best: 0,
        trace: vec![value],
        iterations: 0,
        stop_reason: StopReason::IterationLimit,
    };
    let mut divisions = 0usize;

    'outer: for _ in 0..cfg.max_direct_iterations {
        let fmin = state.rects[state.best].value;
        let selected: Vec<usize> = potentially_optimal(&state.rects, fmin, cfg.po_epsilon)
            .into_iter()
            .filter(|&j| state.rects[j].size >= cfg.min_rectangle_size)
            .collect();
        if selected.is_empty() {
            state.stop_reason = StopReason::MinRectangleSize;
            break;
        }
        for j in selected {
            if divisions >= cfg.max_rectangle_divisions {
                state.stop_reason = StopReason::DivisionLimit;
                break 'outer;
            }
            let min_level = *state.rects[j].levels.iter().min().expect("n >= 1");
            let long_dims: Vec<usize> = (0..n)
                .filter(|&i| state.rects[j].levels[i] == min_level)
                .collect();
            if ev.remaining() < 2 * long_dims.len() {
                state.stop_reason = StopReason::EvaluationLimit;
                break 'outer;
            }
            divide(ev, &mut state, j, &long_dims);
            divisions += 1;
        }
        state.iterations += 1;
        state.trace.push(state.rects[state.best].value);
    }
    state
}

/// Trisects rectangle `j` along `dims`, splitting first along the
/// dimension whose new points are best.
fn divide<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    state: &mut DirectState,
    j: usize,
    dims: &[usize],
) {
    let delta = 3f64.powi(-(state.rects[j].levels[dims[0]] as i32 + 1));
    let mut samples: Vec<(usize, f64, f64, Vec<f64>, Vec<f64>)> = Vec::with_capacity(dims.len());
    for &d in dims {
        let mut lo = state.rects[j].center.clone();
        let mut hi = lo.clone();
        lo[d] -= delta;
        hi[d] += delta;
        let f_lo = ev.eval(&lo).expect("budget reserved");
        let f_hi = ev.eval(&hi).expect("budget reserved");
        samples.push((d, f_lo, f_hi, lo, hi));
    }
    samples.sort_by(|a, b| a.1.min(a.2).total_cmp(&b.1.min(b.2)).then(a.0.cmp(&b.0)));
    for (d, f_lo, f_hi, lo, hi) in samples {
        state.rects[j].levels[d] += 1;
        let levels = state.rects[j].levels.clone();
        let size = half_diagonal(&levels);
        for (center, value) in [(lo, f_lo), (hi, f_hi)] {
            state.rects.push(Rect {
                center,
                levels: levels.clone(),
                value,
                size,
            });
            let idx = state.rects.len() - 1;
            if value < state.rects[state.best].value {
                state.best = idx;
            }
        }
    }
    state.rects[j].size = half_diagonal(&state.rects[j].levels);
}

/// DIRECT global search over the free dimensions of `bounds`.
pub fn direct_search<F: FnMut(&[f64]) -> f64>(
    f: F,
    bounds: &Bounds,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    cfg.validate()?;
    let mut ev = Evaluator::new(f, bounds, cfg.max_function_evaluations)?;
    let state = run_direct(&mut ev, cfg);
    let best = &state.rects[state.best];
    Ok(OptimizationResult {
        best_point: ev.point(&best.center),
        best_value: best.value,
        evaluations: ev.evaluations,
        trace: state.trace,
        refinement_improved: false,
        iterations: state.iterations,
        stop_reason: state.stop_reason,
    })
}

struct RefineOutcome {
    point: Vec<f64>,
    value: f64,
    trace: Vec<f64>,
    iterations: usize,
    stop_reason: StopReason,
}

const FD_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Finite-difference gradient in unit coordinates; central where the
/// stencil fits inside the cube, one-sided at the faces.
fn gradient<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    u: &[f64],
    fu: f64,
) -> Option<Vec<f64>> {
    let mut g = vec![0.0; u.len()];
    let mut probe = u.to_vec();
    for i in 0..u.len() {
        let h = FD_STEP * u[i].abs().max(1.0);
        let (lo, hi) = (u[i] - h, u[i] + h);
        g[i] = if lo >= 0.0 && hi <= 1.0 {
            probe[i] = hi;
            let f_hi = ev.eval(&probe)?;
            probe[i] = lo;
            let f_lo = ev.eval(&probe)?;
            (f_hi - f_lo) / (2.0 * h)
        } else if hi <= 1.0 {
            probe[i] = hi;
            (ev.eval(&probe)? - fu) / h
        } else {
            probe[i] = lo;
            (fu - ev.eval(&probe)?) / h
        };
        probe[i] = u[i];
    }
    Some(g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Components pinned at a face with the gradient pushing outward.
fn active_set(u: &[f64], g: &[f64]) -> Vec<bool> {
    u.iter()
        .zip(g)
        .map(|(&ui, &gi)| (ui <= 0.0 && gi > 0.0) || (ui >= 1.0 && gi < 0.0))
        .collect()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Inverse-Hessian BFGS update with step `s` and gradient change `y`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy = dot(s, y);
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn refine_unit<F: FnMut(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    start: Vec<f64>,
    f_start: f64,
    cfg: &OptimizerConfig,
) -> RefineOutcome {
    let n = start.len();
    let mut x = start;
    let mut fx = f_start;
    let mut trace = vec![fx];
    let outcome = |x: Vec<f64>, fx: f64, trace: Vec<f64>, iterations, stop_reason| RefineOutcome {
        point: x,
        value: fx,
        trace,
        iterations,
        stop_reason,
    };
    let Some(mut g) = gradient(ev, &x, fx) else {
        return outcome(x, fx, trace, 0, StopReason::EvaluationLimit);
    };
    let mut h = identity(n);
    let mut h_is_identity = true;
    let mut active = active_set(&x, &g);

    for iter in 0..cfg.refine_max_iterations {
        let projected: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| (xi - gi).clamp(0.0, 1.0) - xi)
            .collect();
        if max_abs(&projected) <= cfg.refine_optimality_tolerance {
            return outcome(x, fx, trace, iter, StopReason::Converged);
        }

        let g_free: Vec<f64> = g
            .iter()
            .zip(&active)
            .map(|(&gi, &a)| if a { 0.0 } else { gi })
            .collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| if active[i] { 0.0 } else { -dot(&h[i], &g_free) })
            .collect();
        if dot(&d, &g_free) >= 0.0 {
            h = identity(n);
            h_is_identity = true;
            d = g_free.iter().map(|v| -v).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x
                .iter()
                .zip(&d)
                .map(|(&xi, &di)| (xi + t * di).clamp(0.0, 1.0))
                .collect();
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if max_abs(&step) <= cfg.refine_constraint_tolerance {
                break;
            }
            let Some(f_trial) = ev.eval(&trial) else {
                return outcome(x, fx, trace, iter, StopReason::EvaluationLimit);
            };
            if f_trial <= fx + ARMIJO * dot(&g, &step) {
                accepted = Some((trial, f_trial, step));
                break;
            }
            t *= 0.5;
        }

        let Some((x_new, f_new, step)) = accepted else {
            if h_is_identity {
                return outcome(x, fx, trace, iter, StopReason::NoProgress);
            }
            h = identity(n);
            h_is_identity = true;
            continue;
        };
        let Some(g_new) = gradient(ev, &x_new, f_new) else {
            return outcome(x_new, f_new, trace, iter + 1, StopReason::EvaluationLimit);
        };
        let decrease = fx - f_new;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let new_active = active_set(&x_new, &g_new);
        if new_active != active {
            h = identity(n);
            h_is_identity = true;
        } else if dot(&step, &y) > 1e-12 * (dot(&step, &step) * dot(&y, &y)).sqrt() {
            bfgs_update(&mut h, &step, &y);
            h_is_identity = false;
        }
        active = new_active;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if decrease <= cfg.refine_optimality_tolerance * (1.0 + fx.abs()) {
            return outcome(x, fx, trace, iter + 1, StopReason::Converged);
        }
    }
    let iterations = cfg.refine_max_iterations;
    outcome(x, fx, trace, iterations, StopReason::IterationLimit)
}

/// Projected quasi-Newton descent from `start`. Never returns a point
/// worse than `start`.
pub fn local_refine<F: FnMut(&[f64]) -> f64>(
    f: F,
    bounds: &Bounds,
    start: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    cfg.validate()?;
    if start.len() != bounds.dim() {
        return Err(OptimizerError::DimensionMismatch {
            expected: bounds.dim(),
            got: start.len(),
        });
    }
    if let Some(dim) = (0..bounds.dim()).find(|&i| match bounds.fixed[i] {
        Some(v) => start[i] != v,
        None => !(start[i] >= bounds.lower[i] && start[i] <= bounds.upper[i]),
    }) {
        return Err(OptimizerError::StartOutsideBox { dim });
    }
    // Refinement alone is bounded by its iteration limit, not the
    // evaluation budget.
    let mut ev = Evaluator::new(f, bounds, usize::MAX)?;
    let u0 = bounds.to_unit(&ev.free, start);
    let f0 = ev.eval(&u0).expect("unbounded budget");
    let out = refine_unit(&mut ev, u0, f0, cfg);
    let improved = out.value < f0;
    let (point, value) = if improved {
        (ev.point(&out.point), out.value)
    } else {
        (start.to_vec(), f0)
    };
    Ok(OptimizationResult {
        best_point: point,
        best_value: value,
        evaluations: ev.evaluations,
        trace: out.trace,
        refinement_improved: improved,
        iterations: out.iterations,
        stop_reason: out.stop_reason,
    })
}

/// DIRECT followed by refinement from the best `refine_start_count`
/// DIRECT centers, all within `max_function_evaluations`.
pub fn optimize<F: FnMut(&[f64]) -> f64>(
    f: F,
    bounds: &Bounds,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    cfg.validate()?;
    let mut ev = Evaluator::new(f, bounds, cfg.max_function_evaluations)?;
    let state = run_direct(&mut ev, cfg);

    let mut ranked: Vec<usize> = (0..state.rects.len()).collect();
    ranked.sort_by(|&i, &j| {
        state.rects[i]
            .value
            .total_cmp(&state.rects[j].value)
            .then(i.cmp(&j))
    });
    let direct_best = state.rects[state.best].value;
    let mut best_u = state.rects[state.best].center.clone();
    let mut best_value = direct_best;
    let mut trace = state.trace;
    let mut iterations = state.iterations;
    let mut stop_reason = state.stop_reason;

    for &idx in ranked.iter().take(cfg.refine_start_count) {
        if ev.remaining() == 0 {
            stop_reason = StopReason::EvaluationLimit;
            break;
        }
        let rect = &state.rects[idx];
        let out = refine_unit(&mut ev, rect.center.clone(), rect.value, cfg);
        iterations += out.iterations;
        if out.value < best_value {
            best_value = out.value;
            best_u = out.point;
        }
        trace.push(best_value);
        if out.stop_reason == StopReason::EvaluationLimit {
            stop_reason = StopReason::EvaluationLimit;
        }
    }

    Ok(OptimizationResult {
        best_point: ev.point(&best_u),
        best_value,
        evaluations: ev.evaluations,
        trace,
        refinement_improved: best_value < direct_best,
        iterations,
        stop_reason,
    })
}
