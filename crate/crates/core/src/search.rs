//! Two-stage maximisation of the objective over pan, roll, tilt and field of
//! view.
//!
//! Stage one evaluates a `k⁴` grid of cell-centre proposals. Stage two runs a
//! bounded Nelder–Mead ascent from each of the best `l` proposals and keeps the
//! best result. Everything is deterministic: grid evaluation may run in
//! parallel but results are collected by index, and ties are broken by the
//! lowest linear grid index.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviation::LineSegment;
use crate::error::{Error, Result};
use crate::geometry::{CameraParams, EulerAngles};
use crate::likelihood::{Evaluator, MixtureConfig, ProcessLabel, SegmentScore};
use crate::reliability::{compute_cues, LoglikNormalization, ReliabilityCues};

/// Closed interval `[lo, hi]` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Centre of cell `j` when the range is split into `k` equal cells.
    pub fn cell_center(&self, j: usize, k: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.width() / k as f64
    }
}

/// A point of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub pan: f64,
    pub roll: f64,
    pub tilt: f64,
    pub hfov: f64,
}

impl SearchPoint {
    pub fn from_array(v: [f64; 4]) -> Self {
        Self { pan: v[0], roll: v[1], tilt: v[2], hfov: v[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.pan, self.roll, self.tilt, self.hfov]
    }

    pub fn angles(&self) -> EulerAngles {
        EulerAngles::new(self.pan, self.roll, self.tilt)
    }

    pub fn camera(&self, width: u32, height: u32) -> Result<CameraParams> {
        CameraParams::from_euler(&self.angles(), self.hfov, width, height)
    }
}

/// Search box, one range per dimension, in [`SearchPoint`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub pan: Range,
    pub roll: Range,
    pub tilt: Range,
    pub hfov: Range,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            pan: Range::new(-45.0, 45.0),
            roll: Range::new(-15.0, 15.0),
            tilt: Range::new(-35.0, 35.0),
            hfov: Range::new(50.0, 130.0),
        }
    }
}

impl Bounds {
    pub fn ranges(&self) -> [Range; 4] {
        [self.pan, self.roll, self.tilt, self.hfov]
    }

    pub fn contains(&self, p: &SearchPoint) -> bool {
        self.ranges().iter().zip(p.to_array()).all(|(r, v)| r.contains(v))
    }

    fn clamp(&self, v: [f64; 4]) -> [f64; 4] {
        let r = self.ranges();
        std::array::from_fn(|i| v[i].clamp(r[i].lo, r[i].hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid resolution per dimension.
    pub grid_k: usize,
    /// Number of top grid proposals refined.
    pub seeds: usize,
    pub bounds: Bounds,
    /// Cap on refinement iterations per seed; `None` runs to tolerance.
    pub max_iterations: Option<usize>,
    /// Convergence tolerance on the angles, degrees.
    pub angle_tol: f64,
    /// Convergence tolerance on the field of view, relative.
    pub fov_rel_tol: f64,
    /// Initial simplex edge as a fraction of the grid cell width.
    pub initial_step: f64,
    /// Simplex restarts after convergence, each with a smaller simplex.
    pub restarts: usize,
    /// Hard limit on objective evaluations per seed.
    pub max_evaluations: usize,
    /// Evaluate the grid on the rayon pool.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_k: 8,
            seeds: 4,
            bounds: Bounds::default(),
            max_iterations: None,
            angle_tol: 1e-4,
            fov_rel_tol: 1e-4,
            initial_step: 0.5,
            restarts: 3,
            max_evaluations: 20_000,
            parallel: true,
        }
    }
}

impl SearchConfig {
    /// Refinement capped at ten iterations per seed.
    pub fn fast() -> Self {
        Self { max_iterations: Some(10), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_k < 2 {
            return Err(Error::InvalidConfig(format!("grid_k must be at least 2, got {}", self.grid_k)));
        }
        let total = self.grid_k.pow(4);
        if self.seeds < 1 || self.seeds > total {
            return Err(Error::InvalidConfig(format!("seeds must be in [1, {total}], got {}", self.seeds)));
        }
        for r in self.bounds.ranges() {
            if !(r.lo < r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
                return Err(Error::InvalidConfig(format!("empty search range [{}, {}]", r.lo, r.hi)));
            }
        }
        if !(self.bounds.hfov.lo > 0.0 && self.bounds.hfov.hi < 180.0) {
            return Err(Error::InvalidConfig("field-of-view bounds must lie in (0, 180)".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig("iteration cap must be at least 1".into()));
        }
        if !(self.angle_tol > 0.0 && self.fov_rel_tol > 0.0 && self.initial_step > 0.0) {
            return Err(Error::InvalidConfig("tolerances and step must be positive".into()));
        }
        Ok(())
    }

    fn tolerances(&self, hfov: f64) -> [f64; 4] {
        [self.angle_tol, self.angle_tol, self.angle_tol, self.fov_rel_tol * hfov]
    }

    fn steps(&self) -> [f64; 4] {
        let k = self.grid_k as f64;
        self.bounds.ranges().map(|r| self.initial_step * r.width() / k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    /// Linear grid index `((i_pan·k + i_roll)·k + i_tilt)·k + i_fov`.
    pub index: usize,
    pub point: SearchPoint,
    pub objective: f64,
}

/// All grid proposals, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEvaluation {
    pub k: usize,
    pub proposals: Vec<Proposal>,
}

impl GridEvaluation {
    pub fn best(&self) -> &Proposal {
        &self.proposals[0]
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.proposals.iter().map(|p| p.objective).collect()
    }

    pub fn is_sorted(&self) -> bool {
        self.proposals.windows(2).all(|w| {
            w[0].objective > w[1].objective || (w[0].objective == w[1].objective && w[0].index < w[1].index)
        })
    }
}

/// The grid proposal with linear index `index`.
pub fn grid_point(bounds: &Bounds, k: usize, index: usize) -> SearchPoint {
    let ranges = bounds.ranges();
    let mut rest = index;
    let mut out = [0.0; 4];
    for dim in (0..4).rev() {
        out[dim] = ranges[dim].cell_center(rest % k, k);
        rest /= k;
    }
    SearchPoint::from_array(out)
}

fn evaluate_point(ev: &Evaluator, p: &SearchPoint) -> f64 {
    let (w, h) = ev.image_size();
    // Bounds are validated to lie in (0, 180), so construction cannot fail.
    let params = p.camera(w, h).expect("search point inside validated bounds");
    ev.objective(&params)
}

pub(crate) fn grid_with_evaluator(ev: &Evaluator, search: &SearchConfig) -> Result<GridEvaluation> {
    search.validate()?;
    let k = search.grid_k;
    let total = k.pow(4);
    let eval = |index: usize| {
        let point = grid_point(&search.bounds, k, index);
        Proposal { index, point, objective: evaluate_point(ev, &point) }
    };
    let mut proposals: Vec<Proposal> = if search.parallel {
        (0..total).into_par_iter().map(eval).collect()
    } else {
        (0..total).map(eval).collect()
    };
    proposals.sort_by(|a, b| b.objective.total_cmp(&a.objective).then(a.index.cmp(&b.index)));
    Ok(GridEvaluation { k, proposals })
}

/// Stage one: evaluates the objective at every grid proposal.
pub fn grid_stage(
    segments: &[LineSegment],
    config: &MixtureConfig,
    search: &SearchConfig,
    width: u32,
    height: u32,
) -> Result<GridEvaluation> {
    let ev = Evaluator::new(segments, config, width, height)?;
    grid_with_evaluator(&ev, search)
}

/// Outcome of refining one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    pub seed: SearchPoint,
    pub seed_objective: f64,
    pub point: SearchPoint,
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Simplex {
    vertices: Vec<[f64; 4]>,
    values: Vec<f64>,
}

impl Simplex {
    /// Orders vertices best (highest) first, ties by construction order.
    fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.vertices.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        self.vertices = idx.iter().map(|&i| self.vertices[i]).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    fn spread_within(&self, tol: &[f64; 4]) -> bool {
        let best = self.vertices[0];
        self.vertices.iter().all(|v| (0..4).all(|d| (v[d] - best[d]).abs() <= tol[d]))
    }
}

/// Bounded Nelder–Mead ascent. Trial points are projected onto the box.
struct Ascent<'a, F: Fn(&[f64; 4]) -> f64> {
    f: F,
    bounds: &'a Bounds,
    tol: [f64; 4],
    iterations: usize,
    evaluations: usize,
    max_iterations: Option<usize>,
    max_evaluations: usize,
}

impl<F: Fn(&[f64; 4]) -> f64> Ascent<'_, F> {
    fn eval(&mut self, x: [f64; 4]) -> ([f64; 4], f64) {
        let x = self.bounds.clamp(x);
        self.evaluations += 1;
        (x, (self.f)(&x))
    }

    fn budget_left(&self) -> bool {
        self.max_iterations.is_none_or(|cap| self.iterations < cap) && self.evaluations < self.max_evaluations
    }

    /// Runs one simplex from `start` and returns the best vertex and whether
    /// the simplex contracted below tolerance.
    fn run(&mut self, start: [f64; 4], start_value: f64, steps: [f64; 4]) -> ([f64; 4], f64, bool) {
        const REFLECT: f64 = 1.0;
        const EXPAND: f64 = 2.0;
        const CONTRACT: f64 = 0.5;
        const SHRINK: f64 = 0.5;

        let ranges = self.bounds.ranges();
        let mut simplex = Simplex { vertices: vec![start], values: vec![start_value] };
        for d in 0..4 {
            let mut v = start;
            v[d] = if start[d] + steps[d] <= ranges[d].hi { start[d] + steps[d] } else { start[d] - steps[d] };
            let (v, fv) = self.eval(v);
            simplex.vertices.push(v);
            simplex.values.push(fv);
        }
        simplex.order();

        let mut converged = simplex.spread_within(&self.tol);
        while !converged && self.budget_left() {
            self.iterations += 1;
            let n = simplex.vertices.len() - 1;
            let worst = simplex.vertices[n];
            let worst_value = simplex.values[n];
            let centroid: [f64; 4] =
                std::array::from_fn(|d| simplex.vertices[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64);
            let along = |t: f64| -> [f64; 4] { std::array::from_fn(|d| centroid[d] + t * (centroid[d] - worst[d])) };

            let (xr, fr) = self.eval(along(REFLECT));
            if fr > simplex.values[0] {
                let (xe, fe) = self.eval(along(REFLECT * EXPAND));
                let (x, fx) = if fe > fr { (xe, fe) } else { (xr, fr) };
                simplex.vertices[n] = x;
                simplex.values[n] = fx;
            } else if fr > simplex.values[n - 1] {
                simplex.vertices[n] = xr;
                simplex.values[n] = fr;
            } else {
                let (xc, fc) = if fr > worst_value {
                    self.eval(along(REFLECT * CONTRACT))
                } else {
                    self.eval(along(-CONTRACT))
                };
                if fc > fr.max(worst_value) {
                    simplex.vertices[n] = xc;
                    simplex.values[n] = fc;
                } else {
                    let best = simplex.vertices[0];
                    for i in 1..=n {
                        let shrunk = std::array::from_fn(|d| best[d] + SHRINK * (simplex.vertices[i][d] - best[d]));
                        let (x, fx) = self.eval(shrunk);
                        simplex.vertices[i] = x;
                        simplex.values[i] = fx;
                    }
                }
            }
            simplex.order();
            converged = simplex.spread_within(&self.tol);
        }
        (simplex.vertices[0], simplex.values[0], converged)
    }
}

pub(crate) fn refine_with_evaluator(ev: &Evaluator, seed: &SearchPoint, search: &SearchConfig) -> RefineTrace {
    let f = |x: &[f64; 4]| evaluate_point(ev, &SearchPoint::from_array(*x));
    let seed_arr = search.bounds.clamp(seed.to_array());
    let seed_value = f(&seed_arr);
    let mut ascent = Ascent {
        f,
        bounds: &search.bounds,
        tol: search.tolerances(seed_arr[3]),
        iterations: 0,
        evaluations: 1,
        max_iterations: search.max_iterations,
        max_evaluations: search.max_evaluations,
    };

    let (mut best, mut best_value) = (seed_arr, seed_value);
    let mut steps = search.steps();
    let mut converged = false;
    for round in 0..=search.restarts {
        if !ascent.budget_left() {
            break;
        }
        let (x, fx, done) = ascent.run(best, best_value, steps);
        let improved = fx > best_value;
        if improved {
            best = x;
            best_value = fx;
        }
        converged = done;
        // A converged restart that found nothing better ends the search.
        if round > 0 && done && !improved {
            break;
        }
        steps = steps.map(|s| s * 0.1);
    }

    RefineTrace {
        seed: SearchPoint::from_array(seed_arr),
        seed_objective: seed_value,
        point: SearchPoint::from_array(best),
        objective: best_value,
        iterations: ascent.iterations,
        evaluations: ascent.evaluations,
        converged,
    }
}

/// Stage two for one seed: bounded local ascent. Never returns a point worse
/// than the seed.
pub fn refine(
    seed: &SearchPoint,
    segments: &[LineSegment],
    config: &MixtureConfig,
    search: &SearchConfig,
    width: u32,
    height: u32,
) -> Result<RefineTrace> {
    search.validate()?;
    if !search.bounds.contains(seed) {
        return Err(Error::InvalidConfig("seed lies outside the search bounds".into()));
    }
    let ev = Evaluator::new(segments, config, width, height)?;
    Ok(refine_with_evaluator(&ev, seed, search))
}

/// Estimated camera together with classification, cues and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: CameraParams,
    pub point: SearchPoint,
    pub objective: f64,
    pub scores: Vec<SegmentScore>,
    pub cues: ReliabilityCues,
    /// Set when a Manhattan process has no segments assigned.
    pub degenerate_scene: bool,
    pub wall_time_s: f64,
    pub best_grid: Proposal,
    pub traces: Vec<RefineTrace>,
}

impl CalibrationResult {
    pub fn label_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for s in &self.scores {
            counts[s.label.index()] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<ProcessLabel> {
        self.scores.iter().map(|s| s.label).collect()
    }
}

/// Full pipeline, also returning the stage-one grid.
pub fn calibrate_with_grid(
    segments: &[LineSegment],
    config: &MixtureConfig,
    search: &SearchConfig,
    width: u32,
    height: u32,
) -> Result<(CalibrationResult, GridEvaluation)> {
    let started = Instant::now();
    search.validate()?;
    let ev = Evaluator::new(segments, config, width, height)?;
    let grid = grid_with_evaluator(&ev, search)?;

    let traces: Vec<RefineTrace> =
        grid.proposals[..search.seeds].iter().map(|p| refine_with_evaluator(&ev, &p.point, search)).collect();
    // Strictly greater keeps the earliest (best-ranked) seed on ties.
    let best = traces.iter().fold(&traces[0], |acc, t| if t.objective > acc.objective { t } else { acc });

    let point = best.point;
    let params = point.camera(width, height)?;
    let scores = ev.classify(&params);
    let cues = compute_cues(
        &scores,
        best.objective,
        ev.total_length(),
        &grid.objectives(),
        LoglikNormalization::SegmentCount,
    );
    let mut counts = [0usize; 4];
    for s in &scores {
        counts[s.label.index()] += 1;
    }
    let degenerate_scene = ProcessLabel::MANHATTAN.iter().any(|l| counts[l.index()] == 0);

    let result = CalibrationResult {
        params,
        point,
        objective: best.objective,
        scores,
        cues,
        degenerate_scene,
        wall_time_s: started.elapsed().as_secs_f64(),
        best_grid: *grid.best(),
        traces,
    };
    Ok((result, grid))
}

/// Estimates focal length and rotation from `segments`.
pub fn calibrate(
    segments: &[LineSegment],
    config: &MixtureConfig,
    search: &SearchConfig,
    width: u32,
    height: u32,
) -> Result<CalibrationResult> {
    calibrate_with_grid(segments, config, search, width, height).map(|(r, _)| r)
}
