// SPDX-License-Identifier: Apache-2.0

//! The trimmed max-margin program behind the iterative estimator:
//!
//! maximize s over unit u and a selection b of at least ⌈0.9k⌉ groups such that
//! every selected group satisfies ⟨Q_j − c, u⟩ ≥ s.
//!
//! For a fixed u the best selection is the ⌈0.9k⌉ largest projections, so the
//! program reduces to maximizing an order statistic over the unit sphere.
//! [`est_direction_distance`] is the alternating heuristic used at runtime;
//! [`est_brute_force`] is a small-scale reference used to check it.

use super::GroupedStats;
use crate::error::{invalid, Error, Result};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use std::f64::consts::PI;

/// Alternating rounds per start in the heuristic.
const MAX_ROUNDS: usize = 20;
/// Minimum improvement of s that counts as progress.
const IMPROVE_TOL: f64 = 1e-9;

/// Brute-force limits.
const MAX_ORACLE_GROUPS: usize = 64;
const MAX_ORACLE_DIM: usize = 3;
const MAX_GRID_2D: usize = 200_000;
const MAX_GRID_3D: usize = 1_000;

/// Solution of the trimmed max-margin program.
#[derive(Debug, Clone, PartialEq)]
pub struct EstOutcome {
    /// Optimal s: the smallest selected projection. Can be negative when c
    /// sits inside the bulk of the groups.
    pub distance: f64,
    /// Unit direction u.
    pub direction: Array1<f64>,
    /// Which groups are selected; at least ⌈0.9k⌉ entries are true.
    pub selected: Vec<bool>,
}

impl EstOutcome {
    /// Check every constraint of the program against `stats` and `c`.
    pub fn is_feasible(&self, stats: &GroupedStats, c: ArrayView1<f64>) -> bool {
        let k = stats.k();
        if self.selected.len() != k || self.direction.len() != stats.dim() {
            return false;
        }
        let norm = self.direction.dot(&self.direction).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return false;
        }
        if self.selected.iter().filter(|&&b| b).count() < selection_size(k) {
            return false;
        }
        (0..k).filter(|&j| self.selected[j]).all(|j| {
            let proj = (&stats.group(j) - &c).dot(&self.direction);
            proj >= self.distance
        })
    }
}

/// Number of groups that must be selected: ⌈0.9k⌉.
pub fn selection_size(k: usize) -> usize {
    (9 * k).div_ceil(10)
}

/// Projections of the centered groups onto candidate directions.
struct Evaluator {
    diffs: Array2<f64>,
    keep: usize,
    proj: Vec<f64>,
    scratch: Vec<f64>,
}

impl Evaluator {
    fn new(stats: &GroupedStats, c: ArrayView1<f64>) -> Result<Self> {
        if c.len() != stats.dim() {
            return Err(invalid(format!(
                "iterate has dimension {}, groups have dimension {}",
                c.len(),
                stats.dim()
            )));
        }
        let diffs = &stats.group_means() - &c.insert_axis(Axis(0));
        let k = diffs.nrows();
        Ok(Self {
            diffs,
            keep: selection_size(k),
            proj: vec![0.0; k],
            scratch: vec![0.0; k],
        })
    }

    fn k(&self) -> usize {
        self.diffs.nrows()
    }

    /// Smallest of the ⌈0.9k⌉ largest projections onto the unit vector `u`.
    fn margin(&mut self, u: ArrayView1<f64>) -> f64 {
        for (p, row) in self.proj.iter_mut().zip(self.diffs.axis_iter(Axis(0))) {
            *p = row.dot(&u);
        }
        self.scratch.copy_from_slice(&self.proj);
        let idx = self.k() - self.keep;
        let (_, s, _) = self.scratch.select_nth_unstable_by(idx, f64::total_cmp);
        *s
    }

    /// Mask of groups whose last computed projection is at least `s`.
    fn mask(&self, s: f64) -> Vec<bool> {
        self.proj.iter().map(|&p| p >= s).collect()
    }

    /// Mean direction of the selected centered groups, summed in row order.
    fn selected_mean(&self, s: f64) -> Array1<f64> {
        let mut acc = Array1::<f64>::zeros(self.diffs.ncols());
        for (row, &p) in self.diffs.axis_iter(Axis(0)).zip(&self.proj) {
            if p >= s {
                acc += &row;
            }
        }
        acc
    }

    fn outcome(&mut self, u: Array1<f64>) -> EstOutcome {
        let s = self.margin(u.view());
        EstOutcome {
            distance: s,
            selected: self.mask(s),
            direction: u,
        }
    }
}

fn normalized(v: Array1<f64>) -> Option<Array1<f64>> {
    let norm = v.dot(&v).sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v / norm)
}

fn coordinate_median(diffs: &Array2<f64>) -> Array1<f64> {
    diffs
        .axis_iter(Axis(1))
        .map(|col| crate::stats::median(&col.to_vec()))
        .collect()
}

/// Approximate maximizer of the trimmed max-margin program by alternating
/// maximization.
///
/// Starts from the directions toward the coordinate-wise median and the mean
/// of the groups (and their negations). From each start: select the ⌈0.9k⌉
/// largest projections, move u to the normalized mean of the selected centered
/// groups, and repeat while s improves, up to 20 rounds. The best start wins.
/// If every start is degenerate, ±e₁ is used. The returned outcome is always
/// feasible.
pub fn est_direction_distance(stats: &GroupedStats, c: ArrayView1<f64>) -> Result<EstOutcome> {
    let mut ev = Evaluator::new(stats, c)?;
    let d = stats.dim();

    let mut starts: Vec<Array1<f64>> = Vec::with_capacity(4);
    let median_dir = normalized(coordinate_median(&ev.diffs));
    let mean_dir = normalized(ev.diffs.sum_axis(Axis(0)));
    for dir in [median_dir, mean_dir].into_iter().flatten() {
        let neg = -&dir;
        starts.push(dir);
        starts.push(neg);
    }
    if starts.is_empty() {
        let mut e1 = Array1::<f64>::zeros(d);
        e1[0] = 1.0;
        let neg = -&e1;
        starts.push(e1);
        starts.push(neg);
    }

    let mut best: Option<EstOutcome> = None;
    for start in starts {
        let mut u = start;
        let mut s = ev.margin(u.view());
        for _ in 0..MAX_ROUNDS {
            let Some(next) = normalized(ev.selected_mean(s)) else {
                break;
            };
            let s_next = ev.margin(next.view());
            if s_next > s + IMPROVE_TOL {
                u = next;
                s = s_next;
            } else {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| s > b.distance) {
            best = Some(ev.outcome(u));
        }
    }
    Ok(best.expect("at least one start direction"))
}

/// Candidate directions for the reference solver.
fn oracle_candidates(diffs: &Array2<f64>, grid: usize) -> Vec<Array1<f64>> {
    let k = diffs.nrows();
    let d = diffs.ncols();
    let mut out: Vec<Array1<f64>> = Vec::new();
    match d {
        1 => {
            out.push(Array1::from(vec![1.0]));
            out.push(Array1::from(vec![-1.0]));
            return out;
        }
        2 => {
            for i in 0..grid {
                let t = 2.0 * PI * i as f64 / grid as f64;
                out.push(Array1::from(vec![t.cos(), t.sin()]));
            }
        }
        _ => {
            let polar = (grid / 2).max(1);
            for a in 0..=polar {
                let theta = PI * a as f64 / polar as f64;
                for b in 0..grid {
                    let phi = 2.0 * PI * b as f64 / grid as f64;
                    out.push(Array1::from(vec![
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ]));
                }
            }
        }
    }

    // Critical directions of the order-statistic landscape: peaks of a single
    // projection, peaks along a two-way tie, and (3-d) three-way ties.
    let rows: Vec<Array1<f64>> = diffs.axis_iter(Axis(0)).map(|r| r.to_owned()).collect();
    out.extend(rows.iter().filter_map(|r| normalized(r.clone())));
    for i in 0..k {
        for j in (i + 1)..k {
            let w = &rows[i] - &rows[j];
            let ww = w.dot(&w);
            if ww == 0.0 {
                continue;
            }
            if d == 2 {
                let perp = Array1::from(vec![-w[1], w[0]]);
                if let Some(p) = normalized(perp) {
                    out.push(-&p);
                    out.push(p);
                }
            } else {
                for base in [&rows[i], &rows[j]] {
                    let v = base - &(&w * (base.dot(&w) / ww));
                    if let Some(p) = normalized(v) {
                        out.push(-&p);
                        out.push(p);
                    }
                }
                for l in (j + 1)..k {
                    let w2 = &rows[i] - &rows[l];
                    let cross = Array1::from(vec![
                        w[1] * w2[2] - w[2] * w2[1],
                        w[2] * w2[0] - w[0] * w2[2],
                        w[0] * w2[1] - w[1] * w2[0],
                    ]);
                    if let Some(p) = normalized(cross) {
                        out.push(-&p);
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Reference solver for small instances (k ≤ 64, d ≤ 3).
///
/// Evaluates the program at every direction of a uniform grid with
/// `direction_grid` steps per full turn (d = 1 uses {±1}), plus the critical
/// directions where the optimum of the order statistic can sit: each centered
/// group direction, the tie circles between pairs of groups and, in three
/// dimensions, the three-way tie points. For d ≤ 2 this is the exact optimum.
pub fn est_brute_force(
    stats: &GroupedStats,
    c: ArrayView1<f64>,
    direction_grid: usize,
) -> Result<EstOutcome> {
    let k = stats.k();
    let d = stats.dim();
    if k > MAX_ORACLE_GROUPS {
        return Err(Error::ResourceLimit(format!(
            "brute force supports at most {MAX_ORACLE_GROUPS} groups, got {k}"
        )));
    }
    if d > MAX_ORACLE_DIM {
        return Err(Error::ResourceLimit(format!(
            "brute force supports dimension at most {MAX_ORACLE_DIM}, got {d}"
        )));
    }
    let grid_limit = if d == 3 { MAX_GRID_3D } else { MAX_GRID_2D };
    if d >= 2 && !(4..=grid_limit).contains(&direction_grid) {
        return Err(Error::ResourceLimit(format!(
            "direction grid must lie in [4, {grid_limit}] for d = {d}, got {direction_grid}"
        )));
    }
    let mut ev = Evaluator::new(stats, c)?;
    let mut best_s = f64::NEG_INFINITY;
    let mut best_u: Option<Array1<f64>> = None;
    for u in oracle_candidates(&ev.diffs, direction_grid) {
        let s = ev.margin(u.view());
        if s > best_s {
            best_s = s;
            best_u = Some(u);
        }
    }
    Ok(ev.outcome(best_u.expect("candidate set is never empty")))
}
