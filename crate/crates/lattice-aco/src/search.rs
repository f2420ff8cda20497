//! The outer refinement loop: partition, run each colony to quiescence,
//! keep occupied cells, subdivide, repeat until cells are small enough,
//! then report deduplicated cell centers as extrema.
//!
//! Refinement continues while the maximum cell size exceeds `epsilon`, and
//! one further subdivision round runs after the threshold is reached so the
//! reported centers resolve well inside the epsilon-sized cells. Child grids
//! of one round run in parallel; each draws from its own counter-derived
//! random stream, so the report is identical for any worker count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::colony::{AcoParams, ColonyError, ColonyState};
use crate::grid::{CellId, Grid, LatticeError, NeighborScheme};
use crate::objective::{BoxDomain, ObjectiveError, ObjectiveFunction, Sense};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Colony(#[from] ColonyError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Full parameterization of one search run.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Initial cells per dimension.
    pub n: Vec<usize>,
    /// Subdivision factor per dimension, each >= 2.
    pub n1: Vec<usize>,
    /// Stop threshold on the maximum cell size.
    pub epsilon: f64,
    pub aco: AcoParams,
    pub sense: Sense,
    pub neighbor_scheme: NeighborScheme,
    pub seed: u64,
    /// Evaluate domain boundary faces directly and append their extrema.
    pub check_boundary: bool,
}

impl SearchConfig {
    fn validate(&self, f: &ObjectiveFunction) -> Result<(), SearchError> {
        let dim = f.domain().dim();
        if self.n.len() != dim {
            return Err(SearchError::BadConfig(format!(
                "n has {} entries but the domain has dimension {dim}",
                self.n.len()
            )));
        }
        if self.n1.len() != dim {
            return Err(SearchError::BadConfig(format!(
                "n1 has {} entries but the domain has dimension {dim}",
                self.n1.len()
            )));
        }
        if self.n.iter().any(|&v| v == 0) {
            return Err(SearchError::BadConfig("every n[k] must be >= 1".into()));
        }
        if self.n1.iter().any(|&v| v < 2) {
            return Err(SearchError::BadConfig("every n1[k] must be >= 2".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(SearchError::BadConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.aco.validate()?;
        Ok(())
    }
}

/// One reported extremum: a final cell center with the function value in the
/// original orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremumResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Final cell size per dimension.
    pub cell_size: Vec<f64>,
    /// Set for boundary-face extrema and for cells touching the domain
    /// boundary.
    pub on_boundary: bool,
}

/// Everything one run produced, sorted lexicographically by point.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub extrema: Vec<ExtremumResult>,
    /// Colony rounds executed (refinement levels + the final round).
    pub outer_iterations: usize,
    pub inner_steps_total: usize,
    pub evaluations: u64,
    /// Seconds; the only field that varies between identical-seed runs.
    pub wall_time: f64,
    /// Colonies that hit the inner step cap before quiescence.
    pub caps_hit: usize,
}

struct ColonyOutcome {
    occupied: Vec<CellId>,
    oriented: Vec<f64>,
    steps: usize,
    cap_hit: bool,
}

fn run_round(
    grids: &[Grid],
    f: &ObjectiveFunction,
    cfg: &SearchConfig,
    stream_base: u64,
) -> Result<Vec<ColonyOutcome>, SearchError> {
    grids
        .par_iter()
        .enumerate()
        .map(|(i, grid)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base + i as u64);
            let mut colony = ColonyState::init(
                grid.clone(),
                f,
                cfg.sense,
                &cfg.aco,
                cfg.neighbor_scheme,
            )?;
            let q = colony.run_to_quiescence(&mut rng);
            let occupied = colony.occupied_cells();
            let oriented = occupied.iter().map(|c| colony.value(c)).collect();
            Ok(ColonyOutcome {
                occupied,
                oriented,
                steps: q.steps,
                cap_hit: q.cap_hit,
            })
        })
        .collect()
}

fn touches_boundary(cell_box: &BoxDomain, root: &BoxDomain) -> bool {
    (0..root.dim()).any(|k| {
        cell_box.lower()[k] == root.lower()[k] || cell_box.upper()[k] == root.upper()[k]
    })
}

/// Run the full search and report all extrema found.
pub fn search(f: &ObjectiveFunction, cfg: &SearchConfig) -> Result<RunReport, SearchError> {
    cfg.validate(f)?;
    let start = Instant::now();
    let root = f.domain().clone();

    let mut grids = vec![Grid::partition(root.clone(), &cfg.n)?];
    let mut stream: u64 = 0;
    let mut rounds = 0usize;
    let mut steps_total = 0usize;
    let mut caps_hit = 0usize;
    let mut evaluations: u64 = 0;
    let mut final_round = false;

    let (results, delta_final) = loop {
        let outcomes = run_round(&grids, f, cfg, stream)?;
        stream += grids.len() as u64;
        rounds += 1;
        for o in &outcomes {
            steps_total += o.steps;
            if o.cap_hit {
                caps_hit += 1;
            }
        }
        evaluations += grids.iter().map(|g| g.cell_count() as u64).sum::<u64>();

        let max_delta = grids
            .iter()
            .map(Grid::max_delta)
            .fold(0.0f64, f64::max);
        let at_threshold = max_delta <= cfg.epsilon;

        if at_threshold && final_round {
            let delta_final = grids[0].delta().to_vec();
            let mut results = Vec::new();
            for (grid, outcome) in grids.iter().zip(&outcomes) {
                for (cell, oriented) in outcome.occupied.iter().zip(&outcome.oriented) {
                    let point = grid.center(cell)?;
                    let cell_box = grid.cell_box(cell)?;
                    results.push(ExtremumResult {
                        point,
                        value: match cfg.sense {
                            Sense::Minimize => *oriented,
                            Sense::Maximize => -*oriented,
                        },
                        cell_size: grid.delta().to_vec(),
                        on_boundary: touches_boundary(&cell_box, &root),
                    });
                }
            }
            break (results, delta_final);
        }
        if at_threshold {
            final_round = true;
        }

        let mut children = Vec::new();
        for (grid, outcome) in grids.iter().zip(&outcomes) {
            children.extend(grid.subdivide(&outcome.occupied, &cfg.n1)?);
        }
        grids = children;
    };

    let mut results = results;
    if cfg.check_boundary {
        let (boundary, evals) = boundary_extrema(f, cfg.sense, &root, &delta_final)?;
        evaluations += evals;
        results.extend(boundary);
    }

    let tol: Vec<f64> = delta_final.iter().map(|d| 2.0 * d).collect();
    let extrema = dedup(results, &tol, cfg.sense);

    Ok(RunReport {
        extrema,
        outer_iterations: rounds,
        inner_steps_total: steps_total,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
        caps_hit,
    })
}

/// Extrema of the `2 * dim` boundary faces, sampled at the final grid
/// resolution. A face candidate is kept only when it strictly beats the
/// point displaced half a final cell inward, i.e. when it is a local
/// extremum of the full problem and not just of the face.
fn boundary_extrema(
    f: &ObjectiveFunction,
    sense: Sense,
    root: &BoxDomain,
    delta_final: &[f64],
) -> Result<(Vec<ExtremumResult>, u64), SearchError> {
    let dim = root.dim();
    let mut out = Vec::new();
    let mut evals: u64 = 0;

    for k in 0..dim {
        for upper_side in [false, true] {
            let bound = if upper_side {
                root.upper()[k]
            } else {
                root.lower()[k]
            };
            let inward = if upper_side {
                bound - delta_final[k] / 2.0
            } else {
                bound + delta_final[k] / 2.0
            };

            let face_dims: Vec<usize> = (0..dim).filter(|&j| j != k).collect();
            let counts: Vec<usize> = face_dims
                .iter()
                .map(|&j| ((root.width(j) / delta_final[j]).round() as usize).max(1) + 1)
                .collect();

            // sample the face lattice (a single point when dim == 1)
            let total: usize = counts.iter().product();
            let mut values = Vec::with_capacity(total);
            let mut points = Vec::with_capacity(total);
            let mut idx = vec![0usize; face_dims.len()];
            for _ in 0..total {
                let mut p = vec![0.0; dim];
                p[k] = bound;
                for (d, &j) in face_dims.iter().enumerate() {
                    p[j] = root.lower()[j]
                        + root.width(j) * idx[d] as f64 / (counts[d] - 1).max(1) as f64;
                }
                values.push(f.oriented_value(sense, &p)?);
                points.push(p);
                evals += 1;
                for d in (0..idx.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < counts[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }

            for (i, p) in points.iter().enumerate() {
                if !is_face_local_extremum(i, &values, &counts) {
                    continue;
                }
                let mut q = p.clone();
                q[k] = inward;
                let inner = f.oriented_value(sense, &q)?;
                evals += 1;
                if values[i] < inner {
                    out.push(ExtremumResult {
                        point: p.clone(),
                        value: match sense {
                            Sense::Minimize => values[i],
                            Sense::Maximize => -values[i],
                        },
                        cell_size: delta_final.to_vec(),
                        on_boundary: true,
                    });
                }
            }
        }
    }
    Ok((out, evals))
}

/// Strictly better than all full-scheme neighbors within the face lattice.
fn is_face_local_extremum(linear: usize, values: &[f64], counts: &[usize]) -> bool {
    if counts.is_empty() {
        return true;
    }
    let mut idx = Vec::with_capacity(counts.len());
    let mut rest = linear;
    for &c in counts.iter().rev() {
        idx.push(rest % c);
        rest /= c;
    }
    idx.reverse();

    let mut offset = vec![-1i64; counts.len()];
    loop {
        if offset.iter().any(|&o| o != 0) {
            let mut lin = 0usize;
            let mut ok = true;
            for d in 0..counts.len() {
                let v = idx[d] as i64 + offset[d];
                if v < 0 || v >= counts[d] as i64 {
                    ok = false;
                    break;
                }
                lin = lin * counts[d] + v as usize;
            }
            if ok && values[lin] <= values[linear] {
                return false;
            }
        }
        let mut d = counts.len();
        loop {
            if d == 0 {
                return true;
            }
            d -= 1;
            if offset[d] < 1 {
                offset[d] += 1;
                break;
            }
            offset[d] = -1;
        }
    }
}

/// Greedy clustering: candidates sorted best-oriented-value first become
/// representatives; a candidate within `tol` (component-wise) of a kept
/// representative is absorbed when it is strictly worse or coincident.
/// Exact value ties at distinct points are all kept, so a constant function
/// reports one center per final cell. Output is sorted by point.
pub fn dedup(results: Vec<ExtremumResult>, tol: &[f64], sense: Sense) -> Vec<ExtremumResult> {
    let oriented = |r: &ExtremumResult| sense.orient(r.value);
    let mut sorted = results;
    sorted.sort_by(|a, b| {
        oriented(a)
            .partial_cmp(&oriented(b))
            .unwrap()
            .then_with(|| a.point.partial_cmp(&b.point).unwrap())
    });

    let mut kept: Vec<ExtremumResult> = Vec::new();
    'cand: for cand in sorted {
        for rep in &kept {
            let near = rep
                .point
                .iter()
                .zip(&cand.point)
                .zip(tol)
                .all(|((a, b), t)| (a - b).abs() <= *t);
            if near && (oriented(&cand) > oriented(rep) || cand.point == rep.point) {
                continue 'cand;
            }
        }
        kept.push(cand);
    }
    kept.sort_by(|a, b| a.point.partial_cmp(&b.point).unwrap());
    kept
}

/// The accuracy metric: relative error ratio in percent, or the absolute
/// error when the theoretical value is too close to zero to divide by.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorRatio {
    /// `|(calc - theory) / theory| * 100`
    RelativePercent(f64),
    /// `|calc - theory|`, flagged because `|theory| <= 1e-12`
    Absolute(f64),
}

impl ErrorRatio {
    pub fn value(self) -> f64 {
        match self {
            ErrorRatio::RelativePercent(v) | ErrorRatio::Absolute(v) => v,
        }
    }

    pub fn is_absolute(self) -> bool {
        matches!(self, ErrorRatio::Absolute(_))
    }
}

impl std::fmt::Display for ErrorRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorRatio::RelativePercent(v) => write!(f, "{v:.3e} %"),
            ErrorRatio::Absolute(v) => write!(f, "{v:.3e} (abs)"),
        }
    }
}

/// Error ratio of a calculated extremum value against its theory value.
pub fn error_ratio(theory: f64, calc: f64) -> ErrorRatio {
    if theory.abs() > 1e-12 {
        ErrorRatio::RelativePercent(((calc - theory) / theory).abs() * 100.0)
    } else {
        ErrorRatio::Absolute((calc - theory).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::BoxDomain;

    fn res(point: Vec<f64>, value: f64) -> ExtremumResult {
        ExtremumResult {
            point,
            value,
            cell_size: vec![0.01],
            on_boundary: false,
        }
    }

    #[test]
    fn dedup_keeps_separated_points() {
        let out = dedup(
            vec![res(vec![0.0], 1.0), res(vec![0.3], 1.0)],
            &[0.1],
            Sense::Maximize,
        );
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn dedup_collapses_identical_points() {
        let out = dedup(
            vec![res(vec![0.5], 1.0), res(vec![0.5], 1.0)],
            &[0.1],
            Sense::Maximize,
        );
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn dedup_keeps_the_best_value() {
        let out = dedup(
            vec![res(vec![0.50], 0.9), res(vec![0.55], 1.0)],
            &[0.1],
            Sense::Maximize,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].value, 1.0);
    }

    #[test]
    fn dedup_output_sorted_by_point() {
        let out = dedup(
            vec![res(vec![0.9], 2.0), res(vec![0.1], 1.0), res(vec![0.5], 3.0)],
            &[0.01],
            Sense::Maximize,
        );
        let xs: Vec<f64> = out.iter().map(|r| r.point[0]).collect();
        assert_eq!(xs, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn error_ratio_examples() {
        // Table 1, point 1
        let r = error_ratio(1.0, 0.999999979);
        assert!(!r.is_absolute());
        assert!((r.value() - 2.1e-6).abs() < 1e-12, "{}", r.value());
        // identity
        assert_eq!(error_ratio(5.0, 5.0).value(), 0.0);
        // Table 2, point 1
        let r = error_ratio(5.0, 5.00002559994310);
        assert!((r.value() - 5.11998862e-4).abs() < 1e-12);
        // near-zero theory falls back to absolute error
        let r = error_ratio(0.0, 1e-9);
        assert!(r.is_absolute());
        assert_eq!(r.value(), 1e-9);
    }

    #[test]
    fn constant_function_reports_every_final_cell() {
        let domain = BoxDomain::interval(0.0, 1.0).unwrap();
        let f = ObjectiveFunction::from_fn("const", domain, |_| 1.0);
        let cfg = SearchConfig {
            n: vec![4],
            n1: vec![2],
            epsilon: 0.06,
            aco: AcoParams::default(),
            sense: Sense::Minimize,
            neighbor_scheme: NeighborScheme::Axis,
            seed: 1,
            check_boundary: false,
        };
        let report = search(&f, &cfg).unwrap();
        // delta: 0.25 -> 0.125 -> 0.0625 -> 0.03125 (threshold) -> 0.015625 (final)
        assert_eq!(report.extrema.len(), 64);
        let d = report.extrema[0].cell_size[0];
        assert!((d - 1.0 / 64.0).abs() < 1e-15);
        // centers form the full lattice
        for (i, r) in report.extrema.iter().enumerate() {
            assert!((r.point[0] - (i as f64 + 0.5) / 64.0).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation_failures() {
        let f = ObjectiveFunction::builtin("f1").unwrap();
        let base = SearchConfig {
            n: vec![10],
            n1: vec![10],
            epsilon: 1e-3,
            aco: AcoParams::default(),
            sense: Sense::Maximize,
            neighbor_scheme: NeighborScheme::Full,
            seed: 1,
            check_boundary: false,
        };
        for bad in [
            SearchConfig { n: vec![0], ..base.clone() },
            SearchConfig { n1: vec![1], ..base.clone() },
            SearchConfig { epsilon: 0.0, ..base.clone() },
            SearchConfig { n: vec![10, 10], ..base.clone() },
            SearchConfig { n1: vec![10, 10], ..base.clone() },
        ] {
            assert!(matches!(search(&f, &bad), Err(SearchError::BadConfig(_))));
        }
    }

    #[test]
    fn range_monotonicity_and_delta_schedule() {
        let f = ObjectiveFunction::builtin("f1").unwrap();
        let cfg = SearchConfig {
            n: vec![20],
            n1: vec![10],
            epsilon: 1e-2,
            aco: AcoParams::default(),
            sense: Sense::Maximize,
            neighbor_scheme: NeighborScheme::Full,
            seed: 3,
            check_boundary: false,
        };
        let report = search(&f, &cfg).unwrap();
        // delta: 0.05 -> 0.005 (threshold) -> 0.0005 (final); three rounds
        assert_eq!(report.outer_iterations, 3);
        let d0 = 0.05;
        let expect = d0 / 100.0;
        for r in &report.extrema {
            assert!((r.cell_size[0] - expect).abs() < 1e-12 * expect);
            assert!(r.cell_size[0] <= cfg.epsilon);
        }
    }

    #[test]
    fn seeded_runs_are_identical_except_wall_time() {
        let f = ObjectiveFunction::builtin("f5").unwrap();
        let cfg = SearchConfig {
            n: vec![95],
            n1: vec![10],
            epsilon: 1e-3,
            aco: AcoParams::default(),
            sense: Sense::Minimize,
            neighbor_scheme: NeighborScheme::Full,
            seed: 9,
            check_boundary: true,
        };
        let a = search(&f, &cfg).unwrap();
        let b = search(&f, &cfg).unwrap();
        assert_eq!(a.extrema, b.extrema);
        assert_eq!(a.outer_iterations, b.outer_iterations);
        assert_eq!(a.inner_steps_total, b.inner_steps_total);
        assert_eq!(a.evaluations, b.evaluations);
        assert_eq!(a.caps_hit, b.caps_hit);
    }
}
