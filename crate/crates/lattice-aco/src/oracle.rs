//! Independent brute-force ground truth: dense-grid local-extrema detection
//! for functions and exhaustive-permutation TSP. Used by tests and the CLI
//! `verify` mode; deliberately shares no code with the colony path.

use thiserror::Error;

use crate::objective::{ObjectiveError, ObjectiveFunction, Sense};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("resolution must be >= 3 per dimension, got {0:?}")]
    BadResolution(Vec<usize>),
    #[error("resolution {res:?} does not match domain dimension {dim}")]
    DimensionMismatch { res: Vec<usize>, dim: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("distance matrix must be square and symmetric with zero diagonal")]
    BadMatrix,
    #[error("exhaustive TSP is limited to 11 cities, got {0}")]
    TooManyCities(usize),
}

/// Brute-force sampling parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Samples per dimension, boundary points included.
    pub resolution: Vec<usize>,
    /// One-dimensional bracket-shrink iterations applied to interior hits.
    pub refine_steps: usize,
}

/// One extremum the oracle found.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleExtremum {
    pub point: Vec<f64>,
    /// Function value in the original orientation.
    pub value: f64,
    /// True when the winning sample sits on the domain boundary.
    pub on_boundary: bool,
}

/// Sample the full lattice (including boundary points) and return every
/// sample strictly better, oriented, than all of its full-scheme neighbors.
/// For one-dimensional domains with `refine_steps > 0`, each interior hit is
/// sharpened by repeated three-point bracket shrinking.
///
/// The resolution must be fine enough that adjacent extrema are separated by
/// at least three samples; that is the caller's responsibility.
pub fn grid_extrema(
    f: &ObjectiveFunction,
    sense: Sense,
    cfg: &OracleConfig,
) -> Result<Vec<OracleExtremum>, OracleError> {
    let dim = f.domain().dim();
    if cfg.resolution.len() != dim {
        return Err(OracleError::DimensionMismatch {
            res: cfg.resolution.clone(),
            dim,
        });
    }
    if cfg.resolution.iter().any(|&r| r < 3) {
        return Err(OracleError::BadResolution(cfg.resolution.clone()));
    }

    let counts = &cfg.resolution;
    let total: usize = counts.iter().product();
    let lower = f.domain().lower();
    let coord = |k: usize, i: usize| lower[k] + f.domain().width(k) * i as f64 / (counts[k] - 1) as f64;

    let mut values = Vec::with_capacity(total);
    {
        let mut idx = vec![0usize; dim];
        let mut point = vec![0.0f64; dim];
        for _ in 0..total {
            for k in 0..dim {
                point[k] = coord(k, idx[k]);
            }
            values.push(f.oriented_value(sense, &point)?);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    let mut hits = Vec::new();
    let mut idx = vec![0usize; dim];
    for linear in 0..total {
        if is_strict_local_min(linear, &idx, &values, counts) {
            let on_boundary = idx
                .iter()
                .zip(counts)
                .any(|(&i, &c)| i == 0 || i + 1 == c);
            let mut point: Vec<f64> = (0..dim).map(|k| coord(k, idx[k])).collect();
            let mut oriented = values[linear];
            if dim == 1 && cfg.refine_steps > 0 && !on_boundary {
                let lo = coord(0, idx[0] - 1);
                let hi = coord(0, idx[0] + 1);
                let (x, v) = refine_1d(f, sense, lo, point[0], hi, oriented, cfg.refine_steps)?;
                point[0] = x;
                oriented = v;
            }
            hits.push(OracleExtremum {
                point,
                value: match sense {
                    Sense::Minimize => oriented,
                    Sense::Maximize => -oriented,
                },
                on_boundary,
            });
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    hits.sort_by(|a, b| a.point.partial_cmp(&b.point).unwrap());
    Ok(hits)
}

fn is_strict_local_min(linear: usize, idx: &[usize], values: &[f64], counts: &[usize]) -> bool {
    let dim = counts.len();
    let mut offset = vec![-1i64; dim];
    loop {
        if offset.iter().any(|&o| o != 0) {
            let mut lin = 0usize;
            let mut ok = true;
            for k in 0..dim {
                let v = idx[k] as i64 + offset[k];
                if v < 0 || v >= counts[k] as i64 {
                    ok = false;
                    break;
                }
                lin = lin * counts[k] + v as usize;
            }
            if ok && values[lin] <= values[linear] {
                return false;
            }
        }
        let mut k = dim;
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            if offset[k] < 1 {
                offset[k] += 1;
                break;
            }
            offset[k] = -1;
        }
    }
}

/// Halve the bracket `(lo, mid, hi)` around an oriented minimum
/// `refine_steps` times by probing the two midpoints. Derivative-free, so
/// the oracle stays assumption-free.
fn refine_1d(
    f: &ObjectiveFunction,
    sense: Sense,
    mut lo: f64,
    mut mid: f64,
    mut hi: f64,
    mut v_mid: f64,
    steps: usize,
) -> Result<(f64, f64), OracleError> {
    for _ in 0..steps {
        let ml = (lo + mid) / 2.0;
        let mr = (mid + hi) / 2.0;
        if ml == mid || mr == mid {
            break; // bracket exhausted at f64 resolution
        }
        let v_ml = f.oriented_value(sense, &[ml])?;
        let v_mr = f.oriented_value(sense, &[mr])?;
        if v_ml < v_mid && v_ml <= v_mr {
            hi = mid;
            mid = ml;
            v_mid = v_ml;
        } else if v_mr < v_mid {
            lo = mid;
            mid = mr;
            v_mid = v_mr;
        } else {
            lo = ml;
            hi = mr;
        }
    }
    Ok((mid, v_mid))
}

/// Exact minimum cyclic tour by enumerating permutations with the first
/// city fixed. Refuses matrices larger than 11x11.
pub fn tsp_brute(distances: &[Vec<f64>]) -> Result<(Vec<usize>, f64), OracleError> {
    let n = distances.len();
    if n < 3 {
        return Err(OracleError::BadMatrix);
    }
    if n > 11 {
        return Err(OracleError::TooManyCities(n));
    }
    for (i, row) in distances.iter().enumerate() {
        if row.len() != n || distances[i][i] != 0.0 {
            return Err(OracleError::BadMatrix);
        }
        for j in 0..n {
            if distances[i][j] < 0.0 || distances[i][j] != distances[j][i] {
                return Err(OracleError::BadMatrix);
            }
        }
    }

    let mut rest: Vec<usize> = (1..n).collect();
    let mut tour = vec![0usize];
    let mut best_tour = Vec::new();
    let mut best = f64::INFINITY;
    permute(distances, &mut tour, &mut rest, &mut best_tour, &mut best);
    Ok((best_tour, best))
}

fn permute(
    d: &[Vec<f64>],
    tour: &mut Vec<usize>,
    rest: &mut Vec<usize>,
    best_tour: &mut Vec<usize>,
    best: &mut f64,
) {
    if rest.is_empty() {
        let mut length = 0.0;
        for w in tour.windows(2) {
            length += d[w[0]][w[1]];
        }
        length += d[*tour.last().unwrap()][tour[0]];
        if length < *best {
            *best = length;
            *best_tour = tour.clone();
        }
        return;
    }
    // lexicographic order keeps ties deterministic
    for i in 0..rest.len() {
        let city = rest.remove(i);
        tour.push(city);
        permute(d, tour, rest, best_tour, best);
        tour.pop();
        rest.insert(i, city);
    }
}
