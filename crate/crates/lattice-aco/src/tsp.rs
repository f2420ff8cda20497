//! Classical ant-system TSP baseline. Validates the shared pheromone and
//! transition machinery against the exhaustive oracle; shares no state with
//! the extremum search (per-edge pheromone here, per-cell there).

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TspError {
    #[error("need at least 3 cities, got {0}")]
    TooFewCities(usize),
    #[error("cities {0} and {1} coincide; zero distances make the heuristic undefined")]
    DuplicateCities(usize, usize),
    #[error("distance matrix must be square, symmetric, non-negative, with zero diagonal")]
    BadMatrix,
    #[error("invalid parameter: {0}")]
    BadParams(String),
}

/// Cities with their symmetric distance matrix.
#[derive(Clone, Debug)]
pub struct CityGraph {
    coordinates: Option<Vec<[f64; 2]>>,
    distances: Vec<Vec<f64>>,
}

impl CityGraph {
    /// Build from planar coordinates; duplicate points are rejected because
    /// `eta = 1/d` would be undefined.
    pub fn from_coordinates(coordinates: Vec<[f64; 2]>) -> Result<Self, TspError> {
        let n = coordinates.len();
        if n < 3 {
            return Err(TspError::TooFewCities(n));
        }
        let mut distances = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (coordinates[i][0] - coordinates[j][0])
                    .hypot(coordinates[i][1] - coordinates[j][1]);
                if d == 0.0 {
                    return Err(TspError::DuplicateCities(i, j));
                }
                distances[i][j] = d;
                distances[j][i] = d;
            }
        }
        Ok(CityGraph {
            coordinates: Some(coordinates),
            distances,
        })
    }

    /// Build from an explicit distance matrix.
    pub fn from_distances(distances: Vec<Vec<f64>>) -> Result<Self, TspError> {
        let n = distances.len();
        if n < 3 {
            return Err(TspError::TooFewCities(n));
        }
        for i in 0..n {
            if distances[i].len() != n || distances[i][i] != 0.0 {
                return Err(TspError::BadMatrix);
            }
            for j in 0..n {
                if distances[i][j] < 0.0 || (distances[i][j] - distances[j][i]).abs() != 0.0 {
                    return Err(TspError::BadMatrix);
                }
                if i != j && distances[i][j] == 0.0 {
                    return Err(TspError::DuplicateCities(i, j));
                }
            }
        }
        Ok(CityGraph {
            coordinates: None,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    pub fn coordinates(&self) -> Option<&[[f64; 2]]> {
        self.coordinates.as_deref()
    }

    pub fn tour_length(&self, tour: &[usize]) -> f64 {
        let mut total = 0.0;
        for w in tour.windows(2) {
            total += self.distances[w[0]][w[1]];
        }
        total + self.distances[*tour.last().unwrap()][tour[0]]
    }
}

/// Ant-system parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TspParams {
    /// Ant count; `None` means `round(N / 1.5)`.
    pub ants: Option<usize>,
    /// Pheromone quantity Q deposited as `Q / L` per tour.
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub tau0: f64,
    pub t_max: usize,
    /// Early-stop threshold on `|L_t - L_{t+1}| / L_t`; off by default.
    pub marker_threshold: Option<f64>,
}

impl Default for TspParams {
    fn default() -> Self {
        TspParams {
            ants: None,
            q: 1.0,
            alpha: 1.0,
            beta: 1.0,
            rho: 0.3,
            tau0: 10.0,
            t_max: 100,
            marker_threshold: None,
        }
    }
}

impl TspParams {
    fn validate(&self) -> Result<(), TspError> {
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(TspError::BadParams(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.tau0 > 0.0) {
            return Err(TspError::BadParams("tau0 must be positive".into()));
        }
        if !(self.q > 0.0) {
            return Err(TspError::BadParams("q must be positive".into()));
        }
        if self.t_max == 0 {
            return Err(TspError::BadParams("t_max must be positive".into()));
        }
        if self.ants == Some(0) {
            return Err(TspError::BadParams("ant count must be positive".into()));
        }
        Ok(())
    }

    fn resolve_ants(&self, n: usize) -> usize {
        self.ants
            .unwrap_or_else(|| ((n as f64 / 1.5).round() as usize).max(1))
    }
}

/// Result of one ant-system run.
#[derive(Clone, Debug, PartialEq)]
pub struct TspOutcome {
    pub best_tour: Vec<usize>,
    pub best_length: f64,
    /// Best tour length found in each iteration.
    pub iteration_lengths: Vec<f64>,
}

/// Run the ant system: per iteration every ant builds a complete tour by
/// sampling unvisited cities with weight `tau_ij^alpha * (1/d_ij)^beta`,
/// then all edge pheromones update as
/// `tau_ij <- (1 - rho) tau_ij + sum_k Q / L_k` over ants passing `(i, j)`.
/// Returns the shortest tour found across all iterations.
pub fn solve_tsp<R: Rng>(
    graph: &CityGraph,
    params: &TspParams,
    rng: &mut R,
) -> Result<TspOutcome, TspError> {
    params.validate()?;
    let n = graph.len();
    let m = params.resolve_ants(n);

    // start cities: distinct when possible, otherwise with replacement
    let starts: Vec<usize> = if m <= n {
        rand::seq::index::sample(rng, n, m).into_vec()
    } else {
        (0..m).map(|_| rng.gen_range(0..n)).collect()
    };

    let mut tau = vec![vec![params.tau0; n]; n];
    let mut best_tour: Vec<usize> = Vec::new();
    let mut best_length = f64::INFINITY;
    let mut iteration_lengths = Vec::with_capacity(params.t_max);

    let mut tour = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut tours: Vec<(Vec<usize>, f64)> = Vec::with_capacity(m);

    for _t in 0..params.t_max {
        tours.clear();
        for &start in &starts {
            tour.clear();
            visited.fill(false);
            tour.push(start);
            visited[start] = true;
            for _ in 1..n {
                let here = *tour.last().unwrap();
                let candidates: Vec<usize> = (0..n).filter(|&j| !visited[j]).collect();
                let weights: Vec<f64> = candidates
                    .iter()
                    .map(|&j| {
                        tau[here][j].powf(params.alpha)
                            * (1.0 / graph.distance(here, j)).powf(params.beta)
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                assert!(total > 0.0 && total.is_finite(), "degenerate tour weights");
                debug_assert!(
                    (weights.iter().map(|w| w / total).sum::<f64>() - 1.0).abs() <= 1e-12
                );
                let next = if candidates.len() == 1 {
                    candidates[0]
                } else {
                    let dist = WeightedIndex::new(&weights).expect("positive finite weights");
                    candidates[dist.sample(rng)]
                };
                tour.push(next);
                visited[next] = true;
            }
            let length = graph.tour_length(&tour);
            tours.push((tour.clone(), length));
        }

        // evaporation then deposits, in ant-id order for reproducibility
        for row in tau.iter_mut() {
            for t in row.iter_mut() {
                *t *= 1.0 - params.rho;
            }
        }
        for (tour, length) in &tours {
            let deposit = params.q / length;
            for w in tour.windows(2) {
                tau[w[0]][w[1]] += deposit;
                tau[w[1]][w[0]] += deposit;
            }
            let last = *tour.last().unwrap();
            tau[last][tour[0]] += deposit;
            tau[tour[0]][last] += deposit;
        }

        let iter_best = tours
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("at least one ant");
        iteration_lengths.push(iter_best.1);
        if iter_best.1 < best_length {
            best_length = iter_best.1;
            best_tour = iter_best.0.clone();
        }

        if let Some(threshold) = params.marker_threshold {
            let t = iteration_lengths.len();
            if t >= 2 {
                let marker =
                    (iteration_lengths[t - 2] - iteration_lengths[t - 1]).abs() / iteration_lengths[t - 2];
                if marker < threshold {
                    break;
                }
            }
        }
    }

    Ok(TspOutcome {
        best_tour,
        best_length,
        iteration_lengths,
    })
}

/// Convergence marker sequence: element `t` is `|L_t - L_{t+1}| / L_t`.
pub fn convergence_marker(lengths: &[f64]) -> Vec<f64> {
    lengths
        .windows(2)
        .map(|w| (w[0] - w[1]).abs() / w[0])
        .collect()
}
