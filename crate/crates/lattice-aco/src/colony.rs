//! One ant colony on one grid: placement, allowed moves, transition
//! sampling, pheromone deposit and evaporation, and quiescence detection.
//!
//! Movement is synchronous: every ant samples its destination against the
//! same pre-step pheromone field and value table, then all moves apply and
//! one field update follows. Deposits accumulate in ascending ant-id order
//! so runs are bit-reproducible.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::grid::{CellId, Grid, NeighborScheme};
use crate::objective::{ObjectiveFunction, ObjectiveError, Sense};

#[derive(Debug, Error)]
pub enum ColonyError {
    #[error("invalid ACO parameter: {0}")]
    BadParams(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Pheromone and movement parameters.
///
/// `max_inner_iters == None` means the guard defaults to 10x the cell count
/// of whichever grid the colony runs on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcoParams {
    /// Trail influence (exponent on pheromone).
    pub alpha: f64,
    /// Heuristic influence (exponent on the value gap).
    pub beta: f64,
    /// Evaporation rate in `[0, 1)`.
    pub rho: f64,
    /// Deposit coefficient.
    pub c1: f64,
    /// Initial pheromone on every cell.
    pub tau0: f64,
    /// Step cap for one quiescence run.
    pub max_inner_iters: Option<usize>,
}

impl Default for AcoParams {
    /// The experiment defaults: const=10, alpha=1, beta=1, C1=1, rho=0.3.
    fn default() -> Self {
        AcoParams {
            alpha: 1.0,
            beta: 1.0,
            rho: 0.3,
            c1: 1.0,
            tau0: 10.0,
            max_inner_iters: None,
        }
    }
}

impl AcoParams {
    pub fn validate(&self) -> Result<(), ColonyError> {
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(ColonyError::BadParams(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.tau0 > 0.0) {
            return Err(ColonyError::BadParams(format!(
                "tau0 must be positive, got {}",
                self.tau0
            )));
        }
        if !(self.c1 > 0.0) {
            return Err(ColonyError::BadParams(format!(
                "c1 must be positive, got {}",
                self.c1
            )));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(ColonyError::BadParams(
                "alpha and beta must be finite".into(),
            ));
        }
        if self.max_inner_iters == Some(0) {
            return Err(ColonyError::BadParams(
                "max_inner_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-cell pheromone levels, indexed by linear cell index.
#[derive(Clone, Debug)]
pub struct PheromoneField {
    tau: Vec<f64>,
}

impl PheromoneField {
    fn new(cells: usize, tau0: f64) -> Self {
        PheromoneField {
            tau: vec![tau0; cells],
        }
    }

    pub fn tau(&self, linear: usize) -> f64 {
        self.tau[linear]
    }

    pub fn levels(&self) -> &[f64] {
        &self.tau
    }
}

/// An ant occupies exactly one cell; ants move but never vanish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ant {
    pub id: usize,
    pub cell: CellId,
}

/// One movement in a step: the ant and its old and new cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoveRecord {
    pub ant: usize,
    pub from: CellId,
    pub to: CellId,
}

/// Outcome of running a colony until no ant can move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quiescence {
    /// Steps executed, including the final step that moved nothing.
    pub steps: usize,
    /// True when the step cap fired before quiescence.
    pub cap_hit: bool,
}

/// Colony state: grid, ant positions (by linear cell index), pheromone
/// field, and the oriented function value cached per cell center.
#[derive(Clone, Debug)]
pub struct ColonyState {
    grid: Grid,
    scheme: NeighborScheme,
    params: AcoParams,
    /// Position of ant `i` as a linear cell index.
    positions: Vec<usize>,
    field: PheromoneField,
    values: Vec<f64>,
    t: usize,
}

impl ColonyState {
    /// Place one ant at the center of every cell, initialize the field to
    /// `tau0`, and cache oriented center values. Evaluation errors carry the
    /// offending center.
    pub fn init(
        grid: Grid,
        f: &ObjectiveFunction,
        sense: Sense,
        params: &AcoParams,
        scheme: NeighborScheme,
    ) -> Result<Self, ColonyError> {
        params.validate()?;
        let cells = grid.cell_count();
        let mut values = Vec::with_capacity(cells);
        for cell in grid.cells() {
            let center = grid.center(&cell).expect("cells() yields valid ids");
            values.push(f.oriented_value(sense, &center)?);
        }
        Ok(ColonyState {
            field: PheromoneField::new(cells, params.tau0),
            positions: (0..cells).collect(),
            grid,
            scheme,
            params: *params,
            values,
            t: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &AcoParams {
        &self.params
    }

    pub fn scheme(&self) -> NeighborScheme {
        self.scheme
    }

    pub fn field(&self) -> &PheromoneField {
        &self.field
    }

    /// Oriented value at the center of `cell`.
    pub fn value(&self, cell: &CellId) -> f64 {
        self.values[self.grid.linear_index(cell)]
    }

    pub fn ant_count(&self) -> usize {
        self.positions.len()
    }

    pub fn ants(&self) -> Vec<Ant> {
        self.positions
            .iter()
            .enumerate()
            .map(|(id, &lin)| Ant {
                id,
                cell: self.grid.cell_at(lin),
            })
            .collect()
    }

    /// Iteration counter.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Cells holding at least one ant, sorted, without duplicates.
    pub fn occupied_cells(&self) -> Vec<CellId> {
        let mut linear: Vec<usize> = self.positions.clone();
        linear.sort_unstable();
        linear.dedup();
        linear.into_iter().map(|l| self.grid.cell_at(l)).collect()
    }

    /// Neighbors of the ant's cell with strictly smaller oriented value.
    pub fn allowed_moves(&self, ant: usize) -> Vec<CellId> {
        let here = self.positions[ant];
        let v_here = self.values[here];
        self.grid
            .neighbors(&self.grid.cell_at(here), self.scheme)
            .into_iter()
            .filter(|n| self.values[self.grid.linear_index(n)] < v_here)
            .collect()
    }

    /// Transition distribution over the allowed set:
    /// `p(j) = tau_j^alpha * eta_ij^beta / sum_h tau_h^alpha * eta_ih^beta`
    /// with `eta_ij = |v_i - v_j|`. Empty when the ant cannot move.
    pub fn transition_probabilities(&self, ant: usize) -> Vec<(CellId, f64)> {
        let allowed = self.allowed_moves(ant);
        if allowed.is_empty() {
            return Vec::new();
        }
        let here = self.positions[ant];
        let v_here = self.values[here];
        let weights: Vec<f64> = allowed
            .iter()
            .map(|cell| {
                let lin = self.grid.linear_index(cell);
                let eta = (v_here - self.values[lin]).abs();
                self.field.tau[lin].powf(self.params.alpha) * eta.powf(self.params.beta)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        // Strict inequality makes every eta positive; a zero total means the
        // field or values were corrupted upstream.
        assert!(
            total > 0.0 && total.is_finite(),
            "degenerate transition weights: {weights:?}"
        );
        let probs: Vec<(CellId, f64)> = allowed
            .into_iter()
            .zip(weights)
            .map(|(cell, w)| (cell, w / total))
            .collect();
        debug_assert!(
            (probs.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() <= 1e-12,
            "transition probabilities must sum to 1"
        );
        probs
    }

    /// One synchronous iteration: every movable ant samples a destination
    /// from its pre-step distribution, all ants move, deposits sum per
    /// destination, and the whole field updates as
    /// `tau'(j) = (1 - rho) * tau(j) + dtau(j)`.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Vec<MoveRecord> {
        let mut moves = Vec::new();
        for ant in 0..self.positions.len() {
            let probs = self.transition_probabilities(ant);
            if probs.is_empty() {
                continue;
            }
            let choice = if probs.len() == 1 {
                0
            } else {
                let dist = WeightedIndex::new(probs.iter().map(|(_, p)| *p))
                    .expect("probabilities are positive and finite");
                dist.sample(rng)
            };
            moves.push(MoveRecord {
                ant,
                from: self.grid.cell_at(self.positions[ant]),
                to: probs[choice].0.clone(),
            });
        }

        let mut deposits = vec![0.0; self.field.tau.len()];
        for mv in &moves {
            let from = self.grid.linear_index(&mv.from);
            let to = self.grid.linear_index(&mv.to);
            self.positions[mv.ant] = to;
            deposits[to] += self.params.c1 * (self.values[from] - self.values[to]);
        }
        for (tau, dep) in self.field.tau.iter_mut().zip(&deposits) {
            *tau = (1.0 - self.params.rho) * *tau + dep;
            debug_assert!(*tau >= 0.0, "pheromone went negative");
        }
        self.t += 1;
        moves
    }

    /// Step until a full iteration moves no ant, or the cap fires. The
    /// quiescent occupied-cell set is the colony's answer for this grid.
    pub fn run_to_quiescence<R: Rng>(&mut self, rng: &mut R) -> Quiescence {
        let cap = self
            .params
            .max_inner_iters
            .unwrap_or(10 * self.grid.cell_count().max(1));
        let mut steps = 0;
        loop {
            let moved = self.step(rng);
            steps += 1;
            if moved.is_empty() {
                return Quiescence {
                    steps,
                    cap_hit: false,
                };
            }
            if steps >= cap {
                return Quiescence {
                    steps,
                    cap_hit: true,
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::BoxDomain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Objective whose value at the center of cell i (width-1 cells from 0)
    /// is `table[i]`.
    fn table_objective(table: Vec<f64>) -> (ObjectiveFunction, Grid) {
        let n = table.len();
        let domain = BoxDomain::interval(0.0, n as f64).unwrap();
        let f = ObjectiveFunction::from_fn("table", domain.clone(), move |p| {
            table[(p[0].floor() as usize).min(table.len() - 1)]
        });
        let grid = Grid::partition(domain, &[n]).unwrap();
        (f, grid)
    }

    fn colony(table: Vec<f64>, params: AcoParams) -> ColonyState {
        let (f, grid) = table_objective(table);
        ColonyState::init(grid, &f, Sense::Minimize, &params, NeighborScheme::Axis).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_places_one_ant_per_cell_with_tau0() {
        let f1 = ObjectiveFunction::builtin("f1").unwrap();
        let grid = Grid::partition(f1.domain().clone(), &[20]).unwrap();
        let state = ColonyState::init(
            grid,
            &f1,
            Sense::Maximize,
            &AcoParams::default(),
            NeighborScheme::Full,
        )
        .unwrap();
        assert_eq!(state.ant_count(), 20);
        assert!(state.field().levels().iter().all(|&t| t == 10.0));

        let f3 = ObjectiveFunction::builtin("f3").unwrap();
        let grid = Grid::partition(f3.domain().clone(), &[2, 2]).unwrap();
        let state = ColonyState::init(
            grid,
            &f3,
            Sense::Maximize,
            &AcoParams::default(),
            NeighborScheme::Full,
        )
        .unwrap();
        assert_eq!(state.ant_count(), 4);
        assert_eq!(state.ant_count(), state.grid().cell_count());
    }

    #[test]
    fn allowed_moves_are_strict_improvements() {
        let state = colony(vec![3.0, 5.0, 7.0], AcoParams::default());
        // middle ant: one lower neighbor
        assert_eq!(state.allowed_moves(1), vec![CellId(vec![0])]);
        // bottom ant: grid-local minimum, nothing allowed
        assert!(state.allowed_moves(0).is_empty());

        // exact tie blocks movement
        let tied = colony(vec![5.0, 5.0], AcoParams::default());
        assert!(tied.allowed_moves(0).is_empty());
        assert!(tied.allowed_moves(1).is_empty());
    }

    #[test]
    fn single_allowed_cell_gets_probability_one() {
        let state = colony(vec![3.0, 5.0, 7.0], AcoParams::default());
        let probs = state.transition_probabilities(1);
        assert_eq!(probs, vec![(CellId(vec![0]), 1.0)]);
    }

    #[test]
    fn symmetric_choices_split_evenly() {
        let state = colony(vec![3.0, 5.0, 3.0], AcoParams::default());
        let probs = state.transition_probabilities(1);
        assert_eq!(probs.len(), 2);
        assert_eq!(probs[0].1, 0.5);
        assert_eq!(probs[1].1, 0.5);
    }

    #[test]
    fn transition_probability_substitution() {
        // alpha = beta = 1, tau = (10, 10), eta = (2, 6) -> (0.25, 0.75)
        let state = colony(vec![5.0, 7.0, 1.0], AcoParams::default());
        let probs = state.transition_probabilities(1);
        assert_eq!(probs.len(), 2);
        assert_eq!(probs[0], (CellId(vec![0]), 0.25));
        assert_eq!(probs[1], (CellId(vec![2]), 0.75));
    }

    #[test]
    fn pure_evaporation_when_nothing_moves() {
        // all equal values: no moves, tau' = 0.7 * tau = 7 exactly
        let mut state = colony(vec![4.0, 4.0, 4.0], AcoParams::default());
        let moved = state.step(&mut rng(1));
        assert!(moved.is_empty());
        assert!(state.field().levels().iter().all(|&t| t == 7.0));
        assert_eq!(state.t(), 1);
    }

    #[test]
    fn deposit_after_evaporation() {
        // one ant moves 5 -> 3 with c1 = 1 into a cell with tau = 10, rho = 0.3:
        // that cell's tau' = 7 + 2 = 9
        let mut state = colony(vec![5.0, 3.0], AcoParams::default());
        let moved = state.step(&mut rng(1));
        assert_eq!(moved.len(), 1);
        assert_eq!(moved[0].to, CellId(vec![1]));
        assert_eq!(state.field().tau(1), 9.0);
        assert_eq!(state.field().tau(0), 7.0);
    }

    #[test]
    fn ants_are_conserved() {
        let mut state = colony(vec![9.0, 2.0, 5.0, 1.0, 8.0], AcoParams::default());
        let before = state.ant_count();
        for _ in 0..10 {
            state.step(&mut rng(3));
        }
        assert_eq!(state.ant_count(), before);
    }

    #[test]
    fn monotone_values_drain_to_the_sink() {
        // values [3, 2, 1]: every allowed move strictly decreases the value,
        // the bottom cell absorbs, so all ants end at the last cell.
        let mut state = colony(vec![3.0, 2.0, 1.0], AcoParams::default());
        let q = state.run_to_quiescence(&mut rng(7));
        assert!(!q.cap_hit);
        assert_eq!(q.steps, 3);
        assert_eq!(state.occupied_cells(), vec![CellId(vec![2])]);
        assert!(state.positions.iter().all(|&p| p == 2));
    }

    #[test]
    fn two_basins_both_stay_occupied() {
        // descent cannot cross the ridge at the middle cell
        for seed in [1, 2, 3, 4, 5] {
            let mut state = colony(vec![1.0, 2.0, 3.0, 2.0, 1.0], AcoParams::default());
            let q = state.run_to_quiescence(&mut rng(seed));
            assert!(!q.cap_hit);
            assert_eq!(
                state.occupied_cells(),
                vec![CellId(vec![0]), CellId(vec![4])],
                "seed {seed}"
            );
        }
    }

    #[test]
    fn all_equal_values_are_quiescent_immediately() {
        let mut state = colony(vec![2.0, 2.0, 2.0, 2.0], AcoParams::default());
        let q = state.run_to_quiescence(&mut rng(5));
        assert_eq!(q.steps, 1);
        assert!(!q.cap_hit);
        assert_eq!(state.t(), 1);
        assert_eq!(state.occupied_cells().len(), 4);
    }

    #[test]
    fn descent_along_trajectories() {
        let mut state = colony(vec![9.0, 4.0, 6.0, 2.0, 8.0, 1.0], AcoParams::default());
        let mut r = rng(11);
        loop {
            let moved = state.step(&mut r);
            if moved.is_empty() {
                break;
            }
            for mv in &moved {
                assert!(state.value(&mv.from) > state.value(&mv.to));
            }
        }
    }

    #[test]
    fn geometric_decay_without_deposits() {
        let mut state = colony(vec![1.0, 2.0, 3.0], AcoParams::default());
        state.run_to_quiescence(&mut rng(2));
        let base = state.field().levels().to_vec();
        state.step(&mut rng(2));
        for (now, then) in state.field().levels().iter().zip(&base) {
            assert_eq!(*now, (1.0 - 0.3) * *then);
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let run = |seed: u64| {
            let mut state = colony(vec![9.0, 4.0, 6.0, 2.0, 8.0, 1.0, 3.0], AcoParams::default());
            let mut r = rng(seed);
            let mut all_moves = Vec::new();
            loop {
                let moved = state.step(&mut r);
                if moved.is_empty() {
                    break;
                }
                all_moves.extend(moved);
            }
            let bits: Vec<u64> = state.field().levels().iter().map(|t| t.to_bits()).collect();
            (all_moves, state.positions.clone(), bits)
        };
        assert_eq!(run(42), run(42));
        let (_, pos_a, _) = run(42);
        let (_, pos_b, _) = run(43);
        // positions can coincide across seeds, but the run must not panic
        let _ = (pos_a, pos_b);
    }

    #[test]
    fn step_cap_is_recorded_not_fatal() {
        let mut state = colony(
            vec![10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0],
            AcoParams {
                max_inner_iters: Some(2),
                ..AcoParams::default()
            },
        );
        let q = state.run_to_quiescence(&mut rng(1));
        assert!(q.cap_hit);
        assert_eq!(q.steps, 2);
    }

    #[test]
    fn param_validation() {
        assert!(AcoParams { rho: 1.0, ..AcoParams::default() }.validate().is_err());
        assert!(AcoParams { rho: -0.1, ..AcoParams::default() }.validate().is_err());
        assert!(AcoParams { tau0: 0.0, ..AcoParams::default() }.validate().is_err());
        assert!(AcoParams { c1: -1.0, ..AcoParams::default() }.validate().is_err());
        assert!(AcoParams { max_inner_iters: Some(0), ..AcoParams::default() }
            .validate()
            .is_err());
        assert!(AcoParams::default().validate().is_ok());
    }

    #[test]
    fn evaluation_error_propagates_from_init() {
        let domain = BoxDomain::interval(0.0, 1.0).unwrap();
        let expr = crate::expr::parse("1/(x-0.5)", 1).unwrap();
        let f = ObjectiveFunction::from_expr("pole", domain.clone(), expr).unwrap();
        // center of the middle cell lands exactly on the pole
        let grid = Grid::partition(domain, &[1]).unwrap();
        let err = ColonyState::init(
            grid,
            &f,
            Sense::Minimize,
            &AcoParams::default(),
            NeighborScheme::Axis,
        )
        .unwrap_err();
        assert!(matches!(err, ColonyError::Objective(_)));
    }
}
