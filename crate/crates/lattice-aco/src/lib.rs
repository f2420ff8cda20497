//! Find all local extrema of a multimodal function on a box domain with
//! lattice-partitioned ant colonies.
//!
//! The domain is cut into a uniform lattice with an ant at every cell
//! center. Ants may only move to neighboring cells with strictly better
//! values; moves are sampled from a pheromone-weighted transition
//! distribution and arrivals deposit pheromone proportional to the
//! improvement. Once no ant can move, only occupied cells survive; each is
//! subdivided and the colony restarts, until cells shrink below a
//! threshold. The surviving cell centers approximate the extrema.
//!
//! The crate also ships a dense-grid brute-force oracle ([`oracle`]), a
//! classical ant-system TSP baseline ([`tsp`]) that validates the shared
//! pheromone machinery, and a CLI with JSON/CSV reporting ([`cli`]).

pub mod cli;
pub mod colony;
pub mod expr;
pub mod grid;
pub mod objective;
pub mod oracle;
pub mod report;
pub mod search;
pub mod tsp;

pub use colony::{AcoParams, Ant, ColonyState, MoveRecord, PheromoneField, Quiescence};
pub use expr::{parse, Expr};
pub use grid::{CellId, Grid, NeighborScheme};
pub use objective::{BoxDomain, ObjectiveFunction, Sense};
pub use oracle::{grid_extrema, tsp_brute, OracleConfig, OracleExtremum};
pub use search::{dedup, error_ratio, search, ErrorRatio, ExtremumResult, RunReport, SearchConfig};
pub use tsp::{convergence_marker, solve_tsp, CityGraph, TspOutcome, TspParams};
