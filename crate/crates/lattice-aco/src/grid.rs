//! Uniform lattice partition of a box region: cells, centers, neighbor
//! enumeration, and per-cell subdivision.

use thiserror::Error;

use crate::objective::BoxDomain;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("counts must have one entry >= 1 per dimension, got {0:?}")]
    BadCounts(Vec<usize>),
    #[error("counts {counts:?} do not match domain dimension {dim}")]
    DimensionMismatch { counts: Vec<usize>, dim: usize },
    #[error("cell {0:?} is out of range for this grid")]
    CellOutOfRange(CellId),
    #[error("cannot subdivide an empty set of occupied cells")]
    EmptyOccupiedSet,
}

/// Multi-index of one cell, one entry per dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub Vec<usize>);

impl CellId {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// How cells are adjacent: `Axis` differs by one in exactly one dimension
/// (the one-dimensional definition), `Full` admits any offset in
/// `{-1, 0, +1}` per dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NeighborScheme {
    Axis,
    Full,
}

impl NeighborScheme {
    pub fn label(self) -> &'static str {
        match self {
            NeighborScheme::Axis => "axis",
            NeighborScheme::Full => "full",
        }
    }
}

/// A uniform partition of `region` into `counts[k]` cells per dimension.
/// Immutable; all operations read-only.
#[derive(Clone, Debug)]
pub struct Grid {
    region: BoxDomain,
    counts: Vec<usize>,
    delta: Vec<f64>,
}

impl Grid {
    /// Partition `region` into `counts[k]` equal cells per dimension, each of
    /// size `delta[k] = width[k] / counts[k]`.
    pub fn partition(region: BoxDomain, counts: &[usize]) -> Result<Grid, LatticeError> {
        if counts.len() != region.dim() {
            return Err(LatticeError::DimensionMismatch {
                counts: counts.to_vec(),
                dim: region.dim(),
            });
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(LatticeError::BadCounts(counts.to_vec()));
        }
        let delta = (0..region.dim())
            .map(|k| region.width(k) / counts[k] as f64)
            .collect();
        Ok(Grid {
            region,
            counts: counts.to_vec(),
            delta,
        })
    }

    pub fn region(&self) -> &BoxDomain {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_valid(&self, cell: &CellId) -> bool {
        cell.dim() == self.dim() && cell.0.iter().zip(&self.counts).all(|(i, c)| i < c)
    }

    /// Row-major linear index (last dimension varies fastest).
    pub fn linear_index(&self, cell: &CellId) -> usize {
        debug_assert!(self.is_valid(cell));
        let mut idx = 0;
        for (i, c) in cell.0.iter().zip(&self.counts) {
            idx = idx * c + i;
        }
        idx
    }

    pub fn cell_at(&self, mut linear: usize) -> CellId {
        debug_assert!(linear < self.cell_count());
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = linear % self.counts[k];
            linear /= self.counts[k];
        }
        CellId(idx)
    }

    /// All cells in linear (row-major) order.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cell_count()).map(|i| self.cell_at(i))
    }

    /// Cell center: `lower[k] + (index[k] + 1/2) * delta[k]`.
    pub fn center(&self, cell: &CellId) -> Result<Vec<f64>, LatticeError> {
        if !self.is_valid(cell) {
            return Err(LatticeError::CellOutOfRange(cell.clone()));
        }
        Ok(cell
            .0
            .iter()
            .enumerate()
            .map(|(k, &i)| self.region.lower()[k] + (i as f64 + 0.5) * self.delta[k])
            .collect())
    }

    /// The cell's box. Edge cells reuse the region bounds exactly, so nested
    /// subdivision preserves outer boundaries bit-for-bit.
    pub fn cell_box(&self, cell: &CellId) -> Result<BoxDomain, LatticeError> {
        if !self.is_valid(cell) {
            return Err(LatticeError::CellOutOfRange(cell.clone()));
        }
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for (k, &i) in cell.0.iter().enumerate() {
            let lo = if i == 0 {
                self.region.lower()[k]
            } else {
                self.region.lower()[k] + i as f64 * self.delta[k]
            };
            let hi = if i + 1 == self.counts[k] {
                self.region.upper()[k]
            } else {
                self.region.lower()[k] + (i + 1) as f64 * self.delta[k]
            };
            lower.push(lo);
            upper.push(hi);
        }
        BoxDomain::new(lower, upper)
            .map_err(|_| LatticeError::CellOutOfRange(cell.clone()))
    }

    /// Neighbors under the given scheme; boundary cells simply have fewer.
    pub fn neighbors(&self, cell: &CellId, scheme: NeighborScheme) -> Vec<CellId> {
        debug_assert!(self.is_valid(cell));
        match scheme {
            NeighborScheme::Axis => {
                let mut out = Vec::with_capacity(2 * self.dim());
                for k in 0..self.dim() {
                    if cell.0[k] > 0 {
                        let mut idx = cell.0.clone();
                        idx[k] -= 1;
                        out.push(CellId(idx));
                    }
                    if cell.0[k] + 1 < self.counts[k] {
                        let mut idx = cell.0.clone();
                        idx[k] += 1;
                        out.push(CellId(idx));
                    }
                }
                out
            }
            NeighborScheme::Full => {
                let mut out = Vec::new();
                let mut offset = vec![-1i64; self.dim()];
                loop {
                    if offset.iter().any(|&o| o != 0) {
                        let mut idx = Vec::with_capacity(self.dim());
                        let mut ok = true;
                        for k in 0..self.dim() {
                            let v = cell.0[k] as i64 + offset[k];
                            if v < 0 || v >= self.counts[k] as i64 {
                                ok = false;
                                break;
                            }
                            idx.push(v as usize);
                        }
                        if ok {
                            out.push(CellId(idx));
                        }
                    }
                    // odometer over {-1, 0, 1}^dim
                    let mut k = self.dim();
                    loop {
                        if k == 0 {
                            return out;
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
        }
    }

    /// One child grid per occupied cell, each partitioning that cell's box
    /// into `n1[k]` cells per dimension. An empty occupied set signals a
    /// colony bug (ants are never destroyed) and is an error.
    pub fn subdivide(
        &self,
        occupied: &[CellId],
        n1: &[usize],
    ) -> Result<Vec<Grid>, LatticeError> {
        if occupied.is_empty() {
            return Err(LatticeError::EmptyOccupiedSet);
        }
        occupied
            .iter()
            .map(|cell| Grid::partition(self.cell_box(cell)?, n1))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_line(n: usize) -> Grid {
        Grid::partition(BoxDomain::interval(0.0, 1.0).unwrap(), &[n]).unwrap()
    }

    #[test]
    fn partition_deltas() {
        assert_eq!(unit_line(20).delta(), &[0.05]);
        let g2 = Grid::partition(
            BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            &[40, 40],
        )
        .unwrap();
        assert_eq!(g2.delta(), &[0.05, 0.05]);
        let g3 = Grid::partition(BoxDomain::interval(0.0, 8.0).unwrap(), &[480]).unwrap();
        assert_eq!(g3.delta(), &[1.0 / 60.0]);
    }

    #[test]
    fn partition_rejects_zero_counts_and_bad_dims() {
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            Grid::partition(dom.clone(), &[0]),
            Err(LatticeError::BadCounts(_))
        ));
        assert!(matches!(
            Grid::partition(dom, &[2, 2]),
            Err(LatticeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn centers() {
        let g = unit_line(20);
        assert_eq!(g.center(&CellId(vec![0])).unwrap(), vec![0.025]);
        assert!((g.center(&CellId(vec![19])).unwrap()[0] - 0.975).abs() < 1e-15);
        let g2 = Grid::partition(
            BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            &[2, 2],
        )
        .unwrap();
        assert_eq!(g2.center(&CellId(vec![0, 1])).unwrap(), vec![-0.5, 0.5]);
        assert!(matches!(
            g.center(&CellId(vec![20])),
            Err(LatticeError::CellOutOfRange(_))
        ));
    }

    #[test]
    fn neighbors_one_dimensional() {
        let g = unit_line(20);
        assert_eq!(
            g.neighbors(&CellId(vec![0]), NeighborScheme::Axis),
            vec![CellId(vec![1])]
        );
        let mid = g.neighbors(&CellId(vec![5]), NeighborScheme::Axis);
        assert_eq!(mid, vec![CellId(vec![4]), CellId(vec![6])]);
        assert_eq!(
            g.neighbors(&CellId(vec![19]), NeighborScheme::Axis),
            vec![CellId(vec![18])]
        );
    }

    #[test]
    fn neighbors_full_two_dimensional() {
        let g = Grid::partition(
            BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            &[3, 3],
        )
        .unwrap();
        assert_eq!(g.neighbors(&CellId(vec![1, 1]), NeighborScheme::Full).len(), 8);
        assert_eq!(g.neighbors(&CellId(vec![0, 0]), NeighborScheme::Full).len(), 3);
        assert_eq!(g.neighbors(&CellId(vec![1, 1]), NeighborScheme::Axis).len(), 4);
    }

    #[test]
    fn subdivision_shrinks_delta_by_n1() {
        let g = unit_line(20);
        let children = g.subdivide(&[CellId(vec![3])], &[10]).unwrap();
        assert_eq!(children.len(), 1);
        assert!((children[0].delta()[0] - 0.005).abs() < 1e-15);

        let g2 = Grid::partition(
            BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            &[40, 40],
        )
        .unwrap();
        let kids = g2.subdivide(&[CellId(vec![7, 12])], &[20, 20]).unwrap();
        assert!((kids[0].delta()[0] - 0.0025).abs() < 1e-15);
        assert!((kids[0].delta()[1] - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn subdividing_nothing_is_an_error() {
        let g = unit_line(4);
        assert!(matches!(
            g.subdivide(&[], &[10]),
            Err(LatticeError::EmptyOccupiedSet)
        ));
    }

    #[test]
    fn edge_cells_keep_exact_region_bounds() {
        let g = unit_line(7);
        let first = g.cell_box(&CellId(vec![0])).unwrap();
        let last = g.cell_box(&CellId(vec![6])).unwrap();
        assert_eq!(first.lower()[0], 0.0);
        assert_eq!(last.upper()[0], 1.0);
        // and the property survives nesting
        let kid = g
            .subdivide(&[CellId(vec![6])], &[3])
            .unwrap()
            .pop()
            .unwrap();
        assert_eq!(kid.cell_box(&CellId(vec![2])).unwrap().upper()[0], 1.0);
    }

    #[test]
    fn linear_index_roundtrip() {
        let g = Grid::partition(
            BoxDomain::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap(),
            &[3, 4, 5],
        )
        .unwrap();
        for (i, cell) in g.cells().enumerate() {
            assert_eq!(g.linear_index(&cell), i);
            assert_eq!(g.cell_at(i), cell);
        }
    }

    #[test]
    fn repeated_subdivision_delta_schedule() {
        // After k rounds with uniform n1, max delta = initial / n1^k.
        let mut grid = unit_line(20);
        let d0 = grid.max_delta();
        for k in 1..=4 {
            grid = grid
                .subdivide(&[CellId(vec![0])], &[10])
                .unwrap()
                .pop()
                .unwrap();
            let expect = d0 / 10f64.powi(k);
            assert!(
                (grid.max_delta() - expect).abs() <= 1e-12 * expect,
                "round {k}: {} vs {}",
                grid.max_delta(),
                expect
            );
        }
    }
}
