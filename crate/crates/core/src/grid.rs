//! Uniform space-time meshes with two ghost layers on each side.
//!
//! Unknowns live at indices `1..=I`. Indices `-1, 0` and `I+1, I+2` carry
//! prescribed boundary values; the width-5 one-sided drift stencil reaches
//! two nodes past the domain.

use crate::error::{HjbError, Result};

/// Number of ghost/boundary layers on each side of an axis.
pub const GHOSTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    interior: usize,
    h: f64,
    /// Node coordinates for indices -1..=I+2, stored at offset `GHOSTS - 1`.
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, interior_count: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(HjbError::invalid(format!(
                "degenerate domain ({x_min}, {x_max})"
            )));
        }
        if interior_count < 1 {
            return Err(HjbError::invalid("interior_count must be at least 1"));
        }
        let h = (x_max - x_min) / (interior_count + 1) as f64;
        // x_min + i*h rather than cumulative sums, so that refinement nests
        // bit-exactly.
        let nodes = (-1..=interior_count as isize + 2)
            .map(|i| x_min + i as f64 * h)
            .collect();
        Ok(Grid1D {
            x_min,
            x_max,
            interior: interior_count,
            h,
            nodes,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of unknowns `I`.
    pub fn interior_count(&self) -> usize {
        self.interior
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of node `i`, valid for `-1 <= i <= I + 2`.
    pub fn node(&self, i: isize) -> f64 {
        self.nodes[(i + 1) as usize]
    }

    /// Coordinates of the unknowns `x_1..x_I`.
    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[GHOSTS..GHOSTS + self.interior]
    }

    /// Coordinates of all nodes `x_{-1}..x_{I+2}`.
    pub fn all_nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// The four ghost/boundary coordinates `x_{-1}, x_0, x_{I+1}, x_{I+2}`.
    pub fn ghost_nodes(&self) -> [f64; 4] {
        let i = self.interior as isize;
        [
            self.node(-1),
            self.node(0),
            self.node(i + 1),
            self.node(i + 2),
        ]
    }

    /// The grid with `2I + 1` unknowns, i.e. half the step on the same domain.
    pub fn refined(&self) -> Self {
        Grid1D::new(self.x_min, self.x_max, 2 * self.interior + 1).expect("refining a valid grid")
    }

    /// If every node of `self` is a node of `fine`, returns the index ratio
    /// `r` such that `self.node(i) == fine.node(r * i)`.
    pub fn nesting_ratio(&self, fine: &Grid1D) -> Option<usize> {
        if self.x_min != fine.x_min || self.x_max != fine.x_max {
            return None;
        }
        let (coarse_cells, fine_cells) = (self.interior + 1, fine.interior + 1);
        if fine_cells % coarse_cells != 0 {
            return None;
        }
        let ratio = fine_cells / coarse_cells;
        let tol = 1e-12 * (self.x_max - self.x_min).abs().max(1.0);
        let matches = (0..=coarse_cells as isize)
            .all(|i| (self.node(i) - fine.node(i * ratio as isize)).abs() <= tol);
        matches.then_some(ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    tau: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(HjbError::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 1 {
            return Err(HjbError::invalid("number of time steps must be at least 1"));
        }
        Ok(TimeGrid {
            horizon,
            steps,
            tau: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }
}

/// Tensor-product mesh; the flattened unknown ordering is row-major with
/// the x index running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Grid2D { x, y }
    }

    pub fn unknowns(&self) -> usize {
        self.x.interior_count() * self.y.interior_count()
    }

    /// Flat index of the unknown at 1-based node indices `(i, j)`.
    pub fn flat(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.x.interior_count() + (i - 1)
    }

    /// Inverse of [`Grid2D::flat`].
    pub fn unflat(&self, k: usize) -> (usize, usize) {
        let nx = self.x.interior_count();
        (k % nx + 1, k / nx + 1)
    }
}

/// Outcome of the step-ratio test `b_sup * tau / h < bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflCheck {
    pub ok: bool,
    pub ratio: f64,
    pub margin: f64,
}

/// Bound for BDF2 steps.
pub const CFL_BOUND_BDF2: f64 = 1.5;
/// Bound for the backward-Euler step.
pub const CFL_BOUND_EULER: f64 = 1.0;

/// Ratios within a few ulps of the bound count as violations, so that e.g.
/// `0.03 / 0.02` is not accepted against 3/2.
pub fn check_cfl(b_sup: f64, tau: f64, h: f64, bound: f64) -> CflCheck {
    let ratio = b_sup.abs() * tau / h;
    CflCheck {
        ok: ratio < bound * (1.0 - 8.0 * f64::EPSILON),
        ratio,
        margin: bound - ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_three_unknowns() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.interior_nodes(), &[0.25, 0.5, 0.75]);
    }

    #[test]
    fn fig1_grid() {
        let g = Grid1D::new(-2.0, 2.0, 199).unwrap();
        assert!((g.h() - 0.02).abs() < 1e-15);
        assert_eq!(g.node(0), -2.0);
        assert!((g.node(200) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_unknown_ghosts() {
        let g = Grid1D::new(-1.0, 1.0, 1).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.interior_nodes(), &[0.0]);
        assert_eq!(g.ghost_nodes(), [-2.0, -1.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid1D::new(1.0, 1.0, 3).is_err());
        assert!(Grid1D::new(2.0, 1.0, 3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn refinement_nests_bitwise() {
        let mut g = Grid1D::new(-2.0, 2.0, 9).unwrap();
        for _ in 0..6 {
            let f = g.refined();
            assert_eq!(f.h() * 2.0, g.h());
            for i in 0..=(g.interior_count() as isize + 1) {
                assert_eq!(g.node(i), f.node(2 * i));
            }
            assert_eq!(g.nesting_ratio(&f), Some(2));
            g = f;
        }
    }

    #[test]
    fn nesting_ratio_rejects_mismatch() {
        let a = Grid1D::new(0.0, 1.0, 2).unwrap();
        let b = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert_eq!(a.nesting_ratio(&b), None);
        let c = Grid1D::new(0.0, 2.0, 5).unwrap();
        assert_eq!(a.nesting_ratio(&c), None);
        let d = Grid1D::new(0.0, 1.0, 8).unwrap();
        assert_eq!(a.nesting_ratio(&d), Some(3));
    }

    #[test]
    fn time_grid() {
        let t = TimeGrid::new(0.2, 20).unwrap();
        assert!((t.tau() - 0.01).abs() < 1e-17);
        assert_eq!(t.t(0), 0.0);
        assert!((t.t(20) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cfl_examples() {
        let c = check_cfl(1.0, 0.01, 0.02, CFL_BOUND_BDF2);
        assert!(c.ok);
        assert!((c.margin - 1.0).abs() < 1e-15);
        assert!(check_cfl(0.0, 10.0, 0.001, CFL_BOUND_BDF2).ok);
        let c = check_cfl(1.0, 0.03, 0.02, CFL_BOUND_BDF2);
        assert!(!c.ok);
    }

    #[test]
    fn flat_indexing_roundtrip() {
        let g = Grid2D::new(
            Grid1D::new(0.0, 1.0, 4).unwrap(),
            Grid1D::new(0.0, 1.0, 3).unwrap(),
        );
        for k in 0..g.unknowns() {
            let (i, j) = g.unflat(k);
            assert_eq!(g.flat(i, j), k);
        }
        assert_eq!(g.flat(2, 1), 1);
        assert_eq!(g.flat(1, 2), 4);
    }
}
