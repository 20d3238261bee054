use std::io::{self, Write};

use crate::error::{HjbError, Result};
use crate::fd_ops::{assemble_2d_from_samples, sample_coefficients_2d, StepHistory};
use crate::grid::{check_cfl, Grid2D, TimeGrid, CFL_BOUND_BDF2, CFL_BOUND_EULER};
use crate::problem::HjbProblem2D;
use crate::sup_solver::{solve_sup_from, SolverOptions};

use super::{require_cfl, step_failed, CoefficientCache, SchemeTag, StepKind, StepRecord};

#[derive(Debug, Clone)]
pub struct Trajectory2D {
    pub grid: Grid2D,
    pub time: TimeGrid,
    /// Levels in the row-major interior ordering of [`Grid2D::flat`].
    pub levels: Vec<Vec<f64>>,
    pub scheme: SchemeTag,
    pub steps: Vec<StepRecord>,
}

impl Trajectory2D {
    pub fn final_level(&self) -> &[f64] {
        self.levels.last().expect("trajectory has u^0")
    }

    /// Value at 1-based node indices `(i, j)` of level `k`.
    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.levels[k][self.grid.flat(i, j)]
    }

    pub fn write_snapshot_csv<W: Write>(&self, k: usize, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y,u")?;
        let t = self.time.t(k);
        for (idx, u) in self.levels[k].iter().enumerate() {
            let (i, j) = self.grid.unflat(idx);
            let (x, y) = (self.grid.x.node(i as isize), self.grid.y.node(j as isize));
            writeln!(w, "{t},{x},{y},{u}")?;
        }
        Ok(())
    }
}

/// Backward-Euler first step, then BDF2, on the 7-point stencil. The step
/// ratio is checked per axis against `b_sup * tau / h`.
pub fn run_bdf2_2d(
    problem: &HjbProblem2D,
    grid: &Grid2D,
    time: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory2D> {
    if problem.controls.is_empty() {
        return Err(HjbError::invalid("control list is empty"));
    }
    let tau = time.tau();
    let u0: Vec<f64> = (0..grid.unknowns())
        .map(|k| {
            let (i, j) = grid.unflat(k);
            (problem.initial)(grid.x.node(i as isize), grid.y.node(j as isize))
        })
        .collect();
    let mut cache = CoefficientCache::new(problem.autonomous, |t| {
        sample_coefficients_2d(problem, grid, t)
    });
    let mut levels = vec![u0];
    let mut steps = Vec::with_capacity(time.steps());
    for k in 1..=time.steps() {
        let t = time.t(k);
        let coeffs = cache.at(t).map_err(step_failed(k))?;
        let two_step = k >= 2;
        let bound = if two_step {
            CFL_BOUND_BDF2
        } else {
            CFL_BOUND_EULER
        };
        let (bx, by) = coeffs.drift_sup();
        let cx = check_cfl(bx, tau, grid.x.h(), bound);
        let cy = check_cfl(by, tau, grid.y.h(), bound);
        let cfl = if cx.ratio >= cy.ratio { cx } else { cy };
        require_cfl(k, cfl, bound)?;
        let history = if two_step {
            StepHistory::Bdf2 {
                previous: &levels[k - 1],
                before_previous: &levels[k - 2],
            }
        } else {
            StepHistory::Euler {
                previous: &levels[k - 1],
            }
        };
        let ghost = |i: isize, j: isize| (problem.boundary)(t, grid.x.node(i), grid.y.node(j));
        let (x, stats) =
            assemble_2d_from_samples(coeffs, &problem.controls, grid, &ghost, tau, history)
                .and_then(|mut sys| {
                    sys.meta.t = t;
                    solve_sup_from(&sys, &levels[k - 1], opts)
                })
                .map_err(step_failed(k))?;
        steps.push(StepRecord {
            step: k,
            t,
            kind: if two_step {
                StepKind::Bdf2
            } else {
                StepKind::Euler
            },
            cfl_ratio: cfl.ratio,
            stats,
        });
        levels.push(x);
    }
    Ok(Trajectory2D {
        grid: grid.clone(),
        time: *time,
        levels,
        scheme: SchemeTag::Bdf2,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::problem::HjbProblem;
    use crate::stepper::run_bdf2;
    use std::f64::consts::PI;

    #[test]
    fn zero_dynamics_is_stationary() {
        let g = Grid2D::new(
            Grid1D::new(0.0, 1.0, 5).unwrap(),
            Grid1D::new(0.0, 2.0, 4).unwrap(),
        );
        let p = HjbProblem2D::new(vec![1.0, 2.0], (0.0, 1.0), (0.0, 2.0), 1.0)
            .with_initial(|x, y| x + y * y);
        let tr = run_bdf2_2d(
            &p,
            &g,
            &TimeGrid::new(1.0, 6).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        for l in &tr.levels {
            assert!(l
                .iter()
                .zip(&tr.levels[0])
                .all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn rows_match_1d_runs() {
        let (n1, n2) = (19, 4);
        let g = Grid2D::new(
            Grid1D::new(-1.0, 1.0, n1).unwrap(),
            Grid1D::new(0.0, 1.0, n2).unwrap(),
        );
        let time = TimeGrid::new(0.3, 12).unwrap();
        let init = |x: f64| (PI * x).sin() + 0.5 * x;
        let p2 = HjbProblem2D::new(vec![0.2, 0.6], (-1.0, 1.0), (0.0, 1.0), 0.3)
            .with_sigma1(|_, x, _, a| a * (1.0 + 0.2 * x))
            .with_b1(|_, x, _, a| (a - 0.4) * x)
            .with_initial(move |x, _| init(x))
            .with_boundary(|t, x, _| 0.5 * x + t);
        let p1 = HjbProblem::new(vec![0.2, 0.6], (-1.0, 1.0), 0.3)
            .with_sigma(|_, x, a| a * (1.0 + 0.2 * x))
            .with_drift(|_, x, a| (a - 0.4) * x)
            .with_initial(init)
            .with_boundary(|t, x| 0.5 * x + t);
        let opts = SolverOptions::default();
        let t2 = run_bdf2_2d(&p2, &g, &time, &opts).unwrap();
        let t1 = run_bdf2(&p1, &g.x, &time, &opts).unwrap();
        for k in 0..=12 {
            for j in 1..=n2 {
                for i in 1..=n1 {
                    assert!((t2.at(k, i, j) - t1.levels[k][i - 1]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn transpose_symmetry() {
        let n = 11;
        let axis = Grid1D::new(0.0, 1.0, n).unwrap();
        let g = Grid2D::new(axis.clone(), axis);
        let p = HjbProblem2D::new(vec![0.7], (0.0, 1.0), (0.0, 1.0), 0.2)
            .with_sigma1(|_, _, _, _| 0.7)
            .with_sigma2(|_, _, _, _| 0.7)
            .with_initial(|x, y| (PI * x).sin() * (PI * y).sin() + x * y * (1.0 - x) * (1.0 - y));
        let tr = run_bdf2_2d(
            &p,
            &g,
            &TimeGrid::new(0.2, 10).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        for k in 0..=10 {
            for i in 1..=n {
                for j in 1..=n {
                    assert!((tr.at(k, i, j) - tr.at(k, j, i)).abs() < 1e-9);
                }
            }
        }
    }
}
