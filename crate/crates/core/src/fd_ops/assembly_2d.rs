//! Two-dimensional step systems on the row-major interior ordering
//! `k = (j - 1) I1 + (i - 1)`.
//!
//! The operator is
//! `-1/2 (alpha Dx + beta Dy + gamma Dxy) u + b1 Dx^upw u + b2 Dy^upw u + r u + l`
//! with undivided second differences `Dx`, `Dy` and the `(1, 1)` diagonal
//! difference `Dxy`, and BDF2 one-sided drift along each axis.

use crate::error::{HjbError, Result};
use crate::grid::Grid2D;
use crate::problem::HjbProblem2D;

use super::assembly::{compose, SpatialOperator, StepHistory};
use super::banded::BandedMatrix;
use super::stencil::stencil_coefficients_2d;
use super::system::{StepMeta, SupLinearSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct ControlCoefficients2D {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub discount: Vec<f64>,
    pub source: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients2D {
    pub t: f64,
    pub per_control: Vec<ControlCoefficients2D>,
}

impl SampledCoefficients2D {
    /// `(sup |b1|, sup |b2|)` over controls and nodes.
    pub fn drift_sup(&self) -> (f64, f64) {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        self.per_control.iter().fold((0.0, 0.0), |(x, y), c| {
            (x.max(sup(&c.b1)), y.max(sup(&c.b2)))
        })
    }
}

pub fn sample_coefficients_2d(
    problem: &HjbProblem2D,
    grid: &Grid2D,
    t: f64,
) -> Result<SampledCoefficients2D> {
    if problem.controls.is_empty() {
        return Err(HjbError::invalid("control list is empty"));
    }
    let n = grid.unknowns();
    let (hx, hy) = (grid.x.h(), grid.y.h());
    let mut per_control = Vec::with_capacity(problem.controls.len());
    for (ia, &a) in problem.controls.iter().enumerate() {
        let mut c = ControlCoefficients2D {
            alpha: Vec::with_capacity(n),
            beta: Vec::with_capacity(n),
            gamma: Vec::with_capacity(n),
            b1: Vec::with_capacity(n),
            b2: Vec::with_capacity(n),
            discount: Vec::with_capacity(n),
            source: Vec::with_capacity(n),
        };
        for k in 0..n {
            let (i, j) = grid.unflat(k);
            let (x, y) = (grid.x.node(i as isize), grid.y.node(j as isize));
            let vals = [
                (problem.sigma1)(t, x, y, a),
                (problem.sigma2)(t, x, y, a),
                (problem.rho)(t, x, y, a),
                (problem.b1)(t, x, y, a),
                (problem.b2)(t, x, y, a),
                (problem.discount)(t, x, y, a),
                (problem.source)(t, x, y, a),
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(HjbError::NonFiniteCoefficient { t, x, control: ia });
            }
            let (al, be, ga) = stencil_coefficients_2d(vals[0], vals[1], vals[2], hx, hy)?;
            c.alpha.push(al);
            c.beta.push(be);
            c.gamma.push(ga);
            c.b1.push(vals[3]);
            c.b2.push(vals[4]);
            c.discount.push(vals[5]);
            c.source.push(vals[6]);
        }
        per_control.push(c);
    }
    Ok(SampledCoefficients2D { t, per_control })
}

/// `ghost(i, j)` supplies values at node indices outside `1..=I1 x 1..=I2`.
pub fn spatial_operator_2d(
    c: &ControlCoefficients2D,
    grid: &Grid2D,
    ghost: &dyn Fn(isize, isize) -> f64,
) -> SpatialOperator {
    let (n1, n2) = (grid.x.interior_count(), grid.y.interior_count());
    let s = n1 as isize;
    let offsets = [-2, -1, 1, 2, -s, s, -2 * s, 2 * s, -(s + 1), s + 1];
    let mut matrix = BandedMatrix::zeros(grid.unknowns(), &offsets);
    let mut offset = c.source.clone();
    let (hx, hy) = (grid.x.h(), grid.y.h());
    for k in 0..grid.unknowns() {
        let (i, j) = grid.unflat(k);
        let (i, j) = (i as isize, j as isize);
        let mut terms: Vec<(isize, isize, f64)> = Vec::with_capacity(13);
        let (al, be, ga) = (0.5 * c.alpha[k], 0.5 * c.beta[k], 0.5 * c.gamma[k]);
        terms.push((0, 0, 2.0 * (al + be + ga) + c.discount[k]));
        terms.extend([(-1, 0, -al), (1, 0, -al), (0, -1, -be), (0, 1, -be)]);
        terms.extend([(-1, -1, -ga), (1, 1, -ga)]);
        let upwind = |b: f64, h: f64, unit: (isize, isize), out: &mut Vec<(isize, isize, f64)>| {
            let (p, m) = (b.max(0.0) / (2.0 * h), (-b).max(0.0) / (2.0 * h));
            out.push((0, 0, 3.0 * (p + m)));
            out.push((-unit.0, -unit.1, -4.0 * p));
            out.push((-2 * unit.0, -2 * unit.1, p));
            out.push((unit.0, unit.1, -4.0 * m));
            out.push((2 * unit.0, 2 * unit.1, m));
        };
        upwind(c.b1[k], hx, (1, 0), &mut terms);
        upwind(c.b2[k], hy, (0, 1), &mut terms);
        for (di, dj, w) in terms {
            if w == 0.0 {
                continue;
            }
            let (ni, nj) = (i + di, j + dj);
            if (1..=n1 as isize).contains(&ni) && (1..=n2 as isize).contains(&nj) {
                matrix.add(k, grid.flat(ni as usize, nj as usize), w);
            } else {
                offset[k] += w * ghost(ni, nj);
            }
        }
    }
    SpatialOperator { matrix, offset }
}

pub fn assemble_2d_from_samples(
    coeffs: &SampledCoefficients2D,
    controls: &[f64],
    grid: &Grid2D,
    ghost: &dyn Fn(isize, isize) -> f64,
    tau: f64,
    history: StepHistory<'_>,
) -> Result<SupLinearSystem> {
    let (lead, hist) = history.parts();
    if hist.len() != grid.unknowns() {
        return Err(HjbError::invalid("history vector does not match the grid"));
    }
    let (matrices, rhs) = coeffs
        .per_control
        .iter()
        .map(|c| compose(spatial_operator_2d(c, grid, ghost), lead, tau, &hist))
        .unzip();
    SupLinearSystem::new(
        controls.to_vec(),
        matrices,
        rhs,
        StepMeta {
            t: coeffs.t,
            tau,
            h: grid.x.h(),
            hy: Some(grid.y.h()),
        },
    )
}

pub fn assemble_step_system_2d(
    problem: &HjbProblem2D,
    grid: &Grid2D,
    t_k: f64,
    tau: f64,
    history: StepHistory<'_>,
) -> Result<SupLinearSystem> {
    if !(tau > 0.0) {
        return Err(HjbError::invalid(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let coeffs = sample_coefficients_2d(problem, grid, t_k)?;
    let ghost = |i: isize, j: isize| (problem.boundary)(t_k, grid.x.node(i), grid.y.node(j));
    assemble_2d_from_samples(&coeffs, &problem.controls, grid, &ghost, tau, history)
}
