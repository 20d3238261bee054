use std::sync::Arc;

use crate::error::{HjbError, Result};
use crate::fd_ops::{numerical_hamiltonian, sample_coefficients, Padded};
use crate::grid::{Grid1D, TimeGrid};
use crate::problem::{DriftMode, HjbProblem};
use crate::stepper::Trajectory;

use super::norms::{norm, NormKind};

/// Time levels over which errors are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorRange {
    /// `k = 2..=N`, the range of the stability estimates.
    #[default]
    FromSecondStep,
    AllLevels,
    FinalLevel,
}

/// Per-norm `max_k` of the norms of `u^k - v(t_k, .)`.
pub fn error_vs_exact(
    traj: &Trajectory,
    exact: Option<&(dyn Fn(f64, f64) -> f64 + Send + Sync)>,
    norms: &[NormKind],
    range: ErrorRange,
) -> Result<Vec<f64>> {
    let exact = exact.ok_or(HjbError::MissingExact)?;
    let last = traj.time.steps();
    let first = match range {
        ErrorRange::FromSecondStep => 2.min(last),
        ErrorRange::AllLevels => 0,
        ErrorRange::FinalLevel => last,
    };
    let h = traj.grid.h();
    let mut out = vec![0.0f64; norms.len()];
    for k in first..=last {
        let t = traj.time.t(k);
        let level = traj
            .level(k)
            .ok_or_else(|| HjbError::invalid(format!("level {k} was not retained")))?;
        let e: Vec<f64> = traj
            .grid
            .interior_nodes()
            .iter()
            .zip(level)
            .map(|(&x, u)| u - exact(t, x))
            .collect();
        for (o, &kind) in out.iter_mut().zip(norms) {
            *o = o.max(norm(&e, kind, h));
        }
    }
    Ok(out)
}

/// `fine`'s unknowns at the nodes of `coarse`.
pub fn restrict_to(coarse: &Grid1D, fine: &Grid1D, values: &[f64]) -> Result<Vec<f64>> {
    let r = coarse.nesting_ratio(fine).ok_or_else(|| {
        HjbError::NonNestedGrids(format!(
            "{} cells on ({}, {}) vs {} cells on ({}, {})",
            coarse.interior_count() + 1,
            coarse.x_min(),
            coarse.x_max(),
            fine.interior_count() + 1,
            fine.x_min(),
            fine.x_max()
        ))
    })?;
    if values.len() != fine.interior_count() {
        return Err(HjbError::invalid("values do not match the fine grid"));
    }
    Ok((1..=coarse.interior_count())
        .map(|i| values[r * i - 1])
        .collect())
}

/// Final-time errors of `traj` against `reference` restricted to its nodes.
pub fn error_vs_reference(
    traj: &Trajectory,
    reference: &Trajectory,
    norms: &[NormKind],
) -> Result<Vec<f64>> {
    let (t, tr) = (traj.time.horizon(), reference.time.horizon());
    if (t - tr).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(HjbError::invalid(format!(
            "final times differ: {t} vs {tr}"
        )));
    }
    let r = restrict_to(&traj.grid, &reference.grid, reference.final_level())?;
    let e: Vec<f64> = traj
        .final_level()
        .iter()
        .zip(&r)
        .map(|(a, b)| a - b)
        .collect();
    Ok(norms.iter().map(|&k| norm(&e, k, traj.grid.h())).collect())
}

/// A smooth test function with its exact derivatives.
#[derive(Clone)]
pub struct SmoothFunction {
    pub value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub dt: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub dx: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub dxx: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl SmoothFunction {
    pub fn new(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dt: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dxx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SmoothFunction {
            value: Arc::new(value),
            dt: Arc::new(dt),
            dx: Arc::new(dx),
            dxx: Arc::new(dxx),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyScheme {
    Bdf2,
    ImplicitEuler,
    /// Compared against the equation at `t_{k-1/2}`.
    CrankNicolson,
}

/// Truncation error at step `k`: the scheme applied to `phi` minus
/// `phi_t + sup_a {...}` at the scheme's time. Ghost values are exact.
pub fn consistency_error(
    scheme: ConsistencyScheme,
    phi: &SmoothFunction,
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    k: usize,
) -> Result<Vec<f64>> {
    let needed = if scheme == ConsistencyScheme::Bdf2 {
        2
    } else {
        1
    };
    if k < needed || k > time.steps() {
        return Err(HjbError::invalid(format!(
            "step {k} is outside the scheme's range"
        )));
    }
    let (tau, h) = (time.tau(), grid.h());
    let level = |j: usize| Padded::sample(grid, |x| (phi.value)(time.t(j), x));
    let ham = |j: usize, mode: DriftMode| -> Result<Vec<f64>> {
        let c = sample_coefficients(problem, grid, time.t(j))?;
        numerical_hamiltonian(&c, h, &level(j), mode)
    };
    let pde = |t: f64| -> Vec<f64> {
        grid.interior_nodes()
            .iter()
            .map(|&x| {
                let u = (phi.value)(t, x);
                (phi.dt)(t, x) + problem.hamiltonian_at(t, x, u, (phi.dx)(t, x), (phi.dxx)(t, x))
            })
            .collect()
    };
    let u = |j: usize| level(j).interior().to_vec();
    let (discrete, reference): (Vec<f64>, Vec<f64>) = match scheme {
        ConsistencyScheme::Bdf2 => {
            let (a, b, c) = (u(k), u(k - 1), u(k - 2));
            let hk = ham(k, problem.drift_mode)?;
            let s = (0..a.len())
                .map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * tau) + hk[i])
                .collect();
            (s, pde(time.t(k)))
        }
        ConsistencyScheme::ImplicitEuler => {
            let (a, b) = (u(k), u(k - 1));
            let hk = ham(k, problem.drift_mode)?;
            let s = (0..a.len()).map(|i| (a[i] - b[i]) / tau + hk[i]).collect();
            (s, pde(time.t(k)))
        }
        ConsistencyScheme::CrankNicolson => {
            let (a, b) = (u(k), u(k - 1));
            let (hk, hb) = (
                ham(k, DriftMode::Centered)?,
                ham(k - 1, DriftMode::Centered)?,
            );
            let s = (0..a.len())
                .map(|i| (a[i] - b[i]) / tau + 0.5 * (hk[i] + hb[i]))
                .collect();
            (s, pde(0.5 * (time.t(k) + time.t(k - 1))))
        }
    };
    Ok(discrete
        .iter()
        .zip(&reference)
        .map(|(d, r)| d - r)
        .collect())
}
