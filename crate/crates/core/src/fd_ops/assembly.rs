//! One-dimensional step systems.
//!
//! Multiplying the scheme by `tau`, a BDF2 step reads
//! `sup_a { (3/2 + tau (L^a + r)) u^k - (2 u^{k-1} - 1/2 u^{k-2} - tau l) } = 0`
//! and a backward-Euler step has leading coefficient 1 and history `u^{k-1}`.
//! Ghost-node contributions of `L^a` are moved to the right-hand side.

use crate::error::{HjbError, Result};
use crate::grid::Grid1D;
use crate::problem::{DriftMode, HjbProblem, IsaacsProblem};

use super::banded::BandedMatrix;
use super::stencil::{d1_centered, d1_minus, d1_plus, d2, Padded};
use super::system::{StepMeta, SupInfSystem, SupLinearSystem};

/// Coefficients of one control sampled at the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCoefficients {
    pub sigma2: Vec<f64>,
    pub drift: Vec<f64>,
    pub discount: Vec<f64>,
    pub source: Vec<f64>,
}

impl ControlCoefficients {
    fn sample(
        grid: &Grid1D,
        t: f64,
        control: usize,
        f: impl Fn(f64) -> (f64, f64, f64, f64),
    ) -> Result<Self> {
        let n = grid.interior_count();
        let mut c = ControlCoefficients {
            sigma2: Vec::with_capacity(n),
            drift: Vec::with_capacity(n),
            discount: Vec::with_capacity(n),
            source: Vec::with_capacity(n),
        };
        for &x in grid.interior_nodes() {
            let (s, b, r, l) = f(x);
            if !(s.is_finite() && b.is_finite() && r.is_finite() && l.is_finite()) {
                return Err(HjbError::NonFiniteCoefficient { t, x, control });
            }
            c.sigma2.push(s * s);
            c.drift.push(b);
            c.discount.push(r);
            c.source.push(l);
        }
        Ok(c)
    }

    pub fn drift_sup(&self) -> f64 {
        self.drift.iter().fold(0.0, |m, b| m.max(b.abs()))
    }
}

/// Coefficients of every control at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients {
    pub t: f64,
    pub per_control: Vec<ControlCoefficients>,
}

impl SampledCoefficients {
    pub fn drift_sup(&self) -> f64 {
        self.per_control
            .iter()
            .map(ControlCoefficients::drift_sup)
            .fold(0.0, f64::max)
    }
}

pub fn sample_coefficients(
    problem: &HjbProblem,
    grid: &Grid1D,
    t: f64,
) -> Result<SampledCoefficients> {
    if problem.controls.is_empty() {
        return Err(HjbError::invalid("control list is empty"));
    }
    let per_control = problem
        .controls
        .iter()
        .enumerate()
        .map(|(ia, &a)| {
            ControlCoefficients::sample(grid, t, ia, |x| {
                (
                    (problem.sigma)(t, x, a),
                    (problem.drift)(t, x, a),
                    (problem.discount)(t, x, a),
                    (problem.source)(t, x, a),
                )
            })
        })
        .collect::<Result<_>>()?;
    Ok(SampledCoefficients { t, per_control })
}

/// Isaacs coefficients indexed `[a][b]`.
pub fn sample_isaacs_coefficients(
    problem: &IsaacsProblem,
    grid: &Grid1D,
    t: f64,
) -> Result<Vec<Vec<ControlCoefficients>>> {
    if problem.sup_controls.is_empty() || problem.inf_controls.is_empty() {
        return Err(HjbError::invalid("control list is empty"));
    }
    let nb = problem.inf_controls.len();
    problem
        .sup_controls
        .iter()
        .enumerate()
        .map(|(ia, &a)| {
            problem
                .inf_controls
                .iter()
                .enumerate()
                .map(|(ib, &b)| {
                    ControlCoefficients::sample(grid, t, ia * nb + ib, |x| {
                        (
                            (problem.sigma)(t, x, a, b),
                            (problem.drift)(t, x, a, b),
                            (problem.discount)(t, x, a, b),
                            (problem.source)(t, x, a, b),
                        )
                    })
                })
                .collect()
        })
        .collect()
}

/// Boundary values at `x_{-1}, x_0, x_{I+1}, x_{I+2}`.
pub fn boundary_ghosts(boundary: impl Fn(f64, f64) -> f64, grid: &Grid1D, t: f64) -> [f64; 4] {
    grid.ghost_nodes().map(|x| boundary(t, x))
}

/// `L^a + r` on the unknowns, with `l` and ghost contributions in `offset`:
/// `(L^a u + r u + l)_i = (matrix * u)_i + offset_i`.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    pub matrix: BandedMatrix,
    pub offset: Vec<f64>,
}

/// Stencil weights of row `i` on offsets -2..=2.
fn row_weights(c: &ControlCoefficients, i: usize, h: f64, mode: DriftMode) -> [f64; 5] {
    let mut w = [0.0; 5];
    let diff = 0.5 * c.sigma2[i] / (h * h);
    w[1] -= diff;
    w[2] += 2.0 * diff;
    w[3] -= diff;
    let b = c.drift[i];
    match mode {
        DriftMode::BdfUpwind => {
            let (bp, bm) = (b.max(0.0) / (2.0 * h), (-b).max(0.0) / (2.0 * h));
            // b+ D^{1,-}
            w[2] += 3.0 * bp;
            w[1] -= 4.0 * bp;
            w[0] += bp;
            // -b- D^{1,+}
            w[2] += 3.0 * bm;
            w[3] -= 4.0 * bm;
            w[4] += bm;
        }
        DriftMode::Centered => {
            w[3] += b / (2.0 * h);
            w[1] -= b / (2.0 * h);
        }
    }
    w[2] += c.discount[i];
    w
}

pub fn spatial_operator(
    c: &ControlCoefficients,
    h: f64,
    ghosts: [f64; 4],
    mode: DriftMode,
) -> SpatialOperator {
    let n = c.sigma2.len();
    let mut matrix = BandedMatrix::penta(n);
    let mut offset = c.source.clone();
    let ghost = |j: isize| -> f64 {
        match j {
            -1 => ghosts[0],
            0 => ghosts[1],
            _ if j == n as isize + 1 => ghosts[2],
            _ => ghosts[3],
        }
    };
    for r in 0..n {
        let w = row_weights(c, r, h, mode);
        let i = r as isize + 1;
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let j = i + k as isize - 2;
            if j >= 1 && j <= n as isize {
                matrix.add(r, (j - 1) as usize, wk);
            } else {
                offset[r] += wk * ghost(j);
            }
        }
    }
    SpatialOperator { matrix, offset }
}

/// Numerical Hamiltonian `sup_a { L^a u + r u + l }` evaluated pointwise from
/// the difference quotients, independently of the assembled matrices.
pub fn numerical_hamiltonian(
    coeffs: &SampledCoefficients,
    h: f64,
    u: &Padded,
    mode: DriftMode,
) -> Result<Vec<f64>> {
    let uxx = d2(u, h)?;
    let (dm, dp, dc) = (d1_minus(u, h)?, d1_plus(u, h)?, d1_centered(u, h)?);
    let ui = u.interior();
    let mut out = vec![f64::NEG_INFINITY; ui.len()];
    for c in &coeffs.per_control {
        for i in 0..ui.len() {
            let b = c.drift[i];
            let drift = match mode {
                DriftMode::BdfUpwind => b.max(0.0) * dm[i] - (-b).max(0.0) * dp[i],
                DriftMode::Centered => b * dc[i],
            };
            let v = -0.5 * c.sigma2[i] * uxx[i] + drift + c.discount[i] * ui[i] + c.source[i];
            out[i] = out[i].max(v);
        }
    }
    Ok(out)
}

/// Which implicit step to assemble, with the time history it needs.
#[derive(Debug, Clone, Copy)]
pub enum StepHistory<'a> {
    /// `(u^k - u^{k-1}) / tau + H[u^k] = 0`.
    Euler { previous: &'a [f64] },
    /// `(3u^k - 4u^{k-1} + u^{k-2}) / 2tau + H[u^k] = 0`.
    Bdf2 {
        previous: &'a [f64],
        before_previous: &'a [f64],
    },
}

impl StepHistory<'_> {
    fn lead(&self) -> f64 {
        match self {
            StepHistory::Euler { .. } => 1.0,
            StepHistory::Bdf2 { .. } => 1.5,
        }
    }

    fn vector(&self) -> Vec<f64> {
        match *self {
            StepHistory::Euler { previous } => previous.to_vec(),
            StepHistory::Bdf2 {
                previous,
                before_previous,
            } => previous
                .iter()
                .zip(before_previous)
                .map(|(a, b)| 2.0 * a - 0.5 * b)
                .collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            StepHistory::Euler { previous } | StepHistory::Bdf2 { previous, .. } => previous.len(),
        }
    }

    /// Leading coefficient and combined history vector.
    pub(crate) fn parts(&self) -> (f64, Vec<f64>) {
        (self.lead(), self.vector())
    }
}

/// `M = lead I + theta_tau * op`, `q = history - theta_tau * offset`.
pub(crate) fn compose(
    op: SpatialOperator,
    lead: f64,
    theta_tau: f64,
    history: &[f64],
) -> (BandedMatrix, Vec<f64>) {
    let SpatialOperator { mut matrix, offset } = op;
    matrix.scale_shift(theta_tau, lead);
    let q = history
        .iter()
        .zip(&offset)
        .map(|(hv, o)| hv - theta_tau * o)
        .collect();
    (matrix, q)
}

/// Step system from pre-sampled coefficients and ghost values at `t_k`.
pub fn assemble_from_samples(
    coeffs: &SampledCoefficients,
    controls: &[f64],
    grid: &Grid1D,
    ghosts: [f64; 4],
    tau: f64,
    history: StepHistory<'_>,
    mode: DriftMode,
) -> Result<SupLinearSystem> {
    if history.len() != grid.interior_count() {
        return Err(HjbError::invalid("history vector does not match the grid"));
    }
    let hist = history.vector();
    let (matrices, rhs) = coeffs
        .per_control
        .iter()
        .map(|c| {
            compose(
                spatial_operator(c, grid.h(), ghosts, mode),
                history.lead(),
                tau,
                &hist,
            )
        })
        .unzip();
    SupLinearSystem::new(
        controls.to_vec(),
        matrices,
        rhs,
        StepMeta {
            t: coeffs.t,
            tau,
            h: grid.h(),
            hy: None,
        },
    )
}

/// The implicit system for the step ending at `t_k`.
pub fn assemble_step_system(
    problem: &HjbProblem,
    grid: &Grid1D,
    t_k: f64,
    tau: f64,
    history: StepHistory<'_>,
) -> Result<SupLinearSystem> {
    if !(tau > 0.0) {
        return Err(HjbError::invalid(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let coeffs = sample_coefficients(problem, grid, t_k)?;
    let ghosts = boundary_ghosts(&*problem.boundary, grid, t_k);
    assemble_from_samples(
        &coeffs,
        &problem.controls,
        grid,
        ghosts,
        tau,
        history,
        problem.drift_mode,
    )
}

/// Crank–Nicolson step
/// `(u^k - u^{k-1}) / tau + 1/2 H[u^k](t_k) + 1/2 H[u^{k-1}](t_{k-1}) = 0`
/// with centered drift. `previous` carries its ghost values at `t_{k-1}`.
/// Where Crank-Nicolson takes the sup over controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CnVariant {
    /// `u^k - u^{k-1} + tau/2 (H[u^k] + H[u^{k-1}]) = 0`, each Hamiltonian
    /// with its own sup.
    #[default]
    AveragedHamiltonians,
    /// `u^k - u^{k-1} + tau sup_a (L^a u^k + L^a u^{k-1}) / 2 = 0`: one
    /// control per node for both levels.
    SupOfAverage,
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_cn_from_samples(
    now: &SampledCoefficients,
    before: &SampledCoefficients,
    controls: &[f64],
    grid: &Grid1D,
    ghosts_now: [f64; 4],
    previous: &Padded,
    tau: f64,
    variant: CnVariant,
) -> Result<SupLinearSystem> {
    let history = |coeffs: &SampledCoefficients| -> Result<Vec<f64>> {
        let explicit = numerical_hamiltonian(coeffs, grid.h(), previous, DriftMode::Centered)?;
        Ok(previous
            .interior()
            .iter()
            .zip(&explicit)
            .map(|(u, hv)| u - 0.5 * tau * hv)
            .collect())
    };
    let shared = match variant {
        CnVariant::AveragedHamiltonians => Some(history(before)?),
        CnVariant::SupOfAverage => None,
    };
    let mut matrices = Vec::with_capacity(now.per_control.len());
    let mut rhs = Vec::with_capacity(now.per_control.len());
    for (a, c) in now.per_control.iter().enumerate() {
        let own;
        let hist = match &shared {
            Some(h) => h,
            None => {
                own = history(&SampledCoefficients {
                    t: before.t,
                    per_control: vec![before.per_control[a].clone()],
                })?;
                &own
            }
        };
        let (m, q) = compose(
            spatial_operator(c, grid.h(), ghosts_now, DriftMode::Centered),
            1.0,
            0.5 * tau,
            hist,
        );
        matrices.push(m);
        rhs.push(q);
    }
    SupLinearSystem::new(
        controls.to_vec(),
        matrices,
        rhs,
        StepMeta {
            t: now.t,
            tau,
            h: grid.h(),
            hy: None,
        },
    )
}

/// Isaacs step system from coefficients indexed `[a][b]`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_isaacs_from_samples(
    coeffs: &[Vec<ControlCoefficients>],
    problem: &IsaacsProblem,
    grid: &Grid1D,
    t: f64,
    ghosts: [f64; 4],
    tau: f64,
    history: StepHistory<'_>,
) -> Result<SupInfSystem> {
    if history.len() != grid.interior_count() {
        return Err(HjbError::invalid("history vector does not match the grid"));
    }
    let hist = history.vector();
    let mut matrices = Vec::with_capacity(coeffs.len());
    let mut rhs = Vec::with_capacity(coeffs.len());
    for row in coeffs {
        let (m, q): (Vec<_>, Vec<_>) = row
            .iter()
            .map(|c| {
                compose(
                    spatial_operator(c, grid.h(), ghosts, problem.drift_mode),
                    history.lead(),
                    tau,
                    &hist,
                )
            })
            .unzip();
        matrices.push(m);
        rhs.push(q);
    }
    SupInfSystem::new(
        problem.sup_controls.clone(),
        problem.inf_controls.clone(),
        matrices,
        rhs,
        StepMeta {
            t,
            tau,
            h: grid.h(),
            hy: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd_ops::banded::assemble_a_matrix;
    use proptest::prelude::*;

    fn constant_problem(s: f64, b: f64, r: f64, l: f64) -> HjbProblem {
        HjbProblem::new(vec![0.0], (0.0, 1.0), 1.0)
            .with_sigma(move |_, _, _| s)
            .with_drift(move |_, _, _| b)
            .with_discount(move |_, _, _| r)
            .with_source(move |_, _, _| l)
    }

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn bdf2_diffusion_entries() {
        // h = 0.1 on (0, 1) with 9 unknowns, tau = 0.1.
        let g = Grid1D::new(0.0, 1.0, 9).unwrap();
        let z = zeros(9);
        let hist = StepHistory::Bdf2 {
            previous: &z,
            before_previous: &z,
        };
        let sys = assemble_step_system(
            &constant_problem(2f64.sqrt(), 0.0, 0.0, 0.0),
            &g,
            0.5,
            0.1,
            hist,
        )
        .unwrap();
        let m = &sys.matrices[0];
        assert!((m.get(4, 4) - 21.5).abs() < 1e-9);
        assert!((m.get(4, 3) + 10.0).abs() < 1e-9 && (m.get(4, 5) + 10.0).abs() < 1e-9);
        assert_eq!(m.get(4, 2), 0.0);
        assert_eq!(m.get(4, 6), 0.0);
        let sys = assemble_step_system(&constant_problem(1.0, 0.0, 0.0, 0.0), &g, 0.5, 0.1, hist)
            .unwrap();
        assert!((sys.matrices[0].get(4, 4) - 11.5).abs() < 1e-9);
        assert!((sys.matrices[0].get(4, 3) + 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_drift_gives_symmetric_tridiagonal() {
        let g = Grid1D::new(0.0, 1.0, 12).unwrap();
        let p = HjbProblem::new(vec![0.0], (0.0, 1.0), 1.0).with_sigma(|_, x, _| 1.0 + x);
        let z = zeros(12);
        let sys =
            assemble_step_system(&p, &g, 0.0, 0.01, StepHistory::Euler { previous: &z }).unwrap();
        let m = &sys.matrices[0];
        for i in 0..12usize {
            for j in 0..12usize {
                if i.abs_diff(j) >= 2 {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
        // constant sigma gives an exactly symmetric matrix
        let sys = assemble_step_system(
            &constant_problem(0.8, 0.0, 0.0, 0.0),
            &g,
            0.0,
            0.01,
            StepHistory::Euler { previous: &z },
        )
        .unwrap();
        let d = sys.matrices[0].to_dense();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
    }

    #[test]
    fn positive_drift_breaks_monotonicity() {
        let g = Grid1D::new(0.0, 1.0, 9).unwrap();
        let z = zeros(9);
        let (tau, b) = (0.05, 0.7);
        let sys = assemble_step_system(
            &constant_problem(0.0, b, 0.0, 0.0),
            &g,
            0.0,
            tau,
            StepHistory::Bdf2 {
                previous: &z,
                before_previous: &z,
            },
        )
        .unwrap();
        let m = &sys.matrices[0];
        assert!((m.get(5, 3) - tau * b / (2.0 * g.h())).abs() < 1e-12);
        assert!(m.get(5, 3) > 0.0);
        assert!((m.get(5, 5) - (1.5 + tau * 3.0 * b / (2.0 * g.h()))).abs() < 1e-12);
        assert!((m.get(5, 4) + tau * 4.0 * b / (2.0 * g.h())).abs() < 1e-12);
        assert_eq!(m.get(5, 6), 0.0);
    }

    #[test]
    fn diffusion_block_is_scaled_a_matrix() {
        let (n, tau, s) = (7, 0.03, 0.9f64);
        let g = Grid1D::new(-1.0, 1.0, n).unwrap();
        let z = zeros(n);
        let sys = assemble_step_system(
            &constant_problem(s, 0.0, 0.0, 0.0),
            &g,
            0.0,
            tau,
            StepHistory::Bdf2 {
                previous: &z,
                before_previous: &z,
            },
        )
        .unwrap();
        let a = assemble_a_matrix(n, g.h()).unwrap().to_banded().to_dense();
        let m = sys.matrices[0].to_dense();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.5 } else { 0.0 } + tau * 0.5 * s * s * a[i][j];
                assert!((m[i][j] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_finite_coefficient_is_reported() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        let p = HjbProblem::new(vec![1.0, 2.0], (0.0, 1.0), 1.0).with_drift(|_, x, a| {
            if a == 2.0 && x > 0.6 {
                f64::NAN
            } else {
                0.0
            }
        });
        let z = zeros(3);
        let err = assemble_step_system(&p, &g, 0.25, 0.1, StepHistory::Euler { previous: &z })
            .unwrap_err();
        match err {
            HjbError::NonFiniteCoefficient { t, x, control } => {
                assert_eq!(t, 0.25);
                assert_eq!(x, 0.75);
                assert_eq!(control, 1);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn diagonal_is_positive() {
        let g = Grid1D::new(-2.0, 2.0, 30).unwrap();
        let p = HjbProblem::new(vec![-1.0, 0.3, 1.0], (-2.0, 2.0), 1.0)
            .with_sigma(|_, x, a| a * x)
            .with_drift(|_, x, a| a + x);
        let z = zeros(30);
        for hist in [
            StepHistory::Euler { previous: &z },
            StepHistory::Bdf2 {
                previous: &z,
                before_previous: &z,
            },
        ] {
            let sys = assemble_step_system(&p, &g, 0.1, 0.05, hist).unwrap();
            for m in &sys.matrices {
                assert!((0..30).all(|i| m.diagonal(i) > 0.0));
            }
        }
    }

    proptest! {
        // M_a u + tau-scaled offset reproduces the pointwise scheme residual.
        #[test]
        fn matrix_route_matches_pointwise_route(
            seed in proptest::collection::vec(-1.0..1.0f64, 14),
            s in 0.0..2.0f64, b in -2.0..2.0f64, r in 0.0..1.0f64,
            centered in proptest::bool::ANY,
        ) {
            let n = 10;
            let g = Grid1D::new(0.0, 1.0, n).unwrap();
            let mode = if centered { DriftMode::Centered } else { DriftMode::BdfUpwind };
            let p = HjbProblem::new(vec![0.2, 1.0], (0.0, 1.0), 1.0)
                .with_sigma(move |_, x, a| s * a * (1.0 + x))
                .with_drift(move |_, x, a| b * a - x)
                .with_discount(move |_, _, _| r)
                .with_source(|_, x, a| x * a)
                .with_boundary(|_, x| x.sin())
                .with_drift_mode(mode);
            let ghosts = boundary_ghosts(&*p.boundary, &g, 0.3);
            let u = Padded::from_parts(ghosts, &seed[..n]);
            let prev = &seed[2..2 + n];
            let coeffs = sample_coefficients(&p, &g, 0.3).unwrap();
            let tau = 0.02;
            let sys = assemble_step_system(&p, &g, 0.3, tau, StepHistory::Euler { previous: prev }).unwrap();
            let res = sys.residual(u.interior());
            let ham = numerical_hamiltonian(&coeffs, g.h(), &u, mode).unwrap();
            for i in 0..n {
                let pointwise = u.interior()[i] - prev[i] + tau * ham[i];
                prop_assert!((res[i] - pointwise).abs() < 1e-9, "{} vs {}", res[i], pointwise);
            }
        }
    }
}
