//! Gauss–Seidel fixed-point solver for `sup_a (M_a X - q_a) = 0` and the
//! Isaacs variant `sup_a inf_b (M_ab X - q_ab) = 0`.
//!
//! Row `i` of the sweep solves the scalar equation in `x_i` with the other
//! components frozen. Each `(M_ab x - q_ab)_i` is increasing in `x_i` with root
//! `r_ab`, so the root of `max_a min_b` is `min_a max_b r_ab`. When the
//! certificate ratio `delta < 1` the sweep is a `delta`-contraction in the
//! max norm.

use crate::error::{HjbError, Result};
use crate::fd_ops::{BandLu, BandedMatrix, SupInfSystem, SupLinearSystem};

/// Diagonal-dominance certificate
/// `max_{a,i} sum_{j>i} |M_ij| / (|M_ii| - sum_{j<i} |M_ij|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub ratio: f64,
    pub worst_row: usize,
    /// Control index; `a * |inf controls| + b` for Isaacs systems.
    pub worst_control: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// `max_i |max_a min_b (M_ab X - q_ab)_i|` at the returned iterate.
    pub final_residual_inf: f64,
    /// Largest ratio of successive iterate changes.
    pub contraction_estimate: f64,
    pub certificate_ratio: f64,
    /// Policy-predictor linear solves performed before the sweeps.
    pub predictor_rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Before sweeping, freeze the maximizing (and minimizing) controls at
    /// the current iterate, solve that linear system directly and repeat
    /// while the policy changes. Only moves the starting point; convergence
    /// and the stopping test are unchanged.
    pub policy_predictor: bool,
    pub max_predictor_rounds: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            policy_predictor: true,
            max_predictor_rounds: 8,
        }
    }
}

impl SolverOptions {
    pub fn plain() -> Self {
        SolverOptions {
            policy_predictor: false,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(HjbError::invalid(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(HjbError::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Borrowed `[a][b]` view shared by the sup and sup-inf entry points.
struct Family<'a> {
    m: Vec<Vec<&'a BandedMatrix>>,
    q: Vec<Vec<&'a [f64]>>,
    n: usize,
}

impl<'a> Family<'a> {
    fn from_sup(sys: &'a SupLinearSystem) -> Self {
        Family {
            m: sys.matrices.iter().map(|m| vec![m]).collect(),
            q: sys.rhs.iter().map(|q| vec![q.as_slice()]).collect(),
            n: sys.size(),
        }
    }

    fn from_supinf(sys: &'a SupInfSystem) -> Self {
        Family {
            m: sys.matrices.iter().map(|r| r.iter().collect()).collect(),
            q: sys
                .rhs
                .iter()
                .map(|r| r.iter().map(Vec::as_slice).collect())
                .collect(),
            n: sys.size(),
        }
    }

    fn inner_len(&self) -> usize {
        self.m[0].len()
    }

    fn certificate(&self) -> Result<Certificate> {
        let nb = self.inner_len();
        let mut cert = Certificate {
            ratio: 0.0,
            worst_row: 0,
            worst_control: 0,
            feasible: true,
        };
        for (ia, row) in self.m.iter().enumerate() {
            for (ib, m) in row.iter().enumerate() {
                let control = ia * nb + ib;
                for i in 0..self.n {
                    let (mut lower, mut upper, mut diag) = (0.0, 0.0, 0.0);
                    for (j, v) in m.row(i) {
                        match j.cmp(&i) {
                            std::cmp::Ordering::Less => lower += v.abs(),
                            std::cmp::Ordering::Greater => upper += v.abs(),
                            std::cmp::Ordering::Equal => diag = v.abs(),
                        }
                    }
                    let denominator = diag - lower;
                    if !(denominator > 0.0) {
                        return Err(HjbError::NotDiagonallyDominant {
                            row: i,
                            control,
                            denominator,
                        });
                    }
                    let r = upper / denominator;
                    if r > cert.ratio {
                        cert.ratio = r;
                        cert.worst_row = i;
                        cert.worst_control = control;
                    }
                }
            }
        }
        cert.feasible = cert.ratio < 1.0;
        Ok(cert)
    }

    /// Componentwise `max_a min_b (M_ab x - q_ab)`.
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.n];
        for (ms, qs) in self.m.iter().zip(&self.q) {
            let mut inner = vec![f64::INFINITY; self.n];
            for (m, q) in ms.iter().zip(qs) {
                for (i, (mx, qi)) in m.matvec(x).into_iter().zip(q.iter()).enumerate() {
                    inner[i] = inner[i].min(mx - qi);
                }
            }
            for (o, v) in out.iter_mut().zip(inner) {
                *o = o.max(v);
            }
        }
        out
    }

    /// One Gauss–Seidel sweep in place; returns the max-norm change.
    fn sweep(&self, x: &mut [f64]) -> f64 {
        let mut change = 0.0f64;
        for i in 0..self.n {
            let mut best = f64::INFINITY;
            for (ms, qs) in self.m.iter().zip(&self.q) {
                let mut inner = f64::NEG_INFINITY;
                for (m, q) in ms.iter().zip(qs) {
                    let r = (q[i] - m.off_diagonal_dot(i, x)) / m.diagonal(i);
                    if r > inner {
                        inner = r;
                    }
                }
                if inner < best {
                    best = inner;
                }
            }
            change = change.max((best - x[i]).abs());
            x[i] = best;
        }
        change
    }

    /// Policy-iteration rounds from `x`; `None` if a frozen system is singular.
    fn predict(&self, x: &[f64], rounds: usize) -> Option<(Vec<f64>, usize)> {
        let nb = self.inner_len();
        let flat_m: Vec<&BandedMatrix> = self.m.iter().flatten().copied().collect();
        let flat_q: Vec<&[f64]> = self.q.iter().flatten().copied().collect();
        let mut x = x.to_vec();
        let mut policy: Option<Vec<usize>> = None;
        for round in 0..rounds {
            let res: Vec<Vec<f64>> = flat_m
                .iter()
                .zip(&flat_q)
                .map(|(m, q)| {
                    m.matvec(&x)
                        .into_iter()
                        .zip(q.iter())
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect();
            let pick: Vec<usize> = (0..self.n)
                .map(|i| {
                    let inner_min = |a: usize| {
                        (0..nb).fold((0, f64::INFINITY), |(bb, v), b| {
                            let r = res[a * nb + b][i];
                            if r < v {
                                (b, r)
                            } else {
                                (bb, v)
                            }
                        })
                    };
                    let mut best = (0, inner_min(0));
                    for a in 1..self.m.len() {
                        let cand = inner_min(a);
                        if cand.1 > best.1 .1 {
                            best = (a, cand);
                        }
                    }
                    best.0 * nb + best.1 .0
                })
                .collect();
            if policy.as_ref() == Some(&pick) {
                return Some((x, round));
            }
            let m = BandedMatrix::from_row_choice(&flat_m, &pick);
            let q: Vec<f64> = pick
                .iter()
                .enumerate()
                .map(|(i, &p)| flat_q[p][i])
                .collect();
            let next = BandLu::factor(&m).ok()?.solve(&q);
            if next.iter().any(|v| !v.is_finite()) {
                return None;
            }
            x = next;
            policy = Some(pick);
        }
        Some((x, rounds))
    }

    fn solve(&self, x0: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
        opts.validate()?;
        if x0.len() != self.n {
            return Err(HjbError::invalid(
                "initial iterate does not match the system size",
            ));
        }
        let cert = self.certificate()?;
        if !cert.feasible {
            return Err(HjbError::InfeasibleCertificate(cert));
        }
        let mut stats = SolveStats {
            certificate_ratio: cert.ratio,
            ..SolveStats::default()
        };
        let mut x = x0.to_vec();
        if opts.policy_predictor && opts.max_predictor_rounds > 0 {
            if let Some((p, rounds)) = self.predict(&x, opts.max_predictor_rounds) {
                x = p;
                stats.predictor_rounds = rounds;
            }
        }
        let threshold = opts.tol * (1.0 - cert.ratio);
        let mut previous_change: Option<f64> = None;
        let mut change = f64::INFINITY;
        for it in 1..=opts.max_iter {
            change = self.sweep(&mut x);
            stats.iterations = it;
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if let Some(prev) = previous_change {
                if prev > 1e-8 * scale {
                    stats.contraction_estimate = stats.contraction_estimate.max(change / prev);
                }
            }
            previous_change = Some(change);
            if change <= threshold {
                let res = inf_norm(&self.residual(&x));
                if res <= opts.tol {
                    stats.final_residual_inf = res;
                    return Ok((x, stats));
                }
            }
        }
        stats.final_residual_inf = inf_norm(&self.residual(&x));
        Err(HjbError::NonConvergence {
            stats,
            last_change: change,
        })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn certificate(system: &SupLinearSystem) -> Result<Certificate> {
    Family::from_sup(system).certificate()
}

/// Certificate over every `(a, b)` pair.
pub fn certificate_supinf(system: &SupInfSystem) -> Result<Certificate> {
    Family::from_supinf(system).certificate()
}

/// Solves from the zero vector.
pub fn solve_sup(system: &SupLinearSystem, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    solve_sup_from(system, &vec![0.0; system.size()], opts)
}

pub fn solve_sup_from(
    system: &SupLinearSystem,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    Family::from_sup(system).solve(x0, opts)
}

pub fn solve_supinf(system: &SupInfSystem, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    solve_supinf_from(system, &vec![0.0; system.size()], opts)
}

pub fn solve_supinf_from(
    system: &SupInfSystem,
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    Family::from_supinf(system).solve(x0, opts)
}

/// Banded LU solve of a single linear system.
pub fn solve_direct_single_control(m: &BandedMatrix, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != m.size() {
        return Err(HjbError::invalid(
            "right-hand side does not match the matrix",
        ));
    }
    Ok(BandLu::factor(m)?.solve(q))
}
