//! Time marching: a backward-Euler first step followed by BDF2 steps, plain
//! implicit Euler, Crank–Nicolson, the Isaacs variant, and 2D BDF2.

mod two_d;

use std::io::{self, Write};

use crate::error::{HjbError, Result};
use crate::fd_ops::{
    assemble_cn_from_samples, assemble_from_samples, assemble_isaacs_from_samples, boundary_ghosts,
    sample_coefficients, sample_isaacs_coefficients, CnVariant, ControlCoefficients, Padded,
    SampledCoefficients, StepHistory,
};
use crate::grid::{check_cfl, CflCheck, Grid1D, TimeGrid, CFL_BOUND_BDF2, CFL_BOUND_EULER};
use crate::problem::{DriftMode, HjbProblem, IsaacsProblem};
use crate::sup_solver::{solve_sup_from, solve_supinf_from, SolveStats, SolverOptions};

pub use two_d::{run_bdf2_2d, Trajectory2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeTag {
    /// Euler first step, BDF2 afterwards.
    Bdf2,
    ImplicitEuler,
    CrankNicolson,
    /// BDF2 marching of a sup-inf problem.
    IsaacsBdf2,
}

impl SchemeTag {
    pub fn name(self) -> &'static str {
        match self {
            SchemeTag::Bdf2 => "bdf2",
            SchemeTag::ImplicitEuler => "euler",
            SchemeTag::CrankNicolson => "cn",
            SchemeTag::IsaacsBdf2 => "isaacs-bdf2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Euler,
    Bdf2,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub kind: StepKind,
    /// `b_sup * tau / h` at this step.
    pub cfl_ratio: f64,
    pub stats: SolveStats,
}

/// Which time levels a run keeps in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retention {
    #[default]
    AllLevels,
    /// Only the last two levels; for long reference runs on fine grids.
    LastTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme1D {
    Bdf2,
    ImplicitEuler,
    CrankNicolson,
    /// Crank-Nicolson with a single sup over the averaged operators.
    CrankNicolsonSupOfAverage,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub time: TimeGrid,
    /// `u^{first_level}..u^N` on the unknowns; `first_level` is 0 unless
    /// levels were dropped.
    pub levels: Vec<Vec<f64>>,
    pub first_level: usize,
    pub scheme: SchemeTag,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn final_level(&self) -> &[f64] {
        self.levels.last().expect("trajectory has u^0")
    }

    /// `u^k` if it was retained.
    pub fn level(&self, k: usize) -> Option<&[f64]> {
        k.checked_sub(self.first_level)
            .and_then(|j| self.levels.get(j))
            .map(Vec::as_slice)
    }

    pub fn worst_certificate_ratio(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.stats.certificate_ratio)
            .fold(0.0, f64::max)
    }

    /// `t,x,u` rows of level `k`.
    ///
    /// # Panics
    /// If level `k` was not retained.
    pub fn write_snapshot_csv<W: Write>(&self, k: usize, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,u")?;
        let t = self.time.t(k);
        let level = self.level(k).expect("level retained");
        for (x, u) in self.grid.interior_nodes().iter().zip(level) {
            writeln!(w, "{t},{x},{u}")?;
        }
        Ok(())
    }
}

/// Samples once for autonomous problems, otherwise at every call.
pub(crate) struct CoefficientCache<T, F> {
    autonomous: bool,
    sample: F,
    held: Option<T>,
}

impl<T, F: Fn(f64) -> Result<T>> CoefficientCache<T, F> {
    pub(crate) fn new(autonomous: bool, sample: F) -> Self {
        CoefficientCache {
            autonomous,
            sample,
            held: None,
        }
    }

    pub(crate) fn at(&mut self, t: f64) -> Result<&T> {
        if !self.autonomous || self.held.is_none() {
            self.held = Some((self.sample)(t)?);
        }
        Ok(self.held.as_ref().expect("just sampled"))
    }
}

pub(crate) fn step_failed(step: usize) -> impl FnOnce(HjbError) -> HjbError {
    move |e| HjbError::StepFailed {
        step,
        source: Box::new(e),
    }
}

pub(crate) fn require_cfl(step: usize, check: CflCheck, bound: f64) -> Result<()> {
    if check.ok {
        Ok(())
    } else {
        Err(HjbError::CflViolation {
            step,
            ratio: check.ratio,
            bound,
            margin: check.margin,
        })
    }
}

fn initial_level(initial: &dyn Fn(f64) -> f64, grid: &Grid1D) -> Vec<f64> {
    grid.interior_nodes().iter().map(|&x| initial(x)).collect()
}

fn check_problem(controls: usize, grid: &Grid1D) -> Result<()> {
    if controls == 0 {
        return Err(HjbError::invalid("control list is empty"));
    }
    if grid.interior_count() == 0 {
        return Err(HjbError::invalid("grid has no unknowns"));
    }
    Ok(())
}

fn isaacs_drift_sup(c: &[Vec<ControlCoefficients>]) -> f64 {
    c.iter()
        .flatten()
        .map(ControlCoefficients::drift_sup)
        .fold(0.0, f64::max)
}

/// Shared loop of the one- and two-step schemes.
#[allow(clippy::too_many_arguments)]
fn march<C>(
    grid: &Grid1D,
    time: &TimeGrid,
    u0: Vec<f64>,
    bdf: bool,
    retention: Retention,
    sample: impl Fn(f64) -> Result<C>,
    autonomous: bool,
    drift_sup: impl Fn(&C) -> f64,
    mut solve: impl FnMut(&C, f64, StepHistory<'_>, &[f64]) -> Result<(Vec<f64>, SolveStats)>,
) -> Result<(Vec<Vec<f64>>, usize, Vec<StepRecord>)> {
    let mut cache = CoefficientCache::new(autonomous, sample);
    let mut levels = Levels::new(u0, retention, time.steps());
    let mut records = Vec::with_capacity(time.steps());
    for k in 1..=time.steps() {
        let t = time.t(k);
        let coeffs = cache.at(t).map_err(step_failed(k))?;
        let two_step = bdf && k >= 2;
        let bound = if two_step {
            CFL_BOUND_BDF2
        } else {
            CFL_BOUND_EULER
        };
        let cfl = check_cfl(drift_sup(coeffs), time.tau(), grid.h(), bound);
        require_cfl(k, cfl, bound)?;
        let history = if two_step {
            StepHistory::Bdf2 {
                previous: levels.get(k - 1),
                before_previous: levels.get(k - 2),
            }
        } else {
            StepHistory::Euler {
                previous: levels.get(k - 1),
            }
        };
        let (x, stats) = solve(coeffs, t, history, levels.get(k - 1)).map_err(step_failed(k))?;
        records.push(StepRecord {
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
    Ok((levels.levels, levels.first, records))
}

/// Level storage that can forget all but the last two levels.
struct Levels {
    levels: Vec<Vec<f64>>,
    first: usize,
    retention: Retention,
}

impl Levels {
    fn new(u0: Vec<f64>, retention: Retention, steps: usize) -> Self {
        let cap = match retention {
            Retention::AllLevels => steps + 1,
            Retention::LastTwo => 3,
        };
        let mut levels = Vec::with_capacity(cap);
        levels.push(u0);
        Levels {
            levels,
            first: 0,
            retention,
        }
    }

    fn get(&self, k: usize) -> &[f64] {
        &self.levels[k - self.first]
    }

    fn push(&mut self, u: Vec<f64>) {
        self.levels.push(u);
        if self.retention == Retention::LastTwo && self.levels.len() > 2 {
            self.levels.remove(0);
            self.first += 1;
        }
    }
}

fn run_hjb(
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
    bdf: bool,
    retention: Retention,
) -> Result<Trajectory> {
    check_problem(problem.controls.len(), grid)?;
    let (levels, first_level, steps) = march(
        grid,
        time,
        initial_level(&*problem.initial, grid),
        bdf,
        retention,
        |t| sample_coefficients(problem, grid, t),
        problem.autonomous,
        SampledCoefficients::drift_sup,
        |coeffs, t, history, warm| {
            let ghosts = boundary_ghosts(&*problem.boundary, grid, t);
            let mut sys = assemble_from_samples(
                coeffs,
                &problem.controls,
                grid,
                ghosts,
                time.tau(),
                history,
                problem.drift_mode,
            )?;
            sys.meta.t = t;
            solve_sup_from(&sys, warm, opts)
        },
    )?;
    Ok(Trajectory {
        grid: grid.clone(),
        time: *time,
        levels,
        first_level,
        scheme: if bdf {
            SchemeTag::Bdf2
        } else {
            SchemeTag::ImplicitEuler
        },
        steps,
    })
}

/// Backward-Euler first step, then BDF2. Each step is warm-started from the
/// previous level.
pub fn run_bdf2(
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    run_hjb(problem, grid, time, opts, true, Retention::AllLevels)
}

pub fn run_implicit_euler(
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    run_hjb(problem, grid, time, opts, false, Retention::AllLevels)
}

/// Any of the one-dimensional schemes, keeping the requested levels.
pub fn run_scheme(
    scheme: Scheme1D,
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
    retention: Retention,
) -> Result<Trajectory> {
    match scheme {
        Scheme1D::Bdf2 => run_hjb(problem, grid, time, opts, true, retention),
        Scheme1D::ImplicitEuler => run_hjb(problem, grid, time, opts, false, retention),
        Scheme1D::CrankNicolson => crank_nicolson(
            problem,
            grid,
            time,
            opts,
            retention,
            CnVariant::AveragedHamiltonians,
        ),
        Scheme1D::CrankNicolsonSupOfAverage => crank_nicolson(
            problem,
            grid,
            time,
            opts,
            retention,
            CnVariant::SupOfAverage,
        ),
    }
}

/// Crank–Nicolson with centered drift, averaging the Hamiltonians of the two
/// levels. No step-ratio restriction is imposed; the certificate still is.
pub fn run_crank_nicolson(
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    crank_nicolson(
        problem,
        grid,
        time,
        opts,
        Retention::AllLevels,
        CnVariant::AveragedHamiltonians,
    )
}

fn crank_nicolson(
    problem: &HjbProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
    retention: Retention,
    variant: CnVariant,
) -> Result<Trajectory> {
    check_problem(problem.controls.len(), grid)?;
    let tau = time.tau();
    let sample = |t| sample_coefficients(problem, grid, t);
    let mut before = sample(time.t(0)).map_err(step_failed(1))?;
    let mut ghosts_before = grid.ghost_nodes().map(|x| (problem.initial)(x));
    let mut levels = Levels::new(
        initial_level(&*problem.initial, grid),
        retention,
        time.steps(),
    );
    let mut steps = Vec::with_capacity(time.steps());
    for k in 1..=time.steps() {
        let t = time.t(k);
        let now = if problem.autonomous {
            before.clone()
        } else {
            sample(t).map_err(step_failed(k))?
        };
        let ghosts_now = boundary_ghosts(&*problem.boundary, grid, t);
        let previous = Padded::from_parts(ghosts_before, levels.get(k - 1));
        let (x, stats) = assemble_cn_from_samples(
            &now,
            &before,
            &problem.controls,
            grid,
            ghosts_now,
            &previous,
            tau,
            variant,
        )
        .and_then(|mut sys| {
            sys.meta.t = t;
            solve_sup_from(&sys, levels.get(k - 1), opts)
        })
        .map_err(step_failed(k))?;
        steps.push(StepRecord {
            step: k,
            t,
            kind: StepKind::CrankNicolson,
            cfl_ratio: now.drift_sup() * tau / grid.h(),
            stats,
        });
        levels.push(x);
        before = now;
        ghosts_before = ghosts_now;
    }
    Ok(Trajectory {
        grid: grid.clone(),
        time: *time,
        first_level: levels.first,
        levels: levels.levels,
        scheme: SchemeTag::CrankNicolson,
        steps,
    })
}

/// BDF2 marching of `v_t + sup_a inf_b {...} = 0`.
pub fn run_isaacs(
    problem: &IsaacsProblem,
    grid: &Grid1D,
    time: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    check_problem(
        problem.sup_controls.len() * problem.inf_controls.len(),
        grid,
    )?;
    let (levels, first_level, steps) = march(
        grid,
        time,
        initial_level(&*problem.initial, grid),
        true,
        Retention::AllLevels,
        |t| sample_isaacs_coefficients(problem, grid, t),
        problem.autonomous,
        |c: &Vec<Vec<ControlCoefficients>>| isaacs_drift_sup(c),
        |coeffs, t, history, warm| {
            let ghosts = boundary_ghosts(&*problem.boundary, grid, t);
            let sys = assemble_isaacs_from_samples(
                coeffs,
                problem,
                grid,
                t,
                ghosts,
                time.tau(),
                history,
            )?;
            solve_supinf_from(&sys, warm, opts)
        },
    )?;
    Ok(Trajectory {
        grid: grid.clone(),
        time: *time,
        levels,
        first_level,
        scheme: SchemeTag::IsaacsBdf2,
        steps,
    })
}

impl DriftMode {
    pub fn name(self) -> &'static str {
        match self {
            DriftMode::BdfUpwind => "bdf-upwind",
            DriftMode::Centered => "centered",
        }
    }
}
