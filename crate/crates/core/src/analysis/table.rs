use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{HjbError, Result};
use crate::stepper::Trajectory;

use super::errors::{error_vs_exact, error_vs_reference, ErrorRange};
use super::norms::NormKind;

/// One refinement level: `N` time steps and `I + 1` space cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rung {
    pub n: usize,
    pub i_plus_1: usize,
}

/// `levels` rungs starting at `(n0, i0_plus_1)`, doubling both.
pub fn doubling_ladder(n0: usize, i0_plus_1: usize, levels: usize) -> Vec<Rung> {
    (0..levels)
        .map(|l| Rung {
            n: n0 << l,
            i_plus_1: i0_plus_1 << l,
        })
        .collect()
}

/// What each row is measured against.
pub enum ErrorPolicy<'a> {
    Exact {
        exact: &'a (dyn Fn(f64, f64) -> f64 + Send + Sync),
        range: ErrorRange,
    },
    /// Final-time comparison with a finer nested trajectory.
    Reference(&'a Trajectory),
}

impl ErrorPolicy<'_> {
    fn measure(&self, traj: &Trajectory, norms: &[NormKind]) -> Result<Vec<f64>> {
        match self {
            ErrorPolicy::Exact { exact, range } => {
                error_vs_exact(traj, Some(*exact), norms, *range)
            }
            ErrorPolicy::Reference(r) => error_vs_reference(traj, r, norms),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub rung: Rung,
    /// One per norm; `None` if the run failed.
    pub errors: Option<Vec<f64>>,
    /// `None` on the first row or where the order is undefined.
    pub orders: Vec<Option<f64>>,
    /// Wall time of the run itself.
    pub cpu_s: f64,
    pub failure: Option<String>,
    pub worst_certificate_ratio: f64,
    pub total_iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub norms: Vec<NormKind>,
    pub rows: Vec<TableRow>,
}

/// `log2(coarse / fine)`, undefined for zero or non-finite errors.
pub fn observed_order(coarse: f64, fine: f64) -> Option<f64> {
    let r = (coarse / fine).log2();
    (coarse > 0.0 && fine > 0.0 && r.is_finite()).then_some(r)
}

/// Three significant digits with a signed two-digit exponent: `1.03E-04`.
pub fn format_error(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.2E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

impl ConvergenceTable {
    pub fn order(&self, row: usize, norm: NormKind) -> Option<f64> {
        let c = self.norms.iter().position(|&k| k == norm)?;
        self.rows[row].orders[c]
    }

    pub fn error(&self, row: usize, norm: NormKind) -> Option<f64> {
        let c = self.norms.iter().position(|&k| k == norm)?;
        self.rows[row].errors.as_ref().map(|e| e[c])
    }

    /// `N,I_plus_1,err_<norm>,ord_<norm>...,cpu_s`. Failed rows carry
    /// `FAILED` in their error columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "N,I_plus_1")?;
        for k in &self.norms {
            write!(w, ",err_{k},ord_{k}")?;
        }
        writeln!(w, ",cpu_s")?;
        for (r, row) in self.rows.iter().enumerate() {
            write!(w, "{},{}", row.rung.n, row.rung.i_plus_1)?;
            for c in 0..self.norms.len() {
                let err = row
                    .errors
                    .as_ref()
                    .map_or_else(|| "FAILED".to_string(), |e| format_error(e[c]));
                let ord = match (r, row.orders[c]) {
                    (0, _) => String::new(),
                    (_, Some(o)) => format!("{o:.2}"),
                    (_, None) => "--".into(),
                };
                write!(w, ",{err},{ord}")?;
            }
            writeln!(w, ",{:.3}", row.cpu_s)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }
}

fn check_ladder(ladder: &[Rung]) -> Result<()> {
    if ladder.is_empty() {
        return Err(HjbError::invalid("ladder is empty"));
    }
    for w in ladder.windows(2) {
        if w[1].n != 2 * w[0].n || w[1].i_plus_1 != 2 * w[0].i_plus_1 {
            return Err(HjbError::invalid(format!(
                "ladder does not double: ({}, {}) -> ({}, {})",
                w[0].n, w[0].i_plus_1, w[1].n, w[1].i_plus_1
            )));
        }
    }
    Ok(())
}

/// Runs every rung (in parallel when `parallel`) and keeps going past
/// failures, which are marked in their rows. Also returns the first failure
/// in ladder order.
pub fn convergence_table_partial<F>(
    ladder: &[Rung],
    norms: &[NormKind],
    policy: &ErrorPolicy<'_>,
    parallel: bool,
    run: F,
) -> Result<(ConvergenceTable, Option<HjbError>)>
where
    F: Fn(Rung) -> Result<Trajectory> + Sync,
{
    check_ladder(ladder)?;
    let one = |rung: Rung| -> (TableRow, Option<HjbError>) {
        let start = Instant::now();
        let outcome = run(rung);
        let cpu_s = start.elapsed().as_secs_f64();
        let measured = outcome.and_then(|tr| policy.measure(&tr, norms).map(|e| (tr, e)));
        let mut row = TableRow {
            rung,
            errors: None,
            orders: vec![None; norms.len()],
            cpu_s,
            failure: None,
            worst_certificate_ratio: 0.0,
            total_iterations: 0,
            max_residual: 0.0,
        };
        match measured {
            Ok((tr, e)) => {
                row.errors = Some(e);
                row.worst_certificate_ratio = tr.worst_certificate_ratio();
                row.total_iterations = tr.steps.iter().map(|s| s.stats.iterations).sum();
                row.max_residual = tr
                    .steps
                    .iter()
                    .map(|s| s.stats.final_residual_inf)
                    .fold(0.0, f64::max);
                (row, None)
            }
            Err(e) => {
                row.failure = Some(e.to_string());
                let err = HjbError::RowFailed {
                    n: rung.n,
                    i_plus_1: rung.i_plus_1,
                    source: Box::new(e),
                };
                (row, Some(err))
            }
        }
    };
    let results: Vec<(TableRow, Option<HjbError>)> = if parallel {
        ladder.par_iter().map(|&r| one(r)).collect()
    } else {
        ladder.iter().map(|&r| one(r)).collect()
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut first_failure = None;
    for (row, err) in results {
        if first_failure.is_none() {
            first_failure = err;
        }
        rows.push(row);
    }
    for r in 1..rows.len() {
        if let (Some(prev), Some(cur)) = (rows[r - 1].errors.clone(), rows[r].errors.as_ref()) {
            rows[r].orders = prev
                .iter()
                .zip(cur)
                .map(|(&a, &b)| observed_order(a, b))
                .collect();
        }
    }
    Ok((
        ConvergenceTable {
            norms: norms.to_vec(),
            rows,
        },
        first_failure,
    ))
}

/// As [`convergence_table_partial`], failing on the first failed row.
pub fn convergence_table<F>(
    ladder: &[Rung],
    norms: &[NormKind],
    policy: &ErrorPolicy<'_>,
    parallel: bool,
    run: F,
) -> Result<ConvergenceTable>
where
    F: Fn(Rung) -> Result<Trajectory> + Sync,
{
    match convergence_table_partial(ladder, norms, policy, parallel, run)? {
        (table, None) => Ok(table),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, TimeGrid};
    use crate::problem::HjbProblem;
    use crate::stepper::run_bdf2;
    use crate::sup_solver::SolverOptions;
    use proptest::prelude::*;

    #[test]
    fn order_of_quartering() {
        assert_eq!(observed_order(4e-3, 1e-3), Some(2.0));
        assert_eq!(observed_order(0.0, 0.0), None);
        assert_eq!(observed_order(1.0, 0.0), None);
    }

    #[test]
    fn error_formatting() {
        assert_eq!(format_error(1.03e-4), "1.03E-04");
        assert_eq!(format_error(2.05e-5), "2.05E-05");
        assert_eq!(format_error(0.0), "0.00E+00");
        assert_eq!(format_error(12.345), "1.23E+01");
        assert_eq!(format_error(9.999e-7), "1.00E-06");
    }

    #[test]
    fn ladders() {
        let l = doubling_ladder(5, 10, 8);
        assert_eq!(l.first(), Some(&Rung { n: 5, i_plus_1: 10 }));
        assert_eq!(
            l.last(),
            Some(&Rung {
                n: 640,
                i_plus_1: 1280
            })
        );
        let bad = [
            Rung { n: 5, i_plus_1: 10 },
            Rung {
                n: 10,
                i_plus_1: 30,
            },
        ];
        let zero = |_: f64, _: f64| 0.0;
        let policy = ErrorPolicy::Exact {
            exact: &zero,
            range: ErrorRange::FromSecondStep,
        };
        assert!(
            convergence_table(&bad, &[NormKind::Sup], &policy, false, |_| unreachable!()).is_err()
        );
    }

    fn zero_dynamics_table(parallel: bool) -> ConvergenceTable {
        let p = HjbProblem::new(vec![1.0], (0.0, 1.0), 1.0).with_exact(|_, _| 0.0);
        let policy = ErrorPolicy::Exact {
            exact: p.exact.as_deref().unwrap(),
            range: ErrorRange::FromSecondStep,
        };
        convergence_table(
            &doubling_ladder(2, 4, 3),
            &[NormKind::H1Rescaled, NormKind::L2Rescaled, NormKind::Sup],
            &policy,
            parallel,
            |r| {
                let g = Grid1D::new(0.0, 1.0, r.i_plus_1 - 1)?;
                run_bdf2(&p, &g, &TimeGrid::new(1.0, r.n)?, &SolverOptions::default())
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_errors_have_undefined_orders() {
        let t = zero_dynamics_table(true);
        let csv = t.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "N,I_plus_1,err_h1,ord_h1,err_l2,ord_l2,err_inf,ord_inf,cpu_s"
        );
        assert!(lines[1].starts_with("2,4,0.00E+00,,0.00E+00,,0.00E+00,,"));
        assert!(lines[2].starts_with("4,8,0.00E+00,--,0.00E+00,--,0.00E+00,--,"));
        let strip = |s: &str| {
            s.lines()
                .map(|l| l.rsplit_once(',').unwrap().0.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(
            strip(&csv),
            strip(&zero_dynamics_table(false).to_csv_string())
        );
    }

    #[test]
    fn failures_are_marked_and_reported() {
        let zero = |_: f64, _: f64| 0.0;
        let policy = ErrorPolicy::Exact {
            exact: &zero,
            range: ErrorRange::FromSecondStep,
        };
        let p = HjbProblem::new(vec![1.0], (0.0, 1.0), 1.0).with_initial(|x| x);
        let (t, err) = convergence_table_partial(
            &doubling_ladder(2, 4, 3),
            &[NormKind::Sup],
            &policy,
            false,
            |r| {
                if r.n == 4 {
                    return Err(HjbError::invalid("boom"));
                }
                let g = Grid1D::new(0.0, 1.0, r.i_plus_1 - 1)?;
                run_bdf2(&p, &g, &TimeGrid::new(1.0, r.n)?, &SolverOptions::default())
            },
        )
        .unwrap();
        assert!(matches!(
            err,
            Some(HjbError::RowFailed {
                n: 4,
                i_plus_1: 8,
                ..
            })
        ));
        let csv = t.to_csv_string();
        assert!(csv.lines().nth(2).unwrap().starts_with("4,8,FAILED,--,"));
        assert!(csv.lines().nth(3).unwrap().starts_with("8,16,"));
        assert_eq!(t.rows[2].orders, vec![None]);
    }

    proptest! {
        #[test]
        fn orders_are_scale_invariant(
            errs in proptest::collection::vec(1e-8..1.0f64, 2..6),
            scale in 1e-3..1e3f64,
        ) {
            for w in errs.windows(2) {
                let a = observed_order(w[0], w[1]).unwrap();
                let b = observed_order(scale * w[0], scale * w[1]).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
