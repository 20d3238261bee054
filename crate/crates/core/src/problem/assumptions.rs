//! Sampled checks of the boundedness, ellipticity, Lipschitz and
//! semiconcavity assumptions on the coefficients.

use crate::grid::{Grid1D, Grid2D, TimeGrid};

use super::{HjbProblem, HjbProblem2D};

/// Where a report's estimates were sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub x_min: f64,
    pub x_max: f64,
    /// Spatial nodes sampled: `x_0..x_{I+1}` on each axis.
    pub nodes: usize,
    pub h: f64,
    pub time_levels: usize,
    pub tau: f64,
    pub controls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub samples: SampleSet,
    /// (A1): sampled sup of |sigma|, |b|, |r|.
    pub sup_sigma: f64,
    pub sup_drift: f64,
    pub sup_discount: f64,
    /// (A2): sampled inf of sigma^2; positive means uniformly elliptic.
    pub ellipticity_eta: f64,
    /// (A3): sigma independent of the control on every sample.
    pub sigma_control_independent: bool,
    /// (A3): max |sigma^2(x_{i+1}) - sigma^2(x_i)| / h.
    pub sigma2_lipschitz: f64,
    /// (A4): drift independent of the control on every sample.
    pub drift_control_independent: bool,
    /// (A4): max |b(x_{i+1}) - b(x_i)| / h.
    pub drift_lipschitz: f64,
    /// (A4): `max(0, -min` of the second divided difference of sigma^2`)`.
    pub semiconcavity: f64,
}

impl AssumptionReport {
    pub fn a1_bounded(&self) -> bool {
        self.sup_sigma.is_finite() && self.sup_drift.is_finite() && self.sup_discount.is_finite()
    }

    pub fn a2_elliptic(&self) -> bool {
        self.ellipticity_eta > 0.0
    }

    pub fn a3_holds(&self) -> bool {
        self.sigma_control_independent && self.sigma2_lipschitz.is_finite()
    }

    pub fn a4_holds(&self) -> bool {
        self.sigma_control_independent
            && self.drift_control_independent
            && self.sup_discount.is_finite()
            && self.drift_lipschitz.is_finite()
            && self.semiconcavity.is_finite()
    }
}

/// Samples the coefficients at every `(t_k, x_i, a)` with `k = 0..=N` and
/// `i = 0..=I+1`.
pub fn check_assumptions(problem: &HjbProblem, grid: &Grid1D, time: &TimeGrid) -> AssumptionReport {
    let nodes: Vec<f64> = (0..=grid.interior_count() as isize + 1)
        .map(|i| grid.node(i))
        .collect();
    let h = grid.h();
    let mut rep = AssumptionReport {
        samples: SampleSet {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            nodes: nodes.len(),
            h,
            time_levels: time.steps() + 1,
            tau: time.tau(),
            controls: problem.controls.len(),
        },
        sup_sigma: 0.0,
        sup_drift: 0.0,
        sup_discount: 0.0,
        ellipticity_eta: f64::INFINITY,
        sigma_control_independent: true,
        sigma2_lipschitz: 0.0,
        drift_control_independent: true,
        drift_lipschitz: 0.0,
        semiconcavity: 0.0,
    };
    let mut min_second_diff = f64::INFINITY;
    for k in 0..=time.steps() {
        let t = time.t(k);
        let mut first: Option<(Vec<f64>, Vec<f64>)> = None;
        for &a in &problem.controls {
            let s2: Vec<f64> = nodes
                .iter()
                .map(|&x| {
                    let s = (problem.sigma)(t, x, a);
                    rep.sup_sigma = rep.sup_sigma.max(s.abs());
                    s * s
                })
                .collect();
            let b: Vec<f64> = nodes.iter().map(|&x| (problem.drift)(t, x, a)).collect();
            for &x in &nodes {
                rep.sup_discount = rep.sup_discount.max((problem.discount)(t, x, a).abs());
            }
            for (&s, &bb) in s2.iter().zip(&b) {
                rep.ellipticity_eta = rep.ellipticity_eta.min(s);
                rep.sup_drift = rep.sup_drift.max(bb.abs());
            }
            for w in s2.windows(2) {
                rep.sigma2_lipschitz = rep.sigma2_lipschitz.max((w[1] - w[0]).abs() / h);
            }
            for w in b.windows(2) {
                rep.drift_lipschitz = rep.drift_lipschitz.max((w[1] - w[0]).abs() / h);
            }
            for w in s2.windows(3) {
                min_second_diff = min_second_diff.min((w[0] - 2.0 * w[1] + w[2]) / (h * h));
            }
            match &first {
                None => first = Some((s2, b)),
                Some((s0, b0)) => {
                    rep.sigma_control_independent &= s0 == &s2;
                    rep.drift_control_independent &= b0 == &b;
                }
            }
        }
    }
    rep.semiconcavity = (-min_second_diff).max(0.0);
    rep
}

/// Sampled versions of (A1')–(A3') for the 2D scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport2D {
    pub samples_x: SampleSet,
    pub samples_y: SampleSet,
    /// (A1'): sup |b_1|, sup |b_2|.
    pub sup_b1: f64,
    pub sup_b2: f64,
    /// (A2'): min over samples of `sigma_i^2 - rho sigma_i sigma_j`, `i != j`.
    pub diagonal_dominance_eta: f64,
    /// (A3'): Lipschitz estimates of `s1 s1`, `s1 s2`, `s2 s2` (max over both
    /// axis directions).
    pub product_lipschitz: [f64; 3],
    pub min_rho: f64,
    pub max_rho: f64,
}

pub fn check_assumptions_2d(
    problem: &HjbProblem2D,
    grid: &Grid2D,
    time: &TimeGrid,
) -> AssumptionReport2D {
    let axis = |g: &Grid1D| -> Vec<f64> {
        (0..=g.interior_count() as isize + 1)
            .map(|i| g.node(i))
            .collect()
    };
    let (xs, ys) = (axis(&grid.x), axis(&grid.y));
    let sample_set = |g: &Grid1D, n: usize| SampleSet {
        x_min: g.x_min(),
        x_max: g.x_max(),
        nodes: n,
        h: g.h(),
        time_levels: time.steps() + 1,
        tau: time.tau(),
        controls: problem.controls.len(),
    };
    let mut rep = AssumptionReport2D {
        samples_x: sample_set(&grid.x, xs.len()),
        samples_y: sample_set(&grid.y, ys.len()),
        sup_b1: 0.0,
        sup_b2: 0.0,
        diagonal_dominance_eta: f64::INFINITY,
        product_lipschitz: [0.0; 3],
        min_rho: f64::INFINITY,
        max_rho: f64::NEG_INFINITY,
    };
    let (nx, ny) = (xs.len(), ys.len());
    for k in 0..=time.steps() {
        let t = time.t(k);
        for &a in &problem.controls {
            let mut prod = vec![[0.0f64; 3]; nx * ny];
            for (jy, &y) in ys.iter().enumerate() {
                for (ix, &x) in xs.iter().enumerate() {
                    let s1 = (problem.sigma1)(t, x, y, a);
                    let s2 = (problem.sigma2)(t, x, y, a);
                    let rho = (problem.rho)(t, x, y, a);
                    rep.sup_b1 = rep.sup_b1.max((problem.b1)(t, x, y, a).abs());
                    rep.sup_b2 = rep.sup_b2.max((problem.b2)(t, x, y, a).abs());
                    rep.min_rho = rep.min_rho.min(rho);
                    rep.max_rho = rep.max_rho.max(rho);
                    let dd = (s1 * s1 - rho * s1 * s2).min(s2 * s2 - rho * s1 * s2);
                    rep.diagonal_dominance_eta = rep.diagonal_dominance_eta.min(dd);
                    prod[jy * nx + ix] = [s1 * s1, s1 * s2, s2 * s2];
                }
            }
            for jy in 0..ny {
                for ix in 0..nx {
                    let here = prod[jy * nx + ix];
                    for c in 0..3 {
                        if ix + 1 < nx {
                            let d = (prod[jy * nx + ix + 1][c] - here[c]).abs() / grid.x.h();
                            rep.product_lipschitz[c] = rep.product_lipschitz[c].max(d);
                        }
                        if jy + 1 < ny {
                            let d = (prod[(jy + 1) * nx + ix][c] - here[c]).abs() / grid.y.h();
                            rep.product_lipschitz[c] = rep.product_lipschitz[c].max(d);
                        }
                    }
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{controlled_diffusion_problem, eikonal_problem};

    fn grids(i: usize, n: usize, dom: (f64, f64), t: f64) -> (Grid1D, TimeGrid) {
        (
            Grid1D::new(dom.0, dom.1, i).unwrap(),
            TimeGrid::new(t, n).unwrap(),
        )
    }

    #[test]
    fn eikonal_is_degenerate() {
        let (g, t) = grids(39, 10, (-2.0, 2.0), 0.2);
        let rep = check_assumptions(&eikonal_problem(), &g, &t);
        assert_eq!(rep.ellipticity_eta, 0.0);
        assert_eq!(rep.sup_drift, 1.0);
        assert!(!rep.a2_elliptic());
        assert!(!rep.drift_control_independent);
        assert_eq!(rep.samples.nodes, 41);
    }

    #[test]
    fn controlled_diffusion_eta() {
        let (g, t) = grids(19, 4, (-1.0, 1.0), 0.5);
        let rep = check_assumptions(&controlled_diffusion_problem(), &g, &t);
        assert!((rep.ellipticity_eta - 0.01).abs() < 1e-15);
        assert!(rep.a2_elliptic());
        assert!(!rep.sigma_control_independent);
        assert_eq!(rep.sigma2_lipschitz, 0.0);
    }

    #[test]
    fn lipschitz_estimate_increases_to_analytic_constant() {
        // sigma = 1 + x^2 on (0, 1): |d(sigma^2)/dx| = 4x(1 + x^2) <= 8.
        let p = HjbProblem::new(vec![0.0], (0.0, 1.0), 1.0).with_sigma(|_, x, _| 1.0 + x * x);
        let mut prev = 0.0;
        let mut i = 4;
        for _ in 0..8 {
            let (g, t) = grids(i, 1, (0.0, 1.0), 1.0);
            let rep = check_assumptions(&p, &g, &t);
            assert!(rep.sigma2_lipschitz >= prev);
            assert!(rep.sigma2_lipschitz <= 8.0);
            assert!(rep.a3_holds());
            prev = rep.sigma2_lipschitz;
            i = 2 * i + 1;
        }
        assert!((prev - 8.0).abs() < 0.05, "{prev}");
    }

    #[test]
    fn semiconcavity_of_concave_sigma2() {
        // sigma^2 = 2 - x^2 has (sigma^2)'' = -2 exactly on any grid.
        let p = HjbProblem::new(vec![0.0], (-1.0, 1.0), 1.0)
            .with_sigma(|_, x, _| (2.0 - x * x).sqrt())
            .with_drift(|_, x, _| 3.0 * x);
        let (g, t) = grids(9, 2, (-1.0, 1.0), 1.0);
        let rep = check_assumptions(&p, &g, &t);
        assert!((rep.semiconcavity - 2.0).abs() < 1e-9);
        assert!((rep.drift_lipschitz - 3.0).abs() < 1e-12);
        assert!(rep.a4_holds());
    }

    #[test]
    fn diagonal_dominance_2d() {
        let p = HjbProblem2D::new(vec![0.0], (0.0, 1.0), (0.0, 1.0), 1.0)
            .with_sigma1(|_, _, _, _| 1.0)
            .with_sigma2(|_, _, _, _| 0.5)
            .with_rho(|_, _, _, _| 0.4)
            .with_b1(|_, x, _, _| -2.0 * x);
        let g = Grid2D::new(
            Grid1D::new(0.0, 1.0, 3).unwrap(),
            Grid1D::new(0.0, 1.0, 3).unwrap(),
        );
        let t = TimeGrid::new(1.0, 1).unwrap();
        let rep = check_assumptions_2d(&p, &g, &t);
        // min(1 - 0.2, 0.25 - 0.2)
        assert!((rep.diagonal_dominance_eta - 0.05).abs() < 1e-15);
        assert_eq!(rep.sup_b1, 2.0);
        assert_eq!(rep.product_lipschitz, [0.0; 3]);
        assert_eq!(rep.min_rho, 0.4);
    }
}
