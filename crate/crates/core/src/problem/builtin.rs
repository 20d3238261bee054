//! The two benchmark problems: the eikonal equation `v_t + |v_x| = 0` written
//! as `v_t + max_{a in {-1, 1}} a v_x = 0`, and a controlled-diffusion model
//! `v_t + sup_{s in {0.1, 0.5}} (-1/2 s^2 v_xx) = 0`.

use std::f64::consts::PI;

use super::HjbProblem;

/// `max(0, 1 - x^2)^4`.
pub fn bump(x: f64) -> f64 {
    (1.0 - x * x).max(0.0).powi(4)
}

/// Eikonal problem on (-2, 2), T = 0.2, initial datum [`bump`].
///
/// Exact solution `min(v0(x - t), v0(x + t))`.
pub fn eikonal_problem() -> HjbProblem {
    HjbProblem::new(vec![-1.0, 1.0], (-2.0, 2.0), 0.2)
        .named("eikonal")
        .with_drift(|_, _, a| a)
        .with_initial(bump)
        .with_exact(|t, x| bump(x - t).min(bump(x + t)))
}

/// Eikonal problem with the negated datum `-bump`.
///
/// The viscosity solution is `min_{|y - x| <= t} v0(y)`, and since the bump
/// is even and unimodal, `max_{[x - t, x + t]} bump` sits at the point of the
/// interval closest to 0.
pub fn eikonal_problem_negative() -> HjbProblem {
    HjbProblem::new(vec![-1.0, 1.0], (-2.0, 2.0), 0.2)
        .named("eikonal-neg")
        .with_drift(|_, _, a| a)
        .with_initial(|x| -bump(x))
        .with_exact(|t, x| -bump(0.0f64.clamp(x - t, x + t)))
}

/// Controlled diffusion on (-1, 1), T = 0.5, initial datum `sin(pi x)`, zero
/// boundary values. The control is the volatility itself.
pub fn controlled_diffusion_problem() -> HjbProblem {
    HjbProblem::new(vec![0.1, 0.5], (-1.0, 1.0), 0.5)
        .named("controlled-diffusion")
        .with_sigma(|_, _, a| a)
        .with_initial(|x| (PI * x).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eikonal_exact_values() {
        let p = eikonal_problem();
        let v = p.exact.as_ref().unwrap();
        for &x in &[-1.5, -0.3, 0.0, 0.7, 1.9] {
            assert_eq!(v(0.0, x), bump(x));
        }
        assert!((v(0.2, 0.0) - 0.84934656).abs() < 1e-15);
        assert_eq!(bump(1.5), 0.0);
        assert_eq!(p.controls, vec![-1.0, 1.0]);
        assert_eq!((p.drift)(0.0, 0.3, -1.0), -1.0);
        assert_eq!((p.sigma)(0.0, 0.3, 1.0), 0.0);
    }

    #[test]
    fn negated_eikonal_values() {
        let p = eikonal_problem_negative();
        let v = p.exact.as_ref().unwrap();
        for &x in &[-1.5, -0.3, 0.0, 0.7, 1.9] {
            assert_eq!(v(0.0, x), -bump(x));
        }
        for t in [0.0, 0.05, 0.2] {
            assert_eq!(v(t, 2.0), 0.0);
            assert_eq!(v(t, -2.0), 0.0);
        }
        // flat top of width 2t
        assert_eq!(v(0.2, 0.0), -1.0);
        assert_eq!(v(0.2, 0.15), -1.0);
        assert!((v(0.2, 0.5) + bump(0.3)).abs() < 1e-15);
    }

    #[test]
    fn controlled_diffusion_data() {
        let p = controlled_diffusion_problem();
        assert!(((p.initial)(0.5) - 1.0).abs() < 1e-15);
        assert!((p.initial)(1.0).abs() < 1e-15);
        assert!((p.initial)(-1.0).abs() < 1e-15);
        assert!(p.exact.is_none());
    }

    #[test]
    fn controlled_diffusion_optimal_control_by_sign() {
        let p = controlled_diffusion_problem();
        let best = |w: f64| {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for &a in &p.controls {
                let s = (p.sigma)(0.0, 0.0, a);
                let val = -0.5 * s * s * w;
                if val > best.0 {
                    best = (val, a);
                }
            }
            best.1
        };
        assert_eq!(best(-1.0), 0.5);
        assert_eq!(best(1.0), 0.1);
    }
}
