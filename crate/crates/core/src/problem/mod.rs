//! Problem definitions: coefficients over finite control sets, initial and
//! boundary data, and an optional exact solution.
//!
//! The equation solved is
//! `v_t + sup_a { -1/2 sigma^2 v_xx + b v_x + r v + l } = 0`, `v(0, x) = v0(x)`.

mod assumptions;
mod builtin;

use std::fmt;
use std::sync::Arc;

pub use assumptions::{
    check_assumptions, check_assumptions_2d, AssumptionReport, AssumptionReport2D, SampleSet,
};
pub use builtin::{bump, controlled_diffusion_problem, eikonal_problem, eikonal_problem_negative};

/// Coefficient callback `(t, x, a)`.
pub type Coef = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Isaacs coefficient callback `(t, x, a, b)`.
pub type Coef2 = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
/// 2D coefficient callback `(t, x, y, a)`.
pub type Coef2D = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
/// Space-time datum `(t, x)`.
pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Space-time datum `(t, x, y)`.
pub type Field2D = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Discretization of the first-order term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftMode {
    /// One-sided BDF2 differences chosen by the sign of the drift.
    #[default]
    BdfUpwind,
    /// `(u_{i+1} - u_{i-1}) / 2h`.
    Centered,
}

fn constant(c: f64) -> Coef {
    Arc::new(move |_, _, _| c)
}

#[derive(Clone)]
pub struct HjbProblem {
    pub name: String,
    pub controls: Vec<f64>,
    pub sigma: Coef,
    pub drift: Coef,
    pub discount: Coef,
    pub source: Coef,
    pub initial: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub boundary: Field,
    pub exact: Option<Field>,
    pub drift_mode: DriftMode,
    /// Intended computational domain `(x_min, x_max)`.
    pub domain: (f64, f64),
    /// Intended horizon `T`.
    pub horizon: f64,
    /// Coefficients do not depend on `t`; lets steppers sample them once.
    pub autonomous: bool,
}

impl HjbProblem {
    /// Zero coefficients, zero data, on `domain` up to `horizon`.
    pub fn new(controls: Vec<f64>, domain: (f64, f64), horizon: f64) -> Self {
        HjbProblem {
            name: "custom".into(),
            controls,
            sigma: constant(0.0),
            drift: constant(0.0),
            discount: constant(0.0),
            source: constant(0.0),
            initial: Arc::new(|_| 0.0),
            boundary: Arc::new(|_, _| 0.0),
            exact: None,
            drift_mode: DriftMode::BdfUpwind,
            domain,
            horizon,
            autonomous: true,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_sigma(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.sigma = Arc::new(f);
        self
    }

    pub fn with_drift(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn with_discount(
        mut self,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.discount = Arc::new(f);
        self
    }

    pub fn with_source(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_initial(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(f);
        self
    }

    pub fn with_boundary(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.boundary = Arc::new(f);
        self
    }

    pub fn with_exact(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(f));
        self
    }

    pub fn with_drift_mode(mut self, mode: DriftMode) -> Self {
        self.drift_mode = mode;
        self
    }

    /// Marks the coefficients as time dependent.
    pub fn time_dependent(mut self) -> Self {
        self.autonomous = false;
        self
    }

    /// `sup_a` of `-1/2 sigma^2 w + b p + r u + l` at one point, given the
    /// continuous derivatives `p = v_x`, `w = v_xx`.
    pub fn hamiltonian_at(&self, t: f64, x: f64, u: f64, p: f64, w: f64) -> f64 {
        self.controls
            .iter()
            .map(|&a| {
                let s = (self.sigma)(t, x, a);
                -0.5 * s * s * w
                    + (self.drift)(t, x, a) * p
                    + (self.discount)(t, x, a) * u
                    + (self.source)(t, x, a)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl fmt::Debug for HjbProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HjbProblem")
            .field("name", &self.name)
            .field("controls", &self.controls)
            .field("drift_mode", &self.drift_mode)
            .field("domain", &self.domain)
            .field("horizon", &self.horizon)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

/// `v_t + sup_{a in sup_controls} inf_{b in inf_controls} { ... } = 0`.
#[derive(Clone)]
pub struct IsaacsProblem {
    pub name: String,
    pub sup_controls: Vec<f64>,
    pub inf_controls: Vec<f64>,
    pub sigma: Coef2,
    pub drift: Coef2,
    pub discount: Coef2,
    pub source: Coef2,
    pub initial: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub boundary: Field,
    pub exact: Option<Field>,
    pub drift_mode: DriftMode,
    pub domain: (f64, f64),
    pub horizon: f64,
    pub autonomous: bool,
}

impl IsaacsProblem {
    pub fn new(
        sup_controls: Vec<f64>,
        inf_controls: Vec<f64>,
        domain: (f64, f64),
        horizon: f64,
    ) -> Self {
        let zero: Coef2 = Arc::new(|_, _, _, _| 0.0);
        IsaacsProblem {
            name: "custom-isaacs".into(),
            sup_controls,
            inf_controls,
            sigma: zero.clone(),
            drift: zero.clone(),
            discount: zero.clone(),
            source: zero,
            initial: Arc::new(|_| 0.0),
            boundary: Arc::new(|_, _| 0.0),
            exact: None,
            drift_mode: DriftMode::BdfUpwind,
            domain,
            horizon,
            autonomous: true,
        }
    }

    pub fn with_sigma(
        mut self,
        f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.sigma = Arc::new(f);
        self
    }

    pub fn with_drift(
        mut self,
        f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn with_discount(
        mut self,
        f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.discount = Arc::new(f);
        self
    }

    pub fn with_source(
        mut self,
        f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_initial(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(f);
        self
    }

    pub fn with_boundary(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.boundary = Arc::new(f);
        self
    }

    /// The HJB problem obtained by freezing the minimizing player's control.
    pub fn with_inf_control_fixed(&self, b: f64) -> HjbProblem {
        let (s, d, r, l) = (
            self.sigma.clone(),
            self.drift.clone(),
            self.discount.clone(),
            self.source.clone(),
        );
        HjbProblem {
            name: format!("{}[b={b}]", self.name),
            controls: self.sup_controls.clone(),
            sigma: Arc::new(move |t, x, a| s(t, x, a, b)),
            drift: Arc::new(move |t, x, a| d(t, x, a, b)),
            discount: Arc::new(move |t, x, a| r(t, x, a, b)),
            source: Arc::new(move |t, x, a| l(t, x, a, b)),
            initial: self.initial.clone(),
            boundary: self.boundary.clone(),
            exact: self.exact.clone(),
            drift_mode: self.drift_mode,
            domain: self.domain,
            horizon: self.horizon,
            autonomous: self.autonomous,
        }
    }
}

impl fmt::Debug for IsaacsProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IsaacsProblem")
            .field("name", &self.name)
            .field("sup_controls", &self.sup_controls)
            .field("inf_controls", &self.inf_controls)
            .field("domain", &self.domain)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

/// Two-dimensional HJB problem with covariance
/// `[[s1^2, rho s1 s2], [rho s1 s2, s2^2]]` and drift `(b1, b2)`.
#[derive(Clone)]
pub struct HjbProblem2D {
    pub name: String,
    pub controls: Vec<f64>,
    pub sigma1: Coef2D,
    pub sigma2: Coef2D,
    pub rho: Coef2D,
    pub b1: Coef2D,
    pub b2: Coef2D,
    pub discount: Coef2D,
    pub source: Coef2D,
    pub initial: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub boundary: Field2D,
    pub exact: Option<Field2D>,
    pub domain_x: (f64, f64),
    pub domain_y: (f64, f64),
    pub horizon: f64,
    pub autonomous: bool,
}

macro_rules! setter_2d {
    ($($name:ident => $field:ident),* $(,)?) => {
        $(
            pub fn $name(
                mut self,
                f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
            ) -> Self {
                self.$field = Arc::new(f);
                self
            }
        )*
    };
}

impl HjbProblem2D {
    pub fn new(
        controls: Vec<f64>,
        domain_x: (f64, f64),
        domain_y: (f64, f64),
        horizon: f64,
    ) -> Self {
        let zero: Coef2D = Arc::new(|_, _, _, _| 0.0);
        HjbProblem2D {
            name: "custom-2d".into(),
            controls,
            sigma1: zero.clone(),
            sigma2: zero.clone(),
            rho: zero.clone(),
            b1: zero.clone(),
            b2: zero.clone(),
            discount: zero.clone(),
            source: zero,
            initial: Arc::new(|_, _| 0.0),
            boundary: Arc::new(|_, _, _| 0.0),
            exact: None,
            domain_x,
            domain_y,
            horizon,
            autonomous: true,
        }
    }

    setter_2d! {
        with_sigma1 => sigma1,
        with_sigma2 => sigma2,
        with_rho => rho,
        with_b1 => b1,
        with_b2 => b2,
        with_discount => discount,
        with_source => source,
    }

    pub fn with_initial(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Arc::new(f);
        self
    }

    pub fn with_boundary(
        mut self,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.boundary = Arc::new(f);
        self
    }
}

impl fmt::Debug for HjbProblem2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HjbProblem2D")
            .field("name", &self.name)
            .field("controls", &self.controls)
            .field("domain_x", &self.domain_x)
            .field("domain_y", &self.domain_y)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}
