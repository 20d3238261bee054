use std::fmt;
use std::str::FromStr;

use crate::error::HjbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `|u|_0 = sqrt(h) ||u||`.
    L2Rescaled,
    /// `|u|_1 = sqrt(h) |u|_A`.
    H1Rescaled,
    /// `|u|_A^2 = sum_{i=1}^{I+1} ((u_i - u_{i-1}) / h)^2` with `u_0 = u_{I+1} = 0`.
    ANorm,
    Euclidean,
    Sup,
}

impl NormKind {
    /// Short name used in CSV headers and configs.
    pub fn name(self) -> &'static str {
        match self {
            NormKind::L2Rescaled => "l2",
            NormKind::H1Rescaled => "h1",
            NormKind::ANorm => "a",
            NormKind::Euclidean => "euclid",
            NormKind::Sup => "inf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = HjbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "l2" => NormKind::L2Rescaled,
            "h1" => NormKind::H1Rescaled,
            "a" => NormKind::ANorm,
            "euclid" => NormKind::Euclidean,
            "inf" | "sup" => NormKind::Sup,
            _ => return Err(HjbError::invalid(format!("unknown norm '{s}'"))),
        })
    }
}

fn a_norm(u: &[f64], h: f64) -> f64 {
    let n = u.len();
    let at = |i: usize| if i == 0 || i > n { 0.0 } else { u[i - 1] };
    (1..=n + 1)
        .map(|i| {
            let d = (at(i) - at(i - 1)) / h;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn norm(u: &[f64], kind: NormKind, h: f64) -> f64 {
    let euclid = || u.iter().map(|v| v * v).sum::<f64>().sqrt();
    match kind {
        NormKind::L2Rescaled => h.sqrt() * euclid(),
        NormKind::H1Rescaled => h.sqrt() * a_norm(u, h),
        NormKind::ANorm => a_norm(u, h),
        NormKind::Euclidean => euclid(),
        NormKind::Sup => u.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// `max_i |u_{i-1} - 2 u_i + u_{i+1}|` over interior triples of `u`.
pub fn oscillation_metric(u: &[f64]) -> f64 {
    u.windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd_ops::assemble_a_matrix;
    use proptest::prelude::*;

    const ALL: [NormKind; 5] = [
        NormKind::L2Rescaled,
        NormKind::H1Rescaled,
        NormKind::ANorm,
        NormKind::Euclidean,
        NormKind::Sup,
    ];

    #[test]
    fn zero_padding_example() {
        assert!((norm(&[1.0, 0.0], NormKind::ANorm, 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_vector() {
        for k in ALL {
            assert_eq!(norm(&[0.0; 7], k, 0.1), 0.0);
        }
    }

    #[test]
    fn names_round_trip() {
        for k in ALL {
            assert_eq!(k.name().parse::<NormKind>().unwrap(), k);
        }
        assert!("h2".parse::<NormKind>().is_err());
    }

    #[test]
    fn oscillation_of_affine_is_zero() {
        assert_eq!(oscillation_metric(&[1.0, 2.0, 3.0, 4.0]), 0.0);
        assert_eq!(oscillation_metric(&[0.0, 1.0, 0.0]), 2.0);
    }

    proptest! {
        #[test]
        fn a_norm_is_quadratic_form(u in proptest::collection::vec(-3.0..3.0f64, 1..50)) {
            let h = 1.0 / (u.len() + 1) as f64;
            let a = assemble_a_matrix(u.len(), h).unwrap();
            let q: f64 = a.matvec(&u).iter().zip(&u).map(|(x, y)| x * y).sum();
            let n = norm(&u, NormKind::ANorm, h);
            prop_assert!((n * n - q).abs() <= 1e-9 * q.max(1.0));
        }

        #[test]
        fn poincare_on_unit_domain(u in proptest::collection::vec(-3.0..3.0f64, 1..60)) {
            let h = 1.0 / (u.len() + 1) as f64;
            let a = assemble_a_matrix(u.len(), h).unwrap();
            let e = norm(&u, NormKind::Euclidean, h);
            let an = norm(&u, NormKind::ANorm, h);
            prop_assert!(e <= 0.5 * an * (1.0 + 1e-12));
            let au = norm(&a.matvec(&u), NormKind::Euclidean, h);
            prop_assert!(an <= 0.5 * au * (1.0 + 1e-12));
        }
    }
}
