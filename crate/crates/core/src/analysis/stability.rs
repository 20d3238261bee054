use crate::error::{HjbError, Result};

/// Coefficients of `M_tau^{-1} = sum_p a_p J^p` for the upper-triangular
/// Toeplitz matrix `M_tau = (3 - C tau) I - 4 J + J^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCoefficients {
    pub c: f64,
    pub tau: f64,
    pub count: usize,
    /// `2 + sqrt(1 + C tau)`.
    pub lambda1: f64,
    /// `2 - sqrt(1 + C tau)`.
    pub lambda2: f64,
    /// `a_0..=a_count`.
    pub a: Vec<f64>,
    /// `3/2 exp(2 C count tau)`.
    pub bound: f64,
    /// Smallest entry of `M_tau^{-1}` of size `count + 1`, computed directly.
    pub min_inverse_entry: f64,
}

impl StabilityCoefficients {
    pub fn is_nondecreasing(&self) -> bool {
        self.a.windows(2).all(|w| w[1] >= w[0])
    }
}

/// `M_tau` of the given size, dense.
pub fn m_tau(c: f64, tau: f64, size: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; size]; size];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 3.0 - c * tau;
        if i + 1 < size {
            row[i + 1] = -4.0;
        }
        if i + 2 < size {
            row[i + 2] = 1.0;
        }
    }
    m
}

/// Inverse of [`m_tau`] by back substitution, column by column.
pub fn m_tau_inverse(c: f64, tau: f64, size: usize) -> Vec<Vec<f64>> {
    let m = m_tau(c, tau, size);
    let mut inv = vec![vec![0.0; size]; size];
    for col in 0..size {
        for i in (0..size).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for j in i + 1..size {
                s -= m[i][j] * inv[j][col];
            }
            inv[i][col] = s / m[i][i];
        }
    }
    inv
}

pub fn stability_coefficients(c: f64, tau: f64, count: usize) -> Result<StabilityCoefficients> {
    if !(c >= 0.0 && tau > 0.0) {
        return Err(HjbError::invalid(format!(
            "need C >= 0 and tau > 0, got C = {c}, tau = {tau}"
        )));
    }
    if c * tau >= 3.0 {
        return Err(HjbError::invalid(format!(
            "C tau = {} must be below 3",
            c * tau
        )));
    }
    let s = (1.0 + c * tau).sqrt();
    let (l1, l2) = (2.0 + s, 2.0 - s);
    let a = (0..=count)
        .map(|p| {
            (0..=p)
                .map(|j| l1.powi(-(j as i32 + 1)) * l2.powi(-((p - j) as i32 + 1)))
                .sum()
        })
        .collect();
    let min_inverse_entry = m_tau_inverse(c, tau, count + 1)
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    Ok(StabilityCoefficients {
        c,
        tau,
        count,
        lambda1: l1,
        lambda2: l2,
        a,
        bound: 1.5 * (2.0 * c * count as f64 * tau).exp(),
        min_inverse_entry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_c_closed_form() {
        let s = stability_coefficients(0.0, 0.1, 10).unwrap();
        assert_eq!((s.lambda1, s.lambda2), (3.0, 1.0));
        assert!((s.a[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.a[1] - 4.0 / 9.0).abs() < 1e-15);
        for (p, a) in s.a.iter().enumerate() {
            assert!((a - (1.0 - 3f64.powi(-(p as i32 + 1))) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_large_c_tau() {
        assert!(stability_coefficients(10.0, 0.3, 4).is_err());
        assert!(stability_coefficients(10.0, 0.29, 4).is_ok());
    }

    proptest! {
        #[test]
        fn inverse_is_toeplitz_in_a(c in 0.0..5.0f64, tau in 0.001..0.1f64, count in 0usize..8) {
            let s = stability_coefficients(c, tau, count).unwrap();
            let inv = m_tau_inverse(c, tau, count + 1);
            for i in 0..=count {
                for j in 0..=count {
                    let expect = if j >= i { s.a[j - i] } else { 0.0 };
                    prop_assert!((inv[i][j] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                }
            }
            prop_assert!(s.min_inverse_entry >= 0.0);
        }

        #[test]
        fn monotone_and_bounded(c in 0.0..5.0f64, count in 1usize..200) {
            let tau = 1.0 / (2.0 * c.max(1e-3) * count as f64).max(1.0) ;
            let s = stability_coefficients(c, tau.min(0.5 / c.max(1e-3)), count).unwrap();
            prop_assert!(s.is_nondecreasing());
            prop_assert!(s.a.iter().all(|&a| a >= 0.0 && a <= s.bound));
        }
    }
}
