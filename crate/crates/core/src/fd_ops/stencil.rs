//! Pointwise difference quotients on padded vectors.

use crate::error::{HjbError, Result};
use crate::grid::Grid1D;

/// Values at node indices `-1..=I+2` (two ghost layers each side).
#[derive(Debug, Clone, PartialEq)]
pub struct Padded {
    values: Vec<f64>,
}

impl Padded {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(HjbError::invalid(format!(
                "padded vector needs at least 5 entries, got {}",
                values.len()
            )));
        }
        Ok(Padded { values })
    }

    /// Assembles `[g_{-1}, g_0, interior.., g_{I+1}, g_{I+2}]`.
    pub fn from_parts(ghosts: [f64; 4], interior: &[f64]) -> Self {
        let mut values = Vec::with_capacity(interior.len() + 4);
        values.extend_from_slice(&ghosts[..2]);
        values.extend_from_slice(interior);
        values.extend_from_slice(&ghosts[2..]);
        Padded { values }
    }

    /// `f` sampled at every node of `grid`, ghosts included.
    pub fn sample(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Padded {
            values: grid.all_nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn interior_len(&self) -> usize {
        self.values.len() - 4
    }

    /// Value at node index `i`, `-1 <= i <= I + 2`.
    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        self.values[(i + 1) as usize]
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[2..self.values.len() - 2]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn ghosts(&self) -> [f64; 4] {
        let n = self.values.len();
        [
            self.values[0],
            self.values[1],
            self.values[n - 2],
            self.values[n - 1],
        ]
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(HjbError::invalid(format!(
            "step h must be positive, got {h}"
        )))
    }
}

fn map_interior(u: &Padded, f: impl Fn(isize) -> f64) -> Vec<f64> {
    (1..=u.interior_len() as isize).map(f).collect()
}

/// `(u_{i-1} - 2 u_i + u_{i+1}) / h^2`.
pub fn d2(u: &Padded, h: f64) -> Result<Vec<f64>> {
    check_h(h)?;
    Ok(map_interior(u, |i| {
        (u.at(i - 1) - 2.0 * u.at(i) + u.at(i + 1)) / (h * h)
    }))
}

/// Left-sided BDF2 derivative `(3 u_i - 4 u_{i-1} + u_{i-2}) / 2h`.
pub fn d1_minus(u: &Padded, h: f64) -> Result<Vec<f64>> {
    check_h(h)?;
    Ok(map_interior(u, |i| {
        (3.0 * u.at(i) - 4.0 * u.at(i - 1) + u.at(i - 2)) / (2.0 * h)
    }))
}

/// Right-sided BDF2 derivative `-(3 u_i - 4 u_{i+1} + u_{i+2}) / 2h`.
pub fn d1_plus(u: &Padded, h: f64) -> Result<Vec<f64>> {
    check_h(h)?;
    Ok(map_interior(u, |i| {
        -(3.0 * u.at(i) - 4.0 * u.at(i + 1) + u.at(i + 2)) / (2.0 * h)
    }))
}

/// `(u_{i+1} - u_{i-1}) / 2h`.
pub fn d1_centered(u: &Padded, h: f64) -> Result<Vec<f64>> {
    check_h(h)?;
    Ok(map_interior(u, |i| (u.at(i + 1) - u.at(i - 1)) / (2.0 * h)))
}

/// Weights `(alpha, beta, gamma)` of the 7-point second-order stencil:
///
/// `s1^2 v_xx + 2 rho s1 s2 v_xy + s2^2 v_yy
///   ~ alpha Dx u + beta Dy u + gamma (u_{i-1,j-1} - 2 u_ij + u_{i+1,j+1})`
///
/// where `Dx`, `Dy` are undivided second differences. Only `rho >= 0` is
/// supported.
pub fn stencil_coefficients_2d(
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    hx: f64,
    hy: f64,
) -> Result<(f64, f64, f64)> {
    check_h(hx)?;
    check_h(hy)?;
    if rho < 0.0 {
        return Err(HjbError::UnsupportedCorrelation { rho });
    }
    if rho > 1.0 {
        return Err(HjbError::invalid(format!("correlation {rho} exceeds 1")));
    }
    let (px, py) = (sigma1 / hx, sigma2 / hy);
    let alpha = px * (px - rho * py);
    let beta = py * (py - rho * px);
    let gamma = rho * sigma1 * sigma2 / (hx * hy);
    Ok((alpha, beta, gamma))
}
