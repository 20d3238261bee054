//! Banded matrix storage, the second-difference matrix `A`, and a banded
//! LU factorization with partial pivoting.

use std::io::{self, Write};

use crate::error::{HjbError, Result};

/// Square matrix whose nonzeros lie on a fixed set of diagonals.
///
/// `diags[d][i]` holds entry `(i, i + offsets[d])`; slots whose column falls
/// outside `0..n` are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    offsets: Vec<isize>,
    diags: Vec<Vec<f64>>,
}

/// Five diagonals, offsets -2..=2.
pub type PentaMatrix = BandedMatrix;

impl BandedMatrix {
    /// Zero matrix on the given diagonals (sorted and deduplicated; the main
    /// diagonal is always included).
    pub fn zeros(n: usize, offsets: &[isize]) -> Self {
        let mut offsets = offsets.to_vec();
        offsets.push(0);
        offsets.sort_unstable();
        offsets.dedup();
        offsets.retain(|&o| o.unsigned_abs() < n.max(1));
        let diags = vec![vec![0.0; n]; offsets.len()];
        BandedMatrix { n, offsets, diags }
    }

    pub fn penta(n: usize) -> Self {
        Self::zeros(n, &[-2, -1, 0, 1, 2])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, &[0]);
        m.diags[0].fill(1.0);
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.offsets.first().map_or(0, |&o| (-o).max(0) as usize)
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.offsets.last().map_or(0, |&o| o.max(0) as usize)
    }

    fn slot(&self, offset: isize) -> Option<usize> {
        self.offsets.binary_search(&offset).ok()
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = j as isize - i as isize;
        self.slot(off).map_or(0.0, |d| self.diags[d][i])
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n, "({i}, {j}) out of range");
        let off = j as isize - i as isize;
        let d = self
            .slot(off)
            .unwrap_or_else(|| panic!("offset {off} not stored"));
        self.diags[d][i] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize;
        let d = self
            .slot(off)
            .unwrap_or_else(|| panic!("offset {off} not stored"));
        self.diags[d][i] = v;
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        let d = self.slot(0).expect("main diagonal is stored");
        self.diags[d][i]
    }

    /// Nonzero-slot entries of row `i` as `(column, value)`, in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.offsets
            .iter()
            .zip(&self.diags)
            .filter_map(move |(&o, d)| {
                let j = i as isize + o;
                (j >= 0 && (j as usize) < self.n).then(|| (j as usize, d[i]))
            })
    }

    /// `sum_{j != i} M_ij x_j` over the stored band of row `i`.
    #[inline]
    pub fn off_diagonal_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&o, d) in self.offsets.iter().zip(&self.diags) {
            if o == 0 {
                continue;
            }
            let j = i as isize + o;
            if j >= 0 && (j as usize) < self.n {
                s += d[i] * x[j as usize];
            }
        }
        s
    }

    /// Row `i` copied from `rows[pick[i]]`; all sources must share `offsets`.
    pub fn from_row_choice(rows: &[&BandedMatrix], pick: &[usize]) -> Self {
        let first = rows[0];
        let mut out = BandedMatrix::zeros(first.n, &first.offsets);
        for (i, &p) in pick.iter().enumerate() {
            for (d, src) in out.diags.iter_mut().zip(&rows[p].diags) {
                d[i] = src[i];
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self <- alpha * self + beta * I`.
    pub fn scale_shift(&mut self, alpha: f64, beta: f64) {
        for d in &mut self.diags {
            d.iter_mut().for_each(|v| *v *= alpha);
        }
        let d = self.slot(0).expect("main diagonal is stored");
        self.diags[d].iter_mut().for_each(|v| *v += beta);
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// Plain-text dump: a header naming the offsets, then one line per row
    /// with the row index followed by the stored value on each offset.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "# offsets:")?;
        for o in &self.offsets {
            write!(w, " {o}")?;
        }
        writeln!(w)?;
        for i in 0..self.n {
            write!(w, "{i}")?;
            for d in &self.diags {
                write!(w, " {:.17e}", d[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Symmetric tridiagonal matrix with constant diagonals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriMatrix {
    pub n: usize,
    pub diag: f64,
    pub off: f64,
}

impl TriMatrix {
    pub fn to_banded(&self) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(self.n, &[-1, 0, 1]);
        for i in 0..self.n {
            m.set(i, i, self.diag);
            if i + 1 < self.n {
                m.set(i, i + 1, self.off);
                m.set(i + 1, i, self.off);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = self.diag * x[i];
                if i > 0 {
                    s += self.off * x[i - 1];
                }
                if i + 1 < self.n {
                    s += self.off * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm sequence count).
    fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..self.n {
            let prev = if i == 0 { 0.0 } else { self.off * self.off / q };
            q = self.diag - lambda - prev;
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag.abs() + self.off.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Smallest eigenvalue by bisection on the Sturm count.
    pub fn min_eigenvalue(&self) -> f64 {
        let r = 2.0 * self.off.abs();
        let (mut lo, mut hi) = (self.diag - r, self.diag + r);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `A = tridiag(-1, 2, -1) / h^2` of size `I`.
pub fn assemble_a_matrix(interior_count: usize, h: f64) -> Result<TriMatrix> {
    if interior_count < 1 {
        return Err(HjbError::invalid("A needs at least one row"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(HjbError::invalid(format!(
            "step h must be positive, got {h}"
        )));
    }
    let s = 1.0 / (h * h);
    Ok(TriMatrix {
        n: interior_count,
        diag: 2.0 * s,
        off: -s,
    })
}

/// LU factors of a banded matrix, row-pivoted within the band.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of U (`ku + kl` after pivoting).
    ku: usize,
    width: usize,
    /// Row `i` stores columns `i - kl ..= i + ku`.
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(m: &BandedMatrix) -> Result<Self> {
        let n = m.size();
        let kl = m.lower_bandwidth();
        let ku = m.upper_bandwidth() + kl;
        let width = kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        let mut scale = 0.0f64;
        for i in 0..n {
            for (j, v) in m.row(i) {
                *lu.at_mut(i, j) = v;
                scale = scale.max(v.abs());
            }
        }
        let tiny = scale * f64::EPSILON * 16.0;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(HjbError::Singular { row: k });
            }
            lu.pivots[k] = p;
            let right = (k + ku).min(n - 1);
            if p != k {
                for j in k..=right {
                    let a = lu.at(k, j);
                    let b = lu.at(p, j);
                    *lu.at_mut(k, j) = b;
                    *lu.at_mut(p, j) = a;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=right {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                x[i] -= self.at(i, k) * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.ku).min(n - 1) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }
}
