use crate::error::{HjbError, Result};

use super::banded::BandedMatrix;

/// Time level and steps a system was assembled for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMeta {
    pub t: f64,
    pub tau: f64,
    pub h: f64,
    /// y-step for 2D systems.
    pub hy: Option<f64>,
}

/// `sup_a (M_a X - q_a) = 0` over a finite control list.
#[derive(Debug, Clone)]
pub struct SupLinearSystem {
    pub controls: Vec<f64>,
    pub matrices: Vec<BandedMatrix>,
    pub rhs: Vec<Vec<f64>>,
    pub meta: StepMeta,
}

fn check_family(matrices: &[BandedMatrix], rhs: &[Vec<f64>]) -> Result<usize> {
    let first = matrices
        .first()
        .ok_or_else(|| HjbError::invalid("control list is empty"))?;
    let n = first.size();
    if matrices.len() != rhs.len() {
        return Err(HjbError::invalid(
            "one right-hand side per matrix is required",
        ));
    }
    for (m, q) in matrices.iter().zip(rhs) {
        if m.size() != n || q.len() != n {
            return Err(HjbError::invalid(
                "matrices and right-hand sides differ in size",
            ));
        }
        if m.offsets() != first.offsets() {
            return Err(HjbError::invalid("matrices differ in band layout"));
        }
    }
    Ok(n)
}

impl SupLinearSystem {
    pub fn new(
        controls: Vec<f64>,
        matrices: Vec<BandedMatrix>,
        rhs: Vec<Vec<f64>>,
        meta: StepMeta,
    ) -> Result<Self> {
        check_family(&matrices, &rhs)?;
        if controls.len() != matrices.len() {
            return Err(HjbError::invalid("one matrix per control is required"));
        }
        Ok(SupLinearSystem {
            controls,
            matrices,
            rhs,
            meta,
        })
    }

    pub fn size(&self) -> usize {
        self.matrices[0].size()
    }

    /// Componentwise `max_a (M_a x - q_a)`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.size()];
        for (m, q) in self.matrices.iter().zip(&self.rhs) {
            for (i, (mx, qi)) in m.matvec(x).into_iter().zip(q).enumerate() {
                out[i] = out[i].max(mx - qi);
            }
        }
        out
    }
}

/// `sup_a inf_b (M_ab X - q_ab) = 0`; indices are `[a][b]`.
#[derive(Debug, Clone)]
pub struct SupInfSystem {
    pub sup_controls: Vec<f64>,
    pub inf_controls: Vec<f64>,
    pub matrices: Vec<Vec<BandedMatrix>>,
    pub rhs: Vec<Vec<Vec<f64>>>,
    pub meta: StepMeta,
}

impl SupInfSystem {
    pub fn new(
        sup_controls: Vec<f64>,
        inf_controls: Vec<f64>,
        matrices: Vec<Vec<BandedMatrix>>,
        rhs: Vec<Vec<Vec<f64>>>,
        meta: StepMeta,
    ) -> Result<Self> {
        if sup_controls.is_empty() || inf_controls.is_empty() {
            return Err(HjbError::invalid("control list is empty"));
        }
        if matrices.len() != sup_controls.len()
            || rhs.len() != sup_controls.len()
            || matrices.iter().any(|r| r.len() != inf_controls.len())
            || rhs.iter().any(|r| r.len() != inf_controls.len())
        {
            return Err(HjbError::invalid("one matrix per control pair is required"));
        }
        let flat_m: Vec<BandedMatrix> = matrices.iter().flatten().cloned().collect();
        let flat_q: Vec<Vec<f64>> = rhs.iter().flatten().cloned().collect();
        check_family(&flat_m, &flat_q)?;
        Ok(SupInfSystem {
            sup_controls,
            inf_controls,
            matrices,
            rhs,
            meta,
        })
    }

    pub fn size(&self) -> usize {
        self.matrices[0][0].size()
    }

    /// The Isaacs system with a single minimizing control, from a sup system.
    pub fn from_sup(sys: &SupLinearSystem) -> Self {
        SupInfSystem {
            sup_controls: sys.controls.clone(),
            inf_controls: vec![f64::NAN],
            matrices: sys.matrices.iter().map(|m| vec![m.clone()]).collect(),
            rhs: sys.rhs.iter().map(|q| vec![q.clone()]).collect(),
            meta: sys.meta,
        }
    }

    /// Componentwise `max_a min_b (M_ab x - q_ab)`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![f64::NEG_INFINITY; n];
        for (ms, qs) in self.matrices.iter().zip(&self.rhs) {
            let mut inner = vec![f64::INFINITY; n];
            for (m, q) in ms.iter().zip(qs) {
                for (i, (mx, qi)) in m.matvec(x).into_iter().zip(q).enumerate() {
                    inner[i] = inner[i].min(mx - qi);
                }
            }
            for (o, v) in out.iter_mut().zip(inner) {
                *o = o.max(v);
            }
        }
        out
    }
}
