//! Randomized comparison of the sup solver against brute-force enumeration
//! of control choices, driven by `--seed`.

use hjb_bdf2::fd_ops::{BandLu, BandedMatrix, StepMeta, SupLinearSystem};
use hjb_bdf2::sup_solver::{certificate, solve_sup, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn random_system(rng: &mut ChaCha8Rng) -> SupLinearSystem {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=3);
    let mut matrices = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let mut a = BandedMatrix::penta(n);
        for i in 0..n {
            let mut off = 0.0;
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                if j != i {
                    let v = rng.gen_range(-1.0..1.0);
                    a.set(i, j, v);
                    off += f64::abs(v);
                }
            }
            a.set(i, i, off + rng.gen_range(0.1..2.0));
        }
        matrices.push(a);
        rhs.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let meta = StepMeta {
        t: 0.0,
        tau: 1.0,
        h: 1.0,
        hy: None,
    };
    SupLinearSystem::new((0..m).map(|a| a as f64).collect(), matrices, rhs, meta)
        .expect("consistent random system")
}

/// The fixed point of `max_a (M_a x - q_a) = 0` among the `m^n` policy
/// solutions: the one with zero sup-residual.
fn brute_force(sys: &SupLinearSystem) -> Option<Vec<f64>> {
    let (n, m) = (sys.size(), sys.matrices.len());
    let mut pick = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let rows: Vec<&BandedMatrix> = sys.matrices.iter().collect();
        let mat = BandedMatrix::from_row_choice(&rows, &pick);
        let q: Vec<f64> = (0..n).map(|i| sys.rhs[pick[i]][i]).collect();
        if let Ok(lu) = BandLu::factor(&mat) {
            let x = lu.solve(&q);
            let r = sys.residual(&x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                best = Some((r, x));
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best.map(|(_, x)| x);
            }
            pick[i] += 1;
            if pick[i] < m {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

pub fn run(seed: u64, count: usize) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions::default();
    let (mut max_dev, mut contraction_ok, mut failures) = (0.0f64, true, 0usize);
    for _ in 0..count {
        let sys = random_system(&mut rng);
        let cert = certificate(&sys).expect("diagonally dominant by construction");
        match (solve_sup(&sys, &opts), brute_force(&sys)) {
            (Ok((x, stats)), Some(oracle)) => {
                let dev = x
                    .iter()
                    .zip(&oracle)
                    .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
                max_dev = max_dev.max(dev);
                contraction_ok &= stats.contraction_estimate <= cert.ratio + 1e-12;
            }
            _ => failures += 1,
        }
    }
    json!({
        "seed": seed,
        "systems": count,
        "max_deviation": max_dev,
        "contraction_within_certificate": contraction_ok,
        "failures": failures,
        "passed": failures == 0 && contraction_ok && max_dev <= 1e-9,
    })
}
