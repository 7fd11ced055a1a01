//! Bundled reference actions.

use super::ActionModel;
use crate::linalg::IntMatrix;

/// `[[2,1],[1,1]]` on `T^2`, rank one.
pub fn cat_map() -> ActionModel {
    ActionModel::from_i64("cat-map", &[vec![vec![2, 1], vec![1, 1]]]).expect("valid model")
}

/// Companion matrix of `x^3 - 3x - 1`; its eigenvalues are `2cos(π/9)`,
/// `2cos(7π/9)`, `2cos(13π/9)`.
pub fn cubic_companion() -> IntMatrix {
    IntMatrix::from_rows(&[vec![0i64, 0, 1], vec![1, 0, 3], vec![0, 1, 0]]).expect("square")
}

/// `c0 I + c1 C + c2 C^2`.
pub fn cubic_polynomial(c: [i64; 3]) -> IntMatrix {
    let m = cubic_companion();
    let m2 = m.mul(&m);
    let mut rows = vec![vec![0i64; 3]; 3];
    let (id, m1, m2) = (
        IntMatrix::identity(3).to_i64_rows().unwrap(),
        m.to_i64_rows().unwrap(),
        m2.to_i64_rows().unwrap(),
    );
    for i in 0..3 {
        for j in 0..3 {
            rows[i][j] = c[0] * id[i][j] + c[1] * m1[i][j] + c[2] * m2[i][j];
        }
    }
    IntMatrix::from_rows(&rows).unwrap()
}

/// Coefficient vectors `(c0, c1, c2)` with `Σ|c_i| <= max_l1` such that
/// `p(C)` is unimodular, has no eigenvalue `±1`, and has a Lyapunov vector
/// independent of the one of `C`. Ordered by `Σ|c_i|`, then lower degree,
/// then `(c1, c0)` descending.
pub fn cubic_partner_candidates(max_l1: i64) -> Vec<[i64; 3]> {
    let roots: Vec<f64> = [1.0, 7.0, 13.0].iter().map(|k: &f64| 2.0 * (k * std::f64::consts::PI / 9.0).cos()).collect();
    let log_c: Vec<f64> = roots.iter().map(|r| r.abs().ln()).collect();
    let mut out = Vec::new();
    for c0 in -max_l1..=max_l1 {
        for c1 in -max_l1..=max_l1 {
            for c2 in -max_l1..=max_l1 {
                let c = [c0, c1, c2];
                if c.iter().map(|x| x.abs()).sum::<i64>() > max_l1 {
                    continue;
                }
                let p = cubic_polynomial(c);
                let det = p.det();
                if det != 1.into() && det != (-1).into() {
                    continue;
                }
                // eigenvalues are real units; modulus one means ±1
                if p.sub_identity().det() == 0.into() {
                    continue;
                }
                if cubic_polynomial([c0 + 1, c1, c2]).det() == 0.into() {
                    continue;
                }
                let log_p: Vec<f64> =
                    roots.iter().map(|r| (c0 as f64 + c1 as f64 * r + c2 as f64 * r * r).abs().ln()).collect();
                let minor = |i: usize, j: usize| log_c[i] * log_p[j] - log_c[j] * log_p[i];
                if [minor(0, 1), minor(0, 2), minor(1, 2)].iter().all(|m| m.abs() < 1e-8) {
                    continue;
                }
                out.push(c);
            }
        }
    }
    out.sort_by_key(|c| {
        let l1: i64 = c.iter().map(|x| x.abs()).sum();
        let degree = if c[2] != 0 { 2 } else if c[1] != 0 { 1 } else { 0 };
        (l1, degree, -c[1], -c[0])
    });
    out
}

/// Rank-two Cartan action on `T^3`: the cubic companion `C` and the first
/// search candidate, which is `C + I`.
pub fn cubic_rank2() -> ActionModel {
    let partner = cubic_partner_candidates(3)[0];
    ActionModel::new("cubic-rank2", vec![cubic_companion(), cubic_polynomial(partner)]).expect("valid model")
}
