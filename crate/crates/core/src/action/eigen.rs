//! Simultaneous eigen-decomposition of commuting integer matrices.

use crate::linalg::IntMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::ToPrimitive;

/// Joint eigen-data: column `i` of `vectors` is a common eigenvector and
/// `values[i][j]` its eigenvalue under generator `j`.
#[derive(Clone, Debug)]
pub struct JointEigen {
    pub values: Vec<Vec<Complex64>>,
    pub vectors: DMatrix<Complex64>,
    /// Inverse of `vectors`; its rows are eigenvectors of the transposes.
    pub dual: DMatrix<Complex64>,
    pub max_residual: f64,
}

const COMBINATIONS: [[i64; 4]; 4] = [[1, 7, 13, 29], [3, -5, 11, 17], [2, 9, -4, 23], [5, 1, 19, -7]];

fn to_complex(m: &IntMatrix) -> DMatrix<Complex64> {
    let f = m.to_f64();
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| Complex64::new(f[i][j], 0.0))
}

/// Newton refinement of a root of an integer polynomial (lowest degree first).
fn refine_root(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    for _ in 0..8 {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        z -= step;
        if step.norm() <= 1e-17 * z.norm() {
            break;
        }
    }
    z
}

/// Null vector of a nearly singular complex matrix via SVD.
fn null_vector(m: DMatrix<Complex64>) -> Option<nalgebra::DVector<Complex64>> {
    let svd = m.svd(false, true);
    let vt = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    let v = vt.row(idx).transpose().map(|z| z.conj());
    let norm = v.norm();
    Some(v / Complex64::new(norm, 0.0))
}

pub fn joint_eigen(generators: &[IntMatrix]) -> Result<JointEigen, String> {
    let n = generators.first().map_or(0, IntMatrix::rows);
    if n == 0 {
        return Err("empty action".into());
    }
    let kappa = generators.len();
    let mats: Vec<DMatrix<Complex64>> = generators.iter().map(to_complex).collect();
    let charpolys: Vec<Vec<f64>> = generators
        .iter()
        .map(|g| g.charpoly().iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect())
        .collect();
    let mut last_err = String::from("no combination tried");

    for coeffs in COMBINATIONS.iter() {
        let mut b_int = IntMatrix::zeros(n, n);
        for (j, g) in generators.iter().enumerate() {
            let c = coeffs[j % coeffs.len()] * (1 + (j / coeffs.len()) as i64);
            for r in 0..n {
                for s in 0..n {
                    b_int[(r, s)] += &g[(r, s)] * c;
                }
            }
        }
        let b_real = {
            let f = b_int.to_f64();
            DMatrix::from_fn(n, n, |i, j| f[i][j])
        };
        let betas: Vec<Complex64> = b_real.complex_eigenvalues().iter().copied().collect();
        let scale = betas.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let separated = (0..n).all(|i| (i + 1..n).all(|k| (betas[i] - betas[k]).norm() > 1e-7 * scale));
        if !separated {
            last_err = "repeated eigenvalues in the generic combination (repeated joint spectrum is not supported)".into();
            continue;
        }

        let b = to_complex(&b_int);
        let mut vectors = DMatrix::<Complex64>::zeros(n, n);
        let mut values = vec![vec![Complex64::new(0.0, 0.0); kappa]; n];
        let mut max_residual: f64 = 0.0;
        let mut ok = true;
        for (i, beta) in betas.iter().enumerate() {
            let shifted = &b - DMatrix::<Complex64>::identity(n, n) * *beta;
            let Some(v) = null_vector(shifted) else {
                ok = false;
                break;
            };
            for (j, m) in mats.iter().enumerate() {
                let mv = m * &v;
                let rq = v.adjoint() * &mv;
                let lam = refine_root(&charpolys[j], rq[(0, 0)]);
                let res = (&mv - &v * lam).norm() / (1.0 + m.norm());
                max_residual = max_residual.max(res);
                values[i][j] = lam;
            }
            vectors.set_column(i, &v);
        }
        if !ok {
            last_err = "singular value decomposition failed".into();
            continue;
        }
        if max_residual > 1e-9 {
            last_err = format!("eigenvector residual {max_residual:.3e} too large (generators may not commute)");
            continue;
        }
        let Some(dual) = vectors.clone().try_inverse() else {
            last_err = "eigenvectors are not linearly independent".into();
            continue;
        };
        return Ok(JointEigen { values, vectors, dual, max_residual });
    }
    Err(last_err)
}
