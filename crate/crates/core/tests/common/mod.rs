//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use kecor::linalg::DenseMatrix;
use kecor::proxy::ProxyNetwork;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(rows, cols, normal_vec(rng, rows * cols)).unwrap()
}

/// `B Bᵀ` with `B` of shape `n × rank`, symmetrized exactly.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DenseMatrix {
    let b = random_matrix(rng, n, rank);
    let g = b.gram_rows();
    DenseMatrix::from_fn(n, n, |i, j| if i <= j { g.get(i, j) } else { g.get(j, i) }).unwrap()
}

pub fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
}

pub fn eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    SymmetricEigen::new(to_nalgebra(m))
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// `Σ ln(1 + c λᵢ)` over the eigenvalues of `k`.
pub fn eig_logdet_eye_plus(c: f64, k: &DenseMatrix) -> f64 {
    eigenvalues(k).iter().map(|l| (c * l).ln_1p()).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// `½ log det(I + c K_S)` by eigendecomposition of the principal submatrix.
pub fn set_objective(k: &DenseMatrix, c: f64, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    0.5 * eig_logdet_eye_plus(c, &k.principal(subset).unwrap())
}

/// All subsets of `0..n` with exactly `size` elements, in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Central finite differences of every network output with respect to the
/// parameters in `range` (flat parameter order). Column `k` of the result is
/// the gradient of output `k`.
pub fn fd_jacobian(
    net: &ProxyNetwork,
    m: &[f64],
    range: std::ops::Range<usize>,
    h: f64,
) -> Vec<Vec<f64>> {
    let base = net.params();
    let mut probe = net.clone();
    let outputs = net.output_dim();
    let mut cols = vec![Vec::with_capacity(range.len()); outputs];
    for p in range {
        let mut plus = base.clone();
        plus[p] += h;
        probe.set_params(&plus).unwrap();
        let up = probe.predict(m).unwrap();
        let mut minus = base.clone();
        minus[p] -= h;
        probe.set_params(&minus).unwrap();
        let down = probe.predict(m).unwrap();
        for k in 0..outputs {
            cols[k].push((up[k] - down[k]) / (2.0 * h));
        }
    }
    cols
}

/// `Σ_k ⟨gᵢₖ, gⱼₖ⟩` for per-output gradient columns.
pub fn gradient_inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

/// Frobenius inner product of the parameter Jacobians.
pub fn jacobian_ntk(net: &ProxyNetwork, a: &[f64], b: &[f64]) -> f64 {
    let ja = net.param_jacobian(a).unwrap();
    let jb = net.param_jacobian(b).unwrap();
    ja.data().iter().zip(jb.data()).map(|(x, y)| x * y).sum()
}

/// Flat parameter range of the final layer.
pub fn last_layer_range(net: &ProxyNetwork) -> std::ops::Range<usize> {
    let last = net.layers().last().unwrap();
    let count = last.weight.rows() * last.weight.cols() + last.bias.len();
    net.num_params() - count..net.num_params()
}
