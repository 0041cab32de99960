use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::{dot, norm2};
use super::{LinalgError, Matrix};

/// Blocks whose smaller side is at most this use one-sided Jacobi; larger ones
/// use the randomized range finder.
pub const JACOBI_MAX_DIM: usize = 32;

const OVERSAMPLE: usize = 8;
const POWER_ITERS: usize = 2;
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;
/// Triplets with `σ ≤ DROP_REL · σ₁` are numerical zeros and are not returned.
const DROP_REL: f64 = 1e-13;
const TIE_REL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;

/// Truncated singular triplets `(u_i, σ_i, v_i)` of an `rows × cols` matrix.
///
/// Construction validates orthonormality of both vector families (to `1e-10`)
/// and descending order of `sigma`, so every `SvdFactors` value satisfies
/// `⟨u_i v_iᵀ, u_j v_jᵀ⟩_F = δ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    rows: usize,
    cols: usize,
    u: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    v: Vec<Vec<f64>>,
}

impl SvdFactors {
    pub fn new(
        rows: usize,
        cols: usize,
        u: Vec<Vec<f64>>,
        sigma: Vec<f64>,
        v: Vec<Vec<f64>>,
    ) -> Result<Self, LinalgError> {
        let bad = |msg: String| Err(LinalgError::InvalidFactors(msg));
        if u.len() != sigma.len() || v.len() != sigma.len() {
            return bad(format!(
                "{} left, {} values, {} right vectors",
                u.len(),
                sigma.len(),
                v.len()
            ));
        }
        if u.iter().any(|x| x.len() != rows) || v.iter().any(|x| x.len() != cols) {
            return bad("vector length does not match matrix shape".into());
        }
        let top = sigma.first().copied().unwrap_or(0.0);
        for (i, s) in sigma.iter().enumerate() {
            if !s.is_finite() || *s < 0.0 {
                return bad(format!("sigma[{i}] = {s}"));
            }
            // Tied values may be reordered by the tie-break rule.
            if i > 0 && *s > sigma[i - 1] + TIE_REL * top {
                return bad(format!("sigma not descending at {i}"));
            }
        }
        for family in [&u, &v] {
            for i in 0..family.len() {
                for j in 0..=i {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    let d = dot(&family[i], &family[j]);
                    if (d - expected).abs() > ORTHO_TOL {
                        return bad(format!("<x_{i}, x_{j}> = {d}"));
                    }
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            u,
            sigma,
            v,
        })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            u: Vec::new(),
            sigma: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.v[i]
    }

    /// The rank-one direction `Q_i = u_i v_iᵀ`.
    pub fn direction(&self, i: usize) -> Matrix {
        let (u, v) = (&self.u[i], &self.v[i]);
        Matrix::from_fn(self.rows, self.cols, |a, b| u[a] * v[b])
    }

    /// `Σ_{i in range} σ_i u_i v_iᵀ`
    pub fn reconstruct_range(&self, range: std::ops::Range<usize>) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in range {
            super::rank_one_update(&mut out, self.sigma[i], &self.u[i], &self.v[i])
                .expect("factor shapes are validated on construction");
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_range(0..self.rank())
    }

    pub fn truncate(&mut self, k: usize) {
        self.u.truncate(k);
        self.sigma.truncate(k);
        self.v.truncate(k);
    }
}

/// Top-`k` singular triplets of `g`.
///
/// Numerically zero singular values (below `1e-13 σ₁`) are omitted, so the
/// returned rank can be smaller than `k`. Factors are deterministic: each
/// `u_i` has its largest-magnitude entry positive, and tied singular values
/// are ordered lexicographically by `u_i`.
pub fn thin_svd(g: &Matrix, k: usize) -> Result<SvdFactors, LinalgError> {
    if k > g.min_dim() {
        return Err(LinalgError::InvalidArgument(format!(
            "thin_svd: k = {k} exceeds min dimension {}",
            g.min_dim()
        )));
    }
    if !g.is_finite() {
        return Err(LinalgError::NonFinite("thin_svd"));
    }
    if k == 0 || g.is_zero() {
        return Ok(SvdFactors::empty(g.rows(), g.cols()));
    }
    if g.min_dim() <= JACOBI_MAX_DIM {
        let mut f = jacobi_svd(g)?;
        f.truncate(k);
        Ok(f)
    } else {
        randomized_svd(g, k, OVERSAMPLE, POWER_ITERS)
    }
}

/// Full thin SVD by one-sided (Hestenes) Jacobi on the smaller Gram side.
pub fn jacobi_svd(g: &Matrix) -> Result<SvdFactors, LinalgError> {
    if !g.is_finite() {
        return Err(LinalgError::NonFinite("jacobi_svd"));
    }
    let (rows, cols) = g.shape();
    let tall = rows >= cols;
    // Orthogonalize the columns of the tall orientation.
    let work = if tall { g.clone() } else { g.transpose() };
    let n = work.cols();
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| work.col(j)).collect();
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut w, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|c| norm2(c)).collect();
    let top = norms.iter().copied().fold(0.0, f64::max);
    let mut triplets = Vec::new();
    if top > 0.0 {
        for j in 0..n {
            let s = norms[j];
            if s <= DROP_REL * top {
                continue;
            }
            let normalized: Vec<f64> = a[j].iter().map(|x| x / s).collect();
            let (u, v) = if tall {
                (normalized, w[j].clone())
            } else {
                (w[j].clone(), normalized)
            };
            triplets.push(Triplet { sigma: s, u, v });
        }
    }
    debug_assert!(triplets.iter().all(|t| t.u.len() == rows && t.v.len() == cols));
    finish(rows, cols, triplets)
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Randomized range finder (Gaussian test matrix, `power_iters` subspace
/// iterations) followed by a dense Jacobi SVD of the projected block.
///
/// The test matrix comes from a ChaCha8 stream seeded by the matrix shape, so
/// repeated calls on the same input give identical factors.
pub fn randomized_svd(g: &Matrix, k: usize, oversample: usize, power_iters: usize) -> Result<SvdFactors, LinalgError> {
    if k > g.min_dim() {
        return Err(LinalgError::InvalidArgument(format!(
            "randomized_svd: k = {k} exceeds min dimension {}",
            g.min_dim()
        )));
    }
    if !g.is_finite() {
        return Err(LinalgError::NonFinite("randomized_svd"));
    }
    let (rows, cols) = g.shape();
    if k == 0 || g.is_zero() {
        return Ok(SvdFactors::empty(rows, cols));
    }
    let width = (k + oversample).min(g.min_dim());
    let seed = 0x5eed_0000_0000_0000u64 ^ ((rows as u64) << 32) ^ cols as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Matrix::from_fn(cols, width, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_columns(&g.matmul(&omega)?);
    for _ in 0..power_iters {
        let z = orthonormal_columns(&g.t_matmul(&q)?);
        q = orthonormal_columns(&g.matmul(&z)?);
    }
    // B = Qᵀ G is small: width × cols.
    let b = q.t_matmul(g)?;
    let small = jacobi_svd(&b)?;
    let mut triplets = Vec::with_capacity(small.rank());
    for i in 0..small.rank() {
        let ub = small.u(i);
        let u: Vec<f64> = (0..rows).map(|r| dot(q.row(r), ub)).collect();
        triplets.push(Triplet {
            sigma: small.sigma()[i],
            u,
            v: small.v(i).to_vec(),
        });
    }
    let mut f = finish(rows, cols, triplets)?;
    f.truncate(k);
    Ok(f)
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Columns that
/// collapse to numerical zero are dropped.
fn orthonormal_columns(y: &Matrix) -> Matrix {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(y.cols());
    let scale = (0..y.cols()).map(|j| norm2(&y.col(j))).fold(0.0, f64::max);
    for j in 0..y.cols() {
        let mut c = y.col(j);
        for _ in 0..2 {
            for q in &basis {
                let p = dot(q, &c);
                for (x, qi) in c.iter_mut().zip(q) {
                    *x -= p * qi;
                }
            }
        }
        let nrm = norm2(&c);
        if nrm > 1e-12 * scale && nrm > 0.0 {
            c.iter_mut().for_each(|x| *x /= nrm);
            basis.push(c);
        }
    }
    Matrix::from_fn(y.rows(), basis.len(), |i, j| basis[j][i])
}

struct Triplet {
    sigma: f64,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Applies the sign convention and deterministic ordering, then validates.
fn finish(rows: usize, cols: usize, mut triplets: Vec<Triplet>) -> Result<SvdFactors, LinalgError> {
    for t in &mut triplets {
        let pivot =
            t.u.iter()
                .enumerate()
                .fold(
                    (0, 0.0f64),
                    |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best },
                )
                .0;
        if t.u[pivot] < 0.0 {
            t.u.iter_mut().for_each(|x| *x = -*x);
            t.v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    triplets.sort_by(|a, b| b.sigma.total_cmp(&a.sigma));
    let top = triplets.first().map_or(0.0, |t| t.sigma);
    let mut start = 0;
    while start < triplets.len() {
        let mut end = start + 1;
        while end < triplets.len() && triplets[start].sigma - triplets[end].sigma <= TIE_REL * top {
            end += 1;
        }
        if end - start > 1 {
            triplets[start..end].sort_by(|a, b| lexicographic(&a.u, &b.u));
        }
        start = end;
    }
    let mut u = Vec::with_capacity(triplets.len());
    let mut sigma = Vec::with_capacity(triplets.len());
    let mut v = Vec::with_capacity(triplets.len());
    for t in triplets {
        u.push(t.u);
        sigma.push(t.sigma);
        v.push(t.v);
    }
    SvdFactors::new(rows, cols, u, sigma, v)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let g = Matrix::from_diag(&[3.0, 1.0]);
        let f = thin_svd(&g, 2).unwrap();
        assert_eq!(f.sigma(), &[3.0, 1.0]);
        assert_eq!(f.u(0), &[1.0, 0.0]);
        assert_eq!(f.v(1), &[0.0, 1.0]);
    }

    #[test]
    fn zero_matrix_has_no_triplets() {
        let f = thin_svd(&Matrix::zeros(4, 3), 2).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.shape(), (4, 3));
    }

    #[test]
    fn k_zero_is_empty_and_k_too_large_errors() {
        let g = Matrix::identity(3);
        assert_eq!(thin_svd(&g, 0).unwrap().rank(), 0);
        assert!(matches!(thin_svd(&g, 4), Err(LinalgError::InvalidArgument(_))));
    }

    #[test]
    fn sign_convention_forces_positive_pivot() {
        let g = Matrix::from_rows(&[&[-2.0, 0.0], &[0.0, -1.0]]).unwrap();
        let f = thin_svd(&g, 2).unwrap();
        assert_eq!(f.u(0), &[1.0, 0.0]);
        assert_eq!(f.v(0), &[-1.0, 0.0]);
        assert!(f.reconstruct().max_abs_diff(&g).unwrap() < 1e-15);
    }

    #[test]
    fn ties_are_ordered_by_left_vector() {
        // Identity: every σ ties; u_i must come out in lexicographic order.
        let f = thin_svd(&Matrix::identity(3), 3).unwrap();
        for i in 0..2 {
            assert_eq!(lexicographic(f.u(i), f.u(i + 1)), Ordering::Less);
        }
    }

    #[test]
    fn invalid_factors_rejected() {
        let err = SvdFactors::new(
            2,
            2,
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![2.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        assert!(err.is_err());
        let err = SvdFactors::new(
            2,
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 2.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut g = Matrix::identity(2);
        g.set(0, 1, f64::NAN);
        assert!(matches!(thin_svd(&g, 1), Err(LinalgError::NonFinite(_))));
    }
}
