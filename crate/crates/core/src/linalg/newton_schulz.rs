use super::{frobenius_norm, thin_svd, LinalgError, Matrix};

pub const DEFAULT_NS_ITERS: usize = 5;

/// Cubic Newton–Schulz iteration `X ← 1.5 X − 0.5 X Xᵀ X`.
///
/// Singular vectors are preserved and each singular value follows the scalar
/// map `s ← 1.5 s − 0.5 s³`, which converges to 1 for `s ∈ (0, √3)`. Inputs
/// with spectral norm at or above `√3` are rejected; the spectral norm is only
/// computed when the Frobenius bound is inconclusive.
pub fn newton_schulz_orthogonalize(x: &Matrix, iters: usize) -> Result<Matrix, LinalgError> {
    if !x.is_finite() {
        return Err(LinalgError::NonFinite("newton_schulz_orthogonalize"));
    }
    let limit = 3f64.sqrt();
    if frobenius_norm(x) >= limit {
        let top = thin_svd(x, 1)?.sigma().first().copied().unwrap_or(0.0);
        if top >= limit {
            return Err(LinalgError::Stability(top));
        }
    }
    let mut cur = x.clone();
    let wide = x.rows() <= x.cols();
    for _ in 0..iters {
        // Use the smaller Gram matrix.
        let cubic = if wide {
            cur.matmul_t(&cur)?.matmul(&cur)?
        } else {
            cur.matmul(&cur.t_matmul(&cur)?)?
        };
        let mut next = cur.scale(1.5);
        next.axpy(-0.5, &cubic)?;
        cur = next;
    }
    Ok(cur)
}
