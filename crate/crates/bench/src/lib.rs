//! Deterministic fixtures shared by the benchmarks.

use specmuon_core::linalg::Matrix;
use specmuon_core::optimizers::ParamBlock;

/// Dense, well-spread matrix whose entries depend only on the shape and `salt`.
pub fn fixture_matrix(rows: usize, cols: usize, salt: u64) -> Matrix {
    let s = salt as f64 * 0.618_033_988_75;
    Matrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * 0.754_877_666 + s).sin())
}

/// One parameter block with a fixture value and gradient.
pub fn fixture_block(rows: usize, cols: usize) -> ParamBlock {
    ParamBlock::new("w", fixture_matrix(rows, cols, 1), fixture_matrix(rows, cols, 2)).expect("fixture shapes agree")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_reproducible() {
        assert_eq!(fixture_matrix(4, 3, 7), fixture_matrix(4, 3, 7));
        assert_ne!(fixture_matrix(4, 3, 7), fixture_matrix(4, 3, 8));
    }
}
