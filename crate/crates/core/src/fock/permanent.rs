use num_complex::Complex64;

use super::{ComplexMatrix, FockError};

/// Matrix permanent by Ryser's inclusion-exclusion formula, visiting column
/// subsets in Gray-code order so each step updates the row sums in O(n).
///
/// The empty matrix has permanent 1.
pub fn permanent(matrix: &ComplexMatrix) -> Result<Complex64, FockError> {
    if !matrix.is_square() {
        return Err(FockError::NotSquare { rows: matrix.rows(), cols: matrix.cols() });
    }
    Ok(ryser(matrix))
}

pub(crate) fn ryser(a: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    assert!(n < 64, "permanent of a {n}x{n} matrix is out of reach");
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut in_subset = vec![false; n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut subset_size = 0usize;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        let add = !in_subset[col];
        in_subset[col] = add;
        if add {
            subset_size += 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a[(i, col)];
            }
        } else {
            subset_size -= 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a[(i, col)];
            }
        }
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |p, &s| p * s);
        if subset_size.is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Sum over all permutations; independent of the Ryser path.
    fn naive_permanent(a: &ComplexMatrix) -> Complex64 {
        fn rec(a: &ComplexMatrix, row: usize, used: &mut Vec<bool>) -> Complex64 {
            if row == a.rows() {
                return Complex64::new(1.0, 0.0);
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..a.cols() {
                if !used[j] {
                    used[j] = true;
                    acc += a[(row, j)] * rec(a, row + 1, used);
                    used[j] = false;
                }
            }
            acc
        }
        rec(a, 0, &mut vec![false; a.cols()])
    }

    fn random_matrix(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        ComplexMatrix::from_rows(
            (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn small_known_values() {
        assert_eq!(permanent(&ComplexMatrix::identity(2)).unwrap(), Complex64::new(1.0, 0.0));
        let ones = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(permanent(&ones).unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(permanent(&ComplexMatrix::zeros(0, 0)).unwrap(), Complex64::new(1.0, 0.0));
        let single = ComplexMatrix::from_real_rows(&[&[-3.5]]);
        assert_eq!(permanent(&single).unwrap(), Complex64::new(-3.5, 0.0));
        // all-ones n x n has permanent n!
        let ones4 = ComplexMatrix::from_real_rows(&[&[1.0; 4], &[1.0; 4], &[1.0; 4], &[1.0; 4]]);
        assert!((permanent(&ones4).unwrap() - Complex64::new(24.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(permanent(&m), Err(FockError::NotSquare { rows: 2, cols: 3 })));
    }

    #[test]
    fn matches_permutation_sum_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(5, &mut rng);
        let fast = permanent(&m).unwrap();
        let slow = naive_permanent(&m);
        assert!((fast - slow).norm() <= 1e-9 * slow.norm().max(1e-300));
    }

    #[test]
    fn matches_permutation_sum_up_to_6x6() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..60 {
            let n = trial % 7;
            let m = random_matrix(n, &mut rng);
            let fast = permanent(&m).unwrap();
            let slow = naive_permanent(&m);
            let rel = (fast - slow).norm() / slow.norm().max(1e-300);
            assert!(rel < 1e-9, "n={n} rel={rel}");
        }
    }
}
