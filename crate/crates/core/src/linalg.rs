//! Dense k×k kernels for the normal equations.

/// Dot product of two equal-length slices, accumulated left to right.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Failure of [`cholesky_in_place`]: the leading minor of order `pivot + 1`
/// is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Overwrites the lower triangle of the row-major `n×n` matrix `a` with its
/// Cholesky factor `L` (`A = L Lᵀ`). The strict upper triangle is left as is.
///
/// Pivots at or below `n · ε · max diag(A)` count as singular.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), NotPositiveDefinite> {
    debug_assert_eq!(a.len(), n * n);
    let scale = (0..n).map(|j| a[j * n + j].abs()).fold(0.0, f64::max);
    let tiny = scale * f64::EPSILON * n as f64;

    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= a[j * n + p] * a[j * n + p];
        }
        if !(d > tiny) {
            return Err(NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve_in_place(l: &[f64], n: usize, b: &mut [f64]) {
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * n + p] * b[p];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= l[p * n + i] * b[p];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves the symmetric positive-definite system `A x = b`, consuming `a`
/// as scratch and leaving `x` in `b`.
pub fn solve_spd(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<(), NotPositiveDefinite> {
    cholesky_in_place(a, n)?;
    cholesky_solve_in_place(a, n, b);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // A = [[4, 2], [2, 3]], x = [1, -2] → b = [0, -4]
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![0.0, -4.0];
        solve_spd(&mut a, 2, &mut b).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-14);
        assert!((b[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn residual_on_gram_matrices() {
        // A = MᵀM + I for a deterministic M; check ‖A x − b‖ is tiny.
        for n in 1..=12 {
            let m: Vec<f64> = (0..n * n)
                .map(|k| ((k * 7 + 3) % 11) as f64 / 5.0 - 1.0)
                .collect();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = (0..n).map(|r| m[r * n + i] * m[r * n + j]).sum::<f64>()
                        + if i == j { 1.0 } else { 0.0 };
                }
            }
            let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
            let mut x = b.clone();
            let mut scratch = a.clone();
            solve_spd(&mut scratch, n, &mut x).unwrap();
            for i in 0..n {
                let ax = dot(&a[i * n..(i + 1) * n], &x);
                assert!((ax - b[i]).abs() < 1e-10, "n={n} row {i}: {ax} vs {}", b[i]);
            }
        }
    }

    #[test]
    fn singular_detected() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0];
        let mut b = vec![1.0, 1.0];
        assert_eq!(
            solve_spd(&mut a, 2, &mut b),
            Err(NotPositiveDefinite { pivot: 1 })
        );
        let mut z = vec![0.0];
        assert!(solve_spd(&mut z, 1, &mut [0.0]).is_err());
    }
}
