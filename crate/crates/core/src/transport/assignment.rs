use ndarray::Array2;

use crate::error::{domain, Result};

/// Minimum-cost perfect matching of a square cost matrix by the
/// shortest-augmenting-path Hungarian method, `O(n³)`. Returns the column
/// assigned to each row.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n != m {
        return domain(format!("assignment needs a square matrix, got {n} x {m}"));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return domain("non-finite cost entry");
    }
    // 1-based potentials and matching, column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    Ok(assign)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(c: &Array2<f64>) -> f64 {
        fn rec(c: &Array2<f64>, i: usize, used: &mut Vec<bool>) -> f64 {
            let n = c.nrows();
            if i == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    best = best.min(c[(i, j)] + rec(c, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(c, 0, &mut vec![false; c.nrows()])
    }

    #[test]
    fn matches_brute_force() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in 1..=7 {
            let c = Array2::from_shape_fn((n, n), |_| next() * 10.0 - 3.0);
            let a = hungarian(&c).unwrap();
            let mut seen = a.clone();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let total: f64 = a.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
            assert!((total - brute(&c)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hungarian(&Array2::zeros((2, 3))).is_err());
        assert!(hungarian(&Array2::from_elem((2, 2), f64::NAN)).is_err());
    }
}
