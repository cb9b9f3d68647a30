//! Dense symmetric positive-(semi)definite factorization for the small
//! `m × m` information matrices that logistic fitting produces.
//!
//! The matrix is first equilibrated to unit diagonal, then factored by
//! Cholesky with diagonal pivoting. A residual pivot below
//! [`RANK_TOLERANCE`] means the remaining columns lie (numerically) in the
//! span of those already factored, which is reported rather than papered
//! over with a pseudo-inverse.

pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct PivotedCholesky {
    n: usize,
    /// Lower factor of the permuted, equilibrated matrix (row-major, full storage).
    l: Vec<f64>,
    perm: Vec<usize>,
    scale: Vec<f64>,
}

/// Index (in the caller's ordering) of a column found to be dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RankDeficient(pub usize);

impl PivotedCholesky {
    pub(crate) fn factor(a: &[f64], n: usize) -> Result<Self, RankDeficient> {
        assert_eq!(a.len(), n * n);
        let mut scale = vec![0.0; n];
        for i in 0..n {
            let d = a[i * n + i];
            if !(d > 0.0) || !d.is_finite() {
                return Err(RankDeficient(i));
            }
            scale[i] = 1.0 / d.sqrt();
        }
        let mut m: Vec<f64> = (0..n * n)
            .map(|idx| a[idx] * scale[idx / n] * scale[idx % n])
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot, best) = (k..n)
                .map(|j| (j, m[j * n + j]))
                .fold((k, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
            if !(best > RANK_TOLERANCE) {
                let culprit = perm[k..].iter().copied().max().unwrap_or(k);
                return Err(RankDeficient(culprit));
            }
            if pivot != k {
                for c in 0..n {
                    m.swap(k * n + c, pivot * n + c);
                }
                for r in 0..n {
                    m.swap(r * n + k, r * n + pivot);
                }
                perm.swap(k, pivot);
            }
            let lkk = best.sqrt();
            m[k * n + k] = lkk;
            for i in k + 1..n {
                m[i * n + k] /= lkk;
            }
            for i in k + 1..n {
                let lik = m[i * n + k];
                for j in k + 1..=i {
                    let v = m[i * n + j] - lik * m[j * n + k];
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                m[i * n + j] = 0.0;
            }
        }
        Ok(PivotedCholesky {
            n,
            l: m,
            perm,
            scale,
        })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        // Solve (S A S) z = S b in permuted coordinates, then x = S z.
        let mut z: Vec<f64> = self.perm.iter().map(|&p| b[p] * self.scale[p]).collect();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.l[i * n + j] * z[j];
            }
            z[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.l[j * n + i] * z[j];
            }
            z[i] = s / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k] * self.scale[p];
        }
        x
    }

    pub(crate) fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}
