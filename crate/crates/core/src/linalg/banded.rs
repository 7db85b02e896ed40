//! Banded LU factorization with partial pivoting (LAPACK `gbtf2` layout).
//!
//! Used for the Newton steps, where the Jacobian is symmetric but
//! indefinite and can be close to singular near bifurcation points.

use super::sparse::SparseSym;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Column-major band storage with leading dimension `2 kl + ku + 1`;
    /// entry `(i, j)` lives at `j * ld + kl + ku + i - j`.
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factorizes a symmetric sparse matrix treated as a general band matrix.
    pub fn factor(matrix: &SparseSym) -> Result<Self> {
        let n = matrix.dim();
        let bw = matrix.bandwidth();
        let (kl, ku) = (bw, bw);
        let ld = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ld * n];
        for i in 0..n {
            for (j, v) in matrix.row(i) {
                ab[j * ld + kl + ku + i - j] = v;
            }
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            ab,
            pivots: vec![0; n],
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        let ld = 2 * self.kl + self.ku + 1;
        j * ld + self.kl + self.ku + i - j
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let ku_fill = self.kl + self.ku;
        let scale = self.ab.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let km = kl.min(n - 1 - k);
            let col = self.at(k, k);
            let mut p = 0;
            let mut best = self.ab[col].abs();
            for i in 1..=km {
                let v = self.ab[col + i].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.pivots[k] = k + p;
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::SingularJacobian(k));
            }
            let last = (n - 1).min(k + ku_fill);
            if p != 0 {
                for j in k..=last {
                    let a = self.at(k, j);
                    let b = self.at(k + p, j);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[col];
            for i in 1..=km {
                self.ab[col + i] /= pivot;
            }
            for j in k + 1..=last {
                let kj = self.at(k, j);
                let t = self.ab[kj];
                if t != 0.0 {
                    for i in 1..=km {
                        let l = self.ab[col + i];
                        self.ab[kj + i] -= l * t;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let km = self.kl.min(n - 1 - k);
            let col = self.at(k, k);
            let bk = b[k];
            if bk != 0.0 {
                for i in 1..=km {
                    b[k + i] -= self.ab[col + i] * bk;
                }
            }
        }
        let ku_fill = self.kl + self.ku;
        for k in (0..n).rev() {
            let col = self.at(k, k);
            b[k] /= self.ab[col];
            let bk = b[k];
            let first = k.saturating_sub(ku_fill);
            for i in first..k {
                let idx = self.at(i, k);
                b[i] -= self.ab[idx] * bk;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, bw: usize, seed: u64) -> SparseSym {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            // Indefinite diagonal forces pivoting.
            triplets.push((i, i, rng.gen_range(-1.0..1.0)));
            for j in i + 1..(i + bw + 1).min(n) {
                if rng.gen_bool(0.6) {
                    let v = rng.gen_range(-1.0..1.0);
                    triplets.push((i, j, v));
                    triplets.push((j, i, v));
                }
            }
        }
        SparseSym::from_triplets(n, &triplets, 0.0).unwrap()
    }

    #[test]
    fn solves_indefinite_band_systems() {
        for (n, bw, seed) in [(1, 0, 1), (5, 1, 2), (40, 3, 3), (200, 12, 4)] {
            let a = random_band(n, bw, seed);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.mul_vec(&x);
            let lu = BandedLu::factor(&a).unwrap();
            let y = lu.solve(&b);
            let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "n = {n}: error {err:e}");
        }
    }

    #[test]
    fn detects_singular_matrix() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)], 0.0).unwrap();
        assert!(matches!(BandedLu::factor(&a), Err(Error::SingularJacobian(_))));
    }
}
