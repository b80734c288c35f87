//! Banded linear algebra for the assembled saddle-point systems.
//!
//! Storage follows the LAPACK general-band layout with room for the fill-in
//! produced by partial pivoting: an `n × n` matrix with `kl` sub- and `ku`
//! super-diagonals occupies `ldab = 2·kl + ku + 1` rows per column, entry
//! `(r, c)` living at `ab[(kl + ku + r − c) + c·ldab]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::fem::{DofMap, Mesh};
use crate::{Error, Result};

/// General band matrix with LU fill-in space.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    /// Zero `n × n` matrix with the given band widths.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    /// Order.
    pub fn n(&self) -> usize {
        self.n
    }
    /// Sub-diagonals.
    pub fn kl(&self) -> usize {
        self.kl
    }
    /// Super-diagonals.
    pub fn ku(&self) -> usize {
        self.ku
    }
    /// Raw band storage (column major, `ldab` rows per column).
    pub fn storage(&self) -> &[f64] {
        &self.ab
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        self.kl + self.ku + r - c + c * self.ldab
    }

    /// Whether `(r, c)` lies inside the band.
    #[inline]
    pub fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && r + self.ku >= c && c + self.kl >= r
    }

    /// Entry `(r, c)` (zero outside the band).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.ab[self.idx(r, c)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(r, c)`.
    ///
    /// # Panics
    /// If `(r, c)` lies outside the band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band kl={} ku={}", self.kl, self.ku);
        let i = self.idx(r, c);
        self.ab[i] += v;
    }

    /// Resets all entries to zero.
    pub fn clear(&mut self) {
        self.ab.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            let r0 = c.saturating_sub(self.ku);
            let r1 = (c + self.kl + 1).min(self.n);
            for r in r0..r1 {
                y[r] += self.ab[self.idx(r, c)] * x[c];
            }
        }
        y
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.ab.iter().fold(0.0, |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// Largest `|A − Aᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for c in 0..self.n {
            for r in c.saturating_sub(self.ku)..(c + self.kl + 1).min(self.n) {
                let d = (self.get(r, c) - self.get(c, r)).abs();
                if d > m {
                    m = d;
                }
            }
        }
        m
    }

    /// Symmetric equilibration `A ← S A S` (Ruiz iterations) so that every
    /// row and column has largest entry close to one; returns `S`.
    ///
    /// The coupled systems mix blocks whose magnitudes differ by twenty or
    /// more orders of magnitude, which would defeat any pivot threshold
    /// relative to the global maximum.
    fn equilibrate(&mut self) -> Vec<f64> {
        let n = self.n;
        let mut s = vec![1.0; n];
        let mut m = vec![0.0f64; n];
        for _ in 0..6 {
            m.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..n {
                for r in c.saturating_sub(self.ku)..(c + self.kl + 1).min(n) {
                    let v = self.ab[self.idx(r, c)].abs();
                    if v > m[r] {
                        m[r] = v;
                    }
                    if v > m[c] {
                        m[c] = v;
                    }
                }
            }
            let f: Vec<f64> = m.iter().map(|&v| if v > 0.0 { 1.0 / crate::math::sqrt(v) } else { 1.0 }).collect();
            for c in 0..n {
                for r in c.saturating_sub(self.ku)..(c + self.kl + 1).min(n) {
                    let i = self.idx(r, c);
                    self.ab[i] *= f[r] * f[c];
                }
            }
            for i in 0..n {
                s[i] *= f[i];
            }
        }
        s
    }

    /// LU factorization with partial pivoting (unblocked band algorithm),
    /// applied after symmetric equilibration.
    pub fn factorize(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let ldab = self.ldab;
        if !self.ab.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("system matrix"));
        }
        let scaling = self.equilibrate();
        let tiny = self.max_abs() * 1e-15;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            // clear fill-in space of the column entering the active window
            if j + kv < n {
                let c = j + kv;
                for i in 0..kl {
                    self.ab[i + c * ldab] = 0.0;
                }
            }
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = self.ab[col].abs();
            for i in 1..=km {
                let v = self.ab[col + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if !(best > tiny) {
                return Err(Error::SingularSystem { equation: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j + jp, c);
                    let b = self.idx(j, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.ab[col];
                for i in 1..=km {
                    self.ab[col + i] *= inv;
                }
                for c in j + 1..=ju {
                    let ujc = self.ab[self.idx(j, c)];
                    if ujc != 0.0 {
                        let base = self.idx(j, c);
                        for i in 1..=km {
                            let l = self.ab[col + i];
                            self.ab[base + i] -= l * ujc;
                        }
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv, scaling })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
    scaling: Vec<f64>,
}

impl BandLu {
    /// Order.
    pub fn n(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        for (v, s) in b.iter_mut().zip(&self.scaling) {
            *v *= s;
        }
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = m.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                let col = j * m.ldab + kv;
                for i in 1..=km {
                    b[j + i] -= m.ab[col + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * m.ldab + kv;
            b[j] /= m.ab[col];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= m.ab[m.idx(i, j)] * bj;
                }
            }
        }
        for (v, s) in b.iter_mut().zip(&self.scaling) {
            *v *= s;
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Half-bandwidth of the system numbered by `dofs`: the largest equation
/// distance between two free dofs sharing an element.
pub fn half_bandwidth(mesh: &Mesh, dofs: &DofMap) -> usize {
    let mut el = Vec::new();
    let mut bw = 0;
    for e in 0..mesh.num_elements() {
        dofs.element_dofs(mesh, e, &mut el);
        let (mut lo, mut hi) = (usize::MAX, 0);
        for &g in &el {
            if let Some(q) = dofs.equation(g) {
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        if hi >= lo && lo != usize::MAX {
            bw = bw.max(hi - lo);
        }
    }
    bw
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| r.iter().copied().chain([bi]).collect()).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    fn random_band(
        n: usize,
        kl: usize,
        ku: usize,
        zero_diag: bool,
        rng: &mut ChaCha8Rng,
    ) -> (BandMatrix, Vec<Vec<f64>>) {
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut d = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in 0..n {
                if a.in_band(r, c) && !(zero_diag && r == c) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    a.add(r, c, v);
                    d[r][c] = v;
                }
            }
        }
        (a, d)
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (12, 3, 2), (30, 5, 7), (40, 0, 4), (40, 6, 0)] {
            let (a, d) = random_band(n, kl, ku, false, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = a.clone().factorize().unwrap().solve(&b);
            let xd = dense_solve(&d, &b);
            // random matrices can be moderately ill-conditioned; the two
            // eliminations pivot differently, so compare residuals tightly
            // and solutions loosely
            for (u, v) in x.iter().zip(&xd) {
                assert!((u - v).abs() < 1e-7 * (1.0 + v.abs()), "{u} vs {v}");
            }
            let r = a.mul_vec(&x);
            let xmax = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                assert!((r[i] - b[i]).abs() < 1e-13 * (kl + ku + 1) as f64 * xmax, "{n} {kl} {ku}: {}", r[i] - b[i]);
            }
        }
    }

    #[test]
    fn zero_diagonal_saddle_requires_pivoting() {
        // [[0, 1], [1, 0]] needs a row swap
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        let x = a.factorize().unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_detected() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        assert!(matches!(a.factorize(), Err(Error::SingularSystem { equation: 2 })));
    }

    #[test]
    fn badly_scaled_blocks_solve() {
        // saddle-like system with blocks of 1e11 and 1e-13 magnitude
        let n = 6;
        let mut a = BandMatrix::zeros(n, 2, 2);
        let mut d = vec![vec![0.0; n]; n];
        let vals = [
            (0, 0, 2e11),
            (1, 1, 3e11),
            (0, 1, 1e11),
            (2, 2, 4e-13),
            (3, 3, 5e-13),
            (2, 3, -1e-13),
            (0, 2, 1.0),
            (1, 3, 2.0),
            (4, 4, -1e11),
            (5, 5, 1e-12),
            (4, 5, 1.0),
            (3, 4, 0.5),
            (3, 5, 1e-13),
        ];
        for &(r, c, v) in &vals {
            a.add(r, c, v);
            d[r][c] += v;
            if r != c {
                a.add(c, r, v);
                d[c][r] += v;
            }
        }
        let b = [1.0, -2.0, 3e-3, 1e-4, 5.0, 1e-2];
        let x = a.clone().factorize().unwrap().solve(&b);
        let xd = dense_solve(&d, &b);
        for (u, v) in x.iter().zip(&xd) {
            assert!((u - v).abs() < 1e-9 * v.abs().max(1e-300), "{u} vs {v}");
        }
    }

    #[test]
    #[should_panic]
    fn add_outside_band_panics() {
        BandMatrix::zeros(4, 1, 1).add(0, 3, 1.0);
    }

    proptest! {
        #[test]
        fn residual_small(seed in 0u64..500, n in 1usize..40, kl in 0usize..6, ku in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut a, _) = random_band(n, kl, ku, true, &mut rng);
            // diagonally dominant shift keeps the system well conditioned
            for i in 0..n { a.add(i, i, 4.0 + (kl + ku) as f64); }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = a.clone().factorize().unwrap().solve(&b);
            let r = a.mul_vec(&x);
            for i in 0..n { prop_assert!((r[i] - b[i]).abs() < 1e-12); }
        }
    }
}
