//! Symmetric tensors in Kelvin (Mandel) notation and SPD factorizations.
//!
//! A symmetric second-order tensor in `d` dimensions has `n = d(d+1)/2`
//! independent components, stored in the order `11, 22, (33,) 12 (, 23, 13)`.
//! Its Kelvin vector scales the shear entries by `√2`, which makes the
//! Euclidean dot product of two Kelvin vectors equal to the double
//! contraction `a : b`. Fourth-order tensors with minor and major symmetry
//! are stored as the corresponding symmetric `n × n` Kelvin matrix.

use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::math;
use crate::{Error, Result};

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Relative eigenvalue floor below which a matrix is treated as singular.
pub const DEFINITENESS_TOLERANCE: f64 = 1e-12;

/// Spatial dimension of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dim {
    /// Plane (plane-strain) problems.
    Two,
    /// Full three-dimensional problems.
    Three,
}

impl Dim {
    /// Number of spatial coordinates (2 or 3).
    #[inline]
    pub const fn d(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of independent symmetric-tensor components (3 or 6).
    #[inline]
    pub const fn n(self) -> usize {
        match self {
            Dim::Two => 3,
            Dim::Three => 6,
        }
    }

    /// Dimension from a coordinate count.
    pub fn from_d(d: usize) -> Result<Dim> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(Error::shape(alloc::format!("spatial dimension must be 2 or 3, got {d}"))),
        }
    }

    /// Dimension from a symmetric-tensor component count.
    pub fn from_n(n: usize) -> Result<Dim> {
        match n {
            3 => Ok(Dim::Two),
            6 => Ok(Dim::Three),
            _ => Err(Error::shape(alloc::format!("Kelvin vector length must be 3 or 6, got {n}"))),
        }
    }

    /// `(i, j)` index pair of component `k` in storage order.
    #[inline]
    pub fn pair(self, k: usize) -> (usize, usize) {
        match self {
            Dim::Two => [(0, 0), (1, 1), (0, 1)][k],
            Dim::Three => [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)][k],
        }
    }

    /// Storage index of the `(i, j)` (or `(j, i)`) component.
    #[inline]
    pub fn index(self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (self, i, j) {
            (_, 0, 0) => 0,
            (_, 1, 1) => 1,
            (Dim::Two, 0, 1) => 2,
            (Dim::Three, 2, 2) => 2,
            (Dim::Three, 0, 1) => 3,
            (Dim::Three, 1, 2) => 4,
            (Dim::Three, 0, 2) => 5,
            _ => panic!("index ({i},{j}) out of range for {self:?}"),
        }
    }

    /// Kelvin weight of storage component `k`: 1 for normal, √2 for shear.
    #[inline]
    pub fn kelvin_weight(self, k: usize) -> f64 {
        if k < self.d() {
            1.0
        } else {
            SQRT2
        }
    }
}

// ---------------------------------------------------------------------------
// Small fixed-capacity vectors and matrices
// ---------------------------------------------------------------------------

/// A vector of at most six entries with a runtime length.
///
/// Used for Kelvin vectors (length 3 or 6) and spatial vectors (2 or 3).
#[derive(Clone, Copy, PartialEq)]
pub struct SmallVec {
    len: usize,
    v: [f64; 6],
}

impl SmallVec {
    /// Zero vector of length `len` (≤ 6).
    pub fn zeros(len: usize) -> Self {
        assert!(len <= 6, "SmallVec holds at most 6 entries");
        SmallVec { len, v: [0.0; 6] }
    }

    /// Copies a slice (length ≤ 6).
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut out = Self::zeros(xs.len());
        out.v[..xs.len()].copy_from_slice(xs);
        out
    }

    /// Number of entries.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// `true` when the vector has no entries.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Entries as a slice.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.v[..self.len]
    }

    /// Mutable entries.
    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.v[..self.len]
    }

    /// Euclidean dot product.
    pub fn dot(&self, other: &SmallVec) -> f64 {
        debug_assert_eq!(self.len, other.len);
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        math::sqrt(self.dot(self))
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        for x in self.as_mut_slice() {
            *x *= s;
        }
        self
    }
}

impl Index<usize> for SmallVec {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for SmallVec {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for SmallVec {
    type Output = SmallVec;
    fn add(mut self, rhs: SmallVec) -> SmallVec {
        debug_assert_eq!(self.len, rhs.len);
        for i in 0..self.len {
            self.v[i] += rhs.v[i];
        }
        self
    }
}

impl Sub for SmallVec {
    type Output = SmallVec;
    fn sub(mut self, rhs: SmallVec) -> SmallVec {
        debug_assert_eq!(self.len, rhs.len);
        for i in 0..self.len {
            self.v[i] -= rhs.v[i];
        }
        self
    }
}

impl Neg for SmallVec {
    type Output = SmallVec;
    fn neg(self) -> SmallVec {
        self.scaled(-1.0)
    }
}

impl fmt::Debug for SmallVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// A square matrix of order at most six with a runtime order.
#[derive(Clone, Copy, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: [[f64; 6]; 6],
}

impl SmallMat {
    /// Zero matrix of order `n` (≤ 6).
    pub fn zeros(n: usize) -> Self {
        assert!(n <= 6, "SmallMat holds at most 6x6 entries");
        SmallMat { n, a: [[0.0; 6]; 6] }
    }

    /// Identity of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    /// Diagonal matrix.
    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i][i] = x;
        }
        m
    }

    /// Scaled identity `s·I`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::identity(n);
        for i in 0..n {
            m.a[i][i] = s;
        }
        m
    }

    /// Builds a matrix from row slices (all of length `rows.len()`).
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if n > 6 {
            return Err(Error::shape("matrix order exceeds 6"));
        }
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::shape(alloc::format!("row {i} has {} entries, expected {n}", r.len())));
            }
            m.a[i][..n].copy_from_slice(r);
        }
        Ok(m)
    }

    /// Builds a matrix from a row-major flat slice of length `n²`.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if n > 6 || data.len() != n * n {
            return Err(Error::shape(alloc::format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][..n].copy_from_slice(&data[i * n..(i + 1) * n]);
        }
        Ok(m)
    }

    /// Matrix order.
    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        self.a[i][j]
    }

    /// Sets entry `(i, j)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.a[i][j] = v;
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i][..self.n]
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> alloc::vec::Vec<f64> {
        (0..self.n).flat_map(|i| self.row(i).iter().copied()).collect()
    }

    /// Transpose.
    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.a[j][i] = self.a[i][j];
            }
        }
        t
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, x: &SmallVec) -> SmallVec {
        debug_assert_eq!(self.n, x.len());
        let mut y = SmallVec::zeros(self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for j in 0..self.n {
                s += self.a[i][j] * x.v[j];
            }
            y.v[i] = s;
        }
        y
    }

    /// Transposed matrix–vector product `Aᵀx`.
    pub fn tr_mul_vec(&self, x: &SmallVec) -> SmallVec {
        debug_assert_eq!(self.n, x.len());
        let mut y = SmallVec::zeros(self.n);
        for j in 0..self.n {
            let mut s = 0.0;
            for i in 0..self.n {
                s += self.a[i][j] * x.v[i];
            }
            y.v[j] = s;
        }
        y
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad(&self, x: &SmallVec) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    /// Matrix product.
    pub fn matmul(&self, other: &SmallMat) -> SmallMat {
        debug_assert_eq!(self.n, other.n);
        let mut c = Self::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let aik = self.a[i][k];
                for j in 0..self.n {
                    c.a[i][j] += aik * other.a[k][j];
                }
            }
        }
        c
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] *= s;
            }
        }
        self
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        math::sqrt(s)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    /// Largest relative asymmetry `|a_ij − a_ji| / max|a|` (0 for the zero matrix).
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        m / scale
    }

    /// `true` when all entries are finite.
    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| math::all_finite(self.row(i)))
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching orthonormal
    /// eigenvectors as the columns of the second value.
    pub fn symmetric_eigen(&self) -> (SmallVec, SmallMat) {
        let n = self.n;
        let mut a = *self;
        // symmetrize to remove rounding asymmetry
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (a.a[i][j] + a.a[j][i]);
                a.a[i][j] = m;
                a.a[j][i] = m;
            }
        }
        let mut v = SmallMat::identity(n);
        let scale = a.frobenius();
        if scale > 0.0 {
            for _sweep in 0..100 {
                let mut off = 0.0;
                for i in 0..n {
                    for j in 0..i {
                        off += a.a[i][j] * a.a[i][j];
                    }
                }
                if math::sqrt(off) <= 1e-17 * scale {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        let apq = a.a[p][q];
                        if apq == 0.0 {
                            continue;
                        }
                        let theta = (a.a[q][q] - a.a[p][p]) / (2.0 * apq);
                        let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / math::sqrt(t * t + 1.0);
                        let s = t * c;
                        for k in 0..n {
                            let akp = a.a[k][p];
                            let akq = a.a[k][q];
                            a.a[k][p] = c * akp - s * akq;
                            a.a[k][q] = s * akp + c * akq;
                        }
                        for k in 0..n {
                            let apk = a.a[p][k];
                            let aqk = a.a[q][k];
                            a.a[p][k] = c * apk - s * aqk;
                            a.a[q][k] = s * apk + c * aqk;
                        }
                        for k in 0..n {
                            let vkp = v.a[k][p];
                            let vkq = v.a[k][q];
                            v.a[k][p] = c * vkp - s * vkq;
                            v.a[k][q] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
        // sort ascending
        let mut order = [0usize, 1, 2, 3, 4, 5];
        order[..n].sort_by(|&i, &j| a.a[i][i].total_cmp(&a.a[j][j]));
        let mut vals = SmallVec::zeros(n);
        let mut vecs = SmallMat::zeros(n);
        for (col, &src) in order[..n].iter().enumerate() {
            vals.v[col] = a.a[src][src];
            for k in 0..n {
                vecs.a[k][col] = v.a[k][src];
            }
        }
        (vals, vecs)
    }

    /// General inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<SmallMat> {
        let n = self.n;
        let mut a = *self;
        let mut inv = SmallMat::identity(n);
        let scale = self.max_abs();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a.a[r][col].abs() > a.a[piv][col].abs() {
                    piv = r;
                }
            }
            if a.a[piv][col].abs() <= 1e-300_f64.max(1e-15 * scale) {
                return Err(Error::NotPositiveDefinite { eigenvalue: 0.0 });
            }
            a.a.swap(col, piv);
            inv.a.swap(col, piv);
            let d = a.a[col][col];
            for j in 0..n {
                a.a[col][j] /= d;
                inv.a[col][j] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a.a[r][col];
                    if f != 0.0 {
                        for j in 0..n {
                            a.a[r][j] -= f * a.a[col][j];
                            inv.a[r][j] -= f * inv.a[col][j];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }
}

impl Add for SmallMat {
    type Output = SmallMat;
    fn add(mut self, rhs: SmallMat) -> SmallMat {
        debug_assert_eq!(self.n, rhs.n);
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] += rhs.a[i][j];
            }
        }
        self
    }
}

impl Sub for SmallMat {
    type Output = SmallMat;
    fn sub(self, rhs: SmallMat) -> SmallMat {
        self + rhs.scaled(-1.0)
    }
}

impl Mul<f64> for SmallMat {
    type Output = SmallMat;
    fn mul(self, s: f64) -> SmallMat {
        self.scaled(s)
    }
}

impl fmt::Debug for SmallMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for i in 0..self.n {
            l.entry(&self.row(i));
        }
        l.finish()
    }
}

// ---------------------------------------------------------------------------
// Second-order symmetric tensors
// ---------------------------------------------------------------------------

/// Symmetric second-order tensor (strain, stress, ...).
#[derive(Clone, Copy, PartialEq)]
pub struct SymTensor2 {
    dim: Dim,
    c: [f64; 6],
}

impl SymTensor2 {
    /// Zero tensor.
    pub fn zeros(dim: Dim) -> Self {
        SymTensor2 { dim, c: [0.0; 6] }
    }

    /// Identity tensor.
    pub fn identity(dim: Dim) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim.d() {
            t.c[i] = 1.0;
        }
        t
    }

    /// From independent components in storage order `11,22,(33,)12(,23,13)`.
    pub fn from_components(dim: Dim, comps: &[f64]) -> Result<Self> {
        if comps.len() != dim.n() {
            return Err(Error::shape(alloc::format!(
                "{dim:?} tensor needs {} components, got {}",
                dim.n(),
                comps.len()
            )));
        }
        let mut t = Self::zeros(dim);
        t.c[..dim.n()].copy_from_slice(comps);
        Ok(t)
    }

    /// From a full `d × d` matrix (symmetrized by averaging).
    pub fn from_matrix(dim: Dim, m: &[[f64; 3]; 3]) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim.n() {
            let (i, j) = dim.pair(k);
            t.c[k] = 0.5 * (m[i][j] + m[j][i]);
        }
        t
    }

    /// Spatial dimension.
    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Independent components in storage order.
    #[inline]
    pub fn components(&self) -> &[f64] {
        &self.c[..self.dim.n()]
    }

    /// Mutable independent components.
    #[inline]
    pub fn components_mut(&mut self) -> &mut [f64] {
        let n = self.dim.n();
        &mut self.c[..n]
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[self.dim.index(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.c[self.dim.index(i, j)] = v;
    }

    /// Trace.
    pub fn trace(&self) -> f64 {
        self.c[..self.dim.d()].iter().sum()
    }

    /// Deviatoric part `t − tr(t)/3 · I` (three-dimensional trace convention).
    pub fn deviator(&self) -> Self {
        let m = self.trace() / 3.0;
        let mut t = *self;
        for i in 0..self.dim.d() {
            t.c[i] -= m;
        }
        t
    }

    /// Double contraction `a : b`.
    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim.d();
        let mut s = 0.0;
        for k in 0..self.dim.n() {
            let w = if k < d { 1.0 } else { 2.0 };
            s += w * self.c[k] * other.c[k];
        }
        s
    }

    /// Frobenius norm `√(t : t)`.
    pub fn norm(&self) -> f64 {
        math::sqrt(self.ddot(self))
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        for x in self.components_mut() {
            *x *= s;
        }
        self
    }

    /// Kelvin vector `[t11, t22, (t33,) √2 t12 (, √2 t23, √2 t13)]`.
    pub fn kelvin(&self) -> SmallVec {
        let n = self.dim.n();
        let mut v = SmallVec::zeros(n);
        for k in 0..n {
            v.v[k] = self.dim.kelvin_weight(k) * self.c[k];
        }
        v
    }

    /// Inverse of [`SymTensor2::kelvin`].
    pub fn from_kelvin(v: &[f64]) -> Result<Self> {
        let dim = Dim::from_n(v.len())?;
        let mut t = Self::zeros(dim);
        for (k, &x) in v.iter().enumerate() {
            t.c[k] = if k < dim.d() { x } else { x / SQRT2 };
        }
        Ok(t)
    }

    /// Embeds a plane tensor into three dimensions (zero out-of-plane entries).
    pub fn to_3d(&self) -> Self {
        match self.dim {
            Dim::Three => *self,
            Dim::Two => {
                let mut t = Self::zeros(Dim::Three);
                t.c[0] = self.c[0];
                t.c[1] = self.c[1];
                t.c[3] = self.c[2];
                t
            }
        }
    }

    /// Restricts a three-dimensional tensor to its in-plane (1-2) block.
    pub fn to_2d(&self) -> Self {
        match self.dim {
            Dim::Two => *self,
            Dim::Three => {
                let mut t = Self::zeros(Dim::Two);
                t.c[0] = self.c[0];
                t.c[1] = self.c[1];
                t.c[2] = self.c[3];
                t
            }
        }
    }

    /// `true` when all components are finite.
    pub fn is_finite(&self) -> bool {
        math::all_finite(self.components())
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(mut self, rhs: SymTensor2) -> SymTensor2 {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..6 {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(mut self, rhs: SymTensor2) -> SymTensor2 {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..6 {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> SymTensor2 {
        self.scaled(s)
    }
}

impl fmt::Debug for SymTensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor2{:?}", self.components())
    }
}

/// Kelvin vector of a symmetric tensor (free-function form).
pub fn kelvin_vector(t: &SymTensor2) -> SmallVec {
    t.kelvin()
}

/// Tensor from a Kelvin vector of length 3 or 6.
pub fn kelvin_inverse(v: &[f64]) -> Result<SymTensor2> {
    SymTensor2::from_kelvin(v)
}

// ---------------------------------------------------------------------------
// Fourth-order tensors
// ---------------------------------------------------------------------------

/// Fourth-order tensor with minor and major symmetry, stored as its Kelvin matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct SymTensor4 {
    dim: Dim,
    m: SmallMat,
}

impl SymTensor4 {
    /// From a symmetric `n × n` Kelvin matrix.
    pub fn from_kelvin_matrix(dim: Dim, m: SmallMat) -> Result<Self> {
        if m.order() != dim.n() {
            return Err(Error::shape(alloc::format!(
                "{dim:?} fourth-order tensor needs a {n}x{n} Kelvin matrix, got order {}",
                m.order(),
                n = dim.n()
            )));
        }
        let asym = m.asymmetry();
        if asym > 1e-12 {
            return Err(Error::shape(alloc::format!("Kelvin matrix is not symmetric (relative asymmetry {asym:e})")));
        }
        Ok(SymTensor4 { dim, m })
    }

    /// Builds the Kelvin matrix from index form `C_ijkl` given as a closure.
    ///
    /// The closure is sampled only at `(i,j)`/`(k,l)` pairs in storage order,
    /// so it must itself have minor symmetry.
    pub fn from_index_fn(dim: Dim, c: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let n = dim.n();
        let mut m = SmallMat::zeros(n);
        for a in 0..n {
            let (i, j) = dim.pair(a);
            for b in 0..n {
                let (k, l) = dim.pair(b);
                m.a[a][b] = dim.kelvin_weight(a) * dim.kelvin_weight(b) * c(i, j, k, l);
            }
        }
        Self::from_kelvin_matrix(dim, m)
    }

    /// Isotropic tensor `λ I⊗I + 2μ 𝕀ˢ`.
    ///
    /// In two dimensions this is the plane-strain in-plane block.
    pub fn isotropic(dim: Dim, lambda: f64, mu: f64) -> Self {
        let n = dim.n();
        let d = dim.d();
        let mut m = SmallMat::zeros(n);
        for i in 0..d {
            for j in 0..d {
                m.a[i][j] = lambda;
            }
            m.a[i][i] += 2.0 * mu;
        }
        for k in d..n {
            m.a[k][k] = 2.0 * mu;
        }
        SymTensor4 { dim, m }
    }

    /// Isotropic elasticity from Young's modulus and Poisson's ratio.
    pub fn isotropic_young(dim: Dim, young: f64, poisson: f64) -> Self {
        let (lambda, mu) = lame(young, poisson);
        Self::isotropic(dim, lambda, mu)
    }

    /// Fourth-order identity on symmetric tensors.
    pub fn identity(dim: Dim) -> Self {
        SymTensor4 { dim, m: SmallMat::identity(dim.n()) }
    }

    /// `I ⊗ I`.
    pub fn identity_outer(dim: Dim) -> Self {
        let mut m = SmallMat::zeros(dim.n());
        for i in 0..dim.d() {
            for j in 0..dim.d() {
                m.a[i][j] = 1.0;
            }
        }
        SymTensor4 { dim, m }
    }

    /// Symmetrized outer product `(a ⊗ b + b ⊗ a) / 2`, or `a ⊗ a` when `a == b`.
    pub fn outer(a: &SymTensor2, b: &SymTensor2) -> Self {
        let dim = a.dim();
        let (ka, kb) = (a.kelvin(), b.kelvin());
        let n = dim.n();
        let mut m = SmallMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = 0.5 * (ka.v[i] * kb.v[j] + kb.v[i] * ka.v[j]);
            }
        }
        SymTensor4 { dim, m }
    }

    /// Spatial dimension.
    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Kelvin matrix.
    #[inline]
    pub fn matrix(&self) -> &SmallMat {
        &self.m
    }

    /// Index-form component `C_ijkl`.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let a = self.dim.index(i, j);
        let b = self.dim.index(k, l);
        self.m.a[a][b] / (self.dim.kelvin_weight(a) * self.dim.kelvin_weight(b))
    }

    /// Contraction `C : t`.
    pub fn contract(&self, t: &SymTensor2) -> SymTensor2 {
        debug_assert_eq!(self.dim, t.dim());
        let v = self.m.mul_vec(&t.kelvin());
        SymTensor2::from_kelvin(v.as_slice()).expect("length checked by construction")
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        SymTensor4 { dim: self.dim, m: self.m.scaled(s) }
    }

    /// Inverse (compliance from stiffness and vice versa).
    pub fn inverse(&self) -> Result<Self> {
        let inv = self.m.inverse()?;
        // remove rounding asymmetry
        let mut s = inv;
        for i in 0..inv.order() {
            for j in 0..inv.order() {
                s.a[i][j] = 0.5 * (inv.a[i][j] + inv.a[j][i]);
            }
        }
        Ok(SymTensor4 { dim: self.dim, m: s })
    }

    /// Restricts a three-dimensional tensor to its in-plane block (plane strain).
    pub fn to_2d(&self) -> Self {
        SymTensor4 { dim: Dim::Two, m: kelvin_restrict_2d(&self.m) }
    }
}

impl Add for SymTensor4 {
    type Output = SymTensor4;
    fn add(self, rhs: SymTensor4) -> SymTensor4 {
        debug_assert_eq!(self.dim, rhs.dim);
        SymTensor4 { dim: self.dim, m: self.m + rhs.m }
    }
}

impl fmt::Debug for SymTensor4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor4({:?}, {:?})", self.dim, self.m)
    }
}

/// Restricts a three-dimensional Kelvin matrix (order 6) to its in-plane
/// rows/columns `11, 22, 12` (order 3). Order-3 input is returned unchanged.
pub fn kelvin_restrict_2d(m: &SmallMat) -> SmallMat {
    if m.order() != 6 {
        return *m;
    }
    let idx = [0usize, 1, 3];
    let mut r = SmallMat::zeros(3);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            r.a[a][b] = m.a[ia][ib];
        }
    }
    r
}

/// Lamé constants `(λ, μ)` from Young's modulus and Poisson's ratio.
pub fn lame(young: f64, poisson: f64) -> (f64, f64) {
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    (lambda, mu)
}

/// `t : K : t` via the Kelvin vector.
pub fn quadratic_form(k: &SymTensor4, t: &SymTensor2) -> Result<f64> {
    if k.dim() != t.dim() {
        return Err(Error::shape(alloc::format!(
            "tensor dimension {:?} does not match weight dimension {:?}",
            t.dim(),
            k.dim()
        )));
    }
    Ok(k.matrix().quad(&t.kelvin()))
}

// ---------------------------------------------------------------------------
// SPD factorization
// ---------------------------------------------------------------------------

/// Which factor an [`SpdFactor`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FactorKind {
    /// Unique symmetric square root `K^{1/2}` (spectral).
    #[default]
    SymmetricSqrt,
    /// Upper-triangular Cholesky factor `Lᵀ` with `K = L Lᵀ`.
    Cholesky,
}

/// Factorization `K = Fᵀ F` of a symmetric positive-definite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdFactor {
    matrix: SmallMat,
    factor: SmallMat,
    factor_inverse: SmallMat,
    inverse: SmallMat,
    kind: FactorKind,
}

impl SpdFactor {
    /// The factorized matrix `K`.
    pub fn matrix(&self) -> &SmallMat {
        &self.matrix
    }

    /// `F` with `Fᵀ F = K`.
    pub fn factor(&self) -> &SmallMat {
        &self.factor
    }

    /// `F⁻¹`.
    pub fn factor_inverse(&self) -> &SmallMat {
        &self.factor_inverse
    }

    /// `K⁻¹`.
    pub fn inverse_matrix(&self) -> &SmallMat {
        &self.inverse
    }

    /// Which factorization was used.
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    /// `F x`.
    pub fn apply(&self, x: &SmallVec) -> SmallVec {
        self.factor.mul_vec(x)
    }

    /// `F⁻¹ y` (so that `apply_inverse(apply(x)) = x`).
    pub fn apply_inverse(&self, y: &SmallVec) -> SmallVec {
        self.factor_inverse.mul_vec(y)
    }
}

/// Factorizes a symmetric positive-definite matrix with the symmetric square root.
pub fn spd_factorize(k: &SmallMat) -> Result<SpdFactor> {
    spd_factorize_with(k, FactorKind::SymmetricSqrt)
}

/// Factorizes a symmetric positive-definite matrix with the chosen method.
///
/// Rejects non-symmetric input (shape error) and matrices whose smallest
/// eigenvalue does not exceed [`DEFINITENESS_TOLERANCE`] times the largest.
pub fn spd_factorize_with(k: &SmallMat, kind: FactorKind) -> Result<SpdFactor> {
    let n = k.order();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if !k.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let asym = k.asymmetry();
    if asym > 1e-12 {
        return Err(Error::shape(alloc::format!("matrix is not symmetric (relative asymmetry {asym:e})")));
    }
    let (vals, vecs) = k.symmetric_eigen();
    let lmin = vals[0];
    let lmax = vals[n - 1];
    if !(lmax > 0.0) || lmin <= DEFINITENESS_TOLERANCE * lmax {
        return Err(Error::NotPositiveDefinite { eigenvalue: lmin });
    }
    let spectral = |f: &dyn Fn(f64) -> f64| {
        let mut m = SmallMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += vecs.a[i][c] * f(vals.v[c]) * vecs.a[j][c];
                }
                m.a[i][j] = s;
            }
        }
        m
    };
    let inverse = spectral(&|l| 1.0 / l);
    let (factor, factor_inverse) = match kind {
        FactorKind::SymmetricSqrt => (spectral(&math::sqrt), spectral(&|l| 1.0 / math::sqrt(l))),
        FactorKind::Cholesky => {
            let mut l = SmallMat::zeros(n);
            for j in 0..n {
                let mut d = k.a[j][j];
                for p in 0..j {
                    d -= l.a[j][p] * l.a[j][p];
                }
                if d <= 0.0 {
                    return Err(Error::NotPositiveDefinite { eigenvalue: d });
                }
                let djj = math::sqrt(d);
                l.a[j][j] = djj;
                for i in j + 1..n {
                    let mut s = k.a[i][j];
                    for p in 0..j {
                        s -= l.a[i][p] * l.a[j][p];
                    }
                    l.a[i][j] = s / djj;
                }
            }
            let f = l.transpose();
            let finv = f.inverse()?;
            (f, finv)
        }
    };
    Ok(SpdFactor { matrix: *k, factor, factor_inverse, inverse, kind })
}
