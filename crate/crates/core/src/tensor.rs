//! Small dense matrices and fourth-order tensors for d ∈ {2, 3}.
//!
//! Storage is a fixed 3×3 (or 3×3×3×3) array with a runtime dimension tag;
//! entries outside the active d×d block are kept at zero.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    d: usize,
    a: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        assert!(d == 2 || d == 3, "dimension must be 2 or 3");
        Mat { d, a: [[0.0; 3]; 3] }
    }

    pub fn identity(d: usize) -> Self {
        Self::scalar(d, 1.0)
    }

    pub fn scalar(d: usize, s: f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = s;
        }
        m
    }

    pub fn new2(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Mat { d: 2, a: [[a00, a01, 0.0], [a10, a11, 0.0], [0.0; 3]] }
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.a[i][i] = e;
        }
        m
    }

    /// Outer product `u ⊗ v`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn transpose(&self) -> Self {
        Mat { d: self.d, a: std::array::from_fn(|i| std::array::from_fn(|j| self.a[j][i])) }
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.a[i][i]).sum()
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, other: &Mat) -> f64 {
        assert_eq!(self.d, other.d);
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    /// Squared Frobenius norm `|A|²`.
    pub fn norm2(&self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| self.a[i][j].is_finite()))
    }

    pub fn sym(&self) -> Self {
        Self::from_fn(self.d, |i, j| 0.5 * (self.a[i][j] + self.a[j][i]))
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.d {
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Cofactor matrix, `Cof M = det(M) M^{-T}` for invertible M.
    pub fn cof(&self) -> Self {
        let a = &self.a;
        match self.d {
            2 => Mat::new2(a[1][1], -a[1][0], -a[0][1], a[0][0]),
            _ => Self::from_fn(3, |i, j| {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]
            }),
        }
    }

    /// Returns `(det M, Cof M, M^{-1})`; fails when `|det M| ≤ 1e-14 ‖M‖^d`.
    pub fn det_cof_inv(&self) -> Result<(f64, Mat, Mat)> {
        if !self.is_finite() {
            return Err(Error::SingularMatrix { det: f64::NAN });
        }
        let det = self.det();
        let scale = self.norm().powi(self.d as i32);
        if det.abs() <= 1e-14 * scale || det == 0.0 {
            return Err(Error::SingularMatrix { det });
        }
        let cof = self.cof();
        let inv = cof.transpose() * (1.0 / det);
        Ok((det, cof, inv))
    }

    pub fn inverse(&self) -> Result<Mat> {
        self.det_cof_inv().map(|(_, _, inv)| inv)
    }

    /// Planar rotation by `angle` (d = 2).
    pub fn rotation2(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat::new2(c, -s, s, c)
    }

    /// Rotation about the unit `axis` by `angle` (d = 3, Rodrigues formula).
    pub fn rotation3(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let k = [axis[0] / n, axis[1] / n, axis[2] / n];
        let kx = Self::from_fn(3, |i, j| match (i, j) {
            (0, 1) => -k[2],
            (0, 2) => k[1],
            (1, 0) => k[2],
            (1, 2) => -k[0],
            (2, 0) => -k[1],
            (2, 1) => k[0],
            _ => 0.0,
        });
        let (s, c) = angle.sin_cos();
        Self::identity(3) + kx * s + (kx * kx) * (1.0 - c)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.d && j < self.d);
        &self.a[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.d && j < self.d);
        &mut self.a[i][j]
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(self, o: Mat) -> Mat {
        assert_eq!(self.d, o.d);
        Mat { d: self.d, a: std::array::from_fn(|i| std::array::from_fn(|j| self.a[i][j] + o.a[i][j])) }
    }
}

impl AddAssign for Mat {
    fn add_assign(&mut self, o: Mat) {
        *self = *self + o;
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(self, o: Mat) -> Mat {
        assert_eq!(self.d, o.d);
        Mat { d: self.d, a: std::array::from_fn(|i| std::array::from_fn(|j| self.a[i][j] - o.a[i][j])) }
    }
}

impl SubAssign for Mat {
    fn sub_assign(&mut self, o: Mat) {
        *self = *self - o;
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self * -1.0
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, o: Mat) -> Mat {
        assert_eq!(self.d, o.d);
        // Entries outside the active block are zero, so the full 3×3 product is exact.
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.a[i][0] * o.a[0][j] + self.a[i][1] * o.a[1][j] + self.a[i][2] * o.a[2][j];
            }
        }
        Mat { d: self.d, a }
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    fn mul(self, s: f64) -> Mat {
        let mut m = self;
        for i in 0..self.d {
            for j in 0..self.d {
                m.a[i][j] *= s;
            }
        }
        m
    }
}

/// Fourth-order tensor `T[i][j][k][l]` over a d-dimensional index range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor4 {
    d: usize,
    a: [[[[f64; 3]; 3]; 3]; 3],
}

impl Tensor4 {
    pub fn zeros(d: usize) -> Self {
        assert!(d == 2 || d == 3, "dimension must be 2 or 3");
        Tensor4 { d, a: [[[[0.0; 3]; 3]; 3]; 3] }
    }

    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        t.a[i][j][k][l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.a[i][j][k][l]
    }

    /// `(T : X)_{ij} = T_{ijkl} X_{kl}`.
    pub fn ddot_right(&self, x: &Mat) -> Mat {
        let d = self.d;
        Mat::from_fn(d, |i, j| {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += self.a[i][j][k][l] * x[(k, l)];
                }
            }
            s
        })
    }

    /// `(X : T)_{kl} = X_{ij} T_{ijkl}`.
    pub fn ddot_left(&self, x: &Mat) -> Mat {
        let d = self.d;
        Mat::from_fn(d, |k, l| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += x[(i, j)] * self.a[i][j][k][l];
                }
            }
            s
        })
    }
}

/// `D[i][j][k][l] = ∂(M^{-1})_{ij} / ∂M_{kl} = −(M^{-1})_{ik} (M^{-1})_{lj}`.
pub fn d_inverse(m: &Mat) -> Result<Tensor4> {
    let inv = m.inverse()?;
    Ok(Tensor4::from_fn(m.dim(), |i, j, k, l| -inv[(i, k)] * inv[(l, j)]))
}

#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    Mat(&'a Mat),
    T4(&'a Tensor4),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractMode {
    /// Single contraction over the adjacent index pair (matrix product for 2-tensors).
    Dot,
    /// Double contraction `:`.
    Ddot,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contracted {
    Mat(Mat),
    Scalar(f64),
}

impl Contracted {
    pub fn mat(self) -> Option<Mat> {
        match self {
            Contracted::Mat(m) => Some(m),
            Contracted::Scalar(_) => None,
        }
    }

    pub fn scalar(self) -> Option<f64> {
        match self {
            Contracted::Scalar(s) => Some(s),
            Contracted::Mat(_) => None,
        }
    }
}

/// Einstein contraction of `a` with the 2-tensor `b`.
///
/// `Mat · Mat` is the matrix product, `Mat : Mat` the Frobenius product and
/// `Tensor4 : Mat` contracts the last two indices. A single contraction of a
/// 4-tensor with a 2-tensor would give a 4-tensor and is rejected.
pub fn contract(a: Operand<'_>, b: &Mat, mode: ContractMode) -> Result<Contracted> {
    let da = match a {
        Operand::Mat(m) => m.dim(),
        Operand::T4(t) => t.dim(),
    };
    if da != b.dim() {
        return Err(Error::ShapeMismatch(format!("dimension {} against {}", da, b.dim())));
    }
    match (a, mode) {
        (Operand::Mat(m), ContractMode::Dot) => Ok(Contracted::Mat(*m * *b)),
        (Operand::Mat(m), ContractMode::Ddot) => Ok(Contracted::Scalar(m.ddot(b))),
        (Operand::T4(t), ContractMode::Ddot) => Ok(Contracted::Mat(t.ddot_right(b))),
        (Operand::T4(_), ContractMode::Dot) => Err(Error::ShapeMismatch(
            "single contraction of a 4-tensor with a 2-tensor is not a 2-tensor".into(),
        )),
    }
}
