//! Exact-formula algebra for the small fixed-size objects the pipeline
//! manipulates: symmetric / SPD 2x2 matrices, general 2x2 and 3x3 matrices,
//! antisymmetric 3x3 generators, proper rotations, and 3-vectors.
//!
//! Every operation is a closed form; nothing here iterates except the
//! Jacobi eigensolver used for polar projection.

use crate::error::{Error, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// Determinant gate for the 2x2 adjugate inverse.
pub const EPS_DET: f64 = 1e-12;

/// Orthogonality / determinant tolerance for validated rotations.
pub const ROT_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

// ---------------------------------------------------------------------------
// Symmetric and SPD 2x2
// ---------------------------------------------------------------------------

/// Symmetric 2x2 matrix; the (2,1) entry is implied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 {
        a11: 0.0,
        a12: 0.0,
        a22: 0.0,
    };
    pub const IDENTITY: SymMat2 = SymMat2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymMat2 { a11, a12, a22 }
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        SymMat2::new(d1, 0.0, d2)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22).sqrt()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (1, 1) => self.a22,
            (0, 1) | (1, 0) => self.a12,
            _ => panic!("2x2 index out of range"),
        }
    }

    pub fn scale(&self, s: f64) -> SymMat2 {
        SymMat2::new(self.a11 * s, self.a12 * s, self.a22 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }

    /// A * B for symmetric A, B (result is a general 2x2).
    pub fn mul_sym(&self, o: &SymMat2) -> Mat2 {
        Mat2 {
            m: [
                [
                    self.a11 * o.a11 + self.a12 * o.a12,
                    self.a11 * o.a12 + self.a12 * o.a22,
                ],
                [
                    self.a12 * o.a11 + self.a22 * o.a12,
                    self.a12 * o.a12 + self.a22 * o.a22,
                ],
            ],
        }
    }
}

impl Add for SymMat2 {
    type Output = SymMat2;
    fn add(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl Sub for SymMat2 {
    type Output = SymMat2;
    fn sub(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }
}

/// Symmetric positive definite 2x2 matrix, validated on construction.
///
/// For 2x2 symmetric matrices, det > 0 together with trace > 0 is
/// equivalent to positive definiteness, so the gate is exact and cheap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMat2(SymMat2);

impl SpdMat2 {
    pub const IDENTITY: SpdMat2 = SpdMat2(SymMat2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    });

    pub fn new(a11: f64, a12: f64, a22: f64) -> Result<Self> {
        SpdMat2::from_sym(SymMat2::new(a11, a12, a22))
    }

    pub fn from_sym(s: SymMat2) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::NonFinite {
                context: "SpdMat2 entries",
            });
        }
        let (det, trace) = (s.det(), s.trace());
        if det <= 0.0 || trace <= 0.0 {
            return Err(Error::NotPositiveDefinite { det, trace });
        }
        Ok(SpdMat2(s))
    }

    pub fn diag(d1: f64, d2: f64) -> Result<Self> {
        SpdMat2::new(d1, 0.0, d2)
    }

    pub fn as_sym(&self) -> SymMat2 {
        self.0
    }

    pub fn a11(&self) -> f64 {
        self.0.a11
    }
    pub fn a12(&self) -> f64 {
        self.0.a12
    }
    pub fn a22(&self) -> f64 {
        self.0.a22
    }

    pub fn det(&self) -> f64 {
        self.0.det()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Smaller eigenvalue of a symmetric 2x2 matrix,
/// `(tr A - sqrt(tr^2 A - 4 det A)) / 2`.
pub fn min_eig_sym2(a: &SymMat2) -> f64 {
    let tr = a.trace();
    let disc = (a.a11 - a.a22) * (a.a11 - a.a22) + 4.0 * a.a12 * a.a12;
    0.5 * (tr - disc.max(0.0).sqrt())
}

/// Adjugate inverse of an SPD 2x2 matrix.
pub fn invert_spd2(a: &SpdMat2) -> Result<SpdMat2> {
    let det = a.det();
    if det <= EPS_DET {
        return Err(Error::SingularMatrix { det, eps: EPS_DET });
    }
    SpdMat2::new(a.a22() / det, -a.a12() / det, a.a11() / det)
}

/// Unique SPD square root of an SPD 2x2 matrix via the closed form
/// `A^{1/2} = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A))`.
pub fn sqrt_spd2(a: &SpdMat2) -> Result<SpdMat2> {
    let d = a.det().sqrt();
    let t = (a.trace() + 2.0 * d).sqrt();
    SpdMat2::new((a.a11() + d) / t, a.a12() / t, (a.a22() + d) / t)
}

/// Directional derivative of `sqrt_spd2` at `a` along the symmetric
/// perturbation `da` (analytic differentiation of the closed form).
pub fn sqrt_spd2_directional(a: &SpdMat2, da: &SymMat2) -> Result<SymMat2> {
    let det = a.det();
    let d = det.sqrt();
    let t = (a.trace() + 2.0 * d).sqrt();
    let s = sqrt_spd2(a)?.as_sym();

    let ddet = da.a11 * a.a22() + a.a11() * da.a22 - 2.0 * a.a12() * da.a12;
    let dd = ddet / (2.0 * d);
    let dt = (da.trace() + 2.0 * dd) / (2.0 * t);

    let num = SymMat2::new(da.a11 + dd, da.a12, da.a22 + dd);
    Ok(num.scale(1.0 / t) - s.scale(dt / t))
}

// ---------------------------------------------------------------------------
// General 2x2
// ---------------------------------------------------------------------------

/// Plain 2x2 matrix, row-major. Houses mixed-index objects like
/// `b_i^j = a^{jk} b_ik`, which are not symmetric in general.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 { m: [[0.0; 2]; 2] };

    pub fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 {
            m: [[m11, m12], [m21, m22]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// 3x3
// ---------------------------------------------------------------------------

/// Plain 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(r0: [f64; 3], r1: [f64; 3], r2: [f64; 3]) -> Self {
        Mat3 { m: [r0, r1, r2] }
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Mat3 {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.m;
        Mat3::from_rows(
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        )
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// `|| M^T M - I ||_F`
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.transpose() * *self;
        (g - Mat3::IDENTITY).frobenius_norm()
    }

    /// Block-diagonal embedding of a symmetric 2x2 with `corner` at (3,3).
    pub fn from_sym2_block(s: &SymMat2, corner: f64) -> Mat3 {
        Mat3::from_rows([s.a11, s.a12, 0.0], [s.a12, s.a22, 0.0], [0.0, 0.0, corner])
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[i][j] + o.m[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[i][j] - o.m[i][j];
            }
        }
        out
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += self.m[i][k] * o.m[k][j];
                }
                out.m[i][j] = acc;
            }
        }
        out
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }
}

// ---------------------------------------------------------------------------
// Antisymmetric 3x3
// ---------------------------------------------------------------------------

/// Antisymmetric 3x3 matrix stored by its axis vector `w`, so that the
/// full matrix `W` satisfies `W u = w x u` and `W^T = -W` exactly by
/// representation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SkewMat3 {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl SkewMat3 {
    pub const ZERO: SkewMat3 = SkewMat3 {
        w1: 0.0,
        w2: 0.0,
        w3: 0.0,
    };

    pub fn new(w1: f64, w2: f64, w3: f64) -> Self {
        SkewMat3 { w1, w2, w3 }
    }

    pub fn from_axis(w: Vec3) -> Self {
        SkewMat3::new(w.x, w.y, w.z)
    }

    pub fn axis(&self) -> Vec3 {
        Vec3::new(self.w1, self.w2, self.w3)
    }

    /// Rotation-angle norm `|w|` (the angle of `exp(W)`).
    pub fn angle(&self) -> f64 {
        self.axis().norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.angle()
    }

    pub fn to_mat3(&self) -> Mat3 {
        Mat3::from_rows(
            [0.0, -self.w3, self.w2],
            [self.w3, 0.0, -self.w1],
            [-self.w2, self.w1, 0.0],
        )
    }

    /// Skew part `(M - M^T)/2` of a general matrix.
    pub fn skew_part(m: &Mat3) -> SkewMat3 {
        SkewMat3::new(
            0.5 * (m.m[2][1] - m.m[1][2]),
            0.5 * (m.m[0][2] - m.m[2][0]),
            0.5 * (m.m[1][0] - m.m[0][1]),
        )
    }

    /// `[A, B] = AB - BA`, again antisymmetric; equals the skew matrix of
    /// the cross product of the axis vectors.
    pub fn commutator(a: &SkewMat3, b: &SkewMat3) -> SkewMat3 {
        SkewMat3::from_axis(a.axis().cross(&b.axis()))
    }

    pub fn scale(&self, s: f64) -> SkewMat3 {
        SkewMat3::new(self.w1 * s, self.w2 * s, self.w3 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite() && self.w3.is_finite()
    }
}

impl Add for SkewMat3 {
    type Output = SkewMat3;
    fn add(self, o: SkewMat3) -> SkewMat3 {
        SkewMat3::new(self.w1 + o.w1, self.w2 + o.w2, self.w3 + o.w3)
    }
}

impl Sub for SkewMat3 {
    type Output = SkewMat3;
    fn sub(self, o: SkewMat3) -> SkewMat3 {
        SkewMat3::new(self.w1 - o.w1, self.w2 - o.w2, self.w3 - o.w3)
    }
}

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// Proper rotation in three dimensions. Constructed only through paths
/// that keep the orthogonality defect below [`ROT_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat3(Mat3);

impl RotMat3 {
    pub const IDENTITY: RotMat3 = RotMat3(Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    });

    /// Validates orthogonality and determinant before wrapping.
    pub fn try_new(m: Mat3) -> Result<Self> {
        let ortho = m.orthogonality_defect();
        let det = (m.det() - 1.0).abs();
        if ortho > ROT_TOL || det > ROT_TOL {
            return Err(Error::NotARotation { ortho, det });
        }
        Ok(RotMat3(m))
    }

    /// For construction sites that guarantee orthogonality analytically
    /// (exponentials, products of rotations, polar factors).
    pub(crate) fn new_unchecked(m: Mat3) -> Self {
        RotMat3(m)
    }

    pub fn as_mat3(&self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> RotMat3 {
        RotMat3(self.0.transpose())
    }

    pub fn column(&self, j: usize) -> Vec3 {
        self.0.column(j)
    }

    pub fn orthogonality_defect(&self) -> f64 {
        self.0.orthogonality_defect()
    }

    pub fn det_defect(&self) -> f64 {
        (self.0.det() - 1.0).abs()
    }

    /// Rotation angle in [0, pi], computed from both the skew part and the
    /// trace so that angles near zero keep full relative accuracy.
    pub fn angle(&self) -> f64 {
        let m = &self.0.m;
        let s = SkewMat3::new(
            0.5 * (m[2][1] - m[1][2]),
            0.5 * (m[0][2] - m[2][0]),
            0.5 * (m[1][0] - m[0][1]),
        );
        let cos = 0.5 * (self.0.trace() - 1.0);
        s.angle().atan2(cos)
    }

    pub fn frob_dist(&self, o: &RotMat3) -> f64 {
        (self.0 - o.0).frobenius_norm()
    }
}

impl Mul for RotMat3 {
    type Output = RotMat3;
    fn mul(self, o: RotMat3) -> RotMat3 {
        RotMat3(self.0 * o.0)
    }
}

impl Mul<Vec3> for RotMat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.0 * v
    }
}

/// Rodrigues exponential of an antisymmetric matrix. The angle factors
/// switch to Taylor expansions below 1e-4 to avoid cancellation, since the
/// integrator takes many small steps.
pub fn exp_skew3(w: &SkewMat3) -> RotMat3 {
    let phi = w.angle();
    let (s, c) = sin_cos_factors(phi);
    let wm = w.to_mat3();
    let w2 = wm * wm;
    RotMat3::new_unchecked(Mat3::IDENTITY + wm.scale(s) + w2.scale(c))
}

/// `sin(phi)/phi` and `(1-cos(phi))/phi^2` with small-angle fallbacks.
fn sin_cos_factors(phi: f64) -> (f64, f64) {
    if phi < 1e-4 {
        let p2 = phi * phi;
        (
            1.0 - p2 / 6.0 + p2 * p2 / 120.0,
            0.5 - p2 / 24.0 + p2 * p2 / 720.0,
        )
    } else {
        (phi.sin() / phi, (1.0 - phi.cos()) / (phi * phi))
    }
}

/// `int_0^1 exp(t X) dt` for antisymmetric `X`; the translation factor of
/// the rigid-motion exponential. Equals `I + c1 X + c2 X^2` with
/// `c1 = (1-cos phi)/phi^2`, `c2 = (phi - sin phi)/phi^3`.
pub fn exp_skew3_integral(x: &SkewMat3) -> Mat3 {
    let phi = x.angle();
    let (c1, c2) = if phi < 1e-4 {
        let p2 = phi * phi;
        (
            0.5 - p2 / 24.0 + p2 * p2 / 720.0,
            1.0 / 6.0 - p2 / 120.0 + p2 * p2 / 5040.0,
        )
    } else {
        (
            (1.0 - phi.cos()) / (phi * phi),
            (phi - phi.sin()) / (phi * phi * phi),
        )
    };
    let xm = x.to_mat3();
    let x2 = xm * xm;
    Mat3::IDENTITY + xm.scale(c1) + x2.scale(c2)
}

/// Nearest proper rotation in the Frobenius norm (polar factor), via
/// `M (M^T M)^{-1/2}` with a Jacobi eigendecomposition of `M^T M`.
/// Requires `det M > 0`; rejects degenerate inputs so the caller can
/// report where a frame collapsed.
pub fn project_so3(m: &Mat3) -> Result<RotMat3> {
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "project_so3 input",
        });
    }
    let det = m.det();
    if det <= 0.0 {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let g = m.transpose() * *m;
    let (eigs, vecs) = jacobi_eigen_3(&g.m);
    // det M > 0 ensures all eigenvalues of M^T M are positive.
    let mut inv_sqrt = Mat3::ZERO;
    for k in 0..3 {
        let lam = eigs[k];
        if lam <= 0.0 {
            return Err(Error::NonPositiveDeterminant { det });
        }
        let f = 1.0 / lam.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                inv_sqrt.m[i][j] += f * vecs[i][k] * vecs[j][k];
            }
        }
    }
    Ok(RotMat3::new_unchecked(*m * inv_sqrt))
}

/// Entrywise mean of rotations re-projected onto the group. Used to
/// extract the constant relating two solutions of the same system.
pub fn mean_rotation(items: &[RotMat3]) -> Result<RotMat3> {
    let mut acc = Mat3::ZERO;
    for r in items {
        acc = acc + r.as_mat3();
    }
    project_so3(&acc.scale(1.0 / items.len() as f64))
}

// ---------------------------------------------------------------------------
// Planar rotations (the abelian m = 2 case)
// ---------------------------------------------------------------------------

/// Generator of a planar rotation, `[[0, -w], [w, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Skew2 {
    pub w: f64,
}

impl Skew2 {
    pub fn new(w: f64) -> Self {
        Skew2 { w }
    }
}

/// Planar rotation kept as its (cos, sin) pair; composition is honest
/// floating-point complex multiplication, not angle addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot2 {
    pub c: f64,
    pub s: f64,
}

impl Rot2 {
    pub const IDENTITY: Rot2 = Rot2 { c: 1.0, s: 0.0 };

    pub fn from_angle(a: f64) -> Self {
        Rot2 {
            c: a.cos(),
            s: a.sin(),
        }
    }

    pub fn compose(&self, o: &Rot2) -> Rot2 {
        Rot2 {
            c: self.c * o.c - self.s * o.s,
            s: self.s * o.c + self.c * o.s,
        }
    }

    pub fn transpose(&self) -> Rot2 {
        Rot2 {
            c: self.c,
            s: -self.s,
        }
    }

    pub fn angle(&self) -> f64 {
        self.s.atan2(self.c)
    }

    pub fn norm_defect(&self) -> f64 {
        (self.c * self.c + self.s * self.s - 1.0).abs()
    }

    pub fn renormalize(&self) -> Result<Rot2> {
        let n = (self.c * self.c + self.s * self.s).sqrt();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::NonPositiveDeterminant { det: n });
        }
        Ok(Rot2 {
            c: self.c / n,
            s: self.s / n,
        })
    }
}

// ---------------------------------------------------------------------------
// Jacobi eigensolver (symmetric, small and fixed size)
// ---------------------------------------------------------------------------

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and the matrix whose columns are the eigenvectors,
/// unsorted. Convergence to machine precision takes a handful of sweeps
/// for the 3x3 and 4x4 problems it serves here.
#[allow(clippy::needless_range_loop)] // rotations act on index pairs
pub fn jacobi_eigen<const N: usize>(a: &[[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut a = *a;
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, &x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..N {
            for q in (p + 1)..N {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut eigs = [0.0; N];
    for (i, e) in eigs.iter_mut().enumerate() {
        *e = a[i][i];
    }
    (eigs, v)
}

fn jacobi_eigen_3(a: &[[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    jacobi_eigen::<3>(a)
}
