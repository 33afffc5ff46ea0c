//! Rectangular node grids over the parameter domain, with second-order
//! finite differences and discrete Sobolev norms. The grid is the
//! discrete stand-in for the open set the fields live on; "local"
//! statements are realized by restricting to an interior subgrid.

use crate::error::{Error, Result};
use crate::smallmat::{Mat2, Mat3, RotMat3, SkewMat3, SpdMat2, SymMat2, Vec3};
use serde::{Deserialize, Serialize};

/// Coordinate direction of a derivative or sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    X,
    Y,
}

impl Dir {
    pub fn index(self) -> usize {
        match self {
            Dir::X => 0,
            Dir::Y => 1,
        }
    }
}

/// Uniform node-centered grid: node (i, j) sits at
/// `(x0 + i h, y0 + j h)`, `0 <= i < nx`, `0 <= j < ny`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// At least 3 nodes per side so central differences exist.
    pub fn new(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::BadSpacing { h });
        }
        if nx < 3 || ny < 3 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        Ok(GridSpec { x0, y0, h, nx, ny })
    }

    /// `n x n` cells over the unit square, i.e. spacing `1/n` and
    /// `n + 1` nodes per side.
    pub fn unit_square(n: usize) -> Result<Self> {
        GridSpec::new(0.0, 0.0, 1.0 / n as f64, n + 1, n + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.h
    }

    pub fn center_node(&self) -> (usize, usize) {
        ((self.nx - 1) / 2, (self.ny - 1) / 2)
    }

    /// Grid of cell centers dual to this node grid. Cell grids may have
    /// as few as 2 nodes per side and are only used as value containers,
    /// never differentiated.
    pub fn cell_grid(&self) -> GridSpec {
        GridSpec {
            x0: self.x0 + 0.5 * self.h,
            y0: self.y0 + 0.5 * self.h,
            h: self.h,
            nx: self.nx - 1,
            ny: self.ny - 1,
        }
    }

    fn describe(&self) -> String {
        format!(
            "{}x{} at ({}, {}) step {}",
            self.nx, self.ny, self.x0, self.y0, self.h
        )
    }
}

/// Kind tag for serialized fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Scalar,
    Vec3,
    SymMat2,
    SpdMat2,
    Mat2,
    Mat3,
    SkewMat3,
    RotMat3,
    Christoffel,
}

/// Values that can live on a grid: fixed component count, finite checks,
/// and a flat f64 encoding for file formats.
pub trait GridValue: Copy {
    const KIND: ValueKind;
    const COMPONENTS: usize;
    fn component_names() -> &'static [&'static str];
    fn write_components(&self, out: &mut [f64]);
    fn from_components(c: &[f64]) -> Result<Self>;
    fn is_finite(&self) -> bool;
}

/// Values forming a vector space, so they can be differenced, scaled and
/// measured. Rotations deliberately do not implement this.
pub trait LinearValue: GridValue {
    fn zero() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    /// Frobenius / Euclidean inner product on components.
    fn dot(&self, o: &Self) -> f64;
    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }
}

impl GridValue for f64 {
    const KIND: ValueKind = ValueKind::Scalar;
    const COMPONENTS: usize = 1;
    fn component_names() -> &'static [&'static str] {
        &["value"]
    }
    fn write_components(&self, out: &mut [f64]) {
        out[0] = *self;
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        Ok(c[0])
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl LinearValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn dot(&self, o: &Self) -> f64 {
        self * o
    }
}

impl GridValue for Vec3 {
    const KIND: ValueKind = ValueKind::Vec3;
    const COMPONENTS: usize = 3;
    fn component_names() -> &'static [&'static str] {
        &["x", "y", "z"]
    }
    fn write_components(&self, out: &mut [f64]) {
        out.copy_from_slice(&[self.x, self.y, self.z]);
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        Ok(Vec3::new(c[0], c[1], c[2]))
    }
    fn is_finite(&self) -> bool {
        Vec3::is_finite(self)
    }
}

impl LinearValue for Vec3 {
    fn zero() -> Self {
        Vec3::ZERO
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn scale(&self, s: f64) -> Self {
        *self * s
    }
    fn dot(&self, o: &Self) -> f64 {
        Vec3::dot(self, o)
    }
}

impl GridValue for SymMat2 {
    const KIND: ValueKind = ValueKind::SymMat2;
    const COMPONENTS: usize = 3;
    fn component_names() -> &'static [&'static str] {
        &["a11", "a12", "a22"]
    }
    fn write_components(&self, out: &mut [f64]) {
        out.copy_from_slice(&[self.a11, self.a12, self.a22]);
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        Ok(SymMat2::new(c[0], c[1], c[2]))
    }
    fn is_finite(&self) -> bool {
        SymMat2::is_finite(self)
    }
}

impl LinearValue for SymMat2 {
    fn zero() -> Self {
        SymMat2::ZERO
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn scale(&self, s: f64) -> Self {
        SymMat2::scale(self, s)
    }
    fn dot(&self, o: &Self) -> f64 {
        self.a11 * o.a11 + 2.0 * self.a12 * o.a12 + self.a22 * o.a22
    }
}

impl GridValue for SpdMat2 {
    const KIND: ValueKind = ValueKind::SpdMat2;
    const COMPONENTS: usize = 3;
    fn component_names() -> &'static [&'static str] {
        &["a11", "a12", "a22"]
    }
    fn write_components(&self, out: &mut [f64]) {
        self.as_sym().write_components(out);
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        SpdMat2::new(c[0], c[1], c[2])
    }
    fn is_finite(&self) -> bool {
        self.as_sym().is_finite()
    }
}

impl GridValue for Mat2 {
    const KIND: ValueKind = ValueKind::Mat2;
    const COMPONENTS: usize = 4;
    fn component_names() -> &'static [&'static str] {
        &["m11", "m12", "m21", "m22"]
    }
    fn write_components(&self, out: &mut [f64]) {
        out.copy_from_slice(&[self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]);
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        Ok(Mat2::new(c[0], c[1], c[2], c[3]))
    }
    fn is_finite(&self) -> bool {
        Mat2::is_finite(self)
    }
}

impl LinearValue for Mat2 {
    fn zero() -> Self {
        Mat2::ZERO
    }
    fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }
    fn sub(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] -= o.m[i][j];
            }
        }
        out
    }
    fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }
    fn dot(&self, o: &Self) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += self.m[i][j] * o.m[i][j];
            }
        }
        acc
    }
}

const MAT3_NAMES: [&str; 9] = [
    "m11", "m12", "m13", "m21", "m22", "m23", "m31", "m32", "m33",
];

impl GridValue for Mat3 {
    const KIND: ValueKind = ValueKind::Mat3;
    const COMPONENTS: usize = 9;
    fn component_names() -> &'static [&'static str] {
        &MAT3_NAMES
    }
    fn write_components(&self, out: &mut [f64]) {
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.m[i][j];
            }
        }
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        let mut m = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.m[i][j] = c[3 * i + j];
            }
        }
        Ok(m)
    }
    fn is_finite(&self) -> bool {
        Mat3::is_finite(self)
    }
}

impl LinearValue for Mat3 {
    fn zero() -> Self {
        Mat3::ZERO
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn scale(&self, s: f64) -> Self {
        Mat3::scale(self, s)
    }
    fn dot(&self, o: &Self) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.m[i][j] * o.m[i][j];
            }
        }
        acc
    }
}

impl GridValue for SkewMat3 {
    const KIND: ValueKind = ValueKind::SkewMat3;
    const COMPONENTS: usize = 3;
    fn component_names() -> &'static [&'static str] {
        &["w1", "w2", "w3"]
    }
    fn write_components(&self, out: &mut [f64]) {
        out.copy_from_slice(&[self.w1, self.w2, self.w3]);
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        Ok(SkewMat3::new(c[0], c[1], c[2]))
    }
    fn is_finite(&self) -> bool {
        SkewMat3::is_finite(self)
    }
}

impl LinearValue for SkewMat3 {
    fn zero() -> Self {
        SkewMat3::ZERO
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn scale(&self, s: f64) -> Self {
        SkewMat3::scale(self, s)
    }
    /// Frobenius inner product of the full matrices is twice the axis dot.
    fn dot(&self, o: &Self) -> f64 {
        2.0 * (self.w1 * o.w1 + self.w2 * o.w2 + self.w3 * o.w3)
    }
}

impl GridValue for RotMat3 {
    const KIND: ValueKind = ValueKind::RotMat3;
    const COMPONENTS: usize = 9;
    fn component_names() -> &'static [&'static str] {
        &MAT3_NAMES
    }
    fn write_components(&self, out: &mut [f64]) {
        self.as_mat3().write_components(out);
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        RotMat3::try_new(Mat3::from_components(c)?)
    }
    fn is_finite(&self) -> bool {
        self.as_mat3().is_finite()
    }
}

/// Field of values sampled at the grid nodes, stored row-major with the
/// x-index varying fastest: flat index `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    spec: GridSpec,
    values: Vec<T>,
}

impl<T: Copy> GridField<T> {
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> T) -> Self {
        let mut values = Vec::with_capacity(spec.node_count());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                values.push(f(spec.x(i), spec.y(j)));
            }
        }
        GridField { spec, values }
    }

    pub fn try_from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> Result<T>) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.node_count());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                values.push(f(spec.x(i), spec.y(j))?);
            }
        }
        Ok(GridField { spec, values })
    }

    pub fn constant(spec: GridSpec, v: T) -> Self {
        GridField {
            spec,
            values: vec![v; spec.node_count()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.node_count() {
            return Err(Error::Format {
                path: String::new(),
                message: format!(
                    "value count {} does not match grid {}",
                    values.len(),
                    spec.describe()
                ),
            });
        }
        Ok(GridField { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.spec.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[j * self.spec.nx + i] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterate nodes in storage order as (i, j, value).
    pub fn iter_nodes(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let nx = self.spec.nx;
        self.values
            .iter()
            .enumerate()
            .map(move |(idx, v)| (idx % nx, idx / nx, *v))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(&T) -> U) -> GridField<U> {
        GridField {
            spec: self.spec,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U: Copy, V: Copy>(
        &self,
        other: &GridField<U>,
        f: impl Fn(&T, &U) -> V,
    ) -> Result<GridField<V>> {
        same_grid(&self.spec, &other.spec)?;
        Ok(GridField {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    /// Drop `margin` node layers from every side. Realizes "local"
    /// comparisons on compactly contained subgrids; the default margin of
    /// 2 removes every node a one-sided boundary stencil can touch.
    pub fn restrict_interior(&self, margin: usize) -> Result<GridField<T>> {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        if margin == 0 {
            return Ok(self.clone());
        }
        if 2 * margin >= nx.min(ny).saturating_sub(2) {
            return Err(Error::MarginTooLarge { margin, nx, ny });
        }
        let spec = GridSpec {
            x0: self.spec.x(margin),
            y0: self.spec.y(margin),
            h: self.spec.h,
            nx: nx - 2 * margin,
            ny: ny - 2 * margin,
        };
        let mut values = Vec::with_capacity(spec.node_count());
        for j in margin..ny - margin {
            for i in margin..nx - margin {
                values.push(self.at(i, j));
            }
        }
        Ok(GridField { spec, values })
    }
}

pub fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch {
            left: a.describe(),
            right: b.describe(),
        });
    }
    Ok(())
}

impl<T: LinearValue> GridField<T> {
    /// Second-order partial derivative field: central differences at
    /// interior nodes, one-sided three-point stencils on the boundary.
    /// Exact for componentwise-affine fields, boundary included.
    pub fn partial(&self, dir: Dir) -> Result<GridField<T>> {
        let (nx, ny, h) = (self.spec.nx, self.spec.ny, self.spec.h);
        let n_dir = match dir {
            Dir::X => nx,
            Dir::Y => ny,
        };
        if n_dir < 3 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        let inv2h = 1.0 / (2.0 * h);
        let mut out = Vec::with_capacity(self.values.len());
        for j in 0..ny {
            for i in 0..nx {
                let (k, n) = match dir {
                    Dir::X => (i, nx),
                    Dir::Y => (j, ny),
                };
                let value_at = |k: usize| -> T {
                    match dir {
                        Dir::X => self.at(k, j),
                        Dir::Y => self.at(i, k),
                    }
                };
                let d = if k == 0 {
                    // (-3 f0 + 4 f1 - f2) / 2h
                    value_at(0)
                        .scale(-3.0)
                        .add(&value_at(1).scale(4.0))
                        .sub(&value_at(2))
                        .scale(inv2h)
                } else if k == n - 1 {
                    value_at(n - 1)
                        .scale(3.0)
                        .sub(&value_at(n - 2).scale(4.0))
                        .add(&value_at(n - 3))
                        .scale(inv2h)
                } else {
                    value_at(k + 1).sub(&value_at(k - 1)).scale(inv2h)
                };
                out.push(d);
            }
        }
        Ok(GridField {
            spec: self.spec,
            values: out,
        })
    }

    /// Discrete L2 norm `sqrt(h^2 sum |f|^2)`.
    pub fn norm_l2(&self) -> f64 {
        let h2 = self.spec.h * self.spec.h;
        (h2 * self.values.iter().map(|v| v.norm_sq()).sum::<f64>()).sqrt()
    }

    /// L2 plus first-difference energy.
    pub fn norm_w12(&self) -> Result<f64> {
        let dx = self.partial(Dir::X)?;
        let dy = self.partial(Dir::Y)?;
        Ok((self.norm_l2().powi(2) + dx.norm_l2().powi(2) + dy.norm_l2().powi(2)).sqrt())
    }

    /// W12 plus second-difference energy; both mixed orders are counted,
    /// matching the full Hessian Frobenius norm.
    pub fn norm_w22(&self) -> Result<f64> {
        let dx = self.partial(Dir::X)?;
        let dy = self.partial(Dir::Y)?;
        let dxx = dx.partial(Dir::X)?;
        let dxy = dx.partial(Dir::Y)?;
        let dyx = dy.partial(Dir::X)?;
        let dyy = dy.partial(Dir::Y)?;
        let w12_sq = self.norm_l2().powi(2) + dx.norm_l2().powi(2) + dy.norm_l2().powi(2);
        Ok((w12_sq
            + dxx.norm_l2().powi(2)
            + dxy.norm_l2().powi(2)
            + dyx.norm_l2().powi(2)
            + dyy.norm_l2().powi(2))
        .sqrt())
    }

    /// Discrete L2 pairing `h^2 sum <f, g>`.
    pub fn inner_l2(&self, other: &GridField<T>) -> Result<f64> {
        same_grid(&self.spec, &other.spec)?;
        let h2 = self.spec.h * self.spec.h;
        Ok(h2
            * self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a.dot(b))
                .sum::<f64>())
    }

    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm_sq().sqrt())
            .fold(0.0, f64::max)
    }
}
