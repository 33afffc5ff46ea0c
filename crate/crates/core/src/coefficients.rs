//! The coefficient chain: from a metric field `(a_ij)` and a symmetric
//! field `(b_ij)` to the antisymmetric connection one-form `(Omega_1,
//! Omega_2)` feeding the frame solver. The chain is
//!
//! ```text
//! a^{ij}   adjugate inverse of a
//! b_i^j  = a^{jk} b_ik
//! G^k_ij = (a^{kl}/2) (d_j a_il + d_i a_jl - d_l a_ij)
//! G      = blockdiag(sqrt(a), 1)
//! Gamma_i: 3x3 connection matrix assembled from G^k_ij and b
//! Omega_i = (G Gamma_i - d_i G) G^{-1}
//! ```
//!
//! In the continuum `Omega_i` is exactly antisymmetric; on the grid the
//! finite-difference `d_i G` leaves a symmetric defect of the stencil's
//! order. The defect is measured and reported, then the skew part is kept
//! so downstream exponentials act on exact generators. No derivative of
//! `b` is ever taken here.

use crate::error::{Error, Result};
use crate::grid::{same_grid, Dir, GridField, GridValue, LinearValue, ValueKind};
use crate::smallmat::{
    invert_spd2, min_eig_sym2, sqrt_spd2, Mat2, Mat3, SkewMat3, SpdMat2, SymMat2,
};
use serde::Serialize;

/// Christoffel symbols of a 2x2 metric at one node: `g[k][i][j]`,
/// symmetric in the two lower indices by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Christoffel2 {
    pub g: [[[f64; 2]; 2]; 2],
}

impl Christoffel2 {
    pub const ZERO: Christoffel2 = Christoffel2 {
        g: [[[0.0; 2]; 2]; 2],
    };

    /// `G^k_ij` with zero-based indices.
    pub fn sym(&self, k: usize, i: usize, j: usize) -> f64 {
        self.g[k][i][j]
    }
}

const CHRISTOFFEL_NAMES: [&str; 8] = [
    "c1_11", "c1_12", "c1_21", "c1_22", "c2_11", "c2_12", "c2_21", "c2_22",
];

impl GridValue for Christoffel2 {
    const KIND: ValueKind = ValueKind::Christoffel;
    const COMPONENTS: usize = 8;
    fn component_names() -> &'static [&'static str] {
        &CHRISTOFFEL_NAMES
    }
    fn write_components(&self, out: &mut [f64]) {
        let mut n = 0;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out[n] = self.g[k][i][j];
                    n += 1;
                }
            }
        }
    }
    fn from_components(c: &[f64]) -> Result<Self> {
        let mut out = Christoffel2::ZERO;
        let mut n = 0;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out.g[k][i][j] = c[n];
                    n += 1;
                }
            }
        }
        Ok(out)
    }
    fn is_finite(&self) -> bool {
        self.g.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

impl LinearValue for Christoffel2 {
    fn zero() -> Self {
        Christoffel2::ZERO
    }
    fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out.g[k][i][j] += o.g[k][i][j];
                }
            }
        }
        out
    }
    fn sub(&self, o: &Self) -> Self {
        let mut out = *self;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out.g[k][i][j] -= o.g[k][i][j];
                }
            }
        }
        out
    }
    fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out.g[k][i][j] *= s;
                }
            }
        }
        out
    }
    fn dot(&self, o: &Self) -> f64 {
        let mut acc = 0.0;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    acc += self.g[k][i][j] * o.g[k][i][j];
                }
            }
        }
        acc
    }
}

/// Tuning knobs of the chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoefficientOpts {
    /// Nodewise lower bound demanded of the metric's smaller eigenvalue.
    pub lambda_min: f64,
    /// Relative antisymmetry-defect tolerance for the gauge step.
    pub tol_skew: f64,
}

impl Default for CoefficientOpts {
    fn default() -> Self {
        CoefficientOpts {
            lambda_min: 1e-6,
            tol_skew: 1e-8,
        }
    }
}

/// Everything derived from `(a, b)`, with measurement data.
#[derive(Debug, Clone)]
pub struct CoefficientBundle {
    pub a: GridField<SpdMat2>,
    pub b: GridField<SymMat2>,
    pub a_inv: GridField<SpdMat2>,
    pub b_mixed: GridField<Mat2>,
    pub christoffel: GridField<Christoffel2>,
    pub g_ext: GridField<Mat3>,
    pub g_ext_inv: GridField<Mat3>,
    pub gamma: [GridField<Mat3>; 2],
    pub omega: [GridField<SkewMat3>; 2],
    pub diagnostics: BundleDiagnostics,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BundleDiagnostics {
    /// Smallest metric eigenvalue seen on the grid.
    pub min_eig: f64,
    pub lambda_min: f64,
    /// Max absolute antisymmetry defect `|Omega_i + Omega_i^T|_F` before
    /// projection, per component.
    pub skew_defect_max: [f64; 2],
    /// Same, relative: defect / (1 + |Omega_i|_F).
    pub skew_defect_rel_max: [f64; 2],
    pub tol_skew: f64,
    /// Set when the relative defect exceeds `tol_skew` anywhere: the
    /// inputs are inconsistent or the grid too coarse. Surfaced, never
    /// silently projected away.
    pub skew_tol_exceeded: bool,
}

fn validate_floor(a: &GridField<SpdMat2>, lambda_min: f64) -> Result<f64> {
    let mut min_eig = f64::INFINITY;
    for (i, j, v) in a.iter_nodes() {
        let eig = min_eig_sym2(&v.as_sym());
        if eig < lambda_min {
            return Err(Error::EigenvalueFloor {
                i,
                j,
                min_eig: eig,
                floor: lambda_min,
            });
        }
        min_eig = min_eig.min(eig);
    }
    Ok(min_eig)
}

/// Christoffel symbols `G^k_ij = (a^{kl}/2)(d_j a_il + d_i a_jl - d_l a_ij)`
/// by central differences of the metric. Exactly symmetric in `(i, j)` and
/// exactly zero for constant metrics.
pub fn christoffel(a: &GridField<SpdMat2>, lambda_min: f64) -> Result<GridField<Christoffel2>> {
    validate_floor(a, lambda_min)?;
    let a_sym = a.map(|v| v.as_sym());
    let da = [a_sym.partial(Dir::X)?, a_sym.partial(Dir::Y)?];

    let mut values = Vec::with_capacity(a.spec().node_count());
    for (i_node, j_node, av) in a.iter_nodes() {
        let inv = invert_spd2(&av)?.as_sym();
        let d = [da[0].at(i_node, j_node), da[1].at(i_node, j_node)];
        let mut c = Christoffel2::ZERO;
        for k in 0..2 {
            for i in 0..2 {
                for j in i..2 {
                    let mut acc = 0.0;
                    for l in 0..2 {
                        acc += inv.entry(k, l)
                            * (d[j].entry(i, l) + d[i].entry(j, l) - d[l].entry(i, j));
                    }
                    let val = 0.5 * acc;
                    c.g[k][i][j] = val;
                    c.g[k][j][i] = val;
                }
            }
        }
        values.push(c);
    }
    GridField::from_values(*a.spec(), values)
}

/// The three-dimensional extension of the metric and its square-root
/// factor: `G = blockdiag(sqrt(a), 1)` with `G G = blockdiag(a, 1)`,
/// plus the inverse.
pub fn extend_metric(a: &GridField<SpdMat2>) -> Result<(GridField<Mat3>, GridField<Mat3>)> {
    let mut g = Vec::with_capacity(a.spec().node_count());
    let mut g_inv = Vec::with_capacity(a.spec().node_count());
    for (_, _, av) in a.iter_nodes() {
        let root = sqrt_spd2(&av)?;
        let root_inv = invert_spd2(&root)?;
        g.push(Mat3::from_sym2_block(&root.as_sym(), 1.0));
        g_inv.push(Mat3::from_sym2_block(&root_inv.as_sym(), 1.0));
    }
    Ok((
        GridField::from_values(*a.spec(), g)?,
        GridField::from_values(*a.spec(), g_inv)?,
    ))
}

/// Mixed second form at one node: `b_i^j = a^{jk} b_ik` (not symmetric
/// in general).
pub fn mixed_second_form_at(b: &SymMat2, a_inv: &SymMat2) -> Mat2 {
    let mut m = Mat2::ZERO;
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                acc += a_inv.entry(j, k) * b.entry(i, k);
            }
            m.m[i][j] = acc;
        }
    }
    m
}

/// Mixed second form over a whole grid.
pub fn mixed_second_form(
    b: &GridField<SymMat2>,
    a_inv: &GridField<SpdMat2>,
) -> Result<GridField<Mat2>> {
    b.zip_map(a_inv, |bv, invv| mixed_second_form_at(bv, &invv.as_sym()))
}

/// The 3x3 connection matrix at one node for direction `dir` (0 or 1):
/// `[[G^1_i1, G^1_i2, -b_i^1], [G^2_i1, G^2_i2, -b_i^2], [b_i1, b_i2, 0]]`.
pub fn connection_matrix(c: &Christoffel2, b: &SymMat2, b_mixed: &Mat2, dir: usize) -> Mat3 {
    Mat3::from_rows(
        [c.g[0][dir][0], c.g[0][dir][1], -b_mixed.m[dir][0]],
        [c.g[1][dir][0], c.g[1][dir][1], -b_mixed.m[dir][1]],
        [b.entry(dir, 0), b.entry(dir, 1), 0.0],
    )
}

/// Assembles the two 3x3 connection matrices
/// `Gamma_i = [[G^1_i1, G^1_i2, -b_i^1], [G^2_i1, G^2_i2, -b_i^2],
/// [b_i1, b_i2, 0]]`.
pub fn connection_matrices(
    christoffel: &GridField<Christoffel2>,
    b: &GridField<SymMat2>,
    a_inv: &GridField<SpdMat2>,
) -> Result<[GridField<Mat3>; 2]> {
    same_grid(christoffel.spec(), b.spec())?;
    let b_mixed = mixed_second_form(b, a_inv)?;
    let mut out = Vec::with_capacity(2);
    for dir in 0..2 {
        let mut values = Vec::with_capacity(christoffel.spec().node_count());
        for (i, j, c) in christoffel.iter_nodes() {
            values.push(connection_matrix(&c, &b.at(i, j), &b_mixed.at(i, j), dir));
        }
        out.push(GridField::from_values(*christoffel.spec(), values)?);
    }
    let g2 = out.pop().unwrap();
    let g1 = out.pop().unwrap();
    Ok([g1, g2])
}

pub struct GaugedOmega {
    pub omega: [GridField<SkewMat3>; 2],
    pub skew_defect_max: [f64; 2],
    pub skew_defect_rel_max: [f64; 2],
}

/// The gauge transform into the orthonormal frame:
/// `Omega_i = (G Gamma_i - d_i G) G^{-1}`. The antisymmetry defect of the
/// raw product is measured before the skew part is extracted.
pub fn gauge_omega(
    g_ext: &GridField<Mat3>,
    g_ext_inv: &GridField<Mat3>,
    gamma: &[GridField<Mat3>; 2],
) -> Result<GaugedOmega> {
    same_grid(g_ext.spec(), g_ext_inv.spec())?;
    let dg = [g_ext.partial(Dir::X)?, g_ext.partial(Dir::Y)?];

    let mut omega = Vec::with_capacity(2);
    let mut defect_max = [0.0_f64; 2];
    let mut defect_rel_max = [0.0_f64; 2];
    for dir in 0..2 {
        same_grid(g_ext.spec(), gamma[dir].spec())?;
        let mut values = Vec::with_capacity(g_ext.spec().node_count());
        for (i, j, g) in g_ext.iter_nodes() {
            let raw = (g * gamma[dir].at(i, j) - dg[dir].at(i, j)) * g_ext_inv.at(i, j);
            let sym_part = (raw + raw.transpose()).frobenius_norm();
            defect_max[dir] = defect_max[dir].max(sym_part);
            defect_rel_max[dir] = defect_rel_max[dir].max(sym_part / (1.0 + raw.frobenius_norm()));
            values.push(SkewMat3::skew_part(&raw));
        }
        omega.push(GridField::from_values(*g_ext.spec(), values)?);
    }
    let o2 = omega.pop().unwrap();
    let o1 = omega.pop().unwrap();
    Ok(GaugedOmega {
        omega: [o1, o2],
        skew_defect_max: defect_max,
        skew_defect_rel_max: defect_rel_max,
    })
}

/// Runs the whole chain and packages the result.
pub fn build_coefficients(
    a: &GridField<SpdMat2>,
    b: &GridField<SymMat2>,
    opts: &CoefficientOpts,
) -> Result<CoefficientBundle> {
    same_grid(a.spec(), b.spec())?;
    let min_eig = validate_floor(a, opts.lambda_min)?;

    let a_inv = GridField::from_values(
        *a.spec(),
        a.values()
            .iter()
            .map(invert_spd2)
            .collect::<Result<Vec<_>>>()?,
    )?;
    let b_mixed = mixed_second_form(b, &a_inv)?;
    let christoffel_field = christoffel(a, opts.lambda_min)?;
    let (g_ext, g_ext_inv) = extend_metric(a)?;
    let gamma = connection_matrices(&christoffel_field, b, &a_inv)?;
    let gauged = gauge_omega(&g_ext, &g_ext_inv, &gamma)?;

    let rel_worst = gauged.skew_defect_rel_max[0].max(gauged.skew_defect_rel_max[1]);
    let diagnostics = BundleDiagnostics {
        min_eig,
        lambda_min: opts.lambda_min,
        skew_defect_max: gauged.skew_defect_max,
        skew_defect_rel_max: gauged.skew_defect_rel_max,
        tol_skew: opts.tol_skew,
        skew_tol_exceeded: rel_worst > opts.tol_skew,
    };

    Ok(CoefficientBundle {
        a: a.clone(),
        b: b.clone(),
        a_inv,
        b_mixed,
        christoffel: christoffel_field,
        g_ext,
        g_ext_inv,
        gamma,
        omega: gauged.omega,
        diagnostics,
    })
}
