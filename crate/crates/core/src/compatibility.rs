//! Residuals of the integrability condition in its three equivalent
//! forms, and the refinement study demonstrating their equivalence:
//!
//! * Omega form: `d1 Omega_2 - d2 Omega_1 = Omega_2 Omega_1 - Omega_1 Omega_2`
//! * Gamma form: `d1 Gamma_2 + Gamma_1 Gamma_2 = d2 Gamma_1 + Gamma_2 Gamma_1`
//! * Gauss and Codazzi-Mainardi equations of `(a, b)` in coordinates.
//!
//! The two matrix residuals are conjugate, `R_Omega = G R_Gamma G^{-1}`,
//! so up to discretization error the three vanish together.
//!
//! Coordinate convention pinned here for the classical equations, with
//! `R^m_j = d1 G^m_2j - d2 G^m_1j + G^m_1k G^k_2j - G^m_2k G^k_1j` at
//! `j = 2`:
//!
//! * Gauss:   `a_1m R^m_2 = det b`
//! * Codazzi: `d1 b_j2 - d2 b_j1 = G^k_j1 b_k2 - G^k_j2 b_k1`, `j = 1, 2`
//!
//! Codazzi differentiates `b`; for merely square-integrable `b` those
//! derivatives carry no pointwise meaning, so the report flags the
//! residual as requiring smooth data rather than asserting anything.

use crate::coefficients::{build_coefficients, CoefficientBundle, CoefficientOpts};
use crate::corpus::{sample_forms, CorpusCase};
use crate::error::Result;
use crate::grid::{same_grid, Dir, GridField, GridSpec};
use crate::smallmat::{Mat3, SkewMat3, SpdMat2, SymMat2};
use serde::Serialize;

/// Residual of the Omega-form condition,
/// `R = d1 Omega_2 - d2 Omega_1 - Omega_2 Omega_1 + Omega_1 Omega_2`.
/// Computed in the antisymmetric representation throughout (derivatives
/// and commutators of antisymmetric matrices are antisymmetric), so the
/// result is antisymmetric exactly, not approximately.
pub fn omega_residual(
    omega1: &GridField<SkewMat3>,
    omega2: &GridField<SkewMat3>,
) -> Result<GridField<SkewMat3>> {
    same_grid(omega1.spec(), omega2.spec())?;
    let d1o2 = omega2.partial(Dir::X)?;
    let d2o1 = omega1.partial(Dir::Y)?;
    let mut values = Vec::with_capacity(omega1.spec().node_count());
    for (i, j, o1) in omega1.iter_nodes() {
        let o2 = omega2.at(i, j);
        // [Omega_2, Omega_1] in axis form is w2 x w1
        let comm = SkewMat3::commutator(&o2, &o1);
        values.push(d1o2.at(i, j) - d2o1.at(i, j) - comm);
    }
    GridField::from_values(*omega1.spec(), values)
}

/// Residual of the Gamma-form condition,
/// `R = d1 Gamma_2 - d2 Gamma_1 - Gamma_2 Gamma_1 + Gamma_1 Gamma_2`.
pub fn gamma_residual(
    gamma1: &GridField<Mat3>,
    gamma2: &GridField<Mat3>,
) -> Result<GridField<Mat3>> {
    same_grid(gamma1.spec(), gamma2.spec())?;
    let d1g2 = gamma2.partial(Dir::X)?;
    let d2g1 = gamma1.partial(Dir::Y)?;
    let mut values = Vec::with_capacity(gamma1.spec().node_count());
    for (i, j, g1) in gamma1.iter_nodes() {
        let g2 = gamma2.at(i, j);
        values.push(d1g2.at(i, j) - d2g1.at(i, j) - g2 * g1 + g1 * g2);
    }
    GridField::from_values(*gamma1.spec(), values)
}

/// Scalar residuals of the classical Gauss and Codazzi-Mainardi
/// equations. Gauss compares the curvature assembled from the Christoffel
/// symbols against `det b`; Codazzi couples the first differences of `b`
/// to the symbols.
pub fn gcm_residual(
    a: &GridField<SpdMat2>,
    b: &GridField<SymMat2>,
    bundle: &CoefficientBundle,
) -> Result<(GridField<f64>, [GridField<f64>; 2])> {
    same_grid(a.spec(), b.spec())?;
    same_grid(a.spec(), bundle.christoffel.spec())?;
    let c = &bundle.christoffel;
    let d1c = c.partial(Dir::X)?;
    let d2c = c.partial(Dir::Y)?;
    let db = [b.partial(Dir::X)?, b.partial(Dir::Y)?];

    let mut gauss = Vec::with_capacity(a.spec().node_count());
    let mut codazzi = [
        Vec::with_capacity(a.spec().node_count()),
        Vec::with_capacity(a.spec().node_count()),
    ];
    for (i, j, av) in a.iter_nodes() {
        let cv = c.at(i, j);
        let d1 = d1c.at(i, j);
        let d2 = d2c.at(i, j);
        let bv = b.at(i, j);

        // curvature components R^m_2 = d1 G^m_22 - d2 G^m_12
        //                            + G^m_1k G^k_22 - G^m_2k G^k_12
        let mut riem = [0.0; 2];
        for (m, r) in riem.iter_mut().enumerate() {
            let mut acc = d1.g[m][1][1] - d2.g[m][0][1];
            for k in 0..2 {
                acc += cv.g[m][0][k] * cv.g[k][1][1] - cv.g[m][1][k] * cv.g[k][0][1];
            }
            *r = acc;
        }
        let lowered = av.a11() * riem[0] + av.a12() * riem[1];
        gauss.push(lowered - bv.det());

        // d1 b_j2 - d2 b_j1 - sum_k (G^k_j1 b_k2 - G^k_j2 b_k1)
        for (jj, out) in codazzi.iter_mut().enumerate() {
            let mut acc = db[0].at(i, j).entry(jj, 1) - db[1].at(i, j).entry(jj, 0);
            for k in 0..2 {
                acc -= cv.g[k][jj][0] * bv.entry(k, 1) - cv.g[k][jj][1] * bv.entry(k, 0);
            }
            out.push(acc);
        }
    }
    let [c1, c2] = codazzi;
    Ok((
        GridField::from_values(*a.spec(), gauss)?,
        [
            GridField::from_values(*a.spec(), c1)?,
            GridField::from_values(*a.spec(), c2)?,
        ],
    ))
}

/// Residual norms evaluated on a common interior subgrid.
#[derive(Debug, Clone, Serialize)]
pub struct CompatReport {
    pub h: f64,
    pub interior_margin: usize,
    pub omega_residual_l2: f64,
    pub omega_residual_max: f64,
    pub gamma_residual_l2: f64,
    pub gauss_residual_l2: f64,
    pub codazzi_residual_l2: [f64; 2],
    pub notes: Vec<String>,
}

/// The per-node residual fields behind a [`CompatReport`].
pub struct CompatFields {
    pub omega: GridField<SkewMat3>,
    pub gamma: GridField<Mat3>,
    pub gauss: GridField<f64>,
    pub codazzi: [GridField<f64>; 2],
}

pub fn compat_report(
    a: &GridField<SpdMat2>,
    b: &GridField<SymMat2>,
    bundle: &CoefficientBundle,
    margin: usize,
) -> Result<(CompatReport, CompatFields)> {
    let omega = omega_residual(&bundle.omega[0], &bundle.omega[1])?;
    let gamma = gamma_residual(&bundle.gamma[0], &bundle.gamma[1])?;
    let (gauss, codazzi) = gcm_residual(a, b, bundle)?;

    let omega_i = omega.restrict_interior(margin)?;
    let report = CompatReport {
        h: a.spec().h,
        interior_margin: margin,
        omega_residual_l2: omega_i.norm_l2(),
        omega_residual_max: omega_i.max_norm(),
        gamma_residual_l2: gamma.restrict_interior(margin)?.norm_l2(),
        gauss_residual_l2: gauss.restrict_interior(margin)?.norm_l2(),
        codazzi_residual_l2: [
            codazzi[0].restrict_interior(margin)?.norm_l2(),
            codazzi[1].restrict_interior(margin)?.norm_l2(),
        ],
        notes: vec![
            "codazzi residuals differentiate b and are meaningful only for \
             data smooth enough to differentiate pointwise"
                .to_string(),
        ],
    };
    Ok((
        report,
        CompatFields {
            omega,
            gamma,
            gauss,
            codazzi,
        },
    ))
}

/// One refinement row of the equivalence study.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRow {
    pub n: usize,
    pub h: f64,
    pub omega_l2: f64,
    pub gamma_l2: f64,
    pub gauss_l2: f64,
    pub codazzi_l2: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceTable {
    pub case: String,
    pub interior_margin: usize,
    pub rows: Vec<EquivalenceRow>,
}

/// Evaluates all three residual families for a corpus case across grid
/// refinements. For compatible data every column shrinks together; for
/// incompatible data every form stays bounded away from zero.
pub fn equivalence_study(
    case: &CorpusCase,
    ns: &[usize],
    opts: &CoefficientOpts,
    margin: usize,
) -> Result<EquivalenceTable> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = GridSpec::unit_square(n)?;
        let (a, b) = sample_forms(case, &spec)?;
        let bundle = build_coefficients(&a, &b, opts)?;
        let (report, _) = compat_report(&a, &b, &bundle, margin)?;
        rows.push(EquivalenceRow {
            n,
            h: spec.h,
            omega_l2: report.omega_residual_l2,
            gamma_l2: report.gamma_residual_l2,
            gauss_l2: report.gauss_residual_l2,
            codazzi_l2: report.codazzi_residual_l2,
        });
    }
    Ok(EquivalenceTable {
        case: case.name().to_string(),
        interior_margin: margin,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn unit(n: usize) -> GridSpec {
        GridSpec::unit_square(n).unwrap()
    }

    fn build_case(
        case: &str,
        n: usize,
    ) -> (GridField<SpdMat2>, GridField<SymMat2>, CoefficientBundle) {
        let case = CorpusCase::from_name(case).unwrap();
        let spec = unit(n);
        let (a, b) = sample_forms(&case, &spec).unwrap();
        let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
        (a, b, bundle)
    }

    #[test]
    fn zero_omega_has_zero_residual() {
        let spec = unit(8);
        let z = GridField::constant(spec, SkewMat3::ZERO);
        let r = omega_residual(&z, &z).unwrap();
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn constant_omega_with_zero_partner_is_compatible() {
        let spec = unit(8);
        let w = GridField::constant(spec, SkewMat3::new(0.0, 1.0, 0.0));
        let z = GridField::constant(spec, SkewMat3::ZERO);
        let r = omega_residual(&w, &z).unwrap();
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn noncommuting_constants_reduce_to_commutator() {
        // derivatives vanish, so the residual equals
        // -(W2 W1 - W1 W2) = [W1, W2] exactly at every node
        let spec = unit(6);
        let w1 = SkewMat3::new(1.0, 0.0, 0.0);
        let w2 = SkewMat3::new(0.0, 1.0, 0.0);
        let f1 = GridField::constant(spec, w1);
        let f2 = GridField::constant(spec, w2);
        let r = omega_residual(&f1, &f2).unwrap();
        let expected = SkewMat3::commutator(&w1, &w2);
        for (_, _, v) in r.iter_nodes() {
            assert!((v - expected).angle() == 0.0);
        }
    }

    #[test]
    fn commuting_constants_have_exactly_zero_residual() {
        let spec = unit(7);
        let w = SkewMat3::new(0.25, -0.5, 1.0);
        let f1 = GridField::constant(spec, w);
        let f2 = GridField::constant(spec, w.scale(-2.0));
        let r = omega_residual(&f1, &f2).unwrap();
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn gamma_residual_zero_for_cylinder() {
        let (_, _, bundle) = build_case("cylinder", 8);
        let r = gamma_residual(&bundle.gamma[0], &bundle.gamma[1]).unwrap();
        assert!(r.max_norm() < 1e-14);
    }

    #[test]
    fn gamma_residual_refines_on_sphere() {
        let res = |n: usize| {
            let (_, _, bundle) = build_case("sphere", n);
            gamma_residual(&bundle.gamma[0], &bundle.gamma[1])
                .unwrap()
                .restrict_interior(2)
                .unwrap()
                .norm_l2()
        };
        let (r1, r2) = (res(16), res(32));
        assert!((r1 / r2).log2() > 1.5, "order {}", (r1 / r2).log2());
    }

    #[test]
    fn conjugation_links_the_two_matrix_residuals() {
        // R_Omega = G R_Gamma G^{-1} up to the scheme's order: check the
        // L2 norms against each other with the conjugation constant
        for case in ["sphere", "torus", "helicoid", "monge"] {
            let (_, _, bundle) = build_case(case, 32);
            let h = bundle.a.spec().h;
            let r_omega = omega_residual(&bundle.omega[0], &bundle.omega[1])
                .unwrap()
                .map(|w| w.to_mat3())
                .restrict_interior(2)
                .unwrap();
            let r_gamma = gamma_residual(&bundle.gamma[0], &bundle.gamma[1])
                .unwrap()
                .restrict_interior(2)
                .unwrap();
            let kappa = bundle
                .g_ext
                .iter_nodes()
                .map(|(i, j, g)| g.frobenius_norm() * bundle.g_ext_inv.at(i, j).frobenius_norm())
                .fold(0.0, f64::max);
            let (no, ng) = (r_omega.norm_l2(), r_gamma.norm_l2());
            assert!(
                no <= kappa * ng + 10.0 * h * h,
                "case {case}: omega {no} vs kappa {kappa} * gamma {ng}"
            );
            assert!(
                ng <= kappa * no + 10.0 * h * h,
                "case {case}: gamma {ng} vs kappa {kappa} * omega {no}"
            );
        }
    }

    #[test]
    fn conjugation_identity_nodewise() {
        // on a smooth case the pointwise identity holds to O(h^2)
        let (_, _, bundle) = build_case("torus", 32);
        let h = bundle.a.spec().h;
        let r_omega = omega_residual(&bundle.omega[0], &bundle.omega[1]).unwrap();
        let r_gamma = gamma_residual(&bundle.gamma[0], &bundle.gamma[1]).unwrap();
        let mut worst = 0.0_f64;
        let interior_o = r_omega.restrict_interior(2).unwrap();
        let interior_g = r_gamma.restrict_interior(2).unwrap();
        let g_int = bundle.g_ext.restrict_interior(2).unwrap();
        let gi_int = bundle.g_ext_inv.restrict_interior(2).unwrap();
        for (i, j, ro) in interior_o.iter_nodes() {
            let conj = g_int.at(i, j) * interior_g.at(i, j) * gi_int.at(i, j);
            worst = worst.max((ro.to_mat3() - conj).frobenius_norm());
        }
        assert!(worst <= 20.0 * h * h, "worst conjugation defect {worst}");
    }

    #[test]
    fn gcm_residuals_vanish_for_flat_and_cylinder() {
        for case in ["plane", "cylinder"] {
            let (a, b, bundle) = build_case(case, 8);
            let (gauss, codazzi) = gcm_residual(&a, &b, &bundle).unwrap();
            assert!(gauss.max_norm() < 1e-13, "case {case}");
            assert!(codazzi[0].max_norm() < 1e-13, "case {case}");
            assert!(codazzi[1].max_norm() < 1e-13, "case {case}");
        }
    }

    #[test]
    fn incompatible_pair_has_unit_gauss_residual() {
        // a = I, b = I: flat metric but det b = 1, so the Gauss residual
        // is exactly -1 at every node; Codazzi is untouched (constants)
        let spec = unit(8);
        let a = GridField::constant(spec, SpdMat2::IDENTITY);
        let b = GridField::constant(spec, SymMat2::IDENTITY);
        let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
        let (gauss, codazzi) = gcm_residual(&a, &b, &bundle).unwrap();
        for (_, _, v) in gauss.iter_nodes() {
            assert!((v + 1.0).abs() < 1e-15);
        }
        assert!(codazzi[0].max_norm() < 1e-15);
        assert!(codazzi[1].max_norm() < 1e-15);

        // cross-check: the Omega-form residual is nonzero on the same data
        let r = omega_residual(&bundle.omega[0], &bundle.omega[1]).unwrap();
        assert!(r.max_norm() > 0.5);
    }

    #[test]
    fn gcm_residuals_refine_on_curved_cases() {
        for case in ["sphere", "torus", "monge"] {
            let res = |n: usize| {
                let (a, b, bundle) = build_case(case, n);
                let (gauss, codazzi) = gcm_residual(&a, &b, &bundle).unwrap();
                gauss
                    .restrict_interior(2)
                    .unwrap()
                    .norm_l2()
                    .max(codazzi[0].restrict_interior(2).unwrap().norm_l2())
                    .max(codazzi[1].restrict_interior(2).unwrap().norm_l2())
            };
            let (r1, r2) = (res(16), res(32));
            let order = (r1 / r2).log2();
            assert!(order > 1.5, "case {case}: order {order} ({r1} -> {r2})");
        }
    }

    #[test]
    fn equivalence_study_decreasing_columns_on_sphere() {
        let case = CorpusCase::from_name("sphere").unwrap();
        let table =
            equivalence_study(&case, &[16, 32, 64], &CoefficientOpts::default(), 2).unwrap();
        for w in table.rows.windows(2) {
            assert!(w[1].omega_l2 < w[0].omega_l2);
            assert!(w[1].gamma_l2 < w[0].gamma_l2);
            assert!(w[1].gauss_l2 < w[0].gauss_l2);
        }
        // empirical order of the omega column over the sweep
        let (r1, r2) = (&table.rows[0], &table.rows[2]);
        let order = (r1.omega_l2 / r2.omega_l2).log2() / 2.0;
        assert!(order >= 1.5, "order {order}");
    }

    #[test]
    fn equivalence_study_flat_cylinder_at_machine_precision() {
        let case = CorpusCase::from_name("cylinder").unwrap();
        let table = equivalence_study(&case, &[16, 32], &CoefficientOpts::default(), 2).unwrap();
        for row in &table.rows {
            assert!(row.omega_l2 < 1e-12);
            assert!(row.gamma_l2 < 1e-12);
            assert!(row.gauss_l2 < 1e-12);
            assert!(row.codazzi_l2[0] < 1e-12);
            assert!(row.codazzi_l2[1] < 1e-12);
        }
    }
}
