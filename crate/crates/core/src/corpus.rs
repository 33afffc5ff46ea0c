//! Closed-form reference surfaces with exact immersion, fundamental
//! forms, tangent frames and connection coefficients. These are the
//! ground truth every oracle in the test suite measures against.
//!
//! Shipped cases (parameters in parentheses, defaults used by name
//! lookup):
//!
//! | name       | immersion                                    | a                      | b                          |
//! |------------|----------------------------------------------|------------------------|----------------------------|
//! | `plane`    | (x, y, 0)                                    | I                      | 0                          |
//! | `cylinder` | (cos x, sin x, y)                            | I                      | diag(-1, 0)                |
//! | `sphere`   | R (cos x cos y, sin x cos y, sin y)          | diag(R^2 cos^2 y, R^2) | -R diag(cos^2 y, 1)        |
//! | `torus`    | ((M + m cos y) cos x, ..., m sin y), M=2 m=1 | diag(rho^2, m^2)       | diag(-rho cos y, -m)       |
//! | `helicoid` | (y cos x, y sin x, c x), c = 1               | diag(c^2 + y^2, 1)     | offdiag(c / sqrt(c^2+y^2)) |
//! | `monge`    | (x, y, A sin x cos y), A = 0.3               | I + grad f grad f^T    | Hess f / |n_raw|           |
//!
//! Normals follow `f3 = f1 x f2 / |f1 x f2|`, which fixes the sign of
//! `b` per case. The default sampling domain is the unit square; the
//! sphere patch keeps a 0.3 margin away from the poles, where the metric
//! would degenerate.

use crate::coefficients::{connection_matrix, mixed_second_form_at, Christoffel2};
use crate::error::{Error, Result};
use crate::grid::{GridField, GridSpec};
use crate::smallmat::{
    invert_spd2, sqrt_spd2, sqrt_spd2_directional, Mat3, RotMat3, SkewMat3, SpdMat2, SymMat2, Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorpusCase {
    Plane,
    Cylinder,
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    Helicoid { pitch: f64 },
    MongeGraph { amplitude: f64 },
}

impl CorpusCase {
    pub fn from_name(name: &str) -> Result<CorpusCase> {
        match name {
            "plane" => Ok(CorpusCase::Plane),
            "cylinder" => Ok(CorpusCase::Cylinder),
            "sphere" => Ok(CorpusCase::Sphere { radius: 1.0 }),
            "torus" => Ok(CorpusCase::Torus {
                major: 2.0,
                minor: 1.0,
            }),
            "helicoid" => Ok(CorpusCase::Helicoid { pitch: 1.0 }),
            "monge" => Ok(CorpusCase::MongeGraph { amplitude: 0.3 }),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorpusCase::Plane => "plane",
            CorpusCase::Cylinder => "cylinder",
            CorpusCase::Sphere { .. } => "sphere",
            CorpusCase::Torus { .. } => "torus",
            CorpusCase::Helicoid { .. } => "helicoid",
            CorpusCase::MongeGraph { .. } => "monge",
        }
    }

    /// The six default-parameter cases.
    pub fn all() -> Vec<CorpusCase> {
        ["plane", "cylinder", "sphere", "torus", "helicoid", "monge"]
            .iter()
            .map(|n| CorpusCase::from_name(n).unwrap())
            .collect()
    }

    /// Documented analytic lower bound of the metric's smaller eigenvalue
    /// over the unit-square sampling domain.
    pub fn lambda_floor(&self) -> f64 {
        match self {
            CorpusCase::Plane | CorpusCase::Cylinder => 1.0,
            CorpusCase::Sphere { radius } => {
                let c = 1.0_f64.cos();
                radius * radius * c * c
            }
            CorpusCase::Torus { major, minor } => {
                let rho_min = major + minor * 1.0_f64.cos();
                (minor * minor).min(rho_min * rho_min)
            }
            CorpusCase::Helicoid { pitch } => (pitch * pitch).min(1.0),
            CorpusCase::MongeGraph { .. } => 1.0,
        }
    }

    /// Rejects grids leaving the case's admissible rectangle.
    pub fn check_domain(&self, spec: &GridSpec) -> Result<()> {
        let (y_lo, y_hi) = match self {
            CorpusCase::Sphere { .. } => {
                let m = std::f64::consts::FRAC_PI_2 - 0.3;
                (-m, m)
            }
            _ => (-1e6, 1e6),
        };
        let y_min = spec.y(0).min(spec.y(spec.ny - 1));
        let y_max = spec.y(0).max(spec.y(spec.ny - 1));
        if y_min < y_lo || y_max > y_hi {
            return Err(Error::DomainOutOfRange {
                case: self.name().to_string(),
                admissible: format!("y in [{y_lo:.4}, {y_hi:.4}]"),
                requested: format!("y in [{y_min:.4}, {y_max:.4}]"),
            });
        }
        Ok(())
    }

    pub fn theta(&self, x: f64, y: f64) -> Vec3 {
        match self {
            CorpusCase::Plane => Vec3::new(x, y, 0.0),
            CorpusCase::Cylinder => Vec3::new(x.cos(), x.sin(), y),
            CorpusCase::Sphere { radius } => {
                Vec3::new(x.cos() * y.cos(), x.sin() * y.cos(), y.sin()) * *radius
            }
            CorpusCase::Torus { major, minor } => {
                let rho = major + minor * y.cos();
                Vec3::new(rho * x.cos(), rho * x.sin(), minor * y.sin())
            }
            CorpusCase::Helicoid { pitch } => Vec3::new(y * x.cos(), y * x.sin(), pitch * x),
            CorpusCase::MongeGraph { amplitude } => Vec3::new(x, y, amplitude * x.sin() * y.cos()),
        }
    }

    /// Exact tangent vectors `(d1 theta, d2 theta)`.
    pub fn d_theta(&self, x: f64, y: f64) -> (Vec3, Vec3) {
        match self {
            CorpusCase::Plane => (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
            CorpusCase::Cylinder => (Vec3::new(-x.sin(), x.cos(), 0.0), Vec3::new(0.0, 0.0, 1.0)),
            CorpusCase::Sphere { radius } => (
                Vec3::new(-x.sin() * y.cos(), x.cos() * y.cos(), 0.0) * *radius,
                Vec3::new(-x.cos() * y.sin(), -x.sin() * y.sin(), y.cos()) * *radius,
            ),
            CorpusCase::Torus { major, minor } => {
                let rho = major + minor * y.cos();
                (
                    Vec3::new(-rho * x.sin(), rho * x.cos(), 0.0),
                    Vec3::new(
                        -minor * y.sin() * x.cos(),
                        -minor * y.sin() * x.sin(),
                        minor * y.cos(),
                    ),
                )
            }
            CorpusCase::Helicoid { pitch } => (
                Vec3::new(-y * x.sin(), y * x.cos(), *pitch),
                Vec3::new(x.cos(), x.sin(), 0.0),
            ),
            CorpusCase::MongeGraph { amplitude } => (
                Vec3::new(1.0, 0.0, amplitude * x.cos() * y.cos()),
                Vec3::new(0.0, 1.0, -amplitude * x.sin() * y.sin()),
            ),
        }
    }

    /// Unit normal `f1 x f2 / |f1 x f2|`.
    pub fn normal(&self, x: f64, y: f64) -> Vec3 {
        let (d1, d2) = self.d_theta(x, y);
        d1.cross(&d2).normalize()
    }

    /// Exact first fundamental form.
    pub fn first_form(&self, x: f64, y: f64) -> Result<SpdMat2> {
        let s = match self {
            CorpusCase::Plane | CorpusCase::Cylinder => SymMat2::IDENTITY,
            CorpusCase::Sphere { radius } => {
                let r2 = radius * radius;
                SymMat2::diag(r2 * y.cos() * y.cos(), r2)
            }
            CorpusCase::Torus { major, minor } => {
                let rho = major + minor * y.cos();
                SymMat2::diag(rho * rho, minor * minor)
            }
            CorpusCase::Helicoid { pitch } => SymMat2::diag(pitch * pitch + y * y, 1.0),
            CorpusCase::MongeGraph { amplitude } => {
                let fx = amplitude * x.cos() * y.cos();
                let fy = -amplitude * x.sin() * y.sin();
                SymMat2::new(1.0 + fx * fx, fx * fy, 1.0 + fy * fy)
            }
        };
        SpdMat2::from_sym(s)
    }

    /// Exact partial derivatives `(d1 a, d2 a)` of the first form.
    pub fn d_first_form(&self, x: f64, y: f64) -> (SymMat2, SymMat2) {
        match self {
            CorpusCase::Plane | CorpusCase::Cylinder => (SymMat2::ZERO, SymMat2::ZERO),
            CorpusCase::Sphere { radius } => {
                let r2 = radius * radius;
                (
                    SymMat2::ZERO,
                    SymMat2::diag(-2.0 * r2 * y.cos() * y.sin(), 0.0),
                )
            }
            CorpusCase::Torus { major, minor } => {
                let rho = major + minor * y.cos();
                (
                    SymMat2::ZERO,
                    SymMat2::diag(-2.0 * rho * minor * y.sin(), 0.0),
                )
            }
            CorpusCase::Helicoid { .. } => (SymMat2::ZERO, SymMat2::diag(2.0 * y, 0.0)),
            CorpusCase::MongeGraph { amplitude } => {
                let a = *amplitude;
                let fx = a * x.cos() * y.cos();
                let fy = -a * x.sin() * y.sin();
                let fxx = -a * x.sin() * y.cos();
                let fxy = -a * x.cos() * y.sin();
                let fyy = -a * x.sin() * y.cos();
                (
                    SymMat2::new(2.0 * fx * fxx, fxx * fy + fx * fxy, 2.0 * fy * fxy),
                    SymMat2::new(2.0 * fx * fxy, fxy * fy + fx * fyy, 2.0 * fy * fyy),
                )
            }
        }
    }

    /// Exact second fundamental form under the cross-product normal.
    pub fn second_form(&self, x: f64, y: f64) -> SymMat2 {
        match self {
            CorpusCase::Plane => SymMat2::ZERO,
            CorpusCase::Cylinder => SymMat2::diag(-1.0, 0.0),
            CorpusCase::Sphere { radius } => SymMat2::diag(-radius * y.cos() * y.cos(), -radius),
            CorpusCase::Torus { major, minor } => {
                let rho = major + minor * y.cos();
                SymMat2::diag(-rho * y.cos(), -minor)
            }
            CorpusCase::Helicoid { pitch } => {
                let w = (pitch * pitch + y * y).sqrt();
                SymMat2::new(0.0, pitch / w, 0.0)
            }
            CorpusCase::MongeGraph { amplitude } => {
                let a = *amplitude;
                let fx = a * x.cos() * y.cos();
                let fy = -a * x.sin() * y.sin();
                let fxx = -a * x.sin() * y.cos();
                let fxy = -a * x.cos() * y.sin();
                let fyy = -a * x.sin() * y.cos();
                let w = (1.0 + fx * fx + fy * fy).sqrt();
                SymMat2::new(fxx / w, fxy / w, fyy / w)
            }
        }
    }

    /// Exact Christoffel symbols from the analytic metric derivatives.
    pub fn christoffel_exact(&self, x: f64, y: f64) -> Result<Christoffel2> {
        let a = self.first_form(x, y)?;
        let (d1, d2) = self.d_first_form(x, y);
        exact_christoffel(&a, &[d1, d2])
    }

    /// Exact connection coefficients `Omega_i` in the orthonormal gauge,
    /// assembled from analytic quantities only (no grid anywhere).
    pub fn omega_exact(&self, x: f64, y: f64) -> Result<[SkewMat3; 2]> {
        let a = self.first_form(x, y)?;
        let b = self.second_form(x, y);
        let da = self.d_first_form(x, y);
        let c = exact_christoffel(&a, &[da.0, da.1])?;
        let a_inv = invert_spd2(&a)?;
        let bm = mixed_second_form_at(&b, &a_inv.as_sym());

        let root = sqrt_spd2(&a)?;
        let root_inv = invert_spd2(&root)?;
        let g = Mat3::from_sym2_block(&root.as_sym(), 1.0);
        let g_inv = Mat3::from_sym2_block(&root_inv.as_sym(), 1.0);

        let mut out = [SkewMat3::ZERO; 2];
        for (dir, da_dir) in [da.0, da.1].iter().enumerate() {
            let d_root = sqrt_spd2_directional(&a, da_dir)?;
            let dg = Mat3::from_sym2_block(&d_root, 0.0);
            let gamma = connection_matrix(&c, &b, &bm, dir);
            let raw = (g * gamma - dg) * g_inv;
            out[dir] = SkewMat3::skew_part(&raw);
        }
        Ok(out)
    }

    /// Exact orthonormal frame `P = F G^{-1}` with `F = [f1, f2, n]`.
    pub fn frame_exact(&self, x: f64, y: f64) -> Result<RotMat3> {
        let (d1, d2) = self.d_theta(x, y);
        let n = self.normal(x, y);
        let a = self.first_form(x, y)?;
        let root_inv = invert_spd2(&sqrt_spd2(&a)?)?;
        let f = Mat3::from_columns(d1, d2, n);
        let g_inv = Mat3::from_sym2_block(&root_inv.as_sym(), 1.0);
        RotMat3::try_new(f * g_inv)
    }
}

/// Christoffel symbols from a metric value and given (exact) derivatives;
/// the same contraction the grid pipeline applies to finite differences.
pub fn exact_christoffel(a: &SpdMat2, da: &[SymMat2; 2]) -> Result<Christoffel2> {
    let inv = invert_spd2(a)?.as_sym();
    let mut c = Christoffel2::ZERO;
    for k in 0..2 {
        for i in 0..2 {
            for j in i..2 {
                let mut acc = 0.0;
                for l in 0..2 {
                    acc += inv.entry(k, l)
                        * (da[j].entry(i, l) + da[i].entry(j, l) - da[l].entry(i, j));
                }
                c.g[k][i][j] = 0.5 * acc;
                c.g[k][j][i] = 0.5 * acc;
            }
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Grid sampling
// ---------------------------------------------------------------------------

pub fn sample_theta(case: &CorpusCase, spec: &GridSpec) -> Result<GridField<Vec3>> {
    case.check_domain(spec)?;
    Ok(GridField::from_fn(*spec, |x, y| case.theta(x, y)))
}

pub fn sample_forms(
    case: &CorpusCase,
    spec: &GridSpec,
) -> Result<(GridField<SpdMat2>, GridField<SymMat2>)> {
    case.check_domain(spec)?;
    let a = GridField::try_from_fn(*spec, |x, y| case.first_form(x, y))?;
    let b = GridField::from_fn(*spec, |x, y| case.second_form(x, y));
    Ok((a, b))
}

pub fn sample_omega(case: &CorpusCase, spec: &GridSpec) -> Result<[GridField<SkewMat3>; 2]> {
    case.check_domain(spec)?;
    let mut o1 = Vec::with_capacity(spec.node_count());
    let mut o2 = Vec::with_capacity(spec.node_count());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let [a, b] = case.omega_exact(spec.x(i), spec.y(j))?;
            o1.push(a);
            o2.push(b);
        }
    }
    Ok([
        GridField::from_values(*spec, o1)?,
        GridField::from_values(*spec, o2)?,
    ])
}

pub fn sample_frame(case: &CorpusCase, spec: &GridSpec) -> Result<GridField<RotMat3>> {
    case.check_domain(spec)?;
    GridField::try_from_fn(*spec, |x, y| case.frame_exact(x, y))
}

// ---------------------------------------------------------------------------
// Registration consistency check
// ---------------------------------------------------------------------------

/// Spot-check that the case's analytic quantities agree with difference
/// quotients of its own immersion: tangents against central differences
/// of `theta`, the first form against dot products of those differences,
/// the metric derivatives against differences of `a`, and the second form
/// against differences of the analytic tangents dotted with the normal
/// (cascading through the tangents keeps every check a first difference,
/// which f64 supports at the demanded accuracy).
///
/// Returns the worst relative deviation over `points` pseudo-random
/// probes; a case is usable once this stays below 1e-6.
pub fn verify_consistency(case: &CorpusCase, points: usize, seed: u64) -> Result<f64> {
    let eps = 1e-5;
    let mut state = seed
        .wrapping_mul(2862933555777941757)
        .wrapping_add(3037000493);
    let mut next_unit = move || {
        // xorshift64*; plenty for probe placement
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
    };

    let mut worst = 0.0_f64;
    let mut track = |err: f64, scale: f64| {
        worst = worst.max(err / scale.max(1.0));
    };

    for _ in 0..points {
        let x = 0.02 + 0.96 * next_unit();
        let y = 0.02 + 0.96 * next_unit();

        // tangents vs central differences of theta
        let (d1, d2) = case.d_theta(x, y);
        let fd1 = (case.theta(x + eps, y) - case.theta(x - eps, y)) * (0.5 / eps);
        let fd2 = (case.theta(x, y + eps) - case.theta(x, y - eps)) * (0.5 / eps);
        track((d1 - fd1).norm(), d1.norm());
        track((d2 - fd2).norm(), d2.norm());

        // first form vs dot products of the difference tangents
        let a = case.first_form(x, y)?.as_sym();
        let a_fd = SymMat2::new(fd1.dot(&fd1), fd1.dot(&fd2), fd2.dot(&fd2));
        track((a - a_fd).frobenius_norm(), a.frobenius_norm());

        // metric derivatives vs central differences of the first form
        let (da1, da2) = case.d_first_form(x, y);
        let a_xp = case.first_form(x + eps, y)?.as_sym();
        let a_xm = case.first_form(x - eps, y)?.as_sym();
        let a_yp = case.first_form(x, y + eps)?.as_sym();
        let a_ym = case.first_form(x, y - eps)?.as_sym();
        track(
            (da1 - (a_xp - a_xm).scale(0.5 / eps)).frobenius_norm(),
            da1.frobenius_norm(),
        );
        track(
            (da2 - (a_yp - a_ym).scale(0.5 / eps)).frobenius_norm(),
            da2.frobenius_norm(),
        );

        // second form vs differences of the analytic tangents
        let n = case.normal(x, y);
        let dd11 = (case.d_theta(x + eps, y).0 - case.d_theta(x - eps, y).0) * (0.5 / eps);
        let dd12 = (case.d_theta(x, y + eps).0 - case.d_theta(x, y - eps).0) * (0.5 / eps);
        let dd22 = (case.d_theta(x, y + eps).1 - case.d_theta(x, y - eps).1) * (0.5 / eps);
        let b = case.second_form(x, y);
        let b_fd = SymMat2::new(dd11.dot(&n), dd12.dot(&n), dd22.dot(&n));
        track((b - b_fd).frobenius_norm(), b.frobenius_norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LinearValue;
    use crate::smallmat::min_eig_sym2;

    #[test]
    fn every_case_passes_registration() {
        for case in CorpusCase::all() {
            let worst = verify_consistency(&case, 100, 42).unwrap();
            assert!(worst <= 1e-6, "case {} deviation {worst}", case.name());
        }
    }

    #[test]
    fn plane_and_cylinder_values() {
        let plane = CorpusCase::Plane;
        assert_eq!(plane.theta(0.3, -0.2), Vec3::new(0.3, -0.2, 0.0));
        assert_eq!(plane.second_form(0.5, 0.5), SymMat2::ZERO);

        let cyl = CorpusCase::Cylinder;
        assert_eq!(cyl.theta(0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(
            cyl.first_form(0.7, 0.1).unwrap().as_sym(),
            SymMat2::IDENTITY
        );
        assert_eq!(cyl.second_form(0.7, 0.1), SymMat2::diag(-1.0, 0.0));
        assert_eq!(cyl.normal(0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_values_at_origin() {
        let s = CorpusCase::from_name("sphere").unwrap();
        assert!((s.theta(0.0, 0.0) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!(
            (s.first_form(0.0, 0.0).unwrap().as_sym() - SymMat2::IDENTITY).frobenius_norm() < 1e-15
        );
        // unit sphere with outward normal: b = -a
        let b = s.second_form(0.0, 0.0);
        assert!((b - SymMat2::diag(-1.0, -1.0)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn sphere_rejects_grids_near_poles() {
        let s = CorpusCase::from_name("sphere").unwrap();
        let bad = GridSpec::new(0.0, 0.0, 0.2, 10, 10).unwrap(); // y up to 1.8
        assert!(matches!(
            sample_forms(&s, &bad),
            Err(Error::DomainOutOfRange { .. })
        ));
    }

    #[test]
    fn lambda_floor_matches_probe() {
        // 64x64 inclusive probe of the unit square
        for case in CorpusCase::all() {
            let mut probe_min = f64::INFINITY;
            for j in 0..64 {
                for i in 0..64 {
                    let (x, y) = (i as f64 / 63.0, j as f64 / 63.0);
                    let a = case.first_form(x, y).unwrap().as_sym();
                    probe_min = probe_min.min(min_eig_sym2(&a));
                }
            }
            let floor = case.lambda_floor();
            assert!(
                (probe_min - floor).abs() <= 1e-10 + 1e-10 * floor,
                "case {}: floor {floor} vs probe {probe_min}",
                case.name()
            );
        }
    }

    #[test]
    fn sphere_closed_form_omega() {
        // Omega_1 = axis (0, cos y, sin y), Omega_2 = axis (-1, 0, 0)
        let s = CorpusCase::from_name("sphere").unwrap();
        for (x, y) in [(0.1, 0.2), (0.8, 0.9), (0.5, 0.0)] {
            let [o1, o2] = s.omega_exact(x, y).unwrap();
            assert!((o1 - SkewMat3::new(0.0, y.cos(), y.sin())).angle() < 1e-13);
            assert!((o2 - SkewMat3::new(-1.0, 0.0, 0.0)).angle() < 1e-13);
        }
    }

    #[test]
    fn cylinder_closed_form_omega() {
        let c = CorpusCase::Cylinder;
        let [o1, o2] = c.omega_exact(0.4, 0.7).unwrap();
        assert!((o1 - SkewMat3::new(0.0, 1.0, 0.0)).angle() < 1e-15);
        assert!(o2.angle() < 1e-15);
    }

    #[test]
    fn helicoid_closed_form_omega() {
        // alpha = sqrt(1 + y^2): Omega_1 axis (1/alpha, 0, -y/alpha),
        // Omega_2 axis (0, -1/alpha^2, 0)
        let hcase = CorpusCase::from_name("helicoid").unwrap();
        for (x, y) in [(0.2, 0.3), (0.9, 0.8)] {
            let [o1, o2] = hcase.omega_exact(x, y).unwrap();
            let alpha = (1.0 + y * y).sqrt();
            assert!(
                (o1 - SkewMat3::new(1.0 / alpha, 0.0, -y / alpha)).angle() < 1e-13,
                "o1 at ({x},{y}): {o1:?}"
            );
            assert!(
                (o2 - SkewMat3::new(0.0, -1.0 / (alpha * alpha), 0.0)).angle() < 1e-13,
                "o2 at ({x},{y}): {o2:?}"
            );
        }
    }

    #[test]
    fn exact_frames_are_rotations_consistent_with_tangents() {
        for case in CorpusCase::all() {
            let p = case.frame_exact(0.37, 0.61).unwrap();
            assert!(p.orthogonality_defect() < 1e-12, "case {}", case.name());
            // third column is the unit normal
            let n = case.normal(0.37, 0.61);
            assert!((p.column(2) - n).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_omega_agrees_with_grid_chain_under_refinement() {
        // the FD chain converges to the analytic coefficients at O(h^2)
        use crate::coefficients::{build_coefficients, CoefficientOpts};
        let case = CorpusCase::from_name("monge").unwrap();
        let err = |n: usize| -> f64 {
            let spec = GridSpec::unit_square(n).unwrap();
            let (a, b) = sample_forms(&case, &spec).unwrap();
            let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
            let exact = sample_omega(&case, &spec).unwrap();
            let mut worst = 0.0_f64;
            for (dir, exact_dir) in exact.iter().enumerate() {
                let diff = bundle.omega[dir]
                    .zip_map(exact_dir, |u, v| *u - *v)
                    .unwrap()
                    .restrict_interior(2)
                    .unwrap();
                worst = worst.max(diff.max_norm());
            }
            worst
        };
        let (e1, e2) = (err(16), err(32));
        let order = (e1 / e2).log2();
        assert!(order > 1.5, "omega chain order {order} ({e1} -> {e2})");
    }

    #[test]
    fn torus_bundle_intermediates_match_symbolic_oracle() {
        // every intermediate of the chain at h = 1/64, against the exact
        // evaluators, on the margin-2 interior
        use crate::coefficients::{build_coefficients, mixed_second_form_at, CoefficientOpts};
        use crate::smallmat::Mat3;
        let case = CorpusCase::from_name("torus").unwrap();
        let spec = GridSpec::unit_square(64).unwrap();
        let h = spec.h;
        let tol = 30.0 * h * h;
        let (a, b) = sample_forms(&case, &spec).unwrap();
        let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();

        let interior = |i: usize, j: usize| i >= 2 && j >= 2 && i + 2 < spec.nx && j + 2 < spec.ny;
        for (i, j, _) in a.iter_nodes() {
            if !interior(i, j) {
                continue;
            }
            let (x, y) = (spec.x(i), spec.y(j));
            let a_pt = case.first_form(x, y).unwrap();
            let a_inv_exact = invert_spd2(&a_pt).unwrap().as_sym();
            assert!(
                (bundle.a_inv.at(i, j).as_sym() - a_inv_exact).frobenius_norm() < 1e-12,
                "a_inv is nodewise algebra, not a discretization"
            );
            let bm_exact = mixed_second_form_at(&case.second_form(x, y), &a_inv_exact);
            let bm = bundle.b_mixed.at(i, j);
            let mut bm_err = 0.0_f64;
            for r in 0..2 {
                for c in 0..2 {
                    bm_err = bm_err.max((bm.m[r][c] - bm_exact.m[r][c]).abs());
                }
            }
            assert!(bm_err < 1e-12);

            let c_exact = case.christoffel_exact(x, y).unwrap();
            let dc = bundle.christoffel.at(i, j).sub(&c_exact);
            assert!(dc.dot(&dc).sqrt() < tol, "christoffel at ({i},{j})");

            let root = sqrt_spd2(&a_pt).unwrap();
            let g_exact = Mat3::from_sym2_block(&root.as_sym(), 1.0);
            assert!((bundle.g_ext.at(i, j) - g_exact).frobenius_norm() < 1e-12);

            let [o1, o2] = case.omega_exact(x, y).unwrap();
            assert!((bundle.omega[0].at(i, j) - o1).angle() < tol);
            assert!((bundle.omega[1].at(i, j) - o2).angle() < tol);
        }
        // lower-index symmetry of the symbols is exact
        for (_, _, c) in bundle.christoffel.iter_nodes() {
            for k in 0..2 {
                assert_eq!(c.g[k][0][1], c.g[k][1][0]);
            }
        }
    }

    #[test]
    fn christoffel_exact_matches_grid_christoffel_on_sphere() {
        use crate::coefficients::christoffel;
        let case = CorpusCase::from_name("sphere").unwrap();
        let spec = GridSpec::unit_square(32).unwrap();
        let (a, _) = sample_forms(&case, &spec).unwrap();
        let grid_c = christoffel(&a, 1e-9).unwrap();
        let h = spec.h;
        let interior = grid_c.restrict_interior(2).unwrap();
        for (i, j, c) in interior.iter_nodes() {
            let (x, y) = (interior.spec().x(i), interior.spec().y(j));
            let exact = case.christoffel_exact(x, y).unwrap();
            let d = c.sub(&exact);
            assert!(d.dot(&d).sqrt() < 20.0 * h * h);
        }
    }
}
