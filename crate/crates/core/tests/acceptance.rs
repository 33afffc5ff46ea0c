//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see
//! them). Tolerances are fixed here, not tuned at run time.

use formsurf::coefficients::{build_coefficients, CoefficientOpts};
use formsurf::compatibility::compat_report;
use formsurf::corpus::{sample_forms, sample_omega, CorpusCase};
use formsurf::grid::{GridField, GridSpec};
use formsurf::pfaffian::{
    plaquette_holonomy, relate_solutions, solve_frame, step_edge, Convention,
};
use formsurf::potential::integrate_potential;
use formsurf::reconstruction::{
    align_rigid, compactness_experiment, empirical_order, reconstruct, roundtrip_study,
    CompactnessFamily, ReconstructOpts,
};
use formsurf::smallmat::{exp_skew3, sqrt_spd2, Mat3, RotMat3, SkewMat3, SpdMat2, SymMat2, Vec3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const CASES: [&str; 6] = ["plane", "cylinder", "sphere", "torus", "helicoid", "monge"];
const NS: [usize; 3] = [16, 32, 64];

fn opts() -> ReconstructOpts {
    ReconstructOpts::default()
}

#[test]
fn criterion_1_roundtrip_convergence() {
    let start = std::time::Instant::now();
    let mut summary = String::new();
    for name in CASES {
        let case = CorpusCase::from_name(name).unwrap();
        let report = roundtrip_study(&case, &NS, &opts()).unwrap();
        let errs: Vec<f64> = report.rows.iter().map(|r| r.theta_max_err).collect();

        if report.exact_regime {
            // constant-coefficient exactness: errors at roundoff, far
            // below any h^2 budget; the order fit carries no information
            assert!(
                errs.iter().all(|e| *e <= 1e-9),
                "{name}: exact regime but errors {errs:?}"
            );
            summary.push_str(&format!("{name} exact({:.1e}) ", errs[2]));
        } else {
            let slope = report.theta_order.slope;
            assert!(
                (1.5..=2.5).contains(&slope),
                "{name}: empirical order {slope} outside [1.5, 2.5]; errors {errs:?}"
            );
            summary.push_str(&format!("{name} order {slope:.2} "));
        }
        if name == "plane" || name == "cylinder" {
            assert!(
                report.rows[0].theta_max_err <= 1e-8,
                "{name} at n=16: {} > 1e-8",
                report.rows[0].theta_max_err
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 60.0,
        "round-trip sweep took {elapsed:?}, budget is 60 s"
    );
    println!("criterion 1: PASS — {summary}in {elapsed:?}");
}

#[test]
fn criterion_2_recovered_forms() {
    let mut summary = String::new();
    for name in CASES {
        let case = CorpusCase::from_name(name).unwrap();
        let report = roundtrip_study(&case, &NS, &opts()).unwrap();
        let hs: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
        let errs: Vec<f64> = report
            .rows
            .iter()
            .map(|r| r.a_err_l2.max(r.b_err_l2))
            .collect();
        let finest = errs[errs.len() - 1];
        assert!(
            finest <= 1e-2,
            "{name}: recovered-form error {finest} > 1e-2 at h = 1/64"
        );
        if errs.iter().all(|e| *e <= 1e-12) {
            summary.push_str(&format!("{name} exact "));
        } else {
            let fit = empirical_order(&hs, &errs);
            assert!(
                fit.slope >= 1.5,
                "{name}: recovered-form order {} < 1.5 (errors {errs:?})",
                fit.slope
            );
            summary.push_str(&format!("{name} order {:.2} ", fit.slope));
        }
    }
    println!("criterion 2: PASS — {summary}");
}

#[test]
fn criterion_3_antisymmetry_defect() {
    let defect_of = |name: &str, n: usize| -> f64 {
        let case = CorpusCase::from_name(name).unwrap();
        let spec = GridSpec::unit_square(n).unwrap();
        let (a, b) = sample_forms(&case, &spec).unwrap();
        let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
        bundle.diagnostics.skew_defect_max[0].max(bundle.diagnostics.skew_defect_max[1])
    };

    for n in NS {
        let d = defect_of("cylinder", n);
        assert!(d <= 1e-12, "cylinder defect {d} at n={n}");
    }
    let mut summary = "cylinder <= 1e-12".to_string();
    for name in ["sphere", "torus"] {
        let defects: Vec<f64> = NS.iter().map(|&n| defect_of(name, n)).collect();
        let hs: Vec<f64> = NS.iter().map(|&n| 1.0 / n as f64).collect();
        let fit = empirical_order(&hs, &defects);
        assert!(
            fit.slope >= 1.5,
            "{name}: defect order {} < 1.5 ({defects:?})",
            fit.slope
        );
        summary.push_str(&format!(", {name} order {:.2}", fit.slope));
    }
    println!("criterion 3: PASS — {summary}");
}

#[test]
fn criterion_4_frame_validity() {
    let mut worst_ortho = 0.0_f64;
    let mut worst_det = 0.0_f64;
    for name in CASES {
        let case = CorpusCase::from_name(name).unwrap();
        for n in [32usize, 64] {
            let spec = GridSpec::unit_square(n).unwrap();
            let (a, b) = sample_forms(&case, &spec).unwrap();
            let result = reconstruct(&a, &b, &opts()).unwrap();
            for (_, _, p) in result.frame.field.iter_nodes() {
                worst_ortho = worst_ortho.max(p.orthogonality_defect());
                worst_det = worst_det.max(p.det_defect());
            }
            assert!(
                worst_ortho <= 1e-8,
                "{name} n={n}: ortho defect {worst_ortho}"
            );
            assert!(worst_det <= 1e-8, "{name} n={n}: det defect {worst_det}");
            let frac = result.diagnostics.frame.projection_fraction;
            assert!(
                frac <= 0.01,
                "{name} n={n}: {:.2}% nodes re-projected",
                frac * 100.0
            );
        }
    }
    println!(
        "criterion 4: PASS — worst orthogonality defect {worst_ortho:.2e}, \
         worst det defect {worst_det:.2e}, no projections needed"
    );
}

#[test]
fn criterion_5_uniqueness_up_to_constants() {
    let case = CorpusCase::from_name("sphere").unwrap();
    let spec = GridSpec::unit_square(32).unwrap();
    let bound = 10.0 * spec.h * spec.h;

    // frame solves from two anchors differ by one constant rotation
    let (a, b) = sample_forms(&case, &spec).unwrap();
    let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
    let sol_center = solve_frame(
        &bundle.omega,
        spec.center_node(),
        RotMat3::IDENTITY,
        Convention::Right,
    )
    .unwrap();
    let sol_corner =
        solve_frame(&bundle.omega, (2, 2), RotMat3::IDENTITY, Convention::Right).unwrap();
    let (_, frame_spread) = relate_solutions(&sol_center, &sol_corner).unwrap();
    assert!(
        frame_spread <= bound,
        "frame spread {frame_spread} > {bound}"
    );

    // potential integrations from two anchors differ by one constant
    let result = reconstruct(&a, &b, &opts()).unwrap();
    let pa = integrate_potential(&result.f[0], &result.f[1], (0, 0), Vec3::ZERO).unwrap();
    let pb = integrate_potential(&result.f[0], &result.f[1], (20, 9), Vec3::ZERO).unwrap();
    let diff = pa.theta.zip_map(&pb.theta, |u, v| *u - *v).unwrap();
    let n = diff.values().len() as f64;
    let mean = diff.values().iter().fold(Vec3::ZERO, |acc, v| acc + *v) * (1.0 / n);
    let pot_spread = diff
        .values()
        .iter()
        .map(|v| (*v - mean).norm())
        .fold(0.0, f64::max);
    assert!(
        pot_spread <= bound,
        "potential spread {pot_spread} > {bound}"
    );

    // different base gauges align back to each other exactly
    let r0 = exp_skew3(&SkewMat3::new(0.4, -0.9, 0.3));
    let t0 = Vec3::new(-0.7, 1.3, 0.2);
    let gauged = reconstruct(
        &a,
        &b,
        &ReconstructOpts {
            base_frame: r0,
            base_point: t0,
            ..opts()
        },
    )
    .unwrap();
    let (_, rms) = align_rigid(&result.theta, &gauged.theta).unwrap();
    assert!(rms <= 1e-10, "gauge alignment rms {rms} > 1e-10");

    println!(
        "criterion 5: PASS — frame spread {frame_spread:.2e}, potential spread \
         {pot_spread:.2e} (bound {bound:.2e}), gauge rms {rms:.2e}"
    );
}

#[test]
fn criterion_6_compatibility_equivalence() {
    // compatible cases: all three residual families below 10 h^2
    let mut worst_ratio = 0.0_f64;
    for name in CASES {
        let case = CorpusCase::from_name(name).unwrap();
        for n in NS {
            let spec = GridSpec::unit_square(n).unwrap();
            let tol = 10.0 * spec.h * spec.h;
            let (a, b) = sample_forms(&case, &spec).unwrap();
            let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
            let (report, _) = compat_report(&a, &b, &bundle, 2).unwrap();
            let worst = report
                .omega_residual_l2
                .max(report.gamma_residual_l2)
                .max(report.gauss_residual_l2)
                .max(report.codazzi_residual_l2[0])
                .max(report.codazzi_residual_l2[1]);
            assert!(worst <= tol, "{name} n={n}: residual {worst} > tol {tol}");
            worst_ratio = worst_ratio.max(worst / tol);
        }
    }

    // the incompatible pair: omega and gauss stay away from zero at
    // every h while codazzi vanishes
    for n in NS {
        let spec = GridSpec::unit_square(n).unwrap();
        let a = GridField::constant(spec, SpdMat2::IDENTITY);
        let b = GridField::constant(spec, SymMat2::IDENTITY);
        let bundle = build_coefficients(&a, &b, &CoefficientOpts::default()).unwrap();
        let (report, _) = compat_report(&a, &b, &bundle, 2).unwrap();
        assert!(
            report.omega_residual_l2 > 0.5,
            "n={n}: omega residual {} not > 0.5",
            report.omega_residual_l2
        );
        assert!(
            report.gauss_residual_l2 > 0.5,
            "n={n}: gauss residual {} not > 0.5",
            report.gauss_residual_l2
        );
        assert!(report.codazzi_residual_l2[0] <= 1e-12);
        assert!(report.codazzi_residual_l2[1] <= 1e-12);
    }
    println!(
        "criterion 6: PASS — compatible residuals at most {:.0}% of 10h^2; \
         incompatible pair stays above 0.5",
        worst_ratio * 100.0
    );
}

#[test]
fn criterion_7_holonomy() {
    // compatible: per-cell loop angle below 10 h^3 for the analytic
    // coefficients of every case
    let mut worst_ratio = 0.0_f64;
    for name in CASES {
        let case = CorpusCase::from_name(name).unwrap();
        for n in NS {
            let spec = GridSpec::unit_square(n).unwrap();
            let omega = sample_omega(&case, &spec).unwrap();
            let report = plaquette_holonomy(&omega).unwrap();
            let bound = 10.0 * spec.h * spec.h * spec.h;
            assert!(
                report.max_defect <= bound,
                "{name} n={n}: holonomy {} > {bound}",
                report.max_defect
            );
            worst_ratio = worst_ratio.max(report.max_defect / bound);
        }
    }

    // incompatible constant pair at h = 1/64: the loop angle equals
    // h^2 |[W1, W2]| within twenty percent
    let spec = GridSpec::unit_square(64).unwrap();
    let w1 = SkewMat3::new(1.0, 0.0, 0.0);
    let w2 = SkewMat3::new(0.0, 1.0, 0.0);
    let omega = [GridField::constant(spec, w1), GridField::constant(spec, w2)];
    let report = plaquette_holonomy(&omega).unwrap();
    let scale = spec.h * spec.h * SkewMat3::commutator(&w1, &w2).angle();
    let ratio = report.max_defect / scale;
    assert!(
        (0.8..=1.2).contains(&ratio),
        "incompatible holonomy ratio {ratio} outside 1 +- 0.2"
    );
    println!(
        "criterion 7: PASS — compatible holonomy at most {:.1e} of 10h^3; \
         incompatible ratio {ratio:.4}",
        worst_ratio
    );
}

#[test]
fn criterion_8_compactness_experiment() {
    let spec = GridSpec::unit_square(32).unwrap();
    let report = compactness_experiment(
        &CompactnessFamily::SphereRadius,
        &[2, 4, 8, 16],
        &spec,
        &opts(),
        1,
    )
    .unwrap();
    assert!(
        report.w22_monotone,
        "W22 deviations not monotone: {:?}",
        report.rows.iter().map(|r| r.dev_w22).collect::<Vec<_>>()
    );
    for r in &report.w22_ratios {
        assert!(
            (0.3..=0.7).contains(r),
            "consecutive ratio {r} outside [0.3, 0.7]"
        );
    }
    for (m, mono) in report.pairings_monotone.iter().enumerate() {
        assert!(mono, "pairing functional {m} does not decay monotonically");
    }
    println!(
        "criterion 8: PASS — W22 ratios {:?}, all 10 pairings decay",
        report
            .w22_ratios
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
}

#[test]
fn criterion_9_oracle_suites() {
    // 9a: closed-form square root against an independent
    // eigendecomposition (10^4 random SPD, eigenvalues in [1e-3, 1e3])
    let mut rng = StdRng::seed_from_u64(20240901);
    let mut worst_sqrt = 0.0_f64;
    for _ in 0..10_000 {
        let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (c, s) = (t.cos(), t.sin());
        let l1 = 1e-3 * 1e6_f64.powf(rng.gen::<f64>());
        let l2 = 1e-3 * 1e6_f64.powf(rng.gen::<f64>());
        let a = SpdMat2::new(
            c * c * l1 + s * s * l2,
            c * s * (l1 - l2),
            s * s * l1 + c * c * l2,
        )
        .unwrap();

        // oracle: diagonalize, root the eigenvalues, recompose; the
        // smaller eigenvalue comes from det / larger to avoid
        // cancellation
        let half = 0.5 * (2.0 * a.a12()).atan2(a.a11() - a.a22());
        let (ch, sh) = (half.cos(), half.sin());
        let disc = ((a.a11() - a.a22()).powi(2) + 4.0 * a.a12() * a.a12()).sqrt();
        let big = 0.5 * (a.trace() + disc);
        let small = a.det() / big;
        let (r1, r2) = (big.sqrt(), small.sqrt());
        let oracle = SymMat2::new(
            ch * ch * r1 + sh * sh * r2,
            ch * sh * (r1 - r2),
            sh * sh * r1 + ch * ch * r2,
        );
        let ours = sqrt_spd2(&a).unwrap().as_sym();
        let rel = (ours - oracle).frobenius_norm() / oracle.frobenius_norm();
        worst_sqrt = worst_sqrt.max(rel);
    }
    assert!(worst_sqrt <= 1e-12, "sqrt oracle deviation {worst_sqrt}");

    // 9b: Rodrigues exponential against a scaling-and-squaring series
    // (10^3 random generators)
    let mut worst_exp = 0.0_f64;
    for _ in 0..1000 {
        let w = SkewMat3::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
        );
        let ours = exp_skew3(&w).as_mat3();
        let mut x = w.to_mat3();
        let mut squarings = 0;
        while x.frobenius_norm() > 0.25 {
            x = x.scale(0.5);
            squarings += 1;
        }
        let mut sum = Mat3::IDENTITY;
        let mut term = Mat3::IDENTITY;
        for k in 1..=20 {
            term = (term * x).scale(1.0 / k as f64);
            sum = sum + term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        worst_exp = worst_exp.max((ours - sum).frobenius_norm());
    }
    assert!(worst_exp <= 1e-10, "exp oracle deviation {worst_exp}");

    // 9c: edge transport along a path with genuinely varying,
    // non-commuting coefficients built from the sphere case: the
    // diagonal of the parameter square, with the fine-substep transport
    // as reference
    let case = CorpusCase::from_name("sphere").unwrap();
    let omega_diag = |t: f64| -> SkewMat3 {
        let [o1, o2] = case.omega_exact(t, t).unwrap();
        o1 + o2
    };
    let transport = |steps: usize, substeps: usize| -> RotMat3 {
        let n = steps * substeps;
        let dt = 1.0 / n as f64;
        let mut p = RotMat3::IDENTITY;
        for k in 0..n {
            let t0 = k as f64 * dt;
            p = step_edge(
                &p,
                &omega_diag(t0),
                &omega_diag(t0 + dt),
                dt,
                Convention::Right,
            );
        }
        p
    };
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for steps in [8usize, 16, 32, 64] {
        let coarse = transport(steps, 1);
        let fine = transport(steps, 100);
        hs.push(1.0 / steps as f64);
        errs.push(coarse.frob_dist(&fine));
    }
    let fit = empirical_order(&hs, &errs);
    assert!(
        (1.5..=2.5).contains(&fit.slope),
        "transport order {} (errors {errs:?})",
        fit.slope
    );
    assert!(fit.r_squared >= 0.99, "transport fit R^2 {}", fit.r_squared);

    println!(
        "criterion 9: PASS — sqrt oracle {worst_sqrt:.2e}, exp oracle {worst_exp:.2e}, \
         transport order {:.3} with R^2 {:.5}",
        fit.slope, fit.r_squared
    );
}
