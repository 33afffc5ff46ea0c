//! Subcommand definitions and drivers.

use crate::config::{self, GlobalOpts, RunConfig};
use crate::io::{self, DumpFormat};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use formsurf::coefficients::{build_coefficients, BundleDiagnostics};
use formsurf::compatibility::{compat_report, CompatReport};
use formsurf::corpus::{self, CorpusCase};
use formsurf::grid::{GridField, GridSpec};
use formsurf::obj::write_obj;
use formsurf::pfaffian::{
    frame_grad_ratio, plaquette_holonomy, solve_frame, Convention, SolveDiagnostics,
};
use formsurf::reconstruction::{
    compactness_experiment, reconstruct, roundtrip_study, CompactnessFamily, CompactnessReport,
    ImmersionDiagnostics, RoundtripReport,
};
use formsurf::smallmat::{RotMat3, SpdMat2, SymMat2};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "formsurf",
    version,
    about = "Surface reconstruction from prescribed first and second fundamental forms"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

/// Either a named reference case sampled on a unit-square grid, or a
/// pair of grid files.
#[derive(Args, Debug)]
pub struct FormsSource {
    /// Reference case name (plane, cylinder, sphere, torus, helicoid, monge)
    #[arg(long, conflicts_with_all = ["a", "b"], requires = "n")]
    case: Option<String>,
    /// Cells per side of the unit-square grid (spacing 1/n)
    #[arg(long)]
    n: Option<usize>,
    /// Metric field file (csv or binary stem), used with --b
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    /// Second-form field file, used with --a
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
}

impl FormsSource {
    fn load(&self) -> Result<(GridField<SpdMat2>, GridField<SymMat2>, String)> {
        match (&self.case, &self.a, &self.b) {
            (Some(case), None, None) => {
                let n = self.n.context("--case needs --n")?;
                let case = CorpusCase::from_name(case)?;
                let spec = GridSpec::unit_square(n)?;
                let (a, b) = corpus::sample_forms(&case, &spec)?;
                Ok((a, b, format!("case {} at n={}", case.name(), n)))
            }
            (None, Some(a_path), Some(b_path)) => {
                let (a, b) = io::load_forms(a_path, b_path)?;
                Ok((
                    a,
                    b,
                    format!("files {} / {}", a_path.display(), b_path.display()),
                ))
            }
            _ => bail!("supply either --case NAME --n N or --a FILE --b FILE"),
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Reference-surface utilities
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Build the antisymmetric connection coefficients from (a, b)
    BuildOmega {
        #[command(flatten)]
        source: FormsSource,
        /// Output prefix; writes <out>.omega1.*, <out>.omega2.*
        #[arg(long)]
        out: PathBuf,
        /// Also dump the intermediates (christoffel, g, gamma1, gamma2)
        #[arg(long)]
        full_bundle: bool,
        #[arg(long, value_enum, default_value = "binary")]
        format: DumpFormat,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate the compatibility residuals in all three forms
    CheckCompat {
        #[command(flatten)]
        source: FormsSource,
        /// Also dump per-node residual fields under this prefix
        #[arg(long)]
        dump_residuals: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate the frame system from a coefficient dump
    SolveFrame {
        #[arg(long)]
        omega1: PathBuf,
        #[arg(long)]
        omega2: PathBuf,
        /// Anchor node "i,j" (default: grid center)
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        format: DumpFormat,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Full pipeline: forms to immersion, with diagnostics
    Reconstruct {
        #[command(flatten)]
        source: FormsSource,
        #[arg(long)]
        out: PathBuf,
        /// Optional OBJ mesh export of the immersion
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "binary")]
        format: DumpFormat,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Reconstruct a reference case across refinements and compare
    /// against the analytic immersion
    Roundtrip {
        #[arg(long)]
        case: String,
        /// Comma-separated refinement list, e.g. 16,32,64
        #[arg(long)]
        n: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convergence experiment for a family of immersions
    Compactness {
        /// Family name (sphere-radius, flexed-cylinder, constant)
        #[arg(long)]
        family: String,
        /// Comma-separated member indices, e.g. 2,4,8,16
        #[arg(long)]
        ks: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
pub enum CorpusAction {
    /// Sample a case and write its (theta, a, b) grid files
    Dump {
        /// Case name
        case: String,
        #[arg(long)]
        n: usize,
        /// Output prefix; writes <out>.theta.*, <out>.a.*, <out>.b.*
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: DumpFormat,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = config::resolve(&cli.global)?;
    match cli.command {
        Command::Corpus { action } => match action {
            CorpusAction::Dump {
                case,
                n,
                out,
                format,
                report,
            } => corpus_dump(&cfg, &case, n, &out, format, report),
        },
        Command::BuildOmega {
            source,
            out,
            full_bundle,
            format,
            report,
        } => build_omega(&cfg, &source, &out, full_bundle, format, report),
        Command::CheckCompat {
            source,
            dump_residuals,
            report,
        } => check_compat(&cfg, &source, dump_residuals, report),
        Command::SolveFrame {
            omega1,
            omega2,
            base,
            out,
            format,
            report,
        } => solve_frame_cmd(&cfg, &omega1, &omega2, base, &out, format, report),
        Command::Reconstruct {
            source,
            out,
            mesh,
            format,
            report,
        } => reconstruct_cmd(&cfg, &source, &out, mesh, format, report),
        Command::Roundtrip { case, n, report } => roundtrip_cmd(&cfg, &case, &n, report),
        Command::Compactness {
            family,
            ks,
            n,
            report,
        } => compactness_cmd(&cfg, &family, &ks, n, report),
    }
}

fn report_path(explicit: Option<PathBuf>, out: Option<&PathBuf>, command: &str) -> PathBuf {
    explicit.unwrap_or_else(|| match out {
        Some(out) => {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(format!(".{command}.report.json"));
            out.with_file_name(name)
        }
        None => PathBuf::from(format!("{command}.report.json")),
    })
}

#[derive(Serialize)]
struct DumpPayload {
    case: String,
    grid: GridSpec,
    lambda_floor: f64,
    files: Vec<String>,
}

fn corpus_dump(
    cfg: &RunConfig,
    case_name: &str,
    n: usize,
    out: &PathBuf,
    format: DumpFormat,
    report: Option<PathBuf>,
) -> Result<()> {
    let case = CorpusCase::from_name(case_name)?;
    let spec = GridSpec::unit_square(n)?;
    let theta = corpus::sample_theta(&case, &spec)?;
    let (a, b) = corpus::sample_forms(&case, &spec)?;

    let mut files = Vec::new();
    files.extend(io::dump_vec3(&theta, &suffixed(out, "theta"), format)?);
    files.extend(io::dump_field(&a, &suffixed(out, "a"), format)?);
    files.extend(io::dump_field(&b, &suffixed(out, "b"), format)?);
    let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();

    println!(
        "dumped case {} on {}x{} grid (h = {}), {} files",
        case.name(),
        spec.nx,
        spec.ny,
        spec.h,
        files.len()
    );
    config::write_report(
        "corpus-dump",
        cfg,
        DumpPayload {
            case: case.name().to_string(),
            grid: spec,
            lambda_floor: case.lambda_floor(),
            files,
        },
        &report_path(report, Some(out), "corpus-dump"),
    )
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    prefix.with_file_name(name)
}

#[derive(Serialize)]
struct BuildOmegaPayload {
    source: String,
    grid: GridSpec,
    diagnostics: BundleDiagnostics,
    files: Vec<String>,
}

fn build_omega(
    cfg: &RunConfig,
    source: &FormsSource,
    out: &PathBuf,
    full_bundle: bool,
    format: DumpFormat,
    report: Option<PathBuf>,
) -> Result<()> {
    let (a, b, source_desc) = source.load()?;
    let opts = cfg.reconstruct_opts().coefficient_opts();
    let bundle = build_coefficients(&a, &b, &opts)?;

    let mut files = Vec::new();
    files.extend(io::dump_field(
        &bundle.omega[0],
        &suffixed(out, "omega1"),
        format,
    )?);
    files.extend(io::dump_field(
        &bundle.omega[1],
        &suffixed(out, "omega2"),
        format,
    )?);
    if full_bundle {
        files.extend(io::dump_field(
            &bundle.christoffel,
            &suffixed(out, "christoffel"),
            format,
        )?);
        files.extend(io::dump_field(&bundle.g_ext, &suffixed(out, "g"), format)?);
        files.extend(io::dump_field(
            &bundle.gamma[0],
            &suffixed(out, "gamma1"),
            format,
        )?);
        files.extend(io::dump_field(
            &bundle.gamma[1],
            &suffixed(out, "gamma2"),
            format,
        )?);
    }
    let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();

    let d = &bundle.diagnostics;
    println!(
        "coefficients built from {source_desc}: antisymmetry defect {:.3e}, min eigenvalue {:.3e}",
        d.skew_defect_max[0].max(d.skew_defect_max[1]),
        d.min_eig
    );
    if d.skew_tol_exceeded {
        println!(
            "warning: antisymmetry defect above tolerance {:.1e} — inconsistent data or grid too coarse",
            d.tol_skew
        );
    }
    config::write_report(
        "build-omega",
        cfg,
        BuildOmegaPayload {
            source: source_desc,
            grid: *a.spec(),
            diagnostics: bundle.diagnostics,
            files,
        },
        &report_path(report, Some(out), "build-omega"),
    )
}

#[derive(Serialize)]
struct CheckCompatPayload {
    source: String,
    grid: GridSpec,
    bundle: BundleDiagnostics,
    compat: CompatReport,
    residual_files: Vec<String>,
}

fn check_compat(
    cfg: &RunConfig,
    source: &FormsSource,
    dump_residuals: Option<PathBuf>,
    report: Option<PathBuf>,
) -> Result<()> {
    let (a, b, source_desc) = source.load()?;
    let opts = cfg.reconstruct_opts().coefficient_opts();
    let bundle = build_coefficients(&a, &b, &opts)?;
    let (compat, fields) = compat_report(&a, &b, &bundle, cfg.interior_margin)?;

    let mut residual_files = Vec::new();
    if let Some(prefix) = dump_residuals {
        residual_files.extend(io::dump_field(
            &fields.omega,
            &suffixed(&prefix, "omega-residual"),
            DumpFormat::Binary,
        )?);
        residual_files.extend(io::dump_field(
            &fields.gamma,
            &suffixed(&prefix, "gamma-residual"),
            DumpFormat::Binary,
        )?);
        residual_files.extend(io::dump_field(
            &fields.gauss,
            &suffixed(&prefix, "gauss-residual"),
            DumpFormat::Binary,
        )?);
        residual_files.extend(io::dump_field(
            &fields.codazzi[0],
            &suffixed(&prefix, "codazzi1-residual"),
            DumpFormat::Binary,
        )?);
        residual_files.extend(io::dump_field(
            &fields.codazzi[1],
            &suffixed(&prefix, "codazzi2-residual"),
            DumpFormat::Binary,
        )?);
    }
    let residual_files: Vec<String> = residual_files
        .iter()
        .map(|p| p.display().to_string())
        .collect();

    println!(
        "compatibility of {source_desc} (interior margin {}):",
        compat.interior_margin
    );
    println!(
        "  omega form   L2 {:.3e} (max {:.3e})",
        compat.omega_residual_l2, compat.omega_residual_max
    );
    println!("  gamma form   L2 {:.3e}", compat.gamma_residual_l2);
    println!(
        "  gauss / codazzi  L2 {:.3e} / {:.3e}, {:.3e}",
        compat.gauss_residual_l2, compat.codazzi_residual_l2[0], compat.codazzi_residual_l2[1]
    );
    let grid = *a.spec();
    config::write_report(
        "check-compat",
        cfg,
        CheckCompatPayload {
            source: source_desc,
            grid,
            bundle: bundle.diagnostics,
            compat,
            residual_files,
        },
        &report_path(report, None, "check-compat"),
    )
}

#[derive(Serialize)]
struct SolveFramePayload {
    grid: GridSpec,
    base_node: (usize, usize),
    solve: SolveDiagnostics,
    holonomy_max: f64,
    holonomy_l2: f64,
    grad_ratio: f64,
    files: Vec<String>,
}

fn solve_frame_cmd(
    cfg: &RunConfig,
    omega1: &Path,
    omega2: &Path,
    base: Option<String>,
    out: &PathBuf,
    format: DumpFormat,
    report: Option<PathBuf>,
) -> Result<()> {
    let omega = io::load_omega(omega1, omega2)?;
    let spec = *omega[0].spec();
    let base_node = match base {
        Some(text) => io::parse_node(&text)?,
        None => spec.center_node(),
    };
    let frame = solve_frame(&omega, base_node, RotMat3::IDENTITY, Convention::Right)?;
    let holonomy = plaquette_holonomy(&omega)?;
    let grad_ratio = frame_grad_ratio(&frame, &omega, cfg.interior_margin)?;

    let files: Vec<String> = io::dump_frame(&frame.field, &suffixed(out, "frame"), format)?
        .iter()
        .map(|p| p.display().to_string())
        .collect();

    println!(
        "frame integrated from ({}, {}): max orthogonality drift {:.3e}, {} projections, \
         max plaquette holonomy {:.3e}",
        base_node.0,
        base_node.1,
        frame.diagnostics.max_ortho_defect,
        frame.diagnostics.projection_count,
        holonomy.max_defect
    );
    config::write_report(
        "solve-frame",
        cfg,
        SolveFramePayload {
            grid: spec,
            base_node,
            solve: frame.diagnostics,
            holonomy_max: holonomy.max_defect,
            holonomy_l2: holonomy.l2_defect,
            grad_ratio,
            files,
        },
        &report_path(report, Some(out), "solve-frame"),
    )
}

#[derive(Serialize)]
struct ReconstructPayload {
    source: String,
    grid: GridSpec,
    diagnostics: ImmersionDiagnostics,
    files: Vec<String>,
    mesh: Option<String>,
}

fn reconstruct_cmd(
    cfg: &RunConfig,
    source: &FormsSource,
    out: &PathBuf,
    mesh: Option<PathBuf>,
    format: DumpFormat,
    report: Option<PathBuf>,
) -> Result<()> {
    let (a, b, source_desc) = source.load()?;
    let result = reconstruct(&a, &b, &cfg.reconstruct_opts())?;

    let mut files = Vec::new();
    files.extend(io::dump_vec3(
        &result.theta,
        &suffixed(out, "theta"),
        format,
    )?);
    files.extend(io::dump_frame(
        &result.frame.field,
        &suffixed(out, "frame"),
        format,
    )?);
    let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();

    let mesh_file = match &mesh {
        Some(path) => {
            write_obj(&result.theta, &result.f[2], path)?;
            Some(path.display().to_string())
        }
        None => None,
    };

    let d = &result.diagnostics;
    println!("reconstructed {source_desc}:");
    println!(
        "  recovered forms (interior L2): a {:.3e}, b {:.3e}",
        d.recovered_a_err_l2, d.recovered_b_err_l2
    );
    println!(
        "  compatibility residual {:.3e}, holonomy max {:.3e}, immersion margin {:.3e}",
        d.compat.omega_residual_l2, d.holonomy_max, d.min_cross_norm
    );
    if d.incompatibility_warning {
        println!("  warning: compatibility residual above 10 h^2 — data are inconsistent; the output is a best-effort integration");
    }
    if d.bundle.skew_tol_exceeded {
        println!(
            "  warning: antisymmetry defect above tolerance {:.1e}",
            d.bundle.tol_skew
        );
    }

    let grid = *a.spec();
    config::write_report(
        "reconstruct",
        cfg,
        ReconstructPayload {
            source: source_desc,
            grid,
            diagnostics: result.diagnostics,
            files,
            mesh: mesh_file,
        },
        &report_path(report, Some(out), "reconstruct"),
    )
}

#[derive(Serialize)]
struct RoundtripPayload {
    report: RoundtripReport,
}

fn roundtrip_cmd(
    cfg: &RunConfig,
    case_name: &str,
    n_list: &str,
    report: Option<PathBuf>,
) -> Result<()> {
    let case = CorpusCase::from_name(case_name)?;
    let ns = io::parse_list(n_list)?;
    anyhow::ensure!(!ns.is_empty(), "refinement list is empty");
    let study = roundtrip_study(&case, &ns, &cfg.reconstruct_opts())?;

    println!("round trip for case {}:", study.case);
    println!("  n      h        max theta err   a err L2     b err L2");
    for row in &study.rows {
        println!(
            "  {:4}  {:.5}  {:.6e}   {:.4e}  {:.4e}",
            row.n, row.h, row.theta_max_err, row.a_err_l2, row.b_err_l2
        );
    }
    if study.exact_regime {
        println!("  errors at machine precision (constant-coefficient exactness)");
    } else {
        println!(
            "  empirical orders: theta {:.2} (R^2 {:.4}), a {:.2}, b {:.2}",
            study.theta_order.slope,
            study.theta_order.r_squared,
            study.a_order.slope,
            study.b_order.slope
        );
    }
    config::write_report(
        "roundtrip",
        cfg,
        RoundtripPayload { report: study },
        &report_path(report, None, "roundtrip"),
    )
}

#[derive(Serialize)]
struct CompactnessPayload {
    report: CompactnessReport,
}

fn compactness_cmd(
    cfg: &RunConfig,
    family_name: &str,
    ks_list: &str,
    n: usize,
    report: Option<PathBuf>,
) -> Result<()> {
    let family = CompactnessFamily::from_name(family_name)?;
    let ks: Vec<u32> = io::parse_list(ks_list)?
        .into_iter()
        .map(|k| k as u32)
        .collect();
    anyhow::ensure!(!ks.is_empty(), "member list is empty");
    let spec = GridSpec::unit_square(n)?;
    let result = compactness_experiment(&family, &ks, &spec, &cfg.reconstruct_opts(), cfg.threads)?;

    println!(
        "convergence experiment, family {} at h = {}:",
        result.family, result.h
    );
    println!("  k     dev L2       dev W12      dev W22      align rms");
    for row in &result.rows {
        println!(
            "  {:3}  {:.4e}  {:.4e}  {:.4e}  {:.2e}",
            row.k, row.dev_l2, row.dev_w12, row.dev_w22, row.align_rms
        );
    }
    println!(
        "  W22 monotone: {}; consecutive ratios {:?}",
        result.w22_monotone,
        result
            .w22_ratios
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    config::write_report(
        "compactness",
        cfg,
        CompactnessPayload { report: result },
        &report_path(report, None, "compactness"),
    )
}
