//! `polyspec`: Laplace spectra of polygons from the command line.

mod failure;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use failure::{Failure, VALIDATION_FAILED};
use polyspec::assembly::{assemble, BoundaryCondition};
use polyspec::deform::{
    linspace, locate_degeneracy, random_gap_probe, relative_gaps, sweep_kappa, sweep_t,
    BranchDiagram, DeformError, DegeneracyFamily, GapReport, ProbeOptions, SweepOptions,
};
use polyspec::eigensolve::{smallest_eigenpairs, SolveOptions};
use polyspec::geometry::{
    delete_vertex_path, pl_family, triangulate_steiner, triangulate_structural, Polygon, TriMesh,
};
use polyspec::io::{
    branch_csv, mesh_json, polygon_json, read_polygon, spectrum_csv, to_json, write_file,
};
use polyspec::metric::MetricSpec;
use polyspec::validation::{select, Suite};

/// Worker threads for the parallel parts; results do not depend on it.
const THREADS_ENV: &str = "POLYSPEC_THREADS";

#[derive(Parser)]
#[command(
    name = "polyspec",
    version,
    about = "Laplace spectra of polygons under flat and constant-curvature metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest eigenvalues of one polygon.
    Spectrum {
        #[arg(long)]
        polygon: PathBuf,
        #[command(flatten)]
        job: JobConfig,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Branch diagram along a polygon path (`--target`) or a curvature range.
    Sweep {
        #[arg(long)]
        polygon: PathBuf,
        /// End polygon, vertex for vertex.
        #[arg(long, conflicts_with_all = ["kappa_from", "kappa_to"])]
        target: Option<PathBuf>,
        #[arg(long, requires = "kappa_to", allow_negative_numbers = true)]
        kappa_from: Option<f64>,
        #[arg(long, requires = "kappa_from", allow_negative_numbers = true)]
        kappa_to: Option<f64>,
        #[arg(long, default_value_t = 41)]
        samples: usize,
        /// Where to write the gap report; defaults to `<output>.gap.json`, or stderr.
        #[arg(long)]
        gap_report: Option<PathBuf>,
        #[command(flatten)]
        job: JobConfig,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a validation suite and print a pass/fail table.
    Validate {
        /// Suite name, or `all`.
        suite: String,
    },
    /// Slide one vertex onto the opposite side of its ear and sweep along the way.
    DeleteVertex {
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long, default_value_t = 41)]
        samples: usize,
        /// Where to write the end polygon.
        #[arg(long)]
        endpoint: Option<PathBuf>,
        #[command(flatten)]
        job: JobConfig,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Smallest relative gaps of random polygons.
    Probe {
        #[arg(long, default_value_t = 4)]
        vertices: usize,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = BoundaryCondition::Dirichlet)]
        bc: BoundaryCondition,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        /// Star-shaped simple polygons instead of convex ones.
        #[arg(long)]
        nonconvex: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export the mesh used for a polygon.
    Mesh {
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        h: f64,
        #[arg(long, default_value_t = 0)]
        refine: u32,
        /// Diagonals only, no interior points.
        #[arg(long)]
        structural: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct JobConfig {
    #[arg(long, default_value_t = BoundaryCondition::Dirichlet)]
    bc: BoundaryCondition,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    metric_scale: f64,
    /// Uniform refinement levels applied to the base mesh.
    #[arg(long, default_value_t = 3)]
    refine: u32,
    /// Edge length of the base mesh.
    #[arg(long, default_value_t = 0.25)]
    h: f64,
    /// Seed of the eigensolver start block.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

const MAX_REFINE: u32 = 8;

impl JobConfig {
    fn validate(&self) -> Result<(), Failure> {
        if self.k == 0 {
            return Err(Failure::invalid("InvalidArgument", "k must be at least 1"));
        }
        if !self.kappa.is_finite() {
            return Err(Failure::invalid(
                "InvalidKappa",
                format!("kappa must be finite, got {}", self.kappa),
            ));
        }
        if !(self.metric_scale > 0.0 && self.metric_scale.is_finite()) {
            return Err(Failure::invalid(
                "InvalidScale",
                format!("metric_scale must be positive, got {}", self.metric_scale),
            ));
        }
        if self.refine > MAX_REFINE {
            return Err(Failure::invalid(
                "InvalidArgument",
                format!("refine must be at most {MAX_REFINE}, got {}", self.refine),
            ));
        }
        check_h(self.h)
    }

    fn metric(&self) -> Result<MetricSpec, Failure> {
        Ok(MetricSpec::new(self.kappa, self.metric_scale)?)
    }

    fn solve(&self) -> SolveOptions {
        SolveOptions {
            seed: self.seed,
            ..SolveOptions::default()
        }
    }

    fn sweep(&self) -> SweepOptions {
        SweepOptions {
            solve: self.solve(),
            ..SweepOptions::default()
        }
    }

    fn mesh(&self, poly: &Polygon) -> Result<TriMesh, Failure> {
        Ok(triangulate_steiner(poly, self.h)?.refine(self.refine))
    }
}

fn check_h(h: f64) -> Result<(), Failure> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Failure::invalid(
            "InvalidArgument",
            format!("h must be positive and finite, got {h}"),
        ))
    }
}

fn check_samples(samples: usize) -> Result<(), Failure> {
    if samples < 2 {
        return Err(Failure::invalid(
            "TooFewSamples",
            format!("a sweep needs at least 2 samples, got {samples}"),
        ));
    }
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => Ok(write_file(p, text)?),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::invalid("FileAccess", format!("stdout: {e}")))
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(to_json(v)?)
}

#[derive(Serialize)]
struct MeshStats {
    points: usize,
    triangles: usize,
    level: u32,
    dofs: usize,
    max_edge: f64,
    min_angle_deg: f64,
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    bc: BoundaryCondition,
    kappa: f64,
    metric_scale: f64,
    eigenvalues: &'a [f64],
    residuals: &'a [f64],
    mesh: MeshStats,
}

fn cmd_spectrum(polygon: &Path, job: &JobConfig, out: &OutputArgs) -> Result<(), Failure> {
    job.validate()?;
    let poly = read_polygon(polygon)?;
    let metric = job.metric()?;
    metric.check_polygon(&poly)?;
    let mesh = job.mesh(&poly)?;
    let form = assemble(&mesh, &metric, job.bc)?;
    let s = smallest_eigenpairs(&form, job.k, &job.solve())?;
    let stats = MeshStats {
        points: mesh.num_points(),
        triangles: mesh.num_triangles(),
        level: job.refine,
        dofs: form.dim(),
        max_edge: mesh.max_edge_length(),
        min_angle_deg: mesh.min_angle_deg(),
    };
    eprintln!(
        "mesh: {} points, {} triangles, level {}, {} unknowns, max edge {:.4}, min angle {:.2} deg",
        stats.points, stats.triangles, stats.level, stats.dofs, stats.max_edge, stats.min_angle_deg
    );
    let text = match out.format {
        Format::Csv => spectrum_csv(&s),
        Format::Json => json(&SpectrumReport {
            bc: job.bc,
            kappa: job.kappa,
            metric_scale: job.metric_scale,
            eigenvalues: &s.eigenvalues,
            residuals: &s.residuals,
            mesh: stats,
        })?,
    };
    emit(out.output.as_deref(), &text)
}

fn diagram_text(d: &BranchDiagram, format: Format) -> Result<String, Failure> {
    match format {
        Format::Csv => Ok(branch_csv(d)),
        Format::Json => json(d),
    }
}

/// Golden-section search around the sample with the smallest gap. Falls back
/// to the sampled minimum when the bracket holds no interior minimum.
fn gap_report(
    d: &BranchDiagram,
    family: DegeneracyFamily,
    bc: BoundaryCondition,
    solve: &SolveOptions,
) -> Result<GapReport, Failure> {
    let s = (0..d.samples.len())
        .min_by(|&a, &b| d.gaps[a].total_cmp(&d.gaps[b]))
        .expect("sweeps have samples");
    let (j, gap) = relative_gaps(&d.sorted_at(s), bc)
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| {
            Failure::from(DeformError::TooFewEigenvalues {
                needed: 3,
                got: d.branches.len(),
            })
        })?;
    let lo = d.samples[s.saturating_sub(1)];
    let hi = d.samples[(s + 1).min(d.samples.len() - 1)];
    match locate_degeneracy(family, bc, j, (lo, hi), 1e-6 * (hi - lo), solve) {
        Ok(r) => Ok(r),
        Err(DeformError::NoMinimumInBracket(..)) => Ok(GapReport {
            param_star: d.samples[s],
            gap_star: gap,
            j,
            mesh_level: d.mesh_level,
            discretization_error_estimate: f64::NAN,
        }),
        Err(e) => Err(e.into()),
    }
}

fn write_gap_report(
    report: &GapReport,
    explicit: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let text = json(report)?;
    let derived = output.map(|o| o.with_extension("gap.json"));
    match explicit.or(derived.as_deref()) {
        Some(p) => Ok(write_file(p, &text)?),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    polygon: &Path,
    target: Option<&Path>,
    kappa_range: Option<(f64, f64)>,
    samples: usize,
    gap_path: Option<&Path>,
    job: &JobConfig,
    out: &OutputArgs,
) -> Result<(), Failure> {
    job.validate()?;
    check_samples(samples)?;
    let poly = read_polygon(polygon)?;
    let (diagram, report) = match (target, kappa_range) {
        (Some(t), None) => {
            let q = read_polygon(t)?;
            let path = pl_family(&poly, &q, &triangulate_structural(&poly)?)?.refine(job.refine);
            let d = sweep_t(&path, job.bc, job.k, samples, &job.sweep())?;
            let r = gap_report(&d, DegeneracyFamily::Path(&path), job.bc, &job.solve())?;
            (d, r)
        }
        (None, Some((a, b))) => {
            if !(a < b) {
                return Err(Failure::invalid(
                    "InvalidArgument",
                    format!("kappa range [{a}, {b}] is empty"),
                ));
            }
            let mesh = job.mesh(&poly)?;
            let d = sweep_kappa(
                &mesh,
                job.bc,
                job.k,
                &linspace(a, b, samples),
                job.metric_scale,
                &job.sweep(),
            )?;
            let family = DegeneracyFamily::Kappa {
                mesh: &mesh,
                metric_scale: job.metric_scale,
            };
            let r = gap_report(&d, family, job.bc, &job.solve())?;
            (d, r)
        }
        _ => {
            return Err(Failure::invalid(
                "InvalidArgument",
                "give either --target or --kappa-from with --kappa-to",
            ))
        }
    };
    for w in &diagram.warnings {
        eprintln!("warning: {w}");
    }
    emit(out.output.as_deref(), &diagram_text(&diagram, out.format)?)?;
    write_gap_report(&report, gap_path, out.output.as_deref())
}

fn cmd_validate(name: &str) -> Result<(), Failure> {
    let suites: Vec<Suite> = select(name).map_err(|e| Failure::invalid("UnknownSuite", e))?;
    let mut failed = Vec::new();
    for s in suites {
        let r = s.run();
        println!("{r}");
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: VALIDATION_FAILED,
            kind: "ValidationFailed",
            message: failed.join(", "),
        })
    }
}

fn cmd_delete_vertex(
    polygon: &Path,
    samples: usize,
    endpoint: Option<&Path>,
    job: &JobConfig,
    out: &OutputArgs,
) -> Result<(), Failure> {
    job.validate()?;
    check_samples(samples)?;
    let poly = read_polygon(polygon)?;
    let del = delete_vertex_path(&poly)?;
    eprintln!(
        "vertex {} moves to ({}, {}){}",
        del.vertex,
        del.midpoint.x,
        del.midpoint.y,
        if del.steiner.is_some() {
            "; path mesh uses an interior point"
        } else {
            ""
        }
    );
    let d = sweep_t(
        &del.path.refine(job.refine),
        job.bc,
        job.k,
        samples,
        &job.sweep(),
    )?;
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(p) = endpoint {
        write_file(p, &polygon_json(&del.endpoint))?;
    }
    emit(out.output.as_deref(), &diagram_text(&d, out.format)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_probe(
    n: usize,
    count: usize,
    seed: u64,
    k: usize,
    bc: BoundaryCondition,
    h: f64,
    nonconvex: bool,
    output: Option<&Path>,
) -> Result<(), Failure> {
    check_h(h)?;
    let opts = ProbeOptions {
        convex: !nonconvex,
        target_h: h,
        ..ProbeOptions::default()
    };
    let stats = random_gap_probe(n, count, seed, bc, k, &opts)?;
    if let Some(note) = &stats.note {
        eprintln!("note: {note}");
    }
    emit(output, &json(&stats)?)
}

fn cmd_mesh(
    polygon: &Path,
    h: f64,
    refine: u32,
    structural: bool,
    output: Option<&Path>,
) -> Result<(), Failure> {
    check_h(h)?;
    if refine > MAX_REFINE {
        return Err(Failure::invalid(
            "InvalidArgument",
            format!("refine must be at most {MAX_REFINE}, got {refine}"),
        ));
    }
    let poly = read_polygon(polygon)?;
    let base = if structural {
        triangulate_structural(&poly)?
    } else {
        triangulate_steiner(&poly, h)?
    };
    emit(output, &mesh_json(&base.refine(refine)))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::invalid(
            "InvalidArgument",
            format!("{THREADS_ENV} must be a positive integer, got '{v}'"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid("InvalidArgument", e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum { polygon, job, out } => cmd_spectrum(&polygon, &job, &out),
        Command::Sweep {
            polygon,
            target,
            kappa_from,
            kappa_to,
            samples,
            gap_report,
            job,
            out,
        } => cmd_sweep(
            &polygon,
            target.as_deref(),
            kappa_from.zip(kappa_to),
            samples,
            gap_report.as_deref(),
            &job,
            &out,
        ),
        Command::Validate { suite } => cmd_validate(&suite),
        Command::DeleteVertex {
            polygon,
            samples,
            endpoint,
            job,
            out,
        } => cmd_delete_vertex(&polygon, samples, endpoint.as_deref(), &job, &out),
        Command::Probe {
            vertices,
            count,
            seed,
            k,
            bc,
            h,
            nonconvex,
            output,
        } => cmd_probe(
            vertices,
            count,
            seed,
            k,
            bc,
            h,
            nonconvex,
            output.as_deref(),
        ),
        Command::Mesh {
            polygon,
            h,
            refine,
            structural,
            output,
        } => cmd_mesh(&polygon, h, refine, structural, output.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
