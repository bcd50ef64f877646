//! The `tbx` command line: construct, verify, analyse and classify two-box
//! structures stored as `tbx-1` documents.
//!
//! Exit codes: 0 on success or a passing verdict, 1 on a negative verdict
//! (verification failure, no isomorphism, unclassified), 2 on usage errors.
//! All output is deterministic for fixed inputs and flags; `TBX_TOL`
//! overrides the default equality tolerance.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::axioms::verify_axioms;
use crate::catalog::{self, CatalogError};
use crate::classify::{
    check_commute_relation, classify_dim4, dim_bound_report, lambda_matrix, new_part_dimension,
    ClassTag, DimBoundReport,
};
use crate::io::{self, IoError};
use crate::linalg::Tolerance;
use crate::positivity;
use crate::structure::Structure;

#[derive(Parser)]
#[command(name = "tbx", version, about = "two-box structure toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a catalog structure and write it to a file
    Make {
        /// Catalog name, e.g. TL(2), Z4, Z2xZ2, S3, Z2subZ7, FussCatalan(2,2),
        /// TL-free-Z3, Z2-tensor-TL(2)
        name: String,
        /// Parameters, currently `delta=<value>` for bare TL atoms
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
        #[command(flatten)]
        out: OutFile,
    },
    /// Free product of two structures
    Free {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        out: OutFile,
        #[arg(long)]
        force: bool,
    },
    /// Tensor product of two structures
    Tensor {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        out: OutFile,
        #[arg(long)]
        force: bool,
    },
    /// Fourier dual of a structure
    Dual {
        a: PathBuf,
        #[command(flatten)]
        out: OutFile,
        #[arg(long)]
        force: bool,
    },
    /// Run the axiom suite on a document
    Verify {
        file: PathBuf,
        /// Equality tolerance override
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the dimension-four classification driver
    Classify {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        force: bool,
    },
    /// Structural report: dimensions, traces, coproduct table, biprojections,
    /// virtual normalizers, eigenvalue matrix, dimension bounds
    Report {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        force: bool,
    },
    /// Search for a structure isomorphism between two documents
    Iso { a: PathBuf, b: PathBuf },
}

#[derive(Args)]
struct OutFile {
    /// Output file
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: PathBuf,
}

/// Entry point used by the binary and by tests.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                return 2;
            }
            let _ = write!(stdout, "{rendered}");
            return 0;
        }
    };
    let tol = tolerance_from_env();
    match dispatch(cli.command, &tol, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn tolerance_from_env() -> Tolerance {
    match std::env::var("TBX_TOL").ok().and_then(|v| v.parse::<f64>().ok()) {
        Some(eq) if eq > 0.0 && eq.is_finite() => Tolerance::with_eq_tol(eq),
        _ => Tolerance::default(),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> CliError {
        match e {
            IoError::AxiomFailure(_) => CliError::Data(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> CliError {
        match e {
            CatalogError::ClosureFailure { .. } | CatalogError::DualAxiomFailure(_) => {
                CliError::Data(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn read_structure(path: &Path, tol: &Tolerance, force: bool) -> Result<Structure, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(io::parse(&text, tol, force)?)
}

fn write_structure(s: &Structure, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, io::serialize(s))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn parse_params(params: &[String]) -> Result<f64, CliError> {
    let mut delta = 2.0;
    for p in params {
        match p.split_once('=') {
            Some(("delta", v)) => {
                delta = v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad value in --param {p}")))?;
            }
            _ => return Err(CliError::Usage(format!("unknown parameter `{p}`"))),
        }
    }
    Ok(delta)
}

fn dispatch(
    command: Command,
    tol: &Tolerance,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        Command::Make { name, params, out } => {
            let delta = parse_params(&params)?;
            let s = catalog::named(&name, delta, tol)?;
            write_structure(&s, &out.out)?;
            let _ = writeln!(stdout, "wrote {} (dim {}, delta {})", out.out.display(), s.dim(), s.delta());
            Ok(0)
        }
        Command::Free { a, b, out, force } => {
            let sa = read_structure(&a, tol, force)?;
            let sb = read_structure(&b, tol, force)?;
            let s = catalog::free_product(&sa, &sb, tol)?;
            write_structure(&s, &out.out)?;
            let _ = writeln!(stdout, "wrote {} (dim {}, delta {})", out.out.display(), s.dim(), s.delta());
            Ok(0)
        }
        Command::Tensor { a, b, out, force } => {
            let sa = read_structure(&a, tol, force)?;
            let sb = read_structure(&b, tol, force)?;
            let s = catalog::tensor_product(&sa, &sb)?;
            write_structure(&s, &out.out)?;
            let _ = writeln!(stdout, "wrote {} (dim {}, delta {})", out.out.display(), s.dim(), s.delta());
            Ok(0)
        }
        Command::Dual { a, out, force } => {
            let sa = read_structure(&a, tol, force)?;
            let s = catalog::fourier_dual(&sa, tol)?;
            write_structure(&s, &out.out)?;
            let _ = writeln!(stdout, "wrote {} (dim {}, delta {})", out.out.display(), s.dim(), s.delta());
            Ok(0)
        }
        Command::Verify { file, tol: tol_flag } => {
            let tol = tol_flag.map(Tolerance::with_eq_tol).unwrap_or(*tol);
            if !tol.is_valid() {
                return Err(CliError::Usage("tolerance out of range".into()));
            }
            // syntactic parse only; the axiom run is the point here
            let s = read_structure(&file, &tol, true)?;
            let report = verify_axioms(&s, &tol);
            for check in &report.checks {
                let _ = writeln!(
                    stdout,
                    "{:<40} {} (residual {:.3e}, tol {:.1e})",
                    check.name,
                    if check.pass { "pass" } else { "FAIL" },
                    check.residual,
                    check.tol
                );
            }
            let _ = writeln!(stdout, "verdict: {}", if report.pass { "pass" } else { "FAIL" });
            if report.pass {
                Ok(0)
            } else {
                let _ = writeln!(stderr, "axiom failures: {}", report.failures().join("; "));
                Ok(1)
            }
        }
        Command::Classify { file, json, force } => {
            let s = read_structure(&file, tol, force)?;
            let verdict = classify_dim4(&s, tol);
            if json {
                let _ = writeln!(
                    stdout,
                    "{}",
                    serde_json::to_string_pretty(&verdict).expect("verdict serialization")
                );
            } else {
                let _ = writeln!(stdout, "structure: {} (dim {}, delta {})", s.name(), s.dim(), s.delta());
                match verdict.class_index {
                    Some(i) => {
                        let _ = writeln!(stdout, "class {i}: {:?}", verdict.tag);
                    }
                    None => {
                        let _ = writeln!(stdout, "unclassified");
                    }
                }
                if let Some(group) = &verdict.group {
                    let _ = writeln!(stdout, "group: {group}");
                }
                if let Some(c) = verdict.c {
                    let _ = writeln!(stdout, "c = {c}");
                }
                if let Some(tr) = verdict.separator_trace {
                    let _ = writeln!(stdout, "separating biprojection trace: {tr}");
                }
                if let Some((u, o)) = verdict.split_dims {
                    let _ = writeln!(stdout, "free split corner dimensions: {u} + {o}");
                }
                if let Some((ta, tb)) = verdict.tensor_traces {
                    let _ = writeln!(stdout, "tensor pair traces: {ta}, {tb}");
                }
                for d in &verdict.diagnostics {
                    let _ = writeln!(stdout, "note: {d}");
                }
            }
            Ok(if verdict.tag == ClassTag::Unclassified { 1 } else { 0 })
        }
        Command::Report { file, json, force } => {
            let s = read_structure(&file, tol, force)?;
            let report = build_report(&s, tol);
            if json {
                let _ = writeln!(
                    stdout,
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serialization")
                );
            } else {
                print_report(&report, stdout);
            }
            Ok(0)
        }
        Command::Iso { a, b } => {
            let sa = read_structure(&a, tol, false)?;
            let sb = read_structure(&b, tol, false)?;
            match crate::classify::find_isomorphism(&sa, &sb, tol) {
                Ok(Some(map)) => {
                    let _ = writeln!(stdout, "isomorphic");
                    for i in 0..map.rows() {
                        let row: Vec<String> = (0..map.cols())
                            .map(|j| {
                                let z = map[(i, j)];
                                format!("{}{:+}i", z.re, z.im)
                            })
                            .collect();
                        let _ = writeln!(stdout, "  [{}]", row.join(", "));
                    }
                    Ok(0)
                }
                Ok(None) => {
                    let _ = writeln!(stdout, "no isomorphism");
                    Ok(1)
                }
                Err(e) => Err(CliError::Data(format!("isomorphism search failed: {e}"))),
            }
        }
    }
}

#[derive(Serialize)]
struct BiprojectionEntry {
    trace: f64,
    coeffs: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct ReportDoc {
    name: String,
    dim: usize,
    delta: f64,
    labels: Vec<String>,
    traces: Vec<f64>,
    coproduct: Vec<Vec<Vec<[f64; 2]>>>,
    biprojections: Option<Vec<BiprojectionEntry>>,
    biprojection_note: Option<String>,
    virtual_normalizers: Vec<(usize, f64)>,
    lambda: Option<Vec<Vec<[f64; 2]>>>,
    lambda_row_traces: Option<Vec<f64>>,
    new_part_dimension: Option<usize>,
    dim_bound: DimBoundReport,
    depth2_trace: Option<f64>,
}

fn build_report(s: &Structure, tol: &Tolerance) -> ReportDoc {
    let doc = io::to_document(s);
    let (biprojections, biprojection_note) = match positivity::enumerate_biprojections(s, tol) {
        Ok(list) => (
            Some(
                list.iter()
                    .map(|b| BiprojectionEntry {
                        trace: b.trace,
                        coeffs: b.element.coeffs().iter().map(|z| [z.re, z.im]).collect(),
                    })
                    .collect(),
            ),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let commute = check_commute_relation(s, tol);
    let lm = lambda_matrix(s, tol).ok();
    let lambda = lm.as_ref().map(|m| {
        m.entries
            .iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect()
    });
    let lambda_row_traces = lm.as_ref().map(|m| m.row_traces.clone());
    ReportDoc {
        name: s.name().to_string(),
        dim: s.dim(),
        delta: s.delta(),
        labels: s.labels().to_vec(),
        traces: s.trace_vector().to_vec(),
        coproduct: doc.coproduct,
        biprojections,
        biprojection_note,
        virtual_normalizers: commute.virtual_normalizers,
        lambda,
        lambda_row_traces,
        new_part_dimension: new_part_dimension(s, tol).ok(),
        dim_bound: dim_bound_report(s, tol),
        depth2_trace: commute.depth2_trace,
    }
}

fn format_c(re: f64, im: f64) -> String {
    if im.abs() < 1e-15 {
        format!("{re}")
    } else {
        format!("{re}{im:+}i")
    }
}

fn print_report(report: &ReportDoc, stdout: &mut dyn Write) {
    let _ = writeln!(stdout, "structure: {} (dim {}, delta {})", report.name, report.dim, report.delta);
    let _ = writeln!(stdout, "basis traces:");
    for (l, t) in report.labels.iter().zip(&report.traces) {
        let _ = writeln!(stdout, "  tr({l}) = {t}");
    }
    let _ = writeln!(stdout, "coproduct table:");
    for (i, li) in report.labels.iter().enumerate() {
        for (j, lj) in report.labels.iter().enumerate() {
            let terms: Vec<String> = report.coproduct[i][j]
                .iter()
                .enumerate()
                .filter(|(_, z)| z[0].abs() > 1e-14 || z[1].abs() > 1e-14)
                .map(|(k, z)| format!("{} {}", format_c(z[0], z[1]), report.labels[k]))
                .collect();
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
            let _ = writeln!(stdout, "  {li} * {lj} = {rhs}");
        }
    }
    match (&report.biprojections, &report.biprojection_note) {
        (Some(list), _) => {
            let _ = writeln!(stdout, "biprojections ({}):", list.len());
            for b in list {
                let terms: Vec<String> = b
                    .coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, z)| z[0].abs() > 1e-14 || z[1].abs() > 1e-14)
                    .map(|(k, z)| format!("{} {}", format_c(z[0], z[1]), report.labels[k]))
                    .collect();
                let _ = writeln!(stdout, "  trace {} = {}", b.trace, terms.join(" + "));
            }
        }
        (None, Some(note)) => {
            let _ = writeln!(stdout, "biprojections: {note}");
        }
        _ => {}
    }
    let _ = writeln!(stdout, "virtual normalizers: {:?}", report.virtual_normalizers);
    if let (Some(lambda), Some(traces)) = (&report.lambda, &report.lambda_row_traces) {
        let _ = writeln!(stdout, "eigenvalue matrix (rows: minimal projections, trace shown):");
        for (row, tr) in lambda.iter().zip(traces) {
            let entries: Vec<String> = row.iter().map(|z| format_c(z[0], z[1])).collect();
            let _ = writeln!(stdout, "  tr={tr}: [{}]", entries.join(", "));
        }
    }
    if let Some(npd) = report.new_part_dimension {
        let _ = writeln!(stdout, "new part dimension: {npd}");
    }
    let _ = writeln!(
        stdout,
        "three-box dimension bound: {} (estimate: {})",
        report.dim_bound.bound_dim3,
        report
            .dim_bound
            .dim3_estimate
            .map(|v| v.to_string())
            .unwrap_or_else(|| "unavailable".into())
    );
    if let Some(t) = report.depth2_trace {
        let _ = writeln!(stdout, "depth-two support trace: {t}");
    }
}

