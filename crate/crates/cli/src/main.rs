//! `aniso`: command-line front end for aniso-core.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aniso_core::covers::{build_cover, classify_coarse_equivalence_with, index_sets, neighbor_sets, CoverConfig, Verdict};
use aniso_core::experiments::{
    experiment_blowup, experiment_khintchine, experiment_multiscale, experiment_norm_scaling, experiment_weakstar,
    BlowupConfig, KhintchineConfig, MultiScaleConfig, Report, ScalingConfig,
};
use aniso_core::hardy_atoms::{
    construct_special_function, hp_norm, validate_atom, AtomSpec, Locality, RadialBump,
};
use aniso_core::littlewood_paley::{build_analyzing_pair, tl_norm, GridFunction, GridFunctionJson, TlParams};
use aniso_core::matrix::{validate_expansive, MatrixJson};
use aniso_core::{ExpansiveMatrix, StepQuasiNorm};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] aniso_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 3,
            CliError::Output { .. } => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "aniso", version, about = "Expansive matrices, anisotropic quasi-norms and function-space experiments")]
struct Cli {
    /// Output directory, or a file path for single-output commands.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Grid points per axis.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Grid half-width (tlnorm, hpnorm) or half-width in units of 1/δ (experiments).
    #[arg(long, global = true)]
    grid_extent: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coarse-equivalence verdict for a pair of matrices.
    Classify {
        #[arg(long)]
        matrix_a: PathBuf,
        #[arg(long)]
        matrix_b: PathBuf,
        /// Classify the adjoints A*, B* instead.
        #[arg(long)]
        adjoint: bool,
        #[arg(long, default_value_t = 60)]
        k_max: usize,
        /// Depth of the cover evidence; 0 skips it.
        #[arg(long, default_value_t = 40)]
        i_max: usize,
    },
    /// Step quasi-norm of each point in a CSV file.
    Rho {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        points: PathBuf,
    },
    /// Index sets of the inhomogeneous cover (neighbours, or J_i against a second matrix).
    Cover {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        matrix_b: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        i_max: usize,
    },
    /// Triebel-Lizorkin quasi-norm of a grid function.
    Tlnorm {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        /// A positive number or `inf`.
        #[arg(long)]
        q: f64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        i_max: usize,
    },
    /// Local (or nonlocal) radial maximal quasi-norm of a grid function.
    Hpnorm {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 4)]
        j_max: usize,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        nonlocal: bool,
    },
    #[command(subcommand)]
    Atoms(AtomsCommand),
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand, Debug)]
enum AtomsCommand {
    /// Check support, size and moment conditions of a sampled atom.
    Validate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Build the special function with vanishing moments up to order s.
    Special {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
    },
}

#[derive(Args, Debug)]
struct PairArgs {
    /// Defaults to diag(2, 4).
    #[arg(long)]
    matrix_a: Option<PathBuf>,
    /// Defaults to diag(4, 2).
    #[arg(long)]
    matrix_b: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// h^p blow-up along the d(k) sequence.
    Blowup {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        k: Vec<i64>,
        #[arg(long, default_value_t = 4)]
        j_max: usize,
    },
    /// Random-sign sums of modulated bumps against the ℓ^q predictions.
    Khintchine {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long = "K", value_delimiter = ',', default_value = "2,4,8")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = aniso_core::experiments::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
    /// Weak-* pairings of the averaged spike functions.
    Weakstar {
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        n: Vec<u64>,
    },
    /// Triebel-Lizorkin norm of single-scale bumps, or a multi-scale sum with --c.
    Scaling {
        /// Defaults to diag(2, 3), or to [2] with --c.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
        i0: Vec<usize>,
        /// Coefficients of a multi-scale sum; switches to the q = 1 vs q = 2 comparison.
        #[arg(long, value_delimiter = ',')]
        c: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = std::env::var("ANISO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Classify { matrix_a, matrix_b, adjoint, k_max, i_max } => {
            let (mut a, mut b) = (read_matrix(matrix_a)?, read_matrix(matrix_b)?);
            if *adjoint {
                a = a.adjoint();
                b = b.adjoint();
            }
            let c = classify_coarse_equivalence_with(&a, &b, *k_max, (*i_max > 0).then_some(*i_max))?;
            let out = ClassifyOutput {
                verdict: c.verdict,
                epsilon: c.epsilon,
                slope: c.slope,
                r2: c.r2,
                overflow: c.overflow,
                s_series: c.s_series,
                max_j: c.max_j,
                max_i: c.max_i,
            };
            let text = to_json(&out)?;
            println!("{text}");
            write_file(&target(&cli.out, "classify.json"), &text)
        }
        Command::Rho { matrix, points } => {
            let a = read_matrix(matrix)?;
            let q = StepQuasiNorm::new(&a)?;
            let pts = read_points(points, a.dim())?;
            let mut rows = Vec::with_capacity(pts.len());
            for x in pts {
                let v = DVector::from_vec(x.clone());
                let rho = q.rho(&v)?;
                let index = if rho == 0.0 { String::new() } else { q.ball_index(&v)?.to_string() };
                let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                row.push(rho.to_string());
                row.push(index);
                rows.push(row);
            }
            let mut header: Vec<String> = (1..=a.dim()).map(|k| format!("x{k}")).collect();
            header.extend(["rho".to_string(), "index".to_string()]);
            write_csv(&target(&cli.out, "rho.csv"), &header, &rows)
        }
        Command::Cover { matrix, matrix_b, i_max } => {
            let a = read_matrix(matrix)?;
            let ca = build_cover(&a, &CoverConfig::default())?;
            let sets = match matrix_b {
                Some(path) => {
                    let cb = build_cover(&read_matrix(path)?, &CoverConfig::default())?;
                    index_sets(&ca, &cb, *i_max)?.j_sets
                }
                None => neighbor_sets(&ca, *i_max, 1),
            };
            let rows: Vec<Vec<String>> = sets
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let joined = s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";");
                    vec![i.to_string(), joined, s.len().to_string()]
                })
                .collect();
            write_csv(&target(&cli.out, "cover.csv"), &["i".into(), "set".into(), "size".into()], &rows)
        }
        Command::Tlnorm { matrix, alpha, p, q, input, i_max } => {
            let a = read_matrix(matrix)?;
            let f = read_function(input, cli)?;
            let pair = build_analyzing_pair(&a.adjoint(), f.grid(), *i_max)?;
            let params = TlParams { alpha: *alpha, p: *p, q: *q, i_max: *i_max };
            let norm = tl_norm(&f, &pair, &params)?;
            println!("{norm}");
            let g = f.grid();
            append_csv(
                &target(&cli.out, "tlnorm.csv"),
                &["input", "alpha", "p", "q", "i_max", "n", "L", "residual", "tl_norm"],
                &[
                    input.display().to_string(),
                    alpha.to_string(),
                    p.to_string(),
                    q.to_string(),
                    i_max.to_string(),
                    g.n.to_string(),
                    g.extent.to_string(),
                    pair.residual().to_string(),
                    norm.to_string(),
                ],
            )
        }
        Command::Hpnorm { matrix, p, j_max, input, nonlocal } => {
            let a = read_matrix(matrix)?;
            let f = read_function(input, cli)?;
            let locality = if *nonlocal { Locality::Nonlocal } else { Locality::Local };
            let norm = hp_norm(&f, &RadialBump::for_matrix(&a), &a, *p, *j_max, locality)?;
            println!("{norm}");
            append_csv(
                &target(&cli.out, "hpnorm.csv"),
                &["input", "p", "j_max", "locality", "hp_norm"],
                &[
                    input.display().to_string(),
                    p.to_string(),
                    j_max.to_string(),
                    if *nonlocal { "nonlocal" } else { "local" }.to_string(),
                    norm.to_string(),
                ],
            )
        }
        Command::Atoms(AtomsCommand::Validate { spec, input, matrix }) => {
            let a = read_matrix(matrix)?;
            let spec: AtomSpec = read_json(spec)?;
            let f = read_function(input, cli)?;
            let report = validate_atom(&f, &spec, &a)?;
            let text = to_json(&report)?;
            println!("{text}");
            write_file(&target(&cli.out, "atom_report.json"), &text)
        }
        Command::Atoms(AtomsCommand::Special { d, s }) => {
            let f0 = construct_special_function(*d, *s, None)?;
            write_file(&target(&cli.out, "f0.json"), &to_json(&f0)?)
        }
        Command::Experiment(e) => {
            let report = run_experiment(e, cli)?;
            write_report(&report, cli)
        }
    }
}

fn run_experiment(e: &ExperimentCommand, cli: &Cli) -> CliResult<Report> {
    Ok(match e {
        ExperimentCommand::Blowup { pair, k, j_max } => {
            let (a, b) = pair_matrices(pair)?;
            let mut cfg = BlowupConfig::new(a, b, pair.p, k.clone());
            cfg.j_max = *j_max;
            if let Some(n) = cli.grid_n {
                cfg.n = n;
            }
            experiment_blowup(&cfg, cli.seed)?
        }
        ExperimentCommand::Khintchine { pair, ks, trials, delta } => {
            let (a, b) = pair_matrices(pair)?;
            let mut cfg = KhintchineConfig::new(a, b, pair.p, ks.clone());
            cfg.trials = *trials;
            cfg.delta = *delta;
            if let Some(n) = cli.grid_n {
                cfg.n = n;
            }
            if let Some(l) = cli.grid_extent {
                cfg.extent_factor = l;
            }
            experiment_khintchine(&cfg, cli.seed)?
        }
        ExperimentCommand::Weakstar { n } => experiment_weakstar(n, cli.seed)?,
        ExperimentCommand::Scaling { matrix, alpha, p, q, i0, c } => {
            let a = match (matrix, c) {
                (Some(path), _) => read_matrix(path)?,
                (None, Some(_)) => ExpansiveMatrix::scalar(1, 2.0)?,
                (None, None) => ExpansiveMatrix::diagonal(&[2.0, 3.0])?,
            };
            match c {
                Some(c) => {
                    let mut cfg = MultiScaleConfig::new(a, *alpha, *p, c.clone());
                    if let Some(l) = cli.grid_extent {
                        cfg.extent_factor = l;
                    }
                    experiment_multiscale(&cfg, cli.seed)?
                }
                None => {
                    let mut cfg = ScalingConfig::new(a, *alpha, *p, *q, i0.clone());
                    if let Some(n) = cli.grid_n {
                        cfg.n = n;
                    }
                    if let Some(l) = cli.grid_extent {
                        cfg.extent_factor = l;
                    }
                    experiment_norm_scaling(&cfg, cli.seed)?
                }
            }
        }
    })
}

#[derive(Serialize)]
struct ClassifyOutput {
    verdict: Verdict,
    epsilon: f64,
    slope: f64,
    r2: f64,
    overflow: bool,
    s_series: Vec<f64>,
    #[serde(rename = "max_J")]
    max_j: Option<usize>,
    #[serde(rename = "max_I")]
    max_i: Option<usize>,
}

fn pair_matrices(p: &PairArgs) -> CliResult<(ExpansiveMatrix, ExpansiveMatrix)> {
    let a = match &p.matrix_a {
        Some(path) => read_matrix(path)?,
        None => ExpansiveMatrix::diagonal(&[2.0, 4.0])?,
    };
    let b = match &p.matrix_b {
        Some(path) => read_matrix(path)?,
        None => ExpansiveMatrix::diagonal(&[4.0, 2.0])?,
    };
    Ok((a, b))
}

/// `out` itself when it names a file, else `out/name`.
fn target(out: &Path, name: &str) -> PathBuf {
    if out.extension().is_some() && !out.is_dir() {
        out.to_path_buf()
    } else {
        out.join(name)
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> CliResult<ExpansiveMatrix> {
    let m: MatrixJson = read_json(path)?;
    Ok(validate_expansive(m.to_matrix()?)?)
}

/// A grid function from JSON; `--grid-n` / `--grid-extent`, when given, must agree with it.
fn read_function(path: &Path, cli: &Cli) -> CliResult<GridFunction> {
    let j: GridFunctionJson = read_json(path)?;
    if cli.grid_n.is_some_and(|n| n != j.n) || cli.grid_extent.is_some_and(|l| l != j.extent) {
        return Err(CliError::Input(format!("{} has n = {}, L = {}, not the requested grid", path.display(), j.n, j.extent)));
    }
    Ok(GridFunction::from_json(&j)?)
}

/// Rows of `d` numbers; a non-numeric first row is taken as a header.
fn read_points(path: &Path, d: usize) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(x) if x.len() == d => out.push(x),
            Ok(x) => return Err(aniso_core::Error::DimensionMismatch { expected: d, got: x.len() }.into()),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(CliError::Input(format!("{} line {}: {e}", path.display(), line + 1))),
        }
    }
    Ok(out)
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Input(e.to_string()))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    ensure_parent(path)?;
    let io = |source| CliError::Output { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(header).map_err(|e| io(e.into()))?;
    for r in rows {
        w.write_record(r).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

/// Appends one row, writing the header first when the file is new.
fn append_csv(path: &Path, header: &[&str], row: &[String]) -> CliResult<()> {
    ensure_parent(path)?;
    let io = |source| CliError::Output { path: path.to_path_buf(), source };
    let fresh = !path.exists();
    let file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header).map_err(|e| io(e.into()))?;
    }
    w.write_record(row).map_err(|e| io(e.into()))?;
    w.flush().map_err(io)
}

/// JSON: one `<experiment>.json`. CSV: one file per table plus `<experiment>_summary.json`.
fn write_report(report: &Report, cli: &Cli) -> CliResult<()> {
    let name = &report.experiment;
    let mut stdout = std::io::stdout().lock();
    for f in &report.summary {
        let _ = writeln!(stdout, "{:<24} {:>14.6e}  [{}]", f.name, f.value, serde_json::to_value(f.provenance).unwrap_or_default().as_str().unwrap_or(""));
    }
    for n in &report.notes {
        let _ = writeln!(stdout, "note: {n}");
    }
    match cli.format {
        Format::Json => write_file(&cli.out.join(format!("{name}.json")), &to_json(report)?),
        Format::Csv => {
            for (table_name, table) in &report.tables {
                let rows: Vec<Vec<String>> =
                    table.rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
                write_csv(&cli.out.join(format!("{name}_{table_name}.csv")), &table.headers(), &rows)?;
            }
            write_file(&cli.out.join(format!("{name}_summary.json")), &to_json(report)?)
        }
    }
}
