//! Command-line front end: argument parsing, dispatch and output emission.

pub mod config;
pub mod dump;
pub mod format;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::cli::config::RunConfig;
use crate::cli::dump::SpectrumDump;
use crate::cli::format::fmt_g;
use crate::ensemble::{
    analyze_chain, baseline_delta_report, derive_seed, run_ensemble, sample_chain, ChainAnalysis,
    OccurrenceTable,
};
use crate::error::{Error, Result};
use crate::oracles;

/// Environment variable that sets the worker-thread count.
pub const THREADS_ENV: &str = "NVCHAIN_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "nvchain",
    version,
    about = "Eigenstate entanglement census of dipole-coupled NV-center chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagonalize one chain and write the full spectrum dump as JSON.
    Spectrum(SpectrumArgs),
    /// Classify every eigenstate of one chain and print the per-manifold census.
    Classify(ClassifyArgs),
    /// Run a disorder ensemble and write the occurrence table.
    Ensemble(EnsembleArgs),
    /// Build the baseline/delta report from an existing occurrence CSV.
    Report(ReportArgs),
    /// Check the entanglement routines against closed-form W and GHZ results.
    VerifyOracles(OracleArgs),
    /// Re-classify the states of a spectrum dump and compare with the stored classes.
    Verify(VerifyArgs),
}

/// Physical and ensemble parameters; each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Flat `key = value` file; flags take precedence over its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Chain length(s), comma separated.
    #[arg(long, value_name = "N[,N...]")]
    pub n: Option<String>,
    /// Positional disorder width(s) in nm, comma separated.
    #[arg(long, value_name = "NM[,NM...]")]
    pub sigma: Option<String>,
    /// Realizations per (N, sigma) cell.
    #[arg(long, value_name = "R")]
    pub realizations: Option<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Realization index for single-chain commands.
    #[arg(long)]
    pub index: Option<String>,
    #[arg(long, value_name = "MHZ")]
    pub rabi_mhz: Option<String>,
    #[arg(long, value_name = "NM")]
    pub lattice_constant_nm: Option<String>,
    #[arg(long, value_name = "M")]
    pub spacing_multiple: Option<String>,
    #[arg(long, value_name = "KHZ")]
    pub coupling_ref_khz: Option<String>,
    #[arg(long, value_name = "NM")]
    pub coupling_ref_distance_nm: Option<String>,
    #[arg(long, value_name = "NM")]
    pub min_separation_nm: Option<String>,
    #[arg(long, value_name = "EPS")]
    pub entropy_threshold: Option<String>,
    #[arg(long, value_name = "EPS")]
    pub concurrence_threshold: Option<String>,
    /// Require Path graphs to be exactly a path.
    #[arg(long, value_name = "BOOL")]
    pub strict_path: Option<String>,
}

impl ParamArgs {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("n", &self.n),
            ("sigma", &self.sigma),
            ("realizations", &self.realizations),
            ("seed", &self.seed),
            ("index", &self.index),
            ("rabi_mhz", &self.rabi_mhz),
            ("lattice_constant_nm", &self.lattice_constant_nm),
            ("spacing_multiple", &self.spacing_multiple),
            ("coupling_ref_khz", &self.coupling_ref_khz),
            ("coupling_ref_distance_nm", &self.coupling_ref_distance_nm),
            ("min_separation_nm", &self.min_separation_nm),
            ("entropy_threshold", &self.entropy_threshold),
            ("concurrence_threshold", &self.concurrence_threshold),
            ("strict_path", &self.strict_path),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        config::parse_config(&self.pairs(), self.config.as_deref())
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Only classify states in these manifolds.
    #[arg(long, value_name = "K[,K...]", value_delimiter = ',')]
    pub manifold: Option<Vec<usize>>,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Only classify states in these manifolds.
    #[arg(long, value_name = "K[,K...]", value_delimiter = ',')]
    pub manifold: Option<Vec<usize>>,
    /// Write one DOT concurrence graph per state into this directory.
    #[arg(long, value_name = "DIR")]
    pub dot_dir: Option<PathBuf>,
    /// Restrict DOT output to these eigenstate indices.
    #[arg(long, value_name = "I[,I...]", value_delimiter = ',')]
    pub states: Option<Vec<usize>>,
    /// Per-state CSV (energy, manifold, class, minimum entropy, evidence).
    #[arg(long, value_name = "FILE")]
    pub states_csv: Option<PathBuf>,
    /// Also write the JSON spectrum dump.
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Occurrence CSV (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Baseline/delta report as CSV.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Baseline/delta report as an aligned text table.
    #[arg(long, value_name = "FILE")]
    pub report_text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Occurrence CSV written by `ensemble`.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Report CSV (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Aligned text table.
    #[arg(long, value_name = "FILE")]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Seed of the random generalized-W draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Spectrum dump written by `spectrum` or `classify --dump`.
    #[arg(long, value_name = "FILE")]
    pub dump: PathBuf,
}

/// Applies the thread-count override from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Error::usage(
            THREADS_ENV,
            format!("expected a positive integer, got `{raw}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => output::write_atomic(p, contents),
        None => out
            .write_all(contents.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn say(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

/// Samples (when disordered), diagonalizes and classifies the single chain of `cfg`.
pub fn analyze_single(
    cfg: &RunConfig,
    manifolds: Option<&[usize]>,
) -> Result<(u64, ChainAnalysis)> {
    let (n, sigma) = cfg.single_chain()?;
    let spec = cfg.chain_spec(n, sigma);
    if let Some(ks) = manifolds {
        if let Some(&k) = ks.iter().find(|&&k| k > n) {
            return Err(Error::usage("manifold", format!("{k} exceeds n = {n}")));
        }
    }
    for warning in spec.diagnostics() {
        log::warn!("{warning}");
    }
    let seed = derive_seed(cfg.master_seed, n, sigma, cfg.index);
    let realization = sample_chain(&spec, seed)?;
    let analysis = analyze_chain(&spec, realization, &cfg.thresholds, manifolds)?;
    Ok((seed, analysis))
}

/// Runs one command; `Ok(false)` means a check ran but failed.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::Spectrum(a) => {
            let cfg = a.params.resolve()?;
            let (seed, analysis) = analyze_single(&cfg, a.manifold.as_deref())?;
            emit(
                out,
                a.out.as_deref(),
                &SpectrumDump::build(&cfg, seed, &analysis).to_json(),
            )?;
            Ok(true)
        }
        Command::Classify(a) => {
            let cfg = a.params.resolve()?;
            let (seed, analysis) = analyze_single(&cfg, a.manifold.as_deref())?;
            let mut preamble = cfg.provenance_lines();
            preamble.push(format!("derived_seed = {seed}"));
            if let Some(dir) = &a.dot_dir {
                let written = output::write_dot_files(
                    dir,
                    &analysis,
                    cfg.thresholds.concurrence,
                    a.states.as_deref(),
                )?;
                log::info!("wrote {written} DOT files to {}", dir.display());
            }
            if let Some(p) = &a.states_csv {
                output::write_atomic(p, &output::states_csv(&preamble, &analysis))?;
            }
            if let Some(p) = &a.dump {
                output::write_atomic(p, &SpectrumDump::build(&cfg, seed, &analysis).to_json())?;
            }
            emit(out, None, &output::census_text(&preamble, &analysis))?;
            Ok(true)
        }
        Command::Ensemble(a) => {
            let cfg = a.params.resolve()?;
            let ens = cfg.ensemble_config();
            for n in &ens.sizes {
                for warning in cfg.chain_spec(*n, 0.0).diagnostics() {
                    log::warn!("n = {n}: {warning}");
                }
            }
            let run = run_ensemble(&ens)?;
            let mut preamble = cfg.provenance_lines();
            preamble.push(format!("excluded_realizations = {}", run.excluded.len()));
            for ex in &run.excluded {
                log::warn!("excluded realization: {}", ex.reason);
                preamble.push(format!(
                    "excluded: n = {}, sigma_p_nm = {}, index = {}, seed = {}",
                    ex.cell.n,
                    fmt_g(ex.cell.sigma_nm),
                    ex.index,
                    ex.seed
                ));
            }
            emit(
                out,
                a.out.as_deref(),
                &output::occurrence_csv(&preamble, &run.table.rows()),
            )?;
            write_reports(
                &preamble,
                &run.table,
                a.report.as_deref(),
                a.report_text.as_deref(),
                None,
            )?;
            Ok(true)
        }
        Command::Report(a) => {
            let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
            let (mut preamble, rows) =
                output::parse_occurrence_csv(&text, &a.input.display().to_string())?;
            preamble.push(format!("source = {}", a.input.display()));
            let table = OccurrenceTable::from_rows(&rows)?;
            let csv_target = if a.out.is_none() { Some(out) } else { None };
            write_reports(
                &preamble,
                &table,
                a.out.as_deref(),
                a.text.as_deref(),
                csv_target,
            )?;
            Ok(true)
        }
        Command::VerifyOracles(a) => {
            let checks = oracles::run_suite(a.seed)?;
            let mut rows = vec![vec![
                "check".to_string(),
                "comparisons".to_string(),
                "max_error".to_string(),
                "tolerance".to_string(),
                "result".to_string(),
            ]];
            for c in &checks {
                rows.push(vec![
                    c.name.clone(),
                    c.comparisons.to_string(),
                    format!("{:.3e}", c.max_error),
                    format!("{:.0e}", c.tolerance),
                    if c.passed() { "PASS" } else { "FAIL" }.to_string(),
                ]);
            }
            emit(out, None, &output::align(&rows))?;
            Ok(checks.iter().all(|c| c.passed()))
        }
        Command::Verify(a) => {
            let text = std::fs::read_to_string(&a.dump).map_err(|e| Error::io(&a.dump, e))?;
            let dump = SpectrumDump::from_json(&text, &a.dump.display().to_string())?;
            let report = dump::verify_dump(&dump)?;
            say(out, &format!("states checked: {}", report.checked))?;
            say(
                out,
                &format!("stored-value mismatches: {:?}", report.stored_mismatches),
            )?;
            say(
                out,
                &format!("recomputed mismatches: {:?}", report.recomputed_mismatches),
            )?;
            say(out, if report.passed() { "PASS" } else { "FAIL" })?;
            Ok(report.passed())
        }
    }
}

fn write_reports(
    preamble: &[String],
    table: &OccurrenceTable,
    csv_path: Option<&Path>,
    text_path: Option<&Path>,
    stdout: Option<&mut dyn Write>,
) -> Result<()> {
    if csv_path.is_none() && text_path.is_none() && stdout.is_none() {
        return Ok(());
    }
    let rows = baseline_delta_report(table)?;
    let csv = output::report_csv(preamble, &rows);
    match (csv_path, stdout) {
        (Some(p), _) => output::write_atomic(p, &csv)?,
        (None, Some(out)) => emit(out, None, &csv)?,
        (None, None) => {}
    }
    if let Some(p) = text_path {
        output::write_atomic(p, &output::report_text(preamble, &rows))?;
    }
    Ok(())
}

/// Process entry point: parses arguments, runs the command and maps the outcome to an exit code.
///
/// Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.
pub fn main_entry() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        run(cli, &mut lock)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nvchain: {e}");
            match e {
                Error::Usage { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
