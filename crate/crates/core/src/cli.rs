// SPDX-License-Identifier: Apache-2.0

//! `axmul` command-line front end.
//!
//! Every file written gets a `<file>.manifest.json` sibling. Failures print
//! one line, `error: kind=<kind> msg=<text>`, and exit with 2 for usage
//! errors or 1 otherwise. `AXMUL_THREADS` caps the worker pool.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::compressor::{
    exact_compressor, exact_netlist, proposed_netlist, proposed_truth_table,
    table_from_error_pattern, ClampPolicy, CompressorInputs, CompressorOutputs,
    CompressorTruthTable,
};
use crate::error::{ConfigError, NetlistError, NnError, TableError};
use crate::lut::ProductLut;
use crate::metrics::{render_table, sweep_multiplier, ErrorReport, SummaryRow};
use crate::multiplier::{Family, Multiplier, MultiplierConfig};
use crate::nn::io::{read_idx_images, read_idx_labels, read_pgm, write_pgm};
use crate::nn::noise::DEFAULT_SEED;
use crate::nn::{add_gaussian_noise, psnr, ssim, WeightBundle};

pub const THREADS_ENV: &str = "AXMUL_THREADS";
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Table(_) => "table",
            CliError::Netlist(_) => "netlist",
            CliError::Nn(_) => "nn",
            CliError::Io { .. } => "io",
            CliError::Input(_) => "input",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// The single-line form printed on failure.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error: kind={} msg={}", self.kind(), msg.trim())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(io_err(path))
}

#[derive(Debug, Parser)]
#[command(
    name = "axmul",
    version,
    about = "Approximate 4:2 compressor and 8x8 multiplier toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compressor cells.
    #[command(subcommand)]
    Compressor(CompressorCmd),
    /// 8x8 multipliers.
    #[command(subcommand)]
    Mult(MultCmd),
    /// LUT-based quantized inference.
    #[command(subcommand)]
    Nn(NnCmd),
    /// Merging reports.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Debug, Subcommand)]
pub enum CompressorCmd {
    /// Truth table CSV plus critical-path and error-row summary.
    Dump {
        /// `proposed`, `exact`, or `pattern:<i[=cs]>,...` with indices 0..15
        /// (x4 is the MSB) and optional two-digit carry/sum overrides.
        #[arg(long)]
        design: String,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    /// exact, proposed, design1 or design2.
    #[arg(long)]
    pub family: String,
    /// Truth-table CSV replacing the proposed approximate cell.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// First exact column (design1 only).
    #[arg(long)]
    pub threshold: Option<usize>,
    /// Truncated columns (design2 only).
    #[arg(long)]
    pub trunc: Option<usize>,
    /// Compensation constant; derived when omitted (design2 only).
    #[arg(long)]
    pub compensation: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum MultCmd {
    /// Exhaustive error analysis over all operand pairs.
    Sweep {
        #[command(flatten)]
        family: FamilyArgs,
        /// Receives report.csv, histogram.csv and plan.txt.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Binary product table, 65,536 little-endian u16 indexed (a<<8)|b.
    Lut {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum NnCmd {
    /// Classification accuracy over an IDX dataset.
    Infer {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        lut: PathBuf,
        /// Optional CSV with total,correct,percent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adds seeded Gaussian noise to a clean image and denoises it.
    Denoise {
        #[arg(long)]
        bundle: PathBuf,
        /// Clean reference image (binary PGM).
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_parser = ["25", "50"])]
        sigma: String,
        #[arg(long)]
        lut: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Denoised PGM.
        #[arg(long)]
        out: PathBuf,
        /// Also keep the noisy input.
        #[arg(long)]
        noisy_out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    /// Merges report CSVs into one table and a long-format CSV.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Long-format CSV (design,metric,value).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    args: &'a [String],
    config_hash: String,
    seed: Option<u64>,
    outputs: Vec<String>,
    tool_version: &'static str,
}

/// Writes `bytes` to `path` via a temp file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

struct Ctx<'a> {
    args: &'a [String],
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn print(&mut self, text: &str) -> Result<(), CliError> {
        self.out
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))
    }

    /// Writes every artifact, then a manifest beside each one.
    fn emit(
        &self,
        command: &str,
        config_hash: String,
        seed: Option<u64>,
        files: &[(&Path, &[u8])],
    ) -> Result<(), CliError> {
        for (path, bytes) in files {
            write_atomic(path, bytes)?;
        }
        let manifest = RunManifest {
            command,
            args: self.args,
            config_hash,
            seed,
            outputs: files.iter().map(|(p, _)| p.display().to_string()).collect(),
            tool_version: TOOL_VERSION,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(NnError::from)? + "\n";
        for (path, _) in files {
            write_atomic(&manifest_path(path), json.as_bytes())?;
        }
        Ok(())
    }
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Parses `pattern:` specs such as `15`, `3,12,15` or `12=01,15=10`.
pub fn parse_pattern(spec: &str) -> Result<CompressorTruthTable, CliError> {
    let mut indices = Vec::new();
    let mut overrides = BTreeMap::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (idx, cs) = match item.split_once('=') {
            Some((i, cs)) => (i, Some(cs)),
            None => (item, None),
        };
        let idx: u32 = idx
            .parse()
            .map_err(|_| CliError::Usage(format!("bad pattern index `{idx}`")))?;
        indices.push(idx);
        if let Some(cs) = cs {
            let out = match cs {
                "00" => CompressorOutputs::new(false, false),
                "01" => CompressorOutputs::new(false, true),
                "10" => CompressorOutputs::new(true, false),
                "11" => CompressorOutputs::new(true, true),
                _ => {
                    return Err(CliError::Usage(format!(
                        "override `{cs}` must be two carry/sum digits"
                    )))
                }
            };
            let key = u8::try_from(idx).map_err(|_| TableError::IndexOutOfRange(idx))?;
            overrides.insert(key, out);
        }
    }
    if indices.is_empty() {
        return Err(CliError::Usage("empty pattern".into()));
    }
    let policy = if overrides.is_empty() {
        ClampPolicy::SaturateToThree
    } else {
        ClampPolicy::Override(overrides)
    };
    Ok(table_from_error_pattern(&indices, &policy)?)
}

fn bits(index: u8) -> String {
    format!("{index:04b}")
}

fn error_summary(table: &CompressorTruthTable) -> String {
    let mut s = String::new();
    let idx = table.error_indices();
    let _ = writeln!(
        s,
        "error_rows={} error_probability={}/256",
        idx.len(),
        table.error_probability_256()
    );
    for i in idx {
        let _ = writeln!(
            s,
            "error_row x4x3x2x1={} exact={} approx={} diff={:+}",
            bits(i),
            i.count_ones(),
            table.get(i).value(),
            table.value_error(i)
        );
    }
    s
}

fn compressor_dump(ctx: &mut Ctx, design: &str, out: Option<&Path>) -> Result<(), CliError> {
    let (csv, summary) = match design {
        "exact" => {
            let mut csv = String::from("x4,x3,x2,x1,cout,carry,sum\n");
            for i in 0..16u8 {
                let o = exact_compressor(CompressorInputs::from_index(i), false);
                let b: Vec<String> = bits(i).chars().map(String::from).collect();
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    b.join(","),
                    o.cout as u8,
                    o.carry as u8,
                    o.sum as u8
                );
            }
            let path = exact_netlist().critical_path()?;
            (
                csv,
                format!("{path}\nerror_rows=0 error_probability=0/256\n"),
            )
        }
        "proposed" => {
            let table = proposed_truth_table();
            let net = proposed_netlist();
            let path = net.critical_path()?;
            let eq = net.equivalent_to(&table)?;
            (
                table.to_csv(),
                format!(
                    "{path}\nnetlist_matches_table={eq}\n{}",
                    error_summary(&table)
                ),
            )
        }
        other => match other.strip_prefix("pattern:") {
            Some(spec) => {
                let table = parse_pattern(spec)?;
                (
                    table.to_csv(),
                    format!("critical_path unavailable\n{}", error_summary(&table)),
                )
            }
            None => {
                return Err(CliError::Usage(format!(
                    "unknown design `{other}` (expected proposed, exact or pattern:<spec>)"
                )))
            }
        },
    };
    match out {
        Some(path) => {
            let hash = sha256_hex(&[design.as_bytes(), csv.as_bytes()]);
            ctx.emit("compressor dump", hash, None, &[(path, csv.as_bytes())])?;
        }
        None => ctx.print(&csv)?,
    }
    ctx.print(&summary)
}

fn build_config(f: &FamilyArgs) -> Result<MultiplierConfig, CliError> {
    let family: Family = f
        .family
        .parse()
        .map_err(|e: ConfigError| CliError::Usage(e.to_string()))?;
    let only = |flag: &str, set: bool, allowed: Family| -> Result<(), CliError> {
        if set && family != allowed {
            return Err(CliError::Usage(format!(
                "--{flag} only applies to --family {}",
                allowed.name().to_ascii_lowercase()
            )));
        }
        Ok(())
    };
    only("threshold", f.threshold.is_some(), Family::Design1Hybrid)?;
    only("trunc", f.trunc.is_some(), Family::Design2Truncated)?;
    only(
        "compensation",
        f.compensation.is_some(),
        Family::Design2Truncated,
    )?;
    if f.table.is_some() && family == Family::Exact {
        return Err(CliError::Usage(
            "--table has no effect on the exact family".into(),
        ));
    }

    let mut cfg = MultiplierConfig::new(family);
    if let Some(k) = f.threshold {
        cfg.exact_column_threshold = k;
    }
    if let Some(w) = f.trunc {
        cfg.truncation_width = w;
    }
    cfg.compensation = f.compensation;
    if let Some(path) = &f.table {
        let text = String::from_utf8(read(path)?)
            .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        cfg = cfg.with_table(CompressorTruthTable::from_csv(name, &text)?);
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn mult_sweep(ctx: &mut Ctx, f: &FamilyArgs, out_dir: &Path) -> Result<(), CliError> {
    let cfg = build_config(f)?;
    let m = Multiplier::new(cfg.clone())?;
    let report: ErrorReport = sweep_multiplier(&m);
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (rep, hist, plan) = (
        out_dir.join("report.csv"),
        out_dir.join("histogram.csv"),
        out_dir.join("plan.txt"),
    );
    ctx.emit(
        "mult sweep",
        cfg.config_hash(),
        None,
        &[
            (&rep, report.to_csv().as_bytes()),
            (&hist, report.histogram_csv().as_bytes()),
            (&plan, m.plan().dump().as_bytes()),
        ],
    )?;
    let mut text = render_table(&[report.summary_row()]);
    let _ = writeln!(
        text,
        "cases={} error_cases={} max_ed={} zero_exact_nonzero_approx={}",
        report.n_cases, report.error_cases, report.max_ed, report.zero_exact_nonzero_approx
    );
    if cfg.family == Family::Design2Truncated {
        let how = if cfg.compensation.is_some() {
            "given"
        } else {
            "derived"
        };
        let _ = writeln!(
            text,
            "compensation={} ({how}) truncated_columns={}",
            m.plan().compensation,
            m.plan().truncated_columns
        );
    }
    let _ = writeln!(text, "stages={}", m.plan().stage_count());
    ctx.print(&text)
}

fn mult_lut(ctx: &mut Ctx, f: &FamilyArgs, out: &Path) -> Result<(), CliError> {
    let cfg = build_config(f)?;
    let lut = ProductLut::from_multiplier(&Multiplier::new(cfg.clone())?);
    let bytes = lut.to_bytes();
    ctx.emit("mult lut", cfg.config_hash(), None, &[(out, &bytes)])?;
    ctx.print(&format!(
        "wrote {} ({} bytes) sha256={}\n",
        out.display(),
        bytes.len(),
        hex::encode(Sha256::digest(&bytes))
    ))
}

fn load_nn(
    bundle: &Path,
    lut: &Path,
) -> Result<(crate::nn::Network, ProductLut, Vec<u8>, Vec<u8>), CliError> {
    let bundle_bytes = read(bundle)?;
    let text = std::str::from_utf8(&bundle_bytes)
        .map_err(|_| CliError::Input(format!("{}: not UTF-8", bundle.display())))?;
    let net = WeightBundle::from_json(text)?.decode()?;
    let lut_bytes = read(lut)?;
    let table = ProductLut::from_bytes(&lut_bytes)?;
    Ok((net, table, bundle_bytes, lut_bytes))
}

fn nn_infer(
    ctx: &mut Ctx,
    bundle: &Path,
    images: &Path,
    labels: &Path,
    lut: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (net, table, bundle_bytes, lut_bytes) = load_nn(bundle, lut)?;
    let image_bytes = read(images)?;
    let label_bytes = read(labels)?;
    let imgs = read_idx_images(&image_bytes)?;
    let labels = read_idx_labels(&label_bytes)?;
    if imgs.count() != labels.len() {
        return Err(CliError::Input(format!(
            "{} images but {} labels",
            imgs.count(),
            labels.len()
        )));
    }
    if net.input_shape != [1, imgs.rows, imgs.cols] {
        return Err(CliError::Input(format!(
            "network expects input {:?}, images are {}x{}",
            net.input_shape, imgs.rows, imgs.cols
        )));
    }
    let correct = (0..labels.len())
        .into_par_iter()
        .map(|i| {
            Ok(usize::from(
                net.classify(imgs.image(i), &table)? == labels[i] as usize,
            ))
        })
        .collect::<Result<Vec<_>, NnError>>()?
        .into_iter()
        .sum::<usize>();
    let total = labels.len();
    let percent = if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    };
    if let Some(path) = out {
        let csv = format!("total,correct,percent\n{total},{correct},{percent:.4}\n");
        let hash = sha256_hex(&[&bundle_bytes, &lut_bytes, &image_bytes, &label_bytes]);
        ctx.emit("nn infer", hash, None, &[(path, csv.as_bytes())])?;
    }
    ctx.print(&format!(
        "total={total} correct={correct} percent={percent:.2}\n"
    ))
}

#[allow(clippy::too_many_arguments)]
fn nn_denoise(
    ctx: &mut Ctx,
    bundle: &Path,
    image: &Path,
    sigma: f64,
    lut: &Path,
    seed: u64,
    out: &Path,
    noisy_out: Option<&Path>,
) -> Result<(), CliError> {
    let (net, table, bundle_bytes, lut_bytes) = load_nn(bundle, lut)?;
    let image_bytes = read(image)?;
    let clean = read_pgm(&image_bytes)?;
    let noisy = add_gaussian_noise(&clean, sigma, seed)?;
    let denoised = net.denoise(&noisy, &table)?;

    let den_pgm = write_pgm(&denoised);
    let noisy_pgm = write_pgm(&noisy);
    let mut files: Vec<(&Path, &[u8])> = vec![(out, &den_pgm)];
    if let Some(p) = noisy_out {
        files.push((p, &noisy_pgm));
    }
    let hash = sha256_hex(&[
        &bundle_bytes,
        &lut_bytes,
        &image_bytes,
        &sigma.to_le_bytes(),
    ]);
    ctx.emit("nn denoise", hash, Some(seed), &files)?;

    let line = format!(
        "sigma={sigma} seed={seed} noisy_psnr={} noisy_ssim={:.4} psnr={} ssim={:.4}\n",
        psnr(&clean, &noisy)?,
        ssim(&clean, &noisy)?,
        psnr(&clean, &denoised)?,
        ssim(&clean, &denoised)?
    );
    ctx.print(&line)
}

fn report_compare(ctx: &mut Ctx, inputs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut contents = Vec::new();
    for path in inputs {
        let bytes = read(path)?;
        let text = String::from_utf8_lossy(&bytes).into_owned();
        rows.extend(
            SummaryRow::parse_csv(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        );
        contents.push(bytes);
    }
    if let Some(path) = out {
        let mut long = String::from("design,metric,value\n");
        for r in &rows {
            for (metric, v) in [
                ("er", r.er),
                ("nmed", r.nmed),
                ("mred", r.mred),
                ("mean_ed", r.mean_ed),
            ] {
                let _ = writeln!(long, "{},{metric},{v}", r.design);
            }
            let _ = writeln!(long, "{},max_ed,{}", r.design, r.max_ed);
        }
        let parts: Vec<&[u8]> = contents.iter().map(Vec::as_slice).collect();
        ctx.emit(
            "report compare",
            sha256_hex(&parts),
            None,
            &[(path, long.as_bytes())],
        )?;
    }
    ctx.print(&render_table(&rows))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got `{v}`"
        ))
    })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Executes a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, args: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    configure_threads()?;
    let mut ctx = Ctx { args, out };
    match &cli.command {
        Command::Compressor(CompressorCmd::Dump { design, out }) => {
            compressor_dump(&mut ctx, design, out.as_deref())
        }
        Command::Mult(MultCmd::Sweep { family, out_dir }) => mult_sweep(&mut ctx, family, out_dir),
        Command::Mult(MultCmd::Lut { family, out }) => mult_lut(&mut ctx, family, out),
        Command::Nn(NnCmd::Infer {
            bundle,
            images,
            labels,
            lut,
            out,
        }) => nn_infer(&mut ctx, bundle, images, labels, lut, out.as_deref()),
        Command::Nn(NnCmd::Denoise {
            bundle,
            image,
            sigma,
            lut,
            seed,
            out,
            noisy_out,
        }) => {
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| CliError::Usage(format!("bad sigma `{sigma}`")))?;
            nn_denoise(
                &mut ctx,
                bundle,
                image,
                sigma,
                lut,
                *seed,
                out,
                noisy_out.as_deref(),
            )
        }
        Command::Report(ReportCmd::Compare { inputs, out }) => {
            report_compare(&mut ctx, inputs, out.as_deref())
        }
    }
}

/// Full entry point: parses `argv`, runs, reports. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &args, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
