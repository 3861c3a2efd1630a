//! The `mtc` command line.
//!
//! Exit status is 0 on success, 1 when any operation fails and 2 for usage
//! errors.

mod estimate;

pub use estimate::{estimate_savings, format_bytes, parse_count, parse_ratio, parse_size};

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codec::{compress_model, decompress_model, CodecId, Granularity, Mode, PipelineConfig};
use crate::container::{model_from_bytes, model_to_bytes, ArchiveHeader, ArchiveStats};
use crate::delta::{apply_delta, build_delta, DeltaConfig, DeltaDescriptor, DeltaMode};
use crate::error::{Error, Result};
use crate::ingest::{parse_model_file, write_model_file};
use crate::model::{compute_ratio, ModelManifest};
use crate::transforms::LossyParams;

#[derive(Debug, Parser)]
#[command(name = "mtc", version, about = "Compress neural-network weight files")]
pub struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "MTC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a safetensors file into an .mtc archive.
    Compress(CompressArgs),
    /// Restore a safetensors file from an .mtc archive.
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode the difference between two models with the same layers.
    Delta(DeltaArgs),
    /// Rebuild a target model from its base and a delta archive.
    Apply {
        base: PathBuf,
        delta: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Per-layer and per-byte-group ratios of an archive.
    Stats {
        archive: PathBuf,
        #[arg(long, value_enum, default_value_t = StatsFormat::Table)]
        format: StatsFormat,
        /// Exclude container headers and names from compressed sizes.
        #[arg(long)]
        payload_only: bool,
    },
    /// Project monthly traffic savings for a hosted model.
    Estimate {
        /// Model size, e.g. `1.26GB` (decimal units).
        model_size: String,
        /// Monthly downloads, e.g. `63M`.
        downloads: String,
        /// Compressed size over original size, e.g. `0.852` or `85.2%`.
        ratio: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Lossless,
    Lossy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Layer,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeltaModeArg {
    Xor,
    Lossy,
}

/// Flags shared by `compress` and `delta`.
#[derive(Debug, Args)]
pub struct CodecArgs {
    /// Split words into byte groups before compressing (default).
    #[arg(long, overrides_with = "no_group_bytes")]
    group_bytes: bool,
    #[arg(long, overrides_with = "group_bytes")]
    no_group_bytes: bool,
    /// Store float sign bits in their own stream (default in lossy modes).
    #[arg(long, overrides_with = "no_sign_split")]
    sign_split: bool,
    #[arg(long, overrides_with = "sign_split")]
    no_sign_split: bool,
    #[arg(long, default_value = "zstd", value_parser = ["zstd", "lz4", "store"])]
    codec: String,
    /// Compression level (zstd only; defaults to 3).
    #[arg(long, value_parser = clap::value_parser!(i32).range(0..=22))]
    level: Option<i32>,
    /// Fixed-point precision exponent for lossy modes.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=30))]
    precision_bits: Option<u32>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Lossless)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = GranularityArg::Layer)]
    granularity: GranularityArg,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    base: PathBuf,
    target: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = DeltaModeArg::Xor)]
    delta_mode: DeltaModeArg,
    #[command(flatten)]
    codec: CodecArgs,
}

/// A flag combination that makes no sense; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl CodecArgs {
    fn codec_id(&self) -> CodecId {
        self.codec.parse().unwrap_or_default()
    }

    fn level(&self) -> i32 {
        self.level.unwrap_or(match self.codec_id() {
            CodecId::Zstd => crate::codec::DEFAULT_ZSTD_LEVEL,
            _ => 0,
        })
    }

    fn byte_group(&self) -> bool {
        !self.no_group_bytes
    }

    fn sign_split(&self, lossy: bool) -> bool {
        if self.sign_split {
            true
        } else if self.no_sign_split {
            false
        } else {
            lossy
        }
    }

    /// Precision for a lossy mode, or an error if the flag is missing or misplaced.
    fn lossy_params(
        &self,
        lossy: bool,
        mode_flag: &str,
    ) -> std::result::Result<Option<LossyParams>, UsageError> {
        match (lossy, self.precision_bits) {
            (true, Some(b)) => LossyParams::new(b)
                .map(Some)
                .map_err(|e| UsageError(e.to_string())),
            (true, None) => Err(UsageError(format!(
                "{mode_flag} lossy requires --precision-bits"
            ))),
            (false, Some(_)) => Err(UsageError(format!(
                "--precision-bits requires {mode_flag} lossy"
            ))),
            (false, None) => Ok(None),
        }
    }
}

impl CompressArgs {
    pub fn pipeline_config(&self) -> std::result::Result<PipelineConfig, UsageError> {
        let params = self
            .codec
            .lossy_params(self.mode == ModeArg::Lossy, "--mode")?;
        Ok(PipelineConfig {
            mode: params.map_or(Mode::Lossless, Mode::Lossy),
            byte_group: self.codec.byte_group(),
            sign_split: self.codec.sign_split(params.is_some()),
            codec: self.codec.codec_id(),
            level: self.codec.level(),
            granularity: match self.granularity {
                GranularityArg::Layer => Granularity::PerLayer,
                GranularityArg::Model => Granularity::WholeModel,
            },
        })
    }
}

impl DeltaArgs {
    pub fn delta_config(&self) -> std::result::Result<DeltaConfig, UsageError> {
        let params = self
            .codec
            .lossy_params(self.delta_mode == DeltaModeArg::Lossy, "--delta-mode")?;
        Ok(DeltaConfig {
            mode: params.map_or(DeltaMode::Xor, DeltaMode::LossyResidual),
            codec: self.codec.codec_id(),
            level: self.codec.level(),
            byte_group: self.codec.byte_group(),
            sign_split: self.codec.sign_split(params.is_some()),
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn default_decompress_output(input: &Path) -> PathBuf {
    match input.extension() {
        Some(ext) if ext == "mtc" => input.with_extension(""),
        _ => with_extension(input, ".safetensors"),
    }
}

/// One-line summary of a compression run; ratios match `stats` output.
pub fn summary_line(output: &Path, stats: &ArchiveStats, seconds: f64) -> String {
    let ratio = stats
        .total_ratio(false)
        .map_or_else(|| "n/a".to_string(), |r| r.to_string());
    let mut line = format!(
        "{}: {} -> {} bytes, ratio {ratio}",
        output.display(),
        stats.original_bytes(),
        stats.compressed_bytes(false),
    );
    for (count, groups) in stats.aggregate_groups() {
        let noun = if count == 1 { "group" } else { "groups" };
        line.push_str(&format!(
            ", {count} {noun} {}",
            crate::container::format_group_ratios(&groups)
        ));
    }
    line.push_str(&format!(", {seconds:.2}s"));
    let fallbacks = stats.fallback_layers();
    if !fallbacks.is_empty() {
        line.push_str(&format!(
            "\nfallback layers (stored losslessly): {}",
            fallbacks.join(", ")
        ));
    }
    line
}

fn cmd_compress(args: &CompressArgs, config: &PipelineConfig) -> Result<()> {
    let start = Instant::now();
    let (_, layers) = parse_model_file(&read(&args.input)?)?;
    let model = compress_model(&layers, config)?;
    let bytes = model_to_bytes(&model, config)?;
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| with_extension(&args.input, ".mtc"));
    write(&output, &bytes)?;
    let header = ArchiveHeader::for_model(config, model.entries.len())?;
    let stats = ArchiveStats::collect(&header, model.entries.into_iter().map(Ok))?;
    println!(
        "{}",
        summary_line(&output, &stats, start.elapsed().as_secs_f64())
    );
    Ok(())
}

fn cmd_decompress(input: &Path, output: Option<&Path>) -> Result<()> {
    let model = model_from_bytes(&read(input)?)?;
    let layers = decompress_model(&model)?;
    let file = write_model_file(&ModelManifest::from_layers(&layers), &layers)?;
    let output = output.map_or_else(|| default_decompress_output(input), Path::to_path_buf);
    write(&output, &file)?;
    println!("{}: {} layers restored", output.display(), layers.len());
    Ok(())
}

fn cmd_delta(args: &DeltaArgs, config: &DeltaConfig) -> Result<()> {
    let (_, base) = parse_model_file(&read(&args.base)?)?;
    let (_, target) = parse_model_file(&read(&args.target)?)?;
    let delta = build_delta(&base, &target, config)?;
    let bytes = delta.to_bytes()?;
    write(&args.output, &bytes)?;
    let original: u64 = target.iter().map(|l| l.byte_len()).sum();
    let ratio = compute_ratio(bytes.len() as u64, original)
        .map_or_else(|_| "n/a".to_string(), |r| r.to_string());
    println!(
        "{}: delta {} bytes for {original} bytes of target data, ratio {ratio}",
        args.output.display(),
        bytes.len()
    );
    Ok(())
}

fn cmd_apply(base: &Path, delta: &Path, output: &Path) -> Result<()> {
    let (_, base) = parse_model_file(&read(base)?)?;
    let delta = DeltaDescriptor::from_bytes(&read(delta)?)?;
    let layers = apply_delta(&base, &delta)?;
    write(
        output,
        &write_model_file(&ModelManifest::from_layers(&layers), &layers)?,
    )?;
    println!(
        "{}: {} layers reconstructed",
        output.display(),
        layers.len()
    );
    Ok(())
}

fn cmd_stats(archive: &Path, format: StatsFormat, payload_only: bool) -> Result<()> {
    let file = fs::File::open(archive).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", archive.display()),
        ))
    })?;
    let stats = crate::container::archive_stats(std::io::BufReader::new(file))?;
    let text = match format {
        StatsFormat::Table => stats.to_table(payload_only),
        StatsFormat::Csv => stats.to_csv(payload_only),
        StatsFormat::Json => {
            serde_json::to_string_pretty(&stats.to_json(payload_only))
                .expect("JSON values always serialize")
                + "\n"
        }
    };
    // A closed pipe (`mtc stats ... | head`) is not an error.
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Error::Io(e)),
        _ => {}
    }
    Ok(())
}

fn cmd_estimate(size: &str, downloads: &str, ratio: &str) -> Result<()> {
    let savings = estimate_savings(
        parse_size(size)?,
        parse_count(downloads)?,
        parse_ratio(ratio)?,
    )?;
    println!("{} per month ({savings:.4e} bytes)", format_bytes(savings));
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> ExitCode {
    let usage = |e: UsageError| {
        eprintln!("error: {}", e.0);
        ExitCode::from(2)
    };
    let compress_config = match &cli.command {
        Command::Compress(args) => match args.pipeline_config() {
            Ok(c) => Some(c),
            Err(e) => return usage(e),
        },
        _ => None,
    };
    let delta_config = match &cli.command {
        Command::Delta(args) => match args.delta_config() {
            Ok(c) => Some(c),
            Err(e) => return usage(e),
        },
        _ => None,
    };
    if cli.threads == Some(0) {
        return usage(UsageError("--threads must be at least 1".into()));
    }

    let work = || match &cli.command {
        Command::Compress(args) => {
            cmd_compress(args, compress_config.as_ref().expect("validated above"))
        }
        Command::Decompress { input, output } => cmd_decompress(input, output.as_deref()),
        Command::Delta(args) => cmd_delta(args, delta_config.as_ref().expect("validated above")),
        Command::Apply {
            base,
            delta,
            output,
        } => cmd_apply(base, delta, output),
        Command::Stats {
            archive,
            format,
            payload_only,
        } => cmd_stats(archive, *format, *payload_only),
        Command::Estimate {
            model_size,
            downloads,
            ratio,
        } => cmd_estimate(model_size, downloads, ratio),
    };

    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => work(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn main() -> ExitCode {
    run(Cli::parse())
}
