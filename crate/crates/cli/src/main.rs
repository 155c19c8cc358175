use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use blockmix::bench::{self, BenchPlan};
use blockmix::manifest::{self, MixManifest, MANIFEST_FILE};
use blockmix::security::{self, CategoryCensus};
use blockmix::{
    augment_dataset, dataset_ssim, load_dataset, mix_dataset, mix_dataset_with_workers, save_dataset, synth,
    AugmentConfig, DonorShortagePolicy, MixConfig, SingletonLabelPolicy, SsimParams,
};

/// Label-based pixel block mixing for image datasets.
#[derive(Parser)]
#[command(name = "blockmix", version, about)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mix a directory-per-label dataset.
    Mix(MixArgs),
    /// SSIM between an original tree and its mixed counterpart.
    Ssim(SsimArgs),
    /// Restore-attack probability bound for a category census.
    AttackProb(AttackArgs),
    /// Append flip / rotation / brightness variants to a mixed tree.
    Augment(AugmentArgs),
    /// Time mixing over dataset sizes and block counts.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Size(u32, u32);

impl std::str::FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (l, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected LxW, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad dimension `{v}`: {e}"));
        Ok(Size(parse(l)?, parse(w)?))
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ShortagePolicy {
    Error,
    Resample,
}

#[derive(Clone, Copy, ValueEnum)]
enum SingletonPolicy {
    Error,
    Passthrough,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Canonical image size, length x width (horizontal x vertical).
    #[arg(long, default_value = "192x192")]
    size: Size,
    /// Block length (horizontal pixels).
    #[arg(long)]
    block_len: u32,
    /// Block width (vertical pixels).
    #[arg(long)]
    block_wid: u32,
    /// Mixing rounds.
    #[arg(long, default_value_t = blockmix::model::DEFAULT_ROUNDS)]
    rounds: u32,
    /// Donors per image.
    #[arg(long, default_value_t = blockmix::model::DEFAULT_DONORS)]
    donors: u32,
    /// Per-block replacement probability.
    #[arg(long, default_value_t = blockmix::model::DEFAULT_REPLACE_PROB)]
    prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep per-image donor provenance in the manifest (sensitive).
    #[arg(long)]
    audit_manifest: bool,
    #[arg(long, value_enum, default_value = "error")]
    donor_shortage: ShortagePolicy,
    #[arg(long, value_enum, default_value = "error")]
    singleton: SingletonPolicy,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SsimArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    mixed: PathBuf,
    #[arg(long, default_value = "192x192")]
    size: Size,
    /// Report file; defaults to `<mixed>/ssim_report.txt`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    /// Blocks per image.
    #[arg(long)]
    blocks: u64,
    /// Images per category, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    counts: Vec<u64>,
    /// Category names, comma separated; defaults to c0, c1, ...
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Mixed tree containing a `mixmanifest.json`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add a horizontally mirrored variant.
    #[arg(long)]
    flip: bool,
    /// Add a variant rotated counter-clockwise by DEG degrees.
    #[arg(long, value_name = "DEG", allow_hyphen_values = true)]
    rotate: Option<f64>,
    /// Add a variant with channel values scaled by F.
    #[arg(long, value_name = "F")]
    brighten: Option<f64>,
    /// Replace each image by the chained augmentations instead of adding variants.
    #[arg(long)]
    replace: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Block counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    blocks: Vec<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "192x192")]
    size: Size,
    #[arg(long, default_value_t = blockmix::model::DEFAULT_DONORS)]
    donors: u32,
    #[arg(long, default_value_t = blockmix::model::DEFAULT_REPLACE_PROB)]
    prob: f64,
    #[arg(long, default_value_t = blockmix::model::DEFAULT_ROUNDS)]
    rounds: u32,
    /// Timed repetitions per grid point (median reported).
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit 1 unless time is nondecreasing in block count at every size.
    #[arg(long)]
    check_monotone: bool,
    /// Exit 1 unless every per-block-count linear fit over sizes reaches this R^2.
    #[arg(long, value_name = "R2")]
    check_linear: Option<f64>,
}

/// Failure caused by the invocation rather than the environment.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<blockmix::Error>() {
        Some(e) if e.is_user_error() => 1,
        _ => 2,
    }
}

fn ensure_empty_dir(path: &Path) -> Result<()> {
    if path.exists() {
        let mut entries = fs::read_dir(path).with_context(|| format!("reading {}", path.display()))?;
        if entries.next().is_some() {
            return Err(usage(format!("output directory {} is not empty", path.display())));
        }
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn cmd_mix(args: MixArgs) -> Result<()> {
    let mut config = MixConfig::new((args.size.0, args.size.1), args.block_len, args.block_wid)?;
    config.rounds = args.rounds;
    config.donors_per_image = args.donors;
    config.replace_prob = args.prob;
    config.master_seed = args.seed;
    config.donor_shortage_policy = match args.donor_shortage {
        ShortagePolicy::Error => DonorShortagePolicy::Error,
        ShortagePolicy::Resample => DonorShortagePolicy::SampleWithReplacement,
    };
    config.singleton_label_policy = match args.singleton {
        SingletonPolicy::Error => SingletonLabelPolicy::Error,
        SingletonPolicy::Passthrough => SingletonLabelPolicy::PassthroughWithWarning,
    };
    config.validate()?;

    let data = load_dataset(&args.input, config.canonical_size)?;
    log::info!("loaded {} images from {}", data.len(), args.input.display());
    let output = match args.workers {
        Some(w) => mix_dataset_with_workers(&data, &config, w)?,
        None => mix_dataset(&data, &config)?,
    };
    ensure_empty_dir(&args.out)?;
    save_dataset(&output.images, &args.out)?;
    let manifest_path = args.out.join(MANIFEST_FILE);
    manifest::write_manifest(&MixManifest::from_run(&config, &output), &manifest_path, args.audit_manifest)?;

    let (replaced, decisions) = output.replacement_stats();
    println!("images={}", output.images.len());
    println!("labels={}", output.census.len());
    println!("n_b={}", config.partition.block_count());
    println!("replaced_blocks={replaced}/{decisions}");
    println!("manifest={}", manifest_path.display());
    Ok(())
}

fn cmd_ssim(args: SsimArgs) -> Result<()> {
    let size = (args.size.0, args.size.1);
    let originals = load_dataset(&args.original, size)?;
    let mixed = load_dataset(&args.mixed, size)?;
    let mut report = dataset_ssim(&originals, &mixed, &SsimParams::default())?;
    let manifest_path = args.mixed.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let m = manifest::read_manifest(&manifest_path)?;
        report = report.with_echo(m.config.partition.block_count(), m.config.replace_prob, m.config.rounds);
    }
    let text = report.to_text();
    let path = args.report.unwrap_or_else(|| args.mixed.join("ssim_report.txt"));
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    print!("{text}");
    eprintln!("mean SSIM {:.5} over {} pairs", report.mean_ssim, report.per_image.len());
    Ok(())
}

fn cmd_attack_prob(args: AttackArgs) -> Result<()> {
    let census = if args.labels.is_empty() {
        CategoryCensus::from_counts(&args.counts, args.blocks)?
    } else {
        if args.labels.len() != args.counts.len() {
            return Err(usage(format!(
                "{} labels for {} counts",
                args.labels.len(),
                args.counts.len()
            )));
        }
        CategoryCensus::new(args.labels.into_iter().zip(args.counts.iter().copied()).collect(), args.blocks)?
    };
    let bound = security::restore_log_prob_total(&census);
    println!("n_b={}", census.block_count);
    for ((label, count), (_, log_p)) in census.categories.iter().zip(&bound.log10_prob_per_category) {
        println!("category\t{label}\tcount={count}\tlog10_prob={log_p:.9}");
    }
    println!("total_log10_prob={:.9}", bound.log10_prob_total);

    let limit = security::ENUMERATION_LIMIT as u64;
    if census.block_count <= limit && census.categories.iter().all(|(_, n)| *n <= limit) {
        let mut sizes: Vec<u64> = census.categories.iter().map(|(_, n)| *n).collect();
        sizes.sort_unstable();
        sizes.dedup();
        let rows = sizes
            .iter()
            .map(|&n| security::compare_instance(census.block_count as usize, n as usize))
            .collect::<blockmix::Result<Vec<_>>>()?;
        println!();
        print!("{}", security::format_comparison_table(&rows));
    }
    Ok(())
}

fn cmd_augment(args: AugmentArgs) -> Result<()> {
    let manifest_path = args.input.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(usage(format!(
            "{} has no {MANIFEST_FILE}; augment expects a mixed tree",
            args.input.display()
        )));
    }
    let mut manifest = manifest::read_manifest(&manifest_path)?;
    let config = AugmentConfig {
        flip_horizontal: args.flip,
        rotation_degrees: args.rotate,
        brightness_factor: args.brighten,
        emit_all_variants: !args.replace,
    };
    config.validate()?;
    let data = load_dataset(&args.input, manifest.config.canonical_size)?;
    let augmented = augment_dataset(&data, &config)?;
    ensure_empty_dir(&args.out)?;
    save_dataset(&augmented, &args.out)?;

    let keep_audit = manifest.audit.is_some();
    manifest.census = blockmix::mixer::census(&augmented);
    manifest.augmentation = Some(config);
    let out_manifest = args.out.join(MANIFEST_FILE);
    manifest::write_manifest(&manifest, &out_manifest, keep_audit)?;
    println!("images_in={}", data.len());
    println!("images_out={}", augmented.len());
    println!("manifest={}", out_manifest.display());
    Ok(())
}

/// Keep freed heap memory in-process so timed runs do not page-fault the
/// previous run's discarded outputs back in.
fn keep_heap() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    unsafe {
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    keep_heap();
    let size = (args.size.0, args.size.1);
    let first = bench::bench_partitions(size, &args.blocks)?[0];
    let mut template = MixConfig::new(size, first.block_len(), first.block_wid())?;
    template.donors_per_image = args.donors;
    template.replace_prob = args.prob;
    template.rounds = args.rounds;
    template.master_seed = args.seed;
    template.validate()?;
    let mut plan = BenchPlan::new(args.sizes.clone(), args.blocks.clone(), template);
    plan.repetitions = args.reps;
    plan.workers = args.workers;
    plan.data_seed = args.seed;

    let result = bench::run_bench(&plan, synth::random_dataset)?;
    bench::save_csv(&result, &args.out)?;
    bench::write_csv(&result, std::io::stdout().lock())?;
    eprint!("{}", bench::summary(&result));

    let mut failures = Vec::new();
    if args.check_monotone {
        for &n_is in &args.sizes {
            let mut pts = result.by_size(n_is);
            pts.sort_by_key(|p| p.n_b);
            let secs: Vec<f64> = pts.iter().map(|p| p.seconds).collect();
            if !bench::is_monotone_nondecreasing(&secs) {
                failures.push(format!("time not monotone in n_b at n_is={n_is}"));
            }
        }
    }
    if let Some(min_r2) = args.check_linear {
        for &n_b in &args.blocks {
            let pts = result.by_block_count(n_b);
            let xs: Vec<f64> = pts.iter().map(|p| p.n_is as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.seconds).collect();
            let fit = bench::linear_fit(&xs, &ys);
            if fit.r_squared < min_r2 {
                failures.push(format!("n_b={n_b}: R^2 {:.4} < {min_r2}", fit.r_squared));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(usage(failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();

    let result = match cli.command {
        Command::Mix(a) => cmd_mix(a),
        Command::Ssim(a) => cmd_ssim(a),
        Command::AttackProb(a) => cmd_attack_prob(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_size() {
        assert_eq!("192x96".parse::<Size>().unwrap(), Size(192, 96));
        assert!("192".parse::<Size>().is_err());
        assert!("ax3".parse::<Size>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
