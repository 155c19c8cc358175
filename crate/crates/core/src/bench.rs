//! Throughput of [`mix_dataset`](crate::mixer::mix_dataset) over a grid of
//! dataset sizes and block counts.
//!
//! Datasets are generated in memory before timing starts. One discarded
//! warm-up pass covers the whole grid, then `repetitions` timed passes
//! follow; each grid point reports its median.
//! Disk I/O is never timed.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixer::mix_dataset_with_workers;
use crate::model::{derive_partition, LabeledImage, MixConfig, PartitionSpec};

/// Throughput observed on an Intel Core i5-8265U laptop:
/// `(block count, dataset size, images per second)`. Printed for context only.
pub const REFERENCE_THROUGHPUT: [(u32, usize, f64); 2] = [(128, 5000, 13.0), (256, 5000, 6.0)];

pub const CSV_HEADER: [&str; 4] = ["n_is", "n_b", "seconds", "images_per_sec"];

/// Most square grid with `block_count` cells that evenly divides the
/// canonical size; columns >= rows. At 192x192 this gives 4 -> 96x96,
/// 8 -> 48x96, 16 -> 48x48, 32 -> 24x48, 64 -> 24x24, 128 -> 12x24,
/// 256 -> 12x12 (block length x width).
pub fn partition_for_block_count(canonical_size: (u32, u32), block_count: u32) -> Result<PartitionSpec> {
    let (len, wid) = canonical_size;
    let mut rows = (block_count as f64).sqrt().floor() as u32;
    while rows >= 1 {
        if block_count.is_multiple_of(rows) {
            let cols = block_count / rows;
            if cols > 0 && len % cols == 0 && wid % rows == 0 {
                return derive_partition(canonical_size, len / cols, wid / rows);
            }
        }
        rows -= 1;
    }
    Err(Error::InvalidConfig(format!(
        "no even grid of {block_count} blocks fits {len}x{wid}"
    )))
}

/// Grids used by the sweep: every block count gets the same number of rows
/// and `block_count / rows` columns, using the fewest rows that fit the whole sweep.
///
/// Mixing copies each replaced block one pixel row at a time, so its cost
/// follows the number of column cuts. Square grids pair up block counts with
/// equal column counts (8 and 16, 32 and 64, ... at 192x192) whose costs tie;
/// a fixed row count makes the copy work grow with every step of the block count.
pub fn bench_partitions(canonical_size: (u32, u32), block_counts: &[u32]) -> Result<Vec<PartitionSpec>> {
    let (len, wid) = canonical_size;
    let rows = (1..=wid)
        .filter(|r| wid % r == 0)
        .find(|&r| block_counts.iter().all(|&n| n % r == 0 && n >= r && len % (n / r) == 0))
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "no common row count fits block counts {block_counts:?} into {len}x{wid}"
            ))
        })?;
    block_counts
        .iter()
        .map(|&n| derive_partition(canonical_size, len / (n / rows), wid / rows))
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub sizes: Vec<usize>,
    pub block_counts: Vec<u32>,
    /// Knobs other than the partition are taken from here.
    pub template: MixConfig,
    pub repetitions: usize,
    pub workers: usize,
    pub labels: usize,
    pub data_seed: u64,
}

impl BenchPlan {
    pub fn new(sizes: Vec<usize>, block_counts: Vec<u32>, template: MixConfig) -> Self {
        Self {
            sizes,
            block_counts,
            template,
            repetitions: 3,
            workers: 1,
            labels: 2,
            data_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub n_is: usize,
    pub n_b: u32,
    pub seconds: f64,
    pub images_per_sec: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub cpu: String,
    pub workers: usize,
}

impl Environment {
    pub fn detect(workers: usize) -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_owned())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_owned());
        Self { cpu, workers }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    /// Row-major over `sizes x block_counts` in plan order.
    pub points: Vec<BenchPoint>,
    pub environment: Environment,
}

impl BenchResult {
    pub fn point(&self, n_is: usize, n_b: u32) -> Option<&BenchPoint> {
        self.points.iter().find(|p| p.n_is == n_is && p.n_b == n_b)
    }

    /// Points with this block count, in plan order of sizes.
    pub fn by_block_count(&self, n_b: u32) -> Vec<&BenchPoint> {
        self.points.iter().filter(|p| p.n_b == n_b).collect()
    }

    pub fn by_size(&self, n_is: usize) -> Vec<&BenchPoint> {
        self.points.iter().filter(|p| p.n_is == n_is).collect()
    }
}

fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn time_mix(data: &[LabeledImage], config: &MixConfig, workers: usize) -> Result<f64> {
    let start = Instant::now();
    let out = mix_dataset_with_workers(data, config, workers)?;
    let secs = start.elapsed().as_secs_f64();
    drop(out);
    Ok(secs)
}

/// Run the sweep. `generate(n, labels, canonical_size, seed)` builds the
/// synthetic dataset; the largest size is generated once and smaller sizes
/// use its prefix.
pub fn run_bench<G>(plan: &BenchPlan, generate: G) -> Result<BenchResult>
where
    G: Fn(usize, usize, (u32, u32), u64) -> Vec<LabeledImage>,
{
    if plan.sizes.is_empty() || plan.block_counts.is_empty() {
        return Err(Error::InvalidConfig("bench sizes and block counts must be non-empty".into()));
    }
    if plan.repetitions == 0 {
        return Err(Error::InvalidConfig("bench needs at least one repetition".into()));
    }
    let canonical = plan.template.canonical_size;
    let partitions = bench_partitions(canonical, &plan.block_counts)?;
    let largest = *plan.sizes.iter().max().expect("non-empty");
    let data = generate(largest, plan.labels, canonical, plan.data_seed);

    let configs: Vec<MixConfig> = partitions
        .iter()
        .map(|partition| MixConfig {
            partition: *partition,
            ..plan.template.clone()
        })
        .collect();
    let grid: Vec<(usize, usize)> = plan
        .sizes
        .iter()
        .flat_map(|&n_is| (0..configs.len()).map(move |k| (n_is, k)))
        .collect();
    // Each pass visits the whole grid, so slow drift in machine speed hits
    // every point alike instead of one size or block count.
    let mut samples = vec![Vec::with_capacity(plan.repetitions); grid.len()];
    for pass in 0..=plan.repetitions {
        for (g, &(n_is, k)) in grid.iter().enumerate() {
            let secs = time_mix(&data[..n_is], &configs[k], plan.workers)?;
            if pass > 0 {
                samples[g].push(secs);
            }
        }
    }
    let points = grid
        .iter()
        .zip(samples)
        .map(|(&(n_is, k), samples)| {
            let seconds = median(&samples).max(f64::MIN_POSITIVE);
            let n_b = plan.block_counts[k];
            log::info!("n_is={n_is} n_b={n_b} median={seconds:.4}s");
            BenchPoint {
                n_is,
                n_b,
                seconds,
                images_per_sec: n_is as f64 / seconds,
                samples,
            }
        })
        .collect();
    Ok(BenchResult {
        points,
        environment: Environment::detect(plan.workers),
    })
}

pub fn write_csv<W: Write>(result: &BenchResult, out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::io("writing bench csv", std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for p in &result.points {
        w.write_record([
            p.n_is.to_string(),
            p.n_b.to_string(),
            format!("{:.6}", p.seconds),
            format!("{:.3}", p.images_per_sec),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("writing bench csv", e))
}

pub fn save_csv(result: &BenchResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_csv(result, file)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

pub fn is_monotone_nondecreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0])
}

/// Human-readable summary: per-block-count linear fits over dataset size, per-size
/// monotonicity over block count, and the reference throughput.
pub fn summary(result: &BenchResult) -> String {
    let mut s = format!(
        "cpu: {}\nworkers: {}\n",
        result.environment.cpu, result.environment.workers
    );
    let mut block_counts: Vec<u32> = result.points.iter().map(|p| p.n_b).collect();
    block_counts.dedup();
    block_counts.sort_unstable();
    block_counts.dedup();
    let mut sizes: Vec<usize> = result.points.iter().map(|p| p.n_is).collect();
    sizes.sort_unstable();
    sizes.dedup();
    for p in &result.points {
        s.push_str(&format!(
            "n_is={:>6} n_b={:>4} median={:.4}s ({:.1} img/s)\n",
            p.n_is, p.n_b, p.seconds, p.images_per_sec
        ));
    }
    if sizes.len() >= 2 {
        for &n_b in &block_counts {
            let pts = result.by_block_count(n_b);
            let xs: Vec<f64> = pts.iter().map(|p| p.n_is as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.seconds).collect();
            let fit = linear_fit(&xs, &ys);
            s.push_str(&format!(
                "n_b={n_b}: time vs n_is slope={:.3e}s/img R^2={:.4}\n",
                fit.slope, fit.r_squared
            ));
        }
    }
    if block_counts.len() >= 2 {
        for &n_is in &sizes {
            let mut pts = result.by_size(n_is);
            pts.sort_by_key(|p| p.n_b);
            let ys: Vec<f64> = pts.iter().map(|p| p.seconds).collect();
            s.push_str(&format!(
                "n_is={n_is}: time monotone in n_b: {}\n",
                if is_monotone_nondecreasing(&ys) { "yes" } else { "no" }
            ));
        }
    }
    for (n_b, n_is, ips) in REFERENCE_THROUGHPUT {
        let measured = result
            .point(n_is, n_b)
            .map_or("not measured".to_owned(), |p| format!("{:.1} img/s", p.images_per_sec));
        s.push_str(&format!(
            "reference (i5-8265U laptop) n_b={n_b} n_is={n_is}: ~{ips} img/s; here: {measured}\n"
        ));
    }
    s
}
