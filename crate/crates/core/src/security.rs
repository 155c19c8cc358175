//! Restore-attack probability bounds.
//!
//! An attacker holding a mixed category in which every original block still
//! exists must reassemble each image from the blocks of its position group.
//! The reported bound for one category of `c` images cut into `b` blocks
//! is `1 / (b!)^c`; for a whole dataset it is the product over
//! categories. Everything is kept in log10 space because these numbers
//! underflow `f64` long before realistic block counts and category sizes.
//!
//! [`enumerate_reassemblies`] is an exhaustive reference for tiny instances:
//! it tries every assignment of each position group's blocks to the images
//! of the category. With distinct blocks that gives `(c!)^b` assemblies,
//! which agrees with the closed-form bound only when `b == c`; the
//! comparison table exposes both.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest block count and category size accepted by [`enumerate_reassemblies`].
pub const ENUMERATION_LIMIT: usize = 4;

/// `log10(n!)` as a sum of `log10(k)`.
pub fn log10_factorial(n: u64) -> f64 {
    // Kahan summation keeps large n accurate.
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for k in 2..=n {
        let y = (k as f64).log10() - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `log10` of the probability of restoring one category of `category_size`
/// images cut into `block_count` blocks: `-category_size * log10(block_count!)`.
pub fn restore_log_prob_category(block_count: u64, category_size: u64) -> f64 {
    // 0 - x rather than -x so certainty prints as 0, not -0.
    0.0 - category_size as f64 * log10_factorial(block_count)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCensus {
    pub categories: Vec<(String, u64)>,
    pub block_count: u64,
}

impl CategoryCensus {
    pub fn new(categories: Vec<(String, u64)>, block_count: u64) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::InvalidConfig("census needs at least one category".into()));
        }
        if block_count == 0 {
            return Err(Error::InvalidConfig("block count must be at least 1".into()));
        }
        if let Some((label, _)) = categories.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidConfig(format!("category `{label}` has no images")));
        }
        Ok(Self {
            categories,
            block_count,
        })
    }

    /// Unnamed categories `c0, c1, ...` from a list of counts.
    pub fn from_counts(counts: &[u64], block_count: u64) -> Result<Self> {
        Self::new(
            counts.iter().enumerate().map(|(i, &n)| (format!("c{i}"), n)).collect(),
            block_count,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestoreBound {
    pub log10_prob_per_category: Vec<(String, f64)>,
    pub log10_prob_total: f64,
}

pub fn restore_log_prob_total(census: &CategoryCensus) -> RestoreBound {
    let per: Vec<(String, f64)> = census
        .categories
        .iter()
        .map(|(label, n)| (label.clone(), restore_log_prob_category(census.block_count, *n)))
        .collect();
    let total = per.iter().map(|(_, v)| v).sum();
    RestoreBound {
        log10_prob_per_category: per,
        log10_prob_total: total,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reassembly {
    pub total_assemblies: u64,
    pub successful: u64,
}

impl Reassembly {
    pub fn success_prob(&self) -> Ratio<u64> {
        Ratio::new(self.successful, self.total_assemblies)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Exhaustively reassemble a category.
///
/// `mixed[i][j]` is block `j` of mixed image `i`; `truth[i][j]` the same for
/// the originals. Blocks never leave their position group `j`. Every way of
/// handing group `j`'s blocks to the category's images is tried, and an assembly
/// succeeds when every image equals its original.
pub fn enumerate_reassemblies<B: PartialEq>(mixed: &[Vec<B>], truth: &[Vec<B>]) -> Result<Reassembly> {
    let category_size = truth.len();
    let block_count = truth.first().map_or(0, Vec::len);
    if category_size == 0 || block_count == 0 {
        return Err(Error::InvalidConfig("empty category".into()));
    }
    if category_size > ENUMERATION_LIMIT || block_count > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            block_count,
            category_size,
        });
    }
    let shape_ok = mixed.len() == category_size
        && mixed.iter().chain(truth).all(|img| img.len() == block_count);
    if !shape_ok {
        return Err(Error::ShapeMismatch {
            expected: format!("{category_size} images of {block_count} blocks"),
            actual: format!("{} mixed images", mixed.len()),
        });
    }

    // Walk the cartesian product of one permutation per position group:
    // image i receives block mixed[perm_j[i]][j] in group j.
    let perms = permutations(category_size);
    let mut choice = vec![0usize; block_count];
    let mut total_assemblies = 0u64;
    let mut successful = 0u64;
    'assemblies: loop {
        total_assemblies += 1;
        let restored = (0..category_size)
            .all(|i| (0..block_count).all(|j| mixed[perms[choice[j]][i]][j] == truth[i][j]));
        successful += restored as u64;
        for c in choice.iter_mut() {
            *c += 1;
            if *c < perms.len() {
                continue 'assemblies;
            }
            *c = 0;
        }
        break;
    }
    Ok(Reassembly {
        total_assemblies,
        successful,
    })
}

/// Category with all-distinct blocks where every original block survives,
/// the mixed images holding each position group in a rotated order.
pub fn distinct_instance(block_count: usize, category_size: usize) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let truth: Vec<Vec<u32>> = (0..category_size)
        .map(|i| (0..block_count).map(|j| (i * block_count + j) as u32).collect())
        .collect();
    let mixed = (0..category_size)
        .map(|i| {
            (0..block_count)
                .map(|j| truth[(i + j) % category_size][j])
                .collect()
        })
        .collect();
    (mixed, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub block_count: usize,
    pub category_size: usize,
    /// `-category_size * log10(block_count!)`.
    pub formula_log10: f64,
    pub oracle_total: u64,
    pub oracle_successful: u64,
    pub oracle_log10: f64,
}

impl ComparisonRow {
    pub fn agrees(&self) -> bool {
        (self.formula_log10 - self.oracle_log10).abs() < 1e-9
    }
}

/// Closed-form bound vs. exhaustive enumeration on distinct-block instances
/// for every block count up to `max_blocks` and category size up to
/// `max_category`.
pub fn comparison_table(max_blocks: usize, max_category: usize) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for nb in 1..=max_blocks {
        for nc in 1..=max_category {
            rows.push(compare_instance(nb, nc)?);
        }
    }
    Ok(rows)
}

pub fn compare_instance(block_count: usize, category_size: usize) -> Result<ComparisonRow> {
    let (mixed, truth) = distinct_instance(block_count, category_size);
    let r = enumerate_reassemblies(&mixed, &truth)?;
    Ok(ComparisonRow {
        block_count,
        category_size,
        formula_log10: restore_log_prob_category(block_count as u64, category_size as u64),
        oracle_total: r.total_assemblies,
        oracle_successful: r.successful,
        oracle_log10: (r.successful as f64).log10() - (r.total_assemblies as f64).log10(),
    })
}

pub fn format_comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("n_b\tn_c\tformula_log10\toracle_prob\toracle_log10\tagree\n");
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{:.6}\t{}/{}\t{:.6}\t{}\n",
            r.block_count,
            r.category_size,
            r.formula_log10,
            r.oracle_successful,
            r.oracle_total,
            r.oracle_log10,
            if r.agrees() { "yes" } else { "no" }
        ));
    }
    s
}
