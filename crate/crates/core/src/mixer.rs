//! Label-based pixel block mixing.
//!
//! Every target image is cut into the configured block grid. Each block is
//! replaced, with probability `p`, by the same-position block of one of the
//! sampled donors that carry the target's label; otherwise it is kept. Rounds
//! compound: round `t` mixes the output of round `t - 1`, while donors are
//! always drawn from the original (resized) dataset.
//!
//! All randomness for one image in one round comes from a ChaCha8 stream
//! seeded by `SHA-256(master_seed, round, source_id)`, so results do not
//! depend on processing order or worker count.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    copy_block, DonorShortagePolicy, LabeledImage, MixConfig, PartitionSpec, ReplacementMask,
    SingletonLabelPolicy,
};

const STREAM_DOMAIN: &[u8] = b"blockmix/image-stream/v1";

/// Same-label images supplying replacement blocks for one target.
#[derive(Debug, Clone)]
pub struct DonorSet<'a> {
    donors: Vec<&'a LabeledImage>,
}

impl<'a> DonorSet<'a> {
    pub fn new(target: &LabeledImage, donors: Vec<&'a LabeledImage>) -> Result<Self> {
        if donors.is_empty() {
            return Err(Error::EmptyDonorSet);
        }
        if let Some(d) = donors.iter().find(|d| d.label() != target.label()) {
            return Err(Error::LabelMismatch {
                donor: d.source_id().to_owned(),
                donor_label: d.label().to_owned(),
                target_label: target.label().to_owned(),
            });
        }
        Ok(Self { donors })
    }

    pub fn len(&self) -> usize {
        self.donors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.donors.is_empty()
    }

    pub fn get(&self, i: usize) -> &'a LabeledImage {
        self.donors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a LabeledImage> + '_ {
        self.donors.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOutcome {
    Kept,
    /// Index into [`MixProvenance::donor_ids`].
    Replaced(u32),
}

/// Audit record of one target in one round. `outcomes` is row-major over
/// the block grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixProvenance {
    pub target_id: String,
    pub round: u32,
    pub donor_ids: Vec<String>,
    pub outcomes: Vec<BlockOutcome>,
}

impl MixProvenance {
    /// Donor that supplied the block at row-major index `i`, if replaced.
    pub fn donor_of(&self, i: usize) -> Option<&str> {
        match self.outcomes[i] {
            BlockOutcome::Kept => None,
            BlockOutcome::Replaced(d) => Some(&self.donor_ids[d as usize]),
        }
    }

    pub fn replaced_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, BlockOutcome::Replaced(_)))
            .count()
    }
}

/// Draw `length` independent keep/replace decisions, each `replace` with
/// probability `p`.
pub fn generate_mask<R: Rng + ?Sized>(length: usize, p: f64, rng: &mut R) -> ReplacementMask {
    // random::<f64>() is uniform on [0, 1): p = 0 never replaces, p = 1 always does.
    ReplacementMask::from_bits((0..length).map(|_| rng.random::<f64>() < p).collect())
}

/// Mix one target against its donors. Masks are drawn one grid row at a
/// time; each replaced block picks its donor uniformly.
pub fn mix_image<R: Rng + ?Sized>(
    target: &LabeledImage,
    donors: &DonorSet<'_>,
    spec: &PartitionSpec,
    p: f64,
    rng: &mut R,
) -> Result<(LabeledImage, MixProvenance)> {
    if donors.is_empty() {
        return Err(Error::EmptyDonorSet);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("replacement probability {p} is outside [0, 1]")));
    }
    let size = spec.canonical_size();
    for img in std::iter::once(target).chain(donors.iter()) {
        if img.size() != size {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} image", size.0, size.1),
                actual: format!("{}x{} (`{}`)", img.width(), img.height(), img.source_id()),
            });
        }
    }

    let mut out = target.pixels().to_vec();
    let mut outcomes = Vec::with_capacity(spec.block_count() as usize);
    let cols = spec.cols() as usize;
    for row in 0..spec.rows() {
        let mask = generate_mask(cols, p, rng);
        for col in 0..spec.cols() {
            if mask.replace(col as usize) {
                let d = rng.random_range(0..donors.len());
                copy_block(&mut out, donors.get(d).pixels(), spec, (row, col));
                outcomes.push(BlockOutcome::Replaced(d as u32));
            } else {
                outcomes.push(BlockOutcome::Kept);
            }
        }
    }

    let provenance = MixProvenance {
        target_id: target.source_id().to_owned(),
        round: 0,
        donor_ids: donors.iter().map(|d| d.source_id().to_owned()).collect(),
        outcomes,
    };
    Ok((target.with_pixels(out), provenance))
}

/// Seed of the random stream used for `source_id` in `round`.
pub fn image_stream_seed(master_seed: u64, source_id: &str, round: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(STREAM_DOMAIN);
    h.update(master_seed.to_le_bytes());
    h.update(round.to_le_bytes());
    h.update(source_id.as_bytes());
    h.finalize().into()
}

pub fn image_stream(master_seed: u64, source_id: &str, round: u32) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(image_stream_seed(master_seed, source_id, round))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: String,
    pub count: usize,
}

/// Per-label image counts, sorted by label.
pub fn census(dataset: &[LabeledImage]) -> Vec<LabelCount> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for img in dataset {
        *counts.entry(img.label()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(label, count)| LabelCount {
            label: label.to_owned(),
            count,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MixOutput {
    /// One mixed image per input, in input order.
    pub images: Vec<LabeledImage>,
    /// `provenance[i][t]` is image `i`'s record for round `t`.
    pub provenance: Vec<Vec<MixProvenance>>,
    pub census: Vec<LabelCount>,
}

impl MixOutput {
    /// `(replaced, total)` block decisions over every image and round.
    pub fn replacement_stats(&self) -> (usize, usize) {
        self.provenance
            .iter()
            .flatten()
            .fold((0, 0), |(r, t), p| (r + p.replaced_count(), t + p.outcomes.len()))
    }
}

fn to_canonical(img: &LabeledImage, size: (u32, u32)) -> Cow<'_, LabeledImage> {
    if img.size() == size {
        Cow::Borrowed(img)
    } else {
        Cow::Owned(img.resized(size))
    }
}

/// Where image `i` sits inside its label group.
struct Grouping {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    pos_in_group: Vec<usize>,
}

impl Grouping {
    fn new(dataset: &[LabeledImage]) -> Self {
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, img) in dataset.iter().enumerate() {
            by_label.entry(img.label()).or_default().push(i);
        }
        let mut group_of = vec![0; dataset.len()];
        let mut pos_in_group = vec![0; dataset.len()];
        let groups: Vec<Vec<usize>> = by_label.into_values().collect();
        for (g, members) in groups.iter().enumerate() {
            for (pos, &i) in members.iter().enumerate() {
                group_of[i] = g;
                pos_in_group[i] = pos;
            }
        }
        Self {
            groups,
            group_of,
            pos_in_group,
        }
    }
}

fn check_label_groups(dataset: &[LabeledImage], grouping: &Grouping, config: &MixConfig) -> Result<()> {
    let required = config.donors_per_image as usize;
    for members in &grouping.groups {
        let label = dataset[members[0]].label();
        let available = members.len() - 1;
        if available == 0 {
            match config.singleton_label_policy {
                SingletonLabelPolicy::Error => {
                    return Err(Error::SingletonLabel {
                        label: label.to_owned(),
                    })
                }
                SingletonLabelPolicy::PassthroughWithWarning => {
                    log::warn!("label `{label}` has a single image; passing it through unmixed");
                }
            }
        } else if available < required {
            match config.donor_shortage_policy {
                DonorShortagePolicy::Error => {
                    return Err(Error::DonorShortage {
                        label: label.to_owned(),
                        available,
                        required,
                    })
                }
                DonorShortagePolicy::SampleWithReplacement => {
                    log::warn!(
                        "label `{label}` has {available} donor candidates for {required} slots; resampling"
                    );
                }
            }
        }
    }
    Ok(())
}

/// Pick donor indices (into the dataset) for image `i`, never `i` itself.
/// Without shortage: `donors_per_image` distinct candidates. With shortage: every
/// candidate once in random order, then uniform draws to fill the rest.
fn select_donors<R: Rng + ?Sized>(
    grouping: &Grouping,
    i: usize,
    required: usize,
    rng: &mut R,
) -> Vec<usize> {
    let members = &grouping.groups[grouping.group_of[i]];
    let own = grouping.pos_in_group[i];
    let available = members.len() - 1;
    // Candidate k maps to member k, skipping the target's own slot.
    let member = |k: usize| members[if k >= own { k + 1 } else { k }];
    if available >= required {
        index::sample(rng, available, required)
            .into_iter()
            .map(member)
            .collect()
    } else {
        let mut picked: Vec<usize> = index::sample(rng, available, available)
            .into_iter()
            .map(member)
            .collect();
        while picked.len() < required {
            picked.push(member(rng.random_range(0..available)));
        }
        picked
    }
}

fn mix_one(
    current: &LabeledImage,
    i: usize,
    originals: &[Cow<'_, LabeledImage>],
    grouping: &Grouping,
    config: &MixConfig,
    round: u32,
) -> Result<(LabeledImage, MixProvenance)> {
    let members = &grouping.groups[grouping.group_of[i]];
    if members.len() == 1 {
        let provenance = MixProvenance {
            target_id: current.source_id().to_owned(),
            round,
            donor_ids: Vec::new(),
            outcomes: vec![BlockOutcome::Kept; config.partition.block_count() as usize],
        };
        return Ok((current.clone(), provenance));
    }
    let mut rng = image_stream(config.master_seed, current.source_id(), round);
    let picked = select_donors(grouping, i, config.donors_per_image as usize, &mut rng);
    let donors = DonorSet::new(current, picked.iter().map(|&d| &*originals[d]).collect())?;
    let (img, mut provenance) = mix_image(current, &donors, &config.partition, config.replace_prob, &mut rng)?;
    provenance.round = round;
    Ok((img, provenance))
}

/// Mix a whole labeled dataset on the global rayon pool.
pub fn mix_dataset(dataset: &[LabeledImage], config: &MixConfig) -> Result<MixOutput> {
    run_mix(dataset, config, Workers::Global)
}

/// Mix with an explicit worker count; `1` runs on the calling thread.
pub fn mix_dataset_with_workers(
    dataset: &[LabeledImage],
    config: &MixConfig,
    workers: usize,
) -> Result<MixOutput> {
    if workers <= 1 {
        return run_mix(dataset, config, Workers::Sequential);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_mix(dataset, config, Workers::Global))
}

#[derive(Clone, Copy)]
enum Workers {
    Sequential,
    Global,
}

fn run_mix(dataset: &[LabeledImage], config: &MixConfig, workers: Workers) -> Result<MixOutput> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("no images to mix".into()));
    }
    let mut seen = HashSet::with_capacity(dataset.len());
    for img in dataset {
        if !seen.insert(img.source_id()) {
            return Err(Error::DuplicateSourceId(img.source_id().to_owned()));
        }
    }
    let grouping = Grouping::new(dataset);
    check_label_groups(dataset, &grouping, config)?;

    let size = config.canonical_size;
    let canonical = |img| to_canonical(img, size);
    let originals: Vec<Cow<'_, LabeledImage>> = match workers {
        Workers::Sequential => dataset.iter().map(canonical).collect(),
        Workers::Global => dataset.par_iter().map(canonical).collect(),
    };

    let mut provenance: Vec<Vec<MixProvenance>> =
        (0..dataset.len()).map(|_| Vec::with_capacity(config.rounds as usize)).collect();
    let mut current: Option<Vec<LabeledImage>> = None;
    for round in 0..config.rounds {
        let target = |i: usize| current.as_ref().map_or(&*originals[i], |c| &c[i]);
        let step = |i: usize| mix_one(target(i), i, &originals, &grouping, config, round);
        let mixed: Vec<(LabeledImage, MixProvenance)> = match workers {
            Workers::Sequential => (0..dataset.len()).map(step).collect::<Result<_>>()?,
            Workers::Global => (0..dataset.len()).into_par_iter().map(step).collect::<Result<_>>()?,
        };
        let mut next = Vec::with_capacity(mixed.len());
        for (i, (img, prov)) in mixed.into_iter().enumerate() {
            next.push(img);
            provenance[i].push(prov);
        }
        current = Some(next);
    }

    Ok(MixOutput {
        images: current.expect("at least one round"),
        provenance,
        census: census(dataset),
    })
}
