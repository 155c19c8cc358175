//! Directory-per-label image trees.
//!
//! ```text
//! root/
//!   female/a.jpg
//!   male/b.png
//! ```
//!
//! Each subdirectory of `root` is a label; each file in it with a `png`,
//! `jpg`, `jpeg` or `bmp` extension (any case) is one image. Files at the
//! root, nested directories and dotfiles are ignored; any other file inside
//! a label directory is an error. Images load in lexicographic path order
//! and are resized to the canonical size.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::LabeledImage;

pub const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(format!("reading {}", dir.display()), e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
    entries.sort();
    Ok(entries)
}

fn is_hidden(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.'))
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// `(label, path, source_id)` for every image under `root`.
pub fn scan_dataset(root: &Path) -> Result<Vec<(String, PathBuf, String)>> {
    if !root.is_dir() {
        return Err(Error::EmptyDataset(format!("{} is not a directory", root.display())));
    }
    let mut found = Vec::new();
    for dir in sorted_entries(root)? {
        if !dir.is_dir() || is_hidden(&dir) {
            continue;
        }
        let label = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::UnsupportedFormat(dir.clone()))?
            .to_owned();
        let before = found.len();
        for file in sorted_entries(&dir)? {
            if file.is_dir() || is_hidden(&file) {
                continue;
            }
            if !has_image_extension(&file) {
                return Err(Error::UnsupportedFormat(file));
            }
            let name = file
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::UnsupportedFormat(file.clone()))?;
            let id = format!("{label}/{name}");
            found.push((label.clone(), file, id));
        }
        if found.len() == before {
            return Err(Error::EmptyDataset(format!("label directory {} has no images", dir.display())));
        }
    }
    if found.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no label directories", root.display())));
    }
    Ok(found)
}

pub fn load_image(path: &Path, label: &str, source_id: &str, canonical_size: (u32, u32)) -> Result<LabeledImage> {
    let decoded = image::ImageReader::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?
        .with_guessed_format()
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?
        .decode()
        .map_err(|e| match e {
            image::ImageError::Unsupported(_) => Error::UnsupportedFormat(path.to_owned()),
            other => Error::Decode {
                path: path.to_owned(),
                message: other.to_string(),
            },
        })?;
    Ok(LabeledImage::from_rgb_image(decoded.to_rgb8(), label, source_id)?.resized(canonical_size))
}

/// Decode and resize every image under `root`.
pub fn load_dataset(root: &Path, canonical_size: (u32, u32)) -> Result<Vec<LabeledImage>> {
    scan_dataset(root)?
        .par_iter()
        .map(|(label, path, id)| load_image(path, label, id, canonical_size))
        .collect()
}

/// Output file name for each image: the source basename with a `.png`
/// extension. When two images of one label map to the same name, later
/// ones (in dataset order) get `-1`, `-2`, ... appended to the stem.
pub fn output_paths(dataset: &[LabeledImage]) -> Vec<(String, String)> {
    let mut taken: HashSet<(String, String)> = HashSet::new();
    dataset
        .iter()
        .map(|img| {
            let key = crate::ssim::pair_key(img.source_id());
            let stem = key.rsplit('/').next().unwrap_or(key);
            let mut name = format!("{stem}.png");
            let mut n = 0;
            while !taken.insert((img.label().to_owned(), name.clone())) {
                n += 1;
                name = format!("{stem}-{n}.png");
            }
            (img.label().to_owned(), name)
        })
        .collect()
}

/// Write the dataset as lossless PNGs under `out_root/<label>/`.
pub fn save_dataset(dataset: &[LabeledImage], out_root: &Path) -> Result<()> {
    let paths = output_paths(dataset);
    let labels: HashSet<&str> = paths.iter().map(|(l, _)| l.as_str()).collect();
    for label in labels {
        let dir = out_root.join(label);
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    dataset
        .par_iter()
        .zip(paths.par_iter())
        .try_for_each(|(img, (label, name))| {
            let path = out_root.join(label).join(name);
            img.to_rgb_image()
                .save_with_format(&path, image::ImageFormat::Png)
                .map_err(|e| match e {
                    image::ImageError::IoError(io) => Error::io(format!("writing {}", path.display()), io),
                    other => Error::io(
                        format!("writing {}", path.display()),
                        std::io::Error::other(other.to_string()),
                    ),
                })
        })
}
