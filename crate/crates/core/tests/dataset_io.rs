mod common;

use std::fs;
use std::path::Path;

use blockmix::dataset::{load_dataset, output_paths, save_dataset, scan_dataset};
use blockmix::mixer::census;
use blockmix::{synth, Error, LabeledImage};

fn write_image(path: &Path, w: u32, h: u32, seed: u8, format: image::ImageFormat) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        image::Rgb([(x as u8).wrapping_mul(seed), (y as u8).wrapping_add(seed), seed])
    });
    img.save_with_format(path, format).unwrap();
}

fn faces_tree(root: &Path) {
    use image::ImageFormat::{Bmp, Jpeg, Png};
    write_image(&root.join("male/b.png"), 30, 20, 1, Png);
    write_image(&root.join("male/a.jpg"), 40, 40, 2, Jpeg);
    write_image(&root.join("male/c.BMP"), 16, 24, 3, Bmp);
    write_image(&root.join("female/x.png"), 20, 20, 4, Png);
    write_image(&root.join("female/y.jpeg"), 25, 30, 5, Jpeg);
}

#[test]
fn census_of_a_two_label_tree() {
    let dir = tempfile::tempdir().unwrap();
    faces_tree(dir.path());
    let data = load_dataset(dir.path(), (16, 16)).unwrap();
    assert_eq!(data.len(), 5);
    let counts: Vec<(String, usize)> = census(&data).into_iter().map(|c| (c.label, c.count)).collect();
    assert_eq!(counts, [("female".to_owned(), 2), ("male".to_owned(), 3)]);
    assert!(data.iter().all(|d| d.size() == (16, 16)));
}

#[test]
fn ordering_and_ids_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    faces_tree(dir.path());
    let ids: Vec<String> = scan_dataset(dir.path()).unwrap().into_iter().map(|s| s.2).collect();
    assert_eq!(ids, ["female/x.png", "female/y.jpeg", "male/a.jpg", "male/b.png", "male/c.BMP"]);
    let a = load_dataset(dir.path(), (8, 8)).unwrap();
    let b = load_dataset(dir.path(), (8, 8)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn corrupt_file_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    faces_tree(dir.path());
    let bad = dir.path().join("male/broken.png");
    let mut bytes = fs::read(dir.path().join("male/b.png")).unwrap();
    bytes.truncate(bytes.len() / 2);
    fs::write(&bad, bytes).unwrap();
    match load_dataset(dir.path(), (8, 8)) {
        Err(Error::Decode { path, .. }) => assert_eq!(path, bad),
        other => panic!("expected a decode error, got {other:?}"),
    }
}

#[test]
fn tree_shape_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(dir.path(), (8, 8)), Err(Error::EmptyDataset(_))));
    assert!(matches!(load_dataset(&dir.path().join("missing"), (8, 8)), Err(Error::EmptyDataset(_))));

    fs::create_dir_all(dir.path().join("empty")).unwrap();
    assert!(matches!(load_dataset(dir.path(), (8, 8)), Err(Error::EmptyDataset(_))));
    fs::remove_dir(dir.path().join("empty")).unwrap();

    faces_tree(dir.path());
    fs::write(dir.path().join("README.txt"), "root files are ignored").unwrap();
    fs::write(dir.path().join("male/.DS_Store"), "hidden").unwrap();
    assert_eq!(load_dataset(dir.path(), (8, 8)).unwrap().len(), 5);
    fs::write(dir.path().join("male/notes.txt"), "nope").unwrap();
    assert!(matches!(load_dataset(dir.path(), (8, 8)), Err(Error::UnsupportedFormat(_))));
}

#[test]
fn save_then_load_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth::random_dataset(5, 2, (12, 10), 3);
    save_dataset(&data, dir.path()).unwrap();
    assert_eq!(common::tree_bytes(dir.path()).len(), 5);
    let back = load_dataset(dir.path(), (12, 10)).unwrap();
    for img in &data {
        let twin = back.iter().find(|b| b.source_id() == img.source_id()).unwrap();
        assert_eq!(twin.pixels(), img.pixels());
        assert_eq!(twin.label(), img.label());
    }
}

#[test]
fn extension_rewrite_collisions_get_suffixes() {
    let px = |v| LabeledImage::uniform(4, 4, [v, v, v], "male", "").unwrap();
    let data = vec![
        px(1).with_source_id("male/a.jpg"),
        px(2).with_source_id("male/a.png"),
        px(3).with_source_id("male/a.bmp"),
    ];
    let names: Vec<String> = output_paths(&data).into_iter().map(|p| p.1).collect();
    assert_eq!(names, ["a.png", "a-1.png", "a-2.png"]);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&data, dir.path()).unwrap();
    let back = load_dataset(dir.path(), (4, 4)).unwrap();
    let ids: Vec<&str> = back.iter().map(|b| b.source_id()).collect();
    assert_eq!(ids, ["male/a-1.png", "male/a-2.png", "male/a.png"]);
    assert_eq!(back[2].pixels()[0], 1);
}
