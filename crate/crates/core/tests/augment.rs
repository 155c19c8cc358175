use blockmix::augment::{augment_dataset, brighten, flip, rotate, variant_id, AugmentConfig};
use blockmix::{synth, LabeledImage};
use proptest::prelude::*;

fn arb_image() -> impl Strategy<Value = LabeledImage> {
    (1u32..20, 1u32..20).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |px| LabeledImage::new(w, h, px, "cat", "cat/x.png").unwrap())
    })
}

#[test]
fn spec_examples() {
    let img = LabeledImage::uniform(1, 1, [200, 100, 0], "a", "a/p.png").unwrap();
    assert_eq!(brighten(&img, 1.5).pixels(), [255, 150, 0]);
    assert_eq!(brighten(&img, 1.3).pixels()[1], 130);

    let flat = LabeledImage::uniform(21, 15, [80, 90, 100], "a", "a/u.png").unwrap();
    assert_eq!(flip(&flat), flat);
    let turned = rotate(&flat, 30.0);
    assert_eq!(turned.pixel(10, 7), [80, 90, 100]);
    assert_eq!(turned.pixel(0, 0), [0, 0, 0]);
    assert_eq!(turned.pixel(20, 14), [0, 0, 0]);
}

#[test]
fn full_turn_is_near_identity_inside() {
    let img = synth::texture_dataset(1, 1, (32, 24), 3).remove(0);
    let back = rotate(&img, 360.0);
    for y in 1..23 {
        for x in 1..31 {
            for c in 0..3 {
                let d = img.pixel(x, y)[c] as i32 - back.pixel(x, y)[c] as i32;
                assert!(d.abs() <= 1, "({x},{y}) differs by {d}");
            }
        }
    }
}

#[test]
fn quarter_turn_is_counter_clockwise() {
    // A bright pixel right of centre ends up above centre.
    let mut px = vec![0u8; 5 * 5 * 3];
    px[(2 * 5 + 4) * 3] = 255;
    let img = LabeledImage::new(5, 5, px, "a", "a/d.png").unwrap();
    let out = rotate(&img, 90.0);
    assert_eq!(out.pixel(2, 0)[0], 255);
}

#[test]
fn variants_of_a_dataset() {
    let data = synth::random_dataset(6, 2, (16, 16), 1);
    let all = augment_dataset(&data, &AugmentConfig::default()).unwrap();
    assert_eq!(all.len(), 24);
    let ids: Vec<&str> = all[..4].iter().map(|i| i.source_id()).collect();
    assert_eq!(
        ids,
        ["class0/img00000.png", "class0/img00000_flip.png", "class0/img00000_rot.png", "class0/img00000_bright.png"]
    );
    assert_eq!(augment_dataset(&data, &AugmentConfig::disabled()).unwrap(), data);

    let chained = AugmentConfig {
        emit_all_variants: false,
        ..AugmentConfig::default()
    };
    let replaced = augment_dataset(&data, &chained).unwrap();
    assert_eq!(replaced.len(), 6);
    assert_eq!(replaced[0], brighten(&rotate(&flip(&data[0]), 15.0), 1.3));
    assert_eq!(variant_id("m/a.b.jpg", "rot"), "m/a.b_rot.jpg");

    let bad = AugmentConfig {
        brightness_factor: Some(-1.0),
        ..AugmentConfig::default()
    };
    assert!(augment_dataset(&data, &bad).is_err());
}

proptest! {
    #[test]
    fn flip_is_an_involution(img in arb_image()) {
        prop_assert_eq!(flip(&flip(&img)), img);
    }

    #[test]
    fn neutral_settings_are_identities(img in arb_image()) {
        prop_assert_eq!(brighten(&img, 1.0), img.clone());
        prop_assert_eq!(rotate(&img, 0.0), img);
    }

    #[test]
    fn variants_keep_label_and_shape(
        img in arb_image(),
        flip_on: bool,
        rot in prop::option::of(-180.0f64..180.0),
        bright in prop::option::of(0.0f64..3.0),
    ) {
        let cfg = AugmentConfig { flip_horizontal: flip_on, rotation_degrees: rot, brightness_factor: bright, emit_all_variants: true };
        let out = augment_dataset(std::slice::from_ref(&img), &cfg).unwrap();
        prop_assert_eq!(out.len(), 1 + cfg.enabled_count());
        for v in &out {
            prop_assert_eq!(v.label(), img.label());
            prop_assert_eq!(v.size(), img.size());
        }
    }
}
