mod common;

use common::*;
use lfsynth_core::io::*;
use lfsynth_core::lightfield::{Extents, LightField};
use lfsynth_core::LfError;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lf4_round_trip_is_bit_exact(seed in any::<u64>(), v in 1usize..4, u in 1usize..4, h in 1usize..6, w in 1usize..6) {
        let lf = random_light_field(Extents::new(v, u, h, w).unwrap(), seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.lf4");
        store_lf4(&path, &lf).unwrap();
        let back = load_lf4(&path).unwrap();
        let bits = |l: &LightField| l.samples().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&lf));
        prop_assert_eq!(back.extents(), lf.extents());
    }

    #[test]
    fn png_grid_round_trip_is_within_quantization(seed in any::<u64>(), v in 1usize..4, u in 1usize..4) {
        let lf = random_light_field(Extents::new(v, u, 5, 6).unwrap(), seed);
        let dir = tempfile::tempdir().unwrap();
        let files = export_png_grid(dir.path(), &lf).unwrap();
        prop_assert_eq!(files.len(), v * u);
        let back = import_png_grid(dir.path()).unwrap();
        prop_assert_eq!(back.extents(), lf.extents());
        for (a, b) in back.samples().iter().zip(lf.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 255.0 + 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn lf4_header_layout() {
    let e = Extents::new(2, 3, 4, 5).unwrap();
    let bytes = encode_lf4(&Lf4 {
        extents: e,
        channels: 3,
        samples: vec![0.5; e.rays() * 3],
    });
    assert_eq!(&bytes[..4], b"LF4D");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    let dims: Vec<u32> = (0..5)
        .map(|i| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()))
        .collect();
    assert_eq!(dims, vec![2, 3, 4, 5, 3]);
    assert_eq!((bytes[26], bytes[27]), (1, 0));
    assert_eq!(bytes.len(), 28 + e.rays() * 3 * 4);
    assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), 0.5);
}

#[test]
fn truncated_lf4_names_expected_and_actual_sizes() {
    let lf = random_light_field(Extents::new(2, 2, 3, 3).unwrap(), 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.lf4");
    store_lf4(&path, &lf).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
    match load_lf4(&path) {
        Err(LfError::Truncated { expected, actual, .. }) => {
            assert_eq!(expected, bytes.len() as u64);
            assert_eq!(actual, bytes.len() as u64 - 7);
        }
        other => panic!("unexpected {other:?}"),
    }
    let msg = load_lf4(&path).unwrap_err().to_string();
    assert!(msg.contains(&bytes.len().to_string()), "{msg}");
    for cut in 0..28 {
        assert!(decode_lf4(&bytes[..cut], &path).is_err());
    }
}

#[test]
fn corrupt_headers_are_rejected() {
    let lf = random_light_field(Extents::new(1, 1, 2, 2).unwrap(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.lf4");
    store_lf4(&path, &lf).unwrap();
    let good = std::fs::read(&path).unwrap();
    for (at, val) in [(0, b'X'), (4, 2), (26, 2), (27, 1), (6, 0)] {
        let mut bad = good.clone();
        bad[at] = val;
        assert!(decode_lf4(&bad, &path).is_err(), "byte {at} = {val}");
    }
    let mut extra = good.clone();
    extra.extend_from_slice(&[0; 4]);
    assert!(decode_lf4(&extra, &path).is_err());
}

#[test]
fn channel_count_is_checked_by_typed_loaders() {
    let e = Extents::new(2, 2, 3, 3).unwrap();
    let depths = random_depths(e, 4.0, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.lf4");
    store_depth_lf4(&path, &depths).unwrap();
    assert_eq!(load_depth_lf4(&path).unwrap(), depths);
    assert!(load_lf4(&path).is_err());
    let lf_path = dir.path().join("l.lf4");
    store_lf4(&lf_path, &random_light_field(e, 4)).unwrap();
    assert!(load_depth_lf4(&lf_path).is_err());
}

#[test]
fn missing_and_mismatched_views_are_rejected() {
    let e = Extents::new(2, 2, 4, 4).unwrap();
    let lf = random_light_field(e, 5);
    let dir = tempfile::tempdir().unwrap();
    export_png_grid(dir.path(), &lf).unwrap();
    std::fs::remove_file(dir.path().join(view_file_name(0, 1))).unwrap();
    assert!(matches!(import_png_grid(dir.path()), Err(LfError::MissingView(_))));

    let dir = tempfile::tempdir().unwrap();
    export_png_grid(dir.path(), &lf).unwrap();
    write_view_png(&dir.path().join(view_file_name(1, 1)), &random_view(4, 5, 1)).unwrap();
    assert!(matches!(import_png_grid(dir.path()), Err(LfError::ExtentMismatch(_))));

    let empty = tempfile::tempdir().unwrap();
    assert!(import_png_grid(empty.path()).is_err());
    assert!(import_png_grid(&empty.path().join("nope")).is_err());
}

#[test]
fn exported_pixels_are_clamped() {
    let e = Extents::new(1, 1, 2, 2).unwrap();
    let lf = LightField::from_fn(e, |_, _, y, x, _| if (y + x) % 2 == 0 { 3.0 } else { -7.0 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_png_grid(dir.path(), &lf).unwrap();
    let back = import_png_grid(dir.path()).unwrap();
    assert_eq!(back, lf.clamped());
}

#[test]
fn depth_png_round_trip_and_sidecar() {
    let e = Extents::new(1, 1, 6, 7).unwrap();
    let depths = random_depths(e, 15.0, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("depth.png");
    let sidecar = write_depth_png(&path, 6, 7, depths.central_depths()).unwrap();
    assert!(std::fs::read_to_string(&sidecar).unwrap().contains("16"));
    let (h, w, back) = read_depth_png(&path).unwrap();
    assert_eq!((h, w), (6, 7));
    for (a, b) in back.iter().zip(depths.central_depths()) {
        assert!((a - b).abs() <= 16.0 / 65535.0 + 1e-5);
    }
    assert!(write_depth_png(&path, 6, 6, depths.central_depths()).is_err());
}

#[test]
fn input_view_comes_from_png_or_lf4_center() {
    let e = Extents::new(3, 3, 4, 5).unwrap();
    let lf = random_light_field(e, 7);
    let dir = tempfile::tempdir().unwrap();
    let lf_path = dir.path().join("x.lf4");
    store_lf4(&lf_path, &lf).unwrap();
    assert_eq!(read_input_view(&lf_path).unwrap(), lf.central_view());
    let png = dir.path().join("x.png");
    write_view_png(&png, &lf.central_view()).unwrap();
    let v = read_input_view(&png).unwrap();
    assert_eq!((v.height(), v.width()), (4, 5));
    assert!(read_input_view(&dir.path().join("missing.png")).is_err());
}
