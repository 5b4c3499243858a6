mod common;

use common::*;
use lfsynth_core::eval::laplacian_energy;
use lfsynth_core::lightfield::*;
use lfsynth_core::scene::{generate_scene, SceneSpec, Texture, TextureKind};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refocus_matches_loop_oracle(seed in any::<u64>(), d in -3.0f32..3.0, radius in 0usize..3) {
        let e = Extents::new(5, 4, 7, 8).unwrap();
        let lf = random_light_field(e, seed);
        let out = lf.refocus(d, &ApertureMask::square(e, radius)).unwrap();
        let want = refocus_oracle(&lf, d as f64, |iv, iu| {
            let (ov, ou) = e.offset(iv, iu);
            ov.unsigned_abs() as usize <= radius && ou.unsigned_abs() as usize <= radius
        });
        for (a, b) in out.pixels().iter().zip(&want) {
            prop_assert!((*a as f64 - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn epi_entries_are_light_field_samples(seed in any::<u64>(), fy in 0usize..6, fv in 0usize..3) {
        let e = Extents::new(3, 4, 6, 5).unwrap();
        let lf = random_light_field(e, seed);
        let epi = lf.epi_slice(EpiAxis::U, fy, fv).unwrap();
        prop_assert_eq!((epi.rows, epi.cols), (e.u, e.x));
        for iu in 0..e.u {
            for x in 0..e.x {
                for c in 0..CHANNELS {
                    prop_assert_eq!(epi.get(iu, x, c), lf.get(fv, iu, fy, x, c));
                }
            }
        }
        let epi = lf.epi_slice(EpiAxis::V, fy.min(4), fv).unwrap();
        prop_assert_eq!((epi.rows, epi.cols), (e.v, e.y));
        for iv in 0..e.v {
            for y in 0..e.y {
                prop_assert_eq!(epi.get(iv, y, 1), lf.get(iv, fv, y, fy.min(4), 1));
            }
        }
    }
}

#[test]
fn epi_rejects_out_of_range_indices() {
    let e = Extents::new(3, 4, 6, 5).unwrap();
    let lf = random_light_field(e, 1);
    assert!(lf.epi_slice(EpiAxis::U, 6, 0).is_err());
    assert!(lf.epi_slice(EpiAxis::U, 0, 3).is_err());
    assert!(lf.epi_slice(EpiAxis::V, 5, 0).is_err());
    assert!(lf.epi_slice(EpiAxis::V, 0, 4).is_err());
}

#[test]
fn epi_of_single_plane_scene_has_constant_slope() {
    let e = Extents::new(8, 8, 16, 24).unwrap();
    let tex = Texture::textured(TextureKind::Stripes { period: 5.0, angle: 0.3 }, 0.8, 1);
    let o = generate_scene(&SceneSpec::single_plane(e, tex, 1.0)).unwrap();
    let (rv, _) = e.reference();
    let epi = o.light_field.epi_slice(EpiAxis::U, 8, rv).unwrap();
    // The point at x in view u sits at x + u in the reference row: shifting by
    // one column per view keeps the color.
    for iu in 1..e.u {
        for x in 0..e.x - 1 {
            assert!((epi.get(iu, x, 0) - epi.get(iu - 1, x + 1, 0)).abs() < 1e-5);
        }
    }
}

#[test]
fn refocus_at_plane_disparity_is_sharpest() {
    let e = Extents::new(8, 8, 48, 48).unwrap();
    let tex = Texture::textured(TextureKind::ValueNoise { cell: 2.0 }, 0.9, 4);
    for d in [-2.0f32, 1.0] {
        let o = generate_scene(&SceneSpec::single_plane(e, tex.clone(), d)).unwrap();
        let center = o.light_field.central_view();
        let full = ApertureMask::full(e);
        let focused = o.light_field.refocus(d, &full).unwrap();
        let margin = (4.0 * d.abs()).ceil() as usize;
        for y in margin..e.y - margin {
            for x in margin..e.x - margin {
                for c in 0..CHANNELS {
                    let (a, b) = (focused.get(y, x, c), center.get(y, x, c));
                    assert!((a - b).abs() <= 1e-4, "d {d} at ({y},{x}): {a} vs {b}");
                }
            }
        }
        let sharp = laplacian_energy(&focused);
        for off in [-2.0, 2.0] {
            let blurred = o.light_field.refocus(d + off, &full).unwrap();
            assert!(laplacian_energy(&blurred) < sharp, "d {d} offset {off}");
        }
    }
}

#[test]
fn central_aperture_and_disparity_independence() {
    let e = Extents::new(4, 4, 6, 6).unwrap();
    let lf = random_light_field(e, 2);
    for d in [-5.0, 0.0, 7.5] {
        assert_eq!(lf.refocus(d, &ApertureMask::central(e)).unwrap(), lf.central_view());
    }
}

#[test]
fn extents_parse_and_display_round_trip() {
    let e: Extents = "8x8x64x32".parse().unwrap();
    assert_eq!((e.v, e.u, e.y, e.x), (8, 8, 64, 32));
    assert_eq!(e.to_string().parse::<Extents>().unwrap(), e);
    assert!("8x8x64".parse::<Extents>().is_err());
    assert!("8x0x4x4".parse::<Extents>().is_err());
    assert!("axbxcxd".parse::<Extents>().is_err());
}

#[test]
fn views_and_slices_are_consistent() {
    let e = Extents::new(3, 2, 4, 5).unwrap();
    let lf = random_light_field(e, 3);
    let mut copy = LightField::filled(e, 0.0).unwrap();
    for iv in 0..e.v {
        for iu in 0..e.u {
            copy.set_view(iv, iu, &lf.view(iv, iu).unwrap()).unwrap();
        }
    }
    assert_eq!(copy, lf);
    assert!(lf.view(3, 0).is_err());
    let views: Vec<View> = (0..6).map(|i| lf.view(i / 2, i % 2).unwrap()).collect();
    assert_eq!(LightField::from_views(e.v, e.u, &views).unwrap(), lf);
}
