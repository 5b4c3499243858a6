mod common;

use common::*;
use lfsynth_core::lightfield::{Extents, LightField, RayDepthField, View, CHANNELS};
use lfsynth_core::LfError;
use lfsynth_core::render::*;
use lfsynth_core::scene::{generate_scene, SceneSpec, Texture, TextureKind};
use lfsynth_tensor::gradcheck::{check_gradients, DEFAULT_STEP};
use lfsynth_tensor::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(shape.to_vec(), |_| r.random_range(lo..hi))
}

#[test]
fn zero_depth_copies_the_input_into_every_view() {
    let e = Extents::new(3, 5, 7, 9).unwrap();
    let view = random_view(7, 9, 1);
    let lf = render_lambertian(&view, &RayDepthField::constant(e, 0.0).unwrap()).unwrap();
    for iv in 0..e.v {
        for iu in 0..e.u {
            assert_eq!(lf.view(iv, iu).unwrap(), view, "view ({iv}, {iu})");
        }
    }
}

#[test]
fn integer_depth_is_an_integer_shift_on_the_interior() {
    let e = Extents::new(5, 5, 16, 16).unwrap();
    let view = random_view(16, 16, 2);
    for d in [-2i32, -1, 1, 3] {
        let lf = render_lambertian(&view, &RayDepthField::constant(e, d as f32).unwrap()).unwrap();
        for iv in 0..e.v {
            for iu in 0..e.u {
                let (ov, ou) = e.offset(iv, iu);
                for y in 0..e.y as i32 {
                    for x in 0..e.x as i32 {
                        let (sy, sx) = (y + ov * d, x + ou * d);
                        if sy < 0 || sx < 0 || sy >= e.y as i32 || sx >= e.x as i32 {
                            continue;
                        }
                        for c in 0..CHANNELS {
                            assert_eq!(
                                lf.get(iv, iu, y as usize, x as usize, c),
                                view.get(sy as usize, sx as usize, c),
                                "d {d} view ({iv},{iu}) pixel ({y},{x})"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn reference_view_is_reproduced_for_any_depth() {
    let e = Extents::new(8, 8, 12, 10).unwrap();
    let view = random_view(12, 10, 3);
    let depths = random_depths(e, 6.0, 4);
    assert_eq!(render_lambertian(&view, &depths).unwrap().central_view(), view);
}

#[test]
fn render_rejects_mismatched_sizes() {
    let e = Extents::new(2, 2, 4, 4).unwrap();
    assert!(render_lambertian(&random_view(4, 5, 0), &RayDepthField::constant(e, 0.0).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn render_matches_loop_oracle(seed in any::<u64>(), v in 1usize..5, u in 1usize..5, h in 2usize..9, w in 2usize..9) {
        let e = Extents::new(v, u, h, w).unwrap();
        let view = random_view(h, w, seed);
        let depths = random_depths(e, 3.0, seed ^ 0x55);
        let lf = render_lambertian(&view, &depths).unwrap();
        let want = render_oracle(&view, &depths);
        for (a, b) in lf.samples().iter().zip(&want) {
            prop_assert!((*a as f64 - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn consistency_matches_loop_oracle(seed in any::<u64>(), v in 1usize..5, u in 1usize..5, h in 2usize..8, w in 2usize..8) {
        let e = Extents::new(v, u, h, w).unwrap();
        let depths = random_depths(e, 4.0, seed);
        let got = depth_consistency_loss(&depths).unwrap();
        let want = consistency_oracle(&depths).mean;
        prop_assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn tv_matches_loop_oracle(seed in any::<u64>(), v in 1usize..4, u in 1usize..4, h in 1usize..8, w in 1usize..8) {
        let e = Extents::new(v, u, h, w).unwrap();
        let depths = random_depths(e, 4.0, seed);
        prop_assert!((tv_loss(&depths).unwrap() - tv_oracle(&depths)).abs() < 1e-6);
    }

    #[test]
    fn consistency_and_tv_vanish_on_constant_fields(d in -16.0f32..16.0, v in 1usize..5, u in 1usize..5) {
        let depths = RayDepthField::constant(Extents::new(v, u, 6, 7).unwrap(), d).unwrap();
        prop_assert!(depth_consistency_loss(&depths).unwrap() <= 1e-7);
        prop_assert_eq!(tv_loss(&depths).unwrap(), 0.0);
    }

    #[test]
    fn loss_terms_are_nonnegative_and_total_is_weighted_sum(seed in any::<u64>(), lc in 0.0f64..1.0, lt in 0.0f64..1.0) {
        let e = Extents::new(3, 3, 5, 6).unwrap();
        let (a, b, c) = (random_light_field(e, seed), random_light_field(e, seed + 1), random_light_field(e, seed + 2));
        let depths = random_depths(e, 2.0, seed + 3);
        let l = total_loss(&a, &b, &c, &depths, lc, lt).unwrap();
        prop_assert!(l.terms().iter().all(|(_, v)| *v >= 0.0));
        let want = l.lambertian_l1 + l.predicted_l1 + lc * l.consistency + lt * l.tv;
        prop_assert!((l.total - want).abs() < 1e-9);
    }
}

#[test]
fn single_plane_oracle_depths_are_consistent() {
    let e = Extents::new(8, 8, 24, 24).unwrap();
    for d in [-3.5f32, 0.0, 1.25, 4.0] {
        let tex = Texture::textured(TextureKind::ValueNoise { cell: 4.0 }, 0.8, 9);
        let oracle = generate_scene(&SceneSpec::single_plane(e, tex, d)).unwrap();
        assert!(depth_consistency_loss(&oracle.ray_depths).unwrap() <= 1e-7, "d {d}");
    }
}

#[test]
fn shear_validity_excludes_rays_without_a_source_view() {
    let e = Extents::new(3, 4, 2, 2).unwrap();
    let depths = RayDepthField::constant(e, 0.5).unwrap();
    let (_, valid_v) = shear_resample(&depths, ShearOffset::V).unwrap();
    let (_, valid_u) = shear_resample(&depths, ShearOffset::U).unwrap();
    for iv in 0..e.v {
        for iu in 0..e.u {
            let i = e.ray_index(iv, iu, 1, 0);
            assert_eq!(valid_v[i], iv >= 1);
            assert_eq!(valid_u[i], iu >= 1);
        }
    }
    assert_eq!(consistency_oracle(&depths).pairs, valid_v.iter().chain(&valid_u).filter(|b| **b).count());
}

#[test]
fn sheared_samples_match_loop_oracle() {
    let e = Extents::new(3, 3, 6, 5).unwrap();
    let depths = random_depths(e, 2.5, 17);
    let (sheared, valid) = shear_resample(&depths, ShearOffset::U).unwrap();
    for iv in 0..e.v {
        for iu in 1..e.u {
            let src: Vec<f64> = depths.view_depths(iv, iu - 1).iter().map(|&d| d as f64).collect();
            for y in 0..e.y {
                for x in 0..e.x {
                    let i = e.ray_index(iv, iu, y, x);
                    assert!(valid[i]);
                    let d = depths.get(iv, iu, y, x) as f64;
                    let want = bilinear(&src, e.y, e.x, y as f64, x as f64 + d);
                    assert!((sheared.depths()[i] as f64 - want).abs() < 1e-5);
                }
            }
        }
    }
}

// Finite-difference checks in double precision. Random non-integer depths
// keep samples off bilinear cell boundaries.

#[test]
fn ray_coords_gradient() {
    let d = tensor(&[2, 3, 2, 4, 5], 21, -1.5, 1.5);
    let w = tensor(&[2, 2, 3, 2, 4, 5], 22, -1.0, 1.0);
    let report = check_gradients::<_, LfError>(
        &[d],
        |g, v| {
            let c = ray_coords(g, v[0])?;
            let wv = g.constant(w.clone());
            let p = g.mul(c, wv)?;
            let t = g.tanh(p);
            Ok(g.sum(t))
        },
        DEFAULT_STEP,
    )
    .unwrap();
    assert!(report.max_relative_error() < 1e-5, "{report:?}");
}

#[test]
fn render_gradient_wrt_views_and_depths() {
    let views = tensor(&[3, 2, 6, 7], 31, -1.0, 1.0);
    let depths = tensor(&[2, 3, 3, 6, 7], 32, -1.3, 1.3);
    let report = check_gradients::<_, LfError>(
        &[views, depths],
        |g, v| {
            let lf = render_lambertian_graph(g, v[0], v[1])?;
            let t = g.tanh(lf);
            Ok(g.sum(t))
        },
        DEFAULT_STEP,
    )
    .unwrap();
    assert!(report.max_relative_error() < 1e-5, "{report:?}");
}

#[test]
fn shear_gradient() {
    for k in [ShearOffset::V, ShearOffset::U] {
        let depths = tensor(&[1, 3, 3, 5, 6], 41, -1.4, 1.4);
        let report = check_gradients::<_, LfError>(
            &[depths],
            |g, v| {
                let (s, _) = shear_resample_graph(g, v[0], k)?;
                let t = g.tanh(s);
                let prod = g.mul(t, v[0])?;
                Ok(g.sum(prod))
            },
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(report.max_relative_error() < 1e-5, "{k:?} {report:?}");
    }
}

#[test]
fn consistency_and_tv_gradients() {
    let depths = tensor(&[1, 3, 3, 5, 6], 51, -1.4, 1.4);
    let report = check_gradients::<_, LfError>(&[depths.clone()], |g, v| depth_consistency_graph(g, v[0]), DEFAULT_STEP).unwrap();
    assert!(report.max_relative_error() < 1e-5, "{report:?}");
    let report = check_gradients::<_, LfError>(&[depths], |g, v| tv_graph(g, v[0]), DEFAULT_STEP).unwrap();
    assert!(report.max_relative_error() < 1e-5, "{report:?}");
}

#[test]
fn composite_loss_gradient() {
    let views = tensor(&[3, 1, 6, 6], 61, -1.0, 1.0);
    let depths = tensor(&[1, 3, 3, 6, 6], 62, -1.2, 1.2);
    let residual = tensor(&[3, 1, 3, 3, 6, 6], 63, -0.5, 0.5);
    let target = tensor(&[3, 1, 3, 3, 6, 6], 64, -1.0, 1.0);
    let report = check_gradients::<_, LfError>(
        &[views, depths, residual],
        |g, v| {
            let lr = render_lambertian_graph(g, v[0], v[1])?;
            let r = g.tanh(v[2]);
            let lhat = g.add(lr, r)?;
            let l = g.constant(target.clone());
            Ok(total_loss_graph(g, lr, lhat, l, v[1], 0.005, 0.01)?.total)
        },
        DEFAULT_STEP,
    )
    .unwrap();
    assert!(report.max_relative_error() < 1e-4, "{report:?}");
}

#[test]
fn loss_graph_matches_value_level_loss() {
    let e = Extents::new(3, 3, 5, 5).unwrap();
    let (a, b, c) = (random_light_field(e, 1), random_light_field(e, 2), random_light_field(e, 3));
    let depths = random_depths(e, 2.0, 4);
    let l = total_loss(&a, &b, &c, &depths, 0.005, 0.01).unwrap();
    let mean_abs = |x: &LightField, y: &LightField| {
        x.samples().iter().zip(y.samples()).map(|(p, q)| (*p as f64 - *q as f64).abs()).sum::<f64>()
            / x.samples().len() as f64
    };
    assert!((l.lambertian_l1 - mean_abs(&a, &c)).abs() < 1e-9);
    assert!((l.predicted_l1 - mean_abs(&b, &c)).abs() < 1e-9);
    assert!((l.consistency - consistency_oracle(&depths).mean).abs() < 1e-6);
    assert!((l.tv - tv_oracle(&depths)).abs() < 1e-6);
    assert!(total_loss(&a, &b, &c, &depths, -1.0, 0.0).is_err());
}

#[test]
fn pack_helpers_reject_mixed_sizes() {
    let a = random_view(4, 4, 0);
    let b = random_view(4, 5, 0);
    assert!(pack_views::<f32>(&[&a, &b]).is_err());
    let v: View = random_view(3, 3, 1);
    let packed = pack_views::<f64>(&[&v]).unwrap();
    assert_eq!(packed.shape(), &[3, 1, 3, 3]);
}
