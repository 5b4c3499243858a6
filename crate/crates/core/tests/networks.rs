mod common;

use common::*;
use lfsynth_core::lightfield::{Extents, RayDepthField, MAX_DISPARITY};
use lfsynth_core::networks::*;
use lfsynth_core::render::render_lambertian;
use lfsynth_core::LfError;
use lfsynth_tensor::gradcheck::{check_gradients, DEFAULT_STEP};
use lfsynth_tensor::{Graph, NormMode, Tensor, Var};
use rand::Rng;

const ROLES: [NetRole; 4] = [NetRole::Depth, NetRole::Occlusion, NetRole::Flow, NetRole::Direct];

/// Rebinds a parameter set onto graph leaves given in `trainable` order.
fn bound_from(params: &ModelParams<f64>, vars: &[Var]) -> BoundParams {
    let mut it = vars.iter().copied();
    let layers = params
        .layers
        .iter()
        .map(|l| {
            let weight = it.next().unwrap();
            let bias = it.next().unwrap();
            let (gamma, beta) = match l.norm {
                Some(_) => (it.next(), it.next()),
                None => (None, None),
            };
            BoundLayer { weight, bias, gamma, beta }
        })
        .collect();
    BoundParams { layers }
}

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(shape.to_vec(), |_| r.random_range(-1.0..1.0))
}

/// Perturbs every parameter so zero-initialized layers still carry signal.
fn jittered(role: NetRole, angular: (usize, usize)) -> ModelParams<f64> {
    let mut p = init_net(role, &Architecture::tiny(), angular, 3).unwrap().cast::<f64>();
    let mut r = rng(99);
    for t in p.trainable_mut() {
        for x in t {
            *x += r.random_range(-0.3..0.3);
        }
    }
    p
}

#[test]
fn forward_shapes_follow_the_angular_grid() {
    let e = Extents::new(3, 2, 32, 32).unwrap();
    let view = random_view(32, 32, 1);
    let arch = Architecture::tiny();
    let mut depth = init_net(NetRole::Depth, &arch, (3, 2), 0).unwrap();
    let d = depth_net_forward(&view, &mut depth, NormMode::Train).unwrap();
    assert_eq!(d.extents(), e);
    assert!(d.depths().iter().all(|x| x.abs() < MAX_DISPARITY));
    let mut flow = init_net(NetRole::Flow, &arch, (3, 2), 0).unwrap();
    assert_eq!(flow_baseline_forward(&view, &mut flow, NormMode::Train).unwrap().extents(), e);
    let mut direct = init_net(NetRole::Direct, &arch, (3, 2), 0).unwrap();
    assert_eq!(direct_regression_forward(&view, &mut direct, NormMode::Train).unwrap().extents(), e);
}

#[test]
fn small_inputs_are_rejected_by_view_level_forwards() {
    let arch = Architecture::tiny();
    let view = random_view(MIN_INPUT_SIZE - 1, 40, 2);
    let mut depth = init_net(NetRole::Depth, &arch, (2, 2), 0).unwrap();
    assert!(matches!(depth_net_forward(&view, &mut depth, NormMode::Infer), Err(LfError::Network(_))));
    let mut flow = init_net(NetRole::Flow, &arch, (2, 2), 0).unwrap();
    assert!(flow_baseline_forward(&random_view(40, 31, 2), &mut flow, NormMode::Infer).is_err());
}

#[test]
fn fresh_occlusion_net_returns_the_lambertian_field() {
    let e = Extents::new(3, 3, 32, 32).unwrap();
    let view = random_view(32, 32, 4);
    let depths = random_depths(e, 2.0, 5);
    let lr = render_lambertian(&view, &depths).unwrap();
    for arch in [Architecture::tiny(), Architecture::desk()] {
        let mut occ = init_net(NetRole::Occlusion, &arch, (3, 3), 7).unwrap();
        let out = occlusion_net_forward(&lr, &depths, &mut occ, NormMode::Train).unwrap();
        assert_eq!(out, lr);
    }
    let mut occ = init_net(NetRole::Occlusion, &Architecture::tiny(), (3, 3), 7).unwrap();
    let wrong = RayDepthField::constant(Extents::new(3, 2, 32, 32).unwrap(), 0.0).unwrap();
    assert!(occlusion_net_forward(&lr, &wrong, &mut occ, NormMode::Train).is_err());
}

#[test]
fn initialization_is_seeded() {
    let arch = Architecture::desk();
    for role in ROLES {
        let a = init_net(role, &arch, (4, 4), 11).unwrap();
        assert_eq!(a, init_net(role, &arch, (4, 4), 11).unwrap());
        if role != NetRole::Occlusion {
            assert_ne!(a.layers[0].weight, init_net(role, &arch, (4, 4), 12).unwrap().layers[0].weight);
        }
    }
}

#[test]
fn groups_round_trip_and_mismatches_are_rejected() {
    let arch = Architecture::tiny();
    let mut a = init_net(NetRole::Depth, &arch, (2, 2), 1).unwrap();
    // Populate running statistics so they are part of the groups.
    depth_net_forward(&random_view(32, 32, 1), &mut a, NormMode::Train).unwrap();
    let groups = a.to_groups();
    assert!(groups[0].iter().any(|t| t.name == "depth.0.running_mean"));
    let mut b = init_net(NetRole::Depth, &arch, (2, 2), 2).unwrap();
    b.load_groups(&groups).unwrap();
    assert_eq!(a.layers, b.layers);

    let mut other_arch = init_net(NetRole::Depth, &Architecture::desk(), (2, 2), 1).unwrap();
    assert!(other_arch.load_groups(&groups).is_err());
    let mut other_grid = init_net(NetRole::Depth, &arch, (3, 2), 1).unwrap();
    assert!(other_grid.load_groups(&groups).is_err());
    let mut other_role = init_net(NetRole::Flow, &arch, (2, 2), 1).unwrap();
    assert!(other_role.load_groups(&groups).is_err());
    let mut renamed = groups.clone();
    renamed[1][0].name = "depth.1.kernel".into();
    assert!(b.load_groups(&renamed).is_err());
    let mut short = groups.clone();
    short[0].pop();
    assert!(b.load_groups(&short).is_err());
}

#[test]
fn inference_mode_does_not_touch_running_statistics() {
    let arch = Architecture::tiny();
    let mut p = init_net(NetRole::Depth, &arch, (2, 2), 1).unwrap();
    let view = random_view(32, 32, 3);
    depth_net_forward(&view, &mut p, NormMode::Train).unwrap();
    let before = p.clone();
    let a = depth_net_forward(&random_view(32, 32, 4), &mut p, NormMode::Infer).unwrap();
    assert_eq!(p, before);
    let b = depth_net_forward(&random_view(32, 32, 4), &mut p, NormMode::Infer).unwrap();
    assert_eq!(a, b);
}

fn net_gradient(role: NetRole) -> f64 {
    let angular = (2, 2);
    let params = jittered(role, angular);
    let mut inputs: Vec<Tensor<f64>> = params.trainable().into_iter().cloned().collect();
    let views = random_tensor(&[3, 2, 5, 6], 41);
    let depths = random_tensor(&[2, 2, 2, 5, 6], 42);
    let n_params = inputs.len();
    inputs.push(if role == NetRole::Occlusion { random_tensor(&[3, 2, 2, 2, 5, 6], 43) } else { views });
    let weights = random_tensor(&[2 * 3 * 2 * 2 * 5 * 6], 44);
    let report = check_gradients::<_, LfError>(
        &inputs,
        |g: &mut Graph<f64>, v: &[Var]| {
            let mut p = params.clone();
            let bound = bound_from(&p, &v[..n_params]);
            let x = v[n_params];
            let out = match role {
                NetRole::Depth => depth_net_graph(g, &mut p, &bound, x, NormMode::Train)?,
                NetRole::Occlusion => {
                    let d = g.constant(depths.clone());
                    occlusion_net_graph(g, &mut p, &bound, x, d, NormMode::Train)?
                }
                NetRole::Flow => flow_net_graph(g, &mut p, &bound, x, NormMode::Train)?,
                NetRole::Direct => direct_net_graph(g, &mut p, &bound, x, NormMode::Train)?,
            };
            let len = g.value(out).len();
            let w = Tensor::new(g.shape(out).to_vec(), weights.data()[..len].to_vec())?;
            let w = g.constant(w);
            let t = g.tanh(out);
            let p = g.mul(t, w)?;
            Ok(g.sum(p))
        },
        DEFAULT_STEP,
    )
    .unwrap();
    // A conv bias feeding batch norm has an exactly zero gradient; its
    // numeric estimate is rounding noise, so judge it by absolute error.
    report
        .inputs
        .iter()
        .map(|r| if r.max_abs_error < 1e-7 { 0.0 } else { r.relative_error })
        .fold(0.0, f64::max)
}

#[test]
fn depth_net_gradient() {
    let err = net_gradient(NetRole::Depth);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn occlusion_net_gradient() {
    let err = net_gradient(NetRole::Occlusion);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn flow_net_gradient() {
    let err = net_gradient(NetRole::Flow);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn direct_net_gradient() {
    let err = net_gradient(NetRole::Direct);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn depth_net_is_translation_covariant_away_from_borders() {
    let arch = Architecture::tiny();
    let mut p = init_net(NetRole::Depth, &arch, (3, 3), 5).unwrap();
    let wide = random_view(40, 56, 8);
    depth_net_forward(&wide, &mut p, NormMode::Train).unwrap();
    let crop = |x0: usize| lfsynth_core::lightfield::View::from_fn(40, 48, |y, x, c| wide.get(y, x + x0, c)).unwrap();
    let a = depth_net_forward(&crop(0), &mut p, NormMode::Infer).unwrap();
    let b = depth_net_forward(&crop(8), &mut p, NormMode::Infer).unwrap();
    // Summed dilations of the tiny net bound its receptive-field radius.
    let r: usize = arch.dilations.iter().sum();
    for iv in 0..3 {
        for iu in 0..3 {
            for y in r..40 - r {
                for x in r..40 - r {
                    let (da, db) = (a.get(iv, iu, y, x + 8), b.get(iv, iu, y, x));
                    assert!((da - db).abs() <= 1e-5, "({iv},{iu},{y},{x}): {da} vs {db}");
                }
            }
        }
    }
}
