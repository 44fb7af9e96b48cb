mod common;

use std::collections::BTreeSet;

use common::Scene;
use objfield::occlusion::OcclusionConfig;
use objfield::pipeline::segment_objects;
use objfield::propagation::{grow_from_mask, propagate, ObjectSeed, PropagationConfig, PropagationError, VisitOrder};
use objfield::scene::{mask_iou, Mask, MaskStatus, ViewImage};
use objfield::segmenter::{OracleBackend, PointPrompt, PromptSet, SegmentError, Segmenter};

#[test]
fn two_objects_reach_every_view_without_mixing() {
    let scene = Scene::preset("two-spheres", 0.5, 1);
    let seeds = [scene.click_seed(1), scene.click_seed(2)];
    let mut seg = scene.oracle();
    let out = segment_objects(
        &scene.fab.cloud,
        &scene.views,
        &seeds,
        &mut seg,
        &PropagationConfig::default(),
        &OcclusionConfig::default(),
    )
    .unwrap();
    for (o, id) in [1u32, 2].into_iter().enumerate() {
        let masks = out.masks(o);
        assert_eq!(masks.len(), scene.views.len());
        let mut accepted = 0;
        for m in masks.values().filter(|m| m.is_accepted()) {
            let iou = mask_iou(&m.bits, &scene.gt(m.view_id, id)).unwrap();
            assert!(iou >= 0.95, "object {id} view {}: IoU {iou}", m.view_id);
            accepted += 1;
        }
        assert!(accepted >= 20, "object {id}: only {accepted} accepted views");
        let other: BTreeSet<u64> = scene.fab.points_of(3 - id).collect();
        let list = &out.propagation.objects[o];
        assert!(!list.is_empty());
        assert!(list.points.keys().all(|p| !other.contains(p)));
    }
}

#[test]
fn claimed_points_lie_in_the_claiming_view_region() {
    let scene = Scene::preset("two-spheres", 0.0, 2);
    let seeds = [scene.click_seed(1), scene.click_seed(2)];
    let mut seg = scene.oracle();
    let out = propagate(&scene.fab.cloud, &scene.views, &seeds, &mut seg, &PropagationConfig::default()).unwrap();
    for list in &out.objects {
        for (pid, view_id) in &list.points {
            let point = &scene.fab.cloud.points[pid];
            let entry = point.track.iter().find(|e| e.view_id == *view_id).unwrap();
            let f = scene.fab.cloud.feature(*entry).unwrap();
            let gt = scene.gt(*view_id, list.object_id);
            assert!(gt.get(f.u.round() as u32, f.v.round() as u32), "point {pid} outside object {}", list.object_id);
        }
    }
}

#[test]
fn second_pass_adds_nothing() {
    let scene = Scene::preset("two-spheres", 0.5, 3);
    let cfg = PropagationConfig { min_track_hits: 1, ..Default::default() };
    let mut seg = scene.oracle();
    let out = propagate(&scene.fab.cloud, &scene.views, &[scene.click_seed(1)], &mut seg, &cfg).unwrap();
    let mut list = out.objects[0].clone();
    for m in out.masks[0].values().filter(|m| m.is_accepted()) {
        assert_eq!(grow_from_mask(&scene.fab.cloud, &mut list, m, cfg.erosion_px), 0);
    }
    assert_eq!(list, out.objects[0]);
}

#[test]
fn click_on_background_cannot_initialize() {
    let scene = Scene::preset("sphere", 0.5, 4);
    let seed = ObjectSeed { object_id: 1, view_id: 1, prompts: PromptSet::from_points(vec![PointPrompt::positive(0.0, 0.0)]) };
    let mut seg = scene.oracle();
    let err = propagate(&scene.fab.cloud, &scene.views, &[seed], &mut seg, &PropagationConfig::default()).unwrap_err();
    match err {
        PropagationError::Uninitializable { view_id: 1, in_mask: 0, total } => assert!(total > 0),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn covisibility_order_ignores_input_order() {
    let scene = Scene::preset("two-spheres", 0.5, 5);
    let seeds = [scene.click_seed(1)];
    let cfg = PropagationConfig::default();
    let a = propagate(&scene.fab.cloud, &scene.views, &seeds, &mut scene.oracle(), &cfg).unwrap();
    let mut shuffled = scene.views.clone();
    shuffled.reverse();
    shuffled.rotate_left(7);
    let b = propagate(&scene.fab.cloud, &shuffled, &seeds, &mut scene.oracle(), &cfg).unwrap();
    assert_eq!(a.visit_order, b.visit_order);
    assert_eq!(a.objects, b.objects);
    let mut ids: Vec<u32> = a.visit_order.clone();
    ids.sort_unstable();
    assert_eq!(ids, scene.views.iter().map(|v| v.view_id).collect::<Vec<_>>());
}

#[test]
fn input_order_follows_the_dataset() {
    let scene = Scene::preset("sphere", 0.5, 6);
    let cfg = PropagationConfig { visit_order: VisitOrder::Input, ..Default::default() };
    let mut views = scene.views.clone();
    views.reverse();
    let out = propagate(&scene.fab.cloud, &views, &[scene.click_seed(1)], &mut scene.oracle(), &cfg).unwrap();
    assert_eq!(out.visit_order, views.iter().map(|v| v.view_id).collect::<Vec<_>>());
}

/// Oracle that misbehaves on chosen calls.
struct Flaky {
    inner: OracleBackend,
    calls: usize,
    fail_view: Option<u32>,
    transport_after: Option<usize>,
}

impl Segmenter for Flaky {
    fn segment(&mut self, view: &ViewImage, prompts: &PromptSet) -> Result<Mask, SegmentError> {
        self.calls += 1;
        if self.transport_after.is_some_and(|n| self.calls > n) {
            return Err(SegmentError::Transport("connection reset".into()));
        }
        if self.fail_view == Some(view.view_id) {
            return Err(SegmentError::EmptyMask);
        }
        self.inner.segment(view, prompts)
    }
}

#[test]
fn segmenter_failure_on_one_view_leaves_it_unprocessed() {
    let scene = Scene::preset("sphere", 0.5, 7);
    let seed = scene.click_seed(1);
    let bad = if seed.view_id == 5 { 6 } else { 5 };
    let mut seg = Flaky { inner: scene.oracle(), calls: 0, fail_view: Some(bad), transport_after: None };
    let out = propagate(&scene.fab.cloud, &scene.views, &[seed], &mut seg, &PropagationConfig::default()).unwrap();
    assert_eq!(out.masks[0][&bad].status, MaskStatus::Unprocessed);
    assert_eq!(out.masks[0].values().filter(|m| m.is_accepted()).count(), scene.views.len() - 1);
}

#[test]
fn transport_failure_aborts_with_partial_result() {
    let scene = Scene::preset("sphere", 0.5, 8);
    let mut seg = Flaky { inner: scene.oracle(), calls: 0, fail_view: None, transport_after: Some(4) };
    let err = propagate(&scene.fab.cloud, &scene.views, &[scene.click_seed(1)], &mut seg, &PropagationConfig::default())
        .unwrap_err();
    match err {
        PropagationError::Aborted { source, partial } => {
            assert!(source.is_transport());
            // seed mask plus three propagated views; the fifth visit failed
            assert_eq!(partial.masks[0].len(), 4);
            assert_eq!(partial.visit_order.len(), 5);
        }
        other => panic!("unexpected {other:?}"),
    }
}
