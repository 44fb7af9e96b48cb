//! Ground-truth stand-ins for the promptable segmenter and the text detector.

use std::collections::{BTreeMap, VecDeque};

use crate::scene::{InstanceMap, MaskBits};
use crate::segmenter::{BoxPrompt, PromptSet, ScoredBox, SegmentError};

/// 4-connected region of one instance id.
#[derive(Debug, Clone)]
pub struct Region {
    pub instance_id: u32,
    pub pixels: Vec<(u32, u32)>,
    pub bbox: [u32; 4],
}

/// Labels connected regions of every non-background instance. Returns the
/// per-pixel region index (`usize::MAX` for background) and the regions.
pub fn connected_regions(map: &InstanceMap) -> (Vec<usize>, Vec<Region>) {
    let (w, h) = (map.width as usize, map.height as usize);
    let mut label = vec![usize::MAX; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        let id = map.ids[start];
        if id == 0 || label[start] != usize::MAX {
            continue;
        }
        let r = regions.len();
        label[start] = r;
        queue.push_back(start);
        let mut pixels = Vec::new();
        let mut bbox = [u32::MAX, u32::MAX, 0, 0];
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x as u32, y as u32));
            bbox = [bbox[0].min(x as u32), bbox[1].min(y as u32), bbox[2].max(x as u32), bbox[3].max(y as u32)];
            let mut visit = |j: usize| {
                if map.ids[j] == id && label[j] == usize::MAX {
                    label[j] = r;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        regions.push(Region { instance_id: id, pixels, bbox });
    }
    (label, regions)
}

fn pixel_index(map: &InstanceMap, u: f64, v: f64) -> Option<usize> {
    let (x, y) = (u.round(), v.round());
    if x < 0.0 || y < 0.0 || x >= map.width as f64 || y >= map.height as f64 {
        return None;
    }
    Some(y as usize * map.width as usize + x as usize)
}

/// Union of the connected regions hit by positive prompts; when no positive
/// prompt lands on an object, the regions of the majority instance under the
/// box. Negative prompts veto their whole instance.
pub fn oracle_segment(map: &InstanceMap, prompts: &PromptSet) -> Result<MaskBits, SegmentError> {
    prompts.validate(map.width, map.height)?;
    if prompts.positives().next().is_none() && prompts.bbox.is_none() {
        return Err(SegmentError::InvalidPrompt("need a positive point or a box".into()));
    }
    let (label, regions) = connected_regions(map);
    let mut chosen: Vec<usize> = prompts
        .positives()
        .filter_map(|p| pixel_index(map, p.u, p.v))
        .filter_map(|i| (label[i] != usize::MAX).then_some(label[i]))
        .collect();
    if chosen.is_empty() {
        if let Some(b) = &prompts.bbox {
            chosen = box_regions(map, &label, &regions, b);
        }
    }
    let vetoed: Vec<u32> = prompts
        .negatives()
        .filter_map(|p| pixel_index(map, p.u, p.v))
        .map(|i| map.ids[i])
        .filter(|id| *id != 0)
        .collect();
    chosen.retain(|r| !vetoed.contains(&regions[*r].instance_id));
    chosen.sort_unstable();
    chosen.dedup();
    if chosen.is_empty() {
        return Err(SegmentError::EmptyMask);
    }
    let mut bits = MaskBits::empty(map.width, map.height);
    for r in chosen {
        for &(x, y) in &regions[r].pixels {
            bits.set(x, y, true);
        }
    }
    Ok(bits)
}

fn box_regions(map: &InstanceMap, label: &[usize], regions: &[Region], b: &BoxPrompt) -> Vec<usize> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut touched: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let (x0, y0) = (b.u_min.ceil().max(0.0) as u32, b.v_min.ceil().max(0.0) as u32);
    let (x1, y1) = (
        (b.u_max.floor() as u32).min(map.width - 1),
        (b.v_max.floor() as u32).min(map.height - 1),
    );
    for y in y0..=y1 {
        for x in x0..=x1 {
            let i = (y * map.width + x) as usize;
            let id = map.ids[i];
            if id == 0 {
                continue;
            }
            *counts.entry(id).or_default() += 1;
            touched.entry(id).or_default().push(label[i]);
        }
    }
    // largest count wins, ties to the smaller id
    let Some((&best, _)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
        return Vec::new();
    };
    let mut out = touched.remove(&best).unwrap_or_default();
    out.sort_unstable();
    out.dedup();
    debug_assert!(out.iter().all(|r| regions[*r].instance_id == best));
    out
}

/// Tight boxes of every connected region of `instance_id`, scored by area
/// relative to the largest region, sorted by descending score.
pub fn oracle_boxes(map: &InstanceMap, instance_id: u32) -> Vec<ScoredBox> {
    let (_, regions) = connected_regions(map);
    let mine: Vec<&Region> = regions.iter().filter(|r| r.instance_id == instance_id).collect();
    let Some(largest) = mine.iter().map(|r| r.pixels.len()).max() else {
        return Vec::new();
    };
    let mut out: Vec<ScoredBox> = mine
        .iter()
        .map(|r| ScoredBox {
            bbox: BoxPrompt::new(r.bbox[0] as f64, r.bbox[1] as f64, r.bbox[2] as f64, r.bbox[3] as f64),
            score: r.pixels.len() as f64 / largest as f64,
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Ground-truth mask of one instance.
pub fn instance_mask(map: &InstanceMap, instance_id: u32) -> MaskBits {
    MaskBits { width: map.width, height: map.height, data: map.ids.iter().map(|i| *i == instance_id).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::PointPrompt;

    /// 20×10 map: instance 1 is a disk-ish square at left, instance 2 at right.
    fn two_blobs() -> InstanceMap {
        let mut m = InstanceMap::zeros(20, 10);
        for y in 2..8 {
            for x in 2..8 {
                m.ids[y * 20 + x] = 1;
            }
            for x in 12..16 {
                m.ids[y * 20 + x] = 2;
            }
        }
        m
    }

    #[test]
    fn positive_prompt_gives_exact_region() {
        let m = two_blobs();
        let bits = oracle_segment(&m, &PromptSet::from_points(vec![PointPrompt::positive(4.0, 4.0)])).unwrap();
        assert_eq!(bits, instance_mask(&m, 1));
    }

    #[test]
    fn box_selects_majority_instance() {
        let m = two_blobs();
        let bits = oracle_segment(&m, &PromptSet::from_box(BoxPrompt::new(1.0, 1.0, 12.0, 8.0))).unwrap();
        assert_eq!(bits, instance_mask(&m, 1));
    }

    #[test]
    fn negative_on_same_instance_vetoes() {
        let m = two_blobs();
        let p = PromptSet::from_points(vec![PointPrompt::positive(4.0, 4.0), PointPrompt::negative(6.0, 6.0)]);
        assert!(matches!(oracle_segment(&m, &p), Err(SegmentError::EmptyMask)));
    }

    #[test]
    fn background_prompt_is_empty_mask() {
        let m = two_blobs();
        let p = PromptSet::from_points(vec![PointPrompt::positive(0.0, 0.0)]);
        assert!(matches!(oracle_segment(&m, &p), Err(SegmentError::EmptyMask)));
    }

    #[test]
    fn boxes_of_split_instance() {
        let mut m = two_blobs();
        // occluder column splits instance 1 into widths 2 and 3
        for y in 2..8 {
            m.ids[y * 20 + 4] = 3;
        }
        let boxes = oracle_boxes(&m, 1);
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].score, 1.0);
        assert_eq!(boxes[0].bbox.xyxy(), [5.0, 2.0, 7.0, 7.0]);
        assert!((boxes[1].score - 2.0 / 3.0).abs() < 1e-12);
        assert!(oracle_boxes(&m, 9).is_empty());
    }
}
