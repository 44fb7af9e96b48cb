use std::collections::{BTreeMap, BTreeSet};

use super::ColmapError;
use crate::scene::Vec3;

/// A 2D keypoint in one view, optionally linked to a reconstructed 3D point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub u: f64,
    pub v: f64,
    pub point_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackEntry {
    pub view_id: u32,
    pub feature_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub xyz: Vec3<f64>,
    pub rgb: [u8; 3],
    pub error: f64,
    pub track: Vec<TrackEntry>,
}

/// Sparse reconstruction: 3D points with their observation tracks and the
/// per-view feature lists the tracks index into.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCloud {
    pub points: BTreeMap<u64, Point3D>,
    pub features: BTreeMap<u32, Vec<Feature>>,
}

impl SparseCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn features_of(&self, view_id: u32) -> &[Feature] {
        self.features.get(&view_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn feature(&self, entry: TrackEntry) -> Option<&Feature> {
        self.features.get(&entry.view_id)?.get(entry.feature_index as usize)
    }

    /// Checks bidirectional track/feature links and, when `view_ids` is given,
    /// that every referenced view exists.
    pub fn validate(&self, view_ids: Option<&BTreeSet<u32>>) -> Result<(), ColmapError> {
        if let Some(ids) = view_ids {
            if let Some(v) = self.features.keys().find(|v| !ids.contains(v)) {
                return Err(ColmapError::Integrity(format!("features reference unknown view {v}")));
            }
        }
        for (&pid, p) in &self.points {
            for e in &p.track {
                if let Some(ids) = view_ids {
                    if !ids.contains(&e.view_id) {
                        return Err(ColmapError::Integrity(format!(
                            "point {pid} track references unknown view {}",
                            e.view_id
                        )));
                    }
                }
                match self.feature(*e) {
                    Some(f) if f.point_id == Some(pid) => {}
                    Some(f) => {
                        return Err(ColmapError::Integrity(format!(
                            "point {pid} track entry ({}, {}) links back to {:?}",
                            e.view_id, e.feature_index, f.point_id
                        )))
                    }
                    None => {
                        return Err(ColmapError::Integrity(format!(
                            "point {pid} track entry ({}, {}) is dangling",
                            e.view_id, e.feature_index
                        )))
                    }
                }
            }
        }
        for (&vid, feats) in &self.features {
            for (fi, f) in feats.iter().enumerate() {
                let Some(pid) = f.point_id else { continue };
                let entry = TrackEntry { view_id: vid, feature_index: fi as u32 };
                let ok = self.points.get(&pid).is_some_and(|p| p.track.contains(&entry));
                if !ok {
                    return Err(ColmapError::Integrity(format!(
                        "feature {fi} of view {vid} links to point {pid} which does not track it"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sub-cloud holding only `keep`; features of dropped points are unlinked
    /// so feature indices (and thus tracks) stay valid.
    pub fn restrict(&self, keep: &BTreeSet<u64>) -> SparseCloud {
        let points = self
            .points
            .iter()
            .filter(|(id, _)| keep.contains(id))
            .map(|(id, p)| (*id, p.clone()))
            .collect();
        let features = self
            .features
            .iter()
            .map(|(v, feats)| {
                let feats = feats
                    .iter()
                    .map(|f| Feature { point_id: f.point_id.filter(|p| keep.contains(p)), ..*f })
                    .collect();
                (*v, feats)
            })
            .collect();
        SparseCloud { points, features }
    }

    /// Point ids linked to features in `view_id`, with the feature coordinates.
    pub fn observations(&self, view_id: u32) -> impl Iterator<Item = (u64, &Feature)> + '_ {
        self.features_of(view_id).iter().filter_map(|f| f.point_id.map(|p| (p, f)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_view_cloud() -> SparseCloud {
        let mut c = SparseCloud::default();
        c.points.insert(
            7,
            Point3D {
                xyz: Vec3::new(0.0, 0.0, 5.0),
                rgb: [1, 2, 3],
                error: 0.1,
                track: vec![
                    TrackEntry { view_id: 1, feature_index: 0 },
                    TrackEntry { view_id: 2, feature_index: 1 },
                ],
            },
        );
        c.features.insert(1, vec![Feature { u: 1.0, v: 2.0, point_id: Some(7) }]);
        c.features.insert(
            2,
            vec![
                Feature { u: 3.0, v: 4.0, point_id: None },
                Feature { u: 5.0, v: 6.0, point_id: Some(7) },
            ],
        );
        c
    }

    #[test]
    fn valid_cloud_passes() {
        let ids: BTreeSet<u32> = [1, 2].into();
        two_view_cloud().validate(Some(&ids)).unwrap();
    }

    #[test]
    fn dangling_and_broken_links_fail() {
        let mut c = two_view_cloud();
        c.points.get_mut(&7).unwrap().track.push(TrackEntry { view_id: 2, feature_index: 9 });
        assert!(matches!(c.validate(None), Err(ColmapError::Integrity(_))));

        let mut c = two_view_cloud();
        c.features.get_mut(&2).unwrap()[0].point_id = Some(7);
        assert!(c.validate(None).is_err());

        let ids: BTreeSet<u32> = [1].into();
        assert!(two_view_cloud().validate(Some(&ids)).is_err());
    }

    #[test]
    fn restrict_to_all_is_identity_and_to_none_unlinks() {
        let c = two_view_cloud();
        assert_eq!(c.restrict(&[7].into()), c);
        let empty = c.restrict(&BTreeSet::new());
        assert!(empty.is_empty());
        assert!(empty.features.values().flatten().all(|f| f.point_id.is_none()));
        empty.validate(None).unwrap();
    }
}
