use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::model::{Feature, Point3D, SparseCloud, TrackEntry};
use super::{
    camera_from_params, camera_params, pose_from_colmap, pose_to_colmap, read_file, write_file, ColmapError,
    RawCamera, HALF_PIXEL,
};
use crate::scene::{Vec3, ViewMeta};

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> ColmapError {
    ColmapError::Parse { file: file.to_string(), line, message: message.into() }
}

struct Fields<'a> {
    it: std::str::SplitWhitespace<'a>,
    file: &'static str,
    line: usize,
}

impl<'a> Fields<'a> {
    fn new(s: &'a str, file: &'static str, line: usize) -> Self {
        Self { it: s.split_whitespace(), file, line }
    }

    fn next_str(&mut self, what: &str) -> Result<&'a str, ColmapError> {
        self.it.next().ok_or_else(|| parse_err(self.file, self.line, format!("missing {what}")))
    }

    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ColmapError> {
        let s = self.next_str(what)?;
        s.parse().map_err(|_| parse_err(self.file, self.line, format!("bad {what}: {s:?}")))
    }

    fn rest(&mut self) -> Vec<&'a str> {
        self.it.by_ref().collect()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(super) fn read_cameras(dir: &Path) -> Result<BTreeMap<u32, RawCamera>, ColmapError> {
    const FILE: &str = "cameras.txt";
    let text = read_file(&dir.join(FILE))?;
    let mut out = BTreeMap::new();
    for (ln, line) in data_lines(&text) {
        let mut f = Fields::new(line, FILE, ln);
        let id: u32 = f.next("CAMERA_ID")?;
        let model = f.next_str("MODEL")?.to_string();
        let width: u32 = f.next("WIDTH")?;
        let height: u32 = f.next("HEIGHT")?;
        let params = f
            .rest()
            .into_iter()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(FILE, ln, format!("bad param {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let intrinsics = camera_from_params(id, &model, width, height, &params)
            .map_err(|e| match e {
                ColmapError::Parse { message, .. } => parse_err(FILE, ln, message),
                other => other,
            })?;
        out.insert(id, RawCamera { id, intrinsics });
    }
    Ok(out)
}

pub(super) fn read_images(
    dir: &Path,
    cameras: &BTreeMap<u32, RawCamera>,
) -> Result<(Vec<ViewMeta>, BTreeMap<u32, Vec<Feature>>), ColmapError> {
    const FILE: &str = "images.txt";
    let text = read_file(&dir.join(FILE))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut views = Vec::new();
    let mut features = BTreeMap::new();
    while let Some((ln, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = Fields::new(line, FILE, ln);
        let id: u32 = f.next("IMAGE_ID")?;
        let mut q = [0.0; 4];
        for (i, c) in ["QW", "QX", "QY", "QZ"].iter().enumerate() {
            q[i] = f.next(c)?;
        }
        let mut t = [0.0; 3];
        for (i, c) in ["TX", "TY", "TZ"].iter().enumerate() {
            t[i] = f.next(c)?;
        }
        let camera_id: u32 = f.next("CAMERA_ID")?;
        let name = f.rest().join(" ");
        if name.is_empty() {
            return Err(parse_err(FILE, ln, "missing NAME"));
        }
        let cam = cameras
            .get(&camera_id)
            .ok_or_else(|| ColmapError::Integrity(format!("image {id} references unknown camera {camera_id}")))?;
        let pose = pose_from_colmap(q, t).map_err(|e| parse_err(FILE, ln, e.to_string()))?;
        let (pln, pts) = lines.next().unwrap_or((ln + 1, ""));
        let toks: Vec<&str> = pts.split_whitespace().collect();
        if !toks.len().is_multiple_of(3) {
            return Err(parse_err(FILE, pln, "POINTS2D must be (X, Y, POINT3D_ID) triples"));
        }
        let mut feats = Vec::with_capacity(toks.len() / 3);
        for tri in toks.chunks(3) {
            let x: f64 = tri[0].parse().map_err(|_| parse_err(FILE, pln, format!("bad X {:?}", tri[0])))?;
            let y: f64 = tri[1].parse().map_err(|_| parse_err(FILE, pln, format!("bad Y {:?}", tri[1])))?;
            let pid: i64 =
                tri[2].parse().map_err(|_| parse_err(FILE, pln, format!("bad POINT3D_ID {:?}", tri[2])))?;
            feats.push(Feature {
                u: x - HALF_PIXEL,
                v: y - HALF_PIXEL,
                point_id: (pid >= 0).then_some(pid as u64),
            });
        }
        if features.insert(id, feats).is_some() {
            return Err(parse_err(FILE, ln, format!("duplicate IMAGE_ID {id}")));
        }
        views.push(ViewMeta { view_id: id, camera_id, name, intrinsics: cam.intrinsics, pose });
    }
    Ok((views, features))
}

pub(super) fn read_points(dir: &Path) -> Result<BTreeMap<u64, Point3D>, ColmapError> {
    const FILE: &str = "points3D.txt";
    let text = read_file(&dir.join(FILE))?;
    let mut out = BTreeMap::new();
    for (ln, line) in data_lines(&text) {
        let mut f = Fields::new(line, FILE, ln);
        let id: u64 = f.next("POINT3D_ID")?;
        let xyz = Vec3::new(f.next("X")?, f.next("Y")?, f.next("Z")?);
        let rgb = [f.next("R")?, f.next("G")?, f.next("B")?];
        let error: f64 = f.next("ERROR")?;
        let rest = f.rest();
        if !rest.len().is_multiple_of(2) {
            return Err(parse_err(FILE, ln, "TRACK must be (IMAGE_ID, POINT2D_IDX) pairs"));
        }
        let mut track = Vec::with_capacity(rest.len() / 2);
        for pair in rest.chunks(2) {
            let view_id = pair[0].parse().map_err(|_| parse_err(FILE, ln, format!("bad IMAGE_ID {:?}", pair[0])))?;
            let feature_index =
                pair[1].parse().map_err(|_| parse_err(FILE, ln, format!("bad POINT2D_IDX {:?}", pair[1])))?;
            track.push(TrackEntry { view_id, feature_index });
        }
        if out.insert(id, Point3D { xyz, rgb, error, track }).is_some() {
            return Err(parse_err(FILE, ln, format!("duplicate POINT3D_ID {id}")));
        }
    }
    Ok(out)
}

pub(super) fn cameras_text(cameras: &BTreeMap<u32, RawCamera>) -> String {
    let mut s = String::new();
    s.push_str("# Camera list with one line of data per camera:\n");
    s.push_str("#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(s, "# Number of cameras: {}", cameras.len());
    for cam in cameras.values() {
        let k = &cam.intrinsics;
        let _ = write!(s, "{} PINHOLE {} {}", cam.id, k.width, k.height);
        for p in camera_params(k) {
            let _ = write!(s, " {p}");
        }
        s.push('\n');
    }
    s
}

pub(super) fn images_text(cloud: &SparseCloud, views: &[ViewMeta]) -> String {
    let n_obs: usize = views.iter().map(|v| cloud.observations(v.view_id).count()).sum();
    let mean = if views.is_empty() { 0.0 } else { n_obs as f64 / views.len() as f64 };
    let mut s = String::new();
    s.push_str("# Image list with two lines of data per image:\n");
    s.push_str("#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n");
    s.push_str("#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    let _ = writeln!(s, "# Number of images: {}, mean observations per image: {}", views.len(), mean);
    for v in views {
        let (q, t) = pose_to_colmap(&v.pose);
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {}",
            v.view_id, q[0], q[1], q[2], q[3], t[0], t[1], t[2], v.camera_id, v.name
        );
        let line: Vec<String> = cloud
            .features_of(v.view_id)
            .iter()
            .map(|f| {
                let pid = f.point_id.map_or(-1, |p| p as i64);
                format!("{} {} {}", f.u + HALF_PIXEL, f.v + HALF_PIXEL, pid)
            })
            .collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub(super) fn points_text(cloud: &SparseCloud) -> String {
    let total: usize = cloud.points.values().map(|p| p.track.len()).sum();
    let mean = if cloud.is_empty() { 0.0 } else { total as f64 / cloud.len() as f64 };
    let mut s = String::new();
    s.push_str("# 3D point list with one line of data per point:\n");
    s.push_str("#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    let _ = writeln!(s, "# Number of points: {}, mean track length: {}", cloud.len(), mean);
    for (id, p) in &cloud.points {
        let _ = write!(
            s,
            "{} {} {} {} {} {} {} {}",
            id, p.xyz.x, p.xyz.y, p.xyz.z, p.rgb[0], p.rgb[1], p.rgb[2], p.error
        );
        for e in &p.track {
            let _ = write!(s, " {} {}", e.view_id, e.feature_index);
        }
        s.push('\n');
    }
    s
}

pub(super) fn write_model(
    dir: &Path,
    cameras: &BTreeMap<u32, RawCamera>,
    cloud: &SparseCloud,
    views: &[ViewMeta],
) -> Result<(), ColmapError> {
    write_file(&dir.join("cameras.txt"), cameras_text(cameras).as_bytes())?;
    write_file(&dir.join("images.txt"), images_text(cloud, views).as_bytes())?;
    write_file(&dir.join("points3D.txt"), points_text(cloud).as_bytes())
}
