use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::model::{Feature, Point3D, SparseCloud, TrackEntry};
use super::{
    camera_from_params, camera_params, model_name, pose_from_colmap, pose_to_colmap, read_bytes, write_file,
    ColmapError, RawCamera, HALF_PIXEL,
};
use crate::scene::{Vec3, ViewMeta};

const PINHOLE_ID: i32 = 1;

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
    file: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], file: &'static str) -> Self {
        Self { cur: Cursor::new(bytes), file }
    }

    fn err(&self, what: &str) -> ColmapError {
        ColmapError::BinaryParse {
            file: self.file.to_string(),
            offset: self.cur.position(),
            message: format!("truncated while reading {what}"),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, ColmapError> {
        self.cur.read_u8().map_err(|_| self.err(what))
    }
    fn u32(&mut self, what: &str) -> Result<u32, ColmapError> {
        self.cur.read_u32::<LE>().map_err(|_| self.err(what))
    }
    fn i32(&mut self, what: &str) -> Result<i32, ColmapError> {
        self.cur.read_i32::<LE>().map_err(|_| self.err(what))
    }
    fn u64(&mut self, what: &str) -> Result<u64, ColmapError> {
        self.cur.read_u64::<LE>().map_err(|_| self.err(what))
    }
    fn f64(&mut self, what: &str) -> Result<f64, ColmapError> {
        self.cur.read_f64::<LE>().map_err(|_| self.err(what))
    }

    /// Element count, sanity-bounded by the remaining byte budget.
    fn count(&mut self, what: &str, min_elem_bytes: u64) -> Result<usize, ColmapError> {
        let at = self.cur.position();
        let n = self.u64(what)?;
        let remaining = self.cur.get_ref().len() as u64 - self.cur.position();
        if n.saturating_mul(min_elem_bytes) > remaining {
            return Err(ColmapError::BinaryParse {
                file: self.file.to_string(),
                offset: at,
                message: format!("{what} = {n} exceeds file size"),
            });
        }
        Ok(n as usize)
    }

    fn cstring(&mut self) -> Result<String, ColmapError> {
        let mut buf = Vec::new();
        loop {
            let b = self.u8("image name")?;
            if b == 0 {
                break;
            }
            buf.push(b);
        }
        String::from_utf8(buf).map_err(|_| ColmapError::BinaryParse {
            file: self.file.to_string(),
            offset: self.cur.position(),
            message: "image name is not UTF-8".into(),
        })
    }

    fn finish(&mut self) -> Result<(), ColmapError> {
        let mut rest = Vec::new();
        let _ = self.cur.read_to_end(&mut rest);
        if rest.is_empty() {
            Ok(())
        } else {
            Err(ColmapError::BinaryParse {
                file: self.file.to_string(),
                offset: self.cur.position() - rest.len() as u64,
                message: format!("{} trailing bytes", rest.len()),
            })
        }
    }
}

fn num_params(model_id: i32) -> Option<usize> {
    // COLMAP camera model ids and parameter counts
    Some(match model_id {
        0 => 3,
        1 => 4,
        2 => 4,
        3 => 5,
        4 => 8,
        5 => 8,
        6 => 12,
        7 => 5,
        8 => 4,
        9 => 5,
        10 => 12,
        _ => return None,
    })
}

pub(super) fn read_cameras(dir: &Path) -> Result<BTreeMap<u32, RawCamera>, ColmapError> {
    let bytes = read_bytes(&dir.join("cameras.bin"))?;
    let mut r = Reader::new(&bytes, "cameras.bin");
    let n = r.count("number of cameras", 24)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let id = r.u32("CAMERA_ID")?;
        let model_id = r.i32("MODEL_ID")?;
        let width = r.u64("WIDTH")? as u32;
        let height = r.u64("HEIGHT")? as u32;
        let np = num_params(model_id).ok_or_else(|| ColmapError::BinaryParse {
            file: "cameras.bin".into(),
            offset: r.cur.position(),
            message: format!("unknown camera model id {model_id}"),
        })?;
        let params = (0..np).map(|_| r.f64("PARAMS")).collect::<Result<Vec<_>, _>>()?;
        let intrinsics = camera_from_params(id, model_name(model_id), width, height, &params)?;
        out.insert(id, RawCamera { id, intrinsics });
    }
    r.finish()?;
    Ok(out)
}

pub(super) fn read_images(
    dir: &Path,
    cameras: &BTreeMap<u32, RawCamera>,
) -> Result<(Vec<ViewMeta>, BTreeMap<u32, Vec<Feature>>), ColmapError> {
    let bytes = read_bytes(&dir.join("images.bin"))?;
    let mut r = Reader::new(&bytes, "images.bin");
    let n = r.count("number of images", 73)?;
    let mut views = Vec::with_capacity(n);
    let mut features = BTreeMap::new();
    for _ in 0..n {
        let at = r.cur.position();
        let id = r.u32("IMAGE_ID")?;
        let mut q = [0.0; 4];
        for v in &mut q {
            *v = r.f64("QVEC")?;
        }
        let mut t = [0.0; 3];
        for v in &mut t {
            *v = r.f64("TVEC")?;
        }
        let camera_id = r.u32("CAMERA_ID")?;
        let name = r.cstring()?;
        let np = r.count("number of 2D points", 24)?;
        let mut feats = Vec::with_capacity(np);
        for _ in 0..np {
            let x = r.f64("X")?;
            let y = r.f64("Y")?;
            let pid = r.u64("POINT3D_ID")?;
            // u64::MAX (-1 as signed) marks an unlinked feature
            let point_id = (pid as i64 >= 0).then_some(pid);
            feats.push(Feature { u: x - HALF_PIXEL, v: y - HALF_PIXEL, point_id });
        }
        let cam = cameras
            .get(&camera_id)
            .ok_or_else(|| ColmapError::Integrity(format!("image {id} references unknown camera {camera_id}")))?;
        let pose = pose_from_colmap(q, t).map_err(|e| ColmapError::BinaryParse {
            file: "images.bin".into(),
            offset: at,
            message: e.to_string(),
        })?;
        features.insert(id, feats);
        views.push(ViewMeta { view_id: id, camera_id, name, intrinsics: cam.intrinsics, pose });
    }
    r.finish()?;
    Ok((views, features))
}

pub(super) fn read_points(dir: &Path) -> Result<BTreeMap<u64, Point3D>, ColmapError> {
    let bytes = read_bytes(&dir.join("points3D.bin"))?;
    let mut r = Reader::new(&bytes, "points3D.bin");
    let n = r.count("number of points", 43)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let id = r.u64("POINT3D_ID")?;
        let xyz = Vec3::new(r.f64("X")?, r.f64("Y")?, r.f64("Z")?);
        let rgb = [r.u8("R")?, r.u8("G")?, r.u8("B")?];
        let error = r.f64("ERROR")?;
        let nt = r.count("track length", 8)?;
        let mut track = Vec::with_capacity(nt);
        for _ in 0..nt {
            track.push(TrackEntry { view_id: r.u32("IMAGE_ID")?, feature_index: r.u32("POINT2D_IDX")? });
        }
        out.insert(id, Point3D { xyz, rgb, error, track });
    }
    r.finish()?;
    Ok(out)
}

pub(super) fn write_model(
    dir: &Path,
    cameras: &BTreeMap<u32, RawCamera>,
    cloud: &SparseCloud,
    views: &[ViewMeta],
) -> Result<(), ColmapError> {
    // Vec<u8> writes are infallible
    let mut b = Vec::new();
    b.write_u64::<LE>(cameras.len() as u64).unwrap();
    for cam in cameras.values() {
        let k = &cam.intrinsics;
        b.write_u32::<LE>(cam.id).unwrap();
        b.write_i32::<LE>(PINHOLE_ID).unwrap();
        b.write_u64::<LE>(k.width as u64).unwrap();
        b.write_u64::<LE>(k.height as u64).unwrap();
        for p in camera_params(k) {
            b.write_f64::<LE>(p).unwrap();
        }
    }
    write_file(&dir.join("cameras.bin"), &b)?;

    let mut b = Vec::new();
    b.write_u64::<LE>(views.len() as u64).unwrap();
    for v in views {
        let (q, t) = pose_to_colmap(&v.pose);
        b.write_u32::<LE>(v.view_id).unwrap();
        q.iter().chain(t.iter()).for_each(|x| b.write_f64::<LE>(*x).unwrap());
        b.write_u32::<LE>(v.camera_id).unwrap();
        b.extend_from_slice(v.name.as_bytes());
        b.push(0);
        let feats = cloud.features_of(v.view_id);
        b.write_u64::<LE>(feats.len() as u64).unwrap();
        for f in feats {
            b.write_f64::<LE>(f.u + HALF_PIXEL).unwrap();
            b.write_f64::<LE>(f.v + HALF_PIXEL).unwrap();
            b.write_u64::<LE>(f.point_id.unwrap_or(u64::MAX)).unwrap();
        }
    }
    write_file(&dir.join("images.bin"), &b)?;

    let mut b = Vec::new();
    b.write_u64::<LE>(cloud.len() as u64).unwrap();
    for (id, p) in &cloud.points {
        b.write_u64::<LE>(*id).unwrap();
        for x in p.xyz.to_array() {
            b.write_f64::<LE>(x).unwrap();
        }
        b.extend_from_slice(&p.rgb);
        b.write_f64::<LE>(p.error).unwrap();
        b.write_u64::<LE>(p.track.len() as u64).unwrap();
        for e in &p.track {
            b.write_u32::<LE>(e.view_id).unwrap();
            b.write_u32::<LE>(e.feature_index).unwrap();
        }
    }
    write_file(&dir.join("points3D.bin"), &b)
}
