//! Binary field checkpoints: a small header followed by little-endian `f32`
//! grids (density, then interleaved color).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::aabb::Aabb;
use super::voxel::VoxelField;
use super::FieldError;
use crate::scalar::Scalar;
use crate::scene::Vec3;

pub const MAGIC: [u8; 4] = *b"OBJV";
pub const VERSION: u32 = 1;

pub fn write_field<T: Scalar, W: Write>(field: &VoxelField<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    for r in field.resolution {
        w.write_u32::<LittleEndian>(r as u32)?;
    }
    for v in field.aabb.min.to_array().into_iter().chain(field.aabb.max.to_array()) {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
    }
    for v in field.density.iter().chain(&field.color) {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
    }
    w.flush()
}

pub fn read_field<T: Scalar, R: Read>(mut r: R) -> Result<VoxelField<T>, FieldError> {
    let bad = |m: String| FieldError::Checkpoint(m);
    let io = |e: std::io::Error| FieldError::Checkpoint(format!("truncated checkpoint: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut res = [0usize; 3];
    for v in &mut res {
        *v = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    }
    let mut b = [0f64; 6];
    for v in &mut b {
        *v = r.read_f32::<LittleEndian>().map_err(io)? as f64;
    }
    let aabb = Aabb::new(Vec3::new(b[0], b[1], b[2]).cast(), Vec3::new(b[3], b[4], b[5]).cast())?;
    let n = res.iter().try_fold(1usize, |a, r| a.checked_mul(*r)).filter(|n| *n <= 1 << 30);
    let n = n.ok_or_else(|| bad(format!("implausible resolution {res:?}")))?;
    let mut field = VoxelField::new(aabb, res, T::zero(), T::zero())?;
    for v in field.density.iter_mut().take(n).chain(field.color.iter_mut()) {
        *v = T::lit(r.read_f32::<LittleEndian>().map_err(io)? as f64);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(bad("trailing bytes after grids".into()));
    }
    Ok(field)
}

pub fn save_field<T: Scalar>(field: &VoxelField<T>, path: &Path) -> Result<(), FieldError> {
    let f = File::create(path).map_err(|e| FieldError::io(path, e))?;
    write_field(field, BufWriter::new(f)).map_err(|e| FieldError::io(path, e))
}

pub fn load_field<T: Scalar>(path: &Path) -> Result<VoxelField<T>, FieldError> {
    let f = File::open(path).map_err(|e| FieldError::io(path, e))?;
    read_field(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_for_f32() {
        let aabb = Aabb::new(Vec3::new(-1.0f32, -2.0, -0.5), Vec3::new(1.0, 0.5, 3.0)).unwrap();
        let mut f = VoxelField::new(aabb, [3, 2, 4], -5.0f32, 0.0).unwrap();
        for (i, v) in f.density.iter_mut().enumerate() {
            *v = i as f32 * 0.37 - 2.0;
        }
        for (i, v) in f.color.iter_mut().enumerate() {
            *v = (i as f32).sin();
        }
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 12 + 24 + 4 * 24 * 4);
        let g: VoxelField<f32> = read_field(buf.as_slice()).unwrap();
        assert_eq!(f, g);
        buf.push(0);
        assert!(read_field::<f32, _>(buf.as_slice()).is_err());
        assert!(read_field::<f32, _>(&buf[..30]).is_err());
    }
}
