//! Exact Euclidean distance transform (separable lower-envelope method).

use crate::scene::MaskBits;

const FAR: f64 = 1e20;

/// 1D squared distance transform of sampled function `f` into `out`.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let intersect = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared EDT on a `w × h` grid where `seed[i]` marks zero-distance cells.
fn squared_edt(w: usize, h: usize, seed: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let mut grid = vec![FAR; w * h];
    for y in 0..h {
        for x in 0..w {
            if seed(x, y) {
                grid[y * w + x] = 0.0;
            }
        }
    }
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

/// For every mask pixel, the Euclidean distance to the nearest non-mask pixel,
/// with everything beyond the image border counted as non-mask. Zero outside.
pub fn distance_transform(mask: &MaskBits) -> Vec<f32> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let (pw, ph) = (w + 2, h + 2);
    let sq = squared_edt(pw, ph, |x, y| {
        x == 0 || y == 0 || x == pw - 1 || y == ph - 1 || !mask.get((x - 1) as u32, (y - 1) as u32)
    });
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(sq[(y + 1) * pw + x + 1].sqrt() as f32);
        }
    }
    out
}

/// Distance to the nearest non-mask pixel inside the image only; a mask without
/// any non-mask pixel yields `f32::INFINITY` everywhere.
pub fn distance_transform_unbounded(mask: &MaskBits) -> Vec<f32> {
    if mask.data.iter().all(|b| *b) {
        return vec![f32::INFINITY; mask.data.len()];
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let sq = squared_edt(w, h, |x, y| !mask.get(x as u32, y as u32));
    sq.iter().map(|d| d.sqrt() as f32).collect()
}
