//! Separable Gaussian smoothing of binary masks.

use crate::scene::MaskBits;

fn kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Blurs the 0/1 image of `mask`; pixels beyond the border count as 0.
pub fn gaussian_blur(mask: &MaskBits, sigma: f64) -> Vec<f64> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let src: Vec<f64> = mask.data.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    if sigma <= 0.0 {
        return src;
    }
    let k = kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let xx = x as i64 + j as i64 - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += kv * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let yy = y as i64 + j as i64 - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += kv * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Blur then threshold; closes pinholes and gaps left by sparse projections.
pub fn smooth_mask(mask: &MaskBits, sigma: f64, threshold: f64) -> MaskBits {
    let b = gaussian_blur(mask, sigma);
    MaskBits { width: mask.width, height: mask.height, data: b.iter().map(|v| *v >= threshold).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sums_to_one() {
        assert!((kernel(2.5).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_of_large_block_stays_one() {
        let m = MaskBits::from_fn(64, 64, |x, y| (10..54).contains(&x) && (10..54).contains(&y));
        let b = gaussian_blur(&m, 2.0);
        assert!((b[32 * 64 + 32] - 1.0).abs() < 1e-9);
        assert!(b[0] < 1e-9);
    }

    #[test]
    fn pinhole_is_closed() {
        let mut m = MaskBits::from_fn(40, 40, |x, y| (5..35).contains(&x) && (5..35).contains(&y));
        m.set(20, 20, false);
        assert!(smooth_mask(&m, 2.0, 0.5).get(20, 20));
    }
}
