use super::aabb::Aabb;
use super::FieldError;
use crate::scalar::{sigmoid, softplus, Scalar};
use crate::scene::{Ray, Vec3};

/// One quadrature sample along a ray: position parameter, segment length and
/// the field's (activated) density and color there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub delta: T,
    pub sigma: T,
    pub color: [T; 3],
}

/// Anything that can be volume rendered.
pub trait RadianceField<T: Scalar>: Sync {
    fn bounds(&self) -> Aabb<T>;

    /// Density and color at `p` seen from direction `dir`.
    fn query(&self, p: Vec3<T>, dir: Vec3<T>) -> (T, [T; 3]);

    /// Appends the quadrature samples for `ray`, sorted by `t`.
    fn ray_samples(&self, ray: &Ray<T>, n: usize, out: &mut Vec<Sample<T>>) {
        uniform_samples(self, ray, n, out)
    }
}

/// Positions of `n` midpoint samples over the ray clipped to `bounds`, with
/// their common spacing.
pub fn sample_positions<T: Scalar>(bounds: &Aabb<T>, ray: &Ray<T>, n: usize) -> Option<(T, T)> {
    let clipped = bounds.clip(ray)?;
    if n == 0 {
        return None;
    }
    let delta = (clipped.far - clipped.near) / T::lit(n as f64);
    Some((clipped.near, delta))
}

pub fn uniform_samples<T: Scalar, F: RadianceField<T> + ?Sized>(field: &F, ray: &Ray<T>, n: usize, out: &mut Vec<Sample<T>>) {
    let Some((near, delta)) = sample_positions(&field.bounds(), ray, n) else { return };
    let half = T::lit(0.5);
    for j in 0..n {
        let t = near + (T::lit(j as f64) + half) * delta;
        let (sigma, color) = field.query(ray.at(t), ray.direction);
        out.push(Sample { t, delta, sigma, color });
    }
}

/// Trilinear interpolation stencil: 8 grid indices and weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil<T> {
    pub index: [u32; 8],
    pub weight: [T; 8],
}

/// Dense grid of pre-activation density and color over an axis-aligned box.
/// Grid points sit on the cell corners, so each axis spans `resolution - 1`
/// cells. Density is `softplus` activated, color `sigmoid`; the color grid
/// ignores view direction.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelField<T> {
    pub aabb: Aabb<T>,
    pub resolution: [usize; 3],
    pub density: Vec<T>,
    /// Three values per grid point.
    pub color: Vec<T>,
}

impl<T: Scalar> VoxelField<T> {
    pub fn new(aabb: Aabb<T>, resolution: [usize; 3], density_init: T, color_init: T) -> Result<Self, FieldError> {
        if resolution.iter().any(|r| *r < 2) {
            return Err(FieldError::Config(format!("grid resolution {resolution:?} below 2")));
        }
        let n = resolution.iter().product::<usize>();
        if n > u32::MAX as usize {
            return Err(FieldError::Config(format!("grid resolution {resolution:?} too large")));
        }
        Ok(Self { aabb, resolution, density: vec![density_init; n], color: vec![color_init; 3 * n] })
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn cell_size(&self) -> Vec3<T> {
        let e = self.aabb.extent();
        Vec3::new(
            e.x / T::lit((self.resolution[0] - 1) as f64),
            e.y / T::lit((self.resolution[1] - 1) as f64),
            e.z / T::lit((self.resolution[2] - 1) as f64),
        )
    }

    pub fn grid_point(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        let c = self.cell_size();
        self.aabb.min + Vec3::new(c.x * T::lit(i as f64), c.y * T::lit(j as f64), c.z * T::lit(k as f64))
    }

    pub fn is_finite(&self) -> bool {
        self.density.iter().chain(&self.color).all(|v| v.is_finite())
    }

    /// `None` outside the box.
    #[inline]
    pub fn stencil(&self, p: Vec3<T>) -> Option<Stencil<T>> {
        if !self.aabb.contains(p) {
            return None;
        }
        let mut base = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let cells = self.resolution[a] - 1;
            let g = (p[a] - self.aabb.min[a]) / (self.aabb.max[a] - self.aabb.min[a]) * T::lit(cells as f64);
            let i = g.floor().to_usize().unwrap_or(0).min(cells - 1);
            base[a] = i;
            frac[a] = (g - T::lit(i as f64)).max(T::zero()).min(T::one());
        }
        let (nx, nxy) = (self.resolution[0], self.resolution[0] * self.resolution[1]);
        let i0 = base[0] + nx * base[1] + nxy * base[2];
        let mut index = [0u32; 8];
        let mut weight = [T::zero(); 8];
        for c in 0..8 {
            let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            index[c] = (i0 + dx + nx * dy + nxy * dz) as u32;
            let wx = if dx == 1 { frac[0] } else { T::one() - frac[0] };
            let wy = if dy == 1 { frac[1] } else { T::one() - frac[1] };
            let wz = if dz == 1 { frac[2] } else { T::one() - frac[2] };
            weight[c] = wx * wy * wz;
        }
        Some(Stencil { index, weight })
    }

    /// Interpolated pre-activation density and color.
    #[inline]
    pub fn interpolate(&self, s: &Stencil<T>) -> (T, [T; 3]) {
        let mut d = T::zero();
        let mut c = [T::zero(); 3];
        for (i, w) in s.index.iter().zip(&s.weight) {
            let i = *i as usize;
            d += *w * self.density[i];
            c[0] += *w * self.color[3 * i];
            c[1] += *w * self.color[3 * i + 1];
            c[2] += *w * self.color[3 * i + 2];
        }
        (d, c)
    }

    pub fn query_raw(&self, p: Vec3<T>) -> Option<(T, [T; 3])> {
        self.stencil(p).map(|s| self.interpolate(&s))
    }
}

impl<T: Scalar> RadianceField<T> for VoxelField<T> {
    fn bounds(&self) -> Aabb<T> {
        self.aabb
    }

    fn query(&self, p: Vec3<T>, _dir: Vec3<T>) -> (T, [T; 3]) {
        match self.query_raw(p) {
            Some((d, c)) => (softplus(d), c.map(sigmoid)),
            None => (T::zero(), [T::zero(); 3]),
        }
    }
}
