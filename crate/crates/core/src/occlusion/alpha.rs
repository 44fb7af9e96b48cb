//! Planar alpha shapes over projected points, and their rasterization.

use delaunator::{triangulate, Point};

use crate::scene::MaskBits;

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ab = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let bc = ((b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2)).sqrt();
    let ca = ((c[0] - a[0]).powi(2) + (c[1] - a[1]).powi(2)).sqrt();
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    ab * bc * ca / (2.0 * area2)
}

fn nn_brute(points: &[[f64; 2]]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

// Every point's nearest neighbour is one of its Delaunay neighbours.
fn nn_delaunay(points: &[[f64; 2]], triangles: &[usize]) -> Vec<f64> {
    let mut nn = vec![f64::INFINITY; points.len()];
    for t in triangles.chunks_exact(3) {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let d = ((points[a][0] - points[b][0]).powi(2) + (points[a][1] - points[b][1]).powi(2)).sqrt();
            nn[a] = nn[a].min(d);
            nn[b] = nn[b].min(d);
        }
    }
    nn
}

/// Automatic alpha in units of the median nearest-neighbour spacing. Randomly
/// scattered points leave empty circles several spacings wide, so smaller
/// factors punch holes into the shape.
pub const AUTO_ALPHA_FACTOR: f64 = 6.0;

fn scaled_median(mut nn: Vec<f64>) -> f64 {
    nn.retain(|d| d.is_finite());
    if nn.is_empty() {
        return 0.0;
    }
    nn.sort_by(f64::total_cmp);
    AUTO_ALPHA_FACTOR * nn[nn.len() / 2]
}

/// [`AUTO_ALPHA_FACTOR`] times the median nearest-neighbour distance.
pub fn auto_alpha(points: &[[f64; 2]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    scaled_median(nn_brute(points))
}

/// Alpha shape as triangles: the Delaunay triangles whose circumradius does not
/// exceed `alpha` (automatic when `None`). Returns the alpha used.
pub fn alpha_shape(points: &[[f64; 2]], alpha: Option<f64>) -> (Vec<[usize; 3]>, f64) {
    let pts: Vec<Point> = points.iter().map(|p| Point { x: p[0], y: p[1] }).collect();
    let tri = triangulate(&pts);
    let alpha = alpha.unwrap_or_else(|| {
        if tri.triangles.is_empty() {
            auto_alpha(points)
        } else {
            // duplicates are left out of the triangulation; they sit at distance 0
            let mut nn = nn_delaunay(points, &tri.triangles);
            let dup = nn.iter().filter(|d| !d.is_finite()).count();
            nn.retain(|d| d.is_finite());
            nn.extend(std::iter::repeat_n(0.0, dup));
            scaled_median(nn)
        }
    });
    let tris = tri
        .triangles
        .chunks_exact(3)
        .map(|t| [t[0], t[1], t[2]])
        .filter(|t| circumradius(points[t[0]], points[t[1]], points[t[2]]) <= alpha)
        .collect();
    (tris, alpha)
}

/// Delaunay triangles whose circumradius does not exceed `alpha`.
pub fn alpha_triangles(points: &[[f64; 2]], alpha: f64) -> Vec<[usize; 3]> {
    alpha_shape(points, Some(alpha)).0
}

/// Convex hull, counter-clockwise, without collinear points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], *q) <= 0.0 {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    hull
}

fn fill_triangle(mask: &mut MaskBits, a: [f64; 2], b: [f64; 2], c: [f64; 2]) {
    let area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if area == 0.0 {
        return;
    }
    let eps = 1e-9 * area.abs();
    let lo_x = a[0].min(b[0]).min(c[0]).ceil().max(0.0);
    let hi_x = a[0].max(b[0]).max(c[0]).floor().min(mask.width as f64 - 1.0);
    let lo_y = a[1].min(b[1]).min(c[1]).ceil().max(0.0);
    let hi_y = a[1].max(b[1]).max(c[1]).floor().min(mask.height as f64 - 1.0);
    if lo_x > hi_x || lo_y > hi_y {
        return;
    }
    let edge = |p: [f64; 2], q: [f64; 2], x: f64, y: f64| ((q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0])) * area.signum();
    for y in lo_y as u32..=hi_y as u32 {
        for x in lo_x as u32..=hi_x as u32 {
            let (fx, fy) = (x as f64, y as f64);
            if edge(a, b, fx, fy) >= -eps && edge(b, c, fx, fy) >= -eps && edge(c, a, fx, fy) >= -eps {
                mask.set(x, y, true);
            }
        }
    }
}

/// Marks pixels whose centers lie inside any of the triangles.
pub fn rasterize_triangles(points: &[[f64; 2]], tris: &[[usize; 3]], width: u32, height: u32) -> MaskBits {
    let mut mask = MaskBits::empty(width, height);
    for t in tris {
        fill_triangle(&mut mask, points[t[0]], points[t[1]], points[t[2]]);
    }
    mask
}

/// Rasterizes a convex polygon by fanning it into triangles.
pub fn rasterize_convex(poly: &[[f64; 2]], width: u32, height: u32) -> MaskBits {
    let mut mask = MaskBits::empty(width, height);
    for i in 1..poly.len().saturating_sub(1) {
        fill_triangle(&mut mask, poly[0], poly[i], poly[i + 1]);
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circumradius_of_right_triangle_is_half_hypotenuse() {
        assert!((circumradius([0.0, 0.0], [4.0, 0.0], [0.0, 3.0]) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]);
        assert_eq!(h.len(), 4);
    }

    #[test]
    fn collinear_points_have_no_triangles() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(alpha_triangles(&pts, 1e9).is_empty());
    }
}
