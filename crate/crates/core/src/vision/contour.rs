use std::collections::VecDeque;

use log::warn;

use super::{BinaryImage, VisionError};

/// Smallest foreground component accepted as the finger (px).
pub const MIN_COMPONENT_AREA: usize = 100;

/// Neighbour offsets in clockwise screen order, starting west.
const RING: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Ordered boundary pixels (x right, y down).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<[i64; 2]>,
    pub closed: bool,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_f64(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
    }

    /// Sum of step lengths around the closed loop.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let a = self.points[i];
                let b = self.points[(i + 1) % n];
                (((a[0] - b[0]).pow(2) + (a[1] - b[1]).pow(2)) as f64).sqrt()
            })
            .sum()
    }
}

/// 8-connected components, largest first, as lists of pixel indices.
fn components(mask: &BinaryImage) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in RING {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    // Stable sort keeps raster order among equal areas.
    out.sort_by_key(|c| std::cmp::Reverse(c.len()));
    out
}

/// Moore-neighbourhood border following, clockwise on screen, from the first
/// foreground pixel in raster order.
fn trace(mask: &BinaryImage) -> Vec<[i64; 2]> {
    let start = match mask.data.iter().position(|&v| v) {
        Some(i) => [(i % mask.width) as i64, (i / mask.width) as i64],
        None => return Vec::new(),
    };
    let neighbour = |p: [i64; 2], k: usize| [p[0] + RING[k % 8].0, p[1] + RING[k % 8].1];
    let next = |p: [i64; 2], from: usize| -> Option<(usize, [i64; 2])> {
        (0..8).map(|i| (from + i) % 8).find_map(|k| {
            let q = neighbour(p, k);
            mask.get_signed(q[0], q[1]).then_some((k, q))
        })
    };
    // The west neighbour of the raster-first pixel is background.
    let Some((k0, second)) = next(start, 0) else {
        return vec![start];
    };
    // Direction from `q` to the background pixel checked just before
    // stepping from `p` towards `RING[k]`.
    let backtrack = |p: [i64; 2], k: usize, q: [i64; 2]| -> usize {
        let b = neighbour(p, k + 7);
        let d = (b[0] - q[0], b[1] - q[1]);
        RING.iter().position(|&r| r == d).expect("backtrack is adjacent")
    };
    let mut points = vec![start];
    let mut cur = second;
    let mut dir = backtrack(start, k0, second);
    loop {
        let (k, q) = next(cur, dir).expect("a traced pixel has a foreground neighbour");
        if cur == start && q == second {
            break;
        }
        points.push(cur);
        dir = backtrack(cur, k, q);
        cur = q;
        if points.len() > 4 * mask.data.len() {
            break;
        }
    }
    points
}

/// Outer boundary of the largest foreground component.
pub fn extract_contour(mask: &BinaryImage) -> Result<Contour, VisionError> {
    let comps = components(mask);
    let Some(largest) = comps.first() else {
        return Err(VisionError::Contour("mask is empty".into()));
    };
    if largest.len() < MIN_COMPONENT_AREA {
        return Err(VisionError::Contour(format!(
            "largest component has {} px, need {MIN_COMPONENT_AREA}",
            largest.len()
        )));
    }
    if comps.len() > 1 {
        warn!("{} foreground components, keeping the largest ({} px)", comps.len(), largest.len());
    }
    let mut only = BinaryImage::new(mask.width, mask.height);
    for &i in largest {
        only.data[i] = true;
    }
    Ok(Contour { points: trace(&only), closed: true })
}

/// The two arcs between the cut vertices, each running from the left cut.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourSplit {
    pub bottom: Vec<[f64; 2]>,
    pub top: Vec<[f64; 2]>,
}

fn arc(points: &[[f64; 2]], from: usize, to: usize) -> Vec<[f64; 2]> {
    let n = points.len();
    let len = (to + n - from) % n + 1;
    (0..len).map(|i| points[(from + i) % n]).collect()
}

/// Cuts the closed contour at its leftmost and rightmost vertices (lowest
/// one on ties). The arc lying lower in the image is the bottom line.
pub fn split_contour(contour: &Contour) -> Result<ContourSplit, VisionError> {
    let pts = contour.as_f64();
    if pts.len() < 3 {
        return Err(VisionError::Split("contour has fewer than 3 points".into()));
    }
    let key_min = |p: &[f64; 2]| (p[0], -p[1]);
    let mut left = 0;
    let mut right = 0;
    for (i, p) in pts.iter().enumerate() {
        let l = key_min(&pts[left]);
        if key_min(p) < l {
            left = i;
        }
        let r = (pts[right][0], pts[right][1]);
        if (p[0], p[1]) > r {
            right = i;
        }
    }
    if pts[left][0] == pts[right][0] {
        return Err(VisionError::Split("contour has no horizontal extent".into()));
    }
    let a = arc(&pts, left, right);
    let mut b = arc(&pts, right, left);
    b.reverse();
    let mean_y = |v: &[[f64; 2]]| v.iter().map(|p| p[1]).sum::<f64>() / v.len() as f64;
    let (bottom, top) = if mean_y(&a) > mean_y(&b) { (a, b) } else { (b, a) };
    Ok(ContourSplit { bottom, top })
}
