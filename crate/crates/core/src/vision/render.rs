use crate::chain::{forward_kinematics, ChainError, GripperModel, Point};

use super::{BinaryImage, PixelFrame, RasterImage};

/// Blue of the silicone body.
pub const BODY_RGB: [u8; 3] = [30, 80, 200];
pub const BACKGROUND_RGB: [u8; 3] = [255, 255, 255];

/// Side-view outline of the finger, as fractions of the mean segment length.
///
/// The chain line runs `bottom` above the lower face and `top` below the
/// upper face. Each joint sits at the apex of a V-notch cut from the lower
/// face, `notch_half_width` wide on either side. The last segment ends in a
/// point on the chain line: a chamfer on the lower face and a longer slope
/// of `tip_recess` on the upper one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyShape {
    pub bottom: f64,
    pub top: f64,
    pub notch_half_width: f64,
    pub tip_recess: f64,
}

impl Default for BodyShape {
    fn default() -> Self {
        Self { bottom: 0.3, top: 0.35, notch_half_width: 0.35, tip_recess: 0.6 }
    }
}

type Polygon = Vec<Point>;

fn add(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

/// Solid pieces and notch cut-outs of the silhouette in world coordinates.
fn outline(model: &GripperModel, theta: &[f64], shape: &BodyShape) -> Result<(Vec<Polygon>, Vec<Polygon>), ChainError> {
    let pts = forward_kinematics(model, theta)?;
    let n_seg = model.n_segments();
    let len = model.total_length() / n_seg as f64;
    let (d, h) = (shape.bottom * len, shape.top * len);
    let (w, r) = (shape.notch_half_width * len, shape.tip_recess * len);
    let axes: Vec<(Point, Point)> = (0..n_seg)
        .map(|s| {
            let (dx, dy) = (pts[s + 1][0] - pts[s][0], pts[s + 1][1] - pts[s][1]);
            let l = dx.hypot(dy);
            let e = [dx / l, dy / l];
            (e, [-e[1], e[0]])
        })
        .collect();
    let mut solid = Vec::new();
    let mut cuts = Vec::new();
    for s in 0..n_seg {
        let (e, n) = axes[s];
        let (a, b) = (pts[s], pts[s + 1]);
        if s + 1 < n_seg {
            solid.push(vec![add(a, n, -d), add(b, n, -d), add(b, n, h), add(a, n, h)]);
        } else {
            solid.push(vec![
                add(a, n, -d),
                add(add(b, e, -w), n, -d),
                b,
                add(add(b, e, -r), n, h),
                add(a, n, h),
            ]);
        }
    }
    for j in 1..n_seg {
        let p = pts[j];
        let (e0, n0) = axes[j - 1];
        let (e1, n1) = axes[j];
        // Fills the upper wedge that opens when the joint flexes.
        solid.push(vec![p, add(p, n0, h), add(p, n1, h)]);
        let wall_a = add(add([0.0, 0.0], e0, -w), n0, -d);
        let wall_b = add(add([0.0, 0.0], e1, w), n1, -d);
        cuts.push(vec![p, add(p, wall_a, 2.0), add(p, wall_b, 2.0)]);
    }
    Ok((solid, cuts))
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn contains(poly: &[Point], sign: f64, p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        sign * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) >= 0.0
    })
}

/// Fixed camera: pixel grid size plus the pixel-to-world map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub frame: PixelFrame,
    pub width: usize,
    pub height: usize,
    pub shape: BodyShape,
}

impl Camera {
    /// Smallest view showing every pose with `margin` pixels to spare, at
    /// `px_per_segment` pixels per mean segment length.
    pub fn fit(
        model: &GripperModel,
        poses: &[Vec<f64>],
        px_per_segment: f64,
        margin: usize,
    ) -> Result<Self, ChainError> {
        let shape = BodyShape::default();
        let scale = model.total_length() / model.n_segments() as f64 / px_per_segment;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for theta in poses {
            let (solid, _) = outline(model, theta, &shape)?;
            for p in solid.iter().flatten() {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        if poses.is_empty() {
            return Err(ChainError::InvalidArgument("camera needs at least one pose".into()));
        }
        let m = margin as f64;
        let frame = PixelFrame { origin: [lo[0] - m * scale, hi[1] + m * scale], scale };
        Ok(Self {
            frame,
            width: ((hi[0] - lo[0]) / scale).ceil() as usize + 2 * margin + 1,
            height: ((hi[1] - lo[1]) / scale).ceil() as usize + 2 * margin + 1,
            shape,
        })
    }

    /// Foreground mask of the finger in pose `theta`. A pixel is set when its
    /// centre falls inside the outline.
    pub fn silhouette(&self, model: &GripperModel, theta: &[f64]) -> Result<BinaryImage, ChainError> {
        let (solid, cuts) = outline(model, theta, &self.shape)?;
        let mut mask = BinaryImage::new(self.width, self.height);
        let mut paint = |poly: &Polygon, value: bool| {
            let area = signed_area(poly);
            if area.abs() < 1e-18 {
                return;
            }
            let px: Vec<Point> = poly.iter().map(|&p| self.frame.to_pixel(p)).collect();
            let (mut c0, mut c1, mut r0, mut r1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in &px {
                c0 = c0.min(p[0]);
                c1 = c1.max(p[0]);
                r0 = r0.min(p[1]);
                r1 = r1.max(p[1]);
            }
            let clampc = |v: f64| v.clamp(0.0, (self.width - 1) as f64) as usize;
            let clampr = |v: f64| v.clamp(0.0, (self.height - 1) as f64) as usize;
            for r in clampr(r0.floor())..=clampr(r1.ceil()) {
                for c in clampc(c0.floor())..=clampc(c1.ceil()) {
                    let w = self.frame.to_world([c as f64, r as f64]);
                    if contains(poly, area.signum(), w) {
                        mask.set(c, r, value);
                    }
                }
            }
        };
        for poly in &solid {
            paint(poly, true);
        }
        for poly in &cuts {
            paint(poly, false);
        }
        Ok(mask)
    }

    /// Blue finger on a white background.
    pub fn render(&self, model: &GripperModel, theta: &[f64]) -> Result<RasterImage, ChainError> {
        let mask = self.silhouette(model, theta)?;
        let mut img = RasterImage::filled(self.width, self.height, BACKGROUND_RGB);
        for y in 0..self.height {
            for x in 0..self.width {
                if mask.get(x, y) {
                    img.set_pixel(x, y, BODY_RGB);
                }
            }
        }
        Ok(img)
    }
}
