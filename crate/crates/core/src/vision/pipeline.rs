use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{joint_angles_from_positions, GripperModel, Point};
use crate::metrics::TimeSeries;

use super::contour::{extract_contour, Contour};
use super::mask::{combined_mask, MaskSpec};
use super::morphology::{close, open};
use super::peaks::{find_joint_peaks, intersect, refine_corner, Line};
use super::{BinaryImage, RasterImage, VisionError};

/// Largest fraction of frames allowed to fail in [`track_tip`].
pub const MAX_GAP_FRACTION: f64 = 0.10;

/// Affine map between pixel centres and world metres, y flipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelFrame {
    /// World position of the centre of pixel (0, 0).
    pub origin: [f64; 2],
    /// Metres per pixel.
    pub scale: f64,
}

impl PixelFrame {
    pub fn to_world(&self, p: Point) -> Point {
        [self.origin[0] + p[0] * self.scale, self.origin[1] - p[1] * self.scale]
    }

    pub fn to_pixel(&self, w: Point) -> Point {
        [(w[0] - self.origin[0]) / self.scale, (self.origin[1] - w[1]) / self.scale]
    }
}

/// Joint angles measured in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAngles {
    pub angles: Vec<f64>,
    /// Joint locations in pixels, base to tip.
    pub joints_px: Vec<Point>,
    pub tip_px: Point,
    /// Metres per pixel implied by the known segment lengths.
    pub meters_per_pixel: f64,
}

/// Mean inset of boundary pixel centres behind an axis-aligned edge (px).
const EDGE_OFFSET: f64 = 0.5;
/// Edge fit window on each side of a corner, in segment lengths.
const REACH: f64 = 0.3;

fn foreground_mask(img: &RasterImage, spec: &MaskSpec) -> Result<BinaryImage, VisionError> {
    spec.validate()?;
    let mut mask = combined_mask(img, spec);
    if spec.morph_radius > 0 {
        mask = close(&open(&mask, spec.morph_radius), spec.morph_radius);
    }
    Ok(mask)
}

/// Moves a fitted edge line half a pixel out of the body.
fn to_true_edge(line: &Line, mask: &BinaryImage) -> Line {
    let n = line.normal();
    let probe = |s: f64| {
        let x = (line.point[0] + s * n[0]).round() as i64;
        let y = (line.point[1] + s * n[1]).round() as i64;
        mask.get_signed(x, y)
    };
    let sign = match (probe(1.5), probe(-1.5)) {
        (false, true) => 1.0,
        (true, false) => -1.0,
        _ => 0.0,
    };
    // Boundary pixels step one row (or column) per column (or row), so the
    // mean inset shrinks as the edge tilts towards the diagonal.
    let inset = EDGE_OFFSET * line.dir[0].abs().max(line.dir[1].abs());
    line.shifted([sign * inset * n[0], sign * inset * n[1]])
}

/// Sub-pixel corner near `points[idx]` from its two edges; falls back to
/// the pixel itself. The split index is moved to the contour point nearest
/// the estimate and the edges refitted, so a slightly misplaced start does
/// not bend one edge fit around the corner.
fn corner(points: &[Point], mut idx: usize, reach: usize, closed: bool, mask: &BinaryImage) -> Point {
    let n = points.len();
    let mut best = points[idx];
    for _ in 0..4 {
        let Some(p) = refine_corner(points, idx, reach, 3, closed)
            .and_then(|(a, b)| intersect(&to_true_edge(&a, mask), &to_true_edge(&b, mask)))
            .filter(|p| (p[0] - points[idx][0]).hypot(p[1] - points[idx][1]) < reach as f64)
        else {
            break;
        };
        best = p;
        let r = reach as isize / 2;
        let nearest = (-r..=r)
            .filter_map(|o| {
                let i = idx as isize + o;
                if closed {
                    Some(i.rem_euclid(n as isize) as usize)
                } else {
                    (0..n as isize).contains(&i).then_some(i as usize)
                }
            })
            .min_by(|&a, &b| {
                let da = (points[a][0] - p[0]).hypot(points[a][1] - p[1]);
                let db = (points[b][0] - p[0]).hypot(points[b][1] - p[1]);
                da.total_cmp(&db)
            })
            .unwrap_or(idx);
        if nearest == idx {
            break;
        }
        idx = nearest;
    }
    best
}

fn arc(points: &[Point], from: usize, to: usize) -> Vec<Point> {
    let n = points.len();
    let len = (to + n - from) % n + 1;
    (0..len).map(|i| points[(from + i) % n]).collect()
}

/// Contour indices of the clamped end and of the tip.
fn ends(pts: &[Point], orientation: f64) -> (usize, usize) {
    let along = [orientation.cos(), -orientation.sin()];
    let down = [orientation.sin(), orientation.cos()];
    let dot = |p: &Point, v: [f64; 2]| p[0] * v[0] + p[1] * v[1];
    let base = (0..pts.len())
        .min_by(|&a, &b| {
            let ka = (dot(&pts[a], along), -dot(&pts[a], down));
            let kb = (dot(&pts[b], along), -dot(&pts[b], down));
            ka.partial_cmp(&kb).expect("finite pixels")
        })
        .expect("non-empty contour");
    let b = pts[base];
    let tip = (0..pts.len())
        .max_by(|&i, &j| {
            let di = (pts[i][0] - b[0]).hypot(pts[i][1] - b[1]);
            let dj = (pts[j][0] - b[0]).hypot(pts[j][1] - b[1]);
            di.total_cmp(&dj)
        })
        .expect("non-empty contour");
    (base, tip)
}

/// Joint angles of the finger shown in `img`.
///
/// Masks by colour, traces the outer contour, takes the bottom line between
/// the clamped end and the tip, locates one notch apex per joint and applies
/// the slope-difference rule to the apexes and tip. Angles are relative to
/// the model's mount orientation.
pub fn angles_from_image(img: &RasterImage, spec: &MaskSpec, model: &GripperModel) -> Result<ImageAngles, VisionError> {
    let mask = foreground_mask(img, spec)?;
    let contour = extract_contour(&mask)?;
    let pts = contour.as_f64();
    if pts.len() < 3 {
        return Err(VisionError::Split("contour too short".into()));
    }
    let (base, tip) = ends(&pts, model.mount.orientation);
    if base == tip {
        return Err(VisionError::Split("clamped end and tip coincide".into()));
    }
    // Clockwise tracing runs along the top from base to tip, so the arc
    // from tip back to base is the bottom line.
    let mut bottom = arc(&pts, tip, base);
    bottom.reverse();
    let n_joints = model.n_joints();
    let peaks = find_joint_peaks(&bottom, n_joints)?;
    let arc_len: f64 = bottom.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    let segment_px = arc_len / model.n_segments() as f64;
    let reach = ((REACH * segment_px).round() as usize).max(4);

    let joints_px: Vec<Point> = peaks.iter().map(|p| corner(&bottom, p.index, reach, false, &mask)).collect();
    let tip_px = corner(&pts, tip, reach, true, &mask);

    let mut chain_px = joints_px.clone();
    chain_px.push(tip_px);
    let mut angles = joint_angles_from_positions(&chain_px)?;
    angles[0] -= model.mount.orientation;

    let px_len: f64 = chain_px.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    let model_len: f64 = model.segment_length[1..].iter().sum();
    Ok(ImageAngles { angles, joints_px, tip_px, meters_per_pixel: model_len / px_len })
}

/// Tip height per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TipTrack {
    /// Tip height in metres; failed frames are filled by interpolation.
    pub series: TimeSeries,
    /// Indices of frames whose contour could not be extracted.
    pub gaps: Vec<usize>,
}

/// Rightmost contour corner of one frame, in pixels.
fn frame_tip(img: &RasterImage, spec: &MaskSpec) -> Result<Point, VisionError> {
    let mask = foreground_mask(img, spec)?;
    let contour: Contour = extract_contour(&mask)?;
    let pts = contour.as_f64();
    let idx = (0..pts.len())
        .max_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[b][1].total_cmp(&pts[a][1])))
        .expect("non-empty contour");
    let reach = (pts.len() / 80).max(4);
    Ok(corner(&pts, idx, reach, true, &mask))
}

/// Vertical tip position over a frame sequence taken at `fps`.
///
/// The tip is the contour corner with the highest x. Frames whose contour
/// fails are gaps; more than [`MAX_GAP_FRACTION`] of them is an error.
/// Frames are processed in parallel and reassembled in order.
pub fn track_tip(frames: &[RasterImage], spec: &MaskSpec, fps: f64, frame: &PixelFrame) -> Result<TipTrack, VisionError> {
    if frames.len() < 2 {
        return Err(VisionError::Tracking(format!("need at least 2 frames, got {}", frames.len())));
    }
    spec.validate()?;
    let raw: Vec<Option<f64>> = frames
        .par_iter()
        .map(|img| frame_tip(img, spec).ok().map(|p| frame.to_world(p)[1]))
        .collect();
    let gaps: Vec<usize> = raw.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
    if gaps.len() as f64 > MAX_GAP_FRACTION * frames.len() as f64 {
        return Err(VisionError::TooManyGaps { gaps: gaps.len(), frames: frames.len() });
    }
    let known: Vec<(usize, f64)> = raw.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    let values = (0..raw.len())
        .map(|i| match raw[i] {
            Some(v) => v,
            None => interpolate(&known, i),
        })
        .collect();
    let series = TimeSeries::new(fps, values, 0.0).map_err(|e| VisionError::Tracking(e.to_string()))?;
    Ok(TipTrack { series, gaps })
}

fn interpolate(known: &[(usize, f64)], i: usize) -> f64 {
    let after = known.partition_point(|&(j, _)| j < i);
    match (after.checked_sub(1).map(|k| known[k]), known.get(after)) {
        (Some((i0, v0)), Some(&(i1, v1))) => v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64,
        (Some((_, v)), None) | (None, Some(&(_, v))) => v,
        (None, None) => unreachable!("at least one frame succeeded"),
    }
}
