use super::VisionError;

/// Infinite line through `point` along unit vector `dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: [f64; 2],
    pub dir: [f64; 2],
}

impl Line {
    /// Unit normal, `dir` rotated by +90 degrees.
    pub fn normal(&self) -> [f64; 2] {
        [-self.dir[1], self.dir[0]]
    }

    pub fn shifted(&self, offset: [f64; 2]) -> Self {
        Self { point: [self.point[0] + offset[0], self.point[1] + offset[1]], dir: self.dir }
    }
}

/// Total least squares line through `points`.
pub fn fit_line(points: &[[f64; 2]]) -> Option<Line> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy == 0.0 {
        return None;
    }
    // Principal axis of the 2x2 scatter matrix.
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(Line { point: [cx, cy], dir: [angle.cos(), angle.sin()] })
}

/// Crossing point of two lines, `None` when nearly parallel.
pub fn intersect(a: &Line, b: &Line) -> Option<[f64; 2]> {
    let det = a.dir[0] * b.dir[1] - a.dir[1] * b.dir[0];
    if det.abs() < 1e-6 {
        return None;
    }
    let (dx, dy) = (b.point[0] - a.point[0], b.point[1] - a.point[1]);
    let t = (dx * b.dir[1] - dy * b.dir[0]) / det;
    Some([a.point[0] + t * a.dir[0], a.point[1] + t * a.dir[1]])
}

fn window(points: &[[f64; 2]], idx: usize, from: isize, to: isize, closed: bool) -> Vec<[f64; 2]> {
    let n = points.len() as isize;
    (from..=to)
        .filter_map(|o| {
            let i = idx as isize + o;
            if closed {
                Some(points[i.rem_euclid(n) as usize])
            } else {
                (0..n).contains(&i).then(|| points[i as usize])
            }
        })
        .collect()
}

/// Lines fitted to the two edges meeting at `points[idx]`: one through the
/// points `exclude..=reach` before it, one through those after it.
pub fn refine_corner(
    points: &[[f64; 2]],
    idx: usize,
    reach: usize,
    exclude: usize,
    closed: bool,
) -> Option<(Line, Line)> {
    let (r, e) = (reach as isize, exclude as isize);
    let before = window(points, idx, -r, -e, closed);
    let after = window(points, idx, e, r, closed);
    if before.len() < 3 || after.len() < 3 {
        return None;
    }
    Some((fit_line(&before)?, fit_line(&after)?))
}

/// A joint candidate on the bottom line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Position in the polyline.
    pub index: usize,
    pub point: [f64; 2],
    /// Depth of the notch below the local chord, towards the body (px).
    pub prominence: f64,
}

fn arc_length(points: &[[f64; 2]]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Notch apexes on a bottom line ordered from base to tip.
///
/// Each point is scored by how far it lies above the chord joining its
/// neighbours a quarter segment away (image y grows downward, so the body is
/// on the low-y side). Local maxima of that depth are kept, the `n_joints`
/// deepest win and are returned in polyline order.
pub fn find_joint_peaks(bottom: &[[f64; 2]], n_joints: usize) -> Result<Vec<Peak>, VisionError> {
    let n = bottom.len();
    let segment_px = arc_length(bottom) / (n_joints + 1) as f64;
    let w = ((0.25 * segment_px).round() as usize).max(2);
    if n < 2 * w + 1 {
        return Err(VisionError::Peaks { found: 0, needed: n_joints });
    }
    let mut depth = vec![f64::NEG_INFINITY; n];
    for i in w..n - w {
        let (a, b) = (bottom[i - w], bottom[i + w]);
        let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
        let len = ux.hypot(uy);
        if len == 0.0 {
            continue;
        }
        // Body-side unit normal of the chord.
        let (nx, ny) = (uy / len, -ux / len);
        depth[i] = (bottom[i][0] - a[0]) * nx + (bottom[i][1] - a[1]) * ny;
    }
    let radius = ((0.4 * segment_px).round() as usize).max(1);
    let threshold = (0.05 * segment_px).max(1.5);
    let mut peaks: Vec<Peak> = (w..n - w)
        .filter(|&i| depth[i] > threshold)
        .filter(|&i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            (lo..i).all(|j| depth[j] < depth[i]) && (i + 1..=hi).all(|j| depth[j] <= depth[i])
        })
        .map(|i| Peak { index: i, point: bottom[i], prominence: depth[i] })
        .collect();
    if peaks.len() < n_joints {
        return Err(VisionError::Peaks { found: peaks.len(), needed: n_joints });
    }
    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    peaks.truncate(n_joints);
    peaks.sort_by_key(|p| p.index);
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_line_recovers_direction() {
        let pts: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 3.0 + 0.5 * i as f64]).collect();
        let l = fit_line(&pts).unwrap();
        assert!((l.dir[1] / l.dir[0] - 0.5).abs() < 1e-12);
        let v = fit_line(&[[2.0, 0.0], [2.0, 5.0], [2.0, 9.0]]).unwrap();
        assert!(v.dir[0].abs() < 1e-12);
    }

    #[test]
    fn intersection_of_axes() {
        let a = Line { point: [0.0, 2.0], dir: [1.0, 0.0] };
        let b = Line { point: [5.0, -1.0], dir: [0.0, 1.0] };
        assert_eq!(intersect(&a, &b), Some([5.0, 2.0]));
        assert_eq!(intersect(&a, &a.shifted([0.0, 1.0])), None);
    }

    /// Sawtooth whose teeth point up (towards low image y).
    fn sawtooth(teeth: usize, period: usize, amp: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
        let half = period / 2;
        let n = teeth * period + 1;
        let pts = (0..n)
            .map(|i| {
                let phase = (i % period) as f64;
                let tri = if phase <= half as f64 { phase } else { period as f64 - phase };
                [i as f64, 100.0 + amp * (tri / half as f64)]
            })
            .collect();
        // Apexes sit at the period boundaries strictly inside.
        let apex = (1..teeth).map(|k| k * period).collect();
        (pts, apex)
    }

    #[test]
    fn sawtooth_apexes_are_found() {
        // 8 periods give 7 interior apexes.
        let (pts, apex) = sawtooth(8, 40, 12.0);
        let peaks = find_joint_peaks(&pts, 7).unwrap();
        let got: Vec<usize> = peaks.iter().map(|p| p.index).collect();
        assert_eq!(got, apex);
        for (p, &i) in peaks.iter().zip(&apex) {
            assert_eq!(p.point, pts[i]);
            assert!(p.prominence > 0.0);
            let (a, b) = refine_corner(&pts, p.index, 10, 1, false).unwrap();
            let x = intersect(&a, &b).unwrap();
            assert!((x[0] - pts[i][0]).abs() < 1e-9 && (x[1] - pts[i][1]).abs() < 1e-9);
        }
    }

    #[test]
    fn smooth_arc_has_no_joints() {
        let pts: Vec<[f64; 2]> = (0..=180)
            .map(|d| {
                let a = (180 - d) as f64 * std::f64::consts::PI / 180.0;
                [50.0 + 40.0 * a.cos(), 50.0 + 40.0 * a.sin()]
            })
            .collect();
        assert!(matches!(find_joint_peaks(&pts, 7), Err(VisionError::Peaks { found: 0, needed: 7 })));
    }

    #[test]
    fn deepest_candidates_win() {
        let (mut pts, apex) = sawtooth(8, 40, 12.0);
        // Flatten one tooth to a shallow bump: only six strong apexes remain.
        for p in pts.iter_mut().skip(110).take(20) {
            p[1] = p[1].max(109.0);
        }
        let peaks = find_joint_peaks(&pts, 6).unwrap();
        assert!(peaks.iter().all(|p| apex.contains(&p.index) && p.index != 120));
    }
}
