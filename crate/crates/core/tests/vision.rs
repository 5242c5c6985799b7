use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softgrip::chain::{forward_kinematics, simulate_release, static_equilibrium, tip_position, GripperModel, LoadCondition};
use softgrip::vision::*;

fn random_pose(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..7).map(|_| rng.random_range(-0.2..0.2)).collect()
}

#[test]
fn straight_pose_reads_zero() {
    let m = GripperModel::default();
    let theta = vec![0.0; 7];
    let cam = Camera::fit(&m, std::slice::from_ref(&theta), 40.0, 10).unwrap();
    let found = angles_from_image(&cam.render(&m, &theta).unwrap(), &MaskSpec::default(), &m).unwrap();
    assert_eq!(found.angles.len(), 7);
    assert!(found.angles.iter().all(|a| a.abs() < 0.02), "{:?}", found.angles);
    let rel = found.meters_per_pixel / cam.frame.scale - 1.0;
    assert!(rel.abs() < 0.02, "{rel}");
}

#[test]
fn blank_image_fails_at_contour() {
    let img = RasterImage::filled(200, 100, [255, 255, 255]);
    let err = angles_from_image(&img, &MaskSpec::default(), &GripperModel::default()).unwrap_err();
    assert_eq!(err.stage(), "contour");
}

#[test]
fn render_round_trip() {
    let m = GripperModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let theta = random_pose(&mut rng);
        let cam = Camera::fit(&m, std::slice::from_ref(&theta), 80.0, 10).unwrap();
        let found = angles_from_image(&cam.render(&m, &theta).unwrap(), &MaskSpec::default(), &m).unwrap();
        for (a, b) in found.angles.iter().zip(&theta) {
            assert!((a - b).abs() < 0.03, "{theta:?} -> {:?}", found.angles);
        }
        let truth = forward_kinematics(&m, &theta).unwrap();
        for (j, p) in found.joints_px.iter().enumerate() {
            let g = cam.frame.to_pixel(truth[j + 1]);
            assert!((g[0] - p[0]).hypot(g[1] - p[1]) < 2.0, "joint {j}");
        }
    }
}

#[test]
fn pose_under_load_round_trip() {
    let m = GripperModel::default();
    let theta = static_equilibrium(&m, &LoadCondition::tip_mass(0.04)).unwrap();
    let cam = Camera::fit(&m, std::slice::from_ref(&theta), 80.0, 10).unwrap();
    let found = angles_from_image(&cam.render(&m, &theta).unwrap(), &MaskSpec::default(), &m).unwrap();
    for (a, b) in found.angles.iter().zip(&theta) {
        assert!((a - b).abs() < 0.03, "{a} vs {b}");
    }
}

#[test]
fn gray_images_use_the_threshold_only() {
    let m = GripperModel::default();
    let theta = vec![0.0; 7];
    let cam = Camera::fit(&m, std::slice::from_ref(&theta), 40.0, 10).unwrap();
    let sil = cam.silhouette(&m, &theta).unwrap();
    let data = sil.data.iter().map(|&b| if b { 40 } else { 250 }).collect();
    let gray = RasterImage::gray(sil.width, sil.height, data).unwrap();
    let found = angles_from_image(&gray, &MaskSpec::default(), &m).unwrap();
    assert!(found.angles.iter().all(|a| a.abs() < 0.02));
}

fn release_frames(m: &GripperModel, cam_poses: &[Vec<f64>]) -> Camera {
    Camera::fit(m, cam_poses, 40.0, 10).unwrap()
}

#[test]
fn tracking_a_rendered_release() {
    let m = GripperModel::default();
    let rate = 1000.0;
    let truth = simulate_release(&m, 0.04, 0.3, rate).unwrap();
    // Replay the same release to get poses for every sample.
    let loaded = static_equilibrium(&m, &LoadCondition::tip_mass(0.04)).unwrap();
    let sim = softgrip::chain::Simulator::new(&m, LoadCondition::unloaded()).unwrap();
    let mut state = softgrip::chain::SimState::at_rest(loaded);
    let mut poses = vec![state.theta.clone()];
    let substeps = (1.0 / rate / m.integrator.dt).round() as usize;
    for _ in 1..truth.len() {
        for _ in 0..substeps {
            sim.advance(&mut state, 1.0 / rate / substeps as f64).unwrap();
        }
        poses.push(state.theta.clone());
    }
    for (p, y) in poses.iter().zip(&truth.values) {
        assert!((tip_position(&m, p).unwrap()[1] - y).abs() < 1e-12);
    }
    let cam = release_frames(&m, &poses);
    let frames: Vec<RasterImage> = poses.iter().map(|p| cam.render(&m, p).unwrap()).collect();
    let track = track_tip(&frames, &MaskSpec::default(), rate, &cam.frame).unwrap();
    assert!(track.gaps.is_empty());
    let worst = track
        .series
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < cam.frame.scale, "{} px", worst / cam.frame.scale);
}

#[test]
fn static_frames_give_a_constant_track() {
    let m = GripperModel::default();
    let theta = static_equilibrium(&m, &LoadCondition::unloaded()).unwrap();
    let cam = Camera::fit(&m, std::slice::from_ref(&theta), 30.0, 10).unwrap();
    let img = cam.render(&m, &theta).unwrap();
    let track = track_tip(&vec![img; 10], &MaskSpec::default(), 1000.0, &cam.frame).unwrap();
    assert!(track.series.values.iter().all(|&v| v == track.series.values[0]));
}

#[test]
fn corrupted_frames() {
    let m = GripperModel::default();
    let theta = vec![0.0; 7];
    let cam = Camera::fit(&m, std::slice::from_ref(&theta), 30.0, 10).unwrap();
    let good = cam.render(&m, &theta).unwrap();
    let blank = RasterImage::filled(cam.width, cam.height, [255, 255, 255]);
    let mut frames = vec![good.clone(); 20];
    frames[3] = blank.clone();
    frames[19] = blank.clone();
    let track = track_tip(&frames, &MaskSpec::default(), 500.0, &cam.frame).unwrap();
    assert_eq!(track.gaps, vec![3, 19]);
    assert!(track.series.values.iter().all(|&v| v == track.series.values[0]));
    frames[10] = blank;
    let err = track_tip(&frames, &MaskSpec::default(), 500.0, &cam.frame).unwrap_err();
    assert!(matches!(err, VisionError::TooManyGaps { gaps: 3, frames: 20 }));
    assert!(track_tip(&frames[..1], &MaskSpec::default(), 500.0, &cam.frame).is_err());
}

#[test]
fn mask_spec_json() {
    let spec = MaskSpec::default();
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(MaskSpec::from_json(&json).unwrap(), spec);
    assert!(MaskSpec::from_json(r#"{"hsv_low":[0,0.5,0],"hsv_high":[360,0.2,1],"gray_threshold":200}"#).is_err());
    assert!(MaskSpec::from_json("{").is_err());
}

fn blob() -> impl Strategy<Value = BinaryImage> {
    (5usize..30, 5usize..30, prop::collection::vec(any::<bool>(), 900)).prop_map(|(w, h, bits)| {
        let img = BinaryImage::from_fn(w, h, |x, y| bits[y * 30 + x]);
        // Closing merges speckle into larger regions.
        close(&img, 1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_grows_with_the_hsv_box(
        pixels in prop::collection::vec(any::<[u8; 3]>(), 64),
        lo in (0.0f64..180.0, 0.0f64..0.5, 0.0f64..0.5),
        widen in (0.0f64..60.0, 0.0f64..0.3, 0.0f64..0.3),
    ) {
        let img = RasterImage::rgb(8, 8, pixels.concat()).unwrap();
        let narrow = MaskSpec { hsv_low: [lo.0 + widen.0, lo.1 + widen.1, lo.2 + widen.2], hsv_high: [lo.0 + 90.0, 0.8, 0.8], gray_threshold: 255.0, morph_radius: 0 };
        let wide = MaskSpec { hsv_low: [lo.0, lo.1, lo.2], hsv_high: [lo.0 + 90.0 + widen.0, 0.8 + widen.1 / 2.0, 0.8 + widen.2 / 2.0], ..narrow };
        let a = hsv_mask(&img, &narrow);
        let b = hsv_mask(&img, &wide);
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!(!x || *y);
        }
    }

    #[test]
    fn contours_are_closed_and_connected(img in blob()) {
        prop_assume!(img.count() >= MIN_COMPONENT_AREA);
        let c = match extract_contour(&img) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        prop_assert!(c.closed);
        let n = c.points.len();
        for i in 0..n {
            let (a, b) = (c.points[i], c.points[(i + 1) % n]);
            prop_assert!((a[0] - b[0]).abs() <= 1 && (a[1] - b[1]).abs() <= 1, "{a:?} {b:?}");
            prop_assert!(img.get(a[0] as usize, a[1] as usize));
        }
    }

    #[test]
    fn split_covers_the_contour(w in 12usize..40, h in 12usize..40) {
        let img = BinaryImage::from_fn(w + 4, h + 4, |x, y| {
            let (dx, dy) = (x as f64 - (w as f64 + 3.0) / 2.0, y as f64 - (h as f64 + 3.0) / 2.0);
            (dx / (w as f64 / 2.0)).powi(2) + (dy / (h as f64 / 2.0)).powi(2) <= 1.0
        });
        prop_assume!(img.count() >= MIN_COMPONENT_AREA);
        let c = extract_contour(&img).unwrap();
        let s = split_contour(&c).unwrap();
        // The two cut vertices appear in both halves.
        prop_assert_eq!(s.bottom.len() + s.top.len(), c.len() + 2);
        prop_assert_eq!(s.bottom.first(), s.top.first());
        prop_assert_eq!(s.bottom.last(), s.top.last());
        let mean_y = |p: &[[f64; 2]]| p.iter().map(|q| q[1]).sum::<f64>() / p.len() as f64;
        prop_assert!(mean_y(&s.bottom) >= mean_y(&s.top));
    }
}
