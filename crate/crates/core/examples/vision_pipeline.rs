//! Renders a pose, saves it and reads the joint angles back from the image.
//!
//! Usage: `cargo run --example vision_pipeline [out.png]`

use std::path::PathBuf;

use softgrip::chain::{static_equilibrium, GripperModel, LoadCondition};
use softgrip::vision::{angles_from_image, Camera, MaskSpec, RasterImage};

fn main() {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("finger.png"), PathBuf::from);
    let model = GripperModel::default();
    let theta = static_equilibrium(&model, &LoadCondition::tip_mass(0.03)).expect("equilibrium");
    let cam = Camera::fit(&model, std::slice::from_ref(&theta), 80.0, 10).expect("camera");
    cam.render(&model, &theta).expect("render").save(&out).expect("write image");

    let img = RasterImage::load(&out).expect("read image");
    let found = angles_from_image(&img, &MaskSpec::default(), &model).expect("pipeline");
    println!("image written to {}", out.display());
    for (j, (a, b)) in found.angles.iter().zip(&theta).enumerate() {
        println!("joint {j}: measured {a:+.4} rad, true {b:+.4} rad");
    }
    println!("scale {:.3e} m/px", found.meters_per_pixel);
}
