//! Joint positions of a bent finger and the angles recovered from them.

use softgrip::chain::{forward_kinematics, joint_angles_from_positions, to_image_convention, GripperModel};

fn main() {
    let model = GripperModel::default();
    let theta = [0.1, -0.05, 0.2, 0.0, 0.15, -0.1, 0.05];
    let points = forward_kinematics(&model, &theta).expect("seven angles");
    for (i, p) in points.iter().enumerate() {
        println!("point {i}: x {:8.5} m  y {:8.5} m", p[0], p[1]);
    }
    let image = to_image_convention(&points[1..]);
    let back = joint_angles_from_positions(&image).expect("valid pose");
    println!("recovered angles: {back:.6?}");
}
