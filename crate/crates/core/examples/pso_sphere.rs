//! Particle swarm on the 7-D sphere function.

use softgrip::pso::{optimize, PsoConfig};

fn main() {
    let config = PsoConfig::with_bounds(vec![[-1.0, 1.0]; 7], 42);
    let result = optimize(|x: &[f64]| Ok::<_, std::convert::Infallible>(x.iter().map(|v| v * v).sum()), &config)
        .expect("finite objective");
    for (i, f) in result.history.iter().enumerate().step_by(10) {
        println!("iteration {i:3}: {f:.3e}");
    }
    println!("best {:.3e} at {:.4?}", result.best_fitness, result.best_position);
}
