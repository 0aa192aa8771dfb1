// How well does the at-least-one-table collision probability of the hash
// ensemble track the lift likelihood curve?

use basketflow::arm::{calibration_gap, calibration_sweep, collision_probability, fit_scale, lift_likelihood};

pub fn main() {
    println!("{:>6} {:>10} {:>10}", "cos", "collide", "sigmoid");
    for c in [-0.5, 0.0, 0.5, 0.9, 1.0] {
        println!("{c:>6.2} {:>10.4} {:>10.4}", collision_probability(c, 4, 11), lift_likelihood(c, 4.3));
    }

    let g = calibration_gap(4, 11, 4.3, 0.001);
    println!("gap at (4, 11, 4.3): {:.4} at cos {:.3}", g.max_gap, g.at_cosine);
    let f = fit_scale(4, 11, 0.001);
    println!("best scale for (4, 11): {:.3} with gap {:.4}", f.scale, f.gap);

    let sweep = calibration_sweep(1..=8, 1..=20, 0.01);
    println!("best layouts on a coarse grid:");
    for s in sweep.iter().take(5) {
        println!("  F={} H={:>2} A={:.2} gap {:.4}", s.functions, s.tables, s.scale, s.gap);
    }
}
