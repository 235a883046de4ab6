//! Covering-number bounds from measured stable widths, and the rate
//! transfer from widths to entropy numbers.

use lipwidth::experiment::carl_inputs;
use lipwidth::spaces::{generate_diag_class, AlphaSequence};
use lipwidth::stablewidth::{carl_cover_bound, carl_rate_check, phi_of_eps};

fn main() -> lipwidth::Result<()> {
    let class = generate_diag_class(&AlphaSequence::new(1.0)?, 64)?;
    let (inputs, brackets) = carl_inputs(&class, 5, 2.0, 1.0, 3)?;
    let radius = class.radius_about_origin();
    let floor = inputs.delta_sequence.iter().copied().fold(f64::INFINITY, f64::min);
    println!("A = {}, radius {:.4}, smallest width {:.4}", inputs.base(), radius, floor);
    // the bound is finite once eps/4 reaches the smallest measured width
    for eps in [0.5 * radius, radius, 2.0 * floor, 4.0 * floor] {
        let b = carl_cover_bound(&inputs, eps, radius)?;
        let phi = phi_of_eps(&inputs, eps).map_or("undefined".to_string(), |m| m.to_string());
        println!("eps = {eps:.4}: phi = {phi}, L = {}, log_A N <= {}", b.levels, b.log_a_bound());
    }
    let rate = carl_rate_check(&inputs, &brackets)?;
    println!("Lambda = {:.4}, C = {:.4} (worst n = {:?})", rate.lambda, rate.c, rate.worst_n);
    Ok(())
}
