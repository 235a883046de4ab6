//! Two-sided entropy-number brackets for a diagonal class and a random
//! ℓ₁-ball sample.

use lipwidth::nets::{entropy_bracket, greedy_cover_counts};
use lipwidth::spaces::{generate_diag_class, generate_kq, AlphaSequence, Exponent};

fn main() -> lipwidth::Result<()> {
    let diag = generate_diag_class(&AlphaSequence::new(2.0)?, 64)?;
    println!("diag(r=2), {} atoms", diag.len());
    println!("{:>3} {:>12} {:>12} {:>6}", "n", "lower", "upper", "cover");
    for n in 1..=5 {
        let b = entropy_bracket(&diag, n)?;
        println!("{:>3} {:>12.6} {:>12.6} {:>6}", n, b.lower, b.upper, b.cover_size());
    }

    let k1 = generate_kq(32, Exponent::Finite(1.0), 1000, 7)?;
    println!("\nK1 in l2^32, {} points", k1.len());
    for n in 1..=5 {
        let b = entropy_bracket(&k1, n)?;
        println!("{:>3} {:>12.6} {:>12.6}", n, b.lower, b.upper);
    }

    let radii = [0.8, 0.6, 0.4, 0.2];
    let counts = greedy_cover_counts(&k1, &radii)?;
    for (r, c) in radii.iter().zip(counts) {
        println!("greedy cover at radius {r}: {c} centers");
    }
    Ok(())
}
