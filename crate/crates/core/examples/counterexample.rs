//! Truncation encoders on the diagonal class: small errors, but decoder
//! constants that grow without bound.

use lipwidth::counterexample::counterexample_report;
use lipwidth::spaces::AlphaSequence;

fn main() -> lipwidth::Result<()> {
    let rep = counterexample_report(&AlphaSequence::new(2.0)?, 10, 6)?;
    println!("r = {}, {} atoms", rep.r, rep.m);
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "k", "sup_error", "sqrt2*a_k", "Lip lower", "Lip(M)");
    for t in &rep.truncations {
        let lower = t.lip_lower.map_or("-".to_string(), |l| format!("{l:.4}"));
        println!(
            "{:>3} {:>12.6} {:>12.6} {:>12} {:>12.4}",
            t.k, t.sup_error, t.sqrt2_alpha_k, lower, t.lip_measured
        );
    }
    for e in &rep.entropy {
        println!("n = {}: eps_n >= {:.6}, alpha_(2^n)/2 = {:.6}", e.n, e.entropy_lower, e.alpha_2n_half);
    }
    println!("all inequalities hold: {}", rep.holds());
    Ok(())
}
