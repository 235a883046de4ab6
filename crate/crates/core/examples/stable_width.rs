//! Builds stable encoder/decoder pairs on a diagonal class and compares the
//! realized error with the entropy upper bound.

use lipwidth::spaces::{generate_diag_class, AlphaSequence};
use lipwidth::stablewidth::{build_stable_pair, evaluate_width, stability_trials};

fn main() -> lipwidth::Result<()> {
    let class = generate_diag_class(&AlphaSequence::new(2.0)?, 64)?;
    println!(
        "{:>3} {:>6} {:>12} {:>12} {:>8} {:>8}",
        "n", "params", "sup_error", "3*eps_up", "Lip(a)", "Lip(M)"
    );
    for n in 1..=4 {
        let pair = build_stable_pair(&class, n, 11 + n as u64)?;
        let (w, realized) = evaluate_width(&pair, &class, 5000, 3)?;
        println!(
            "{:>3} {:>6} {:>12.6} {:>12.6} {:>8.4} {:>8.4}",
            n,
            pair.parameter_dim(),
            w.sup_error,
            3.0 * w.entropy.upper,
            w.lip_a_measured,
            w.lip_m_measured
        );
        if n == 4 {
            let probes = stability_trials(&realized, 50, 5)?;
            let held = probes.iter().filter(|p| p.holds).count();
            println!("stability probes at n = 4: {held}/{} hold", probes.len());
        }
    }
    Ok(())
}
