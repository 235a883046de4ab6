//! Gaussian sensing: operator-norm brackets, l1 decoding and a Lipschitz
//! encoder/decoder pair built on a sparse net.

use lipwidth::csrecovery::{
    build_nonlinear_pair, gaussian_matrix, instance_optimality_trials, l1_recovery_trials, lemma61_check,
    net_rip_certificate, RIP_SAMPLED_SUPPORTS,
};
use lipwidth::spaces::generate_sparse_class;

fn main() -> lipwidth::Result<()> {
    let (n, big_n, k) = (40, 128, 4);
    let phi = gaussian_matrix(n, big_n, 1)?;
    for p in [1.0, 1.5, 2.0] {
        let r = lemma61_check(&phi, p, 2)?;
        println!(
            "p = {p}: {:.4} <= [{:.4}, {:.4}] <= {:.4}",
            r.lower_bound, r.bracket.lower, r.bracket.upper, r.upper_bound
        );
    }

    let l1 = l1_recovery_trials(&phi, k, 50, 3);
    let exact = l1.iter().filter(|t| t.error <= 1e-6).count();
    println!("l1 decoding of {k}-sparse vectors: {exact}/{} exact", l1.len());

    let net = generate_sparse_class(big_n, k, 300, 4)?;
    let cert = net_rip_certificate(&phi, k, &net, RIP_SAMPLED_SUPPORTS, 5)?;
    let pair = build_nonlinear_pair(&phi, &net, cert)?;
    println!(
        "RIP({}) delta = {:.4} over {} supports, C = {:.4}",
        pair.certificate.k,
        pair.certificate.delta,
        pair.certificate.supports_checked,
        pair.constant()
    );
    let trials = instance_optimality_trials(&pair, k, 20, 0.05, 6)?;
    for t in trials.iter().take(5) {
        println!(
            "trial {}: error {:.4} <= {:.4} (sigma_k {:.4}, net resolution {:.4})",
            t.trial, t.error, t.bound, t.sigma_k, t.net_resolution
        );
    }
    let held = trials.iter().filter(|t| t.holds()).count();
    println!("instance optimality: {held}/{}", trials.len());
    Ok(())
}
