//! McShane and Kirszbraun extensions of a sampled map, with a Lipschitz
//! audit of the extended values.

use lipwidth::extend::{audit_values, sample_index_pairs, ExtensionStrategy, LipschitzMap, SampledLipschitzMap};
use lipwidth::rng;
use lipwidth::spaces::FiniteNormedSpace;
use rand::Rng;

fn main() -> lipwidth::Result<()> {
    let mut rng = rng::rng(1);
    let f = |x: &[f64]| vec![x[0].sin() + 0.5 * x[1], (x[0] - x[1]).cos()];
    let xs: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let samples: Vec<(Vec<f64>, Vec<f64>)> = xs.iter().map(|x| (x.clone(), f(x))).collect();
    let l2 = FiniteNormedSpace::l2(2)?;
    let gamma = 2.0;

    let kirsz = SampledLipschitzMap::new(l2, l2, samples.clone(), gamma, ExtensionStrategy::Kirszbraun)?;
    let linf = FiniteNormedSpace::linf(2)?;
    let mcshane = SampledLipschitzMap::new(l2, linf, samples, gamma, ExtensionStrategy::McShane)?;

    let queries: Vec<Vec<f64>> = (0..200)
        .map(|_| vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])
        .collect();
    let (extended, values) = kirsz.extend_sequentially(&queries)?;
    let pairs = sample_index_pairs(queries.len(), 5000, 2);
    let audit = audit_values(&l2, &l2, &queries, &values, &pairs)?;
    println!(
        "Kirszbraun: {} points, measured constant {:.4} (gamma {gamma})",
        extended.len(),
        audit.measured_constant
    );

    let q = [0.3, -0.2];
    println!("f{q:?} = {:?}", f(&q));
    println!("Kirszbraun value {:?}", kirsz.eval(&q)?);
    println!("McShane value    {:?}", mcshane.eval(&q)?);
    Ok(())
}
