//! Finite-rank Lipschitz approximation of a map from the line into ℓ₂³:
//! mollify, cut off, interpolate on a Kuhn mesh and rescale.

use std::sync::Arc;

use lipwidth::experiment::InterpMap;
use lipwidth::interp::{convergence_table, lemma24_pipeline, loglog_slope, pl_eval, Lemma24Options};

fn main() -> lipwidth::Result<()> {
    let (map, gamma, s) = InterpMap::Circle.build()?;
    let res = lemma24_pipeline(map, &s, gamma, 1e-2, 0.1, &Lemma24Options::default())?;
    let a = &res.audit;
    println!("gamma = {gamma:.6}, delta used = {:.4}", a.delta_used);
    println!("mesh size h = {:.3e} after {} halvings", a.h, a.halvings);
    println!("deviation on S = {:.3e} (eps 1e-2)", a.deviation_on_s);
    println!("audited Lipschitz constant = {:.6}", a.lip_final);
    println!("rank bound = {}", a.rank_bound);
    println!("approximant at 0.5: {:?}", pl_eval(&res.approximant, &[0.5]));

    let rows = convergence_table(&Arc::clone(&res.stages), &s, 0.2, 4, 4000, 1)?;
    for r in &rows {
        println!("h = {:.4}: sup error {:.3e}, Lipschitz excess {:.3e}", r.h, r.sup_err, r.lip_excess);
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let sup: Vec<f64> = rows.iter().map(|r| r.sup_err).collect();
    let lip: Vec<f64> = rows.iter().map(|r| r.lip_excess).collect();
    println!("slopes: sup {:.3}, excess {:.3}", loglog_slope(&hs, &sup), loglog_slope(&hs, &lip));
    Ok(())
}
