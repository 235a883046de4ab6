//! The nine acceptance criteria at their stated tolerances. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use lipwidth::counterexample::counterexample_report;
use lipwidth::csrecovery::{
    build_nonlinear_pair, gaussian_matrix, instance_optimality_trials, l1_recovery_trials, lemma61_check,
    net_rip_certificate, SensingMatrix, RIP_SAMPLED_SUPPORTS,
};
use lipwidth::experiment::InterpMap;
use lipwidth::extend::{lipschitz_audit, ExtensionStrategy, LipschitzMap, SampledLipschitzMap};
use lipwidth::interp::{convergence_table, lemma24_pipeline, loglog_slope, Lemma24Options};
use lipwidth::nets::{entropy_bracket, exact_cover_radius, greedy_cover_counts, EntropyBracket};
use lipwidth::rng::{derive_seed, rng};
use lipwidth::spaces::{
    generate_diag_class, generate_kq, generate_sparse_class, AlphaSequence, ClassLabel, Exponent, FiniteNormedSpace,
    ModelClassSurrogate,
};
use lipwidth::stablewidth::{
    build_stable_pair, carl_cover_bound, carl_rate_check, evaluate_width, jl_dim, stability_trials, CarlInputs,
    RealizedPair, JL_DISTORTION,
};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// One class of the width grid with its measured pairs.
struct WidthRun {
    name: String,
    class: ModelClassSurrogate,
    widths: Vec<(u32, f64)>,
    brackets: Vec<EntropyBracket>,
    realized: Vec<RealizedPair>,
}

fn width_classes() -> lipwidth::Result<Vec<(String, ModelClassSurrogate)>> {
    Ok(vec![
        ("diag(r=1)".into(), generate_diag_class(&AlphaSequence::new(1.0)?, 64)?),
        ("diag(r=2)".into(), generate_diag_class(&AlphaSequence::new(2.0)?, 64)?),
        ("K1 in l2^32".into(), generate_kq(32, Exponent::Finite(1.0), 2000, SEED)?),
    ])
}

fn criterion1(runs: &mut Vec<WidthRun>) -> lipwidth::Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, class) in width_classes()? {
        let start = Instant::now();
        let mut run = WidthRun {
            name: name.clone(),
            class: class.clone(),
            widths: Vec::new(),
            brackets: Vec::new(),
            realized: Vec::new(),
        };
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        for n in 2..=5 {
            let seed = derive_seed(SEED, n as u64);
            let pair = build_stable_pair(&class, n, seed)?;
            let (w, realized) = evaluate_width(&pair, &class, 10_000, derive_seed(seed, 1))?;
            let ok = w.sup_error <= 3.0 * w.entropy.upper && w.lip_a_measured <= 1.05 && w.lip_m_measured <= 2.1;
            if !ok {
                detail.push(format!(
                    "{name} n={n}: error {:.4} vs {:.4}, Lip(a) {:.4}, Lip(M) {:.4}",
                    w.sup_error,
                    3.0 * w.entropy.upper,
                    w.lip_a_measured,
                    w.lip_m_measured
                ));
            }
            pass &= ok;
            worst = (
                worst.0.max(w.sup_error / (3.0 * w.entropy.upper)),
                worst.1.max(w.lip_a_measured),
                worst.2.max(w.lip_m_measured),
            );
            run.widths.push((n, w.sup_error));
            run.brackets.push(w.entropy);
            run.realized.push(realized);
        }
        let secs = start.elapsed().as_secs_f64();
        pass &= secs <= 300.0;
        detail.push(format!(
            "{name}: max error/(3 eps_up) {:.3}, Lip(a) {:.4}, Lip(M) {:.4}, {secs:.1}s",
            worst.0, worst.1, worst.2
        ));
        runs.push(run);
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn criterion2() -> lipwidth::Result<Outcome> {
    let mut r = rng(derive_seed(SEED, 2));
    let mut violations = 0;
    let mut checks = 0;
    for cloud in 0..50 {
        let count = r.random_range(3..=12);
        let dim = r.random_range(1..=4);
        let p = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity][cloud % 3];
        let pts: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let k = ModelClassSurrogate::new(FiniteNormedSpace::new(dim, p)?, pts, 0.0, ClassLabel::Custom("cloud".into()))?;
        for n in 1..=3u32 {
            let m = 1usize << n;
            if m >= count {
                break;
            }
            let b = entropy_bracket(&k, n)?;
            let exact = exact_cover_radius(&k, m)?;
            checks += 1;
            if !(b.lower <= exact + 1e-12 && exact <= b.upper + 1e-12) {
                violations += 1;
            }
        }
    }
    Ok(outcome(violations == 0, format!("{violations} violations in {checks} brackets over 50 clouds")))
}

fn criterion3() -> lipwidth::Result<Outcome> {
    let rep = counterexample_report(&AlphaSequence::new(2.0)?, 10, 6)?;
    let rows: Vec<_> = rep.truncations.iter().filter(|t| t.k >= 2).collect();
    let errors = rows.iter().all(|t| t.sup_error < t.sqrt2_alpha_k);
    let lips = rows.iter().all(|t| t.lip_lower.is_some_and(|l| t.lip_measured >= l));
    let lowers: Vec<f64> = rows.iter().filter_map(|t| t.lip_lower).collect();
    let increasing = lowers.windows(2).all(|w| w[1] > w[0]);
    let packing = rep.entropy.iter().all(|e| e.holds()) && rep.entropy.len() == 6;
    Ok(outcome(
        errors && lips && increasing && packing,
        format!(
            "errors {errors}, Lip(M_k) above lower bounds {lips}, bounds increasing {increasing} ({:.2} -> {:.2}), packing {packing}",
            lowers.first().copied().unwrap_or(f64::NAN),
            lowers.last().copied().unwrap_or(f64::NAN)
        ),
    ))
}

fn random_samples(
    r: &mut impl Rng,
    count: usize,
    dim_in: usize,
    dim_out: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let xs: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..dim_in).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    xs.into_iter()
        .map(|x| {
            let y = (0..dim_out).map(|_| r.random_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect()
}

fn sample_gamma(samples: &[(Vec<f64>, Vec<f64>)], dom: &FiniteNormedSpace, tgt: &FiniteNormedSpace) -> f64 {
    let mut g = 0.0f64;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            g = g.max(tgt.distance(&samples[i].1, &samples[j].1).unwrap() / dom.distance(&samples[i].0, &samples[j].0).unwrap());
        }
    }
    g
}

fn criterion4() -> lipwidth::Result<Outcome> {
    let mut worst_repro = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_residual = f64::NEG_INFINITY;
    for set in 0..20u64 {
        let mut r = rng(derive_seed(SEED, 400 + set));
        let dim_in = 1 + (set as usize % 4);
        let p = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity][set as usize % 3];
        let dom = FiniteNormedSpace::new(dim_in, p)?;
        let tgt = FiniteNormedSpace::linf(1 + set as usize % 3)?;
        let samples = random_samples(&mut r, 30, dim_in, tgt.dim());
        let gamma = sample_gamma(&samples, &dom, &tgt);
        let mc = SampledLipschitzMap::new(dom, tgt, samples.clone(), gamma, ExtensionStrategy::McShane)?;
        for (x, y) in &samples {
            let v = mc.eval(x)?;
            worst_repro = worst_repro.max(tgt.distance(&v, y)?);
        }
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10_000)
            .map(|_| {
                let a: Vec<f64> = (0..dim_in).map(|_| r.random_range(-1.5..1.5)).collect();
                let b: Vec<f64> = a.iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
                (a, b)
            })
            .collect();
        worst_excess = worst_excess.max(lipschitz_audit(&mc, &pairs)?.measured_constant - gamma);

        let l2_in = FiniteNormedSpace::l2(dim_in + 1)?;
        let l2_out = FiniteNormedSpace::l2(2)?;
        let samples = random_samples(&mut r, 30, dim_in + 1, 2);
        let gamma = sample_gamma(&samples, &l2_in, &l2_out);
        let kz = SampledLipschitzMap::new(l2_in, l2_out, samples, gamma, ExtensionStrategy::Kirszbraun)?;
        let queries: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..dim_in + 1).map(|_| r.random_range(-1.5..1.5)).collect())
            .collect();
        let res = queries
            .par_iter()
            .map(|q| kz.eval(q).map(|y| kz.feasibility_residual(q, &y)))
            .collect::<lipwidth::Result<Vec<f64>>>()?;
        worst_residual = res.into_iter().fold(worst_residual, f64::max);
    }
    Ok(outcome(
        worst_repro <= 1e-12 && worst_excess <= 1e-9 && worst_residual <= 1e-6,
        format!(
            "McShane reproduction {worst_repro:.1e}, constant excess {worst_excess:.1e}; Kirszbraun residual {worst_residual:.1e}"
        ),
    ))
}

fn criterion5() -> lipwidth::Result<Outcome> {
    let (mut up, mut low, mut total) = (0, 0, 0);
    for i in 0..20u64 {
        let phi = gaussian_matrix(40, 128, derive_seed(SEED, 500 + i))?;
        for p in [1.0, 1.5, 2.0] {
            let r = lemma61_check(&phi, p, derive_seed(SEED, 600 + i))?;
            up += r.upper_holds() as usize;
            low += r.lower_holds() as usize;
            total += 1;
        }
    }
    Ok(outcome(
        up == total && low == total,
        format!("upper {up}/{total}, lower {low}/{total}"),
    ))
}

fn criterion6() -> lipwidth::Result<Outcome> {
    let (big_n, k) = (128, 4);
    let mut n = 40;
    let mut phi = gaussian_matrix(n, big_n, derive_seed(SEED, 60))?;
    let exact = |phi: &SensingMatrix| {
        l1_recovery_trials(phi, k, 100, derive_seed(SEED, 61))
            .iter()
            .filter(|t| t.error <= 1e-6)
            .count()
    };
    let mut l1 = exact(&phi);
    let mut note = String::new();
    if l1 < 95 {
        note = format!(" (n=40 gave {l1}/100)");
        n = 48;
        phi = gaussian_matrix(n, big_n, derive_seed(SEED, 60))?;
        l1 = exact(&phi);
    }
    let net = generate_sparse_class(big_n, k, 500, derive_seed(SEED, 62))?;
    let cert = net_rip_certificate(&phi, k, &net, RIP_SAMPLED_SUPPORTS, derive_seed(SEED, 63))?;
    let pair = build_nonlinear_pair(&phi, &net, cert)?;
    let trials = instance_optimality_trials(&pair, k, 100, 0.05, derive_seed(SEED, 64))?;
    let held = trials.iter().filter(|t| t.holds()).count();
    Ok(outcome(
        l1 >= 95 && held == 100,
        format!(
            "l1 exact {l1}/100 at n={n}{note}; instance optimality {held}/100 with C = {:.3} (RIP({}) delta {:.3})",
            pair.constant(),
            pair.certificate.k,
            pair.certificate.delta
        ),
    ))
}

fn criterion7() -> lipwidth::Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, map) in [("circle", InterpMap::Circle), ("product", InterpMap::Product)] {
        let (m, gamma, s) = map.build()?;
        let opts = Lemma24Options {
            seed: SEED,
            ..Default::default()
        };
        let res = lemma24_pipeline(m, &s, gamma, 1e-2, 0.1, &opts)?;
        let rows = convergence_table(&Arc::clone(&res.stages), &s, 0.2, 4, 4000, SEED)?;
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let sup = loglog_slope(&hs, &rows.iter().map(|r| r.sup_err).collect::<Vec<_>>());
        let lip = loglog_slope(&hs, &rows.iter().map(|r| r.lip_excess).collect::<Vec<_>>());
        let a = &res.audit;
        let ok = (sup - 2.0).abs() <= 0.3
            && (lip - 1.0).abs() <= 0.3
            && a.lip_final <= gamma
            && a.deviation_on_s <= 1e-2;
        pass &= ok;
        detail.push(format!(
            "{name}: slopes {sup:.3}/{lip:.3}, Lip {:.4} <= {gamma:.4}, deviation {:.2e}",
            a.lip_final, a.deviation_on_s
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn criterion8(runs: &[WidthRun]) -> lipwidth::Result<Outcome> {
    let per_n = jl_dim(JL_DISTORTION)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for run in runs {
        let radius = run.class.radius_about_origin();
        let inputs = CarlInputs::from_budget_widths(&run.widths, per_n, radius, per_n * 5, 2.0, 1.0)?;
        let rate = carl_rate_check(&inputs, &run.brackets)?;
        let a_ok = inputs.base() == 65.0;
        let min = inputs.delta_sequence.iter().copied().fold(f64::INFINITY, f64::min);
        let mut eps: Vec<f64> = (0..5).map(|j| radius / f64::from(1u32 << j)).collect();
        eps.extend([4.0, 8.0, 16.0].map(|c| c * min));
        let counts = greedy_cover_counts(&run.class, &eps)?;
        let mut finite = 0;
        let mut held = 0;
        for (&e, &count) in eps.iter().zip(&counts) {
            let b = carl_cover_bound(&inputs, e, radius)?;
            finite += b.exponent.is_some() as usize;
            held += ((count as f64).ln() / b.a.ln() <= b.log_a_bound()) as usize;
        }
        let ok = rate.c.is_finite() && a_ok && held == eps.len();
        pass &= ok;
        detail.push(format!(
            "{}: C = {:.4}, A = {}, cover bounds {held}/{} ({finite} finite)",
            run.name,
            rate.c,
            inputs.base(),
            eps.len()
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn criterion9(runs: &[WidthRun]) -> lipwidth::Result<Outcome> {
    let mut held = 0;
    let mut total = 0;
    let mut all = true;
    for run in runs {
        for (i, realized) in run.realized.iter().enumerate() {
            let recs = stability_trials(realized, 100, derive_seed(SEED, 900 + i as u64))?;
            let h = recs.iter().filter(|r| r.holds).count();
            all &= h == 100;
            held += h;
            total += recs.len();
        }
    }
    Ok(outcome(all, format!("{held}/{total} probes over {} pairs", total / 100)))
}

fn report(idx: usize, name: &str, limit: f64, f: impl FnOnce() -> lipwidth::Result<Outcome>) -> bool {
    let start = Instant::now();
    let res = f();
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match res {
        Ok(o) => (o.pass && secs <= limit, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} criterion {idx} ({name}): {detail} [{secs:.1}s, limit {limit:.0}s]",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let results = [
        report(1, "stable width vs entropy", 900.0, || criterion1(&mut runs)),
        report(2, "entropy oracle", 60.0, criterion2),
        report(3, "diagonal counterexample", 30.0, criterion3),
        report(4, "extension engines", 120.0, criterion4),
        report(5, "operator-norm bounds", 120.0, criterion5),
        report(6, "sparse recovery", 600.0, criterion6),
        report(7, "finite-rank approximation", 180.0, criterion7),
        report(8, "covering bounds from widths", 60.0, || criterion8(&runs)),
        report(9, "stability probe", 60.0, || criterion9(&runs)),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
