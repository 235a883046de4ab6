//! Randomized invariants across modules.

use lipwidth::counterexample::{diag_decode, diag_encode, DiagMaps};
use lipwidth::csrecovery::{
    brute_sparse_decode, gaussian_matrix, l1_decode, op_norm_bracket, rip_check, L1_ITER_CAP, L1_TOL,
};
use lipwidth::extend::{lipschitz_audit, ExtensionStrategy, LipschitzMap, SampledLipschitzMap};
use lipwidth::interp::{kuhn_triangulate, pl_eval, PLInterpolant};
use lipwidth::nets::{entropy_bracket, exact_cover_radius, greedy_cover, greedy_packing, EXACT_COVER_LIMIT};
use lipwidth::rng::rng;
use lipwidth::spaces::{generate_diag_class, AlphaSequence, ClassLabel, Exponent, FiniteNormedSpace, ModelClassSurrogate};
use lipwidth::stablewidth::{build_stable_pair, carl_cover_bound, CarlInputs};
use proptest::prelude::*;
use rand::Rng;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::Infinity),
        Just(Exponent::Finite(1.0)),
        Just(Exponent::Finite(2.0)),
        (1.0f64..6.0).prop_map(Exponent::Finite),
    ]
}

/// A cloud of `2..=max` distinct points in `dim ≤ 4` dimensions.
fn cloud(max: usize) -> impl Strategy<Value = ModelClassSurrogate> {
    (1usize..=4, 2usize..=max, exponent(), any::<u64>()).prop_map(|(dim, count, p, seed)| {
        let mut r = rng(seed);
        let pts = (0..count)
            .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        ModelClassSurrogate::new(FiniteNormedSpace::new(dim, p).unwrap(), pts, 0.0, ClassLabel::Custom("cloud".into()))
            .unwrap()
    })
}

fn dist(k: &ModelClassSurrogate, x: &[f64], y: &[f64]) -> f64 {
    k.space().distance(x, y).unwrap()
}

/// Samples of a random map with the smallest valid constant.
fn sampled(
    seed: u64,
    count: usize,
    dom: FiniteNormedSpace,
    tgt: FiniteNormedSpace,
    strategy: ExtensionStrategy,
) -> SampledLipschitzMap {
    let mut r = rng(seed);
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..count)
        .map(|_| {
            let x = (0..dom.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
            let y = (0..tgt.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect();
    let mut gamma = 1e-3f64;
    for i in 0..count {
        for j in i + 1..count {
            let d = dom.distance(&samples[i].0, &samples[j].0).unwrap();
            gamma = gamma.max(tgt.distance(&samples[i].1, &samples[j].1).unwrap() / d);
        }
    }
    SampledLipschitzMap::new(dom, tgt, samples, gamma, strategy).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_sandwiches_exact_radius(k in cloud(EXACT_COVER_LIMIT)) {
        for n in 1..=3u32 {
            let m = 1usize << n;
            if m >= k.len() {
                break;
            }
            let b = entropy_bracket(&k, n).unwrap();
            let exact = exact_cover_radius(&k, m).unwrap();
            prop_assert!(b.lower <= exact + 1e-12 && exact <= b.upper + 1e-12, "{} {} {}", b.lower, exact, b.upper);
        }
    }

    #[test]
    fn brackets_are_monotone_and_valid(k in cloud(40)) {
        let mut prev: Option<(f64, f64)> = None;
        for n in 0..=5u32 {
            let b = entropy_bracket(&k, n).unwrap();
            prop_assert!(0.0 <= b.lower && b.lower <= b.upper);
            prop_assert!(b.cover_size() <= 1 << n);
            if b.lower > 0.0 {
                prop_assert_eq!(b.packing_witness.len(), (1 << n) + 1);
            }
            for x in k.points() {
                let near = b.cover_centers.iter().map(|c| dist(&k, x, c)).fold(f64::INFINITY, f64::min);
                prop_assert!(near <= b.upper + 1e-12);
            }
            if let Some((lo, up)) = prev {
                prop_assert!(b.lower <= lo + 1e-12 && b.upper <= up + 1e-12);
            }
            prev = Some((b.lower, b.upper));
        }
    }

    #[test]
    fn packing_covering_duality(k in cloud(30)) {
        for m in 2..=k.len() {
            let pack = greedy_packing(&k, m).unwrap();
            let cover = greedy_cover(&k, m - 1).unwrap();
            prop_assert!(pack.separation / 2.0 <= cover.radius + 1e-12);
            for x in k.points() {
                let near = cover.centers.iter().map(|c| dist(&k, x, c)).fold(f64::INFINITY, f64::min);
                prop_assert!(near <= cover.radius + 1e-12);
            }
        }
    }

    #[test]
    fn mcshane_interpolates_and_keeps_constant(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4, p in exponent()) {
        let dom = FiniteNormedSpace::new(din, p).unwrap();
        let map = sampled(seed, 15, dom, FiniteNormedSpace::linf(dout).unwrap(), ExtensionStrategy::McShane);
        for (x, y) in map.sample_inputs().iter().zip(map.sample_values()) {
            let v = map.eval(x).unwrap();
            prop_assert!(v.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
        let mut r = rng(seed ^ 1);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..500)
            .map(|_| {
                let a: Vec<f64> = (0..din).map(|_| r.random_range(-1.5..1.5)).collect();
                let b = a.iter().map(|v| v + r.random_range(-0.3..0.3)).collect();
                (a, b)
            })
            .collect();
        let audit = lipschitz_audit(&map, &pairs).unwrap();
        prop_assert!(audit.measured_constant <= map.gamma() * (1.0 + 1e-9));
    }

    #[test]
    fn kirszbraun_is_feasible(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4) {
        let l2 = |d| FiniteNormedSpace::l2(d).unwrap();
        let map = sampled(seed, 12, l2(din), l2(dout), ExtensionStrategy::Kirszbraun);
        let mut r = rng(seed ^ 2);
        for (x, y) in map.sample_inputs().iter().zip(map.sample_values()) {
            let v = map.eval(x).unwrap();
            prop_assert!(v.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-6));
        }
        for _ in 0..20 {
            let q: Vec<f64> = (0..din).map(|_| r.random_range(-2.0..2.0)).collect();
            let y = map.eval(&q).unwrap();
            prop_assert!(map.feasibility_residual(&q, &y) <= map.tol());
        }
    }

    #[test]
    fn kirszbraun_scalar_in_interval(seed in any::<u64>(), q in -2.0f64..2.0) {
        let l1 = FiniteNormedSpace::l2(1).unwrap();
        let map = sampled(seed, 8, l1, l1, ExtensionStrategy::Kirszbraun);
        let g = map.gamma();
        let (lo, hi) = map.sample_inputs().iter().zip(map.sample_values()).fold(
            (f64::NEG_INFINITY, f64::INFINITY),
            |(lo, hi), (x, f)| (lo.max(f[0] - g * (q - x[0]).abs()), hi.min(f[0] + g * (q - x[0]).abs())),
        );
        let y = map.eval(&[q]).unwrap()[0];
        prop_assert!(lo - 1e-6 <= y && y <= hi + 1e-6, "{lo} {y} {hi}");
    }

    #[test]
    fn carl_exponent_is_monotone(
        deltas in prop::collection::vec(0.0f64..2.0, 1..40),
        e1 in 0.01f64..3.0,
        e2 in 0.01f64..3.0,
    ) {
        let inputs = CarlInputs::new(deltas, 2.0, 1.0).unwrap();
        prop_assert!(inputs.delta_sequence.windows(2).all(|w| w[1] <= w[0]));
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = carl_cover_bound(&inputs, lo, 1.0).unwrap();
        let b = carl_cover_bound(&inputs, hi, 1.0).unwrap();
        prop_assert!(b.log_a_bound() <= a.log_a_bound());
    }

    #[test]
    fn rip_order_one_is_column_deviation(seed in any::<u64>(), n in 5usize..20, extra in 0usize..20) {
        let big_n = n + extra;
        let phi = gaussian_matrix(n, big_n, seed).unwrap();
        let dev = (0..big_n).map(|j| (phi.column_norm(j) - 1.0).abs()).fold(0.0, f64::max);
        let cert = rip_check(&phi, 1, 0, seed).unwrap();
        prop_assert!((cert.delta - dev).abs() <= 1e-12);
    }

    #[test]
    fn norm_brackets_are_ordered(seed in any::<u64>(), p in 1.0f64..=2.0) {
        let phi = gaussian_matrix(8, 16, seed).unwrap();
        let b = op_norm_bracket(&phi, p, seed).unwrap();
        prop_assert!(b.lower <= b.upper * (1.0 + 1e-12));
        for q in [1.0, 2.0] {
            let b = op_norm_bracket(&phi, q, seed).unwrap();
            prop_assert!(b.upper - b.lower <= 1e-8 * b.upper);
        }
    }

    #[test]
    fn pl_interpolant_is_continuous(seed in any::<u64>(), n in 1usize..4, s in 2u64..6) {
        let mesh = kuhn_triangulate(n, 1.0, s).unwrap();
        let f = PLInterpolant::from_fn(mesh, vec![0.0], |x: &[f64]| {
            vec![x.iter().enumerate().map(|(i, v)| ((i + 1) as f64 * v).sin()).sum()]
        })
        .unwrap();
        let mut r = rng(seed);
        for _ in 0..50 {
            // a point on an interior cell face: one coordinate on a grid line
            let mut x: Vec<f64> = (0..n).map(|_| r.random_range(-0.9..0.9)).collect();
            let axis = r.random_range(0..n);
            let line = r.random_range(1..s) as f64;
            x[axis] = -1.0 + line * mesh.h;
            let (mut a, mut b) = (x.clone(), x.clone());
            a[axis] -= 1e-13;
            b[axis] += 1e-13;
            let (fa, fb) = (pl_eval(&f, &a)[0], pl_eval(&f, &b)[0]);
            prop_assert!((fa - fb).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn l1_matches_brute_force(seed in any::<u64>()) {
        let phi = gaussian_matrix(12, 20, seed).unwrap();
        let mut r = rng(seed ^ 3);
        let mut x = vec![0.0; 20];
        for _ in 0..2 {
            x[r.random_range(0..20)] = r.random_range(-1.0..1.0);
        }
        let y = phi.apply(&x);
        let brute = brute_sparse_decode(&phi, &y, 2).unwrap();
        let l1 = l1_decode(&phi, &y, L1_TOL, L1_ITER_CAP).unwrap();
        let gap = brute.iter().zip(&l1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let brute_err = brute.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // only instances where the oracle recovers the planted signal
        prop_assume!(brute_err <= 1e-9);
        prop_assert!(gap <= 1e-6, "gap {gap}");
    }

    #[test]
    fn stable_pair_reproduces_net(r in 1.0f64..3.0, n in 1u32..4, seed in any::<u64>()) {
        let class = generate_diag_class(&AlphaSequence::new(r).unwrap(), 32).unwrap();
        let pair = build_stable_pair(&class, n, seed).unwrap();
        prop_assert_eq!(pair.parameter_dim(), 26 * n as usize);
        for c in &pair.net.centers {
            let code = pair.encoder.eval(c).unwrap();
            let back = pair.decoder.eval(&code).unwrap();
            let err = back.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 10.0 * pair.decoder.tol());
        }
    }

    #[test]
    fn diag_maps_recover_leading_atoms(r in 0.5f64..3.0, k in 1usize..12) {
        let alpha = AlphaSequence::new(r).unwrap();
        let m = 16;
        let maps = DiagMaps::new(k, alpha, m).unwrap();
        for j in 1..=m {
            let mut atom = vec![0.0; m];
            atom[j - 1] = alpha.alpha(j);
            let t = diag_encode(&maps, &atom).unwrap();
            prop_assert_eq!(t, alpha.alpha(j.min(k)));
            let back = diag_decode(&maps, t);
            if j <= k {
                prop_assert_eq!(&back, &atom);
            } else {
                let err = back.iter().zip(&atom).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let want = (alpha.alpha(j).powi(2) + alpha.alpha(k).powi(2)).sqrt();
                prop_assert!((err - want).abs() <= 1e-12);
                prop_assert!(err < 2f64.sqrt() * alpha.alpha(k));
            }
        }
        prop_assert_eq!(diag_decode(&maps, -0.1), vec![0.0; m]);
        let mut e1 = vec![0.0; m];
        e1[0] = alpha.alpha(1);
        prop_assert_eq!(diag_decode(&maps, alpha.alpha(1) + 1.0), e1);
    }
}
