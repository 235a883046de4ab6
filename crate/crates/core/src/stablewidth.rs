//! Lipschitz-stable encoder/decoder pairs for Hilbert-space classes, width
//! measurements, and the covering recursion that turns widths into entropy
//! bounds.
//!
//! The pair for budget `n` is built from a `2ⁿ`-point net `{f_j}` of the
//! class and a linear map `T` into `ℓ₂^{26n}` with
//! `½‖f_i − f_j‖ ≤ ‖Tf_i − Tf_j‖ ≤ ‖f_i − f_j‖` on the net. The encoder
//! extends `f_j ↦ Tf_j` with constant 1 and the decoder extends
//! `Tf_j ↦ f_j` with constant 2, both by Kirszbraun. Every class point is
//! within `ε` of a net point, so each is recovered to within `3ε`.
//!
//! Pointwise Kirszbraun values are not jointly consistent across queries, so
//! widths are measured on a [`RealizedPair`]: the extensions are grown one
//! test point at a time, and every later evaluation sees the earlier ones as
//! samples.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extend::{audit_values, sample_index_pairs, ExtensionStrategy, LipschitzMap, SampledLipschitzMap};
use crate::nets::{entropy_bracket, greedy_cover, EntropyBracket, Net};
use crate::rng::{self, derive_seed};
use crate::spaces::{dist2, lp_norm, Exponent, FiniteNormedSpace, ModelClassSurrogate};

/// Distortion used for the projection; `jl_dim(0.6) = 26`.
pub const JL_DISTORTION: f64 = 0.6;
pub const JL_RETRY_CAP: usize = 32;
pub const GAMMA_ENCODER: f64 = 1.0;
pub const GAMMA_DECODER: f64 = 2.0;
const MAX_BUDGET: u32 = 40;

/// Smallest integer `c ≥ 4 ln 2 / (ε²/2 − ε³/3)`: parameters per budget unit
/// that make a random projection of `2ⁿ` points a `(1 ± ε)` embedding.
pub fn jl_dim(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("distortion {eps} not in (0, 1)")));
    }
    let c = 4.0 * std::f64::consts::LN_2 / (eps * eps / 2.0 - eps * eps * eps / 3.0);
    Ok(c.ceil() as usize)
}

/// A linear map `ℝ^dim → ℓ₂^target`, stored as a `target × dim` matrix.
#[derive(Debug, Clone)]
pub struct JlMap {
    pub matrix: DMatrix<f64>,
}

impl JlMap {
    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|i| x.iter().enumerate().map(|(j, v)| self.matrix[(i, j)] * v).sum())
            .collect()
    }
}

/// Ratios `‖Tf_i − Tf_j‖ / ‖f_i − f_j‖` over all pairs, as (min, max).
fn ratio_range(t: &JlMap, points: &[Vec<f64>]) -> (f64, f64) {
    let images: Vec<Vec<f64>> = points.iter().map(|p| t.apply(p)).collect();
    let n = points.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n).fold((f64::INFINITY, 0.0f64), |(lo, hi), j| {
                let r = dist2(&images[i], &images[j]) / dist2(&points[i], &points[j]);
                (lo.min(r), hi.max(r))
            })
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

/// Gaussian projection into `ℓ₂^target_dim`, rescaled so the largest pair
/// ratio is exactly 1, accepted once the smallest is at least ½. Attempt `i`
/// uses seed `derive_seed(seed, i)`; the first success is returned.
pub fn jl_project(points: &[Vec<f64>], target_dim: usize, seed: u64, retry_cap: usize) -> Result<JlMap> {
    if target_dim == 0 {
        return Err(Error::InvalidParameter("target dimension must be positive".into()));
    }
    let dim = points.first().map_or(0, Vec::len);
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidParameter("points of mixed dimension".into()));
    }
    let scale = (target_dim as f64).sqrt().recip();
    let mut best = 0.0f64;
    for attempt in 0..retry_cap.max(1) {
        let mut rng = rng::rng(derive_seed(seed, attempt as u64));
        let mut t = JlMap {
            matrix: DMatrix::from_fn(target_dim, dim, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            }),
        };
        if points.len() < 2 {
            return Ok(t);
        }
        let (_, hi) = ratio_range(&t, points);
        if hi == 0.0 {
            continue;
        }
        t.matrix /= hi;
        let (lo, hi) = ratio_range(&t, points);
        best = best.max(lo);
        if lo >= 0.5 && hi <= 1.0 + 1e-12 {
            return Ok(t);
        }
    }
    Err(Error::JlRetriesExhausted {
        attempts: retry_cap.max(1),
        worst: best,
    })
}

/// Encoder `a`, decoder `M` and the data they were built from.
#[derive(Debug, Clone)]
pub struct EncoderDecoderPair {
    pub encoder: SampledLipschitzMap,
    pub decoder: SampledLipschitzMap,
    pub net: Net,
    pub jl: JlMap,
    pub n: u32,
    pub gamma_a: f64,
    pub gamma_m: f64,
}

impl EncoderDecoderPair {
    pub fn parameter_dim(&self) -> usize {
        self.jl.target_dim()
    }
}

pub fn build_stable_pair(k: &ModelClassSurrogate, n: u32, seed: u64) -> Result<EncoderDecoderPair> {
    if !k.space().is_hilbert() {
        return Err(Error::InvalidParameter("stable pairs need an l2 class".into()));
    }
    if n == 0 || n > MAX_BUDGET {
        return Err(Error::InvalidParameter(format!("budget {n} not in 1..={MAX_BUDGET}")));
    }
    let size = 1usize << n;
    if size > k.len() {
        return Err(Error::TooFewPoints {
            requested: size,
            available: k.len(),
        });
    }
    let net = greedy_cover(k, size)?;
    let target = jl_dim(JL_DISTORTION)? * n as usize;
    let jl = jl_project(&net.centers, target, seed, JL_RETRY_CAP)?;
    let codes: Vec<Vec<f64>> = net.centers.iter().map(|c| jl.apply(c)).collect();
    let param = FiniteNormedSpace::l2(target)?;
    let encoder = SampledLipschitzMap::new(
        *k.space(),
        param,
        net.centers.iter().cloned().zip(codes.iter().cloned()).collect(),
        GAMMA_ENCODER,
        ExtensionStrategy::Kirszbraun,
    )?;
    let decoder = SampledLipschitzMap::new(
        param,
        *k.space(),
        codes.into_iter().zip(net.centers.iter().cloned()).collect(),
        GAMMA_DECODER,
        ExtensionStrategy::Kirszbraun,
    )?;
    Ok(EncoderDecoderPair {
        encoder,
        decoder,
        net,
        jl,
        n,
        gamma_a: GAMMA_ENCODER,
        gamma_m: GAMMA_DECODER,
    })
}

/// A pair whose extensions have been fixed on a test set.
#[derive(Debug, Clone)]
pub struct RealizedPair {
    pub encoder: SampledLipschitzMap,
    pub decoder: SampledLipschitzMap,
    pub inputs: Vec<Vec<f64>>,
    pub codes: Vec<Vec<f64>>,
    pub reconstructions: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
}

impl RealizedPair {
    pub fn sup_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

pub fn realize(pair: &EncoderDecoderPair, k_test: &ModelClassSurrogate) -> Result<RealizedPair> {
    if k_test.space().dim() != pair.encoder.domain().dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.encoder.domain().dim(),
            got: k_test.space().dim(),
        });
    }
    let inputs = k_test.points().to_vec();
    let (encoder, codes) = pair.encoder.extend_sequentially(&inputs)?;
    let (decoder, reconstructions) = pair.decoder.extend_sequentially(&codes)?;
    let space = *pair.encoder.domain();
    let errors = inputs
        .par_iter()
        .zip(&reconstructions)
        .map(|(f, g)| space.distance(f, g))
        .collect::<Result<_>>()?;
    Ok(RealizedPair {
        encoder,
        decoder,
        inputs,
        codes,
        reconstructions,
        errors,
    })
}

#[derive(Debug, Clone)]
pub struct WidthReport {
    pub n: u32,
    pub sup_error: f64,
    pub lip_a_measured: f64,
    pub lip_m_measured: f64,
    pub entropy: EntropyBracket,
    pub cover_size: usize,
    pub test_count: usize,
    pub seed: u64,
}

/// Realizes `pair` on `k_test`, then reports the worst recovery error and
/// Lipschitz audits of `a` and `M` over `pair_samples` random test pairs.
pub fn evaluate_width(
    pair: &EncoderDecoderPair,
    k_test: &ModelClassSurrogate,
    pair_samples: usize,
    seed: u64,
) -> Result<(WidthReport, RealizedPair)> {
    let realized = realize(pair, k_test)?;
    let pairs: Vec<(usize, usize)> = sample_index_pairs(k_test.len(), pair_samples, seed)
        .into_iter()
        .filter(|&(i, j)| realized.codes[i] != realized.codes[j])
        .collect();
    let (lip_a, lip_m) = if pairs.is_empty() {
        (0.0, 0.0)
    } else {
        let a = audit_values(
            pair.encoder.domain(),
            pair.encoder.target(),
            &realized.inputs,
            &realized.codes,
            &pairs,
        )?;
        let m = audit_values(
            pair.decoder.domain(),
            pair.decoder.target(),
            &realized.codes,
            &realized.reconstructions,
            &pairs,
        )?;
        (a.measured_constant, m.measured_constant)
    };
    let report = WidthReport {
        n: pair.n,
        sup_error: realized.sup_error(),
        lip_a_measured: lip_a,
        lip_m_measured: lip_m,
        entropy: entropy_bracket(k_test, pair.n)?,
        cover_size: pair.net.len(),
        test_count: k_test.len(),
        seed,
    };
    Ok((report, realized))
}

/// Largest distance from a class point to its best rank-`n` linear subspace
/// approximation (principal right singular vectors of the point matrix).
pub fn hilbert_linear_baseline(k: &ModelClassSurrogate, n: usize) -> Result<f64> {
    if !k.space().is_hilbert() {
        return Err(Error::InvalidParameter("linear baseline needs an l2 class".into()));
    }
    let dim = k.space().dim();
    if n >= dim || k.is_empty() {
        return Ok(0.0);
    }
    let x = DMatrix::from_fn(k.len(), dim, |i, j| k.points()[i][j]);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidParameter("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let basis: Vec<Vec<f64>> = order.iter().take(n).map(|&r| v_t.row(r).iter().copied().collect()).collect();
    Ok(k.points()
        .par_iter()
        .map(|p| {
            let mut res = p.clone();
            for v in &basis {
                let c: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
                for (r, b) in res.iter_mut().zip(v) {
                    *r -= c * b;
                }
            }
            lp_norm(&res, Exponent::Finite(2.0))
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct ProbeRecord {
    pub eta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Number of perturbation directions tried per probe; the worst is kept.
pub const PROBE_DIRECTIONS: usize = 16;
const PROBE_SLACK: f64 = 1e-9;

/// Perturbs the code of `g` by `eta` and checks how far the decoded value
/// lands from `f`: `‖f − M(y′)‖ ≤ 2E + η + γ_M η^β`, with `E` the realized sup
/// error. `y′` ranges over random points of the `eta`-sphere around `a(g)`.
pub fn stability_probe(
    realized: &RealizedPair,
    f: &[f64],
    g: &[f64],
    eta: f64,
    beta: f64,
    seed: u64,
) -> Result<ProbeRecord> {
    let space = *realized.encoder.domain();
    let fg = space.distance(f, g)?;
    if !(eta >= 0.0) || fg > eta * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("perturbation {eta} is below ‖f − g‖ = {fg}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent {beta} not in (0, 1]")));
    }
    let ag = realized.encoder.eval(g)?;
    let mut rng = rng::rng(seed);
    let dirs = if eta == 0.0 { 1 } else { PROBE_DIRECTIONS };
    let mut lhs = 0.0f64;
    for _ in 0..dirs {
        let u: Vec<f64> = (0..ag.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nu = lp_norm(&u, Exponent::Finite(2.0));
        let y: Vec<f64> = ag.iter().zip(&u).map(|(a, v)| a + eta * v / nu).collect();
        let m = realized.decoder.eval(&y)?;
        lhs = lhs.max(space.distance(f, &m)?);
    }
    let rhs = 2.0 * realized.sup_error() + eta + realized.decoder.gamma() * eta.powf(beta);
    Ok(ProbeRecord {
        eta,
        lhs,
        rhs,
        holds: lhs <= rhs + PROBE_SLACK,
    })
}

/// `trials` probes on random test pairs `(f, g)` with
/// `η = max(U(0, 0.1], ‖f − g‖)`.
pub fn stability_trials(realized: &RealizedPair, trials: usize, seed: u64) -> Result<Vec<ProbeRecord>> {
    let n = realized.inputs.len();
    if n == 0 {
        return Err(Error::Empty("test set"));
    }
    let mut rng = rng::rng(seed);
    let setups: Vec<(usize, usize, f64)> = (0..trials)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let eta = 0.1 * (1.0 - rng.random::<f64>());
            (i, j, eta)
        })
        .collect();
    setups
        .par_iter()
        .enumerate()
        .map(|(t, &(i, j, eta))| {
            let f = &realized.inputs[i];
            let g = &realized.inputs[j];
            let eta = eta.max(dist2(f, g));
            stability_probe(realized, f, g, eta, 1.0, derive_seed(seed, t as u64 + 1))
        })
        .collect()
}

/// Measured widths `δ_m` for `m = 0, 1, …`, made nonincreasing.
#[derive(Debug, Clone)]
pub struct CarlInputs {
    pub delta_sequence: Vec<f64>,
    pub gamma: f64,
    pub r: f64,
}

impl CarlInputs {
    /// Replaces `δ_m` by `min_{m′ ≤ m} δ_{m′}`: a pair with fewer parameters
    /// is also admissible with more.
    pub fn new(delta: Vec<f64>, gamma: f64, r: f64) -> Result<Self> {
        if delta.is_empty() {
            return Err(Error::Empty("width sequence"));
        }
        if delta.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidParameter("widths must be nonnegative".into()));
        }
        if !(gamma > 0.0) || !(r > 0.0) {
            return Err(Error::InvalidParameter("gamma and r must be positive".into()));
        }
        let mut run = f64::INFINITY;
        let delta_sequence = delta
            .into_iter()
            .map(|d| {
                run = run.min(d);
                run
            })
            .collect();
        Ok(Self { delta_sequence, gamma, r })
    }

    /// Step-function widths from pairs with `params_per_n · n` parameters:
    /// `δ_m` is the best sup error among budgets that fit in `m` parameters,
    /// and `radius` (a constant decoder) where none fits.
    pub fn from_budget_widths(
        widths: &[(u32, f64)],
        params_per_n: usize,
        radius: f64,
        m_max: usize,
        gamma: f64,
        r: f64,
    ) -> Result<Self> {
        let delta = (0..=m_max)
            .map(|m| {
                widths
                    .iter()
                    .filter(|(n, _)| params_per_n * *n as usize <= m)
                    .map(|&(_, e)| e)
                    .fold(radius, f64::min)
            })
            .collect();
        Self::new(delta, gamma, r)
    }

    /// `A = 1 + 16γ²`.
    pub fn base(&self) -> f64 {
        1.0 + 16.0 * self.gamma * self.gamma
    }
}

/// Least `m` with `δ_m ≤ eps`.
pub fn phi_of_eps(inputs: &CarlInputs, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps {eps} must be positive")));
    }
    inputs
        .delta_sequence
        .iter()
        .position(|&d| d <= eps)
        .ok_or(Error::PhiUndefined {
            eps,
            min: inputs.delta_sequence.iter().copied().fold(f64::INFINITY, f64::min),
        })
}

#[derive(Debug, Clone)]
pub struct CarlBound {
    pub a: f64,
    pub levels: u32,
    /// `Σ_{k=1}^{L} φ(2^k ε/8)`; `None` when some `φ` is undefined.
    pub exponent: Option<u64>,
}

impl CarlBound {
    /// Bound on `log_A N(ε)`.
    pub fn log_a_bound(&self) -> f64 {
        self.exponent.map_or(f64::INFINITY, |e| e as f64)
    }
}

/// `N(ε) ≤ A^{Σ_{k=1}^{L} φ(2^k ε/8)}` with `L ≥ 1` least such that
/// `2^L ε ≥ R`.
pub fn carl_cover_bound(inputs: &CarlInputs, eps: f64, radius: f64) -> Result<CarlBound> {
    if !(eps > 0.0) || !(radius >= 0.0) {
        return Err(Error::InvalidParameter("eps must be positive and the radius nonnegative".into()));
    }
    let mut levels = 1u32;
    while (levels as f64).exp2() * eps < radius {
        levels += 1;
    }
    let mut exponent = Some(0u64);
    for k in 1..=levels {
        match phi_of_eps(inputs, (k as f64).exp2() * eps / 8.0) {
            Ok(phi) => exponent = exponent.map(|e| e + phi as u64),
            Err(Error::PhiUndefined { .. }) => exponent = None,
            Err(e) => return Err(e),
        }
    }
    Ok(CarlBound {
        a: inputs.base(),
        levels,
        exponent,
    })
}

#[derive(Debug, Clone)]
pub struct CarlRateReport {
    /// `max_m (m+1)^r δ_m`.
    pub lambda: f64,
    /// Least `C` with `ε_n^{lower} ≤ C (n+1)^{-r} Λ` for every bracket;
    /// `+∞` when `Λ = 0` but some lower bound is positive.
    pub c: f64,
    pub worst_n: Option<u32>,
}

pub fn carl_rate_check(inputs: &CarlInputs, entropy_series: &[EntropyBracket]) -> Result<CarlRateReport> {
    if entropy_series.is_empty() {
        return Err(Error::Empty("entropy series"));
    }
    let r = inputs.r;
    let lambda = inputs
        .delta_sequence
        .iter()
        .enumerate()
        .map(|(m, d)| (m as f64 + 1.0).powf(r) * d)
        .fold(0.0, f64::max);
    let mut c = 0.0f64;
    let mut worst_n = None;
    for b in entropy_series {
        if b.lower <= 0.0 {
            continue;
        }
        let need = if lambda > 0.0 {
            b.lower * (b.n as f64 + 1.0).powf(r) / lambda
        } else {
            f64::INFINITY
        };
        if need > c {
            c = need;
            worst_n = Some(b.n);
        }
    }
    Ok(CarlRateReport { lambda, c, worst_n })
}

/// Largest `‖a(f)‖ / ‖f‖` over nonzero test points: boundedness of the
/// realized encoder.
pub fn encoder_bound(realized: &RealizedPair) -> f64 {
    realized
        .inputs
        .iter()
        .zip(&realized.codes)
        .filter_map(|(f, c)| {
            let nf = lp_norm(f, Exponent::Finite(2.0));
            (nf > 0.0).then(|| lp_norm(c, Exponent::Finite(2.0)) / nf)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{generate_diag_class, generate_kq, AlphaSequence};

    #[test]
    fn jl_dim_values() {
        assert_eq!(jl_dim(0.6).unwrap(), 26);
        assert_eq!(jl_dim(0.5).unwrap(), 34);
        assert_eq!(jl_dim(1.0 - 1e-9).unwrap(), 17);
        assert!(jl_dim(0.0).is_err());
        assert!(jl_dim(1.0).is_err());
    }

    #[test]
    fn jl_post_condition() {
        let k = generate_kq(20, Exponent::Finite(2.0), 8, 3).unwrap();
        let t = jl_project(k.points(), 78, 1, 32).unwrap();
        let pts = k.points();
        for i in 0..8 {
            for j in i + 1..8 {
                let r = dist2(&t.apply(&pts[i]), &t.apply(&pts[j])) / dist2(&pts[i], &pts[j]);
                assert!((0.5..=1.0 + 1e-12).contains(&r), "{r}");
            }
        }
        let single = jl_project(&pts[..1], 5, 1, 1).unwrap();
        assert_eq!(single.target_dim(), 5);
    }

    #[test]
    fn jl_failure_reports() {
        // many points into one dimension cannot keep the lower bound
        let k = generate_kq(10, Exponent::Finite(2.0), 40, 3).unwrap();
        assert!(matches!(
            jl_project(k.points(), 1, 0, 3),
            Err(Error::JlRetriesExhausted { attempts: 3, .. })
        ));
    }

    #[test]
    fn pair_is_exact_on_net() {
        let k = generate_diag_class(&AlphaSequence::new(2.0).unwrap(), 16).unwrap();
        let pair = build_stable_pair(&k, 2, 7).unwrap();
        assert_eq!(pair.parameter_dim(), 52);
        for c in &pair.net.centers {
            let y = pair.encoder.eval(c).unwrap();
            let back = pair.decoder.eval(&y).unwrap();
            assert!(dist2(&back, c) <= 10.0 * pair.decoder.tol());
        }
    }

    #[test]
    fn width_on_diag_class() {
        let k = generate_diag_class(&AlphaSequence::new(2.0).unwrap(), 16).unwrap();
        let pair = build_stable_pair(&k, 2, 7).unwrap();
        let (report, _) = evaluate_width(&pair, &k, 2000, 1).unwrap();
        assert!(report.sup_error <= 3.0 * report.entropy.upper);
        assert!(report.lip_a_measured <= 1.0 + 1e-6);
        assert!(report.lip_m_measured <= 2.0 + 1e-6);
    }

    #[test]
    fn full_net_recovers_everything() {
        let k = generate_kq(4, Exponent::Finite(1.0), 8, 2).unwrap();
        let pair = build_stable_pair(&k, 3, 0).unwrap();
        let (report, _) = evaluate_width(&pair, &k, 100, 0).unwrap();
        assert!(report.sup_error <= 1e-7);
    }

    #[test]
    fn baseline_examples() {
        let k = generate_diag_class(&AlphaSequence::new(2.0).unwrap(), 4).unwrap();
        assert!((hilbert_linear_baseline(&k, 1).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(hilbert_linear_baseline(&k, 4).unwrap(), 0.0);
        let sp = FiniteNormedSpace::l2(3).unwrap();
        let flat = ModelClassSurrogate::new(
            sp,
            vec![vec![1.0, 1.0, 0.0], vec![-2.0, -2.0, 0.0], vec![0.5, 0.5, 0.0]],
            0.0,
            crate::spaces::ClassLabel::Custom("line".into()),
        )
        .unwrap();
        assert!(hilbert_linear_baseline(&flat, 1).unwrap() < 1e-12);
    }

    #[test]
    fn probe_reduces_to_sup_error() {
        let k = generate_diag_class(&AlphaSequence::new(2.0).unwrap(), 16).unwrap();
        let pair = build_stable_pair(&k, 2, 7).unwrap();
        let realized = realize(&pair, &k).unwrap();
        let f = &k.points()[5];
        let rec = stability_probe(&realized, f, f, 0.0, 1.0, 0).unwrap();
        assert!(rec.lhs <= realized.sup_error() + 1e-12);
        assert!(rec.holds);
        assert!(stability_probe(&realized, f, &k.points()[0], 0.01, 1.0, 0).is_err());
        assert!(stability_trials(&realized, 50, 3).unwrap().iter().all(|r| r.holds));
    }

    #[test]
    fn phi_examples() {
        let geo = CarlInputs::new((0..20).map(|m| 0.5f64.powi(m)).collect(), 1.0, 1.0).unwrap();
        assert_eq!(phi_of_eps(&geo, 0.3).unwrap(), 2);
        assert_eq!(phi_of_eps(&geo, 1.0).unwrap(), 0);
        assert!(matches!(phi_of_eps(&geo, 1e-9), Err(Error::PhiUndefined { .. })));
        let harm = CarlInputs::new((0..20).map(|m| 1.0 / (m as f64 + 1.0)).collect(), 1.0, 1.0).unwrap();
        assert_eq!(phi_of_eps(&harm, 0.25).unwrap(), 3);
    }

    #[test]
    fn isotonic_cleanup() {
        let c = CarlInputs::new(vec![1.0, 0.5, 0.7, 0.2], 1.0, 1.0).unwrap();
        assert_eq!(c.delta_sequence, vec![1.0, 0.5, 0.5, 0.2]);
        let steps = CarlInputs::from_budget_widths(&[(1, 0.4), (2, 0.1)], 26, 1.0, 60, 1.0, 1.0).unwrap();
        assert_eq!(steps.delta_sequence[25], 1.0);
        assert_eq!(steps.delta_sequence[26], 0.4);
        assert_eq!(steps.delta_sequence[52], 0.1);
    }

    #[test]
    fn cover_bound_examples() {
        let c = CarlInputs::new((0..40).map(|m| 0.5f64.powi(m)).collect(), 1.0, 1.0).unwrap();
        assert_eq!(c.base(), 17.0);
        let c2 = CarlInputs::new(vec![1.0], 2.0, 1.0).unwrap();
        assert_eq!(c2.base(), 65.0);
        let single = carl_cover_bound(&c, 2.0, 1.0).unwrap();
        assert_eq!(single.levels, 1);
        assert_eq!(single.exponent, Some(phi_of_eps(&c, 0.5).unwrap() as u64));
        // nonincreasing in eps
        let mut last = u64::MAX;
        for i in 1..60 {
            let b = carl_cover_bound(&c, 0.01 * i as f64, 1.0).unwrap();
            let e = b.exponent.unwrap();
            assert!(e <= last);
            last = e;
        }
        let undefined = carl_cover_bound(&c, 1e-15, 1.0).unwrap();
        assert_eq!(undefined.log_a_bound(), f64::INFINITY);
    }

    #[test]
    fn rate_check_degenerate_cases() {
        let zero = CarlInputs::new(vec![0.0; 5], 1.0, 1.0).unwrap();
        let br = |n, lower| EntropyBracket {
            n,
            lower,
            upper: 2.0 * lower,
            packing_witness: vec![],
            cover_centers: vec![],
        };
        assert_eq!(carl_rate_check(&zero, &[br(1, 0.3)]).unwrap().c, f64::INFINITY);
        assert_eq!(carl_rate_check(&zero, &[br(1, 0.0)]).unwrap().c, 0.0);
        let harm = CarlInputs::new((0..10).map(|m| 1.0 / (m as f64 + 1.0)).collect(), 1.0, 1.0).unwrap();
        let rep = carl_rate_check(&harm, &[br(1, 0.25), br(3, 0.2)]).unwrap();
        assert_eq!(rep.lambda, 1.0);
        assert!((rep.c - 0.8).abs() < 1e-12);
        assert_eq!(rep.worst_n, Some(3));
    }
}
