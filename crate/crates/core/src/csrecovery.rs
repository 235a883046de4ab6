//! Compressed sensing: Gaussian sensing matrices, restricted isometry
//! audits, `ℓ_p → ℓ₂` operator norm brackets, ℓ₁ decoding, and a Lipschitz
//! encoder/decoder pair on a net of sparse vectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::combinations::{binomial, for_each_combination};
use crate::error::{Error, Result};
use crate::extend::{ExtensionStrategy, LipschitzMap, SampledLipschitzMap};
use crate::rng::{self, derive_seed};
use crate::spaces::{dist2, lp_norm, Exponent, FiniteNormedSpace, ModelClassSurrogate};

pub const RIP_EXHAUSTIVE_LIMIT: u128 = 1_000_000;
pub const RIP_SAMPLED_SUPPORTS: usize = 1_000;
pub const BRUTE_LIMIT: u128 = 100_000;
pub const L1_PENALTY: f64 = 1.0;
pub const L1_TOL: f64 = 1e-8;
pub const L1_ITER_CAP: usize = 20_000;

/// `Φ ∈ ℝ^{n×N}`.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    pub entries: DMatrix<f64>,
    pub seed: Option<u64>,
}

impl SensingMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() > entries.ncols() {
            return Err(Error::InvalidParameter("need 1 <= n <= N".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry".into()));
        }
        Ok(Self { entries, seed: None })
    }

    /// Number of measurements `n`.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }
    /// Ambient dimension `N`.
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.entries * DVector::from_column_slice(x)).iter().copied().collect()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.entries.column(j).norm()
    }

    fn submatrix(&self, support: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), support.len(), |i, j| self.entries[(i, support[j])])
    }
}

/// i.i.d. `N(0, 1/n)` entries.
pub fn gaussian_matrix(n: usize, big_n: usize, seed: u64) -> Result<SensingMatrix> {
    if n == 0 || n > big_n {
        return Err(Error::InvalidParameter(format!("need 1 <= n <= N, got n={n}, N={big_n}")));
    }
    let mut rng = rng::rng(seed);
    let s = (n as f64).sqrt().recip();
    let entries = DMatrix::from_fn(n, big_n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * s
    });
    Ok(SensingMatrix {
        entries,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone)]
pub struct RipCertificate {
    pub k: usize,
    pub delta: f64,
    pub exhaustive: bool,
    pub supports_checked: usize,
}

/// `max(1 − σ_min, σ_max − 1)` for the columns in `support`.
fn support_distortion(phi: &SensingMatrix, support: &[usize]) -> f64 {
    match support {
        [] => 0.0,
        [j] => (phi.column_norm(*j) - 1.0).abs(),
        _ => {
            if support.len() > phi.rows() {
                // rank deficient: σ_min = 0
                let sub = phi.submatrix(support);
                let smax = sub.singular_values().max();
                return 1.0f64.max(smax - 1.0);
            }
            let sub = phi.submatrix(support);
            let eig = SymmetricEigen::new(sub.transpose() * &sub).eigenvalues;
            let smin = eig.min().max(0.0).sqrt();
            let smax = eig.max().max(0.0).sqrt();
            (1.0 - smin).max(smax - 1.0)
        }
    }
}

/// Distortion over the given supports.
pub fn rip_check_supports(phi: &SensingMatrix, supports: &[Vec<usize>]) -> Result<f64> {
    if supports.iter().flatten().any(|&j| j >= phi.cols()) {
        return Err(Error::InvalidParameter("support index out of range".into()));
    }
    Ok(supports
        .par_iter()
        .map(|s| support_distortion(phi, s))
        .reduce(|| 0.0, f64::max))
}

/// All `k`-subsets when there are at most 10⁶ of them, otherwise
/// `sample_count` random ones.
pub fn rip_check(phi: &SensingMatrix, k: usize, sample_count: usize, seed: u64) -> Result<RipCertificate> {
    if k == 0 || k > phi.cols() {
        return Err(Error::InvalidParameter(format!("order {k} not in 1..={}", phi.cols())));
    }
    let exhaustive = binomial(phi.cols(), k) <= RIP_EXHAUSTIVE_LIMIT;
    let supports = if exhaustive {
        let mut all = Vec::new();
        for_each_combination(phi.cols(), k, |c| {
            all.push(c.to_vec());
            true
        });
        all
    } else {
        random_supports(phi.cols(), k, sample_count, seed)
    };
    Ok(RipCertificate {
        k,
        delta: rip_check_supports(phi, &supports)?,
        exhaustive,
        supports_checked: supports.len(),
    })
}

fn random_supports(big_n: usize, k: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng::rng(seed);
    (0..count)
        .map(|_| {
            let mut s = index::sample(&mut rng, big_n, k).into_vec();
            s.sort_unstable();
            s
        })
        .collect()
}

/// Bracket on `‖Φ‖_{ℓ_p^N → ℓ₂^n}`.
#[derive(Debug, Clone, Copy)]
pub struct NormBracket {
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
}

fn norm_1_to_2(phi: &SensingMatrix) -> f64 {
    (0..phi.cols()).map(|j| phi.column_norm(j)).fold(0.0, f64::max)
}

/// Power iteration on `ΦᵀΦ` from the all-ones vector; returns a lower bound
/// on `‖Φ‖₂→₂` and its maximizing direction. Stops once the eigen-residual
/// `‖ΦᵀΦv − (vᵀΦᵀΦv)v‖` drops below `rel_tol` times the Rayleigh quotient.
fn power_iteration(phi: &SensingMatrix, rel_tol: f64, cap: usize) -> (f64, DVector<f64>) {
    let a = &phi.entries;
    let mut v = DVector::from_element(phi.cols(), 1.0).normalize();
    for _ in 0..cap {
        let w = a.transpose() * (a * &v);
        let nw = w.norm();
        if nw == 0.0 {
            return (0.0, v);
        }
        let rq = v.dot(&w);
        let done = (&w - &v * rq).norm() <= rel_tol * rq;
        v = w / nw;
        if done {
            break;
        }
    }
    ((a * &v).norm(), v)
}

fn ratio_p(phi: &SensingMatrix, x: &DVector<f64>, p: f64) -> f64 {
    let nx = lp_norm(x.as_slice(), Exponent::Finite(p));
    if nx == 0.0 {
        0.0
    } else {
        (&phi.entries * x).norm() / nx
    }
}

/// Fixed-point ascent for `max ‖Φx‖₂ / ‖x‖_p`: `x ← J_{p′}(Φᵀ Φx)` where
/// `J_{p′}` is the duality map of `ℓ_{p′}`. The ratio never decreases.
fn dual_ascent(phi: &SensingMatrix, start: DVector<f64>, p: f64, iters: usize) -> f64 {
    let q = p / (p - 1.0);
    let mut x = start;
    let mut best = ratio_p(phi, &x, p);
    for _ in 0..iters {
        let z = phi.entries.transpose() * (&phi.entries * &x);
        let mut next = z.map(|v| v.signum() * v.abs().powf(q - 1.0));
        let nn = lp_norm(next.as_slice(), Exponent::Finite(p));
        if nn == 0.0 || !nn.is_finite() {
            break;
        }
        next /= nn;
        let r = ratio_p(phi, &next, p);
        if r <= best * (1.0 + 1e-13) {
            best = best.max(r);
            break;
        }
        best = r;
        x = next;
    }
    best
}

pub fn op_norm_bracket(phi: &SensingMatrix, p: f64, seed: u64) -> Result<NormBracket> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} not in [1, 2]")));
    }
    let n12 = norm_1_to_2(phi);
    if p == 1.0 {
        return Ok(NormBracket { p, lower: n12, upper: n12 });
    }
    let smax = phi.entries.singular_values().max();
    let (power, top) = power_iteration(phi, 1e-10, 10_000);
    if p == 2.0 {
        return Ok(NormBracket {
            p,
            lower: power.min(smax),
            upper: smax,
        });
    }
    let upper = n12.powf(2.0 / p - 1.0) * smax.powf(2.0 - 2.0 / p);
    let mut starts: Vec<DVector<f64>> = Vec::new();
    starts.push(top);
    for j in 0..phi.cols() {
        let mut e = DVector::zeros(phi.cols());
        e[j] = 1.0;
        starts.push(e);
    }
    for i in 0..phi.rows() {
        starts.push(phi.entries.row(i).transpose());
    }
    let mut rng = rng::rng(seed);
    for _ in 0..32 {
        starts.push(DVector::from_fn(phi.cols(), |_, _| StandardNormal.sample(&mut rng)));
    }
    let lower = starts
        .into_par_iter()
        .map(|s| dual_ascent(phi, s, p, 500))
        .reduce(|| 0.0, f64::max);
    Ok(NormBracket { p, lower, upper })
}

#[derive(Debug, Clone)]
pub struct Lemma61Report {
    pub p: f64,
    pub delta: f64,
    /// `(1−δ) n^{−1/2} N^{1−1/p}`.
    pub lower_bound: f64,
    pub bracket: NormBracket,
    /// `(1+δ) N^{1−1/p}`.
    pub upper_bound: f64,
    /// `(1−δ)^{−1} n^{−1/2} N^{1−1/p}`, reported but not required.
    pub stated_lower_bound: f64,
}

impl Lemma61Report {
    pub fn upper_holds(&self) -> bool {
        self.upper_bound >= self.bracket.lower
    }
    pub fn lower_holds(&self) -> bool {
        self.lower_bound <= self.bracket.upper
    }
    pub fn stated_lower_holds(&self) -> bool {
        self.stated_lower_bound <= self.bracket.upper
    }
}

/// Checks `(1−δ) n^{−1/2} N^{1−1/p} ≤ ‖Φ‖_{p→2} ≤ (1+δ) N^{1−1/p}` with
/// `δ` the column-norm distortion.
pub fn lemma61_check(phi: &SensingMatrix, p: f64, seed: u64) -> Result<Lemma61Report> {
    let delta = rip_check(phi, 1, 0, seed)?.delta;
    if delta >= 1.0 {
        return Err(Error::RipTooLarge(delta));
    }
    let bracket = op_norm_bracket(phi, p, seed)?;
    let scale = (phi.cols() as f64).powf(1.0 - 1.0 / p);
    let root_n = (phi.rows() as f64).sqrt();
    Ok(Lemma61Report {
        p,
        delta,
        lower_bound: (1.0 - delta) * scale / root_n,
        bracket,
        upper_bound: (1.0 + delta) * scale,
        stated_lower_bound: scale / ((1.0 - delta) * root_n),
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Basis pursuit `argmin{‖x‖₁ : Φx = y}` by ADMM: alternate projection onto
/// `{Φx = y}` with soft thresholding. Stops once the split variables agree
/// and the iterate has settled, both within `tol`; returns the feasible
/// iterate.
pub fn l1_decode(phi: &SensingMatrix, y: &[f64], tol: f64, iter_cap: usize) -> Result<Vec<f64>> {
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            got: y.len(),
        });
    }
    let a = &phi.entries;
    let chol = (a * a.transpose())
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("sensing matrix does not have full row rank".into()))?;
    let yv = DVector::from_column_slice(y);
    let project = |v: &DVector<f64>| -> DVector<f64> { v - a.transpose() * chol.solve(&(a * v - &yv)) };
    let big_n = phi.cols();
    let mut z = DVector::zeros(big_n);
    let mut u = DVector::zeros(big_n);
    let t = 1.0 / L1_PENALTY;
    let (mut primal, mut change) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..iter_cap {
        let x = project(&(&z - &u));
        let z_prev = z.clone();
        z = (&x + &u).map(|v| soft_threshold(v, t));
        u += &x - &z;
        primal = (&x - &z).norm();
        change = (&z - &z_prev).norm();
        if primal <= tol && change <= tol {
            return Ok(x.iter().copied().collect());
        }
    }
    Err(Error::L1NotConverged { primal, change })
}

/// Least-squares fit on every support of size `≤ k`; among exact fits returns
/// the one of least ℓ₁ norm.
pub fn brute_sparse_decode(phi: &SensingMatrix, y: &[f64], k: usize) -> Result<Vec<f64>> {
    if y.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            got: y.len(),
        });
    }
    let size = binomial(phi.cols(), k);
    if size > BRUTE_LIMIT {
        return Err(Error::InstanceTooLarge {
            size: size.min(usize::MAX as u128) as usize,
            limit: BRUTE_LIMIT as usize,
        });
    }
    let yv = DVector::from_column_slice(y);
    let fit_tol = 1e-9 * yv.norm().max(1.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    if yv.norm() <= fit_tol {
        return Ok(vec![0.0; phi.cols()]);
    }
    for s in 1..=k {
        let mut supports = Vec::new();
        for_each_combination(phi.cols(), s, |c| {
            supports.push(c.to_vec());
            true
        });
        let fits: Vec<(f64, Vec<f64>)> = supports
            .par_iter()
            .filter_map(|sup| {
                let sub = phi.submatrix(sup);
                let coef = sub.clone().svd(true, true).solve(&yv, 1e-12).ok()?;
                if (&sub * &coef - &yv).norm() > fit_tol {
                    return None;
                }
                let mut x = vec![0.0; phi.cols()];
                for (&j, c) in sup.iter().zip(coef.iter()) {
                    x[j] = *c;
                }
                Some((lp_norm(&x, Exponent::Finite(1.0)), x))
            })
            .collect();
        for (l1, x) in fits {
            if best.as_ref().is_none_or(|(b, _)| l1 < *b) {
                best = Some((l1, x));
            }
        }
    }
    best.map(|(_, x)| x).ok_or(Error::NoExactFit { k })
}

/// Indices of the `k` largest-magnitude entries; among equal magnitudes the
/// lower index wins.
fn top_k(x: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// `x` restricted to its `k` largest-magnitude entries.
pub fn best_k_term(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in top_k(x, k) {
        out[i] = x[i];
    }
    out
}

/// Best `k`-term approximation error `σ_k(x)_p`.
pub fn sigma_k(x: &[f64], k: usize, p: Exponent) -> f64 {
    let mut tail = x.to_vec();
    for i in top_k(x, k) {
        tail[i] = 0.0;
    }
    lp_norm(&tail, p)
}

/// Lipschitz encoder `x ↦ Φx` and decoder `Φx ↦ x` on a net of sparse
/// vectors.
#[derive(Debug, Clone)]
pub struct SensingPair {
    pub encoder: SampledLipschitzMap,
    pub decoder: SampledLipschitzMap,
    pub certificate: RipCertificate,
    pub gamma_a: f64,
    pub gamma_m: f64,
    pub net: Vec<Vec<f64>>,
}

impl SensingPair {
    /// `C = γ_a γ_M`.
    pub fn constant(&self) -> f64 {
        self.gamma_a * self.gamma_m
    }
}

fn support(x: &[f64]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] != 0.0).collect()
}

/// Order-`2k` certificate over the supports of all net differences plus
/// `extra` random `2k`-supports. The differences are what the Lipschitz
/// preconditions of [`build_nonlinear_pair`] actually test.
pub fn net_rip_certificate(
    phi: &SensingMatrix,
    k: usize,
    net: &ModelClassSurrogate,
    extra: usize,
    seed: u64,
) -> Result<RipCertificate> {
    let pts = net.points();
    let mut supports: Vec<Vec<usize>> = (0..pts.len())
        .flat_map(|i| {
            (i + 1..pts.len()).map(move |j| {
                let d: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b).collect();
                support(&d)
            })
        })
        .collect();
    supports.sort();
    supports.dedup();
    let order = (2 * k).min(phi.cols());
    if supports.iter().any(|s| s.len() > order) {
        return Err(Error::InvalidParameter(format!("net is not {k}-sparse")));
    }
    supports.extend(random_supports(phi.cols(), order, extra, seed));
    Ok(RipCertificate {
        k: order,
        delta: rip_check_supports(phi, &supports)?,
        exhaustive: false,
        supports_checked: supports.len(),
    })
}

pub fn build_nonlinear_pair(
    phi: &SensingMatrix,
    sparse_net: &ModelClassSurrogate,
    certificate: RipCertificate,
) -> Result<SensingPair> {
    if certificate.delta >= 1.0 {
        return Err(Error::RipTooLarge(certificate.delta));
    }
    if sparse_net.space().dim() != phi.cols() || !sparse_net.space().is_hilbert() {
        return Err(Error::InvalidParameter("net must live in l2 of the sensing dimension".into()));
    }
    let gamma_a = 1.0 + certificate.delta;
    let gamma_m = 1.0 / (1.0 - certificate.delta);
    let net = sparse_net.points().to_vec();
    let codes: Vec<Vec<f64>> = net.par_iter().map(|x| phi.apply(x)).collect();
    let meas = FiniteNormedSpace::l2(phi.rows())?;
    let encoder = SampledLipschitzMap::new(
        *sparse_net.space(),
        meas,
        net.iter().cloned().zip(codes.iter().cloned()).collect(),
        gamma_a,
        ExtensionStrategy::Kirszbraun,
    )?;
    let decoder = SampledLipschitzMap::new(
        meas,
        *sparse_net.space(),
        codes.into_iter().zip(net.iter().cloned()).collect(),
        gamma_m,
        ExtensionStrategy::Kirszbraun,
    )?;
    Ok(SensingPair {
        encoder,
        decoder,
        certificate,
        gamma_a,
        gamma_m,
        net,
    })
}

#[derive(Debug, Clone)]
pub struct RecoveryTrial {
    pub trial: usize,
    pub sigma_k: f64,
    /// Distance from the best `k`-term approximation to the net.
    pub net_resolution: f64,
    pub error: f64,
    pub bound: f64,
}

impl RecoveryTrial {
    pub fn holds(&self) -> bool {
        self.error <= self.bound
    }
}

/// Evaluates `‖x − M(a(x))‖ ≤ (C+1)σ_k(x) + (1+C)·res` for
/// `x = s + e` with `s` a random net point and `e` a dense Gaussian vector of
/// norm `noise`. `res` is the distance from the best `k`-term approximation
/// of `x` to the net.
pub fn instance_optimality_trials(
    pair: &SensingPair,
    k: usize,
    trials: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<RecoveryTrial>> {
    let big_n = pair.encoder.domain().dim();
    let c = pair.constant();
    // solver residuals enter once through each extension
    let slack = pair.gamma_m * pair.encoder.tol() + pair.decoder.tol() + 1e-12;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::rng(derive_seed(seed, t as u64));
            let s = &pair.net[rng.random_range(0..pair.net.len())];
            let e: Vec<f64> = (0..big_n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let ne = lp_norm(&e, Exponent::Finite(2.0));
            let x: Vec<f64> = s.iter().zip(&e).map(|(a, b)| a + noise * b / ne).collect();
            let sig = sigma_k(&x, k, Exponent::Finite(2.0));
            let xk = best_k_term(&x, k);
            let res = pair.net.iter().map(|z| dist2(z, &xk)).fold(f64::INFINITY, f64::min);
            let code = pair.encoder.eval(&x)?;
            let rec = pair.decoder.eval(&code)?;
            let error = dist2(&x, &rec);
            Ok(RecoveryTrial {
                trial: t,
                sigma_k: sig,
                net_resolution: res,
                error,
                bound: (c + 1.0) * sig + (1.0 + c) * res + slack,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct L1Trial {
    pub trial: usize,
    pub error: f64,
}

/// Planted `k`-sparse signals with standard Gaussian nonzeros, decoded from
/// exact measurements by [`l1_decode`]. A solver that hits its cap records
/// an infinite error.
pub fn l1_recovery_trials(phi: &SensingMatrix, k: usize, trials: usize, seed: u64) -> Vec<L1Trial> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::rng(derive_seed(seed, t as u64));
            let sup = index::sample(&mut rng, phi.cols(), k).into_vec();
            let mut x = vec![0.0; phi.cols()];
            for j in sup {
                x[j] = StandardNormal.sample(&mut rng);
            }
            let y = phi.apply(&x);
            let error = l1_decode(phi, &y, L1_TOL, L1_ITER_CAP).map_or(f64::INFINITY, |xh| dist2(&x, &xh));
            L1Trial { trial: t, error }
        })
        .collect()
}
