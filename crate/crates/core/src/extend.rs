//! Lipschitz extension of sampled maps.
//!
//! Three engines share one sample type:
//!
//! * McShane–Whitney: coordinate `j` of the extension is
//!   `min_i (f_i[j] + γ‖x − x_i‖)`. It preserves the constant exactly for
//!   scalar and ℓ∞ targets, from any domain norm.
//! * Kirszbraun: for ℓ₂ → ℓ₂ maps, the value at `x` is a point of
//!   `⋂_i B(f_i, γ‖x − x_i‖)`, found by projecting onto violated balls.
//! * Metric projection: the value of the nearest sample, i.e. `a ∘ P_K` when
//!   the samples are the points of a convex class surrogate.
//!
//! A Kirszbraun map whose spaces are not both Hilbert falls back to the
//! coordinatewise McShane formula; audit the result to see the realized
//! constant.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::spaces::{check_distinct, dist2, Exponent, FiniteNormedSpace, ModelClassSurrogate};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Tolerance multipliers tried in turn by sequential realization.
pub const SEQUENTIAL_TOL_SCALES: [f64; 2] = [0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionStrategy {
    McShane,
    Kirszbraun,
    MetricProjection,
}

impl ExtensionStrategy {
    fn name(self) -> &'static str {
        match self {
            ExtensionStrategy::McShane => "mcshane",
            ExtensionStrategy::Kirszbraun => "kirszbraun",
            ExtensionStrategy::MetricProjection => "metric_projection",
        }
    }
}

/// Something that can be evaluated and audited as a map between normed spaces.
pub trait LipschitzMap: Sync {
    fn domain(&self) -> &FiniteNormedSpace;
    fn target(&self) -> &FiniteNormedSpace;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// A closure viewed as a map `domain → target`.
pub struct FnMap<F> {
    domain: FiniteNormedSpace,
    target: FiniteNormedSpace,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnMap<F> {
    pub fn new(domain: FiniteNormedSpace, target: FiniteNormedSpace, f: F) -> Self {
        Self { domain, target, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> LipschitzMap for FnMap<F> {
    fn domain(&self) -> &FiniteNormedSpace {
        &self.domain
    }
    fn target(&self) -> &FiniteNormedSpace {
        &self.target
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.domain.check(x)?;
        Ok((self.f)(x))
    }
}

/// Finite graph `{(x_i, f_i)}` with a Lipschitz budget and an extension rule.
#[derive(Debug, Clone)]
pub struct SampledLipschitzMap {
    domain: FiniteNormedSpace,
    target: FiniteNormedSpace,
    xs: Vec<Vec<f64>>,
    fs: Vec<Vec<f64>>,
    gamma: f64,
    strategy: ExtensionStrategy,
    tol: f64,
    max_iter: usize,
}

/// Relative slack allowed when validating sample data against `gamma`.
const VALIDATION_SLACK: f64 = 1e-9;

impl SampledLipschitzMap {
    /// Validates dimensions, distinctness of the `x_i`, and
    /// `‖f_i − f_j‖ ≤ γ‖x_i − x_j‖` on every sample pair.
    pub fn new(
        domain: FiniteNormedSpace,
        target: FiniteNormedSpace,
        samples: Vec<(Vec<f64>, Vec<f64>)>,
        gamma: f64,
        strategy: ExtensionStrategy,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz budget {gamma} must be positive")));
        }
        let (xs, fs): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
        for (x, f) in xs.iter().zip(&fs) {
            domain.check(x)?;
            target.check(f)?;
        }
        check_distinct(&xs)?;
        let map = Self {
            domain,
            target,
            xs,
            fs,
            gamma,
            strategy,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        if let Some((i, j, ratio)) = map.worst_sample_pair() {
            if ratio > gamma * (1.0 + VALIDATION_SLACK) {
                return Err(Error::LipschitzViolation { i, j, ratio, gamma });
            }
        }
        Ok(map)
    }

    /// Stopping tolerance and iteration cap of the ball-intersection solver.
    pub fn with_solver(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    fn worst_sample_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.xs.len();
        (0..n)
            .into_par_iter()
            .filter_map(|i| {
                (i + 1..n)
                    .map(|j| {
                        let dx = self.domain.dist(&self.xs[i], &self.xs[j]);
                        let df = self.target.dist(&self.fs[i], &self.fs[j]);
                        (i, j, df / dx)
                    })
                    .max_by(|a, b| a.2.total_cmp(&b.2))
            })
            .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn strategy(&self) -> ExtensionStrategy {
        self.strategy
    }
    pub fn tol(&self) -> f64 {
        self.tol
    }
    pub fn len(&self) -> usize {
        self.xs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
    pub fn sample_inputs(&self) -> &[Vec<f64>] {
        &self.xs
    }
    pub fn sample_values(&self) -> &[Vec<f64>] {
        &self.fs
    }

    fn nearest_sample(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.xs
            .iter()
            .enumerate()
            .map(|(i, xi)| (i, self.domain.dist(x, xi)))
            .fold(None, |best, (i, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((i, d)),
            })
    }

    fn mcshane_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.xs.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        let cones: Vec<f64> = self.xs.iter().map(|xi| self.gamma * self.domain.dist(x, xi)).collect();
        let dim = self.target.dim();
        Ok((0..dim)
            .map(|j| {
                self.fs
                    .iter()
                    .zip(&cones)
                    .map(|(f, c)| f[j] + c)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    fn kirszbraun_values(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        let Some((start, d0)) = self.nearest_sample(x) else {
            return Err(Error::Empty("sample set"));
        };
        if d0 == 0.0 {
            return Ok(self.fs[start].clone());
        }
        let radii: Vec<f64> = self.xs.iter().map(|xi| self.gamma * dist2(x, xi)).collect();
        solve_ball_intersection(&self.fs, &radii, self.fs[start].clone(), tol, self.max_iter)
    }

    /// Realizes the extension on `points` one at a time, adding each new
    /// value to the sample set before the next query. On the union of the
    /// original samples and `points` the result is a single map whose pairwise
    /// ratios are within the solver tolerance of `gamma`.
    ///
    /// Returns the augmented map and the values at `points`, in order.
    pub fn extend_sequentially(&self, points: &[Vec<f64>]) -> Result<(Self, Vec<Vec<f64>>)> {
        let mut map = self.clone();
        let mut values = Vec::with_capacity(points.len());
        for x in points {
            self.domain.check(x)?;
            let hit = map.nearest_sample(x).filter(|&(_, d)| d == 0.0);
            let y = match hit {
                Some((i, _)) => map.fs[i].clone(),
                None => {
                    // tighter than the public tolerance so the residual slack
                    // carried by earlier realized points cannot accumulate
                    // near-tangent balls stall the projections; loosen the
                    // tolerance step by step before giving up
                    let mut attempt = Err(Error::Empty("tolerance schedule"));
                    for scale in SEQUENTIAL_TOL_SCALES {
                        attempt = map.eval_with_tol(x, map.tol * scale);
                        if !matches!(attempt, Err(Error::KirszbraunNotConverged { .. })) {
                            break;
                        }
                    }
                    let y = attempt?;
                    map.xs.push(x.clone());
                    map.fs.push(y.clone());
                    y
                }
            };
            values.push(y);
        }
        Ok((map, values))
    }

    fn eval_with_tol(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.domain.check(x)?;
        match self.strategy {
            ExtensionStrategy::McShane => self.mcshane_values(x),
            ExtensionStrategy::Kirszbraun => {
                if self.domain.is_hilbert() && self.target.is_hilbert() {
                    self.kirszbraun_values(x, tol)
                } else {
                    self.mcshane_values(x)
                }
            }
            ExtensionStrategy::MetricProjection => {
                let (i, _) = self.nearest_sample(x).ok_or(Error::Empty("sample set"))?;
                Ok(self.fs[i].clone())
            }
        }
    }

    /// Maximum over samples of `‖y − f_i‖ − γ‖x − x_i‖` (ℓ₂ on both sides).
    pub fn feasibility_residual(&self, x: &[f64], y: &[f64]) -> f64 {
        self.xs
            .iter()
            .zip(&self.fs)
            .map(|(xi, fi)| self.target.dist(y, fi) - self.gamma * self.domain.dist(x, xi))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl LipschitzMap for SampledLipschitzMap {
    fn domain(&self) -> &FiniteNormedSpace {
        &self.domain
    }
    fn target(&self) -> &FiniteNormedSpace {
        &self.target
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_with_tol(x, self.tol)
    }
}

/// Finds `y` with `‖y − c_i‖ ≤ r_i + tol` for all `i`, starting from `start`.
///
/// Each sweep first projects onto the most violated ball, then cycles
/// through the remaining balls projecting onto any that are violated.
/// Projections aim slightly inside each ball so the loop can terminate on
/// boundary-tangent configurations.
pub(crate) fn solve_ball_intersection(
    centers: &[Vec<f64>],
    radii: &[f64],
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut y = start;
    let project = |y: &mut Vec<f64>, c: &[f64], r: f64| {
        let d = dist2(y, c);
        if d <= r {
            return;
        }
        let target = if r > tol { r - 0.5 * tol } else { r };
        let s = target / d;
        for (yk, ck) in y.iter_mut().zip(c) {
            *yk = ck + (*yk - ck) * s;
        }
    };
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let (worst, res) = centers
            .iter()
            .zip(radii)
            .enumerate()
            .map(|(i, (c, r))| (i, dist2(&y, c) - r))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        residual = res;
        if residual <= tol {
            return Ok(y);
        }
        project(&mut y, &centers[worst], radii[worst]);
        for (i, (c, &r)) in centers.iter().zip(radii).enumerate() {
            if i != worst {
                project(&mut y, c, r);
            }
        }
    }
    // cyclic projection crawls when the intersection is a thin sliver
    match dual_ball_intersection(centers, radii, tol, max_iter) {
        Ok(y) => Ok(y),
        Err(dual) => Err(Error::KirszbraunNotConverged {
            iterations: 2 * max_iter,
            residual: residual.min(dual),
        }),
    }
}

/// Same problem through its dual: maximize
/// `D(λ) = Σ λ_i (‖c_i‖² − r_i²) − ‖Σ λ_i c_i‖²` over the simplex, with
/// primal point `y = Σ λ_i c_i`, by Frank–Wolfe with away steps and exact
/// line search. The min-max value `min_y max_i (‖y − c_i‖² − r_i²)` is at
/// most 0 whenever the intersection is nonempty. Returns the best residual
/// on failure.
fn dual_ball_intersection(centers: &[Vec<f64>], radii: &[f64], tol: f64, max_iter: usize) -> std::result::Result<Vec<f64>, f64> {
    let m = centers.len();
    let dim = centers[0].len();
    let c: Vec<f64> = centers
        .iter()
        .zip(radii)
        .map(|(ci, r)| ci.iter().map(|v| v * v).sum::<f64>() - r * r)
        .collect();
    let start = (0..m).max_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap_or(0);
    let mut lambda = vec![0.0; m];
    lambda[start] = 1.0;
    let mut y = centers[start].clone();
    let mut best = f64::INFINITY;
    for _ in 0..max_iter {
        let grad: Vec<f64> = centers
            .iter()
            .zip(&c)
            .map(|(ci, cc)| cc - 2.0 * ci.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let residual = centers
            .iter()
            .zip(radii)
            .map(|(ci, r)| dist2(&y, ci) - r)
            .fold(f64::NEG_INFINITY, f64::max);
        best = best.min(residual);
        if residual <= tol {
            return Ok(y);
        }
        let s = (0..m).max_by(|&a, &b| grad[a].total_cmp(&grad[b])).expect("nonempty");
        let v = (0..m)
            .filter(|&i| lambda[i] > 0.0)
            .min_by(|&a, &b| grad[a].total_cmp(&grad[b]))
            .expect("lambda has support");
        let dot: f64 = lambda.iter().zip(&grad).map(|(l, g)| l * g).sum();
        let fw_gap = grad[s] - dot;
        let away_gap = dot - grad[v];
        // direction in λ and its image in y-space
        let (toward, gain, t_max) = if fw_gap >= away_gap {
            (true, fw_gap, 1.0)
        } else {
            (false, away_gap, lambda[v] / (1.0 - lambda[v]).max(f64::MIN_POSITIVE))
        };
        if gain <= 0.0 {
            break;
        }
        let dy: Vec<f64> = if toward {
            centers[s].iter().zip(&y).map(|(a, b)| a - b).collect()
        } else {
            y.iter().zip(&centers[v]).map(|(a, b)| a - b).collect()
        };
        let curv: f64 = dy.iter().map(|v| v * v).sum();
        if curv == 0.0 {
            break;
        }
        let t = (gain / (2.0 * curv)).min(t_max);
        for k in 0..dim {
            y[k] += t * dy[k];
        }
        if toward {
            for l in lambda.iter_mut() {
                *l *= 1.0 - t;
            }
            lambda[s] += t;
        } else {
            for l in lambda.iter_mut() {
                *l *= 1.0 + t;
            }
            lambda[v] -= t;
            if t == t_max {
                lambda[v] = 0.0;
            }
        }
    }
    Err(best)
}

fn require(map: &SampledLipschitzMap, strategy: ExtensionStrategy, requirement: &'static str, ok: bool) -> Result<()> {
    if map.strategy != strategy || !ok {
        return Err(Error::StrategyMismatch {
            strategy: strategy.name(),
            requirement,
        });
    }
    Ok(())
}

/// McShane–Whitney extension at `x`. Requires a scalar or ℓ∞ target.
pub fn mcshane_eval(map: &SampledLipschitzMap, x: &[f64]) -> Result<Vec<f64>> {
    let ok = map.target.dim() == 1 || map.target.p() == Exponent::Infinity;
    require(map, ExtensionStrategy::McShane, "a scalar or l_inf target", ok)?;
    map.domain.check(x)?;
    map.mcshane_values(x)
}

/// Kirszbraun extension at `x` for ℓ₂ → ℓ₂ maps.
pub fn kirszbraun_eval(map: &SampledLipschitzMap, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let ok = map.domain.is_hilbert() && map.target.is_hilbert();
    require(map, ExtensionStrategy::Kirszbraun, "l2 domain and target", ok)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    map.domain.check(x)?;
    map.kirszbraun_values(x, tol)
}

/// `a(P_K(x))`, with `P_K` the nearest-point map onto the surrogate of a
/// convex class.
pub fn metric_projection_compose(
    a: &SampledLipschitzMap,
    k_convex: &ModelClassSurrogate,
    x: &[f64],
) -> Result<Vec<f64>> {
    if !k_convex.is_convex() {
        return Err(Error::InvalidParameter("class is not tagged convex".into()));
    }
    k_convex.space().check(x)?;
    let p = k_convex
        .points()
        .iter()
        .map(|q| (q, k_convex.space().dist(x, q)))
        .fold(None, |best: Option<(&Vec<f64>, f64)>, (q, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((q, d)),
        })
        .ok_or(Error::Empty("model class"))?
        .0;
    a.eval(p)
}

/// Largest ratio `‖F(x) − F(x′)‖ / ‖x − x′‖` over a set of pairs.
#[derive(Debug, Clone)]
pub struct LipschitzAudit {
    pub measured_constant: f64,
    pub witness_pair: (Vec<f64>, Vec<f64>),
    pub pair_count: usize,
}

/// Evaluates `f` on every pair (in parallel) and reports the worst ratio.
/// This is a lower bound on the true Lipschitz constant.
pub fn lipschitz_audit<M: LipschitzMap + ?Sized>(f: &M, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<LipschitzAudit> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| {
            let dx = f.domain().distance(x, y)?;
            if dx == 0.0 {
                return Err(Error::InvalidParameter("audit pair with coincident points".into()));
            }
            let fx = f.eval(x)?;
            let fy = f.eval(y)?;
            Ok(f.target().dist(&fx, &fy) / dx)
        })
        .collect::<Result<_>>()?;
    let (best, c) = ratios
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &r)| if r > a.1 { (i, r) } else { a });
    Ok(LipschitzAudit {
        measured_constant: c,
        witness_pair: pairs[best].clone(),
        pair_count: pairs.len(),
    })
}

/// Audit over precomputed values: `xs[i] ↦ ys[i]`, pairs given by index.
pub fn audit_values(
    domain: &FiniteNormedSpace,
    target: &FiniteNormedSpace,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    pairs: &[(usize, usize)],
) -> Result<LipschitzAudit> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let dx = domain.distance(&xs[i], &xs[j])?;
        if dx == 0.0 {
            return Err(Error::InvalidParameter("audit pair with coincident points".into()));
        }
        let r = target.distance(&ys[i], &ys[j])? / dx;
        if r > best.1 {
            best = (k, r);
        }
    }
    let (i, j) = pairs[best.0];
    Ok(LipschitzAudit {
        measured_constant: best.1,
        witness_pair: (xs[i].clone(), xs[j].clone()),
        pair_count: pairs.len(),
    })
}

/// `count` random index pairs `(i, j)`, `i ≠ j`, from `0..n`.
pub fn sample_index_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let mut rng = rng::rng(seed);
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}
