//! Finite-dimensional normed spaces and finite surrogates of model classes.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Exponent of an ℓ_p norm. `Infinity` is its own case so max-norm checks
/// stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::InvalidParameter(format!("exponent {p} is not in [1, inf]")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_two(self) -> bool {
        self == Exponent::Finite(2.0)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// ℓ_p norm of `x` without a dimension check.
pub fn lp_norm(x: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => x.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Exponent::Finite(1.0) => x.iter().map(|v| v.abs()).sum(),
        Exponent::Finite(2.0) => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Exponent::Finite(p) => {
            let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                return 0.0;
            }
            let s: f64 = x.iter().map(|v| (v.abs() / scale).powf(p)).sum();
            scale * s.powf(1.0 / p)
        }
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `(ℝ^dim, ‖·‖_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteNormedSpace {
    dim: usize,
    p: Exponent,
}

impl FiniteNormedSpace {
    pub fn new(dim: usize, p: Exponent) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { dim, p })
    }

    pub fn l2(dim: usize) -> Result<Self> {
        Self::new(dim, Exponent::Finite(2.0))
    }

    pub fn linf(dim: usize) -> Result<Self> {
        Self::new(dim, Exponent::Infinity)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn is_hilbert(&self) -> bool {
        self.p.is_two()
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(lp_norm(x, self.p))
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.dist(x, y))
    }

    /// Distance without dimension checks, for inner loops over validated data.
    pub(crate) fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.p {
            Exponent::Finite(2.0) => dist2(x, y),
            Exponent::Infinity => x
                .iter()
                .zip(y)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())),
            Exponent::Finite(1.0) => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            p => lp_norm(&sub(x, y), p),
        }
    }
}

/// `‖x‖_p` for `x` in `space`.
pub fn norm(x: &[f64], space: &FiniteNormedSpace) -> Result<f64> {
    space.norm(x)
}

/// Where a surrogate came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassLabel {
    /// Random sample of the unit ℓ_q ball.
    Kq { q: Exponent },
    /// Truncated diagonal class `{α_j e_j} ∪ {0}`.
    Diag { r: f64 },
    /// Random k-sparse vectors in the unit ℓ₂ ball.
    Sparse { k: usize },
    Custom(String),
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Kq { q } => write!(f, "Kq(q={q})"),
            ClassLabel::Diag { r } => write!(f, "diag(r={r})"),
            ClassLabel::Sparse { k } => write!(f, "sparse(k={k})"),
            ClassLabel::Custom(s) => write!(f, "custom({s})"),
        }
    }
}

/// Finite point cloud standing in for a compact class.
///
/// `resolution` is the guaranteed Hausdorff gap between the surrogate and the
/// ideal class; `0` means exact and `+∞` means no guarantee (random samples).
#[derive(Debug, Clone)]
pub struct ModelClassSurrogate {
    space: FiniteNormedSpace,
    points: Vec<Vec<f64>>,
    resolution: f64,
    label: ClassLabel,
    convex: bool,
    seed: Option<u64>,
}

impl ModelClassSurrogate {
    pub fn new(
        space: FiniteNormedSpace,
        points: Vec<Vec<f64>>,
        resolution: f64,
        label: ClassLabel,
    ) -> Result<Self> {
        if !(resolution >= 0.0) {
            return Err(Error::InvalidParameter(format!("resolution {resolution} is negative")));
        }
        for x in &points {
            space.check(x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
        }
        check_distinct(&points)?;
        let convex = matches!(label, ClassLabel::Kq { .. });
        Ok(Self {
            space,
            points,
            resolution,
            label,
            convex,
            seed: None,
        })
    }

    /// Same points, measured in a different ℓ_p norm.
    pub fn with_norm(mut self, p: Exponent) -> Self {
        self.space = FiniteNormedSpace { dim: self.space.dim, p };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Marks the ideal class as convex (needed by the metric-projection
    /// extension).
    pub fn tagged_convex(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn space(&self) -> &FiniteNormedSpace {
        &self.space
    }
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn label(&self) -> &ClassLabel {
        &self.label
    }
    pub fn is_convex(&self) -> bool {
        self.convex
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Largest norm of a class point, i.e. the radius of the smallest
    /// origin-centred ball containing the surrogate.
    pub fn radius_about_origin(&self) -> f64 {
        self.points
            .iter()
            .map(|x| lp_norm(x, self.space.p))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_distinct(points: &[Vec<f64>]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // `+ 0.0` folds -0.0 into 0.0 so equal points sort next to each other.
    let key = |i: usize, k: usize| points[i][k] + 0.0;
    let cmp = |a: &usize, b: &usize| {
        for k in 0..points[*a].len() {
            match key(*a, k).total_cmp(&key(*b, k)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    };
    order.sort_by(cmp);
    for w in order.windows(2) {
        if cmp(&w[0], &w[1]) == Ordering::Equal {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::DuplicatePoint(a, b));
        }
    }
    Ok(())
}

/// The sequence `α_j = (1 + log₂ j)^{-r/2}`, `j ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSequence {
    r: f64,
}

impl AlphaSequence {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("decay exponent r = {r} must be positive")));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `α_j` for `j ≥ 1`.
    pub fn alpha(&self, j: usize) -> f64 {
        assert!(j >= 1, "alpha is indexed from 1");
        (1.0 + (j as f64).log2()).powf(-self.r / 2.0)
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    Ok(())
}

/// `count` points drawn uniformly from the unit ℓ_q ball of ℝ^dim.
///
/// Directions come from the generalized Gaussian `exp(-|t|^q)`, normalized in
/// ℓ_q (which gives the cone measure), and radii follow `U^{1/dim}`. The
/// surrogate is measured in ℓ₂; use [`ModelClassSurrogate::with_norm`] for
/// another ambient norm.
pub fn generate_kq(dim: usize, q: Exponent, count: usize, seed: u64) -> Result<ModelClassSurrogate> {
    let space = FiniteNormedSpace::l2(dim)?;
    check_count(count)?;
    let mut rng = rng::rng(seed);
    let mut points = Vec::with_capacity(count);
    match q {
        Exponent::Infinity => {
            for _ in 0..count {
                points.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
            }
        }
        Exponent::Finite(qv) => {
            let gamma = Gamma::new(1.0 / qv, 1.0)
                .map_err(|e| Error::InvalidParameter(format!("gamma law: {e}")))?;
            for _ in 0..count {
                let mut y: Vec<f64> = (0..dim)
                    .map(|_| {
                        let g: f64 = gamma.sample(&mut rng);
                        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        s * g.powf(1.0 / qv)
                    })
                    .collect();
                let nrm = lp_norm(&y, q);
                let radius = rng.random::<f64>().powf(1.0 / dim as f64);
                for v in &mut y {
                    *v *= radius / nrm;
                }
                let after = lp_norm(&y, q);
                if after > 1.0 {
                    for v in &mut y {
                        *v /= after;
                    }
                }
                points.push(y);
            }
        }
    }
    Ok(ModelClassSurrogate::new(space, points, f64::INFINITY, ClassLabel::Kq { q })?.with_seed(seed))
}

/// `{α_j e_j : 1 ≤ j ≤ m} ∪ {0}` in ℓ₂^m, atoms first and the origin last.
///
/// The resolution is `α_{m+1}`: every dropped atom lies that close to 0.
pub fn generate_diag_class(alpha: &AlphaSequence, m: usize) -> Result<ModelClassSurrogate> {
    let space = FiniteNormedSpace::l2(m)?;
    let mut points = Vec::with_capacity(m + 1);
    for j in 1..=m {
        let mut x = vec![0.0; m];
        x[j - 1] = alpha.alpha(j);
        points.push(x);
    }
    points.push(vec![0.0; m]);
    ModelClassSurrogate::new(space, points, alpha.alpha(m + 1), ClassLabel::Diag { r: alpha.r() })
}

/// `count` random k-sparse points of the unit ℓ₂ ball of ℝ^dim: uniform
/// support, values uniform in the unit ball of that support.
pub fn generate_sparse_class(dim: usize, k: usize, count: usize, seed: u64) -> Result<ModelClassSurrogate> {
    let space = FiniteNormedSpace::l2(dim)?;
    check_count(count)?;
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!("sparsity {k} not in 1..={dim}")));
    }
    let mut rng = rng::rng(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let support = index::sample(&mut rng, dim, k).into_vec();
        let mut vals: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nrm = lp_norm(&vals, Exponent::Finite(2.0));
        let radius = rng.random::<f64>().powf(1.0 / k as f64);
        for v in &mut vals {
            *v *= radius / nrm;
        }
        let mut x = vec![0.0; dim];
        for (&i, v) in support.iter().zip(vals) {
            x[i] = v;
        }
        points.push(x);
    }
    Ok(ModelClassSurrogate::new(space, points, f64::INFINITY, ClassLabel::Sparse { k })?.with_seed(seed))
}
