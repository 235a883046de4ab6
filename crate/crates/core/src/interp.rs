//! Finite-rank Lipschitz approximation of a Lipschitz map `M: ℝⁿ → ℝ^t`.
//!
//! Three stages, each with an explicit Lipschitz budget:
//!
//! 1. `M₁ = M ∘ Φ_λ`, with `Φ_λ(x) = φ_λ(‖x‖)x` a radial cutoff that is the
//!    identity on the ball of radius `R₁` and 0 beyond `R₁ + 1/λ`. `Φ_λ` is
//!    `(1 + λR₁)`-Lipschitz.
//! 2. `M₂ = Σ_j w_j M₁(· − y_j)`, a discrete mollification with a bump
//!    stencil of radius `1/m`. As a convex combination of translates it keeps
//!    the Lipschitz constant, and moves values by at most
//!    `Lip(M₁) · Σ_j w_j ‖y_j‖`. `M₂ = M(0)` outside the cube `[−D, D]ⁿ`.
//! 3. `I_h M₂`, piecewise-linear interpolation on the Kuhn triangulation of
//!    `[−D, D]ⁿ`. Its range lies in the span of the vertex values.
//!
//! The result is rescaled by `γ/(γ+δ)` so that its constant is at most `γ`.
//! `D` grows like `1/λ`, so vertex values are computed on demand rather than
//! tabulated.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extend::LipschitzMap;
use crate::rng::{self, derive_seed};
use crate::spaces::{dist2, lp_norm, Exponent, FiniteNormedSpace};

pub const MAX_MESH_DIM: usize = 4;
pub const MAX_HALVINGS: usize = 40;

/// `Φ_λ(x) = φ_λ(‖x‖)x` with `φ_λ = 1` up to `R₁`, linear down to 0 at
/// `R₁ + 1/λ`.
#[derive(Debug, Clone, Copy)]
pub struct RadialCutoff {
    pub r1: f64,
    pub lambda: f64,
    pub norm: FiniteNormedSpace,
}

impl RadialCutoff {
    pub fn new(r1: f64, lambda: f64, norm: FiniteNormedSpace) -> Result<Self> {
        if !(r1 > 0.0 && lambda > 0.0 && r1.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidParameter("cutoff radius and slope must be positive".into()));
        }
        Ok(Self { r1, lambda, norm })
    }

    pub fn outer_radius(&self) -> f64 {
        self.r1 + 1.0 / self.lambda
    }

    /// `1 + λR₁`.
    pub fn lipschitz_bound(&self) -> f64 {
        1.0 + self.lambda * self.r1
    }

    fn factor(&self, t: f64) -> f64 {
        if t <= self.r1 {
            1.0
        } else {
            (1.0 - self.lambda * (t - self.r1)).max(0.0)
        }
    }
}

pub fn cutoff_eval(c: &RadialCutoff, x: &[f64]) -> Vec<f64> {
    let s = c.factor(lp_norm(x, c.norm.p()));
    x.iter().map(|v| s * v).collect()
}

/// Metric projection onto the closed ℓ₂ ball of radius `rho`.
pub fn ball_projection(x: &[f64], rho: f64) -> Vec<f64> {
    let r = lp_norm(x, Exponent::Finite(2.0));
    if r <= rho {
        x.to_vec()
    } else {
        x.iter().map(|v| v * rho / r).collect()
    }
}

/// Discrete mollifier: the bump `exp(−1/(1−|z|²))` sampled at `z = j·s·m`
/// for integer vectors `j` with `|z| < 1`, normalized to sum 1.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub m: f64,
    pub spacing: f64,
    offsets: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `m · Σ_j w_j ‖y_j‖_Y`, the first moment in units of `1/m`.
    pub moment: f64,
}

fn integer_ball(n: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-r..=r).map(move |j| {
                    let mut w = v.clone();
                    w.push(j);
                    w
                })
            })
            .collect();
    }
    out
}

impl Mollifier {
    /// Requires `spacing ≤ 1/(4m)` so the kernel is resolved. `norm` is the
    /// domain norm in which the moment is measured.
    pub fn new(norm: FiniteNormedSpace, m: f64, spacing: f64) -> Result<Self> {
        if !(m > 0.0 && spacing > 0.0) {
            return Err(Error::InvalidParameter("mollifier scale and spacing must be positive".into()));
        }
        let limit = 1.0 / (4.0 * m);
        if spacing > limit * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { spacing, m, limit });
        }
        let n = norm.dim();
        let reach = (1.0 / (m * spacing)).floor() as i64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for j in integer_ball(n, reach) {
            let y: Vec<f64> = j.iter().map(|&v| v as f64 * spacing).collect();
            let z2: f64 = y.iter().map(|v| (v * m).powi(2)).sum();
            if z2 < 1.0 {
                offsets.push(y);
                weights.push((-1.0 / (1.0 - z2)).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let moment = m * offsets
            .iter()
            .zip(&weights)
            .map(|(y, w)| w * lp_norm(y, norm.p()))
            .sum::<f64>();
        Ok(Self {
            m,
            spacing,
            offsets,
            weights,
            moment,
        })
    }

    /// Bound on the sup change when mollifying a `lip`-Lipschitz map.
    pub fn sup_change_bound(&self, lip: f64) -> f64 {
        lip * self.moment / self.m
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn apply(&self, f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        let mut p = vec![0.0; x.len()];
        for (y, w) in self.offsets.iter().zip(&self.weights) {
            for k in 0..x.len() {
                p[k] = x[k] - y[k];
            }
            let v = f(&p);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, b) in acc.iter_mut().zip(v) {
                *a += w * b;
            }
        }
        acc
    }
}

/// Vector values on the regular grid `origin + spacing · i`,
/// `0 ≤ i_k < shape[k]`, stored with the last axis fastest.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn from_fn(origin: Vec<f64>, spacing: f64, shape: Vec<usize>, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let total: usize = shape.iter().product();
        let mut g = Self {
            origin,
            spacing,
            shape,
            values: Vec::with_capacity(total),
        };
        for flat in 0..total {
            let x = g.point(&g.unflatten(flat));
            g.values.push(f(&x));
        }
        g
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.origin).map(|(&i, o)| o + i as f64 * self.spacing).collect()
    }
}

/// Discrete convolution with the mollifier at scale `m`, stencil spacing
/// equal to the grid spacing. Indices beyond the grid are clamped to its
/// edge, which keeps both the Lipschitz constant and the sup-change bound.
pub fn mollify_on_grid(samples: &GridFunction, m: f64) -> Result<GridFunction> {
    let n = samples.shape.len();
    if n == 0 || samples.values.len() != samples.shape.iter().product::<usize>() {
        return Err(Error::InvalidParameter("malformed grid".into()));
    }
    let moll = Mollifier::new(FiniteNormedSpace::l2(n)?, m, samples.spacing)?;
    let steps: Vec<Vec<i64>> = moll
        .offsets
        .iter()
        .map(|y| y.iter().map(|v| (v / samples.spacing).round() as i64).collect())
        .collect();
    let values = (0..samples.values.len())
        .into_par_iter()
        .map(|flat| {
            let idx = samples.unflatten(flat);
            let mut acc = vec![0.0; samples.values[flat].len()];
            let mut src = vec![0usize; n];
            for (step, w) in steps.iter().zip(&moll.weights) {
                for k in 0..n {
                    src[k] = (idx[k] as i64 - step[k]).clamp(0, samples.shape[k] as i64 - 1) as usize;
                }
                for (a, b) in acc.iter_mut().zip(&samples.values[samples.flatten(&src)]) {
                    *a += w * b;
                }
            }
            acc
        })
        .collect();
    Ok(GridFunction {
        origin: samples.origin.clone(),
        spacing: samples.spacing,
        shape: samples.shape.clone(),
        values,
    })
}

/// Uniform grid of `[−D, D]ⁿ` with `subdivisions` cells per axis, each cell
/// split into `n!` Kuhn simplices
/// `{x : x_{π(1)} ≥ x_{π(2)} ≥ … ≥ x_{π(n)}}` in local coordinates.
#[derive(Debug, Clone, Copy)]
pub struct KuhnMesh {
    pub n: usize,
    pub d: f64,
    pub subdivisions: u64,
    pub h: f64,
}

pub fn kuhn_triangulate(n: usize, d: f64, subdivisions: u64) -> Result<KuhnMesh> {
    if n == 0 || n > MAX_MESH_DIM {
        return Err(Error::InvalidParameter(format!("mesh dimension {n} not in 1..={MAX_MESH_DIM}")));
    }
    if !(d > 0.0) || subdivisions == 0 {
        return Err(Error::InvalidParameter("need D > 0 and at least one subdivision".into()));
    }
    Ok(KuhnMesh {
        n,
        d,
        subdivisions,
        h: 2.0 * d / subdivisions as f64,
    })
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

impl KuhnMesh {
    pub fn vertex_count(&self) -> u128 {
        (self.subdivisions as u128 + 1).saturating_pow(self.n as u32)
    }

    pub fn simplex_count(&self) -> u128 {
        (self.subdivisions as u128).saturating_pow(self.n as u32).saturating_mul(factorial(self.n))
    }

    pub fn vertex(&self, idx: &[u64]) -> Vec<f64> {
        idx.iter().map(|&i| -self.d + i as f64 * self.h).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.d)
    }

    /// Vertex indices of the `n!` simplices of the cell with lower corner
    /// `cell`.
    pub fn cell_simplices(&self, cell: &[u64]) -> Vec<Vec<Vec<u64>>> {
        permutations(self.n)
            .into_iter()
            .map(|perm| {
                let mut v = cell.to_vec();
                let mut verts = vec![v.clone()];
                for &k in &perm {
                    v[k] += 1;
                    verts.push(v.clone());
                }
                verts
            })
            .collect()
    }

    /// Vertices of the simplex containing `x ∈ Q` and the barycentric
    /// weights of `x`. Local coordinates are sorted in decreasing order,
    /// ties broken by lower axis first.
    pub fn locate(&self, x: &[f64]) -> (Vec<Vec<u64>>, Vec<f64>) {
        let n = self.n;
        let s = self.subdivisions;
        let mut cell = vec![0u64; n];
        let mut t = vec![0.0; n];
        for k in 0..n {
            let u = ((x[k] + self.d) / self.h).clamp(0.0, s as f64);
            let c = (u.floor() as u64).min(s - 1);
            cell[k] = c;
            t[k] = (u - c as f64).clamp(0.0, 1.0);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
        let mut verts = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n + 1);
        let mut v = cell;
        verts.push(v.clone());
        weights.push(1.0 - t[order[0]]);
        for j in 0..n {
            v[order[j]] += 1;
            verts.push(v.clone());
            let next = if j + 1 < n { t[order[j + 1]] } else { 0.0 };
            weights.push(t[order[j]] - next);
        }
        (verts, weights)
    }
}

/// Vertex values computed on demand from the vertex coordinates.
pub type VertexFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Values at mesh vertices: a table in row-major vertex order, or a function
/// of the vertex coordinates.
#[derive(Clone)]
pub enum VertexValues {
    Table(Vec<Vec<f64>>),
    Lazy(VertexFn),
}

impl std::fmt::Debug for VertexValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VertexValues::Table(t) => write!(f, "Table({} values)", t.len()),
            VertexValues::Lazy(_) => write!(f, "Lazy"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PLInterpolant {
    pub mesh: KuhnMesh,
    pub values: VertexValues,
    pub outside_value: Vec<f64>,
}

impl PLInterpolant {
    pub fn new(mesh: KuhnMesh, values: VertexValues, outside_value: Vec<f64>) -> Result<Self> {
        if let VertexValues::Table(t) = &values {
            if t.len() as u128 != mesh.vertex_count() {
                return Err(Error::InvalidParameter(format!(
                    "{} vertex values for {} vertices",
                    t.len(),
                    mesh.vertex_count()
                )));
            }
            if t.iter().any(|v| v.len() != outside_value.len()) {
                return Err(Error::InvalidParameter("vertex values of mixed dimension".into()));
            }
        }
        Ok(Self {
            mesh,
            values,
            outside_value,
        })
    }

    /// Tabulates `f` at every vertex.
    pub fn from_fn(mesh: KuhnMesh, outside_value: Vec<f64>, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<Self> {
        let count = mesh.vertex_count();
        if count > 50_000_000 {
            return Err(Error::InstanceTooLarge {
                size: count.min(usize::MAX as u128) as usize,
                limit: 50_000_000,
            });
        }
        let per_axis = mesh.subdivisions + 1;
        let table = (0..count as u64)
            .into_par_iter()
            .map(|mut flat| {
                let mut idx = vec![0u64; mesh.n];
                for k in (0..mesh.n).rev() {
                    idx[k] = flat % per_axis;
                    flat /= per_axis;
                }
                f(&mesh.vertex(&idx))
            })
            .collect();
        Self::new(mesh, VertexValues::Table(table), outside_value)
    }

    fn vertex_value(&self, idx: &[u64]) -> Vec<f64> {
        match &self.values {
            VertexValues::Table(t) => {
                let per_axis = self.mesh.subdivisions + 1;
                let flat = idx.iter().fold(0u64, |acc, &i| acc * per_axis + i);
                t[flat as usize].clone()
            }
            VertexValues::Lazy(f) => f(&self.mesh.vertex(idx)),
        }
    }

    /// Upper bound on the dimension of the span of the range.
    pub fn rank_bound(&self) -> u128 {
        self.mesh.vertex_count().saturating_add(1)
    }
}

pub fn pl_eval(f: &PLInterpolant, x: &[f64]) -> Vec<f64> {
    if x.len() != f.mesh.n || !f.mesh.contains(x) {
        return f.outside_value.clone();
    }
    let (verts, weights) = f.mesh.locate(x);
    let mut acc = vec![0.0; f.outside_value.len()];
    for (v, w) in verts.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (a, b) in acc.iter_mut().zip(f.vertex_value(v)) {
            *a += w * b;
        }
    }
    acc
}

/// Axis-aligned box standing in for the bounded set `S`.
#[derive(Debug, Clone)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParameter("box needs matching bounds with lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(n: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; n], vec![r; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }).collect())
            .collect()
    }

    pub fn max_norm(&self, p: Exponent) -> f64 {
        self.corners().iter().map(|c| lp_norm(c, p)).fold(0.0, f64::max)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::rng(seed);
        let mut pts = self.corners();
        pts.extend((0..count).map(|_| {
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..=*b) })
                .collect()
        }));
        pts
    }
}

/// The first two stages for a fixed map: cutoff and mollifier.
pub struct Stages {
    map: Arc<dyn LipschitzMap + Send + Sync>,
    pub gamma: f64,
    pub delta: f64,
    pub cutoff: RadialCutoff,
    pub mollifier: Mollifier,
    /// Half-width of the cube outside which `M₂ = M(0)`.
    pub d: f64,
    pub m0: Vec<f64>,
}

impl Stages {
    pub fn eval_m(&self, x: &[f64]) -> Vec<f64> {
        // dimensions are validated when the stages are built
        self.map.eval(x).expect("domain dimension checked at construction")
    }

    pub fn m1(&self, x: &[f64]) -> Vec<f64> {
        self.eval_m(&cutoff_eval(&self.cutoff, x))
    }

    pub fn m2(&self, x: &[f64]) -> Vec<f64> {
        if x.iter().any(|v| v.abs() >= self.d) {
            return self.m0.clone();
        }
        self.mollifier.apply(|y| self.m1(y), x)
    }

    pub fn n(&self) -> usize {
        self.cutoff.norm.dim()
    }

    pub fn mesh(&self, subdivisions: u64) -> Result<KuhnMesh> {
        kuhn_triangulate(self.n(), self.d, subdivisions)
    }

    /// Subdivision count whose mesh size is closest to `h`.
    pub fn subdivisions_for(&self, h: f64) -> u64 {
        ((2.0 * self.d / h).round() as u64).max(1)
    }

    /// `c · I_h M₂` on the mesh with `subdivisions` cells per axis.
    pub fn interpolant(self: &Arc<Self>, subdivisions: u64, scale: f64) -> Result<PLInterpolant> {
        let mesh = self.mesh(subdivisions)?;
        let st = Arc::clone(self);
        let values = VertexValues::Lazy(Arc::new(move |x: &[f64]| st.m2(x).into_iter().map(|v| v * scale).collect()));
        PLInterpolant::new(mesh, values, self.m0.iter().map(|v| v * scale).collect())
    }
}

/// Largest `‖f(x) − f(x′)‖₂ / ‖x − x′‖_Y` over the given pairs.
fn audit_pairs(f: impl Fn(&[f64]) -> Vec<f64> + Sync, y: &FiniteNormedSpace, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    pairs
        .par_iter()
        .map(|(a, b)| {
            let d = y.dist(a, b);
            if d == 0.0 {
                0.0
            } else {
                dist2(&f(a), &f(b)) / d
            }
        })
        .reduce(|| 0.0, f64::max)
}

fn random_unit(n: usize, rng: &mut rng::Rng) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let r = lp_norm(&u, Exponent::Finite(2.0));
        if r > 0.0 {
            return u.into_iter().map(|v| v / r).collect();
        }
    }
}

/// Pairs `(x, x + r·u)` with `x` uniform in `s` and `|u|₂ = 1`.
#[cfg(test)]
fn local_pairs(s: &BoxSet, r: f64, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng::rng(seed);
    s.sample(count, derive_seed(seed, 1))
        .into_iter()
        .map(|x| {
            let u = random_unit(x.len(), &mut rng);
            let y = x.iter().zip(&u).map(|(a, b)| a + r * b).collect();
            (x, y)
        })
        .collect()
}

/// Pairs at several separations around `S`, both cutoff spheres, and the
/// whole cube.
fn global_pairs(st: &Stages, s: &BoxSet, h: f64, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = st.n();
    let mut rng = rng::rng(seed);
    let scales = [h / 16.0, h / 2.0, 2.0 * h, 0.1, 1.0, 10.0, st.d / 2.0];
    let regions = 4;
    let per = (count / (scales.len() * regions)).max(1);
    let y = st.cutoff.norm;
    let on_sphere = |rng: &mut rng::Rng, radius: f64| -> Vec<f64> {
        let u = random_unit(n, rng);
        let r = lp_norm(&u, y.p());
        u.into_iter().map(|v| v * radius / r).collect()
    };
    let mut pairs = Vec::with_capacity(per * scales.len() * regions);
    for &r in &scales {
        for region in 0..regions {
            for _ in 0..per {
                let x: Vec<f64> = match region {
                    0 => s.lo.iter().zip(&s.hi).map(|(a, b)| if a == b { *a } else { rng.random_range(*a..=*b) }).collect(),
                    1 => {
                        let t = st.cutoff.r1 + rng.random_range(-2.0 * h..2.0 * h);
                        on_sphere(&mut rng, t)
                    }
                    2 => {
                        let t = st.cutoff.outer_radius() + rng.random_range(-2.0 * h..2.0 * h);
                        on_sphere(&mut rng, t)
                    }
                    _ => (0..n).map(|_| rng.random_range(-st.d..st.d)).collect(),
                };
                let u = random_unit(n, &mut rng);
                let x2 = x.iter().zip(&u).map(|(a, b)| a + r * b).collect();
                pairs.push((x, x2));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone)]
pub struct Lemma24Audit {
    pub delta_used: f64,
    pub r1: f64,
    pub lambda: f64,
    pub m: f64,
    pub d: f64,
    pub h: f64,
    pub subdivisions: u64,
    pub halvings: usize,
    /// Provable bound on `sup ‖M₁ − M₂‖`.
    pub mollify_bound: f64,
    /// `max_S ‖I_h M₂ − M₂‖`.
    pub interp_sup_on_s: f64,
    /// Audited constant of `I_h M₂ − M₂` on `S`.
    pub lip_excess_on_s: f64,
    /// Audited constant of `I_h M₂` over the cube.
    pub lip_interp: f64,
    /// Audited constant of the final map.
    pub lip_final: f64,
    /// `max_S ‖M − M̄‖`.
    pub deviation_on_s: f64,
    pub rank_bound: u128,
}

pub struct Lemma24Result {
    pub stages: Arc<Stages>,
    /// `M̄ = γ/(γ+δ) · I_h M₂`.
    pub approximant: PLInterpolant,
    pub audit: Lemma24Audit,
}

#[derive(Debug, Clone, Copy)]
pub struct Lemma24Options {
    pub y_norm: Exponent,
    /// Sample points of `S` used by the sup audits.
    pub samples: usize,
    /// Pairs used by each Lipschitz audit.
    pub audit_pairs: usize,
    pub max_halvings: usize,
    pub seed: u64,
}

impl Default for Lemma24Options {
    fn default() -> Self {
        Self {
            y_norm: Exponent::Finite(2.0),
            samples: 4000,
            audit_pairs: 10_000,
            max_halvings: MAX_HALVINGS,
            seed: 0,
        }
    }
}

/// Builds the cutoff and mollifier stages for `map` on `s`.
///
/// The error budget `eps` is split as `eps/4` for mollification, `eps/4`
/// for interpolation and `eps/2` for the final rescaling; `delta` is lowered
/// when needed so that the rescaling stays within its share.
pub fn lemma24_stages(
    map: Arc<dyn LipschitzMap + Send + Sync>,
    s: &BoxSet,
    gamma: f64,
    eps: f64,
    delta: f64,
    opts: &Lemma24Options,
) -> Result<Arc<Stages>> {
    let n = s.dim();
    if n > 3 {
        return Err(Error::InvalidParameter(format!("pipeline supports n <= 3, got {n}")));
    }
    if map.domain().dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: map.domain().dim(),
        });
    }
    if !(gamma > 0.0 && eps > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter("gamma, eps and delta must be positive".into()));
    }
    let y = FiniteNormedSpace::new(n, opts.y_norm)?;
    let pts = s.sample(opts.samples, derive_seed(opts.seed, 0));
    let max_m = pts
        .iter()
        .map(|x| map.eval(x).map(|v| lp_norm(&v, Exponent::Finite(2.0))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let delta = delta.min(eps * gamma / (2.0 * (max_m + eps / 2.0)));

    // unit-scale stencil gives the moment independent of m
    let unit = Mollifier::new(y, 1.0, 0.25)?;
    let m = ((gamma + delta / 2.0) * unit.moment / (eps / 4.0)).max(1.0);
    let mollifier = Mollifier::new(y, m, 1.0 / (4.0 * m))?;
    // the stencil reaches ‖·‖_Y distance at most n^{max(0, 1/p − 1/2)}/m
    let reach = match opts.y_norm {
        Exponent::Finite(p) if p < 2.0 => (n as f64).powf(1.0 / p - 0.5),
        _ => 1.0,
    } / m;
    let r1 = s.max_norm(opts.y_norm) + 2.0 * reach + 1e-3;
    let lambda = delta / (2.0 * gamma * r1);
    let cutoff = RadialCutoff::new(r1, lambda, y)?;
    // ‖·‖_∞ ≤ ‖·‖_p for every p, so the ball of radius R₂ lies in [−R₂, R₂]ⁿ
    let r2 = cutoff.outer_radius();
    let d = r2 + 1.0 / m;
    let m0 = map.eval(&vec![0.0; n])?;

    // certificate: the map must respect gamma near S and across the cutoff ball
    let mut rng = rng::rng(derive_seed(opts.seed, 2));
    let ball = BoxSet::cube(n, r1)?;
    let cert_pairs: Vec<(Vec<f64>, Vec<f64>)> = ball
        .sample(1000, derive_seed(opts.seed, 3))
        .into_iter()
        .map(|x| {
            let u = random_unit(n, &mut rng);
            let r = 10f64.powf(rng.random_range(-4.0..0.5));
            let x2 = x.iter().zip(&u).map(|(a, b)| a + r * b).collect();
            (x, x2)
        })
        .collect();
    let measured = audit_pairs(|x| map.eval(x).expect("dimension checked"), &y, &cert_pairs);
    if measured > gamma * (1.0 + 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "map exceeds its Lipschitz certificate: measured {measured} > {gamma}"
        )));
    }
    Ok(Arc::new(Stages {
        map,
        gamma,
        delta,
        cutoff,
        mollifier,
        d,
        m0,
    }))
}

/// Local positions per axis at which cells are probed.
const CELL_POSITIONS: usize = 5;

/// Points at the fixed local positions `(j + ½)/5` inside mesh cells that
/// meet `S`: every such cell when there are at most `cells` of them,
/// otherwise a random selection. Probing every level at the same local
/// positions keeps the error estimates comparable across mesh sizes.
fn cell_points(mesh: &KuhnMesh, s: &BoxSet, cells: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = mesh.n;
    let ranges: Vec<(u64, u64)> = (0..n)
        .map(|k| {
            let lo = (((s.lo[k] + mesh.d) / mesh.h).floor().max(0.0) as u64).min(mesh.subdivisions - 1);
            let hi = (((s.hi[k] + mesh.d) / mesh.h).ceil() as u64).clamp(lo + 1, mesh.subdivisions);
            (lo, hi)
        })
        .collect();
    let total: u128 = ranges.iter().map(|(a, b)| (b - a) as u128).product();
    let chosen: Vec<Vec<u64>> = if total <= cells as u128 {
        let mut all = vec![vec![]];
        for &(a, b) in &ranges {
            all = all
                .into_iter()
                .flat_map(|c: Vec<u64>| {
                    (a..b).map(move |i| {
                        let mut c = c.clone();
                        c.push(i);
                        c
                    })
                })
                .collect();
        }
        all
    } else {
        let mut rng = rng::rng(seed);
        (0..cells).map(|_| ranges.iter().map(|&(a, b)| rng.random_range(a..b)).collect()).collect()
    };
    let offsets: Vec<f64> = (0..CELL_POSITIONS).map(|j| (j as f64 + 0.5) / CELL_POSITIONS as f64).collect();
    let mut local = vec![vec![]];
    for _ in 0..n {
        local = local
            .into_iter()
            .flat_map(|v: Vec<f64>| {
                offsets.iter().map(move |&o| {
                    let mut v = v.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    let inside = |x: &[f64]| x.iter().zip(s.lo.iter().zip(&s.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b);
    chosen
        .iter()
        .flat_map(|c| {
            local.iter().map(move |o| {
                c.iter()
                    .zip(o)
                    .map(|(&ci, oi)| -mesh.d + (ci as f64 + oi) * mesh.h)
                    .collect::<Vec<f64>>()
            })
        })
        .filter(|x| inside(x))
        .collect()
}

/// Unit vectors along the axes and the diagonals `{−1, 0, 1}ⁿ` (one of each
/// ± pair).
fn probe_directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = vec![vec![]];
    for _ in 0..n {
        dirs = dirs
            .into_iter()
            .flat_map(|v: Vec<f64>| {
                [-1.0, 0.0, 1.0].into_iter().map(move |e| {
                    let mut v = v.clone();
                    v.push(e);
                    v
                })
            })
            .collect();
    }
    dirs.into_iter()
        .filter(|v| v.iter().find(|e| **e != 0.0) == Some(&1.0))
        .map(|v| {
            let r = lp_norm(&v, Exponent::Finite(2.0));
            v.into_iter().map(|e| e / r).collect()
        })
        .collect()
}

/// Sup error and Lipschitz excess of `I_h M₂ − M₂` on `S`, probed at fixed
/// positions of about `samples / 5ⁿ` cells, with audit pairs at separation
/// `h/16` along the axes and diagonals.
fn interp_errors_on_s(st: &Arc<Stages>, interp: &PLInterpolant, s: &BoxSet, samples: usize, seed: u64) -> (f64, f64) {
    let err = |x: &[f64]| -> Vec<f64> {
        let a = pl_eval(interp, x);
        let b = st.m2(x);
        a.iter().zip(&b).map(|(u, v)| u - v).collect()
    };
    let n = s.dim();
    let cells = (samples / CELL_POSITIONS.pow(n as u32)).max(1);
    let pts = cell_points(&interp.mesh, s, cells, seed);
    let dirs = probe_directions(n);
    let r = interp.mesh.h / 16.0;
    let y = st.cutoff.norm;
    pts.par_iter()
        .map(|x| {
            let e0 = err(x);
            let sup = lp_norm(&e0, Exponent::Finite(2.0));
            let lip = dirs
                .iter()
                .map(|d| {
                    let x2: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + r * b).collect();
                    dist2(&e0, &err(&x2)) / y.dist(x, &x2)
                })
                .fold(0.0, f64::max);
            (sup, lip)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// Halves the mesh size until, on `S`, the interpolation error is within
/// `eps/4` and `I_h M₂ − M₂` has constant at most `δ/2`, and the audited
/// constant of `I_h M₂` over the cube is at most `γ + δ`. Returns
/// `M̄ = γ/(γ+δ) I_h M₂` with its audits.
pub fn lemma24_pipeline(
    map: Arc<dyn LipschitzMap + Send + Sync>,
    s: &BoxSet,
    gamma: f64,
    eps: f64,
    delta: f64,
    opts: &Lemma24Options,
) -> Result<Lemma24Result> {
    let st = lemma24_stages(Arc::clone(&map), s, gamma, eps, delta, opts)?;
    let delta = st.delta;
    let side = s.lo.iter().zip(&s.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let h0 = if side > 0.0 { (side / 4.0).min(0.25) } else { 0.25 };
    let mut subdivisions = st.subdivisions_for(h0);
    let mut last = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    for halvings in 0..=opts.max_halvings {
        let interp = st.interpolant(subdivisions, 1.0)?;
        let h = interp.mesh.h;
        let seed = derive_seed(opts.seed, 100 + halvings as u64);
        let (sup, excess) = interp_errors_on_s(&st, &interp, s, opts.samples, seed);
        last = (h, sup, excess, f64::NAN);
        if sup <= eps / 4.0 && excess <= delta / 2.0 {
            let pairs = global_pairs(&st, s, h, opts.audit_pairs, derive_seed(seed, 1));
            let lip_interp = audit_pairs(|x| pl_eval(&interp, x), &st.cutoff.norm, &pairs);
            last.3 = lip_interp;
            if lip_interp <= gamma + delta {
                let scale = gamma / (gamma + delta);
                let approximant = st.interpolant(subdivisions, scale)?;
                let lip_final = audit_pairs(|x| pl_eval(&approximant, x), &st.cutoff.norm, &pairs);
                let deviation_on_s = s
                    .sample(opts.samples, derive_seed(seed, 2))
                    .par_iter()
                    .map(|x| dist2(&st.eval_m(x), &pl_eval(&approximant, x)))
                    .reduce(|| 0.0, f64::max);
                let audit = Lemma24Audit {
                    delta_used: delta,
                    r1: st.cutoff.r1,
                    lambda: st.cutoff.lambda,
                    m: st.mollifier.m,
                    d: st.d,
                    h,
                    subdivisions,
                    halvings,
                    mollify_bound: st.mollifier.sup_change_bound(gamma * st.cutoff.lipschitz_bound()),
                    interp_sup_on_s: sup,
                    lip_excess_on_s: excess,
                    lip_interp,
                    lip_final,
                    deviation_on_s,
                    rank_bound: approximant.rank_bound(),
                };
                return Ok(Lemma24Result {
                    stages: st,
                    approximant,
                    audit,
                });
            }
        }
        subdivisions *= 2;
    }
    Err(Error::MeshBudgetExhausted {
        h: last.0,
        sup_error: last.1,
        lip_excess: last.2,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub h: f64,
    pub sup_err: f64,
    pub lip_excess: f64,
}

/// Sup error and Lipschitz excess of `I_h M₂ − M₂` on `S` for each mesh size
/// `h0, h0/2, …` (`levels` entries).
pub fn convergence_table(
    st: &Arc<Stages>,
    s: &BoxSet,
    h0: f64,
    levels: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let mut sub = st.subdivisions_for(h0);
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let interp = st.interpolant(sub, 1.0)?;
        let (sup_err, lip_excess) = interp_errors_on_s(st, &interp, s, samples, derive_seed(seed, level as u64));
        rows.push(ConvergenceRow {
            h: interp.mesh.h,
            sup_err,
            lip_excess,
        });
        sub *= 2;
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
