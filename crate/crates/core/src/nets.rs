//! ε-nets, greedy packings and two-sided entropy-number brackets.
//!
//! All coverings are inner coverings: centers are class points. Greedy
//! selection is farthest-point-first starting from point 0, with ties going to
//! the lowest index.

use rayon::prelude::*;

use crate::combinations::for_each_combination;
use crate::error::{Error, Result};
use crate::spaces::ModelClassSurrogate;

const PAR_THRESHOLD: usize = 512;
pub const EXACT_COVER_LIMIT: usize = 14;

/// A finite net: every class point is within `radius` of a center.
#[derive(Debug, Clone)]
pub struct Net {
    pub centers: Vec<Vec<f64>>,
    pub center_indices: Vec<usize>,
    pub radius: f64,
}

impl Net {
    pub fn len(&self) -> usize {
        self.centers.len()
    }
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Packing {
    pub points: Vec<Vec<f64>>,
    pub indices: Vec<usize>,
    /// Minimum pairwise distance; `+∞` for a single point.
    pub separation: f64,
}

/// Two-sided estimate of the entropy number ε_n (budget 2ⁿ balls).
#[derive(Debug, Clone)]
pub struct EntropyBracket {
    pub n: u32,
    pub lower: f64,
    pub upper: f64,
    pub packing_witness: Vec<Vec<f64>>,
    pub cover_centers: Vec<Vec<f64>>,
}

impl EntropyBracket {
    pub fn cover_size(&self) -> usize {
        self.cover_centers.len()
    }
}

/// Farthest-point traversal of `k`.
///
/// `order[i]` is the i-th selected index and `insertion[i]` its distance to
/// the previously selected points (`+∞` for the first). After the loop,
/// `nearest[j]` holds the distance from point j to the selected set.
struct Traversal {
    order: Vec<usize>,
    insertion: Vec<f64>,
    nearest: Vec<f64>,
}

fn traverse(k: &ModelClassSurrogate, count: usize) -> Traversal {
    let pts = k.points();
    let space = k.space();
    let n = pts.len();
    let count = count.min(n);
    let mut nearest = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(count);
    let mut insertion = Vec::with_capacity(count);
    let mut next = 0usize;
    let mut next_dist = f64::INFINITY;
    for _ in 0..count {
        order.push(next);
        insertion.push(next_dist);
        let c = &pts[next];
        let update = |(d, x): (&mut f64, &Vec<f64>)| {
            let dc = space.dist(c, x);
            if dc < *d {
                *d = dc;
            }
        };
        if n >= PAR_THRESHOLD {
            nearest.par_iter_mut().zip(pts.par_iter()).for_each(update);
        } else {
            nearest.iter_mut().zip(pts.iter()).for_each(update);
        }
        // strict comparison keeps the lowest index among ties
        next_dist = -1.0;
        for (j, &d) in nearest.iter().enumerate() {
            if d > next_dist {
                next_dist = d;
                next = j;
            }
        }
    }
    Traversal {
        order,
        insertion,
        nearest,
    }
}

/// Farthest-point-first selection of `m` points and their separation.
pub fn greedy_packing(k: &ModelClassSurrogate, m: usize) -> Result<Packing> {
    if m == 0 {
        return Err(Error::InvalidParameter("packing size must be at least 1".into()));
    }
    if m > k.len() {
        return Err(Error::TooFewPoints {
            requested: m,
            available: k.len(),
        });
    }
    let t = traverse(k, m);
    // farthest-point insertion distances are nonincreasing, so the last one is
    // the minimum pairwise distance of the selection
    let separation = t.insertion[1..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Packing {
        points: t.order.iter().map(|&i| k.points()[i].clone()).collect(),
        indices: t.order,
        separation,
    })
}

/// Greedy inner cover with at most `m` centers.
pub fn greedy_cover(k: &ModelClassSurrogate, m: usize) -> Result<Net> {
    if m == 0 {
        return Err(Error::InvalidParameter("cover needs at least one center".into()));
    }
    if k.is_empty() {
        return Err(Error::Empty("model class"));
    }
    let t = traverse(k, m);
    let radius = t.nearest.iter().copied().fold(0.0, f64::max);
    Ok(Net {
        centers: t.order.iter().map(|&i| k.points()[i].clone()).collect(),
        center_indices: t.order,
        radius,
    })
}

/// Bracket `lower ≤ ε_n(K) ≤ upper` for inner coverings with 2ⁿ centers.
///
/// The lower bound is half the separation of 2ⁿ+1 greedily packed points: no
/// 2ⁿ balls of radius below that can cover them. It is 0 when the class has
/// at most 2ⁿ points.
pub fn entropy_bracket(k: &ModelClassSurrogate, n: u32) -> Result<EntropyBracket> {
    if n > 40 {
        return Err(Error::InvalidParameter(format!("degenerate budget n = {n}")));
    }
    if k.is_empty() {
        return Err(Error::Empty("model class"));
    }
    let budget = 1usize << n;
    let t = traverse(k, budget + 1);
    let centers = budget.min(k.len());
    let upper = if k.len() > budget { t.insertion[budget] } else { 0.0 };
    let (lower, packing_witness) = if k.len() > budget {
        let sep = t.insertion[1..].iter().copied().fold(f64::INFINITY, f64::min);
        (sep / 2.0, t.order.iter().map(|&i| k.points()[i].clone()).collect())
    } else {
        (0.0, Vec::new())
    };
    Ok(EntropyBracket {
        n,
        lower,
        upper,
        packing_witness,
        cover_centers: t.order[..centers].iter().map(|&i| k.points()[i].clone()).collect(),
    })
}

/// Exact inner covering radius with `m` centers by enumerating every
/// `m`-subset. Oracle for small instances only.
pub fn exact_cover_radius(k: &ModelClassSurrogate, m: usize) -> Result<f64> {
    let n = k.len();
    if n > EXACT_COVER_LIMIT {
        return Err(Error::InstanceTooLarge {
            size: n,
            limit: EXACT_COVER_LIMIT,
        });
    }
    if n == 0 {
        return Err(Error::Empty("model class"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("cover needs at least one center".into()));
    }
    if m >= n {
        return Ok(0.0);
    }
    let pts = k.points();
    let d: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| k.space().dist(a, b)).collect())
        .collect();
    let mut best = f64::INFINITY;
    for_each_combination(n, m, |centers| {
        let r = (0..n)
            .map(|j| centers.iter().map(|&c| d[c][j]).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        best = best.min(r);
        true
    });
    Ok(best)
}

/// Smallest greedy prefix whose covering radius is at most `eps`.
pub fn build_net(k: &ModelClassSurrogate, eps: f64) -> Result<Net> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("net radius {eps} must be positive")));
    }
    if k.is_empty() {
        return Err(Error::Empty("model class"));
    }
    let t = traverse(k, k.len());
    // covering radius of the first m centers is the (m+1)-th insertion distance
    let m = (1..k.len()).find(|&m| t.insertion[m] <= eps).unwrap_or(k.len());
    let radius = if m < k.len() { t.insertion[m] } else { 0.0 };
    Ok(Net {
        centers: t.order[..m].iter().map(|&i| k.points()[i].clone()).collect(),
        center_indices: t.order[..m].to_vec(),
        radius,
    })
}

/// Greedy cover counts at several radii from one traversal: entry `i` is
/// the number of centers [`build_net`] would use for `radii[i]`.
pub fn greedy_cover_counts(k: &ModelClassSurrogate, radii: &[f64]) -> Result<Vec<usize>> {
    if k.is_empty() {
        return Err(Error::Empty("model class"));
    }
    let t = traverse(k, k.len());
    Ok(radii
        .iter()
        .map(|&eps| (1..k.len()).find(|&m| t.insertion[m] <= eps).unwrap_or(k.len()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{generate_diag_class, AlphaSequence, ClassLabel, FiniteNormedSpace};

    fn cloud(points: Vec<Vec<f64>>) -> ModelClassSurrogate {
        let dim = points[0].len();
        ModelClassSurrogate::new(FiniteNormedSpace::l2(dim).unwrap(), points, 0.0, ClassLabel::Custom("t".into()))
            .unwrap()
    }

    #[test]
    fn two_point_class() {
        let k = cloud(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(greedy_packing(&k, 2).unwrap().separation, 1.0);
        assert_eq!(greedy_packing(&k, 1).unwrap().separation, f64::INFINITY);
        assert_eq!(greedy_cover(&k, 1).unwrap().radius, 1.0);
        assert_eq!(greedy_cover(&k, 2).unwrap().radius, 0.0);
        assert_eq!(exact_cover_radius(&k, 1).unwrap(), 1.0);
        assert!(matches!(greedy_packing(&k, 3), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn exact_cover_three_points() {
        let k = cloud(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(exact_cover_radius(&k, 2).unwrap(), 1.0);
        assert_eq!(exact_cover_radius(&k, 3).unwrap(), 0.0);
    }

    #[test]
    fn exact_cover_rejects_large() {
        let pts: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64]).collect();
        assert!(matches!(exact_cover_radius(&cloud(pts), 2), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn diag_packing_matches_enumeration() {
        let a = AlphaSequence::new(2.0).unwrap();
        let k = generate_diag_class(&a, 8).unwrap();
        let p = greedy_packing(&k, 3).unwrap();
        assert!(p.indices.contains(&0), "alpha_1 e_1 must be selected");
        // closest selected pair, recomputed from the orthogonality formula
        let alpha_of = |i: usize| if i < 8 { a.alpha(i + 1) } else { 0.0 };
        let mut closest = f64::INFINITY;
        for x in 0..3 {
            for y in x + 1..3 {
                let (i, j) = (p.indices[x], p.indices[y]);
                closest = closest.min((alpha_of(i).powi(2) + alpha_of(j).powi(2)).sqrt());
            }
        }
        assert_eq!(p.separation, closest);
        // enumerate every 3-subset: greedy is within a factor 2 of the best
        let pts = k.points();
        let mut best = 0.0_f64;
        for_each_combination(pts.len(), 3, |c| {
            let mut s = f64::INFINITY;
            for x in 0..3 {
                for y in x + 1..3 {
                    s = s.min(k.space().dist(&pts[c[x]], &pts[c[y]]));
                }
            }
            best = best.max(s);
            true
        });
        assert!(p.separation >= best / 2.0);
    }

    #[test]
    fn diag_entropy_lower_bound() {
        let a = AlphaSequence::new(2.0).unwrap();
        let k = generate_diag_class(&a, 64).unwrap();
        for n in 1..=5 {
            let b = entropy_bracket(&k, n).unwrap();
            assert!(b.lower >= a.alpha(1 << n) / 2.0);
            assert!(b.lower <= b.upper);
            assert_eq!(b.packing_witness.len(), (1 << n) + 1);
            assert_eq!(b.cover_size(), 1 << n);
        }
    }

    #[test]
    fn single_point_bracket() {
        let k = cloud(vec![vec![0.3, 0.1]]);
        let b = entropy_bracket(&k, 2).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert!(b.packing_witness.is_empty());
    }

    #[test]
    fn build_net_limits() {
        let a = AlphaSequence::new(2.0).unwrap();
        let k = generate_diag_class(&a, 16).unwrap();
        let big = build_net(&k, 10.0).unwrap();
        assert_eq!(big.len(), 1);
        let tiny = build_net(&k, 1e-9).unwrap();
        assert_eq!(tiny.len(), k.len());
        assert_eq!(tiny.radius, 0.0);
        // alpha_1 e_1 and alpha_2 e_2 are 1.118 apart, so radius 0.3 needs two centers
        let net = build_net(&k, 0.3).unwrap();
        assert!(net.len() >= 2);
        assert!(net.radius <= 0.3);
        assert!(build_net(&k, 0.0).is_err());
    }

    #[test]
    fn cover_counts_agree_with_build_net() {
        let a = AlphaSequence::new(1.0).unwrap();
        let k = generate_diag_class(&a, 32).unwrap();
        let radii = [0.9, 0.6, 0.4, 0.2];
        let counts = greedy_cover_counts(&k, &radii).unwrap();
        for (r, c) in radii.iter().zip(counts) {
            assert_eq!(build_net(&k, *r).unwrap().len(), c);
        }
    }
}
