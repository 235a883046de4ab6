//! Continuous encoder/decoder pairs for the diagonal class
//! `K(α) = {α_j e_j} ∪ {0}` whose errors decay while the decoder's Lipschitz
//! constant blows up.
//!
//! `a_k` sends `α_j e_j` to `α_{min(j,k)}` and 0 to `α_k`. `M_k` is the
//! piecewise-linear path through `0, α_k e_k, α_{k−1} e_{k−1}, …, α_1 e_1`,
//! parametrized by `t ∈ [0, α_1]` with breakpoints `0, α_k, …, α_1`.

use crate::error::{Error, Result};
use crate::nets::entropy_bracket;
use crate::spaces::{dist2, generate_diag_class, AlphaSequence};

#[derive(Debug, Clone, Copy)]
pub struct DiagMaps {
    pub k: usize,
    pub alpha: AlphaSequence,
    /// Ambient dimension (number of atoms in the truncated class).
    pub m: usize,
}

impl DiagMaps {
    pub fn new(k: usize, alpha: AlphaSequence, m: usize) -> Result<Self> {
        if k == 0 || k > m {
            return Err(Error::InvalidParameter(format!("truncation {k} not in 1..={m}")));
        }
        Ok(Self { k, alpha, m })
    }

    fn atom(&self, j: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        x[j - 1] = self.alpha.alpha(j);
        x
    }

    /// Slopes of the `k` segments of `M_k`, lowest segment first.
    pub fn segment_slopes(&self) -> Vec<f64> {
        let a = |j| self.alpha.alpha(j);
        let mut out = vec![1.0];
        for i in (1..self.k).rev() {
            out.push((a(i).powi(2) + a(i + 1).powi(2)).sqrt() / (a(i) - a(i + 1)));
        }
        out
    }

    /// Exact Lipschitz constant of the piecewise-linear decoder.
    pub fn decoder_lipschitz(&self) -> f64 {
        self.segment_slopes().into_iter().fold(0.0, f64::max)
    }
}

/// Index `j` of the atom `α_j e_j`, or 0 for the origin.
fn atom_index(maps: &DiagMaps, x: &[f64]) -> Result<usize> {
    if x.len() != maps.m {
        return Err(Error::DimensionMismatch {
            expected: maps.m,
            got: x.len(),
        });
    }
    let nonzero: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    match nonzero[..] {
        [] => Ok(0),
        [i] if x[i] == maps.alpha.alpha(i + 1) => Ok(i + 1),
        _ => Err(Error::NotAnAtom),
    }
}

pub fn diag_encode(maps: &DiagMaps, x: &[f64]) -> Result<f64> {
    let j = atom_index(maps, x)?;
    let idx = if j == 0 { maps.k } else { j.min(maps.k) };
    Ok(maps.alpha.alpha(idx))
}

pub fn diag_decode(maps: &DiagMaps, t: f64) -> Vec<f64> {
    let a = |j| maps.alpha.alpha(j);
    if t <= 0.0 {
        return vec![0.0; maps.m];
    }
    if t >= a(1) {
        return maps.atom(1);
    }
    if t <= a(maps.k) {
        let mut x = maps.atom(maps.k);
        x[maps.k - 1] = t;
        return x;
    }
    // α_{i+1} < t ≤ α_i for some i < k
    let i = (1..maps.k).rev().find(|&i| t <= a(i)).expect("t is below α_1");
    if t == a(i) {
        return maps.atom(i);
    }
    let s = (t - a(i + 1)) / (a(i) - a(i + 1));
    let mut x = vec![0.0; maps.m];
    x[i - 1] = s * a(i);
    x[i] = (1.0 - s) * a(i + 1);
    x
}

#[derive(Debug, Clone)]
pub struct TruncationRow {
    pub k: usize,
    pub sup_error: f64,
    pub sqrt2_alpha_k: f64,
    /// `α_{k−1}/(α_{k−1} − α_k)`; absent for `k = 1`.
    pub lip_lower: Option<f64>,
    pub lip_measured: f64,
    pub encoder_lip: f64,
}

impl TruncationRow {
    pub fn holds(&self) -> bool {
        self.sup_error < self.sqrt2_alpha_k
            && self.lip_lower.is_none_or(|l| self.lip_measured >= l)
            && self.encoder_lip <= 1.0 + 1e-12
    }
}

#[derive(Debug, Clone)]
pub struct EntropyRow {
    pub n: u32,
    pub entropy_lower: f64,
    pub alpha_2n_half: f64,
}

impl EntropyRow {
    pub fn holds(&self) -> bool {
        self.entropy_lower >= self.alpha_2n_half
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub r: f64,
    pub m: usize,
    pub truncations: Vec<TruncationRow>,
    pub entropy: Vec<EntropyRow>,
}

impl CounterexampleReport {
    pub fn holds(&self) -> bool {
        self.truncations.iter().all(TruncationRow::holds) && self.entropy.iter().all(EntropyRow::holds)
    }
}

/// Runs `k = 1..=k_max` and `n = 1..=n_max` on the class truncated to
/// `m = max(2^{n_max+1}, k_max)` atoms.
pub fn counterexample_report(alpha: &AlphaSequence, k_max: usize, n_max: u32) -> Result<CounterexampleReport> {
    if k_max == 0 || n_max > 20 {
        return Err(Error::InvalidParameter("need k_max >= 1 and n_max <= 20".into()));
    }
    let m = (1usize << (n_max + 1)).max(k_max);
    let class = generate_diag_class(alpha, m)?;
    let pts = class.points();
    let mut truncations = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let maps = DiagMaps::new(k, *alpha, m)?;
        let codes: Vec<f64> = pts.iter().map(|x| diag_encode(&maps, x)).collect::<Result<_>>()?;
        let sup_error = pts
            .iter()
            .zip(&codes)
            .map(|(x, &t)| dist2(x, &diag_decode(&maps, t)))
            .fold(0.0, f64::max);
        let mut encoder_lip = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                encoder_lip = encoder_lip.max((codes[i] - codes[j]).abs() / dist2(&pts[i], &pts[j]));
            }
        }
        let lip_lower = (k >= 2).then(|| {
            let (prev, cur) = (alpha.alpha(k - 1), alpha.alpha(k));
            prev / (prev - cur)
        });
        truncations.push(TruncationRow {
            k,
            sup_error,
            sqrt2_alpha_k: 2f64.sqrt() * alpha.alpha(k),
            lip_lower,
            lip_measured: maps.decoder_lipschitz(),
            encoder_lip,
        });
    }
    let entropy = (1..=n_max)
        .map(|n| {
            Ok(EntropyRow {
                n,
                entropy_lower: entropy_bracket(&class, n)?.lower,
                alpha_2n_half: alpha.alpha(1 << n) / 2.0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CounterexampleReport {
        r: alpha.r(),
        m,
        truncations,
        entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r2() -> AlphaSequence {
        AlphaSequence::new(2.0).unwrap()
    }

    #[test]
    fn encode_examples() {
        let maps = DiagMaps::new(3, r2(), 8).unwrap();
        assert_eq!(diag_encode(&maps, &maps.atom(1)).unwrap(), 1.0);
        let a3 = diag_encode(&maps, &[0.0; 8]).unwrap();
        assert!((a3 - 1.0 / (1.0 + 3f64.log2())).abs() < 1e-15);
        assert!((a3 - 0.3869).abs() < 1e-4);
        assert_eq!(diag_encode(&maps, &maps.atom(5)).unwrap(), r2().alpha(3));
        let mut bad = maps.atom(2);
        bad[0] = 0.1;
        assert!(matches!(diag_encode(&maps, &bad), Err(Error::NotAnAtom)));
        assert!(matches!(diag_encode(&maps, &[0.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), Err(Error::NotAnAtom)));
    }

    #[test]
    fn decode_examples() {
        let a = r2();
        let maps = DiagMaps::new(4, a, 8).unwrap();
        for j in 1..=4 {
            assert_eq!(diag_decode(&maps, a.alpha(j)), maps.atom(j));
        }
        assert_eq!(diag_decode(&maps, -1.0), vec![0.0; 8]);
        assert_eq!(diag_decode(&maps, 0.0), vec![0.0; 8]);
        assert_eq!(diag_decode(&maps, 3.0), maps.atom(1));
        let mid = diag_decode(&maps, (a.alpha(1) + a.alpha(2)) / 2.0);
        assert!((mid[0] - 0.5).abs() < 1e-15 && (mid[1] - 0.25).abs() < 1e-15);
        assert!(mid[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decoder_is_continuous() {
        let maps = DiagMaps::new(6, r2(), 8).unwrap();
        let lip = maps.decoder_lipschitz();
        let steps = 20_000;
        let mut prev = diag_decode(&maps, -0.1);
        for s in 1..=steps {
            let t = -0.1 + 1.2 * s as f64 / steps as f64;
            let cur = diag_decode(&maps, t);
            assert!(dist2(&prev, &cur) <= lip * 1.2 / steps as f64 * (1.0 + 1e-9));
            prev = cur;
        }
    }

    #[test]
    fn report_examples() {
        let rep = counterexample_report(&r2(), 10, 6).unwrap();
        assert_eq!(rep.m, 128);
        let k2 = &rep.truncations[1];
        assert!(k2.sup_error < 0.7072 && (k2.sqrt2_alpha_k - 0.5f64 * 2f64.sqrt()).abs() < 1e-15);
        assert!((k2.lip_lower.unwrap() - 2.0).abs() < 1e-15);
        assert!((rep.entropy[0].alpha_2n_half - 0.25).abs() < 1e-15);
        assert!(rep.holds());
        // error formula for atoms beyond the truncation
        let a = r2();
        let k = 3;
        assert!((rep.truncations[k - 1].sup_error - (a.alpha(4).powi(2) + a.alpha(3).powi(2)).sqrt()).abs() < 1e-15);
        let lips: Vec<f64> = rep.truncations.iter().map(|t| t.lip_measured).collect();
        assert!(lips.windows(2).all(|w| w[1] >= w[0]));
    }
}
