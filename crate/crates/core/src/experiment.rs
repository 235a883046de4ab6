//! Config-driven experiment runner behind the `lipwidth` binary.
//!
//! A config is a TOML file with top-level `seed`, `out` and `threads` keys
//! and one optional section per subcommand (`[entropy]`, `[stable-width]`,
//! `[counterexample]`, `[cs]`, `[interp]`, `[carl]`). Every section field has
//! a default, so an empty file is valid. Per-task seeds are derived from the
//! master seed with [`derive_seed`], so results do not depend on the number
//! of threads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counterexample::counterexample_report;
use crate::csrecovery::{
    build_nonlinear_pair, gaussian_matrix, instance_optimality_trials, l1_recovery_trials, lemma61_check,
    net_rip_certificate, RIP_SAMPLED_SUPPORTS,
};
use crate::error::{Error, Result};
use crate::extend::{FnMap, LipschitzMap};
use crate::interp::{ball_projection, convergence_table, lemma24_pipeline, loglog_slope, BoxSet, Lemma24Options};
use crate::io::{fmt_f64, read_point_cloud, ResultTable, VERSION};
use crate::nets::{entropy_bracket, greedy_cover_counts};
use crate::rng::derive_seed;
use crate::spaces::{
    generate_diag_class, generate_kq, generate_sparse_class, AlphaSequence, ClassLabel, FiniteNormedSpace,
    ModelClassSurrogate,
};
use crate::stablewidth::{
    build_stable_pair, carl_cover_bound, carl_rate_check, evaluate_width, jl_dim, stability_trials, CarlInputs,
    JL_DISTORTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Entropy,
    StableWidth,
    Counterexample,
    Cs,
    Interp,
    Carl,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::StableWidth => "stable-width",
            Command::Counterexample => "counterexample",
            Command::Cs => "cs",
            Command::Interp => "interp",
            Command::Carl => "carl",
        }
    }
}

/// Which finite class to build: a label such as `diag(r=2)`, `Kq(q=2)`,
/// `sparse(k=3)`, or `custom(name)` together with a point-cloud file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub label: String,
    /// Ambient dimension for `Kq` and `sparse`.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Number of sampled points for `Kq` and `sparse`.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Number of atoms for `diag`.
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    /// Point-cloud CSV for `custom` classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
}

fn default_dim() -> usize {
    32
}
fn default_count() -> usize {
    2000
}
fn default_atoms() -> usize {
    64
}

impl ClassSpec {
    pub fn new(label: &str) -> Self {
        Self {
            label: label.into(),
            dim: default_dim(),
            count: default_count(),
            atoms: default_atoms(),
            points: None,
        }
    }

    pub fn validate(&self) -> Result<ClassLabel> {
        let label: ClassLabel = self.label.parse()?;
        match &label {
            ClassLabel::Diag { r } => {
                AlphaSequence::new(*r)?;
                if self.atoms == 0 {
                    return Err(Error::Config("diag class needs atoms >= 1".into()));
                }
            }
            ClassLabel::Kq { .. } | ClassLabel::Sparse { .. } => {
                if self.dim == 0 || self.count == 0 {
                    return Err(Error::Config("sampled classes need dim >= 1 and count >= 1".into()));
                }
                if let ClassLabel::Sparse { k } = label {
                    if k == 0 || k > self.dim {
                        return Err(Error::Config(format!("sparsity {k} not in 1..={}", self.dim)));
                    }
                }
            }
            ClassLabel::Custom(_) => {
                if self.points.is_none() {
                    return Err(Error::Config("custom class needs a points file".into()));
                }
            }
        }
        Ok(label)
    }

    pub fn build(&self, seed: u64) -> Result<ModelClassSurrogate> {
        match self.validate()? {
            ClassLabel::Diag { r } => generate_diag_class(&AlphaSequence::new(r)?, self.atoms),
            ClassLabel::Kq { q } => generate_kq(self.dim, q, self.count, seed),
            ClassLabel::Sparse { k } => generate_sparse_class(self.dim, k, self.count, seed),
            ClassLabel::Custom(_) => read_point_cloud(self.points.as_deref().expect("validated")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub class: ClassSpec,
    pub n_min: u32,
    pub n_max: u32,
}

impl Default for EntropySection {
    fn default() -> Self {
        Self {
            class: ClassSpec::new("diag(r=2)"),
            n_min: 1,
            n_max: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableWidthSection {
    pub class: ClassSpec,
    pub n_min: u32,
    pub n_max: u32,
    /// Test pairs for the Lipschitz audits.
    pub pairs: usize,
    /// Stability probes per built pair.
    pub probe_trials: usize,
}

impl Default for StableWidthSection {
    fn default() -> Self {
        Self {
            class: ClassSpec::new("diag(r=2)"),
            n_min: 1,
            n_max: 4,
            pairs: 10_000,
            probe_trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub r: f64,
    pub k_max: usize,
    pub n_max: u32,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        Self { r: 2.0, k_max: 10, n_max: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsSection {
    /// Number of measurements.
    pub n: usize,
    /// Signal dimension.
    #[serde(rename = "N")]
    pub big_n: usize,
    pub k: usize,
    pub trials: usize,
    pub p_list: Vec<f64>,
    /// Gaussian matrices used for the operator-norm checks.
    pub matrices: usize,
    /// Size of the sparse net behind the nonlinear pair.
    pub net_size: usize,
    /// Norm of the dense perturbation in the instance-optimality trials.
    pub noise: f64,
}

impl Default for CsSection {
    fn default() -> Self {
        Self {
            n: 40,
            big_n: 128,
            k: 4,
            trials: 100,
            p_list: vec![1.0, 1.5, 2.0],
            matrices: 20,
            net_size: 500,
            noise: 0.05,
        }
    }
}

/// Built-in smooth test maps for the interpolation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpMap {
    /// `x ↦ (sin x, cos x, sin 2x)` on `[−1, 1]`, `γ = √5`.
    Circle,
    /// `x ↦ (sin x₁ cos x₂, x₁x₂/4)` after projecting onto the ℓ₂ ball of
    /// radius 1.5, on `[−1, 1]²`, `γ = (1 + 1.5²/16)^{1/2}`.
    Product,
}

pub const PRODUCT_BALL: f64 = 1.5;

impl InterpMap {
    /// The map, its Lipschitz constant and the set `S`.
    pub fn build(self) -> Result<(Arc<dyn LipschitzMap + Send + Sync>, f64, BoxSet)> {
        match self {
            InterpMap::Circle => {
                let map = FnMap::new(FiniteNormedSpace::l2(1)?, FiniteNormedSpace::l2(3)?, |x: &[f64]| {
                    vec![x[0].sin(), x[0].cos(), (2.0 * x[0]).sin()]
                });
                Ok((Arc::new(map), 5f64.sqrt(), BoxSet::cube(1, 1.0)?))
            }
            InterpMap::Product => {
                let map = FnMap::new(FiniteNormedSpace::l2(2)?, FiniteNormedSpace::l2(2)?, |x: &[f64]| {
                    let y = ball_projection(x, PRODUCT_BALL);
                    vec![y[0].sin() * y[1].cos(), y[0] * y[1] / 4.0]
                });
                // Frobenius bound on the Jacobian over the ball
                let gamma = (1.0 + PRODUCT_BALL * PRODUCT_BALL / 16.0).sqrt();
                Ok((Arc::new(map), gamma, BoxSet::cube(2, 1.0)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpSection {
    pub maps: Vec<InterpMap>,
    pub eps: f64,
    pub delta: f64,
    /// Coarsest mesh size of the convergence table.
    pub h0: f64,
    pub levels: usize,
    pub samples: usize,
}

impl Default for InterpSection {
    fn default() -> Self {
        Self {
            maps: vec![InterpMap::Circle, InterpMap::Product],
            eps: 1e-2,
            delta: 0.1,
            h0: 0.2,
            levels: 4,
            samples: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlSection {
    pub class: ClassSpec,
    pub n_max: u32,
    pub gamma: f64,
    pub r: f64,
    /// Radii at which the greedy cover count is compared with the bound;
    /// empty means multiples of the smallest measured width.
    pub eps: Vec<f64>,
}

impl Default for CarlSection {
    fn default() -> Self {
        Self {
            class: ClassSpec::new("diag(r=1)"),
            n_max: 5,
            gamma: 2.0,
            r: 1.0,
            eps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub entropy: EntropySection,
    #[serde(rename = "stable-width")]
    pub stable_width: StableWidthSection,
    pub counterexample: CounterexampleSection,
    pub cs: CsSection,
    pub interp: InterpSection,
    pub carl: CarlSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            threads: 0,
            entropy: EntropySection::default(),
            stable_width: StableWidthSection::default(),
            counterexample: CounterexampleSection::default(),
            cs: CsSection::default(),
            interp: InterpSection::default(),
            carl: CarlSection::default(),
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    /// Checks every parameter the given subcommand reads.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        match cmd {
            Command::Entropy => {
                let s = &self.entropy;
                s.class.validate()?;
                check(s.n_min <= s.n_max && s.n_max <= 20, "entropy needs n_min <= n_max <= 20")
            }
            Command::StableWidth => {
                let s = &self.stable_width;
                s.class.validate()?;
                check(1 <= s.n_min && s.n_min <= s.n_max && s.n_max <= 20, "stable-width needs 1 <= n_min <= n_max <= 20")
            }
            Command::Counterexample => {
                let s = &self.counterexample;
                AlphaSequence::new(s.r)?;
                check(s.k_max >= 1 && s.n_max >= 1 && s.n_max <= 20, "counterexample needs k_max >= 1 and 1 <= n_max <= 20")
            }
            Command::Cs => {
                let s = &self.cs;
                check(s.n >= 1 && s.n <= s.big_n, "cs needs 1 <= n <= N")?;
                check(s.k >= 1 && 2 * s.k <= s.big_n, "cs needs 1 <= 2k <= N")?;
                check(s.matrices >= 1 && s.net_size >= 1, "cs needs matrices >= 1 and net_size >= 1")?;
                check(s.noise >= 0.0 && s.noise.is_finite(), "cs noise must be finite and nonnegative")?;
                check(s.p_list.iter().all(|p| (1.0..=2.0).contains(p)), "cs p values must lie in [1, 2]")
            }
            Command::Interp => {
                let s = &self.interp;
                check(!s.maps.is_empty(), "interp needs at least one map")?;
                check(s.eps > 0.0 && s.delta > 0.0 && s.h0 > 0.0, "interp needs positive eps, delta and h0")?;
                check(s.levels >= 2 && s.samples >= 1, "interp needs levels >= 2 and samples >= 1")
            }
            Command::Carl => {
                let s = &self.carl;
                s.class.validate()?;
                check(s.n_max >= 1 && s.n_max <= 20, "carl needs 1 <= n_max <= 20")?;
                check(s.gamma > 0.0 && s.r > 0.0, "carl needs positive gamma and r")?;
                check(s.eps.iter().all(|e| *e > 0.0), "carl eps values must be positive")
            }
        }
    }
}

/// Files produced by one run, relative to the output directory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<(String, ResultTable)>,
    pub report: String,
    /// Whether every checked inequality held.
    pub passed: bool,
}

fn header(cfg: &ExperimentConfig, cmd: Command) -> Vec<String> {
    vec![
        format!("{VERSION} {}", cmd.name()),
        "resolved config:".into(),
        cfg.to_toml(),
    ]
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

fn run_entropy(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.entropy;
    let class = s.class.build(derive_seed(cfg.seed, 0))?;
    let mut t = ResultTable::new(&["n", "lower", "upper", "cover_size", "seed"]);
    let mut report = format!("# entropy\n\nclass {} with {} points\n\n", class.label(), class.len());
    for n in s.n_min..=s.n_max {
        if (1usize << n) > class.len() {
            break;
        }
        let b = entropy_bracket(&class, n)?;
        t.push(vec![n.to_string(), f(b.lower), f(b.upper), b.cover_size().to_string(), cfg.seed.to_string()]);
        writeln!(report, "- n = {n}: {} <= eps_n <= {}", f(b.lower), f(b.upper)).unwrap();
    }
    Ok(RunOutput {
        tables: vec![("entropy.csv".into(), t)],
        report,
        passed: true,
    })
}

fn run_stable_width(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.stable_width;
    let class = s.class.build(derive_seed(cfg.seed, 0))?;
    let mut t = ResultTable::new(&["n", "sup_error", "3*eps_upper", "lip_a", "lip_M", "cover_size", "seed"]);
    let mut probes = ResultTable::new(&["n", "trials", "held", "worst_lhs_minus_rhs"]);
    let mut report = format!("# stable-width\n\nclass {} with {} points\n\n", class.label(), class.len());
    let mut passed = true;
    for n in s.n_min..=s.n_max {
        let seed = derive_seed(cfg.seed, n as u64);
        let pair = build_stable_pair(&class, n, seed)?;
        let (w, realized) = evaluate_width(&pair, &class, s.pairs, derive_seed(seed, 1))?;
        let bound = 3.0 * w.entropy.upper;
        let ok = w.sup_error <= bound;
        t.push(vec![
            n.to_string(),
            f(w.sup_error),
            f(bound),
            f(w.lip_a_measured),
            f(w.lip_m_measured),
            w.cover_size.to_string(),
            seed.to_string(),
        ]);
        let recs = stability_trials(&realized, s.probe_trials, derive_seed(seed, 2))?;
        let held = recs.iter().filter(|r| r.holds).count();
        let worst = recs.iter().map(|r| r.lhs - r.rhs).fold(f64::NEG_INFINITY, f64::max);
        probes.push(vec![n.to_string(), recs.len().to_string(), held.to_string(), f(worst)]);
        passed &= ok && held == recs.len();
        writeln!(
            report,
            "- n = {n}: sup error {} vs 3*eps_upper {} ({}), Lip(a) {}, Lip(M) {}, probes {held}/{}",
            f(w.sup_error),
            f(bound),
            if ok { "ok" } else { "VIOLATED" },
            f(w.lip_a_measured),
            f(w.lip_m_measured),
            recs.len()
        )
        .unwrap();
    }
    Ok(RunOutput {
        tables: vec![("stable_width.csv".into(), t), ("stability.csv".into(), probes)],
        report,
        passed,
    })
}

fn run_counterexample(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.counterexample;
    let rep = counterexample_report(&AlphaSequence::new(s.r)?, s.k_max, s.n_max)?;
    let mut t = ResultTable::new(&["k", "sup_error", "sqrt2_alpha_k", "lip_Mk_lower", "lip_Mk", "n", "entropy_lower", "alpha_2n_half"]);
    for row in &rep.truncations {
        t.push(vec![
            row.k.to_string(),
            f(row.sup_error),
            f(row.sqrt2_alpha_k),
            row.lip_lower.map_or(String::new(), f),
            f(row.lip_measured),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    for row in &rep.entropy {
        t.push(vec![
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            row.n.to_string(),
            f(row.entropy_lower),
            f(row.alpha_2n_half),
        ]);
    }
    let report = format!(
        "# counterexample\n\nr = {}, {} atoms, k <= {}, n <= {}: {}\n",
        s.r,
        rep.m,
        s.k_max,
        s.n_max,
        if rep.holds() { "all inequalities hold" } else { "VIOLATED" }
    );
    Ok(RunOutput {
        tables: vec![("counterexample.csv".into(), t)],
        report,
        passed: rep.holds(),
    })
}

fn run_cs(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.cs;
    let mut lemma = ResultTable::new(&["matrix", "p", "lower_bound", "bracket_lower", "bracket_upper", "upper_bound", "delta"]);
    let mut report = format!("# cs\n\nn = {}, N = {}, k = {}\n\n", s.n, s.big_n, s.k);
    let mut passed = true;
    let (mut up, mut low, mut total) = (0, 0, 0);
    for i in 0..s.matrices {
        let phi = gaussian_matrix(s.n, s.big_n, derive_seed(cfg.seed, i as u64))?;
        for &p in &s.p_list {
            let r = lemma61_check(&phi, p, derive_seed(cfg.seed, 1000 + i as u64))?;
            up += r.upper_holds() as usize;
            low += r.lower_holds() as usize;
            total += 1;
            lemma.push(vec![
                i.to_string(),
                f(p),
                f(r.lower_bound),
                f(r.bracket.lower),
                f(r.bracket.upper),
                f(r.upper_bound),
                f(r.delta),
            ]);
        }
    }
    passed &= up == total && low == total;
    writeln!(report, "- operator-norm bounds: upper {up}/{total}, lower {low}/{total}").unwrap();

    let phi = gaussian_matrix(s.n, s.big_n, cfg.seed)?;
    let l1 = l1_recovery_trials(&phi, s.k, s.trials, derive_seed(cfg.seed, 2));
    let mut l1_table = ResultTable::new(&["trial", "error"]);
    for t in &l1 {
        l1_table.push(vec![t.trial.to_string(), f(t.error)]);
    }
    let exact = l1.iter().filter(|t| t.error <= 1e-6).count();
    writeln!(report, "- l1 decoding: {exact}/{} trials within 1e-6", l1.len()).unwrap();

    let net = generate_sparse_class(s.big_n, s.k, s.net_size, derive_seed(cfg.seed, 3))?;
    let cert = net_rip_certificate(&phi, s.k, &net, RIP_SAMPLED_SUPPORTS, derive_seed(cfg.seed, 4))?;
    let pair = build_nonlinear_pair(&phi, &net, cert)?;
    let trials = instance_optimality_trials(&pair, s.k, s.trials, s.noise, derive_seed(cfg.seed, 5))?;
    let mut rec = ResultTable::new(&["trial", "sigma_k", "net_resolution", "error", "C", "pass"]);
    for t in &trials {
        rec.push(vec![
            t.trial.to_string(),
            f(t.sigma_k),
            f(t.net_resolution),
            f(t.error),
            f(pair.constant()),
            t.holds().to_string(),
        ]);
    }
    let held = trials.iter().filter(|t| t.holds()).count();
    passed &= held == trials.len();
    writeln!(
        report,
        "- nonlinear pair: RIP({}) delta {} over {} supports, C = {}, instance optimality {held}/{}",
        pair.certificate.k,
        f(pair.certificate.delta),
        pair.certificate.supports_checked,
        f(pair.constant()),
        trials.len()
    )
    .unwrap();
    Ok(RunOutput {
        tables: vec![
            ("lemma61.csv".into(), lemma),
            ("l1.csv".into(), l1_table),
            ("recovery.csv".into(), rec),
        ],
        report,
        passed,
    })
}

fn run_interp(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.interp;
    let mut conv = ResultTable::new(&["map", "h", "sup_err", "lip_excess"]);
    let mut summary = ResultTable::new(&[
        "map",
        "gamma",
        "eps",
        "delta_used",
        "h",
        "deviation_on_s",
        "lip_final",
        "rank_bound",
        "sup_slope",
        "lip_slope",
    ]);
    let mut report = String::from("# interp\n\n");
    let mut passed = true;
    for (i, &which) in s.maps.iter().enumerate() {
        let (map, gamma, set) = which.build()?;
        let opts = Lemma24Options {
            samples: s.samples,
            seed: derive_seed(cfg.seed, i as u64),
            ..Default::default()
        };
        let res = lemma24_pipeline(map, &set, gamma, s.eps, s.delta, &opts)?;
        let rows = convergence_table(&res.stages, &set, s.h0, s.levels, s.samples, derive_seed(opts.seed, 1))?;
        let name = serde_plain_name(which);
        for r in &rows {
            conv.push(vec![name.clone(), f(r.h), f(r.sup_err), f(r.lip_excess)]);
        }
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let sup_slope = loglog_slope(&hs, &rows.iter().map(|r| r.sup_err).collect::<Vec<_>>());
        let lip_slope = loglog_slope(&hs, &rows.iter().map(|r| r.lip_excess).collect::<Vec<_>>());
        let a = &res.audit;
        let ok = a.deviation_on_s <= s.eps && a.lip_final <= gamma;
        passed &= ok;
        summary.push(vec![
            name.clone(),
            f(gamma),
            f(s.eps),
            f(a.delta_used),
            f(a.h),
            f(a.deviation_on_s),
            f(a.lip_final),
            a.rank_bound.to_string(),
            f(sup_slope),
            f(lip_slope),
        ]);
        writeln!(
            report,
            "- {name}: deviation {} (eps {}), Lip {} (gamma {}), h {}, slopes {} / {}",
            f(a.deviation_on_s),
            f(s.eps),
            f(a.lip_final),
            f(gamma),
            f(a.h),
            f(sup_slope),
            f(lip_slope)
        )
        .unwrap();
    }
    Ok(RunOutput {
        tables: vec![("interp.csv".into(), conv), ("interp_summary.csv".into(), summary)],
        report,
        passed,
    })
}

fn serde_plain_name(m: InterpMap) -> String {
    match m {
        InterpMap::Circle => "circle".into(),
        InterpMap::Product => "product".into(),
    }
}

/// Measured widths and entropy brackets for `carl`: the stable-pair sup
/// errors for `n = 1..=n_max` as a step function in the parameter count,
/// and the brackets for the same budgets.
pub fn carl_inputs(
    class: &ModelClassSurrogate,
    n_max: u32,
    gamma: f64,
    r: f64,
    seed: u64,
) -> Result<(CarlInputs, Vec<crate::nets::EntropyBracket>)> {
    let per_n = jl_dim(JL_DISTORTION)?;
    let mut widths = Vec::new();
    let mut brackets = Vec::new();
    for n in 1..=n_max {
        if (1usize << n) > class.len() {
            break;
        }
        let pair = build_stable_pair(class, n, derive_seed(seed, n as u64))?;
        let (w, _) = evaluate_width(&pair, class, 0, seed)?;
        widths.push((n, w.sup_error));
        brackets.push(w.entropy);
    }
    let inputs = CarlInputs::from_budget_widths(
        &widths,
        per_n,
        class.radius_about_origin(),
        per_n * n_max as usize,
        gamma,
        r,
    )?;
    Ok((inputs, brackets))
}

fn run_carl(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.carl;
    let class = s.class.build(derive_seed(cfg.seed, 0))?;
    let (inputs, brackets) = carl_inputs(&class, s.n_max, s.gamma, s.r, cfg.seed)?;
    let rate = carl_rate_check(&inputs, &brackets)?;
    let radius = class.radius_about_origin();
    let eps: Vec<f64> = if s.eps.is_empty() {
        let min = inputs.delta_sequence.iter().copied().fold(f64::INFINITY, f64::min);
        [4.0, 8.0, 16.0, 32.0].iter().map(|c| c * min).filter(|e| *e < radius).collect()
    } else {
        s.eps.clone()
    };
    let counts = greedy_cover_counts(&class, &eps)?;
    let mut t = ResultTable::new(&["eps", "cover_count", "log_A_cover", "exponent", "levels", "A", "holds"]);
    let mut passed = true;
    for (&e, &count) in eps.iter().zip(&counts) {
        let b = carl_cover_bound(&inputs, e, radius)?;
        let lhs = (count as f64).ln() / b.a.ln();
        let holds = lhs <= b.log_a_bound();
        passed &= holds;
        t.push(vec![
            f(e),
            count.to_string(),
            f(lhs),
            b.exponent.map_or("undefined".into(), |x| x.to_string()),
            b.levels.to_string(),
            f(b.a),
            holds.to_string(),
        ]);
    }
    let mut deltas = ResultTable::new(&["m", "delta_m"]);
    for (m, d) in inputs.delta_sequence.iter().enumerate() {
        deltas.push(vec![m.to_string(), f(*d)]);
    }
    let report = format!(
        "# carl\n\nclass {}: A = {}, Lambda = {}, empirical C = {} (worst n {:?}), cover bounds {}\n",
        class.label(),
        f(inputs.base()),
        f(rate.lambda),
        f(rate.c),
        rate.worst_n,
        if passed { "hold" } else { "VIOLATED" }
    );
    Ok(RunOutput {
        tables: vec![("carl.csv".into(), t), ("carl_widths.csv".into(), deltas)],
        report,
        passed,
    })
}

/// Validates the config, runs `cmd` on a pool of `cfg.threads` workers and
/// returns the tables and report without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig, cmd: Command) -> Result<RunOutput> {
    cfg.validate(cmd)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut out = pool.install(|| match cmd {
        Command::Entropy => run_entropy(cfg),
        Command::StableWidth => run_stable_width(cfg),
        Command::Counterexample => run_counterexample(cfg),
        Command::Cs => run_cs(cfg),
        Command::Interp => run_interp(cfg),
        Command::Carl => run_carl(cfg),
    })?;
    for (_, t) in &mut out.tables {
        t.comments = header(cfg, cmd);
    }
    Ok(out)
}

/// [`execute`], then writes the tables and `report.md` into `cfg.out`.
pub fn run(cfg: &ExperimentConfig, cmd: Command) -> Result<RunOutput> {
    let out = execute(cfg, cmd)?;
    fs::create_dir_all(&cfg.out)?;
    for (name, t) in &out.tables {
        t.write(&cfg.out.join(name))?;
    }
    let mut report = out.report.clone();
    write!(report, "\n## Config\n\n```toml\n{}```\n\n{VERSION}\n", cfg.to_toml()).unwrap();
    fs::write(cfg.out.join("report.md"), report)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 7\n[stable-width]\nn_max = 3\n[stable-width.class]\nlabel = \"Kq(q=2)\"\ndim = 8\ncount = 50\n[cs]\nN = 64\np_list = [1.0]\n[interp]\nmaps = [\"circle\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.stable_width.n_max, 3);
        assert_eq!(cfg.stable_width.class.dim, 8);
        assert_eq!(cfg.cs.big_n, 64);
        assert_eq!(cfg.interp.maps, vec![InterpMap::Circle]);
        assert!(ExperimentConfig::from_toml("[cs]\nbogus = 1\n").is_err());
    }

    #[test]
    fn validation_catches_bad_parameters() {
        let mut cfg = ExperimentConfig::default();
        cfg.entropy.class.label = "ball(r=1)".into();
        assert!(cfg.validate(Command::Entropy).is_err());
        assert!(cfg.validate(Command::Cs).is_ok());
        cfg.cs.p_list = vec![3.0];
        assert!(cfg.validate(Command::Cs).is_err());
        cfg.carl.class = ClassSpec::new("custom(x)");
        assert!(matches!(cfg.validate(Command::Carl), Err(Error::Config(_))));
    }

    #[test]
    fn entropy_run_is_deterministic() {
        let mut cfg = ExperimentConfig::default();
        cfg.entropy.class = ClassSpec {
            count: 100,
            dim: 5,
            ..ClassSpec::new("Kq(q=1)")
        };
        cfg.seed = 3;
        let a = execute(&cfg, Command::Entropy).unwrap();
        cfg.threads = 1;
        let b = execute(&cfg, Command::Entropy).unwrap();
        assert_eq!(a.tables[0].1.rows, b.tables[0].1.rows);
        assert_eq!(a.tables[0].1.rows.len(), 5);
    }
}
