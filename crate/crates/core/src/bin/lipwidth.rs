use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lipwidth::experiment::{run, ClassSpec, Command, ExperimentConfig, InterpMap};

#[derive(Parser)]
#[command(version, about = "Entropy brackets, stable widths and Lipschitz approximation experiments")]
struct Cli {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every task derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for the CSVs and report.md.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ClassArgs {
    /// Class label: diag(r=R), Kq(q=Q), sparse(k=K) or custom(NAME).
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    atoms: Option<usize>,
    /// Point-cloud CSV for custom classes.
    #[arg(long)]
    points: Option<PathBuf>,
}

impl ClassArgs {
    fn apply(self, spec: &mut ClassSpec) {
        if let Some(v) = self.class {
            spec.label = v;
        }
        if let Some(v) = self.dim {
            spec.dim = v;
        }
        if let Some(v) = self.count {
            spec.count = v;
        }
        if let Some(v) = self.atoms {
            spec.atoms = v;
        }
        if self.points.is_some() {
            spec.points = self.points;
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Two-sided entropy-number brackets.
    Entropy {
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        n_min: Option<u32>,
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Stable encoder/decoder pairs against 3 times the entropy upper bound.
    StableWidth {
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        n_min: Option<u32>,
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        probe_trials: Option<usize>,
    },
    /// Continuous pairs on the diagonal class with exploding decoder constants.
    Counterexample {
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Operator-norm bounds, l1 decoding and a Lipschitz sensing pair.
    Cs {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        p_list: Option<Vec<f64>>,
        #[arg(long)]
        matrices: Option<usize>,
        #[arg(long)]
        net_size: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Finite-rank Lipschitz approximation and its convergence table.
    Interp {
        #[arg(long, value_delimiter = ',', value_parser = parse_map)]
        maps: Option<Vec<InterpMap>>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        h0: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Covering bounds from measured widths.
    Carl {
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        n_max: Option<u32>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
}

fn parse_map(s: &str) -> Result<InterpMap, String> {
    match s {
        "circle" => Ok(InterpMap::Circle),
        "product" => Ok(InterpMap::Product),
        _ => Err(format!("unknown map {s:?} (expected circle or product)")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn configure(cli: Cli) -> lipwidth::Result<(ExperimentConfig, Command)> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out);
    set(&mut cfg.threads, cli.threads);
    let cmd = match cli.cmd {
        Cmd::Entropy { class, n_min, n_max } => {
            let s = &mut cfg.entropy;
            class.apply(&mut s.class);
            set(&mut s.n_min, n_min);
            set(&mut s.n_max, n_max);
            Command::Entropy
        }
        Cmd::StableWidth {
            class,
            n_min,
            n_max,
            pairs,
            probe_trials,
        } => {
            let s = &mut cfg.stable_width;
            class.apply(&mut s.class);
            set(&mut s.n_min, n_min);
            set(&mut s.n_max, n_max);
            set(&mut s.pairs, pairs);
            set(&mut s.probe_trials, probe_trials);
            Command::StableWidth
        }
        Cmd::Counterexample { r, k_max, n_max } => {
            let s = &mut cfg.counterexample;
            set(&mut s.r, r);
            set(&mut s.k_max, k_max);
            set(&mut s.n_max, n_max);
            Command::Counterexample
        }
        Cmd::Cs {
            n,
            big_n,
            k,
            trials,
            p_list,
            matrices,
            net_size,
            noise,
        } => {
            let s = &mut cfg.cs;
            set(&mut s.n, n);
            set(&mut s.big_n, big_n);
            set(&mut s.k, k);
            set(&mut s.trials, trials);
            set(&mut s.p_list, p_list);
            set(&mut s.matrices, matrices);
            set(&mut s.net_size, net_size);
            set(&mut s.noise, noise);
            Command::Cs
        }
        Cmd::Interp {
            maps,
            eps,
            delta,
            h0,
            levels,
            samples,
        } => {
            let s = &mut cfg.interp;
            set(&mut s.maps, maps);
            set(&mut s.eps, eps);
            set(&mut s.delta, delta);
            set(&mut s.h0, h0);
            set(&mut s.levels, levels);
            set(&mut s.samples, samples);
            Command::Interp
        }
        Cmd::Carl {
            class,
            n_max,
            gamma,
            r,
            eps,
        } => {
            let s = &mut cfg.carl;
            class.apply(&mut s.class);
            set(&mut s.n_max, n_max);
            set(&mut s.gamma, gamma);
            set(&mut s.r, r);
            set(&mut s.eps, eps);
            Command::Carl
        }
    };
    Ok((cfg, cmd))
}

fn main() -> ExitCode {
    let result = configure(Cli::parse()).and_then(|(cfg, cmd)| {
        let out = run(&cfg, cmd)?;
        print!("{}", out.report);
        println!("wrote {}", cfg.out.display());
        Ok(out.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checked inequalities failed; see report.md");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
