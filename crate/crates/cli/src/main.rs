use std::path::{Path, PathBuf};

use aego::analysis::{pca_curve, Dataset, DimCurve};
use aego::bench::{build_c1_instance, ProblemId};
use aego::latent::{optimize_latent, post_process, DEConfig, PostMode};
use aego::localopt::TrainingSet;
use aego::nn::{train_autoencoder, AutoencoderBundle, Normalization};
use aego::pipeline::{run_aego, run_de_baseline, run_sweep, sampling_phase, AegoConfig, RunReport};
use aego::trace::{Phase, RunTrace};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aego", version, about = "Autoencoder-enabled global optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every pipeline subcommand. Flags override the config
/// file, which overrides the problem presets.
#[derive(Args, Clone)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemId>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training samples.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    nu: Option<usize>,
    /// Latent DE generations.
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    pp_mode: Option<PostMode>,
    /// Saved c1 instance to use instead of building one.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// 1000 samples and 300 generations.
    #[arg(long)]
    fast: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<AegoConfig> {
        let mut cfg = match &self.config {
            Some(path) => AegoConfig::load(path)?,
            None => {
                let problem = self.problem.unwrap_or(ProblemId::C1);
                AegoConfig::preset(problem, self.n.unwrap_or(100), self.m.unwrap_or(5))
            }
        };
        if let Some(p) = self.problem {
            if p != cfg.problem {
                let (a, b, c) = aego::pipeline::adam_presets(p);
                cfg.problem = p;
                cfg.adam_train = a;
                cfg.adam_latent = b;
                cfg.adam_post = c;
            }
        }
        if self.fast {
            cfg = cfg.fast();
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(m) = self.m {
            cfg = cfg.with_latent_dim(m);
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.generations {
            cfg.de.generations = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.pp_mode {
            cfg.pp_mode = v;
        }
        if let Some(p) = &self.instance {
            cfg.c1.file = Some(p.clone());
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the preset config of a problem.
    Defaults {
        problem: ProblemId,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long)]
        fast: bool,
    },
    /// Build and save a planted-manifold instance.
    BuildC1 {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = aego::bench::C1_MANIFOLD_DIM)]
        manifold_dim: usize,
        #[arg(long, default_value_t = aego::bench::C1_DEFAULT_MINIMA)]
        minima: usize,
        #[arg(long, default_value_t = aego::bench::C1_DEFAULT_RADIUS)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a locally optimized training set.
    GenTrain {
        #[command(flatten)]
        common: Common,
        /// Training-set file.
        #[arg(long)]
        save: PathBuf,
    },
    /// Train an autoencoder on a saved training set.
    TrainAe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: PathBuf,
        /// Weights file.
        #[arg(long)]
        save: PathBuf,
    },
    /// Differential evolution over the latent cube of a trained autoencoder.
    OptimizeLatent {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
    },
    /// Local search from a latent point.
    Post {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
        /// Comma-separated latent point.
        #[arg(long, value_delimiter = ',')]
        z: Vec<f64>,
    },
    /// The complete pipeline.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Differential evolution directly over the search box.
    BaselineDe {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        gamma: usize,
        #[arg(long = "de-generations", default_value_t = 10_000)]
        de_generations: usize,
        #[arg(long, default_value_t = 0.6)]
        f: f64,
        #[arg(long, default_value_t = 0.95)]
        chi0: f64,
    },
    /// The pipeline for several latent dimensions on one training set.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7")]
        m_list: Vec<usize>,
    },
    /// PCA loss and explained-variance curves of a training set.
    AnalyzePca {
        #[arg(long)]
        train: PathBuf,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Defaults { problem, n, m, fast } => {
            let mut cfg = AegoConfig::preset(problem, n, m);
            if fast {
                cfg = cfg.fast();
            }
            print!("{}", cfg.to_toml()?);
        }
        Command::BuildC1 {
            seed,
            n,
            manifold_dim,
            minima,
            radius,
            out,
        } => {
            let inst = build_c1_instance(seed, n, manifold_dim, minima, radius)?;
            inst.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::GenTrain { common, save } => {
            let cfg = common.config()?;
            let problem = cfg.build_problem()?;
            let mut trace = RunTrace::new();
            let set = sampling_phase(&problem, &cfg, &mut trace)?;
            set.save(&save)?;
            write_trace(&cfg, &trace)?;
            println!(
                "wrote {} ({} samples, {} evaluations, best cost {})",
                save.display(),
                set.len(),
                set.eval_count,
                trace.best_cost()
            );
        }
        Command::TrainAe { common, train, save } => {
            let cfg = common.config()?;
            let set = TrainingSet::load(&train)?;
            let problem = cfg.build_problem()?;
            if problem.dim() != set.n || problem.id() != set.problem {
                bail!("training set is for {} with n = {}, config says {} with n = {}", set.problem, set.n, cfg.problem, cfg.n);
            }
            let bundle = train_autoencoder(&set, Normalization::for_problem(&problem), cfg.m, &cfg.training_config())?;
            bundle.save(&save)?;
            println!("wrote {} (final reconstruction loss {})", save.display(), bundle.summary.final_loss);
        }
        Command::OptimizeLatent { common, weights } => {
            let cfg = common.config()?;
            let problem = cfg.build_problem()?;
            let bundle = load_bundle(&weights, &cfg)?;
            let de = DEConfig {
                gamma: 5 * bundle.latent_dim(),
                ..cfg.latent_de()
            };
            let mut trace = RunTrace::new();
            let res = optimize_latent(&bundle, &problem, cfg.mu, &cfg.adam_latent, &de, &mut trace)?;
            write_trace(&cfg, &trace)?;
            println!("z_star = {}", join(&res.z_star));
            println!("cost = {}", res.cost);
            println!("evaluations = {}", res.eval_count);
        }
        Command::Post { common, weights, z } => {
            let cfg = common.config()?;
            let problem = cfg.build_problem()?;
            let bundle = load_bundle(&weights, &cfg)?;
            let res = post_process(&bundle, &problem, &z, cfg.mu, cfg.nu, cfg.pp_mode, &cfg.adam_latent, &cfg.adam_post)?;
            let mut trace = RunTrace::new();
            trace.record_all(Phase::Post, &res.step_costs);
            trace.end_phase(Phase::Post);
            write_trace(&cfg, &trace)?;
            println!("start_cost = {}", res.start_cost);
            println!("cost = {}", res.cost);
            println!("x = {}", join(&res.point));
        }
        Command::Run { common } => {
            let cfg = common.config()?;
            let out = run_aego(&cfg)?;
            print_report(&out.report)?;
            if let Some(e) = &out.report.error {
                bail!("run stopped early: {e}");
            }
        }
        Command::BaselineDe {
            common,
            gamma,
            de_generations,
            f,
            chi0,
        } => {
            let cfg = common.config()?;
            let problem = cfg.build_problem()?;
            let de = DEConfig::new(gamma, de_generations, f, chi0).with_seed(aego::rng::derive_seed(cfg.master_seed, "baseline-de"));
            let out = run_de_baseline(&problem, &de, cfg.output_dir.as_deref())?;
            print_report(&out.report)?;
        }
        Command::Sweep { common, m_list } => {
            let cfg = common.config()?;
            let sweep = run_sweep(&cfg, &m_list)?;
            println!("m,reconstruction_loss,final_cost,success");
            for (m, run) in &sweep.runs {
                match run {
                    Ok(o) => println!(
                        "{m},{},{},{}",
                        o.report.reconstruction_loss.unwrap_or(f64::NAN),
                        o.report.final_cost,
                        o.report.success
                    ),
                    Err(e) => println!("{m},,,failed: {e}"),
                }
            }
        }
        Command::AnalyzePca { train, out } => {
            let set = TrainingSet::load(&train)?;
            let (lo, hi) = set.problem.bounds();
            let norm = Normalization::new(vec![lo; set.n], vec![hi; set.n])?;
            let ms: Vec<usize> = (1..=set.n).collect();
            let x0 = norm.batch_to_internal(&set.initial);
            let xl = norm.batch_to_internal(&set.samples);
            let c0 = pca_curve(x0.as_slice().context("layout")?, set.n, &ms, Dataset::Initial)?;
            let cl = pca_curve(xl.as_slice().context("layout")?, set.n, &ms, Dataset::Optimized)?;
            match out {
                Some(path) => {
                    DimCurve::write_csv(&[&c0, &cl], &path)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}{}{}", DimCurve::csv_header(), c0.csv_rows(), cl.csv_rows()),
            }
        }
    }
    Ok(())
}

fn load_bundle(path: &Path, cfg: &AegoConfig) -> Result<AutoencoderBundle> {
    let bundle = AutoencoderBundle::load(path)?;
    if bundle.dim() != cfg.n {
        bail!("weights are for n = {}, config says n = {}", bundle.dim(), cfg.n);
    }
    Ok(bundle)
}

fn write_trace(cfg: &AegoConfig, trace: &RunTrace) -> Result<()> {
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        trace.write(&dir.join("trace.csv"))?;
    }
    Ok(())
}

fn print_report(report: &RunReport) -> Result<()> {
    let mut shown = report.clone();
    // The point itself is in the report file; keep the terminal readable.
    if shown.final_point.len() > 10 {
        shown.final_point.truncate(10);
    }
    print!("{}", shown.to_toml()?);
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}
