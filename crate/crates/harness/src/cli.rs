//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use shiftrec_core::coo::write_coo;
use shiftrec_core::data::{consensus_instance, generate, generate_supported, Scale, SplitSpec, SyntheticSpec};
use shiftrec_core::support::DEFAULT_CANDIDATE_BUDGET;
use shiftrec_core::{complete, ConvergenceConfig, Method, SparseTensor};

use crate::audit::{audit_consensus, audit_fairness, audit_shift_consistency, audit_support, audit_uniqueness};
use crate::error::{exit, HarnessError, Result};
use crate::experiment::{run_experiment, DataSource, ExperimentConfig};
use crate::input::{load_tensor, parse_scale, InputFormat};

#[derive(Debug, Parser)]
#[command(name = "shiftrec", version, about = "Shift-consistent completion, evaluation and audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete a tensor and write every grid entry as COO.
    Complete(CompleteArgs),
    /// RMSE/MAE over increasing fractions of the training data.
    Evaluate(EvaluateArgs),
    /// Check a guarantee on a concrete input.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Write a synthetic instance as COO.
    Generate(GenerateArgs),
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    /// Full support of every unknown entry.
    Support(SupportArgs),
    /// Completing a shifted tensor equals shifting the completion.
    ShiftConsistency(ShiftConsistencyArgs),
    /// Completions agree across sweep orders.
    Uniqueness(UniquenessArgs),
    /// Unanimous slice orderings survive completion.
    Consensus(ConsensusArgs),
    /// Shifting one user leaves every other user's top-N unchanged.
    Fairness(FairnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Additive,
    Multiplicative,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// coo, ml100k, ml1m or ml10m.
    #[arg(long, default_value = "coo")]
    pub flavor: InputFormat,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// sc or uc.
    #[arg(long, default_value = "sc")]
    pub method: Method,
    /// Subtensor order; defaults to one less than the tensor's dimension.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = ConvergenceConfig::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = ConvergenceConfig::default().max_sweeps)]
    pub max_sweeps: usize,
}

impl SolverArgs {
    fn convergence(&self) -> Result<ConvergenceConfig> {
        Ok(ConvergenceConfig::new(self.epsilon, self.max_sweeps)?)
    }

    fn order_for(&self, t: &SparseTensor) -> usize {
        self.k.unwrap_or(t.ndim().saturating_sub(1))
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// COO output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write diagnostics as JSON.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Run the full-support check and include it in the diagnostics.
    #[arg(long)]
    pub certify: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ratings file; use --synthetic instead to generate data.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "ml100k")]
    pub flavor: InputFormat,
    #[arg(long, value_enum)]
    pub synthetic: Option<ModelArg>,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Comma-separated training fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    pub fractions: Vec<f64>,
    /// Number of split seeds.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// First split seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Comma-separated extents.
    #[arg(long, value_delimiter = ',', default_value = "100,120")]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    pub known_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Factor range as `low:high`.
    #[arg(long)]
    pub factor_range: Option<String>,
    /// Round and clamp values to a `min:max:step` scale.
    #[arg(long)]
    pub discretize: Option<String>,
    /// Subtensor order carrying the factors.
    #[arg(long)]
    pub structure_order: Option<usize>,
    /// Seed for the generated data.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

impl SynthArgs {
    fn spec(&self, model: ModelArg) -> Result<SyntheticSpec> {
        let base = match model {
            ModelArg::Additive => SyntheticSpec::additive(self.shape.clone(), self.known_fraction),
            ModelArg::Multiplicative => SyntheticSpec::multiplicative(self.shape.clone(), self.known_fraction),
        };
        let factor_range = match &self.factor_range {
            None => base.factor_range,
            Some(r) => parse_range(r)?,
        };
        let spec = SyntheticSpec {
            factor_range,
            noise_std: self.noise,
            discretize: self.discretize.as_deref().map(parse_scale).transpose()?,
            structure_order: self.structure_order,
            ..base
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || HarnessError::Config(format!("range {s:?} is not low:high"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

#[derive(Debug, Args)]
pub struct SupportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Candidate offsets tried per unknown entry before giving up.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_BUDGET)]
    pub budget: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ShiftConsistencyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct UniquenessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Random sweep permutations, on top of the three fixed orders.
    #[arg(long, default_value_t = 2)]
    pub orders: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// 1-based dimension indexing the slices; defaults to the last.
    #[arg(long)]
    pub axis: Option<usize>,
    /// Comma-separated slices in increasing order; searched for when absent.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<usize>>,
    /// Most patterns checked when searching.
    #[arg(long, default_value_t = 100)]
    pub limit: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// 1-based user to shift.
    #[arg(long)]
    pub user: Option<usize>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// List lengths, as `a-b` or a comma-separated list.
    #[arg(long, default_value = "1-25")]
    pub ns: String,
    /// Rating scale `min:max:step` used to pick the default user.
    #[arg(long)]
    pub scale: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "additive")]
    pub model: ModelArg,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Redraw until the masked tensor is fully supported.
    #[arg(long)]
    pub require_support: bool,
    /// Instead of a factor model, plant a consensus pattern along this
    /// 1-based dimension.
    #[arg(long, conflicts_with_all = ["require_support", "truth"])]
    pub consensus_axis: Option<usize>,
    /// Number of slices in the planted pattern.
    #[arg(long, default_value_t = 2, requires = "consensus_axis")]
    pub pattern_slices: usize,
    /// COO output for the masked tensor; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// COO output for the unmasked ground truth.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// `a-b` or `a,b,c`.
pub fn parse_ns(s: &str) -> Result<Vec<usize>> {
    let bad = || HarnessError::Config(format!("bad list lengths {s:?}"));
    let ns: Vec<usize> = match s.split_once('-') {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            (a..=b).collect()
        }
        None => s
            .split(',')
            .map(|n| n.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?,
    };
    if ns.is_empty() || ns.contains(&0) {
        return Err(bad());
    }
    Ok(ns)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| HarnessError::io("<stdout>", e))
        }
    }
}

fn write_tensor(path: Option<&Path>, t: &SparseTensor) -> Result<()> {
    let mut buf = Vec::new();
    write_coo(t, &mut buf).map_err(|e| HarnessError::io("<buffer>", e))?;
    write_out(path, std::str::from_utf8(&buf).expect("COO text is UTF-8"))
}

fn render<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Complete(args) => run_complete(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Audit(audit) => run_audit(audit),
        Command::Generate(args) => run_generate(args),
    }
}

fn run_complete(args: CompleteArgs) -> Result<i32> {
    let t = load_tensor(&args.input.input, args.input.flavor)?;
    let k = args.solver.order_for(&t);
    let mut result = complete(&t, k, args.solver.method, &args.solver.convergence()?)?;
    if args.certify {
        result.certify();
    }
    write_tensor(args.out.as_deref(), &result.completed())?;
    let d = &result.diagnostics;
    eprintln!(
        "{}: {} known, {} imputed, {} sweeps, residual {:e}",
        result.method().label(),
        t.nnz(),
        t.unknown_count(),
        d.sweeps_used,
        d.residual
    );
    if let Some(path) = &args.diagnostics {
        let support = result.support.as_ref().map(|s| {
            json!({
                "fully_supported": s.fully_supported,
                "unsupported": s.unsupported.len(),
                "inconclusive": s.inconclusive.len(),
            })
        });
        let doc = json!({
            "method": result.method(),
            "method_label": result.method().label(),
            "k": k,
            "shape": t.shape().extents(),
            "known": t.nnz(),
            "imputed": t.unknown_count(),
            "sweeps_used": d.sweeps_used,
            "final_sweep_variance": d.final_sweep_variance,
            "residual": d.residual,
            "support": support,
        });
        write_out(Some(path), &render(&doc)?)?;
    }
    Ok(exit::SUCCESS)
}

fn run_evaluate(args: EvaluateArgs) -> Result<i32> {
    let source = match (&args.input, args.synthetic) {
        (Some(path), _) => DataSource::File {
            path: path.clone(),
            format: args.flavor,
        },
        (None, Some(model)) => DataSource::Synthetic {
            spec: args.synth.spec(model)?,
            seed: args.synth.data_seed,
        },
        (None, None) => return Err(HarnessError::Config("pass --input or --synthetic".into())),
    };
    let cfg = ExperimentConfig {
        k: args.solver.k.unwrap_or(1),
        split: SplitSpec {
            test_fraction: args.test_fraction,
            fractions: args.fractions.clone(),
            seed: args.seed,
        },
        seeds: args.seeds,
        convergence: args.solver.convergence()?,
        out: args.output.out.clone(),
        ..ExperimentConfig::new(source, args.solver.method)
    };
    let report = run_experiment(&cfg)?;
    let text = match args.output.format {
        OutputFormat::Json => render(&report)?,
        OutputFormat::Csv => report.to_csv(),
    };
    write_out(args.output.out.as_deref(), &text)?;
    Ok(exit::SUCCESS)
}

fn run_audit(audit: AuditCommand) -> Result<i32> {
    let (report, output) = match audit {
        AuditCommand::Support(a) => {
            let t = load_tensor(&a.input.input, a.input.flavor)?;
            (audit_support(&t, a.budget), a.output)
        }
        AuditCommand::ShiftConsistency(a) => {
            let t = load_tensor(&a.input.input, a.input.flavor)?;
            let k = a.solver.order_for(&t);
            let report = audit_shift_consistency(&t, k, &a.solver.convergence()?, a.trials, a.seed)?;
            (report, a.output)
        }
        AuditCommand::Uniqueness(a) => {
            let t = load_tensor(&a.input.input, a.input.flavor)?;
            let k = a.solver.order_for(&t);
            let report = audit_uniqueness(&t, k, &a.solver.convergence()?, a.orders, a.seed)?;
            (report, a.output)
        }
        AuditCommand::Consensus(a) => {
            let t = load_tensor(&a.input.input, a.input.flavor)?;
            if a.solver.k.is_some_and(|k| k + 1 != t.ndim()) {
                return Err(HarnessError::Config("consensus audits complete with k = d - 1".into()));
            }
            let axis = a.axis.unwrap_or(t.ndim());
            let report = audit_consensus(&t, axis, a.gamma, a.limit, a.solver.method, &a.solver.convergence()?)?;
            (report, a.output)
        }
        AuditCommand::Fairness(a) => {
            let t = load_tensor(&a.input.input, a.input.flavor)?;
            let scale = match &a.scale {
                Some(s) => parse_scale(s)?,
                None => match a.input.flavor {
                    InputFormat::Ml10m => Scale::new(0.5, 5.0, 0.5)?,
                    _ => Scale::ONE_TO_FIVE,
                },
            };
            let ns = parse_ns(&a.ns)?;
            let report = audit_fairness(&t, a.user, a.delta, &ns, a.solver.method, &a.solver.convergence()?, scale)?;
            (report, a.output)
        }
    };
    let text = match output.format {
        OutputFormat::Json => render(&report)?,
        OutputFormat::Csv => report.to_csv(),
    };
    write_out(output.out.as_deref(), &text)?;
    eprintln!("{} audit: {:?}: {}", report.audit, report.status, report.message);
    Ok(report.exit_code())
}

fn run_generate(args: GenerateArgs) -> Result<i32> {
    if let Some(axis) = args.consensus_axis {
        let (t, pattern) = consensus_instance(&args.synth.shape, axis, args.pattern_slices, args.synth.data_seed)?;
        write_tensor(args.out.as_deref(), &t)?;
        eprintln!(
            "planted pattern along axis {axis}: slices {:?}, {} known entries",
            pattern.gamma,
            t.nnz()
        );
        return Ok(exit::SUCCESS);
    }
    let spec = args.synth.spec(args.model)?;
    let (inst, seed) = if args.require_support {
        generate_supported(&spec, args.synth.data_seed, 100)?
    } else {
        (generate(&spec, args.synth.data_seed)?, args.synth.data_seed)
    };
    write_tensor(args.out.as_deref(), &inst.observed)?;
    if let Some(path) = &args.truth {
        write_tensor(Some(path), &inst.truth)?;
    }
    eprintln!(
        "generated shape {} with {} known entries (seed {seed})",
        inst.observed.shape(),
        inst.observed.nnz()
    );
    Ok(exit::SUCCESS)
}
