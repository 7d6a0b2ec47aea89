use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use matchmaking::experiment::{generate_random_instance, run_experiment_compare, ExperimentConfig};
use matchmaking::hardness::{
    build_hard_instance_with_shifts, marginal_growth_table, power3_sums, verify_hard_instance,
    write_growth_csv, GrowthMode,
};
use matchmaking::harsanyi::{harsanyi_dividends, NuTable};
use matchmaking::rsyp::{hoeffding_sample_size, rsyp, RsypConfig};
use matchmaking::{
    exact_shapley, parse_instance, render_instance, run_auction, AdditiveGame, AuctionInstance,
    Error, Money, PaymentRule, RstGame, ShapleyMethod, ShapleyResult, ValuationMode,
};

/// Order-flow matchmaking: run searcher auctions and share the revenue back to transaction
/// creators by Shapley value.
///
/// Every command defaults to the strict payment rule. The three-searcher worked example only
/// reproduces its payments of 8 and 8 under `--rule first_conflict`.
#[derive(Parser)]
#[command(name = "matchmaker", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Winner determination and payments.
    #[command(subcommand)]
    Auction(AuctionCmd),
    /// Shapley values of the revenue game.
    #[command(subcommand)]
    Shapley(ShapleyCmd),
    /// Hard instances with many distinct marginal contributions.
    #[command(subcommand)]
    Hardness(HardnessCmd),
    /// Exact versus sampled redistribution on random instances.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Instance generators.
    #[command(subcommand)]
    Gen(GenCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum RuleArg {
    Strict,
    FirstConflict,
}

impl From<RuleArg> for PaymentRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Strict => PaymentRule::Strict,
            RuleArg::FirstConflict => PaymentRule::FirstConflict,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    SingleMinded,
    Additive,
}

impl From<ModeArg> for ValuationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SingleMinded => ValuationMode::SingleMinded,
            ModeArg::Additive => ValuationMode::Additive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Subset,
    Permutation,
    Dividends,
    Additive,
}

impl From<MethodArg> for ShapleyMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Subset => ShapleyMethod::Subset,
            MethodArg::Permutation => ShapleyMethod::Permutation,
            MethodArg::Dividends => ShapleyMethod::Dividends,
            MethodArg::Additive => ShapleyMethod::AdditiveClosed,
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance document (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Payment rule; overrides the document's `payment_rule`.
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
}

impl InstanceArgs {
    fn load(&self) -> anyhow::Result<(AuctionInstance, PaymentRule)> {
        let inst = read_instance(&self.input)?;
        let rule = self.rule.map_or(inst.payment_rule, PaymentRule::from);
        Ok((inst, rule))
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum AuctionCmd {
    /// Run ICA-SM (single-minded) or per-transaction second price (additive).
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum ShapleyCmd {
    /// Exact Shapley values.
    Exact {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value = "subset")]
        method: MethodArg,
        /// Also write the Harsanyi dividends as CSV.
        #[arg(long)]
        dump_dividends: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sampled Shapley values averaged over random orderings.
    Rsyp {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Number of sampled orderings [default: 25·n²].
        #[arg(long)]
        k: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Average over all n! orderings instead.
        #[arg(long)]
        exhaustive: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Orderings needed for error below t with confidence delta.
    SampleSize {
        /// Bound on |marginal contribution|; defaults to the instance's total bids.
        #[arg(long)]
        r_star: Option<f64>,
        /// Instance used for the default bound.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        delta: f64,
    },
}

#[derive(Args)]
struct HardArgs {
    /// Transaction count; a perfect square of at least 4.
    #[arg(long)]
    n: usize,
    /// Cyclic shift of each diagonal bundle, a permutation of 0..√n.
    #[arg(long, value_delimiter = ',')]
    shifts: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum HardnessCmd {
    /// Write a hard instance as an instance document.
    Gen {
        #[command(flatten)]
        hard: HardArgs,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the construction's intersection and bid-ordering invariants.
    Verify {
        #[command(flatten)]
        hard: HardArgs,
    },
    /// Unique marginal contributions per instance size, as CSV.
    Growth {
        #[arg(long, value_delimiter = ',', default_value = "4,9,16")]
        sizes: Vec<usize>,
        #[arg(long, default_value = "full")]
        mode: String,
        #[arg(long, value_enum, default_value = "strict")]
        rule: RuleArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check that signed power-of-three sums are pairwise distinct.
    Power3 {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Per-transaction |Γ − Γ̃| over random instances.
    Compare {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Sampled orderings per instance [default: 25·n²].
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        exhaustive: bool,
        /// Compare on this instance instead of generated ones.
        #[arg(long, visible_alias = "instance")]
        input: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "strict")]
    rule: RuleArg,
    #[arg(long, value_enum, default_value = "single_minded")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    bid_lo: u64,
    #[arg(long, default_value_t = 100)]
    bid_hi: u64,
    #[arg(long, default_value_t = 4)]
    bundle_cap: usize,
}

impl GenArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            m: self.m,
            seed: self.seed,
            rule: self.rule.into(),
            mode: self.mode.into(),
            bid_lo: self.bid_lo,
            bid_hi: self.bid_hi,
            bundle_cap: self.bundle_cap,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum GenCmd {
    /// One seeded random instance.
    Random {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_instance(path: &Path) -> anyhow::Result<AuctionInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_instance(&text)?)
}

fn emit(out: Option<&Path>, body: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn with_newline(mut s: String) -> Vec<u8> {
    s.push('\n');
    s.into_bytes()
}

fn shapley_csv(res: &ShapleyResult) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_index", "phi", "gamma"])?;
    for (j, phi) in res.phi.iter().enumerate() {
        let gamma = res
            .gamma
            .as_ref()
            .map(|g| g[j].to_string())
            .unwrap_or_default();
        w.write_record([j.to_string(), phi.to_string(), gamma])?;
    }
    Ok(w.into_inner()?)
}

fn report_shapley(res: &ShapleyResult, output: &OutputArgs) -> anyhow::Result<()> {
    if res.normalization_undefined() {
        eprintln!("note: Shapley values sum to zero, so redistribution fractions are undefined");
    }
    let body = match output.format.unwrap_or(Format::Json) {
        Format::Json => with_newline(res.to_json()),
        Format::Csv => shapley_csv(res)?,
    };
    emit(output.out.as_deref(), &body)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Auction(AuctionCmd::Run { instance, output }) => {
            let (inst, rule) = instance.load()?;
            let outcome = run_auction(&inst, rule)?;
            let body = match output.format.unwrap_or(Format::Json) {
                Format::Json => with_newline(outcome.to_json()),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["searcher", "bundle", "payment"])?;
                    for win in &outcome.winners {
                        let bundle = win
                            .transactions
                            .iter()
                            .map(usize::to_string)
                            .collect::<Vec<_>>();
                        w.write_record([
                            win.searcher.to_string(),
                            bundle.join(" "),
                            win.payment.to_string(),
                        ])?;
                    }
                    w.into_inner()?
                }
            };
            emit(output.out.as_deref(), &body)
        }
        Command::Shapley(ShapleyCmd::Exact {
            instance,
            method,
            dump_dividends,
            output,
        }) => {
            let (inst, rule) = instance.load()?;
            let res = exact_shapley(&inst, method.into(), rule)?;
            if let Some(path) = dump_dividends {
                let table = match inst.mode {
                    ValuationMode::SingleMinded => NuTable::from_game(&RstGame::new(&inst, rule)?)?,
                    ValuationMode::Additive => NuTable::from_game(&AdditiveGame::new(&inst)?)?,
                };
                let file = fs::File::create(&path)
                    .with_context(|| format!("writing {}", path.display()))?;
                harsanyi_dividends(&table)?.write_csv(file)?;
            }
            report_shapley(&res, &output)
        }
        Command::Shapley(ShapleyCmd::Rsyp {
            instance,
            k,
            seed,
            exhaustive,
            output,
        }) => {
            let (inst, rule) = instance.load()?;
            let cfg = RsypConfig {
                k: k.unwrap_or_else(|| RsypConfig::default_k(inst.n)),
                seed,
                rule,
                exhaustive,
            };
            report_shapley(&rsyp(&inst, &cfg)?, &output)
        }
        Command::Shapley(ShapleyCmd::SampleSize {
            r_star,
            input,
            t,
            delta,
        }) => {
            let r_star = match (r_star, input) {
                (Some(r), _) => r,
                (None, Some(path)) => {
                    Money::from_rational(read_instance(&path)?.total_bids()).to_f64()
                }
                (None, None) => {
                    return Err(Error::InvalidArgument("give --r-star or --input".into()).into())
                }
            };
            let k = hoeffding_sample_size(r_star, t, delta)?;
            let doc = serde_json::json!({ "r_star": r_star, "t": t, "delta": delta, "k": k });
            emit(None, &with_newline(serde_json::to_string_pretty(&doc)?))
        }
        Command::Hardness(HardnessCmd::Gen { hard, rule, out }) => {
            let h = build_hard_instance_with_shifts(hard.n, hard.shifts)?;
            let inst = match rule {
                Some(r) => h.instance.with_rule(r.into()),
                None => h.instance,
            };
            emit(out.as_deref(), &with_newline(render_instance(&inst)))
        }
        Command::Hardness(HardnessCmd::Verify { hard }) => {
            let h = build_hard_instance_with_shifts(hard.n, hard.shifts)?;
            let violations: Vec<String> = verify_hard_instance(&h)
                .iter()
                .map(ToString::to_string)
                .collect();
            let doc = serde_json::json!({ "n": h.n, "ok": violations.is_empty(), "violations": violations });
            emit(None, &with_newline(serde_json::to_string_pretty(&doc)?))?;
            if violations.is_empty() {
                Ok(())
            } else {
                Err(Error::InvalidArgument("hard instance violates its invariants".into()).into())
            }
        }
        Command::Hardness(HardnessCmd::Growth {
            sizes,
            mode,
            rule,
            output,
        }) => {
            let mode: GrowthMode = mode.parse()?;
            let rows = marginal_growth_table(&sizes, mode, rule.into())?;
            let body = match output.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_growth_csv(&rows, &mut buf)?;
                    buf
                }
                Format::Json => with_newline(serde_json::to_string_pretty(&rows)?),
            };
            emit(output.out.as_deref(), &body)
        }
        Command::Hardness(HardnessCmd::Power3 { n }) => {
            let rep = power3_sums(n)?;
            emit(None, &with_newline(serde_json::to_string_pretty(&rep)?))
        }
        Command::Experiment(ExperimentCmd::Compare {
            gen,
            count,
            k,
            exhaustive,
            input,
            output,
        }) => {
            let cfg = ExperimentConfig {
                instance_count: count,
                k,
                exhaustive,
                ..gen.config()
            };
            let injected = input.as_deref().map(read_instance).transpose()?;
            let report = run_experiment_compare(&cfg, injected.as_ref())?;
            let body = match output.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    report.write_csv(&mut buf)?;
                    buf
                }
                Format::Json => with_newline(report.to_json()),
            };
            emit(output.out.as_deref(), &body)
        }
        Command::Gen(GenCmd::Random { gen, index, out }) => {
            let inst = generate_random_instance(&gen.config(), index)?;
            emit(out.as_deref(), &with_newline(render_instance(&inst)))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage mistakes count as validation errors; 2 is reserved for infeasible sizes.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
