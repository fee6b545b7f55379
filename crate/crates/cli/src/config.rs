//! Command line surface and run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

/// Seed used when none is given, so every run is reproducible by
/// default.
pub const DEFAULT_SEED: u64 = 42;

/// Environment variable naming the directory that relative `--output`
/// paths are resolved against.
pub const OUTPUT_DIR_VAR: &str = "INVOLUTION_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "involution",
    version,
    about = "Involution integrals, gap probabilities, partition tables, and threshold-growth experiments",
    propagate_version = true
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every randomized computation.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Write the result here instead of stdout. A relative path is
    /// resolved against $INVOLUTION_OUTPUT_DIR when that is set.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Output encoding. csv is available for sweep tables and partition
    /// tables; everything else is json.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Definite integrals of the decreasing involution and its
    /// entropy-equation analogue, against their closed forms.
    Integral(IntegralArgs),
    /// Probability that an ever-strengthening trial sequence never
    /// produces a run of k consecutive failures.
    Gap(GapArgs),
    /// Exact counts of partitions with no k consecutive part values all
    /// present, plus related identities.
    Partitions(PartitionsArgs),
    /// Threshold-growth simulation: spanning probabilities, exact
    /// enumeration, sweeps, and corner-seed events.
    Automaton(AutomatonArgs),
    /// Run the whole claim-verification suite and write a report.
    VerifyAll(VerifyArgs),
}

#[derive(Debug, clap::Args)]
pub struct IntegralArgs {
    /// Smaller exponent of the defining equation f^a - f^b = x^a - x^b.
    #[arg(long)]
    pub a: Option<f64>,

    /// Larger exponent.
    #[arg(long)]
    pub b: Option<f64>,

    /// Requested absolute accuracy of each quadrature.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,

    /// Also integrate the two sides of the fixed point separately.
    #[arg(long)]
    pub split: bool,

    /// Also evaluate the series form of -log max(x, f(x)) through both
    /// of its independent routes (defined for b = a + 1).
    #[arg(long)]
    pub series: bool,

    /// Use the entropy-equation involution -y log y = -x log x instead
    /// of a power pair; a and b are not consulted.
    #[arg(long)]
    pub tilde: bool,
}

#[derive(Debug, clap::Args)]
pub struct GapArgs {
    /// Forbidden run length.
    #[arg(long)]
    pub k: u32,

    /// Strengthening rate: trial n fails with probability (1-s)^n.
    #[arg(long)]
    pub s: f64,

    /// Relative tail tolerance of the certified estimate.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    /// Also report the exact finite-horizon value over this many trials.
    #[arg(long)]
    pub finite: Option<u64>,
}

#[derive(Debug, clap::Args)]
pub struct PartitionsArgs {
    /// Forbidden number of consecutive part values (2 to 12).
    #[arg(long)]
    pub k: u32,

    /// The partitioned number.
    #[arg(long)]
    pub n: usize,

    /// Emit the whole table 0..=n instead of the single count.
    #[arg(long)]
    pub table: bool,

    /// Include both sides of the no-1s/no-consecutive-parts identity
    /// at n.
    #[arg(long)]
    pub macmahon: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Original,
    Enhanced,
}

#[derive(Debug, clap::Args)]
pub struct AutomatonArgs {
    /// Neighborhood parameter: arms of length k-1, threshold k.
    #[arg(long)]
    pub k: u32,

    /// Square side for a single estimate or exact enumeration.
    #[arg(long = "L")]
    pub l: Option<u32>,

    /// Occupation density in [0, 1].
    #[arg(long)]
    pub s: Option<f64>,

    /// Enumerate all configurations instead of sampling (L at most 5).
    #[arg(long)]
    pub exact: bool,

    /// Monte Carlo trial count.
    #[arg(long)]
    pub trials: Option<u64>,

    /// Update rule.
    #[arg(long, value_enum, default_value_t = VariantArg::Original)]
    pub variant: VariantArg,

    /// Activation threshold for the original rule (defaults to k).
    #[arg(long)]
    pub theta: Option<u32>,

    /// Run a coupled (L, s) sweep over both rule variants.
    #[arg(long)]
    pub sweep: bool,

    /// Sides for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [8u32, 16, 32, 64])]
    pub l_list: Vec<u32>,

    /// Densities for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.02f64, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.22, 0.24])]
    pub s_list: Vec<f64>,

    /// Evaluate the corner-seed event on the m-square: exact probability,
    /// plus a sampled rate when --trials is given.
    #[arg(long)]
    pub nucleation: bool,

    /// Square side for the corner-seed event (at least k + 2).
    #[arg(long)]
    pub m: Option<u32>,

    /// Include run-length-encoded snapshots of the first sampled trial.
    #[arg(long)]
    pub dump_grid: bool,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Integral(_) => "integral",
            Command::Gap(_) => "gap",
            Command::Partitions(_) => "partitions",
            Command::Automaton(_) => "automaton",
            Command::VerifyAll(_) => "verify-all",
        }
    }

    /// Command-specific parameters as printable key/value pairs, echoed
    /// into the output so a result file identifies its own run.
    pub fn parameters(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |key: &str, value: String| {
            map.insert(key.to_string(), value);
        };
        match self {
            Command::Integral(args) => {
                if let Some(a) = args.a {
                    put("a", a.to_string());
                }
                if let Some(b) = args.b {
                    put("b", b.to_string());
                }
                put("tol", args.tol.to_string());
                put("split", args.split.to_string());
                put("series", args.series.to_string());
                put("tilde", args.tilde.to_string());
            }
            Command::Gap(args) => {
                put("k", args.k.to_string());
                put("s", args.s.to_string());
                put("tol", args.tol.to_string());
                if let Some(n) = args.finite {
                    put("finite", n.to_string());
                }
            }
            Command::Partitions(args) => {
                put("k", args.k.to_string());
                put("n", args.n.to_string());
                put("table", args.table.to_string());
                put("macmahon", args.macmahon.to_string());
            }
            Command::Automaton(args) => {
                put("k", args.k.to_string());
                if let Some(l) = args.l {
                    put("L", l.to_string());
                }
                if let Some(s) = args.s {
                    put("s", s.to_string());
                }
                put("exact", args.exact.to_string());
                if let Some(t) = args.trials {
                    put("trials", t.to_string());
                }
                put(
                    "variant",
                    match args.variant {
                        VariantArg::Original => "original".to_string(),
                        VariantArg::Enhanced => "enhanced".to_string(),
                    },
                );
                if let Some(theta) = args.theta {
                    put("theta", theta.to_string());
                }
                put("sweep", args.sweep.to_string());
                if args.sweep {
                    let l_list: Vec<String> = args.l_list.iter().map(u32::to_string).collect();
                    let s_list: Vec<String> = args.s_list.iter().map(f64::to_string).collect();
                    put("l_list", l_list.join(","));
                    put("s_list", s_list.join(","));
                }
                put("nucleation", args.nucleation.to_string());
                if let Some(m) = args.m {
                    put("m", m.to_string());
                }
            }
            Command::VerifyAll(_) => {}
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_well_formed() {
        RunConfig::command().debug_assert();
    }

    #[test]
    fn parameters_echo_the_given_arguments() {
        let config = RunConfig::try_parse_from([
            "involution", "automaton", "--k", "2", "--L", "8", "--s", "0.1", "--seed", "7",
        ])
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.command.name(), "automaton");
        let params = config.command.parameters();
        assert_eq!(params["k"], "2");
        assert_eq!(params["L"], "8");
        assert_eq!(params["s"], "0.1");
        assert_eq!(params["variant"], "original");
    }

    #[test]
    fn the_seed_defaults_to_a_fixed_value() {
        let config = RunConfig::try_parse_from(["involution", "gap", "--k", "2", "--s", "0.5"]).unwrap();
        assert_eq!(config.seed, DEFAULT_SEED);
        assert_eq!(config.format, OutputFormat::Json);
        assert!(config.output.is_none());
    }
}
