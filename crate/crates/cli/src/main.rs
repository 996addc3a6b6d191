//! `fxlstm`: quantise models, run bit-exact inference, print performance and
//! resource reports, and dump the hard sigmoid tables.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.
//! Every failure prints one line `fxlstm: error[<kind>]: <message>` on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fxlstm::activations::HardSigmoidMethod;
use fxlstm::config::{AluResource, Threshold, WeightResource};
use fxlstm::{EngineKind, FxConfig, MetaParams};

#[derive(Debug, Parser)]
#[command(
    name = "fxlstm",
    version,
    about = "Fixed-point LSTM accelerator simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantise a real-valued model file into a raw fixed-point model file.
    Quantize {
        /// Real-valued model (JSON).
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the quantised model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run inference over a batch of input sequences.
    Infer {
        /// Quantised model written by `quantize`.
        #[arg(long)]
        model: PathBuf,
        /// Input sequences: `[[[x features], ...], ...]`.
        #[arg(long)]
        inputs: PathBuf,
        /// Override the model's MAC engine.
        #[arg(long, value_parser = parse_engine)]
        engine: Option<EngineKind>,
        /// Override the model's ALU count.
        #[arg(long = "num_parallel_alus")]
        num_parallel_alus: Option<usize>,
        /// Also emit every intermediate hidden state.
        #[arg(long)]
        trace: bool,
        /// Process the batch on one thread.
        #[arg(long)]
        sequential: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Performance and resource estimates plus reference-figure cross-checks.
    Report {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the hard sigmoid lookup tables.
    DumpTables {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Meta-parameters: an optional JSON file, then per-field overrides.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Meta-parameter file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "hidden_size")]
    hidden_size: Option<usize>,
    #[arg(long = "input_size")]
    input_size: Option<usize>,
    #[arg(long = "ALU_resource_type", value_parser = parse_from_str::<AluResource>)]
    alu_resource_type: Option<AluResource>,
    #[arg(long = "weight_resource_type", value_parser = parse_from_str::<WeightResource>)]
    weight_resource_type: Option<WeightResource>,
    #[arg(long = "HardSigmoid_method", value_parser = parse_from_str::<HardSigmoidMethod>)]
    hardsigmoid_method: Option<HardSigmoidMethod>,
    /// `min,max`, e.g. `-1,1`.
    #[arg(long = "HardTanh_threshold", value_parser = parse_from_str::<Threshold>, allow_hyphen_values = true)]
    hardtanh_threshold: Option<Threshold>,
    #[arg(long = "in_features")]
    in_features: Option<usize>,
    #[arg(long = "out_features")]
    out_features: Option<usize>,
    /// `frac_bits,total_bits`, e.g. `4,8`.
    #[arg(long = "fixed_point", value_parser = parse_fixed_point)]
    fixed_point: Option<FxConfig>,
    #[arg(long, value_parser = parse_engine)]
    engine: Option<EngineKind>,
    #[arg(long = "num_parallel_alus")]
    num_parallel_alus: Option<usize>,
    #[arg(long = "seq_len")]
    seq_len: Option<usize>,
    #[arg(long = "clock_hz")]
    clock_hz: Option<f64>,
    #[arg(long = "power_w")]
    power_w: Option<f64>,
    #[arg(long = "num_lstm_layers")]
    num_lstm_layers: Option<usize>,
    #[arg(long = "hardsigmoid_slope_shift")]
    hardsigmoid_slope_shift: Option<u32>,
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr<Err = fxlstm::Error>,
{
    s.parse().map_err(|e: fxlstm::Error| e.to_string())
}

fn parse_engine(s: &str) -> Result<EngineKind, String> {
    parse_from_str(s)
}

fn parse_fixed_point(s: &str) -> Result<FxConfig, String> {
    let bad = || format!("`{s}` must be `frac_bits,total_bits`");
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    FxConfig::new(a, b).map_err(|e| e.to_string())
}

macro_rules! apply {
    ($meta:ident, $args:ident, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $args.$field { $meta.$field = v; })+
    };
}

impl ConfigArgs {
    fn resolve(&self) -> Result<MetaParams, CliError> {
        let mut meta = match &self.config {
            Some(path) => {
                let text = read(path).map_err(|e| CliError::Config(e.message()))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => MetaParams::default(),
        };
        let hidden_overridden = self.hidden_size.is_some();
        apply!(
            meta,
            self,
            hidden_size,
            input_size,
            alu_resource_type,
            weight_resource_type,
            hardsigmoid_method,
            hardtanh_threshold,
            in_features,
            out_features,
            fixed_point,
            engine,
            num_parallel_alus,
            seq_len,
            clock_hz,
            power_w,
            num_lstm_layers,
            hardsigmoid_slope_shift,
        );
        // the dense layer reads the hidden state, so follow hidden_size unless set explicitly
        if hidden_overridden && self.in_features.is_none() {
            meta.in_features = meta.hidden_size;
        }
        meta.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(meta)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Data(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
        }
    }

    fn message(&self) -> String {
        let (CliError::Usage(m) | CliError::Config(m) | CliError::Data(m)) = self;
        m.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

pub fn read(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Quantize { model, config, out } => {
            let meta = config.resolve()?;
            commands::quantize(&model, meta, &out)
        }
        Command::Infer {
            model,
            inputs,
            engine,
            num_parallel_alus,
            trace,
            sequential,
            format,
        } => commands::infer(
            &model,
            &inputs,
            commands::InferOptions {
                engine,
                num_parallel_alus,
                trace,
                sequential,
                json: format == Format::Json,
            },
        ),
        Command::Report { config, format } => {
            commands::report(&config.resolve()?, format == Format::Json)
        }
        Command::DumpTables { config, format } => {
            commands::dump_tables(&config.resolve()?, format == Format::Json)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            let err = CliError::Usage(line.trim_start_matches("error: ").to_string());
            eprintln!("fxlstm: error[{}]: {}", err.kind(), err.message());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fxlstm: error[{}]: {}", e.kind(), e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
