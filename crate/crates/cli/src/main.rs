mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svgloo::artifact::DetectionMethod;
use svgloo::scoring::BackendKind;
use svgloo::{Background, ErrorClass, RunConfig};

#[derive(Parser)]
#[command(name = "svgloo", version, about = "Leave-one-out structural analysis of SVG files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-element LOO deltas and footprints.
    Score {
        #[command(flatten)]
        input: Input,
        /// Write one grayscale footprint PNG per element.
        #[arg(long)]
        export_footprints: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Purity, coverage, compactness, locality and crosstalk.
    Metrics {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        heatmaps: Heatmaps,
        #[command(flatten)]
        common: Common,
    },
    /// Insert synthetic artifacts at random z-positions.
    Inject {
        /// SVG file or directory of SVG files.
        path: PathBuf,
        /// Artifacts per document.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Inject artifacts into clean documents, then flag them.
    Detect {
        #[command(flatten)]
        input: Input,
        /// loo, prefix-delta, isolated-score, random, or all.
        #[arg(long, default_value = "loo")]
        method: String,
        /// Elements to flag per document.
        #[arg(long)]
        k: Option<usize>,
        /// Artifacts per document.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Edit precision for the five edit kinds on every covered concept.
    EditEval {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        heatmaps: Heatmaps,
        #[command(flatten)]
        common: Common,
    },
    /// Collect `*.metrics.json` reports in a directory into one CSV.
    Aggregate {
        dir: PathBuf,
        /// Output CSV (default: <dir>/aggregate.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic corpora with their heatmap manifests.
    Synth {
        /// Separable documents to generate.
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Input {
    /// SVG file or directory of SVG files.
    path: PathBuf,
    /// Reference PNG (or a directory of `<stem>.png`); defaults to each document's own render.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct Heatmaps {
    /// Heatmap manifest (or a directory holding `<stem>/manifest.json`).
    #[arg(long)]
    heatmaps: PathBuf,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    render_size: Option<u32>,
    #[arg(long)]
    background: Option<Background>,
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "svgloo-out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> svgloo::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.render_size {
            c.render_size = v;
        }
        if let Some(v) = self.background {
            c.background = v;
        }
        if let Some(v) = self.backend {
            c.backend = v;
        }
        if let Some(v) = &self.embed_url {
            c.embed_url = Some(v.clone());
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        c.out_dir = Some(self.out.clone());
        c.validate()?;
        Ok(c)
    }
}

/// A failure with its exit class.
pub struct CliError {
    class: ErrorClass,
    message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        CliError {
            class,
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Parse => 3,
            ErrorClass::Render => 4,
            ErrorClass::Backend => 5,
            ErrorClass::Io => 6,
            ErrorClass::Other => 1,
        }
    }
}

impl From<svgloo::Error> for CliError {
    fn from(e: svgloo::Error) -> Self {
        CliError::new(e.class(), e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a context prefix (usually a file name) to library errors.
pub trait Context<T> {
    fn context(self, what: impl std::fmt::Display) -> CliResult<T>;
}

impl<T> Context<T> for svgloo::Result<T> {
    fn context(self, what: impl std::fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::new(e.class(), format!("{what}: {e}")))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Score {
            input,
            export_footprints,
            common,
        } => commands::score(
            &input.path,
            input.reference.as_deref(),
            export_footprints,
            &common.config()?,
        ),
        Command::Metrics {
            input,
            heatmaps,
            common,
        } => commands::metrics(
            &input.path,
            input.reference.as_deref(),
            &heatmaps.heatmaps,
            &common.config()?,
        ),
        Command::Inject { path, count, common } => {
            let mut config = common.config()?;
            if let Some(n) = count {
                config.artifacts = n;
            }
            commands::inject(&path, &config)
        }
        Command::Detect {
            input,
            method,
            k,
            count,
            common,
        } => {
            let mut config = common.config()?;
            if let Some(k) = k {
                config.k = k;
            }
            if let Some(n) = count {
                config.artifacts = n;
            }
            config.validate()?;
            let methods = if method == "all" {
                DetectionMethod::ALL.to_vec()
            } else {
                vec![method.parse::<DetectionMethod>()?]
            };
            commands::detect(&input.path, input.reference.as_deref(), &methods, &config)
        }
        Command::EditEval {
            input,
            heatmaps,
            common,
        } => commands::edit_eval(
            &input.path,
            input.reference.as_deref(),
            &heatmaps.heatmaps,
            &common.config()?,
        ),
        Command::Aggregate { dir, out } => commands::aggregate(&dir, out.as_deref()),
        Command::Synth { count, common } => commands::synth(count, &common.config()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit_code())
        }
    }
}
