//! Command line: headless generation, document inspection, asset import
//! and the HTTP server.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use comicweave_core::assets::AssetPool;
use comicweave_core::grammar::PhaseTree;
use comicweave_core::model::props;
use comicweave_core::render::{render_sequence, Resample};
use comicweave_core::{LayerError, ModelError, SceneDocument, SequenceModel};
use serde_json::Value as Json;
use thiserror::Error;

use crate::assets_io::{self, AssetIoError};
use crate::config::{Config, ConfigError};
use crate::output;
use crate::service::{self, ServiceError};

pub const DEFAULT_LAYERS: &str = "grammar,arc,action,transition,symbol";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Assets(#[from] AssetIoError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed document {path}: {reason}")]
    Document { path: PathBuf, reason: String },
    #[error("bad --params: {0}")]
    Params(String),
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "comicweave", version, about = "Layered comic strip generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sequence, run layers over it and write the rendered strip.
    Generate(GenerateArgs),
    /// Print a summary of a scene document.
    Inspect(InspectArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Manage visual sets on disk.
    #[command(subcommand)]
    Assets(AssetsCommand),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated layer names, applied left to right.
    #[arg(long, default_value = DEFAULT_LAYERS, value_delimiter = ',')]
    pub layers: Vec<String>,
    /// Asset root: each subdirectory is loaded as a visual set.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "COMICWEAVE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Per-layer parameters as a JSON object, or `@file` to read one.
    #[arg(long)]
    pub params: Option<String>,
    /// Bilinear instead of nearest-neighbour resampling.
    #[arg(long)]
    pub bilinear: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub file: PathBuf,
    /// Plot the tension curve.
    #[arg(long)]
    pub tension: bool,
    /// Print the grammar tree.
    #[arg(long)]
    pub structure: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long, env = "COMICWEAVE_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AssetsCommand {
    /// Import images from DIR into set NAME under an asset root.
    Import {
        #[arg(long = "set")]
        set: String,
        dir: PathBuf,
        /// Asset root to write into; defaults to the first configured root, else `assets`.
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long, env = "COMICWEAVE_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Write the built-in procedural sets as PNG files.
    ExportBuiltin {
        #[arg(long, default_value = "assets/builtin")]
        out: PathBuf,
    },
}

fn parse_params(raw: Option<&str>) -> Result<BTreeMap<String, Json>, CliError> {
    let Some(raw) = raw else {
        return Ok(BTreeMap::new());
    };
    let text = match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(io_at(Path::new(path)))?,
        None => raw.to_string(),
    };
    let params: BTreeMap<String, Json> =
        serde_json::from_str(&text).map_err(|e| CliError::Params(e.to_string()))?;
    if let Some((name, _)) = params.iter().find(|(_, v)| !v.is_object()) {
        return Err(CliError::Params(format!(
            "parameters for `{name}` must be an object"
        )));
    }
    Ok(params)
}

/// Summary of a finished `generate`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateReport {
    pub panels: usize,
    pub revision: u64,
    pub out: PathBuf,
}

pub fn generate(args: &GenerateArgs) -> Result<GenerateReport, CliError> {
    let mut config = Config::load(args.config.as_deref())?;
    if args.bilinear {
        config.layout.resample = Resample::Bilinear;
    }
    let params = config.layer_params(&parse_params(args.params.as_deref())?);
    let generator = config.generator()?;
    let mut pool = config.asset_pool()?;
    if let Some(root) = &args.assets {
        assets_io::load_asset_root(&mut pool, root)?;
    }
    let names: Vec<&str> = args
        .layers
        .iter()
        .map(String::as_str)
        .filter(|s| !s.is_empty())
        .collect();
    let mut seq = SequenceModel::new(args.length, args.seed);
    generator.apply_layers(&mut seq, &names, args.seed, &mut pool, &params)?;
    let rendered = render_sequence(&seq, &pool, &config.layout);

    // Stage next to the destination so nothing is left behind on failure.
    let parent = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io_at(parent))?;
    let staging = tempfile::Builder::new()
        .prefix(".comicweave-")
        .tempdir_in(parent)
        .map_err(io_at(parent))?;
    output::write_render(&rendered, staging.path()).map_err(io_at(staging.path()))?;
    if args.out.exists() {
        for entry in fs::read_dir(staging.path()).map_err(io_at(staging.path()))? {
            let from = entry.map_err(io_at(staging.path()))?.path();
            let to = args
                .out
                .join(from.file_name().expect("staged file has a name"));
            fs::rename(&from, &to).map_err(io_at(&to))?;
        }
    } else {
        fs::rename(staging.path(), &args.out).map_err(io_at(&args.out))?;
        let _ = staging.keep();
    }
    Ok(GenerateReport {
        panels: seq.len(),
        revision: seq.revision(),
        out: args.out.clone(),
    })
}

fn structure_brackets(tree: &PhaseTree, out: &mut String) {
    match tree {
        PhaseTree::Leaf(c) => out.push_str(c.letter()),
        PhaseTree::Phase { replaces, children } => {
            if let Some(c) = replaces {
                out.push_str(c.letter());
            }
            out.push('[');
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                structure_brackets(child, out);
            }
            out.push(']');
        }
    }
}

/// Vertical plot, one column per panel, one row per integer tension level.
pub fn tension_plot(tensions: &[Option<f64>]) -> String {
    let levels: Vec<Option<i64>> = tensions
        .iter()
        .map(|t| t.map(|v| v.round() as i64))
        .collect();
    let top = levels.iter().flatten().copied().max().unwrap_or(0).max(0);
    let mut out = String::new();
    for level in (0..=top).rev() {
        let _ = write!(out, "{level:>3} |");
        for l in &levels {
            out.push_str(if *l == Some(level) { "  *" } else { "   " });
        }
        out.push('\n');
    }
    let _ = writeln!(out, "    +{}", "-".repeat(3 * levels.len()));
    out
}

/// The text printed by `inspect`.
pub fn inspect_report(
    doc: &SceneDocument,
    tension: bool,
    structure: bool,
) -> Result<String, ModelError> {
    let seq = SequenceModel::from_document(doc)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "seed {}  revision {}  panels {}",
        seq.seed(),
        seq.revision(),
        seq.len()
    );
    let _ = writeln!(
        out,
        "{:>3}  {:>5}  {:<5}  {:>7}  {:<11}  actions",
        "#", "id", "phase", "tension", "transition"
    );
    let mut tensions = Vec::new();
    for (k, panel) in seq.panels().iter().enumerate() {
        let node = seq.node(*panel).expect("panel exists");
        let phase = node.text(props::GRAMMAR_PHASE).unwrap_or("-");
        let t = node.number(props::TENSION);
        tensions.push(t);
        let t_text = t.map_or("-".to_string(), |v| format!("{v}"));
        let transition = node.text(props::TRANSITION_IN).unwrap_or("-");
        let actions: Vec<String> = seq
            .characters_by_identity(*panel)
            .into_iter()
            .map(|(who, id)| {
                format!(
                    "{who}={}",
                    seq.node(id)
                        .and_then(|n| n.text(props::ACTION))
                        .unwrap_or("-")
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "{k:>3}  {:>5}  {phase:<5}  {t_text:>7}  {transition:<11}  {}",
            panel.0,
            actions.join(" ")
        );
    }
    if tension {
        out.push('\n');
        out.push_str(&tension_plot(&tensions));
    }
    if structure {
        out.push('\n');
        match seq.structure() {
            Some(s) => {
                let mut line = String::new();
                structure_brackets(&s.tree, &mut line);
                let _ = writeln!(out, "{line}");
            }
            None => out.push_str("(no grammar structure)\n"),
        }
    }
    Ok(out)
}

pub fn inspect(args: &InspectArgs) -> Result<String, CliError> {
    let text = fs::read_to_string(&args.file).map_err(io_at(&args.file))?;
    let bad = |reason: String| CliError::Document {
        path: args.file.clone(),
        reason,
    };
    let doc = SceneDocument::from_json(&text).map_err(|e| bad(e.to_string()))?;
    inspect_report(&doc, args.tension, args.structure).map_err(|e| bad(e.to_string()))
}

/// Imports `dir` and writes it to `root/<set>`. Returns the entry count.
pub fn import_assets(set: &str, dir: &Path, root: &Path) -> Result<usize, CliError> {
    let mut pool = AssetPool::empty();
    let report = assets_io::add_visuals(&mut pool, set, dir)?;
    let set = comicweave_core::assets::normalize_label(set);
    let target = root.join(&set);
    if target.is_dir() {
        // Keep what the set already had; imported labels win.
        let mut merged = AssetPool::empty();
        assets_io::add_visuals(&mut merged, &set, &target)?;
        for label in pool.labels(&set) {
            merged.insert(
                &set,
                &label,
                pool.get(&set, &label).expect("listed").clone(),
            );
        }
        pool = merged;
    }
    assets_io::export_set(&pool, &set, &target)?;
    Ok(report.added)
}

pub fn export_builtin(out: &Path) -> Result<usize, CliError> {
    let pool = AssetPool::builtin();
    let mut total = 0;
    for set in pool.set_names() {
        if pool.labels(&set).is_empty() {
            continue;
        }
        total += assets_io::export_set(&pool, &set, &out.join(&set))?
            .entries
            .len();
    }
    Ok(total)
}

/// Runs a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let r = generate(&args)?;
            println!(
                "wrote {} panels (revision {}) to {}",
                r.panels,
                r.revision,
                r.out.display()
            );
        }
        Command::Inspect(args) => print!("{}", inspect(&args)?),
        Command::Serve(args) => {
            let mut config = Config::load(args.config.as_deref())?;
            if let Some(port) = args.port {
                config.server.port = port;
            }
            if let Some(host) = args.host {
                config.server.host = host;
            }
            let runtime = tokio::runtime::Runtime::new().map_err(io_at(Path::new(".")))?;
            runtime.block_on(service::serve(config))?;
        }
        Command::Assets(AssetsCommand::Import {
            set,
            dir,
            root,
            config,
        }) => {
            let root = match root {
                Some(r) => r,
                None => Config::load(config.as_deref())?
                    .assets
                    .roots
                    .first()
                    .cloned()
                    .unwrap_or_else(|| "assets".into()),
            };
            println!("{}", import_assets(&set, &dir, &root)?);
        }
        Command::Assets(AssetsCommand::ExportBuiltin { out }) => {
            let n = export_builtin(&out)?;
            println!("exported {n} visuals to {}", out.display());
        }
    }
    Ok(())
}
