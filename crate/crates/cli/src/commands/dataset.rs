//! `icrlab dataset`: stats, validation, and synthetic corpus generation.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::Serialize;

use icrlab_core::dataset::{
    check_containment, compute_stats, generate_synthetic, load_corpus, render_manifest,
    serialize_label_file, DatasetError, ManifestEntry, PairedImage, SynthSpec,
};

use crate::output::{config_hash, to_pretty_json, OutDir};
use crate::{CliError, Format};

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[command(subcommand)]
    pub command: DatasetCommand,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Compute corpus statistics from a manifest.
    Stats(StatsArgs),
    /// Parse a corpus and list containment warnings.
    Validate(ValidateArgs),
    /// Generate a synthetic paired corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest CSV (image_id,width,height,label_path).
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = 100)]
    pub images: usize,

    #[arg(long, default_value_t = 1)]
    pub pairs_min: usize,

    #[arg(long, default_value_t = 5)]
    pub pairs_max: usize,

    #[arg(long, default_value_t = 1920)]
    pub width: u32,

    #[arg(long, default_value_t = 1080)]
    pub height: u32,

    /// Fraction of plates deliberately placed half outside their vehicle.
    #[arg(long, default_value_t = 0.0)]
    pub violation_rate: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value = "text")]
    pub format: Format,
}

pub fn run(args: DatasetArgs) -> Result<(), CliError> {
    match args.command {
        DatasetCommand::Stats(a) => stats(a),
        DatasetCommand::Validate(a) => validate(a),
        DatasetCommand::Synth(a) => synth(a),
    }
}

fn map_dataset_error(e: DatasetError, manifest: &Path) -> CliError {
    match e {
        DatasetError::Io { .. } => {
            CliError::Usage(format!("--manifest {}: {e}", manifest.display()))
        }
        other => CliError::Config(other.to_string()),
    }
}

fn load(manifest: &Path) -> Result<Vec<PairedImage>, CliError> {
    let images = load_corpus(manifest).map_err(|e| map_dataset_error(e, manifest))?;
    if images.is_empty() {
        return Err(CliError::Usage(format!(
            "--manifest {}: manifest lists no images",
            manifest.display()
        )));
    }
    Ok(images)
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let images = load(&args.manifest)?;
    let stats = compute_stats(&images).map_err(|e| CliError::Config(e.to_string()))?;

    #[derive(Serialize)]
    struct ResolvedConfig<'a> {
        manifest: &'a str,
    }
    let manifest_str = args.manifest.display().to_string();
    let hash = config_hash(
        "dataset-stats",
        &ResolvedConfig {
            manifest: &manifest_str,
        },
    )?;

    let mut out = OutDir::resolve(args.out.clone());
    out.write("stats.json", &to_pretty_json(&stats)?)?;
    out.finish("dataset-stats", &hash)?;

    match args.format {
        Format::Json => println!("{}", to_pretty_json(&stats)?),
        Format::Text => print!("{}", stats.render_table()),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Warning {
    image_id: String,
    pair_index: usize,
    containment_ratio: f64,
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let images = load(&args.manifest)?;

    let mut warnings = Vec::new();
    let mut n_pairs = 0usize;
    for img in &images {
        for (idx, pair) in img.pairs.iter().enumerate() {
            n_pairs += 1;
            let ratio = check_containment(pair, img.width_px, img.height_px);
            if ratio < 1.0 {
                warnings.push(Warning {
                    image_id: img.image_id.clone(),
                    pair_index: idx,
                    containment_ratio: ratio,
                });
            }
        }
    }

    #[derive(Serialize)]
    struct Report<'a> {
        images: usize,
        pairs: usize,
        warnings: &'a [Warning],
    }
    let report = Report {
        images: images.len(),
        pairs: n_pairs,
        warnings: &warnings,
    };

    #[derive(Serialize)]
    struct ResolvedConfig<'a> {
        manifest: &'a str,
    }
    let manifest_str = args.manifest.display().to_string();
    let hash = config_hash(
        "dataset-validate",
        &ResolvedConfig {
            manifest: &manifest_str,
        },
    )?;

    let mut out = OutDir::resolve(args.out.clone());
    out.write("validation-report.json", &to_pretty_json(&report)?)?;
    out.finish("dataset-validate", &hash)?;

    match args.format {
        Format::Json => println!("{}", to_pretty_json(&report)?),
        Format::Text => {
            println!("{} images, {} pairs parsed cleanly", images.len(), n_pairs);
            for w in &warnings {
                println!(
                    "warning: {} pair {}: plate containment ratio {:.4}",
                    w.image_id, w.pair_index, w.containment_ratio
                );
            }
            println!("{} containment warning(s)", warnings.len());
        }
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    if args.pairs_max < args.pairs_min {
        return Err(CliError::Usage(
            "--pairs-min must not exceed --pairs-max".into(),
        ));
    }
    if !(0.0..=1.0).contains(&args.violation_rate) {
        return Err(CliError::Usage(format!(
            "--violation-rate must lie in [0, 1], got {}",
            args.violation_rate
        )));
    }
    let spec = SynthSpec {
        n_images: args.images,
        pairs_min: args.pairs_min,
        pairs_max: args.pairs_max,
        image_width: args.width,
        image_height: args.height,
        violation_rate: args.violation_rate,
        seed: args.seed,
    };
    let hash = config_hash("dataset-synth", &spec)?;

    let images = generate_synthetic(&spec).map_err(|e| CliError::Config(e.to_string()))?;

    let mut out = OutDir::resolve(args.out.clone());
    let root = out.root().to_path_buf();
    let mut entries = Vec::with_capacity(images.len());
    for img in &images {
        let rel = format!("labels/{}.txt", img.image_id);
        out.write(&rel, &serialize_label_file(img))?;
        entries.push(ManifestEntry {
            image_id: img.image_id.clone(),
            width: img.width_px,
            height: img.height_px,
            label_path: rel,
        });
    }
    out.write("manifest.csv", &render_manifest(&entries))?;
    out.finish("dataset-synth", &hash)?;

    let total_pairs: usize = images.iter().map(|i| i.pairs.len()).sum();
    match args.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                images: usize,
                pairs: usize,
                out_dir: &'a str,
            }
            let report = Report {
                images: images.len(),
                pairs: total_pairs,
                out_dir: &root.display().to_string(),
            };
            println!("{}", to_pretty_json(&report)?);
        }
        Format::Text => println!(
            "wrote {} images with {} pairs under {} (manifest.csv, labels/)",
            images.len(),
            total_pairs,
            root.display()
        ),
    }
    Ok(())
}
