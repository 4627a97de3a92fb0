mod config;
mod pgm;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dlr::audio::load_pipeline_clip;
use dlr::dlr::{load_weights, DlrConfig, DLR_CHANNELS};
use dlr::features::{read_feat, write_csv, write_feat};
use dlr::manifest::{read_source_manifest, read_tag_manifest};
use dlr::source::{exclude_minor_genres, load_examples, stratified_split, train_source, SourceHyper};
use dlr::synth::{make_source_corpus, make_tag_corpus};
use dlr::target::{build_input, prepare_tag_data, tag_dataset, train_target, ReprKind, ReprSpec, TargetHyper};

use config::{split_sizes, RunConfig, Schema};

#[derive(Parser)]
#[command(name = "dlr", version, about = "Learned rhythmic audio representations: synthesis, extraction, training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic labeled corpus.
    Synth(SynthArgs),
    /// Compute one representation of an audio file.
    Extract(ExtractArgs),
    /// Learn DLR weights on the genre + tempo source task.
    TrainSource(TrainSourceArgs),
    /// Train a tagger on a fixed representation.
    TrainTarget(TrainTargetArgs),
    /// Write a grayscale heatmap of a feature segment.
    Visualize(VisualizeArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    /// `source` or `tags`
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` settings applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExtractArgs {
    /// mel, dlr, tempogram, mel+dlr or mel+tempogram
    #[arg(long)]
    repr: Option<String>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write CSV instead of the binary FEAT format
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainSourceArgs {
    /// Directory holding manifest.tsv
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of dilated branches
    #[arg(long)]
    n: Option<usize>,
    /// Channels per branch
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    alpha: Option<usize>,
    /// Allow a total channel count other than 128
    #[arg(long)]
    reduced: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    /// Training crop length in samples
    #[arg(long)]
    crop: Option<usize>,
    #[arg(long)]
    conv_channels: Option<usize>,
    #[arg(long)]
    bn_momentum: Option<f32>,
    /// Train, valid and test fractions, e.g. 0.8,0.1,0.1
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainTargetArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    repr: Option<String>,
    /// Frozen DLR weights, required for dlr kinds
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    conv_channels: Option<usize>,
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    bn_momentum: Option<f32>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct VisualizeArgs {
    /// FEAT file
    #[arg(long)]
    feature: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    /// First frame of the segment
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

const SYNTH: Schema = &[("kind", ""), ("items", ""), ("seed", "0"), ("out", "")];
const EXTRACT: Schema = &[("repr", ""), ("weights", ""), ("in", ""), ("out", ""), ("csv", "false")];
const TRAIN_SOURCE: Schema = &[
    ("data", ""),
    ("n", "4"),
    ("channels", "32"),
    ("alpha", "13"),
    ("reduced", "false"),
    ("seed", "0"),
    ("out", ""),
    ("epochs", "200"),
    ("batch_size", "16"),
    ("patience", "10"),
    ("lr", "0.001"),
    ("crop", "70125"),
    ("conv_channels", "32"),
    ("bn_momentum", "0.99"),
    ("split", "0.8,0.1,0.1"),
];
const TRAIN_TARGET: Schema = &[
    ("data", ""),
    ("repr", ""),
    ("weights", ""),
    ("seed", "0"),
    ("out", ""),
    ("epochs", "100"),
    ("batch_size", "16"),
    ("patience", "10"),
    ("lr", "0.001"),
    ("conv_channels", "32"),
    ("max_frames", "906"),
    ("bn_momentum", "0.99"),
    ("split", "0.7,0.15,0.15"),
];
const VISUALIZE: Schema = &[("feature", ""), ("frames", "40"), ("start", "0"), ("out", "")];

fn path_str(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn flag(on: bool) -> Option<bool> {
    on.then_some(true)
}

fn base(schema: Schema, file: Option<&Path>) -> Result<RunConfig> {
    let mut c = RunConfig::new(schema);
    if let Some(f) = file {
        c.apply_file(f)?;
    }
    Ok(c)
}

fn echo(c: &RunConfig) {
    print!("{}", c.echo());
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut c = base(SYNTH, a.config.as_deref())?;
    c.set("kind", a.kind);
    c.set("items", a.items);
    c.set("seed", a.seed);
    c.set("out", path_str(a.out));
    echo(&c);
    let (items, seed, out): (usize, u64, PathBuf) = (c.get("items")?, c.get("seed")?, c.get("out")?);
    match c.raw("kind") {
        "source" => make_source_corpus(items, seed, &out).map(|r| r.len()),
        "tags" => make_tag_corpus(items, seed, &out).map(|r| r.len()),
        other => bail!("unknown corpus kind `{other}` (expected source or tags)"),
    }
    .with_context(|| format!("writing corpus to {}", out.display()))?;
    println!("wrote {items} items to {}", out.join("manifest.tsv").display());
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let mut c = base(EXTRACT, a.config.as_deref())?;
    c.set("repr", a.repr);
    c.set("weights", path_str(a.weights));
    c.set("in", path_str(a.input));
    c.set("out", path_str(a.out));
    c.set("csv", flag(a.csv));
    echo(&c);
    let kind: ReprKind = c.get("repr")?;
    let weights = match c.optional::<PathBuf>("weights")? {
        Some(p) => Some(load_weights(&p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let spec = ReprSpec::new(kind, weights)?;
    let input: PathBuf = c.get("in")?;
    let out: PathBuf = c.get("out")?;
    let clip = load_pipeline_clip(&input)?;
    let m = build_input(&clip, &spec)?;
    if c.get::<bool>("csv")? {
        write_csv(&out, &m)?;
    } else {
        write_feat(&out, &m)?;
    }
    println!("{} {}", m.rows(), m.cols());
    Ok(())
}

fn train_source_cmd(a: TrainSourceArgs) -> Result<()> {
    let mut c = base(TRAIN_SOURCE, a.config.as_deref())?;
    c.set("data", path_str(a.data));
    c.set("n", a.n);
    c.set("channels", a.channels);
    c.set("alpha", a.alpha);
    c.set("reduced", flag(a.reduced));
    c.set("seed", a.seed);
    c.set("out", path_str(a.out));
    c.set("epochs", a.epochs);
    c.set("batch_size", a.batch_size);
    c.set("patience", a.patience);
    c.set("lr", a.lr);
    c.set("crop", a.crop);
    c.set("conv_channels", a.conv_channels);
    c.set("bn_momentum", a.bn_momentum);
    c.set("split", a.split);
    echo(&c);

    let (n, ch, alpha): (usize, usize, usize) = (c.get("n")?, c.get("channels")?, c.get("alpha")?);
    let cfg = if c.get::<bool>("reduced")? {
        DlrConfig::reduced(n, ch, alpha)?
    } else {
        DlrConfig::new(n, ch, alpha).with_context(|| format!("{n} × {ch} must total {DLR_CHANNELS} channels (or pass --reduced)"))?
    };
    let hyper = SourceHyper {
        batch_size: c.get("batch_size")?,
        max_epochs: c.get("epochs")?,
        patience: c.get("patience")?,
        lr: c.get("lr")?,
        crop: c.get("crop")?,
        conv_channels: c.get("conv_channels")?,
        bn_momentum: c.get("bn_momentum")?,
        seed: c.get("seed")?,
    };
    let out: PathBuf = c.get("out")?;
    let manifest = c.get::<PathBuf>("data")?.join("manifest.tsv");
    let entries = read_source_manifest(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let dataset = exclude_minor_genres(&entries, &manifest);
    let sizes = split_sizes(c.raw("split"), dataset.items.len())?;
    let assignment = stratified_split(&dataset.genre_labels(), sizes, hyper.seed)?;
    let data = load_examples(&dataset, &assignment)?;
    let (net, report) = train_source(&data, &cfg, &hyper, |e| {
        eprintln!(
            "epoch {:>3}  train {:.4}  valid {:.4}  genre {:.3}  tempo {:.3}",
            e.epoch, e.train_loss, e.valid_loss, e.valid_genre_acc, e.valid_tempo_acc
        )
    })?;
    net.save(&out).with_context(|| format!("writing {}", out.display()))?;
    fs::write(sibling(&out, ".report"), report.to_key_value())?;
    fs::write(sibling(&out, ".epochs.csv"), report.epochs_csv())?;
    print!("{}", report.to_key_value());
    Ok(())
}

fn train_target_cmd(a: TrainTargetArgs) -> Result<()> {
    let mut c = base(TRAIN_TARGET, a.config.as_deref())?;
    c.set("data", path_str(a.data));
    c.set("repr", a.repr);
    c.set("weights", path_str(a.weights));
    c.set("seed", a.seed);
    c.set("out", path_str(a.out));
    c.set("epochs", a.epochs);
    c.set("batch_size", a.batch_size);
    c.set("patience", a.patience);
    c.set("lr", a.lr);
    c.set("conv_channels", a.conv_channels);
    c.set("max_frames", a.max_frames);
    c.set("bn_momentum", a.bn_momentum);
    c.set("split", a.split);
    echo(&c);

    let kind: ReprKind = c.get("repr")?;
    let weights = match c.optional::<PathBuf>("weights")? {
        Some(p) => Some(load_weights(&p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let spec = ReprSpec::new(kind, weights)?;
    let hyper = TargetHyper {
        batch_size: c.get("batch_size")?,
        max_epochs: c.get("epochs")?,
        patience: c.get("patience")?,
        lr: c.get("lr")?,
        conv_channels: c.get("conv_channels")?,
        max_frames: c.get("max_frames")?,
        bn_momentum: c.get("bn_momentum")?,
        seed: c.get("seed")?,
    };
    let out: PathBuf = c.get("out")?;
    let manifest = c.get::<PathBuf>("data")?.join("manifest.tsv");
    let entries = read_tag_manifest(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let dataset = tag_dataset(&entries, &manifest);
    let sizes = split_sizes(c.raw("split"), dataset.items.len())?;
    let assignment = stratified_split(&vec![0; dataset.items.len()], sizes, hyper.seed)?;
    let data = prepare_tag_data(&dataset, &assignment, &spec)?;
    let (net, report) = train_target(&data, &hyper, |e| {
        eprintln!("epoch {:>3}  train {:.4}  valid macro AUC {:.4}", e.epoch, e.train_loss, e.valid_macro_auc)
    })?;
    net.save(&out).with_context(|| format!("writing {}", out.display()))?;
    let auc = report.test.as_ref().unwrap_or(&report.valid);
    fs::write(sibling(&out, ".auc.csv"), auc.to_csv())?;
    fs::write(sibling(&out, ".report"), report.to_key_value())?;
    fs::write(sibling(&out, ".epochs.csv"), report.epochs_csv())?;
    print!("{}", report.to_key_value());
    Ok(())
}

fn visualize(a: VisualizeArgs) -> Result<()> {
    let mut c = base(VISUALIZE, a.config.as_deref())?;
    c.set("feature", path_str(a.feature));
    c.set("frames", a.frames);
    c.set("start", a.start);
    c.set("out", path_str(a.out));
    echo(&c);
    let feature: PathBuf = c.get("feature")?;
    let m = read_feat(&feature).with_context(|| format!("reading {}", feature.display()))?;
    let (start, frames): (usize, usize) = (c.get("start")?, c.get("frames")?);
    let image = pgm::render(&m, start, frames)?;
    let out: PathBuf = c.get("out")?;
    fs::write(&out, image).with_context(|| format!("writing {}", out.display()))?;
    println!("{} {}", m.rows(), frames);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::TrainSource(a) => train_source_cmd(a),
        Command::TrainTarget(a) => train_target_cmd(a),
        Command::Visualize(a) => visualize(a),
    }
}
