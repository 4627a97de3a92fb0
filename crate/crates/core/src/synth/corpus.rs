use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{render, RhythmPattern, RhythmSpec, SynthError, Timbre, PATTERN_COUNT};
use crate::audio::{write_wav, PIPELINE_RATE};
use crate::manifest::{write_source_manifest, write_tag_manifest, SourceEntry, TagEntry};

/// Clip length of source-corpus items; long enough for a 70,125-sample crop.
pub const SOURCE_CLIP_SECS: f64 = 10.0;
/// Clip length of tag-corpus items; covers a full cycle at the slowest tempo.
pub const TAG_CLIP_SECS: f64 = 6.0;

/// Centre tempo of each class; every jittered value stays inside its class.
const CLASS_BPM: [f64; 4] = [92.0, 130.0, 168.0, 210.0];
const JITTER: f64 = 0.02;

pub const TAG_VOCABULARY: [&str; 14] = [
    "tempo_slow",
    "tempo_moderate",
    "tempo_fast",
    "tempo_very_fast",
    "timbre_click",
    "timbre_noise",
    "timbre_tone",
    "syncopated",
    "dense",
    "sparse",
    "straight",
    "irregular",
    "double_hits",
    "long_gap",
];

pub type SourceRow = SourceEntry;
pub type TagRow = TagEntry;

fn item_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * 1024);
    rng
}

/// Spec of item `index`: pattern, tempo class and timbre cycle round-robin,
/// so classes stay balanced for any prefix of the corpus.
fn item_spec(index: usize, seed: u64, stream: u64) -> (RhythmSpec, usize) {
    let pattern = index % PATTERN_COUNT;
    let class = (index / PATTERN_COUNT) % CLASS_BPM.len();
    let timbre = Timbre::ALL[(index / (PATTERN_COUNT * CLASS_BPM.len())) % Timbre::ALL.len()];
    let mut rng = item_rng(seed, stream, index);
    let bpm = CLASS_BPM[class] * (1.0 + rng.gen_range(-JITTER..=JITTER));
    let spec = RhythmSpec { pattern: RhythmPattern::standard(pattern), bpm, timbre, seed: rng.gen() };
    (spec, class)
}

pub fn source_item_spec(index: usize, seed: u64) -> RhythmSpec {
    item_spec(index, seed, 1).0
}

/// Spec and tempo class of tag-corpus item `index`.
pub fn tag_item_spec(index: usize, seed: u64) -> (RhythmSpec, usize) {
    item_spec(index, seed, 2)
}

/// Attribute tags of a pattern at a tempo class with a timbre.
pub fn tags_for(pattern: &RhythmPattern, tempo_class: usize, timbre: Timbre) -> Vec<String> {
    let mut tags = vec![TAG_VOCABULARY[tempo_class.min(3)].to_string()];
    tags.push(
        match timbre {
            Timbre::Click => "timbre_click",
            Timbre::NoiseBurst => "timbre_noise",
            Timbre::ToneBurst => "timbre_tone",
        }
        .to_string(),
    );
    let iois = pattern.iois();
    let mut distinct = iois.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let n = pattern.steps().len();
    let flags = [
        ("syncopated", pattern.is_syncopated()),
        ("dense", n >= 16),
        ("sparse", n <= 8),
        ("straight", distinct.len() == 1),
        ("irregular", distinct.len() >= 3),
        ("double_hits", iois.contains(&1)),
        ("long_gap", iois.iter().any(|&d| d >= 6)),
    ];
    tags.extend(flags.iter().filter(|f| f.1).map(|f| f.0.to_string()));
    tags
}

fn write_item(out_dir: &Path, rel: &str, spec: &RhythmSpec, secs: f64) -> Result<(), SynthError> {
    let clip = render(spec, secs, PIPELINE_RATE)?;
    write_wav(out_dir.join(rel), &clip)?;
    Ok(())
}

/// Writes `n_items` WAVs under `out_dir/audio` and `out_dir/manifest.tsv`
/// with genre = pattern name and the rendered tempo.
pub fn make_source_corpus(n_items: usize, seed: u64, out_dir: &Path) -> Result<Vec<SourceRow>, SynthError> {
    std::fs::create_dir_all(out_dir.join("audio"))?;
    let mut rows = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let spec = source_item_spec(i, seed);
        let rel = format!("audio/src_{i:05}.wav");
        write_item(out_dir, &rel, &spec, SOURCE_CLIP_SECS)?;
        rows.push(SourceEntry { path: rel, genre: spec.pattern.name(), bpm: spec.bpm });
    }
    write_source_manifest(out_dir.join("manifest.tsv"), &rows)?;
    Ok(rows)
}

/// Writes `n_items` WAVs under `out_dir/audio` and a tag manifest.
pub fn make_tag_corpus(n_items: usize, seed: u64, out_dir: &Path) -> Result<Vec<TagRow>, SynthError> {
    std::fs::create_dir_all(out_dir.join("audio"))?;
    let mut rows = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let (spec, class) = tag_item_spec(i, seed);
        let rel = format!("audio/tag_{i:05}.wav");
        write_item(out_dir, &rel, &spec, TAG_CLIP_SECS)?;
        rows.push(TagEntry { path: rel, tags: tags_for(&spec.pattern, class, spec.timbre) });
    }
    write_tag_manifest(out_dir.join("manifest.tsv"), &rows)?;
    Ok(rows)
}
