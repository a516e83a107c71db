//! Orchestration: mask extraction -> blur synthesis -> augmentation, run as
//! a deterministic parallel sample stream with on-disk or streamed output.
//!
//! Output is a pure function of the configuration. Workers partition by
//! sample index and a single writer emits results in index order, so the
//! generated tree is byte-identical for any worker count.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::augment_pair;
use crate::config::{GeneratorConfig, MaskMode, CONFIG_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::io::{encode_image, encode_mask, load_image, load_label_map, OutputFormat};
use crate::kernel::{realize_kernel, sample_blur_spec, BlurSpec};
use crate::maskops::{largest_object_mask, load_proposal_set, maybe_invert, sample_proposal_index};
use crate::raster::{BinaryMask, Image};
use crate::seed::{attempt_seed, sample_seed};
use crate::synthesis::synthesize_halo_free;

const MAX_ATTEMPTS: u32 = 8;

/// Marker file dropped in the output directory when generation aborts.
pub const PARTIAL_MARKER: &str = "PARTIAL_OUTPUT";

/// Where a sample's blur mask came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskProvenance {
    /// Index into the image's scored proposal set.
    Proposal(usize),
    /// Label id whose largest component was used.
    Label(u32),
}

impl MaskProvenance {
    fn encode(&self) -> String {
        match self {
            MaskProvenance::Proposal(i) => format!("proposal:{}", i),
            MaskProvenance::Label(id) => format!("label:{}", id),
        }
    }

    fn decode(s: &str) -> Option<MaskProvenance> {
        let (kind, value) = s.split_once(':')?;
        match kind {
            "proposal" => value.parse().ok().map(MaskProvenance::Proposal),
            "label" => value.parse().ok().map(MaskProvenance::Label),
            _ => None,
        }
    }
}

/// Everything needed to re-realize a sample bit-exactly.
#[derive(Debug, Clone)]
pub struct SampleMeta {
    pub id: String,
    pub source_image: String,
    pub spec: BlurSpec,
    pub mask_source: MaskProvenance,
    pub inverted: bool,
    pub sample_seed: u64,
    pub image_index: usize,
    pub sample_index: usize,
}

/// One generated training pair.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub image: Image,
    pub mask: BinaryMask,
    pub meta: SampleMeta,
}

/// One `manifest.jsonl` line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub schema_version: u32,
    pub id: String,
    pub image_path: String,
    pub mask_path: String,
    pub source_image: String,
    pub blur_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elastic_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elastic_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elastic_smoothness: Option<f64>,
    pub mask_source: String,
    pub inverted: bool,
    pub sample_seed: u64,
}

impl ManifestRecord {
    fn from_meta(meta: &SampleMeta, image_path: String, mask_path: String) -> ManifestRecord {
        let mut rec = ManifestRecord {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: meta.id.clone(),
            image_path,
            mask_path,
            source_image: meta.source_image.clone(),
            blur_kind: meta.spec.kind_name().to_string(),
            sigma: None,
            m: None,
            alpha: None,
            elastic_seed: None,
            elastic_amplitude: None,
            elastic_smoothness: None,
            mask_source: meta.mask_source.encode(),
            inverted: meta.inverted,
            sample_seed: meta.sample_seed,
        };
        match meta.spec {
            BlurSpec::Defocus { sigma } => rec.sigma = Some(sigma),
            BlurSpec::Motion { length, angle_deg, elastic } => {
                rec.m = Some(length);
                rec.alpha = Some(angle_deg);
                rec.elastic_seed = Some(elastic.seed);
                rec.elastic_amplitude = Some(elastic.amplitude);
                rec.elastic_smoothness = Some(elastic.smoothness);
            }
        }
        rec
    }

    /// Rebuilds the blur spec stored in this record.
    pub fn blur_spec(&self) -> Result<BlurSpec> {
        match self.blur_kind.as_str() {
            "defocus" => {
                let sigma = self
                    .sigma
                    .ok_or_else(|| Error::Format {
                        path: PathBuf::from("manifest"),
                        reason: format!("record {} lacks sigma", self.id),
                    })?;
                Ok(BlurSpec::Defocus { sigma })
            }
            "motion" => {
                let missing = |field: &str| Error::Format {
                    path: PathBuf::from("manifest"),
                    reason: format!("record {} lacks {}", self.id, field),
                };
                Ok(BlurSpec::Motion {
                    length: self.m.ok_or_else(|| missing("m"))?,
                    angle_deg: self.alpha.ok_or_else(|| missing("alpha"))?,
                    elastic: crate::kernel::ElasticSpec {
                        seed: self.elastic_seed.ok_or_else(|| missing("elastic_seed"))?,
                        amplitude: self
                            .elastic_amplitude
                            .ok_or_else(|| missing("elastic_amplitude"))?,
                        smoothness: self
                            .elastic_smoothness
                            .ok_or_else(|| missing("elastic_smoothness"))?,
                    },
                })
            }
            other => Err(Error::Format {
                path: PathBuf::from("manifest"),
                reason: format!("unknown blur kind {:?}", other),
            }),
        }
    }

    pub fn mask_provenance(&self) -> Option<MaskProvenance> {
        MaskProvenance::decode(&self.mask_source)
    }

    /// Indices are embedded in the id as `{image:05}_{sample:03}`.
    pub fn indices(&self) -> Option<(usize, usize)> {
        let (img, smp) = self.id.split_once('_')?;
        Some((img.parse().ok()?, smp.parse().ok()?))
    }
}

/// Result of a dataset generation run.
#[derive(Debug)]
pub struct Manifest {
    pub path: PathBuf,
    pub records: Vec<ManifestRecord>,
    /// Ids that exhausted their degenerate-retry budget, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Lists the source images of a directory in sorted filename order; this
/// order defines `image_index`.
pub fn list_source_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                Some("png") | Some("jpg") | Some("jpeg")
            )
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: {}", lineno + 1, e),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sample_id(image_index: usize, sample_index: usize) -> String {
    format!("{:05}_{:03}", image_index, sample_index)
}

// Extracts the blur mask for one attempt. Consumes at most one variate for
// the proposal draw plus one for the inversion.
fn extract_mask(
    cfg: &GeneratorConfig,
    source: &Path,
    width: usize,
    height: usize,
    rng: &mut impl Rng,
) -> Result<(BinaryMask, MaskProvenance, bool)> {
    let stem = file_stem(source);
    let (mask, provenance) = match cfg.mask_mode {
        MaskMode::Proposals => {
            let dir = cfg
                .proposal_dir
                .as_ref()
                .ok_or_else(|| Error::Config("proposal_dir not set".into()))?
                .join(&stem);
            let set = load_proposal_set(&dir)?;
            let index = sample_proposal_index(set.scores(), rng)?;
            (set.proposals()[index].clone(), MaskProvenance::Proposal(index))
        }
        MaskMode::Labels => {
            let path = cfg
                .label_dir
                .as_ref()
                .ok_or_else(|| Error::Config("label_dir not set".into()))?
                .join(format!("{}.png", stem));
            let labels = load_label_map(&path)?;
            let mask = largest_object_mask(&labels);
            // Provenance: the label that won the pixel count; 0 when empty.
            let label_id = labels
                .data()
                .iter()
                .zip(mask.data())
                .find(|(_, m)| **m)
                .map(|(l, _)| *l)
                .unwrap_or(0);
            (mask, MaskProvenance::Label(label_id))
        }
    };
    if mask.width() != width || mask.height() != height {
        return Err(Error::Format {
            path: source.to_path_buf(),
            reason: format!(
                "mask {}x{} does not match image {}x{}",
                mask.width(),
                mask.height(),
                width,
                height
            ),
        });
    }
    let (mask, inverted) = maybe_invert(&mask, cfg.p_inv, rng)?;
    Ok((mask, provenance, inverted))
}

/// Generates one sample as a pure function of
/// (config, image_index, sample_index). Degenerate masks or kernels trigger
/// up to eight internal retries with a perturbed sub-seed before the sample
/// is reported as skipped.
pub fn generate_sample(
    cfg: &GeneratorConfig,
    image_index: usize,
    sample_index: usize,
) -> Result<SamplePair> {
    let sources = list_source_images(&cfg.source_dir)?;
    generate_sample_from(cfg, &sources, image_index, sample_index)
}

/// Same as [`generate_sample`] with a pre-listed source set.
pub fn generate_sample_from(
    cfg: &GeneratorConfig,
    sources: &[PathBuf],
    image_index: usize,
    sample_index: usize,
) -> Result<SamplePair> {
    cfg.validate()?;
    let source = sources.get(image_index).ok_or_else(|| {
        Error::Argument(format!("image index {} out of range ({})", image_index, sources.len()))
    })?;
    let img = load_image(source)?;
    let seed = sample_seed(cfg.master_seed, image_index as u64, sample_index as u64);
    let id = sample_id(image_index, sample_index);

    let mut last_failure = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(seed, attempt));
        let (mask, provenance, inverted) =
            extract_mask(cfg, source, img.width(), img.height(), &mut rng)?;
        if mask.is_uniform() {
            last_failure = "uniform mask".into();
            continue;
        }
        let spec = sample_blur_spec(&cfg.blur, &mut rng)?;
        let kernel = match realize_kernel(&spec) {
            Ok(k) => k,
            Err(Error::DegenerateKernel) => {
                last_failure = "degenerate kernel".into();
                continue;
            }
            Err(e) => return Err(e),
        };
        let synthesized = match synthesize_halo_free(&img, &mask, &kernel, cfg.inpaint_radius) {
            Ok(s) => s,
            Err(Error::DegenerateMask) | Err(Error::Uninpaintable) => {
                last_failure = "degenerate mask".into();
                continue;
            }
            Err(e) => return Err(e),
        };
        let (image, mask) =
            augment_pair(&synthesized, &mask, &cfg.augment, cfg.output_size as usize, &mut rng)?;
        return Ok(SamplePair {
            image,
            mask,
            meta: SampleMeta {
                id,
                source_image: file_stem(source),
                spec,
                mask_source: provenance,
                inverted,
                sample_seed: seed,
                image_index,
                sample_index,
            },
        });
    }
    Err(Error::SkipSample {
        id: format!("{} ({})", id, last_failure),
        attempts: MAX_ATTEMPTS,
    })
}

struct EncodedSample {
    record: ManifestRecord,
    image_png: Vec<u8>,
    mask_png: Vec<u8>,
}

enum WorkItem {
    Sample(Box<EncodedSample>),
    Skipped(String, String),
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let n = if workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        workers
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {}", e)))
}

fn encode_sample(pair: &SamplePair) -> Result<EncodedSample> {
    let image_png = encode_image(&pair.image, OutputFormat::Png)?;
    let mask_png = encode_mask(&pair.mask)?;
    let record = ManifestRecord::from_meta(
        &pair.meta,
        format!("images/{}.png", pair.meta.id),
        format!("masks/{}.png", pair.meta.id),
    );
    Ok(EncodedSample { record, image_png, mask_png })
}

fn generate_items(
    cfg: &GeneratorConfig,
    sources: &[PathBuf],
    indices: &[(usize, usize)],
) -> Result<Vec<WorkItem>> {
    indices
        .par_iter()
        .map(|&(image_index, sample_index)| {
            match generate_sample_from(cfg, sources, image_index, sample_index) {
                Ok(pair) => Ok(WorkItem::Sample(Box::new(encode_sample(&pair)?))),
                Err(Error::SkipSample { id, attempts }) => {
                    Ok(WorkItem::Skipped(id, format!("{} attempts", attempts)))
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Generates the full dataset to `cfg.output_dir`: `images/{id}.png`,
/// `masks/{id}.png`, and `manifest.jsonl`, in sample-index order. A hard
/// I/O error aborts after dropping a [`PARTIAL_MARKER`] file.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Manifest> {
    cfg.validate()?;
    let sources = list_source_images(&cfg.source_dir)?;
    if sources.is_empty() {
        return Err(Error::Config(format!("no source images in {}", cfg.source_dir.display())));
    }
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir.join("images"))
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    std::fs::create_dir_all(out_dir.join("masks"))
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    let result = (|| -> Result<Manifest> {
        let manifest_path = out_dir.join("manifest.jsonl");
        let file = std::fs::File::create(&manifest_path)
            .map_err(|e| Error::io(format!("creating {}", manifest_path.display()), e))?;
        let mut manifest_out = std::io::BufWriter::new(file);
        let mut records = Vec::new();
        let mut skipped = Vec::new();

        let indices: Vec<(usize, usize)> = (0..sources.len())
            .flat_map(|i| (0..cfg.samples_per_image as usize).map(move |s| (i, s)))
            .collect();
        let pool = build_pool(cfg.workers)?;
        // Chunking bounds memory; order within and across chunks is by index.
        let chunk = (pool.current_num_threads() * 4).max(16);
        for batch in indices.chunks(chunk) {
            let items = pool.install(|| generate_items(cfg, &sources, batch))?;
            for item in items {
                match item {
                    WorkItem::Sample(enc) => {
                        let img_path = out_dir.join(&enc.record.image_path);
                        let mask_path = out_dir.join(&enc.record.mask_path);
                        std::fs::write(&img_path, &enc.image_png)
                            .map_err(|e| Error::io(format!("writing {}", img_path.display()), e))?;
                        std::fs::write(&mask_path, &enc.mask_png)
                            .map_err(|e| Error::io(format!("writing {}", mask_path.display()), e))?;
                        let line = serde_json::to_string(&enc.record)
                            .expect("manifest record serializes");
                        writeln!(manifest_out, "{}", line)
                            .map_err(|e| Error::io("writing manifest", e))?;
                        records.push(enc.record);
                    }
                    WorkItem::Skipped(id, why) => skipped.push((id, why)),
                }
            }
        }
        manifest_out.flush().map_err(|e| Error::io("flushing manifest", e))?;
        Ok(Manifest { path: manifest_path, records, skipped })
    })();

    if let Err(e) = &result {
        let _ = std::fs::write(out_dir.join(PARTIAL_MARKER), format!("{}\n", e));
    }
    result
}

/// Emits length-prefixed records to a byte sink: a 4-byte little-endian
/// payload length, then the PNG-encoded image, the PNG-encoded mask, and
/// the manifest record JSON text. Records run in sample-index order
/// (every image at sample index 0, then every image at 1, ...); with
/// `count = None` the sample index grows without bound, so a training
/// consumer receives fresh pairs for as long as it keeps the sink open.
/// A closed sink (broken pipe) stops cleanly.
pub fn stream_samples(
    cfg: &GeneratorConfig,
    sink: &mut dyn Write,
    count: Option<u64>,
) -> Result<()> {
    cfg.validate()?;
    let sources = list_source_images(&cfg.source_dir)?;
    if sources.is_empty() {
        return Err(Error::Config(format!("no source images in {}", cfg.source_dir.display())));
    }
    let pool = build_pool(cfg.workers)?;
    let chunk = (pool.current_num_threads() * 4).max(16);
    let mut emitted = 0u64;
    let mut consecutive_skips = 0usize;
    let mut index_stream = (0usize..)
        .flat_map(|s| (0..sources.len()).map(move |i| (i, s)))
        .peekable();
    loop {
        if let Some(limit) = count {
            if emitted >= limit {
                return Ok(());
            }
        }
        let batch_size = match count {
            Some(limit) => ((limit - emitted) as usize).min(chunk),
            None => chunk,
        };
        let batch: Vec<(usize, usize)> = index_stream.by_ref().take(batch_size).collect();
        let items = pool.install(|| generate_items(cfg, &sources, &batch))?;
        for item in items {
            let enc = match item {
                WorkItem::Sample(enc) => enc,
                WorkItem::Skipped(id, _) => {
                    // Every index skipping means the config cannot produce
                    // samples at all; bail instead of spinning forever.
                    consecutive_skips += 1;
                    if consecutive_skips > sources.len().max(64) * 4 {
                        return Err(Error::SkipSample { id, attempts: MAX_ATTEMPTS });
                    }
                    continue;
                }
            };
            consecutive_skips = 0;
            let json = serde_json::to_string(&enc.record).expect("record serializes");
            let payload_len = enc.image_png.len() + enc.mask_png.len() + json.len();
            let mut write_all = || -> std::io::Result<()> {
                sink.write_all(&(payload_len as u32).to_le_bytes())?;
                sink.write_all(&enc.image_png)?;
                sink.write_all(&enc.mask_png)?;
                sink.write_all(json.as_bytes())
            };
            match write_all() {
                Ok(()) => emitted += 1,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
                Err(e) => return Err(Error::io("writing stream record", e)),
            }
        }
    }
}

/// Re-realizes the sample a manifest record describes (the record's id
/// carries the indices; the config provides everything else).
pub fn rerealize(cfg: &GeneratorConfig, record: &ManifestRecord) -> Result<SamplePair> {
    let (image_index, sample_index) = record.indices().ok_or_else(|| Error::Format {
        path: PathBuf::from("manifest"),
        reason: format!("id {:?} does not encode indices", record.id),
    })?;
    generate_sample(cfg, image_index, sample_index)
}
