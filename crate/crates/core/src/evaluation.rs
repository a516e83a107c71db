//! Scoring of predicted blur maps against binary ground truth: rank-based
//! ROC AUC and non-interpolated average precision, computed per image and
//! averaged, with the flattened all-pixels protocol available alongside.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{load_gray, load_mask};
use crate::raster::{BinaryMask, Image};

/// Blur type attached to an evaluated image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlurType {
    Defocus,
    Motion,
    Unknown,
}

impl BlurType {
    pub fn name(&self) -> &'static str {
        match self {
            BlurType::Defocus => "defocus",
            BlurType::Motion => "motion",
            BlurType::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<BlurType> {
        match s.trim().to_ascii_lowercase().as_str() {
            "defocus" => Some(BlurType::Defocus),
            "motion" => Some(BlurType::Motion),
            "unknown" => Some(BlurType::Unknown),
            _ => None,
        }
    }
}

/// Per-image scores.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub id: String,
    pub blur_type: BlurType,
    pub auc: f64,
    pub ap: f64,
}

/// Mean scores over a group of images.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanScores {
    pub auc: f64,
    pub ap: f64,
    pub count: usize,
}

/// Dataset-level summary under the per-image protocol, with the optional
/// flattened (all pixels concatenated) AP.
#[derive(Debug, Clone, Default)]
pub struct EvalSummary {
    pub defocus: MeanScores,
    pub motion: MeanScores,
    pub unknown: MeanScores,
    pub overall: MeanScores,
    pub flattened_ap: Option<f64>,
    /// Ids skipped because their ground truth is single-class.
    pub skipped: Vec<String>,
    /// Ground-truth ids with no prediction file.
    pub omissions: Vec<String>,
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "scores ({}) and labels ({}) must be equal-length and nonempty",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Argument("scores must be finite".into()));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric);
    }
    Ok((pos, neg))
}

/// Rank-based ROC AUC with ties counted 0.5 (midranks), equivalent to
/// trapezoidal integration of the ROC curve over score thresholds.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Midrank of the tie group [i, j], 1-based ranks.
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let pos_f = pos as f64;
    let u = rank_sum_pos - pos_f * (pos_f + 1.0) / 2.0;
    Ok(u / (pos_f * neg as f64))
}

/// Non-interpolated average precision: AP = sum over descending unique
/// thresholds of (R_n - R_{n-1}) * P_n, ties processed as one group.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    let pos_f = pos as f64;
    let mut tp = 0.0f64;
    let mut fp = 0.0f64;
    let mut prev_recall = 0.0f64;
    let mut ap = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        let recall = tp / pos_f;
        let precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

/// ROC curve points (FPR, TPR) at descending thresholds, endpoints included.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0.0f64;
    let mut fp = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        points.push((fp / neg as f64, tp / pos as f64));
        i = j + 1;
    }
    Ok(points)
}

/// Precision-recall curve points (recall, precision) at descending
/// thresholds.
pub fn pr_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, _) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    let mut points = Vec::new();
    let mut tp = 0.0f64;
    let mut fp = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        points.push((tp / pos as f64, tp / (tp + fp)));
        i = j + 1;
    }
    Ok(points)
}

/// Scores one prediction map against its ground truth. A prediction whose
/// size differs from the ground truth is upscaled bilinearly first;
/// prediction values are used as-is, with no rescaling.
pub fn evaluate_image(pred: &Image, gt: &BinaryMask) -> Result<(f64, f64)> {
    if pred.channels() != 1 {
        return Err(Error::Argument("prediction must be single-channel".into()));
    }
    let resized;
    let pred = if pred.width() != gt.width() || pred.height() != gt.height() {
        resized = crate::augment::resize_bilinear(pred, gt.width(), gt.height());
        &resized
    } else {
        pred
    };
    let auc = roc_auc(pred.data(), gt.data())?;
    let ap = average_precision(pred.data(), gt.data())?;
    Ok((auc, ap))
}

/// Test-time augmentation: average of the prediction on the input and the
/// un-flipped prediction on the horizontally flipped input.
pub fn tta_average<F>(pred_fn: F, img: &Image) -> Result<Image>
where
    F: Fn(&Image) -> Result<Image>,
{
    let direct = pred_fn(img)?;
    let flipped = pred_fn(&img.hflip())?.hflip();
    if direct.width() != flipped.width()
        || direct.height() != flipped.height()
        || direct.channels() != flipped.channels()
    {
        return Err(Error::Argument("prediction function changed dimensions".into()));
    }
    let data: Vec<f64> = direct
        .data()
        .iter()
        .zip(flipped.data())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    Image::new(direct.width(), direct.height(), direct.channels(), data)
}

/// Loads an id -> blur type table from either a manifest (`.jsonl`, using
/// the `blur_kind` field) or a two-column CSV `id,defocus|motion`.
pub fn load_type_map(path: impl AsRef<Path>) -> Result<HashMap<String, BlurType>> {
    let path = path.as_ref();
    let mut map = HashMap::new();
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        for rec in crate::pipeline::read_manifest(path)? {
            let t = BlurType::parse(&rec.blur_kind).unwrap_or(BlurType::Unknown);
            map.insert(rec.id, t);
        }
        return Ok(map);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, ty) = line.split_once(',').ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: expected `id,type`", lineno + 1),
        })?;
        let ty = BlurType::parse(ty).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: unknown blur type {:?}", lineno + 1, ty),
        })?;
        map.insert(id.trim().to_string(), ty);
    }
    Ok(map)
}

/// Concatenates all matched prediction/ground-truth pixels into one pair of
/// vectors (the flattened protocol's input), predictions upscaled to each
/// ground truth's size first.
pub fn flattened_vectors(
    pred_dir: impl AsRef<Path>,
    gt_dir: impl AsRef<Path>,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let pred_dir = pred_dir.as_ref();
    let gt_dir = gt_dir.as_ref();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for id in png_stems(gt_dir)? {
        let pred_path = pred_dir.join(format!("{}.png", id));
        if !pred_path.exists() {
            continue;
        }
        let gt = load_mask(gt_dir.join(format!("{}.png", id)), 0.5)?;
        let pred = load_gray(&pred_path)?;
        let resized;
        let pred_ref = if pred.width() != gt.width() || pred.height() != gt.height() {
            resized = crate::augment::resize_bilinear(&pred, gt.width(), gt.height());
            &resized
        } else {
            &pred
        };
        scores.extend_from_slice(pred_ref.data());
        labels.extend_from_slice(gt.data());
    }
    if scores.is_empty() {
        return Err(Error::Argument("no matched prediction/ground-truth pairs".into()));
    }
    Ok((scores, labels))
}

fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("png"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    out.sort();
    Ok(out)
}

/// Scores every ground-truth mask in `gt_dir` against the same-stem PNG in
/// `pred_dir`. Missing predictions are reported as omissions; single-class
/// ground truths are skipped and counted. When `flattened` is set, the
/// footnote protocol (one vector of all pixels) is computed as well.
pub fn evaluate_dataset(
    pred_dir: impl AsRef<Path>,
    gt_dir: impl AsRef<Path>,
    type_map: Option<&HashMap<String, BlurType>>,
    flattened: bool,
) -> Result<(Vec<EvalRecord>, EvalSummary)> {
    let pred_dir = pred_dir.as_ref();
    let gt_dir = gt_dir.as_ref();
    let ids = png_stems(gt_dir)?;
    if ids.is_empty() {
        return Err(Error::Argument(format!("no ground-truth masks in {}", gt_dir.display())));
    }

    enum Outcome {
        Scored(EvalRecord, Option<(Vec<f64>, Vec<bool>)>),
        Skipped(String),
        Missing(String),
    }

    let outcomes: Vec<Outcome> = ids
        .par_iter()
        .map(|id| -> Result<Outcome> {
            let pred_path = pred_dir.join(format!("{}.png", id));
            if !pred_path.exists() {
                return Ok(Outcome::Missing(id.clone()));
            }
            let gt = load_mask(gt_dir.join(format!("{}.png", id)), 0.5)?;
            let pred = load_gray(&pred_path)?;
            let blur_type =
                type_map.and_then(|m| m.get(id)).copied().unwrap_or(BlurType::Unknown);
            let resized;
            let pred_ref = if pred.width() != gt.width() || pred.height() != gt.height() {
                resized = crate::augment::resize_bilinear(&pred, gt.width(), gt.height());
                &resized
            } else {
                &pred
            };
            match (roc_auc(pred_ref.data(), gt.data()), average_precision(pred_ref.data(), gt.data()))
            {
                (Ok(auc), Ok(ap)) => {
                    let flat = flattened
                        .then(|| (pred_ref.data().to_vec(), gt.data().to_vec()));
                    Ok(Outcome::Scored(EvalRecord { id: id.clone(), blur_type, auc, ap }, flat))
                }
                (Err(Error::UndefinedMetric), _) | (_, Err(Error::UndefinedMetric)) => {
                    Ok(Outcome::Skipped(id.clone()))
                }
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut summary = EvalSummary::default();
    let mut flat_scores = Vec::new();
    let mut flat_labels = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Scored(rec, flat) => {
                if let Some((s, l)) = flat {
                    flat_scores.extend(s);
                    flat_labels.extend(l);
                }
                records.push(rec);
            }
            Outcome::Skipped(id) => summary.skipped.push(id),
            Outcome::Missing(id) => summary.omissions.push(id),
        }
    }
    if records.is_empty() && summary.skipped.is_empty() {
        return Err(Error::Argument("no ground-truth id has a matching prediction".into()));
    }

    let accumulate = |group: &mut MeanScores, rec: &EvalRecord| {
        group.auc += rec.auc;
        group.ap += rec.ap;
        group.count += 1;
    };
    for rec in &records {
        match rec.blur_type {
            BlurType::Defocus => accumulate(&mut summary.defocus, rec),
            BlurType::Motion => accumulate(&mut summary.motion, rec),
            BlurType::Unknown => accumulate(&mut summary.unknown, rec),
        }
        accumulate(&mut summary.overall, rec);
    }
    for group in [
        &mut summary.defocus,
        &mut summary.motion,
        &mut summary.unknown,
        &mut summary.overall,
    ] {
        if group.count > 0 {
            group.auc /= group.count as f64;
            group.ap /= group.count as f64;
        }
    }
    if flattened && !flat_scores.is_empty() {
        summary.flattened_ap = Some(average_precision(&flat_scores, &flat_labels)?);
    }
    Ok((records, summary))
}
