//! Blur-mask extraction: largest-object masks from semantic label maps
//! (weak supervision) and softmax-sampled object proposals (self-supervision),
//! plus probabilistic mask inversion.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Pixel adjacency used by connected-component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Integer class/instance labels, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "label map dimensions must be nonzero, got {}x{}",
                width, height
            )));
        }
        if data.len() != width * height {
            return Err(Error::Argument(format!(
                "label data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(LabelMap { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }
}

/// Object proposals with objectness scores; higher score = more object-like.
#[derive(Debug, Clone)]
pub struct ScoredProposalSet {
    proposals: Vec<BinaryMask>,
    scores: Vec<f64>,
}

impl ScoredProposalSet {
    pub fn new(proposals: Vec<BinaryMask>, scores: Vec<f64>) -> Result<Self> {
        if proposals.is_empty() {
            return Err(Error::Argument("proposal set must contain at least one proposal".into()));
        }
        if proposals.len() != scores.len() {
            return Err(Error::Argument(format!(
                "{} proposals but {} scores",
                proposals.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Argument("proposal scores must be finite".into()));
        }
        let first = &proposals[0];
        if proposals.iter().any(|p| !p.same_dims(first)) {
            return Err(Error::Argument("all proposals must share dimensions".into()));
        }
        Ok(ScoredProposalSet { proposals, scores })
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn proposals(&self) -> &[BinaryMask] {
        &self.proposals
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// One connected component of true pixels.
#[derive(Debug, Clone)]
pub struct Component {
    /// Discovery index in raster-scan order.
    pub id: u32,
    pub pixel_count: usize,
    pub mask: BinaryMask,
}

/// Labels the connected components of the true pixels. Output is ordered by
/// descending pixel count, ties broken by the smaller row-major index of the
/// component's first pixel. An all-false mask yields an empty list.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Component> {
    let w = mask.width();
    let h = mask.height();
    let mut visited = vec![false; w * h];
    let mut components: Vec<(u32, usize, usize, BinaryMask)> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let offsets = connectivity.offsets();
    let mut next_id = 0u32;

    for start in 0..w * h {
        if visited[start] || !mask.data()[start] {
            continue;
        }
        let mut comp = BinaryMask::filled(w, h, false).expect("mask dims validated");
        let mut count = 0usize;
        stack.push(start);
        visited[start] = true;
        while let Some(idx) = stack.pop() {
            comp.set(idx % w, idx / w, true);
            count += 1;
            let x = (idx % w) as isize;
            let y = (idx / w) as isize;
            for (dy, dx) in offsets {
                let nx = x + dx;
                let ny = y + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && mask.data()[nidx] {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        components.push((next_id, count, start, comp));
        next_id += 1;
    }

    components.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    components
        .into_iter()
        .map(|(id, pixel_count, _, mask)| Component { id, pixel_count, mask })
        .collect()
}

/// The largest 8-connected component of the most populous non-background
/// label. Returns an all-false mask when no non-background label exists.
/// Label-count ties go to the smaller label id.
pub fn largest_object_mask(labels: &LabelMap) -> BinaryMask {
    let w = labels.width();
    let h = labels.height();
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for &v in labels.data() {
        if v == 0 {
            continue;
        }
        match counts.iter_mut().find(|(label, _)| *label == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let Some(&(best_label, _)) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
    else {
        return BinaryMask::filled(w, h, false).expect("dims validated");
    };
    let binarized = BinaryMask::new(w, h, labels.data().iter().map(|v| *v == best_label).collect())
        .expect("dims validated");
    match connected_components(&binarized, Connectivity::Eight).into_iter().next() {
        Some(c) => c.mask,
        None => BinaryMask::filled(w, h, false).expect("dims validated"),
    }
}

/// Softmax over objectness scores in the numerically stable max-subtracted
/// form. The output sums to 1 within 1e-12.
pub fn proposal_distribution(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Argument("softmax of an empty score list".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Argument("softmax scores must be finite".into()));
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Draws one proposal index from the softmax distribution over scores.
/// Consumes exactly one uniform variate.
pub fn sample_proposal_index(scores: &[f64], rng: &mut impl Rng) -> Result<usize> {
    let probs = proposal_distribution(scores)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.len() - 1)
}

/// Samples a blur mask from the proposal set per the softmax distribution.
pub fn sample_proposal_mask(set: &ScoredProposalSet, rng: &mut impl Rng) -> BinaryMask {
    let i = sample_proposal_index(set.scores(), rng).expect("set invariants guarantee validity");
    set.proposals()[i].clone()
}

/// Inverts the mask with probability `p_inv`; exactly one uniform variate is
/// consumed. Returns the (possibly inverted) mask and whether inversion fired.
pub fn maybe_invert(
    mask: &BinaryMask,
    p_inv: f64,
    rng: &mut impl Rng,
) -> Result<(BinaryMask, bool)> {
    if !(0.0..=1.0).contains(&p_inv) {
        return Err(Error::Argument(format!("p_inv {} outside [0, 1]", p_inv)));
    }
    let u: f64 = rng.random();
    if u < p_inv {
        Ok((mask.complement(), true))
    } else {
        Ok((mask.clone(), false))
    }
}

/// Loads a proposal set from a directory holding `proposal_0000.png ...`
/// plus `scores.txt` with one decimal score per line (line i scores
/// proposal i). A count mismatch between files and scores is a load error.
pub fn load_proposal_set(dir: impl AsRef<Path>) -> Result<ScoredProposalSet> {
    let dir = dir.as_ref();
    let scores_path = dir.join("scores.txt");
    let text = std::fs::read_to_string(&scores_path)
        .map_err(|e| Error::io(format!("reading {}", scores_path.display()), e))?;
    let mut scores = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Format {
            path: scores_path.clone(),
            reason: format!("line {} is not a decimal score: {:?}", lineno + 1, line),
        })?;
        scores.push(v);
    }
    if scores.is_empty() {
        return Err(Error::Format { path: scores_path, reason: "no scores".into() });
    }

    let file_count = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok())
        .filter(|e| {
            let name = e.file_name();
            let name = name.to_string_lossy();
            name.starts_with("proposal_") && name.ends_with(".png")
        })
        .count();
    if file_count != scores.len() {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            reason: format!("{} proposal files but {} scores", file_count, scores.len()),
        });
    }

    let mut proposals = Vec::with_capacity(scores.len());
    for i in 0..scores.len() {
        let p = dir.join(format!("proposal_{:04}.png", i));
        proposals.push(crate::io::load_mask(&p, 0.5)?);
    }
    ScoredProposalSet::new(proposals, scores)
}
