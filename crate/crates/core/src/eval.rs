//! Verification, identification and TPR@FAR metrics over cosine similarity of
//! normalized embeddings, and the reward used by the search.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datasets::{LabeledDataset, PairSet};
use crate::error::{Error, Result};
use crate::model::{forward, ClassifierHead, EmbeddingModel};
use crate::numerics::{dot, fmt_g17, DenseMatrix};

/// L2-normalized embeddings for every sample in `dataset`.
pub fn embed_all(
    model: &EmbeddingModel,
    _head: &ClassifierHead,
    dataset: &LabeledDataset,
) -> Result<DenseMatrix> {
    model.embed(&dataset.features)
}

pub fn pair_similarities(embeddings: &DenseMatrix, pairs: &PairSet) -> Result<Vec<f64>> {
    pairs
        .pairs
        .iter()
        .map(|&(i, j, _)| {
            if i >= embeddings.rows() || j >= embeddings.rows() {
                return Err(Error::contract(format!(
                    "pair ({i}, {j}) out of range for {} embeddings",
                    embeddings.rows()
                )));
            }
            Ok(dot(embeddings.row(i), embeddings.row(j)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub accuracy: f64,
    pub fold_thresholds: Vec<f64>,
    pub fold_accuracies: Vec<f64>,
    /// `(FAR, TPR)` from `(0, 0)` to `(1, 1)`.
    pub roc_points: Vec<(f64, f64)>,
}

/// Threshold maximizing accuracy of `sim > t ⇒ same` over the given pairs.
///
/// Candidates are midpoints between adjacent distinct similarities plus one
/// sentinel below and one above the range. Ties keep the lowest threshold.
fn best_threshold(scored: &mut [(f64, bool)]) -> f64 {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = scored.iter().filter(|s| s.1).count();
    // Threshold below everything: all predicted same.
    let lo = scored.first().map_or(0.0, |s| s.0);
    let mut best_t = lo - 1.0;
    let mut correct = positives;
    let mut best = correct;
    let mut i = 0;
    while i < scored.len() {
        let v = scored[i].0;
        while i < scored.len() && scored[i].0 == v {
            // moves from "same" to "different"
            if scored[i].1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        let t = if i < scored.len() {
            v + (scored[i].0 - v) / 2.0
        } else {
            v + 1.0
        };
        if correct > best {
            best = correct;
            best_t = t;
        }
    }
    best_t
}

fn accuracy_at(scored: &[(f64, bool)], threshold: f64) -> f64 {
    let hits = scored
        .iter()
        .filter(|(s, same)| (*s > threshold) == *same)
        .count();
    hits as f64 / scored.len() as f64
}

/// ROC points over all pairs, sweeping the threshold from high to low.
pub fn roc_points(similarities: &[f64], same: &[bool]) -> Vec<(f64, f64)> {
    let mut scored: Vec<(f64, bool)> = similarities.iter().copied().zip(same.iter().copied()).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let pos = same.iter().filter(|s| **s).count().max(1) as f64;
    let neg = same.iter().filter(|s| !**s).count().max(1) as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < scored.len() {
        let v = scored[i].0;
        while i < scored.len() && scored[i].0 == v {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg, tp as f64 / pos));
    }
    points
}

/// K-fold verification accuracy. Pair `j` goes to fold `j % folds`; each
/// fold is scored with the threshold that is best on the other folds.
pub fn verification_accuracy(
    embeddings: &DenseMatrix,
    pairs: &PairSet,
    folds: usize,
) -> Result<VerificationReport> {
    let sims = pair_similarities(embeddings, pairs)?;
    let same: Vec<bool> = pairs.pairs.iter().map(|p| p.2).collect();
    verification_from_similarities(&sims, &same, folds)
}

pub fn verification_from_similarities(
    similarities: &[f64],
    same: &[bool],
    folds: usize,
) -> Result<VerificationReport> {
    if folds < 2 {
        return Err(Error::contract(format!("need at least 2 folds, got {folds}")));
    }
    if similarities.len() != same.len() {
        return Err(Error::contract("similarity and flag counts differ"));
    }
    if similarities.len() < folds {
        return Err(Error::contract(format!(
            "{} pairs cannot fill {folds} folds",
            similarities.len()
        )));
    }
    if !same.iter().any(|s| *s) || !same.iter().any(|s| !*s) {
        return Err(Error::contract(
            "pair set needs at least one same and one different pair",
        ));
    }
    let mut fold_thresholds = Vec::with_capacity(folds);
    let mut fold_accuracies = Vec::with_capacity(folds);
    for f in 0..folds {
        let mut fit: Vec<(f64, bool)> = Vec::new();
        let mut held: Vec<(f64, bool)> = Vec::new();
        for (j, (&s, &y)) in similarities.iter().zip(same).enumerate() {
            if j % folds == f {
                held.push((s, y));
            } else {
                fit.push((s, y));
            }
        }
        let t = best_threshold(&mut fit);
        fold_thresholds.push(t);
        fold_accuracies.push(accuracy_at(&held, t));
    }
    let accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(VerificationReport {
        accuracy,
        fold_thresholds,
        fold_accuracies,
        roc_points: roc_points(similarities, same),
    })
}

/// Gallery and probe sample indices into an embedding matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GalleryProbeSplit {
    pub gallery: Vec<(usize, usize)>,
    pub probes: Vec<(usize, usize)>,
}

impl GalleryProbeSplit {
    /// First sample of each identity goes to the gallery, the rest are probes.
    pub fn first_per_identity(dataset: &LabeledDataset) -> Result<Self> {
        let mut gallery = Vec::new();
        let mut probes = Vec::new();
        for (c, group) in dataset.indices_by_class().into_iter().enumerate() {
            let (first, rest) = group.split_first().expect("every class has a sample");
            gallery.push((*first, c));
            probes.extend(rest.iter().map(|&i| (i, c)));
        }
        if probes.is_empty() {
            return Err(Error::contract("no identity has a second sample to probe with"));
        }
        Ok(GalleryProbeSplit { gallery, probes })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub rank1: f64,
    /// `(rank, fraction of probes matched within that rank)` for every rank.
    pub cmc: Vec<(usize, f64)>,
}

/// Ranks the gallery by cosine similarity for each probe (ties by gallery
/// order) and records the first rank holding the probe's label.
pub fn rank1_identification(
    gallery: &DenseMatrix,
    gallery_labels: &[usize],
    probes: &DenseMatrix,
    probe_labels: &[usize],
) -> Result<IdentificationReport> {
    if gallery.rows() != gallery_labels.len() || probes.rows() != probe_labels.len() {
        return Err(Error::contract("embedding and label counts differ"));
    }
    if gallery.rows() == 0 || probes.rows() == 0 {
        return Err(Error::contract("empty gallery or probe set"));
    }
    if let Some(l) = probe_labels.iter().find(|l| !gallery_labels.contains(l)) {
        return Err(Error::contract(format!("probe label {l} missing from gallery")));
    }
    let sims = probes.matmul_transpose(gallery)?;
    let g = gallery.rows();
    let mut hits_at = vec![0usize; g];
    let mut order: Vec<usize> = (0..g).collect();
    for (p, &label) in probe_labels.iter().enumerate() {
        let row = sims.row(p);
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        let rank = order
            .iter()
            .position(|&gi| gallery_labels[gi] == label)
            .expect("label present in gallery");
        hits_at[rank] += 1;
    }
    let n = probes.rows() as f64;
    let mut cum = 0;
    let cmc: Vec<(usize, f64)> = hits_at
        .iter()
        .enumerate()
        .map(|(r, h)| {
            cum += h;
            (r + 1, cum as f64 / n)
        })
        .collect();
    Ok(IdentificationReport {
        rank1: cmc[0].1,
        cmc,
    })
}

pub fn identification_on(embeddings: &DenseMatrix, split: &GalleryProbeSplit) -> Result<IdentificationReport> {
    let gi: Vec<usize> = split.gallery.iter().map(|g| g.0).collect();
    let gl: Vec<usize> = split.gallery.iter().map(|g| g.1).collect();
    let pi: Vec<usize> = split.probes.iter().map(|p| p.0).collect();
    let pl: Vec<usize> = split.probes.iter().map(|p| p.1).collect();
    rank1_identification(&embeddings.select_rows(&gi), &gl, &embeddings.select_rows(&pi), &pl)
}

/// Smallest threshold `t` with at most `⌊far·N_neg⌋` negatives scoring `> t`,
/// and the fraction of positives scoring `> t`.
pub fn tpr_at_far(similarities: &[f64], same: &[bool], far: f64) -> Result<f64> {
    Ok(tpr_and_threshold_at_far(similarities, same, far)?.0)
}

pub fn tpr_and_threshold_at_far(similarities: &[f64], same: &[bool], far: f64) -> Result<(f64, f64)> {
    if similarities.len() != same.len() {
        return Err(Error::contract("similarity and flag counts differ"));
    }
    if !(far > 0.0 && far <= 1.0) {
        return Err(Error::contract(format!("far must be in (0, 1], got {far}")));
    }
    let mut negatives: Vec<f64> = similarities
        .iter()
        .zip(same)
        .filter(|(_, s)| !**s)
        .map(|(v, _)| *v)
        .collect();
    let required = (1.0 / far - 1e-9).ceil() as usize;
    if negatives.len() < required {
        return Err(Error::FarUnresolvable {
            far,
            required,
            available: negatives.len(),
        });
    }
    let positives: Vec<f64> = similarities
        .iter()
        .zip(same)
        .filter(|(_, s)| **s)
        .map(|(v, _)| *v)
        .collect();
    if positives.is_empty() {
        return Err(Error::contract("TPR needs at least one positive pair"));
    }
    negatives.sort_by(|a, b| b.total_cmp(a));
    let allowed = (far * negatives.len() as f64 + 1e-9).floor() as usize;
    let threshold = if allowed >= negatives.len() {
        f64::NEG_INFINITY
    } else {
        negatives[allowed]
    };
    let tp = positives.iter().filter(|v| **v > threshold).count();
    Ok((tp as f64 / positives.len() as f64, threshold))
}

/// Fraction of samples whose highest cosine logit is their own class.
pub fn closed_set_accuracy(
    model: &EmbeddingModel,
    head: &ClassifierHead,
    dataset: &LabeledDataset,
) -> Result<f64> {
    if dataset.classes > head.classes() {
        return Err(Error::contract("dataset labels exceed the head's classes"));
    }
    let (cos, _) = forward(model, head, &dataset.features)?;
    let hits = (0..cos.rows())
        .filter(|&i| {
            let row = cos.row(i);
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .expect("non-empty row");
            best == dataset.labels[i]
        })
        .count();
    Ok(hits as f64 / cos.rows() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// K-fold verification accuracy on validation pairs.
    #[default]
    Verification,
    /// Closed-set classification accuracy on held-out samples of training identities.
    ClosedSet,
}

/// Validation data the reward is computed on.
#[derive(Clone, Debug)]
pub struct Validation {
    pub set: LabeledDataset,
    pub pairs: PairSet,
    pub folds: usize,
    pub kind: RewardKind,
}

impl Validation {
    pub fn new(set: LabeledDataset, pairs: PairSet, folds: usize, kind: RewardKind) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::contract("empty validation set"));
        }
        pairs.check_against(&set)?;
        Ok(Validation {
            set,
            pairs,
            folds,
            kind,
        })
    }

    pub fn score(&self, model: &EmbeddingModel, head: &ClassifierHead) -> Result<f64> {
        match self.kind {
            RewardKind::Verification => reward(model, head, &self.set, &self.pairs, self.folds),
            RewardKind::ClosedSet => closed_set_accuracy(model, head, &self.set),
        }
    }
}

/// Verification accuracy of `model` on the validation pairs.
pub fn reward(
    model: &EmbeddingModel,
    head: &ClassifierHead,
    val_set: &LabeledDataset,
    val_pairs: &PairSet,
    folds: usize,
) -> Result<f64> {
    let emb = embed_all(model, head, val_set)?;
    Ok(verification_accuracy(&emb, val_pairs, folds)?.accuracy)
}

/// Verification, identification and TPR@FAR on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub verification_accuracy: f64,
    pub verification: VerificationReport,
    pub rank1: f64,
    pub cmc: Vec<(usize, f64)>,
    /// `(FAR, TPR)` for every standard FAR the negative count resolves.
    pub tpr_at_far: Vec<(f64, f64)>,
}

pub const STANDARD_FARS: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

pub fn evaluate(
    model: &EmbeddingModel,
    head: &ClassifierHead,
    dataset: &LabeledDataset,
    pairs: &PairSet,
    folds: usize,
) -> Result<EvaluationReport> {
    pairs.check_against(dataset)?;
    let emb = embed_all(model, head, dataset)?;
    let sims = pair_similarities(&emb, pairs)?;
    let same: Vec<bool> = pairs.pairs.iter().map(|p| p.2).collect();
    let verification = verification_from_similarities(&sims, &same, folds)?;
    let ident = identification_on(&emb, &GalleryProbeSplit::first_per_identity(dataset)?)?;
    let mut tpr = Vec::new();
    for far in STANDARD_FARS {
        match tpr_at_far(&sims, &same, far) {
            Ok(t) => tpr.push((far, t)),
            Err(Error::FarUnresolvable { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(EvaluationReport {
        verification_accuracy: verification.accuracy,
        verification,
        rank1: ident.rank1,
        cmc: ident.cmc,
        tpr_at_far: tpr,
    })
}

/// Plot-ready CSV: header `x,y`, one point per line.
pub fn points_csv<X: Copy + Into<f64>>(points: &[(X, f64)]) -> String {
    let mut out = String::from("x,y\n");
    for &(x, y) in points {
        let _ = writeln!(out, "{},{}", fmt_g17(x.into()), fmt_g17(y));
    }
    out
}

pub fn cmc_csv(cmc: &[(usize, f64)]) -> String {
    let pts: Vec<(f64, f64)> = cmc.iter().map(|&(r, y)| (r as f64, y)).collect();
    points_csv(&pts)
}
