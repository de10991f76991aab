//! Labeled feature datasets: synthetic hypersphere clusters, CSV ingestion,
//! identity-disjoint splits, and verification pairs.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fmt_g17, l2_normalize, DenseMatrix, RngStream, NORM_EPSILON};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::contract(format!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        let mut seen = vec![false; classes];
        for &l in &labels {
            if l >= classes {
                return Err(Error::contract(format!("label {l} >= class count {classes}")));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::contract(format!("class {missing} has no samples")));
        }
        Ok(LabeledDataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Sample indices grouped by class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Subset of samples, relabeled densely in first-appearance order.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let mut remap = HashMap::new();
        let labels: Vec<usize> = indices
            .iter()
            .map(|&i| {
                let next = remap.len();
                *remap.entry(self.labels[i]).or_insert(next)
            })
            .collect();
        LabeledDataset::new(self.features.select_rows(indices), labels, remap.len())
    }

    /// CSV with one sample per line: feature columns, then the integer label.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (row, label) in self.features.row_iter().zip(&self.labels) {
            for v in row {
                out.push_str(&fmt_g17(*v));
                out.push(',');
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io(format!("writing dataset {}", path.display()), e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 50,
            dim: 32,
            samples_per_class: 40,
            noise_sigma: 0.35,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::contract("synthetic spec needs at least 2 classes"));
        }
        if self.dim == 0 || self.samples_per_class == 0 {
            return Err(Error::contract("synthetic spec needs dim > 0 and samples > 0"));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::contract("noise_sigma must be > 0"));
        }
        Ok(())
    }
}

/// Class centers uniform on the unit sphere; each sample is
/// `normalize(center + σ·z)`, `z ~ N(0, I)`. Samples are ordered class by class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let root = RngStream::new(spec.seed, "synthetic");
    let mut rng = root.child("centers").rng();
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let g: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            l2_normalize(&g, NORM_EPSILON)
        })
        .collect();
    let mut rng = root.child("noise").rng();
    let n = spec.classes * spec.samples_per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let v: Vec<f64> = center
                .iter()
                .map(|x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + spec.noise_sigma * z
                })
                .collect();
            data.extend(l2_normalize(&v, NORM_EPSILON));
            labels.push(c);
        }
    }
    LabeledDataset::new(DenseMatrix::from_vec(n, spec.dim, data)?, labels, spec.classes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlatFormat {
    Csv,
}

/// Loads a flat file. Labels are opaque tokens re-indexed densely in order of
/// first appearance.
pub fn load_flat_file(path: &Path, format: FlatFormat) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading dataset {}", path.display()), e))?;
    match format {
        FlatFormat::Csv => parse_csv(&text, path),
    }
}

fn parse_csv(text: &str, path: &Path) -> Result<LabeledDataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut cols: Option<usize> = None;
    let mut data = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(err(lineno, "need at least one feature and a label".into()));
        }
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(err(
                    lineno,
                    format!("{} columns, expected {c}", fields.len()),
                ))
            }
            _ => {}
        }
        let (label, feats) = fields.split_last().expect("at least two fields");
        for f in feats {
            let v: f64 = f
                .parse()
                .map_err(|_| err(lineno, format!("bad float `{f}`")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value `{f}`")));
            }
            data.push(v);
        }
        let label: i64 = label
            .parse()
            .map_err(|_| err(lineno, format!("bad integer label `{label}`")))?;
        raw_labels.push(label);
    }
    let Some(cols) = cols else {
        return Err(err(0, "empty dataset".into()));
    };
    let mut remap: HashMap<i64, usize> = HashMap::new();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| {
            let next = remap.len();
            *remap.entry(*l).or_insert(next)
        })
        .collect();
    let n = labels.len();
    LabeledDataset::new(DenseMatrix::from_vec(n, cols - 1, data)?, labels, remap.len())
}

/// Partitions identities (not samples) into train and eval sides.
pub fn split_open_set(
    dataset: &LabeledDataset,
    train_frac: f64,
    stream: &RngStream,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::contract(format!(
            "train_frac must be in (0, 1), got {train_frac}"
        )));
    }
    let k = dataset.classes;
    let n_train = (k as f64 * train_frac).round() as usize;
    if n_train < 2 || k - n_train.min(k) < 2 {
        return Err(Error::contract(format!(
            "{k} identities at train_frac {train_frac} leave fewer than 2 on one side"
        )));
    }
    let mut ids: Vec<usize> = (0..k).collect();
    ids.shuffle(&mut stream.rng());
    let train_ids: HashSet<usize> = ids[..n_train].iter().copied().collect();
    let (train_idx, eval_idx): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| train_ids.contains(&dataset.labels[i]));
    Ok((dataset.subset(&train_idx)?, dataset.subset(&eval_idx)?))
}

/// Holds out `holdout_frac` of every identity's samples (at least one, keeping
/// at least one for training). Both sides keep the original label space.
pub fn split_closed_set(
    dataset: &LabeledDataset,
    holdout_frac: f64,
    stream: &RngStream,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::contract("holdout_frac must be in (0, 1)"));
    }
    let mut rng = stream.rng();
    let mut train = Vec::new();
    let mut held = Vec::new();
    for mut group in dataset.indices_by_class() {
        if group.len() < 2 {
            return Err(Error::contract(
                "closed-set split needs at least 2 samples per identity",
            ));
        }
        group.shuffle(&mut rng);
        let h = ((group.len() as f64 * holdout_frac).round() as usize).clamp(1, group.len() - 1);
        held.extend_from_slice(&group[..h]);
        train.extend_from_slice(&group[h..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    let keep = |idx: &[usize]| {
        LabeledDataset::new(
            dataset.features.select_rows(idx),
            idx.iter().map(|&i| dataset.labels[i]).collect(),
            dataset.classes,
        )
    };
    Ok((keep(&train)?, keep(&held)?))
}

/// Verification pairs over sample indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<(usize, usize, bool)>,
}

impl PairSet {
    pub fn new(pairs: Vec<(usize, usize, bool)>) -> Result<Self> {
        let set = PairSet { pairs };
        if !set.pairs.iter().any(|p| p.2) || !set.pairs.iter().any(|p| !p.2) {
            return Err(Error::contract(
                "pair set needs at least one same and one different pair",
            ));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn check_against(&self, dataset: &LabeledDataset) -> Result<()> {
        for &(i, j, same) in &self.pairs {
            if i >= dataset.len() || j >= dataset.len() {
                return Err(Error::contract(format!(
                    "pair ({i}, {j}) out of range for {} samples",
                    dataset.len()
                )));
            }
            if (dataset.labels[i] == dataset.labels[j]) != same {
                return Err(Error::contract(format!(
                    "pair ({i}, {j}) flag disagrees with labels"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index1,index2,same\n");
        for &(i, j, s) in &self.pairs {
            let _ = writeln!(out, "{i},{j},{}", u8::from(s));
        }
        out
    }

    pub fn load_csv(path: &Path) -> Result<PairSet> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading pairs {}", path.display()), e))?;
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("index1")) {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(err(i + 1, format!("{} columns, expected 3", f.len())));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| err(i + 1, format!("bad index `{s}`")))
            };
            let same = match f[2] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(err(i + 1, format!("bad flag `{other}`"))),
            };
            pairs.push((parse(f[0])?, parse(f[1])?, same));
        }
        PairSet::new(pairs).map_err(|e| err(0, e.to_string()))
    }
}

fn choose2(n: usize) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// `n_pairs/2` same-identity and `n_pairs/2` different-identity pairs, drawn
/// uniformly over the respective pair spaces without replacement. When a space
/// has fewer pairs than requested, all of them are used and the rest are drawn
/// with replacement.
///
/// Same pairs come first, then different pairs, so a round-robin split of the
/// list into folds leaves every fold balanced.
pub fn make_pairs(dataset: &LabeledDataset, n_pairs: usize, stream: &RngStream) -> Result<PairSet> {
    if n_pairs == 0 || !n_pairs.is_multiple_of(2) {
        return Err(Error::contract(format!("n_pairs must be even and > 0, got {n_pairs}")));
    }
    if dataset.classes < 2 {
        return Err(Error::contract("pairs need at least 2 identities"));
    }
    let groups = dataset.indices_by_class();
    let same_weights: Vec<u128> = groups.iter().map(|g| choose2(g.len())).collect();
    let same_total: u128 = same_weights.iter().sum();
    if same_total == 0 {
        return Err(Error::contract("no identity has 2 or more samples"));
    }
    let diff_total = choose2(dataset.len()) - same_total;
    let half = n_pairs / 2;
    let mut rng = stream.rng();

    let draw_same = |rng: &mut rand_chacha::ChaCha12Rng| {
        let mut t = rng.random_range(0..same_total);
        let mut c = 0;
        while t >= same_weights[c] {
            t -= same_weights[c];
            c += 1;
        }
        let g = &groups[c];
        let i = rng.random_range(0..g.len());
        let mut j = rng.random_range(0..g.len() - 1);
        if j >= i {
            j += 1;
        }
        ordered(g[i], g[j])
    };
    let labels = &dataset.labels;
    let draw_diff = |rng: &mut rand_chacha::ChaCha12Rng| loop {
        let i = rng.random_range(0..labels.len());
        let j = rng.random_range(0..labels.len());
        if labels[i] != labels[j] {
            return ordered(i, j);
        }
    };

    let same = sample_pairs(&mut rng, half, same_total, draw_same);
    let diff = sample_pairs(&mut rng, half, diff_total, draw_diff);
    let pairs = same
        .into_iter()
        .map(|(i, j)| (i, j, true))
        .chain(diff.into_iter().map(|(i, j)| (i, j, false)))
        .collect();
    PairSet::new(pairs)
}

fn sample_pairs<R: Rng>(
    rng: &mut R,
    want: usize,
    available: u128,
    mut draw: impl FnMut(&mut R) -> (usize, usize),
) -> Vec<(usize, usize)> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(want);
    let distinct = (want as u128).min(available) as usize;
    while out.len() < distinct {
        let p = draw(rng);
        if seen.insert(p) {
            out.push(p);
        }
    }
    while out.len() < want {
        out.push(draw(rng));
    }
    out
}
