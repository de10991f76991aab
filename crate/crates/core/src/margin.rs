//! Margin-based softmax losses and their reformulation through a modulating
//! factor.
//!
//! Every margin function `f(m, θ)` applied to the target logit reduces the
//! target softmax probability `p` to `p_m = h(a, p)·p`, where
//!
//! ```text
//! a       = 1 − exp(s·(cos θ_y − f(m, θ_y)))     (≤ 0 whenever f ≤ cos θ)
//! h(a, p) = 1 / (a·p + 1 − a)                    ∈ (0, 1]
//! ```
//!
//! The unified loss `−log(h(a, p)·p)` is parameterized by `a` alone, which is
//! what the search in [`crate::search`] optimizes.
//!
//! All probabilities are evaluated in the log domain. With `q = 1 − p` taken
//! from the log domain as well, the denominator of `h` is computed as
//! `p + (1 − a)·q`, a sum of non-negative terms, so it stays accurate even when
//! `|a|` is around `1e9` and `p` is within an ulp of one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_unchecked, ACOS_CLAMP};

/// Which loss is applied to the target logit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginSpec {
    /// Normalized softmax, `f = cos θ`.
    Plain,
    /// Multiplicative angular margin, `f = cos(m1·θ)`.
    Angular { m1: u32 },
    /// Additive angular margin, `f = cos(θ + m2)`.
    AdditiveAngular { m2: f64 },
    /// Additive cosine margin, `f = cos θ − m3`.
    Additive { m3: f64 },
    /// `f = cos(m1·θ + m2) − m3`.
    Combined { m1: u32, m2: f64, m3: f64 },
    /// The one-parameter family `−log(h(a, p)·p)`, `a ≤ 0`.
    Unified { a: f64 },
}

impl MarginSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginSpec::Plain => true,
            MarginSpec::Angular { m1 } => m1 >= 1,
            MarginSpec::AdditiveAngular { m2 } => m2 > 0.0 && m2.is_finite(),
            MarginSpec::Additive { m3 } => m3 > 0.0 && m3.is_finite(),
            MarginSpec::Combined { m1, m2, m3 } => {
                m1 >= 1 && m2 >= 0.0 && m3 >= 0.0 && m2.is_finite() && m3.is_finite()
            }
            MarginSpec::Unified { a } => a <= 0.0 && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid margin parameters: {self:?}")))
        }
    }

    pub fn is_unified(&self) -> bool {
        matches!(self, MarginSpec::Unified { .. })
    }

    /// Short name used in file names and reports.
    pub fn name(&self) -> &'static str {
        match self {
            MarginSpec::Plain => "plain",
            MarginSpec::Angular { .. } => "sphere",
            MarginSpec::AdditiveAngular { .. } => "arc",
            MarginSpec::Additive { .. } => "am",
            MarginSpec::Combined { .. } => "combined",
            MarginSpec::Unified { .. } => "unified",
        }
    }
}

/// One sample's cosine logits against all `K` class weights.
#[derive(Clone, Copy, Debug)]
pub struct LogitRow<'a> {
    cosines: &'a [f64],
    label: usize,
    scale: f64,
}

impl<'a> LogitRow<'a> {
    pub fn new(cosines: &'a [f64], label: usize, scale: f64) -> Result<Self> {
        if label >= cosines.len() {
            return Err(Error::contract(format!(
                "label {label} out of range for {} classes",
                cosines.len()
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::contract(format!("scale must be > 0, got {scale}")));
        }
        if let Some(c) = cosines.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(Error::contract(format!("cosine {c} outside [-1, 1]")));
        }
        Ok(LogitRow {
            cosines,
            label,
            scale,
        })
    }

    pub fn cosines(&self) -> &'a [f64] {
        self.cosines
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn target_cosine(&self) -> f64 {
        self.cosines[self.label]
    }

    fn scaled_logits(&self) -> Vec<f64> {
        self.cosines.iter().map(|c| self.scale * c).collect()
    }

    /// Scaled logits with the target replaced by `s·target`.
    fn logits_with_target(&self, target: f64) -> Vec<f64> {
        let mut z = self.scaled_logits();
        z[self.label] = self.scale * target;
        z
    }
}

fn clamped_angle(cos_y: f64) -> f64 {
    cos_y.clamp(-ACOS_CLAMP, ACOS_CLAMP).acos()
}

/// Applies the margin function `f(m, θ)` to the target cosine.
pub fn margin_transform(spec: MarginSpec, cos_y: f64) -> Result<f64> {
    Ok(match spec {
        MarginSpec::Plain => cos_y,
        MarginSpec::Additive { m3 } => cos_y - m3,
        MarginSpec::Angular { m1 } => (f64::from(m1) * clamped_angle(cos_y)).cos(),
        MarginSpec::AdditiveAngular { m2 } => (clamped_angle(cos_y) + m2).cos(),
        MarginSpec::Combined { m1, m2, m3 } => {
            (f64::from(m1) * clamped_angle(cos_y) + m2).cos() - m3
        }
        MarginSpec::Unified { .. } => {
            return Err(Error::contract(
                "the unified loss has no margin function; use unified_loss",
            ))
        }
    })
}

/// `df/d cos θ`, with zero slope where the `acos` clamp is active.
fn margin_transform_slope(spec: MarginSpec, cos_y: f64) -> f64 {
    let angular = |m1: u32, m2: f64| {
        if cos_y.abs() > ACOS_CLAMP {
            return 0.0;
        }
        let theta = cos_y.acos();
        let m1 = f64::from(m1);
        m1 * (m1 * theta + m2).sin() / theta.sin()
    };
    match spec {
        MarginSpec::Plain | MarginSpec::Additive { .. } | MarginSpec::Unified { .. } => 1.0,
        MarginSpec::Angular { m1 } => angular(m1, 0.0),
        MarginSpec::AdditiveAngular { m2 } => angular(1, m2),
        MarginSpec::Combined { m1, m2, .. } => angular(m1, m2),
    }
}

/// `true` when the margin raises the target logit (`f > cos θ`), which gives a
/// positive modulating factor. Happens for angular margins with `θ > π/m1`.
pub fn margin_exceeds_cosine(spec: MarginSpec, cos_y: f64) -> bool {
    !spec.is_unified() && margin_transform(spec, cos_y).is_ok_and(|f| f > cos_y)
}

/// Target-class softmax probability split into `p`, `1 − p` and `ln p`, each
/// taken from the log domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetProbability {
    pub p: f64,
    pub complement: f64,
    pub log_p: f64,
}

fn target_probability_of(logits: &[f64], label: usize) -> TargetProbability {
    let lse = log_sum_exp_unchecked(logits);
    let log_p = logits[label] - lse;
    let complement = if logits.len() == 1 {
        0.0
    } else {
        let others: Vec<f64> = logits
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != label)
            .map(|(_, &z)| z)
            .collect();
        (log_sum_exp_unchecked(&others) - lse).exp()
    };
    TargetProbability {
        p: log_p.exp(),
        complement,
        log_p,
    }
}

pub fn target_probability(row: &LogitRow<'_>) -> TargetProbability {
    target_probability_of(&row.scaled_logits(), row.label)
}

/// `p = exp(s·cos θ_y) / Σ_k exp(s·cos θ_k)`.
pub fn softmax_probability(row: &LogitRow<'_>) -> f64 {
    target_probability(row).p
}

/// Target probability after applying the margin function to the target logit.
pub fn margin_probability(spec: MarginSpec, row: &LogitRow<'_>) -> Result<f64> {
    Ok(margin_log_probability(spec, row)?.exp())
}

fn margin_log_probability(spec: MarginSpec, row: &LogitRow<'_>) -> Result<f64> {
    let f = margin_transform(spec, row.target_cosine())?;
    let z = row.logits_with_target(f);
    Ok(z[row.label] - log_sum_exp_unchecked(&z))
}

/// `a = 1 − exp(s·(cos θ_y − f(m, θ_y)))`.
///
/// Plain gives exactly `+0.0`, additive margins give `1 − e^{s·m3}` for every
/// `cos θ_y`. For `Unified { a }` the factor is `a` itself. A positive result
/// (angular margins past `π/m1`) is returned unchanged.
pub fn modulating_factor(spec: MarginSpec, cos_y: f64, scale: f64) -> Result<f64> {
    if let MarginSpec::Unified { a } = spec {
        return Ok(a);
    }
    let f = margin_transform(spec, cos_y)?;
    let gap = match spec {
        MarginSpec::Plain => 0.0,
        MarginSpec::Additive { m3 } => m3,
        _ => cos_y - f,
    };
    // 0.0 - x keeps Plain at +0.0 rather than -0.0.
    Ok(0.0 - (scale * gap).exp_m1())
}

/// `1 − a = exp(s·(cos θ_y − f(m, θ_y)))`, computed without forming `a`.
///
/// For angular margins past `π/m1` the factor approaches `1` and `1.0 - a`
/// loses every digit; this keeps them.
pub fn factor_complement(spec: MarginSpec, cos_y: f64, scale: f64) -> Result<f64> {
    if let MarginSpec::Unified { a } = spec {
        return Ok(1.0 - a);
    }
    let f = margin_transform(spec, cos_y)?;
    let gap = match spec {
        MarginSpec::Plain => 0.0,
        MarginSpec::Additive { m3 } => m3,
        _ => cos_y - f,
    };
    Ok((scale * gap).exp())
}

/// `h` from `1 − a` and `1 − p`: `1 / (p + (1 − a)·(1 − p))`.
pub fn modulating_function_from_complements(factor_complement: f64, p: f64, complement: f64) -> f64 {
    1.0 / (p + factor_complement * complement)
}

/// `h(a, p) = 1 / (a·p + 1 − a)`, for `a ≤ 0` and `p ∈ (0, 1]`.
pub fn modulating_function(a: f64, p: f64) -> Result<f64> {
    modulating_function_with_complement(a, p, 1.0 - p)
}

/// [`modulating_function`] with `1 − p` supplied by the caller, for when it is
/// known more precisely than `1.0 - p` would give.
pub fn modulating_function_with_complement(a: f64, p: f64, complement: f64) -> Result<f64> {
    if a > 0.0 {
        return Err(Error::contract(format!(
            "modulating factor must be <= 0, got {a}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::contract(format!("probability {p} outside (0, 1]")));
    }
    Ok(raw_modulating_function(a, p, complement))
}

/// `h` without the domain checks; also meaningful for `0 < a < 1`.
pub fn raw_modulating_function(a: f64, p: f64, complement: f64) -> f64 {
    modulating_function_from_complements(1.0 - a, p, complement)
}

fn check_factor(a: f64) -> Result<()> {
    if a > 0.0 || !a.is_finite() {
        return Err(Error::contract(format!(
            "modulating factor must be finite and <= 0, got {a}"
        )));
    }
    Ok(())
}

/// `−log(h(a, p)·p) = −log p + log(1 − a·(1 − p))`.
pub fn unified_loss(a: f64, row: &LogitRow<'_>) -> Result<f64> {
    check_factor(a)?;
    let tp = target_probability(row);
    Ok(-tp.log_p + (-a * tp.complement).ln_1p())
}

/// Gradient of [`unified_loss`] with respect to every cosine logit.
pub fn unified_loss_gradient(a: f64, row: &LogitRow<'_>) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; row.cosines.len()];
    unified_loss_and_gradient(a, row, &mut grad)?;
    Ok(grad)
}

/// Loss and gradient together; `grad` must have length `K`.
///
/// With `D = 1 − a·q`, `∂L/∂p = −1/p + a/D`, and `∂p/∂cos_k = s·p·(δ_ky − p_k)`,
/// so `∂L/∂cos_k = s·(−1 + a·p/D)·(δ_ky − p_k)`.
pub fn unified_loss_and_gradient(a: f64, row: &LogitRow<'_>, grad: &mut [f64]) -> Result<f64> {
    check_factor(a)?;
    debug_assert_eq!(grad.len(), row.cosines.len());
    let z = row.scaled_logits();
    let lse = log_sum_exp_unchecked(&z);
    let tp = target_probability_of(&z, row.label);
    let denom = 1.0 + (-a) * tp.complement;
    let coef = row.scale * (-1.0 + a * tp.p / denom);
    for (k, (g, &zk)) in grad.iter_mut().zip(&z).enumerate() {
        let delta_minus_pk = if k == row.label {
            tp.complement
        } else {
            -(zk - lse).exp()
        };
        *g = coef * delta_minus_pk;
    }
    Ok(-tp.log_p + (-a * tp.complement).ln_1p())
}

/// `−log p_m` for a margin function.
pub fn margin_loss(spec: MarginSpec, row: &LogitRow<'_>) -> Result<f64> {
    Ok(-margin_log_probability(spec, row)?)
}

/// Loss and cosine gradient for any [`MarginSpec`].
///
/// `Plain` goes through the unified path at `a = 0`, so it is bit-identical to
/// `Unified { a: 0.0 }`.
pub fn loss_and_gradient(spec: MarginSpec, row: &LogitRow<'_>, grad: &mut [f64]) -> Result<f64> {
    match spec {
        MarginSpec::Plain => unified_loss_and_gradient(0.0, row, grad),
        MarginSpec::Unified { a } => unified_loss_and_gradient(a, row, grad),
        _ => {
            let cos_y = row.target_cosine();
            let f = margin_transform(spec, cos_y)?;
            let z = row.logits_with_target(f);
            let tp = target_probability_of(&z, row.label);
            let lse = log_sum_exp_unchecked(&z);
            for (k, (g, &zk)) in grad.iter_mut().zip(&z).enumerate() {
                *g = if k == row.label {
                    -row.scale * tp.complement * margin_transform_slope(spec, cos_y)
                } else {
                    row.scale * (zk - lse).exp()
                };
            }
            Ok(-tp.log_p)
        }
    }
}
