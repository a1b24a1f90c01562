//! Inflated-beta densities and the two-band tBAF mixture.
//!
//! Densities are taken with respect to Lebesgue measure on (0, 1) plus unit
//! atoms at 0 and 1. The atom at 0 belongs to the lower-band (zero-inflated)
//! component only and the atom at 1 to the upper-band (one-inflated)
//! component only, so a mixed discrete/continuous likelihood is well defined.
//!
//! The continuous parts are the one-parameter beta families
//! `Beta(1, shape_b)` (density `shape_b * (1 - y)^(shape_b - 1)`) for the lower
//! band and `Beta(shape_a, 1)` (density `shape_a * y^(shape_a - 1)`) for the
//! upper band.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to atom probabilities and mixing weights (and their
/// complements) before a model is used in likelihood ratios.
pub const PROB_EPS: f64 = 1e-6;

/// Default tolerance for snapping near-boundary values onto the atoms.
pub const SNAP_EPS: f64 = 1e-9;

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_shape(name: &str, s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be finite and > 0, got {s}")))
    }
}

/// `ln(p)` that maps an exact zero to `-inf` without warnings.
#[inline]
fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Upper-band component: atom at 1 with probability `theta1`, otherwise
/// `Beta(shape_a, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OneInflatedBeta {
    pub theta1: f64,
    pub shape_a: f64,
}

impl OneInflatedBeta {
    pub fn new(theta1: f64, shape_a: f64) -> Result<Self> {
        let c = OneInflatedBeta { theta1, shape_a };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("theta1", self.theta1)?;
        check_shape("shapeA", self.shape_a)
    }

    /// Log density of the continuous part at `y` in (0, 1), including the
    /// `(1 - theta1)` factor.
    #[inline]
    pub fn ln_continuous(&self, y: f64) -> f64 {
        ln_or_neg_inf(1.0 - self.theta1) + self.shape_a.ln() + (self.shape_a - 1.0) * y.ln()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.theta1 {
            return 1.0;
        }
        loop {
            // 1 - U lies in (0, 1]
            let u = 1.0 - rng.random::<f64>();
            let y = u.powf(1.0 / self.shape_a);
            if y > 0.0 && y < 1.0 {
                return y;
            }
        }
    }
}

/// Lower-band component: atom at 0 with probability `theta0`, otherwise
/// `Beta(1, shape_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ZeroInflatedBeta {
    pub theta0: f64,
    pub shape_b: f64,
}

impl ZeroInflatedBeta {
    pub fn new(theta0: f64, shape_b: f64) -> Result<Self> {
        let c = ZeroInflatedBeta { theta0, shape_b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("theta0", self.theta0)?;
        check_shape("shapeB", self.shape_b)
    }

    /// Log density of the continuous part at `y` in (0, 1), including the
    /// `(1 - theta0)` factor.
    #[inline]
    pub fn ln_continuous(&self, y: f64) -> f64 {
        ln_or_neg_inf(1.0 - self.theta0) + self.shape_b.ln() + (self.shape_b - 1.0) * (-y).ln_1p()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.theta0 {
            return 0.0;
        }
        loop {
            let u = 1.0 - rng.random::<f64>();
            let y = 1.0 - u.powf(1.0 / self.shape_b);
            if y > 0.0 && y < 1.0 {
                return y;
            }
        }
    }
}

/// `het_weight * ZIB + (1 - het_weight) * OIB`.
///
/// `het_weight` is the lower-band (heterozygous) weight; a model for an LOH
/// region is obtained by shrinking it, see [`derive_loh_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MixtureModel {
    pub het_weight: f64,
    pub lower: ZeroInflatedBeta,
    pub upper: OneInflatedBeta,
}

impl MixtureModel {
    pub fn new(het_weight: f64, lower: ZeroInflatedBeta, upper: OneInflatedBeta) -> Result<Self> {
        let m = MixtureModel { het_weight, lower, upper };
        m.validate()?;
        Ok(m)
    }

    /// Convenience constructor taking the five scalar parameters.
    pub fn from_params(het_weight: f64, theta0: f64, shape_b: f64, theta1: f64, shape_a: f64) -> Result<Self> {
        Self::new(
            het_weight,
            ZeroInflatedBeta::new(theta0, shape_b)?,
            OneInflatedBeta::new(theta1, shape_a)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("hetWeight", self.het_weight)?;
        self.lower.validate()?;
        self.upper.validate()
    }

    /// Parses and validates a model document.
    pub fn from_json(s: &str) -> Result<Self> {
        let m: MixtureModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Copy with every probability clamped to `[eps, 1 - eps]`.
    pub fn floored(&self, eps: f64) -> Self {
        let clamp = |p: f64| p.clamp(eps, 1.0 - eps);
        MixtureModel {
            het_weight: clamp(self.het_weight),
            lower: ZeroInflatedBeta { theta0: clamp(self.lower.theta0), ..self.lower },
            upper: OneInflatedBeta { theta1: clamp(self.upper.theta1), ..self.upper },
        }
    }

    /// Log density at `y`, rejecting values outside [0, 1].
    pub fn log_density(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("log_density evaluated at {y}, outside [0, 1]")));
        }
        Ok(self.ln_f(y))
    }

    /// Unchecked log density; `y` must lie in [0, 1].
    #[inline]
    pub fn ln_f(&self, y: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&y));
        if y == 0.0 {
            ln_or_neg_inf(self.het_weight * self.lower.theta0)
        } else if y == 1.0 {
            ln_or_neg_inf((1.0 - self.het_weight) * self.upper.theta1)
        } else {
            log_add_exp(
                ln_or_neg_inf(self.het_weight) + self.lower.ln_continuous(y),
                ln_or_neg_inf(1.0 - self.het_weight) + self.upper.ln_continuous(y),
            )
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.het_weight {
            self.lower.draw(rng)
        } else {
            self.upper.draw(rng)
        }
    }
}

/// Draws `n` i.i.d. observations from `model`.
pub fn sample<R: Rng + ?Sized>(model: &MixtureModel, n: usize, rng: &mut R) -> TBafSequence {
    TBafSequence { values: (0..n).map(|_| model.draw(rng)).collect() }
}

/// LOH counterpart of a non-LOH model: the lower-band weight is scaled by
/// `delta`, every component parameter is kept.
pub fn derive_loh_model(base: &MixtureModel, delta: f64) -> Result<MixtureModel> {
    if !(delta.is_finite() && (0.0..1.0).contains(&delta)) {
        return Err(Error::Domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    Ok(MixtureModel { het_weight: delta * base.het_weight, ..*base })
}

/// A validated sequence of transformed BAF values in [0, 1]. Exact 0.0 and
/// 1.0 are the atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TBafSequence {
    values: Vec<f64>,
}

impl TBafSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("tBAF value {v} at index {i} is outside [0, 1]")));
        }
        Ok(TBafSequence { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, start: usize, end: usize) -> TBafSequence {
        TBafSequence { values: self.values[start..end].to_vec() }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `y = 2 |x - 0.5|` with the default snapping tolerance.
pub fn tbaf_transform(baf: &[f64]) -> Result<TBafSequence> {
    tbaf_transform_with(baf, SNAP_EPS)
}

/// `y = 2 |x - 0.5|`. Inputs within `snap_eps` outside [0, 1] are clamped;
/// outputs within `snap_eps` of 0 or 1 are snapped onto the atom.
pub fn tbaf_transform_with(baf: &[f64], snap_eps: f64) -> Result<TBafSequence> {
    let values = baf
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !x.is_finite() || x < -snap_eps || x > 1.0 + snap_eps {
                return Err(Error::Validation(format!("BAF value {x} at index {i} is outside [0, 1]")));
            }
            let y = 2.0 * (x.clamp(0.0, 1.0) - 0.5).abs();
            Ok(if y <= snap_eps {
                0.0
            } else if y >= 1.0 - snap_eps {
                1.0
            } else {
                y
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TBafSequence { values })
}
