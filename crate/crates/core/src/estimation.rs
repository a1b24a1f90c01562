//! EM fit of the two-band mixture on a non-LOH training segment.
//!
//! Atoms are attributed to the component that owns them, so the E-step only
//! has to split continuous observations between the bands, and every M-step
//! update is closed-form (the `Beta(a, 1)` / `Beta(1, b)` shape MLEs are
//! `-W / sum(w ln y)` and `-W / sum(w ln(1 - y))`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MixtureModel, OneInflatedBeta, TBafSequence, ZeroInflatedBeta, PROB_EPS};

/// Smallest training segment accepted. Segments of at least 500
/// observations are recommended.
pub const MIN_TRAINING_LEN: usize = 10;

const LOG_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood improvement below which EM stops.
    pub ll_tol: f64,
    pub init: Option<MixtureModel>,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iter: 500, ll_tol: 1e-8, init: None }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Validation("maxIter must be >= 1".into()));
        }
        if !(self.ll_tol > 0.0 && self.ll_tol.is_finite()) {
            return Err(Error::Validation(format!("llTol must be > 0, got {}", self.ll_tol)));
        }
        if let Some(init) = &self.init {
            init.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EmReport {
    pub model: MixtureModel,
    pub iterations: usize,
    pub log_lik_trace: Vec<f64>,
    pub converged: bool,
}

impl EmReport {
    pub fn final_log_lik(&self) -> f64 {
        *self.log_lik_trace.last().expect("trace holds the initial log-likelihood")
    }
}

/// Sufficient statistics of the training data.
struct Suff {
    n: usize,
    zeros: usize,
    ones: usize,
    /// (y, ln y, ln(1 - y)) for observations strictly inside (0, 1).
    cont: Vec<(f64, f64, f64)>,
}

impl Suff {
    fn new(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut zeros = 0;
        let mut ones = 0;
        let mut cont = Vec::with_capacity(sorted.len());
        for y in sorted {
            if y == 0.0 {
                zeros += 1;
            } else if y == 1.0 {
                ones += 1;
            } else {
                let c = y.clamp(LOG_GUARD, 1.0 - LOG_GUARD);
                cont.push((y, c.ln(), (-c).ln_1p()));
            }
        }
        Suff { n: values.len(), zeros, ones, cont }
    }

    fn log_lik(&self, m: &MixtureModel) -> f64 {
        let mut ll = 0.0;
        if self.zeros > 0 {
            ll += self.zeros as f64 * m.ln_f(0.0);
        }
        if self.ones > 0 {
            ll += self.ones as f64 * m.ln_f(1.0);
        }
        ll + self.cont.iter().map(|&(y, _, _)| m.ln_f(y)).sum::<f64>()
    }
}

/// `argmax_s sum_i w_i (ln s + (s - 1) l_i)`, where `l_i` are log terms
/// (`ln y` or `ln(1 - y)`). `None` when there is no weight or no spread.
pub(crate) fn weighted_shape_mle(weights: &[f64], logs: &[f64]) -> Option<f64> {
    let w: f64 = weights.iter().sum();
    let wl: f64 = weights.iter().zip(logs).map(|(w, l)| w * l).sum();
    let s = -w / wl;
    (w > 0.0 && wl < 0.0 && s.is_finite()).then_some(s)
}

fn default_init(s: &Suff) -> MixtureModel {
    let n = s.n as f64;
    let below = s.zeros + s.cont.iter().filter(|c| c.0 < 0.5).count();
    let above = s.n - below;
    let theta0 = if s.zeros > 0 { s.zeros as f64 / below as f64 } else { 0.05 };
    let theta1 = if s.ones > 0 { s.ones as f64 / above as f64 } else { 0.05 };
    MixtureModel {
        het_weight: below as f64 / n,
        lower: ZeroInflatedBeta { theta0, shape_b: 2.0 },
        upper: OneInflatedBeta { theta1, shape_a: 2.0 },
    }
}

/// Upper-band responsibility of a continuous observation.
#[inline]
fn upper_resp(m: &MixtureModel, y: f64) -> f64 {
    let lu = (1.0 - m.het_weight).ln() + m.upper.ln_continuous(y);
    let ll = m.het_weight.ln() + m.lower.ln_continuous(y);
    if lu == f64::NEG_INFINITY && ll == f64::NEG_INFINITY {
        0.5
    } else {
        1.0 / (1.0 + (ll - lu).exp())
    }
}

fn m_step(s: &Suff, current: &MixtureModel, gamma: &[f64]) -> MixtureModel {
    let n = s.n as f64;
    let g_cont: f64 = gamma.iter().sum();
    let h_cont = s.cont.len() as f64 - g_cont;
    let g_total = s.ones as f64 + g_cont;
    let h_total = s.zeros as f64 + h_cont;

    let het_weight = h_total / n;
    let theta1 = if g_total > 0.0 { s.ones as f64 / g_total } else { current.upper.theta1 };
    let theta0 = if h_total > 0.0 { s.zeros as f64 / h_total } else { current.lower.theta0 };

    let ln_y: Vec<f64> = s.cont.iter().map(|c| c.1).collect();
    let ln_1my: Vec<f64> = s.cont.iter().map(|c| c.2).collect();
    let one_minus: Vec<f64> = gamma.iter().map(|g| 1.0 - g).collect();
    let shape_a = weighted_shape_mle(gamma, &ln_y).unwrap_or(current.upper.shape_a);
    let shape_b = weighted_shape_mle(&one_minus, &ln_1my).unwrap_or(current.lower.shape_b);

    MixtureModel {
        het_weight,
        lower: ZeroInflatedBeta { theta0, shape_b },
        upper: OneInflatedBeta { theta1, shape_a },
    }
}

/// Fits the mixture to `data` by EM. The result is independent of the order
/// of `data`; the returned model carries the [`PROB_EPS`] floors.
pub fn fit_em(data: &TBafSequence, cfg: &EmConfig) -> Result<EmReport> {
    cfg.validate()?;
    let values = data.values();
    if values.len() < MIN_TRAINING_LEN {
        return Err(Error::Input(format!(
            "training data has {} observations, at least {MIN_TRAINING_LEN} are required",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite value at index {i}")));
    }
    let suff = Suff::new(values);
    if suff.zeros == suff.n {
        return Err(Error::DegenerateFit { atom: 0.0 });
    }
    if suff.ones == suff.n {
        return Err(Error::DegenerateFit { atom: 1.0 });
    }

    let mut model = cfg.init.unwrap_or_else(|| default_init(&suff));
    let mut ll = suff.log_lik(&model);
    let mut trace = vec![ll];
    let mut gamma = vec![0.0; suff.cont.len()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        for (g, c) in gamma.iter_mut().zip(&suff.cont) {
            *g = upper_resp(&model, c.0);
        }
        let next = m_step(&suff, &model, &gamma);
        let next_ll = suff.log_lik(&next);
        trace.push(next_ll);
        let improvement = next_ll - ll;
        model = next;
        let done = ll.is_finite() && improvement.abs() <= cfg.ll_tol * ll.abs().max(f64::MIN_POSITIVE);
        ll = next_ll;
        if done {
            converged = true;
            break;
        }
    }

    Ok(EmReport { model: model.floored(PROB_EPS), iterations, log_lik_trace: trace, converged })
}
