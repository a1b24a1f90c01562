//! CUSUM segmentation into alternating non-LOH / LOH regions.
//!
//! The scan accumulates `s_i = ln p_alt(y_i) - ln p_assumed(y_i)` into
//! `S_i = max(0, S_{i-1} + s_i)` and alarms at the first `S_i` strictly above
//! the threshold. The change point inside the scanned window is the
//! maximum-likelihood split, after which the scan restarts at the change point
//! with the roles of the two models swapped.
//!
//! Thresholds come from Monte-Carlo: with `R_m = max_{1 <= i <= m} S_i` over
//! `m` draws from the post-change model, the alarm threshold is the empirical
//! `1 - tol_a` quantile of `R_m`, so that a change shorter than `m`
//! observations raises an alarm with probability at most about `tol_a`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_loh_model, sample, MixtureModel, TBafSequence, PROB_EPS};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "NonLOH")]
    NonLoh,
    #[serde(rename = "LOH")]
    Loh,
}

impl Label {
    pub fn flipped(self) -> Label {
        match self {
            Label::NonLoh => Label::Loh,
            Label::Loh => Label::NonLoh,
        }
    }

    /// LOH is the positive class.
    pub fn is_positive(self) -> bool {
        self == Label::Loh
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NonLoh => "NonLOH",
            Label::Loh => "LOH",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NonLOH" | "nonloh" | "non-loh" | "0" => Ok(Label::NonLoh),
            "LOH" | "loh" | "1" => Ok(Label::Loh),
            other => Err(Error::Validation(format!("unknown label '{other}' (expected NonLOH/LOH or 0/1)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SegmenterConfig {
    pub delta: f64,
    pub tol_a: f64,
    pub min_len: usize,
    pub n_sim: usize,
    pub seed: u64,
    pub initial_state: Label,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            delta: 0.01,
            tol_a: 0.05,
            min_len: 25,
            n_sim: 10_000,
            seed: 0,
            initial_state: Label::NonLoh,
        }
    }
}

/// Smallest accepted number of Monte-Carlo replicates.
pub const MIN_N_SIM: usize = 100;

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && (0.0..1.0).contains(&self.delta)) {
            return Err(Error::Domain(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        check_tol(self.tol_a)?;
        if self.min_len < 1 {
            return Err(Error::Domain("minimum length must be >= 1".into()));
        }
        if self.n_sim < MIN_N_SIM {
            return Err(Error::Domain(format!("nSim must be >= {MIN_N_SIM}, got {}", self.n_sim)));
        }
        Ok(())
    }
}

fn check_tol(tol_a: f64) -> Result<()> {
    if tol_a > 0.0 && tol_a < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance level must lie in (0, 1), got {tol_a}")))
    }
}

/// Alarm thresholds: `l0` while the non-LOH model is assumed, `l1` while the
/// LOH model is assumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub l0: f64,
    pub l1: f64,
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l0", self.l0), ("l1", self.l1)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("threshold {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Inclusive 0-based index range with its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    pub change_points: Vec<usize>,
}

impl Segmentation {
    /// Builds a segmentation from ordered segments; change points are the
    /// starts of every segment after the first.
    pub fn from_segments(segments: Vec<Segment>) -> Self {
        let change_points = segments.iter().skip(1).map(|s| s.start).collect();
        Segmentation { segments, change_points }
    }

    /// Run-length encodes a per-observation labeling.
    pub fn from_labels(labels: &[Label]) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        for (i, &label) in labels.iter().enumerate() {
            match segments.last_mut() {
                Some(s) if s.label == label => s.end = i,
                _ => segments.push(Segment { start: i, end: i, label }),
            }
        }
        Self::from_segments(segments)
    }

    /// Number of observations covered.
    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::with_capacity(self.len());
        for s in &self.segments {
            out.extend(std::iter::repeat_n(s.label, s.len()));
        }
        out
    }

    /// Checks the partition and change-point invariants against a sequence of
    /// length `n`. With `alternating`, adjacent segments must differ in label.
    pub fn check(&self, n: usize, alternating: bool) -> Result<()> {
        let mut next = 0;
        for (k, s) in self.segments.iter().enumerate() {
            if s.start != next || s.end < s.start {
                return Err(Error::Validation(format!("segment {k} [{}, {}] breaks the partition", s.start, s.end)));
            }
            if alternating && k > 0 && self.segments[k - 1].label == s.label {
                return Err(Error::Validation(format!("segments {} and {k} share a label", k - 1)));
            }
            next = s.end + 1;
        }
        if next != n {
            return Err(Error::Validation(format!("segmentation covers {next} observations, expected {n}")));
        }
        let expected: Vec<usize> = self.segments.iter().skip(1).map(|s| s.start).collect();
        if expected != self.change_points {
            return Err(Error::Validation("change points disagree with segment starts".into()));
        }
        Ok(())
    }

    /// TSV with header `start\tend\tlabel\tn_obs`, one row per segment.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("start\tend\tlabel\tn_obs\n");
        for s in &self.segments {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", s.start, s.end, s.label, s.len()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CusumTrace {
    /// `S_0 = 0` followed by one sum per scanned observation.
    pub sums: Vec<f64>,
    /// Absolute index into the data of the first sum above the threshold.
    pub alarm_index: Option<usize>,
}

impl CusumTrace {
    /// `max_{i >= 1} S_i` over the recorded sums (0 for an empty scan).
    pub fn max_sum(&self) -> f64 {
        self.sums.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the clamped cumulative sum over increments produced by `inc`, stopping
/// at the first alarm.
fn run_cusum(start_at: usize, n: usize, threshold: f64, mut inc: impl FnMut(usize) -> f64) -> CusumTrace {
    let mut sums = Vec::with_capacity(n.saturating_sub(start_at) + 1);
    sums.push(0.0);
    let mut s = 0.0f64;
    for i in start_at..n {
        s = (s + inc(i)).max(0.0);
        sums.push(s);
        if s > threshold {
            return CusumTrace { sums, alarm_index: Some(i) };
        }
    }
    CusumTrace { sums, alarm_index: None }
}

/// CUSUM scan from `start_at` for a switch from `assumed` to `alternative`.
pub fn cusum_scan(
    data: &TBafSequence,
    assumed: &MixtureModel,
    alternative: &MixtureModel,
    threshold: f64,
    start_at: usize,
) -> Result<CusumTrace> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Domain(format!("threshold must be >= 0, got {threshold}")));
    }
    let y = data.values();
    Ok(run_cusum(start_at, y.len(), threshold, |i| alternative.ln_f(y[i]) - assumed.ln_f(y[i])))
}

/// Smallest maximiser over `t` in `[i1, i2]` of the running sum
/// `sum_{j=i1}^{t-1} diff[j]`, where `diff[j] = ln p_assumed - ln p_alt`.
/// Adding the constant `sum_{j=i1}^{i2} ln p_alt` gives the split
/// log-likelihood, so the argmax is the same.
fn argmax_split(i1: usize, i2: usize, mut diff: impl FnMut(usize) -> f64) -> usize {
    let mut best_t = i1;
    let mut best = 0.0f64;
    let mut run = 0.0f64;
    for t in (i1 + 1)..=i2 {
        run += diff(t - 1);
        if run > best {
            best = run;
            best_t = t;
        }
    }
    best_t
}

/// Maximum-likelihood change point in `[i1, i2]`: observations before it
/// follow `assumed`, the rest follow `alternative`. Ties go to the smallest
/// index.
pub fn locate_change(
    data: &TBafSequence,
    assumed: &MixtureModel,
    alternative: &MixtureModel,
    i1: usize,
    i2: usize,
) -> Result<usize> {
    if i1 > i2 {
        return Err(Error::Domain(format!("locate_change needs i1 <= i2, got {i1} > {i2}")));
    }
    if i2 >= data.len() {
        return Err(Error::Domain(format!("i2 = {i2} is past the end of a sequence of length {}", data.len())));
    }
    let y = data.values();
    Ok(argmax_split(i1, i2, |j| assumed.ln_f(y[j]) - alternative.ln_f(y[j])))
}

/// 1-based rank of the `1 - tol_a` empirical quantile among `n` values.
pub(crate) fn quantile_rank(tol_a: f64, n: usize) -> usize {
    let x = (1.0 - tol_a) * n as f64;
    // absorb representation error such as 0.95 * 10000 = 9500.000000000002
    let k = (x - 1e-9 * x.max(1.0)).ceil() as usize;
    k.clamp(1, n)
}

/// Samples `n_sim` values of `R_m` for an `assumed`-model scan over data
/// drawn from `alternative`. Replicate `r` uses stream `r` under a base seed
/// drawn from `rng`, so the result does not depend on thread scheduling.
pub fn simulate_rm<R: Rng + ?Sized>(
    assumed: &MixtureModel,
    alternative: &MixtureModel,
    m: usize,
    n_sim: usize,
    rng: &mut R,
) -> Vec<f64> {
    let base: u64 = rng.random();
    (0..n_sim as u64)
        .into_par_iter()
        .map(|r| {
            let mut sub = substream(base, r);
            let ys = sample(alternative, m, &mut sub);
            let y = ys.values();
            run_cusum(0, m, f64::INFINITY, |i| alternative.ln_f(y[i]) - assumed.ln_f(y[i])).max_sum()
        })
        .collect()
}

/// Empirical `1 - tol_a` quantile (the `ceil((1 - tol_a) n_sim)`-th order
/// statistic) of `R_m`.
pub fn calibrate_threshold<R: Rng + ?Sized>(
    assumed: &MixtureModel,
    alternative: &MixtureModel,
    m: usize,
    tol_a: f64,
    n_sim: usize,
    rng: &mut R,
) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("minimum length must be >= 1".into()));
    }
    check_tol(tol_a)?;
    if n_sim < MIN_N_SIM {
        return Err(Error::Domain(format!("nSim must be >= {MIN_N_SIM}, got {n_sim}")));
    }
    let mut rm = simulate_rm(assumed, alternative, m, n_sim, rng);
    rm.sort_by(f64::total_cmp);
    Ok(rm[quantile_rank(tol_a, n_sim) - 1])
}

/// The pair of models a segmentation runs with: the floored non-LOH model
/// and its floored LOH counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPair {
    pub non_loh: MixtureModel,
    pub loh: MixtureModel,
}

impl ModelPair {
    pub fn new(non_loh: &MixtureModel, delta: f64) -> Result<Self> {
        non_loh.validate()?;
        let loh = derive_loh_model(non_loh, delta)?;
        Ok(ModelPair { non_loh: non_loh.floored(PROB_EPS), loh: loh.floored(PROB_EPS) })
    }
}

/// Calibrates both thresholds; `l0` on stream 0 and `l1` on stream 1 of
/// `cfg.seed`.
pub fn calibrate(models: &ModelPair, cfg: &SegmenterConfig) -> Result<Thresholds> {
    cfg.validate()?;
    let l0 = calibrate_threshold(&models.non_loh, &models.loh, cfg.min_len, cfg.tol_a, cfg.n_sim, &mut substream(cfg.seed, 0))?;
    let l1 = calibrate_threshold(&models.loh, &models.non_loh, cfg.min_len, cfg.tol_a, cfg.n_sim, &mut substream(cfg.seed, 1))?;
    Ok(Thresholds { l0, l1 })
}

/// Calibrates thresholds for `non_loh` under `cfg` and segments `data`.
pub fn segment(data: &TBafSequence, non_loh: &MixtureModel, cfg: &SegmenterConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let models = ModelPair::new(non_loh, cfg.delta)?;
    let thresholds = calibrate(&models, cfg)?;
    segment_with_thresholds(data, &models, &thresholds, cfg.initial_state)
}

/// Segments `data` with precomputed thresholds.
pub fn segment_with_thresholds(
    data: &TBafSequence,
    models: &ModelPair,
    thresholds: &Thresholds,
    initial_state: Label,
) -> Result<Segmentation> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Input("cannot segment an empty sequence".into()));
    }
    thresholds.validate()?;
    let y = data.values();
    let ln_non: Vec<f64> = y.iter().map(|&v| models.non_loh.ln_f(v)).collect();
    let ln_loh: Vec<f64> = y.iter().map(|&v| models.loh.ln_f(v)).collect();
    // ln p_loh - ln p_non per observation
    let lr: Vec<f64> = ln_loh.iter().zip(&ln_non).map(|(a, b)| a - b).collect();

    let mut segments: Vec<Segment> = Vec::new();
    let mut state = initial_state;
    let mut open_start = 0usize;
    let mut i1 = 0usize;
    let mut flipped_in_place_at: Option<usize> = None;

    loop {
        let (sign, threshold) = match state {
            Label::NonLoh => (1.0, thresholds.l0),
            Label::Loh => (-1.0, thresholds.l1),
        };
        let trace = run_cusum(i1, n, threshold, |i| sign * lr[i]);
        let Some(i2) = trace.alarm_index else {
            segments.push(Segment { start: open_start, end: n - 1, label: state });
            break;
        };
        let mut tau = argmax_split(i1, i2, |j| -sign * lr[j]);
        if tau == i1 && flipped_in_place_at == Some(i1) {
            // Two in-place flips at one index cannot happen in exact
            // arithmetic; force progress if rounding produces one.
            tau = i1 + 1;
        }
        if tau == i1 {
            // the open segment is empty: flip its label and, if a previous
            // segment exists, it carries the new label and is reopened
            flipped_in_place_at = Some(i1);
            match segments.pop() {
                Some(prev) => open_start = prev.start,
                None => open_start = 0,
            }
        } else {
            flipped_in_place_at = None;
            segments.push(Segment { start: open_start, end: tau - 1, label: state });
            open_start = tau;
            i1 = tau;
            if i1 >= n {
                // only reachable through the forced-progress branch
                return Ok(Segmentation::from_segments(segments));
            }
        }
        state = state.flipped();
    }
    Ok(Segmentation::from_segments(segments))
}
