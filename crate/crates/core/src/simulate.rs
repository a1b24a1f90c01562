//! Synthetic labelled BAF sequences and the sensitivity/specificity study
//! over (LOH length, purity, minimum length) grids.
//!
//! Loci are heterozygous with probability `het_rate`, otherwise AA or BB.
//! A heterozygous locus inside the LOH block keeps a normal-cell fraction
//! `1 - purity`, so its mean BAF is `(1 +/- purity) / 2`. Homozygous means
//! sit exactly on 0 or 1 and emit the exact value with probability
//! [`ATOM_PROB`]; everything else gets Gaussian noise and is clamped.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusum::{calibrate, segment_with_thresholds, Label, ModelPair, SegmenterConfig, Thresholds};
use crate::error::{Error, Result};
use crate::estimation::{fit_em, EmConfig};
use crate::evaluate::{confusion, mean_defined, metrics, ConfusionCounts};
use crate::model::{tbaf_transform, MixtureModel};
use crate::rng::{mix, substream};

/// Probability that a locus with mean BAF exactly 0 or 1 is emitted as the
/// exact atom.
pub const ATOM_PROB: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioConfig {
    pub total_len: usize,
    pub loh_start: usize,
    pub loh_len: usize,
    pub purity: f64,
    pub noise_sd: f64,
    pub het_rate: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { total_len: 1000, loh_start: 500, loh_len: 50, purity: 1.0, noise_sd: 0.03, het_rate: 0.33, seed: 0 }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loh_start + self.loh_len > self.total_len {
            return Err(Error::Validation(format!(
                "LOH block [{}, {}) does not fit in {} loci",
                self.loh_start,
                self.loh_start + self.loh_len,
                self.total_len
            )));
        }
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(Error::Validation(format!("purity must lie in (0, 1], got {}", self.purity)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Validation(format!("noise sd must be >= 0, got {}", self.noise_sd)));
        }
        if !(0.0..=1.0).contains(&self.het_rate) {
            return Err(Error::Validation(format!("het rate must lie in [0, 1], got {}", self.het_rate)));
        }
        Ok(())
    }

    fn truth_at(&self, i: usize) -> Label {
        if i >= self.loh_start && i < self.loh_start + self.loh_len {
            Label::Loh
        } else {
            Label::NonLoh
        }
    }

    pub fn truth(&self) -> Vec<Label> {
        (0..self.total_len).map(|i| self.truth_at(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub baf: Vec<f64>,
    pub truth: Vec<Label>,
}

impl LabeledSequence {
    /// TSV with header `index\tbaf\ttruth`; truth is 1 for LOH, 0 otherwise.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("index\tbaf\ttruth\n");
        for (i, (b, t)) in self.baf.iter().zip(&self.truth).enumerate() {
            out.push_str(&format!("{i}\t{b}\t{}\n", u8::from(t.is_positive())));
        }
        out
    }
}

/// Mean BAF of one locus.
fn locus_mean<R: Rng + ?Sized>(label: Label, purity: f64, het_rate: f64, rng: &mut R) -> f64 {
    let het = rng.random::<f64>() < het_rate;
    let coin = rng.random::<bool>();
    match (het, label) {
        (true, Label::NonLoh) => 0.5,
        (true, Label::Loh) => {
            if coin {
                (1.0 + purity) / 2.0
            } else {
                (1.0 - purity) / 2.0
            }
        }
        (false, _) => {
            if coin {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn emit<R: Rng + ?Sized>(mean: f64, noise: Option<&Normal<f64>>, rng: &mut R) -> f64 {
    let z = noise.map_or(0.0, |d| d.sample(rng));
    if mean == 0.0 || mean == 1.0 {
        if rng.random::<f64>() < ATOM_PROB {
            return mean;
        }
        let off = z.abs().min(1.0);
        if mean == 0.0 {
            off
        } else {
            1.0 - off
        }
    } else {
        (mean + z).clamp(0.0, 1.0)
    }
}

fn noise_dist(sd: f64) -> Option<Normal<f64>> {
    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("sd validated"))
}

/// One labelled sequence following `cfg`.
pub fn generate<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<LabeledSequence> {
    cfg.validate()?;
    let noise = noise_dist(cfg.noise_sd);
    let truth = cfg.truth();
    let baf = truth
        .iter()
        .map(|&label| {
            let mean = locus_mean(label, cfg.purity, cfg.het_rate, rng);
            emit(mean, noise.as_ref(), rng)
        })
        .collect();
    Ok(LabeledSequence { baf, truth })
}

/// Observed BAF values per population for resampling with replacement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResamplePools {
    pub non_loh: Vec<f64>,
    pub loh: Vec<f64>,
}

impl ResamplePools {
    pub fn validate(&self, needs_loh: bool) -> Result<()> {
        if self.non_loh.is_empty() {
            return Err(Error::Input("resample pool has no non-LOH observations".into()));
        }
        if needs_loh && self.loh.is_empty() {
            return Err(Error::Input("resample pool has no LOH observations".into()));
        }
        Ok(())
    }
}

/// Like [`generate`], but each locus is drawn with replacement from the
/// observed pool of its population; purity, noise and het rate are ignored.
pub fn generate_resampled<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    pools: &ResamplePools,
    rng: &mut R,
) -> Result<LabeledSequence> {
    cfg.validate()?;
    pools.validate(cfg.loh_len > 0)?;
    let truth = cfg.truth();
    let baf = truth
        .iter()
        .map(|&label| {
            let pool = match label {
                Label::NonLoh => &pools.non_loh,
                Label::Loh => &pools.loh,
            };
            pool[rng.random_range(0..pool.len())]
        })
        .collect();
    Ok(LabeledSequence { baf, truth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StudyGrid {
    pub loh_lens: Vec<usize>,
    pub purities: Vec<f64>,
    pub min_lens: Vec<usize>,
}

impl Default for StudyGrid {
    fn default() -> Self {
        StudyGrid { loh_lens: vec![25, 50, 100], purities: vec![1.0, 0.79, 0.5], min_lens: vec![10, 25, 50] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StudyConfig {
    pub grid: StudyGrid,
    pub replicates: usize,
    /// Geometry and generator settings; `loh_len`, `purity` and `seed` are
    /// overridden per cell.
    pub scenario: ScenarioConfig,
    /// `min_len` and `seed` are overridden per cell.
    pub segmenter: SegmenterConfig,
    /// Length of the pure non-LOH training sequence; defaults to the
    /// scenario length.
    pub training_len: Option<usize>,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            grid: StudyGrid::default(),
            replicates: 100,
            scenario: ScenarioConfig::default(),
            segmenter: SegmenterConfig::default(),
            training_len: None,
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.loh_lens.is_empty() || g.purities.is_empty() || g.min_lens.is_empty() {
            return Err(Error::Validation("study grid must have at least one value on every axis".into()));
        }
        if self.replicates < 1 {
            return Err(Error::Validation("replicates must be >= 1".into()));
        }
        for &l in &g.loh_lens {
            for &p in &g.purities {
                ScenarioConfig { loh_len: l, purity: p, ..self.scenario.clone() }.validate()?;
            }
        }
        for &m in &g.min_lens {
            SegmenterConfig { min_len: m, ..self.segmenter.clone() }.validate()?;
        }
        Ok(())
    }

    fn cell_seed(&self, loh_len: usize, purity: f64, min_len: usize) -> u64 {
        mix(mix(mix(self.seed, loh_len as u64), purity.to_bits()), min_len as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CellResult {
    pub loh_len: usize,
    pub purity: f64,
    pub min_len: usize,
    pub replicates: usize,
    pub mean_sensitivity: Option<f64>,
    pub mean_specificity: Option<f64>,
    pub sd_sensitivity: Option<f64>,
    pub sd_specificity: Option<f64>,
    pub model: MixtureModel,
    pub thresholds: Thresholds,
    pub counts: Vec<ConfusionCounts>,
}

impl CellResult {
    /// Standard error of the mean sensitivity.
    pub fn se_sensitivity(&self) -> Option<f64> {
        self.sd_sensitivity.map(|s| s / (self.replicates as f64).sqrt())
    }

    pub fn se_specificity(&self) -> Option<f64> {
        self.sd_specificity.map(|s| s / (self.replicates as f64).sqrt())
    }
}

fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return (values.len() == 1).then_some(0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt())
}

/// Per-replicate metric means and sample standard deviations from stored
/// confusion counts.
pub fn summarize(counts: &[ConfusionCounts]) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    let ms: Vec<_> = counts.iter().map(metrics).collect();
    let sens: Vec<f64> = ms.iter().filter_map(|m| m.sensitivity).collect();
    let spec: Vec<f64> = ms.iter().filter_map(|m| m.specificity).collect();
    (
        mean_defined(sens.iter().copied().map(Some)),
        mean_defined(spec.iter().copied().map(Some)),
        sample_sd(&sens),
        sample_sd(&spec),
    )
}

/// Runs one grid cell: fit on a fresh training sequence, calibrate once,
/// then generate, segment and score every replicate.
pub fn run_cell(cfg: &StudyConfig, loh_len: usize, purity: f64, min_len: usize) -> Result<CellResult> {
    let cell_seed = cfg.cell_seed(loh_len, purity, min_len);
    let train_cfg = ScenarioConfig {
        total_len: cfg.training_len.unwrap_or(cfg.scenario.total_len),
        loh_start: 0,
        loh_len: 0,
        purity,
        seed: cell_seed,
        ..cfg.scenario.clone()
    };
    let training = generate(&train_cfg, &mut substream(cell_seed, 0))?;
    let fit = fit_em(&tbaf_transform(&training.baf)?, &EmConfig::default())?;

    let seg_cfg = SegmenterConfig { min_len, seed: mix(cell_seed, 1), ..cfg.segmenter.clone() };
    let models = ModelPair::new(&fit.model, seg_cfg.delta)?;
    let thresholds = calibrate(&models, &seg_cfg)?;

    let scenario = ScenarioConfig { loh_len, purity, seed: cell_seed, ..cfg.scenario.clone() };
    let counts = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seq = generate(&scenario, &mut substream(cell_seed, 2 + r))?;
            let y = tbaf_transform(&seq.baf)?;
            let s = segment_with_thresholds(&y, &models, &thresholds, seg_cfg.initial_state)?;
            confusion(&seq.truth, &s)
        })
        .collect::<Result<Vec<_>>>()?;

    let (mean_sensitivity, mean_specificity, sd_sensitivity, sd_specificity) = summarize(&counts);
    Ok(CellResult {
        loh_len,
        purity,
        min_len,
        replicates: cfg.replicates,
        mean_sensitivity,
        mean_specificity,
        sd_sensitivity,
        sd_specificity,
        model: fit.model,
        thresholds,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub cells: Vec<CellResult>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl StudyTable {
    pub fn cell(&self, loh_len: usize, purity: f64, min_len: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.loh_len == loh_len && c.purity == purity && c.min_len == min_len)
    }

    /// One row per cell, grouped by minimum length, then purity, then LOH
    /// length.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("min_len\tpurity\tloh_len\treplicates\tsensitivity\tspecificity\tsd_sensitivity\tsd_specificity\tl0\tl1\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\n",
                c.min_len,
                c.purity,
                c.loh_len,
                c.replicates,
                fmt_opt(c.mean_sensitivity),
                fmt_opt(c.mean_specificity),
                fmt_opt(c.sd_sensitivity),
                fmt_opt(c.sd_specificity),
                c.thresholds.l0,
                c.thresholds.l1,
            ));
        }
        out
    }

    /// Rows (purity, LOH length), one column per minimum length.
    pub fn pivot_tsv(&self, grid: &StudyGrid, sensitivity: bool) -> String {
        let mut out = String::from("purity\tloh_len");
        for m in &grid.min_lens {
            out.push_str(&format!("\tm={m}"));
        }
        out.push('\n');
        for &p in &grid.purities {
            for &l in &grid.loh_lens {
                out.push_str(&format!("{p}\t{l}"));
                for &m in &grid.min_lens {
                    let v = self.cell(l, p, m).and_then(|c| if sensitivity { c.mean_sensitivity } else { c.mean_specificity });
                    out.push_str(&format!("\t{}", v.map_or_else(|| "NA".into(), |x| format!("{x:.2}"))));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Runs every cell of the grid.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyTable> {
    cfg.validate()?;
    let g = &cfg.grid;
    let mut cells = Vec::new();
    for &m in &g.min_lens {
        for &p in &g.purities {
            for &l in &g.loh_lens {
                cells.push(run_cell(cfg, l, p, m)?);
            }
        }
    }
    Ok(StudyTable { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn truth_geometry() {
        let cfg = ScenarioConfig { loh_len: 50, ..Default::default() };
        let s = generate(&cfg, &mut seeded(1)).unwrap();
        assert_eq!(s.baf.len(), 1000);
        let loh: Vec<usize> = s.truth.iter().enumerate().filter(|(_, l)| l.is_positive()).map(|(i, _)| i).collect();
        assert_eq!(loh, (500..550).collect::<Vec<_>>());
        assert!(s.baf.iter().all(|b| (0.0..=1.0).contains(b)));
    }

    #[test]
    fn rejects_bad_geometry() {
        let cfg = ScenarioConfig { loh_start: 990, loh_len: 20, ..Default::default() };
        assert!(generate(&cfg, &mut seeded(1)).is_err());
        let cfg = ScenarioConfig { purity: 0.0, ..Default::default() };
        assert!(generate(&cfg, &mut seeded(1)).is_err());
    }

    #[test]
    fn locus_means_under_purity() {
        let mut rng = seeded(3);
        for _ in 0..200 {
            let m = locus_mean(Label::Loh, 1.0, 1.0, &mut rng);
            assert!(m == 0.0 || m == 1.0);
            let m = locus_mean(Label::Loh, 0.5, 1.0, &mut rng);
            assert!(m == 0.25 || m == 0.75);
            assert_eq!(locus_mean(Label::NonLoh, 0.5, 1.0, &mut rng), 0.5);
            let m = locus_mean(Label::NonLoh, 0.5, 0.0, &mut rng);
            assert!(m == 0.0 || m == 1.0);
        }
    }

    #[test]
    fn half_purity_loh_sits_mid_band() {
        let cfg = ScenarioConfig { total_len: 20_000, loh_start: 0, loh_len: 20_000, purity: 0.5, het_rate: 1.0, ..Default::default() };
        let s = generate(&cfg, &mut seeded(4)).unwrap();
        let t = tbaf_transform(&s.baf).unwrap();
        let mean = t.values().iter().sum::<f64>() / t.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn heterozygote_fraction() {
        let n = 100_000;
        let cfg = ScenarioConfig { total_len: n, loh_start: 0, loh_len: 0, noise_sd: 0.03, ..Default::default() };
        let s = generate(&cfg, &mut seeded(5)).unwrap();
        // heterozygous loci land within 0.3 of 0.5; homozygous near 0/1
        let het = s.baf.iter().filter(|&&b| (b - 0.5).abs() < 0.3).count() as f64 / n as f64;
        let se = (0.33f64 * 0.67 / n as f64).sqrt();
        assert!((het - 0.33).abs() < 3.0 * se, "{het}");
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ScenarioConfig::default();
        assert_eq!(generate(&cfg, &mut seeded(9)).unwrap(), generate(&cfg, &mut seeded(9)).unwrap());
    }

    #[test]
    fn resampling_uses_pools() {
        let pools = ResamplePools { non_loh: vec![0.5, 0.45], loh: vec![1.0] };
        let cfg = ScenarioConfig { total_len: 100, loh_start: 10, loh_len: 20, ..Default::default() };
        let s = generate_resampled(&cfg, &pools, &mut seeded(2)).unwrap();
        for (b, t) in s.baf.iter().zip(&s.truth) {
            match t {
                Label::Loh => assert_eq!(*b, 1.0),
                Label::NonLoh => assert!(*b == 0.5 || *b == 0.45),
            }
        }
        let empty = ResamplePools { non_loh: vec![0.5], loh: vec![] };
        assert!(generate_resampled(&cfg, &empty, &mut seeded(2)).is_err());
    }

    #[test]
    fn single_cell_smoke() {
        let cfg = StudyConfig {
            grid: StudyGrid { loh_lens: vec![50], purities: vec![1.0], min_lens: vec![10] },
            replicates: 1,
            segmenter: SegmenterConfig { n_sim: 500, ..Default::default() },
            ..Default::default()
        };
        let t = run_study(&cfg).unwrap();
        assert_eq!(t.cells.len(), 1);
        let c = &t.cells[0];
        for v in [c.mean_sensitivity, c.mean_specificity].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(t.to_tsv().lines().count(), 2);
    }

    #[test]
    fn empty_grid_rejected() {
        let cfg = StudyConfig { grid: StudyGrid { loh_lens: vec![], ..Default::default() }, ..Default::default() };
        assert!(run_study(&cfg).is_err());
    }

    #[test]
    fn cell_means_recompute_from_counts() {
        let cfg = StudyConfig {
            grid: StudyGrid { loh_lens: vec![100], purities: vec![0.79], min_lens: vec![10] },
            replicates: 20,
            segmenter: SegmenterConfig { n_sim: 1000, ..Default::default() },
            ..Default::default()
        };
        let t = run_study(&cfg).unwrap();
        let c = &t.cells[0];
        let sens: Vec<f64> = c.counts.iter().map(|k| k.tp as f64 / (k.tp + k.fn_) as f64).collect();
        let spec: Vec<f64> = c.counts.iter().map(|k| k.tn as f64 / (k.tn + k.fp) as f64).collect();
        let ms = sens.iter().sum::<f64>() / sens.len() as f64;
        let mp = spec.iter().sum::<f64>() / spec.len() as f64;
        assert!((ms - c.mean_sensitivity.unwrap()).abs() <= 1e-12);
        assert!((mp - c.mean_specificity.unwrap()).abs() <= 1e-12);
    }
}
