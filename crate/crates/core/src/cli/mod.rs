//! The `lohcusum` command-line tool.
//!
//! Every command writes a [`RunManifest`] next to its output (or to stderr
//! when the output goes to stdout). `lohcusum replay MANIFEST --check` re-runs
//! a recorded command and verifies that every output is byte-identical.
//!
//! Exit status: 0 on success, 2 for usage and validation errors, 1 for
//! computation errors.

pub mod input;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::cusum::{calibrate, segment_with_thresholds, Label, ModelPair, Segment, SegmenterConfig, Segmentation, Thresholds};
use crate::error::{Error, Result};
use crate::estimation::{fit_em, EmConfig};
use crate::evaluate::compare_many;
use crate::model::{tbaf_transform_with, MixtureModel, SNAP_EPS};
use crate::rng::seeded;
use crate::simulate::{generate, generate_resampled, run_study, ScenarioConfig, StudyConfig, StudyGrid};

use self::input::{parse_labels, parse_pools, parse_segmentation, read_baf_file};
use self::manifest::{FileDigest, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "lohcusum", version, about = "CUSUM detection of copy-neutral LOH in B-allele frequencies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the non-LOH mixture model on a training segment.
    Fit(FitArgs),
    /// Calibrate the two alarm thresholds for a model.
    Calibrate(CalibrateArgs),
    /// Segment a BAF sequence into NonLOH / LOH regions.
    Segment(SegmentArgs),
    /// Emit one synthetic labelled BAF sequence.
    Simulate(SimulateArgs),
    /// Run the sensitivity / specificity study over a parameter grid.
    Study(StudyArgs),
    /// Score segmentations against reference labels.
    Evaluate(EvaluateArgs),
    /// Re-run a command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest file (default: `<out>.manifest.json`, or stderr).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegFlags {
    /// Lower-band weight ratio of the LOH model to the non-LOH model, in [0, 1).
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub delta: f64,
    /// Tolerance level for alarms on changes shorter than the minimum length.
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Number of Monte-Carlo replicates per threshold.
    #[arg(long, default_value_t = 10_000)]
    pub nsim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Training rows as `START-END`, 0-based inclusive (default: all rows).
    #[arg(long)]
    pub train_range: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub ll_tol: f64,
    #[arg(long, default_value_t = SNAP_EPS)]
    pub snap_eps: f64,
    /// Fit report (iterations, log-likelihood trace) as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub min_len: usize,
    #[command(flatten)]
    pub seg: SegFlags,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub min_len: usize,
    #[command(flatten)]
    pub seg: SegFlags,
    /// State assumed at the start of every chromosome.
    #[arg(long, default_value = "NonLOH")]
    pub initial_state: Label,
    /// Precomputed thresholds (JSON `{"l0": .., "l1": ..}`); skips calibration.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(long, default_value_t = SNAP_EPS)]
    pub snap_eps: f64,
    /// Plot-ready per-observation TSV (`index chrom pos tbaf label`).
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScenarioFlags {
    #[arg(long, default_value_t = 1000)]
    pub total_len: usize,
    #[arg(long, default_value_t = 500)]
    pub loh_start: usize,
    #[arg(long, default_value_t = 0.03)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.33)]
    pub het_rate: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    pub loh_len: usize,
    #[arg(long, default_value_t = 1.0)]
    pub purity: f64,
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw loci with replacement from observed BAF pools
    /// (TSV `population baf`, population NonLOH/LOH).
    #[arg(long)]
    pub resample: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![25usize, 50, 100])]
    pub loh_lens: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0f64, 0.79, 0.5])]
    pub purities: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10usize, 25, 50])]
    pub min_lens: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Training sequence length (default: the scenario length).
    #[arg(long)]
    pub train_len: Option<usize>,
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    #[command(flatten)]
    pub seg: SegFlags,
    /// Full results, including per-replicate counts, as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Sensitivity and specificity tables (rows purity x LOH length, one
    /// column per minimum length).
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference label file(s): TSV `index label` with 0/1 labels.
    #[arg(long, required = true)]
    pub truth: Vec<PathBuf>,
    /// Segmentation TSV(s), paired with `--truth` in order.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Fail unless every output is byte-identical to the recorded digests.
    #[arg(long)]
    pub check: bool,
}

/// Collects what a command read and wrote.
struct Run {
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Run {
    fn new() -> Self {
        Run { inputs: Vec::new(), outputs: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(FileDigest { path: path.to_path_buf(), sha256: manifest::sha256_hex(&bytes) });
        String::from_utf8(bytes).map_err(|_| Error::Input(format!("{} is not UTF-8 text", path.display())))
    }

    fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    fn write(&mut self, path: Option<&Path>, contents: &str) -> Result<()> {
        match path {
            Some(p) => {
                std::fs::write(p, contents)?;
                self.outputs.push(FileDigest { path: p.to_path_buf(), sha256: manifest::sha256_hex(contents.as_bytes()) });
            }
            None => print!("{contents}"),
        }
        Ok(())
    }
}

fn parse_range(s: &str, n: usize) -> Result<std::ops::Range<usize>> {
    let bad = || Error::Validation(format!("train range '{s}' must be START-END with 0 <= START <= END < {n}"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let start: usize = a.trim().parse().map_err(|_| bad())?;
    let end: usize = b.trim().parse().map_err(|_| bad())?;
    if start > end || end >= n {
        return Err(bad());
    }
    Ok(start..end + 1)
}

fn read_model(run: &mut Run, path: &Path) -> Result<MixtureModel> {
    MixtureModel::from_json(&run.read(path)?)
}

fn seg_config(flags: &SegFlags, min_len: usize, initial_state: Label) -> Result<SegmenterConfig> {
    let cfg = SegmenterConfig {
        delta: flags.delta,
        tol_a: flags.alpha,
        min_len,
        n_sim: flags.nsim,
        seed: flags.seed,
        initial_state,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fit(a: &FitArgs, run: &mut Run) -> Result<(serde_json::Value, Option<u64>)> {
    let em = EmConfig { max_iter: a.max_iter, ll_tol: a.ll_tol, init: None };
    em.validate()?;
    run.record_input(&a.input)?;
    let baf = read_baf_file(&a.input, a.snap_eps)?;
    let range = match &a.train_range {
        Some(r) => parse_range(r, baf.len())?,
        None => 0..baf.len(),
    };
    let y = tbaf_transform_with(&baf.values[range.clone()], a.snap_eps)?;
    let report = fit_em(&y, &em)?;
    run.write(a.output.out.as_deref(), &format!("{}\n", report.model.to_json()))?;
    let summary = json!({
        "iterations": report.iterations,
        "converged": report.converged,
        "finalLogLik": report.final_log_lik(),
        "nObs": y.len(),
    });
    match &a.report {
        Some(p) => run.write(Some(p), &format!("{}\n", serde_json::to_string_pretty(&report)?))?,
        None => eprintln!("fit: {summary}"),
    }
    let config = json!({
        "trainRange": [range.start, range.end - 1],
        "maxIter": a.max_iter,
        "llTol": a.ll_tol,
        "snapEps": a.snap_eps,
        "fit": summary,
    });
    Ok((config, None))
}

fn cmd_calibrate(a: &CalibrateArgs, run: &mut Run) -> Result<(serde_json::Value, Option<u64>)> {
    let cfg = seg_config(&a.seg, a.min_len, Label::NonLoh)?;
    let model = read_model(run, &a.model)?;
    let models = ModelPair::new(&model, cfg.delta)?;
    let th = calibrate(&models, &cfg)?;
    run.write(a.output.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&th)?))?;
    Ok((serde_json::to_value(&cfg)?, Some(cfg.seed)))
}

fn cmd_segment(a: &SegmentArgs, run: &mut Run) -> Result<(serde_json::Value, Option<u64>)> {
    let cfg = seg_config(&a.seg, a.min_len, a.initial_state)?;
    let model = read_model(run, &a.model)?;
    let models = ModelPair::new(&model, cfg.delta)?;
    run.record_input(&a.input)?;
    let baf = read_baf_file(&a.input, a.snap_eps)?;
    if baf.is_empty() {
        return Err(Error::Input(format!("{} holds no BAF values", a.input.display())));
    }
    let y = tbaf_transform_with(&baf.values, a.snap_eps)?;
    let thresholds = match &a.thresholds {
        Some(p) => {
            let th: Thresholds = serde_json::from_str(&run.read(p)?)?;
            th.validate()?;
            th
        }
        None => calibrate(&models, &cfg)?,
    };

    let mut segments: Vec<Segment> = Vec::new();
    for (_, rows) in baf.chrom_blocks() {
        let part = y.slice(rows.start, rows.end);
        let s = segment_with_thresholds(&part, &models, &thresholds, cfg.initial_state)?;
        segments.extend(s.segments.into_iter().map(|seg| Segment {
            start: seg.start + rows.start,
            end: seg.end + rows.start,
            label: seg.label,
        }));
    }
    let result = Segmentation::from_segments(segments);
    run.write(a.output.out.as_deref(), &result.to_tsv())?;

    if let Some(p) = &a.plot {
        let labels = result.labels();
        let mut out = String::from("index\tchrom\tpos\ttbaf\tlabel\n");
        for (i, (v, l)) in y.values().iter().zip(&labels).enumerate() {
            let chrom = baf.chroms.as_ref().map_or(".", |c| c[i].as_str());
            let pos = baf.positions.as_ref().map_or_else(|| ".".to_string(), |p| p[i].to_string());
            out.push_str(&format!("{i}\t{chrom}\t{pos}\t{v}\t{l}\n"));
        }
        run.write(Some(p), &out)?;
    }

    let config = json!({
        "segmenter": cfg,
        "thresholds": thresholds,
        "snapEps": a.snap_eps,
        "nObs": y.len(),
        "nSegments": result.segments.len(),
    });
    Ok((config, Some(cfg.seed)))
}

fn scenario(flags: &ScenarioFlags, loh_len: usize, purity: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        total_len: flags.total_len,
        loh_start: flags.loh_start,
        loh_len,
        purity,
        noise_sd: flags.noise_sd,
        het_rate: flags.het_rate,
        seed,
    }
}

fn cmd_simulate(a: &SimulateArgs, run: &mut Run) -> Result<(serde_json::Value, Option<u64>)> {
    let cfg = scenario(&a.scenario, a.loh_len, a.purity, a.seed);
    cfg.validate()?;
    let mut rng = seeded(a.seed);
    let seq = match &a.resample {
        Some(p) => {
            let pools = parse_pools(&run.read(p)?)?;
            generate_resampled(&cfg, &pools, &mut rng)?
        }
        None => generate(&cfg, &mut rng)?,
    };
    run.write(a.output.out.as_deref(), &seq.to_tsv())?;
    Ok((json!({ "scenario": cfg, "resample": a.resample }), Some(a.seed)))
}

fn cmd_study(a: &StudyArgs, run: &mut Run) -> Result<(serde_json::Value, Option<u64>)> {
    let cfg = StudyConfig {
        grid: StudyGrid { loh_lens: a.loh_lens.clone(), purities: a.purities.clone(), min_lens: a.min_lens.clone() },
        replicates: a.replicates,
        scenario: scenario(&a.scenario, 0, 1.0, a.seg.seed),
        segmenter: SegmenterConfig {
            delta: a.seg.delta,
            tol_a: a.seg.alpha,
            n_sim: a.seg.nsim,
            seed: a.seg.seed,
            ..Default::default()
        },
        training_len: a.train_len,
        seed: a.seg.seed,
    };
    cfg.validate()?;
    let table = run_study(&cfg)?;
    run.write(a.output.out.as_deref(), &table.to_tsv())?;
    if let Some(p) = &a.json {
        run.write(Some(p), &format!("{}\n", serde_json::to_string_pretty(&table)?))?;
    }
    if let Some(p) = &a.tables {
        let text = format!(
            "# sensitivity\n{}\n# specificity\n{}",
            table.pivot_tsv(&cfg.grid, true),
            table.pivot_tsv(&cfg.grid, false)
        );
        run.write(Some(p), &text)?;
    }
    Ok((serde_json::to_value(&cfg)?, Some(cfg.seed)))
}

fn cmd_evaluate(a: &EvaluateArgs, run: &mut Run) -> Result<(serde_json::Value, Option<u64>)> {
    if a.truth.len() != a.pred.len() {
        return Err(Error::Validation(format!(
            "{} --truth files but {} --pred files",
            a.truth.len(),
            a.pred.len()
        )));
    }
    let mut inputs = Vec::new();
    for (t, p) in a.truth.iter().zip(&a.pred) {
        let gold = parse_labels(&run.read(t)?)?;
        let pred = parse_segmentation(&run.read(p)?)?;
        inputs.push((p.display().to_string(), gold, pred));
    }
    let cmp = compare_many(&inputs)?;
    run.write(a.output.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&cmp)?))?;
    Ok((json!({ "pairs": a.truth.len() }), None))
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    std::env::set_current_dir(&recorded.cwd)?;
    for input in &recorded.inputs {
        let now = manifest::sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(Error::Validation(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let mut argv = vec![recorded.tool.clone()];
    argv.extend(recorded.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::Validation(format!("recorded arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Validation("cannot replay a replay".into()));
    }
    execute(cli, recorded.args.clone())?;
    if a.check {
        for out in &recorded.outputs {
            let now = manifest::sha256_file(&out.path)?;
            if now != out.sha256 {
                return Err(Error::Validation(format!("output {} differs from the recorded run", out.path.display())));
            }
        }
        eprintln!("replay: {} output(s) byte-identical", recorded.outputs.len());
    }
    Ok(())
}

fn execute(cli: Cli, args: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let mut run = Run::new();
    let (name, output, result) = match &cli.command {
        Command::Fit(a) => ("fit", &a.output, cmd_fit(a, &mut run)),
        Command::Calibrate(a) => ("calibrate", &a.output, cmd_calibrate(a, &mut run)),
        Command::Segment(a) => ("segment", &a.output, cmd_segment(a, &mut run)),
        Command::Simulate(a) => ("simulate", &a.output, cmd_simulate(a, &mut run)),
        Command::Study(a) => ("study", &a.output, cmd_study(a, &mut run)),
        Command::Evaluate(a) => ("evaluate", &a.output, cmd_evaluate(a, &mut run)),
        Command::Replay(a) => return cmd_replay(a),
    };
    let (config, seed) = result?;
    let manifest = RunManifest {
        tool: "lohcusum".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        args,
        cwd: std::env::current_dir()?,
        seed,
        config,
        inputs: run.inputs,
        outputs: run.outputs,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    let target = output.manifest.clone().or_else(|| {
        output.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    match target {
        Some(p) => std::fs::write(p, format!("{}\n", manifest.to_json()))?,
        None => eprintln!("{}", manifest.to_json()),
    }
    Ok(())
}

/// Runs the tool on `argv` (program name first) and returns the exit status.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let args = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
