//! Monte-Carlo detection experiments.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_mode, ArrayConfig, ArrayMode, AzimuthGrid};
use crate::harness::matching::{match_targets, DetectionReport};
use crate::io::TargetRecord;
use crate::recovery::{
    build_dictionaries, matrix_omp, DictionarySet, RangeGrid, SparseEstimate,
    DEFAULT_RESIDUAL_TOL,
};
use crate::scene::{add_noise, synth_received, Scene, Target};
use crate::waveform::{build_cognitive_plan, prototype_subbands, CognitivePlan, FdmPlan, SpectralPhase};
use crate::xampler::{acquire_with_stats, subband_to_kappa, AdcConfig, CoefficientSet, KappaSet};

/// Range-grid fidelity.
///
/// `Full` uses 1.25 m range cells (12000 per PRI). `Desk` keeps the full
/// spectral structure (PRI, channels, slices, `N = 1500`, `K = 296`) but
/// coarsens the range grid to 300 cells of 50 m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Full,
    #[default]
    Desk,
}

impl Profile {
    pub fn range_cells(self) -> usize {
        match self {
            Profile::Full => 12_000,
            Profile::Desk => 300,
        }
    }
}

/// Everything that stays fixed across the trials of one experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub array: ArrayConfig,
    pub plan: CognitivePlan,
    pub adc: AdcConfig,
    pub kappa: KappaSet,
    pub rgrid: RangeGrid,
    pub agrid: AzimuthGrid,
    pub dict: DictionarySet,
    /// Full-rate synthesis sample rate (complex sampling of all channels).
    pub sample_rate: f64,
}

impl Setup {
    /// Prototype setup for `mode`: prototype FDM plan and slices, 7.5 MHz ADC.
    pub fn prototype(mode: ArrayMode, profile: Profile, array_seed: u64) -> Result<Self> {
        let array = build_mode(mode, array_seed);
        let plan = build_cognitive_plan(FdmPlan::prototype(array.num_tx), prototype_subbands(), 1.0)?;
        Self::from_parts(array, plan, AdcConfig::prototype(), profile.range_cells())
    }

    pub fn from_parts(
        array: ArrayConfig,
        plan: CognitivePlan,
        adc: AdcConfig,
        range_cells: usize,
    ) -> Result<Self> {
        let kappa = subband_to_kappa(&plan)?;
        let rgrid = RangeGrid::uniform(plan.base.pri, range_cells);
        let agrid = array.azimuth_grid();
        let dict = build_dictionaries(&array, &plan, &kappa, &rgrid, &agrid)?;
        let sample_rate = plan.base.total_band();
        Ok(Setup {
            array,
            plan,
            adc,
            kappa,
            rgrid,
            agrid,
            dict,
            sample_rate,
        })
    }

    pub fn with_phase(mut self, phase: SpectralPhase) -> Self {
        self.plan.phase = phase;
        self
    }

    /// Synthesizes, adds noise, and acquires all channels for one scene.
    pub fn measure(
        &self,
        scene: &Scene,
        snr_db: Option<f64>,
        noise_seed: u64,
        counts: &mut StageCounts,
    ) -> Result<CoefficientSet> {
        let mut rx = synth_received(scene, &self.array, &self.plan, self.sample_rate)?;
        counts.synthesized += 1;
        if let Some(snr) = snr_db {
            rx = add_noise(&rx, snr, noise_seed)?;
            counts.noised += 1;
        }
        let tx: Vec<usize> = (0..self.array.num_tx).collect();
        let rxs: Vec<usize> = (0..self.array.num_rx).collect();
        let (y, stats) = acquire_with_stats(&rx, &self.plan, &self.adc, &self.kappa, &tx, &rxs)?;
        counts.channelized += stats.channelized;
        counts.subsampled += stats.subsampled;
        counts.extracted += stats.extracted;
        Ok(y)
    }
}

/// How each trial's scene is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneSpec {
    /// The same listed targets in every trial.
    Fixed { targets: Vec<TargetRecord> },
    /// Random on-grid targets with unit magnitude and random phase.
    Random(RandomScene),
    /// Two unit-magnitude targets at equal range, `spacing` apart in sine-DoA.
    Pair(PairScene),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomScene {
    pub count: usize,
    /// Sine-DoA grid the targets are placed on.
    #[serde(default = "default_sin_doa_step")]
    pub sin_doa_step: f64,
    /// Each pair must be this many range cells apart, or ...
    #[serde(default)]
    pub range_cells_apart: usize,
    /// ... at least this far apart in sine-DoA.
    #[serde(default)]
    pub sin_doa_apart: f64,
    /// Minimum sine-DoA spacing between any two targets.
    #[serde(default)]
    pub min_sin_doa_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScene {
    pub spacing: f64,
    #[serde(default = "default_pair_step")]
    pub sin_doa_step: f64,
}

fn default_sin_doa_step() -> f64 {
    0.025
}

fn default_pair_step() -> f64 {
    0.005
}

const GRID_EPS: f64 = 1e-9;
const MAX_DRAWS: usize = 100_000;

fn random_amplitude(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

impl SceneSpec {
    /// Scene for one trial. Depends only on the seed and the range grid, so
    /// every array mode sees the same targets.
    pub fn generate(&self, rgrid: &RangeGrid, seed: u64) -> Result<Scene> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            SceneSpec::Fixed { targets } => {
                Ok(Scene::new(targets.iter().map(TargetRecord::to_target).collect()))
            }
            SceneSpec::Random(spec) => spec.generate(rgrid, &mut rng),
            SceneSpec::Pair(spec) => spec.generate(rgrid, &mut rng),
        }
    }

    /// Number of targets in every generated scene.
    pub fn count(&self) -> usize {
        match self {
            SceneSpec::Fixed { targets } => targets.len(),
            SceneSpec::Random(r) => r.count,
            SceneSpec::Pair(_) => 2,
        }
    }
}

impl RandomScene {
    fn separated(&self, a: (usize, f64), b: (usize, f64)) -> bool {
        let dn = a.0.abs_diff(b.0);
        let dt = (a.1 - b.1).abs();
        if dt < self.min_sin_doa_spacing - GRID_EPS {
            return false;
        }
        if dn == 0 && dt < GRID_EPS {
            return false;
        }
        dn >= self.range_cells_apart || dt >= self.sin_doa_apart - GRID_EPS
    }

    fn generate(&self, rgrid: &RangeGrid, rng: &mut ChaCha8Rng) -> Result<Scene> {
        if !(self.sin_doa_step > 0.0) {
            return Err(Error::Config("sin_doa_step must be positive".into()));
        }
        let bins = (2.0 / self.sin_doa_step).round() as usize;
        let mut cells: Vec<(usize, f64)> = Vec::with_capacity(self.count);
        let mut draws = 0;
        while cells.len() < self.count {
            draws += 1;
            if draws > MAX_DRAWS {
                return Err(Error::Config(format!(
                    "could not place {} targets under the separation constraints",
                    self.count
                )));
            }
            let n = rng.random_range(0..rgrid.len());
            let theta = -1.0 + rng.random_range(0..bins) as f64 * self.sin_doa_step;
            if cells.iter().all(|&c| self.separated(c, (n, theta))) {
                cells.push((n, theta));
            }
        }
        Ok(Scene::new(
            cells
                .into_iter()
                .map(|(n, theta)| Target::new(rgrid.delays[n], theta, random_amplitude(rng)))
                .collect(),
        ))
    }
}

impl PairScene {
    fn generate(&self, rgrid: &RangeGrid, rng: &mut ChaCha8Rng) -> Result<Scene> {
        let bins = (2.0 / self.sin_doa_step).round() as usize;
        let offset = (self.spacing / self.sin_doa_step).round() as usize;
        if offset == 0 || offset >= bins {
            return Err(Error::Config("pair spacing must fit on the sine-DoA grid".into()));
        }
        let n = rng.random_range(0..rgrid.len());
        let p = rng.random_range(0..bins - offset);
        let theta = |p: usize| -1.0 + p as f64 * self.sin_doa_step;
        Ok(Scene::new(vec![
            Target::new(rgrid.delays[n], theta(p), random_amplitude(rng)),
            Target::new(rgrid.delays[n], theta(p + offset), random_amplitude(rng)),
        ]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: ArrayMode,
    #[serde(default)]
    pub profile: Profile,
    pub scene: SceneSpec,
    /// `None` runs noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Layout seed for random arrays; defaults to `seed`.
    #[serde(default)]
    pub array_seed: Option<u64>,
    /// Defaults to the scene size.
    #[serde(default)]
    pub max_targets: Option<usize>,
    #[serde(default = "default_tol")]
    pub residual_tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_RESIDUAL_TOL
}

impl ExperimentConfig {
    pub fn new(mode: ArrayMode, scene: SceneSpec, snr_db: Option<f64>, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            mode,
            profile: Profile::Desk,
            scene,
            snr_db,
            trials,
            seed,
            array_seed: None,
            max_targets: None,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.max_targets == Some(0) {
            return Err(Error::Config("max_targets must be at least 1".into()));
        }
        Ok(())
    }
}

/// How many times each pipeline stage ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub generated: u64,
    pub synthesized: u64,
    pub noised: u64,
    pub channelized: u64,
    pub subsampled: u64,
    pub extracted: u64,
    pub recovered: u64,
    pub matched: u64,
}

impl StageCounts {
    fn add(&mut self, o: &StageCounts) {
        self.generated += o.generated;
        self.synthesized += o.synthesized;
        self.noised += o.noised;
        self.channelized += o.channelized;
        self.subsampled += o.subsampled;
        self.extracted += o.extracted;
        self.recovered += o.recovered;
        self.matched += o.matched;
    }

    /// Names of the stages that ran at least once.
    pub fn exercised(&self) -> Vec<&'static str> {
        [
            ("generated", self.generated),
            ("synthesized", self.synthesized),
            ("noised", self.noised),
            ("channelized", self.channelized),
            ("subsampled", self.subsampled),
            ("extracted", self.extracted),
            ("recovered", self.recovered),
            ("matched", self.matched),
        ]
        .into_iter()
        .filter(|&(_, c)| c > 0)
        .map(|(n, _)| n)
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub num_targets: usize,
    pub num_estimates: usize,
    pub report: DetectionReport,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mode: ArrayMode,
    pub profile: Profile,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub trials: Vec<TrialRecord>,
    /// Hits over truth targets.
    pub detection_rate: f64,
    /// False alarms over estimates.
    pub false_alarm_rate: f64,
    /// Exact-cell hits over truth targets.
    pub strict_rate: f64,
    /// Fraction of trials with every target detected.
    pub all_detected_rate: f64,
    /// Fraction of trials with at least one false alarm or miss.
    pub error_trial_rate: f64,
    pub stage_counts: StageCounts,
}

impl MetricsRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// One row per trial.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,targets,estimates,hits,strict_hits,false_alarms,misses,residual_norm\n");
        for t in &self.trials {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.trial,
                t.num_targets,
                t.num_estimates,
                t.report.hits.len(),
                t.report.strict_hits,
                t.report.false_alarms.len(),
                t.report.misses.len(),
                t.residual_norm
            ));
        }
        s
    }
}

/// Derives an independent stream seed for `(seed, trial, stream)`.
pub fn trial_seed(seed: u64, trial: usize, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SCENE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Output of a single trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub scene: Scene,
    pub estimate: SparseEstimate,
    pub report: DetectionReport,
    pub counts: StageCounts,
}

pub fn run_trial(setup: &Setup, cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let mut counts = StageCounts::default();
    let scene = cfg
        .scene
        .generate(&setup.rgrid, trial_seed(cfg.seed, trial, SCENE_STREAM))?;
    counts.generated += 1;
    let y = setup.measure(
        &scene,
        cfg.snr_db,
        trial_seed(cfg.seed, trial, NOISE_STREAM),
        &mut counts,
    )?;
    let cap = cfg.max_targets.unwrap_or(scene.len().max(1));
    let estimate = matrix_omp(&y, &setup.dict, cap, cfg.residual_tol)?;
    counts.recovered += 1;
    let report = match_targets(&scene, &estimate, &setup.rgrid, &setup.agrid);
    counts.matched += 1;
    Ok(TrialOutcome {
        scene,
        estimate,
        report,
        counts,
    })
}

/// Runs every trial of `cfg` and aggregates the detection metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let setup = Setup::prototype(cfg.mode, cfg.profile, cfg.array_seed.unwrap_or(cfg.seed))?;
    run_experiment_with(&setup, cfg)
}

pub fn run_experiment_with(setup: &Setup, cfg: &ExperimentConfig) -> Result<MetricsRecord> {
    cfg.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(setup, cfg, t))
        .collect::<Result<_>>()?;

    let mut counts = StageCounts::default();
    let mut truths = 0usize;
    let mut estimates = 0usize;
    let mut hits = 0usize;
    let mut strict = 0usize;
    let mut false_alarms = 0usize;
    let mut all_detected = 0usize;
    let mut with_error = 0usize;
    let mut trials = Vec::with_capacity(outcomes.len());
    for (i, o) in outcomes.into_iter().enumerate() {
        counts.add(&o.counts);
        truths += o.scene.len();
        estimates += o.estimate.len();
        hits += o.report.hits.len();
        strict += o.report.strict_hits;
        false_alarms += o.report.false_alarms.len();
        if o.report.misses.is_empty() {
            all_detected += 1;
        }
        if o.report.has_error() {
            with_error += 1;
        }
        trials.push(TrialRecord {
            trial: i,
            num_targets: o.scene.len(),
            num_estimates: o.estimate.len(),
            report: o.report,
            residual_norm: o.estimate.residual_norm,
        });
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let n = trials.len();
    Ok(MetricsRecord {
        mode: cfg.mode,
        profile: cfg.profile,
        seed: cfg.seed,
        snr_db: cfg.snr_db,
        trials,
        detection_rate: ratio(hits, truths),
        false_alarm_rate: ratio(false_alarms, estimates),
        strict_rate: ratio(strict, truths),
        all_detected_rate: ratio(all_detected, n),
        error_trial_rate: ratio(with_error, n),
        stage_counts: counts,
    })
}
