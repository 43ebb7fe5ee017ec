//! File formats: TOML configuration and scene files, interleaved I/Q sample
//! files with a text sidecar, the binary coefficient blob, and CSV exports.
//!
//! Coefficient blob layout (all little-endian):
//!
//! ```text
//! magic     b"SNCS"
//! version   u32 (= 1)
//! M, K, Q   u32 each
//! N         u32 (Nyquist coefficients per channel)
//! tx        M × u32  transmitter index of each matrix
//! rx        Q × u32  receiver index of each column
//! kappa     K × u32
//! payload   M matrices, each K×Q row-major complex64 (f32 re, f32 im)
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{build_mode, ArrayConfig, ArrayMode, AzimuthGrid, DEFAULT_WAVELENGTH};
use crate::harness::experiment::{ExperimentConfig, Profile, SceneSpec, Setup};
use crate::recovery::{RangeGrid, SparseEstimate, DEFAULT_RESIDUAL_TOL};
use crate::scene::{Scene, Target};
use crate::waveform::{
    build_cognitive_plan, build_fdm_plan, prototype_subbands, CognitivePlan, SpectralPhase, Subband,
};
use crate::xampler::{AdcConfig, CoefficientSet, KappaSet};

const BLOB_MAGIC: &[u8; 4] = b"SNCS";
const BLOB_VERSION: u32 = 1;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// A target as written in scene files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub range_m: f64,
    pub sin_doa: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

fn one() -> f64 {
    1.0
}

impl TargetRecord {
    pub fn to_target(&self) -> Target {
        Target::from_range(self.range_m, self.sin_doa, self.amplitude, self.phase_deg)
    }

    pub fn from_target(t: &Target) -> Self {
        TargetRecord {
            range_m: t.range_m(),
            sin_doa: t.sin_doa,
            amplitude: t.amplitude.norm(),
            phase_deg: t.amplitude.arg().to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default, rename = "target")]
    pub targets: Vec<TargetRecord>,
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let file: SceneFile = parse_toml(&read_text(path)?, path)?;
    Ok(Scene::new(file.targets.iter().map(TargetRecord::to_target).collect()))
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    let file = SceneFile {
        targets: scene.targets.iter().map(TargetRecord::from_target).collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
    write_text(path, &text)
}

/// `[array]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySection {
    pub mode: ArrayMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
    /// Explicit layout in half-wavelength slots, overriding the seeded one.
    #[serde(default)]
    pub tx_positions: Option<Vec<usize>>,
    #[serde(default)]
    pub rx_positions: Option<Vec<usize>>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

impl ArraySection {
    pub fn build(&self) -> Result<ArrayConfig> {
        let mut cfg = build_mode(self.mode, self.seed);
        cfg.wavelength = self.wavelength_m;
        if let Some(tx) = &self.tx_positions {
            cfg.tx_positions = tx.clone();
        }
        if let Some(rx) = &self.rx_positions {
            cfg.rx_positions = rx.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &ArrayConfig) -> Self {
        ArraySection {
            mode: cfg.mode,
            seed: cfg.seed,
            wavelength_m: cfg.wavelength,
            tx_positions: Some(cfg.tx_positions.clone()),
            rx_positions: Some(cfg.rx_positions.clone()),
        }
    }
}

/// `[waveform]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSection {
    #[serde(default = "d_spacing")]
    pub channel_spacing_hz: f64,
    #[serde(default = "d_band")]
    pub signal_band_hz: f64,
    #[serde(default = "d_guard")]
    pub guard_hz: f64,
    #[serde(default = "d_pri")]
    pub pri_s: f64,
    #[serde(default = "d_width")]
    pub pulse_width_s: f64,
    #[serde(default = "one")]
    pub total_power_w: f64,
    #[serde(default = "yes")]
    pub cognitive: bool,
    /// `[lo, hi]` pairs in Hz within a channel; defaults to the prototype slices.
    #[serde(default)]
    pub subbands_hz: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub phase: SpectralPhase,
}

fn d_spacing() -> f64 {
    15e6
}
fn d_band() -> f64 {
    12e6
}
fn d_guard() -> f64 {
    3e6
}
fn d_pri() -> f64 {
    100e-6
}
fn d_width() -> f64 {
    4.2e-6
}
fn yes() -> bool {
    true
}

impl Default for WaveformSection {
    fn default() -> Self {
        WaveformSection {
            channel_spacing_hz: d_spacing(),
            signal_band_hz: d_band(),
            guard_hz: d_guard(),
            pri_s: d_pri(),
            pulse_width_s: d_width(),
            total_power_w: 1.0,
            cognitive: true,
            subbands_hz: None,
            phase: SpectralPhase::default(),
        }
    }
}

impl WaveformSection {
    pub fn build(&self, num_tx: usize) -> Result<CognitivePlan> {
        let base = build_fdm_plan(
            num_tx,
            self.channel_spacing_hz,
            self.signal_band_hz,
            self.guard_hz,
            self.pri_s,
            self.pulse_width_s,
        )?;
        let plan = if self.cognitive {
            let slices = match &self.subbands_hz {
                Some(list) => list.iter().map(|&[lo, hi]| Subband::new(lo, hi)).collect(),
                None => prototype_subbands(),
            };
            build_cognitive_plan(base, slices, self.total_power_w)?
        } else {
            base.conventional(self.total_power_w)
        };
        Ok(plan.with_phase(self.phase))
    }
}

/// `[receiver]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSection {
    #[serde(default = "d_adc")]
    pub adc_rate_hz: f64,
    /// Full-rate synthesis rate; defaults to `M × channel spacing`.
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
}

fn d_adc() -> f64 {
    7.5e6
}

impl Default for ReceiverSection {
    fn default() -> Self {
        ReceiverSection {
            adc_rate_hz: d_adc(),
            sample_rate_hz: None,
        }
    }
}

/// `[recovery]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySection {
    #[serde(default)]
    pub profile: Profile,
    /// Overrides the profile's range-cell count.
    #[serde(default)]
    pub range_cells: Option<usize>,
    #[serde(default)]
    pub max_targets: Option<usize>,
    #[serde(default = "d_tol")]
    pub residual_tol: f64,
}

fn d_tol() -> f64 {
    DEFAULT_RESIDUAL_TOL
}

impl Default for RecoverySection {
    fn default() -> Self {
        RecoverySection {
            profile: Profile::Desk,
            range_cells: None,
            max_targets: None,
            residual_tol: d_tol(),
        }
    }
}

/// `[experiment]` section; the array mode comes from `[array]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub scene: SceneSpec,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn d_trials() -> usize {
    1
}

/// Whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolkitConfig {
    pub array: ArraySection,
    #[serde(default)]
    pub waveform: WaveformSection,
    #[serde(default)]
    pub receiver: ReceiverSection,
    #[serde(default)]
    pub recovery: RecoverySection,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        parse_toml(&read_text(path)?, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn setup(&self) -> Result<Setup> {
        let array = self.array.build()?;
        let plan = self.waveform.build(array.num_tx)?;
        let adc = AdcConfig::new(self.receiver.adc_rate_hz, plan.base.channel_spacing)?;
        let cells = self
            .recovery
            .range_cells
            .unwrap_or(self.recovery.profile.range_cells());
        let mut setup = Setup::from_parts(array, plan, adc, cells)?;
        if let Some(rate) = self.receiver.sample_rate_hz {
            setup.sample_rate = rate;
        }
        Ok(setup)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let exp = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
        Ok(ExperimentConfig {
            mode: self.array.mode,
            profile: self.recovery.profile,
            scene: exp.scene.clone(),
            snr_db: exp.snr_db,
            trials: exp.trials,
            seed: exp.seed,
            array_seed: Some(self.array.seed),
            max_targets: self.recovery.max_targets,
            residual_tol: self.recovery.residual_tol,
        })
    }
}

/// Short content hash identifying a transmit plan.
pub fn plan_hash(plan: &CognitivePlan) -> String {
    let json = serde_json::to_string(plan).expect("plan serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Sidecar header for an I/Q file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqHeader {
    /// `"pulse"` (index is the transmitter) or `"received"` (index is the receiver).
    pub kind: String,
    pub index: usize,
    pub sample_rate: f64,
    pub pri: f64,
    pub samples: usize,
    pub plan_hash: String,
}

pub fn header_path(iq_path: &Path) -> PathBuf {
    iq_path.with_extension("hdr")
}

/// Writes interleaved little-endian `f32` I/Q samples plus a text header.
pub fn write_iq(path: &Path, samples: &[Complex64], header: &IqHeader) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        w.write_f32::<LittleEndian>(s.re as f32)
            .and_then(|_| w.write_f32::<LittleEndian>(s.im as f32))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let hdr = header_path(path);
    let text = toml::to_string(header).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&hdr, &text)
}

pub fn read_iq(path: &Path) -> Result<(Vec<Complex64>, IqHeader)> {
    let hdr_path = header_path(path);
    let header: IqHeader = parse_toml(&read_text(&hdr_path)?, &hdr_path)?;
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != header.samples * 8 {
        return Err(Error::Format(format!(
            "{}: expected {} samples, found {} bytes",
            path.display(),
            header.samples,
            bytes.len()
        )));
    }
    let mut r = &bytes[..];
    let mut out = Vec::with_capacity(header.samples);
    for _ in 0..header.samples {
        let re = r.read_f32::<LittleEndian>().map_err(|e| Error::io(path, e))?;
        let im = r.read_f32::<LittleEndian>().map_err(|e| Error::io(path, e))?;
        out.push(Complex64::new(f64::from(re), f64::from(im)));
    }
    Ok((out, header))
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn write_coefficients(path: &Path, y: &CoefficientSet) -> Result<()> {
    y.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(BLOB_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(BLOB_VERSION).map_err(io)?;
    for v in [y.num_tx(), y.kappa.len(), y.num_rx(), y.kappa.per_channel_n] {
        w.write_u32::<LittleEndian>(u32_of(v, "dimension")?).map_err(io)?;
    }
    for &v in y.tx_indices.iter().chain(&y.rx_indices).chain(&y.kappa.indices) {
        w.write_u32::<LittleEndian>(u32_of(v, "index")?).map_err(io)?;
    }
    for m in &y.matrices {
        for i in 0..m.nrows() {
            for q in 0..m.ncols() {
                let v = m[(i, q)];
                w.write_f32::<LittleEndian>(v.re as f32).map_err(io)?;
                w.write_f32::<LittleEndian>(v.im as f32).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn read_coefficients(path: &Path) -> Result<CoefficientSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != BLOB_MAGIC {
        return Err(Error::Format(format!("{}: not a coefficient blob", path.display())));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != BLOB_VERSION {
        return Err(Error::Format(format!("unsupported blob version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>().map_err(io)? as usize;
    }
    let [m, k, q, n] = dims;
    let mut read_list = |len: usize| -> Result<Vec<usize>> {
        (0..len)
            .map(|_| r.read_u32::<LittleEndian>().map(|v| v as usize).map_err(io))
            .collect()
    };
    let tx = read_list(m)?;
    let rx = read_list(q)?;
    let kappa = KappaSet::new(read_list(k)?, n)?;
    let mut matrices = Vec::with_capacity(m);
    for _ in 0..m {
        let mut mat = DMatrix::<Complex64>::zeros(k, q);
        for i in 0..k {
            for j in 0..q {
                let re = r.read_f32::<LittleEndian>().map_err(io)?;
                let im = r.read_f32::<LittleEndian>().map_err(io)?;
                mat[(i, j)] = Complex64::new(f64::from(re), f64::from(im));
            }
        }
        matrices.push(mat);
    }
    let y = CoefficientSet {
        matrices,
        kappa,
        tx_indices: tx,
        rx_indices: rx,
    };
    y.validate()?;
    Ok(y)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// Long-format CSV of every coefficient.
pub fn write_coefficients_csv(path: &Path, y: &CoefficientSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["tx", "rx", "k", "re", "im"]).map_err(csv_err(path))?;
    for (mat, &m) in y.matrices.iter().zip(&y.tx_indices) {
        for (i, &k) in y.kappa.indices.iter().enumerate() {
            for (j, &q) in y.rx_indices.iter().enumerate() {
                let v = mat[(i, j)];
                w.write_record([
                    m.to_string(),
                    q.to_string(),
                    k.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EstimateRow {
    n: usize,
    p: usize,
    range_m: f64,
    sin_doa: f64,
    re: f64,
    im: f64,
}

pub fn write_estimate_csv(
    path: &Path,
    est: &SparseEstimate,
    rgrid: &RangeGrid,
    agrid: &AzimuthGrid,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for (&(n, p), a) in est.support.iter().zip(&est.amplitudes) {
        w.serialize(EstimateRow {
            n,
            p,
            range_m: rgrid.range_m(n),
            sin_doa: agrid.values[p],
            re: a.re,
            im: a.im,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an estimate CSV. The residual is not stored and reads back as zero.
pub fn read_estimate_csv(path: &Path) -> Result<SparseEstimate> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut support = Vec::new();
    let mut amplitudes = Vec::new();
    for row in r.deserialize::<EstimateRow>() {
        let row = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        support.push((row.n, row.p));
        amplitudes.push(Complex64::new(row.re, row.im));
    }
    Ok(SparseEstimate {
        support,
        amplitudes,
        residual_norm: 0.0,
        residual_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_prototype_defaults() {
        let cfg: ToolkitConfig = toml::from_str("[array]\nmode = \"mode3\"\nseed = 4\n").unwrap();
        let setup = cfg.setup().unwrap();
        assert_eq!(setup.array.num_tx, 4);
        assert_eq!(setup.kappa.len(), 296);
        assert_eq!(setup.rgrid.len(), 300);
        assert_eq!(setup.sample_rate, 60e6);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ToolkitConfig {
            array: ArraySection::from_config(&build_mode(ArrayMode::Mode2Random8x10, 3)),
            waveform: WaveformSection::default(),
            receiver: ReceiverSection::default(),
            recovery: RecoverySection::default(),
            experiment: None,
        };
        let text = cfg.to_toml().unwrap();
        let back: ToolkitConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.array.build().unwrap(), build_mode(ArrayMode::Mode2Random8x10, 3));
    }

    #[test]
    fn invalid_layout_rejected() {
        let cfg: ToolkitConfig =
            toml::from_str("[array]\nmode = \"mode1\"\ntx_positions = [0, 0, 1, 2, 3, 4, 5, 6]\n")
                .unwrap();
        assert!(matches!(cfg.setup(), Err(Error::Config(_))));
    }

    #[test]
    fn plan_hash_tracks_content() {
        let a = WaveformSection::default().build(8).unwrap();
        let b = WaveformSection {
            cognitive: false,
            ..Default::default()
        }
        .build(8)
        .unwrap();
        assert_eq!(plan_hash(&a), plan_hash(&a.clone()));
        assert_ne!(plan_hash(&a), plan_hash(&b));
        assert_eq!(plan_hash(&a).len(), 16);
    }
}
