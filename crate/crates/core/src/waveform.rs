//! FDM channel plan, cognitive subband plan, and pulse synthesis.
//!
//! Frequencies are one-sided complex baseband: channel `m` occupies
//! `[m·spacing, (m+1)·spacing)` and its signal band starts at the channel
//! origin. Pulses are built directly in the frequency domain on the DFT grid
//! of one PRI (bin spacing `1/τ`), so their spectral support is exact.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

const BIN_SNAP: f64 = 1e-7;

/// Frequency-division plan for `M` transmitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmPlan {
    pub num_tx: usize,
    /// Channel spacing in Hz (signal band plus guard).
    pub channel_spacing: f64,
    /// Signal bandwidth per transmitter, Hz.
    pub signal_band: f64,
    /// Guard band above each signal band, Hz.
    pub guard: f64,
    /// Pulse repetition interval, seconds.
    pub pri: f64,
    /// Pulse width, seconds.
    pub pulse_width: f64,
}

/// Builds an FDM plan after checking the band arithmetic.
pub fn build_fdm_plan(
    num_tx: usize,
    spacing: f64,
    signal_band: f64,
    guard: f64,
    pri: f64,
    pulse_width: f64,
) -> Result<FdmPlan> {
    if num_tx == 0 {
        return Err(Error::Config("at least one transmitter is required".into()));
    }
    if !(signal_band > 0.0) || guard < 0.0 || !(spacing > 0.0) {
        return Err(Error::Config("bandwidths must be positive".into()));
    }
    if ((signal_band + guard) - spacing).abs() > 1e-9 * spacing {
        return Err(Error::Config(format!(
            "signal band {signal_band} Hz + guard {guard} Hz != channel spacing {spacing} Hz"
        )));
    }
    if !(pulse_width > 0.0) || pulse_width > pri {
        return Err(Error::Config(format!(
            "pulse width {pulse_width} s must lie in (0, PRI = {pri} s]"
        )));
    }
    let bins = spacing * pri;
    if (bins - bins.round()).abs() > BIN_SNAP || bins.round() < 1.0 {
        return Err(Error::Config(format!(
            "channel spacing × PRI = {bins} must be a positive integer bin count"
        )));
    }
    Ok(FdmPlan {
        num_tx,
        channel_spacing: spacing,
        signal_band,
        guard,
        pri,
        pulse_width,
    })
}

impl FdmPlan {
    /// The prototype's channel plan: 15 MHz channels, 12 MHz signal band,
    /// 100 μs PRI, 4.2 μs pulse.
    pub fn prototype(num_tx: usize) -> Self {
        build_fdm_plan(num_tx, 15e6, 12e6, 3e6, 100e-6, 4.2e-6)
            .expect("prototype plan is consistent")
    }

    /// Signal-band centre of channel `m`, `f_m = m·spacing + B_h/2`.
    pub fn carrier(&self, m: usize) -> f64 {
        m as f64 * self.channel_spacing + self.signal_band / 2.0
    }

    pub fn carriers(&self) -> Vec<f64> {
        (0..self.num_tx).map(|m| self.carrier(m)).collect()
    }

    /// Frequency of channel-local bin 0 of channel `m`.
    pub fn channel_origin(&self, m: usize) -> f64 {
        m as f64 * self.channel_spacing
    }

    /// Nyquist-rate Fourier coefficients per channel over one PRI.
    pub fn bins_per_channel(&self) -> usize {
        (self.channel_spacing * self.pri).round() as usize
    }

    pub fn total_band(&self) -> f64 {
        self.num_tx as f64 * self.channel_spacing
    }

    /// Conventional (non-cognitive) transmission over the whole signal band.
    pub fn conventional(&self, total_power: f64) -> CognitivePlan {
        CognitivePlan {
            base: self.clone(),
            subbands: vec![Subband::new(0.0, self.signal_band)],
            gamma: 1.0,
            total_power,
            phase: SpectralPhase::default(),
        }
    }
}

/// A frequency slice `[lo, hi)` given as offsets within one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subband {
    pub lo: f64,
    pub hi: f64,
}

impl Subband {
    pub fn new(lo: f64, hi: f64) -> Self {
        Subband { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Fraction of DFT bin `k` (spanning `[k/τ, (k+1)/τ)`) covered by the slice.
    pub fn bin_coverage(&self, k: usize, pri: f64) -> f64 {
        let lo = snap(self.lo * pri);
        let hi = snap(self.hi * pri);
        let k = k as f64;
        (hi.min(k + 1.0) - lo.max(k)).clamp(0.0, 1.0)
    }

    fn overlaps(&self, other: &Subband) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

/// Rounds values within `BIN_SNAP` of an integer onto it.
pub(crate) fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < BIN_SNAP {
        r
    } else {
        x
    }
}

/// The eight 375 kHz Xampling slices used by the prototype.
pub fn prototype_subbands() -> Vec<Subband> {
    // Lower edges in kHz; integer Hz values keep widths exact.
    const LOWER_EDGES_KHZ: [u32; 8] = [1630, 2160, 3050, 3880, 5660, 6510, 8640, 12320];
    LOWER_EDGES_KHZ
        .iter()
        .map(|&lo| {
            let lo = f64::from(lo) * 1e3;
            Subband::new(lo, lo + 375e3)
        })
        .collect()
}

/// Phase profile across the occupied bins of a pulse spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralPhase {
    /// Quadratic phase whose group delay sweeps the pulse width across the
    /// signal band (a linear FM pulse).
    #[default]
    Chirp,
    /// Independent uniform phases drawn from a seeded generator.
    Random { seed: u64 },
}

/// Transmit plan restricted to a set of disjoint slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitivePlan {
    pub base: FdmPlan,
    pub subbands: Vec<Subband>,
    /// Amplitude scale applied to the in-slice spectrum.
    pub gamma: f64,
    /// Transmit power per PRI (normalized units).
    pub total_power: f64,
    #[serde(default)]
    pub phase: SpectralPhase,
}

/// Builds a cognitive plan. The amplitude scale `γ = sqrt(B_h / Σ|B_i|)`
/// keeps the total transmit power equal to that of the conventional pulse.
pub fn build_cognitive_plan(
    base: FdmPlan,
    subbands: Vec<Subband>,
    total_power: f64,
) -> Result<CognitivePlan> {
    if subbands.is_empty() {
        return Err(Error::Config("cognitive plan needs at least one subband".into()));
    }
    let limit = base.signal_band + base.guard;
    for b in &subbands {
        if !(b.lo >= 0.0 && b.lo < b.hi && b.hi <= limit * (1.0 + 1e-12)) {
            return Err(Error::Config(format!(
                "subband [{}, {}) Hz outside [0, {limit}] Hz",
                b.lo, b.hi
            )));
        }
    }
    let mut sorted = subbands;
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for w in sorted.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(Error::OverlappingSubbands {
                a_lo: w[0].lo,
                a_hi: w[0].hi,
                b_lo: w[1].lo,
                b_hi: w[1].hi,
            });
        }
    }
    if !(total_power > 0.0) {
        return Err(Error::Config("total power must be positive".into()));
    }
    let occupied: f64 = sorted.iter().map(Subband::width).sum();
    Ok(CognitivePlan {
        gamma: (base.signal_band / occupied).sqrt(),
        base,
        subbands: sorted,
        total_power,
        phase: SpectralPhase::default(),
    })
}

impl CognitivePlan {
    pub fn with_phase(mut self, phase: SpectralPhase) -> Self {
        self.phase = phase;
        self
    }

    pub fn occupied_bandwidth(&self) -> f64 {
        self.subbands.iter().map(Subband::width).sum()
    }

    /// Channel-local occupied bins with their power coverage in `(0, 1]`.
    pub fn occupied_bins(&self) -> Vec<(usize, f64)> {
        let n = self.base.bins_per_channel();
        let pri = self.base.pri;
        let mut out = Vec::new();
        for b in &self.subbands {
            let first = snap(b.lo * pri).floor() as usize;
            let last = (snap(b.hi * pri).ceil() as usize).min(n);
            for k in first..last {
                let c = b.bin_coverage(k, pri);
                if c > 0.0 {
                    out.push((k, c));
                }
            }
        }
        out
    }

    /// Channel-local spectrum of transmitter `m` on the one-PRI DFT grid,
    /// as `(bin, coefficient)` pairs. `samples_per_pri` sets the DFT scale:
    /// the conventional pulse then has `Σ|x[n]|² = P_t` over the PRI.
    pub fn pulse_spectrum(&self, m: usize, samples_per_pri: usize) -> Vec<(usize, Complex64)> {
        let base = &self.base;
        let nominal_bins = base.signal_band * base.pri;
        let unit = (self.total_power * samples_per_pri as f64 / nominal_bins).sqrt();
        let mut rng = match self.phase {
            SpectralPhase::Random { seed } => Some(ChaCha8Rng::seed_from_u64(
                seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            )),
            SpectralPhase::Chirp => None,
        };
        // Draw phases for every channel bin so that a bin's phase does not
        // depend on which slices are occupied.
        let n = base.bins_per_channel();
        let random_phases: Option<Vec<f64>> = rng
            .as_mut()
            .map(|r| (0..n).map(|_| r.random_range(0.0..2.0 * PI)).collect());

        self.occupied_bins()
            .into_iter()
            .map(|(k, coverage)| {
                let phase = match &random_phases {
                    Some(p) => p[k],
                    None => {
                        let f = k as f64 / base.pri;
                        -PI * base.pulse_width * f * f / base.signal_band
                    }
                };
                let amp = unit * self.gamma * coverage.sqrt();
                (k, Complex64::from_polar(amp, phase))
            })
            .collect()
    }
}

/// One transmitter's pulse over one PRI at the synthesis rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandPulse {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub tx_index: usize,
    /// Frequency of the transmitter's channel-local bin 0, Hz.
    pub channel_origin: f64,
}

/// Samples per PRI at `sample_rate`, requiring an integer count and complex
/// sampling of the whole FDM band.
pub fn samples_per_pri(plan: &FdmPlan, sample_rate: f64) -> Result<usize> {
    let required = plan.total_band();
    if sample_rate < required * (1.0 - 1e-12) {
        return Err(Error::InsufficientSampleRate {
            rate: sample_rate,
            required,
        });
    }
    let n = sample_rate * plan.pri;
    if (n - n.round()).abs() > BIN_SNAP {
        return Err(Error::Config(format!(
            "sample rate × PRI = {n} is not an integer sample count"
        )));
    }
    Ok(n.round() as usize)
}

/// Synthesizes transmitter `m`'s pulse at `sample_rate`.
pub fn synth_pulse(plan: &CognitivePlan, m: usize, sample_rate: f64) -> Result<BasebandPulse> {
    let base = &plan.base;
    if m >= base.num_tx {
        return Err(Error::InvalidIndex {
            kind: "tx",
            index: m,
            len: base.num_tx,
        });
    }
    let ns = samples_per_pri(base, sample_rate)?;
    let offset = m * base.bins_per_channel();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); ns];
    for (k, h) in plan.pulse_spectrum(m, ns) {
        spectrum[offset + k] = h;
    }
    fft::inverse(&mut spectrum);
    Ok(BasebandPulse {
        samples: spectrum,
        sample_rate,
        tx_index: m,
        channel_origin: base.channel_origin(m),
    })
}

/// Power of `pulse` in every PRI-spaced bin that `band` touches
/// (channel-local offsets).
pub fn spectral_power(pulse: &BasebandPulse, band: Subband) -> f64 {
    let ns = pulse.samples.len();
    if ns == 0 {
        return 0.0;
    }
    let pri = ns as f64 / pulse.sample_rate;
    let mut spec = pulse.samples.clone();
    fft::forward(&mut spec);
    let origin = snap(pulse.channel_origin * pri);
    let lo = snap(band.lo * pri) + origin;
    let hi = snap(band.hi * pri) + origin;
    let first = lo.floor().max(0.0) as usize;
    let last = (hi.ceil().max(0.0) as usize).min(ns);
    spec[first..last].iter().map(|s| s.norm_sqr()).sum::<f64>() / ns as f64
}

/// Total energy `Σ|x[n]|²` of a pulse over its PRI.
pub fn pulse_energy(pulse: &BasebandPulse) -> f64 {
    pulse.samples.iter().map(|s| s.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 120e6;

    fn cognitive() -> CognitivePlan {
        build_cognitive_plan(FdmPlan::prototype(8), prototype_subbands(), 1.0).unwrap()
    }

    #[test]
    fn fdm_carriers() {
        let plan = build_fdm_plan(8, 15e6, 12e6, 3e6, 100e-6, 4.2e-6).unwrap();
        assert_eq!(plan.carrier(0), 6e6);
        assert_eq!(plan.carrier(7), 111e6);
        assert_eq!(plan.total_band(), 120e6);
        assert_eq!(plan.bins_per_channel(), 1500);

        let single = build_fdm_plan(1, 15e6, 12e6, 3e6, 100e-6, 4.2e-6).unwrap();
        assert_eq!(single.carriers(), vec![6e6]);
    }

    #[test]
    fn fdm_rejects_bad_arithmetic() {
        assert!(matches!(
            build_fdm_plan(8, 15e6, 12e6, 2e6, 100e-6, 4.2e-6),
            Err(Error::Config(_))
        ));
        assert!(build_fdm_plan(8, 15e6, 12e6, 3e6, 1e-6, 4.2e-6).is_err());
        assert!(build_fdm_plan(0, 15e6, 12e6, 3e6, 100e-6, 4.2e-6).is_err());
    }

    #[test]
    fn prototype_slices() {
        let s = prototype_subbands();
        assert_eq!(s.len(), 8);
        for b in &s {
            assert!((b.width() - 375e3).abs() < 1e-6);
        }
        let total: f64 = s.iter().map(Subband::width).sum();
        assert!((total - 3e6).abs() < 1e-6);
        for (i, a) in s.iter().enumerate() {
            for b in &s[i + 1..] {
                assert!(!a.overlaps(b));
            }
        }
    }

    #[test]
    fn gamma_normalization() {
        assert!((cognitive().gamma - 2.0).abs() < 1e-12);
        let full = build_cognitive_plan(
            FdmPlan::prototype(8),
            vec![Subband::new(0.0, 12e6)],
            1.0,
        )
        .unwrap();
        assert!((full.gamma - 1.0).abs() < 1e-12);
        let overlapping = vec![Subband::new(1e6, 2e6), Subband::new(1.5e6, 3e6)];
        assert!(matches!(
            build_cognitive_plan(FdmPlan::prototype(8), overlapping, 1.0),
            Err(Error::OverlappingSubbands { .. })
        ));
    }

    #[test]
    fn sample_rate_checked() {
        assert!(matches!(
            synth_pulse(&cognitive(), 0, 60e6),
            Err(Error::InsufficientSampleRate { .. })
        ));
    }

    #[test]
    fn energy_is_conserved_between_plans() {
        let cog = cognitive();
        let conv = FdmPlan::prototype(8).conventional(1.0);
        for m in 0..8 {
            let a = pulse_energy(&synth_pulse(&cog, m, FS).unwrap());
            let b = pulse_energy(&synth_pulse(&conv, m, FS).unwrap());
            assert!((a / b - 1.0).abs() < 0.01, "m={m}: {a} vs {b}");
            assert!((b - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cognitive_energy_inside_slices() {
        let cog = cognitive();
        for m in [0, 3, 7] {
            let p = synth_pulse(&cog, m, FS).unwrap();
            let total = pulse_energy(&p);
            let inside: f64 = cog.subbands.iter().map(|&b| spectral_power(&p, b)).sum();
            assert!(inside / total >= 0.99);
            for &b in &cog.subbands {
                let want = cog.gamma.powi(2) * b.width() / 12e6 * cog.total_power;
                assert!((spectral_power(&p, b) - want).abs() < 1e-9 * want.max(1.0));
            }
        }
    }

    #[test]
    fn conventional_band_mask() {
        let conv = FdmPlan::prototype(8).conventional(2.5);
        let p = synth_pulse(&conv, 0, FS).unwrap();
        let full = spectral_power(&p, Subband::new(0.0, 12e6));
        assert!((full - 2.5).abs() < 1e-9);
        let guard = spectral_power(&p, Subband::new(12e6, 15e6));
        assert!(guard < 1e-4 * 2.5);
    }

    #[test]
    fn in_band_density_gain() {
        let cog = cognitive();
        let conv = FdmPlan::prototype(8).conventional(1.0);
        let pc = synth_pulse(&cog, 2, FS).unwrap();
        let pv = synth_pulse(&conv, 2, FS).unwrap();
        // Slices inside the conventional signal band.
        // Whole bins only; edge bins are partially occupied by design.
        for b in cog.subbands.iter().filter(|b| b.hi <= 12e6) {
            let b = Subband::new(b.lo, b.lo + 370e3);
            let ratio = spectral_power(&pc, b) / spectral_power(&pv, b);
            assert!((ratio - cog.gamma.powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn chirp_is_time_concentrated() {
        let conv = FdmPlan::prototype(8).conventional(1.0);
        let p = synth_pulse(&conv, 0, FS).unwrap();
        let gate = (4.2e-6 * FS) as usize;
        let inside: f64 = p.samples[..gate].iter().map(|s| s.norm_sqr()).sum();
        assert!(inside / pulse_energy(&p) > 0.9);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let plan = cognitive().with_phase(SpectralPhase::Random { seed: 9 });
        let a = synth_pulse(&plan, 4, FS).unwrap();
        let b = synth_pulse(&plan, 4, FS).unwrap();
        assert_eq!(a, b);
    }
}
