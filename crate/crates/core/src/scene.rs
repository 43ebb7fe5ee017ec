//! Point-target scenes, received-signal synthesis, and the direct
//! Fourier-coefficient oracle.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::geometry::ArrayConfig;
use crate::waveform::{samples_per_pri, CognitivePlan};
use crate::xampler::{CoefficientSet, KappaSet};

/// Propagation speed used for range/delay conversion, m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

/// Round-trip delay for a target at `range_m`.
pub fn range_to_delay(range_m: f64) -> f64 {
    2.0 * range_m / SPEED_OF_LIGHT
}

pub fn delay_to_range(delay: f64) -> f64 {
    delay * SPEED_OF_LIGHT / 2.0
}

/// A non-fluctuating point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Round-trip delay, seconds.
    pub delay: f64,
    /// Sine of the direction of arrival.
    pub sin_doa: f64,
    pub amplitude: Complex64,
}

impl Target {
    pub fn new(delay: f64, sin_doa: f64, amplitude: Complex64) -> Self {
        Target {
            delay,
            sin_doa,
            amplitude,
        }
    }

    pub fn from_range(range_m: f64, sin_doa: f64, amplitude: f64, phase_deg: f64) -> Self {
        Target {
            delay: range_to_delay(range_m),
            sin_doa,
            amplitude: Complex64::from_polar(amplitude, phase_deg.to_radians()),
        }
    }

    pub fn range_m(&self) -> f64 {
        delay_to_range(self.delay)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub targets: Vec<Target>,
}

impl Scene {
    pub fn new(targets: Vec<Target>) -> Self {
        Scene { targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Checks delays against the PRI, DoA range, and distinct positions.
    pub fn validate(&self, pri: f64) -> Result<()> {
        for t in &self.targets {
            if !(t.delay >= 0.0 && t.delay < pri) {
                return Err(Error::AmbiguousRange {
                    delay: t.delay,
                    pri,
                });
            }
            if !(-1.0..1.0).contains(&t.sin_doa) {
                return Err(Error::Config(format!(
                    "sine of DoA {} outside [-1, 1)",
                    t.sin_doa
                )));
            }
        }
        for (i, a) in self.targets.iter().enumerate() {
            if self.targets[i + 1..]
                .iter()
                .any(|b| b.delay == a.delay && b.sin_doa == a.sin_doa)
            {
                return Err(Error::Config(format!(
                    "duplicate target at delay {} s, sin DoA {}",
                    a.delay, a.sin_doa
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> Scene {
        Scene::new(
            self.targets
                .iter()
                .map(|t| Target {
                    amplitude: t.amplitude * c,
                    ..*t
                })
                .collect(),
        )
    }
}

/// Received complex baseband for every receiver over one PRI.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBaseband {
    /// One sequence per receiver, each `sample_rate · pri` samples long.
    pub channels: Vec<Vec<Complex64>>,
    pub sample_rate: f64,
    pub pri: f64,
    /// Samples covered by at least one echo's pulse window.
    pub pulse_support: Vec<bool>,
}

impl ReceivedBaseband {
    pub fn samples_per_pri(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    /// Mean `|x|²` over the pulse support, across all receivers.
    pub fn support_power(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for ch in &self.channels {
            for (x, &on) in ch.iter().zip(&self.pulse_support) {
                if on {
                    sum += x.norm_sqr();
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

fn pulse_support(scene: &Scene, plan: &CognitivePlan, ns: usize, sample_rate: f64) -> Vec<bool> {
    let mut mask = vec![false; ns];
    let width = (plan.base.pulse_width * sample_rate).round().max(1.0) as usize;
    for t in &scene.targets {
        let start = (t.delay * sample_rate).round() as usize;
        for i in 0..width.min(ns) {
            mask[(start + i) % ns] = true;
        }
    }
    mask
}

fn check_dims(array: &ArrayConfig, plan: &CognitivePlan) -> Result<()> {
    if array.num_tx != plan.base.num_tx {
        return Err(Error::Dimension(format!(
            "array has {} transmitters but the plan has {} channels",
            array.num_tx, plan.base.num_tx
        )));
    }
    Ok(())
}

/// Synthesizes `x_q(t) = Σ_m Σ_l α_l h_m(t − τ_l) e^{j2π β_mq θ_l}` for each
/// receiver. Delays are applied as linear phase on the DFT grid, so they
/// need not be multiples of the sample period.
pub fn synth_received(
    scene: &Scene,
    array: &ArrayConfig,
    plan: &CognitivePlan,
    sample_rate: f64,
) -> Result<ReceivedBaseband> {
    check_dims(array, plan)?;
    scene.validate(plan.base.pri)?;
    let ns = samples_per_pri(&plan.base, sample_rate)?;
    let n = plan.base.bins_per_channel();
    let pri = plan.base.pri;

    // Per transmitter: the pulse spectrum and, per target, its delay phase.
    struct Channel {
        bins: Vec<usize>,
        coeffs: Vec<Complex64>,
        delayed: Vec<Vec<Complex64>>,
    }
    let channels: Vec<Channel> = (0..array.num_tx)
        .map(|m| {
            let (bins, coeffs): (Vec<usize>, Vec<Complex64>) =
                plan.pulse_spectrum(m, ns).into_iter().unzip();
            let delayed = scene
                .targets
                .iter()
                .map(|t| {
                    bins.iter()
                        .map(|&k| {
                            let g = (m * n + k) as f64;
                            Complex64::from_polar(1.0, -2.0 * PI * g * t.delay / pri)
                        })
                        .collect()
                })
                .collect();
            Channel {
                bins,
                coeffs,
                delayed,
            }
        })
        .collect();

    let mut out = Vec::with_capacity(array.num_rx);
    for q in 0..array.num_rx {
        let mut spec = vec![Complex64::new(0.0, 0.0); ns];
        for (m, ch) in channels.iter().enumerate() {
            let beta = array.beta(m, q)?;
            for (l, t) in scene.targets.iter().enumerate() {
                let w = t.amplitude * Complex64::from_polar(1.0, 2.0 * PI * beta * t.sin_doa);
                for (i, &k) in ch.bins.iter().enumerate() {
                    spec[m * n + k] += ch.coeffs[i] * w * ch.delayed[l][i];
                }
            }
        }
        fft::inverse(&mut spec);
        out.push(spec);
    }

    Ok(ReceivedBaseband {
        channels: out,
        sample_rate,
        pri,
        pulse_support: pulse_support(scene, plan, ns, sample_rate),
    })
}

/// Evaluates the aligned Fourier coefficients directly:
/// `y_mq[k] = Σ_l α_l e^{j2π β_mq θ_l} e^{−j2π k τ_l/τ} e^{−j2π f0_m τ_l}`,
/// where `f0_m` is the frequency of channel `m`'s bin 0.
pub fn oracle_coefficients(
    scene: &Scene,
    array: &ArrayConfig,
    plan: &CognitivePlan,
    kappa: &KappaSet,
) -> Result<CoefficientSet> {
    check_dims(array, plan)?;
    let pri = plan.base.pri;
    let k_len = kappa.len();
    let mut mats = Vec::with_capacity(array.num_tx);
    for m in 0..array.num_tx {
        let origin = plan.base.channel_origin(m);
        let mut y = nalgebra::DMatrix::<Complex64>::zeros(k_len, array.num_rx);
        for t in &scene.targets {
            let carrier = Complex64::from_polar(1.0, -2.0 * PI * origin * t.delay);
            let range: Vec<Complex64> = kappa
                .indices
                .iter()
                .map(|&k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * t.delay / pri))
                .collect();
            for q in 0..array.num_rx {
                let spatial =
                    Complex64::from_polar(1.0, 2.0 * PI * array.beta(m, q)? * t.sin_doa);
                let w = t.amplitude * spatial * carrier;
                for (i, r) in range.iter().enumerate() {
                    y[(i, q)] += w * r;
                }
            }
        }
        mats.push(y);
    }
    Ok(CoefficientSet {
        matrices: mats,
        kappa: kappa.clone(),
        tx_indices: (0..array.num_tx).collect(),
        rx_indices: (0..array.num_rx).collect(),
    })
}

/// Adds circularly-symmetric complex white Gaussian noise at `snr_db`,
/// referenced to the mean signal power over the pulse support. An infinite
/// SNR returns the input unchanged.
pub fn add_noise(rx: &ReceivedBaseband, snr_db: f64, seed: u64) -> Result<ReceivedBaseband> {
    if snr_db == f64::INFINITY {
        return Ok(rx.clone());
    }
    let signal = rx.support_power();
    if !(signal > 0.0) {
        return Err(Error::UndefinedSnr);
    }
    let variance = signal / 10f64.powf(snr_db / 10.0);
    let sigma = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = rx.clone();
    for ch in &mut out.channels {
        for x in ch.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *x += Complex64::new(re * sigma, im * sigma);
        }
    }
    Ok(out)
}
