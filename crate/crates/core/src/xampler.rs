//! Software sub-Nyquist receiver.
//!
//! Each receiver's full-rate signal is split into its FDM channels with ideal
//! brick-wall filters, each channel is decimated to the low ADC rate, and the
//! Fourier coefficients in `κ` are read back from the folded low-rate DFT.
//! Because the occupied slices are coset bands, no two `κ` bins share a
//! folded position and the read-back is exact.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::scene::ReceivedBaseband;
use crate::waveform::{snap, CognitivePlan, Subband};

/// Channel-local DFT bin indices retained by the receiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaSet {
    /// Sorted, distinct bins in `[0, N)`.
    pub indices: Vec<usize>,
    /// Nyquist-rate coefficients per channel, `N`.
    pub per_channel_n: usize,
}

impl KappaSet {
    pub fn new(mut indices: Vec<usize>, per_channel_n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptyKappa("index set is empty".into()));
        }
        if indices.len() >= per_channel_n || *indices.last().unwrap() >= per_channel_n {
            return Err(Error::Config(format!(
                "κ must be a proper subset of [0, {per_channel_n})"
            )));
        }
        Ok(KappaSet {
            indices,
            per_channel_n,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Low-rate ADC following each channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    /// Complex sampling rate, Hz.
    pub rate: f64,
    /// FDM channel spacing (the channel's complex Nyquist rate), Hz.
    pub channel_spacing: f64,
}

impl AdcConfig {
    pub fn new(rate: f64, channel_spacing: f64) -> Result<Self> {
        if !(rate > 0.0) || !(channel_spacing > 0.0) {
            return Err(Error::Config("ADC and channel rates must be positive".into()));
        }
        Ok(AdcConfig {
            rate,
            channel_spacing,
        })
    }

    /// 7.5 MHz ADC behind 15 MHz channels.
    pub fn prototype() -> Self {
        AdcConfig {
            rate: 7.5e6,
            channel_spacing: 15e6,
        }
    }

    /// Integer decimation ratio from `channel_rate` down to the ADC rate.
    pub fn decimation(&self, channel_rate: f64) -> Result<usize> {
        let d = channel_rate / self.rate;
        if d < 1.0 - 1e-12 || (d - d.round()).abs() > 1e-9 {
            return Err(Error::NonIntegerDecimation {
                channel_rate,
                adc_rate: self.rate,
            });
        }
        Ok(d.round() as usize)
    }
}

/// Xampled coefficients: one `K × Q` matrix per active transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub matrices: Vec<DMatrix<Complex64>>,
    pub kappa: KappaSet,
    /// Transmitter index of each matrix.
    pub tx_indices: Vec<usize>,
    /// Receiver index of each matrix column.
    pub rx_indices: Vec<usize>,
}

impl CoefficientSet {
    pub fn num_tx(&self) -> usize {
        self.matrices.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx_indices.len()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrices
            .iter()
            .map(|y| y.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Checks that every matrix is `K × Q` with consistent index lists.
    pub fn validate(&self) -> Result<()> {
        if self.matrices.len() != self.tx_indices.len() {
            return Err(Error::Dimension("one matrix per transmitter index".into()));
        }
        let (k, q) = (self.kappa.len(), self.rx_indices.len());
        if self.matrices.iter().any(|y| y.shape() != (k, q)) {
            return Err(Error::Dimension(format!("every Y^m must be {k}×{q}")));
        }
        Ok(())
    }
}

/// Bins lying entirely inside some slice of `plan`.
pub fn subband_to_kappa(plan: &CognitivePlan) -> Result<KappaSet> {
    let n = plan.base.bins_per_channel();
    let pri = plan.base.pri;
    let mut indices = Vec::new();
    for b in &plan.subbands {
        let first = snap(b.lo * pri).ceil() as usize;
        let end = snap(b.hi * pri).floor() as usize;
        indices.extend(first..end.min(n));
    }
    if indices.is_empty() {
        return Err(Error::EmptyKappa(
            "no DFT bin lies entirely inside a subband".into(),
        ));
    }
    KappaSet::new(indices, n)
}

/// Images of each slice after folding modulo the ADC rate, as channel-local
/// frequency intervals in `[0, rate)`. A slice that wraps yields two pieces.
pub fn folded_images(plan: &CognitivePlan, adc: &AdcConfig) -> Vec<Vec<Subband>> {
    let rate = adc.rate;
    plan.subbands
        .iter()
        .map(|b| {
            if b.width() >= rate {
                return vec![Subband::new(0.0, rate)];
            }
            let lo = b.lo.rem_euclid(rate);
            let hi = lo + b.width();
            if hi <= rate {
                vec![Subband::new(lo, hi)]
            } else {
                vec![Subband::new(lo, rate), Subband::new(0.0, hi - rate)]
            }
        })
        .collect()
}

/// True when the folded images of all slices are pairwise disjoint.
pub fn check_coset(plan: &CognitivePlan, adc: &AdcConfig) -> bool {
    // Compare in bin units so edges that coincide up to rounding count as
    // touching rather than overlapping.
    let pri = plan.base.pri;
    let images = folded_images(plan, adc);
    // A slice wider than the ADC rate aliases onto itself.
    if plan.subbands.iter().any(|b| b.width() > adc.rate) {
        return false;
    }
    for (i, a) in images.iter().enumerate() {
        for b in &images[i + 1..] {
            for pa in a {
                for pb in b {
                    let (alo, ahi) = (snap(pa.lo * pri), snap(pa.hi * pri));
                    let (blo, bhi) = (snap(pb.lo * pri), snap(pb.hi * pri));
                    if alo < bhi && blo < ahi {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Per-transmitter, per-receiver channel sequences: `channels[m][q]`.
pub type ChannelSet = Vec<Vec<Vec<Complex64>>>;

fn check_rate(rx: &ReceivedBaseband, plan: &CognitivePlan) -> Result<()> {
    let n = plan.base.bins_per_channel();
    let needed = plan.base.num_tx * n;
    if rx.samples_per_pri() < needed {
        return Err(Error::InsufficientSampleRate {
            rate: rx.sample_rate,
            required: plan.base.total_band(),
        });
    }
    Ok(())
}

/// Extracts channel `m` from a full-rate spectrum and returns it at the
/// channel rate, scaled so its `N`-point DFT equals the full-rate DFT bins.
fn channel_from_spectrum(spectrum: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    let mut ch = spectrum[m * n..(m + 1) * n].to_vec();
    fft::inverse(&mut ch);
    ch
}

fn spectrum_of(x: &[Complex64]) -> Vec<Complex64> {
    let mut s = x.to_vec();
    fft::forward(&mut s);
    s
}

/// Ideal channelization: channel `m` of every receiver, shifted to
/// `[0, spacing)` and sampled at the channel rate.
pub fn channelize(rx: &ReceivedBaseband, plan: &CognitivePlan) -> Result<ChannelSet> {
    check_rate(rx, plan)?;
    let n = plan.base.bins_per_channel();
    let spectra: Vec<Vec<Complex64>> = rx.channels.par_iter().map(|x| spectrum_of(x)).collect();
    Ok((0..plan.base.num_tx)
        .map(|m| {
            spectra
                .iter()
                .map(|s| channel_from_spectrum(s, m, n))
                .collect()
        })
        .collect())
}

/// Keeps every `D`-th sample, `D = channel_rate / adc.rate`.
pub fn subsample(channel: &[Complex64], channel_rate: f64, adc: &AdcConfig) -> Result<Vec<Complex64>> {
    let d = adc.decimation(channel_rate)?;
    Ok(channel.iter().step_by(d).copied().collect())
}

/// Reads the `κ` coefficients from a low-rate sequence spanning one PRI.
/// Bin `k` is taken from folded position `k mod L` and scaled by the
/// decimation factor, recovering the Nyquist-rate DFT value.
pub fn extract_coefficients(
    lowrate: &[Complex64],
    kappa: &KappaSet,
    adc: &AdcConfig,
) -> Result<Vec<Complex64>> {
    let n = kappa.per_channel_n;
    let l = lowrate.len();
    let expected = adc.rate * n as f64 / adc.channel_spacing;
    if l == 0 || (expected - l as f64).abs() > 1e-6 || !n.is_multiple_of(l) {
        return Err(Error::Dimension(format!(
            "low-rate sequence has {l} samples, expected {expected} for N = {n}"
        )));
    }
    let d = n / l;
    let mut seen = vec![usize::MAX; l];
    for &k in &kappa.indices {
        let f = k % l;
        if seen[f] != usize::MAX {
            return Err(Error::CosetViolation {
                first: seen[f],
                second: k,
                folded: f,
            });
        }
        seen[f] = k;
    }
    let spec = spectrum_of(lowrate);
    Ok(kappa
        .indices
        .iter()
        .map(|&k| spec[k % l] * d as f64)
        .collect())
}

/// Stage counters reported by [`acquire_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquireStats {
    pub channelized: u64,
    pub subsampled: u64,
    pub extracted: u64,
}

/// Runs the receiver over the active channels and assembles `Y^m`.
pub fn acquire(
    rx: &ReceivedBaseband,
    plan: &CognitivePlan,
    adc: &AdcConfig,
    kappa: &KappaSet,
    active_tx: &[usize],
    active_rx: &[usize],
) -> Result<CoefficientSet> {
    acquire_with_stats(rx, plan, adc, kappa, active_tx, active_rx).map(|(y, _)| y)
}

pub fn acquire_with_stats(
    rx: &ReceivedBaseband,
    plan: &CognitivePlan,
    adc: &AdcConfig,
    kappa: &KappaSet,
    active_tx: &[usize],
    active_rx: &[usize],
) -> Result<(CoefficientSet, AcquireStats)> {
    if active_tx.is_empty() || active_rx.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    for &m in active_tx {
        if m >= plan.base.num_tx {
            return Err(Error::InvalidIndex {
                kind: "tx",
                index: m,
                len: plan.base.num_tx,
            });
        }
    }
    for &q in active_rx {
        if q >= rx.channels.len() {
            return Err(Error::InvalidIndex {
                kind: "rx",
                index: q,
                len: rx.channels.len(),
            });
        }
    }
    check_rate(rx, plan)?;
    let n = plan.base.bins_per_channel();
    if kappa.per_channel_n != n {
        return Err(Error::Dimension(format!(
            "κ was built for N = {}, plan has N = {n}",
            kappa.per_channel_n
        )));
    }
    let channel_rate = plan.base.channel_spacing;
    let ns = rx.samples_per_pri();

    // Alignment: divide by the known pulse spectrum at each κ bin.
    let pulse_at_kappa: Vec<Vec<Complex64>> = active_tx
        .iter()
        .map(|&m| {
            let spec: std::collections::HashMap<usize, Complex64> =
                plan.pulse_spectrum(m, ns).into_iter().collect();
            kappa
                .indices
                .iter()
                .map(|k| {
                    spec.get(k).copied().ok_or_else(|| {
                        Error::Config(format!("κ bin {k} is not occupied by the pulse"))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    // columns[qi][mi] = K coefficients
    let columns: Vec<Vec<Vec<Complex64>>> = active_rx
        .par_iter()
        .map(|&q| {
            let spec = spectrum_of(&rx.channels[q]);
            active_tx
                .iter()
                .enumerate()
                .map(|(mi, &m)| {
                    let ch = channel_from_spectrum(&spec, m, n);
                    let low = subsample(&ch, channel_rate, adc)?;
                    let mut y = extract_coefficients(&low, kappa, adc)?;
                    y.iter_mut()
                        .zip(&pulse_at_kappa[mi])
                        .for_each(|(v, h)| *v /= h);
                    Ok(y)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let k_len = kappa.len();
    let matrices = (0..active_tx.len())
        .map(|mi| {
            DMatrix::from_fn(k_len, active_rx.len(), |i, qi| columns[qi][mi][i])
        })
        .collect();
    let channels = (active_tx.len() * active_rx.len()) as u64;
    Ok((
        CoefficientSet {
            matrices,
            kappa: kappa.clone(),
            tx_indices: active_tx.to_vec(),
            rx_indices: active_rx.to_vec(),
        },
        AcquireStats {
            channelized: channels,
            subsampled: channels,
            extracted: channels,
        },
    ))
}
