//! Spatial and spectral sampling-reduction accounting.

use serde::{Deserialize, Serialize};

use crate::geometry::ArrayMode;
use crate::waveform::CognitivePlan;
use crate::xampler::AdcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    /// Real-equivalent channel Nyquist rate over the ADC rate.
    pub spectral_rate_factor: f64,
    /// Channel spacing over occupied bandwidth.
    pub bandwidth_factor_with_guards: f64,
    /// Signal band over occupied bandwidth.
    pub bandwidth_factor_no_guards: f64,
    /// Elements of the filled virtual array over elements used.
    pub spatial_factor: f64,
    pub combined_sampling_reduction_pct: f64,
    /// Reduction in processed Tx×Rx channels versus the filled array.
    pub hardware_channel_reduction_pct: f64,
}

pub fn sampling_reduction(mode: ArrayMode, plan: &CognitivePlan, adc: &AdcConfig) -> ReductionSummary {
    let base = &plan.base;
    let occupied = plan.occupied_bandwidth();
    let (m, q) = mode.element_counts();
    let (t, r) = mode.virtual_dims();

    let spectral_rate_factor = 2.0 * base.channel_spacing / adc.rate;
    let spatial_factor = (t + r) as f64 / (m + q) as f64;
    ReductionSummary {
        spectral_rate_factor,
        bandwidth_factor_with_guards: base.channel_spacing / occupied,
        bandwidth_factor_no_guards: base.signal_band / occupied,
        spatial_factor,
        combined_sampling_reduction_pct: 100.0 * (1.0 - 1.0 / (spectral_rate_factor * spatial_factor)),
        hardware_channel_reduction_pct: 100.0 * (1.0 - (m * q) as f64 / (t * r) as f64),
    }
}

impl std::fmt::Display for ReductionSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "spectral rate factor            {:>8.3}", self.spectral_rate_factor)?;
        writeln!(f, "bandwidth factor (with guards)  {:>8.3}", self.bandwidth_factor_with_guards)?;
        writeln!(f, "bandwidth factor (no guards)    {:>8.3}", self.bandwidth_factor_no_guards)?;
        writeln!(f, "spatial factor                  {:>8.3}", self.spatial_factor)?;
        writeln!(f, "combined sampling reduction %   {:>8.3}", self.combined_sampling_reduction_pct)?;
        write!(f, "hardware channel reduction %    {:>8.3}", self.hardware_channel_reduction_pct)
    }
}
