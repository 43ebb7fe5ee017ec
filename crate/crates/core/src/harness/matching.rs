//! Detection scoring against ground truth.
//!
//! An estimate counts as a detection when it lies within two range cells and
//! one azimuth bin of an unmatched truth target; an exact-cell match is also
//! a strict detection.

use serde::{Deserialize, Serialize};

use crate::geometry::AzimuthGrid;
use crate::recovery::{RangeGrid, SparseEstimate};
use crate::scene::Scene;

/// Range cells of tolerance for a detection.
pub const RANGE_TOLERANCE: usize = 2;
/// Azimuth bins of tolerance for a detection.
pub const AZIMUTH_TOLERANCE: usize = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// `(truth index, estimate index)` pairs.
    pub hits: Vec<(usize, usize)>,
    pub false_alarms: Vec<usize>,
    pub misses: Vec<usize>,
    pub strict_hits: usize,
}

impl DetectionReport {
    /// At least one false alarm or miss.
    pub fn has_error(&self) -> bool {
        !self.false_alarms.is_empty() || !self.misses.is_empty()
    }
}

/// Greedy nearest-first matching. Truth targets are snapped to their nearest
/// grid cell; estimates are processed in selection order.
pub fn match_targets(
    truth: &Scene,
    est: &SparseEstimate,
    rgrid: &RangeGrid,
    agrid: &AzimuthGrid,
) -> DetectionReport {
    let truth_cells: Vec<(usize, usize)> = truth
        .targets
        .iter()
        .map(|t| (rgrid.nearest(t.delay), agrid.nearest(t.sin_doa)))
        .collect();
    let mut taken = vec![false; truth_cells.len()];
    let mut report = DetectionReport::default();

    for (e, &(n, p)) in est.support.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (t, &(tn, tp)) in truth_cells.iter().enumerate() {
            if taken[t] {
                continue;
            }
            let dn = n.abs_diff(tn);
            let dp = p.abs_diff(tp);
            if dn > RANGE_TOLERANCE || dp > AZIMUTH_TOLERANCE {
                continue;
            }
            // Distance in units of the tolerance box.
            let d = (dn as f64 / RANGE_TOLERANCE as f64).powi(2)
                + (dp as f64 / AZIMUTH_TOLERANCE as f64).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((t, d));
            }
        }
        match best {
            Some((t, _)) => {
                taken[t] = true;
                if truth_cells[t] == (n, p) {
                    report.strict_hits += 1;
                }
                report.hits.push((t, e));
            }
            None => report.false_alarms.push(e),
        }
    }
    report.misses = (0..truth_cells.len()).filter(|&t| !taken[t]).collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mode, ArrayMode};
    use crate::scene::Target;
    use num_complex::Complex64;

    fn grids() -> (RangeGrid, AzimuthGrid) {
        (
            RangeGrid::uniform(100e-6, 300),
            build_mode(ArrayMode::Mode1Ula, 0).azimuth_grid(),
        )
    }

    fn estimate(cells: &[(usize, usize)]) -> SparseEstimate {
        SparseEstimate {
            support: cells.to_vec(),
            amplitudes: vec![Complex64::new(1.0, 0.0); cells.len()],
            residual_norm: 0.0,
            residual_history: vec![],
        }
    }

    fn truth(rg: &RangeGrid, ag: &AzimuthGrid, cells: &[(usize, usize)]) -> Scene {
        Scene::new(
            cells
                .iter()
                .map(|&(n, p)| Target::new(rg.delays[n], ag.values[p], Complex64::new(1.0, 0.0)))
                .collect(),
        )
    }

    #[test]
    fn exact_estimates_are_strict() {
        let (rg, ag) = grids();
        let cells = [(10, 20), (100, 5), (250, 70)];
        let r = match_targets(&truth(&rg, &ag, &cells), &estimate(&cells), &rg, &ag);
        assert_eq!(r.hits.len(), 3);
        assert_eq!(r.strict_hits, 3);
        assert!(!r.has_error());
    }

    #[test]
    fn edge_of_box_is_a_loose_hit() {
        let (rg, ag) = grids();
        let r = match_targets(&truth(&rg, &ag, &[(10, 20)]), &estimate(&[(12, 21)]), &rg, &ag);
        assert_eq!(r.hits, vec![(0, 0)]);
        assert_eq!(r.strict_hits, 0);
    }

    #[test]
    fn outside_box_is_false_alarm_and_miss() {
        let (rg, ag) = grids();
        let r = match_targets(&truth(&rg, &ag, &[(10, 20)]), &estimate(&[(13, 20)]), &rg, &ag);
        assert_eq!(r.false_alarms, vec![0]);
        assert_eq!(r.misses, vec![0]);
        let r = match_targets(&truth(&rg, &ag, &[(10, 20)]), &estimate(&[(10, 22)]), &rg, &ag);
        assert!(r.has_error());
    }

    #[test]
    fn each_truth_matched_once() {
        let (rg, ag) = grids();
        let r = match_targets(
            &truth(&rg, &ag, &[(10, 20)]),
            &estimate(&[(10, 20), (11, 20)]),
            &rg,
            &ag,
        );
        assert_eq!(r.hits, vec![(0, 0)]);
        assert_eq!(r.false_alarms, vec![1]);
    }
}
