//! Range/azimuth dictionaries and simultaneous matrix OMP.
//!
//! For every active transmitter `m` the coefficients satisfy
//! `Y^m = A^m X (B^m)^T`, with `A^m` a `K × N_R` range dictionary and `B^m` a
//! `Q × N_θ` azimuth dictionary. All transmitters share the sparse `X`, so
//! the greedy search scores each grid cell `(n, p)` jointly:
//!
//! ```text
//! S(n, p) = Σ_m |(a_n^m)^H R^m (b_p^m)^*|²
//! ```
//!
//! and refits all selected amplitudes against the stacked system of every
//! transmitter after each selection.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::geometry::{ArrayConfig, AzimuthGrid};
use crate::scene::{delay_to_range, SPEED_OF_LIGHT};
use crate::waveform::CognitivePlan;
use crate::xampler::{CoefficientSet, KappaSet};

/// Default relative residual stopping tolerance.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-3;

/// Uniform delay grid over one PRI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeGrid {
    pub delays: Vec<f64>,
    /// Cell width in seconds.
    pub resolution: f64,
}

impl RangeGrid {
    pub fn uniform(pri: f64, cells: usize) -> Self {
        let resolution = pri / cells as f64;
        RangeGrid {
            delays: (0..cells).map(|n| n as f64 * resolution).collect(),
            resolution,
        }
    }

    /// Grid with range cells of `cell_m` meters.
    pub fn with_range_resolution(pri: f64, cell_m: f64) -> Self {
        let resolution = 2.0 * cell_m / SPEED_OF_LIGHT;
        Self::uniform(pri, (pri / resolution).round() as usize)
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn cell_m(&self) -> f64 {
        delay_to_range(self.resolution)
    }

    pub fn range_m(&self, n: usize) -> f64 {
        delay_to_range(self.delays[n])
    }

    pub fn nearest(&self, delay: f64) -> usize {
        let n = (delay / self.resolution).round();
        (n.max(0.0) as usize).min(self.delays.len() - 1)
    }
}

/// Per-transmitter range (`A^m`) and azimuth (`B^m`) dictionaries.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionarySet {
    pub range: Vec<DMatrix<Complex64>>,
    pub azimuth: Vec<DMatrix<Complex64>>,
    pub kappa: KappaSet,
}

impl DictionarySet {
    pub fn new(
        range: Vec<DMatrix<Complex64>>,
        azimuth: Vec<DMatrix<Complex64>>,
        kappa: KappaSet,
    ) -> Result<Self> {
        if range.is_empty() || range.len() != azimuth.len() {
            return Err(Error::Dimension(
                "need one range and one azimuth dictionary per transmitter".into(),
            ));
        }
        let (k, nr) = range[0].shape();
        let (q, na) = azimuth[0].shape();
        if range.iter().any(|a| a.shape() != (k, nr)) || azimuth.iter().any(|b| b.shape() != (q, na)) {
            return Err(Error::Dimension("dictionary shapes differ across transmitters".into()));
        }
        Ok(DictionarySet {
            range,
            azimuth,
            kappa,
        })
    }

    pub fn num_range(&self) -> usize {
        self.range[0].ncols()
    }

    pub fn num_azimuth(&self) -> usize {
        self.azimuth[0].ncols()
    }
}

/// Builds `A^m[k, n] = e^{−j2π k τ_n/τ} e^{−j2π f0_m τ_n}` for `k ∈ κ` and
/// `B^m[q, p] = e^{j2π β_mq θ_p}` for the given transmitters and receivers.
pub fn build_dictionaries_for(
    array: &ArrayConfig,
    plan: &CognitivePlan,
    kappa: &KappaSet,
    rgrid: &RangeGrid,
    agrid: &AzimuthGrid,
    tx: &[usize],
    rx: &[usize],
) -> Result<DictionarySet> {
    let pri = plan.base.pri;
    let mut range = Vec::with_capacity(tx.len());
    let mut azimuth = Vec::with_capacity(tx.len());
    for &m in tx {
        let origin = plan.base.channel_origin(m);
        range.push(DMatrix::from_fn(kappa.len(), rgrid.len(), |i, n| {
            let tau = rgrid.delays[n];
            let k = kappa.indices[i] as f64;
            Complex64::from_polar(1.0, -2.0 * PI * (k * tau / pri + origin * tau))
        }));
        let betas = rx
            .iter()
            .map(|&q| array.beta(m, q))
            .collect::<Result<Vec<_>>>()?;
        azimuth.push(DMatrix::from_fn(rx.len(), agrid.len(), |qi, p| {
            Complex64::from_polar(1.0, 2.0 * PI * betas[qi] * agrid.values[p])
        }));
    }
    DictionarySet::new(range, azimuth, kappa.clone())
}

/// Dictionaries for every transmitter and receiver of `array`.
pub fn build_dictionaries(
    array: &ArrayConfig,
    plan: &CognitivePlan,
    kappa: &KappaSet,
    rgrid: &RangeGrid,
    agrid: &AzimuthGrid,
) -> Result<DictionarySet> {
    let tx: Vec<usize> = (0..array.num_tx).collect();
    let rx: Vec<usize> = (0..array.num_rx).collect();
    build_dictionaries_for(array, plan, kappa, rgrid, agrid, &tx, &rx)
}

/// Recovered sparse scene on the range × azimuth grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEstimate {
    /// `(range index, azimuth index)` in selection order.
    pub support: Vec<(usize, usize)>,
    pub amplitudes: Vec<Complex64>,
    /// `Σ_m ‖R^m‖_F` at termination.
    pub residual_norm: f64,
    /// `Σ_m ‖R^m‖_F²` before the first and after every iteration.
    pub residual_history: Vec<f64>,
}

impl SparseEstimate {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

fn check_shapes(y: &CoefficientSet, dict: &DictionarySet) -> Result<()> {
    y.validate()?;
    if y.matrices.len() != dict.range.len() {
        return Err(Error::Dimension(format!(
            "{} coefficient matrices but {} dictionaries",
            y.matrices.len(),
            dict.range.len()
        )));
    }
    let k = dict.range[0].nrows();
    let q = dict.azimuth[0].nrows();
    if y.matrices.iter().any(|m| m.shape() != (k, q)) {
        return Err(Error::Dimension(format!(
            "coefficient matrices must be {k}×{q} to match the dictionaries"
        )));
    }
    Ok(())
}

/// Joint correlation score `S(n, p)` for every grid cell.
pub fn score_map(residuals: &[DMatrix<Complex64>], dict: &DictionarySet) -> DMatrix<f64> {
    let per_tx: Vec<DMatrix<f64>> = residuals
        .par_iter()
        .zip(dict.range.par_iter().zip(dict.azimuth.par_iter()))
        .map(|(r, (a, b))| {
            let g = a.ad_mul(r);
            let t = g * b.map(|v| v.conj());
            t.map(|v| v.norm_sqr())
        })
        .collect();
    let mut total = DMatrix::<f64>::zeros(dict.num_range(), dict.num_azimuth());
    for s in &per_tx {
        total += s;
    }
    total
}

/// Stacked per-transmitter Kronecker atoms for a support, one column each.
fn atom_matrix(dict: &DictionarySet, support: &[(usize, usize)]) -> DMatrix<Complex64> {
    let k = dict.range[0].nrows();
    let q = dict.azimuth[0].nrows();
    let block = k * q;
    let mut phi = DMatrix::<Complex64>::zeros(block * dict.range.len(), support.len());
    for (mi, (a, b)) in dict.range.iter().zip(&dict.azimuth).enumerate() {
        for (s, &(n, p)) in support.iter().enumerate() {
            for qi in 0..q {
                let bq = b[(qi, p)];
                for i in 0..k {
                    phi[(mi * block + qi * k + i, s)] = a[(i, n)] * bq;
                }
            }
        }
    }
    phi
}

fn stack(y: &[DMatrix<Complex64>]) -> DVector<Complex64> {
    DVector::from_iterator(
        y.iter().map(|m| m.len()).sum(),
        y.iter().flat_map(|m| m.iter().copied()),
    )
}

/// Least-squares amplitudes for `support` against all transmitters at once.
fn refit(
    y_stacked: &DVector<Complex64>,
    dict: &DictionarySet,
    support: &[(usize, usize)],
) -> Result<DVector<Complex64>> {
    let phi = atom_matrix(dict, support);
    let norms: Vec<f64> = phi.column_iter().map(|c| c.norm()).collect();
    let qr = phi.qr();
    let r = qr.r();
    for (j, &norm) in norms.iter().enumerate() {
        if r[(j, j)].norm() <= 1e-10 * norm.max(f64::MIN_POSITIVE) {
            let (range, azimuth) = support[j];
            return Err(Error::RankDeficient { range, azimuth });
        }
    }
    let rhs = qr.q().ad_mul(y_stacked);
    r.solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient {
            range: support[0].0,
            azimuth: support[0].1,
        })
}

fn residuals(
    y: &[DMatrix<Complex64>],
    dict: &DictionarySet,
    support: &[(usize, usize)],
    x: &DVector<Complex64>,
) -> Vec<DMatrix<Complex64>> {
    y.iter()
        .zip(dict.range.iter().zip(&dict.azimuth))
        .map(|(ym, (a, b))| {
            let mut r = ym.clone();
            for (s, &(n, p)) in support.iter().enumerate() {
                let an = a.column(n);
                let bp = b.column(p);
                r -= (an * bp.transpose()) * x[s];
            }
            r
        })
        .collect()
}

/// Greedy simultaneous matrix OMP.
///
/// Stops after `max_targets` selections or once
/// `Σ_m ‖R^m‖_F / Σ_m ‖Y^m‖_F ≤ residual_tol`. Ties in the score are broken
/// toward the smallest range index, then the smallest azimuth index.
pub fn matrix_omp(
    y: &CoefficientSet,
    dict: &DictionarySet,
    max_targets: usize,
    residual_tol: f64,
) -> Result<SparseEstimate> {
    if max_targets == 0 {
        return Err(Error::Config("max_targets must be at least 1".into()));
    }
    check_shapes(y, dict)?;

    let y_norm: f64 = y.matrices.iter().map(|m| m.norm()).sum();
    let energy = |r: &[DMatrix<Complex64>]| r.iter().map(|m| m.norm_squared()).sum::<f64>();
    let mut history = vec![energy(&y.matrices)];
    if y_norm == 0.0 {
        return Ok(SparseEstimate {
            support: Vec::new(),
            amplitudes: Vec::new(),
            residual_norm: 0.0,
            residual_history: history,
        });
    }

    let y_stacked = stack(&y.matrices);
    let cap = max_targets.min(dict.num_range() * dict.num_azimuth());
    let mut support: Vec<(usize, usize)> = Vec::with_capacity(cap);
    let mut amplitudes = DVector::<Complex64>::zeros(0);
    let mut resid = y.matrices.clone();

    while support.len() < cap {
        let scores = score_map(&resid, dict);
        let mut best: Option<((usize, usize), f64)> = None;
        for n in 0..scores.nrows() {
            for p in 0..scores.ncols() {
                if support.contains(&(n, p)) {
                    continue;
                }
                let s = scores[(n, p)];
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some(((n, p), s));
                }
            }
        }
        let Some((cell, _)) = best else { break };
        support.push(cell);
        amplitudes = refit(&y_stacked, dict, &support)?;
        resid = residuals(&y.matrices, dict, &support, &amplitudes);
        history.push(energy(&resid));

        let r_norm: f64 = resid.iter().map(|m| m.norm()).sum();
        if r_norm / y_norm <= residual_tol {
            break;
        }
    }

    Ok(SparseEstimate {
        residual_norm: resid.iter().map(|m| m.norm()).sum(),
        support,
        amplitudes: amplitudes.iter().copied().collect(),
        residual_history: history,
    })
}

/// Range-dictionary mutual coherence on the per-channel Nyquist delay grid:
/// `max_{d=1..N−1} |Σ_{k∈κ} e^{−j2πkd/N}| / K`.
pub fn coherence(dict: &DictionarySet) -> f64 {
    kappa_coherence(&dict.kappa)
}

pub fn kappa_coherence(kappa: &KappaSet) -> f64 {
    let n = kappa.per_channel_n;
    let mut ind = vec![Complex64::new(0.0, 0.0); n];
    for &k in &kappa.indices {
        ind[k] = Complex64::new(1.0, 0.0);
    }
    fft::forward(&mut ind);
    let k = kappa.len() as f64;
    ind[1..].iter().map(|v| v.norm() / k).fold(0.0, f64::max)
}

/// Largest normalized inner product between distinct columns of `a`.
pub fn mutual_coherence(a: &DMatrix<Complex64>) -> f64 {
    let gram = a.ad_mul(a);
    let norms: Vec<f64> = (0..a.ncols()).map(|j| gram[(j, j)].re.sqrt()).collect();
    let mut mu: f64 = 0.0;
    for i in 0..a.ncols() {
        for j in i + 1..a.ncols() {
            mu = mu.max(gram[(i, j)].norm() / (norms[i] * norms[j]));
        }
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mode, ArrayMode};
    use crate::scene::{oracle_coefficients, Scene, Target};
    use crate::waveform::{build_cognitive_plan, prototype_subbands, FdmPlan};
    use crate::xampler::subband_to_kappa;

    fn desk(mode: ArrayMode) -> (ArrayConfig, CognitivePlan, KappaSet, RangeGrid, AzimuthGrid) {
        let array = build_mode(mode, 5);
        let plan = build_cognitive_plan(
            FdmPlan::prototype(array.num_tx),
            prototype_subbands(),
            1.0,
        )
        .unwrap();
        let kappa = subband_to_kappa(&plan).unwrap();
        let rgrid = RangeGrid::uniform(plan.base.pri, 300);
        let agrid = array.azimuth_grid();
        (array, plan, kappa, rgrid, agrid)
    }

    #[test]
    fn grids() {
        let full = RangeGrid::with_range_resolution(100e-6, 1.25);
        assert_eq!(full.len(), 12000);
        let d = RangeGrid::uniform(100e-6, 300);
        assert!((d.cell_m() - 50.0).abs() < 1e-9);
        assert_eq!(d.nearest(d.delays[17] + 0.3 * d.resolution), 17);
    }

    #[test]
    fn dictionary_entries() {
        let (array, plan, kappa, rgrid, agrid) = desk(ArrayMode::Mode2Random8x10);
        let d = build_dictionaries(&array, &plan, &kappa, &rgrid, &agrid).unwrap();
        let p0 = agrid.nearest(0.0);
        for m in 0..8 {
            let a = &d.range[m];
            assert!(a.column(0).iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
            assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
            assert!(d.azimuth[m]
                .column(p0)
                .iter()
                .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
            assert!((a.column(7).norm() - (296f64).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn coherence_extremes() {
        let all = KappaSet {
            indices: (0..64).collect(),
            per_channel_n: 64,
        };
        assert!(kappa_coherence(&all) < 1e-12);
        let one = KappaSet::new(vec![5], 64).unwrap();
        assert!((kappa_coherence(&one) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_by_direct_sum() {
        let (_, plan, kappa, ..) = desk(ArrayMode::Mode1Ula);
        let _ = plan;
        let n = kappa.per_channel_n;
        let direct = (1..n)
            .map(|d| {
                let s: Complex64 = kappa
                    .indices
                    .iter()
                    .map(|&k| Complex64::from_polar(1.0, -2.0 * PI * (k * d) as f64 / n as f64))
                    .sum();
                s.norm() / kappa.len() as f64
            })
            .fold(0.0, f64::max);
        assert!((direct - kappa_coherence(&kappa)).abs() < 1e-9);
    }

    #[test]
    fn zero_input_returns_empty() {
        let (array, plan, kappa, rgrid, agrid) = desk(ArrayMode::Mode3Thinned4x5);
        let d = build_dictionaries(&array, &plan, &kappa, &rgrid, &agrid).unwrap();
        let y = oracle_coefficients(&Scene::default(), &array, &plan, &kappa).unwrap();
        let est = matrix_omp(&y, &d, 5, DEFAULT_RESIDUAL_TOL).unwrap();
        assert!(est.is_empty());
        assert_eq!(est.residual_norm, 0.0);
    }

    #[test]
    fn single_target_in_one_iteration() {
        for mode in ArrayMode::ALL {
            let (array, plan, kappa, rgrid, agrid) = desk(mode);
            let d = build_dictionaries(&array, &plan, &kappa, &rgrid, &agrid).unwrap();
            let (n, p) = (123, agrid.len() / 3);
            let alpha = Complex64::new(0.6, -0.8);
            let scene = Scene::new(vec![Target::new(rgrid.delays[n], agrid.values[p], alpha)]);
            let y = oracle_coefficients(&scene, &array, &plan, &kappa).unwrap();
            let est = matrix_omp(&y, &d, 3, DEFAULT_RESIDUAL_TOL).unwrap();
            assert_eq!(est.support, vec![(n, p)], "{mode}");
            assert!((est.amplitudes[0] - alpha).norm() < 1e-9);
            assert!(est.residual_norm / y.matrices.iter().map(|m| m.norm()).sum::<f64>() < 1e-9);
        }
    }

    #[test]
    fn rejects_zero_cap_and_bad_shapes() {
        let (array, plan, kappa, rgrid, agrid) = desk(ArrayMode::Mode1Ula);
        let d = build_dictionaries(&array, &plan, &kappa, &rgrid, &agrid).unwrap();
        let y = oracle_coefficients(&Scene::default(), &array, &plan, &kappa).unwrap();
        assert!(matrix_omp(&y, &d, 0, 1e-3).is_err());
        let mut short = y.clone();
        short.matrices.pop();
        short.tx_indices.pop();
        assert!(matches!(matrix_omp(&short, &d, 1, 1e-3), Err(Error::Dimension(_))));
    }

    #[test]
    fn duplicate_atoms_are_rank_deficient() {
        // Two identical azimuth columns make the second selection degenerate
        // once the first is already in the support.
        let kappa = KappaSet::new(vec![0, 1, 2], 8).unwrap();
        let a = DMatrix::from_fn(3, 2, |i, n| {
            Complex64::from_polar(1.0, -2.0 * PI * (i * n) as f64 / 8.0)
        });
        let b = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let d = DictionarySet::new(vec![a], vec![b], kappa.clone()).unwrap();
        let err = refit(&stack(&[DMatrix::zeros(3, 2)]), &d, &[(0, 0), (0, 1)]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { range: 0, azimuth: 1 }));
    }
}
