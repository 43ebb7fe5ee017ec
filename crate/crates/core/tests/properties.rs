use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use snmimo::harness::experiment::Profile;
use snmimo::harness::Setup;
use snmimo::recovery::score_map;
use snmimo::waveform::{build_cognitive_plan, FdmPlan, Subband};
use snmimo::xampler::{check_coset, subband_to_kappa};
use snmimo::{
    acquire, matrix_omp, oracle_coefficients, synth_received, AdcConfig, ArrayMode,
    CoefficientSet, DictionarySet, Error, KappaSet, Scene, Target,
};

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(r, c, |_, _| gaussian(rng))
}

struct Instance {
    y: CoefficientSet,
    dict: DictionarySet,
}

fn instance(seed: u64, m_tx: usize, k: usize, q: usize, nr: usize, na: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = KappaSet::new((0..k).collect(), k + 1).unwrap();
    let dict = DictionarySet::new(
        (0..m_tx).map(|_| random_matrix(&mut rng, k, nr)).collect(),
        (0..m_tx).map(|_| random_matrix(&mut rng, q, na)).collect(),
        kappa.clone(),
    )
    .unwrap();
    let y = CoefficientSet {
        matrices: (0..m_tx).map(|_| random_matrix(&mut rng, k, q)).collect(),
        kappa,
        tx_indices: (0..m_tx).collect(),
        rx_indices: (0..q).collect(),
    };
    Instance { y, dict }
}

fn residual(inst: &Instance, support: &[(usize, usize)], amps: &[Complex64]) -> Vec<DMatrix<Complex64>> {
    inst.y
        .matrices
        .iter()
        .enumerate()
        .map(|(m, ym)| {
            let mut r = ym.clone();
            for (&(n, p), &a) in support.iter().zip(amps) {
                r -= inst.dict.range[m].column(n) * inst.dict.azimuth[m].column(p).transpose() * a;
            }
            r
        })
        .collect()
}

fn atom_inner(inst: &Instance, r: &[DMatrix<Complex64>], n: usize, p: usize) -> Complex64 {
    r.iter()
        .enumerate()
        .map(|(m, rm)| {
            let atom = inst.dict.range[m].column(n) * inst.dict.azimuth[m].column(p).transpose();
            atom.iter().zip(rm.iter()).map(|(a, v)| a.conj() * v).sum::<Complex64>()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_energy_never_increases(
        seed in any::<u64>(),
        m_tx in 1usize..4, k in 3usize..10, q in 2usize..6, nr in 2usize..30, na in 2usize..30,
        cap in 1usize..6,
    ) {
        let inst = instance(seed, m_tx, k, q, nr, na);
        match matrix_omp(&inst.y, &inst.dict, cap, 0.0) {
            Ok(est) => {
                prop_assert_eq!(est.residual_history.len(), est.support.len() + 1);
                for w in est.residual_history.windows(2) {
                    prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
                }
            }
            Err(Error::RankDeficient { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn refit_leaves_residual_orthogonal_to_support(
        seed in any::<u64>(),
        m_tx in 1usize..4, k in 4usize..10, q in 2usize..6, nr in 2usize..30, na in 2usize..30,
        cap in 1usize..5,
    ) {
        let inst = instance(seed, m_tx, k, q, nr, na);
        if let Ok(est) = matrix_omp(&inst.y, &inst.dict, cap, 0.0) {
            let r = residual(&inst, &est.support, &est.amplitudes);
            let scale: f64 = r.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
                * ((k * q * m_tx) as f64).sqrt();
            for &(n, p) in &est.support {
                prop_assert!(atom_inner(&inst, &r, n, p).norm() <= 1e-8 * scale + 1e-10);
            }
        }
    }

    #[test]
    fn score_map_matches_brute_force(
        seed in any::<u64>(),
        m_tx in 1usize..4, k in 2usize..8, q in 1usize..5, nr in 1usize..20, na in 1usize..20,
    ) {
        let inst = instance(seed, m_tx, k, q, nr, na);
        let fast = score_map(&inst.y.matrices, &inst.dict);
        for n in 0..nr {
            for p in 0..na {
                let slow: f64 = (0..m_tx)
                    .map(|m| {
                        let atom = inst.dict.range[m].column(n) * inst.dict.azimuth[m].column(p).transpose();
                        atom.iter()
                            .zip(inst.y.matrices[m].iter())
                            .map(|(a, v)| a.conj() * v)
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .sum();
                prop_assert!((fast[(n, p)] - slow).abs() <= 1e-9 * slow.max(1.0));
            }
        }
    }
}

fn mode3_setup() -> Setup {
    Setup::prototype(ArrayMode::Mode3Thinned4x5, Profile::Desk, 2).unwrap()
}

fn coefficients(setup: &Setup, scene: &Scene) -> CoefficientSet {
    let rx = synth_received(scene, &setup.array, &setup.plan, setup.sample_rate).unwrap();
    let tx: Vec<usize> = (0..setup.array.num_tx).collect();
    let rxs: Vec<usize> = (0..setup.array.num_rx).collect();
    acquire(&rx, &setup.plan, &setup.adc, &setup.kappa, &tx, &rxs).unwrap()
}

fn target_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.0..99e-6f64, -1.0..1.0f64, 0.1..2.0f64, -180.0..180.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pipeline_is_linear(
        a in target_strategy(),
        b in target_strategy(),
        c_re in -2.0..2.0f64,
        c_im in -2.0..2.0f64,
    ) {
        let setup = mode3_setup();
        let t = |(d, s, amp, ph): (f64, f64, f64, f64)| {
            Target::new(d, s, Complex64::from_polar(amp, ph.to_radians()))
        };
        let c = Complex64::new(c_re, c_im);
        let sa = Scene::new(vec![t(a)]);
        let sb = Scene::new(vec![t(b)]);
        let joint = Scene::new(vec![t(a), t(b)]);
        let ya = coefficients(&setup, &sa);
        let yb = coefficients(&setup, &sb);
        let yj = coefficients(&setup, &joint);
        let yc = coefficients(&setup, &sa.scaled(c));
        for m in 0..ya.matrices.len() {
            let sum = &ya.matrices[m] + &yb.matrices[m];
            prop_assert!((&yj.matrices[m] - &sum).norm() <= 1e-9 * sum.norm().max(1e-12));
            let scaled = &ya.matrices[m] * c;
            prop_assert!((&yc.matrices[m] - &scaled).norm() <= 1e-9 * scaled.norm().max(1e-12));
        }
    }

    /// Whenever slices pass the coset check, the sub-Nyquist receiver is
    /// exact: it reproduces the oracle coefficients.
    #[test]
    fn passing_coset_check_means_exact_acquisition(
        slots in proptest::collection::btree_set(0usize..40, 1..6),
        width_bins in 5usize..30,
        delay in 0.0..99e-6f64,
        sin_doa in -1.0..1.0f64,
    ) {
        let setup = mode3_setup();
        // Candidate slices on a 300 kHz lattice inside the 12 MHz band.
        let slices: Vec<Subband> = slots
            .iter()
            .map(|&s| {
                let lo = s as f64 * 300e3;
                Subband::new(lo, lo + width_bins as f64 * 10e3)
            })
            .filter(|b| b.hi <= 12e6)
            .collect();
        prop_assume!(!slices.is_empty());
        let plan = match build_cognitive_plan(FdmPlan::prototype(4), slices, 1.0) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let adc = AdcConfig::prototype();
        prop_assume!(check_coset(&plan, &adc));
        let kappa = subband_to_kappa(&plan).unwrap();
        let scene = Scene::new(vec![Target::new(delay, sin_doa, Complex64::new(1.0, 0.0))]);
        let rx = synth_received(&scene, &setup.array, &plan, setup.sample_rate).unwrap();
        let y = acquire(&rx, &plan, &adc, &kappa, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        let o = oracle_coefficients(&scene, &setup.array, &plan, &kappa).unwrap();
        for (a, b) in y.matrices.iter().zip(&o.matrices) {
            prop_assert!((a - b).norm() <= 1e-6 * b.norm());
        }
    }
}

#[test]
fn coset_violation_is_reported_by_extraction() {
    // Two slices exactly one ADC period apart fold onto each other.
    let plan = build_cognitive_plan(
        FdmPlan::prototype(4),
        vec![Subband::new(1e6, 1.2e6), Subband::new(8.5e6, 8.7e6)],
        1.0,
    )
    .unwrap();
    let adc = AdcConfig::prototype();
    assert!(!check_coset(&plan, &adc));
    let setup = mode3_setup();
    let kappa = subband_to_kappa(&plan).unwrap();
    let scene = Scene::new(vec![Target::new(10e-6, 0.1, Complex64::new(1.0, 0.0))]);
    let rx = synth_received(&scene, &setup.array, &plan, setup.sample_rate).unwrap();
    let err = acquire(&rx, &plan, &adc, &kappa, &[0], &[0]).unwrap_err();
    assert!(matches!(err, Error::CosetViolation { .. }));
    assert_eq!(err.category(), "sampling");
}
