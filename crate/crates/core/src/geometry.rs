//! Array layouts for the four prototype modes.
//!
//! Element positions are integers on a half-wavelength slot grid. A transmit
//! element at slot `ξ` and a receive element at slot `ζ` together form a
//! virtual element at `ξ + ζ`, whose spatial phase for a target at
//! sine-of-DoA `θ` is `exp(jπ(ξ + ζ)θ)`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default operating wavelength (X band, 10 GHz carrier).
pub const DEFAULT_WAVELENGTH: f64 = 0.03;

/// The four array configurations of the prototype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrayMode {
    /// Filled 8×10 virtual ULA.
    #[serde(rename = "mode1")]
    Mode1Ula,
    /// 8 Tx, 10 Rx placed at random within the 8×10 aperture.
    #[serde(rename = "mode2")]
    Mode2Random8x10,
    /// Thinned 4 Tx, 5 Rx within the 8×10 aperture.
    #[serde(rename = "mode3")]
    Mode3Thinned4x5,
    /// Thinned 8 Tx, 10 Rx within a 20×20 aperture.
    #[serde(rename = "mode4")]
    Mode4Thinned8x10,
}

impl ArrayMode {
    pub const ALL: [ArrayMode; 4] = [
        ArrayMode::Mode1Ula,
        ArrayMode::Mode2Random8x10,
        ArrayMode::Mode3Thinned4x5,
        ArrayMode::Mode4Thinned8x10,
    ];

    /// Physical transmit and receive element counts.
    pub fn element_counts(self) -> (usize, usize) {
        match self {
            ArrayMode::Mode3Thinned4x5 => (4, 5),
            _ => (8, 10),
        }
    }

    /// Dimensions `(T, R)` of the equivalent filled virtual array.
    pub fn virtual_dims(self) -> (usize, usize) {
        match self {
            ArrayMode::Mode4Thinned8x10 => (20, 20),
            _ => (8, 10),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ArrayMode::Mode1Ula => 1,
            ArrayMode::Mode2Random8x10 => 2,
            ArrayMode::Mode3Thinned4x5 => 3,
            ArrayMode::Mode4Thinned8x10 => 4,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(ArrayMode::Mode1Ula),
            2 => Ok(ArrayMode::Mode2Random8x10),
            3 => Ok(ArrayMode::Mode3Thinned4x5),
            4 => Ok(ArrayMode::Mode4Thinned8x10),
            _ => Err(Error::Config(format!("unknown array mode {n}"))),
        }
    }
}

impl std::fmt::Display for ArrayMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mode {}", self.number())
    }
}

/// A concrete array layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub mode: ArrayMode,
    /// Wavelength in meters.
    pub wavelength: f64,
    pub num_tx: usize,
    pub num_rx: usize,
    pub virtual_t: usize,
    pub virtual_r: usize,
    /// Transmit positions in half-wavelength units, strictly increasing.
    pub tx_positions: Vec<usize>,
    /// Receive positions in half-wavelength units, strictly increasing.
    pub rx_positions: Vec<usize>,
    /// Number of half-wavelength slots in the aperture (`T·R`).
    pub aperture_slots: usize,
    pub seed: u64,
}

/// Sine-of-DoA grid `θ_p = −1 + 2p/(T·R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthGrid {
    pub values: Vec<f64>,
}

impl AzimuthGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.values.len() as f64
    }

    /// Index of the grid point nearest to `sin_doa`.
    pub fn nearest(&self, sin_doa: f64) -> usize {
        let n = self.values.len();
        let p = ((sin_doa + 1.0) / self.spacing()).round();
        (p.max(0.0) as usize).min(n - 1)
    }
}

/// Builds the layout for `mode`. Random layouts are a deterministic function
/// of `seed`; Mode 1 ignores it.
pub fn build_mode(mode: ArrayMode, seed: u64) -> ArrayConfig {
    let (num_tx, num_rx) = mode.element_counts();
    let (virtual_t, virtual_r) = mode.virtual_dims();
    let aperture_slots = virtual_t * virtual_r;

    let (tx_positions, rx_positions) = match mode {
        ArrayMode::Mode1Ula => (
            (0..num_tx).map(|m| m * virtual_r).collect(),
            (0..num_rx).collect(),
        ),
        _ => random_layout(num_tx, num_rx, aperture_slots, seed),
    };

    ArrayConfig {
        mode,
        wavelength: DEFAULT_WAVELENGTH,
        num_tx,
        num_rx,
        virtual_t,
        virtual_r,
        tx_positions,
        rx_positions,
        aperture_slots,
        seed,
    }
}

/// Draws Tx and Rx slots without replacement (per list), pinning the first
/// and last aperture slots so the layout spans the whole aperture.
fn random_layout(
    num_tx: usize,
    num_rx: usize,
    slots: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tx = Vec::with_capacity(num_tx);
    let mut rx = Vec::with_capacity(num_rx);

    for edge in [0, slots - 1] {
        // Pick the list that owns this edge, weighted by list size, keeping
        // at least one free position in each list.
        let tx_room = tx.len() < num_tx;
        let rx_room = rx.len() < num_rx;
        let to_tx = match (tx_room, rx_room) {
            (true, true) => rng.random_range(0..num_tx + num_rx) < num_tx,
            (true, false) => true,
            _ => false,
        };
        if to_tx {
            tx.push(edge);
        } else {
            rx.push(edge);
        }
    }

    fill(&mut tx, num_tx, slots, &mut rng);
    fill(&mut rx, num_rx, slots, &mut rng);
    (tx, rx)
}

fn fill(list: &mut Vec<usize>, count: usize, slots: usize, rng: &mut ChaCha8Rng) {
    let free: Vec<usize> = (0..slots).filter(|s| !list.contains(s)).collect();
    let need = count - list.len();
    for i in index::sample(rng, free.len(), need) {
        list.push(free[i]);
    }
    list.sort_unstable();
}

impl ArrayConfig {
    /// Checks the layout invariants. Used when a config is loaded from disk.
    pub fn validate(&self) -> Result<()> {
        if self.tx_positions.len() != self.num_tx || self.rx_positions.len() != self.num_rx {
            return Err(Error::Config(
                "position list lengths do not match element counts".into(),
            ));
        }
        if self.aperture_slots != self.virtual_t * self.virtual_r {
            return Err(Error::Config("aperture_slots must equal T·R".into()));
        }
        for (name, list) in [("tx", &self.tx_positions), ("rx", &self.rx_positions)] {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "{name} positions must be strictly increasing"
                )));
            }
            if list.iter().any(|&p| p >= self.aperture_slots) {
                return Err(Error::Config(format!("{name} position outside aperture")));
            }
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Config("wavelength must be positive".into()));
        }
        Ok(())
    }

    /// Spatial phase coefficient `β_mq = (ξ_m + ζ_q)/2`.
    pub fn beta(&self, m: usize, q: usize) -> Result<f64> {
        let xi = self.tx_positions.get(m).ok_or(Error::InvalidIndex {
            kind: "tx",
            index: m,
            len: self.num_tx,
        })?;
        let zeta = self.rx_positions.get(q).ok_or(Error::InvalidIndex {
            kind: "rx",
            index: q,
            len: self.num_rx,
        })?;
        Ok((xi + zeta) as f64 / 2.0)
    }

    pub fn azimuth_grid(&self) -> AzimuthGrid {
        let n = self.virtual_t * self.virtual_r;
        AzimuthGrid {
            values: (0..n).map(|p| -1.0 + 2.0 * p as f64 / n as f64).collect(),
        }
    }

    /// `Z = T·R/2`.
    pub fn normalized_aperture(&self) -> f64 {
        (self.virtual_t * self.virtual_r) as f64 / 2.0
    }

    pub fn physical_aperture_m(&self) -> f64 {
        self.aperture_slots as f64 * self.wavelength / 2.0
    }

    /// Virtual element positions `ξ_m + ζ_q`, transmitter-major.
    pub fn virtual_positions(&self) -> Vec<usize> {
        self.tx_positions
            .iter()
            .flat_map(|&xi| self.rx_positions.iter().map(move |&zeta| xi + zeta))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode1_is_classic_virtual_ula() {
        let cfg = build_mode(ArrayMode::Mode1Ula, 0);
        assert_eq!(cfg.rx_positions, (0..10).collect::<Vec<_>>());
        assert_eq!(cfg.tx_positions, vec![0, 10, 20, 30, 40, 50, 60, 70]);
        let mut v = cfg.virtual_positions();
        v.sort_unstable();
        assert_eq!(v, (0..80).collect::<Vec<_>>());
    }

    #[test]
    fn table_dimensions() {
        for mode in ArrayMode::ALL {
            let cfg = build_mode(mode, 11);
            cfg.validate().unwrap();
            let (m, q) = mode.element_counts();
            assert_eq!((cfg.num_tx, cfg.num_rx), (m, q));
            match mode {
                ArrayMode::Mode4Thinned8x10 => {
                    assert_eq!(cfg.aperture_slots, 400);
                    assert_eq!(cfg.normalized_aperture(), 200.0);
                    assert!((cfg.physical_aperture_m() - 6.0).abs() < 1e-12);
                }
                _ => {
                    assert_eq!(cfg.aperture_slots, 80);
                    assert_eq!(cfg.normalized_aperture(), 40.0);
                    assert!((cfg.physical_aperture_m() - 1.2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn beta_values() {
        let cfg = build_mode(ArrayMode::Mode1Ula, 0);
        assert_eq!(cfg.beta(0, 0).unwrap(), 0.0);
        assert_eq!(cfg.beta(1, 2).unwrap(), 6.0);
        assert_eq!(cfg.beta(7, 9).unwrap(), 39.5);
        assert!(matches!(
            cfg.beta(8, 0),
            Err(Error::InvalidIndex { kind: "tx", .. })
        ));
        assert!(matches!(
            cfg.beta(0, 10),
            Err(Error::InvalidIndex { kind: "rx", .. })
        ));
    }

    #[test]
    fn random_modes_span_aperture() {
        for seed in 0..200 {
            for mode in [
                ArrayMode::Mode2Random8x10,
                ArrayMode::Mode3Thinned4x5,
                ArrayMode::Mode4Thinned8x10,
            ] {
                let cfg = build_mode(mode, seed);
                let last = cfg.aperture_slots - 1;
                let has = |s| cfg.tx_positions.contains(&s) || cfg.rx_positions.contains(&s);
                assert!(has(0) && has(last), "{mode} seed {seed}");
                cfg.validate().unwrap();
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = build_mode(ArrayMode::Mode3Thinned4x5, 42);
        let b = build_mode(ArrayMode::Mode3Thinned4x5, 42);
        assert_eq!(a, b);
        let c = build_mode(ArrayMode::Mode3Thinned4x5, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn azimuth_grid_matches_resolution() {
        let g = build_mode(ArrayMode::Mode1Ula, 0).azimuth_grid();
        assert_eq!(g.len(), 80);
        assert!((g.spacing() - 0.025).abs() < 1e-15);
        assert_eq!(g.values[0], -1.0);
        assert!(g.values.iter().all(|&v| v < 1.0));

        let g4 = build_mode(ArrayMode::Mode4Thinned8x10, 0).azimuth_grid();
        assert_eq!(g4.len(), 400);
        assert!((g4.values[1] - g4.values[0] - 0.005).abs() < 1e-12);
        assert_eq!(g4.nearest(0.0), 200);
    }
}
