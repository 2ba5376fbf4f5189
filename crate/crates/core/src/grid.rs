//! OFDM resource-grid geometry and pilot patterns.
//!
//! The grid is `M x N` resource elements: `M = num_prb *
//! subcarriers_per_prb` subcarriers (rows) by `N = num_symbols` OFDM symbols
//! (columns). Pilots (DM-RS) occupy a fixed set of symbol columns and a fixed
//! set of subcarrier offsets within every PRB, and carry seeded unit-modulus
//! QPSK values. The default layout is the 51-PRB / 30 kHz / 14-symbol slot
//! with DM-RS at symbols {2, 11} and offsets {0, 1, 6, 7}: 612 x 14 = 8568
//! REs, of which 2 * 51 * 4 = 408 are pilots.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
    #[error("data symbol count mismatch: expected {expected}, got {got}")]
    DataLengthMismatch { expected: usize, got: usize },
    #[error("resource element ({m}, {n}) outside {rows} x {cols} grid")]
    OutOfBounds { m: usize, n: usize, rows: usize, cols: usize },
}

/// Static description of one slot's resource grid and its pilot layout.
///
/// `num_subcarriers` is derived (`num_prb * subcarriers_per_prb`) and
/// intentionally not stored; use [`GridConfig::num_subcarriers`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GridConfig {
    /// Number of physical resource blocks (>= 1).
    pub num_prb: usize,
    /// Subcarriers per PRB (>= 1; 12 for NR).
    pub subcarriers_per_prb: usize,
    /// OFDM symbols per slot (>= 1; 14 for a normal-CP slot).
    pub num_symbols: usize,
    /// Symbol columns carrying DM-RS, strictly increasing, each `< num_symbols`.
    pub dmrs_symbol_indices: Vec<usize>,
    /// Pilot subcarrier offsets within every PRB, strictly increasing, each
    /// `< subcarriers_per_prb`.
    pub dmrs_subcarrier_offsets: Vec<usize>,
    /// Subcarrier spacing in Hz (> 0).
    pub scs_hz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            num_prb: 51,
            subcarriers_per_prb: 12,
            num_symbols: 14,
            dmrs_symbol_indices: vec![2, 11],
            dmrs_subcarrier_offsets: vec![0, 1, 6, 7],
            scs_hz: 30_000.0,
        }
    }
}

impl GridConfig {
    /// Validating constructor. `Default::default()` is the 612 x 14 layout.
    pub fn new(
        num_prb: usize,
        subcarriers_per_prb: usize,
        num_symbols: usize,
        dmrs_symbol_indices: Vec<usize>,
        dmrs_subcarrier_offsets: Vec<usize>,
        scs_hz: f64,
    ) -> Result<Self, GridError> {
        let cfg = GridConfig {
            num_prb,
            subcarriers_per_prb,
            num_symbols,
            dmrs_symbol_indices,
            dmrs_subcarrier_offsets,
            scs_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        fn strictly_increasing(v: &[usize]) -> bool {
            v.windows(2).all(|w| w[0] < w[1])
        }
        let err = |msg: &str| Err(GridError::InvalidConfig(String::from(msg)));
        if self.num_prb == 0 {
            return err("num_prb must be >= 1");
        }
        if self.subcarriers_per_prb == 0 {
            return err("subcarriers_per_prb must be >= 1");
        }
        if self.num_symbols == 0 {
            return err("num_symbols must be >= 1");
        }
        if self.dmrs_symbol_indices.is_empty() {
            return err("dmrs_symbol_indices must not be empty");
        }
        if !strictly_increasing(&self.dmrs_symbol_indices) {
            return err("dmrs_symbol_indices must be strictly increasing");
        }
        if *self.dmrs_symbol_indices.last().unwrap() >= self.num_symbols {
            return err("dmrs_symbol_indices must be < num_symbols");
        }
        if self.dmrs_subcarrier_offsets.is_empty() {
            return err("dmrs_subcarrier_offsets must not be empty");
        }
        if !strictly_increasing(&self.dmrs_subcarrier_offsets) {
            return err("dmrs_subcarrier_offsets must be strictly increasing");
        }
        if *self.dmrs_subcarrier_offsets.last().unwrap() >= self.subcarriers_per_prb {
            return err("dmrs_subcarrier_offsets must be < subcarriers_per_prb");
        }
        if !(self.scs_hz.is_finite() && self.scs_hz > 0.0) {
            return err("scs_hz must be finite and > 0");
        }
        Ok(())
    }

    /// Total subcarriers `M`.
    pub fn num_subcarriers(&self) -> usize {
        self.num_prb * self.subcarriers_per_prb
    }

    /// Total resource elements `M * N`.
    pub fn num_res(&self) -> usize {
        self.num_subcarriers() * self.num_symbols
    }

    /// Number of pilot REs.
    pub fn num_pilots(&self) -> usize {
        self.dmrs_symbol_indices.len() * self.num_prb * self.dmrs_subcarrier_offsets.len()
    }

    /// Number of data (non-pilot) REs.
    pub fn num_data_res(&self) -> usize {
        self.num_res() - self.num_pilots()
    }

    /// Pilot RE coordinates `(m, n)`, sorted lexicographically by `(n, m)`.
    pub fn pilot_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_pilots());
        for &n in &self.dmrs_symbol_indices {
            for prb in 0..self.num_prb {
                for &off in &self.dmrs_subcarrier_offsets {
                    out.push((prb * self.subcarriers_per_prb + off, n));
                }
            }
        }
        out
    }

    /// Boolean mask over the grid, `true` at pilot REs. Indexed `m * N + n`.
    pub fn pilot_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_res()];
        for (m, n) in self.pilot_positions() {
            mask[m * self.num_symbols + n] = true;
        }
        mask
    }

    /// Data RE coordinates in column-major order (symbol by symbol), i.e. the
    /// order in which payload symbols are laid onto the grid.
    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        let mask = self.pilot_mask();
        let mut out = Vec::with_capacity(self.num_data_res());
        for n in 0..self.num_symbols {
            for m in 0..self.num_subcarriers() {
                if !mask[m * self.num_symbols + n] {
                    out.push((m, n));
                }
            }
        }
        out
    }

    /// OFDM symbol duration in seconds (slot of 14 symbols; slot duration
    /// scales inversely with SCS: 0.5 ms at 30 kHz).
    pub fn symbol_duration_s(&self) -> f64 {
        let slot_s = 1e-3 * (15_000.0 / self.scs_hz);
        slot_s / 14.0
    }
}

/// Seeded QPSK pilot values on the configured pilot positions.
///
/// `positions` and `values` are parallel vectors sorted lexicographically by
/// `(symbol, subcarrier)`. Values are unit-modulus with phases drawn
/// uniformly from {pi/4, 3pi/4, 5pi/4, 7pi/4}.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    pub positions: Vec<(usize, usize)>,
    pub values: Vec<Complex64>,
    pub seed: u64,
}

impl PilotPattern {
    pub fn generate(config: &GridConfig, seed: u64) -> Result<Self, GridError> {
        config.validate()?;
        let positions = config.pilot_positions();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = positions
            .iter()
            .map(|_| {
                let k = (rng.next_u32() & 0x3) as f64;
                flt::cis(core::f64::consts::FRAC_PI_4 + k * core::f64::consts::FRAC_PI_2)
            })
            .collect();
        Ok(PilotPattern { positions, values, seed })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Dense `M x N` complex matrix over the grid, stored row-major by
/// subcarrier: element `(m, n)` lives at index `m * N + n`. The same layout
/// doubles as the graph node order (node `i` = RE `(i / N, i % N)`).
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    num_subcarriers: usize,
    num_symbols: usize,
    data: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn zeros(num_subcarriers: usize, num_symbols: usize) -> Self {
        ResourceGrid {
            num_subcarriers,
            num_symbols,
            data: vec![Complex64::new(0.0, 0.0); num_subcarriers * num_symbols],
        }
    }

    pub fn for_config(config: &GridConfig) -> Self {
        Self::zeros(config.num_subcarriers(), config.num_symbols)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    #[inline]
    pub fn index(&self, m: usize, n: usize) -> usize {
        debug_assert!(m < self.num_subcarriers && n < self.num_symbols);
        m * self.num_symbols + n
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[self.index(m, n)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        let i = self.index(m, n);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Mean per-RE energy `(1/MN) sum |x|^2`.
    pub fn mean_energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    /// Builds a transmit grid: pilot values at pilot REs, `data_symbols` laid
    /// column-major onto the remaining REs.
    pub fn compose(
        config: &GridConfig,
        pilots: &PilotPattern,
        data_symbols: &[Complex64],
    ) -> Result<Self, GridError> {
        config.validate()?;
        let expected = config.num_data_res();
        if data_symbols.len() != expected {
            return Err(GridError::DataLengthMismatch { expected, got: data_symbols.len() });
        }
        let mut grid = Self::for_config(config);
        for (i, &(m, n)) in pilots.positions.iter().enumerate() {
            if m >= grid.num_subcarriers || n >= grid.num_symbols {
                return Err(GridError::OutOfBounds {
                    m,
                    n,
                    rows: grid.num_subcarriers,
                    cols: grid.num_symbols,
                });
            }
            grid.set(m, n, pilots.values[i]);
        }
        for (&(m, n), &v) in config.data_positions().iter().zip(data_symbols) {
            grid.set(m, n, v);
        }
        Ok(grid)
    }
}
