//! Classical channel estimators: least squares at pilots, two-stage linear
//! interpolation, and a delay-domain denoising ("practical") estimator.
//!
//! All estimators consume a received [`ResourceGrid`] plus the pilot pattern
//! and produce a full-grid estimate. The practical estimator additionally
//! reports a per-RE noise-power estimate obtained from the energy it removes
//! in the delay domain.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::flt;
use crate::grid::{GridConfig, PilotPattern, ResourceGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("no pilot observations")]
    EmptyPilots,
    #[error("positions/values length mismatch: {positions} vs {values}")]
    LengthMismatch { positions: usize, values: usize },
    #[error("pilot position ({m}, {n}) outside a {rows}x{cols} grid")]
    OutOfBounds { m: usize, n: usize, rows: usize, cols: usize },
    #[error("duplicate pilot position ({m}, {n})")]
    DuplicatePilot { m: usize, n: usize },
    #[error("pilot symbol at ({m}, {n}) has zero energy")]
    ZeroPilot { m: usize, n: usize },
    #[error("invalid estimator config: {0}")]
    InvalidConfig(String),
    #[error("numeric invariant violated: {0}")]
    Numeric(String),
}

/// Channel estimates at scattered grid positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub positions: Vec<(usize, usize)>,
    pub values: Vec<Complex64>,
}

/// A full-grid estimate; `sigma2_est` is present for estimators that also
/// estimate the noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct FullEstimate {
    pub h: ResourceGrid,
    pub sigma2_est: Option<f64>,
}

/// Least-squares estimate at each pilot: `h_hat = y * conj(p) / |p|^2`.
pub fn ls_at_pilots(rx: &ResourceGrid, pilots: &PilotPattern) -> Result<SparseEstimate, EstimatorError> {
    if pilots.positions.is_empty() {
        return Err(EstimatorError::EmptyPilots);
    }
    if pilots.positions.len() != pilots.values.len() {
        return Err(EstimatorError::LengthMismatch {
            positions: pilots.positions.len(),
            values: pilots.values.len(),
        });
    }
    let (rows, cols) = (rx.num_subcarriers(), rx.num_symbols());
    let mut values = Vec::with_capacity(pilots.positions.len());
    for (&(m, n), &p) in pilots.positions.iter().zip(&pilots.values) {
        if m >= rows || n >= cols {
            return Err(EstimatorError::OutOfBounds { m, n, rows, cols });
        }
        let energy = p.norm_sqr();
        if energy == 0.0 {
            return Err(EstimatorError::ZeroPilot { m, n });
        }
        values.push(rx.get(m, n) * p.conj() / energy);
    }
    Ok(SparseEstimate { positions: pilots.positions.clone(), values })
}

/// Pilot observations grouped by OFDM symbol, each sorted by subcarrier.
fn group_by_symbol(
    sparse: &SparseEstimate,
    config: &GridConfig,
) -> Result<BTreeMap<usize, Vec<(usize, Complex64)>>, EstimatorError> {
    if sparse.positions.is_empty() {
        return Err(EstimatorError::EmptyPilots);
    }
    if sparse.positions.len() != sparse.values.len() {
        return Err(EstimatorError::LengthMismatch {
            positions: sparse.positions.len(),
            values: sparse.values.len(),
        });
    }
    let (rows, cols) = (config.num_subcarriers(), config.num_symbols);
    let mut by_symbol: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
    for (&(m, n), &v) in sparse.positions.iter().zip(&sparse.values) {
        if m >= rows || n >= cols {
            return Err(EstimatorError::OutOfBounds { m, n, rows, cols });
        }
        by_symbol.entry(n).or_default().push((m, v));
    }
    for (&n, pts) in by_symbol.iter_mut() {
        pts.sort_by_key(|&(m, _)| m);
        for w in pts.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(EstimatorError::DuplicatePilot { m: w[0].0, n });
            }
        }
    }
    Ok(by_symbol)
}

/// Piecewise-linear interpolation of `pts` (sorted by position, non-empty)
/// onto `0..len`, holding the edge values outside the pilot span. Positions
/// that carry a pilot pass its value through untouched.
fn lerp_axis(pts: &[(usize, Complex64)], len: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(len);
    let last = pts.len() - 1;
    let mut cur = 0usize;
    for x in 0..len {
        if x <= pts[0].0 {
            out.push(pts[0].1);
        } else if x >= pts[last].0 {
            out.push(pts[last].1);
        } else {
            while cur + 1 < pts.len() && pts[cur + 1].0 <= x {
                cur += 1;
            }
            if pts[cur].0 == x {
                out.push(pts[cur].1);
            } else {
                let (xa, va) = pts[cur];
                let (xb, vb) = pts[cur + 1];
                let t = (x - xa) as f64 / (xb - xa) as f64;
                out.push(va + (vb - va) * t);
            }
        }
    }
    out
}

/// Two-stage linear interpolation of sparse pilot estimates onto the full
/// grid: first along frequency within each pilot-bearing symbol, then along
/// time per subcarrier. Outside the pilot span both stages hold the nearest
/// edge value. Exact on fields affine in `(m, n)` inside the pilot bounding
/// box, and a passthrough at pilot positions.
pub fn interpolate_2d(sparse: &SparseEstimate, config: &GridConfig) -> Result<FullEstimate, EstimatorError> {
    let by_symbol = group_by_symbol(sparse, config)?;
    let m_count = config.num_subcarriers();
    let n_count = config.num_symbols;

    // Stage 1: full frequency column per pilot-bearing symbol.
    let cols: Vec<(usize, Vec<Complex64>)> = by_symbol
        .iter()
        .map(|(&n, pts)| (n, lerp_axis(pts, m_count)))
        .collect();

    // Stage 2: linear in time between pilot-bearing symbols, edge hold outside.
    let mut h = ResourceGrid::zeros(m_count, n_count);
    let slice = h.as_mut_slice();
    let last = cols.len() - 1;
    let mut cur = 0usize;
    for n in 0..n_count {
        if n <= cols[0].0 {
            let col = &cols[0].1;
            for m in 0..m_count {
                slice[m * n_count + n] = col[m];
            }
        } else if n >= cols[last].0 {
            let col = &cols[last].1;
            for m in 0..m_count {
                slice[m * n_count + n] = col[m];
            }
        } else {
            while cur + 1 < cols.len() && cols[cur + 1].0 <= n {
                cur += 1;
            }
            if cols[cur].0 == n {
                let col = &cols[cur].1;
                for m in 0..m_count {
                    slice[m * n_count + n] = col[m];
                }
            } else {
                let (na, col_a) = (cols[cur].0, &cols[cur].1);
                let (nb, col_b) = (cols[cur + 1].0, &cols[cur + 1].1);
                let t = (n - na) as f64 / (nb - na) as f64;
                for m in 0..m_count {
                    slice[m * n_count + n] = col_a[m] + (col_b[m] - col_a[m]) * t;
                }
            }
        }
    }
    Ok(FullEstimate { h, sigma2_est: None })
}

/// Least squares at pilots followed by 2-D interpolation.
pub fn ls_estimate(
    rx: &ResourceGrid,
    pilots: &PilotPattern,
    config: &GridConfig,
) -> Result<FullEstimate, EstimatorError> {
    interpolate_2d(&ls_at_pilots(rx, pilots)?, config)
}

/// Tuning for the delay-domain denoising estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PracticalConfig {
    /// A delay bin survives only if its energy exceeds `kappa` times the
    /// measured noise floor.
    pub threshold_kappa: f64,
    /// Fraction of delay bins (from bin 0 upward) eligible to survive.
    pub keep_fraction: f64,
    /// Fraction of trailing delay bins used to measure the noise floor.
    pub noise_floor_fraction: f64,
}

impl Default for PracticalConfig {
    fn default() -> Self {
        PracticalConfig { threshold_kappa: 3.0, keep_fraction: 0.25, noise_floor_fraction: 0.25 }
    }
}

impl PracticalConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let err = |m: &str| Err(EstimatorError::InvalidConfig(String::from(m)));
        if !(self.threshold_kappa.is_finite() && self.threshold_kappa >= 0.0) {
            return err("threshold_kappa must be finite and >= 0");
        }
        let frac_ok = |f: f64| f.is_finite() && (0.0..=1.0).contains(&f);
        if !frac_ok(self.keep_fraction) || self.keep_fraction == 0.0 {
            return err("keep_fraction must be in (0, 1]");
        }
        if !frac_ok(self.noise_floor_fraction) {
            return err("noise_floor_fraction must be in [0, 1]");
        }
        Ok(())
    }
}

/// Denoises one symbol's pilot-index sequence in the delay domain.
///
/// Forward transform `d_k = (1/P) sum_q v_q e^{+j 2 pi k q / P}` over the
/// pilot index `q` (not the physical subcarrier), threshold against the
/// noise floor `nu` (mean energy of the trailing `floor(P *
/// noise_floor_fraction)` bins), zero everything at or beyond `ceil(P *
/// keep_fraction)`, and transform back. Returns the denoised sequence and
/// the per-RE noise power estimate: the total energy of the zeroed bins,
/// which by Parseval is exactly the removed energy divided by `P`.
pub fn denoise_symbol(
    values: &[Complex64],
    config: &PracticalConfig,
) -> Result<(Vec<Complex64>, f64), EstimatorError> {
    config.validate()?;
    let p = values.len();
    if p == 0 {
        return Err(EstimatorError::EmptyPilots);
    }

    let roots: Vec<Complex64> = (0..p)
        .map(|r| flt::cis(core::f64::consts::TAU * r as f64 / p as f64))
        .collect();

    let mut d = vec![Complex64::new(0.0, 0.0); p];
    for (k, dk) in d.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (q, &v) in values.iter().enumerate() {
            acc += v * roots[(k * q) % p];
        }
        *dk = acc / p as f64;
    }

    let floor_bins = (p as f64 * config.noise_floor_fraction) as usize;
    let nu = if floor_bins == 0 {
        0.0
    } else {
        d[p - floor_bins..].iter().map(|z| z.norm_sqr()).sum::<f64>() / floor_bins as f64
    };
    let keep_limit = flt::ceil_usize(p as f64 * config.keep_fraction);
    let threshold = config.threshold_kappa * nu;

    let mut keep = vec![false; p];
    let mut sigma2 = 0.0;
    for k in 0..p {
        if k < keep_limit && d[k].norm_sqr() >= threshold {
            keep[k] = true;
        } else {
            sigma2 += d[k].norm_sqr();
        }
    }

    let mut out = vec![Complex64::new(0.0, 0.0); p];
    for (q, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..p {
            if keep[k] {
                acc += d[k] * roots[(k * q) % p].conj();
            }
        }
        *o = acc;
    }

    let in_energy: f64 = values.iter().map(|z| z.norm_sqr()).sum();
    let out_energy: f64 = out.iter().map(|z| z.norm_sqr()).sum();
    if out_energy > in_energy + 1e-9 {
        return Err(EstimatorError::Numeric(String::from(
            "denoising increased pilot energy",
        )));
    }
    Ok((out, sigma2))
}

/// Delay-domain denoising over sparse LS estimates, then 2-D interpolation.
/// `sigma2_est` is the mean of the per-symbol removed-energy estimates.
pub fn practical_from_sparse(
    sparse: &SparseEstimate,
    config: &GridConfig,
    practical: &PracticalConfig,
) -> Result<FullEstimate, EstimatorError> {
    let by_symbol = group_by_symbol(sparse, config)?;
    let mut positions = Vec::with_capacity(sparse.positions.len());
    let mut values = Vec::with_capacity(sparse.positions.len());
    let mut sigma2_sum = 0.0;
    for (&n, pts) in by_symbol.iter() {
        let col: Vec<Complex64> = pts.iter().map(|&(_, v)| v).collect();
        let (denoised, sigma2) = denoise_symbol(&col, practical)?;
        sigma2_sum += sigma2;
        for (&(m, _), v) in pts.iter().zip(denoised) {
            positions.push((m, n));
            values.push(v);
        }
    }
    let sigma2_est = sigma2_sum / by_symbol.len() as f64;
    let mut full = interpolate_2d(&SparseEstimate { positions, values }, config)?;
    full.sigma2_est = Some(sigma2_est);
    Ok(full)
}

/// LS at pilots, delay-domain denoising, 2-D interpolation.
pub fn practical_estimate(
    rx: &ResourceGrid,
    pilots: &PilotPattern,
    config: &GridConfig,
    practical: &PracticalConfig,
) -> Result<FullEstimate, EstimatorError> {
    practical_from_sparse(&ls_at_pilots(rx, pilots)?, config, practical)
}

/// Mean squared complex error between two same-shape grids, the common metric
/// for every estimator. Panics if shapes differ.
pub fn grid_mse(a: &ResourceGrid, b: &ResourceGrid) -> f64 {
    let (sa, sb) = (a.as_slice(), b.as_slice());
    assert_eq!(sa.len(), sb.len(), "grid shapes differ");
    sa.iter().zip(sb).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / sa.len() as f64
}
