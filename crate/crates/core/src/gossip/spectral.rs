//! Stationary weights and contraction constants of gossip matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{DelaySpec, GossipMatrix};
use crate::error::{Error, Result};

/// Residual `‖πᵀW − πᵀ‖∞` a stationary vector must reach.
pub const STATIONARY_TOLERANCE: f64 = 1e-12;
/// Power iteration keeps going below [`STATIONARY_TOLERANCE`] until the
/// update stalls or reaches this level.
const STATIONARY_TARGET: f64 = 1e-16;
pub const STATIONARY_MAX_ITERATIONS: usize = 1_000_000;
/// Iterations without improvement after which the residual is considered
/// to have hit round-off.
const STALL_WINDOW: usize = 2_000;

const NORM_TOLERANCE: f64 = 1e-15;
const NORM_MAX_ITERATIONS: usize = 200_000;

/// Largest `τ_g` examined by [`minimal_tau_g`].
pub const DEFAULT_TAU_CAP: usize = 1_000;

/// Contraction of `W^τ` towards its limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub tau_g: usize,
    /// `‖W^τ − W^∞‖₂²`
    pub contraction_sq: f64,
    /// `1 − contraction_sq`
    pub c: f64,
}

impl Contraction {
    fn new(tau_g: usize, contraction_sq: f64) -> Self {
        Self {
            tau_g,
            contraction_sq,
            c: 1.0 - contraction_sq,
        }
    }
}

/// Stationary weights `π` (left Perron vector, summing to one) over every
/// node of a possibly extended matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInfo {
    pub pi: Vec<f64>,
    pub real_count: usize,
    /// `‖πᵀW − πᵀ‖∞` at the returned vector.
    pub residual: f64,
    pub iterations: usize,
    pub contraction: Option<Contraction>,
}

impl SpectralInfo {
    pub fn size(&self) -> usize {
        self.pi.len()
    }

    pub fn real_pi(&self) -> &[f64] {
        &self.pi[..self.real_count]
    }

    /// `W^∞`: every row equal to `π`.
    pub fn w_inf(&self) -> DMatrix<f64> {
        let n = self.pi.len();
        DMatrix::from_fn(n, n, |_, col| self.pi[col])
    }

    /// Stationary weights plus the contraction for `tau_g`.
    pub fn analyze(w: &GossipMatrix, tau_g: usize) -> Result<Self> {
        let mut info = stationary_weights(w)?;
        info.contraction = Some(Contraction::new(
            tau_g,
            contraction_factor(w, &info, tau_g)?,
        ));
        Ok(info)
    }
}

/// Power iteration `πᵀ ← πᵀW` from the uniform vector.
pub fn stationary_weights(w: &GossipMatrix) -> Result<SpectralInfo> {
    let n = w.size();
    let entries = w.entries();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for iteration in 1..=STATIONARY_MAX_ITERATIONS {
        let mut next = entries.tr_mul(&pi);
        let total = next.sum();
        next /= total;
        let residual = (&next - &pi).amax();
        pi = next;
        if residual < best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let done = residual <= STATIONARY_TARGET
            || (since_best >= STALL_WINDOW && best <= STATIONARY_TOLERANCE);
        if done {
            return finish(w, pi, iteration);
        }
    }
    let residual = stationary_residual(entries, &pi);
    if residual <= STATIONARY_TOLERANCE {
        return finish(w, pi, STATIONARY_MAX_ITERATIONS);
    }
    Err(Error::NoConvergence {
        what: "stationary weights",
        iterations: STATIONARY_MAX_ITERATIONS,
        residual,
    })
}

fn stationary_residual(entries: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    (entries.tr_mul(pi) - pi).amax()
}

fn finish(w: &GossipMatrix, pi: DVector<f64>, iterations: usize) -> Result<SpectralInfo> {
    let residual = stationary_residual(w.entries(), &pi);
    let pi: Vec<f64> = pi.iter().copied().collect();
    if let Some((node, &value)) = pi[..w.real_count()]
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0))
    {
        return Err(Error::NonPositiveWeight { node, value });
    }
    Ok(SpectralInfo {
        pi,
        real_count: w.real_count(),
        residual,
        iterations,
        contraction: None,
    })
}

/// Stationary weights of `base` extended by `delays`, without forming the
/// extended matrix.
///
/// Every relay on the chain for link `m -> n` carries weight `π_n·W[(n, m)]`
/// and the real-node weights stay proportional to those of `base`, so
/// `π_v,n = π_n / (1 + Σ_(m→n) k_mn·π_n·W[(n, m)])`. The returned vector
/// follows the relay layout of [`GossipMatrix::extend_with_delays`].
pub fn delayed_stationary_weights(
    base: &GossipMatrix,
    base_info: &SpectralInfo,
    delays: &DelaySpec,
) -> Result<SpectralInfo> {
    if base.is_extended() {
        return Err(Error::InvalidMatrix("expected an unextended matrix".into()));
    }
    let n = base.size();
    if base_info.size() != n {
        return Err(Error::DimensionMismatch(format!(
            "stationary vector has {} entries, matrix has {n} nodes",
            base_info.size()
        )));
    }
    let mut relay_mass = 0.0;
    for ((from, to), delay) in delays.iter() {
        let weight = base.get(to, from);
        if from == to || !(weight > 0.0) {
            return Err(Error::InvalidDelays(format!(
                "no edge {from} -> {to} in the matrix"
            )));
        }
        relay_mass += delay as f64 * base_info.pi[to] * weight;
    }
    let scale = 1.0 + relay_mass;
    let mut pi: Vec<f64> = base_info.pi.iter().map(|p| p / scale).collect();
    for ((from, to), delay) in delays.iter() {
        let value = pi[to] * base.get(to, from);
        pi.extend(std::iter::repeat_n(value, delay));
    }
    Ok(SpectralInfo {
        pi,
        real_count: n,
        residual: base_info.residual,
        iterations: base_info.iterations,
        contraction: None,
    })
}

/// Largest eigenvalue of `AᵀA` (the squared spectral norm of `A`) by power
/// iteration on the Gram product.
pub fn spectral_norm_sq(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return Ok(0.0);
    }
    // A deterministic pseudo-random start; the all-ones vector lies in the
    // kernel of W^τ − W^∞ and must be avoided.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(n, |_, _| 0.5 + rng.random::<f64>());
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..NORM_MAX_ITERATIONS {
        let av = a * &v;
        let next_estimate = av.norm_squared();
        let mut next = a.tr_mul(&av);
        let norm = next.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        next /= norm;
        // The Rayleigh quotient of a PSD Gram iteration only increases.
        let converged = next_estimate - estimate <= NORM_TOLERANCE * next_estimate;
        v = next;
        estimate = next_estimate;
        if converged {
            break;
        }
    }
    // Rayleigh quotient at the final vector.
    Ok((a * &v).norm_squared().max(estimate))
}

/// `‖W^τ − W^∞‖₂²`.
pub fn contraction_factor(w: &GossipMatrix, info: &SpectralInfo, tau_g: usize) -> Result<f64> {
    check_sizes(w, info)?;
    let deviation = w.power(tau_g) - info.w_inf();
    spectral_norm_sq(&deviation)
}

/// Smallest `τ_g ≤ cap` with `‖W^τ − W^∞‖₂² < target`.
pub fn minimal_tau_g(
    w: &GossipMatrix,
    info: &SpectralInfo,
    target: f64,
    cap: usize,
) -> Result<Contraction> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "contraction target {target} outside (0, 1)"
        )));
    }
    check_sizes(w, info)?;
    let w_inf = info.w_inf();
    let mut power = w.entries().clone();
    let mut last = f64::INFINITY;
    for tau in 1..=cap {
        if tau > 1 {
            power = &power * w.entries();
        }
        last = spectral_norm_sq(&(&power - &w_inf))?;
        if last < target {
            return Ok(Contraction::new(tau, last));
        }
    }
    Err(Error::NoConvergence {
        what: "contraction search",
        iterations: cap,
        residual: last,
    })
}

/// `‖W^t − W^∞‖_F²` for `t = 1..=t_max`.
pub fn deviation_frobenius_sq(
    w: &GossipMatrix,
    info: &SpectralInfo,
    t_max: usize,
) -> Result<Vec<f64>> {
    check_sizes(w, info)?;
    let w_inf = info.w_inf();
    let mut power = w.entries().clone();
    let mut out = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        if t > 1 {
            power = &power * w.entries();
        }
        out.push((&power - &w_inf).norm_squared());
    }
    Ok(out)
}

/// Diagonal of the correction matrix: `1/(N·π_n)` on real nodes, one on relays.
pub fn correction_factors(info: &SpectralInfo) -> Result<Vec<f64>> {
    let n = info.real_count as f64;
    info.pi
        .iter()
        .enumerate()
        .map(|(node, &p)| {
            if node >= info.real_count {
                Ok(1.0)
            } else if p > 0.0 {
                Ok(1.0 / (n * p))
            } else {
                Err(Error::NonPositiveWeight { node, value: p })
            }
        })
        .collect()
}

fn check_sizes(w: &GossipMatrix, info: &SpectralInfo) -> Result<()> {
    if w.size() != info.size() {
        return Err(Error::DimensionMismatch(format!(
            "stationary vector has {} entries, matrix has {} nodes",
            info.size(),
            w.size()
        )));
    }
    Ok(())
}
