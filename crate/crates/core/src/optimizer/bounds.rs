/// Steady-state bound on `Σ_n ‖x̃(t) − x_n(t)‖²` under a constant stepsize:
/// `η²·4·N·‖D‖₂²·G² / c²`.
pub fn deviation_bound(eta: f64, n: usize, d_norm2_sq: f64, g_sq: f64, c: f64) -> f64 {
    eta * eta * 4.0 * n as f64 * d_norm2_sq * g_sq / (c * c)
}

/// The three order terms of the non-convex rate. Constants are not known,
/// so these are for comparing regimes only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTerms {
    /// `(L·F0·σ̄² / (N·T))^{1/2}`, the centralized SGD term.
    pub stochastic: f64,
    /// `(‖D‖₂·G·L·F0 / (c·T))^{2/3}`, where topology and delays enter.
    pub network: f64,
    /// `L·F0 / T`
    pub deterministic: f64,
}

impl RateTerms {
    pub fn total(&self) -> f64 {
        self.stochastic + self.network + self.deterministic
    }
}

#[allow(clippy::too_many_arguments)]
pub fn rate_report(
    f0: f64,
    smoothness: f64,
    sigma_bar_sq: f64,
    g: f64,
    d_norm2: f64,
    c: f64,
    n: usize,
    iterations: usize,
) -> RateTerms {
    let t = iterations as f64;
    RateTerms {
        stochastic: (smoothness * f0 * sigma_bar_sq / (n as f64 * t)).sqrt(),
        network: (d_norm2 * g * smoothness * f0 / (c * t)).powf(2.0 / 3.0),
        deterministic: smoothness * f0 / t,
    }
}
