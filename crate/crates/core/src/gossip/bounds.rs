use super::matrix::{DelaySpec, GossipMatrix};

/// Parameters of the geometric bound on `‖W_v^t − W_v^∞‖_F²` for
/// matrices extended with delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMixingBound {
    /// Largest link delay, in rounds (B1).
    pub max_delay: usize,
    /// `N − 1 + N·B1` over the real node count N (B2).
    pub horizon: usize,
    /// Smallest nonzero entry of the extended matrix.
    pub eta_min: f64,
}

impl DelayMixingBound {
    pub fn new(real_count: usize, max_delay: usize, eta_min: f64) -> Self {
        Self {
            max_delay,
            horizon: real_count - 1 + real_count * max_delay,
            eta_min,
        }
    }

    /// Natural log of [`DelayMixingBound::bound`]; finite even where the bound
    /// itself overflows.
    pub fn ln_bound(&self, t: usize) -> f64 {
        let b2 = self.horizon.max(1) as f64;
        let ln_eta = self.eta_min.ln();
        // η^{B2} and η^{-B2} in log space
        let ln_pow = b2 * ln_eta;
        let pow = ln_pow.exp();
        // ln(1 + η^{-B2}) = −B2·ln η + ln(1 + η^{B2})
        let ln_one_plus_inv = -ln_pow + pow.ln_1p();
        let ln_one_minus_pow = (-pow).ln_1p();
        let ln_norm = std::f64::consts::LN_2 + ln_one_plus_inv - ln_one_minus_pow
            + (t as f64 / b2) * ln_one_minus_pow;
        2.0 * ln_norm
    }

    /// `[2·(1 + η^{−B2})/(1 − η^{B2})·(1 − η^{B2})^{t/B2}]²`
    pub fn bound(&self, t: usize) -> f64 {
        self.ln_bound(t).exp()
    }
}

/// Bound parameters for `w_v`, a delay extension of a matrix over
/// `w_v.real_count()` nodes.
pub fn delay_mixing_bound(w_v: &GossipMatrix, delays: &DelaySpec) -> DelayMixingBound {
    DelayMixingBound::new(
        w_v.real_count(),
        delays.max_delay(),
        w_v.min_positive_entry(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{five_node_example, five_node_example_delays};

    #[test]
    fn example_parameters() {
        let w = GossipMatrix::inverse_indegree(&five_node_example()).unwrap();
        let delays = five_node_example_delays();
        let wv = w.extend_with_delays(&delays).unwrap();
        let b = delay_mixing_bound(&wv, &delays);
        assert_eq!(b.max_delay, 2);
        assert_eq!(b.horizon, 14);
        assert_eq!(b.eta_min, 0.25);

        let none = delay_mixing_bound(&w, &DelaySpec::new());
        assert_eq!(none.max_delay, 0);
        assert_eq!(none.horizon, 4);
    }

    #[test]
    fn bound_matches_direct_formula_when_representable() {
        let b = DelayMixingBound::new(3, 0, 0.5);
        let eta_b2 = 0.5f64.powi(2);
        for t in [1, 5, 40] {
            let direct = (2.0 * (1.0 + 1.0 / eta_b2) / (1.0 - eta_b2)
                * (1.0 - eta_b2).powf(t as f64 / 2.0))
            .powi(2);
            assert!((b.bound(t) - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn bound_is_monotone_and_vanishes() {
        let b = DelayMixingBound::new(4, 0, 0.3);
        let mut last = f64::INFINITY;
        for t in 1..2000 {
            let v = b.ln_bound(t);
            assert!(v < last);
            last = v;
        }
        assert!(b.bound(100_000) < 1e-6);
        // Large horizons overflow the bound but not its logarithm.
        let wide = DelayMixingBound::new(100, 3, 0.01);
        assert!(wide.ln_bound(1).is_finite());
        assert!(wide.ln_bound(10) <= wide.ln_bound(1));
    }
}
