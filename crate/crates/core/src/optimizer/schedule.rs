use serde::{Deserialize, Serialize};

/// Stepsize per outer iteration `t = 0, 1, …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `eta0 / sqrt(t + 1)`; the shift keeps `t = 0` finite.
    InverseSqrt {
        eta0: f64,
    },
    Constant {
        eta: f64,
    },
}

impl StepSchedule {
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseSqrt { eta0 } => eta0 / ((t + 1) as f64).sqrt(),
            StepSchedule::Constant { eta } => eta,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            StepSchedule::InverseSqrt { eta0 } => eta0.is_finite() && eta0 >= 0.0,
            StepSchedule::Constant { eta } => eta.is_finite() && eta >= 0.0,
        }
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::InverseSqrt { eta0: 0.1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_values() {
        let s = StepSchedule::default();
        assert_eq!(s.eta(0), 0.1);
        assert_eq!(s.eta(3), 0.05);
        assert!(s.is_valid());
        assert!(!StepSchedule::Constant { eta: f64::NAN }.is_valid());
        assert_eq!(StepSchedule::Constant { eta: 0.01 }.eta(1000), 0.01);
    }
}
