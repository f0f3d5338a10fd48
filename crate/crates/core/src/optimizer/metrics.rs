use super::objective::Objective;

/// `(1/N)·Σ_n f_n(x_n)` over real nodes; for the integer-target quadratics
/// this is `(1/N)·Σ (n − x_n)²`.
pub fn cost_metric(states: &[&[f64]], objective: &dyn Objective) -> f64 {
    let n = states.len() as f64;
    states
        .iter()
        .enumerate()
        .map(|(node, x)| objective.value(node, x))
        .sum::<f64>()
        / n
}

/// `(1/N)·Σ_n ‖x̄ − x_n‖²` with `x̄` the plain mean of the states.
pub fn consensus_metric(states: &[&[f64]]) -> f64 {
    let n = states.len() as f64;
    let dim = states.first().map(|s| s.len()).unwrap_or(0);
    let mut mean = vec![0.0; dim];
    for s in states {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    states
        .iter()
        .map(|s| {
            s.iter()
                .zip(&mean)
                .map(|(v, m)| (m - v).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n
}
