use super::PPOConfig;
use crate::env::Session;
use crate::error::{LabError, Result};
use crate::policy::{log_prob, PolicyParams};

/// Session-level return estimates, one per transition.
///
/// Each step's bracket is its reward plus γ1 times the values of the
/// sessions it spawned; brackets are discounted by γ0 to the session end.
/// The log-ratio penalty β·log(π_θ/π_sft) is charged only at the step's own
/// position. `value_fn` is evaluated on spawned-state features and treated
/// as a constant.
pub fn session_returns(
    session: &Session,
    value_fn: &dyn Fn(&[f64]) -> f64,
    pi_theta: &PolicyParams,
    pi_sft: &PolicyParams,
    cfg: &PPOConfig,
) -> Result<Vec<f64>> {
    let n = session.transitions.len();
    let mut out = vec![0.0; n];
    let mut tail = 0.0;
    for (t, tr) in session.transitions.iter().enumerate().rev() {
        let boot: f64 = tr.spawned.iter().map(|s| value_fn(s)).sum();
        tail = tr.reward + cfg.gamma1 * boot + cfg.gamma0 * tail;
        let penalty = if cfg.beta == 0.0 {
            0.0
        } else {
            let ratio = log_prob(pi_theta, &tr.features, tr.action_index)?
                - log_prob(pi_sft, &tr.features, tr.action_index)?;
            if !ratio.is_finite() {
                return Err(LabError::Numeric(format!("non-finite log-ratio at position {t}")));
            }
            cfg.beta * ratio
        };
        out[t] = tail - penalty;
    }
    Ok(out)
}

/// Â_t = R̂_t − V_old(s_t).
pub fn advantages(returns: &[f64], values_old: &[f64]) -> Result<Vec<f64>> {
    if returns.len() != values_old.len() {
        return Err(LabError::Contract(format!(
            "{} returns but {} values",
            returns.len(),
            values_old.len()
        )));
    }
    Ok(returns.iter().zip(values_old).map(|(r, v)| r - v).collect())
}
