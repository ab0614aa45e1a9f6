use super::RewardConfig;
use crate::corpus::Query;
use crate::env::{PaperQueue, QueueView, Session, Transition};
use crate::selector::{answer_indicator, indicator, SelectorModel};

/// Immediate reward of one transition: α times the number of newly queued
/// papers the indicator credits, minus the action's cost.
pub fn reward(
    transition: &Transition,
    query: &Query,
    queue_before: QueueView<'_>,
    selector: &SelectorModel,
    cfg: &RewardConfig,
) -> f64 {
    let hits: u32 = transition
        .new_papers
        .iter()
        .map(|&p| {
            u32::from(if cfg.selector_reward {
                indicator(selector, query, p, queue_before)
            } else {
                answer_indicator(query, p, queue_before)
            })
        })
        .sum();
    cfg.alpha * f64::from(hits) - cfg.cost.of(transition.action.kind())
}

/// Fills `reward` on every transition, reading the queue prefix that
/// existed before each action from the final queue.
pub fn assign_rewards(
    sessions: &mut [Session],
    queue: &PaperQueue,
    query: &Query,
    selector: &SelectorModel,
    cfg: &RewardConfig,
) {
    for t in sessions.iter_mut().flat_map(|s| s.transitions.iter_mut()) {
        t.reward = reward(t, query, queue.view_before(t.queue_len_before), selector, cfg);
    }
}
