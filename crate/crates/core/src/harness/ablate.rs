use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use super::config::RunConfig;
use super::metrics::EvalResult;
use super::pipeline::{evaluate_policy, train_rl, train_sft, World};
use crate::derive_seed;
use crate::error::{LabError, Result};
use crate::policy::PolicySnapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    NoExpand,
    NoRl,
    ExactSetReward,
    AlphaSweep,
    CostSweep,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::NoExpand,
        Variant::NoRl,
        Variant::ExactSetReward,
        Variant::AlphaSweep,
        Variant::CostSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoExpand => "no-expand",
            Variant::NoRl => "no-rl",
            Variant::ExactSetReward => "exact-set-reward",
            Variant::AlphaSweep => "alpha-sweep",
            Variant::CostSweep => "cost-sweep",
        }
    }
}

impl FromStr for Variant {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let known: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
            LabError::Usage(format!(
                "unknown ablation variant `{s}` (known: {})",
                known.join(", ")
            ))
        })
    }
}

/// One replicate of a variant: its own training and evaluation seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Replicate {
    pub eval: EvalResult,
    /// Mean KL to π_sft on the last training step; 0 without RL.
    pub final_kl: f64,
    pub short_batches: usize,
}

/// One configuration, trained and evaluated `ablate.replicates` times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: &'static str,
    /// α for the alpha sweep, the shared Search/Expand cost for the cost sweep.
    pub setting: Option<f64>,
    pub replicates: Vec<Replicate>,
}

impl AblationRow {
    /// Mean of `f` over replicates.
    pub fn mean(&self, f: impl Fn(&Replicate) -> f64) -> f64 {
        self.replicates.iter().map(f).sum::<f64>() / self.replicates.len() as f64
    }

    pub fn crawler_recall(&self) -> f64 {
        self.mean(|r| r.eval.crawler_recall)
    }

    pub fn mean_actions(&self) -> f64 {
        self.mean(|r| r.eval.mean_actions)
    }

    pub fn final_kl(&self) -> f64 {
        self.mean(|r| r.final_kl)
    }
}

/// Replicate `r` runs with training and evaluation seeds derived from the
/// configured ones; replicate 0 uses them unchanged.
fn reseed(cfg: &RunConfig, r: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.seeds.train = derive_seed(cfg.seeds.train, r as u64);
    c.seeds.eval = derive_seed(cfg.seeds.eval, r as u64);
    c
}

fn trained(
    variant: Variant,
    setting: Option<f64>,
    cfg: &RunConfig,
    world: &World,
    sft: &PolicySnapshot,
) -> Result<AblationRow> {
    cfg.reward.validate()?;
    let mut replicates = Vec::new();
    for r in 0..cfg.ablate.replicates {
        let c = reseed(cfg, r);
        let out = train_rl(&c, world, sft, &mut |_| Ok(()))?;
        replicates.push(Replicate {
            eval: evaluate_policy(&c, world, &out.policy, 1)?,
            final_kl: out.metrics.last().map_or(0.0, |m| m.mean_kl),
            short_batches: out.short_batches,
        });
    }
    Ok(AblationRow {
        variant: variant.name(),
        setting,
        replicates,
    })
}

/// Trains and evaluates each variant from one shared π_sft and shared seeds.
pub fn ablate(cfg: &RunConfig, world: &World, variants: &[Variant]) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let sft = train_sft(cfg, world)?.policy;
    let mut rows = Vec::new();
    for &v in variants {
        let mut c = cfg.clone();
        match v {
            Variant::Full => rows.push(trained(v, None, &c, world, &sft)?),
            Variant::NoExpand => {
                c.limits.expand_enabled = false;
                rows.push(trained(v, None, &c, world, &sft)?);
            }
            Variant::ExactSetReward => {
                c.reward.selector_reward = false;
                rows.push(trained(v, None, &c, world, &sft)?);
            }
            Variant::AlphaSweep => {
                for &a in &cfg.ablate.alphas {
                    c.reward.alpha = a;
                    rows.push(trained(v, Some(a), &c, world, &sft)?);
                }
            }
            Variant::CostSweep => {
                for &cost in &cfg.ablate.costs {
                    c.reward.cost.search = cost;
                    c.reward.cost.expand = cost;
                    rows.push(trained(v, Some(cost), &c, world, &sft)?);
                }
            }
            Variant::NoRl => {
                let mut replicates = Vec::new();
                for r in 0..cfg.ablate.replicates {
                    replicates.push(Replicate {
                        eval: evaluate_policy(&reseed(cfg, r), world, sft.params(), 1)?,
                        final_kl: 0.0,
                        short_batches: 0,
                    });
                }
                rows.push(AblationRow {
                    variant: v.name(),
                    setting: None,
                    replicates,
                });
            }
        }
    }
    Ok(rows)
}

/// One CSV row per ablation row holding replicate means; `search` and
/// `expand` are per query. A `recall_at_<k>` column follows per k.
pub fn write_ablation<W: Write>(rows: &[AblationRow], w: W) -> Result<()> {
    let err = |e: csv::Error| LabError::Contract(format!("ablation csv: {e}"));
    let mut csv = csv::Writer::from_writer(w);
    let ks: Vec<usize> = rows
        .first()
        .map(|r| r.replicates[0].eval.recall_at_k.keys().copied().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "variant",
        "setting",
        "crawler_recall",
        "precision",
        "recall",
        "mean_actions",
        "search",
        "expand",
        "final_kl",
        "replicates",
    ]
    .map(String::from)
    .to_vec();
    header.extend(ks.iter().map(|k| format!("recall_at_{k}")));
    csv.write_record(&header).map_err(err)?;
    for r in rows {
        let n = r.replicates[0].eval.per_query.len() as f64;
        let mut rec = vec![
            r.variant.to_string(),
            r.setting.map_or(String::new(), |s| s.to_string()),
            r.crawler_recall().to_string(),
            r.mean(|x| x.eval.precision).to_string(),
            r.mean(|x| x.eval.recall).to_string(),
            r.mean_actions().to_string(),
            r.mean(|x| x.eval.actions.search as f64 / n).to_string(),
            r.mean(|x| x.eval.actions.expand as f64 / n).to_string(),
            r.final_kl().to_string(),
            r.replicates.len().to_string(),
        ];
        rec.extend(ks.iter().map(|k| {
            r.mean(|x| x.eval.recall_at_k.get(k).copied().unwrap_or(0.0))
                .to_string()
        }));
        csv.write_record(&rec).map_err(err)?;
    }
    csv.flush().map_err(|e| LabError::io("ablation csv", e))
}
