//! `pasa-lab`: command-line front end for the crawler lab.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pasa_lab::corpus::{gen_corpus, gen_queries_with, read_corpus, write_corpus, write_queries};
use pasa_lab::harness::{
    ablate, create, eval_rollouts, evaluate_policy, open, policy_for, read_checkpoint, train_rl, train_sft,
    write_ablation, write_checkpoint, write_eval_csv, write_metrics, write_rollouts, EvalResult, RunConfig,
    Variant, World,
};
use pasa_lab::policy::{Checkpoint, PolicyParams, PolicySnapshot, ValueParams};
use pasa_lab::{LabError, Result};

#[derive(Parser, Debug)]
#[command(
    name = "pasa-lab",
    version,
    about = "Session-level PPO for a paper-search crawler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML); relative paths inside it resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of this subcommand's random stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Output location; a file for gen-corpus, a directory otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckpointArg {
    /// Policy checkpoint to evaluate; defaults to the configured one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    GenCorpus(Common),
    /// Generate train and eval queries over the configured corpus.
    GenQueries(Common),
    /// Behavior cloning from scripted demonstrations.
    BcTrain(Common),
    /// PPO from the imitation checkpoint.
    PpoTrain {
        #[command(flatten)]
        common: Common,
        /// Imitation checkpoint to start from; defaults to the configured one.
        #[arg(long)]
        sft: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the eval queries.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ck: CheckpointArg,
    },
    /// Evaluate the union of several crawls per query.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ck: CheckpointArg,
        /// Crawls per query; defaults to `eval.ensemble_runs`.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Train and evaluate ablation variants from a shared imitation policy.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variant names; defaults to `ablate.variants`.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    if !common.config.exists() {
        return Err(LabError::Usage(format!(
            "--config: no such file {}",
            common.config.display()
        )));
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(dir) = &common.out {
        cfg.paths.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn write_with(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| LabError::io(path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn io_write(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    write_with(path, |w| f(w).map_err(|e| LabError::io(path, e)))
}

fn checkpoint_path(arg: &CheckpointArg, cfg: &RunConfig) -> Result<PathBuf> {
    let path = arg
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.paths.checkpoint.clone());
    if !path.exists() {
        return Err(LabError::Usage(format!(
            "--checkpoint: no such file {}",
            path.display()
        )));
    }
    Ok(path)
}

fn load_policy(path: &Path) -> Result<PolicyParams> {
    read_checkpoint(path)?.policy_params()
}

fn summarize(label: &str, r: &EvalResult) {
    let at_k: Vec<String> = r
        .recall_at_k
        .iter()
        .map(|(k, v)| format!("recall@{k} {v:.4}"))
        .collect();
    println!(
        "{label}: crawler_recall {:.4} precision {:.4} recall {:.4} {} mean_actions {:.2}",
        r.crawler_recall,
        r.precision,
        r.recall,
        at_k.join(" "),
        r.mean_actions
    );
}

fn write_eval(cfg: &RunConfig, stem: &str, r: &EvalResult) -> Result<()> {
    let dir = &cfg.paths.out_dir;
    write_with(&dir.join(format!("{stem}.csv")), |w| write_eval_csv(r, w))?;
    write_with(&dir.join(format!("{stem}.json")), |w| {
        serde_json::to_writer_pretty(w, r).map_err(|e| LabError::Contract(e.to_string()))
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus(common) => {
            let cfg = load(&common)?;
            let corpus = gen_corpus(&cfg.corpus, common.seed.unwrap_or(cfg.seeds.corpus))?;
            let path = common.out.unwrap_or(cfg.paths.corpus);
            io_write(&path, |w| write_corpus(&corpus, w))
        }
        Command::GenQueries(common) => {
            let cfg = load(&common)?;
            let corpus = read_corpus(open(&cfg.paths.corpus)?, &cfg.paths.corpus.display().to_string())?;
            let n = cfg.queries.n_train + cfg.queries.n_eval;
            let seed = common.seed.unwrap_or(cfg.seeds.queries);
            let mut train = gen_queries_with(&corpus, &cfg.queries.generation(), n, seed)?;
            let eval = train.split_off(cfg.queries.n_train);
            let (train_path, eval_path) = match &common.out {
                Some(dir) => (dir.join("train_queries.jsonl"), dir.join("eval_queries.jsonl")),
                None => (cfg.paths.train_queries.clone(), cfg.paths.eval_queries.clone()),
            };
            io_write(&train_path, |w| write_queries(&train, w))?;
            io_write(&eval_path, |w| write_queries(&eval, w))
        }
        Command::BcTrain(common) => {
            let mut cfg = load(&common)?;
            if let Some(s) = common.seed {
                cfg.seeds.demos = s;
            }
            let world = World::load(&cfg)?;
            let out = train_sft(&cfg, &world)?;
            println!(
                "bc: nll {:.4} -> {:.4} over {} epochs",
                out.nll[0],
                out.nll.last().copied().unwrap_or(f64::NAN),
                cfg.imitation.epochs
            );
            let ck = Checkpoint::new(out.policy.params(), &ValueParams::zeros(), 0);
            write_checkpoint(&ck, &cfg.paths.sft_checkpoint)?;
            eprintln!("wrote {}", cfg.paths.sft_checkpoint.display());
            Ok(())
        }
        Command::PpoTrain { common, sft } => {
            let mut cfg = load(&common)?;
            if let Some(s) = common.seed {
                cfg.seeds.train = s;
            }
            let sft_path = sft.unwrap_or_else(|| cfg.paths.sft_checkpoint.clone());
            if !sft_path.exists() {
                return Err(LabError::Usage(format!(
                    "--sft: no such file {}",
                    sft_path.display()
                )));
            }
            let sft = PolicySnapshot::new(load_policy(&sft_path)?);
            let world = World::load(&cfg)?;
            let dir = cfg.paths.out_dir.clone();
            let result = train_rl(&cfg, &world, &sft, &mut |ck| {
                write_checkpoint(ck, &dir.join(format!("checkpoint_step{}.json", ck.step)))
            });
            let out = match result {
                Ok(out) => out,
                Err(LabError::Diverged {
                    step,
                    reason,
                    last_good: Some(ck),
                }) => {
                    let path = dir.join("checkpoint_last_good.json");
                    write_checkpoint(&ck, &path)?;
                    eprintln!(
                        "saved last finite parameters (step {}) to {}",
                        ck.step,
                        path.display()
                    );
                    return Err(LabError::Diverged {
                        step,
                        reason,
                        last_good: None,
                    });
                }
                Err(e) => return Err(e),
            };
            write_with(&dir.join("metrics.csv"), |w| write_metrics(&out.metrics, w))?;
            let ck = Checkpoint::new(&out.policy, &out.value, cfg.ppo.total_steps);
            write_checkpoint(&ck, &cfg.paths.checkpoint)?;
            eprintln!("wrote {}", cfg.paths.checkpoint.display());
            if let Some(last) = out.metrics.last() {
                println!(
                    "ppo: step {} mean_return {:.4} mean_kl {:.4} short_batches {}",
                    last.step, last.mean_return, last.mean_kl, out.short_batches
                );
            }
            Ok(())
        }
        Command::Eval { common, ck } => {
            let mut cfg = load(&common)?;
            if let Some(s) = common.seed {
                cfg.seeds.eval = s;
            }
            let params = load_policy(&checkpoint_path(&ck, &cfg)?)?;
            let world = World::load(&cfg)?;
            let r = evaluate_policy(&cfg, &world, &params, 1)?;
            summarize("eval", &r);
            write_eval(&cfg, "eval", &r)?;
            let policy = policy_for(&params, cfg.eval.decoding);
            let recs = eval_rollouts(
                &policy,
                &world.corpus,
                &world.eval,
                &cfg.limits,
                &cfg.selector,
                &cfg.reward,
                cfg.seeds.eval,
            )?;
            write_with(&cfg.paths.out_dir.join("rollouts.jsonl"), |w| {
                write_rollouts(&recs, w)
            })
        }
        Command::Ensemble { common, ck, runs } => {
            let mut cfg = load(&common)?;
            if let Some(s) = common.seed {
                cfg.seeds.eval = s;
            }
            let runs = runs.unwrap_or(cfg.eval.ensemble_runs);
            if runs == 0 {
                return Err(LabError::Usage("--runs must be at least 1".into()));
            }
            let params = load_policy(&checkpoint_path(&ck, &cfg)?)?;
            let world = World::load(&cfg)?;
            let single = evaluate_policy(&cfg, &world, &params, 1)?;
            let ens = evaluate_policy(&cfg, &world, &params, runs)?;
            summarize("single", &single);
            summarize(&format!("ensemble x{runs}"), &ens);
            write_eval(&cfg, "ensemble", &ens)
        }
        Command::Ablate { common, variants } => {
            let mut cfg = load(&common)?;
            if let Some(s) = common.seed {
                cfg.seeds.train = s;
            }
            let names = variants.unwrap_or_else(|| cfg.ablate.variants.clone());
            let mut list = vec![Variant::Full];
            for n in &names {
                let v: Variant = n.trim().parse()?;
                if !list.contains(&v) {
                    list.push(v);
                }
            }
            let world = World::load(&cfg)?;
            let rows = ablate(&cfg, &world, &list)?;
            for r in &rows {
                let setting = r.setting.map_or(String::new(), |s| format!(" {s}"));
                println!(
                    "{}{}: crawler_recall {:.4} mean_actions {:.2} final_kl {:.4}",
                    r.variant,
                    setting,
                    r.crawler_recall(),
                    r.mean_actions(),
                    r.final_kl()
                );
            }
            write_with(&cfg.paths.out_dir.join("ablation.csv"), |w| {
                write_ablation(&rows, w)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
