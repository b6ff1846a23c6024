//! Evaluation under observation corruption.

use std::fs;
use std::path::Path;

use log::info;

use super::config::EvalSpec;
use super::rollout::{evaluate, mean_std, pendulum_bank, Corruptor};
use super::train::{load_policy, Policy};
use crate::corrupt::{CorruptionContext, CorruptionSpec};
use crate::csvio::{fmt_f64, parse_f64, parse_table, parse_usize};
use crate::error::{Error, Result};
use crate::metricmm::write_atomic;

pub const RESULTS_HEADER: &str = "kind,p,k,targets,episodes,mean_return,std_return";
pub const RESULTS_FILE: &str = "results.csv";
/// Frames per modality available to Hallucination.
pub const BANK_SIZE: usize = 256;

/// Aggregate over all seeds and episodes of one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Corruption kind name, or `clean`.
    pub kind: String,
    pub p: f64,
    pub k: usize,
    /// Target modalities joined by `+`.
    pub targets: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

pub fn write_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.kind,
            fmt_f64(r.p),
            r.k,
            r.targets,
            r.episodes,
            fmt_f64(r.mean_return),
            fmt_f64(r.std_return)
        ));
    }
    out
}

pub fn read_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    parse_table(text, RESULTS_HEADER)?
        .into_iter()
        .map(|f| {
            Ok(ResultRow {
                kind: f[0].clone(),
                p: parse_f64(&f[1], "p")?,
                k: parse_usize(&f[2], "k")?,
                targets: f[3].clone(),
                episodes: parse_usize(&f[4], "episodes")?,
                mean_return: parse_f64(&f[5], "mean_return")?,
                std_return: parse_f64(&f[6], "std_return")?,
            })
        })
        .collect()
}

fn targets_field(t: &[usize]) -> String {
    t.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("+")
}

/// Returns per episode (all seeds) for each condition: clean first, then one
/// entry per corruption spec.
pub fn evaluate_conditions(
    policy: &Policy,
    corruptions: &[CorruptionSpec],
    seeds: &[u64],
    episodes: usize,
    deterministic_actions: bool,
    parallel: bool,
) -> Result<Vec<Vec<f64>>> {
    let modalities = policy.env.modalities();
    // every condition is checked before any episode runs
    for spec in corruptions {
        spec.validate()?;
        spec.check_compatible(&modalities)?;
    }
    let ctx = CorruptionContext::new(modalities).with_bank(pendulum_bank(&policy.env, BANK_SIZE, 0)?);
    let conditions: Vec<Option<&CorruptionSpec>> =
        std::iter::once(None).chain(corruptions.iter().map(Some)).collect();
    let mut all = Vec::with_capacity(conditions.len());
    for cond in conditions {
        let corruptor = cond.map(|spec| Corruptor { spec, ctx: &ctx });
        let mut returns = Vec::with_capacity(seeds.len() * episodes);
        for &seed in seeds {
            returns.extend(evaluate(
                &policy.model,
                &policy.actor,
                &policy.env,
                policy.frame_stack,
                seed,
                episodes,
                corruptor.as_ref(),
                deterministic_actions,
                parallel,
            )?);
        }
        all.push(returns);
    }
    Ok(all)
}

pub fn run_eval(spec: &EvalSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let path = spec
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Usage("eval needs a checkpoint (eval.checkpoint or --checkpoint)".into()))?;
    if !path.exists() {
        return Err(Error::Usage(format!("checkpoint {} not found", path.display())));
    }
    let policy = load_policy(path)?;
    let returns = evaluate_conditions(
        &policy,
        &spec.corruptions,
        &spec.seeds,
        spec.episodes,
        spec.deterministic_actions,
        !spec.deterministic,
    )?;
    let mut rows = Vec::with_capacity(returns.len());
    for (i, r) in returns.iter().enumerate() {
        let (mean, std) = mean_std(r);
        let row = match i {
            0 => ResultRow {
                kind: "clean".into(),
                p: 0.0,
                k: 1,
                targets: String::new(),
                episodes: r.len(),
                mean_return: mean,
                std_return: std,
            },
            _ => {
                let c = &spec.corruptions[i - 1];
                ResultRow {
                    kind: c.kind.name().into(),
                    p: c.p,
                    k: c.persistence,
                    targets: targets_field(&c.targets),
                    episodes: r.len(),
                    mean_return: mean,
                    std_return: std,
                }
            }
        };
        info!("{} p={} K={}: {:.1} ± {:.1}", row.kind, row.p, row.k, mean, std);
        rows.push(row);
    }
    fs::create_dir_all(&spec.out_dir)?;
    write_atomic(&spec.out_dir.join(RESULTS_FILE), write_results_csv(&rows).as_bytes())?;
    Ok(rows)
}

pub fn load_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_results_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn results_round_trip(p in 0.0f64..=1.0, k in 1usize..20, m in -2000.0f64..0.0, s in 0.0f64..500.0,
                              targets in proptest::collection::vec(0usize..3, 0..3)) {
            let rows = vec![ResultRow {
                kind: "gaussian".into(), p, k, targets: targets_field(&targets),
                episodes: 50, mean_return: m, std_return: s,
            }];
            prop_assert_eq!(read_results_csv(&write_results_csv(&rows)).unwrap(), rows);
        }
    }
}
