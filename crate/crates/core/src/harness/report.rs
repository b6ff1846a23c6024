//! Agreement between latent distances and shortest-path distances on the
//! gridworld.

use std::fs;
use std::path::Path;

use log::warn;
use rand::Rng;

use super::rollout::stream_rng;
use super::train::load_grid_model;
use crate::csvio::{fmt_f64, parse_f64, parse_table, parse_usize};
use crate::envs::{Cell, GridAction, GridWorld, MultiModalObservation};
use crate::error::{Error, Result};
use crate::metricmm::{euclidean, write_atomic, Checkpoint};

pub const REPORT_HEADER: &str = "pairs,spearman,pearson,adjacent_pairs,adjacent_mean_abs_dev,adjacent_max_abs_dev,degenerate";
pub const REPORT_FILE: &str = "metric_report.csv";
pub const REPORT_PAIRS: usize = 500;
/// Length of the held-out random walk that supplies adjacent pairs.
pub const ADJACENT_WALK: usize = 1_000;
const PAIR_STREAM: u64 = 7 << 40;
const WALK_STREAM: u64 = 8 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub pairs: usize,
    pub spearman: f64,
    pub pearson: f64,
    pub adjacent_pairs: usize,
    /// Mean of `|‖Δz‖ − 1|` over adjacent pairs.
    pub adjacent_mean_abs_dev: f64,
    pub adjacent_max_abs_dev: f64,
    /// Set when every sampled pair has the same latent distance.
    pub degenerate: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| (v - x[0]).abs() <= 1e-12 * x[0].abs().max(1.0))
}

/// Builds the report for any cell embedding. Pairs are distinct, mutually
/// reachable open cells; adjacent pairs come from a random walk that skips
/// moves blocked by walls or edges.
pub fn metric_report_for<F>(world: &GridWorld, seed: u64, mut embed: F) -> Result<MetricReport>
where
    F: FnMut(Cell) -> Result<Vec<f64>>,
{
    let cells = world.open_cells();
    if cells.len() < 2 {
        return Err(Error::Config("metric report needs at least two open cells".into()));
    }
    let table = world.distance_table();
    let emb: Vec<Vec<f64>> = cells.iter().map(|&c| embed(c)).collect::<Result<_>>()?;
    let pos = |c: Cell| cells.iter().position(|&x| x == c).expect("open cell");

    let mut rng = stream_rng(seed, PAIR_STREAM);
    let (mut lat, mut bfs) = (Vec::new(), Vec::new());
    while lat.len() < REPORT_PAIRS {
        let i = rng.random_range(0..cells.len());
        let j = rng.random_range(0..cells.len());
        if i == j {
            continue;
        }
        let Some(d) = table[world.cell_index(cells[i])][world.cell_index(cells[j])] else {
            continue;
        };
        lat.push(euclidean(&emb[i], &emb[j]));
        bfs.push(d as f64);
    }

    let mut rng = stream_rng(seed, WALK_STREAM);
    let mut cur = cells[rng.random_range(0..cells.len())];
    let mut devs = Vec::new();
    for _ in 0..ADJACENT_WALK {
        let next = world.successor(cur, GridAction::ALL[rng.random_range(0..4)]);
        if next != cur {
            devs.push((euclidean(&emb[pos(cur)], &emb[pos(next)]) - 1.0).abs());
        }
        cur = next;
    }

    let degenerate = is_constant(&lat);
    if degenerate {
        warn!("all sampled latent distances are equal; correlations are undefined");
    }
    let (spearman, pearson) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        (spearman(&lat, &bfs), pearson(&lat, &bfs))
    };
    Ok(MetricReport {
        pairs: lat.len(),
        spearman,
        pearson,
        adjacent_pairs: devs.len(),
        adjacent_mean_abs_dev: devs.iter().sum::<f64>() / devs.len().max(1) as f64,
        adjacent_max_abs_dev: devs.iter().copied().fold(0.0, f64::max),
        degenerate,
    })
}

/// Report for a gridworld checkpoint using mean encodings.
pub fn metric_report_from_checkpoint(ck: &Checkpoint, seed: u64) -> Result<MetricReport> {
    let (world, model) = load_grid_model(ck)?;
    metric_report_for(&world, seed, |c| {
        Ok(model
            .encoders
            .mean_encode(&MultiModalObservation::new(world.observe_cell(c)))?
            .0)
    })
}

pub fn run_metric_report(checkpoint: &Path, out_dir: &Path, seed: u64) -> Result<MetricReport> {
    if !checkpoint.exists() {
        return Err(Error::Usage(format!("checkpoint {} not found", checkpoint.display())));
    }
    let report = metric_report_from_checkpoint(&Checkpoint::load(checkpoint)?, seed)?;
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join(REPORT_FILE), write_report_csv(&report).as_bytes())?;
    Ok(report)
}

pub fn write_report_csv(r: &MetricReport) -> String {
    format!(
        "{REPORT_HEADER}\n{},{},{},{},{},{},{}\n",
        r.pairs,
        fmt_f64(r.spearman),
        fmt_f64(r.pearson),
        r.adjacent_pairs,
        fmt_f64(r.adjacent_mean_abs_dev),
        fmt_f64(r.adjacent_max_abs_dev),
        u8::from(r.degenerate)
    )
}

pub fn read_report_csv(text: &str) -> Result<MetricReport> {
    let rows = parse_table(text, REPORT_HEADER)?;
    let [f] = rows.as_slice() else {
        return Err(Error::Format(format!("metric report has {} rows, expected 1", rows.len())));
    };
    Ok(MetricReport {
        pairs: parse_usize(&f[0], "pairs")?,
        spearman: parse_f64(&f[1], "spearman")?,
        pearson: parse_f64(&f[2], "pearson")?,
        adjacent_pairs: parse_usize(&f[3], "adjacent_pairs")?,
        adjacent_mean_abs_dev: parse_f64(&f[4], "adjacent_mean_abs_dev")?,
        adjacent_max_abs_dev: parse_f64(&f[5], "adjacent_max_abs_dev")?,
        degenerate: match f[6].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Format(format!("degenerate flag {other:?}"))),
        },
    })
}

pub fn load_report(path: &Path) -> Result<MetricReport> {
    read_report_csv(&fs::read_to_string(path)?)
}
