//! Wall-clock measurements of graph construction against the cost model.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::config::SsgConfig;
use crate::edge_mask::{compute_edge_mask, EdgeMask};
use crate::error::{Error, Result};
use crate::fast_kernel::{compute_ssg_fast, KernelPlan};
use crate::image_io::{from_unit, Image};
use crate::ssg::estimate_cost;
use crate::synth;

pub const CSV_HEADER: &str = "h,w,n_centers,Ks,Kw,stride,workers,wall_ns,predicted_madds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCase {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Keep at most this many centers of the mask.
    pub max_centers: Option<usize>,
}

impl BenchCase {
    pub fn new(height: usize, width: usize) -> Self {
        BenchCase {
            height,
            width,
            channels: 3,
            max_centers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub h: usize,
    pub w: usize,
    pub n_centers: usize,
    #[serde(rename = "Ks")]
    pub ks: usize,
    #[serde(rename = "Kw")]
    pub kw: usize,
    pub stride: usize,
    pub workers: usize,
    pub wall_ns: u64,
    pub predicted_madds: u64,
}

impl BenchRow {
    pub fn ns_per_madd(&self) -> f64 {
        if self.predicted_madds == 0 {
            0.0
        } else {
            self.wall_ns as f64 / self.predicted_madds as f64
        }
    }
}

/// Median wall time of `trials` runs of the fast graph kernel.
pub fn bench_workload(
    img: &Image,
    mask: &EdgeMask,
    cfg: &SsgConfig,
    plan: &KernelPlan,
    trials: usize,
) -> Result<BenchRow> {
    let mut rows = bench_interleaved(&[(img, mask, cfg)], plan, trials)?;
    Ok(rows.remove(0))
}

/// Times several workloads round-robin: trial `k` of every workload runs
/// before trial `k + 1` of any, so drift in machine speed hits all rows alike.
/// Each workload gets one untimed warm-up run; rows report the median.
pub fn bench_interleaved(
    workloads: &[(&Image, &EdgeMask, &SsgConfig)],
    plan: &KernelPlan,
    trials: usize,
) -> Result<Vec<BenchRow>> {
    let mut rows: Vec<BenchRow> = workloads
        .iter()
        .map(|&(img, mask, cfg)| BenchRow {
            h: img.height,
            w: img.width,
            n_centers: mask.centers.len(),
            ks: cfg.search,
            kw: cfg.window,
            stride: cfg.stride,
            workers: plan.n_workers,
            wall_ns: 0,
            predicted_madds: estimate_cost(cfg, mask, img.channels),
        })
        .collect();
    let trials = trials.max(1);
    let mut times = vec![Vec::with_capacity(trials); workloads.len()];
    for round in 0..=trials {
        for (k, &(img, mask, cfg)) in workloads.iter().enumerate() {
            if mask.centers.is_empty() {
                continue;
            }
            let start = Instant::now();
            let ssg = compute_ssg_fast(img, mask, cfg, plan)?;
            let elapsed = start.elapsed();
            std::hint::black_box(&ssg);
            if round > 0 {
                times[k].push(elapsed.as_nanos() as u64);
            }
        }
    }
    for (row, mut t) in rows.iter_mut().zip(times) {
        if !t.is_empty() {
            t.sort_unstable();
            row.wall_ns = t[t.len() / 2];
        }
    }
    Ok(rows)
}

/// One row per (case, config) on seeded noise images, median of `trials >= 5` runs.
pub fn bench(
    cases: &[BenchCase],
    cfgs: &[SsgConfig],
    plan: &KernelPlan,
    trials: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut prepared = Vec::with_capacity(cases.len() * cfgs.len());
    for case in cases {
        let img = synth::uniform_noise(case.height, case.width, case.channels, seed);
        let img8 = from_unit(&img);
        for cfg in cfgs {
            let mut mask = compute_edge_mask(&img8, cfg)?;
            if let Some(n) = case.max_centers {
                mask = mask.truncated(n);
            }
            prepared.push((img.clone(), mask, *cfg));
        }
    }
    let workloads: Vec<_> = prepared.iter().map(|(i, m, c)| (i, m, c)).collect();
    bench_interleaved(&workloads, plan, trials.max(5))
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io("<bench output>", e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
