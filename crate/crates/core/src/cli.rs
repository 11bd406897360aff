//! The `ssgloss` command-line tool.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::backend::Backend;
use crate::bench::{bench, write_csv, BenchCase};
use crate::config::{Mode, SsgConfig};
use crate::edge_mask::{compute_edge_mask, load_mask, precompute_mask_dir, save_mask, EdgeMask};
use crate::error::{Error, Result};
use crate::fast_kernel::KernelPlan;
use crate::field::{write_field, FieldRef};
use crate::image_io::{from_unit, load_image, save_image, to_unit, Image, ImageU8};
use crate::optimize::{total_loss, toy_optimize};
use crate::synth;

#[derive(Debug, Parser)]
#[command(
    name = "ssgloss",
    version,
    about = "Edge-masked self-similarity graphs and losses"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Gan,
    Dm,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Search area side length
    #[arg(long = "Ks", global = true)]
    pub ks: Option<usize>,
    /// Sliding window side length
    #[arg(long = "Kw", global = true)]
    pub kw: Option<usize>,
    /// Similarity temperature
    #[arg(long = "h", global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Edge threshold on the 8-bit scale
    #[arg(long = "t", global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "gan")]
    pub mode: ModeArg,
    #[arg(long, global = true, env = "SSGLOSS_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use the single-threaded reference implementation
    #[arg(long, global = true)]
    pub oracle: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute edge masks; without --out each mask is written beside its image
    Mask {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the loss between a ground-truth image and a reconstruction
    Loss {
        hr: PathBuf,
        sr: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        grad_out: Option<PathBuf>,
        #[arg(long)]
        per_center: bool,
    },
    /// Write the gradient field of the loss with respect to the reconstruction
    Grad {
        hr: PathBuf,
        sr: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write the self-similarity graph of an image
    SsgDump {
        image: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render one center's weights as a Ks x Ks PGM
    Heatmap {
        image: PathBuf,
        /// Center as `row,col`
        #[arg(long)]
        center: String,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Denoise a noisy copy of an image by descending the loss
    Optimize {
        hr: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(short, long)]
        out: PathBuf,
        /// Also save the noisy starting image
        #[arg(long)]
        noisy_out: Option<PathBuf>,
    },
    /// Time the graph kernel and print the benchmark CSV
    Bench {
        /// Comma-separated HxW list
        #[arg(long, default_value = "64x64,128x128")]
        sizes: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long)]
        max_centers: Option<usize>,
        /// Sweep Ks in {19,25,31} and Kw in {5,9,13}
        #[arg(long)]
        ablation: bool,
    },
}

impl GlobalArgs {
    pub fn config(&self) -> Result<SsgConfig> {
        let mode = match self.mode {
            ModeArg::Gan => Mode::Gan,
            ModeArg::Dm => Mode::Dm,
        };
        let mut cfg = SsgConfig::for_mode(mode);
        if let Some(v) = self.ks {
            cfg.search = v;
        }
        if let Some(v) = self.kw {
            cfg.window = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.stride {
            cfg.stride = v;
        }
        if let Some(v) = self.t {
            cfg.threshold = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn backend(&self) -> Result<Backend> {
        if self.oracle {
            return Ok(Backend::Oracle);
        }
        let mut plan = KernelPlan::default();
        if let Some(n) = self.workers {
            plan.n_workers = n;
        }
        plan.validate()?;
        Ok(Backend::Fast(plan))
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{value}").map_err(|e| Error::io("<stdout>", e))
}

fn mask_for(hr: &ImageU8, path: Option<&Path>, cfg: &SsgConfig) -> Result<EdgeMask> {
    match path {
        Some(p) => load_mask(p),
        None => compute_edge_mask(hr, cfg),
    }
}

fn load_pair(hr: &Path, sr: &Path) -> Result<(ImageU8, Image, Image)> {
    let hr8 = load_image(hr)?;
    let sr8 = load_image(sr)?;
    if hr8.shape() != sr8.shape() {
        return Err(Error::ShapeMismatch {
            left: format!(
                "{} is {}x{}x{}",
                hr.display(),
                hr8.height,
                hr8.width,
                hr8.channels
            ),
            right: format!(
                "{} is {}x{}x{}",
                sr.display(),
                sr8.height,
                sr8.width,
                sr8.channels
            ),
        });
    }
    let (hr_img, sr_img) = (to_unit(&hr8), to_unit(&sr8));
    Ok((hr8, hr_img, sr_img))
}

fn parse_center(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidConfig(format!("center must be `row,col`, got {s:?}"));
    let (r, c) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_sizes(s: &str) -> Result<Vec<BenchCase>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (h, w) = t
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| Error::InvalidConfig(format!("size must be HxW, got {t:?}")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("bad size component {v:?}")))
            };
            Ok(BenchCase::new(parse(h)?, parse(w)?))
        })
        .collect()
}

/// Weights of one center laid out on the search grid, brightest = largest.
/// Sampled cells map to 1..=255 so that every sample stays visible.
pub fn heatmap(ssg: &crate::ssg::Ssg, center: (usize, usize)) -> Result<ImageU8> {
    let i = ssg
        .centers
        .binary_search(&center)
        .map_err(|_| Error::InvalidCenter {
            row: center.0,
            col: center.1,
        })?;
    let side = ssg.search;
    let radius = (side / 2) as isize;
    let row = ssg.row(i);
    let max = row.iter().cloned().fold(0.0f64, f64::max);
    let mut data = vec![0u8; side * side];
    for (&w, &(dr, dc)) in row.iter().zip(&ssg.offsets) {
        let cell = ((dr + radius) as usize) * side + (dc + radius) as usize;
        data[cell] = 1 + (254.0 * w / max).round() as u8;
    }
    ImageU8::new(side, side, 1, data)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.global.config()?;
    let backend = cli.global.backend()?;
    match cli.command {
        Command::Mask { inputs, out } => {
            if let (Some(out), [input]) = (&out, inputs.as_slice()) {
                let mask = compute_edge_mask(&load_image(input)?, &cfg)?;
                save_mask(out, &mask)?;
                return print_json(&json!({
                    "input": input,
                    "output": out,
                    "edge_fraction": mask.edge_fraction,
                    "n_centers": mask.centers.len(),
                }));
            }
            if out.is_some() {
                return Err(Error::InvalidConfig("--out takes a single input".into()));
            }
            let mut first_err = None;
            for outcome in precompute_mask_dir(&inputs, &cfg) {
                match outcome.result {
                    Ok((path, fraction)) => print_json(&json!({
                        "input": outcome.input,
                        "output": path,
                        "edge_fraction": fraction,
                    }))?,
                    Err(e) => {
                        eprintln!("ssgloss: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Loss {
            hr,
            sr,
            mask,
            grad_out,
            per_center,
        } => {
            let (hr8, hr_img, sr_img) = load_pair(&hr, &sr)?;
            let mask = mask_for(&hr8, mask.as_deref(), &cfg)?;
            let (report, grad) = backend.ssl_backward(&hr_img, &sr_img, &mask, &cfg)?;
            if let Some(path) = grad_out {
                write_field(path, FieldRef::Grad(&grad))?;
            }
            let report = if per_center {
                report
            } else {
                report.without_per_center()
            };
            print_json(&serde_json::to_value(&report).expect("report serializes"))
        }
        Command::Grad { hr, sr, mask, out } => {
            let (hr8, hr_img, sr_img) = load_pair(&hr, &sr)?;
            let mask = mask_for(&hr8, mask.as_deref(), &cfg)?;
            let (report, grad) = backend.ssl_backward(&hr_img, &sr_img, &mask, &cfg)?;
            write_field(&out, FieldRef::Grad(&grad))?;
            print_json(
                &serde_json::to_value(report.without_per_center()).expect("report serializes"),
            )
        }
        Command::SsgDump { image, mask, out } => {
            let img8 = load_image(&image)?;
            let mask = mask_for(&img8, mask.as_deref(), &cfg)?;
            let ssg = backend.compute_ssg(&to_unit(&img8), &mask, &cfg)?;
            write_field(&out, FieldRef::Ssg(&ssg))?;
            print_json(&json!({"n_centers": ssg.n_centers(), "n_offsets": ssg.n_offsets()}))
        }
        Command::Heatmap {
            image,
            center,
            mask,
            out,
        } => {
            let center = parse_center(&center)?;
            let img8 = load_image(&image)?;
            let mask = mask_for(&img8, mask.as_deref(), &cfg)?;
            if !mask.is_center(center.0, center.1) {
                return Err(Error::InvalidCenter {
                    row: center.0,
                    col: center.1,
                });
            }
            let single = EdgeMask::with_centers(mask.height, mask.width, &[center], &cfg)?;
            let ssg = backend.compute_ssg(&to_unit(&img8), &single, &cfg)?;
            save_image(&out, &heatmap(&ssg, center)?)?;
            print_json(&json!({"center": [center.0, center.1], "n_offsets": ssg.n_offsets()}))
        }
        Command::Optimize {
            hr,
            noise,
            steps,
            lr,
            out,
            noisy_out,
        } => {
            let hr8 = load_image(&hr)?;
            let target = to_unit(&hr8);
            let noisy = synth::with_uniform_noise(&target, noise, cli.global.seed);
            if let Some(path) = noisy_out {
                save_image(path, &from_unit(&noisy))?;
            }
            let mask = compute_edge_mask(&hr8, &cfg)?;
            let result = toy_optimize(&noisy, &target, &mask, &cfg, steps, lr, &backend)?;
            let last = total_loss(&result.image, &target, &mask, &cfg, &backend)?;
            save_image(&out, &from_unit(&result.image))?;
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
            for row in &result.trace {
                w.serialize(row).map_err(csv_err)?;
            }
            w.serialize(crate::optimize::StepLoss {
                step: steps,
                ..last
            })
            .map_err(csv_err)?;
            w.flush().map_err(|e| Error::io("<stdout>", e))
        }
        Command::Bench {
            sizes,
            trials,
            max_centers,
            ablation,
        } => {
            let mut cases = parse_sizes(&sizes)?;
            for case in &mut cases {
                case.max_centers = max_centers;
            }
            let cfgs: Vec<SsgConfig> = if ablation {
                [19, 25, 31]
                    .iter()
                    .flat_map(|&ks| {
                        [5, 9, 13]
                            .iter()
                            .map(move |&kw| cfg.with_geometry(ks, kw, cfg.stride))
                    })
                    .collect()
            } else {
                vec![cfg]
            };
            let plan = match backend {
                Backend::Fast(plan) => plan,
                Backend::Oracle => {
                    return Err(Error::InvalidConfig(
                        "bench times the fast kernel; drop --oracle".into(),
                    ))
                }
            };
            let rows = bench(&cases, &cfgs, &plan, trials, cli.global.seed)?;
            write_csv(io::stdout().lock(), &rows)
        }
    }
}
