//! Command line interface.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sonarwreck_core::anomaly::{self, AnomalyConfig};
use sonarwreck_core::compositor::{self, TILE_SIZE, TILE_STRIDE};
use sonarwreck_core::deformation::{self, Fractured};
use sonarwreck_core::eval::{emit_report, ReportFormat};
use sonarwreck_core::pipeline::sample_seed;
use sonarwreck_core::scene::{build_scene, randomize_placement, SceneError};
use sonarwreck_core::seed::{self, stage};
use sonarwreck_core::Grid;

use crate::config::PipelineConfig;
use crate::{anomaly_export, dataset, deff, evaluate, io, render};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sonarwreck", version, about = "Synthetic side scan sonar shipwreck data and evaluation tools")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "SONARWRECK_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one randomized wreck scene to image, label, shadow and scene dump.
    Render {
        /// OBJ mesh (default: the built-in hull).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Render the seabed alone.
        #[arg(long)]
        empty: bool,
    },
    /// Fracture a rendered wreck with a random quadrant field.
    Fracture {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        shadow: Option<PathBuf>,
    },
    /// Paste a fractured wreck onto a terrain tile.
    Composite {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        shadow: Option<PathBuf>,
        /// Terrain image; cropped at a seeded offset when larger than the wreck image.
        #[arg(long)]
        terrain: PathBuf,
    },
    /// Generate a dataset and its manifest.
    Generate {
        /// Override the configured sample count.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Export per-level anomaly maps of an image.
    Anomaly {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        trim: Option<f64>,
    },
    /// Threshold an image's anomaly volume into a wreck mask.
    Segment {
        /// A single image, or a directory of PNGs.
        #[arg(long)]
        image: PathBuf,
        /// Threshold in [0, 2] (default: Otsu per image).
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 16)]
        min_blob: usize,
    },
    /// Score predicted masks against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Dataset manifest supplying site tags.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Site for images the manifest does not tag.
        #[arg(long)]
        default_site: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Cut a raw scan into overlapping square tiles.
    Tile {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = TILE_SIZE)]
        size: usize,
        #[arg(long, default_value_t = TILE_STRIDE)]
        stride: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
}

/// Parse `args` and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.synthesis.master_seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

fn out_dir(g: &GlobalArgs, cfg: &PipelineConfig) -> PathBuf {
    g.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let out = out_dir(&cli.global, &cfg);
    let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads);
    let s = &cfg.synthesis;
    match cli.command {
        Command::Render { mesh, empty } => {
            let mesh = match mesh {
                Some(p) => io::load_mesh(&p)?,
                None => s.hull.mesh(),
            };
            let meshes = [mesh];
            let seed0 = sample_seed(s.master_seed, 0);
            let params = s.sonar_params(seed0);
            params.validate(s.altitude)?;
            let swath = params.swath(s.altitude);
            let scene = if empty {
                build_scene(s.seabed.clone(), swath, &meshes, Vec::new())?
            } else {
                let mut rng = seed::rng_from(seed::derive(seed0, stage::PLACEMENT));
                let mut attempt = 0;
                loop {
                    attempt += 1;
                    let p = randomize_placement(0, &meshes[0], &s.ranges, &mut rng)?;
                    match build_scene(s.seabed.clone(), swath, &meshes, vec![p]) {
                        Ok(scene) => break scene,
                        Err(SceneError::OutsideSwath { .. } | SceneError::TooTall { .. })
                            if attempt < s.max_placement_attempts => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            let scan = render::render_with_workers(&scene, &params, workers)?;
            io::write_gray(&out.join("image.png"), &scan.image)?;
            io::write_mask(&out.join("mask.png"), &scan.labels)?;
            io::write_shadow(&out.join("shadow.png"), &scan.shadow)?;
            io::write_json(&out.join("scene.json"), &scene.dump())?;
        }
        Command::Fracture { image, mask, shadow } => {
            let img = io::read_gray(&image)?;
            let m = io::read_mask(&mask)?;
            let sh = match shadow {
                Some(p) => io::read_shadow(&p)?,
                None => Grid::new(img.width(), img.height()),
            };
            let params = s.deform.params(img.width(), img.height());
            let mut rng = seed::rng_from(seed::derive(s.master_seed, stage::FIELD));
            let field = deformation::generate_quadrant_field(&m, &params, &mut rng)?;
            let f = deformation::apply_field(&img, &m, &sh, &field)?;
            io::write_gray(&out.join("fractured.png"), &f.image)?;
            io::write_mask(&out.join("mask.png"), &f.mask)?;
            io::write_shadow(&out.join("shadow.png"), &f.shadow)?;
            deff::write(&out.join("field.deff"), &field)?;
        }
        Command::Composite {
            image,
            mask,
            shadow,
            terrain,
        } => {
            let img = io::read_gray(&image)?;
            let m = io::read_mask(&mask)?;
            let sh = match shadow {
                Some(p) => io::read_shadow(&p)?,
                None => Grid::new(img.width(), img.height()),
            };
            let t = io::read_gray(&terrain)?;
            let mut rng = seed::rng_from(seed::derive(s.master_seed, stage::TERRAIN));
            let (x, y) = compositor::random_crop_offset(t.dims(), img.dims(), &mut rng)?;
            let t = compositor::crop(&t, x, y, img.width(), img.height());
            let fractured = Fractured {
                image: img,
                mask: m,
                shadow: sh,
            };
            let composite = compositor::composite(&fractured, &t, &s.composite)?;
            io::write_gray(&out.join("composite.png"), &composite)?;
        }
        Command::Generate { samples } => {
            let mut cfg = cfg.clone();
            if let Some(n) = samples {
                cfg.synthesis.samples = n;
            }
            cfg.workers = Some(workers);
            let m = dataset::generate_dataset(&cfg, &out)?;
            println!("{} samples, {} failed, manifest {}", m.records.len(), m.failures.len(), out.join(dataset::MANIFEST).display());
        }
        Command::Anomaly { image, levels, trim } => {
            let mut acfg = AnomalyConfig::default();
            if let Some(l) = levels {
                acfg.levels = l;
            }
            if let Some(q) = trim {
                acfg.trim = q;
            }
            let img = io::read_gray(&image)?;
            let vol = anomaly::anomaly_volume(&img, &acfg)?;
            let tau = anomaly::otsu_threshold(vol.mean_score().as_slice());
            let side = anomaly_export::export_volume(&vol, &out, &stem(&image), Some(tau), &acfg)?;
            println!("{}", side.display());
        }
        Command::Segment { image, tau, min_blob } => {
            if let Some(t) = tau {
                if !(0.0..=2.0).contains(&t) {
                    bail!("tau {t} outside [0, 2]");
                }
            }
            let inputs = if image.is_dir() {
                io::list_files(&image, "png")?
            } else {
                vec![image.clone()]
            };
            let pool = render::thread_pool(workers)?;
            pool.install(|| {
                use rayon::prelude::*;
                inputs.par_iter().try_for_each(|p| -> Result<()> {
                    let img = io::read_gray(p)?;
                    let mask = segment_image(&img, tau, min_blob)?;
                    io::write_mask(&out.join(p.file_name().unwrap()), &mask)
                })
            })?;
        }
        Command::Eval {
            pred,
            gt,
            manifest,
            default_site,
            format,
        } => {
            let sites = match &manifest {
                Some(p) => Some(evaluate::site_index(&dataset::read_manifest(p)?)),
                None => None,
            };
            let default_site = default_site.or_else(|| manifest.is_none().then(|| "all".to_string()));
            let report = evaluate::evaluate_dirs(&pred, &gt, sites.as_ref(), default_site.as_deref())?;
            let fmt = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Markdown => ReportFormat::Markdown,
            };
            print!("{}", emit_report(&report, fmt));
        }
        Command::Tile { image, size, stride } => {
            if size == 0 || stride == 0 {
                bail!("tile size and stride must be positive");
            }
            let raw = io::read_gray(&image)?;
            let tiles = compositor::tile_scan_with(&raw, size, stride).context("tiling scan")?;
            let base = stem(&image);
            for (i, t) in tiles.iter().enumerate() {
                io::write_gray(&out.join(format!("{base}_tile{i:04}.png")), t)?;
            }
            println!("{} tiles", tiles.len());
        }
    }
    Ok(())
}

/// Anomaly-volume segmentation with default extractor settings; `tau`
/// defaults to the Otsu threshold of the image's scores.
pub fn segment_image(img: &sonarwreck_core::GrayImage, tau: Option<f64>, min_blob: usize) -> Result<sonarwreck_core::LabelMask> {
    let vol = anomaly::anomaly_volume(img, &AnomalyConfig::default())?;
    let tau = tau.unwrap_or_else(|| anomaly::otsu_threshold(vol.mean_score().as_slice()));
    Ok(anomaly::segment_from_anomaly(&vol, tau, min_blob))
}
