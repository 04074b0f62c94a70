// SPDX-License-Identifier: Apache-2.0

//! Command line front end: run the pipeline over a sequence, evaluate label
//! predictions, generate synthetic sequences, and convert terrain exports.
//!
//! Exit codes: 0 ok, 1 usage error, 2 data error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use groundseg::eval::{self, MetricsRow};
use groundseg::io::terrain::TerrainSnapshot;
use groundseg::io::{labels, poses, velodyne};
use groundseg::synth::{self, SceneSpec};
use groundseg::{Config, Pipeline};

#[derive(Parser)]
#[command(name = "groundseg", version, about = "LiDAR ground segmentation and terrain estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every scan of a sequence and export the terrain.
    Run(RunArgs),
    /// Score predicted label files against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic sequence with ground-truth labels.
    Synth(SynthArgs),
    /// Convert a terrain CSV snapshot into CSV or PGM.
    ExportTerrain(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Sequence directory holding velodyne/*.bin, poses.txt, calib.txt.
    sequence_dir: PathBuf,
    /// Output directory for label files and terrain exports.
    out_dir: PathBuf,
    /// Pipeline parameter file (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Intra-frame worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
    /// First frame index to process (inclusive).
    #[arg(long)]
    start: Option<usize>,
    /// Last frame index to process (inclusive).
    #[arg(long)]
    end: Option<usize>,
    /// Export a terrain snapshot every N frames in addition to the final one.
    #[arg(long, value_name = "N")]
    export_every: Option<usize>,
    /// Write the per-frame stage timing report to this CSV file.
    #[arg(long)]
    timing_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted .label files (or one subdirectory per sequence).
    pred_dir: PathBuf,
    /// Directory of ground-truth .label files with matching names.
    truth_dir: PathBuf,
    /// Pipeline parameter file carrying the label sets.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output sequence directory.
    out_dir: PathBuf,
    /// Scene description file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Number of frames to generate.
    #[arg(long, default_value_t = 50)]
    frames: usize,
    /// Vehicle speed along +x, m/s.
    #[arg(long, default_value_t = 5.0)]
    speed: f64,
    /// Frame interval, seconds.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Args)]
struct ExportArgs {
    /// Input terrain CSV snapshot.
    input: PathBuf,
    /// Output file.
    output: PathBuf,
    /// Output format.
    #[arg(long, value_parser = ["csv", "pgm"], default_value = "pgm")]
    format: String,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are normal exits, everything else is usage.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::ExportTerrain(args) => cmd_export(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(2);
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    })
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(workers) = args.workers {
        cfg.worker_count = workers;
        cfg.validate()?;
    }

    // Validate the whole input before creating any output.
    let velo_dir = args.sequence_dir.join("velodyne");
    let mut scans: Vec<PathBuf> = fs::read_dir(&velo_dir)
        .with_context(|| format!("reading {}", velo_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "bin"))
        .collect();
    scans.sort();
    if scans.is_empty() {
        bail!("no .bin scans under {}", velo_dir.display());
    }
    let poses_path = args.sequence_dir.join("poses.txt");
    let calib_path = args.sequence_dir.join("calib.txt");
    let poses_text =
        fs::read_to_string(&poses_path).with_context(|| format!("reading {}", poses_path.display()))?;
    let calib_text =
        fs::read_to_string(&calib_path).with_context(|| format!("reading {}", calib_path.display()))?;
    let poses = poses::read_poses(&poses_text, &calib_text)?;
    if poses.len() < scans.len() {
        bail!("{} scans but only {} poses", scans.len(), poses.len());
    }
    let start = args.start.unwrap_or(0);
    let end = args.end.unwrap_or(scans.len() - 1);
    if start > end || end >= scans.len() {
        bail!("frame range {start}..={end} out of bounds (have {} frames)", scans.len());
    }

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut pipeline = Pipeline::new(cfg.clone())?;
    let mut timing_csv = String::from(
        "frame,recenter_ms,outlier_ms,raster_ms,classify_ms,fuse_ms,interpolate_ms,segment_ms,total_ms\n",
    );
    let mut total_ms = 0.0f64;
    let mut max_ms = 0.0f64;
    let mut total_dropped = 0usize;
    let mut total_oob = 0usize;

    for frame in start..=end {
        let scan_path = &scans[frame];
        let bytes =
            fs::read(scan_path).with_context(|| format!("reading {}", scan_path.display()))?;
        let (mut cloud, dropped) = velodyne::read_velodyne_bin(&bytes)?;
        total_dropped += dropped;
        cloud.frame_id = frame as u64;
        let world = cloud.transformed(&poses[frame]);

        let result = pipeline.process_frame(&world)?;
        total_oob += result.out_of_bounds;

        let stem = scan_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{frame:06}"));
        let label_path = args.out_dir.join(format!("{stem}.label"));
        let encoded = labels::encode_point_labels(&result.labels, &cfg);
        fs::write(&label_path, labels::write_labels(&encoded))
            .with_context(|| format!("writing {}", label_path.display()))?;

        let t = &result.timings;
        let _ = writeln!(
            timing_csv,
            "{frame},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            t.recenter_ms,
            t.outlier_ms,
            t.raster_ms,
            t.classify_ms,
            t.fuse_ms,
            t.interpolate_ms,
            t.segment_ms,
            t.total_ms
        );
        total_ms += t.total_ms;
        max_ms = max_ms.max(t.total_ms);

        if let Some(every) = args.export_every {
            if every > 0 && (frame - start) % every == 0 {
                export_snapshot(&pipeline, &args.out_dir, &format!("terrain_{frame:06}"))?;
            }
        }
    }

    export_snapshot(&pipeline, &args.out_dir, "terrain_final")?;
    if let Some(path) = &args.timing_out {
        fs::write(path, &timing_csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let frames = (end - start + 1) as f64;
    println!(
        "processed {} frames: mean {:.2} ms, max {:.2} ms per frame",
        end - start + 1,
        total_ms / frames,
        max_ms
    );
    if total_dropped > 0 {
        println!("dropped {total_dropped} non-finite points");
    }
    if total_oob > 0 {
        println!("{total_oob} kept points fell outside the map");
    }
    Ok(())
}

fn export_snapshot(pipeline: &Pipeline, out_dir: &Path, stem: &str) -> Result<()> {
    let Some(map) = pipeline.map() else {
        return Ok(());
    };
    let snapshot = TerrainSnapshot::from_map(map);
    let path = out_dir.join(format!("{stem}.csv"));
    let mut buf = Vec::new();
    snapshot.write_csv(&mut buf)?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// A sequence is a directory of .label files; eval accepts either one
/// sequence per side or a directory of sequence subdirectories.
fn label_sequences(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let files = label_files(dir)?;
    if !files.is_empty() {
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into());
        return Ok(vec![(name, files)]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for sub in subdirs {
        let files = label_files(&sub)?;
        if !files.is_empty() {
            let name = sub.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, files));
        }
    }
    if out.is_empty() {
        bail!("no .label files under {}", dir.display());
    }
    Ok(out)
}

fn label_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "label"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let pred_seqs = label_sequences(&args.pred_dir)?;
    let truth_seqs = label_sequences(&args.truth_dir)?;
    if pred_seqs.len() != truth_seqs.len() {
        bail!(
            "sequence count mismatch: {} predicted vs {} truth",
            pred_seqs.len(),
            truth_seqs.len()
        );
    }

    let mut rows = Vec::new();
    for ((name, preds), (_, truths)) in pred_seqs.iter().zip(&truth_seqs) {
        if preds.len() != truths.len() {
            let missing = if preds.len() < truths.len() {
                &truths[preds.len()]
            } else {
                &preds[truths.len()]
            };
            bail!(
                "sequence {name}: frame count mismatch ({} predicted vs {}) near {}",
                preds.len(),
                truths.len(),
                missing.display()
            );
        }
        let mut counts = eval::ConfusionCounts::default();
        for (pred_path, truth_path) in preds.iter().zip(truths) {
            let pred = labels::read_labels(
                &fs::read(pred_path).with_context(|| format!("reading {}", pred_path.display()))?,
            )?;
            let truth = labels::read_labels(
                &fs::read(truth_path)
                    .with_context(|| format!("reading {}", truth_path.display()))?,
            )?;
            let frame = eval::accumulate_confusion_ids(&pred, &truth, &cfg)
                .with_context(|| format!("frame {}", pred_path.display()))?;
            counts.merge(&frame);
        }
        rows.push(MetricsRow {
            sequence: name.clone(),
            metrics: eval::compute_metrics(&counts),
        });
    }

    let mut buf = Vec::new();
    eval::write_metrics_csv(&rows, &mut buf)?;
    match &args.out {
        Some(path) => {
            fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = match &args.scene {
        Some(path) => {
            SceneSpec::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => SceneSpec::default(),
    };
    if args.frames == 0 {
        bail!("--frames must be >= 1");
    }
    let poses = synth::straight_trajectory(&spec, args.frames, args.speed, args.dt);
    synth::write_kitti_sequence(&spec, &poses, &args.out_dir)?;
    println!(
        "wrote {} synthetic frames to {}",
        args.frames,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let snapshot = TerrainSnapshot::read_csv(&text)?;
    match args.format.as_str() {
        "csv" => {
            let mut buf = Vec::new();
            snapshot.write_csv(&mut buf)?;
            fs::write(&args.output, buf)
                .with_context(|| format!("writing {}", args.output.display()))?;
        }
        "pgm" => snapshot.write_pgm(&args.output)?,
        other => bail!("unknown format `{other}`"),
    }
    println!("wrote {}", args.output.display());
    Ok(())
}
