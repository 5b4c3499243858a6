use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use lfsynth_core::dataset::{load_light_fields, load_scenes, write_dataset};
use lfsynth_core::eval::{evaluate, infer_with, Checkpointed, EvalExample};
use lfsynth_core::io::{
    export_png_grid, import_png_grid, load_lf4, read_input_view, store_depth_lf4, store_lf4, write_depth_png,
    write_view_png,
};
use lfsynth_core::lightfield::{ApertureMask, EpiAxis, Extents};
use lfsynth_core::scene::Difficulty;
use lfsynth_core::train::{sha256_hex, Method, TrainConfig, Trainer};
use lfsynth_tensor::Precision;

#[derive(Parser)]
#[command(name = "lfsynth", version, about = "Light field synthesis from a single image")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an oracle dataset of layered scenes.
    SynthData(SynthArgs),
    /// Train, or resume training, from a dataset directory.
    Train(TrainArgs),
    /// Predict a light field from one image or the central view of an LF4.
    Infer(InferArgs),
    /// Shift-and-add refocus with an adjustable aperture.
    Refocus(RefocusArgs),
    /// Write an epipolar-plane image.
    Epi(EpiArgs),
    /// Compare trained methods on a held-out dataset.
    Eval(EvalArgs),
    /// Convert between a PNG view grid and LF4.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "occlusions")]
    difficulty: Difficulty,
    /// Angular and spatial size as VxUxYxX.
    #[arg(long, default_value = "8x8x64x64")]
    extents: Extents,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory or its manifest.tsv.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint written at the end and every `--save-every` steps.
    #[arg(long)]
    out: PathBuf,
    /// Plain-text `key = value` configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resume from this checkpoint instead of initializing.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, default_value_t = 50)]
    log_every: u64,
    #[arg(long, default_value_t = 500)]
    save_every: u64,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// PNG image, or an LF4 whose central view is used.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "single")]
    precision: Precision,
}

#[derive(Args)]
struct RefocusArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Disparity of the in-focus plane.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    disparity: f32,
    /// Chebyshev radius of the square aperture in views; full grid if absent.
    #[arg(long)]
    aperture: Option<usize>,
}

#[derive(Args)]
struct EpiArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `u`: rows are u, columns x. `v`: rows are v, columns y.
    #[arg(long, default_value = "u")]
    axis: EpiAxis,
    /// Fixed image row (axis u) or column (axis v); center if absent.
    #[arg(long)]
    spatial: Option<usize>,
    /// Fixed view row (axis u) or column (axis v); reference if absent.
    #[arg(long)]
    angular: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Held-out dataset directory or its manifest.tsv.
    #[arg(long)]
    data: PathBuf,
    /// One checkpoint per method; repeat the flag.
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    /// PNG grid directory or `.lf4` file.
    #[arg(long)]
    input: PathBuf,
    /// `.lf4` file or PNG grid directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData(a) => synth_data(a),
        Command::Train(a) => train(a),
        Command::Infer(a) => infer(a),
        Command::Refocus(a) => refocus(a),
        Command::Epi(a) => epi(a),
        Command::Eval(a) => eval(a),
        Command::Convert(a) => convert(a),
    }
}

fn synth_data(a: SynthArgs) -> Result<()> {
    let m = write_dataset(&a.out, a.count, a.seed, a.extents, a.difficulty)?;
    println!("wrote {} {} scenes ({}) to {}", m.entries.len(), a.difficulty, a.extents, a.out.display());
    println!("manifest id {}", m.id());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let (manifest, data) = load_light_fields(&a.data)?;
    let mut trainer = match &a.checkpoint {
        Some(path) => {
            let t = Trainer::load(path)?;
            ensure!(
                t.manifest_id == manifest.id(),
                "checkpoint {} was trained on dataset {}, not {}",
                path.display(),
                t.manifest_id,
                manifest.id()
            );
            ensure!(
                a.config.is_none() && a.seed.is_none() && a.method.is_none() && a.precision.is_none(),
                "a resumed run keeps its configuration; only --steps may change"
            );
            t
        }
        None => {
            let mut config = match &a.config {
                Some(p) => TrainConfig::load(p)?,
                None => TrainConfig::desk(),
            };
            if let Some(s) = a.seed {
                config.seed = s;
            }
            if let Some(p) = a.precision {
                config.precision = p;
            }
            if let Some(m) = a.method {
                config.method = m;
            }
            config.validate()?;
            let e = manifest.extents;
            Trainer::new(config, (e.v, e.u), manifest.id())?
        }
    };
    if let Some(s) = a.steps {
        trainer.config.steps = s;
    }
    let target = trainer.config.steps;
    println!(
        "training {} for {} steps on {} scenes, config {}",
        trainer.config.method.name(),
        target,
        data.len(),
        trainer.config.hash()
    );
    while trainer.state.step < target {
        let r = trainer.step(&data)?;
        let step = trainer.state.step;
        if step % a.log_every.max(1) == 0 || step == target {
            let l = r.losses;
            println!(
                "step {step}\ttotal {:.5}\tlambertian {:.5}\tpredicted {:.5}\tconsistency {:.5}\ttv {:.5}\tgrad {:.4}",
                l.total, l.lambertian_l1, l.predicted_l1, l.consistency, l.tv, r.grad_norm
            );
        }
        if step % a.save_every.max(1) == 0 {
            trainer.save(&a.out)?;
        }
    }
    trainer.save(&a.out)?;
    println!("saved {}", a.out.display());
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let trainer = Trainer::load(&a.checkpoint)?;
    let view = read_input_view(&a.input)?;
    let p = infer_with(&trainer.models, &view, a.precision)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let lf = p.light_field.clamped();
    store_lf4(&a.out.join("lightfield.lf4"), &lf)?;
    write_view_png(&a.out.join("corner.png"), &lf.view(0, 0)?)?;
    let e = lf.extents();
    let (rv, ru) = e.reference();
    write_view_png(&a.out.join("epi_u.png"), &lf.epi_slice(EpiAxis::U, e.y / 2, rv)?.to_view()?)?;
    write_view_png(&a.out.join("epi_v.png"), &lf.epi_slice(EpiAxis::V, e.x / 2, ru)?.to_view()?)?;
    if let Some(d) = &p.depths {
        store_depth_lf4(&a.out.join("depth.lf4"), d)?;
        write_depth_png(&a.out.join("depth_center.png"), e.y, e.x, d.central_depths())?;
    }
    println!("wrote {e} light field to {}", a.out.display());
    Ok(())
}

fn refocus(a: RefocusArgs) -> Result<()> {
    let lf = load_lf4(&a.input)?;
    let mask = match a.aperture {
        Some(r) => ApertureMask::square(lf.extents(), r),
        None => ApertureMask::full(lf.extents()),
    };
    let image = lf.refocus(a.disparity, &mask)?;
    write_view_png(&a.out, &image)?;
    Ok(())
}

fn epi(a: EpiArgs) -> Result<()> {
    let lf = load_lf4(&a.input)?;
    let e = lf.extents();
    let (rv, ru) = e.reference();
    let (spatial, angular) = match a.axis {
        EpiAxis::U => (a.spatial.unwrap_or(e.y / 2), a.angular.unwrap_or(rv)),
        EpiAxis::V => (a.spatial.unwrap_or(e.x / 2), a.angular.unwrap_or(ru)),
    };
    write_view_png(&a.out, &lf.epi_slice(a.axis, spatial, angular)?.to_view()?)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (manifest, scenes) = load_scenes(&a.data)?;
    let mut runs = Vec::with_capacity(a.checkpoints.len());
    for path in &a.checkpoints {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        runs.push(Checkpointed {
            trainer: Trainer::from_bytes(&bytes, path)?,
            checkpoint_id: sha256_hex(&bytes),
        });
    }
    let (crop, down) = (runs[0].trainer.config.crop, runs[0].trainer.config.downsample_to);
    if let Some(r) = runs.iter().find(|r| (r.trainer.config.crop, r.trainer.config.downsample_to) != (crop, down)) {
        bail!(
            "checkpoint {} uses crop {} / {}, others {crop} / {down}",
            r.checkpoint_id,
            r.trainer.config.crop,
            r.trainer.config.downsample_to
        );
    }
    let examples = scenes
        .iter()
        .map(|s| EvalExample::from_dataset_scene(s, crop, down))
        .collect::<lfsynth_core::Result<Vec<_>>>()?;
    let report = evaluate(&examples, &manifest.id(), &mut runs)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let table = report.to_tsv();
    write(&a.out.join("report.tsv"), &table)?;
    for row in &report.rows {
        write(&a.out.join(format!("histogram_{}.csv", row.method)), &row.histogram_csv())?;
    }
    print!("{table}");
    Ok(())
}

fn convert(a: ConvertArgs) -> Result<()> {
    let is_lf4 = |p: &Path| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("lf4"));
    match (is_lf4(&a.input), is_lf4(&a.out)) {
        (false, true) => {
            let lf = import_png_grid(&a.input)?;
            store_lf4(&a.out, &lf)?;
            println!("wrote {} light field to {}", lf.extents(), a.out.display());
        }
        (true, false) => {
            let lf = load_lf4(&a.input)?;
            let files = export_png_grid(&a.out, &lf)?;
            println!("wrote {} views to {}", files.len(), a.out.display());
        }
        _ => bail!("convert needs one PNG grid directory and one .lf4 file"),
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
