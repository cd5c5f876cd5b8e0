//! Batch entry points behind the `visa` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::autoencoder::{build_model, train_many, AutoencoderConfig, TrainConfig, VideoAutoencoder};
use crate::editing::{make_texture, PathSpec, Waypoint};
use crate::error::{Error, Result};
use crate::ingest::{
    decode_image_bytes, encode_png, is_model_compatible, load_frames, load_model, save_frames, save_model,
    ConformMode, Frame, FrameSequence, ModelBundle,
};
use crate::latentops::{
    average_codes, cluster, cluster_points, decode_average, embed_all, fit_embedding, interpolate, mediod,
};
use crate::projection::{align_foreign, sample_manifold, spatial_superres};
use crate::service::{self, interpolation_alphas, ServiceConfig};
use crate::transmit::{
    bitrate_report, keyframe_copy_baseline, mean_psnr, psnr, read_vsat, receive, send, ssim, write_vsat,
    TransmissionPlan,
};

/// Exit status for usage and input errors.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "visa", version, about = "Video-specific autoencoders")]
pub struct Cli {
    /// Seed for initialization, shuffling and clustering.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Glob applied to file names inside frame directories.
    #[arg(long, global = true, default_value = "*")]
    pub pattern: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a bundle on one directory of frames.
    Train(TrainArgs),
    /// Export 2D embedding points for a directory of frames.
    Embed(EmbedArgs),
    /// Upsample an image to `scale`× and reproject it.
    Superres(SuperresArgs),
    /// Latent interpolation between two frames.
    Interpolate(InterpolateArgs),
    /// Render a video texture from a path spec.
    Texture(TextureArgs),
    /// Decode the latent average of selected frames.
    Average(AverageArgs),
    /// K-means over the codes of several videos, with purity and coverage.
    Cluster(ClusterArgs),
    /// Simulated low-bitrate transmission.
    #[command(subcommand)]
    Transmit(TransmitCommand),
    /// Evaluation protocols.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Analyses of the learned space.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub height: usize,
    pub width: usize,
}

impl std::str::FromStr for Size {
    type Err = String;

    /// `HEIGHTxWIDTH`, e.g. `256x512`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let height = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
        let width = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
        if !is_model_compatible(height, width) {
            return Err(format!("{s} is not a positive multiple of 64 in both axes"));
        }
        Ok(Size { height, width })
    }
}

#[derive(Debug, Args)]
pub struct TrainOpts {
    /// Filters in the first encoder layer.
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    /// Training resolution as HxW; frames are resized to it.
    #[arg(long, default_value = "256x512")]
    pub size: Size,
    #[arg(long)]
    pub hflip: bool,
    #[arg(long)]
    pub multires: bool,
    /// Epochs at the constant learning rate.
    #[arg(long)]
    pub epochs_constant: Option<usize>,
    /// Epochs of linear decay.
    #[arg(long)]
    pub epochs_decay: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f32>,
}

impl TrainOpts {
    fn configs(&self, seed: u64) -> Result<(AutoencoderConfig, TrainConfig)> {
        let mut ac = AutoencoderConfig::new(self.k, self.size.height, self.size.width);
        ac.hflip_augmentation = self.hflip;
        ac.multires_augmentation = self.multires;
        ac.validate()?;
        let mut tc = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        if let Some(v) = self.epochs_constant {
            tc.epochs_constant = v;
        }
        if let Some(v) = self.epochs_decay {
            tc.epochs_decay = v;
        }
        if let Some(v) = self.batch_size {
            tc.batch_size = v;
        }
        if let Some(v) = self.lr {
            tc.lr = v;
        }
        tc.validate()?;
        Ok((ac, tc))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub frames: PathBuf,
    /// Bundle directory to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SuperresArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Upsampling factor; defaults to whatever reaches the bundle's resolution.
    #[arg(long)]
    pub scale: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub a: u32,
    #[arg(long)]
    pub b: u32,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long)]
    pub include_endpoints: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TextureArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    /// JSON path spec file.
    #[arg(long)]
    pub path: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub ids: Vec<u32>,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// One directory per video.
    #[arg(long, num_args = 1.., required = true)]
    pub frames: Vec<PathBuf>,
    #[arg(long)]
    pub k: usize,
    /// One label per frames directory; defaults to the directory names.
    #[arg(long, num_args = 1..)]
    pub labels: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TransmitCommand {
    /// Packetize keyframes into a `.vsat` stream and report the bitrate.
    Send {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, default_value = "stride=2,factor=4,n=5")]
        plan: TransmissionPlan,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct frames from a `.vsat` stream, optionally scoring against originals.
    Receive {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "stride=2,factor=4,n=5")]
        plan: TransmissionPlan,
        #[arg(long, default_value_t = 1.0)]
        fps_factor: f64,
        /// Original frames, for the PSNR/SSIM report.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "UPPER")]
pub enum TemporalMode {
    /// Train on even frames only.
    Alt,
    /// Train on every frame.
    All,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Odd frames rebuilt as latent midpoints of their even neighbours.
    Temporal {
        #[arg(long, value_enum)]
        mode: TemporalMode,
        #[arg(long)]
        frames: PathBuf,
        /// Use this bundle instead of training one.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Embed original and mirrored frames together; report how well K=2 separates them.
    Flips {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproject an unseen video and keep each step.
    Foreign {
        #[arg(long)]
        bundle: PathBuf,
        /// The unseen video.
        #[arg(long)]
        frames: PathBuf,
        /// Training frames; when given, trace steps get embedding coordinates.
        #[arg(long)]
        train_frames: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a grid of points spanning the embedding of a video.
    Manifold {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub catalog_root: Option<PathBuf>,
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    let pat = cli.pattern.as_str();
    match &cli.command {
        Command::Train(a) => cmd_train(a, seed, pat),
        Command::Embed(a) => cmd_embed(a, seed, pat),
        Command::Superres(a) => cmd_superres(a, seed),
        Command::Interpolate(a) => cmd_interpolate(a, seed, pat),
        Command::Texture(a) => cmd_texture(a, seed, pat),
        Command::Average(a) => cmd_average(a, seed, pat),
        Command::Cluster(a) => cmd_cluster(a, seed, pat),
        Command::Transmit(t) => cmd_transmit(t, seed, pat),
        Command::Eval(EvalCommand::Temporal {
            mode,
            frames,
            bundle,
            opts,
            out,
        }) => cmd_eval_temporal(*mode, frames, bundle.as_deref(), opts, out, seed, pat),
        Command::Analyze(a) => cmd_analyze(a, seed, pat),
        Command::Serve(a) => cmd_serve(a),
    }
}

struct Loaded {
    bundle: ModelBundle,
    model: VideoAutoencoder,
}

fn open_bundle(path: &Path) -> Result<Loaded> {
    let bundle = load_model(path)?;
    let model = VideoAutoencoder::from_bundle(&bundle)?;
    Ok(Loaded { bundle, model })
}

/// Loads a frames directory at the model's resolution.
fn frames_for(model: &VideoAutoencoder, dir: &Path, pattern: &str) -> Result<FrameSequence> {
    let seq = load_frames(dir, pattern)?;
    let (h, w) = (model.config().input_h, model.config().input_w);
    if seq.dims() == (h, w) {
        Ok(seq)
    } else {
        seq.conformed(h, w, ConformMode::Bilinear)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

/// `run.json` inside an output directory, or `<file>.run.json` beside an output file.
fn provenance(out: &Path, is_dir: bool, seed: u64, extra: serde_json::Value) -> Result<()> {
    let path = if is_dir {
        out.join("run.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".run.json");
        out.with_file_name(name)
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    let record = json!({
        "tool": "visa",
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "seed": seed,
        "details": extra,
    });
    write_json(&path, &record)
}

fn save_png(path: &Path, frame: &Frame) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, encode_png(frame)?)?;
    Ok(())
}

fn cmd_train(a: &TrainArgs, seed: u64, pattern: &str) -> Result<()> {
    let (ac, tc) = a.opts.configs(seed)?;
    let seq = load_frames(&a.frames, pattern)?.conformed(ac.input_h, ac.input_w, ConformMode::Bilinear)?;
    let total = tc.total_epochs(seq.len());
    log::info!("training k={} at {}x{} on {} frames for {total} epochs", ac.base_channels, ac.input_h, ac.input_w, seq.len());
    let model = build_model(ac, seed)?;
    let (model, history) = train_many(model, std::slice::from_ref(&seq), &tc, |r| {
        log::info!("epoch {}/{total} loss {:.6} lr {:.2e}", r.epoch + 1, r.mean_loss, r.lr);
    })?;
    let bundle = model.to_bundle();
    save_model(&bundle, &a.out)?;
    let history_path = a.out.join("history.json");
    write_json(&history_path, &history)?;
    provenance(&a.out, true, seed, json!({ "weights_digest": bundle.manifest.weights_digest, "train": tc }))?;
    println!("{}", history_path.display());
    Ok(())
}

fn cmd_embed(a: &EmbedArgs, seed: u64, pattern: &str) -> Result<()> {
    let m = open_bundle(&a.bundle)?;
    let seq = frames_for(&m.model, &a.frames, pattern)?;
    let codes = m.model.encode_all(seq.frames())?;
    let em = fit_embedding(&codes)?;
    let labels = vec![seq.source_label.clone(); codes.len()];
    let points = embed_all(&em, &codes, seq.frame_ids(), &labels)?;
    write_json(&a.out, &points)?;
    provenance(&a.out, false, seed, json!({ "weights_digest": m.bundle.manifest.weights_digest }))?;
    println!("{} points -> {}", points.len(), a.out.display());
    Ok(())
}

fn cmd_superres(a: &SuperresArgs, seed: u64) -> Result<()> {
    let m = open_bundle(&a.bundle)?;
    let low = decode_image_bytes(&std::fs::read(&a.input)?)?;
    let cfg = m.model.config();
    let (th, tw) = match a.scale {
        Some(0) => return Err(Error::InvalidTarget("scale must be positive".into())),
        Some(s) => (low.height() * s, low.width() * s),
        None => (cfg.input_h, cfg.input_w),
    };
    let out = spatial_superres(&m.model, &low, th, tw, a.n)?;
    save_png(&a.out, &out)?;
    provenance(&a.out, false, seed, json!({ "target": [th, tw], "n": a.n }))?;
    println!("{}x{} -> {}x{} {}", low.height(), low.width(), th, tw, a.out.display());
    Ok(())
}

fn index_of(seq: &FrameSequence, id: u32) -> Result<usize> {
    seq.frame_ids()
        .iter()
        .position(|&f| f == id)
        .ok_or(Error::UnknownFrame(id))
}

fn cmd_interpolate(a: &InterpolateArgs, seed: u64, pattern: &str) -> Result<()> {
    if a.steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    let m = open_bundle(&a.bundle)?;
    let seq = frames_for(&m.model, &a.frames, pattern)?;
    let ca = m.model.encode(&seq.frames()[index_of(&seq, a.a)?])?;
    let cb = m.model.encode(&seq.frames()[index_of(&seq, a.b)?])?;
    let alphas = interpolation_alphas(a.steps, a.include_endpoints);
    let frames = alphas
        .iter()
        .map(|&al| interpolate(&m.model, &ca, &cb, al))
        .collect::<Result<Vec<_>>>()?;
    save_frames(&a.out, &frames)?;
    write_json(&a.out.join("alphas.json"), &alphas)?;
    provenance(&a.out, true, seed, json!({ "a": a.a, "b": a.b, "alphas": alphas }))?;
    println!("{} frames -> {}", frames.len(), a.out.display());
    Ok(())
}

fn cmd_texture(a: &TextureArgs, seed: u64, pattern: &str) -> Result<()> {
    let spec = PathSpec::from_json(&std::fs::read_to_string(&a.path)?)?;
    spec.validate()?;
    let m = open_bundle(&a.bundle)?;
    let seq = frames_for(&m.model, &a.frames, pattern)?;
    let codes = m.model.encode_all(seq.frames())?;
    let needs_em = spec.waypoints.iter().any(|w| matches!(w, Waypoint::Point { .. }));
    let em = if needs_em { Some(fit_embedding(&codes)?) } else { None };
    let out = make_texture(&m.model, &codes, &spec, em.as_ref())?;
    save_frames(&a.out, out.frames())?;
    provenance(&a.out, true, seed, json!({ "path": spec, "frame_count": out.len() }))?;
    println!("{} frames -> {}", out.len(), a.out.display());
    Ok(())
}

fn cmd_average(a: &AverageArgs, seed: u64, pattern: &str) -> Result<()> {
    let m = open_bundle(&a.bundle)?;
    let seq = frames_for(&m.model, &a.frames, pattern)?;
    let idx = a.ids.iter().map(|&id| index_of(&seq, id)).collect::<Result<Vec<_>>>()?;
    let selected: Vec<Frame> = idx.iter().map(|&i| seq.frames()[i].clone()).collect();
    let owned = m.model.encode_all(&selected)?;
    let codes: Vec<_> = owned.iter().collect();
    let frame = decode_average(&m.model, &codes, a.iterations)?;
    let med = a.ids[mediod(&codes, &average_codes(&codes)?)?];
    save_png(&a.out, &frame)?;
    provenance(&a.out, false, seed, json!({ "ids": a.ids, "iterations": a.iterations, "mediod_frame_id": med }))?;
    println!("mediod {med} -> {}", a.out.display());
    Ok(())
}

fn cmd_cluster(a: &ClusterArgs, seed: u64, pattern: &str) -> Result<()> {
    if !a.labels.is_empty() && a.labels.len() != a.frames.len() {
        return Err(Error::InvalidConfig(format!(
            "{} labels for {} frame directories",
            a.labels.len(),
            a.frames.len()
        )));
    }
    let m = open_bundle(&a.bundle)?;
    let mut codes = Vec::new();
    let mut labels = Vec::new();
    for (i, dir) in a.frames.iter().enumerate() {
        let seq = frames_for(&m.model, dir, pattern)?;
        let label = a.labels.get(i).cloned().unwrap_or_else(|| seq.source_label.clone());
        codes.extend(m.model.encode_all(seq.frames())?);
        labels.extend(std::iter::repeat_n(label, seq.len()));
    }
    let result = cluster(&codes, &labels, a.k, seed)?;
    write_json(&a.out.join("cluster.json"), &result)?;
    let mut csv = String::from("cumulative_coverage,purity\n");
    for p in &result.purity_curve {
        csv.push_str(&format!("{},{}\n", p.cumulative_coverage, p.purity));
    }
    std::fs::write(a.out.join("purity_coverage.csv"), csv)?;
    provenance(&a.out, true, seed, json!({ "K": a.k, "frames": codes.len() }))?;
    println!("purity-coverage AUC {:.4}", result.auc);
    Ok(())
}

fn cmd_transmit(t: &TransmitCommand, seed: u64, pattern: &str) -> Result<()> {
    match t {
        TransmitCommand::Send {
            bundle,
            frames,
            plan,
            fps,
            out,
        } => {
            plan.validate()?;
            let m = open_bundle(bundle)?;
            let digest16 = m.bundle.manifest.digest16()?;
            let seq = frames_for(&m.model, frames, pattern)?;
            let packets = send(&seq, plan, digest16)?;
            write_vsat(out, &packets)?;
            let report = bitrate_report(&packets, &m.bundle, seq.len() as f64 / fps)?;
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".report.json");
            write_json(&out.with_file_name(name), &report)?;
            provenance(out, false, seed, json!({ "plan": plan.to_string(), "packets": packets.len() }))?;
            println!("{} packets, {:.0} online bit/s -> {}", packets.len(), report.online_bps, out.display());
            Ok(())
        }
        TransmitCommand::Receive {
            bundle,
            input,
            plan,
            fps_factor,
            reference,
            out,
        } => {
            plan.validate()?;
            let m = open_bundle(bundle)?;
            let digest16 = m.bundle.manifest.digest16()?;
            let packets = read_vsat(input)?;
            let seq = receive(&m.model, &digest16, &packets, plan, *fps_factor)?;
            save_frames(out, seq.frames())?;
            let mut details = json!({ "plan": plan.to_string(), "frames": seq.len() });
            if let Some(dir) = reference {
                let orig = frames_for(&m.model, dir, pattern)?;
                if orig.len() != seq.len() {
                    return Err(Error::shape(format!(
                        "reference has {} frames, reconstruction {}",
                        orig.len(),
                        seq.len()
                    )));
                }
                let base = keyframe_copy_baseline(&packets, orig.len())?;
                let ssims = orig
                    .frames()
                    .iter()
                    .zip(seq.frames())
                    .map(|(a, b)| ssim(a, b))
                    .collect::<Result<Vec<_>>>()?;
                let report = json!({
                    "psnr": mean_psnr(orig.frames(), seq.frames())?,
                    "ssim": ssims.iter().sum::<f64>() / ssims.len() as f64,
                    "baseline_psnr": mean_psnr(orig.frames(), base.frames())?,
                    "per_frame_psnr": orig.frames().iter().zip(seq.frames()).map(|(a, b)| psnr(a, b)).collect::<Result<Vec<_>>>()?,
                });
                write_json(&out.join("report.json"), &report)?;
                println!("PSNR {:.2} dB (baseline {:.2} dB), SSIM {:.4}", report["psnr"], report["baseline_psnr"], report["ssim"]);
                details["report"] = report;
            }
            provenance(out, true, seed, details)?;
            println!("{} frames -> {}", seq.len(), out.display());
            Ok(())
        }
    }
}

/// PSNR of odd frames rebuilt as latent midpoints of their even neighbours, against copying the earlier neighbour.
#[derive(Clone, Debug, Serialize)]
pub struct TemporalReport {
    pub mode: String,
    pub evaluated_frames: usize,
    pub interpolation_psnr: f64,
    pub keyframe_copy_psnr: f64,
    pub gain_db: f64,
}

pub fn temporal_eval(model: &VideoAutoencoder, seq: &FrameSequence, mode: &str) -> Result<TemporalReport> {
    let frames = seq.frames();
    if frames.len() < 3 {
        return Err(Error::InsufficientData("temporal evaluation needs at least 3 frames".into()));
    }
    let (mut interp, mut copy) = (Vec::new(), Vec::new());
    let mut targets = Vec::new();
    for i in (1..frames.len() - 1).step_by(2) {
        let ca = model.encode(&frames[i - 1])?;
        let cb = model.encode(&frames[i + 1])?;
        interp.push(interpolate(model, &ca, &cb, 0.5)?);
        copy.push(frames[i - 1].clone());
        targets.push(frames[i].clone());
    }
    let ip = mean_psnr(&targets, &interp)?;
    let cp = mean_psnr(&targets, &copy)?;
    Ok(TemporalReport {
        mode: mode.into(),
        evaluated_frames: targets.len(),
        interpolation_psnr: ip,
        keyframe_copy_psnr: cp,
        gain_db: ip - cp,
    })
}

fn cmd_eval_temporal(
    mode: TemporalMode,
    frames: &Path,
    bundle: Option<&Path>,
    opts: &TrainOpts,
    out: &Path,
    seed: u64,
    pattern: &str,
) -> Result<()> {
    let label = match mode {
        TemporalMode::Alt => "ALT",
        TemporalMode::All => "ALL",
    };
    let model = match bundle {
        Some(b) => open_bundle(b)?.model,
        None => {
            let (ac, tc) = opts.configs(seed)?;
            let seq = load_frames(frames, pattern)?.conformed(ac.input_h, ac.input_w, ConformMode::Bilinear)?;
            let train_set = match mode {
                TemporalMode::All => seq,
                TemporalMode::Alt => {
                    let even: Vec<Frame> = seq.frames().iter().step_by(2).cloned().collect();
                    FrameSequence::new(even, &seq.source_label)?
                }
            };
            let model = build_model(ac, seed)?;
            let (model, history) = train_many(model, std::slice::from_ref(&train_set), &tc, |r| {
                log::info!("epoch {} loss {:.6}", r.epoch + 1, r.mean_loss);
            })?;
            save_model(&model.to_bundle(), out.join("bundle"))?;
            write_json(&out.join("history.json"), &history)?;
            model
        }
    };
    let seq = frames_for(&model, frames, pattern)?;
    let report = temporal_eval(&model, &seq, label)?;
    write_json(&out.join("temporal.json"), &report)?;
    provenance(out, true, seed, json!({ "mode": label }))?;
    println!(
        "{label}: interpolation {:.2} dB, keyframe copy {:.2} dB, gain {:+.2} dB",
        report.interpolation_psnr, report.keyframe_copy_psnr, report.gain_db
    );
    Ok(())
}

fn cmd_analyze(a: &AnalyzeCommand, seed: u64, pattern: &str) -> Result<()> {
    match a {
        AnalyzeCommand::Flips { bundle, frames, out } => {
            let m = open_bundle(bundle)?;
            let seq = frames_for(&m.model, frames, pattern)?;
            let flipped: Vec<Frame> = seq.frames().iter().map(Frame::hflip).collect();
            let mut codes = m.model.encode_all(seq.frames())?;
            codes.extend(m.model.encode_all(&flipped)?);
            let n = seq.len();
            let labels: Vec<String> = (0..2 * n)
                .map(|i| if i < n { "original" } else { "flipped" }.to_string())
                .collect();
            let ids: Vec<u32> = (0..2 * n as u32).map(|i| i % n as u32).collect();
            let em = fit_embedding(&codes)?;
            let points = embed_all(&em, &codes, &ids, &labels)?;
            let xy: Vec<Vec<f64>> = points.iter().map(|p| vec![p.x, p.y]).collect();
            let result = cluster_points(&xy, &labels, 2, seed)?;
            write_json(&out.join("embedding.json"), &points)?;
            write_json(&out.join("separation.json"), &json!({ "purity": result.auc, "hflip_augmentation": m.bundle.manifest.hflip_augmentation }))?;
            provenance(out, true, seed, json!({}))?;
            println!("K=2 separation purity {:.4}", result.auc);
            Ok(())
        }
        AnalyzeCommand::Foreign {
            bundle,
            frames,
            train_frames,
            n,
            out,
        } => {
            let m = open_bundle(bundle)?;
            let seq = frames_for(&m.model, frames, pattern)?;
            let (aligned, mut traces) = align_foreign(&m.model, &seq, *n)?;
            if let Some(dir) = train_frames {
                let train = frames_for(&m.model, dir, pattern)?;
                let em = fit_embedding(&m.model.encode_all(train.frames())?)?;
                for (t, id) in traces.iter_mut().zip(seq.frame_ids()) {
                    t.embed_with(&em, *id, &seq.source_label)?;
                }
            }
            save_frames(out.join("aligned"), aligned.frames())?;
            let traces: Vec<_> = traces.iter().map(|t| t.to_json()).collect();
            write_json(&out.join("traces.json"), &traces)?;
            provenance(out, true, seed, json!({ "n": n }))?;
            println!("{} frames aligned -> {}", aligned.len(), out.display());
            Ok(())
        }
        AnalyzeCommand::Manifold {
            bundle,
            frames,
            grid,
            out,
        } => {
            if *grid < 2 {
                return Err(Error::InvalidConfig("grid must be at least 2".into()));
            }
            let m = open_bundle(bundle)?;
            let seq = frames_for(&m.model, frames, pattern)?;
            let codes = m.model.encode_all(seq.frames())?;
            let em = fit_embedding(&codes)?;
            let coords = codes.iter().map(|c| em.coords(c)).collect::<Result<Vec<_>>>()?;
            let (x0, x1) = coords.iter().fold((f64::MAX, f64::MIN), |(lo, hi), c| (lo.min(c.0), hi.max(c.0)));
            let (y0, y1) = coords.iter().fold((f64::MAX, f64::MIN), |(lo, hi), c| (lo.min(c.1), hi.max(c.1)));
            let g = (*grid - 1) as f64;
            let points: Vec<(f64, f64)> = (0..*grid)
                .flat_map(|r| (0..*grid).map(move |c| (x0 + (x1 - x0) * c as f64 / g, y0 + (y1 - y0) * r as f64 / g)))
                .collect();
            let decoded = sample_manifold(&m.model, Some(&em), &points)?;
            save_frames(out, &decoded)?;
            write_json(&out.join("grid.json"), &points)?;
            provenance(out, true, seed, json!({ "grid": grid }))?;
            println!("{} samples -> {}", decoded.len(), out.display());
            Ok(())
        }
    }
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::from_file(p)?,
        None => ServiceConfig::default(),
    }
    .with_env();
    if let Some(l) = &a.listen {
        cfg.listen = l.clone();
    }
    if let Some(r) = &a.catalog_root {
        cfg.catalog_root = r.clone();
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(service::serve(cfg))
}
