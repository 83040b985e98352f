//! The command surface: flag definitions and the eight subcommands that tie
//! data generation, pretraining, training, inference, and evaluation
//! together. Every command is deterministic given its flags, and writes
//! only under its output path.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use visage_core::config::ModelConfig;
use visage_core::disc::{StyleDisc, SyncDisc};
use visage_core::model::Generator;
use visage_core::motion::{FaceBasis, MotionSequence, PhonemeSequence};
use visage_core::nn::ParamStore;
use visage_core::rng::SeedRng;
use visage_core::style_encoder::lerp_codes;
use visage_core::synth::{gen_basis, gen_corpus, motion_feature, CorpusSpec, SyntheticCorpus};
use visage_core::train::{
    pretrain_style_disc, pretrain_sync_disc, style_accuracy, Trainer,
};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointState};
use crate::config::load_run_config;
use crate::corpus::{read_corpus, write_corpus};
use crate::error::{io_at, CliError, Result};
use crate::eval::{
    landmark_distance, nearest_centroid_accuracy, pca_2d, silhouette, sync_auc,
};
use crate::formats::{
    read_motion, read_phonemes, read_style_code, write_json, write_motion, write_style_code,
};

/// Vertex count of the synthetic face basis every command derives from a
/// corpus seed. Shared by training and evaluation so landmark metrics and
/// the sync discriminator always see the same geometry.
pub const BASIS_VERTICES: usize = 256;

/// Stylized talking-face motion: synthesize corpora, pretrain and train the
/// model, and run inference, interpolation, and evaluation.
#[derive(Debug, Parser)]
#[command(name = "visage", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus on disk.
    GenData(GenDataArgs),
    /// Pretrain one discriminator and write it as a frozen checkpoint.
    Pretrain(PretrainArgs),
    /// Train the generator and temporal critic against frozen discriminators.
    Train(TrainArgs),
    /// Extract the style code of a motion file.
    ExtractStyle(ExtractStyleArgs),
    /// Decode a motion sequence from phonemes and a style code.
    Infer(InferArgs),
    /// Decode with a blend of two style codes.
    Interpolate(InterpolateArgs),
    /// Score a trained model on a corpus and write a metric report.
    Eval(EvalArgs),
    /// Project every clip's style code to 2-D for external plotting.
    ProjectStyles(ProjectStylesArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Corpus seed; equal seeds give byte-identical corpora.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of speaking styles (at least 2).
    #[arg(long, default_value_t = 4)]
    pub styles: usize,
    /// Clips generated per style (at least 2).
    #[arg(long = "clips-per-style", default_value_t = 20)]
    pub clips_per_style: usize,
    /// Frames per clip.
    #[arg(long = "clip-len", default_value_t = 64)]
    pub clip_len: usize,
    /// Phoneme vocabulary size.
    #[arg(long, default_value_t = 44)]
    pub vocab: usize,
    /// Additive observation noise scale; 0 for a noise-free corpus.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f32,
    /// Frame rate stamped on every clip.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f32,
    /// Directory the corpus is written into.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichDisc {
    Sync,
    Style,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Corpus directory produced by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Which discriminator to pretrain.
    #[arg(long, value_enum)]
    pub which: WhichDisc,
    /// Optional config file; defaults apply where absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set pretrain.sync_steps=200.
    #[arg(long = "set", value_name = "KEY=JSON")]
    pub set: Vec<String>,
    /// Checkpoint file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory produced by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional config file; defaults apply where absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set train.steps=300.
    #[arg(long = "set", value_name = "KEY=JSON")]
    pub set: Vec<String>,
    /// Frozen sync discriminator checkpoint from pretrain.
    #[arg(long = "sync-ckpt")]
    pub sync_ckpt: PathBuf,
    /// Frozen style discriminator checkpoint from pretrain.
    #[arg(long = "style-ckpt")]
    pub style_ckpt: PathBuf,
    /// Directory for the model checkpoint and the loss log.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractStyleArgs {
    /// Model checkpoint from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Motion file to read the style from.
    #[arg(long)]
    pub motion: PathBuf,
    /// Style-code file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Model checkpoint from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Phoneme file driving the mouth.
    #[arg(long)]
    pub phonemes: PathBuf,
    /// Style-code file from extract-style.
    #[arg(long)]
    pub style: PathBuf,
    /// Motion file to write; its length equals the phoneme count.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    /// Model checkpoint from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Style-code file at the alpha = 0 end.
    #[arg(long = "style-a")]
    pub style_a: PathBuf,
    /// Style-code file at the alpha = 1 end.
    #[arg(long = "style-b")]
    pub style_b: PathBuf,
    /// Blend weight in [0, 1]: code = (1 - alpha) a + alpha b.
    #[arg(long)]
    pub alpha: f32,
    /// Phoneme file driving the mouth.
    #[arg(long)]
    pub phonemes: PathBuf,
    /// Motion file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the blended style code here.
    #[arg(long = "code-out")]
    pub code_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model checkpoint from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Corpus directory to score against.
    #[arg(long)]
    pub data: PathBuf,
    /// Report file (structured text) to write.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectStylesArgs {
    /// Model checkpoint from train.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Corpus directory whose clips are projected.
    #[arg(long)]
    pub data: PathBuf,
    /// Table file to write: clip_id,style_label,x,y per row.
    #[arg(long)]
    pub out: PathBuf,
}

/// Dispatch a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Pretrain(a) => cmd_pretrain(&a),
        Command::Train(a) => cmd_train(&a),
        Command::ExtractStyle(a) => cmd_extract_style(&a),
        Command::Infer(a) => cmd_infer(&a),
        Command::Interpolate(a) => cmd_interpolate(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::ProjectStyles(a) => cmd_project_styles(&a),
    }
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    let spec = CorpusSpec {
        seed: a.seed,
        n_styles: a.styles,
        clips_per_style: a.clips_per_style,
        clip_len: a.clip_len,
        vocab: a.vocab,
        noise_scale: a.noise,
        fps: a.fps,
    };
    // Flag-derived preconditions are usage errors, with the styles floor
    // called out explicitly.
    if a.styles < 2 {
        return Err(CliError::usage(format!(
            "--styles must be at least 2 (got {}): style losses compare \
             clips across distinct styles",
            a.styles
        )));
    }
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let corpus = gen_corpus(&spec)?;
    write_corpus(&a.out, &corpus)?;

    let feats: Vec<Vec<f64>> = corpus
        .clips
        .iter()
        .map(|c| motion_feature(&c.target).iter().map(|&v| v as f64).collect())
        .collect();
    let labels: Vec<u32> = corpus.clips.iter().map(|c| c.style_label).collect();
    let sep = silhouette(&feats, &labels);

    println!(
        "wrote {} clips ({} styles x {} clips, {} frames each) to {}",
        corpus.clips.len(),
        a.styles,
        a.clips_per_style,
        a.clip_len,
        a.out.display()
    );
    println!("vocabulary {} at {} fps, noise scale {}", a.vocab, a.fps, a.noise);
    println!("motion-feature separability (silhouette): {sep:.4}");
    Ok(())
}

/// Split a corpus into a training part and a list of held-out clip indices
/// (the last `per_style` clips of each style). The returned corpus shares
/// the style recipes and seed, so derived artifacts stay consistent.
pub fn split_holdout(
    corpus: &SyntheticCorpus,
    per_style: usize,
) -> Result<(SyntheticCorpus, Vec<usize>)> {
    if per_style == 0 {
        return Err(CliError::usage(
            "pretrain.holdout_per_style must be at least 1 so the reported \
             metric is held out"
                .to_string(),
        ));
    }
    let mut holdout = Vec::new();
    for label in 0..corpus.n_styles() as u32 {
        let indices = corpus.clip_indices_of_style(label);
        if indices.len() < per_style + 1 {
            return Err(CliError::usage(format!(
                "style {label} has {} clips; holding out {per_style} per \
                 style leaves no training clips",
                indices.len()
            )));
        }
        holdout.extend_from_slice(&indices[indices.len() - per_style..]);
    }
    holdout.sort_unstable();
    let clips = corpus
        .clips
        .iter()
        .enumerate()
        .filter(|(i, _)| !holdout.contains(i))
        .map(|(_, c)| c.clone())
        .collect();
    Ok((
        SyntheticCorpus {
            styles: corpus.styles.clone(),
            clips,
            seed: corpus.seed,
        },
        holdout,
    ))
}

pub fn cmd_pretrain(a: &PretrainArgs) -> Result<()> {
    let rc = load_run_config(a.config.as_deref(), &a.set)?;
    let corpus = read_corpus(&a.data)?;
    let (train_part, holdout) = split_holdout(&corpus, rc.pretrain.holdout_per_style)?;
    let p = &rc.pretrain;

    let mut ck = Checkpoint::new(
        rc.model.clone(),
        CheckpointState {
            step: 0,
            frozen: true,
            n_styles: corpus.n_styles(),
        },
    );
    match a.which {
        WhichDisc::Sync => {
            let basis = gen_basis(corpus.seed, BASIS_VERTICES)?;
            let (disc, ps, report) = pretrain_sync_disc(
                &train_part,
                &rc.model,
                &basis,
                p.sync_steps,
                p.batch_size,
                p.learning_rate,
                p.seed,
            )?;
            let items: Vec<(&MotionSequence, &PhonemeSequence)> = holdout
                .iter()
                .map(|&i| (&corpus.clips[i].target, &corpus.clips[i].phonemes))
                .collect();
            let auc = sync_auc(&disc, &ps, &rc.model, &basis, &items)?;
            ck.state.step = report.steps as u64;
            ck.insert_section("sync", &ps);
            save_checkpoint(&a.out, &ck)?;
            println!(
                "pretrained sync discriminator: {} steps, final loss {:.4}",
                report.steps, report.final_loss
            );
            println!("held-out sync AUC: {auc:.4}");
        }
        WhichDisc::Style => {
            let (disc, ps, report) = pretrain_style_disc(
                &train_part,
                &rc.model,
                p.style_steps,
                p.batch_size,
                p.learning_rate,
                p.seed,
            )?;
            let acc = style_accuracy(&disc, &ps, &corpus, &holdout)?;
            ck.state.step = report.steps as u64;
            ck.insert_section("style", &ps);
            save_checkpoint(&a.out, &ck)?;
            println!(
                "pretrained style discriminator: {} steps, final loss {:.4}",
                report.steps, report.final_loss
            );
            println!("held-out style accuracy: {acc:.4}");
        }
    }
    println!("wrote frozen checkpoint to {}", a.out.display());
    Ok(())
}

/// One loss-log record; field order fixes the line format.
#[derive(Debug, Serialize)]
struct LossLogLine {
    step: u64,
    rec: f64,
    trip: f64,
    sync: f64,
    tem: f64,
    style: f64,
    total: f64,
    critic: f64,
}

fn expect_frozen_disc(ck: &Checkpoint, section: &str, path: &Path, model: &ModelConfig) -> Result<()> {
    if !ck.state.frozen {
        return Err(CliError::usage(format!(
            "{}: expected a frozen discriminator checkpoint from pretrain",
            path.display()
        )));
    }
    if !ck.has_section(section) {
        return Err(CliError::usage(format!(
            "{}: checkpoint has no \"{section}\" section (sections: {})",
            path.display(),
            ck.section_names().join(", ")
        )));
    }
    if ck.config != *model {
        return Err(CliError::usage(format!(
            "{}: checkpoint was built for a different model configuration",
            path.display()
        )));
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let rc = load_run_config(a.config.as_deref(), &a.set)?;
    let corpus = read_corpus(&a.data)?;
    let sync_ck = load_checkpoint(&a.sync_ckpt)?;
    let style_ck = load_checkpoint(&a.style_ckpt)?;
    expect_frozen_disc(&sync_ck, "sync", &a.sync_ckpt, &rc.model)?;
    expect_frozen_disc(&style_ck, "style", &a.style_ckpt, &rc.model)?;
    if style_ck.state.n_styles != corpus.n_styles() {
        return Err(CliError::usage(format!(
            "{}: style discriminator knows {} styles but the corpus has {}",
            a.style_ckpt.display(),
            style_ck.state.n_styles,
            corpus.n_styles()
        )));
    }

    let basis = gen_basis(corpus.seed, BASIS_VERTICES)?;
    let mut trainer = Trainer::new(&rc.model, &rc.train, corpus.n_styles(), basis)?;

    let mut sync_ps = ParamStore::new();
    let sync = SyncDisc::new(&mut sync_ps, &mut SeedRng::derive(0, 0), &rc.model);
    sync_ck.restore_section("sync", &mut sync_ps)?;
    trainer.install_sync(sync, sync_ps)?;

    let mut style_ps = ParamStore::new();
    let style = StyleDisc::new(
        &mut style_ps,
        &mut SeedRng::derive(0, 0),
        &rc.model,
        style_ck.state.n_styles,
    );
    style_ck.restore_section("style", &mut style_ps)?;
    trainer.install_style(style, style_ps)?;

    fs::create_dir_all(&a.out).map_err(|e| io_at(&a.out, e))?;
    let log_path = a.out.join("loss_log.jsonl");
    let mut log = std::io::BufWriter::new(
        fs::File::create(&log_path).map_err(|e| io_at(&log_path, e))?,
    );
    let mut first_rec = f64::NAN;
    let mut last = None;
    for step in 1..=rc.train.steps as u64 {
        let rep = trainer.train_step(&corpus)?;
        if step == 1 {
            first_rec = rep.losses.rec;
        }
        let line = LossLogLine {
            step,
            rec: rep.losses.rec,
            trip: rep.losses.trip,
            sync: rep.losses.sync,
            tem: rep.losses.tem,
            style: rep.losses.style,
            total: rep.losses.total,
            critic: rep.critic,
        };
        let mut text = serde_json::to_string(&line)
            .map_err(|e| CliError::run(format!("serialize loss record: {e}")))?;
        text.push('\n');
        log.write_all(text.as_bytes()).map_err(|e| io_at(&log_path, e))?;
        last = Some(rep);
    }
    log.flush().map_err(|e| io_at(&log_path, e))?;

    let mut ck = Checkpoint::new(
        rc.model.clone(),
        CheckpointState {
            step: trainer.step,
            frozen: false,
            n_styles: corpus.n_styles(),
        },
    );
    ck.insert_section("generator", &trainer.gen_ps);
    ck.insert_section("temporal", &trainer.tem_ps);
    ck.insert_section("sync", &trainer.sync_ps);
    ck.insert_section("style", &trainer.style_ps);
    let ckpt_path = a.out.join("model.ckpt");
    save_checkpoint(&ckpt_path, &ck)?;

    match last {
        Some(rep) => {
            println!(
                "trained {} steps: rec {:.6} -> {:.6}, total {:.6}",
                rc.train.steps, first_rec, rep.losses.rec, rep.losses.total
            );
        }
        None => println!("trained 0 steps (train.steps = 0); wrote initial weights"),
    }
    println!("wrote {} and {}", ckpt_path.display(), log_path.display());
    Ok(())
}

/// Rebuild the generator from a model checkpoint.
fn load_generator(path: &Path) -> Result<(Generator, ParamStore<f32>, Checkpoint)> {
    let ck = load_checkpoint(path)?;
    let mut ps = ParamStore::new();
    let gen = Generator::new(&mut ps, &mut SeedRng::derive(0, 0), &ck.config)
        .map_err(|e| CliError::run(format!("{}: rebuild generator: {e}", path.display())))?;
    ck.restore_section("generator", &mut ps)?;
    Ok((gen, ps, ck))
}

pub fn cmd_extract_style(a: &ExtractStyleArgs) -> Result<()> {
    let (gen, ps, ck) = load_generator(&a.ckpt)?;
    let motion = read_motion(&a.motion)?;
    let code = gen.extract_style_values(&ps, &motion);
    write_style_code(&a.out, &code)?;
    println!(
        "extracted a {}-dim style code from {} frames to {}",
        ck.config.d_s,
        motion.len(),
        a.out.display()
    );
    Ok(())
}

fn check_phoneme_compat(p: &PhonemeSequence, path: &Path, cfg: &ModelConfig) -> Result<()> {
    if p.vocab() != cfg.vocab {
        return Err(CliError::usage(format!(
            "{}: phoneme vocabulary {} does not match the model's {}",
            path.display(),
            p.vocab(),
            cfg.vocab
        )));
    }
    Ok(())
}

fn check_code_compat(code: &[f32], path: &Path, cfg: &ModelConfig) -> Result<()> {
    if code.len() != cfg.d_s {
        return Err(CliError::usage(format!(
            "{}: style code has {} values but the model expects {}",
            path.display(),
            code.len(),
            cfg.d_s
        )));
    }
    Ok(())
}

pub fn cmd_infer(a: &InferArgs) -> Result<()> {
    let (gen, ps, ck) = load_generator(&a.ckpt)?;
    let phonemes = read_phonemes(&a.phonemes)?;
    check_phoneme_compat(&phonemes, &a.phonemes, &ck.config)?;
    let code = read_style_code(&a.style)?;
    check_code_compat(&code, &a.style, &ck.config)?;
    let motion = gen.infer_sequence(&ps, &phonemes, &code)?;
    write_motion(&a.out, &motion)?;
    println!(
        "decoded {} frames at {} fps to {}",
        motion.len(),
        motion.fps(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_interpolate(a: &InterpolateArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.alpha) || !a.alpha.is_finite() {
        return Err(CliError::usage(format!(
            "--alpha must lie in [0, 1] (got {})",
            a.alpha
        )));
    }
    let (gen, ps, ck) = load_generator(&a.ckpt)?;
    let phonemes = read_phonemes(&a.phonemes)?;
    check_phoneme_compat(&phonemes, &a.phonemes, &ck.config)?;
    let code_a = read_style_code(&a.style_a)?;
    check_code_compat(&code_a, &a.style_a, &ck.config)?;
    let code_b = read_style_code(&a.style_b)?;
    check_code_compat(&code_b, &a.style_b, &ck.config)?;
    let code = lerp_codes(&code_a, &code_b, a.alpha)?;
    if let Some(code_out) = &a.code_out {
        write_style_code(code_out, &code)?;
    }
    let motion = gen.infer_sequence(&ps, &phonemes, &code)?;
    write_motion(&a.out, &motion)?;
    println!(
        "decoded {} frames with alpha {} to {}",
        motion.len(),
        a.alpha,
        a.out.display()
    );
    Ok(())
}

/// Metric report written by eval; field order fixes the file layout.
#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub clips: usize,
    pub f_lmd: f64,
    pub m_lmd: f64,
    pub sync_auc: f64,
    pub silhouette: f64,
    pub nearest_centroid_accuracy: f64,
}

/// Score a trained generator against a corpus. Landmark distances compare
/// each clip's self-driven reconstruction (phonemes plus the clip's own
/// extracted style) with the ground truth; sync AUC ranks the generated
/// motion under the checkpoint's frozen sync discriminator; the style
/// metrics cluster extracted codes, holding out each style's last clip for
/// the nearest-centroid accuracy.
pub fn eval_corpus(
    gen: &Generator,
    gen_ps: &ParamStore<f32>,
    sync: &SyncDisc,
    sync_ps: &ParamStore<f32>,
    cfg: &ModelConfig,
    basis: &FaceBasis,
    corpus: &SyntheticCorpus,
) -> Result<EvalReport> {
    let n = corpus.clips.len();
    let mut f_sum = 0.0f64;
    let mut m_sum = 0.0f64;
    let mut preds = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for clip in &corpus.clips {
        let code = gen.extract_style_values(gen_ps, &clip.target);
        let pred = gen.infer_sequence(gen_ps, &clip.phonemes, &code)?;
        f_sum += landmark_distance(basis, &pred, &clip.target, false)?;
        m_sum += landmark_distance(basis, &pred, &clip.target, true)?;
        codes.push(code.iter().map(|&v| v as f64).collect::<Vec<f64>>());
        labels.push(clip.style_label);
        preds.push(pred);
    }
    let items: Vec<(&MotionSequence, &PhonemeSequence)> = preds
        .iter()
        .zip(&corpus.clips)
        .map(|(p, c)| (p, &c.phonemes))
        .collect();
    let auc = sync_auc(sync, sync_ps, cfg, basis, &items)?;
    let sil = silhouette(&codes, &labels);

    // Nearest-centroid split: each style's last clip is the test point,
    // centroids come from the rest. Styles with a single clip train only.
    let mut train_codes = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_codes = Vec::new();
    let mut test_labels = Vec::new();
    for label in 0..corpus.n_styles() as u32 {
        let indices = corpus.clip_indices_of_style(label);
        for (k, &i) in indices.iter().enumerate() {
            if indices.len() >= 2 && k == indices.len() - 1 {
                test_codes.push(codes[i].clone());
                test_labels.push(label);
            } else {
                train_codes.push(codes[i].clone());
                train_labels.push(label);
            }
        }
    }
    if test_codes.is_empty() {
        return Err(CliError::run(
            "nearest-centroid accuracy needs at least one style with 2 clips".to_string(),
        ));
    }
    let acc = nearest_centroid_accuracy(&train_codes, &train_labels, &test_codes, &test_labels);

    Ok(EvalReport {
        clips: n,
        f_lmd: f_sum / n as f64,
        m_lmd: m_sum / n as f64,
        sync_auc: auc,
        silhouette: sil,
        nearest_centroid_accuracy: acc,
    })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (gen, gen_ps, ck) = load_generator(&a.ckpt)?;
    if !ck.has_section("sync") {
        return Err(CliError::usage(format!(
            "{}: checkpoint has no \"sync\" section; eval needs the frozen \
             sync discriminator bundled by train",
            a.ckpt.display()
        )));
    }
    let mut sync_ps = ParamStore::new();
    let sync = SyncDisc::new(&mut sync_ps, &mut SeedRng::derive(0, 0), &ck.config);
    ck.restore_section("sync", &mut sync_ps)?;
    let corpus = read_corpus(&a.data)?;
    let basis = gen_basis(corpus.seed, BASIS_VERTICES)?;

    let report = eval_corpus(&gen, &gen_ps, &sync, &sync_ps, &ck.config, &basis, &corpus)?;
    write_json(&a.report, &report)?;
    println!("evaluated {} clips", report.clips);
    println!("F-LMD (all vertices):        {:.6}", report.f_lmd);
    println!("M-LMD (mouth vertices):      {:.6}", report.m_lmd);
    println!("sync AUC:                    {:.4}", report.sync_auc);
    println!("style-code silhouette:       {:.4}", report.silhouette);
    println!("nearest-centroid accuracy:   {:.4}", report.nearest_centroid_accuracy);
    println!("wrote {}", a.report.display());
    Ok(())
}

pub fn cmd_project_styles(a: &ProjectStylesArgs) -> Result<()> {
    let (gen, gen_ps, _ck) = load_generator(&a.ckpt)?;
    let corpus = read_corpus(&a.data)?;
    let codes: Vec<Vec<f64>> = corpus
        .clips
        .iter()
        .map(|c| {
            gen.extract_style_values(&gen_ps, &c.target)
                .iter()
                .map(|&v| v as f64)
                .collect()
        })
        .collect();
    let proj = pca_2d(&codes);
    let mut table = String::from("clip_id,style_label,x,y\n");
    for (i, (clip, &(x, y))) in corpus.clips.iter().zip(&proj).enumerate() {
        table.push_str(&format!("{},{},{},{}\n", i, clip.style_label, x, y));
    }
    fs::write(&a.out, table).map_err(|e| io_at(&a.out, e))?;
    println!(
        "projected {} style codes onto the top-2 principal directions: {}",
        corpus.clips.len(),
        a.out.display()
    );
    Ok(())
}
