//! Command-line surface: `train`, `decode`, `eval`, `sample` and `init`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::corpus::{load_corpus, read_text, write_corpus, write_labels, write_text, CorpusEntry};
use crate::decode::{decode_all, DecodeConfig};
use crate::error::{Error, Result};
use crate::metrics::{der, labels_to_timeline, parse_rttm, write_rttm, Timeline};
use crate::model::ModelParams;
use crate::net::{EmissionParams, NetDims, NetParams};
use crate::prior::PriorParams;
use crate::sample::sample_corpus;
use crate::train::{train, TrainConfig, Utterance};

#[derive(Debug, Parser)]
#[command(name = "uisrnn", version, about = "Train, decode and score interleaved-state RNN diarization models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a labelled corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON training configuration; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Training log (default: checkpoint path with a `.log` extension).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Decode speaker labels for every utterance of a corpus.
    Decode {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        #[arg(long)]
        max_speakers: Option<usize>,
        #[arg(long, default_value_t = 0)]
        look_ahead: usize,
        /// Seconds per segment when writing the RTTM.
        #[arg(long, default_value_t = 0.4)]
        segment_duration: f64,
        /// RTTM output (default: `--out` with a `.rttm` extension).
        #[arg(long)]
        rttm: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Score a hypothesis RTTM against a reference RTTM.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        collar: f64,
        /// Score overlapped reference speech instead of excluding it.
        #[arg(long)]
        keep_overlap: bool,
    },
    /// Sample a synthetic labelled corpus from a checkpoint.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        num: usize,
        #[arg(long = "len")]
        length: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Also write the reference RTTM of the sampled labels.
        #[arg(long)]
        rttm: Option<PathBuf>,
        #[arg(long, default_value_t = 0.4)]
        segment_duration: f64,
    },
    /// Write a randomly initialised checkpoint (e.g. as a sampling generator).
    Init {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 16)]
        fc: usize,
        #[arg(long, default_value_t = 0.8)]
        p0: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma2: f64,
        /// Multiplier on the uniform initialisation bounds.
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn labelled(entries: Vec<CorpusEntry<f64>>, path: &Path) -> Result<Vec<Utterance<f64>>> {
    entries
        .into_iter()
        .map(|e| {
            let utt = e.utt.clone();
            e.into_utterance().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("utterance {utt} has no labels"),
            })
        })
        .collect()
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let io_err = |path: &str| {
        let path = path.to_owned();
        move |source| Error::Io { path, source }
    };
    match command {
        Command::Train {
            corpus,
            out,
            config,
            seed,
            log,
            workers,
        } => {
            let corpus_entries = load_corpus::<f64>(&corpus)?;
            let utterances = labelled(corpus_entries, &corpus)?;
            let mut cfg = match &config {
                Some(p) => serde_json::from_str::<TrainConfig>(&read_text(p)?).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    line: e.line(),
                    message: e.to_string(),
                })?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let (model, report) = train(&utterances, &cfg)?;
            save_checkpoint(&out, &model, Some(&cfg))?;
            let mut text = report.log_lines(cfg.log_every).join("\n");
            text.push('\n');
            write_text(&log.unwrap_or_else(|| out.with_extension("log")), &text)?;
        }
        Command::Decode {
            corpus,
            ckpt,
            out,
            beam,
            max_speakers,
            look_ahead,
            segment_duration,
            rttm,
            workers,
        } => {
            let model = load_checkpoint::<f64>(&ckpt)?.model()?;
            let entries = load_corpus::<f64>(&corpus)?;
            if let Some(e) = entries.first() {
                if e.embeddings.dim() != model.dims().input {
                    return Err(Error::Parse {
                        path: corpus.display().to_string(),
                        line: 1,
                        message: format!(
                            "embedding dimension {} does not match checkpoint dimension {}",
                            e.embeddings.dim(),
                            model.dims().input
                        ),
                    });
                }
            }
            let config = DecodeConfig {
                beam_width: beam,
                max_speakers,
                look_ahead,
            };
            let inputs: Vec<_> = entries.iter().map(|e| &e.embeddings).collect();
            let decoded = decode_all(&inputs, &model, &config, workers)?;
            let labels = write_labels(entries.iter().zip(&decoded).map(|(e, d)| (e.utt.as_str(), &d.labels)));
            write_text(&out, &labels)?;
            let timelines = entries
                .iter()
                .zip(&decoded)
                .map(|(e, d)| labels_to_timeline(&d.labels, segment_duration, e.utt.clone()))
                .collect::<Result<Vec<_>>>()?;
            write_text(&rttm.unwrap_or_else(|| out.with_extension("rttm")), &write_rttm(&timelines))?;
        }
        Command::Eval {
            reference,
            hyp,
            collar,
            keep_overlap,
        } => {
            let refs = parse_rttm(&read_text(&reference)?, &reference.display().to_string())?;
            let hyps = parse_rttm(&read_text(&hyp)?, &hyp.display().to_string())?;
            let (mut confusion, mut scored) = (0.0, 0.0);
            for r in &refs {
                let h = hyps
                    .iter()
                    .find(|h| h.utt == r.utt)
                    .cloned()
                    .unwrap_or_else(|| Timeline::new(r.utt.clone(), Vec::new()));
                match der(r, &h, collar, !keep_overlap) {
                    Ok(d) => {
                        writeln!(
                            stdout,
                            "utt={} confusion={:.6} scored={:.6} der={:.6}",
                            d.utt, d.confusion_time, d.scored_time, d.der
                        )
                        .map_err(io_err("<stdout>"))?;
                        confusion += d.confusion_time;
                        scored += d.scored_time;
                    }
                    Err(Error::NothingToScore) => {
                        writeln!(stdout, "utt={} skipped=nothing-to-score", r.utt).map_err(io_err("<stdout>"))?;
                    }
                    Err(e) => return Err(e),
                }
            }
            if scored <= 0.0 {
                return Err(Error::NothingToScore);
            }
            writeln!(stdout, "DER={:.6}", confusion / scored).map_err(io_err("<stdout>"))?;
        }
        Command::Sample {
            ckpt,
            num,
            length,
            out,
            seed,
            rttm,
            segment_duration,
        } => {
            let model = load_checkpoint::<f64>(&ckpt)?.model()?;
            let utterances = sample_corpus(&model, num, length, seed)?;
            let entries: Vec<CorpusEntry<f64>> = utterances.iter().map(CorpusEntry::labelled).collect();
            write_text(&out, &write_corpus(&entries))?;
            if let Some(path) = rttm {
                let timelines = utterances
                    .iter()
                    .map(|u| labels_to_timeline(&u.labels, segment_duration, u.id.clone()))
                    .collect::<Result<Vec<_>>>()?;
                write_text(&path, &write_rttm(&timelines))?;
            }
        }
        Command::Init {
            out,
            dim,
            hidden,
            fc,
            p0,
            alpha,
            sigma2,
            gain,
            seed,
        } => {
            let dims = NetDims { input: dim, hidden, fc };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = ModelParams::<f64>::new(
                NetParams::init_scaled(dims, gain, &mut rng),
                EmissionParams::from_sigma2(sigma2)?,
                PriorParams::new(p0, alpha)?,
            )?;
            save_checkpoint(&out, &model, None)?;
        }
    }
    Ok(())
}
