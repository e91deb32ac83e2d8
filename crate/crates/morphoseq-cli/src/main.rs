//! Command-line front door: corpus preparation and statistics, training,
//! prediction, the three experiments and attention-heatmap export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

mod heatmap;
mod manifest;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use morphoseq::corpus::{
    corpus_stats, parse_corpus, split_standard, write_corpus, CorpusError, FeatureSet,
    InflectionEntry, Segmentation,
};
use morphoseq::eval::{render_report, run_experiment, EvalError, ExperimentConfig};
use morphoseq::seq2seq::{
    greedy_decode, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, ModelConfig,
    ModelError, Trainer,
};
use morphoseq::tokenizer::{encode_query, join_tokens, Mode, Vocabulary};

use manifest::Manifest;

#[derive(Parser)]
#[command(
    name = "morphoseq",
    version,
    about = "Morphological inflection with character-morpheme and character seq2seq models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Charmorph,
    Char,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Charmorph => Mode::CharMorpheme,
            ModeArg::Char => Mode::CharOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeatmapFormat {
    Csv,
    Svg,
    Both,
}

#[derive(Clone, Debug, clap::Args)]
struct HyperArgs {
    /// Training epochs
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Batch size
    #[arg(long, default_value_t = 20)]
    batch: usize,
    /// GRU hidden size
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    /// Embedding size
    #[arg(long, default_value_t = 300)]
    embed: usize,
}

impl HyperArgs {
    fn to_config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed,
            hidden_dim: self.hidden,
            batch_size: self.batch,
            epochs: self.epochs,
            seed,
            ..ModelConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print per-language corpus statistics (lemma and word counts)
    Stats {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Parse, validate and split a corpus; writes train/test/unseen files
    Prepare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Lemmas to hold out entirely as the unseen set
        #[arg(long, default_value_t = 100)]
        holdout: usize,
        /// Fraction of each lemma's forms assigned to the test set
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a corpus file (the whole file is the train set)
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Charmorph)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict one inflected form from a trained checkpoint
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Lemma segmentation, e.g. '|retrogradi|nen'
        #[arg(long)]
        lemma: String,
        /// Lemma features, e.g. 'ADJ;Case=Nom;Number=Sing'
        #[arg(long)]
        in_feats: String,
        /// Target features, e.g. 'ADJ;Case=Par;Number=Sing'
        #[arg(long)]
        out_feats: String,
        /// Dump the encoded input and output token streams to stderr
        #[arg(long)]
        dump_tokens: bool,
    },
    /// Run one of the three paired experiments and write a results report
    Experiment {
        /// Experiment id: 1 seen lemmas, 2 unseen lemmas, 3 low resource
        id: u8,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Low-resource train size (experiment 3)
        #[arg(long, default_value_t = 3000)]
        train_size: usize,
        /// Low-resource test cap (experiment 3)
        #[arg(long, default_value_t = 500)]
        test_max: usize,
        #[arg(long, default_value_t = 100)]
        holdout: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Permutations for the paired significance test
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the attention heatmap for one prediction as CSV and/or SVG
    AttnExport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        lemma: String,
        #[arg(long)]
        in_feats: String,
        #[arg(long)]
        out_feats: String,
        #[arg(long, value_enum, default_value_t = HeatmapFormat::Both)]
        format: HeatmapFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            ModelError::Num(n) if matches!(n, morphoseq::numcore::NumError::NonFinite(_)) => {
                CliError::Numeric(e.to_string())
            }
            ModelError::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Corpus(c) => c.into(),
            EvalError::Model(m) => m.into(),
            EvalError::InvalidExperiment(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn read_corpus(path: &Path) -> Result<(Vec<InflectionEntry>, Vec<u8>), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read corpus {}: {e}", path.display())))?;
    let entries = parse_corpus(BufReader::new(bytes.as_slice()))?;
    Ok((entries, bytes))
}

fn load_model(path: &Path) -> Result<Checkpoint, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open checkpoint {}: {e}", path.display())))?;
    Ok(load_checkpoint(BufReader::new(file))?)
}

fn parse_query(
    lemma: &str,
    in_feats: &str,
    out_feats: &str,
) -> Result<(Segmentation, FeatureSet, FeatureSet), CliError> {
    let seg =
        Segmentation::parse(lemma).map_err(|m| CliError::Usage(format!("--lemma: {m}")))?;
    let lemma_feats =
        FeatureSet::parse(in_feats).map_err(|m| CliError::Usage(format!("--in-feats: {m}")))?;
    let target_feats =
        FeatureSet::parse(out_feats).map_err(|m| CliError::Usage(format!("--out-feats: {m}")))?;
    Ok((seg, lemma_feats, target_feats))
}

fn eval_threads() -> usize {
    if let Ok(v) = std::env::var("MORPHOSEQ_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get().min(8))
        .unwrap_or(1)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Stats { corpus } => {
            let (entries, _) = read_corpus(&corpus)?;
            let stats = corpus_stats(&entries);
            println!("{:<8} {:>12} {:>12}", "lang", "lemmas", "words");
            for (lang, s) in &stats {
                println!("{:<8} {:>12} {:>12}", lang, s.lemmas, s.words);
            }
            Ok(())
        }
        Command::Prepare {
            corpus,
            seed,
            holdout,
            test_fraction,
            out,
        } => {
            let (entries, bytes) = read_corpus(&corpus)?;
            let split = split_standard(&entries, seed, holdout, test_fraction)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("train.tsv"), write_corpus(&split.train))?;
            fs::write(out.join("test.tsv"), write_corpus(&split.test))?;
            fs::write(out.join("unseen.tsv"), write_corpus(&split.unseen))?;
            let mut stats_text = String::new();
            for (lang, s) in &corpus_stats(&entries) {
                stats_text.push_str(&format!("{lang} lemmas {} words {}\n", s.lemmas, s.words));
            }
            stats_text.push_str(&format!(
                "train {} test {} unseen {}\n",
                split.train.len(),
                split.test.len(),
                split.unseen.len()
            ));
            fs::write(out.join("stats.txt"), &stats_text)?;
            Manifest::new()
                .set_corpus(&corpus, &bytes)
                .set("seed", seed)
                .set("holdout", holdout)
                .set("test_fraction", test_fraction)
                .set("outputs", "train.tsv test.tsv unseen.tsv stats.txt")
                .write_to(&out)?;
            println!(
                "prepared {} train / {} test / {} unseen entries",
                split.train.len(),
                split.test.len(),
                split.unseen.len()
            );
            Ok(())
        }
        Command::Train {
            corpus,
            mode,
            seed,
            hyper,
            out,
        } => {
            let (entries, bytes) = read_corpus(&corpus)?;
            let mode: Mode = mode.into();
            let vocab = Vocabulary::build(&entries, mode);
            let mut trainer = Trainer::new(&entries, &vocab, &hyper.to_config(seed))?;
            for _ in 0..trainer.config().epochs {
                trainer.run_epoch()?;
            }
            let config = trainer.config().clone();
            let (params, loss_log) = trainer.into_parts();
            fs::create_dir_all(&out)?;
            let ckpt_path = out.join("model.ckpt");
            let mut file = fs::File::create(&ckpt_path)?;
            save_checkpoint(&params, &config, &vocab, &mut file)?;
            let mut log_text = String::new();
            for (i, loss) in loss_log.iter().enumerate() {
                log_text.push_str(&format!("{} {}\n", i + 1, loss));
            }
            fs::write(out.join("loss_log.txt"), &log_text)?;
            Manifest::new()
                .set_corpus(&corpus, &bytes)
                .set("mode", mode)
                .set("seed", seed)
                .set("epochs", config.epochs)
                .set("batch_size", config.batch_size)
                .set("hidden_dim", config.hidden_dim)
                .set("embed_dim", config.embed_dim)
                .set("outputs", "model.ckpt loss_log.txt")
                .write_to(&out)?;
            println!(
                "trained {} entries, vocab {}, final loss {}",
                entries.len(),
                vocab.len(),
                loss_log.last().copied().unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Predict {
            checkpoint,
            lemma,
            in_feats,
            out_feats,
            dump_tokens,
        } => {
            let ckpt = load_model(&checkpoint)?;
            let (seg, lemma_feats, target_feats) = parse_query(&lemma, &in_feats, &out_feats)?;
            let tokens = encode_query(&seg, &lemma_feats, &target_feats, ckpt.vocab.mode());
            let ids = ckpt.vocab.encode_ids(&tokens);
            let max_len = ckpt.config.decode_limit(ids.len());
            let (pred_ids, _) = greedy_decode(&ckpt.params, &ckpt.vocab, &ids, max_len)?;
            let pred_tokens = ckpt.vocab.decode_tokens(&pred_ids);
            if dump_tokens {
                eprintln!("input:  {}", join_tokens(&tokens));
                eprintln!("output: {}", join_tokens(&pred_tokens));
            }
            println!("{}", morphoseq::tokenizer::detokenize(&pred_tokens));
            Ok(())
        }
        Command::Experiment {
            id,
            corpus,
            seed,
            hyper,
            train_size,
            test_max,
            holdout,
            test_fraction,
            permutations,
            out,
        } => {
            let (entries, bytes) = read_corpus(&corpus)?;
            let cfg = ExperimentConfig {
                model: hyper.to_config(seed),
                n_holdout_lemmas: holdout,
                test_fraction,
                low_train_size: train_size,
                low_test_max: test_max,
                n_permutations: permutations,
                threads: eval_threads(),
            };
            let result = run_experiment(id, &entries, &cfg, seed)?;
            let rendered = render_report(&result);
            fs::create_dir_all(&out)?;
            fs::write(out.join("report.txt"), &rendered.text)?;
            fs::write(out.join("report.csv"), &rendered.csv)?;
            Manifest::new()
                .set_corpus(&corpus, &bytes)
                .set("experiment", id)
                .set("seed", seed)
                .set("epochs", cfg.model.epochs)
                .set("batch_size", cfg.model.batch_size)
                .set("hidden_dim", cfg.model.hidden_dim)
                .set("embed_dim", cfg.model.embed_dim)
                .set("holdout", holdout)
                .set("test_fraction", test_fraction)
                .set("train_size", train_size)
                .set("test_max", test_max)
                .set("permutations", permutations)
                .set("outputs", "report.txt report.csv")
                .write_to(&out)?;
            print!("{}", rendered.text);
            Ok(())
        }
        Command::AttnExport {
            checkpoint,
            lemma,
            in_feats,
            out_feats,
            format,
            out,
        } => {
            let ckpt = load_model(&checkpoint)?;
            let (seg, lemma_feats, target_feats) = parse_query(&lemma, &in_feats, &out_feats)?;
            let tokens = encode_query(&seg, &lemma_feats, &target_feats, ckpt.vocab.mode());
            let ids = ckpt.vocab.encode_ids(&tokens);
            let max_len = ckpt.config.decode_limit(ids.len());
            let (pred_ids, trace) = greedy_decode(&ckpt.params, &ckpt.vocab, &ids, max_len)?;
            fs::create_dir_all(&out)?;
            let mut outputs = Vec::new();
            if matches!(format, HeatmapFormat::Csv | HeatmapFormat::Both) {
                fs::write(out.join("attention.csv"), heatmap::trace_to_csv(&trace))?;
                outputs.push("attention.csv");
            }
            if matches!(format, HeatmapFormat::Svg | HeatmapFormat::Both) {
                fs::write(out.join("attention.svg"), heatmap::trace_to_svg(&trace))?;
                outputs.push("attention.svg");
            }
            Manifest::new()
                .set("checkpoint", checkpoint.display())
                .set("lemma", &lemma)
                .set("in_feats", &in_feats)
                .set("out_feats", &out_feats)
                .set("outputs", outputs.join(" "))
                .write_to(&out)?;
            let predicted =
                morphoseq::tokenizer::detokenize(&ckpt.vocab.decode_tokens(&pred_ids));
            println!("{predicted}");
            Ok(())
        }
    }
}
