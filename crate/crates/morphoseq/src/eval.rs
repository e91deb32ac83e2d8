//! Metrics, paired significance testing and the three experiment harnesses.
//!
//! Accuracy counts exact string matches; the similarity ratio is the
//! Levenshtein ratio with substitution cost 2, which coincides with the
//! longest-common-subsequence similarity 2|LCS|/(|w1|+|w2|). Model pairs are
//! compared with a two-sided paired approximate-randomization test on the
//! per-item correct indicator.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{
    split_low_resource, split_standard, CorpusError, CorpusSplit, InflectionEntry,
};
use crate::rng::{derive_seed, Rng};
use crate::seq2seq::{
    greedy_decode, train, AttentionTrace, ModelConfig, ModelError, ModelParams,
};
use crate::tokenizer::{detokenize, encode_input, Mode, Vocabulary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("misaligned prediction records: {0}")]
    Misaligned(String),
    #[error("experiment id {0} is not 1, 2 or 3")]
    InvalidExperiment(u8),
    #[error("experiment 2 needs a non-empty unseen set")]
    EmptyUnseen,
}

/// Levenshtein similarity ratio over Unicode code points:
/// ((|w1|+|w2|) - lev) / (|w1|+|w2|) with insert/delete cost 1 and
/// substitution cost 2. Two empty strings rate 1.0.
pub fn lev_ratio(w1: &str, w2: &str) -> f64 {
    let a: Vec<char> = w1.chars().collect();
    let b: Vec<char> = w2.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { 2 };
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let lev = prev[b.len()];
    (total - lev) as f64 / total as f64
}

/// One decoded test item.
#[derive(Clone, Debug)]
pub struct PredictionRecord {
    pub entry: InflectionEntry,
    pub target_surface: String,
    pub predicted_surface: String,
    pub correct: bool,
    pub ratio: f64,
    pub attention: Option<AttentionTrace>,
}

/// Decode one entry and score it, keeping the attention trace.
pub fn predict_entry(
    params: &ModelParams,
    vocab: &Vocabulary,
    entry: &InflectionEntry,
    config: &ModelConfig,
) -> Result<PredictionRecord, ModelError> {
    let input_ids = vocab.encode_ids(&encode_input(entry, vocab.mode()));
    let max_len = config.decode_limit(input_ids.len());
    let (pred_ids, trace) = greedy_decode(params, vocab, &input_ids, max_len)?;
    let predicted_surface = detokenize(&vocab.decode_tokens(&pred_ids));
    let target_surface = entry.form_surface();
    let correct = predicted_surface == target_surface;
    let ratio = if correct {
        1.0
    } else {
        lev_ratio(&target_surface, &predicted_surface)
    };
    Ok(PredictionRecord {
        entry: entry.clone(),
        target_surface,
        predicted_surface,
        correct,
        ratio,
        attention: Some(trace),
    })
}

/// Per-language evaluation summary.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub lang: String,
    pub mode: Mode,
    pub experiment: u8,
    pub test_size: usize,
    pub right: usize,
    pub wrong: usize,
    pub accuracy: f64,
    pub mean_ratio: f64,
    pub records: Vec<PredictionRecord>,
}

/// Ratios are summed in sorted order so the aggregate does not depend on
/// test-set order.
fn mean_sorted(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Decode every test entry with greedy search and aggregate. Records come
/// back in test-set order; attention traces are dropped to bound memory.
/// `threads` > 1 decodes independent items concurrently with identical
/// results.
pub fn evaluate(
    params: &ModelParams,
    vocab: &Vocabulary,
    test_entries: &[InflectionEntry],
    experiment: u8,
    config: &ModelConfig,
    threads: usize,
) -> Result<EvalReport, ModelError> {
    let threads = threads.max(1).min(test_entries.len().max(1));
    let mut records: Vec<PredictionRecord> = Vec::with_capacity(test_entries.len());
    if threads <= 1 {
        for entry in test_entries {
            let mut rec = predict_entry(params, vocab, entry, config)?;
            rec.attention = None;
            records.push(rec);
        }
    } else {
        let chunk = test_entries.len().div_ceil(threads);
        let results: Vec<Result<Vec<PredictionRecord>, ModelError>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = test_entries
                    .chunks(chunk)
                    .map(|entries| {
                        scope.spawn(move || {
                            entries
                                .iter()
                                .map(|e| {
                                    predict_entry(params, vocab, e, config).map(|mut r| {
                                        r.attention = None;
                                        r
                                    })
                                })
                                .collect()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("evaluation thread panicked"))
                    .collect()
            });
        for part in results {
            records.extend(part?);
        }
    }

    let right = records.iter().filter(|r| r.correct).count();
    let test_size = records.len();
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    Ok(EvalReport {
        lang: test_entries
            .first()
            .map(|e| e.lang.clone())
            .unwrap_or_default(),
        mode: vocab.mode(),
        experiment,
        test_size,
        right,
        wrong: test_size - right,
        accuracy: if test_size == 0 {
            0.0
        } else {
            right as f64 / test_size as f64
        },
        mean_ratio: mean_sorted(&ratios),
        records,
    })
}

/// Outcome of the paired randomization test.
#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceResult {
    pub p_value: f64,
    pub n_permutations: usize,
    /// Accuracy difference, model A minus model B.
    pub statistic: f64,
    /// Significant at alpha = 0.05.
    pub significant: bool,
}

/// Two-sided paired approximate-randomization test on the correct
/// indicators: each pair is swapped with probability 1/2 and the accuracy
/// difference recomputed; p is the +1-smoothed fraction of permuted
/// statistics at least as extreme as the observed one.
pub fn paired_significance(
    records_a: &[PredictionRecord],
    records_b: &[PredictionRecord],
    n_permutations: usize,
    seed: u64,
) -> Result<SignificanceResult, EvalError> {
    if records_a.len() != records_b.len() {
        return Err(EvalError::Misaligned(format!(
            "{} vs {} records",
            records_a.len(),
            records_b.len()
        )));
    }
    for (i, (a, b)) in records_a.iter().zip(records_b).enumerate() {
        if a.entry.item_key() != b.entry.item_key() {
            return Err(EvalError::Misaligned(format!(
                "records disagree on test item {i}: {:?} vs {:?}",
                a.entry.item_key(),
                b.entry.item_key()
            )));
        }
    }
    let n = records_a.len();
    if n == 0 {
        return Ok(SignificanceResult {
            p_value: 1.0,
            n_permutations,
            statistic: 0.0,
            significant: false,
        });
    }
    let diffs: Vec<f64> = records_a
        .iter()
        .zip(records_b)
        .map(|(a, b)| f64::from(u8::from(a.correct)) - f64::from(u8::from(b.correct)))
        .collect();
    let observed = diffs.iter().sum::<f64>() / n as f64;
    let threshold = observed.abs() - 1e-12;
    let mut rng = Rng::new(seed);
    let mut at_least_as_extreme = 0usize;
    for _ in 0..n_permutations {
        let mut sum = 0.0;
        for &d in &diffs {
            sum += if rng.next_u64() & 1 == 1 { -d } else { d };
        }
        if (sum / n as f64).abs() >= threshold {
            at_least_as_extreme += 1;
        }
    }
    let p_value = (at_least_as_extreme + 1) as f64 / (n_permutations + 1) as f64;
    Ok(SignificanceResult {
        p_value,
        n_permutations,
        statistic: observed,
        significant: p_value <= 0.05,
    })
}

/// Everything one (language, mode) training run produced.
#[derive(Clone, Debug)]
pub struct ModeRun {
    pub report: EvalReport,
    pub params: ModelParams,
    pub loss_log: Vec<f64>,
}

/// Paired results for one language.
#[derive(Clone, Debug)]
pub struct LangExperiment {
    pub lang: String,
    pub charmorph: ModeRun,
    pub charonly: ModeRun,
    pub significance: SignificanceResult,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub experiment: u8,
    pub languages: Vec<LangExperiment>,
}

/// Split, training and evaluation knobs shared by the experiment harness.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub n_holdout_lemmas: usize,
    pub test_fraction: f64,
    pub low_train_size: usize,
    pub low_test_max: usize,
    pub n_permutations: usize,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            n_holdout_lemmas: 100,
            test_fraction: 0.2,
            low_train_size: 3000,
            low_test_max: 500,
            n_permutations: 10_000,
            threads: 1,
        }
    }
}

/// Run one of the paper's experiments on a corpus, per language, for both
/// regimes with identical splits, seeds and hyperparameters.
///
/// 1. train on the standard train set, evaluate on its test set;
/// 2. train identically, evaluate on the held-out unseen lemmas;
/// 3. train on the low-resource subsample, evaluate on its reduced test set.
pub fn run_experiment(
    id: u8,
    entries: &[InflectionEntry],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentResult, EvalError> {
    if !(1..=3).contains(&id) {
        return Err(EvalError::InvalidExperiment(id));
    }
    let mut by_lang: BTreeMap<String, Vec<InflectionEntry>> = BTreeMap::new();
    for e in entries {
        by_lang.entry(e.lang.clone()).or_default().push(e.clone());
    }

    let mut languages = Vec::new();
    for (lang, lang_entries) in by_lang {
        let split = split_standard(
            &lang_entries,
            derive_seed(seed, &format!("split:{lang}")),
            cfg.n_holdout_lemmas,
            cfg.test_fraction,
        )?;
        let (train_set, test_set) = experiment_sets(id, &split, cfg, seed, &lang)?;

        let train_seed = derive_seed(seed, &format!("train:{lang}"));
        let run = |mode: Mode| -> Result<ModeRun, EvalError> {
            let vocab = Vocabulary::build(&train_set, mode);
            let model_cfg = ModelConfig {
                seed: train_seed,
                vocab_size: vocab.len(),
                ..cfg.model.clone()
            };
            let (params, loss_log) = train(&train_set, &vocab, &model_cfg)?;
            let report = evaluate(&params, &vocab, &test_set, id, &model_cfg, cfg.threads)?;
            Ok(ModeRun {
                report,
                params,
                loss_log,
            })
        };
        let charmorph = run(Mode::CharMorpheme)?;
        let charonly = run(Mode::CharOnly)?;
        let significance = paired_significance(
            &charmorph.report.records,
            &charonly.report.records,
            cfg.n_permutations,
            derive_seed(seed, &format!("significance:{lang}")),
        )?;
        languages.push(LangExperiment {
            lang,
            charmorph,
            charonly,
            significance,
        });
    }
    Ok(ExperimentResult {
        experiment: id,
        languages,
    })
}

fn experiment_sets(
    id: u8,
    split: &CorpusSplit,
    cfg: &ExperimentConfig,
    seed: u64,
    lang: &str,
) -> Result<(Vec<InflectionEntry>, Vec<InflectionEntry>), EvalError> {
    match id {
        1 => Ok((split.train.clone(), split.test.clone())),
        2 => {
            if split.unseen.is_empty() {
                return Err(EvalError::EmptyUnseen);
            }
            Ok((split.train.clone(), split.unseen.clone()))
        }
        3 => {
            let low = split_low_resource(
                split,
                derive_seed(seed, &format!("low:{lang}")),
                cfg.low_train_size,
                cfg.low_test_max,
            );
            Ok((low.train, low.test))
        }
        _ => Err(EvalError::InvalidExperiment(id)),
    }
}

/// Rendered results: a text table mirroring the paper's layout and a CSV
/// with full-precision numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedReport {
    pub text: String,
    pub csv: String,
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render per-language rows for both regimes, mark the better of each paired
/// metric with `*` and the significant winner's accuracy with a dagger;
/// `Total` rows are unweighted macro-averages over languages.
pub fn render_report(result: &ExperimentResult) -> RenderedReport {
    let mut text = String::new();
    let mut csv = String::new();
    text.push_str(&format!("Experiment {}\n", result.experiment));
    text.push_str(&format!(
        "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10}\n",
        "lang", "Test", "Right", "Wrong", "Acc", "Lev"
    ));
    csv.push_str("lang,mode,experiment,test,right,wrong,acc,lev,p_value,significant\n");

    let fmt_metric = |v: f64, best: bool, dagger: bool| -> String {
        format!(
            "{:.4}{}{}",
            v,
            if best { "*" } else { "" },
            if dagger { "\u{2020}" } else { "" }
        )
    };

    for lang in &result.languages {
        let (m, c) = (&lang.charmorph.report, &lang.charonly.report);
        let sig = &lang.significance;
        let morph_wins_acc = m.accuracy > c.accuracy;
        let char_wins_acc = c.accuracy > m.accuracy;
        let morph_wins_lev = m.mean_ratio > c.mean_ratio;
        let char_wins_lev = c.mean_ratio > m.mean_ratio;
        text.push_str(&format!(
            "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10}\n",
            lang.lang,
            m.test_size,
            m.right,
            m.wrong,
            fmt_metric(m.accuracy, morph_wins_acc, sig.significant && morph_wins_acc),
            fmt_metric(m.mean_ratio, morph_wins_lev, false),
        ));
        text.push_str(&format!(
            "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10}\n",
            format!("{}_char", lang.lang),
            c.test_size,
            c.right,
            c.wrong,
            fmt_metric(c.accuracy, char_wins_acc, sig.significant && char_wins_acc),
            fmt_metric(c.mean_ratio, char_wins_lev, false),
        ));
        for report in [m, c] {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                csv_field(&lang.lang),
                report.mode,
                result.experiment,
                report.test_size,
                report.right,
                report.wrong,
                report.accuracy,
                report.mean_ratio,
                sig.p_value,
                sig.significant
            ));
        }
    }

    let n = result.languages.len() as f64;
    if n > 0.0 {
        let avg = |f: &dyn Fn(&LangExperiment) -> f64| -> f64 {
            result.languages.iter().map(|l| f(l)).sum::<f64>() / n
        };
        let totals = [
            (
                "Total",
                Mode::CharMorpheme,
                avg(&|l| l.charmorph.report.accuracy),
                avg(&|l| l.charmorph.report.mean_ratio),
            ),
            (
                "Total_char",
                Mode::CharOnly,
                avg(&|l| l.charonly.report.accuracy),
                avg(&|l| l.charonly.report.mean_ratio),
            ),
        ];
        for (label, mode, acc, lev) in totals {
            text.push_str(&format!(
                "{:<14} {:>6} {:>6} {:>6} {:>10} {:>10}\n",
                label,
                "",
                "",
                "",
                format!("{acc:.4}"),
                format!("{lev:.4}")
            ));
            csv.push_str(&format!(
                "Total,{},{},,,,{},{},,\n",
                mode, result.experiment, acc, lev
            ));
        }
    }

    RenderedReport { text, csv }
}
