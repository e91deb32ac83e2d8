//! Morpheme-segmented inflectional corpora: parsing, validation, statistics
//! and the train/test/unseen split protocols.
//!
//! Corpus-TSV format, one record per line, UTF-8, LF line endings, five
//! tab-separated columns:
//!
//! 1. ISO 639-3 language code
//! 2. lemma segmentation, `pre1;pre2|stem|suf1;suf2` (affix fields may be empty)
//! 3. lemma features, `POS;Key=Val;...`
//! 4. form segmentation, same syntax as column 2
//! 5. form features, same syntax as column 3
//!
//! Lines starting with `#` are comments; blank lines are skipped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::rng::Rng;

/// Zero-morpheme placeholder used by the tokenizer; forbidden inside segments.
pub const ZERO_SYMBOL: &str = "\u{2205}";
/// End-of-word symbol used by the tokenizer; forbidden inside segments.
pub const EOW_SYMBOL: &str = "<\\w>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: validation error: {message}")]
    Validation { line: usize, message: String },
    #[error("corpus has {have} distinct lemmas, need more than {need} to hold out")]
    TooFewLemmas { have: usize, need: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
}

fn check_atom(kind: &str, s: &str) -> Result<(), String> {
    if s.is_empty() {
        return Err(format!("empty {kind}"));
    }
    if s.chars().any(char::is_whitespace) {
        return Err(format!("{kind} {s:?} contains whitespace"));
    }
    for reserved in [ZERO_SYMBOL, EOW_SYMBOL] {
        if s.contains(reserved) {
            return Err(format!("{kind} {s:?} contains reserved symbol {reserved:?}"));
        }
    }
    Ok(())
}

/// UD-v2 style feature bundle: a POS tag plus unique `Key=Val` pairs held in
/// canonical order (POS first, keys lexicographic) so serialization is
/// deterministic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet {
    pos: String,
    features: Vec<(String, String)>,
}

impl FeatureSet {
    pub fn new(pos: impl Into<String>, features: Vec<(String, String)>) -> Result<Self, String> {
        let pos = pos.into();
        check_atom("POS tag", &pos)?;
        if pos.contains(';') || pos.contains('=') {
            return Err(format!("POS tag {pos:?} contains ';' or '='"));
        }
        let mut features = features;
        for (k, v) in &features {
            check_atom("feature key", k)?;
            check_atom("feature value", v)?;
            if k.contains(';') || k.contains('=') || v.contains(';') || v.contains('=') {
                return Err(format!("feature {k:?}={v:?} contains ';' or '='"));
            }
        }
        features.sort();
        if features.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err("duplicate feature key".into());
        }
        Ok(FeatureSet { pos, features })
    }

    /// Parse `POS;Key=Val;...`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut items = text.split(';');
        let pos = items.next().unwrap_or("");
        let mut features = Vec::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("feature {item:?} is not Key=Val"))?;
            features.push((k.to_string(), v.to_string()));
        }
        FeatureSet::new(pos, features)
    }

    pub fn pos(&self) -> &str {
        &self.pos
    }

    /// Key=value pairs in canonical (lexicographic) order.
    pub fn features(&self) -> &[(String, String)] {
        &self.features
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pos)?;
        for (k, v) in &self.features {
            write!(f, ";{k}={v}")?;
        }
        Ok(())
    }
}

/// A word split into prefixes, stem and suffixes. Infixes and stem changes
/// live inside the stem string, which is treated as an allomorph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segmentation {
    prefixes: Vec<String>,
    stem: String,
    suffixes: Vec<String>,
}

impl Segmentation {
    pub fn new(
        prefixes: Vec<String>,
        stem: impl Into<String>,
        suffixes: Vec<String>,
    ) -> Result<Self, String> {
        let stem = stem.into();
        check_atom("stem", &stem)?;
        for m in prefixes.iter().chain(&suffixes) {
            check_atom("morpheme", m)?;
            if m.contains(';') || m.contains('|') {
                return Err(format!("morpheme {m:?} contains ';' or '|'"));
            }
        }
        if stem.contains(';') || stem.contains('|') {
            return Err(format!("stem {stem:?} contains ';' or '|'"));
        }
        Ok(Segmentation {
            prefixes,
            stem,
            suffixes,
        })
    }

    /// Parse `pre1;pre2|stem|suf1;suf2`; affix fields may be empty.
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split('|').collect();
        if parts.len() != 3 {
            return Err(format!(
                "segmentation {text:?} must have exactly three |-separated fields"
            ));
        }
        let affixes = |field: &str| -> Vec<String> {
            if field.is_empty() {
                Vec::new()
            } else {
                field.split(';').map(str::to_string).collect()
            }
        };
        Segmentation::new(affixes(parts[0]), parts[1], affixes(parts[2]))
    }

    pub fn prefixes(&self) -> &[String] {
        &self.prefixes
    }

    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn suffixes(&self) -> &[String] {
        &self.suffixes
    }

    /// Surface form: concat(prefixes) + stem + concat(suffixes).
    pub fn surface(&self) -> String {
        let mut s = String::new();
        for p in &self.prefixes {
            s.push_str(p);
        }
        s.push_str(&self.stem);
        for x in &self.suffixes {
            s.push_str(x);
        }
        s
    }
}

impl fmt::Display for Segmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}",
            self.prefixes.join(";"),
            self.stem,
            self.suffixes.join(";")
        )
    }
}

/// One (lemma, inflected form) pair with feature bundles for both sides.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InflectionEntry {
    pub lang: String,
    pub lemma_seg: Segmentation,
    pub lemma_feats: FeatureSet,
    pub form_seg: Segmentation,
    pub form_feats: FeatureSet,
}

impl InflectionEntry {
    pub fn lemma_surface(&self) -> String {
        self.lemma_seg.surface()
    }

    pub fn form_surface(&self) -> String {
        self.form_seg.surface()
    }

    /// The identity a lemma is grouped by: language plus lemma surface.
    pub fn lemma_key(&self) -> (String, String) {
        (self.lang.clone(), self.lemma_surface())
    }

    /// The identity a test item is paired by across model runs.
    pub fn item_key(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.lang,
            self.lemma_surface(),
            self.form_surface(),
            self.form_feats
        )
    }

    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.lang, self.lemma_seg, self.lemma_feats, self.form_seg, self.form_feats
        )
    }
}

fn is_iso639_3(code: &str) -> bool {
    code.len() == 3 && code.chars().all(|c| c.is_ascii_lowercase())
}

/// Parse a Corpus-TSV byte stream. Every record is validated; errors carry
/// the 1-based line number.
pub fn parse_corpus<R: BufRead>(mut reader: R) -> Result<Vec<InflectionEntry>, CorpusError> {
    let mut entries = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        let line = std::str::from_utf8(&buf).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: format!("invalid UTF-8: {e}"),
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        entries.push(parse_record(line, line_no)?);
    }
    Ok(entries)
}

/// Convenience wrapper over [`parse_corpus`] for in-memory text.
pub fn parse_corpus_str(text: &str) -> Result<Vec<InflectionEntry>, CorpusError> {
    parse_corpus(text.as_bytes())
}

fn parse_record(line: &str, line_no: usize) -> Result<InflectionEntry, CorpusError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 5 {
        return Err(CorpusError::Parse {
            line: line_no,
            message: format!("expected 5 tab-separated columns, found {}", cols.len()),
        });
    }
    let validation = |message: String| CorpusError::Validation {
        line: line_no,
        message,
    };
    let lang = cols[0];
    if !is_iso639_3(lang) {
        return Err(validation(format!(
            "language code {lang:?} is not a lowercase ISO 639-3 code"
        )));
    }
    let lemma_seg = Segmentation::parse(cols[1]).map_err(&validation)?;
    let lemma_feats = FeatureSet::parse(cols[2]).map_err(&validation)?;
    let form_seg = Segmentation::parse(cols[3]).map_err(&validation)?;
    let form_feats = FeatureSet::parse(cols[4]).map_err(&validation)?;
    Ok(InflectionEntry {
        lang: lang.to_string(),
        lemma_seg,
        lemma_feats,
        form_seg,
        form_feats,
    })
}

/// Serialize entries back to Corpus-TSV.
pub fn write_corpus(entries: &[InflectionEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.to_tsv_line());
        out.push('\n');
    }
    out
}

/// Per-language corpus sizes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LangStats {
    /// Distinct lemma surfaces.
    pub lemmas: usize,
    /// Total word forms (entries).
    pub words: usize,
}

/// Counts by distinct lemma surface and by entry, per language.
pub fn corpus_stats(entries: &[InflectionEntry]) -> BTreeMap<String, LangStats> {
    let mut lemma_sets: HashMap<&str, HashSet<String>> = HashMap::new();
    let mut stats: BTreeMap<String, LangStats> = BTreeMap::new();
    for e in entries {
        let s = stats.entry(e.lang.clone()).or_default();
        s.words += 1;
        lemma_sets
            .entry(e.lang.as_str())
            .or_default()
            .insert(e.lemma_surface());
    }
    for (lang, lemmas) in lemma_sets {
        stats.get_mut(lang).unwrap().lemmas = lemmas.len();
    }
    stats
}

/// Train/test/unseen partition of a corpus, with the seed that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<InflectionEntry>,
    pub test: Vec<InflectionEntry>,
    pub unseen: Vec<InflectionEntry>,
    pub seed: u64,
}

/// Hold out `n_holdout_lemmas` whole lemmas as `unseen`, then split the rest
/// per lemma: of a lemma's k distinct forms, ceil(test_fraction * k) but
/// never all of them go to `test`. Lemmas with a single form stay in train,
/// so every test lemma is seen in training.
pub fn split_standard(
    entries: &[InflectionEntry],
    seed: u64,
    n_holdout_lemmas: usize,
    test_fraction: f64,
) -> Result<CorpusSplit, CorpusError> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(CorpusError::Argument(format!(
            "test_fraction {test_fraction} not in [0,1]"
        )));
    }
    // distinct lemma keys in first-occurrence order
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for e in entries {
        let k = e.lemma_key();
        if seen.insert(k.clone()) {
            keys.push(k);
        }
    }
    if keys.len() <= n_holdout_lemmas {
        return Err(CorpusError::TooFewLemmas {
            have: keys.len(),
            need: n_holdout_lemmas,
        });
    }
    let mut rng = Rng::new(seed);
    let held: HashSet<usize> = rng
        .sample_indices(keys.len(), n_holdout_lemmas)
        .into_iter()
        .collect();
    let held_keys: HashSet<&(String, String)> = held.iter().map(|&i| &keys[i]).collect();

    let mut unseen = Vec::new();
    let mut rest: Vec<&InflectionEntry> = Vec::new();
    for e in entries {
        if held_keys.contains(&e.lemma_key()) {
            unseen.push(e.clone());
        } else {
            rest.push(e);
        }
    }

    // group remaining entries per lemma, preserving first-occurrence order
    let mut group_order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<&InflectionEntry>> = HashMap::new();
    for e in rest {
        let k = e.lemma_key();
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                group_order.push(k);
                Vec::new()
            })
            .push(e);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut split_rng = rng.derive("per-lemma");
    for key in &group_order {
        let group = &groups[key];
        // duplicate entries of the same (form, features) travel together, so
        // the three lists stay disjoint as triples
        let mut forms: Vec<(String, &FeatureSet)> = Vec::new();
        for e in group {
            let f = (e.form_surface(), &e.form_feats);
            if !forms.contains(&f) {
                forms.push(f);
            }
        }
        let k = forms.len();
        let mut test_forms: HashSet<usize> = HashSet::new();
        if k >= 2 {
            let want = (test_fraction * k as f64).ceil() as usize;
            let n_test = want.min(k - 1);
            test_forms = split_rng.sample_indices(k, n_test).into_iter().collect();
        }
        for e in group {
            let f = (e.form_surface(), &e.form_feats);
            let idx = forms.iter().position(|x| x == &f).unwrap();
            if test_forms.contains(&idx) {
                test.push((*e).clone());
            } else {
                train.push((*e).clone());
            }
        }
    }

    Ok(CorpusSplit {
        train,
        test,
        unseen,
        seed,
    })
}

/// Low-resource variant: sample the train set down to `train_size` items and
/// the test set down to `test_max`, both uniformly without replacement;
/// `unseen` is carried through unchanged. Test lemmas may or may not remain
/// covered by the reduced train set.
pub fn split_low_resource(
    split: &CorpusSplit,
    seed: u64,
    train_size: usize,
    test_max: usize,
) -> CorpusSplit {
    let mut rng = Rng::new(seed);
    let take = |rng: &mut Rng, xs: &[InflectionEntry], k: usize| -> Vec<InflectionEntry> {
        if k >= xs.len() {
            return xs.to_vec();
        }
        rng.sample_indices(xs.len(), k)
            .into_iter()
            .map(|i| xs[i].clone())
            .collect()
    };
    let train = take(&mut rng, &split.train, train_size);
    let test = take(&mut rng, &split.test, test_max);
    CorpusSplit {
        train,
        test,
        unseen: split.unseen.clone(),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1_LINE: &str =
        "fin\t|retrogradi|nen\tADJ;Case=Nom;Number=Sing\t|retrogradi|sta\tADJ;Case=Par;Number=Sing";

    #[test]
    fn parse_table1_line() {
        let entries = parse_corpus_str(TABLE1_LINE).unwrap();
        assert_eq!(entries.len(), 1);
        let e = &entries[0];
        assert_eq!(e.lang, "fin");
        assert_eq!(e.lemma_surface(), "retrogradinen");
        assert_eq!(e.form_surface(), "retrogradista");
        assert_eq!(e.lemma_seg.prefixes(), &[] as &[String]);
        assert_eq!(e.lemma_seg.stem(), "retrogradi");
        assert_eq!(e.lemma_seg.suffixes(), ["nen"]);
        assert_eq!(e.lemma_feats.pos(), "ADJ");
        assert_eq!(
            e.form_feats.features(),
            [
                ("Case".to_string(), "Par".to_string()),
                ("Number".to_string(), "Sing".to_string())
            ]
        );
    }

    #[test]
    fn parse_stem_only_segmentation() {
        let line = "deu\t|Haus|\tNOUN;Case=Nom;Number=Sing\t|Haus|er\tNOUN;Case=Nom;Number=Plur";
        let e = &parse_corpus_str(line).unwrap()[0];
        assert!(e.lemma_seg.prefixes().is_empty());
        assert!(e.lemma_seg.suffixes().is_empty());
        assert_eq!(e.lemma_surface(), "Haus");
    }

    #[test]
    fn reserved_symbol_in_segment_rejected() {
        let line = "fin\t|retro\u{2205}gradi|nen\tADJ\t|x|\tADJ";
        match parse_corpus_str(line) {
            Err(CorpusError::Validation { line: 1, message }) => {
                assert!(message.contains("reserved"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        let line2 = "fin\t|re<\\w>tro|\tADJ\t|x|\tADJ";
        assert!(matches!(
            parse_corpus_str(line2),
            Err(CorpusError::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{TABLE1_LINE}\nnot a record\n");
        match parse_corpus_str(&text) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_feature_syntax_rejected() {
        let line = "fin\t|a|\tADJ;NotAPair\t|a|\tADJ";
        assert!(matches!(
            parse_corpus_str(line),
            Err(CorpusError::Validation { line: 1, .. })
        ));
        let dup = "fin\t|a|\tADJ;Case=Nom;Case=Par\t|a|\tADJ";
        assert!(matches!(
            parse_corpus_str(dup),
            Err(CorpusError::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let text = format!("# header\n\n{TABLE1_LINE}\n");
        assert_eq!(parse_corpus_str(&text).unwrap().len(), 1);
    }

    #[test]
    fn feature_set_canonical_order() {
        let f = FeatureSet::parse("NOUN;Number=Sing;Case=Nom").unwrap();
        assert_eq!(f.to_string(), "NOUN;Case=Nom;Number=Sing");
    }

    #[test]
    fn surface_roundtrip() {
        let s = Segmentation::parse("ge;un|sag|t;e").unwrap();
        assert_eq!(s.surface(), "geunsagte");
        assert_eq!(Segmentation::parse(&s.to_string()).unwrap(), s);
    }

    fn toy_entry(lang: &str, stem: &str, suffix: &str, case: &str) -> InflectionEntry {
        let lemma = Segmentation::new(vec![], stem, vec![]).unwrap();
        let form = if suffix.is_empty() {
            Segmentation::new(vec![], stem, vec![]).unwrap()
        } else {
            Segmentation::new(vec![], stem, vec![suffix.to_string()]).unwrap()
        };
        InflectionEntry {
            lang: lang.to_string(),
            lemma_seg: lemma,
            lemma_feats: FeatureSet::parse("NOUN;Case=Nom").unwrap(),
            form_seg: form,
            form_feats: FeatureSet::parse(&format!("NOUN;Case={case}")).unwrap(),
        }
    }

    fn toy_corpus(n_lemmas: usize, forms_per_lemma: usize) -> Vec<InflectionEntry> {
        let cases = ["Nom", "Gen", "Par", "Ine", "Ela", "Ill", "Ade", "Abl"];
        let suffixes = ["", "n", "ta", "ssa", "sta", "an", "lla", "lta"];
        let mut out = Vec::new();
        for i in 0..n_lemmas {
            let stem = format!("stem{i}");
            for j in 0..forms_per_lemma {
                out.push(toy_entry("fin", &stem, suffixes[j], cases[j]));
            }
        }
        out
    }

    #[test]
    fn stats_empty_and_small() {
        assert!(corpus_stats(&[]).is_empty());
        let corpus = toy_corpus(1, 3);
        let stats = corpus_stats(&corpus);
        assert_eq!(stats["fin"], LangStats { lemmas: 1, words: 3 });
    }

    #[test]
    fn split_standard_basic_counts() {
        let corpus = toy_corpus(30, 5);
        let split = split_standard(&corpus, 7, 10, 0.2).unwrap();
        let unseen_lemmas: HashSet<_> = split.unseen.iter().map(|e| e.lemma_surface()).collect();
        assert_eq!(unseen_lemmas.len(), 10);
        assert_eq!(split.unseen.len(), 50);
        // per lemma with 5 forms: ceil(0.2*5)=1 test form
        assert_eq!(split.test.len(), 20);
        assert_eq!(split.train.len(), 80);
        assert_eq!(split.seed, 7);
    }

    #[test]
    fn single_form_lemma_stays_in_train() {
        let mut corpus = toy_corpus(5, 3);
        corpus.push(toy_entry("fin", "loner", "n", "Gen"));
        let split = split_standard(&corpus, 3, 1, 0.5).unwrap();
        let loner_in_test = split.test.iter().any(|e| e.lemma_surface() == "loner");
        let loner_unseen = split.unseen.iter().any(|e| e.lemma_surface() == "loner");
        if !loner_unseen {
            assert!(!loner_in_test);
            assert!(split.train.iter().any(|e| e.lemma_surface() == "loner"));
        }
    }

    #[test]
    fn split_standard_deterministic() {
        let corpus = toy_corpus(25, 4);
        let a = split_standard(&corpus, 42, 5, 0.2).unwrap();
        let b = split_standard(&corpus, 42, 5, 0.2).unwrap();
        assert_eq!(a, b);
        let c = split_standard(&corpus, 43, 5, 0.2).unwrap();
        assert_ne!(a.unseen, c.unseen);
    }

    #[test]
    fn split_standard_too_few_lemmas() {
        let corpus = toy_corpus(3, 2);
        assert!(matches!(
            split_standard(&corpus, 1, 5, 0.2),
            Err(CorpusError::TooFewLemmas { have: 3, need: 5 })
        ));
    }

    #[test]
    fn test_lemmas_seen_in_train() {
        let corpus = toy_corpus(40, 6);
        let split = split_standard(&corpus, 11, 10, 0.2).unwrap();
        let train_lemmas: HashSet<_> = split.train.iter().map(|e| e.lemma_surface()).collect();
        for e in &split.test {
            assert!(train_lemmas.contains(&e.lemma_surface()));
        }
        for e in &split.unseen {
            assert!(!train_lemmas.contains(&e.lemma_surface()));
        }
    }

    #[test]
    fn remerge_reproduces_input_multiset() {
        let corpus = toy_corpus(20, 4);
        let split = split_standard(&corpus, 5, 4, 0.25).unwrap();
        let mut merged: Vec<_> = split
            .train
            .iter()
            .chain(&split.test)
            .chain(&split.unseen)
            .cloned()
            .collect();
        let mut orig = corpus.clone();
        merged.sort();
        orig.sort();
        assert_eq!(merged, orig);
    }

    #[test]
    fn low_resource_sizes() {
        let corpus = toy_corpus(50, 6);
        let split = split_standard(&corpus, 9, 10, 0.2).unwrap();
        let low = split_low_resource(&split, 13, 100, 20);
        assert_eq!(low.train.len(), 100);
        assert_eq!(low.test.len(), 20);
        assert_eq!(low.unseen, split.unseen);
        // oversized request leaves the set unchanged
        let same = split_low_resource(&split, 13, 10_000, 10_000);
        assert_eq!(same.train, split.train);
        assert_eq!(same.test, split.test);
    }

    #[test]
    fn corpus_tsv_roundtrip() {
        let corpus = toy_corpus(4, 3);
        let text = write_corpus(&corpus);
        assert_eq!(parse_corpus_str(&text).unwrap(), corpus);
    }
}
