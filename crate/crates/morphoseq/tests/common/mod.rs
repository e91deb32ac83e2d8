//! Shared fixtures for the integration suites: a deterministic synthetic
//! agglutinative language and random-corpus generators.

#![allow(dead_code)]

use morphoseq::corpus::{FeatureSet, InflectionEntry, Segmentation};
use morphoseq::rng::Rng;

const CONSONANTS: [char; 6] = ['k', 't', 'p', 's', 'm', 'l'];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

/// Paradigm slots of the toy language: number x case, realized by at most
/// one suffix each, in that order. Only the nominative singular is bare, so
/// every slot decision is a contrast between always-present feature values.
const NUMBERS: [(&str, &str); 2] = [("Sing", ""), ("Plur", "de")];
const CASES: [(&str, &str); 10] = [
    ("Nom", ""),
    ("Gen", "n"),
    ("Par", "ta"),
    ("Ine", "ssa"),
    ("Ela", "sta"),
    ("Ill", "an"),
    ("Ade", "lla"),
    ("Abl", "lta"),
    ("All", "lle"),
    ("Ess", "na"),
];

/// Deterministic unique CVCV stems, drawn without replacement from the full
/// combination pool and kept balanced per letter position so every letter
/// stays frequent in any large-enough subset.
pub fn toy_stems(n: usize, seed: u64) -> Vec<String> {
    let mut pool: Vec<[usize; 4]> = Vec::new();
    for c1 in 0..CONSONANTS.len() {
        for v1 in 0..VOWELS.len() {
            for c2 in 0..CONSONANTS.len() {
                for v2 in 0..VOWELS.len() {
                    pool.push([c1, v1, c2, v2]);
                }
            }
        }
    }
    let mut rng = Rng::new(seed).derive("toy-stems");
    rng.shuffle(&mut pool);
    let limit_c = n.div_ceil(CONSONANTS.len()) + 1;
    let limit_v = n.div_ceil(VOWELS.len()) + 1;
    let mut counts = [[0usize; 6]; 4];
    let mut stems = Vec::with_capacity(n);
    for combo in pool {
        if stems.len() == n {
            break;
        }
        let limits = [limit_c, limit_v, limit_c, limit_v];
        if (0..4).any(|p| counts[p][combo[p]] >= limits[p]) {
            continue;
        }
        for p in 0..4 {
            counts[p][combo[p]] += 1;
        }
        stems.push(format!(
            "{}{}{}{}",
            CONSONANTS[combo[0]], VOWELS[combo[1]], CONSONANTS[combo[2]], VOWELS[combo[3]]
        ));
    }
    assert_eq!(stems.len(), n, "stem pool exhausted");
    stems
}

/// A fully regular concatenative toy language: `n_stems` noun stems crossed
/// with the first `n_slots` paradigm slots (up to 20). The lemma is the bare
/// stem in nominative singular.
pub fn toy_language(n_stems: usize, n_slots: usize, seed: u64) -> Vec<InflectionEntry> {
    assert!(n_slots <= NUMBERS.len() * CASES.len());
    let stems = toy_stems(n_stems, seed);
    let mut slots = Vec::new();
    for (number, num_suffix) in NUMBERS {
        for (case, case_suffix) in CASES {
            slots.push((number, num_suffix, case, case_suffix));
        }
    }
    slots.truncate(n_slots);

    let mut entries = Vec::new();
    for stem in &stems {
        let lemma_seg = Segmentation::new(vec![], stem.clone(), vec![]).unwrap();
        let lemma_feats = FeatureSet::new(
            "NOUN",
            vec![("Case".into(), "Nom".into()), ("Number".into(), "Sing".into())],
        )
        .unwrap();
        for (number, num_suffix, case, case_suffix) in &slots {
            let suffixes: Vec<String> = [num_suffix, case_suffix]
                .into_iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string())
                .collect();
            let form_seg = Segmentation::new(vec![], stem.clone(), suffixes).unwrap();
            let form_feats = FeatureSet::new(
                "NOUN",
                vec![
                    ("Case".to_string(), case.to_string()),
                    ("Number".to_string(), number.to_string()),
                ],
            )
            .unwrap();
            entries.push(InflectionEntry {
                lang: "toy".to_string(),
                lemma_seg: lemma_seg.clone(),
                lemma_feats: lemma_feats.clone(),
                form_seg,
                form_feats,
            });
        }
    }
    entries
}

/// Random corpora for property tests: a few dozen lemmas with 1..=5 forms
/// drawn from a shared suffix pool, so duplicates and single-form lemmas
/// both occur.
pub fn random_corpus(rng: &mut Rng, n_lemmas: usize) -> Vec<InflectionEntry> {
    let suffix_pool = ["n", "t", "ta", "de", "ssa", "lla", "i"];
    let cases = ["Nom", "Gen", "Par", "Ine", "Ade", "Ill", "Abl"];
    let stems = toy_stems(n_lemmas, rng.next_u64());
    let mut entries = Vec::new();
    for stem in &stems {
        let lemma_seg = Segmentation::new(vec![], stem.clone(), vec![]).unwrap();
        let lemma_feats = FeatureSet::new("NOUN", vec![("Case".into(), "Nom".into())]).unwrap();
        let n_forms = 1 + rng.below(5);
        for _ in 0..n_forms {
            let pick = rng.below(suffix_pool.len());
            let form_seg = Segmentation::new(
                vec![],
                stem.clone(),
                vec![suffix_pool[pick].to_string()],
            )
            .unwrap();
            let form_feats =
                FeatureSet::new("NOUN", vec![("Case".into(), cases[pick].into())]).unwrap();
            entries.push(InflectionEntry {
                lang: "fin".to_string(),
                lemma_seg: lemma_seg.clone(),
                lemma_feats: lemma_feats.clone(),
                form_seg,
                form_feats,
            });
        }
    }
    entries
}
