//! Score aggregation and text-overlap metrics.
//!
//! Medical average and the IFEval strict average are plain means. ROUGE-1/2/L
//! and sentence BLEU-4 are computed natively over a fixed tokenizer; METEOR
//! and BERTScore only arrive through external score files.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::json::OrderedObject;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty benchmark suite")]
    EmptySuite,
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: String, value: f64 },
    #[error("missing generation metric `{0}`")]
    MissingMetric(&'static str),
    #[error("no generation metrics present")]
    NoMetrics,
    #[error("malformed score file: {0}")]
    Malformed(String),
    #[error("duplicate checkpoint name `{0}`")]
    DuplicateCheckpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn check_unit(field: impl Into<String>, value: f64) -> Result<f64, MetricsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MetricsError::OutOfRange {
            field: field.into(),
            value,
        })
    }
}

/// Running mean; exact for repeated identical values.
fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut m = 0.0;
    let mut n = 0usize;
    for v in values {
        n += 1;
        m += (v - m) / n as f64;
    }
    (n > 0).then_some(m)
}

/// Unweighted mean accuracy over a benchmark suite.
pub fn medical_avg(scores: &BTreeMap<String, f64>) -> Result<f64, MetricsError> {
    mean(scores.values().copied()).ok_or(MetricsError::EmptySuite)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IfevalStrict {
    pub prompt_strict: f64,
    pub instance_strict: f64,
}

impl IfevalStrict {
    pub fn new(prompt_strict: f64, instance_strict: f64) -> Result<Self, MetricsError> {
        Ok(IfevalStrict {
            prompt_strict: check_unit("ifeval.prompt_strict", prompt_strict)?,
            instance_strict: check_unit("ifeval.instance_strict", instance_strict)?,
        })
    }
}

/// Mean of prompt-level and instance-level strict accuracy.
pub fn ifeval_score(s: IfevalStrict) -> f64 {
    (s.prompt_strict + s.instance_strict) / 2.0
}

/// Lowercases, then splits into maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate n-gram total.
fn clipped_overlap(cand: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let matches = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, c.values().sum(), r.values().sum())
}

fn f1(overlap: usize, cand_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 || cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-N F1 over clipped n-gram overlap.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let (m, c, r) = clipped_overlap(&tokenize(candidate), &tokenize(reference), n);
    f1(m, c, r)
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 (beta = 1) from the longest common token subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    f1(lcs_len(&c, &r), c.len(), r.len())
}

/// Sentence BLEU-4 with uniform weights.
///
/// Orders n >= 2 use add-one smoothing, `(matches + 1) / (total + 1)`; the
/// unigram precision is unsmoothed. Brevity penalty is `exp(1 - r/c)` when
/// the candidate is shorter than the reference.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (m, total, _) = clipped_overlap(&c, &r, n);
        let p = if n == 1 {
            m as f64 / total as f64
        } else {
            (m + 1) as f64 / (total + 1) as f64
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += 0.25 * p.ln();
    }
    let bp = if c.len() < r.len() {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    bp * log_sum.exp()
}

/// Native per-pair text scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TextScores {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub bleu: f64,
}

pub fn score_pair(candidate: &str, reference: &str) -> TextScores {
    TextScores {
        rouge1: rouge_n(candidate, reference, 1),
        rouge2: rouge_n(candidate, reference, 2),
        rouge_l: rouge_l(candidate, reference),
        bleu: bleu(candidate, reference),
    }
}

/// Macro average over pairs; `None` for an empty corpus.
pub fn corpus_mean(scores: &[TextScores]) -> Option<TextScores> {
    Some(TextScores {
        rouge1: mean(scores.iter().map(|s| s.rouge1))?,
        rouge2: mean(scores.iter().map(|s| s.rouge2))?,
        rouge_l: mean(scores.iter().map(|s| s.rouge_l))?,
        bleu: mean(scores.iter().map(|s| s.bleu))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositeScore {
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub bertscore: f64,
    pub overall: f64,
}

/// Order-independent mean: values are sorted before accumulation.
fn sorted_mean(mut values: Vec<f64>) -> Option<f64> {
    values.sort_by(f64::total_cmp);
    mean(values)
}

/// Unweighted mean of the six generation metrics.
pub fn composite_score(
    bleu: f64,
    meteor: f64,
    rouge1: f64,
    rouge2: f64,
    rouge_l: f64,
    bertscore: f64,
) -> Result<CompositeScore, MetricsError> {
    let vals = [
        ("bleu", bleu),
        ("meteor", meteor),
        ("rouge1", rouge1),
        ("rouge2", rouge2),
        ("rougeL", rouge_l),
        ("bertscore", bertscore),
    ];
    for (name, v) in vals {
        check_unit(name, v)?;
    }
    let overall = sorted_mean(vals.iter().map(|(_, v)| *v).collect()).expect("six values");
    Ok(CompositeScore {
        bleu,
        meteor,
        rouge1,
        rouge2,
        rouge_l,
        bertscore,
        overall,
    })
}

/// Any subset of the six generation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationMetrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meteor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge2: Option<f64>,
    #[serde(default, rename = "rougeL", skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<f64>,
}

/// Mean over whichever metrics were present. Never a substitute for
/// [`CompositeScore`]: the labels say what was left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialComposite {
    pub overall: f64,
    pub present: Vec<&'static str>,
    pub missing: Vec<&'static str>,
}

impl GenerationMetrics {
    fn entries(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("bleu", self.bleu),
            ("meteor", self.meteor),
            ("rouge1", self.rouge1),
            ("rouge2", self.rouge2),
            ("rougeL", self.rouge_l),
            ("bertscore", self.bertscore),
        ]
    }

    pub fn validate(&self, prefix: &str) -> Result<(), MetricsError> {
        for (name, v) in self.entries() {
            if let Some(v) = v {
                check_unit(format!("{prefix}{name}"), v)?;
            }
        }
        Ok(())
    }

    /// Full six-metric composite; errors on the first missing metric.
    pub fn composite(&self) -> Result<CompositeScore, MetricsError> {
        let get = |name: &'static str, v: Option<f64>| v.ok_or(MetricsError::MissingMetric(name));
        composite_score(
            get("bleu", self.bleu)?,
            get("meteor", self.meteor)?,
            get("rouge1", self.rouge1)?,
            get("rouge2", self.rouge2)?,
            get("rougeL", self.rouge_l)?,
            get("bertscore", self.bertscore)?,
        )
    }

    pub fn partial_composite(&self) -> Result<PartialComposite, MetricsError> {
        self.validate("")?;
        let (present, missing): (Vec<_>, Vec<_>) =
            self.entries().into_iter().partition(|(_, v)| v.is_some());
        let overall = sorted_mean(present.iter().filter_map(|(_, v)| *v).collect())
            .ok_or(MetricsError::NoMetrics)?;
        Ok(PartialComposite {
            overall,
            present: present.into_iter().map(|(n, _)| n).collect(),
            missing: missing.into_iter().map(|(n, _)| n).collect(),
        })
    }

    /// Fills BLEU and ROUGE from native scores, keeping other fields.
    pub fn with_native(mut self, native: &TextScores) -> Self {
        self.bleu = Some(native.bleu);
        self.rouge1 = Some(native.rouge1);
        self.rouge2 = Some(native.rouge2);
        self.rouge_l = Some(native.rouge_l);
        self
    }
}

/// Externally computed scores for one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub ifeval: IfevalStrict,
    pub benchmarks: BTreeMap<String, f64>,
    pub generation: GenerationMetrics,
}

impl ScoreRecord {
    pub fn instruction_score(&self) -> f64 {
        ifeval_score(self.ifeval)
    }

    pub fn medical_avg(&self) -> Result<f64, MetricsError> {
        medical_avg(&self.benchmarks)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    ifeval: IfevalStrict,
    benchmarks: OrderedObject,
    #[serde(default)]
    generation: GenerationMetrics,
}

fn parse_record(name: &str, value: Value) -> Result<ScoreRecord, MetricsError> {
    let raw: RawRecord = serde_json::from_value(value)
        .map_err(|e| MetricsError::Malformed(format!("checkpoint `{name}`: {e}")))?;
    let ifeval = IfevalStrict::new(raw.ifeval.prompt_strict, raw.ifeval.instance_strict).map_err(
        |e| match e {
            MetricsError::OutOfRange { field, value } => MetricsError::OutOfRange {
                field: format!("{name}.{field}"),
                value,
            },
            other => other,
        },
    )?;
    if let Some(dup) = raw.benchmarks.first_duplicate() {
        return Err(MetricsError::Malformed(format!(
            "checkpoint `{name}`: duplicate benchmark `{dup}`"
        )));
    }
    let mut benchmarks = BTreeMap::new();
    for (bench, v) in raw.benchmarks.0 {
        let v = v.as_f64().ok_or_else(|| {
            MetricsError::Malformed(format!("checkpoint `{name}`: benchmark `{bench}` is not a number"))
        })?;
        check_unit(format!("{name}.benchmarks.{bench}"), v)?;
        benchmarks.insert(bench, v);
    }
    raw.generation.validate(&format!("{name}.generation."))?;
    Ok(ScoreRecord {
        ifeval,
        benchmarks,
        generation: raw.generation,
    })
}

/// Parses an external score document (checkpoint name -> record).
pub fn parse_external_scores(text: &str) -> Result<BTreeMap<String, ScoreRecord>, MetricsError> {
    let obj: OrderedObject =
        serde_json::from_str(text).map_err(|e| MetricsError::Malformed(e.to_string()))?;
    if let Some(dup) = obj.first_duplicate() {
        return Err(MetricsError::DuplicateCheckpoint(dup.to_string()));
    }
    obj.0
        .into_iter()
        .map(|(name, value)| {
            let rec = parse_record(&name, value)?;
            Ok((name, rec))
        })
        .collect()
}

pub fn ingest_external_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, ScoreRecord>, MetricsError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_external_scores(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn suite(vals: &[f64]) -> BTreeMap<String, f64> {
        vals.iter().enumerate().map(|(i, v)| (format!("b{i}"), *v)).collect()
    }

    #[test]
    fn medical_avg_examples() {
        assert!((medical_avg(&suite(&[0.6, 0.7, 0.8])).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(medical_avg(&suite(&[0.42])).unwrap(), 0.42);
        assert!(matches!(medical_avg(&BTreeMap::new()), Err(MetricsError::EmptySuite)));
    }

    #[test]
    fn medical_avg_matches_summation_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let vals: Vec<f64> = (0..9).map(|_| rng.gen::<f64>()).collect();
            // Neumaier-compensated sum as the independent reference
            let (mut s, mut c) = (0.0f64, 0.0f64);
            for &v in &vals {
                let t = s + v;
                c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
                s = t;
            }
            let oracle = (s + c) / 9.0;
            assert!((medical_avg(&suite(&vals)).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn ifeval_examples() {
        assert!((ifeval_score(IfevalStrict::new(0.2, 0.3).unwrap()) - 0.25).abs() < 1e-15);
        assert_eq!(ifeval_score(IfevalStrict::new(1.0, 0.0).unwrap()), 0.5);
        assert!(IfevalStrict::new(1.2, 0.0).is_err());
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("The cat sat."), ["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("BP 120/80 mmHg"), ["bp", "120", "80", "mmhg"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
    }

    #[test]
    fn rouge_fixtures() {
        assert_eq!(rouge_n("a b c", "a b c", 1), 1.0);
        assert!((rouge_n("a b c", "a b d", 1) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_n("a b c", "a", 2), 0.0);
        assert_eq!(rouge_n("", "a b", 1), 0.0);
        // clipping: candidate repeats "the" more often than the reference
        assert!((rouge_n("the the the", "the cat", 1) - 0.4).abs() < 1e-12);
        assert!((rouge_l("the cat", "the cat sat on mat") - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(rouge_l("x y", "p q"), 0.0);
        assert_eq!(rouge_l("", ""), 0.0);
        assert_eq!(rouge_l("a b c d", "a b c d"), 1.0);
    }

    #[test]
    fn bleu_fixtures() {
        assert_eq!(bleu("the cat sat on the mat", "the cat sat on the mat"), 1.0);
        assert_eq!(bleu("", "the cat"), 0.0);
        assert_eq!(bleu("dog", "the cat"), 0.0);
        // independent exact-fraction computation with the same smoothing
        let cases = [
            ("the cat sat", "the cat sat on the mat", 0.367_879_441_171_442_32),
            (
                "the quick brown fox jumps over the dog",
                "the quick brown fox jumped over the lazy dog",
                0.466_563_432_434_129_04,
            ),
            (
                "patient denies chest pain and shortness of breath",
                "the patient denies any chest pain or shortness of breath today",
                0.276_093_869_308_320_38,
            ),
        ];
        for (c, r, expected) in cases {
            assert!((bleu(c, r) - expected).abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn composite_examples() {
        assert_eq!(composite_score(0.5, 0.5, 0.5, 0.5, 0.5, 0.5).unwrap().overall, 0.5);
        let c = composite_score(0.1, 0.2, 0.3, 0.4, 0.5, 0.6).unwrap();
        assert!((c.overall - 0.35).abs() < 1e-9);
        assert!(composite_score(0.1, 0.2, 0.3, 0.4, 0.5, 1.1).is_err());

        let partial = GenerationMetrics {
            bleu: Some(0.1),
            meteor: Some(0.2),
            rouge1: Some(0.3),
            rouge2: Some(0.4),
            rouge_l: Some(0.5),
            bertscore: None,
        };
        assert!(matches!(partial.composite(), Err(MetricsError::MissingMetric("bertscore"))));
        let p = partial.partial_composite().unwrap();
        assert!((p.overall - 0.3).abs() < 1e-12);
        assert_eq!(p.missing, ["bertscore"]);
        assert!(GenerationMetrics::default().partial_composite().is_err());
    }

    const SCORES: &str = r#"{
        "linear-0.5": {
            "ifeval": {"prompt_strict": 0.5, "instance_strict": 0.6},
            "benchmarks": {"medqa": 0.68, "medmcqa": 0.70, "pubmedqa": 0.72, "mmlu_anatomy": 0.66},
            "generation": {"meteor": 0.3, "bertscore": 0.85}
        },
        "slerp-0.4": {
            "ifeval": {"prompt_strict": 0.1, "instance_strict": 0.2},
            "benchmarks": {"medqa": 0.7}
        }
    }"#;

    #[test]
    fn ingest_schema() {
        let recs = parse_external_scores(SCORES).unwrap();
        assert_eq!(recs.len(), 2);
        let r = &recs["linear-0.5"];
        assert!((r.instruction_score() - 0.55).abs() < 1e-15);
        let oracle = (0.68 + 0.70 + 0.72 + 0.66) / 4.0;
        assert!((r.medical_avg().unwrap() - oracle).abs() < 1e-12);
        assert_eq!(r.generation.meteor, Some(0.3));
        assert_eq!(recs["slerp-0.4"].generation, GenerationMetrics::default());
    }

    #[test]
    fn ingest_errors() {
        let out_of_range = SCORES.replace("0.72", "1.3");
        let err = parse_external_scores(&out_of_range).unwrap_err();
        assert!(matches!(err, MetricsError::OutOfRange { ref field, .. } if field == "linear-0.5.benchmarks.pubmedqa"), "{err}");

        let bad_ifeval = SCORES.replace("\"instance_strict\": 0.2", "\"instance_strict\": -0.2");
        let err = parse_external_scores(&bad_ifeval).unwrap_err();
        assert!(err.to_string().contains("slerp-0.4.ifeval.instance_strict"), "{err}");

        let bad_gen = SCORES.replace("0.85", "2.0");
        assert!(parse_external_scores(&bad_gen).unwrap_err().to_string().contains("generation.bertscore"));

        let dup = r#"{"a": {"ifeval": {"prompt_strict": 0, "instance_strict": 0}, "benchmarks": {}},
                      "a": {"ifeval": {"prompt_strict": 0, "instance_strict": 0}, "benchmarks": {}}}"#;
        assert!(matches!(parse_external_scores(dup), Err(MetricsError::DuplicateCheckpoint(ref n)) if n == "a"));

        assert!(matches!(parse_external_scores("{"), Err(MetricsError::Malformed(_))));
        assert!(matches!(parse_external_scores("[]"), Err(MetricsError::Malformed(_))));
        let unknown = SCORES.replace("\"meteor\"", "\"cider\"");
        assert!(matches!(parse_external_scores(&unknown), Err(MetricsError::Malformed(_))));
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c"), Just("d"), Just("e")], 0..12)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval(c in words(), r in words()) {
            let (c, r) = (c.join(" "), r.join(" "));
            for v in [rouge_n(&c, &r, 1), rouge_n(&c, &r, 2), rouge_l(&c, &r), bleu(&c, &r)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn rouge_swap_invariant(c in words(), r in words(), n in 1usize..4) {
            let (c, r) = (c.join(" "), r.join(" "));
            prop_assert!((rouge_n(&c, &r, n) - rouge_n(&r, &c, n)).abs() < 1e-12);
        }

        #[test]
        fn identity_scores_one(c in words()) {
            prop_assume!(c.len() >= 4);
            let c = c.join(" ");
            prop_assert_eq!(rouge_n(&c, &c, 1), 1.0);
            prop_assert_eq!(rouge_n(&c, &c, 4), 1.0);
            prop_assert_eq!(rouge_l(&c, &c), 1.0);
            prop_assert_eq!(bleu(&c, &c), 1.0);
        }

        #[test]
        fn rouge_l_bounded_by_unigram_on_permutations(c in words(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = c.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (a, b) = (c.join(" "), shuffled.join(" "));
            prop_assert!(rouge_l(&a, &b) <= rouge_n(&a, &b, 1) + 1e-12);
        }

        #[test]
        fn composite_permutation_invariant(vals in proptest::array::uniform6(0.0f64..=1.0), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let base = composite_score(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]).unwrap();
            let mut p = vals;
            p.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let perm = composite_score(p[0], p[1], p[2], p[3], p[4], p[5]).unwrap();
            prop_assert_eq!(base.overall, perm.overall);
            let naive = vals.iter().sum::<f64>() / 6.0;
            prop_assert!((base.overall - naive).abs() < 1e-9);
        }

        #[test]
        fn mean_of_copies_is_exact(v in 0.0f64..=1.0, k in 1usize..40) {
            prop_assert_eq!(medical_avg(&suite(&vec![v; k])).unwrap(), v);
        }
    }
}
