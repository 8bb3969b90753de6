//! Truecaser corpus preparation: casing statistics, sentence-initial word
//! normalisation, rule-based lowercasing and a capitalised-word ratio filter.
//!
//! Input is pre-tokenised text, one sentence per line with space-separated
//! tokens.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::text::lowercase;

/// Per-word surface-form counts, keyed by the lowercased word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CasingStats {
    table: BTreeMap<String, BTreeMap<String, u64>>,
}

impl CasingStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Number of token occurrences counted.
    pub fn total_tokens(&self) -> u64 {
        self.table.values().flat_map(|m| m.values()).sum()
    }

    pub fn add(&mut self, surface: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .table
            .entry(lowercase(surface))
            .or_default()
            .entry(surface.to_string())
            .or_insert(0) += count;
    }

    /// Counts every token of `sentence` except the first.
    pub fn add_sentence(&mut self, sentence: &str) {
        for tok in sentence.split_whitespace().skip(1) {
            self.add(tok, 1);
        }
    }

    pub fn merge(&mut self, other: &CasingStats) {
        for (key, forms) in &other.table {
            let dst = self.table.entry(key.clone()).or_default();
            for (surface, n) in forms {
                *dst.entry(surface.clone()).or_insert(0) += n;
            }
        }
    }

    pub fn forms(&self, key: &str) -> Option<&BTreeMap<String, u64>> {
        self.table.get(key)
    }

    /// Most frequent surface form of `key`; ties go to the lexicographically
    /// smallest form.
    pub fn most_common(&self, key: &str) -> Option<&str> {
        let forms = self.table.get(key)?;
        let mut best: Option<(&str, u64)> = None;
        for (s, &n) in forms {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((s, n));
            }
        }
        best.map(|(s, _)| s)
    }

    /// One line per key, sorted: `key<TAB>surface:count surface:count`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for (key, forms) in &self.table {
            let pairs: Vec<String> = forms.iter().map(|(s, n)| format!("{s}:{n}")).collect();
            writeln!(w, "{key}\t{}", pairs.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead, source: &Path) -> Result<Self> {
        let mut stats = CasingStats::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (key, pairs) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source, i + 1, "missing tab after key"))?;
            for pair in pairs.split(' ').filter(|p| !p.is_empty()) {
                let (surface, n) = pair
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse(source, i + 1, format!("bad pair {pair:?}")))?;
                let n: u64 = n
                    .parse()
                    .map_err(|_| Error::parse(source, i + 1, format!("bad count in {pair:?}")))?;
                if lowercase(surface) != key {
                    return Err(Error::parse(
                        source,
                        i + 1,
                        format!("surface {surface:?} does not lowercase to {key:?}"),
                    ));
                }
                stats.add(surface, n);
            }
        }
        Ok(stats)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f), path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
    }
}

/// Streams `reader` and counts casing statistics. Read failures report the
/// line number.
pub fn collect_casing_stats(reader: impl BufRead, source: &Path) -> Result<CasingStats> {
    let mut stats = CasingStats::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        stats.add_sentence(&line);
    }
    Ok(stats)
}

/// Counts each shard independently and merges the results.
pub fn collect_casing_stats_sharded<S: AsRef<str> + Sync>(shards: &[Vec<S>]) -> CasingStats {
    shards
        .par_iter()
        .map(|shard| {
            let mut st = CasingStats::new();
            shard.iter().for_each(|l| st.add_sentence(l.as_ref()));
            st
        })
        .reduce(CasingStats::new, |mut a, b| {
            a.merge(&b);
            a
        })
}

pub const DEFAULT_RULES: &str = include_str!("../data/lowercase_rules.txt");

/// Surface forms that are always lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowercaseRules {
    entries: BTreeSet<String>,
}

impl Default for LowercaseRules {
    fn default() -> Self {
        Self::parse(DEFAULT_RULES, Path::new("<default rules>")).expect("shipped rule list")
    }
}

impl LowercaseRules {
    /// One surface form per line; `#` starts a comment.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut entries = BTreeSet::new();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.contains(char::is_whitespace) {
                return Err(Error::parse(source, i + 1, format!("rule {line:?} is not a single token")));
            }
            if let Some(prev) = seen.insert(lowercase(line), line.to_string()) {
                if prev != line {
                    return Err(Error::parse(
                        source,
                        i + 1,
                        format!("rules {prev:?} and {line:?} differ only by case"),
                    ));
                }
            }
            entries.insert(line.to_string());
        }
        Ok(LowercaseRules { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replaces the first token with its most common form when the table knows
/// it.
pub fn normalize_first_word(sentence: &str, stats: &CasingStats) -> String {
    let mut tokens: Vec<&str> = sentence.split_whitespace().collect();
    if let Some(first) = tokens.first_mut() {
        if let Some(mc) = stats.most_common(&lowercase(first)) {
            *first = mc;
        }
    }
    tokens.join(" ")
}

pub fn apply_lowercase_rules(sentence: &str, rules: &LowercaseRules) -> String {
    sentence
        .split_whitespace()
        .map(|t| if rules.contains(t) { lowercase(t) } else { t.to_string() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// What counts as a capitalised word for the ratio filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapitalizedDef {
    /// First character is an uppercase letter.
    #[default]
    FirstChar,
    /// Any character is an uppercase letter.
    AnyUpper,
}

impl CapitalizedDef {
    fn matches(self, token: &str) -> bool {
        match self {
            CapitalizedDef::FirstChar => token.chars().next().is_some_and(char::is_uppercase),
            CapitalizedDef::AnyUpper => token.chars().any(char::is_uppercase),
        }
    }
}

impl std::str::FromStr for CapitalizedDef {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-char" => Ok(CapitalizedDef::FirstChar),
            "any-upper" => Ok(CapitalizedDef::AnyUpper),
            _ => Err(Error::Config(format!("unknown capitalized definition {s:?}"))),
        }
    }
}

impl std::fmt::Display for CapitalizedDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CapitalizedDef::FirstChar => "first-char",
            CapitalizedDef::AnyUpper => "any-upper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Drop,
}

/// Fraction of capitalised tokens; `None` for an empty sentence.
pub fn caps_ratio(sentence: &str, def: CapitalizedDef) -> Option<f64> {
    let (mut caps, mut total) = (0usize, 0usize);
    for t in sentence.split_whitespace() {
        total += 1;
        caps += def.matches(t) as usize;
    }
    (total > 0).then(|| caps as f64 / total as f64)
}

/// Drops sentences whose capitalised-token ratio strictly exceeds
/// `threshold`, and empty sentences.
pub fn caps_ratio_filter(sentence: &str, threshold: f64, def: CapitalizedDef) -> FilterDecision {
    match caps_ratio(sentence, def) {
        Some(r) if r <= threshold => FilterDecision::Keep,
        _ => FilterDecision::Drop,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepOptions {
    pub threshold: f64,
    pub capitalized: CapitalizedDef,
}

impl Default for PrepOptions {
    fn default() -> Self {
        PrepOptions {
            threshold: 0.20,
            capitalized: CapitalizedDef::FirstChar,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrepReport {
    pub read: u64,
    pub kept: u64,
    pub dropped: u64,
    pub modified: u64,
}

impl PrepReport {
    fn record(&mut self, outcome: &PrepOutcome) {
        self.read += 1;
        match outcome {
            PrepOutcome::Kept { modified, .. } => {
                self.kept += 1;
                self.modified += *modified as u64;
            }
            PrepOutcome::Dropped => self.dropped += 1,
        }
    }

    pub fn merge(&mut self, o: PrepReport) {
        self.read += o.read;
        self.kept += o.kept;
        self.dropped += o.dropped;
        self.modified += o.modified;
    }

    pub fn kv_block(&self) -> String {
        format!(
            "read={}\nkept={}\ndropped={}\nmodified={}\n",
            self.read, self.kept, self.dropped, self.modified
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrepOutcome {
    Kept { sentence: String, modified: bool },
    Dropped,
}

/// First-word normalisation, then lowercase rules, then the ratio filter.
pub fn prepare_sentence(
    sentence: &str,
    stats: &CasingStats,
    rules: &LowercaseRules,
    opts: PrepOptions,
) -> PrepOutcome {
    let normalized = normalize_first_word(sentence, stats);
    let ruled = apply_lowercase_rules(&normalized, rules);
    match caps_ratio_filter(&ruled, opts.threshold, opts.capitalized) {
        FilterDecision::Keep => {
            let modified = ruled != sentence;
            PrepOutcome::Kept {
                sentence: ruled,
                modified,
            }
        }
        FilterDecision::Drop => PrepOutcome::Dropped,
    }
}

/// Streams `reader` through [`prepare_sentence`] and writes kept sentences
/// to `writer` in input order.
pub fn prepare_corpus(
    reader: impl BufRead,
    mut writer: impl Write,
    stats: &CasingStats,
    rules: &LowercaseRules,
    opts: PrepOptions,
    source: &Path,
) -> Result<PrepReport> {
    let mut report = PrepReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        let outcome = prepare_sentence(&line, stats, rules, opts);
        report.record(&outcome);
        if let PrepOutcome::Kept { sentence, .. } = outcome {
            writeln!(writer, "{sentence}")?;
        }
    }
    writer.flush()?;
    Ok(report)
}

/// Processes shards in parallel; the output keeps shard order and input
/// order within each shard.
pub fn prepare_corpus_sharded<S: AsRef<str> + Sync>(
    shards: &[Vec<S>],
    stats: &CasingStats,
    rules: &LowercaseRules,
    opts: PrepOptions,
) -> (Vec<Vec<String>>, PrepReport) {
    let results: Vec<(Vec<String>, PrepReport)> = shards
        .par_iter()
        .map(|shard| {
            let mut report = PrepReport::default();
            let mut out = Vec::new();
            for line in shard {
                let outcome = prepare_sentence(line.as_ref(), stats, rules, opts);
                report.record(&outcome);
                if let PrepOutcome::Kept { sentence, .. } = outcome {
                    out.push(sentence);
                }
            }
            (out, report)
        })
        .collect();
    let mut total = PrepReport::default();
    let outputs = results
        .into_iter()
        .map(|(o, r)| {
            total.merge(r);
            o
        })
        .collect();
    (outputs, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats_of(lines: &[&str]) -> CasingStats {
        let mut s = CasingStats::new();
        lines.iter().for_each(|l| s.add_sentence(l));
        s
    }

    #[test]
    fn counts_skip_sentence_initial_tokens() {
        let s = stats_of(&["a the cat", "a The dog", "a the end"]);
        let forms = s.forms("the").unwrap();
        assert_eq!(forms.get("the"), Some(&2));
        assert_eq!(forms.get("The"), Some(&1));
        assert_eq!(s.most_common("the"), Some("the"));
        assert!(s.forms("a").is_none());
        assert!(stats_of(&[]).is_empty());
    }

    #[test]
    fn most_common_ties_break_lexicographically() {
        let s = stats_of(&["x Apple apple"]);
        assert_eq!(s.most_common("apple"), Some("Apple"));
    }

    #[test]
    fn first_word_normalisation() {
        let s = stats_of(&["x for example", "x for", "x For", "x McMahon said"]);
        assert_eq!(normalize_first_word("For example , this", &s), "for example , this");
        assert_eq!(normalize_first_word("McMahon said .", &s), "McMahon said .");
        assert_eq!(normalize_first_word("Zebras run", &s), "Zebras run");
    }

    #[test]
    fn lowercase_rule_examples() {
        let r = LowercaseRules::default();
        assert_eq!(
            apply_lowercase_rules("he visits next Thursday for a talk .", &r),
            "he visits next thursday for a talk ."
        );
        assert_eq!(apply_lowercase_rules("May I go", &r), "May I go");
        assert_eq!(apply_lowercase_rules("Mr. Smith arrived", &r), "mr. Smith arrived");
        assert!(!r.contains("April"));
    }

    #[test]
    fn rules_differing_only_by_case_rejected() {
        let err = LowercaseRules::parse("GMT\ngmt\n", Path::new("r")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let ok = LowercaseRules::parse("# c\nGMT # zone\n\n", Path::new("r")).unwrap();
        assert_eq!(ok.len(), 1);
    }

    #[test]
    fn caps_filter_examples() {
        let d = CapitalizedDef::FirstChar;
        assert_eq!(caps_ratio_filter("Man Bites Dog In Pajamas", 0.2, d), FilterDecision::Drop);
        assert_eq!(caps_ratio_filter("he ran fast .", 0.2, d), FilterDecision::Keep);
        assert_eq!(caps_ratio("Hartford 4 BOSTON 2", d), Some(0.5));
        assert_eq!(caps_ratio_filter("Hartford 4 BOSTON 2", 0.2, d), FilterDecision::Drop);
        assert_eq!(caps_ratio_filter("", 0.2, d), FilterDecision::Drop);
        // exactly at the threshold is kept
        assert_eq!(caps_ratio_filter("Al b c d e", 0.2, d), FilterDecision::Keep);
        assert_eq!(caps_ratio("aB c", CapitalizedDef::AnyUpper), Some(0.5));
    }

    #[test]
    fn pipeline_examples() {
        let stats = stats_of(&["x the investigation", "x the end", "x McMahon said", "x thursday"]);
        let rules = LowercaseRules::default();
        let opts = PrepOptions::default();
        assert_eq!(
            prepare_sentence("The investigation is ongoing , McMahon said .", &stats, &rules, opts),
            PrepOutcome::Kept {
                sentence: "the investigation is ongoing , McMahon said .".into(),
                modified: true
            }
        );
        assert_eq!(prepare_sentence("MAN BITES DOG", &stats, &rules, opts), PrepOutcome::Dropped);
        assert_eq!(
            prepare_sentence("Thursday begins well", &stats, &rules, opts),
            PrepOutcome::Kept {
                sentence: "thursday begins well".into(),
                modified: true
            }
        );
    }

    #[test]
    fn stats_file_round_trip() {
        let s = stats_of(&["a the cat", "a The dog", "x a:b c"]);
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("the\tThe:1 the:1\n"));
        let back = CasingStats::read_from(&buf[..], Path::new("t")).unwrap();
        assert_eq!(back, s);
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<String>> {
        let tok = prop_oneof!["[a-z]{1,4}", "[A-Z][a-z]{0,3}", "[A-Z]{2,3}", Just(".".to_string())];
        prop::collection::vec(prop::collection::vec(tok, 0..8).prop_map(|t| t.join(" ")), 0..20)
    }

    proptest! {
        #[test]
        fn sharded_counts_equal_single_pass(corpus in arb_corpus(), cut in 0usize..20) {
            let cut = cut.min(corpus.len());
            let single = stats_of(&corpus.iter().map(String::as_str).collect::<Vec<_>>());
            let shards = vec![corpus[..cut].to_vec(), corpus[cut..].to_vec()];
            prop_assert_eq!(collect_casing_stats_sharded(&shards), single);
        }

        #[test]
        fn prepare_is_idempotent(corpus in arb_corpus()) {
            let stats = stats_of(&corpus.iter().map(String::as_str).collect::<Vec<_>>());
            let rules = LowercaseRules::default();
            let opts = PrepOptions::default();
            let (once, r1) = prepare_corpus_sharded(std::slice::from_ref(&corpus), &stats, &rules, opts);
            let (twice, r2) = prepare_corpus_sharded(&once, &stats, &rules, opts);
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(r2.dropped, 0);
            prop_assert_eq!(r2.kept, r1.kept);
        }

        #[test]
        fn rules_preserve_token_count(s in "[A-Za-z.]{1,6}( [A-Za-z.]{1,6}){0,8}") {
            let rules = LowercaseRules::default();
            let out = apply_lowercase_rules(&s, &rules);
            prop_assert_eq!(out.split(' ').count(), s.split(' ').count());
            for (a, b) in out.split(' ').zip(s.split(' ')) {
                if !rules.contains(b) { prop_assert_eq!(a, b); }
            }
        }

        #[test]
        fn filter_monotone_in_capitalized_count(n in 1usize..12, k in 0usize..12) {
            let k = k.min(n);
            let make = |caps: usize| (0..n).map(|i| if i < caps { "Xy" } else { "xy" }).collect::<Vec<_>>().join(" ");
            let r1 = caps_ratio(&make(k), CapitalizedDef::FirstChar).unwrap();
            if k < n {
                let r2 = caps_ratio(&make(k + 1), CapitalizedDef::FirstChar).unwrap();
                prop_assert!(r2 > r1);
            }
        }
    }
}
