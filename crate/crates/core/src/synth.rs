//! Deterministic synthetic corpora: template sentences over a fixed entity
//! lexicon, part of which overlaps ordinary lowercase words.
//!
//! Every lexicon list is split into a "seen" part and a "held-out" part so
//! that a tagger trained on seen words can be tested on words it never saw,
//! while a truecaser trained on the whole lexicon knows their casing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ner::NerExample;
use crate::text::upper_char;

const FIRST_NAMES: &[&str] = &[
    "Alan", "Maria", "Peter", "Sofia", "David", "Elena", "James", "Nadia", "Oscar", "Linda", "Victor", "Helen",
    "Marco", "Julia", "Frank", "Irene", "Omar", "Clara", "Simon", "Laura", "Pablo", "Diana", "Hugo", "Emma",
    "Felix", "Rita", "Ivan", "Nora", "Karl", "Vera", "Tomas", "Agnes",
];
const SURNAMES: &[&str] = &[
    "Becker", "Novak", "Silva", "Kowalski", "Tanaka", "Okafor", "Larsen", "Rossi", "Dubois", "Weber", "Fischer",
    "Moreau", "Costa", "Nguyen", "Patel", "Jensen", "Horvat", "Ibrahim", "Lindqvist", "Petrov", "McMahon", "DeLuca",
];
const LOCATIONS: &[&str] = &[
    "Paris", "Berlin", "Madrid", "Cairo", "Lima", "Oslo", "Dublin", "Vienna", "Prague", "Lisbon", "Kenya", "Peru",
    "Chile", "Norway", "Egypt", "Texas", "Ohio", "Bavaria", "Quebec", "Sydney", "Nairobi", "Manila", "Zurich",
    "New York", "Hong Kong", "Buenos Aires",
];
const ORGANIZATIONS: &[&str] = &[
    "Siemens", "Nokia", "Toyota", "Reuters", "Unilever", "Philips", "Heineken", "Airbus", "Ericsson", "Volvo",
    "NASA", "UNESCO", "BBC", "FIFA", "General Motors", "Deutsche Bank",
];

/// Entity names that are also ordinary words. Each appears both as an
/// entity (capitalized) and as a common noun (lowercase).
const PER_OVERLAP: &[&str] = &["Rose", "Mark", "Bill", "Grant", "Hope", "Joy", "Dawn", "Faith"];
const LOC_OVERLAP: &[&str] = &["China", "Turkey", "Jordan", "Chad", "Nice", "Reading", "Split"];
const ORG_OVERLAP: &[&str] = &["Apple", "Shell", "Amazon", "Target", "Oracle", "Visa"];

/// Lowercase fillers for the ambiguous slots of each entity type.
const PER_NOUNS: &[&str] = &[
    "friends", "neighbors", "teachers", "students", "doctors", "lawyers", "farmers", "nurses", "grace", "patience",
    "parents", "visitors",
];
const LOC_NOUNS: &[&str] = &[
    "school", "work", "market", "town", "church", "home", "campus", "hospital", "prison", "court", "harbor",
    "village",
];
const ORG_NOUNS: &[&str] = &[
    "gold", "steel", "cotton", "sugar", "energy", "property", "bonds", "copper", "silver", "timber", "grain",
    "coffee",
];

const DAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const MONTHS: &[&str] = &["january", "february", "march", "june", "july", "august", "september", "october"];

/// Templates whose context reveals the entity type.
const CLEAR: &[&str] = &[
    "{PER} arrived in {LOC} on {DAY} .",
    "officials from {ORG} met {PER} in {LOC} .",
    "{PER} has worked for {ORG} since {MONTH} .",
    "the mayor of {LOC} praised {PER} for the plan .",
    "shares of {ORG} fell 3 percent on {DAY} .",
    "mr. {SUR} told reporters that {ORG} would expand .",
    "according to {PER} , the talks in {LOC} went well .",
    "{ORG} opened a new office in {LOC} last {MONTH} .",
    "the minister said {LOC} and {LOC} signed the deal .",
    "ms. {SUR} , a spokeswoman for {ORG} , declined to comment .",
    "{PER} scored twice as {LOC} beat {LOC} 2 - 1 .",
    "a report by {ORG} said prices in {LOC} rose sharply .",
];

/// Templates where the slot could hold either an entity of the named type
/// or an ordinary word; only the word itself decides.
const AMBIGUOUS: &[(&str, Kind)] = &[
    ("we talked with {AMB} about the game .", Kind::Per),
    ("the letter from {AMB} arrived on {DAY} .", Kind::Per),
    ("they said {AMB} would help us .", Kind::Per),
    ("they went to {AMB} after lunch .", Kind::Loc),
    ("news from {AMB} was good this week .", Kind::Loc),
    ("she walked back to {AMB} in the rain .", Kind::Loc),
    ("she invested in {AMB} last {MONTH} .", Kind::Org),
    ("the report on {AMB} was long .", Kind::Org),
    ("prices for {AMB} went up again .", Kind::Org),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Per,
    Loc,
    Org,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Per => "PER",
            Kind::Loc => "LOC",
            Kind::Org => "ORG",
        }
    }
}

/// Which part of each lexicon list to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// The first 70% of each list.
    Seen,
    /// Whole lists.
    All,
}

fn part(list: &'static [&'static str], split: Split) -> &'static [&'static str] {
    match split {
        Split::All => list,
        Split::Seen => &list[..(list.len() * 7).div_ceil(10)],
    }
}

/// One generated sentence with its casing as it would appear mid-text and
/// BIO tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl SynthSentence {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Tagged example with the first token capitalized, as in edited text.
    pub fn to_example(&self) -> NerExample {
        let mut tokens = self.tokens.clone();
        tokens[0] = capitalize(&tokens[0]);
        NerExample {
            tokens,
            tags: self.tags.clone(),
        }
    }

    /// Every token capitalized, as in a headline.
    pub fn headline_text(&self) -> String {
        self.tokens.iter().map(|t| capitalize(t)).collect::<Vec<_>>().join(" ")
    }

    /// Edited-text form: first token, day and month names capitalized.
    pub fn raw_text(&self) -> String {
        let mut tokens = self.tokens.clone();
        for t in tokens.iter_mut() {
            if DAYS.contains(&t.as_str()) || MONTHS.contains(&t.as_str()) {
                *t = capitalize(t);
            }
        }
        tokens[0] = capitalize(&tokens[0]);
        tokens.join(" ")
    }
}

fn capitalize(s: &str) -> String {
    let mut cs = s.chars();
    match cs.next() {
        Some(c) => std::iter::once(upper_char(c)).chain(cs).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub split: Split,
    /// Fraction of sentences drawn from the ambiguous templates.
    pub ambiguous_rate: f64,
    /// Within an ambiguous slot, probability of an entity over a common noun.
    pub entity_rate: f64,
    /// Probability that an entity draw uses the overlapping-word list.
    pub overlap_rate: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, split: Split) -> Self {
        SynthConfig {
            seed,
            split,
            ambiguous_rate: 0.5,
            entity_rate: 0.5,
            overlap_rate: 0.2,
        }
    }
}

struct Generator {
    rng: ChaCha8Rng,
    cfg: SynthConfig,
}

impl Generator {
    fn pick(&mut self, list: &'static [&'static str]) -> &'static str {
        part(list, self.cfg.split).choose(&mut self.rng).expect("non-empty lexicon")
    }

    fn entity(&mut self, kind: Kind) -> String {
        let overlap = self.rng.gen::<f64>() < self.cfg.overlap_rate;
        match (kind, overlap) {
            (Kind::Per, true) => self.pick(PER_OVERLAP).to_string(),
            (Kind::Loc, true) => self.pick(LOC_OVERLAP).to_string(),
            (Kind::Org, true) => self.pick(ORG_OVERLAP).to_string(),
            (Kind::Per, false) => match self.rng.gen_range(0..3) {
                0 => self.pick(FIRST_NAMES).to_string(),
                _ => format!("{} {}", self.pick(FIRST_NAMES), self.pick(SURNAMES)),
            },
            (Kind::Loc, false) => self.pick(LOCATIONS).to_string(),
            (Kind::Org, false) => self.pick(ORGANIZATIONS).to_string(),
        }
    }

    fn noun(&mut self, kind: Kind) -> String {
        let overlap = self.rng.gen::<f64>() < self.cfg.overlap_rate;
        let list = match (kind, overlap) {
            (Kind::Per, true) => PER_OVERLAP,
            (Kind::Loc, true) => LOC_OVERLAP,
            (Kind::Org, true) => ORG_OVERLAP,
            (Kind::Per, false) => PER_NOUNS,
            (Kind::Loc, false) => LOC_NOUNS,
            (Kind::Org, false) => ORG_NOUNS,
        };
        crate::text::lowercase(self.pick(list))
    }

    fn sentence(&mut self) -> SynthSentence {
        let ambiguous = self.rng.gen::<f64>() < self.cfg.ambiguous_rate;
        let (template, amb_kind) = if ambiguous {
            let &(t, k) = AMBIGUOUS.choose(&mut self.rng).expect("templates");
            (t, Some(k))
        } else {
            (*CLEAR.choose(&mut self.rng).expect("templates"), None)
        };
        let mut out = SynthSentence {
            tokens: Vec::new(),
            tags: Vec::new(),
        };
        for slot in template.split(' ') {
            let (text, label) = match slot {
                "{PER}" => (self.entity(Kind::Per), Some(Kind::Per)),
                "{LOC}" => (self.entity(Kind::Loc), Some(Kind::Loc)),
                "{ORG}" => (self.entity(Kind::Org), Some(Kind::Org)),
                "{SUR}" => (self.pick(SURNAMES).to_string(), Some(Kind::Per)),
                "{DAY}" => (self.pick(DAYS).to_string(), None),
                "{MONTH}" => (self.pick(MONTHS).to_string(), None),
                "{AMB}" => {
                    let k = amb_kind.expect("ambiguous template");
                    if self.rng.gen::<f64>() < self.cfg.entity_rate {
                        (self.entity(k), Some(k))
                    } else {
                        (self.noun(k), None)
                    }
                }
                word => (word.to_string(), None),
            };
            for (i, tok) in text.split(' ').enumerate() {
                out.tokens.push(tok.to_string());
                out.tags.push(match label {
                    None => "O".to_string(),
                    Some(k) if i == 0 => format!("B-{}", k.label()),
                    Some(k) => format!("I-{}", k.label()),
                });
            }
        }
        out
    }
}

/// `n` sentences, deterministic in `cfg`.
pub fn generate(n: usize, cfg: SynthConfig) -> Vec<SynthSentence> {
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
    };
    (0..n).map(|_| g.sentence()).collect()
}

/// Cased training text for a truecaser over the whole lexicon.
pub fn truecaser_corpus(n: usize, seed: u64) -> Vec<String> {
    generate(n, SynthConfig::new(seed, Split::All)).iter().map(SynthSentence::text).collect()
}

/// Tagged sentences; ambiguous templates are more frequent than in the
/// truecaser corpus.
pub fn ner_dataset(n: usize, split: Split, seed: u64) -> Vec<NerExample> {
    let cfg = SynthConfig {
        ambiguous_rate: 0.7,
        ..SynthConfig::new(seed, split)
    };
    generate(n, cfg).iter().map(SynthSentence::to_example).collect()
}

/// Seeds and sizes of the bundled fixture files.
pub mod fixtures {
    use super::*;
    use crate::error::Result;
    use std::path::Path;

    pub const TRUECASER_TRAIN: (&str, usize, u64) = ("truecaser_train.txt", 600, 101);
    pub const TRUECASER_TEST: (&str, usize, u64) = ("truecaser_test.txt", 100, 102);
    pub const RAW_CORPUS: (&str, usize, u64) = ("raw_corpus.txt", 300, 103);
    pub const NER_TRAIN: (&str, usize, u64) = ("ner_train.conll", 300, 201);
    pub const NER_DEV: (&str, usize, u64) = ("ner_dev.conll", 100, 202);
    pub const NER_TEST: (&str, usize, u64) = ("ner_test.conll", 400, 203);

    /// File name and contents of every fixture.
    pub fn render() -> Result<Vec<(&'static str, String)>> {
        let lines = |v: Vec<String>| v.iter().map(|s| format!("{s}\n")).collect::<String>();
        let conll = |d: &[NerExample]| -> Result<String> {
            let mut buf = Vec::new();
            crate::ner::data::write_conll_to(&mut buf, d)?;
            Ok(String::from_utf8(buf).expect("utf-8 tokens"))
        };
        let (name, n, seed) = RAW_CORPUS;
        let raw = generate(n, SynthConfig::new(seed, Split::All))
            .iter()
            .enumerate()
            .map(|(i, s)| if i % 10 == 9 { s.headline_text() } else { s.raw_text() })
            .collect();
        Ok(vec![
            (TRUECASER_TRAIN.0, lines(truecaser_corpus(TRUECASER_TRAIN.1, TRUECASER_TRAIN.2))),
            (TRUECASER_TEST.0, lines(truecaser_corpus(TRUECASER_TEST.1, TRUECASER_TEST.2))),
            (name, lines(raw)),
            (NER_TRAIN.0, conll(&ner_dataset(NER_TRAIN.1, Split::Seen, NER_TRAIN.2))?),
            (NER_DEV.0, conll(&ner_dataset(NER_DEV.1, Split::All, NER_DEV.2))?),
            (NER_TEST.0, conll(&ner_dataset(NER_TEST.1, Split::All, NER_TEST.2))?),
        ])
    }

    pub fn write(dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        for (name, body) in render()? {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| crate::Error::io(&p, e))?;
        }
        Ok(())
    }
}
