//! Character-level truecasing scores, BIO span decoding and exact-match span
//! scores.

use std::fmt;

use crate::error::{Error, Result};
use crate::text::lower_char;

/// Precision, recall and F1 in `[0, 1]` with the raw counts they came from.
/// Undefined ratios (0/0) are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrfScore {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl PrfScore {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        PrfScore { tp, fp, fn_ }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn merge(&mut self, other: PrfScore) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Machine-readable `key=value` block; scores ×100 to one decimal.
    pub fn kv_block(&self) -> String {
        format!(
            "precision={:.1}\nrecall={:.1}\nf1={:.1}\ntp={}\nfp={}\nfn={}\n",
            100.0 * self.precision(),
            100.0 * self.recall(),
            100.0 * self.f1(),
            self.tp,
            self.fp,
            self.fn_
        )
    }

    /// Human-readable one-row table.
    pub fn table(&self, label: &str) -> String {
        format!(
            "{:<12} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}\n{:<12} {:>9.1} {:>9.1} {:>9.1} {:>7} {:>7} {:>7}\n",
            "", "precision", "recall", "f1", "tp", "fp", "fn",
            label,
            100.0 * self.precision(),
            100.0 * self.recall(),
            100.0 * self.f1(),
            self.tp,
            self.fp,
            self.fn_
        )
    }
}

impl fmt::Display for PrfScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={:.1} R={:.1} F1={:.1}",
            100.0 * self.precision(),
            100.0 * self.recall(),
            100.0 * self.f1()
        )
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Character F1 with uppercase as the positive class, counted over
/// alphabetic positions. `gold` and `pred` are parallel lines that may
/// differ only in case.
pub fn char_f1<G, P>(gold: &[G], pred: &[P]) -> Result<PrfScore>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "{} gold lines but {} predicted lines",
            gold.len(),
            pred.len()
        )));
    }
    let mut score = PrfScore::default();
    for (line, (g, p)) in gold.iter().zip(pred).enumerate() {
        score.merge(char_f1_line(g.as_ref(), p.as_ref()).map_err(|e| match e {
            Error::Alignment(m) => Error::Alignment(format!("line {}: {m}", line + 1)),
            e => e,
        })?);
    }
    Ok(score)
}

fn char_f1_line(gold: &str, pred: &str) -> Result<PrfScore> {
    let mut score = PrfScore::default();
    let mut g_it = gold.chars();
    let mut p_it = pred.chars();
    let mut pos = 0usize;
    loop {
        match (g_it.next(), p_it.next()) {
            (None, None) => break,
            (Some(g), Some(p)) => {
                if lower_char(g) != lower_char(p) {
                    return Err(Error::Alignment(format!(
                        "character {pos}: gold {g:?} vs predicted {p:?}"
                    )));
                }
                if g.is_alphabetic() {
                    match (g.is_uppercase(), p.is_uppercase()) {
                        (true, true) => score.tp += 1,
                        (false, true) => score.fp += 1,
                        (true, false) => score.fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            _ => {
                return Err(Error::Alignment(format!(
                    "length mismatch at character {pos}"
                )))
            }
        }
        pos += 1;
    }
    Ok(score)
}

/// An entity mention: tokens `start..end` of type `label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.label, self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bio<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Result<Bio<'_>> {
    if tag == "O" {
        return Ok(Bio::Outside);
    }
    match tag.split_once('-') {
        Some(("B", t)) if !t.is_empty() => Ok(Bio::Begin(t)),
        Some(("I", t)) if !t.is_empty() => Ok(Bio::Inside(t)),
        _ => Err(Error::Input(format!("malformed BIO tag {tag:?}"))),
    }
}

/// Decodes BIO tags into maximal spans. An `I-t` that follows `O`, the
/// sentence start, or a span of another type opens a new span.
pub fn bio_decode<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = parse_tag(tag.as_ref())?;
        let continues = matches!((tag, open), (Bio::Inside(t), Some((_, o))) if t == o);
        if continues {
            continue;
        }
        if let Some((s, label)) = open.take() {
            spans.push(Span::new(s, i, label));
        }
        match tag {
            Bio::Begin(t) | Bio::Inside(t) => open = Some((i, t)),
            Bio::Outside => {}
        }
    }
    if let Some((s, label)) = open {
        spans.push(Span::new(s, tags.len(), label));
    }
    Ok(spans)
}

/// Micro-averaged exact-match span scores over sentences. Each gold span can
/// be matched at most once.
pub fn span_f1(gold: &[Vec<Span>], pred: &[Vec<Span>]) -> Result<PrfScore> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut score = PrfScore::default();
    for (g, p) in gold.iter().zip(pred) {
        let mut used = vec![false; g.len()];
        for span in p {
            match (0..g.len()).find(|&k| !used[k] && g[k] == *span) {
                Some(k) => {
                    used[k] = true;
                    score.tp += 1;
                }
                None => score.fp += 1,
            }
        }
        score.fn_ += used.iter().filter(|u| !**u).count() as u64;
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn char_f1_examples() {
        let s = char_f1(&["Alan ran"], &["Alan ran"]).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 0, 0));
        assert_eq!(s.f1(), 1.0);

        let s = char_f1(&["Alan"], &["alan"]).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (0, 0, 1));
        assert_eq!(s.f1(), 0.0);

        let s = char_f1(&["Al An"], &["al An"]).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 0, 1));
        assert!(s.kv_block().contains("precision=100.0\nrecall=50.0\nf1=66.7\n"));
    }

    #[test]
    fn char_f1_rejects_misaligned_text() {
        assert!(matches!(char_f1(&["abc"], &["abd"]), Err(Error::Alignment(_))));
        assert!(matches!(char_f1(&["abc"], &["ab"]), Err(Error::Alignment(_))));
    }

    #[test]
    fn bio_examples() {
        assert_eq!(bio_decode(&["B-PER", "I-PER", "O"]).unwrap(), vec![Span::new(0, 2, "PER")]);
        assert_eq!(bio_decode(&["O", "I-LOC"]).unwrap(), vec![Span::new(1, 2, "LOC")]);
        assert_eq!(
            bio_decode(&["B-PER", "B-ORG", "I-ORG"]).unwrap(),
            vec![Span::new(0, 1, "PER"), Span::new(1, 3, "ORG")]
        );
        assert_eq!(
            bio_decode(&["B-PER", "I-LOC"]).unwrap(),
            vec![Span::new(0, 1, "PER"), Span::new(1, 2, "LOC")]
        );
        assert!(bio_decode::<&str>(&[]).unwrap().is_empty());
        assert!(matches!(bio_decode(&["X-PER"]), Err(Error::Input(_))));
        assert!(matches!(bio_decode(&["B-"]), Err(Error::Input(_))));
    }

    #[test]
    fn span_f1_examples() {
        let g = vec![vec![Span::new(0, 2, "PER")]];
        assert_eq!(span_f1(&g, &g).unwrap().f1(), 1.0);

        let p = vec![vec![Span::new(0, 2, "PER")]];
        let g = vec![vec![Span::new(0, 3, "PER")]];
        let s = span_f1(&g, &p).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (0, 1, 1));

        let g = vec![vec![Span::new(0, 1, "PER")], vec![Span::new(2, 4, "ORG")]];
        let p = vec![vec![Span::new(0, 1, "PER")], vec![Span::new(2, 3, "ORG")]];
        let s = span_f1(&g, &p).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 1, 1));
        assert!(s.kv_block().starts_with("precision=50.0\nrecall=50.0\nf1=50.0\n"));
    }

    #[test]
    fn duplicate_predictions_match_once() {
        let g = vec![vec![Span::new(0, 1, "PER")]];
        let p = vec![vec![Span::new(0, 1, "PER"), Span::new(0, 1, "PER")]];
        let s = span_f1(&g, &p).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 1, 0));
    }

    fn arb_tags() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(
            prop_oneof![
                Just("O".to_string()),
                Just("B-PER".to_string()),
                Just("I-PER".to_string()),
                Just("B-LOC".to_string()),
                Just("I-LOC".to_string()),
            ],
            0..20,
        )
    }

    proptest! {
        #[test]
        fn decoded_spans_are_sorted_and_disjoint(tags in arb_tags()) {
            let spans = bio_decode(&tags).unwrap();
            for s in &spans {
                prop_assert!(s.start < s.end && s.end <= tags.len());
            }
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
        }

        #[test]
        fn swapping_gold_and_pred_swaps_p_and_r(a in "[a-zA-Z ]{0,30}", flips in prop::collection::vec(any::<bool>(), 30)) {
            let b: String = a.chars().zip(flips.iter().cycle()).map(|(c, &f)| {
                if f { if c.is_uppercase() { lower_char(c) } else { crate::text::upper_char(c) } } else { c }
            }).collect();
            let ab = char_f1(&[&a], &[&b]).unwrap();
            let ba = char_f1(&[&b], &[&a]).unwrap();
            prop_assert_eq!(ab.precision(), ba.recall());
            prop_assert_eq!(ab.recall(), ba.precision());
        }

        #[test]
        fn span_f1_ignores_order(tags in arb_tags(), seed in any::<u64>()) {
            let gold = vec![bio_decode(&tags).unwrap()];
            let mut shuffled = gold[0].clone();
            let k = if shuffled.is_empty() { 0 } else { (seed as usize) % shuffled.len() };
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(span_f1(&gold, &gold).unwrap(), span_f1(&gold, &[shuffled]).unwrap());
        }
    }
}
