use proptest::prelude::*;
use tcner::metrics::{bio_decode, char_f1, span_f1, PrfScore, Span};

#[test]
fn char_f1_counts_alphabetic_positions() {
    let s = char_f1(&["Alan met Bo, in NASA 2"], &["alan Met Bo, in NaSA 2"]).unwrap();
    assert_eq!((s.tp, s.fp, s.fn_), (4, 1, 2));
    assert!((s.precision() - 0.8).abs() < 1e-12);
    assert!((s.recall() - 4.0 / 6.0).abs() < 1e-12);
    let f = 2.0 * 0.8 * (4.0 / 6.0) / (0.8 + 4.0 / 6.0);
    assert!((s.f1() - f).abs() < 1e-10);
}

#[test]
fn char_f1_rejects_misaligned_text() {
    assert!(char_f1(&["abc"], &["abd"]).is_err());
    assert!(char_f1(&["abc"], &["ab"]).is_err());
    assert!(char_f1(&["a", "b"], &["a"]).is_err());
}

#[test]
fn empty_scores_are_zero() {
    let s = PrfScore::default();
    assert_eq!((s.precision(), s.recall(), s.f1()), (0.0, 0.0, 0.0));
}

#[test]
fn bio_decoding_cases() {
    let d = |t: &[&str]| bio_decode(t).unwrap();
    assert_eq!(d(&["B-PER", "I-PER", "O", "B-LOC"]), vec![Span::new(0, 2, "PER"), Span::new(3, 4, "LOC")]);
    assert_eq!(d(&["I-ORG", "I-ORG"]), vec![Span::new(0, 2, "ORG")]);
    assert_eq!(d(&["B-PER", "I-LOC"]), vec![Span::new(0, 1, "PER"), Span::new(1, 2, "LOC")]);
    assert_eq!(d(&["B-PER", "B-PER"]), vec![Span::new(0, 1, "PER"), Span::new(1, 2, "PER")]);
    assert!(bio_decode(&["X-PER"]).is_err());
    assert!(bio_decode(&["B-"]).is_err());
}

#[test]
fn span_f1_by_hand() {
    let gold = vec![vec![Span::new(0, 2, "PER"), Span::new(3, 4, "LOC")], vec![]];
    let pred = vec![vec![Span::new(0, 2, "PER"), Span::new(3, 4, "ORG")], vec![Span::new(0, 1, "LOC")]];
    let s = span_f1(&gold, &pred).unwrap();
    assert_eq!((s.tp, s.fp, s.fn_), (1, 2, 1));
    assert!(s.kv_block().starts_with("precision=33.3\nrecall=50.0\nf1=40.0\n"));
}

fn tag() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("O".to_string()),
        prop::sample::select(vec!["B-PER", "I-PER", "B-LOC", "I-LOC"]).prop_map(String::from),
    ]
}

fn reference_decode(tags: &[String]) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    for (i, t) in tags.iter().enumerate() {
        if t == "O" {
            continue;
        }
        let (bi, label) = t.split_once('-').unwrap();
        let extend = bi == "I" && i > 0 && tags[i - 1] != "O" && tags[i - 1][2..] == *label
            && out.last().is_some_and(|s| s.end == i);
        if extend {
            out.last_mut().unwrap().end = i + 1;
        } else {
            out.push(Span::new(i, i + 1, label));
        }
    }
    out
}

proptest! {
    #[test]
    fn decode_matches_reference(tags in prop::collection::vec(tag(), 0..12)) {
        prop_assert_eq!(bio_decode(&tags).unwrap(), reference_decode(&tags));
    }

    #[test]
    fn identical_spans_score_perfectly(tags in prop::collection::vec(prop::collection::vec(tag(), 0..8), 1..5)) {
        let spans: Vec<Vec<Span>> = tags.iter().map(|t| bio_decode(t).unwrap()).collect();
        let s = span_f1(&spans, &spans).unwrap();
        prop_assert_eq!(s.fp + s.fn_, 0);
        if s.tp > 0 {
            prop_assert!((s.f1() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn char_f1_bounded_and_symmetric_in_counts(a in "[a-zA-Z ,]{0,30}", flips in prop::collection::vec(any::<bool>(), 30)) {
        let b: String = a.chars().zip(flips.iter().cycle()).map(|(c, &f)| {
            if f { if c.is_uppercase() { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() } } else { c }
        }).collect();
        let s = char_f1(&[&a], &[&b]).unwrap();
        let r = char_f1(&[&b], &[&a]).unwrap();
        prop_assert_eq!((s.tp, s.fp, s.fn_), (r.tp, r.fn_, r.fp));
        prop_assert!((0.0..=1.0).contains(&s.f1()));
    }
}
