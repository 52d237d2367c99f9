mod common;

use common::rng;
use rand::Rng;
use uisrnn::metrics::{der, labels_to_timeline, parse_rttm, scored_regions, write_rttm, Segment, Timeline};
use uisrnn::Error;

fn random_timeline<R: Rng>(r: &mut R, overlap: bool) -> Timeline {
    let mut t = 0.0;
    let mut segments = Vec::new();
    for _ in 0..r.random_range(1..10) {
        let len = r.random_range(0.3..3.0);
        let speaker = ["a", "b", "c"][r.random_range(0..3)];
        segments.push(Segment::new(t, t + len, speaker).unwrap());
        if overlap && r.random_bool(0.3) {
            segments.push(Segment::new(t + len / 2.0, t + len * 1.5, "o").unwrap());
        }
        t += len;
    }
    Timeline::new("u", segments)
}

fn scored_us(reference: &Timeline, collar: f64) -> i64 {
    scored_regions(reference, collar, true).unwrap().iter().map(|i| i.duration_us()).sum()
}

#[test]
fn scored_time_shrinks_as_the_collar_grows() {
    let mut r = rng(1);
    for _ in 0..100 {
        let reference = random_timeline(&mut r, true);
        let mut previous = i64::MAX;
        for collar in [0.0, 0.05, 0.1, 0.25, 0.5, 1.0] {
            let now = scored_us(&reference, collar);
            assert!(now <= previous);
            previous = now;
        }
    }
}

#[test]
fn der_is_invariant_under_hypothesis_renaming() {
    let mut r = rng(2);
    for _ in 0..100 {
        let reference = random_timeline(&mut r, true);
        let hypothesis = random_timeline(&mut r, false);
        let Ok(base) = der(&reference, &hypothesis, 0.1, true) else { continue };
        let renamed = hypothesis.rename(|s| format!("{s}{s}-x"));
        assert_eq!(der(&reference, &renamed, 0.1, true).unwrap().der, base.der);
    }
}

#[test]
fn decoded_labels_round_trip_through_rttm() {
    let labels = uisrnn::LabelSequence::new(vec![1, 1, 2, 3, 2, 2, 1]).unwrap();
    let a = labels_to_timeline(&labels, 0.4, "first").unwrap();
    let b = labels_to_timeline(&uisrnn::LabelSequence::new(vec![1, 2]).unwrap(), 0.25, "second").unwrap();
    let text = write_rttm([&a, &b]);
    assert!(text.lines().next().unwrap().starts_with("SPEAKER first 1 0.000000 0.800000 <NA> <NA> 1 <NA> <NA>"));
    assert_eq!(parse_rttm(&text, "x.rttm").unwrap(), vec![a, b]);
}

#[test]
fn nothing_to_score_is_an_error() {
    let reference = Timeline::new("u", vec![Segment::new(0.0, 0.4, "a").unwrap()]);
    assert!(matches!(der(&reference, &reference, 0.25, true), Err(Error::NothingToScore)));
}

#[test]
fn malformed_rttm_names_the_line() {
    let text = "SPEAKER u 1 0.0 1.0 <NA> <NA> a <NA> <NA>\nSPEAKER u 1 zero 1.0 <NA> <NA> b <NA> <NA>\n";
    let err = parse_rttm(text, "bad.rttm").unwrap_err().to_string();
    assert!(err.starts_with("bad.rttm:2:"), "{err}");
}
