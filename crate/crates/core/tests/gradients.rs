mod common;

use common::gradient_mismatches;
use uisrnn::net::NetDims;

#[test]
fn network_and_variance_gradients_match_central_differences() {
    let dims = NetDims { input: 3, hidden: 4, fc: 4 };
    for seed in 0..20 {
        let bad = gradient_mismatches(1000 + seed, dims, 6, 3, false);
        assert!(bad.is_empty(), "{}", bad.join("\n"));
    }
}

#[test]
fn rectified_output_gradients_match_central_differences() {
    let dims = NetDims { input: 2, hidden: 3, fc: 3 };
    for seed in 0..5 {
        let bad = gradient_mismatches(77 + seed, dims, 5, 2, true);
        assert!(bad.is_empty(), "{}", bad.join("\n"));
    }
}

#[test]
fn longer_sequences_with_many_speakers() {
    let dims = NetDims { input: 2, hidden: 3, fc: 2 };
    for seed in 0..3 {
        let bad = gradient_mismatches(500 + seed, dims, 12, 5, false);
        assert!(bad.is_empty(), "{}", bad.join("\n"));
    }
}
