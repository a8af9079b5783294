//! Truth table for the augmented-model observability predicate.

#[path = "support/checks.rs"]
mod checks;

use checks::{sensing, OBSERVABILITY_TABLE};
use physid_core::recovery::check_observability;

#[test]
fn listed_cases() {
    for (n, r, m, kind, expect) in OBSERVABILITY_TABLE {
        let v = check_observability(n, r, m, &sensing(kind, m, n));
        assert_eq!(v.observable, expect, "n={n} r={r} m={m} {kind:?}: {}", v.reason);
    }
}

#[test]
fn full_grid_follows_the_three_cases() {
    let bad = checks::observability_mismatches();
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}
