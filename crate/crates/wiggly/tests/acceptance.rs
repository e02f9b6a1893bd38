//! End-to-end acceptance gate: runs the built-in verification suite with a
//! fixed seed and prints one status line per criterion. The test fails if any
//! criterion fails.

#[test]
fn acceptance_suite_all_green() {
    let outcomes = wiggly::selftest::run_all(20260815);
    let mut all_passed = true;
    for outcome in &outcomes {
        println!("{}", outcome.line());
        all_passed &= outcome.passed;
    }
    assert!(all_passed, "at least one acceptance criterion failed (see lines above)");
}
