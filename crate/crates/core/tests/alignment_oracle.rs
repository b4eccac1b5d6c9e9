use procmine_testkit::alignment_instance;

#[test]
fn astar_matches_exhaustive_search() {
    let results: Vec<Result<(u64, u64), String>> = (0..250).map(alignment_instance).collect();
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
    let deviating = results.iter().filter(|r| matches!(r, Ok((c, _)) if *c > 0)).count();
    assert!(deviating > 100, "only {deviating} instances with deviations");
}
