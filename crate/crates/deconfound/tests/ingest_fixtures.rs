//! Schema tests against the committed 20-row fixture files. The
//! fixtures stand in for the real benchmark tables, which are fetched
//! separately; they exercise column mapping and the count gates.

use std::path::PathBuf;

use deconfound::error::Error;
use deconfound::ingest::{load_ihdp, load_jobs, parse_ihdp_rows, parse_jobs_rows};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read_rows(name: &str, skip_header: bool) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    text.lines()
        .skip(usize::from(skip_header))
        .map(|line| line.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect()
}

#[test]
fn ihdp_fixture_maps_per_the_column_manifest() {
    let rows = read_rows("ihdp_schema.csv", false);
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0].len(), 30);
    let b = parse_ihdp_rows(&rows).unwrap();
    assert_eq!(b.n_features(), 25);
    // Row 0 is treated: factual feeds the treated potential outcome.
    assert_eq!(b.treatment[0], 1);
    assert_eq!(b.outcome_y1.as_ref().unwrap()[0], 0.0);
    assert_eq!(b.outcome_y0.as_ref().unwrap()[0], 10.0);
    // Row 1 is control: factual feeds the control potential outcome.
    assert_eq!(b.outcome_y0.as_ref().unwrap()[1], 1.0);
    assert_eq!(b.outcome_y1.as_ref().unwrap()[1], 11.0);
    // Covariates start at file column 6.
    assert_eq!(b.covariates[(0, 0)], 0.0);
    assert_eq!(b.covariates[(0, 1)], 0.142857);
    assert_eq!(b.covariates[(1, 0)], 14.285714);
}

#[test]
fn ihdp_fixture_fails_the_count_gate() {
    // 20 rows is not a realization; the loader must say so.
    let err = load_ihdp(&fixture("ihdp_schema.csv"), 1, false);
    assert!(matches!(err, Err(Error::Count(_))), "{err:?}");
}

#[test]
fn jobs_fixture_resolves_aliases_and_order() {
    let text = std::fs::read_to_string(fixture("jobs_schema.csv")).unwrap();
    let header: Vec<String> = text
        .lines()
        .next()
        .unwrap()
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = read_rows("jobs_schema.csv", true);
    assert_eq!(rows.len(), 20);
    let b = parse_jobs_rows(&header, &rows).unwrap();
    assert_eq!(b.n_features(), 8);
    // Aliased names come back canonical, index column skipped.
    assert_eq!(b.feature_names[3], "hisp");
    assert_eq!(b.feature_names[5], "nodegr");
    assert_eq!(b.arm_count(1), 6);
    assert_eq!(b.covariates[(0, 0)], 20.0);
    assert_eq!(b.outcome_factual[2], 22.0);
}

#[test]
fn jobs_fixture_fails_the_count_gate() {
    let err = load_jobs(&fixture("jobs_schema.csv"), false);
    assert!(matches!(err, Err(Error::Count(_))), "{err:?}");
}
