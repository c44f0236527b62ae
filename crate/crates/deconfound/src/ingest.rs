//! Loaders for the two benchmark CSVs.
//!
//! Files are not vendored; `scripts/fetch_data.sh` downloads them. Every
//! loader is split into a parse layer (column mapping, domain checks)
//! and a count layer (expected row and treated totals), so the committed
//! 20-row fixtures can exercise the schema without the real files.
//!
//! Infant-development benchmark layout, in column order:
//! `treatment, y_factual, y_cfactual, mu0, mu1, x1..x25` (30 columns,
//! headerless in the canonical distribution; a header row is accepted
//! and checked when present). The noiseless outcome means `mu0`/`mu1`
//! are dropped; potential outcomes come from the factual and
//! counterfactual columns routed by the treatment arm. One file may
//! hold a single realization (747 rows) or several concatenated
//! (747 times m rows); a directory works too, holding
//! `ihdp_npci_<index>.csv` per realization.
//!
//! Job-training benchmark layout: header required unless the file has
//! exactly the canonical 10 columns in order
//! `treat, age, educ, black, hisp, married, nodegr, re74, re75, re78`.
//! Header names are matched case-insensitively with the common aliases
//! (`treatment`/`t`, `hispan`/`hispanic`, `nodegree`, `education`), and
//! leading row-index columns are skipped.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::data::{DatasetBundle, Standardizer};
use crate::error::{Error, Result};

pub const IHDP_ROWS: usize = 747;
pub const IHDP_TREATED: usize = 139;
pub const IHDP_COVARIATES: usize = 25;
pub const IHDP_COLUMNS: usize = 5 + IHDP_COVARIATES;

pub const JOBS_ROWS: usize = 614;
pub const JOBS_TREATED: usize = 185;
pub const JOBS_COVARIATES: [&str; 8] = [
    "age", "educ", "black", "hisp", "married", "nodegr", "re74", "re75",
];
pub const JOBS_OUTCOME: &str = "re78";

/// One simulated-outcome realization of the infant-development data.
#[derive(Debug, Clone)]
pub struct IhdpRealization {
    /// 1-based index of the realization the bundle came from.
    pub realization_index: usize,
    pub bundle: DatasetBundle,
}

/// The job-training table; no potential outcomes exist for it.
#[derive(Debug, Clone)]
pub struct JobsTable {
    pub bundle: DatasetBundle,
}

/// A CSV parsed into numbers, with the header row split off when the
/// first record does not parse as numeric.
struct NumericCsv {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok()
}

fn read_numeric_csv(path: &Path) -> Result<NumericCsv> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let cells: Vec<&str> = record.iter().collect();
        if cells.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let parsed: Option<Vec<f64>> = cells.iter().map(|c| parse_cell(c)).collect();
        match parsed {
            Some(nums) => {
                let w = *width.get_or_insert(nums.len());
                if nums.len() != w {
                    return Err(Error::Schema(format!(
                        "{}: record {} has {} fields, earlier records {w}",
                        path.display(),
                        idx + 1,
                        nums.len()
                    )));
                }
                rows.push(nums);
            }
            None if idx == 0 => {
                header = Some(cells.iter().map(|c| c.trim().to_string()).collect());
            }
            None => {
                return Err(Error::Schema(format!(
                    "{}: record {} has a non-numeric field",
                    path.display(),
                    idx + 1
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }
    if let (Some(h), Some(w)) = (&header, width) {
        if h.len() != w {
            return Err(Error::Schema(format!(
                "{}: header has {} fields, data rows {w}",
                path.display(),
                h.len()
            )));
        }
    }
    Ok(NumericCsv { header, rows })
}

fn expect_binary(v: f64, what: &str, row: usize) -> Result<u8> {
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::Schema(format!(
            "{what} must be 0 or 1, row {row} has {v}"
        )))
    }
}

fn ihdp_manifest_names() -> Vec<String> {
    let mut names: Vec<String> = ["treatment", "y_factual", "y_cfactual", "mu0", "mu1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((1..=IHDP_COVARIATES).map(|j| format!("x{j}")));
    names
}

/// Maps one realization's rows into a bundle. Count checks live in
/// [`load_ihdp`]; this layer only enforces shape and domains.
pub fn parse_ihdp_rows(rows: &[Vec<f64>]) -> Result<DatasetBundle> {
    if rows.is_empty() {
        return Err(Error::Schema("no rows in realization".into()));
    }
    if rows[0].len() != IHDP_COLUMNS {
        return Err(Error::Schema(format!(
            "expected {IHDP_COLUMNS} columns (treatment, factual, counterfactual, \
             two outcome means, {IHDP_COVARIATES} covariates), found {}",
            rows[0].len()
        )));
    }
    let n = rows.len();
    let mut treatment = Vec::with_capacity(n);
    let mut factual = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let t = expect_binary(row[0], "treatment", i + 1)?;
        treatment.push(t);
        factual.push(row[1]);
        // Counterfactual column completes the potential-outcome pair.
        if t == 1 {
            y1.push(row[1]);
            y0.push(row[2]);
        } else {
            y0.push(row[1]);
            y1.push(row[2]);
        }
    }
    let covariates = DMatrix::from_fn(n, IHDP_COVARIATES, |i, j| rows[i][5 + j]);
    let names = (1..=IHDP_COVARIATES).map(|j| format!("x{j}")).collect();
    let mut bundle = DatasetBundle::binary(covariates, treatment, factual, names);
    bundle.outcome_y0 = Some(y0);
    bundle.outcome_y1 = Some(y1);
    bundle.validate()
}

fn check_ihdp_header(header: &[String], path: &Path) -> Result<()> {
    let expect = ihdp_manifest_names();
    if header.len() != expect.len() {
        return Err(Error::Schema(format!(
            "{}: header has {} fields, manifest {}",
            path.display(),
            header.len(),
            expect.len()
        )));
    }
    for (got, want) in header.iter().zip(&expect) {
        if !got.eq_ignore_ascii_case(want) {
            return Err(Error::Schema(format!(
                "{}: header field '{got}' does not match manifest '{want}'",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Loads one 1-based realization. `path` may be a single-realization
/// file, a concatenation of realizations, or a directory of
/// `ihdp_npci_<index>.csv` files. `standardize` z-scores continuous
/// covariates with whole-table statistics.
pub fn load_ihdp(
    path: &Path,
    realization_index: usize,
    standardize: bool,
) -> Result<IhdpRealization> {
    if realization_index == 0 {
        return Err(Error::MissingRealization(
            "realization indices are 1-based; 0 is not a realization".into(),
        ));
    }
    let file: PathBuf = if path.is_dir() {
        let candidate = path.join(format!("ihdp_npci_{realization_index}.csv"));
        if !candidate.is_file() {
            return Err(Error::MissingRealization(format!(
                "no file {} for realization {realization_index}",
                candidate.display()
            )));
        }
        candidate
    } else {
        path.to_path_buf()
    };

    let parsed = read_numeric_csv(&file)?;
    if let Some(h) = &parsed.header {
        check_ihdp_header(h, &file)?;
    }
    let total = parsed.rows.len();
    if total % IHDP_ROWS != 0 {
        return Err(Error::Count(format!(
            "{}: {total} rows is not a whole number of {IHDP_ROWS}-row realizations",
            file.display()
        )));
    }
    let available = total / IHDP_ROWS;
    // A directory file holds exactly its own realization.
    let slice_index = if path.is_dir() {
        if available != 1 {
            return Err(Error::Count(format!(
                "{}: per-realization file holds {available} realizations",
                file.display()
            )));
        }
        1
    } else {
        if realization_index > available {
            return Err(Error::MissingRealization(format!(
                "{}: realization {realization_index} of {available}",
                file.display()
            )));
        }
        realization_index
    };
    let start = (slice_index - 1) * IHDP_ROWS;
    let mut bundle = parse_ihdp_rows(&parsed.rows[start..start + IHDP_ROWS])?;
    let treated = bundle.arm_count(1);
    if treated != IHDP_TREATED {
        return Err(Error::Count(format!(
            "{}: realization {realization_index} has {treated} treated, expected {IHDP_TREATED}",
            file.display()
        )));
    }
    if standardize {
        bundle.covariates =
            Standardizer::fit_all(&bundle.covariates)?.transform(&bundle.covariates)?;
    }
    Ok(IhdpRealization {
        realization_index,
        bundle,
    })
}

fn jobs_column_role(name: &str) -> Option<&'static str> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "treat" | "treatment" | "t" => Some("treat"),
        "age" => Some("age"),
        "educ" | "education" => Some("educ"),
        "black" => Some("black"),
        "hisp" | "hispan" | "hispanic" => Some("hisp"),
        "married" => Some("married"),
        "nodegr" | "nodegree" => Some("nodegr"),
        "re74" => Some("re74"),
        "re75" => Some("re75"),
        "re78" => Some("re78"),
        "" | "id" | "data_id" | "rownames" | "index" | "unnamed: 0" => Some(""),
        _ => None,
    }
}

/// Maps named columns into a bundle; header aliases are resolved and
/// binary indicator columns are domain-checked.
pub fn parse_jobs_rows(header: &[String], rows: &[Vec<f64>]) -> Result<DatasetBundle> {
    if let Some(name) = header.iter().find(|n| jobs_column_role(n).is_none()) {
        return Err(Error::Schema(format!(
            "unrecognized job-training column '{name}'"
        )));
    }
    let find = |want: &str| -> Result<usize> {
        let mut hit = None;
        for (i, name) in header.iter().enumerate() {
            if jobs_column_role(name) == Some(want) {
                if hit.is_some() {
                    return Err(Error::Schema(format!(
                        "duplicate job-training column '{name}'"
                    )));
                }
                hit = Some(i);
            }
        }
        hit.ok_or_else(|| Error::Schema(format!("missing job-training column '{want}'")))
    };

    let t_col = find("treat")?;
    let y_col = find(JOBS_OUTCOME)?;
    let mut cov_cols = Vec::with_capacity(8);
    for want in JOBS_COVARIATES {
        cov_cols.push(find(want)?);
    }

    if rows.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    let n = rows.len();
    let width = rows[0].len();
    if width != header.len() {
        return Err(Error::Schema(format!(
            "data rows have {width} fields, header {}",
            header.len()
        )));
    }
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        treatment.push(expect_binary(row[t_col], "treat", i + 1)?);
        outcome.push(row[y_col]);
        for (want, &col) in JOBS_COVARIATES.iter().zip(&cov_cols) {
            if matches!(*want, "black" | "hisp" | "married" | "nodegr") {
                expect_binary(row[col], want, i + 1)?;
            }
        }
    }
    let covariates = DMatrix::from_fn(n, 8, |i, j| rows[i][cov_cols[j]]);
    let names = JOBS_COVARIATES.iter().map(|s| s.to_string()).collect();
    DatasetBundle::binary(covariates, treatment, outcome, names).validate()
}

/// Loads the job-training table; `standardize` z-scores the continuous
/// covariates (binary indicators pass through).
pub fn load_jobs(path: &Path, standardize: bool) -> Result<JobsTable> {
    let parsed = read_numeric_csv(path)?;
    let header = match parsed.header {
        Some(h) => h,
        None => {
            // Canonical column order is the only headerless layout.
            if parsed.rows[0].len() != 10 {
                return Err(Error::Schema(format!(
                    "{}: headerless job-training file needs the canonical 10 columns, \
                     found {}",
                    path.display(),
                    parsed.rows[0].len()
                )));
            }
            let mut names = vec!["treat".to_string()];
            names.extend(JOBS_COVARIATES.iter().map(|s| s.to_string()));
            names.push(JOBS_OUTCOME.to_string());
            names
        }
    };
    let mut bundle = parse_jobs_rows(&header, &parsed.rows)?;
    if bundle.n_samples() != JOBS_ROWS {
        return Err(Error::Count(format!(
            "{}: {} rows, expected {JOBS_ROWS}",
            path.display(),
            bundle.n_samples()
        )));
    }
    let treated = bundle.arm_count(1);
    if treated != JOBS_TREATED {
        return Err(Error::Count(format!(
            "{}: {treated} treated, expected {JOBS_TREATED}",
            path.display()
        )));
    }
    if standardize {
        bundle.covariates =
            Standardizer::fit_all(&bundle.covariates)?.transform(&bundle.covariates)?;
    }
    Ok(JobsTable { bundle })
}
