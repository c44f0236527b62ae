//! Self-contained SVG renderings of a report's diagnostics. Pure
//! string builders: fixed canvas sizes, a fixed palette, and all
//! coordinates written with four decimals, so the same report always
//! renders byte-identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::harness::cvstudy::CvOutcome;
use crate::harness::run::{BalanceAggregate, EcdfRow, UNWEIGHTED_LABEL};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;

/// Imbalance level conventionally read as acceptable.
const SMD_THRESHOLD: f64 = 10.0;

fn palette(scheme: &str) -> &'static str {
    match scheme {
        "dfw" => "#1f77b4",
        "ipw" => "#ff7f0e",
        "cbps" => "#2ca02c",
        "overlap" => "#d62728",
        "unit" => "#9467bd",
        UNWEIGHTED_LABEL => "#7f7f7f",
        _ => "#8c564b",
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" ",
            "width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" ",
            "font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx:.4}\" y=\"22\" text-anchor=\"middle\" ",
            "font-size=\"15\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = title,
    );
}

/// Scheme labels present in the rows, canonical order: named schemes
/// sorted, baseline last.
fn scheme_labels<'a, I: Iterator<Item = &'a str>>(labels: I) -> Vec<String> {
    let set: BTreeSet<&str> = labels.collect();
    let mut out: Vec<String> = set
        .iter()
        .filter(|s| **s != UNWEIGHTED_LABEL)
        .map(|s| s.to_string())
        .collect();
    if set.contains(UNWEIGHTED_LABEL) {
        out.push(UNWEIGHTED_LABEL.to_string());
    }
    out
}

fn legend(out: &mut String, schemes: &[String]) {
    let mut x = MARGIN_LEFT;
    let y = HEIGHT - 18.0;
    for scheme in schemes {
        let _ = write!(
            out,
            concat!(
                "<rect x=\"{x:.4}\" y=\"{ry:.4}\" width=\"12\" height=\"12\" ",
                "fill=\"{color}\"/>\n",
                "<text x=\"{tx:.4}\" y=\"{ty:.4}\">{name}</text>\n"
            ),
            x = x,
            ry = y - 10.0,
            color = palette(scheme),
            tx = x + 16.0,
            ty = y,
            name = scheme,
        );
        x += 16.0 + 9.0 * scheme.len() as f64 + 24.0;
    }
}

/// Grouped bars of mean absolute standardized mean difference, one
/// group per feature, one bar per scheme, with the conventional
/// imbalance threshold drawn as a dashed line.
pub fn svg_smd_bars(balance: &[BalanceAggregate]) -> String {
    let mut out = String::new();
    header(&mut out, "Covariate imbalance after weighting");
    if balance.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }

    // First-appearance feature order (reports list features in data
    // order within each scheme block).
    let mut features: Vec<String> = Vec::new();
    for row in balance {
        if !features.contains(&row.feature) {
            features.push(row.feature.clone());
        }
    }
    let schemes = scheme_labels(balance.iter().map(|b| b.scheme.as_str()));

    let max_abs = balance
        .iter()
        .map(|b| b.smd_mean.abs())
        .fold(SMD_THRESHOLD, f64::max);
    let y_top = max_abs * 1.1;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - v / y_top);

    // Axes.
    let _ = write!(
        out,
        concat!(
            "<line x1=\"{l:.4}\" y1=\"{t:.4}\" x2=\"{l:.4}\" y2=\"{b:.4}\" ",
            "stroke=\"black\"/>\n",
            "<line x1=\"{l:.4}\" y1=\"{b:.4}\" x2=\"{r:.4}\" y2=\"{b:.4}\" ",
            "stroke=\"black\"/>\n",
            "<text x=\"18\" y=\"{my:.4}\" transform=\"rotate(-90 18 {my:.4})\" ",
            "text-anchor=\"middle\">|SMD| (%)</text>\n"
        ),
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h,
        r = MARGIN_LEFT + plot_w,
        my = MARGIN_TOP + plot_h / 2.0,
    );

    let group_w = plot_w / features.len() as f64;
    let bar_w = group_w * 0.8 / schemes.len() as f64;
    for (fi, feature) in features.iter().enumerate() {
        let group_x = MARGIN_LEFT + fi as f64 * group_w;
        for (si, scheme) in schemes.iter().enumerate() {
            let Some(row) = balance
                .iter()
                .find(|b| &b.feature == feature && b.scheme == *scheme)
            else {
                continue;
            };
            let v = row.smd_mean.abs().min(y_top);
            let x = group_x + group_w * 0.1 + si as f64 * bar_w;
            let y = y_of(v);
            let _ = write!(
                out,
                concat!(
                    "<rect x=\"{x:.4}\" y=\"{y:.4}\" width=\"{w:.4}\" ",
                    "height=\"{h:.4}\" fill=\"{color}\"/>\n"
                ),
                x = x,
                y = y,
                w = bar_w,
                h = MARGIN_TOP + plot_h - y,
                color = palette(scheme),
            );
        }
        let _ = write!(
            out,
            concat!(
                "<text x=\"{x:.4}\" y=\"{y:.4}\" text-anchor=\"middle\">",
                "{name}</text>\n"
            ),
            x = group_x + group_w / 2.0,
            y = MARGIN_TOP + plot_h + 18.0,
            name = feature,
        );
    }

    let ty = y_of(SMD_THRESHOLD);
    let _ = write!(
        out,
        concat!(
            "<line x1=\"{l:.4}\" y1=\"{y:.4}\" x2=\"{r:.4}\" y2=\"{y:.4}\" ",
            "stroke=\"#444444\" stroke-dasharray=\"6 4\"/>\n",
            "<text x=\"{r:.4}\" y=\"{ly:.4}\" text-anchor=\"end\" ",
            "fill=\"#444444\">threshold {thr}</text>\n"
        ),
        l = MARGIN_LEFT,
        r = MARGIN_LEFT + plot_w,
        y = ty,
        ly = ty - 5.0,
        thr = SMD_THRESHOLD,
    );
    legend(&mut out, &schemes);
    out.push_str("</svg>\n");
    out
}

fn step_path(
    points: &[(f64, f64)],
    x_of: impl Fn(f64) -> f64,
    y_of: impl Fn(f64) -> f64,
) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i == 0 {
            let _ = write!(d, "M {:.4} {:.4}", x_of(*x), y_of(0.0));
            let _ = write!(d, " V {:.4}", y_of(*y));
        } else {
            let _ = write!(d, " H {:.4} V {:.4}", x_of(*x), y_of(*y));
        }
    }
    d
}

/// One panel per scheme: weighted distribution traces of a single
/// feature for both arms, treated solid and control dashed.
pub fn svg_ecdf(rows: &[EcdfRow], feature: &str) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &format!("Weighted cumulative distributions: {feature}"),
    );
    let rows: Vec<&EcdfRow> = rows.iter().filter(|r| r.feature == feature).collect();
    if rows.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let schemes = scheme_labels(rows.iter().map(|r| r.scheme.as_str()));
    let x_min = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let x_max = rows
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };

    let panel_w = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / schemes.len() as f64;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    for (si, scheme) in schemes.iter().enumerate() {
        let left = MARGIN_LEFT + si as f64 * panel_w;
        let inner_w = panel_w - 20.0;
        let x_of = |v: f64| left + (v - x_min) / span * inner_w;
        let y_of = |c: f64| MARGIN_TOP + plot_h * (1.0 - c);
        let _ = write!(
            out,
            concat!(
                "<rect x=\"{x:.4}\" y=\"{y:.4}\" width=\"{w:.4}\" ",
                "height=\"{h:.4}\" fill=\"none\" stroke=\"#cccccc\"/>\n",
                "<text x=\"{tx:.4}\" y=\"{ty:.4}\" text-anchor=\"middle\">",
                "{name}</text>\n"
            ),
            x = left,
            y = MARGIN_TOP,
            w = inner_w,
            h = plot_h,
            tx = left + inner_w / 2.0,
            ty = MARGIN_TOP + plot_h + 18.0,
            name = scheme,
        );
        for group in ["treated", "control"] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.scheme == scheme && r.group == group)
                .map(|r| (r.value, r.cumulative))
                .collect();
            if points.is_empty() {
                continue;
            }
            let dash = if group == "treated" { "" } else { "4 3" };
            let _ = write!(
                out,
                concat!(
                    "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" ",
                    "stroke-dasharray=\"{dash}\"/>\n"
                ),
                d = step_path(&points, x_of, y_of),
                color = palette(scheme),
                dash = dash,
            );
        }
    }
    let _ = write!(
        out,
        concat!(
            "<text x=\"{x:.4}\" y=\"{y}\">solid: treated, ",
            "dashed: control</text>\n"
        ),
        x = MARGIN_LEFT,
        y = HEIGHT - 18.0,
    );
    out.push_str("</svg>\n");
    out
}

const HIST_BINS: usize = 40;

/// Histogram of per-cohort dispersion differences (inverse-probability
/// CV minus complement CV); mass right of zero is where the complement
/// weighting was steadier.
pub fn svg_cv_hist(outcomes: &[CvOutcome]) -> String {
    let mut out = String::new();
    header(&mut out, "Weight variability differences across cohorts");
    if outcomes.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let diffs: Vec<f64> = outcomes.iter().map(|o| o.cv_ipw - o.cv_dfw).collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut bins = [0usize; HIST_BINS];
    for d in &diffs {
        let idx = (((d - min) / span) * HIST_BINS as f64) as usize;
        bins[idx.min(HIST_BINS - 1)] += 1;
    }
    let peak = *bins.iter().max().unwrap() as f64;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let bar_w = plot_w / HIST_BINS as f64;
    for (i, count) in bins.iter().enumerate() {
        let h = plot_h * *count as f64 / peak;
        let _ = write!(
            out,
            concat!(
                "<rect x=\"{x:.4}\" y=\"{y:.4}\" width=\"{w:.4}\" ",
                "height=\"{h:.4}\" fill=\"#1f77b4\"/>\n"
            ),
            x = MARGIN_LEFT + i as f64 * bar_w,
            y = MARGIN_TOP + plot_h - h,
            w = bar_w * 0.92,
            h = h,
        );
    }
    // Zero line when zero lies inside the range.
    if min < 0.0 && max > 0.0 {
        let zx = MARGIN_LEFT + (0.0 - min) / span * plot_w;
        let _ = write!(
            out,
            concat!(
                "<line x1=\"{x:.4}\" y1=\"{t:.4}\" x2=\"{x:.4}\" y2=\"{b:.4}\" ",
                "stroke=\"#444444\" stroke-dasharray=\"6 4\"/>\n"
            ),
            x = zx,
            t = MARGIN_TOP,
            b = MARGIN_TOP + plot_h,
        );
    }
    let _ = write!(
        out,
        concat!(
            "<line x1=\"{l:.4}\" y1=\"{b:.4}\" x2=\"{r:.4}\" y2=\"{b:.4}\" ",
            "stroke=\"black\"/>\n",
            "<text x=\"{mx:.4}\" y=\"{ly:.4}\" text-anchor=\"middle\">",
            "CV(inverse) - CV(complement), {n} cohorts</text>\n"
        ),
        l = MARGIN_LEFT,
        r = MARGIN_LEFT + plot_w,
        b = MARGIN_TOP + plot_h,
        mx = MARGIN_LEFT + plot_w / 2.0,
        ly = MARGIN_TOP + plot_h + 18.0,
        n = outcomes.len(),
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{DatasetSpec, ExperimentConfig};
    use crate::harness::cvstudy::{run_cv_study, CvStudyConfig, EnumerationMode};
    use crate::harness::run::{run_experiment, ExperimentOutput};
    use crate::par::Execution;

    fn output() -> ExperimentOutput {
        let config = ExperimentConfig {
            dataset: DatasetSpec::Linear {
                preset: "moderate".into(),
            },
            n: 120,
            replications: 2,
            base_seed: 3,
            ..ExperimentConfig::default()
        };
        run_experiment(&config, Execution::Sequential).unwrap()
    }

    #[test]
    fn smd_chart_is_deterministic_and_well_formed() {
        let out = output();
        let a = svg_smd_bars(&out.report.balance);
        let b = svg_smd_bars(&out.report.balance);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("stroke-dasharray"), "threshold line missing");
        assert!(a.contains("threshold 10"));
        // One bar per (feature, scheme) pair: 6 features x 6 labels.
        assert_eq!(a.matches("<rect").count() - 1 - 6, 6 * 6);
    }

    #[test]
    fn ecdf_chart_draws_both_arms_per_scheme() {
        let out = output();
        let svg = svg_ecdf(&out.ecdf, "x1");
        // 5 schemes + baseline, two paths each.
        assert_eq!(svg.matches("<path").count(), 12);
        assert!(svg.contains("x1"));
        let blank = svg_ecdf(&out.ecdf, "no_such_feature");
        assert!(blank.ends_with("</svg>\n"));
        assert_eq!(blank.matches("<path").count(), 0);
    }

    #[test]
    fn cv_histogram_covers_all_cohorts() {
        let study = run_cv_study(
            &CvStudyConfig {
                cohort_size: 3,
                mode: EnumerationMode::Multisets,
                ..CvStudyConfig::default()
            },
            Execution::Sequential,
        )
        .unwrap();
        let svg = svg_cv_hist(&study.outcomes);
        assert!(svg.contains("165 cohorts"));
        assert!(svg.contains("stroke-dasharray"), "zero line missing");
        let empty = svg_cv_hist(&[]);
        assert!(empty.ends_with("</svg>\n"));
    }
}
