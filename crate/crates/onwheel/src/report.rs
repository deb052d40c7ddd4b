//! Study report rendering: aligned plain text, JSON and per-measure CSV.

use std::fmt::Write as _;

use onwheel_core::stats::{MetricReport, StudyReport, TestRow};

use crate::docs::to_pretty_json;

fn star(significant: bool) -> &'static str {
    if significant {
        "  *"
    } else {
        ""
    }
}

fn test_line(out: &mut String, row: &TestRow) {
    let _ = writeln!(out, "  {:<32} {}{}", format!("{}:", row.label), row.anova, star(row.significant));
}

fn metric_text(out: &mut String, m: &MetricReport) {
    let _ = writeln!(out, "{} ({})", m.metric, m.unit.symbol());
    let _ = writeln!(out, "  {:<10} {:>4} {:>12} {:>12}", "condition", "n", "mean", "sd");
    for c in &m.cells {
        let _ = writeln!(out, "  {:<10} {:>4} {:>12.3} {:>12.3}", c.condition.name(), c.n, c.mean, c.sd);
    }
    if let Some(row) = &m.omnibus {
        test_line(out, row);
    }
    for row in &m.contrasts {
        test_line(out, row);
    }
    if let Some(row) = &m.road_contrast {
        test_line(out, row);
    }
    if !m.excluded_subjects.is_empty() {
        let ids: Vec<String> = m.excluded_subjects.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "  excluded subjects: {}", ids.join(", "));
    }
}

pub fn render_text(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Study report (alpha = {}; * marks p < alpha)", report.alpha);
    for m in &report.metrics {
        out.push('\n');
        metric_text(&mut out, m);
    }
    if !report.wilcoxon.is_empty() {
        out.push_str("\nWilcoxon signed-rank\n");
        for w in &report.wilcoxon {
            let _ = writeln!(out, "  {:<32} {}{}", format!("{}:", w.name), w.result, star(w.significant));
        }
    }
    if !report.warnings.is_empty() {
        out.push_str("\nWarnings\n");
        for w in &report.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}

pub fn render_json(report: &StudyReport) -> String {
    to_pretty_json(report)
}

/// Columns of the per-measure CSV files.
pub const MEASURE_COLUMNS: [&str; 11] =
    ["kind", "label", "condition", "n", "mean", "sd", "f", "df1", "df2", "p", "significant"];

/// One CSV per measure, as `(file name, contents)`.
pub fn render_csv(report: &StudyReport) -> Vec<(String, String)> {
    report
        .metrics
        .iter()
        .map(|m| {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut put = |rec: [String; 11]| w.write_record(&rec).expect("in-memory write");
            put(MEASURE_COLUMNS.map(String::from));
            for c in &m.cells {
                let e = String::new;
                put([
                    "cell".into(),
                    e(),
                    c.condition.to_string(),
                    c.n.to_string(),
                    c.mean.to_string(),
                    c.sd.to_string(),
                    e(),
                    e(),
                    e(),
                    e(),
                    e(),
                ]);
            }
            let tests = m
                .omnibus
                .iter()
                .map(|t| ("omnibus", t))
                .chain(m.contrasts.iter().map(|t| ("contrast", t)))
                .chain(m.road_contrast.iter().map(|t| ("road", t)));
            for (kind, t) in tests {
                let a = &t.anova;
                let e = String::new;
                put([
                    kind.into(),
                    t.label.clone(),
                    e(),
                    e(),
                    e(),
                    e(),
                    a.f.to_string(),
                    a.df1.to_string(),
                    a.df2.to_string(),
                    a.p.to_string(),
                    t.significant.to_string(),
                ]);
            }
            let bytes = w.into_inner().expect("in-memory flush");
            (format!("{}.csv", m.metric), String::from_utf8(bytes).expect("CSV output is UTF-8"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use onwheel_core::metrics::{MetricName, MetricRow};
    use onwheel_core::runlog::Condition;
    use onwheel_core::stats::{build_report, PairedScores, SignificanceConfig};

    fn report() -> StudyReport {
        let mut rows = Vec::new();
        for subject in 0..6u32 {
            for (j, c) in Condition::ALL.into_iter().enumerate() {
                for road in [1, 2] {
                    let value =
                        1.0 + j as f64 * 0.5 + subject as f64 * 0.1 + (road as f64 * subject as f64).sin() * 0.2;
                    rows.push(MetricRow { subject, condition: c, road, metric: MetricName::SpeedRmse, value });
                }
            }
        }
        let scores =
            [PairedScores { name: "ease".into(), pairs: (0..6).map(|i| (i as f64 + 2.0, i as f64)).collect() }];
        build_report(&rows, &scores, &SignificanceConfig::default())
    }

    #[test]
    fn text_mirrors_reporting_style() {
        let text = render_text(&report());
        assert!(text.contains("speed_rmse (km/h)"), "{text}");
        assert!(text.contains("baseline vs tactile vs gesture:"), "{text}");
        assert!(text.contains("F(2,10) = "), "{text}");
        assert!(text.contains("road 1 vs road 2:"), "{text}");
        assert!(text.contains("ease:"), "{text}");
        assert!(text.contains("W = 0.0"), "{text}");
    }

    #[test]
    fn csv_has_one_file_per_measure() {
        let files = render_csv(&report());
        assert_eq!(files.len(), 1);
        let (name, body) = &files[0];
        assert_eq!(name, "speed_rmse.csv");
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines[0], MEASURE_COLUMNS.join(","));
        // three cells, omnibus, three contrasts, road
        assert_eq!(lines.len(), 1 + 3 + 1 + 3 + 1);
    }

    #[test]
    fn json_parses_back() {
        let json = render_json(&report());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["metrics"][0]["metric"], "speed_rmse");
    }
}
