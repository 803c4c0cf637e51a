//! CSV rows and the aligned summary table for `eval`.

use std::fmt::Write as _;

use radmi_core::metrics::{Metric, MetricGroup, MetricReport, SectionMetrics};

pub const CSV_HEADER: &str = "section_id,method,metric,value";

/// Metric values for one section and method.
pub struct Row<'a> {
    pub section_id: &'a str,
    pub method: &'a str,
    pub metrics: &'a SectionMetrics,
}

pub fn csv(rows: &[Row<'_>]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        for m in Metric::ALL {
            if let Some(v) = row.metrics.get(m.name()) {
                writeln!(out, "{},{},{},{:?}", row.section_id, row.method, m.name(), v).unwrap();
            }
        }
    }
    out
}

pub struct Summary<'a> {
    pub reference: &'a str,
    pub evaluated: usize,
    pub failed: &'a [(String, String)],
    pub excluded: &'a [(String, String, String)],
    /// Method name to its aggregate report; `None` when every section was
    /// excluded.
    pub reports: &'a [(String, Option<MetricReport>)],
    /// Forward passes per method as `(min, max)` over sections.
    pub passes: &'a [(String, (usize, usize))],
}

fn cell(report: Option<&MetricReport>, metric: Metric) -> String {
    match report.and_then(|r| r.aggregates.get(metric.name())) {
        Some(a) => {
            let flag = if a.std_defined() { "" } else { "*" };
            format!("{:.4} ± {:.4}{flag}", a.mean, a.std)
        }
        None => "n/a".into(),
    }
}

fn push_table(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    for r in rows {
        let mut line = String::new();
        for (c, s) in r.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(s);
            line.extend(std::iter::repeat_n(' ', widths[c] - s.chars().count()));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

pub fn table(s: &Summary<'_>) -> String {
    let mut out = String::new();
    writeln!(out, "reference: {}", s.reference).unwrap();
    writeln!(out, "sections: {} evaluated, {} failed", s.evaluated, s.failed.len()).unwrap();
    let mut any_single = false;
    for group in [MetricGroup::Correlation, MetricGroup::Overlap, MetricGroup::Distance] {
        let metrics: Vec<Metric> = Metric::ALL.into_iter().filter(|m| m.group() == group).collect();
        out.push('\n');
        writeln!(out, "{}", group.label()).unwrap();
        let mut rows = vec![std::iter::once("method".to_string())
            .chain(metrics.iter().map(|m| m.name().to_string()))
            .collect::<Vec<_>>()];
        for (method, report) in s.reports {
            let mut row = vec![method.clone()];
            for &m in &metrics {
                let c = cell(report.as_ref(), m);
                any_single |= c.ends_with('*');
                row.push(c);
            }
            rows.push(row);
        }
        push_table(&mut out, &rows);
    }
    if any_single {
        out.push_str("\n* single section: std reported as 0\n");
    }
    if !s.excluded.is_empty() {
        out.push_str("\nexcluded (degenerate input)\n");
        for (section, method, why) in s.excluded {
            writeln!(out, "  {section} {method}: {why}").unwrap();
        }
    }
    if !s.failed.is_empty() {
        out.push_str("\nfailed sections\n");
        for (section, why) in s.failed {
            writeln!(out, "  {section}: {why}").unwrap();
        }
    }
    out.push_str("\nforward passes per prediction\n");
    let mut rows = vec![vec!["method".to_string(), "passes".to_string()]];
    for (method, (lo, hi)) in s.passes {
        let passes = if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") };
        rows.push(vec![method.clone(), passes]);
    }
    push_table(&mut out, &rows);
    out
}
