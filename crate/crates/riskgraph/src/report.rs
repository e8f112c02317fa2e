//! Text and CSV renderings. Both formats take their cells from the same
//! formatting functions, so they always carry identical numbers.

use std::fmt::Write as _;

use riskgraph_core::model::MetricsReport;
use riskgraph_core::stats::{StatsReport, StatsRow};

pub const STATS_COLUMNS: [&str; 10] = [
    "indicator",
    "coefficient",
    "corr_stars",
    "polarity",
    "p_corr",
    "mean_surviving",
    "mean_bankrupt",
    "t",
    "p_ttest",
    "ttest_stars",
];

const MISSING: &str = "NA";

pub fn fixed(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.into(), |v| format!("{v:.6}"))
}

pub fn pvalue(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.into(), |v| format!("{v:.4e}"))
}

fn star_text(n: u8) -> String {
    "*".repeat(usize::from(n))
}

pub fn stats_cells(row: &StatsRow) -> Vec<String> {
    vec![
        row.indicator.to_string(),
        fixed(row.coefficient),
        star_text(row.stars_corr()),
        row.polarity.map_or(MISSING, |p| p.as_str()).to_string(),
        pvalue(row.p_corr),
        fixed(Some(row.mean_surviving)),
        fixed(Some(row.mean_bankrupt)),
        fixed(row.t),
        pvalue(row.p_ttest),
        star_text(row.stars_ttest()),
    ]
}

/// One line stating the sidedness and the test variant.
pub fn stats_footer(report: &StatsReport) -> String {
    format!(
        "n = {} surviving, {} bankrupt; {} t-test; all p-values are two-sided; stars: *** p<0.01, ** p<0.05, * p<0.10; {} lawsuits after their observation time excluded",
        report.n_surviving,
        report.n_bankrupt,
        report.variant.as_str(),
        report.excluded_lawsuits
    )
}

/// Header and twelve rows, no footer; the caller reports the footer on
/// stderr so the file stays a plain table.
pub fn stats_csv(report: &StatsReport) -> String {
    let mut out = STATS_COLUMNS.join(",");
    out.push('\n');
    for row in &report.rows {
        out.push_str(&stats_cells(row).join(","));
        out.push('\n');
    }
    out
}

pub fn stats_text(report: &StatsReport) -> String {
    let rows: Vec<Vec<String>> = report.rows.iter().map(stats_cells).collect();
    let mut widths: Vec<usize> = STATS_COLUMNS.iter().map(|c| c.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        for (k, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if k == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, &STATS_COLUMNS);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out.push('\n');
    out.push_str(&stats_footer(report));
    out.push('\n');
    out
}

pub fn metrics_text(split: &str, m: &MetricsReport) -> String {
    let c = m.confusion;
    format!(
        "split      {split}\naccuracy   {}\nprecision  {}\nrecall     {}\nf1         {}\nauc        {}\nconfusion  tp {} fp {} tn {} fn {}\n",
        fixed(Some(m.accuracy)),
        fixed(Some(m.precision)),
        fixed(Some(m.recall)),
        fixed(Some(m.f1)),
        fixed(m.auc),
        c.tp,
        c.fp,
        c.tn,
        c.r#fn
    )
}

/// One sweep point: the swept value and the test metrics of its run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub best_epoch: usize,
    pub metrics: MetricsReport,
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = String::from("param,value,accuracy,precision,recall,f1,auc,best_epoch\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{param},{},{},{},{},{},{},{}",
            r.value,
            fixed(Some(m.accuracy)),
            fixed(Some(m.precision)),
            fixed(Some(m.recall)),
            fixed(Some(m.f1)),
            fixed(m.auc),
            r.best_epoch
        );
    }
    out
}
