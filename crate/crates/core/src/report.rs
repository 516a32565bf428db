//! CSV and markdown renderings of an [`ExperimentReport`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{CellStats, ExperimentReport};
use crate::model::Method;

/// Column order of the long-format CSV.
pub const CSV_COLUMNS: [&str; 9] = [
    "M",
    "cf_good",
    "method",
    "good",
    "mean_width",
    "sd_width",
    "coverage",
    "failures",
    "mean_seconds",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmitOptions {
    /// Fill `mean_seconds`; left empty otherwise so the CSV is reproducible byte for byte.
    pub timings: bool,
}

/// 17 significant digits; parses back to the identical double.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit_report(rep: &ExperimentReport, format: ReportFormat, opts: EmitOptions) -> String {
    match format {
        ReportFormat::Csv => emit_csv(&rep.cells, opts),
        ReportFormat::Markdown => emit_markdown(rep),
    }
}

pub fn emit_csv(cells: &[CellStats], opts: EmitOptions) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for c in cells {
        let seconds = match (opts.timings, c.mean_seconds) {
            (true, Some(s)) => format_f64(s),
            _ => String::new(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.markets,
            c.cf_good,
            c.method,
            c.good,
            format_f64(c.mean_width),
            format_f64(c.sd_width),
            format_f64(c.coverage),
            c.failures,
            seconds
        )
        .expect("writing to a String");
    }
    out
}

/// Reads cells back from [`emit_csv`] output.
pub fn parse_csv(text: &str) -> Result<Vec<CellStats>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("report header: {e}")))?
        .clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!(
            "report header must be `{}`",
            CSV_COLUMNS.join(",")
        )));
    }
    let mut cells = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let int = |i: usize| {
            field(i).parse::<usize>().map_err(|e| {
                Error::Parse(format!("line {line}, column {}: {e}", CSV_COLUMNS[i]))
            })
        };
        let float = |i: usize| {
            field(i).parse::<f64>().map_err(|e| {
                Error::Parse(format!("line {line}, column {}: {e}", CSV_COLUMNS[i]))
            })
        };
        cells.push(CellStats {
            markets: int(0)?,
            cf_good: int(1)?,
            method: field(2)
                .parse::<Method>()
                .map_err(|e| Error::Parse(format!("line {line}, column method: {e}")))?,
            good: int(3)?,
            mean_width: float(4)?,
            sd_width: float(5)?,
            coverage: float(6)?,
            failures: int(7)?,
            mean_seconds: if field(8).is_empty() { None } else { Some(float(8)?) },
        });
    }
    Ok(cells)
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::TwoCycle => "2-cycle",
        Method::AllCycles => "All cycles",
        Method::Oracle => "Oracle",
    }
}

/// Table with a row per counterfactual and method, a column per `(M, good)`,
/// cells `width (sd)` to four decimals.
pub fn emit_markdown(rep: &ExperimentReport) -> String {
    let j = rep.num_goods;
    let mut out = String::new();
    out.push_str("| Counterfactual | Method |");
    for m in &rep.m_list {
        for g in 1..=j {
            write!(out, " M={m} s_{g} |").unwrap();
        }
    }
    out.push('\n');
    out.push_str("|---|---|");
    for _ in 0..rep.m_list.len() * j {
        out.push_str("---|");
    }
    out.push('\n');

    for cf in 1..=j {
        for &method in &rep.methods {
            let mut row = format!("| p_{cf} up | {} |", method_label(method));
            let mut any = false;
            for &m in &rep.m_list {
                for g in 1..=j {
                    match rep.cell(m, cf, method, g) {
                        Some(c) => {
                            any = true;
                            write!(row, " {:.4} ({:.4}) |", c.mean_width, c.sd_width).unwrap();
                        }
                        None => row.push_str(" |"),
                    }
                }
            }
            if any {
                out.push_str(&row);
                out.push('\n');
            }
        }
    }

    if !rep.cells.is_empty() {
        writeln!(
            out,
            "\nWidths of bounds on counterfactual shares, mean (standard deviation) over {} {} replications.",
            rep.num_sims,
            rep.family.as_str()
        )
        .unwrap();
        let coverage = rep
            .cells
            .iter()
            .filter(|c| !c.coverage.is_nan())
            .map(|c| c.coverage)
            .fold(f64::INFINITY, f64::min);
        let failures: usize = rep.cells.iter().filter(|c| c.good == 1).map(|c| c.failures).sum();
        if coverage.is_finite() {
            writeln!(out, "Minimum cell coverage: {coverage:.4}. Failed cells: {failures}.").unwrap();
        }
        if let Some(d) = rep.dominance {
            writeln!(
                out,
                "Dominance (all cycles vs 2-cycle, per replication): {} comparisons, {} violations, max excess {:.3e}.",
                d.comparisons, d.violations, d.max_excess
            )
            .unwrap();
        }
    }
    out
}
