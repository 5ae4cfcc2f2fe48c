//! Long-format plot series `(series, x, y)` gathered from run reports.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::output::Artifacts;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

/// Success-vs-t curves from search sweeps, `s` histograms and chain slack
/// from extraction reports. Other reports contribute nothing.
pub fn plot_rows(report: &Value) -> Vec<PlotRow> {
    let result = &report["result"];
    let mut rows = Vec::new();
    match report["command"].as_str() {
        Some("searchlab") => {
            let exp = result["experiment"].as_str().unwrap_or("search");
            if matches!(exp, "classical" | "grover") {
                for r in result["rows"].as_array().into_iter().flatten() {
                    rows.push(PlotRow { series: format!("{exp} n2={}", r["n2"]), x: num(&r["t"]), y: num(&r["measured"]) });
                }
            }
        }
        Some("extract") => {
            for round in result["rounds"].as_array().into_iter().flatten() {
                for r in round["rows"].as_array().into_iter().flatten() {
                    rows.push(PlotRow { series: format!("s round {}", round["round"]), x: num(&r["s"]), y: num(&r["probability"]) });
                }
            }
            for (i, line) in result["chain"].as_array().into_iter().flatten().enumerate() {
                rows.push(PlotRow { series: "chain slack".into(), x: i as f64, y: num(&line["slack"]) });
            }
        }
        _ => {}
    }
    rows
}

pub fn emit_plot_data(reports: &[PathBuf]) -> Result<Artifacts, CliError> {
    let mut rows = Vec::new();
    for p in reports {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse { path: p.clone(), message: e.to_string() })?;
        rows.extend(plot_rows(&v));
    }
    let mut a = Artifacts::default();
    a.csv("plot.csv", &["series", "x", "y"], &rows)?;
    Ok(a)
}
