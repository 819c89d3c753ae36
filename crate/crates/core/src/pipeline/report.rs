//! Result tables with improvement over the 1-best baseline and the share of
//! the baseline-to-oracle gap that a system recovers.

use serde::{Deserialize, Serialize};

use super::scoring::ScoreTable;
use super::PipelineError;
use crate::sparseval::Objective;

pub const BASELINE_SYSTEM: &str = "1-best";
pub const ORACLE_SYSTEM: &str = "oracle";

const FOOTNOTE: &str = "\
%Δ = (system - baseline) / baseline
%↕ = (system - baseline) / (oracle - baseline); `-` when oracle equals baseline
Percentages are computed from the F1 values as given. Rounding moves them:
F1 0.676 / 0.690 / 0.783 give %Δ 2.07% and %↕ 13.08%, while the unrounded
F1 values behind those three figures give 2.0% and 12.4%.";

/// `(system - baseline) / baseline`, `None` for a zero baseline.
pub fn relative_improvement(system: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (system - baseline) / baseline)
}

/// `(system - baseline) / (oracle - baseline)`, `None` when oracle equals baseline.
pub fn relative_gain(system: f64, baseline: f64, oracle: f64) -> Option<f64> {
    (oracle != baseline).then(|| (system - baseline) / (oracle - baseline))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    /// F1 per objective in `objectives` order.
    pub f1: Vec<f64>,
    /// WER of the hypotheses selected for each objective.
    pub wer: Vec<f64>,
    pub delta: Vec<Option<f64>>,
    pub gain: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub objectives: Vec<Objective>,
    pub baseline: String,
    pub oracle: String,
    pub rows: Vec<ReportRow>,
}

/// Builds the report from `(system, F1 per objective, WER per objective)` rows.
pub fn build_report(rows: &[(String, Vec<f64>, Vec<f64>)], baseline: &str, oracle: &str) -> Result<Report, PipelineError> {
    let find = |name: &str| {
        rows.iter()
            .find(|r| r.0 == name)
            .map(|r| r.1.clone())
            .ok_or_else(|| PipelineError::Config(format!("report needs a `{name}` row")))
    };
    let base = find(baseline)?;
    let top = find(oracle)?;
    let rows = rows
        .iter()
        .map(|(system, f1, wer)| ReportRow {
            system: system.clone(),
            f1: f1.clone(),
            wer: wer.clone(),
            delta: f1.iter().zip(&base).map(|(s, b)| relative_improvement(*s, *b)).collect(),
            gain: f1.iter().zip(&base).zip(&top).map(|((s, b), o)| relative_gain(*s, *b, *o)).collect(),
        })
        .collect();
    Ok(Report { objectives: Objective::ALL.to_vec(), baseline: baseline.into(), oracle: oracle.into(), rows })
}

/// Report over a score table, baseline `1-best`, reference `oracle`.
pub fn report(table: &ScoreTable) -> Result<Report, PipelineError> {
    let rows: Vec<(String, Vec<f64>, Vec<f64>)> = table
        .systems
        .iter()
        .map(|s| {
            (
                s.system.clone(),
                s.objectives.iter().map(|o| o.f1.f1).collect(),
                s.objectives.iter().map(|o| o.wer.wer).collect(),
            )
        })
        .collect();
    build_report(&rows, BASELINE_SYSTEM, ORACLE_SYSTEM)
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Format(format!("report: {e}")))
    }

    pub fn to_text(&self) -> String {
        let lb = Objective::LABELED_BRACKET.index();
        let mut out = String::new();
        let mut header = format!("{:<14}", "system");
        for o in &self.objectives {
            header.push_str(&format!(" {:>14}", o.to_string()));
        }
        header.push_str(&format!(" {:>8}", "WER"));
        out.push_str(&header);
        out.push('\n');
        out.push_str(&"-".repeat(header.len()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<14}", row.system));
            for f in &row.f1 {
                out.push_str(&format!(" {:>14.3}", f));
            }
            out.push_str(&format!(" {:>8.3}\n", row.wer.get(lb).copied().unwrap_or(f64::NAN)));
        }
        for row in self.rows.iter().filter(|r| r.system != self.baseline && r.system != self.oracle) {
            out.push_str(&format!("{:<14}", format!("%Δ,{}", row.system)));
            for d in &row.delta {
                out.push_str(&format!(" {:>14}", pct(*d)));
            }
            out.push('\n');
            out.push_str(&format!("{:<14}", format!("%↕,{}", row.system)));
            for g in &row.gain {
                out.push_str(&format!(" {:>14}", pct(*g)));
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&format!("baseline: {}, oracle: {}, WER column: {} selections\n", self.baseline, self.oracle, Objective::LABELED_BRACKET));
        out.push_str(FOOTNOTE);
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(base: f64, sys: f64, oracle: f64) -> Vec<(String, Vec<f64>, Vec<f64>)> {
        vec![
            ("1-best".into(), vec![base; 4], vec![0.19; 4]),
            ("ranker-point".into(), vec![sys; 4], vec![0.18; 4]),
            ("oracle".into(), vec![oracle; 4], vec![0.15; 4]),
        ]
    }

    #[test]
    fn percentages() {
        let r = build_report(&rows(0.676, 0.690, 0.783), "1-best", "oracle").unwrap();
        let sys = &r.rows[1];
        assert!((sys.delta[3].unwrap() - 0.014 / 0.676).abs() < 1e-12);
        assert!((sys.gain[3].unwrap() - 0.014 / 0.107).abs() < 1e-12);
        let text = r.to_text();
        assert!(text.contains("2.07%"), "{text}");
        assert!(text.contains("13.08%"), "{text}");
    }

    #[test]
    fn equal_system_and_degenerate_oracle() {
        let r = build_report(&rows(0.7, 0.7, 0.8), "1-best", "oracle").unwrap();
        assert_eq!(r.rows[1].delta[0], Some(0.0));
        assert_eq!(r.rows[1].gain[0], Some(0.0));
        let r = build_report(&rows(0.7, 0.72, 0.7), "1-best", "oracle").unwrap();
        assert_eq!(r.rows[1].gain[0], None);
        assert!(r.to_text().contains(" -\n") || r.to_text().contains(" - "));
    }

    #[test]
    fn missing_rows() {
        let mut r = rows(0.7, 0.7, 0.8);
        r.pop();
        assert!(build_report(&r, "1-best", "oracle").is_err());
    }

    #[test]
    fn json_round_trip_recomputes() {
        let r = build_report(&rows(0.676, 0.690, 0.783), "1-best", "oracle").unwrap();
        let back = Report::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let (b, s, o) = (back.rows[0].f1[3], back.rows[1].f1[3], back.rows[2].f1[3]);
        assert_eq!(relative_gain(s, b, o), back.rows[1].gain[3]);
    }
}
