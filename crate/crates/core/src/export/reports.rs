//! CSV renderings of review reports for spreadsheets.

use crate::review::{AgreementReport, ConsistencyReport};

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One `overall` row followed by one row per rubric.
pub fn agreement_csv(report: &AgreementReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let (a, b) = (report.pair.0.to_string(), report.pair.1.to_string());
    w.write_record(["rater_a", "rater_b", "scope", "n", "observed_agreement", "expected_agreement", "kappa"])
        .expect("write header");
    w.write_record([
        a.as_str(),
        b.as_str(),
        "overall",
        &report.n_items.to_string(),
        &report.observed_agreement.to_string(),
        &report.expected_agreement.to_string(),
        &report.kappa.to_string(),
    ])
    .expect("write row");
    for (rubric, r) in &report.per_rubric_breakdown {
        w.write_record([
            a.as_str(),
            b.as_str(),
            rubric.as_str(),
            &r.n.to_string(),
            &r.observed_agreement.to_string(),
            "",
            "",
        ])
        .expect("write row");
    }
    finish(w)
}

pub fn consistency_csv(report: &ConsistencyReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "reviewer_id",
        "assignment_id",
        "rubric_id",
        "n_reviewed",
        "n_flipped",
        "n_edited",
        "n_dismissed",
        "flip_rate",
        "edit_rate",
        "ai_agreement",
    ])
    .expect("write header");
    for r in &report.rubrics {
        w.write_record([
            report.reviewer_id.as_str(),
            report.assignment_id.as_str(),
            r.rubric_id.as_str(),
            &r.n_reviewed.to_string(),
            &r.n_flipped.to_string(),
            &r.n_edited.to_string(),
            &r.n_dismissed.to_string(),
            &r.flip_rate.to_string(),
            &r.edit_rate.to_string(),
            &opt(r.ai_agreement),
        ])
        .expect("write row");
    }
    finish(w)
}
