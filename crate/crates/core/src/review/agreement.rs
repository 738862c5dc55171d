//! Two-rater agreement over binary verdicts (Cohen's kappa).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ReviewError;
use crate::model::{EssayId, ReviewerId, RubricId, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemKey {
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
}

impl ItemKey {
    pub fn new(essay_id: impl Into<EssayId>, rubric_id: impl Into<RubricId>) -> Self {
        Self {
            essay_id: essay_id.into(),
            rubric_id: rubric_id.into(),
        }
    }
}

/// The AI or a human reviewer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rater {
    Ai,
    Reviewer(ReviewerId),
}

impl Rater {
    pub fn parse(s: &str) -> Self {
        if s == "AI" {
            Rater::Ai
        } else {
            Rater::Reviewer(ReviewerId::from(s))
        }
    }
}

impl fmt::Display for Rater {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rater::Ai => f.write_str("AI"),
            Rater::Reviewer(id) => f.write_str(id.as_str()),
        }
    }
}

impl Serialize for Rater {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rater {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Rater::parse(&String::deserialize(d)?))
    }
}

pub type VerdictMap = BTreeMap<ItemKey, Verdict>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricAgreement {
    pub n: usize,
    pub observed_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pair: (Rater, Rater),
    pub n_items: usize,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub kappa: f64,
    pub per_rubric_breakdown: BTreeMap<RubricId, RubricAgreement>,
}

/// Kappa from observed and chance agreement. When chance agreement is 1 the
/// ratio is undefined; it is taken as 1 for perfect observed agreement and 0
/// otherwise.
pub fn kappa(observed: f64, expected: f64) -> f64 {
    if expected >= 1.0 {
        if observed >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

pub fn agreement(a: &VerdictMap, b: &VerdictMap) -> Result<AgreementReport, ReviewError> {
    agreement_between(Rater::Ai, Rater::Ai, a, b)
}

pub fn agreement_between(
    rater_a: Rater,
    rater_b: Rater,
    a: &VerdictMap,
    b: &VerdictMap,
) -> Result<AgreementReport, ReviewError> {
    if !a.keys().eq(b.keys()) {
        let only_a = a.keys().filter(|k| !b.contains_key(k)).count();
        let only_b = b.keys().filter(|k| !a.contains_key(k)).count();
        return Err(ReviewError::ItemMismatch { only_a, only_b });
    }
    let n = a.len();
    if n == 0 {
        return Err(ReviewError::NoData("no items to compare".into()));
    }

    let mut agree = 0usize;
    let mut a_met = 0usize;
    let mut b_met = 0usize;
    let mut per_rubric: BTreeMap<RubricId, (usize, usize)> = BTreeMap::new();
    for ((key, va), vb) in a.iter().zip(b.values()) {
        let same = va == vb;
        agree += usize::from(same);
        a_met += usize::from(*va == Verdict::Met);
        b_met += usize::from(*vb == Verdict::Met);
        let entry = per_rubric.entry(key.rubric_id.clone()).or_default();
        entry.0 += 1;
        entry.1 += usize::from(same);
    }

    let nf = n as f64;
    let observed = agree as f64 / nf;
    let (pa, pb) = (a_met as f64 / nf, b_met as f64 / nf);
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);

    Ok(AgreementReport {
        pair: (rater_a, rater_b),
        n_items: n,
        observed_agreement: observed,
        expected_agreement: expected,
        kappa: kappa(observed, expected),
        per_rubric_breakdown: per_rubric
            .into_iter()
            .map(|(id, (n, same))| {
                (
                    id,
                    RubricAgreement {
                        n,
                        observed_agreement: same as f64 / n as f64,
                    },
                )
            })
            .collect(),
    })
}
