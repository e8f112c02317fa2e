use alloc::vec::Vec;

use super::{CourtLevel, Date, EnterpriseKg, Lawsuit, Verdict};

/// Lawsuits at most this many months before observation count as recent.
pub const RECENT_MONTHS: u32 = 24;

pub const FEATURE_COUNT: usize = 12;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "established_time",
    "registered_capital",
    "paid_in_capital",
    "loan_contract_dispute",
    "sales_contract_dispute",
    "grassroots_court",
    "intermediate_court",
    "higher_court",
    "plaintiff_winner",
    "defendant_loser",
    "lawsuits_within_2y",
    "lawsuits_over_2y",
];

/// A lawsuit dated after its enterprise's observation time. It is invisible
/// to every feature so that post-outcome events cannot leak into inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcludedLawsuit {
    pub enterprise: usize,
    pub lawsuit: usize,
    pub date: Date,
    pub observation: Date,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    /// One row per enterprise, columns as in [`FEATURE_NAMES`].
    pub rows: Vec<[f64; FEATURE_COUNT]>,
    pub excluded: Vec<ExcludedLawsuit>,
}

impl FeatureTable {
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }
}

impl EnterpriseKg {
    /// Lawsuits of `enterprise` visible at its observation time, paired with
    /// their age in whole months.
    pub fn visible_lawsuits(&self, enterprise: usize) -> impl Iterator<Item = (&Lawsuit, u32)> {
        let obs = self.observation_date(enterprise);
        self.enterprises[enterprise]
            .lawsuits
            .iter()
            .filter_map(move |l| l.date.months_until(obs).map(|m| (l, m)))
    }
}

/// Builds the twelve-column attribute and lawsuit-count table.
pub fn extract_lawsuit_features(kg: &EnterpriseKg) -> FeatureTable {
    let mut rows = Vec::with_capacity(kg.enterprises.len());
    let mut excluded = Vec::new();
    for (i, e) in kg.enterprises.iter().enumerate() {
        let obs = kg.observation_date(i);
        let mut row = [0.0; FEATURE_COUNT];
        row[0] = f64::from(e.attrs.established_months);
        row[1] = e.attrs.registered_capital;
        row[2] = e.attrs.paid_in_capital;
        for (k, l) in e.lawsuits.iter().enumerate() {
            let Some(age) = l.date.months_until(obs) else {
                excluded.push(ExcludedLawsuit {
                    enterprise: i,
                    lawsuit: k,
                    date: l.date,
                    observation: obs,
                });
                continue;
            };
            match l.cause.table_row() {
                0 => row[3] += 1.0,
                1 => row[4] += 1.0,
                _ => {}
            }
            match l.court {
                CourtLevel::Grassroots => row[5] += 1.0,
                CourtLevel::Intermediate => row[6] += 1.0,
                CourtLevel::Higher => row[7] += 1.0,
                CourtLevel::Supreme => {}
            }
            match l.verdict {
                Verdict::PlaintiffWinner => row[8] += 1.0,
                Verdict::DefendantLoser => row[9] += 1.0,
                _ => {}
            }
            if age <= RECENT_MONTHS {
                row[10] += 1.0;
            } else {
                row[11] += 1.0;
            }
        }
        rows.push(row);
    }
    FeatureTable { rows, excluded }
}
