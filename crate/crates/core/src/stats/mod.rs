//! Point-biserial correlation, two-sample t-tests and the per-indicator
//! significance table. All p-values are two-sided.

mod special;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use special::{inc_beta, ln_gamma, student_t_cdf, two_sided_p};

use crate::ekg::{extract_lawsuit_features, EnterpriseKg, Label, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the mean.
fn sum_sq_dev(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Pearson correlation with a t-based two-sided p-value on `n - 2` degrees
/// of freedom. With a 0/1 `y` this is the point-biserial coefficient.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            op: "correlation",
            left: alloc::vec![x.len()],
            right: alloc::vec![y.len()],
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "correlation needs at least 3 pairs, got {n}"
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let (sxx, syy) = (sum_sq_dev(x, mx), sum_sq_dev(y, my));
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(String::from(
            "correlation of a constant input",
        )));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let r = (sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    let t = if one_minus <= 0.0 {
        f64::INFINITY.copysign(r)
    } else {
        r * math::sqrt(df / one_minus)
    };
    Ok(Correlation {
        r,
        t,
        df,
        p: two_sided_p(t, df),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TTestVariant {
    /// Unequal variances, Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Equal variances, `n_a + n_b - 2` degrees of freedom.
    Pooled,
}

impl TTestVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TTestVariant::Welch => "welch",
            TTestVariant::Pooled => "pooled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    /// Positive when `mean(a) > mean(b)`.
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Both groups had zero variance; `t` is then 0 or infinite.
    pub zero_variance: bool,
}

pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTest> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(Error::Degenerate(format!(
            "t-test needs at least 2 values per group, got {na} and {nb}"
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let va = sum_sq_dev(a, ma) / (na - 1) as f64;
    let vb = sum_sq_dev(b, mb) / (nb - 1) as f64;
    let (fa, fb) = (na as f64, nb as f64);
    let (se2, df) = match variant {
        TTestVariant::Welch => {
            let (qa, qb) = (va / fa, vb / fb);
            let denom = qa * qa / (fa - 1.0) + qb * qb / (fb - 1.0);
            let df = if denom > 0.0 {
                (qa + qb) * (qa + qb) / denom
            } else {
                fa + fb - 2.0
            };
            (qa + qb, df)
        }
        TTestVariant::Pooled => {
            let df = fa + fb - 2.0;
            let pooled = ((fa - 1.0) * va + (fb - 1.0) * vb) / df;
            (pooled * (1.0 / fa + 1.0 / fb), df)
        }
    };
    let diff = ma - mb;
    if se2 <= 0.0 {
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(diff), 0.0)
        };
        return Ok(TTest {
            t,
            df,
            p,
            zero_variance: true,
        });
    }
    let t = diff / math::sqrt(se2);
    Ok(TTest {
        t,
        df,
        p: two_sided_p(t, df),
        zero_variance: false,
    })
}

/// 3 below 0.01, 2 below 0.05, 1 below 0.10, else 0.
pub fn stars(p: f64) -> u8 {
    if p < 0.01 {
        3
    } else if p < 0.05 {
        2
    } else if p < 0.10 {
        1
    } else {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "Positive",
            Polarity::Negative => "Negative",
        }
    }
}

/// One indicator's correlation and group comparison. Statistics are `None`
/// when undefined for the data (constant indicator, or groups too small).
#[derive(Clone, Debug, PartialEq)]
pub struct StatsRow {
    pub indicator: &'static str,
    pub coefficient: Option<f64>,
    pub polarity: Option<Polarity>,
    pub mean_surviving: f64,
    pub mean_bankrupt: f64,
    pub p_corr: Option<f64>,
    pub t: Option<f64>,
    pub p_ttest: Option<f64>,
    pub zero_variance: bool,
}

impl StatsRow {
    pub fn stars_corr(&self) -> u8 {
        self.p_corr.map_or(0, stars)
    }

    pub fn stars_ttest(&self) -> u8 {
        self.p_ttest.map_or(0, stars)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub rows: Vec<StatsRow>,
    pub n_surviving: usize,
    pub n_bankrupt: usize,
    pub variant: TTestVariant,
    /// Lawsuits dated after their enterprise's observation time.
    pub excluded_lawsuits: usize,
}

/// Correlates each extracted feature with the label over all labeled
/// enterprises and compares surviving against bankrupt group means.
pub fn build_table1(kg: &EnterpriseKg, variant: TTestVariant) -> Result<StatsReport> {
    let table = extract_lawsuit_features(kg);
    let labeled: Vec<(usize, Label)> = kg
        .enterprises
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.label.map(|l| (i, l)))
        .collect();
    let n_bankrupt = labeled
        .iter()
        .filter(|(_, l)| *l == Label::Bankrupt)
        .count();
    let n_surviving = labeled.len() - n_bankrupt;
    if n_bankrupt == 0 || n_surviving == 0 {
        return Err(Error::Degenerate(String::from(
            "significance table needs labeled enterprises of both classes",
        )));
    }
    let y: Vec<f64> = labeled.iter().map(|(_, l)| f64::from(l.bit())).collect();
    let mut rows = Vec::with_capacity(FEATURE_NAMES.len());
    for (c, name) in FEATURE_NAMES.iter().enumerate() {
        let x: Vec<f64> = labeled.iter().map(|(i, _)| table.rows[*i][c]).collect();
        let group = |class: Label| -> Vec<f64> {
            labeled
                .iter()
                .filter(|(_, l)| *l == class)
                .map(|(i, _)| table.rows[*i][c])
                .collect()
        };
        let (surv, bank) = (group(Label::Survive), group(Label::Bankrupt));
        let corr = correlation(&x, &y).ok();
        let tt = t_test(&bank, &surv, variant).ok();
        rows.push(StatsRow {
            indicator: name,
            coefficient: corr.map(|c| c.r),
            polarity: corr.map(|c| {
                if c.r >= 0.0 {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                }
            }),
            mean_surviving: mean(&surv),
            mean_bankrupt: mean(&bank),
            p_corr: corr.map(|c| c.p),
            t: tt.map(|t| t.t),
            p_ttest: tt.map(|t| t.p),
            zero_variance: tt.is_some_and(|t| t.zero_variance),
        });
    }
    Ok(StatsReport {
        rows,
        n_surviving,
        n_bankrupt,
        variant,
        excluded_lawsuits: table.excluded.len(),
    })
}
