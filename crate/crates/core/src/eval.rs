//! ROC AUC and count-matched F1 with outliers as the positive class.

use std::fmt;
use std::str::FromStr;

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Which end of a score scale marks outliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    LowIsOutlier,
    HighIsOutlier,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::LowIsOutlier => Polarity::HighIsOutlier,
            Polarity::HighIsOutlier => Polarity::LowIsOutlier,
        }
    }

    /// Maps a raw score so that larger means more outlier-like.
    fn outlierness(self, s: f64) -> f64 {
        match self {
            Polarity::LowIsOutlier => -s,
            Polarity::HighIsOutlier => s,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::LowIsOutlier => "low_is_outlier",
            Polarity::HighIsOutlier => "high_is_outlier",
        })
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low_is_outlier" => Ok(Polarity::LowIsOutlier),
            "high_is_outlier" => Ok(Polarity::HighIsOutlier),
            other => Err(Error::parse(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub auc: f64,
    pub f1: f64,
    /// Raw score of the last point predicted as an outlier.
    pub threshold_used: f64,
    pub counts: Confusion,
    pub polarity: Polarity,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "auc,f1,threshold,tp,fp,fn,tn,polarity";

    pub fn to_key_values(&self) -> String {
        format!(
            "auc={:?}\nf1={:?}\nthreshold={:?}\ntp={}\nfp={}\nfn={}\ntn={}\npolarity={}\n",
            self.auc,
            self.f1,
            self.threshold_used,
            self.counts.tp,
            self.counts.fp,
            self.counts.fn_,
            self.counts.tn,
            self.polarity
        )
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:?},{:?},{:?},{},{},{},{},{}",
            self.auc,
            self.f1,
            self.threshold_used,
            self.counts.tp,
            self.counts.fp,
            self.counts.fn_,
            self.counts.tn,
            self.polarity
        )
    }
}

fn check_inputs(scores: &[f64], labels: &LabelVector) -> Result<(usize, usize)> {
    labels.check_matches(scores.len())?;
    let pos = labels.num_outliers();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "need both classes, got {pos} outliers and {neg} inliers"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score".into()));
    }
    Ok((pos, neg))
}

/// Rank-based (Mann-Whitney) AUC with midranks for ties.
pub fn auc(scores: &[f64], labels: &LabelVector, polarity: Polarity) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let keyed: Vec<f64> = scores.iter().map(|&s| polarity.outlierness(s)).collect();
    let mut order: Vec<usize> = (0..keyed.len()).collect();
    order.sort_by(|&a, &b| keyed[a].total_cmp(&keyed[b]));

    // doubled ranks keep tied midranks integral
    let mut pos_rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && keyed[order[end]] == keyed[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, midrank*2 = start + 1 + end
        let mid2 = (start + 1 + end) as u128;
        let tied_pos = order[start..end].iter().filter(|&&i| labels.0[i].is_outlier()).count() as u128;
        pos_rank_sum2 += mid2 * tied_pos;
        start = end;
    }
    let (pos, neg) = (pos as u128, neg as u128);
    let u2 = pos_rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

/// F1 at the operating point predicting exactly as many outliers as the
/// labels contain. Ties go to the lower index.
pub fn f1_at_count(scores: &[f64], labels: &LabelVector, polarity: Polarity) -> Result<EvalReport> {
    let (pos, _) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps index order within ties
    order.sort_by(|&a, &b| {
        polarity
            .outlierness(scores[b])
            .total_cmp(&polarity.outlierness(scores[a]))
    });
    let mut predicted = vec![false; scores.len()];
    for &i in &order[..pos] {
        predicted[i] = true;
    }
    let mut counts = Confusion::default();
    for (truth, pred) in labels.iter().zip(predicted) {
        match (truth.is_outlier(), pred) {
            (true, true) => counts.tp += 1,
            (false, true) => counts.fp += 1,
            (true, false) => counts.fn_ += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(EvalReport {
        auc: auc(scores, labels, polarity)?,
        f1: counts.f1(),
        threshold_used: scores[order[pos - 1]],
        counts,
        polarity,
    })
}
