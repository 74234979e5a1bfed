//! Detection matching, evaluation metrics and the optimization costs.

use std::io::Write;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::audio::VowelSegment;
use crate::error::{Error, Result};

/// Cost assigned when precision or recall is zero.
pub const DEGENERATE_COST: f64 = 1e6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl AddAssign for MatchResult {
    fn add_assign(&mut self, o: Self) {
        self.true_positives += o.true_positives;
        self.false_positives += o.false_positives;
        self.false_negatives += o.false_negatives;
    }
}

impl std::iter::Sum for MatchResult {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut acc = MatchResult::default();
        for m in iter {
            acc += m;
        }
        acc
    }
}

/// Greedy one-to-one matching of detection times to ground-truth segments.
///
/// Segments are visited in time order; each claims the unclaimed detection
/// inside it that is nearest its midpoint.
pub fn match_detections(detections: &[f64], segments: &[VowelSegment]) -> MatchResult {
    let mut order: Vec<&VowelSegment> = segments.iter().collect();
    order.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then(a.end_s.total_cmp(&b.end_s))
    });
    let mut claimed = vec![false; detections.len()];
    let mut tp = 0;
    for seg in order {
        let mid = seg.midpoint();
        let lo = detections.partition_point(|&t| t < seg.start_s);
        let best = (lo..detections.len())
            .take_while(|&i| detections[i] <= seg.end_s)
            .filter(|&i| !claimed[i])
            .min_by(|&a, &b| {
                (detections[a] - mid)
                    .abs()
                    .total_cmp(&(detections[b] - mid).abs())
            });
        if let Some(i) = best {
            claimed[i] = true;
            tp += 1;
        }
    }
    MatchResult {
        true_positives: tp,
        false_positives: detections.len() - tp,
        false_negatives: segments.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

pub fn precision_recall_f(m: &MatchResult) -> PrecisionRecall {
    let detected = m.true_positives + m.false_positives;
    let actual = m.true_positives + m.false_negatives;
    let precision = if detected == 0 {
        0.0
    } else {
        m.true_positives as f64 / detected as f64
    };
    let recall = if actual == 0 {
        0.0
    } else {
        m.true_positives as f64 / actual as f64
    };
    PrecisionRecall {
        precision,
        recall,
        f_score: f_from_pr(precision, recall),
    }
}

pub fn f_from_pr(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// `(P + R) / (2PR)`, or [`DEGENERATE_COST`] when `P·R = 0`.
pub fn inv_f_from_pr(p: f64, r: f64) -> f64 {
    if p * r > 0.0 {
        (p + r) / (2.0 * p * r)
    } else {
        DEGENERATE_COST
    }
}

pub fn cost_inv_f(m: &MatchResult) -> f64 {
    let pr = precision_recall_f(m);
    inv_f_from_pr(pr.precision, pr.recall)
}

pub fn cost_mae(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    if predicted.is_empty() {
        return Err(Error::validation(
            "mean absolute error needs at least one utterance",
        ));
    }
    let total: usize = predicted
        .iter()
        .zip(actual)
        .map(|(&p, &a)| p.abs_diff(a))
        .sum();
    Ok(total as f64 / predicted.len() as f64)
}

/// Mean relative count error in percent.
pub fn sr_error_rate(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    if predicted.is_empty() {
        return Err(Error::validation(
            "SR error rate needs at least one utterance",
        ));
    }
    let mut sum = 0.0;
    for (i, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
        if a == 0 {
            return Err(Error::validation(format!(
                "utterance #{i} has zero actual syllables"
            )));
        }
        sum += p.abs_diff(a) as f64 / a as f64;
    }
    Ok(100.0 * sum / predicted.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation("correlation inputs differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 observations, have {n}"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_count_corr(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    let p: Vec<f64> = predicted.iter().map(|&v| v as f64).collect();
    let a: Vec<f64> = actual.iter().map(|&v| v as f64).collect();
    pearson(&p, &a)
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "predicted ({}) and actual ({}) counts differ in length",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEval {
    pub id: String,
    pub actual_count: usize,
    pub predicted_count: usize,
    #[serde(flatten)]
    pub matches: MatchResult,
    pub duration_s: f64,
    pub speech_rate_sps: f64,
}

impl UtteranceEval {
    pub fn new(id: &str, detections: &[f64], segments: &[VowelSegment], duration_s: f64) -> Self {
        UtteranceEval {
            id: id.to_string(),
            actual_count: segments.len(),
            predicted_count: detections.len(),
            matches: match_detections(detections, segments),
            duration_s,
            speech_rate_sps: if duration_s > 0.0 {
                detections.len() as f64 / duration_s
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub mae_count: f64,
    /// `None` when some utterance has no ground-truth syllables.
    pub sr_error_rate_pct: Option<f64>,
    /// `None` when the correlation is undefined.
    pub pearson_count_corr: Option<f64>,
    #[serde(flatten)]
    pub totals: MatchResult,
    pub per_utterance: Vec<UtteranceEval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Pools TP/FP/FN over all rows before computing P, R and F.
    pub fn from_rows(rows: Vec<UtteranceEval>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("cannot evaluate an empty corpus"));
        }
        let totals: MatchResult = rows.iter().map(|r| r.matches).sum();
        let pr = precision_recall_f(&totals);
        let predicted: Vec<usize> = rows.iter().map(|r| r.predicted_count).collect();
        let actual: Vec<usize> = rows.iter().map(|r| r.actual_count).collect();
        let mut warnings = Vec::new();
        let sr_error_rate_pct = match rows.iter().find(|r| r.actual_count == 0) {
            Some(r) => {
                warnings.push(format!(
                    "SR error rate undefined: utterance '{}' has zero actual syllables",
                    r.id
                ));
                None
            }
            None => Some(sr_error_rate(&predicted, &actual)?),
        };
        let pearson_count_corr = match pearson_count_corr(&predicted, &actual) {
            Ok(v) => Some(v),
            Err(Error::UndefinedCorrelation(msg)) => {
                warnings.push(format!("count correlation undefined: {msg}"));
                None
            }
            Err(e) => return Err(e),
        };
        Ok(EvalReport {
            precision: pr.precision,
            recall: pr.recall,
            f_score: pr.f_score,
            mae_count: cost_mae(&predicted, &actual)?,
            sr_error_rate_pct,
            pearson_count_corr,
            totals,
            per_utterance: rows,
            warnings,
        })
    }

    pub const CSV_HEADER: &'static str =
        "id,actual_count,predicted_count,true_positives,false_positives,false_negatives,duration_s,speech_rate_sps,precision,recall,f_score,mae_count,sr_error_rate_pct,pearson_count_corr";

    /// One row per utterance followed by a `__summary__` row. Summary-only
    /// columns are empty on utterance rows; undefined values are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.per_utterance {
            let pr = precision_recall_f(&r.matches);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},,,",
                r.id,
                r.actual_count,
                r.predicted_count,
                r.matches.true_positives,
                r.matches.false_positives,
                r.matches.false_negatives,
                r.duration_s,
                r.speech_rate_sps,
                pr.precision,
                pr.recall,
                pr.f_score,
            )?;
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let actual: usize = self.per_utterance.iter().map(|r| r.actual_count).sum();
        let predicted: usize = self.per_utterance.iter().map(|r| r.predicted_count).sum();
        let duration: f64 = self.per_utterance.iter().map(|r| r.duration_s).sum();
        writeln!(
            w,
            "__summary__,{},{},{},{},{},{},,{},{},{},{},{},{}",
            actual,
            predicted,
            self.totals.true_positives,
            self.totals.false_positives,
            self.totals.false_negatives,
            duration,
            self.precision,
            self.recall,
            self.f_score,
            self.mae_count,
            opt(self.sr_error_rate_pct),
            opt(self.pearson_count_corr),
        )
    }
}
