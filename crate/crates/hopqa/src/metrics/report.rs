//! Aggregation of per-example scores into a final evaluation report.

use serde::{Deserialize, Serialize};

use super::{AnswerScore, ChainTable};

/// Scores for one evaluated example. Supporting-fact and joint scores are
/// absent when the prediction source provides no sentence-level facts
/// (e.g. LLM runs that emit titles only).
#[derive(Debug, Clone)]
pub struct ExampleScores {
    pub answer: AnswerScore,
    pub support: Option<AnswerScore>,
    pub joint: Option<AnswerScore>,
}

/// Corpus means of one score family, scaled to `[0, 100]` and rounded to
/// two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub em: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub count: usize,
}

/// Quality scores for generated sub-question sets, in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QdQuality {
    pub f_measure: f64,
    pub rouge1: f64,
    pub rouge_l: f64,
    pub bleu: f64,
    pub count: usize,
}

/// Final evaluation document: answer / supporting-fact / joint metrics,
/// optional decomposition quality, and the optional reasoning-chain table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub examples: usize,
    pub answer: MeanScores,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<MeanScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<MeanScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qd: Option<QdQuality>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainTable>,
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Order-independent mean: values are sorted before summation so reports
/// are identical under input permutation.
fn stable_mean(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_scores(scores: &[AnswerScore]) -> MeanScores {
    let mut em: Vec<f64> = scores.iter().map(|s| s.em).collect();
    let mut f1: Vec<f64> = scores.iter().map(|s| s.f1).collect();
    let mut precision: Vec<f64> = scores.iter().map(|s| s.precision).collect();
    let mut recall: Vec<f64> = scores.iter().map(|s| s.recall).collect();
    MeanScores {
        em: round2(stable_mean(&mut em) * 100.0),
        f1: round2(stable_mean(&mut f1) * 100.0),
        precision: round2(stable_mean(&mut precision) * 100.0),
        recall: round2(stable_mean(&mut recall) * 100.0),
        count: scores.len(),
    }
}

/// Means per-example scores into an [`EvalReport`], reported x100 with two
/// decimals.
pub fn aggregate_report(per_example: &[ExampleScores]) -> EvalReport {
    let answers: Vec<AnswerScore> = per_example.iter().map(|s| s.answer).collect();
    let supports: Vec<AnswerScore> = per_example.iter().filter_map(|s| s.support).collect();
    let joints: Vec<AnswerScore> = per_example.iter().filter_map(|s| s.joint).collect();
    EvalReport {
        examples: per_example.len(),
        answer: mean_scores(&answers),
        support: (!supports.is_empty()).then(|| mean_scores(&supports)),
        joint: (!joints.is_empty()).then(|| mean_scores(&joints)),
        qd: None,
        chain: None,
    }
}

impl EvalReport {
    /// Renders the report as an aligned text table. Columns are always
    /// labeled explicitly.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("examples: {}\n", self.examples));
        out.push_str(&format!(
            "{:<8} {:>8} {:>8} {:>10} {:>8}\n",
            "metric", "EM", "F1", "Precision", "Recall"
        ));
        let mut row = |name: &str, m: &MeanScores| {
            out.push_str(&format!(
                "{:<8} {:>8.2} {:>8.2} {:>10.2} {:>8.2}\n",
                name, m.em, m.f1, m.precision, m.recall
            ));
        };
        row("Ans", &self.answer);
        if let Some(sup) = &self.support {
            row("Sup", sup);
        }
        if let Some(joint) = &self.joint {
            row("Joint", joint);
        }
        if let Some(qd) = &self.qd {
            out.push_str(&format!(
                "QD       {:>8} {:>8} {:>8} {:>8}\n",
                "F", "ROUGE-1", "ROUGE-L", "BLEU"
            ));
            out.push_str(&format!(
                "         {:>8.2} {:>8.2} {:>8.2} {:>8.2}\n",
                qd.f_measure, qd.rouge1, qd.rouge_l, qd.bleu
            ));
        }
        if let Some(chain) = &self.chain {
            out.push_str(&format!("chain    ({} examples)\n", chain.total));
            for (label, pct) in chain.rows() {
                out.push_str(&format!("  {:<5} {:>7.1}\n", label, pct));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only_answer(f1: f64) -> ExampleScores {
        ExampleScores {
            answer: AnswerScore { em: f1, f1, precision: f1, recall: f1 },
            support: None,
            joint: None,
        }
    }

    #[test]
    fn mean_of_two_examples() {
        let report = aggregate_report(&[only_answer(1.0), only_answer(0.0)]);
        assert_eq!(report.answer.f1, 50.0);
        assert_eq!(report.examples, 2);
        assert!(report.support.is_none());
    }

    #[test]
    fn single_example_scales_by_100() {
        let report = aggregate_report(&[only_answer(0.5)]);
        assert_eq!(report.answer.f1, 50.0);
        assert_eq!(report.answer.count, 1);
    }

    #[test]
    fn report_is_permutation_invariant() {
        let scores: Vec<ExampleScores> =
            (0..50).map(|i| only_answer(i as f64 / 49.0)).collect();
        let mut shuffled = scores.clone();
        shuffled.reverse();
        shuffled.swap(3, 40);
        assert_eq!(aggregate_report(&scores), aggregate_report(&shuffled));
    }

    #[test]
    fn render_labels_every_column() {
        let mut report = aggregate_report(&[only_answer(1.0)]);
        report.support = Some(report.answer);
        let table = report.render_table();
        assert!(table.contains("EM"));
        assert!(table.contains("F1"));
        assert!(table.contains("Sup"));
    }
}
