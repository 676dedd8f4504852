use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{mean_sd, pearson, welch_t_test, MeanSd};
use crate::sim::{GroupAssignment, Phase, PhaseSchedule, SessionLogSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: GroupAssignment,
    pub subjects: usize,
    pub per_phase: Vec<(Phase, MeanSd)>,
    /// Mistakes during reinforced phases.
    pub before: MeanSd,
    /// Mistakes during unreinforced phases.
    pub after: MeanSd,
}

/// Welch test on after-transfer mistakes between two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: GroupAssignment,
    pub b: GroupAssignment,
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub groups: Vec<GroupStats>,
    pub pairwise: Vec<PairwiseTest>,
    /// Learned group: correlation between per-session total mistakes and
    /// total regret. `None` when undefined (e.g. nobody made a mistake).
    pub pearson_r: Option<f64>,
    /// Learned group: fraction of sessions whose argmax reinforcer matches
    /// the learner's latent favourite.
    pub preference_accuracy: Option<f64>,
}

/// Correlation between total mistakes and total regret, one point per session.
pub fn regret_mistake_correlation(summaries: &[&SessionLogSummary]) -> Result<f64> {
    if summaries.len() < 2 {
        return Err(Error::Validation("need at least 2 sessions".into()));
    }
    let mistakes: Vec<f64> = summaries.iter().map(|s| s.total_mistakes() as f64).collect();
    let regrets: Vec<f64> = summaries.iter().map(|s| s.total_regret()).collect();
    pearson(&mistakes, &regrets)
}

pub fn preference_accuracy(summaries: &[&SessionLogSummary]) -> Option<f64> {
    let judged: Vec<bool> = summaries
        .iter()
        .filter_map(|s| Some(s.identified_preference? == s.true_preference?))
        .collect();
    if judged.is_empty() {
        return None;
    }
    Some(judged.iter().filter(|hit| **hit).count() as f64 / judged.len() as f64)
}

impl ExperimentStats {
    /// Aggregates sessions per group, in the order given by `groups`.
    pub fn from_sessions(
        groups: &[GroupAssignment],
        schedule: &PhaseSchedule,
        sessions: &[(GroupAssignment, &SessionLogSummary)],
    ) -> Result<Self> {
        let mut phases: Vec<Phase> = Vec::new();
        for spec in &schedule.phases {
            if !phases.contains(&spec.label) {
                phases.push(spec.label);
            }
        }

        let members = |g: GroupAssignment| -> Vec<&SessionLogSummary> {
            sessions.iter().filter(|(sg, _)| *sg == g).map(|(_, s)| *s).collect()
        };
        let after_of = |g: GroupAssignment| -> Vec<f64> {
            members(g).iter().map(|s| s.mistakes_after() as f64).collect()
        };

        let group_stats = groups
            .iter()
            .map(|&g| {
                let m = members(g);
                let per_phase = phases
                    .iter()
                    .map(|&p| {
                        let xs: Vec<f64> = m.iter().map(|s| s.mistakes_in(p) as f64).collect();
                        (p, mean_sd(&xs))
                    })
                    .collect();
                let before: Vec<f64> = m.iter().map(|s| s.mistakes_before() as f64).collect();
                GroupStats {
                    group: g,
                    subjects: m.len(),
                    per_phase,
                    before: mean_sd(&before),
                    after: mean_sd(&after_of(g)),
                }
            })
            .collect();

        let mut pairwise = Vec::new();
        for (i, &a) in groups.iter().enumerate() {
            for &b in &groups[i + 1..] {
                let w = welch_t_test(&after_of(a), &after_of(b))?;
                pairwise.push(PairwiseTest { a, b, t_statistic: w.t_statistic, df: w.df, p_value: w.p_value });
            }
        }

        let learned = members(GroupAssignment::Learned);
        let pearson_r = match regret_mistake_correlation(&learned) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_) | Error::Validation(_)) => None,
            Err(other) => return Err(other),
        };

        Ok(Self {
            groups: group_stats,
            pairwise,
            pearson_r,
            preference_accuracy: preference_accuracy(&learned),
        })
    }

    pub fn group(&self, g: GroupAssignment) -> Option<&GroupStats> {
        self.groups.iter().find(|s| s.group == g)
    }

    pub fn test_between(&self, a: GroupAssignment, b: GroupAssignment) -> Option<&PairwiseTest> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    /// Plain-text report: mistakes per phase as mean and standard deviation
    /// for each group, the before/after totals, pairwise tests and the
    /// learned-group metrics.
    pub fn render_report(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<22}", "Phase");
        for g in &self.groups {
            let _ = write!(out, "| {:^17} ", format!("{} (n={})", g.group, g.subjects));
        }
        out.push('\n');
        let _ = write!(out, "{:<22}", "");
        for _ in &self.groups {
            let _ = write!(out, "| {:>8} {:>8} ", "M", "SD");
        }
        out.push('\n');

        let rows: Vec<(String, Vec<MeanSd>)> = self
            .groups
            .first()
            .map(|g| g.per_phase.iter().map(|(p, _)| *p).collect::<Vec<_>>())
            .unwrap_or_default()
            .into_iter()
            .enumerate()
            .map(|(k, p)| (p.to_string(), self.groups.iter().map(|g| g.per_phase[k].1).collect()))
            .chain([
                ("Before (reinforced)".to_owned(), self.groups.iter().map(|g| g.before).collect()),
                ("After (unreinforced)".to_owned(), self.groups.iter().map(|g| g.after).collect()),
            ])
            .collect();
        for (label, cells) in rows {
            let _ = write!(out, "{label:<22}");
            for c in cells {
                let _ = write!(out, "| {:>8.3} {:>8.3} ", c.mean, c.sd);
            }
            out.push('\n');
        }

        out.push_str("\nWelch t-tests on after-transfer mistakes (two-sided):\n");
        for p in &self.pairwise {
            let _ = writeln!(
                out,
                "  {} vs {}: t = {:.4}, df = {:.2}, p = {:.6}",
                p.a, p.b, p.t_statistic, p.df, p.p_value
            );
        }
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_owned(), |x| format!("{x:.4}"));
        let _ = writeln!(out, "\nLearned group regret-mistake correlation r = {}", fmt_opt(self.pearson_r));
        let _ = writeln!(
            out,
            "Learned group preference identification accuracy = {}",
            fmt_opt(self.preference_accuracy)
        );
        out
    }
}
