use super::*;
use crate::feed::ConsumptionReport;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Comparisons behind the overall thresholds: five questions plus the mean.
pub const OVERALL_COMPARISONS: usize = 6;
/// Comparisons behind the thresholds of a three-level demographic axis.
pub const AXIS_COMPARISONS: usize = 4;
/// Comparisons behind the thresholds of the six crossed groups.
pub const CROSSED_COMPARISONS: usize = 7;

/// Pre/post comparison of one score for one set of participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub label: String,
    pub n: usize,
    pub mean_pre: f64,
    pub mean_post: f64,
    pub mean_diff: f64,
    /// Sample sd of the post − pre differences; 0 when `n < 2`.
    pub sd_diff: f64,
    pub test: Option<TestResult>,
    /// `p < alpha / m`, when a test was run.
    pub significant: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub comparisons: usize,
    /// Exact `alpha / m` for `*`, `**`, `***`.
    pub exact: [f64; 3],
    /// The same thresholds truncated to five decimals.
    pub printed: [f64; 3],
}

impl Thresholds {
    pub fn new(m: usize) -> Result<Self> {
        let exact = star_thresholds(m)?;
        let printed = [
            printed_threshold(STAR_ALPHAS[0], m)?,
            printed_threshold(STAR_ALPHAS[1], m)?,
            printed_threshold(STAR_ALPHAS[2], m)?,
        ];
        Ok(Self {
            comparisons: m,
            exact,
            printed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub axis: String,
    pub thresholds: Thresholds,
    /// Groups entering the ANOVA (those with at least two participants).
    pub anova_groups: Vec<String>,
    pub anova: Option<MixedAnova>,
    pub note: Option<String>,
    pub groups: Vec<PairedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub alpha: f64,
    /// Participants with both surveys.
    pub participants: usize,
    /// Participants missing one of the two surveys.
    pub incomplete: Vec<String>,
    pub overall_thresholds: Thresholds,
    /// Q1..Q5 followed by the mean score.
    pub overall: Vec<PairedSummary>,
    pub axes: Vec<AxisReport>,
    pub consumption: Option<ConsumptionReport>,
}

struct Participant<'a> {
    pre: &'a SurveyRecord,
    post: &'a SurveyRecord,
    groups: DemoGroups,
    age: AgeBand,
}

fn summarize(
    label: &str,
    pre: &[f64],
    post: &[f64],
    alpha: f64,
    m: usize,
) -> Result<PairedSummary> {
    let n = pre.len();
    let avg = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let diffs: Vec<f64> = post.iter().zip(pre).map(|(b, a)| b - a).collect();
    let mut s = PairedSummary {
        label: label.to_string(),
        n,
        mean_pre: avg(pre),
        mean_post: avg(post),
        mean_diff: avg(&diffs),
        sd_diff: if n >= 2 { sample_sd(&diffs) } else { 0.0 },
        test: None,
        significant: None,
        note: None,
    };
    if n < 2 {
        s.note = Some(format!("needs at least 2 participants, has {n}"));
        return Ok(s);
    }
    let mut t = paired_t_test(pre, post)?;
    t.significant_at = stars_for(t.p_value, m)?;
    s.significant = Some(t.p_value < bonferroni(alpha, m)?);
    s.test = Some(t);
    Ok(s)
}

fn axis<K: Ord + Copy + std::fmt::Debug>(
    name: &str,
    people: &[Participant],
    levels: &[K],
    key: impl Fn(&Participant) -> K,
    label: impl Fn(K) -> &'static str,
    alpha: f64,
    m: usize,
) -> Result<AxisReport> {
    let mut groups = Vec::new();
    for &level in levels {
        let members: Vec<&Participant> = people.iter().filter(|p| key(p) == level).collect();
        let pre: Vec<f64> = members.iter().map(|p| ec_score(p.pre)).collect();
        let post: Vec<f64> = members.iter().map(|p| ec_score(p.post)).collect();
        groups.push(summarize(label(level), &pre, &post, alpha, m)?);
    }
    let eligible: Vec<K> = levels
        .iter()
        .copied()
        .filter(|&l| people.iter().filter(|p| key(p) == l).count() >= 2)
        .collect();
    let (anova, note) = if eligible.len() >= 2 {
        let inside: Vec<&Participant> = people
            .iter()
            .filter(|p| eligible.contains(&key(p)))
            .collect();
        let scores: Vec<(f64, f64)> = inside
            .iter()
            .map(|p| (ec_score(p.pre), ec_score(p.post)))
            .collect();
        let labels: Vec<K> = inside.iter().map(|p| key(p)).collect();
        let mut table = mixed_anova(&scores, &labels)?;
        table.interaction.test.significant_at = stars_for(table.interaction.test.p_value, 1)?;
        (Some(table), None)
    } else {
        (
            None,
            Some(format!(
                "{} group(s) with at least 2 participants; ANOVA needs 2",
                eligible.len()
            )),
        )
    };
    Ok(AxisReport {
        axis: name.to_string(),
        thresholds: Thresholds::new(m)?,
        anova_groups: eligible.iter().map(|&l| label(l).to_string()).collect(),
        anova,
        note,
        groups,
    })
}

/// Builds the full study report from survey records. Records are paired by
/// participant; participants lacking either phase are listed as incomplete.
pub fn study_report(
    records: &[SurveyRecord],
    alpha: f64,
    consumption: Option<ConsumptionReport>,
) -> Result<StudyReport> {
    bonferroni(alpha, 1)?;
    let mut by_id: BTreeMap<&str, (Option<&SurveyRecord>, Option<&SurveyRecord>)> = BTreeMap::new();
    for r in records {
        r.validate()?;
        let slot = by_id.entry(r.participant_id.as_str()).or_default();
        let target = match r.phase {
            Phase::Pre => &mut slot.0,
            Phase::Post => &mut slot.1,
        };
        if target.replace(r).is_some() {
            return Err(StudyError::Duplicate {
                participant: r.participant_id.clone(),
                phase: r.phase,
            });
        }
    }
    let mut people = Vec::new();
    let mut incomplete = Vec::new();
    for (id, pair) in by_id {
        match pair {
            (Some(pre), Some(post)) => {
                let d = pre
                    .demographics
                    .as_ref()
                    .expect("validated pre-survey has demographics");
                people.push(Participant {
                    pre,
                    post,
                    groups: group_demographics(d),
                    age: d.age,
                });
            }
            _ => incomplete.push(id.to_string()),
        }
    }

    let mut overall = Vec::new();
    for (q, tag) in QUESTION_TAGS.iter().enumerate() {
        let pre: Vec<f64> = people.iter().map(|p| f64::from(p.pre.answers[q])).collect();
        let post: Vec<f64> = people
            .iter()
            .map(|p| f64::from(p.post.answers[q]))
            .collect();
        overall.push(summarize(
            &format!("Q{} {tag}", q + 1),
            &pre,
            &post,
            alpha,
            OVERALL_COMPARISONS,
        )?);
    }
    let pre: Vec<f64> = people.iter().map(|p| ec_score(p.pre)).collect();
    let post: Vec<f64> = people.iter().map(|p| ec_score(p.post)).collect();
    overall.push(summarize("Mean", &pre, &post, alpha, OVERALL_COMPARISONS)?);

    let axes = vec![
        axis(
            "age",
            &people,
            &AgeBand::ALL,
            |p| p.age,
            AgeBand::label,
            alpha,
            AXIS_COMPARISONS,
        )?,
        axis(
            "political_stance",
            &people,
            &StanceGroup::ALL,
            |p| p.groups.stance,
            StanceGroup::label,
            alpha,
            AXIS_COMPARISONS,
        )?,
        axis(
            "political_interest",
            &people,
            &InterestGroup::ALL,
            |p| p.groups.interest,
            InterestGroup::label,
            alpha,
            AXIS_COMPARISONS,
        )?,
        axis(
            "interest_x_stance",
            &people,
            &CrossedGroup::ALL,
            |p| p.groups.crossed,
            CrossedGroup::label,
            alpha,
            CROSSED_COMPARISONS,
        )?,
    ];

    Ok(StudyReport {
        alpha,
        participants: people.len(),
        incomplete,
        overall_thresholds: Thresholds::new(OVERALL_COMPARISONS)?,
        overall,
        axes,
        consumption,
    })
}

/// Declared binary stance per participant, from the pre-survey.
pub fn declared_stances(
    records: &[SurveyRecord],
) -> BTreeMap<String, Option<crate::stance::Polarity>> {
    records
        .iter()
        .filter_map(|r| {
            r.demographics.as_ref().map(|d| {
                (
                    r.participant_id.clone(),
                    StanceGroup::of(d.political_stance).polarity(),
                )
            })
        })
        .collect()
}

fn fmt_test(t: &Option<TestResult>) -> String {
    match t {
        None => "-".into(),
        Some(t) => {
            let df = match t.df {
                Df::One(d) => format!("{d}"),
                Df::Two(a, b) => format!("{a}, {b}"),
            };
            let stars = t.significant_at.map(|s| s.to_string()).unwrap_or_default();
            format!(
                "t/F({df}) = {:.3}, p = {:.5}{stars}",
                t.statistic, t.p_value
            )
        }
    }
}

fn fmt_summary(out: &mut String, s: &PairedSummary) {
    let _ = writeln!(
        out,
        "  {:<14} n={:<4} pre={:.3} post={:.3} diff={:+.3}  {}",
        s.label,
        s.n,
        s.mean_pre,
        s.mean_post,
        s.mean_diff,
        fmt_test(&s.test)
    );
}

fn fmt_thresholds(t: &Thresholds) -> String {
    format!(
        "***p<{:.5}, **p<{:.5}, *p<{:.5} (m = {})",
        t.printed[2], t.printed[1], t.printed[0], t.comparisons
    )
}

/// Plain-text rendering of a report.
pub fn render_report_text(r: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "participants: {} complete, {} incomplete",
        r.participants,
        r.incomplete.len()
    );
    let _ = writeln!(
        out,
        "\nEC breaking score, pre vs post  [{}]",
        fmt_thresholds(&r.overall_thresholds)
    );
    for s in &r.overall {
        fmt_summary(&mut out, s);
    }
    for a in &r.axes {
        let _ = writeln!(out, "\n{}  [{}]", a.axis, fmt_thresholds(&a.thresholds));
        match &a.anova {
            Some(t) => {
                let _ = writeln!(
                    out,
                    "  interaction: {}",
                    fmt_test(&Some(t.interaction.test.clone()))
                );
            }
            None => {
                let _ = writeln!(out, "  interaction: {}", a.note.as_deref().unwrap_or("-"));
            }
        }
        for s in &a.groups {
            fmt_summary(&mut out, s);
        }
    }
    if let Some(c) = &r.consumption {
        let _ = writeln!(out, "\nconsumption ({:?})", c.kind);
        let ratio = c
            .ratio
            .map(|(a, b)| format!("{a:.2}:{b:.2}"))
            .unwrap_or_else(|| "undefined".into());
        let _ = writeln!(
            out,
            "  own {} / opposing {} of {} reads, ratio {ratio}; articles read {:.2} (sd {:.2})",
            c.own_reads, c.opposing_reads, c.total_reads, c.articles_read_mean, c.articles_read_sd
        );
    }
    out
}
