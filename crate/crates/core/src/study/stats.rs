use super::{Result, StudyError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta, evaluated with modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) || !(0.0..=1.0).contains(&x) {
        return Err(StudyError::Domain(format!(
            "I_x(a, b) needs a, b > 0 and x in [0, 1]; got a={a}, b={b}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).expect("df > 0 checked by callers")
}

/// Upper-tail p-value of Fisher's F with `(d1, d2)` degrees of freedom.
pub fn f_upper_p(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if f <= 0.0 {
        return 1.0;
    }
    incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).expect("df > 0 checked by callers")
}

/// Significance stars after correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "***")]
    Three,
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        })
    }
}

/// Family-wise levels for one, two and three stars.
pub const STAR_ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];

/// Bonferroni-adjusted per-test threshold `alpha / m`.
pub fn bonferroni(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StudyError::Domain(format!(
            "alpha {alpha} must lie in (0, 1)"
        )));
    }
    if m == 0 {
        return Err(StudyError::Domain(
            "number of comparisons must be at least 1".into(),
        ));
    }
    Ok(alpha / m as f64)
}

/// Threshold as printed in tables: truncated (not rounded) to five decimals.
pub fn printed_threshold(alpha: f64, m: usize) -> Result<f64> {
    let t = bonferroni(alpha, m)?;
    Ok(((t * 1e5) + 1e-9).floor() / 1e5)
}

/// Corrected thresholds for `*`, `**`, `***`.
pub fn star_thresholds(m: usize) -> Result<[f64; 3]> {
    Ok([
        bonferroni(STAR_ALPHAS[0], m)?,
        bonferroni(STAR_ALPHAS[1], m)?,
        bonferroni(STAR_ALPHAS[2], m)?,
    ])
}

/// Highest star level whose corrected threshold `p` falls strictly below.
pub fn stars_for(p: f64, m: usize) -> Result<Option<Stars>> {
    let t = star_thresholds(m)?;
    Ok(if p < t[2] {
        Some(Stars::Three)
    } else if p < t[1] {
        Some(Stars::Two)
    } else if p < t[0] {
        Some(Stars::One)
    } else {
        None
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(f64),
    Two(f64, f64),
}

/// Outcome of a t or F test. Non-finite statistics serialize as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(with = "nonfinite")]
    pub statistic: f64,
    pub df: Df,
    pub p_value: f64,
    pub significant_at: Option<Stars>,
    /// Zero error variance: the statistic is 0 or infinite by convention.
    pub degenerate: bool,
}

mod nonfinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Treats a spread as zero when it is negligible next to the data's scale.
fn negligible(spread: f64, scale: f64) -> bool {
    spread <= 1e-12 * scale.max(1.0)
}

/// Paired t-test on `d = post − pre`, two-sided.
pub fn paired_t_test(pre: &[f64], post: &[f64]) -> Result<TestResult> {
    if pre.len() != post.len() {
        return Err(StudyError::LengthMismatch(pre.len(), post.len()));
    }
    let n = pre.len();
    if n < 2 {
        return Err(StudyError::TooFew { need: 2, got: n });
    }
    let d: Vec<f64> = post.iter().zip(pre).map(|(b, a)| b - a).collect();
    let df = (n - 1) as f64;
    let (md, sd) = (mean(&d), sample_sd(&d));
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (statistic, p_value, degenerate) = if negligible(sd, scale) {
        if md == 0.0 {
            (0.0, 1.0, true)
        } else {
            (f64::INFINITY.copysign(md), 0.0, true)
        }
    } else {
        let t = md / (sd / (n as f64).sqrt());
        (t, t_two_sided_p(t, df), false)
    };
    Ok(TestResult {
        statistic,
        df: Df::One(df),
        p_value,
        significant_at: None,
        degenerate,
    })
}

/// One effect of the mixed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaEffect {
    pub ss: f64,
    pub df: f64,
    pub test: TestResult,
}

/// Two-level within (phase) by g-level between (group) mixed ANOVA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedAnova {
    pub group: AnovaEffect,
    pub phase: AnovaEffect,
    pub interaction: AnovaEffect,
    /// Subjects within groups (between-subjects error), df `N − g`.
    pub ss_subjects: f64,
    /// Phase × subjects within groups (within-subjects error), df `N − g`.
    pub ss_error: f64,
    pub df_error: f64,
}

fn f_effect(ss: f64, df: f64, ss_err: f64, df_err: f64, scale: f64) -> AnovaEffect {
    let ms_err = ss_err / df_err;
    let (statistic, p_value, degenerate) = if negligible(ms_err, scale) {
        if negligible(ss, scale) {
            (0.0, 1.0, true)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else {
        let f = (ss / df) / ms_err;
        (f, f_upper_p(f, df, df_err), false)
    };
    AnovaEffect {
        ss,
        df,
        test: TestResult {
            statistic,
            df: Df::Two(df, df_err),
            p_value,
            significant_at: None,
            degenerate,
        },
    }
}

/// Mixed ANOVA over per-participant `(pre, post)` scores and a between-group
/// label per participant.
pub fn mixed_anova<L: Ord + Clone + fmt::Debug>(
    scores: &[(f64, f64)],
    groups: &[L],
) -> Result<MixedAnova> {
    if scores.len() != groups.len() {
        return Err(StudyError::LengthMismatch(scores.len(), groups.len()));
    }
    let mut members: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(StudyError::TooFew {
            need: 2,
            got: members.len(),
        });
    }
    if let Some((g, m)) = members.iter().find(|(_, m)| m.len() < 2) {
        return Err(StudyError::GroupTooSmall {
            group: format!("{g:?}"),
            size: m.len(),
        });
    }
    let n = scores.len() as f64;
    let g = members.len() as f64;
    let grand = scores.iter().map(|(a, b)| a + b).sum::<f64>() / (2.0 * n);
    let phase_means = [
        scores.iter().map(|s| s.0).sum::<f64>() / n,
        scores.iter().map(|s| s.1).sum::<f64>() / n,
    ];

    let ss_total: f64 = scores
        .iter()
        .map(|(a, b)| (a - grand).powi(2) + (b - grand).powi(2))
        .sum();
    let ss_between_subjects: f64 = scores
        .iter()
        .map(|(a, b)| 2.0 * ((a + b) / 2.0 - grand).powi(2))
        .sum();
    let ss_phase: f64 = phase_means.iter().map(|m| n * (m - grand).powi(2)).sum();
    let mut ss_group = 0.0;
    let mut ss_inter = 0.0;
    for idx in members.values() {
        let nj = idx.len() as f64;
        let pre = idx.iter().map(|&i| scores[i].0).sum::<f64>() / nj;
        let post = idx.iter().map(|&i| scores[i].1).sum::<f64>() / nj;
        let mj = (pre + post) / 2.0;
        ss_group += 2.0 * nj * (mj - grand).powi(2);
        ss_inter += nj
            * ((pre - mj - phase_means[0] + grand).powi(2)
                + (post - mj - phase_means[1] + grand).powi(2));
    }
    let ss_subjects = (ss_between_subjects - ss_group).max(0.0);
    let mut ss_error = 0.0;
    for idx in members.values() {
        let nj = idx.len() as f64;
        let cell = [
            idx.iter().map(|&i| scores[i].0).sum::<f64>() / nj,
            idx.iter().map(|&i| scores[i].1).sum::<f64>() / nj,
        ];
        let mj = (cell[0] + cell[1]) / 2.0;
        for &i in idx {
            let si = (scores[i].0 + scores[i].1) / 2.0;
            ss_error += (scores[i].0 - si - cell[0] + mj).powi(2)
                + (scores[i].1 - si - cell[1] + mj).powi(2);
        }
    }
    let df_error = n - g;
    let scale = ss_total.max(grand * grand);
    Ok(MixedAnova {
        group: f_effect(ss_group, g - 1.0, ss_subjects, df_error, scale),
        phase: f_effect(ss_phase, 1.0, ss_error, df_error, scale),
        interaction: f_effect(ss_inter, g - 1.0, ss_error, df_error, scale),
        ss_subjects,
        ss_error,
        df_error,
    })
}

/// Paired t-test inside each group, starred against Bonferroni thresholds
/// for `m` comparisons.
pub fn posthoc_paired<L: Clone>(
    groups: &[(L, Vec<f64>, Vec<f64>)],
    m: usize,
) -> Result<Vec<(L, TestResult)>> {
    groups
        .iter()
        .map(|(label, pre, post)| {
            let mut r = paired_t_test(pre, post)?;
            r.significant_at = stars_for(r.p_value, m)?;
            Ok((label.clone(), r))
        })
        .collect()
}
