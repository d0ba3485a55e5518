use super::{ReadEvent, ReadKind};
use crate::stance::Polarity;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConsumption {
    pub session_id: String,
    /// Declared binary stance; `None` for moderates and undeclared sessions.
    pub stance: Option<Polarity>,
    /// Counted events of the report's kind.
    pub reads: usize,
    pub own_reads: usize,
    pub opposing_reads: usize,
    pub distinct_articles: usize,
    /// `(own, opposing)` shares; `None` when the session has no stance or no
    /// stance-attributed reads.
    pub ratio: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionReport {
    pub kind: ReadKind,
    pub sessions: Vec<SessionConsumption>,
    pub own_reads: usize,
    pub opposing_reads: usize,
    pub total_reads: usize,
    pub ratio: Option<(f64, f64)>,
    /// Set when no stance-holding session read anything, so `ratio` is absent.
    pub ratio_undefined: bool,
    pub articles_read_mean: f64,
    /// Population standard deviation of distinct articles read per session.
    pub articles_read_sd: f64,
}

fn shares(own: usize, opposing: usize) -> Option<(f64, f64)> {
    let total = own + opposing;
    (total > 0).then(|| {
        let own_share = own as f64 / total as f64;
        (own_share, 1.0 - own_share)
    })
}

/// Own-versus-opposing consumption over events of `kind`.
///
/// `sessions` maps each session to its declared stance (`None` for
/// moderates); sessions seen only in the log count as undeclared. Only
/// stance-holding sessions enter the ratios, every session enters the
/// articles-read mean and sd. `article_stance` gives each article's binary
/// stance; reads of articles it does not cover are not attributed.
pub fn consumption_report(
    events: &[ReadEvent],
    sessions: &BTreeMap<String, Option<Polarity>>,
    article_stance: &BTreeMap<String, Polarity>,
    kind: ReadKind,
) -> ConsumptionReport {
    let mut ids: BTreeSet<&str> = sessions.keys().map(String::as_str).collect();
    ids.extend(events.iter().map(|e| e.session_id.as_str()));
    let mut rows: BTreeMap<&str, (SessionConsumption, BTreeSet<&str>)> = ids
        .into_iter()
        .map(|id| {
            let row = SessionConsumption {
                session_id: id.to_string(),
                stance: sessions.get(id).copied().flatten(),
                reads: 0,
                own_reads: 0,
                opposing_reads: 0,
                distinct_articles: 0,
                ratio: None,
            };
            (id, (row, BTreeSet::new()))
        })
        .collect();
    for e in events.iter().filter(|e| e.kind == kind) {
        let (row, seen) = rows
            .get_mut(e.session_id.as_str())
            .expect("every log session has a row");
        row.reads += 1;
        seen.insert(e.article_id.as_str());
        if let (Some(own), Some(&article)) = (row.stance, article_stance.get(&e.article_id)) {
            if article == own {
                row.own_reads += 1;
            } else {
                row.opposing_reads += 1;
            }
        }
    }
    let sessions: Vec<SessionConsumption> = rows
        .into_values()
        .map(|(mut row, seen)| {
            row.distinct_articles = seen.len();
            row.ratio = shares(row.own_reads, row.opposing_reads);
            row
        })
        .collect();
    let own_reads = sessions.iter().map(|s| s.own_reads).sum();
    let opposing_reads = sessions.iter().map(|s| s.opposing_reads).sum();
    let total_reads = sessions.iter().map(|s| s.reads).sum();
    let ratio = shares(own_reads, opposing_reads);
    let n = sessions.len() as f64;
    let (mean, sd) = if sessions.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = sessions
            .iter()
            .map(|s| s.distinct_articles as f64)
            .sum::<f64>()
            / n;
        let var = sessions
            .iter()
            .map(|s| (s.distinct_articles as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    };
    ConsumptionReport {
        kind,
        sessions,
        own_reads,
        opposing_reads,
        total_reads,
        ratio,
        ratio_undefined: ratio.is_none(),
        articles_read_mean: mean,
        articles_read_sd: sd,
    }
}
