use anyhow::{bail, Context, Result};
use hearhere_core::feed::{consumption_report, read_events, ReadKind};
use hearhere_core::stance::Polarity;
use hearhere_core::study::{declared_stances, read_surveys, study_report, StudyReport};
use std::collections::BTreeMap;
use std::path::Path;

/// The study report from a survey file, optionally with consumption
/// analytics from a read log and the article stance map the server wrote.
pub fn report_from_files(
    surveys: &Path,
    logs: Option<&Path>,
    article_stances: Option<&Path>,
    alpha: f64,
    kind: ReadKind,
) -> Result<StudyReport> {
    let records =
        read_surveys(surveys).with_context(|| format!("reading {}", surveys.display()))?;
    let consumption = match (logs, article_stances) {
        (None, None) => None,
        (Some(logs), Some(stances)) => {
            let events =
                read_events(logs).with_context(|| format!("reading {}", logs.display()))?;
            let text = std::fs::read_to_string(stances)
                .with_context(|| format!("reading {}", stances.display()))?;
            let stances: BTreeMap<String, Polarity> = serde_json::from_str(&text)?;
            Some(consumption_report(
                &events,
                &declared_stances(&records),
                &stances,
                kind,
            ))
        }
        _ => bail!("read logs and article stances must be given together"),
    };
    Ok(study_report(&records, alpha, consumption)?)
}
