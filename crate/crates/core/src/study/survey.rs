use super::{Result, StudyError};
use crate::stance::Polarity;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
}

const PRE_QUESTIONS: [&str; 5] = [
    "How often do you read something you DISAGREE with?",
    "Have you ever checked a news source that is DIFFERENT from what you normally read?",
    "Do you try to CONFIRM information you find by searching online for another source?",
    "Do you try to confirm information by checking a major OFFLINE news medium?",
    "Thinking about recent searches you have performed online using a search engine, how often have you discovered something that CHANGED your opinion on an issue?",
];

const POST_QUESTIONS: [&str; 5] = [
    "How often will you read something you DISAGREE with?",
    "Will you check a news source that is DIFFERENT from what you normally read?",
    "Will you try to CONFIRM information you find by searching online for another source?",
    "Will you try to confirm information by checking a major OFFLINE news medium?",
    "How often will you discover something that CHANGES your opinion on an issue?",
];

/// Short names of the five echo-chamber questions.
pub const QUESTION_TAGS: [&str; 5] = ["Disagree", "Different", "Confirm", "Offline", "Changed"];

/// Likert anchors shared by all five questions.
pub const LIKERT_ANCHORS: (&str, &str) = ("Almost never", "Nearly always");

/// The five echo-chamber questions for `phase`, Q1 to Q5.
pub fn ec_questions(phase: Phase) -> [&'static str; 5] {
    match phase {
        Phase::Pre => PRE_QUESTIONS,
        Phase::Post => POST_QUESTIONS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "19-29")]
    From19To29,
    #[serde(rename = "30-39")]
    From30To39,
    #[serde(rename = "40-49")]
    From40To49,
}

impl AgeBand {
    pub const ALL: [AgeBand; 3] = [
        AgeBand::From19To29,
        AgeBand::From30To39,
        AgeBand::From40To49,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::From19To29 => "19-29",
            AgeBand::From30To39 => "30-39",
            AgeBand::From40To49 => "40-49",
        }
    }
}

/// Demographics collected with the pre-survey. Political interest, stance
/// and media usage are raw five-point answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub age: AgeBand,
    pub political_interest: u8,
    /// 1 = very liberal, 5 = very conservative.
    pub political_stance: u8,
    pub media_usage: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub participant_id: String,
    pub phase: Phase,
    /// Likert answers to Q1..Q5.
    pub answers: [u8; 5],
    /// Required in the pre-survey, absent afterwards.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
}

fn likert(field: &str, v: u8) -> Result<()> {
    if (1..=5).contains(&v) {
        Ok(())
    } else {
        Err(StudyError::BadLikert {
            field: field.to_string(),
            value: v,
        })
    }
}

impl SurveyRecord {
    pub fn validate(&self) -> Result<()> {
        if self.participant_id.trim().is_empty() {
            return Err(StudyError::Invalid("empty participant id".into()));
        }
        for (i, &a) in self.answers.iter().enumerate() {
            likert(&format!("q{}", i + 1), a)?;
        }
        match (self.phase, &self.demographics) {
            (Phase::Pre, None) => {
                return Err(StudyError::MissingDemographics(self.participant_id.clone()))
            }
            (Phase::Pre, Some(d)) => {
                likert("political_interest", d.political_interest)?;
                likert("political_stance", d.political_stance)?;
                likert("media_usage", d.media_usage)?;
            }
            (Phase::Post, Some(_)) => {
                return Err(StudyError::Invalid(
                    "demographics belong to the pre-survey".into(),
                ));
            }
            (Phase::Post, None) => {}
        }
        Ok(())
    }
}

/// Mean of the five answers.
pub fn ec_score(record: &SurveyRecord) -> f64 {
    record.answers.iter().map(|&a| f64::from(a)).sum::<f64>() / 5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceGroup {
    Liberal,
    Moderate,
    Conservative,
}

impl StanceGroup {
    pub const ALL: [StanceGroup; 3] = [
        StanceGroup::Liberal,
        StanceGroup::Moderate,
        StanceGroup::Conservative,
    ];

    /// 1–2 liberal, 3 moderate, 4–5 conservative.
    pub fn of(raw: u8) -> Self {
        match raw {
            0..=2 => StanceGroup::Liberal,
            3 => StanceGroup::Moderate,
            _ => StanceGroup::Conservative,
        }
    }

    /// Binary stance for consumption ratios; moderates have none.
    pub fn polarity(self) -> Option<Polarity> {
        match self {
            StanceGroup::Liberal => Some(Polarity::Liberal),
            StanceGroup::Moderate => None,
            StanceGroup::Conservative => Some(Polarity::Conservative),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StanceGroup::Liberal => "liberal",
            StanceGroup::Moderate => "moderate",
            StanceGroup::Conservative => "conservative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterestGroup {
    Low,
    Middle,
    High,
}

impl InterestGroup {
    pub const ALL: [InterestGroup; 3] = [
        InterestGroup::Low,
        InterestGroup::Middle,
        InterestGroup::High,
    ];

    /// 1–2 low, 3 middle, 4–5 high.
    pub fn of(raw: u8) -> Self {
        match raw {
            0..=2 => InterestGroup::Low,
            3 => InterestGroup::Middle,
            _ => InterestGroup::High,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterestGroup::Low => "low",
            InterestGroup::Middle => "middle",
            InterestGroup::High => "high",
        }
    }
}

/// Political interest crossed with neutral (moderate) versus non-neutral stance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CrossedGroup {
    #[serde(rename = "L+N")]
    LowNeutral,
    #[serde(rename = "L+NN")]
    LowNonNeutral,
    #[serde(rename = "M+N")]
    MiddleNeutral,
    #[serde(rename = "M+NN")]
    MiddleNonNeutral,
    #[serde(rename = "H+N")]
    HighNeutral,
    #[serde(rename = "H+NN")]
    HighNonNeutral,
}

impl CrossedGroup {
    pub const ALL: [CrossedGroup; 6] = [
        CrossedGroup::LowNeutral,
        CrossedGroup::LowNonNeutral,
        CrossedGroup::MiddleNeutral,
        CrossedGroup::MiddleNonNeutral,
        CrossedGroup::HighNeutral,
        CrossedGroup::HighNonNeutral,
    ];

    pub fn of(interest: InterestGroup, stance: StanceGroup) -> Self {
        let neutral = stance == StanceGroup::Moderate;
        match (interest, neutral) {
            (InterestGroup::Low, true) => CrossedGroup::LowNeutral,
            (InterestGroup::Low, false) => CrossedGroup::LowNonNeutral,
            (InterestGroup::Middle, true) => CrossedGroup::MiddleNeutral,
            (InterestGroup::Middle, false) => CrossedGroup::MiddleNonNeutral,
            (InterestGroup::High, true) => CrossedGroup::HighNeutral,
            (InterestGroup::High, false) => CrossedGroup::HighNonNeutral,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CrossedGroup::LowNeutral => "L+N",
            CrossedGroup::LowNonNeutral => "L+NN",
            CrossedGroup::MiddleNeutral => "M+N",
            CrossedGroup::MiddleNonNeutral => "M+NN",
            CrossedGroup::HighNeutral => "H+N",
            CrossedGroup::HighNonNeutral => "H+NN",
        }
    }
}

impl fmt::Display for CrossedGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoGroups {
    pub stance: StanceGroup,
    pub interest: InterestGroup,
    pub crossed: CrossedGroup,
}

pub fn group_demographics(d: &Demographics) -> DemoGroups {
    let stance = StanceGroup::of(d.political_stance);
    let interest = InterestGroup::of(d.political_interest);
    DemoGroups {
        stance,
        interest,
        crossed: CrossedGroup::of(interest, stance),
    }
}

/// Append-only JSON-lines survey store holding one record per
/// (participant, phase). Appends are synced before returning.
#[derive(Debug)]
pub struct SurveyLog {
    file: Option<File>,
    records: Vec<SurveyRecord>,
    keys: BTreeSet<(String, Phase)>,
}

impl SurveyLog {
    pub fn in_memory() -> Self {
        Self {
            file: None,
            records: Vec::new(),
            keys: BTreeSet::new(),
        }
    }

    /// Opens (creating if needed) a survey file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let existing = if path.exists() {
            read_surveys(path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut log = Self {
            file: None,
            records: Vec::new(),
            keys: BTreeSet::new(),
        };
        for r in existing {
            log.record(r)?;
        }
        log.file = Some(file);
        Ok(log)
    }

    pub fn record(&mut self, record: SurveyRecord) -> Result<()> {
        record.validate()?;
        let key = (record.participant_id.clone(), record.phase);
        if self.keys.contains(&key) {
            return Err(StudyError::Duplicate {
                participant: key.0,
                phase: key.1,
            });
        }
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_string(&record)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        self.keys.insert(key);
        self.records.push(record);
        Ok(())
    }

    pub fn has(&self, participant: &str, phase: Phase) -> bool {
        self.keys.contains(&(participant.to_string(), phase))
    }

    pub fn records(&self) -> &[SurveyRecord] {
        &self.records
    }
}

pub fn read_surveys(path: impl AsRef<Path>) -> Result<Vec<SurveyRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| StudyError::Corrupt {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}
