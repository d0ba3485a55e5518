//! JSON-lines corpus files: one article or comment object per line.

use super::{Article, Comment, CorpusError, Origin, Result};
use crate::stance::StanceLabel;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArticleRecord {
    id: String,
    topic: String,
    title: String,
    sentences: Vec<String>,
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stance: Option<StanceLabel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommentRecord {
    id: String,
    topic: String,
    text: String,
    origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    session: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Record {
    Article(ArticleRecord),
    Comment(CommentRecord),
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Vec<Article>, Vec<Comment>)> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text)
}

/// Parses corpus text; records keep file order within each kind.
pub fn parse_corpus(text: &str) -> Result<(Vec<Article>, Vec<Comment>)> {
    let mut articles = Vec::new();
    let mut comments = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: format!("not an article or comment record: {e}"),
        })?;
        let id = match &record {
            Record::Article(a) => a.id.clone(),
            Record::Comment(c) => c.id.clone(),
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { id, line: line_no });
        }
        let wrap = |e: CorpusError| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        };
        match record {
            Record::Article(r) => articles.push(
                Article::new(r.id, r.topic, r.title, r.sentences, r.source, r.stance)
                    .map_err(wrap)?,
            ),
            Record::Comment(r) => comments
                .push(Comment::new(r.id, r.topic, r.text, r.origin, r.session).map_err(wrap)?),
        }
    }
    Ok((articles, comments))
}

/// Articles first, then comments, one JSON object per line.
pub fn render_corpus(articles: &[Article], comments: &[Comment]) -> String {
    let mut out = String::new();
    for a in articles {
        let rec = Record::Article(ArticleRecord {
            id: a.id.clone(),
            topic: a.topic_id.clone(),
            title: a.title.clone(),
            sentences: a.sentences.clone(),
            source: a.source.clone(),
            stance: a.gold_stance,
        });
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    for c in comments {
        let rec = Record::Comment(CommentRecord {
            id: c.id.clone(),
            topic: c.topic_id.clone(),
            text: c.text.clone(),
            origin: c.origin,
            session: c.author_session.clone(),
        });
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(
    path: impl AsRef<Path>,
    articles: &[Article],
    comments: &[Comment],
) -> Result<()> {
    std::fs::write(path, render_corpus(articles, comments))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_corpus() {
        let (a, c) = parse_corpus("").unwrap();
        assert!(a.is_empty() && c.is_empty());
    }

    #[test]
    fn single_article_round_trips_byte_identically() {
        let art = Article::new(
            "a1",
            "minimum-wage",
            "Wage hike passes",
            vec!["The council voted.".into(), "Unions cheered!".into()],
            "daily",
            Some(StanceLabel::LeanLeft),
        )
        .unwrap();
        let text = render_corpus(std::slice::from_ref(&art), &[]);
        let (articles, comments) = parse_corpus(&text).unwrap();
        assert!(comments.is_empty());
        assert_eq!(articles, vec![art]);
        assert_eq!(render_corpus(&articles, &[]), text);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let good = r#"{"id":"c1","topic":"t","text":"hello","origin":"liberal_community"}"#;
        let text = format!("{good}\n{{not json\n");
        match parse_corpus(&text) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_integrity_error() {
        let line = r#"{"id":"c1","topic":"t","text":"hello","origin":"liberal_community"}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            parse_corpus(&text),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_stance_label_is_rejected() {
        let line = r#"{"id":"a","topic":"t","title":"x","sentences":["y"],"source":"s","stance":"far_left"}"#;
        assert!(matches!(
            parse_corpus(line),
            Err(CorpusError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn user_comment_keeps_session() {
        let line = r#"{"id":"u1","topic":"t","text":"my view","origin":"user","session":"abc"}"#;
        let (_, comments) = parse_corpus(line).unwrap();
        assert_eq!(comments[0].author_session.as_deref(), Some("abc"));
        assert_eq!(render_corpus(&[], &comments).trim_end(), line);
    }
}
