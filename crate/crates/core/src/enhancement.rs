//! Relevance statements: numeric score rendering, statement templates and
//! document enhancement.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus_io::Document;
use crate::error::{Error, Result};

/// How a score in `[-1, 1]` is rendered as text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScoreRepresentation {
    /// Fixed point with 1..=4 fractional digits.
    Decimal(u8),
    /// `round(score * multiplier)` with multiplier 100 or 1000.
    Integer(u32),
    /// The 4-place decimal string with every character space-separated.
    Segmented,
}

impl ScoreRepresentation {
    pub fn validate(self) -> Result<Self> {
        match self {
            ScoreRepresentation::Decimal(p) if !(1..=4).contains(&p) => {
                Err(Error::validation(format!("decimal places must be 1..=4, got {p}")))
            }
            ScoreRepresentation::Integer(m) if m != 100 && m != 1000 => Err(Error::validation(format!(
                "integer multiplier must be 100 or 1000, got {m}"
            ))),
            other => Ok(other),
        }
    }

    /// Every representation exercised in the numeric-rendering ablation.
    pub fn all() -> [ScoreRepresentation; 7] {
        [
            ScoreRepresentation::Decimal(1),
            ScoreRepresentation::Decimal(2),
            ScoreRepresentation::Decimal(3),
            ScoreRepresentation::Decimal(4),
            ScoreRepresentation::Integer(100),
            ScoreRepresentation::Integer(1000),
            ScoreRepresentation::Segmented,
        ]
    }
}

impl Default for ScoreRepresentation {
    fn default() -> Self {
        ScoreRepresentation::Decimal(4)
    }
}

impl fmt::Display for ScoreRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreRepresentation::Decimal(p) => write!(f, "decimal:{p}"),
            ScoreRepresentation::Integer(m) => write!(f, "integer:{m}"),
            ScoreRepresentation::Segmented => f.write_str("segmented"),
        }
    }
}

impl FromStr for ScoreRepresentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("unknown score representation {s:?}"));
        let repr = match s.split_once(':') {
            Some(("decimal", p)) => ScoreRepresentation::Decimal(p.parse().map_err(|_| bad())?),
            Some(("integer", m)) => ScoreRepresentation::Integer(m.parse().map_err(|_| bad())?),
            None if s == "segmented" => ScoreRepresentation::Segmented,
            _ => return Err(bad()),
        };
        repr.validate()
    }
}

impl TryFrom<String> for ScoreRepresentation {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScoreRepresentation> for String {
    fn from(r: ScoreRepresentation) -> Self {
        r.to_string()
    }
}

/// Decimal digits of a non-negative number: `int.frac`.
struct Digits {
    int: Vec<u8>,
    frac: Vec<u8>,
}

impl Digits {
    /// Exact digits of the shortest string that round-trips to `x`.
    fn of(x: f64) -> Digits {
        let s = format!("{}", x.abs());
        let (i, f) = s.split_once('.').unwrap_or((&s, ""));
        Digits {
            int: i.bytes().map(|b| b - b'0').collect(),
            frac: f.bytes().map(|b| b - b'0').collect(),
        }
    }

    fn shift_left(mut self, places: usize) -> Digits {
        for _ in 0..places {
            let d = if self.frac.is_empty() { 0 } else { self.frac.remove(0) };
            self.int.push(d);
        }
        self
    }

    /// Rounds to `places` fractional digits, ties to even.
    fn round(mut self, places: usize) -> Digits {
        if self.frac.len() <= places {
            self.frac.resize(places, 0);
            return self;
        }
        let rest = self.frac.split_off(places);
        let last_odd = match self.frac.last().or(self.int.last()) {
            Some(d) => d % 2 == 1,
            None => false,
        };
        let round_up = match rest[0].cmp(&5) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rest[1..].iter().any(|&d| d != 0) || last_odd,
        };
        if round_up {
            let mut carry = true;
            for d in self.frac.iter_mut().rev().chain(self.int.iter_mut().rev()) {
                if !carry {
                    break;
                }
                if *d == 9 {
                    *d = 0;
                } else {
                    *d += 1;
                    carry = false;
                }
            }
            if carry {
                self.int.insert(0, 1);
            }
        }
        self
    }

    fn is_zero(&self) -> bool {
        self.int.iter().chain(&self.frac).all(|&d| d == 0)
    }

    fn render(&self, negative: bool) -> String {
        let mut int: &[u8] = &self.int;
        while int.len() > 1 && int[0] == 0 {
            int = &int[1..];
        }
        let mut s = String::new();
        if negative && !self.is_zero() {
            s.push('-');
        }
        if int.is_empty() {
            s.push('0');
        }
        s.extend(int.iter().map(|d| char::from(b'0' + d)));
        if !self.frac.is_empty() {
            s.push('.');
            s.extend(self.frac.iter().map(|d| char::from(b'0' + d)));
        }
        s
    }
}

/// Renders `score` under `repr`.
///
/// Rounding works on the shortest decimal form of the value (what `{}`
/// prints), half to even, so `0.2845` at three places gives `0.284` and
/// `0.99995` at four gives `1.0000`. Negative zero prints without a sign.
pub fn format_score(score: f64, repr: ScoreRepresentation) -> Result<String> {
    if !score.is_finite() {
        return Err(Error::validation(format!("cannot format non-finite score {score}")));
    }
    let repr = repr.validate()?;
    let negative = score < 0.0;
    Ok(match repr {
        ScoreRepresentation::Decimal(p) => Digits::of(score).round(usize::from(p)).render(negative),
        ScoreRepresentation::Integer(m) => {
            let places = if m == 100 { 2 } else { 3 };
            Digits::of(score).shift_left(places).round(0).render(negative)
        }
        ScoreRepresentation::Segmented => {
            let dec = Digits::of(score).round(4).render(negative);
            let chars: Vec<String> = dec.chars().map(String::from).collect();
            chars.join(" ")
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementTemplate {
    C1,
    C2,
    T1,
    T2,
    Tc,
    /// Bare credibility score, no surrounding text.
    ScoreOnly,
}

impl StatementTemplate {
    pub fn id(self) -> &'static str {
        match self {
            StatementTemplate::C1 => "c1",
            StatementTemplate::C2 => "c2",
            StatementTemplate::T1 => "t1",
            StatementTemplate::T2 => "t2",
            StatementTemplate::Tc => "tc",
            StatementTemplate::ScoreOnly => "score_only",
        }
    }

    /// Pattern text with `{X}` (credibility) and `{Y}` (topicality).
    pub fn pattern(self) -> &'static str {
        match self {
            StatementTemplate::C1 => "Credibility score is {X}",
            StatementTemplate::C2 => "Credibility score of the document is {X}",
            StatementTemplate::T1 => "Topicality score is {Y}",
            StatementTemplate::T2 => "Topicality score of the document is {Y}",
            StatementTemplate::Tc => {
                "Credibility score of the document is {X}. Topicality score of the document is {Y}"
            }
            StatementTemplate::ScoreOnly => "{X}",
        }
    }

    pub fn needs_credibility(self) -> bool {
        self.pattern().contains("{X}")
    }

    pub fn needs_topicality(self) -> bool {
        self.pattern().contains("{Y}")
    }

    pub fn all() -> [StatementTemplate; 6] {
        [
            StatementTemplate::C1,
            StatementTemplate::C2,
            StatementTemplate::T1,
            StatementTemplate::T2,
            StatementTemplate::Tc,
            StatementTemplate::ScoreOnly,
        ]
    }
}

impl fmt::Display for StatementTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for StatementTemplate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StatementTemplate::all()
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::validation(format!("unknown statement template {s:?}")))
    }
}

pub fn render_statement(template: StatementTemplate, cred: Option<&str>, topicality: Option<&str>) -> Result<String> {
    let check = |needed: bool, value: Option<&str>, name: &str| -> Result<()> {
        match (needed, value) {
            (true, None) => Err(Error::validation(format!("template {template} needs a {name} score"))),
            (false, Some(_)) => Err(Error::validation(format!("template {template} takes no {name} score"))),
            (true, Some(v)) if v.trim().is_empty() => {
                Err(Error::validation(format!("empty {name} score for template {template}")))
            }
            _ => Ok(()),
        }
    };
    check(template.needs_credibility(), cred, "credibility")?;
    check(template.needs_topicality(), topicality, "topicality")?;
    let mut out = template.pattern().to_string();
    if let Some(x) = cred {
        out = out.replace("{X}", x);
    }
    if let Some(y) = topicality {
        out = out.replace("{Y}", y);
    }
    Ok(out)
}

/// Prepends `statement` to the document body.
pub fn enhance(doc: &Document, statement: &str) -> Result<String> {
    if statement.trim().is_empty() {
        return Err(Error::validation(format!("empty statement for doc \"{}\"", doc.doc_id)));
    }
    Ok(format!("{statement} {}", doc.text))
}

/// Inverse of [`enhance`].
pub fn strip_statement<'a>(enhanced: &'a str, statement: &str) -> Option<&'a str> {
    enhanced.strip_prefix(statement)?.strip_prefix(' ')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub representation: ScoreRepresentation,
    pub template: StatementTemplate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credibility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topicality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancedDocument {
    pub doc_id: String,
    pub topic_id: String,
    pub statement: String,
    pub enhanced_text: String,
    pub provenance: Provenance,
}

impl EnhancedDocument {
    pub fn original_text(&self) -> Option<&str> {
        strip_statement(&self.enhanced_text, &self.statement)
    }
}

/// Formats the scores a template needs and builds the statement.
/// `topicality` is the min-max normalized BM25 score.
pub fn statement_for(
    template: StatementTemplate,
    repr: ScoreRepresentation,
    cred: Option<f64>,
    topicality: Option<f64>,
) -> Result<String> {
    let fmt_if = |needed: bool, v: Option<f64>, name: &str| -> Result<Option<String>> {
        if !needed {
            return Ok(None);
        }
        let v = v.ok_or_else(|| Error::validation(format!("template {template} needs a {name} score")))?;
        format_score(v, repr).map(Some)
    };
    let x = fmt_if(template.needs_credibility(), cred, "credibility")?;
    let y = fmt_if(template.needs_topicality(), topicality, "topicality")?;
    render_statement(template, x.as_deref(), y.as_deref())
}

pub fn enhance_document(
    topic_id: &str,
    doc: &Document,
    template: StatementTemplate,
    repr: ScoreRepresentation,
    cred: Option<f64>,
    topicality: Option<f64>,
) -> Result<EnhancedDocument> {
    let statement = statement_for(template, repr, cred, topicality)?;
    let enhanced_text = enhance(doc, &statement)?;
    Ok(EnhancedDocument {
        doc_id: doc.doc_id.clone(),
        topic_id: topic_id.to_string(),
        statement,
        enhanced_text,
        provenance: Provenance {
            representation: repr,
            template,
            credibility: cred.filter(|_| template.needs_credibility()),
            topicality: topicality.filter(|_| template.needs_topicality()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ScoreRepresentation::*;

    fn f(x: f64, r: ScoreRepresentation) -> String {
        format_score(x, r).unwrap()
    }

    #[test]
    fn documented_formats() {
        assert_eq!(f(0.28456, Decimal(4)), "0.2846");
        assert_eq!(f(0.2845, Integer(1000)), "284");
        assert_eq!(f(0.2845, Integer(100)), "28");
        assert_eq!(f(0.2845, Segmented), "0 . 2 8 4 5");
        assert_eq!(f(0.5, Decimal(4)), "0.5000");
    }

    #[test]
    fn half_even_and_carry() {
        assert_eq!(f(0.2845, Decimal(3)), "0.284");
        assert_eq!(f(0.2835, Decimal(3)), "0.284");
        assert_eq!(f(0.99995, Decimal(4)), "1.0000");
        assert_eq!(f(0.99985, Decimal(4)), "0.9998");
        assert_eq!(f(0.95, Decimal(1)), "1.0");
        assert_eq!(f(0.25, Decimal(1)), "0.2");
        assert_eq!(f(0.0005, Integer(1000)), "0");
        assert_eq!(f(0.0015, Integer(1000)), "2");
        assert_eq!(f(1.0, Integer(1000)), "1000");
    }

    #[test]
    fn negatives_and_zero() {
        assert_eq!(f(-0.1234, Decimal(2)), "-0.12");
        assert_eq!(f(-0.00001, Decimal(4)), "0.0000");
        assert_eq!(f(-0.0, Decimal(1)), "0.0");
        assert_eq!(f(-0.25, Segmented), "- 0 . 2 5 0 0");
        assert_eq!(f(-0.456, Integer(100)), "-46");
        assert_eq!(f(1e-7, Decimal(4)), "0.0000");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(format_score(f64::NAN, Decimal(4)).is_err());
        assert!(format_score(0.5, Decimal(5)).is_err());
        assert!(format_score(0.5, Integer(10)).is_err());
        assert!("decimal:0".parse::<ScoreRepresentation>().is_err());
        assert_eq!("integer:1000".parse::<ScoreRepresentation>().unwrap(), Integer(1000));
        assert_eq!("segmented".parse::<ScoreRepresentation>().unwrap(), Segmented);
    }

    #[test]
    fn statements() {
        assert_eq!(
            render_statement(StatementTemplate::C2, Some("0.2845"), None).unwrap(),
            "Credibility score of the document is 0.2845"
        );
        assert_eq!(
            render_statement(StatementTemplate::C1, Some("0.2845"), None).unwrap(),
            "Credibility score is 0.2845"
        );
        assert_eq!(
            render_statement(StatementTemplate::T1, None, Some("0.7310")).unwrap(),
            "Topicality score is 0.7310"
        );
        assert_eq!(
            render_statement(StatementTemplate::Tc, Some("0.2845"), Some("0.7310")).unwrap(),
            "Credibility score of the document is 0.2845. Topicality score of the document is 0.7310"
        );
        assert_eq!(
            render_statement(StatementTemplate::ScoreOnly, Some("0.2845"), None).unwrap(),
            "0.2845"
        );
        assert!(render_statement(StatementTemplate::C2, None, None).is_err());
        assert!(render_statement(StatementTemplate::C2, Some("1"), Some("2")).is_err());
        assert!(render_statement(StatementTemplate::T2, Some("1"), Some("2")).is_err());
    }

    #[test]
    fn enhancement_prefixes() {
        let doc = Document::new("d", "the bcg vaccine does have a positive");
        assert_eq!(
            enhance(&doc, "credibility score 0.9").unwrap(),
            "credibility score 0.9 the bcg vaccine does have a positive"
        );
        assert!(enhance(&doc, "").is_err());
        let e = enhance_document("t", &doc, StatementTemplate::C2, Decimal(4), Some(0.2845), Some(0.1)).unwrap();
        assert_eq!(e.original_text(), Some(doc.text.as_str()));
        assert!(e.provenance.topicality.is_none());
    }
}
