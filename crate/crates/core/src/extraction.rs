//! From raw agent text to a per-sample prediction.
//!
//! Parsing is total: any input yields a report, with `Unknown` standing in
//! for fields that are missing or unreadable. [`decide`] applies the
//! verifier-override / majority-vote rule and [`cwe_match`] compares
//! predicted CWEs with ground truth under a [`CweHierarchy`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::cwe::Cwe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
    None,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Medium,
    Low,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifierDecision {
    Accept,
    Challenge,
    Reject,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    Full,
    Partial,
    None,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertReport {
    pub vulnerability_found: YesNo,
    pub cwe_ids: BTreeSet<Cwe>,
    pub severity: Severity,
    pub evidence: String,
    pub confidence: Confidence,
    pub raw_text: String,
}

impl ExpertReport {
    /// Placeholder for an expert whose call failed.
    pub fn missing() -> Self {
        parse_expert_report("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierVerdict {
    pub decision: VerifierDecision,
    pub final_vulnerability: YesNo,
    pub final_cwe_ids: BTreeSet<Cwe>,
    pub agreement_level: Agreement,
    pub reasoning: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecidedBy {
    VerifierOverride,
    MajorityVote,
    SingleExpert,
}

/// Final per-sample decision. `raw` holds agent texts keyed by role name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub predicted_vulnerable: bool,
    pub predicted_cwes: BTreeSet<Cwe>,
    pub decided_by: DecidedBy,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw: BTreeMap<String, String>,
}

impl Prediction {
    /// CWEs that count for matching: empty for benign predictions.
    pub fn effective_cwes(&self) -> BTreeSet<Cwe> {
        if self.predicted_vulnerable {
            self.predicted_cwes.clone()
        } else {
            BTreeSet::new()
        }
    }
}

/// Outcome of [`decide`], before it is attached to a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ruling {
    pub vulnerable: bool,
    pub cwes: BTreeSet<Cwe>,
    pub decided_by: DecidedBy,
}

impl Ruling {
    pub fn into_prediction(self, sample_id: impl Into<String>) -> Prediction {
        Prediction {
            sample_id: sample_id.into(),
            predicted_vulnerable: self.vulnerable,
            predicted_cwes: self.cwes,
            decided_by: self.decided_by,
            raw: BTreeMap::new(),
        }
    }
}

/// How the "at least one CWE id" clause of the majority vote is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteRule {
    /// ≥2 "yes" reports and a non-empty union of all expert CWE ids.
    #[default]
    Union,
    /// ≥2 reports that say "yes" and each carry at least one CWE id.
    PerReport,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecideError {
    #[error("decision needs 1 or 3 expert reports, got {0}")]
    ReportCount(usize),
}

#[derive(Debug, thiserror::Error)]
pub enum HierarchyError {
    #[error("{0} appears in more than one equivalence class")]
    Overlap(Cwe),
}

/// Equivalence classes of CWEs treated as the same weakness for matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CweHierarchy {
    classes: Vec<BTreeSet<Cwe>>,
}

impl CweHierarchy {
    pub fn new(classes: Vec<BTreeSet<Cwe>>) -> Result<Self, HierarchyError> {
        let mut seen = BTreeSet::new();
        for class in &classes {
            for &c in class {
                if !seen.insert(c) {
                    return Err(HierarchyError::Overlap(c));
                }
            }
        }
        Ok(CweHierarchy { classes })
    }

    /// Exact matching only.
    pub fn flat() -> Self {
        CweHierarchy {
            classes: Vec::new(),
        }
    }

    pub fn classes(&self) -> &[BTreeSet<Cwe>] {
        &self.classes
    }

    pub fn class_of(&self, cwe: Cwe) -> Option<&BTreeSet<Cwe>> {
        self.classes.iter().find(|c| c.contains(&cwe))
    }

    pub fn equivalent(&self, a: Cwe, b: Cwe) -> bool {
        a == b || self.class_of(a).is_some_and(|class| class.contains(&b))
    }
}

impl Default for CweHierarchy {
    /// Buffer overflow {119, 120, 121, 122, 787} and integer issues {190, 191}.
    fn default() -> Self {
        let class = |ids: &[u32]| ids.iter().map(|&i| Cwe::new(i).unwrap()).collect();
        CweHierarchy {
            classes: vec![class(&[119, 120, 121, 122, 787]), class(&[190, 191])],
        }
    }
}

fn cwe_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bCWE[-_ ]?(\d+)").unwrap())
}

/// Every CWE identifier mentioned in `text`, normalized and sorted.
///
/// Recognizes `CWE-121`, `CWE 121`, `CWE121`, `CWE_121` in any case; a
/// `CWE` glued to a preceding letter or digit (as in `SCWE-5`) is ignored.
pub fn extract_cwes(text: &str) -> BTreeSet<Cwe> {
    cwe_pattern()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<u32>().ok())
        .filter_map(|id| Cwe::new(id).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    VulnerabilityFound,
    CweIds,
    Severity,
    Evidence,
    Confidence,
    Decision,
    FinalVulnerability,
    FinalCweIds,
    AgreementLevel,
    Reasoning,
}

fn header_pattern(fields: &str) -> Regex {
    // A field header starts a line or follows a `;`, may carry markdown
    // bullets/bold, and ends with `:` or `=`.
    Regex::new(&format!(
        r"(?im)(?:^|;)[ \t]*(?:[-*#>]+[ \t]*)*\**[ \t]*({fields})[ \t]*\**[ \t]*[:=]\**"
    ))
    .unwrap()
}

fn expert_headers() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        header_pattern(r"VULNERABILITY[_ ]FOUND|CWE[_ -]?IDS?|SEVERITY|EVIDENCE|CONFIDENCE")
    })
}

fn verifier_headers() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        header_pattern(
            r"DECISION|FINAL[_ ]VULNERABILITY|FINAL[_ ]CWE[_ -]?IDS?|AGREEMENT[_ ]LEVEL|REASONING",
        )
    })
}

fn classify(header: &str) -> Option<Field> {
    let key: String = header
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_uppercase();
    Some(match key.as_str() {
        "VULNERABILITYFOUND" => Field::VulnerabilityFound,
        "CWEIDS" | "CWEID" => Field::CweIds,
        "SEVERITY" => Field::Severity,
        "EVIDENCE" => Field::Evidence,
        "CONFIDENCE" => Field::Confidence,
        "DECISION" => Field::Decision,
        "FINALVULNERABILITY" => Field::FinalVulnerability,
        "FINALCWEIDS" | "FINALCWEID" => Field::FinalCweIds,
        "AGREEMENTLEVEL" => Field::AgreementLevel,
        "REASONING" => Field::Reasoning,
        _ => return None,
    })
}

/// First occurrence of each field, with its value running to the next
/// header (or end of text).
fn scan_fields(text: &str, headers: &Regex) -> Vec<(Field, String)> {
    let matches: Vec<_> = headers.captures_iter(text).collect();
    let mut out: Vec<(Field, String)> = Vec::new();
    for (i, caps) in matches.iter().enumerate() {
        let whole = caps.get(0).unwrap();
        let Some(field) = classify(&caps[1]) else {
            continue;
        };
        if out.iter().any(|(f, _)| *f == field) {
            continue;
        }
        let end = matches
            .get(i + 1)
            .map(|next| next.get(0).unwrap().start())
            .unwrap_or(text.len());
        let value = text[whole.end()..end]
            .trim()
            .trim_end_matches(';')
            .trim()
            .to_string();
        out.push((field, value));
    }
    out
}

fn field(fields: &[(Field, String)], which: Field) -> Option<&str> {
    fields
        .iter()
        .find(|(f, _)| *f == which)
        .map(|(_, v)| v.as_str())
}

/// Leading word of a field value, lowercased, with markup stripped.
fn leading_word(value: &str) -> String {
    value
        .trim_start_matches(|c: char| !c.is_ascii_alphanumeric())
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

fn is_template_echo(value: &str) -> bool {
    let compact: String = value
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    compact
        .trim_start_matches(|c: char| !c.is_ascii_alphanumeric())
        .starts_with("yes/no")
}

fn parse_yes_no(value: Option<&str>) -> YesNo {
    let Some(value) = value else {
        return YesNo::Unknown;
    };
    if is_template_echo(value) {
        return YesNo::Unknown;
    }
    match leading_word(value).as_str() {
        "yes" | "true" | "vulnerable" | "y" => YesNo::Yes,
        "no" | "false" | "none" | "not" | "benign" | "safe" | "n" => YesNo::No,
        _ => YesNo::Unknown,
    }
}

fn parse_severity(value: Option<&str>) -> Severity {
    match value.map(leading_word).as_deref() {
        Some("critical") => Severity::Critical,
        Some("high") => Severity::High,
        Some("medium") | Some("moderate") => Severity::Medium,
        Some("low") => Severity::Low,
        Some("none") | Some("n") => Severity::None,
        _ => Severity::Unknown,
    }
}

fn parse_confidence(value: Option<&str>) -> Confidence {
    match value.map(leading_word).as_deref() {
        Some("high") => Confidence::High,
        Some("medium") | Some("moderate") => Confidence::Medium,
        Some("low") => Confidence::Low,
        _ => Confidence::Unknown,
    }
}

fn parse_decision(value: Option<&str>) -> VerifierDecision {
    match value.map(leading_word).as_deref() {
        Some("accept") | Some("accepted") => VerifierDecision::Accept,
        Some("challenge") | Some("challenged") => VerifierDecision::Challenge,
        Some("reject") | Some("rejected") => VerifierDecision::Reject,
        _ => VerifierDecision::Unknown,
    }
}

fn parse_agreement(value: Option<&str>) -> Agreement {
    match value.map(leading_word).as_deref() {
        Some("full") => Agreement::Full,
        Some("partial") => Agreement::Partial,
        Some("none") | Some("no") => Agreement::None,
        _ => Agreement::Unknown,
    }
}

/// Parse an expert's structured report. CWE ids come from the `CWE_IDs`
/// field when present, otherwise from anywhere in the text.
pub fn parse_expert_report(text: &str) -> ExpertReport {
    let fields = scan_fields(text, expert_headers());
    let cwe_ids = match field(&fields, Field::CweIds) {
        Some(v) => extract_cwes(v),
        None => extract_cwes(text),
    };
    ExpertReport {
        vulnerability_found: parse_yes_no(field(&fields, Field::VulnerabilityFound)),
        cwe_ids,
        severity: parse_severity(field(&fields, Field::Severity)),
        evidence: field(&fields, Field::Evidence)
            .unwrap_or_default()
            .to_string(),
        confidence: parse_confidence(field(&fields, Field::Confidence)),
        raw_text: text.to_string(),
    }
}

/// Parse the verifier's assessment; same fallback rules as experts.
pub fn parse_verifier_verdict(text: &str) -> VerifierVerdict {
    let fields = scan_fields(text, verifier_headers());
    let final_cwe_ids = match field(&fields, Field::FinalCweIds) {
        Some(v) => extract_cwes(v),
        None => extract_cwes(text),
    };
    VerifierVerdict {
        decision: parse_decision(field(&fields, Field::Decision)),
        final_vulnerability: parse_yes_no(field(&fields, Field::FinalVulnerability)),
        final_cwe_ids,
        agreement_level: parse_agreement(field(&fields, Field::AgreementLevel)),
        reasoning: field(&fields, Field::Reasoning)
            .unwrap_or_default()
            .to_string(),
        raw_text: text.to_string(),
    }
}

fn union_cwes(reports: &[ExpertReport]) -> BTreeSet<Cwe> {
    reports
        .iter()
        .flat_map(|r| r.cwe_ids.iter().copied())
        .collect()
}

/// Combine expert reports and an optional verifier verdict.
///
/// A verdict with a readable `FINAL_VULNERABILITY` decides outright (its
/// CWE list, or the expert union if it gave none). Otherwise three reports
/// go to a majority vote under `rule`, and a single report stands alone
/// (a "yes" needs at least one CWE id).
pub fn decide(
    reports: &[ExpertReport],
    verdict: Option<&VerifierVerdict>,
    rule: VoteRule,
) -> Result<Ruling, DecideError> {
    if reports.len() != 1 && reports.len() != 3 {
        return Err(DecideError::ReportCount(reports.len()));
    }
    let pool = union_cwes(reports);

    if let Some(v) = verdict {
        let vulnerable = match v.final_vulnerability {
            YesNo::Yes => Some(true),
            YesNo::No => Some(false),
            YesNo::Unknown => None,
        };
        if let Some(vulnerable) = vulnerable {
            let cwes = if v.final_cwe_ids.is_empty() && vulnerable {
                pool
            } else {
                v.final_cwe_ids.clone()
            };
            return Ok(Ruling {
                vulnerable,
                cwes,
                decided_by: DecidedBy::VerifierOverride,
            });
        }
    }

    if let [only] = reports {
        return Ok(Ruling {
            vulnerable: only.vulnerability_found == YesNo::Yes && !only.cwe_ids.is_empty(),
            cwes: pool,
            decided_by: DecidedBy::SingleExpert,
        });
    }

    let vulnerable = match rule {
        VoteRule::Union => {
            let yes = reports
                .iter()
                .filter(|r| r.vulnerability_found == YesNo::Yes)
                .count();
            yes >= 2 && !pool.is_empty()
        }
        VoteRule::PerReport => {
            reports
                .iter()
                .filter(|r| r.vulnerability_found == YesNo::Yes && !r.cwe_ids.is_empty())
                .count()
                >= 2
        }
    };
    Ok(Ruling {
        vulnerable,
        cwes: pool,
        decided_by: DecidedBy::MajorityVote,
    })
}

/// True iff some predicted CWE equals `truth` or shares its class.
pub fn cwe_match(predicted: &BTreeSet<Cwe>, truth: Cwe, hierarchy: &CweHierarchy) -> bool {
    predicted.iter().any(|&p| hierarchy.equivalent(truth, p))
}

#[derive(Debug, thiserror::Error)]
pub enum PredictionFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub fn write_predictions(
    path: &Path,
    predictions: &[Prediction],
) -> Result<(), PredictionFileError> {
    let io = |source| PredictionFileError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for p in predictions {
        serde_json::to_writer(&mut w, p).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, PredictionFileError> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| PredictionFileError::Io {
        path: name.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| PredictionFileError::Io {
            path: name.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| PredictionFileError::Parse {
                path: name.clone(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cwes(ids: &[u32]) -> BTreeSet<Cwe> {
        ids.iter().map(|&i| Cwe::new(i).unwrap()).collect()
    }

    fn report(found: YesNo, ids: &[u32]) -> ExpertReport {
        ExpertReport {
            vulnerability_found: found,
            cwe_ids: cwes(ids),
            severity: Severity::Unknown,
            evidence: String::new(),
            confidence: Confidence::Unknown,
            raw_text: String::new(),
        }
    }

    fn verdict(final_vuln: YesNo, ids: &[u32]) -> VerifierVerdict {
        VerifierVerdict {
            decision: VerifierDecision::Unknown,
            final_vulnerability: final_vuln,
            final_cwe_ids: cwes(ids),
            agreement_level: Agreement::Unknown,
            reasoning: String::new(),
            raw_text: String::new(),
        }
    }

    #[test]
    fn cwe_surface_forms() {
        assert_eq!(
            extract_cwes("Detected CWE-121 and also cwe 787."),
            cwes(&[121, 787])
        );
        assert!(extract_cwes("").is_empty());
        assert_eq!(extract_cwes("CWE121, cwe-121, CWE_121"), cwes(&[121]));
    }

    #[test]
    fn cwe_fixture_with_decoys() {
        // Hand-labeled: the oracle set below was read off line by line.
        let fixture = "\
Line 1: nothing here
Line 2: CWE-121 stack overflow
Line 3: decoy CWEXYZ should not count
Line 4: decoy SCWE-5 is not a CWE
Line 5: cwe 787 in lowercase with space
Line 6: CWE476 without separator
Line 7: cwe-416 lowercase dash
Line 8: CWE 190 spaced
Line 9: repeated CWE-121
Line 10: CWE- alone
Line 11: CWE-0 is invalid
Line 12: ACWE-99 glued prefix
Line 13: (CWE-78) in parentheses
Line 14: [CWE-134, CWE-369]
Line 15: CWE_IDs: none
Line 16: the word CWE
Line 17: xCWE 400 glued
Line 18: CWE-0457 leading zero
Line 19: 'CWE-252'
Line 20: CWE--5 double dash
Line 21: cWe122 mixed case
Line 22: CWE 789.
Line 23: MyCWE-401
Line 24: CWE-415/CWE-416
Line 25: not-CWE
Line 26: CWE-IDs header
Line 27: CWE:121 colon form is not recognized
Line 28: *CWE-401*
Line 29: end
Line 30: .";
        let oracle = cwes(&[
            78, 121, 122, 134, 190, 252, 369, 401, 415, 416, 457, 476, 787, 789,
        ]);
        assert_eq!(extract_cwes(fixture), oracle);
    }

    const CANONICAL: &str = "VULNERABILITY_FOUND: yes
CWE_IDs: [CWE-121, CWE-787]
SEVERITY: high
EVIDENCE: memcpy copies 16 bytes into a 10-byte stack buffer.
The size argument is a constant.
CONFIDENCE: high";

    #[test]
    fn canonical_report() {
        let r = parse_expert_report(CANONICAL);
        assert_eq!(r.vulnerability_found, YesNo::Yes);
        assert_eq!(r.cwe_ids, cwes(&[121, 787]));
        assert_eq!(r.severity, Severity::High);
        assert_eq!(
            r.evidence,
            "memcpy copies 16 bytes into a 10-byte stack buffer.\nThe size argument is a constant."
        );
        assert_eq!(r.confidence, Confidence::High);
        assert_eq!(r.raw_text, CANONICAL);
    }

    #[test]
    fn single_line_and_markdown_reports() {
        let r = parse_expert_report(
            "VULNERABILITY_FOUND: yes; CWE_IDs: [CWE-78]; SEVERITY: critical; EVIDENCE: system(cmd); CONFIDENCE: medium.",
        );
        assert_eq!(r.vulnerability_found, YesNo::Yes);
        assert_eq!(r.cwe_ids, cwes(&[78]));
        assert_eq!(r.severity, Severity::Critical);
        assert_eq!(r.evidence, "system(cmd)");
        assert_eq!(r.confidence, Confidence::Medium);

        let md = parse_expert_report(
            "## Report\n- **VULNERABILITY_FOUND:** No\n- **CWE IDs**: []\n- **Severity**: none\nThe code mentions CWE-121 only as context.",
        );
        assert_eq!(md.vulnerability_found, YesNo::No);
        assert!(md.cwe_ids.is_empty());
        assert_eq!(md.severity, Severity::None);
    }

    #[test]
    fn prose_falls_back_to_whole_text_cwes() {
        let r = parse_expert_report("CWE-476 null deref, I am confident");
        assert_eq!(r.vulnerability_found, YesNo::Unknown);
        assert_eq!(r.cwe_ids, cwes(&[476]));
        assert_eq!(r.confidence, Confidence::Unknown);
    }

    #[test]
    fn bare_no() {
        let r = parse_expert_report("VULNERABILITY_FOUND: no");
        assert_eq!(r.vulnerability_found, YesNo::No);
        assert!(r.cwe_ids.is_empty());
        assert_eq!(r.severity, Severity::Unknown);
    }

    #[test]
    fn template_echo_is_unknown() {
        assert_eq!(
            parse_expert_report("VULNERABILITY_FOUND: yes/no").vulnerability_found,
            YesNo::Unknown
        );
    }

    #[test]
    fn verifier_verdicts() {
        let v = parse_verifier_verdict(
            "DECISION: ACCEPT\nFINAL_VULNERABILITY: yes\nFINAL_CWE_IDS: CWE-78",
        );
        assert_eq!(v.decision, VerifierDecision::Accept);
        assert_eq!(v.final_vulnerability, YesNo::Yes);
        assert_eq!(v.final_cwe_ids, cwes(&[78]));

        let missing = parse_verifier_verdict("DECISION: CHALLENGE\nREASONING: unclear");
        assert_eq!(missing.final_vulnerability, YesNo::Unknown);
        assert_eq!(missing.reasoning, "unclear");

        let lower = parse_verifier_verdict(
            "decision: reject\nfinal_vulnerability: No\nagreement_level: partial",
        );
        assert_eq!(lower.final_vulnerability, YesNo::No);
        assert_eq!(lower.decision, VerifierDecision::Reject);
        assert_eq!(lower.agreement_level, Agreement::Partial);

        let inline = parse_verifier_verdict(
            "DECISION: CHALLENGE; FINAL_VULNERABILITY: yes; FINAL_CWE_IDS: [CWE-122, CWE-787]; AGREEMENT_LEVEL: full; REASONING: heap write past end",
        );
        assert_eq!(inline.final_cwe_ids, cwes(&[122, 787]));
        assert_eq!(inline.agreement_level, Agreement::Full);
        assert_eq!(inline.reasoning, "heap write past end");
    }

    #[test]
    fn verifier_override_wins() {
        let experts = [
            report(YesNo::Yes, &[121]),
            report(YesNo::Yes, &[121]),
            report(YesNo::Yes, &[122]),
        ];
        let r = decide(&experts, Some(&verdict(YesNo::No, &[])), VoteRule::Union).unwrap();
        assert!(!r.vulnerable);
        assert_eq!(r.decided_by, DecidedBy::VerifierOverride);

        let r = decide(&experts, Some(&verdict(YesNo::Yes, &[])), VoteRule::Union).unwrap();
        assert!(r.vulnerable);
        assert_eq!(
            r.cwes,
            cwes(&[121, 122]),
            "empty final list falls back to the pool"
        );

        let r = decide(
            &experts,
            Some(&verdict(YesNo::Yes, &[787])),
            VoteRule::Union,
        )
        .unwrap();
        assert_eq!(r.cwes, cwes(&[787]));
    }

    #[test]
    fn majority_vote_paths() {
        let experts = [
            report(YesNo::Yes, &[121]),
            report(YesNo::Yes, &[122]),
            report(YesNo::No, &[]),
        ];
        let r = decide(&experts, None, VoteRule::Union).unwrap();
        assert!(r.vulnerable);
        assert_eq!(r.cwes, cwes(&[121, 122]));
        assert_eq!(r.decided_by, DecidedBy::MajorityVote);

        // Unknown final verdict falls through to the vote.
        let r = decide(
            &experts,
            Some(&verdict(YesNo::Unknown, &[476])),
            VoteRule::Union,
        )
        .unwrap();
        assert_eq!(r.decided_by, DecidedBy::MajorityVote);
        assert!(r.vulnerable);

        let no_ids = [
            report(YesNo::Yes, &[]),
            report(YesNo::Yes, &[]),
            report(YesNo::Yes, &[]),
        ];
        assert!(!decide(&no_ids, None, VoteRule::Union).unwrap().vulnerable);

        // The two readings of the CWE clause disagree here.
        let split = [
            report(YesNo::Yes, &[121]),
            report(YesNo::Yes, &[]),
            report(YesNo::No, &[476]),
        ];
        assert!(decide(&split, None, VoteRule::Union).unwrap().vulnerable);
        assert!(
            !decide(&split, None, VoteRule::PerReport)
                .unwrap()
                .vulnerable
        );
    }

    #[test]
    fn single_expert_and_bad_counts() {
        let r = decide(&[report(YesNo::Yes, &[476])], None, VoteRule::Union).unwrap();
        assert!(r.vulnerable);
        assert_eq!(r.decided_by, DecidedBy::SingleExpert);
        assert!(
            !decide(&[report(YesNo::Yes, &[])], None, VoteRule::Union)
                .unwrap()
                .vulnerable
        );
        assert_eq!(
            decide(&[], None, VoteRule::Union),
            Err(DecideError::ReportCount(0))
        );
        let two = [report(YesNo::Yes, &[1]), report(YesNo::Yes, &[1])];
        assert_eq!(
            decide(&two, None, VoteRule::Union),
            Err(DecideError::ReportCount(2))
        );
    }

    #[test]
    fn hierarchy_matching() {
        let h = CweHierarchy::default();
        let truth = Cwe::new(121).unwrap();
        assert!(cwe_match(&cwes(&[122]), truth, &h));
        assert!(cwe_match(&cwes(&[787, 416]), truth, &h));
        assert!(!cwe_match(&cwes(&[476]), truth, &h));
        assert!(cwe_match(&cwes(&[191]), Cwe::new(190).unwrap(), &h));
        assert!(!cwe_match(&cwes(&[122]), truth, &CweHierarchy::flat()));
        assert!(CweHierarchy::new(vec![cwes(&[1, 2]), cwes(&[2, 3])]).is_err());
    }

    fn arb_report() -> impl Strategy<Value = ExpertReport> {
        (
            prop_oneof![Just(YesNo::Yes), Just(YesNo::No), Just(YesNo::Unknown)],
            proptest::collection::btree_set(1u32..1000, 0..4),
        )
            .prop_map(|(found, ids)| report(found, &ids.into_iter().collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn parsers_are_total(text in "\\PC{0,400}") {
            let r = parse_expert_report(&text);
            prop_assert_eq!(&r.raw_text, &text);
            let v = parse_verifier_verdict(&text);
            prop_assert_eq!(&v.raw_text, &text);
        }

        #[test]
        fn parsers_are_total_on_field_soup(
            parts in proptest::collection::vec(
                prop_oneof![
                    Just("VULNERABILITY_FOUND:".to_string()),
                    Just("FINAL_CWE_IDS:".to_string()),
                    Just("CWE-".to_string()),
                    Just(";".to_string()),
                    Just("\n".to_string()),
                    Just("**".to_string()),
                    "\\PC{0,8}",
                ],
                0..30,
            )
        ) {
            let text = parts.concat();
            parse_expert_report(&text);
            parse_verifier_verdict(&text);
        }

        #[test]
        fn verdict_flip_flips_prediction(experts in proptest::collection::vec(arb_report(), 3)) {
            let yes = decide(&experts, Some(&verdict(YesNo::Yes, &[])), VoteRule::Union).unwrap();
            let no = decide(&experts, Some(&verdict(YesNo::No, &[])), VoteRule::Union).unwrap();
            prop_assert!(yes.vulnerable);
            prop_assert!(!no.vulnerable);
        }

        #[test]
        fn vote_pool_covers_every_expert(experts in proptest::collection::vec(arb_report(), 3)) {
            let r = decide(&experts, None, VoteRule::Union).unwrap();
            for e in &experts {
                prop_assert!(e.cwe_ids.is_subset(&r.cwes));
            }
        }

        #[test]
        fn hierarchy_is_symmetric(a in prop_oneof![Just(119u32), Just(120), Just(121), Just(122), Just(787), Just(190), Just(191), 1u32..1000],
                                  b in prop_oneof![Just(119u32), Just(120), Just(121), Just(122), Just(787), Just(190), Just(191), 1u32..1000]) {
            let h = CweHierarchy::default();
            let (a, b) = (Cwe::new(a).unwrap(), Cwe::new(b).unwrap());
            prop_assert_eq!(
                cwe_match(&BTreeSet::from([a]), b, &h),
                cwe_match(&BTreeSet::from([b]), a, &h)
            );
        }
    }
}
