//! The four agent roles and the requests they send.
//!
//! System prompts live as plain text under `prompts/` so they can be
//! audited and checksummed; they are compiled into the binary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::provider::CompletionRequest;

pub const CODE_ANALYST_PROMPT: &str = include_str!("../prompts/code_analyst.txt");
pub const SECURITY_EXPERT_PROMPT: &str = include_str!("../prompts/security_expert.txt");
pub const DEBUG_EXPERT_PROMPT: &str = include_str!("../prompts/debug_expert.txt");
pub const VERIFIER_PROMPT: &str = include_str!("../prompts/verifier.txt");

pub const DEFAULT_EXPERT_MODEL: &str = "deepseek-chat";
pub const DEFAULT_VERIFIER_MODEL: &str = "Qwen3-8B";
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const EXPERT_MAX_TOKENS: u32 = 4000;
pub const VERIFIER_MAX_TOKENS: u32 = 2048;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("{0} is not an expert role")]
    NotAnExpert(RoleName),
    #[error("{0} is not the verifier role")]
    NotTheVerifier(RoleName),
    #[error("verifier needs exactly 3 expert reports, got {0}")]
    ReportCount(usize),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    CodeAnalyst,
    SecurityExpert,
    DebugExpert,
    Verifier,
}

impl RoleName {
    /// Fixed expert order used for report assembly.
    pub const EXPERTS: [RoleName; 3] = [
        RoleName::CodeAnalyst,
        RoleName::SecurityExpert,
        RoleName::DebugExpert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleName::CodeAnalyst => "code_analyst",
            RoleName::SecurityExpert => "security_expert",
            RoleName::DebugExpert => "debug_expert",
            RoleName::Verifier => "verifier",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            RoleName::CodeAnalyst => "Code Analyst",
            RoleName::SecurityExpert => "Security Expert",
            RoleName::DebugExpert => "Debug Expert",
            RoleName::Verifier => "Adversarial Verifier",
        }
    }

    pub fn is_expert(self) -> bool {
        self != RoleName::Verifier
    }

    pub fn system_prompt(self) -> &'static str {
        match self {
            RoleName::CodeAnalyst => CODE_ANALYST_PROMPT,
            RoleName::SecurityExpert => SECURITY_EXPERT_PROMPT,
            RoleName::DebugExpert => DEBUG_EXPERT_PROMPT,
            RoleName::Verifier => VERIFIER_PROMPT,
        }
    }
}

impl fmt::Display for RoleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoleName {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "code_analyst" => Ok(RoleName::CodeAnalyst),
            "security_expert" => Ok(RoleName::SecurityExpert),
            "debug_expert" => Ok(RoleName::DebugExpert),
            "verifier" => Ok(RoleName::Verifier),
            other => Err(AgentError::UnknownRole(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRole {
    pub name: RoleName,
    pub system_prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl AgentRole {
    /// Role with its default prompt, model and sampling parameters.
    pub fn new(name: RoleName) -> Self {
        let (model, max_tokens) = if name.is_expert() {
            (DEFAULT_EXPERT_MODEL, EXPERT_MAX_TOKENS)
        } else {
            (DEFAULT_VERIFIER_MODEL, VERIFIER_MAX_TOKENS)
        };
        AgentRole {
            name,
            system_prompt: name.system_prompt().to_string(),
            model: model.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens,
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn experts() -> Vec<AgentRole> {
        RoleName::EXPERTS
            .iter()
            .copied()
            .map(AgentRole::new)
            .collect()
    }

    pub fn verifier() -> AgentRole {
        AgentRole::new(RoleName::Verifier)
    }
}

/// True when no expert shares the verifier's model.
pub fn is_heterogeneous(experts: &[AgentRole], verifier: &AgentRole) -> bool {
    experts.iter().all(|e| e.model != verifier.model)
}

/// Collapse every whitespace run to one space and trim.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn code_block(code: &str) -> String {
    format!("```\n{}\n```", code.trim_end_matches('\n'))
}

/// Request for one expert. Only the code is sent; the sample's id, path
/// and label stay out of the prompt.
pub fn expert_request(role: &AgentRole, sample: &Sample) -> Result<CompletionRequest, AgentError> {
    if !role.name.is_expert() {
        return Err(AgentError::NotAnExpert(role.name));
    }
    Ok(CompletionRequest {
        model: role.model.clone(),
        system_prompt: role.system_prompt.clone(),
        user_prompt: format!(
            "Analyze the following C/C++ code:\n{}",
            code_block(&sample.code)
        ),
        temperature: role.temperature,
        max_tokens: role.max_tokens,
    })
}

/// Request for the verifier: the code followed by the three expert reports
/// in (code analyst, security expert, debug expert) order.
pub fn verifier_request(
    role: &AgentRole,
    sample: &Sample,
    reports: &[&str],
) -> Result<CompletionRequest, AgentError> {
    if role.name != RoleName::Verifier {
        return Err(AgentError::NotTheVerifier(role.name));
    }
    if reports.len() != 3 {
        return Err(AgentError::ReportCount(reports.len()));
    }
    let mut user = format!("Original code:\n{}\n", code_block(&sample.code));
    for (i, (name, report)) in RoleName::EXPERTS.iter().zip(reports).enumerate() {
        user.push_str(&format!(
            "\n=== Report {}: {} ===\n{}\n",
            i + 1,
            name.title(),
            report.trim_end()
        ));
    }
    Ok(CompletionRequest {
        model: role.model.clone(),
        system_prompt: role.system_prompt.clone(),
        user_prompt: user,
        temperature: role.temperature,
        max_tokens: role.max_tokens,
    })
}
