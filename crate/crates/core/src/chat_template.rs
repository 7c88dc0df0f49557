//! Mistral-style instruction template.
//!
//! ```text
//! <s>[INST] u1 [/INST] a1</s> [INST] u2 [/INST] a2</s> [INST] u3 [/INST]
//! ```
//!
//! Template markers inside content are rejected rather than escaped.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const INST_OPEN: &str = "[INST]";
pub const INST_CLOSE: &str = "[/INST]";
pub const MARKERS: [&str; 4] = [INST_OPEN, INST_CLOSE, BOS, EOS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    Context,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::Context => "context",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
    /// Malay translation of `content`, when one was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_ms: Option<String>,
    /// Whether `content` was detected as Indonesian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indon: Option<bool>,
}

impl Turn {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Turn {
            role,
            content: content.into(),
            content_ms: None,
            indon: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Turn::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Turn::new(Role::Assistant, content)
    }

    pub fn system(content: impl Into<String>) -> Self {
        Turn::new(Role::System, content)
    }

    pub fn context(content: impl Into<String>) -> Self {
        Turn::new(Role::Context, content)
    }

    /// The text used for training: the translation when present.
    pub fn effective_content(&self) -> &str {
        self.content_ms.as_deref().unwrap_or(&self.content)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn new(turns: Vec<Turn>) -> Self {
        Conversation { turns }
    }

    /// Checks the role pattern: leading system/context turns, then
    /// user/assistant alternation starting with user.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let lead = self.leading_len();
        for (i, t) in self.turns.iter().enumerate().skip(lead) {
            let expected = if (i - lead) % 2 == 0 { Role::User } else { Role::Assistant };
            if t.role != expected {
                return Err(TemplateError::Alternation {
                    index: i,
                    expected,
                    found: t.role,
                });
            }
        }
        if lead == self.turns.len() {
            return Err(TemplateError::NoUserTurn);
        }
        Ok(())
    }

    fn leading_len(&self) -> usize {
        self.turns
            .iter()
            .take_while(|t| matches!(t.role, Role::System | Role::Context))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("turn {index}: expected {expected}, found {found}")]
    Alternation { index: usize, expected: Role, found: Role },
    #[error("conversation has no user turn")]
    NoUserTurn,
    #[error("turn {index}: content contains template marker {marker:?}")]
    MarkerInContent { index: usize, marker: &'static str },
    #[error("unbalanced markers at byte {offset}: expected {expected:?}")]
    Unbalanced { offset: usize, expected: &'static str },
    #[error("ambiguous content at byte {offset}")]
    AmbiguousContent { offset: usize },
}

fn find_marker(s: &str) -> Option<&'static str> {
    MARKERS.into_iter().find(|m| s.contains(m))
}

/// Renders a conversation. Leading system/context turns are joined into the
/// first user turn with a blank line.
pub fn render(conv: &Conversation) -> Result<String, TemplateError> {
    conv.validate()?;
    for (index, t) in conv.turns.iter().enumerate() {
        if let Some(marker) = find_marker(t.effective_content()) {
            return Err(TemplateError::MarkerInContent { index, marker });
        }
    }
    let lead = conv.leading_len();
    let mut out = String::from(BOS);
    let mut prefix: Vec<&str> = conv.turns[..lead].iter().map(Turn::effective_content).collect();
    for (k, t) in conv.turns[lead..].iter().enumerate() {
        match t.role {
            Role::User => {
                if k > 0 {
                    out.push(' ');
                }
                out.push_str(INST_OPEN);
                out.push(' ');
                if prefix.is_empty() {
                    out.push_str(t.effective_content());
                } else {
                    prefix.push(t.effective_content());
                    out.push_str(&prefix.join("\n\n"));
                    prefix.clear();
                }
                out.push(' ');
                out.push_str(INST_CLOSE);
            }
            _ => {
                out.push(' ');
                out.push_str(t.effective_content());
                out.push_str(EOS);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`render`] for conversations without leading turns.
pub fn parse(s: &str) -> Result<Conversation, TemplateError> {
    let unbalanced = |offset, expected| TemplateError::Unbalanced { offset, expected };
    if !s.starts_with(BOS) {
        return Err(unbalanced(0, BOS));
    }
    let mut pos = BOS.len();
    let mut turns = Vec::new();
    loop {
        let open = if turns.is_empty() { "[INST] " } else { " [INST] " };
        if !s[pos..].starts_with(open) {
            return Err(unbalanced(pos, INST_OPEN));
        }
        pos += open.len();
        let close = " [/INST]";
        let end = s[pos..].find(close).map(|i| pos + i).ok_or(unbalanced(pos, INST_CLOSE))?;
        let user = &s[pos..end];
        if let Some(i) = marker_offset(user) {
            return Err(TemplateError::AmbiguousContent { offset: pos + i });
        }
        turns.push(Turn::user(user));
        pos = end + close.len();
        if pos == s.len() {
            break;
        }
        if !s[pos..].starts_with(' ') {
            return Err(unbalanced(pos, " "));
        }
        pos += 1;
        let end = s[pos..].find(EOS).map(|i| pos + i).ok_or(unbalanced(pos, EOS))?;
        let reply = &s[pos..end];
        if let Some(i) = marker_offset(reply) {
            return Err(TemplateError::AmbiguousContent { offset: pos + i });
        }
        turns.push(Turn::assistant(reply));
        pos = end + EOS.len();
        if pos == s.len() {
            break;
        }
    }
    Ok(Conversation { turns })
}

fn marker_offset(s: &str) -> Option<usize> {
    MARKERS.iter().filter_map(|m| s.find(m)).min()
}
