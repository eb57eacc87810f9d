use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{word_count, Transcript};

/// Fewest words a transcript may have before it is treated as silence.
pub const MIN_WORDS: usize = 2;

/// Number of previous question/answer pairs carried into each prompt.
pub const CONTEXT_DEPTH: usize = 2;

/// Accepts `text` only if it has at least [`MIN_WORDS`] words.
pub fn validate_transcript(text: &str) -> Result<Transcript> {
    let words = word_count(text);
    if words < MIN_WORDS {
        return Err(Error::SilentInput { words });
    }
    Ok(Transcript::new(text))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    question: String,
    answer: String,
}

impl Exchange {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Result<Self> {
        let (question, answer) = (question.into(), answer.into());
        if question.is_empty() || answer.is_empty() {
            return Err(Error::precondition("exchange question and answer must be non-empty"));
        }
        Ok(Self { question, answer })
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }
}

/// The last [`CONTEXT_DEPTH`] exchanges, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversationContext {
    exchanges: VecDeque<Exchange>,
}

impl ConversationContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an exchange, evicting the oldest once more than
    /// [`CONTEXT_DEPTH`] are held.
    pub fn push(&mut self, question: impl Into<String>, answer: impl Into<String>) -> Result<()> {
        let ex = Exchange::new(question, answer)?;
        if self.exchanges.len() == CONTEXT_DEPTH {
            self.exchanges.pop_front();
        }
        self.exchanges.push_back(ex);
        Ok(())
    }

    pub fn exchanges(&self) -> impl ExactSizeIterator<Item = &Exchange> {
        self.exchanges.iter()
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub role: Role,
    pub content: String,
}

impl PromptMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Result<Self> {
        let content = content.into();
        if content.is_empty() {
            return Err(Error::precondition("prompt message content must be non-empty"));
        }
        Ok(Self { role, content })
    }
}

/// `[system preamble, (user, assistant) per stored exchange, user question]`.
pub fn build_prompt(
    context: &ConversationContext,
    preamble: &str,
    question: &str,
) -> Result<Vec<PromptMessage>> {
    if question.is_empty() {
        return Err(Error::precondition("question must be non-empty"));
    }
    let mut messages = Vec::with_capacity(2 + 2 * context.len());
    messages.push(PromptMessage::new(Role::System, preamble)?);
    for ex in context.exchanges() {
        messages.push(PromptMessage::new(Role::User, ex.question())?);
        messages.push(PromptMessage::new(Role::Assistant, ex.answer())?);
    }
    messages.push(PromptMessage::new(Role::User, question)?);
    Ok(messages)
}
