use serde::{Deserialize, Serialize};

use super::{Backend, HttpEndpoint, PromptMessage, Role};
use crate::error::{Error, Result};

pub const DEFAULT_BREVITY_PROMPT: &str = "Answer concisely in at most three sentences.";

#[derive(Serialize)]
struct CompleteRequest<'a> {
    messages: &'a [PromptMessage],
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

#[derive(Debug, Clone)]
pub struct LlmAdapter {
    backend: Backend,
    brevity_prompt: String,
    model_label: String,
}

impl LlmAdapter {
    pub fn stub() -> Self {
        Self {
            backend: Backend::Stub,
            brevity_prompt: DEFAULT_BREVITY_PROMPT.into(),
            model_label: "stub (reversed words)".into(),
        }
    }

    pub fn http(endpoint: HttpEndpoint) -> Self {
        Self {
            backend: Backend::Http(endpoint),
            brevity_prompt: DEFAULT_BREVITY_PROMPT.into(),
            model_label: "chat completion".into(),
        }
    }

    pub fn with_brevity_prompt(mut self, prompt: impl Into<String>) -> Result<Self> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(Error::Config("brevity prompt must be non-empty".into()));
        }
        self.brevity_prompt = prompt;
        Ok(self)
    }

    pub fn brevity_prompt(&self) -> &str {
        &self.brevity_prompt
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn model_label(&self) -> &str {
        &self.model_label
    }

    pub fn complete(&self, messages: &[PromptMessage]) -> Result<String> {
        let last = messages
            .last()
            .ok_or_else(|| Error::precondition("message list is empty"))?;
        if last.role != Role::User {
            return Err(Error::precondition("last message must come from the user"));
        }
        match &self.backend {
            Backend::Stub => Ok(stub_answer(&last.content)),
            Backend::Http(ep) => {
                let resp: CompleteResponse =
                    ep.post_json_for_json("llm", "complete", &CompleteRequest { messages })?;
                Ok(resp.text)
            }
        }
    }
}

/// `"Answer: "` followed by the question's words in reverse order.
fn stub_answer(question: &str) -> String {
    let reversed: Vec<&str> = question.split_whitespace().rev().collect();
    format!("Answer: {}", reversed.join(" "))
}
