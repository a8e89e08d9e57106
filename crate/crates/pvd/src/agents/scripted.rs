//! Scripted agent: replays a fixed sequence of replies. Test double for
//! exercising exact protocol trajectories.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::{Agent, AgentError, AgentMessage, CallCtx, Completion, UsageRecord};

/// Pops one canned reply per call, in order. Errors once the script runs out.
/// Also records the last request it saw, so tests can assert on what the
/// protocol sent.
pub struct ScriptedAgent {
    replies: Mutex<VecDeque<String>>,
    served: Mutex<usize>,
    last_request: Mutex<Option<Vec<AgentMessage>>>,
    name: String,
}

impl ScriptedAgent {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            served: Mutex::new(0),
            last_request: Mutex::new(None),
            name: "scripted".into(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replies not yet consumed.
    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().len()
    }

    /// The message list of the most recent call.
    pub fn last_request(&self) -> Option<Vec<AgentMessage>> {
        self.last_request.lock().unwrap().clone()
    }
}

impl Agent for ScriptedAgent {
    fn complete(
        &self,
        _ctx: &CallCtx<'_>,
        messages: &[AgentMessage],
    ) -> Result<Completion, AgentError> {
        *self.last_request.lock().unwrap() = Some(messages.to_vec());
        let next = self.replies.lock().unwrap().pop_front();
        match next {
            Some(text) => {
                *self.served.lock().unwrap() += 1;
                Ok(Completion { text, usage: UsageRecord::default() })
            }
            None => Err(AgentError::ScriptExhausted { served: *self.served.lock().unwrap() }),
        }
    }

    fn name(&self) -> &str {
        &self.name
    }
}
