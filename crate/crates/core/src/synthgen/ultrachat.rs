//! Multi-turn conversation synthesis with a model-impersonated user.
//!
//! The saved conversation starts with the context paragraph and the seed
//! question. The client sees a separate message list: the simulation system
//! prompt, `"{paragraph}\n\n{question}"`, then the generated turns. Each
//! round first asks the client to play the user (with a continuation
//! instruction appended only to a temporary copy of the messages), then asks
//! for the assistant reply. `n` rounds give `3 + 2n` saved turns.

use serde::{Deserialize, Serialize};

use super::client::{ChatClient, ClientError};
use super::prompts::{ULTRACHAT_CONTINUE, ULTRACHAT_SYSTEM};
use super::translate::TranslationHook;
use super::GenerationParams;
use crate::chat_template::{Conversation, Role, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UltrachatOptions {
    /// Number of extra user/assistant rounds after the first answer.
    pub turns: usize,
    pub params: GenerationParams,
    /// Store a translation for every turn, not only flagged ones.
    pub translate_all: bool,
}

impl Default for UltrachatOptions {
    fn default() -> Self {
        UltrachatOptions {
            turns: 1,
            params: GenerationParams::default(),
            translate_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UltrachatOutcome {
    pub conversation: Conversation,
    /// Set when the client failed; `conversation` then holds the turns
    /// produced before the failure.
    pub error: Option<ClientError>,
}

impl UltrachatOutcome {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

/// Expected saved length for `n` rounds.
pub fn expected_turns(n: usize) -> usize {
    3 + 2 * n
}

fn annotate(turn: &mut Turn, hook: &dyn TranslationHook, translate_all: bool) {
    let flagged = hook.detect_indonesian(&turn.content);
    turn.indon = Some(flagged);
    if flagged || translate_all {
        turn.content_ms = Some(hook.translate_to_malay(&turn.content));
    }
}

pub fn ultrachat(
    paragraph: &str,
    question: &str,
    client: &dyn ChatClient,
    opts: &UltrachatOptions,
    hook: &dyn TranslationHook,
) -> UltrachatOutcome {
    let mut context = Turn::context(paragraph);
    context.indon = Some(false);
    let mut first = Turn::user(question);
    annotate(&mut first, hook, opts.translate_all);
    let mut results = vec![context, first];

    let initial = format!("{paragraph}\n\n{question}").trim().to_string();
    let mut messages = vec![Turn::system(ULTRACHAT_SYSTEM), Turn::user(initial)];

    let push = |role: Role, reply: String, results: &mut Vec<Turn>, messages: &mut Vec<Turn>| {
        messages.push(Turn::new(role, reply.clone()));
        let mut saved = Turn::new(role, reply);
        annotate(&mut saved, hook, opts.translate_all);
        results.push(saved);
    };
    let fail = |results: Vec<Turn>, e: ClientError| UltrachatOutcome {
        conversation: Conversation::new(results),
        error: Some(e),
    };

    match client.complete(&messages, &opts.params) {
        Ok(r) => push(Role::Assistant, r, &mut results, &mut messages),
        Err(e) => return fail(results, e),
    }
    for _ in 0..opts.turns {
        let mut scaffold = messages.clone();
        scaffold.push(Turn::user(ULTRACHAT_CONTINUE));
        match client.complete(&scaffold, &opts.params) {
            Ok(r) => push(Role::User, r, &mut results, &mut messages),
            Err(e) => return fail(results, e),
        }
        match client.complete(&messages, &opts.params) {
            Ok(r) => push(Role::Assistant, r, &mut results, &mut messages),
            Err(e) => return fail(results, e),
        }
    }
    UltrachatOutcome {
        conversation: Conversation::new(results),
        error: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::client::{FnClient, MockClient};
    use crate::synthgen::translate::WordlistHook;
    use std::sync::Mutex;

    #[test]
    fn zero_rounds_gives_three_turns() {
        let client = MockClient::new();
        let opts = UltrachatOptions { turns: 0, ..Default::default() };
        let out = ultrachat("perenggan", "soalan?", &client, &opts, &WordlistHook::new());
        let roles: Vec<Role> = out.conversation.turns.iter().map(|t| t.role).collect();
        assert_eq!(roles, [Role::Context, Role::User, Role::Assistant]);
        assert_eq!(client.calls(), 1);
        assert!(out.is_complete());
    }

    #[test]
    fn scaffold_only_reaches_the_client_on_user_turns() {
        let log = Mutex::new(Vec::new());
        let client = FnClient(|msgs: &[Turn], _: &GenerationParams| {
            let last = msgs.last().unwrap();
            log.lock().unwrap().push((msgs.len(), last.content == ULTRACHAT_CONTINUE));
            Ok(format!("r{}", msgs.len()))
        });
        let opts = UltrachatOptions { turns: 2, ..Default::default() };
        let out = ultrachat("p", "q", &client, &opts, &WordlistHook::new());
        assert_eq!(
            *log.lock().unwrap(),
            [(2, false), (4, true), (4, false), (6, true), (6, false)]
        );
        assert_eq!(out.conversation.turns.len(), 7);
        assert!(out.conversation.turns.iter().all(|t| t.content != ULTRACHAT_CONTINUE));
    }

    #[test]
    fn initial_message_is_trimmed() {
        let seen = Mutex::new(String::new());
        let client = FnClient(|msgs: &[Turn], _: &GenerationParams| {
            *seen.lock().unwrap() = msgs[1].content.clone();
            Ok("x".into())
        });
        let opts = UltrachatOptions { turns: 0, ..Default::default() };
        ultrachat("  para ", "soalan\n", &client, &opts, &WordlistHook::new());
        assert_eq!(*seen.lock().unwrap(), "para \n\nsoalan");
    }

    #[test]
    fn failure_returns_partial() {
        let calls = Mutex::new(0);
        let client = FnClient(|_: &[Turn], _: &GenerationParams| {
            let mut c = calls.lock().unwrap();
            *c += 1;
            if *c == 3 {
                Err(ClientError::Transient("down".into()))
            } else {
                Ok("ok".into())
            }
        });
        let opts = UltrachatOptions { turns: 2, ..Default::default() };
        let out = ultrachat("p", "q", &client, &opts, &WordlistHook::new());
        assert_eq!(out.conversation.turns.len(), 4);
        assert!(out.error.is_some());
    }

    #[test]
    fn indonesian_turns_are_flagged() {
        let client = FnClient(|_: &[Turn], _: &GenerationParams| {
            Ok("Kamu bisa mencoba karena itu berbeda".to_string())
        });
        let opts = UltrachatOptions { turns: 0, ..Default::default() };
        let out = ultrachat("p", "q", &client, &opts, &WordlistHook::new());
        let reply = &out.conversation.turns[2];
        assert_eq!(reply.indon, Some(true));
        assert_eq!(reply.content_ms.as_deref(), Some(reply.content.as_str()));
        assert_eq!(out.conversation.turns[0].indon, Some(false));
        assert_eq!(out.conversation.turns[0].content_ms, None);
        assert_eq!(out.conversation.turns[1].indon, Some(false));
    }
}
