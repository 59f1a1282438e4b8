use std::sync::Arc;

use super::{Agent, AgentError, AgentSpec, ChatBackend, ChatMessage, ChatRequest};
use crate::game::{Role, Utterance};
use crate::session::ImprovedPlayerContext;

pub const DEFAULT_SELLER_PERSONA: &str = "You are playing the seller in a bargaining game over a {product}. \
Your goal is to sell the {product} at a price as high as possible while still reaching a deal. \
Reply to the buyer with one short message. When you agree to a price, say so explicitly.";

pub const DEFAULT_BUYER_PERSONA: &str = "You are playing the buyer in a bargaining game over a {product}. \
Your goal is to buy the {product} at a price as low as possible while still reaching a deal. \
Reply to the seller with one short message. When you agree to a price, say so explicitly.";

pub fn render_persona(template: &str, role: Role, product: &str) -> String {
    template
        .replace("{product}", product)
        .replace("{role}", &role.label().to_ascii_lowercase())
        .replace(
            "{counterparty}",
            &role
                .counterparty()
                .map(|r| r.label().to_ascii_lowercase())
                .unwrap_or_default(),
        )
}

/// A player whose turns come from a chat backend. Its own past turns are
/// sent as assistant messages and the counterparty's as user messages.
pub struct ChatPlayer {
    spec: AgentSpec,
    backend: Arc<dyn ChatBackend>,
    context_block: String,
}

impl ChatPlayer {
    /// `spec.persona_prompt` should already be rendered.
    pub fn new(spec: AgentSpec, backend: Arc<dyn ChatBackend>) -> Self {
        ChatPlayer {
            spec,
            backend,
            context_block: String::new(),
        }
    }

    pub fn build_request(&self, history: &[Utterance]) -> ChatRequest {
        let mut system_prompt = self.spec.persona_prompt.clone();
        if !self.context_block.is_empty() {
            system_prompt.push_str("\n\n");
            system_prompt.push_str(&self.context_block);
        }
        let messages = history
            .iter()
            .map(|u| {
                if u.speaker == self.spec.role {
                    ChatMessage::assistant(u.text.clone())
                } else {
                    ChatMessage::user(u.text.clone())
                }
            })
            .collect();
        ChatRequest {
            system_prompt,
            messages,
            temperature: self.spec.temperature,
        }
    }
}

impl Agent for ChatPlayer {
    fn role(&self) -> Role {
        self.spec.role
    }

    fn respond(&mut self, history: &[Utterance]) -> Result<String, AgentError> {
        let request = self.build_request(history);
        let response = self.backend.complete(&request)?;
        Ok(response.text.trim().to_string())
    }

    fn set_context(&mut self, context: &ImprovedPlayerContext) {
        self.context_block = context.render_for_player();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{BackendError, ChatResponse, EngineId, MessageTag};

    struct Echo;
    impl ChatBackend for Echo {
        fn complete(&self, r: &ChatRequest) -> Result<ChatResponse, BackendError> {
            Ok(ChatResponse::new(format!("  {} msgs  ", r.messages.len())))
        }
    }

    #[test]
    fn tags_follow_perspective() {
        let spec = AgentSpec::new(Role::Buyer, EngineId::gpt35(), "persona");
        let player = ChatPlayer::new(spec, Arc::new(Echo));
        let h = vec![
            Utterance::new(Role::Seller, "a", 0, 0),
            Utterance::new(Role::Buyer, "b", 0, 1),
        ];
        let req = player.build_request(&h);
        assert_eq!(req.messages[0].tag, MessageTag::User);
        assert_eq!(req.messages[1].tag, MessageTag::Assistant);
        assert_eq!(req.temperature, 1.0);
        assert_eq!(req.system_prompt, "persona");
    }

    #[test]
    fn response_is_trimmed() {
        let spec = AgentSpec::new(Role::Seller, EngineId::gpt35(), "p");
        let mut player = ChatPlayer::new(spec, Arc::new(Echo));
        let h = vec![Utterance::new(Role::Buyer, "x", 0, 1)];
        assert_eq!(player.respond(&h).unwrap(), "1 msgs");
    }

    #[test]
    fn persona_placeholders() {
        let s = render_persona("{role} vs {counterparty} over a {product}", Role::Seller, "kite");
        assert_eq!(s, "seller vs buyer over a kite");
        assert!(!render_persona(DEFAULT_BUYER_PERSONA, Role::Buyer, "balloon").contains('{'));
    }
}
