use super::{ModelAdapter, ModelError, ModelRequest, Role};

/// Client for a chat-completions style HTTP endpoint.
pub struct RemoteModel {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteModel {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            client: reqwest::blocking::Client::new(),
        }
    }

    /// Reads `HAL_MODEL_ENDPOINT`, `HAL_MODEL_NAME`, and the key from the
    /// variable named by `HAL_MODEL_API_KEY_VAR`.
    pub fn from_env() -> Result<Self, ModelError> {
        let endpoint = std::env::var("HAL_MODEL_ENDPOINT")
            .map_err(|_| ModelError::Config("HAL_MODEL_ENDPOINT is not set".into()))?;
        let model = std::env::var("HAL_MODEL_NAME").unwrap_or_default();
        let api_key = match std::env::var("HAL_MODEL_API_KEY_VAR") {
            Ok(var) => Some(
                std::env::var(&var).map_err(|_| ModelError::Config(format!("{var} is not set")))?,
            ),
            Err(_) => None,
        };
        Ok(Self::new(endpoint, model, api_key))
    }

    fn system_prompt(role: Role) -> &'static str {
        match role {
            Role::Preprocess => "You sort user text into questions and lab commands.",
            Role::Plan => "You plan the next step of a laboratory experiment.",
            Role::Develop => "You write experiment scripts in the lab scripting language.",
            Role::Search => "You curate documents retrieved from a laboratory knowledge base.",
            Role::Answer => "You answer questions about the laboratory using the supplied documents.",
        }
    }
}

impl ModelAdapter for RemoteModel {
    fn name(&self) -> &str {
        "remote"
    }

    fn generate(&self, request: &ModelRequest) -> Result<String, ModelError> {
        let body = serde_json::json!({
            "model": self.model,
            "reasoning_effort": request.thinking.as_str(),
            "messages": [
                {"role": "system", "content": Self::system_prompt(request.role)},
                {"role": "user", "content": request.render()},
            ],
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let reply: serde_json::Value = req
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ModelError::Transport("reply has no choices[0].message.content".into()))
    }
}
