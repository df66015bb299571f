use crate::api::core::ports::SecurityPort;

/// Static bearer token; `None` lets every request through.
#[derive(Debug, Clone, Default)]
pub struct StaticToken {
    token: Option<String>,
}

impl StaticToken {
    pub fn new(token: Option<String>) -> Self {
        Self { token: token.filter(|t| !t.is_empty()) }
    }
}

impl SecurityPort for StaticToken {
    fn authorize(&self, bearer: Option<&str>) -> bool {
        match &self.token {
            None => true,
            Some(t) => bearer == Some(t.as_str()),
        }
    }
}
