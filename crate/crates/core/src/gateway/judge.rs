use serde_json::json;

use super::templates::{vars, TemplateName, TemplateSet};
use super::ChatModel;
use crate::metrics::{JudgeUnavailable, TripleJudge};
use crate::triple::Triple;

/// A [`TripleJudge`] that renders the judge template and asks a chat model.
pub struct LlmJudge<M> {
    model: M,
    templates: TemplateSet,
}

impl<M: ChatModel> LlmJudge<M> {
    pub fn new(model: M) -> Self {
        Self::with_templates(model, TemplateSet::default())
    }

    pub fn with_templates(model: M, templates: TemplateSet) -> Self {
        LlmJudge { model, templates }
    }
}

impl<M: ChatModel> TripleJudge for LlmJudge<M> {
    fn respond(&self, gold: &Triple, pred: &Triple) -> Result<String, JudgeUnavailable> {
        let prompt = self
            .templates
            .render(
                TemplateName::Judge,
                &vars([
                    ("tx", json!(gold.as_tuple_literal())),
                    ("ty", json!(pred.as_tuple_literal())),
                ]),
            )
            .map_err(|e| JudgeUnavailable(e.to_string()))?;
        self.model
            .complete(&prompt)
            .map(|ex| ex.response_text)
            .map_err(|e| JudgeUnavailable(e.to_string()))
    }
}
