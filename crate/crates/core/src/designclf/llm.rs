use serde::Deserialize;

use super::{DesignError, DesignLabel, DesignNode, Setting};
use crate::corpus::StudyRecord;
use crate::provider::LanguageModel;

#[derive(Deserialize)]
struct Reply {
    design: String,
    #[serde(default)]
    setting: Option<String>,
    #[serde(default)]
    rationale: String,
}

pub fn design_prompt(record: &StudyRecord) -> String {
    let leaves: Vec<&str> = DesignNode::LEAVES.iter().map(|l| l.as_str()).collect();
    let settings: Vec<&str> = Setting::ALL.iter().map(|s| s.as_str()).collect();
    format!(
        "Classify the study design of the record below.\n\
         Answer with JSON only: {{\"design\": one of [{}, unclassified], \"setting\": one of [{}], \"rationale\": short text}}.\n\n\
         Title: {}\nAbstract: {}\n",
        leaves.join(", "),
        settings.join(", "),
        record.title,
        record.abstract_text.as_deref().unwrap_or("(none)")
    )
}

/// The reply may wrap its JSON object in prose or a code fence.
fn extract_json(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

pub fn classify_with_llm(record: &StudyRecord, model: &dyn LanguageModel) -> Result<DesignLabel, DesignError> {
    let text = model
        .complete(&design_prompt(record))
        .map_err(|e| DesignError::ProviderUnavailable(e.to_string()))?;
    let json = extract_json(&text).ok_or_else(|| DesignError::BadReply("no JSON object".into()))?;
    let reply: Reply = serde_json::from_str(json).map_err(|e| DesignError::BadReply(e.to_string()))?;
    let leaf = DesignNode::parse(&reply.design)
        .filter(|n| n.is_leaf())
        .ok_or_else(|| DesignError::BadReply(format!("unknown design {:?}", reply.design)))?;
    let setting = reply
        .setting
        .as_deref()
        .map(|s| Setting::parse(s).ok_or_else(|| DesignError::BadReply(format!("unknown setting {s:?}"))))
        .transpose()?
        .unwrap_or(Setting::OtherUnknown);
    Ok(DesignLabel::for_leaf(leaf, setting, format!("{}: {}", model.model_id(), reply.rationale)))
}
