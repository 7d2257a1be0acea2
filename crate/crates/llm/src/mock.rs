//! Offline stand-in for the LLM. Output depends on the request text only.

use sha2::{Digest, Sha256};

use crate::protocol::{section, CALIBRATED_HEADING, PROPERTIES_HEADING, SMILES_HEADING, STAGE1_MARKER, STAGE2_MARKER};
use crate::{CompletionResult, CompletionSource, PromptRequest};

/// Fixed Stage-1 answer: three properties in the numbered-list format.
pub const MOCK_TEMPLATE: &str = "\
1. Lipophilicity: Compounds with higher lipophilicity are more likely to cross lipid membranes.
2. Molecular weight: Smaller molecules diffuse through biological barriers more readily.
3. Hydrogen bond donors and acceptors: Fewer hydrogen bonds favour passive permeation.
";

pub fn mock_complete(request: &PromptRequest) -> CompletionResult {
    let text = if request.user_text.contains(STAGE1_MARKER) {
        MOCK_TEMPLATE.to_string()
    } else if request.user_text.contains(STAGE2_MARKER) {
        stage2(&request.user_text)
    } else {
        let digest = hex::encode(Sha256::digest(request.user_text.as_bytes()));
        format!("Mock response {}.", &digest[..16])
    };
    CompletionResult { text, source: CompletionSource::Mock, latency_ms: None }
}

fn stage2(prompt: &str) -> String {
    let smiles = section(prompt, SMILES_HEADING).first().map_or("", |s| s.trim()).to_string();
    let mut out = String::new();
    for line in section(prompt, CALIBRATED_HEADING) {
        out.push_str(line.trim());
        out.push('\n');
    }
    for property in section(prompt, PROPERTIES_HEADING) {
        let name = property.trim().trim_start_matches(|c: char| c == '-' || c.is_whitespace());
        out.push_str(&format!("{name}: the molecule {smiles} is characterised with respect to {}.\n", name.to_lowercase()));
    }
    if out.is_empty() {
        out = format!("The molecule {smiles} has no listed properties.\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(user: &str) -> PromptRequest {
        PromptRequest::new("sys", user, "mock", 256).unwrap()
    }

    #[test]
    fn deterministic_and_marker_driven() {
        let a = mock_complete(&req("hello"));
        assert_eq!(a, mock_complete(&req("hello")));
        assert_ne!(a.text, mock_complete(&req("hello!")).text);
        assert_eq!(mock_complete(&req(&format!("x\n{STAGE1_MARKER}\ny"))).text, MOCK_TEMPLATE);
    }

    #[test]
    fn stage2_restates_calibrated_lines() {
        let prompt = format!(
            "{STAGE2_MARKER}\n\n{PROPERTIES_HEADING}\n- Lipophilicity\n- Molecular weight\n\n{CALIBRATED_HEADING}\nLogP of X: 4.635\n\n{SMILES_HEADING}\nX\n"
        );
        let text = mock_complete(&req(&prompt)).text;
        assert!(text.lines().any(|l| l == "LogP of X: 4.635"));
        assert!(text.contains("Lipophilicity: the molecule X"));
        assert!(text.contains("Molecular weight: the molecule X"));
    }
}
