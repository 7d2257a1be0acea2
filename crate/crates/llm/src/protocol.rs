//! Marker lines and headings shared by the prompt builders and the mock.
//! Changing any of these changes every cache key, so they are versioned.

pub const PROMPT_VERSION: &str = "v1";

pub const STAGE1_MARKER: &str = "[[LARDO STAGE-1 MD-TEMPLATE v1]]";
pub const STAGE2_MARKER: &str = "[[LARDO STAGE-2 MD-TEXT v1]]";

pub const PROPERTIES_HEADING: &str = "Properties to describe:";
pub const CALIBRATED_HEADING: &str = "Calibrated knowledge:";
pub const SMILES_HEADING: &str = "Molecule (SMILES):";

/// Lines of the block that follows `heading`, up to the next blank line.
pub fn section<'a>(text: &'a str, heading: &str) -> Vec<&'a str> {
    let mut lines = text.lines();
    for line in lines.by_ref() {
        if line.trim() == heading {
            break;
        }
    }
    lines.take_while(|l| !l.trim().is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_stop_at_blank_lines() {
        let text = "intro\nCalibrated knowledge:\nA: 1\nB: 2\n\nrest\n";
        assert_eq!(section(text, CALIBRATED_HEADING), vec!["A: 1", "B: 2"]);
        assert!(section(text, PROPERTIES_HEADING).is_empty());
    }
}
