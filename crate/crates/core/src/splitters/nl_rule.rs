use crate::error::SplitError;
use crate::model::{FeaturePartition, InputDocument};

pub const NL_RULE_NAME: &str = "nl_rule";

/// Cuts after `.`, `?` or `!` when followed by whitespace (or the end), and
/// after newline runs. The delimiter and the whitespace that follows it stay
/// with the preceding feature.
pub fn split_nl_rule(doc: &InputDocument) -> Result<FeaturePartition, SplitError> {
    split_text_with_name(&doc.id, &doc.text, NL_RULE_NAME)
}

pub(crate) fn split_text_with_name(
    source_id: &str,
    text: &str,
    name: &str,
) -> Result<FeaturePartition, SplitError> {
    if text.is_empty() {
        return Err(SplitError::Empty);
    }
    let cuts = cut_points(text);
    FeaturePartition::from_cuts(source_id, text, &cuts, name)
        .map_err(|e| SplitError::Parse(e.to_string()))
}

fn cut_points(text: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut cuts = vec![0];
    let mut i = 0;
    while i < len {
        let b = bytes[i];
        let boundary = match b {
            b'.' | b'?' | b'!' => i + 1 == len || bytes[i + 1].is_ascii_whitespace(),
            b'\n' => true,
            _ => false,
        };
        if boundary {
            let mut j = i + 1;
            while j < len && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if j < len {
                cuts.push(j);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    cuts.push(len);
    cuts
}
