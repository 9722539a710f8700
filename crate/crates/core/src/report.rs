//! JSON result files and self-contained HTML heat-map reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ReportError;
use crate::model::{AttributionResult, Feature, FeaturePartition, Mode, Task};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub index: usize,
    pub text: String,
    pub byte_start: usize,
    pub byte_end: usize,
    pub raw: f64,
    pub display: f64,
}

/// On-disk form of an [`AttributionResult`]. Field order is the key order
/// of the written JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub version: u32,
    pub source_id: String,
    pub task: Task,
    pub model_id: String,
    pub splitter: String,
    pub comparator: String,
    pub mode: Mode,
    pub sampling_ratio: f64,
    pub seed: u64,
    pub coalition_count: usize,
    pub features: Vec<FeatureEntry>,
    pub output_text: String,
}

impl From<&AttributionResult> for ResultFile {
    fn from(r: &AttributionResult) -> Self {
        Self {
            version: SCHEMA_VERSION,
            source_id: r.partition.source_id.clone(),
            task: r.task,
            model_id: r.model_id.clone(),
            splitter: r.partition.splitter_name.clone(),
            comparator: r.comparator.clone(),
            mode: r.mode,
            sampling_ratio: r.sampling_ratio,
            seed: r.seed,
            coalition_count: r.coalition_count,
            features: r
                .partition
                .features
                .iter()
                .map(|f| FeatureEntry {
                    index: f.index,
                    text: f.text.clone(),
                    byte_start: f.byte_start,
                    byte_end: f.byte_end,
                    raw: r.raw[f.index],
                    display: r.display[f.index],
                })
                .collect(),
            output_text: r.output_text.clone(),
        }
    }
}

impl ResultFile {
    pub fn into_result(self) -> Result<AttributionResult, ReportError> {
        if self.version != SCHEMA_VERSION {
            return Err(ReportError::Invalid(format!("unsupported schema version {}", self.version)));
        }
        let (raw, display) = self.features.iter().map(|f| (f.raw, f.display)).unzip();
        let result = AttributionResult {
            partition: FeaturePartition {
                source_id: self.source_id,
                features: self
                    .features
                    .into_iter()
                    .map(|f| Feature {
                        index: f.index,
                        text: f.text,
                        byte_start: f.byte_start,
                        byte_end: f.byte_end,
                    })
                    .collect(),
                splitter_name: self.splitter,
            },
            task: self.task,
            model_id: self.model_id,
            comparator: self.comparator,
            raw,
            display,
            mode: self.mode,
            sampling_ratio: self.sampling_ratio,
            seed: self.seed,
            coalition_count: self.coalition_count,
            output_text: self.output_text,
        };
        result
            .check_invariants()
            .map_err(|e| ReportError::Invalid(e.to_string()))?;
        Ok(result)
    }
}

pub fn to_json(result: &AttributionResult) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(&ResultFile::from(result))? + "\n")
}

pub fn from_json(json: &str) -> Result<AttributionResult, ReportError> {
    serde_json::from_str::<ResultFile>(json)?.into_result()
}

pub fn emit_json(result: &AttributionResult, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, to_json(result)?)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<AttributionResult, ReportError> {
    from_json(&std::fs::read_to_string(path)?)
}

/// Result plus the per-feature highlight intensities used for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub attribution: AttributionResult,
    pub model_output: String,
    /// `display_i / max(display)`, or 0 everywhere when the maximum is 0.
    pub rendering: Vec<f64>,
}

pub fn intensities(display: &[f64]) -> Vec<f64> {
    let max = display.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return vec![0.0; display.len()];
    }
    display.iter().map(|d| (d / max).clamp(0.0, 1.0)).collect()
}

impl ReportDocument {
    pub fn new(attribution: AttributionResult, model_output: impl Into<String>) -> Self {
        let rendering = intensities(&attribution.display);
        Self {
            attribution,
            model_output: model_output.into(),
            rendering,
        }
    }
}

pub fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:2em;color:#1f2328}
h1{font-size:1.3em}h2{font-size:1.05em;margin-top:1.5em}
.meta{color:#57606a;font-size:.9em}
.input,.output{font-family:ui-monospace,monospace;white-space:pre-wrap;border:1px solid #d0d7de;border-radius:6px;padding:1em;line-height:1.9}
.feature{border-radius:3px;padding:1px 0}
.pct{font-family:system-ui,sans-serif;font-size:.7em;color:#57606a;margin:0 .3em 0 .1em;vertical-align:super}
table{border-collapse:collapse;font-size:.9em}td,th{border:1px solid #d0d7de;padding:.25em .6em;text-align:right}td.text{text-align:left;font-family:ui-monospace,monospace;white-space:pre-wrap}";

/// Renders a single self-contained HTML page.
pub fn render_html(doc: &ReportDocument) -> String {
    let r = &doc.attribution;
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(html, "<title>Attribution: {}</title>", escape_html(&r.partition.source_id));
    let _ = writeln!(html, "<style>\n{STYLE}\n</style>\n</head>\n<body>");
    let _ = writeln!(html, "<h1>Attribution for {}</h1>", escape_html(&r.partition.source_id));
    let _ = writeln!(
        html,
        "<p class=\"meta\">task {} &middot; model {} &middot; splitter {} &middot; comparator {} &middot; mode {} &middot; {} coalitions</p>",
        r.task,
        escape_html(&r.model_id),
        escape_html(&r.partition.splitter_name),
        escape_html(&r.comparator),
        r.mode,
        r.coalition_count
    );
    html.push_str("<h2>Input</h2>\n<div class=\"input\">");
    for (f, alpha) in r.partition.features.iter().zip(&doc.rendering) {
        let pct = r.display[f.index] * 100.0;
        let _ = write!(
            html,
            "<span class=\"feature\" data-index=\"{}\" style=\"background-color:rgba(255,140,0,{})\" title=\"feature {}: {:.1}%\">{}</span><span class=\"pct\">{:.1}%</span>",
            f.index,
            alpha,
            f.index,
            pct,
            escape_html(&f.text),
            pct
        );
    }
    html.push_str("</div>\n<h2>Model output</h2>\n<div class=\"output\">");
    html.push_str(&escape_html(&doc.model_output));
    html.push_str("</div>\n<h2>Scores</h2>\n<table>\n<tr><th>#</th><th>feature</th><th>display</th><th>raw</th></tr>\n");
    for f in &r.partition.features {
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td class=\"text\">{}</td><td>{:.1}%</td><td>{:.4}</td></tr>",
            f.index,
            escape_html(f.text.trim()),
            r.display[f.index] * 100.0,
            r.raw[f.index]
        );
    }
    html.push_str("</table>\n</body>\n</html>\n");
    html
}

pub fn emit_html(result: &AttributionResult, model_output: &str, path: &Path) -> Result<(), ReportError> {
    let doc = ReportDocument::new(result.clone(), model_output);
    std::fs::write(path, render_html(&doc))?;
    Ok(())
}
