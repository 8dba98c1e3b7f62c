//! Static evidence reports: ANSI terminal text, standalone HTML, JSON lines.

use serde::Serialize;

use crate::corpus::{mask_to_spans, Document};

/// One document rendered under every class.
pub struct Rendering<'a> {
    pub doc: &'a Document,
    pub predicted: usize,
    pub class_probs: &'a [f64],
    /// One mask per class.
    pub masks: &'a [Vec<bool>],
}

const ANSI_COLORS: [u8; 6] = [32, 31, 34, 33, 35, 36];

pub fn ansi(r: &Rendering<'_>) -> String {
    let mut out = format!("== {} (predicted class {})\n", r.doc.id, r.predicted);
    for (c, mask) in r.masks.iter().enumerate() {
        let color = ANSI_COLORS[c % ANSI_COLORS.len()];
        let marker = if c == r.predicted { '*' } else { ' ' };
        out.push_str(&format!("{marker} class {c} p={:.3}: ", r.class_probs[c]));
        let words: Vec<String> = r
            .doc
            .tokens
            .iter()
            .zip(mask)
            .map(|(t, &e)| {
                if e {
                    format!("\x1b[1;{color}m{t}\x1b[0m")
                } else {
                    t.clone()
                }
            })
            .collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

const HTML_HEAD: &str = r#"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Evidence report</title>
<style>
body { font-family: sans-serif; max-width: 60em; margin: 2em auto; line-height: 1.6; }
section { border-bottom: 1px solid #ccc; padding: 0.5em 0; }
.cls { margin: 0.3em 0; }
.label { font-weight: bold; margin-right: 0.5em; }
.pred .label::after { content: " (predicted)"; font-weight: normal; }
.ev { padding: 0 0.15em; border-radius: 0.2em; }
.c0 .ev { background: #b7e4b0; }
.c1 .ev { background: #f4b6b6; }
.c2 .ev { background: #b6cdf4; }
.c3 .ev { background: #f4e3a6; }
</style>
</head>
<body>
"#;

/// A self-contained HTML page; every token is a `span` carrying its token
/// index in `data-t`.
pub fn html(renderings: &[Rendering<'_>]) -> String {
    let mut out = String::from(HTML_HEAD);
    for r in renderings {
        out.push_str(&format!(
            "<section id=\"{}\">\n<h2>{}</h2>\n",
            escape(&r.doc.id),
            escape(&r.doc.id)
        ));
        for (c, mask) in r.masks.iter().enumerate() {
            let pred = if c == r.predicted { " pred" } else { "" };
            out.push_str(&format!(
                "<p class=\"cls c{} {}\" data-class=\"{c}\"><span class=\"label\">class {c} p={:.3}</span>",
                c % 4,
                pred.trim(),
                r.class_probs[c]
            ));
            for (i, (tok, &e)) in r.doc.tokens.iter().zip(mask).enumerate() {
                let class = if e { "tok ev" } else { "tok" };
                out.push_str(&format!(
                    "<span class=\"{class}\" data-t=\"{i}\">{}</span> ",
                    escape(tok)
                ));
            }
            out.push_str("</p>\n");
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

#[derive(Serialize)]
struct JsonRendering<'a> {
    id: &'a str,
    tokens: &'a [String],
    predicted_label: usize,
    class_probs: &'a [f64],
    per_class_spans: Vec<Vec<[usize; 2]>>,
}

pub fn json(r: &Rendering<'_>) -> String {
    serde_json::to_string(&JsonRendering {
        id: &r.doc.id,
        tokens: &r.doc.tokens,
        predicted_label: r.predicted,
        class_probs: r.class_probs,
        per_class_spans: r.masks.iter().map(|m| mask_to_spans(m)).collect(),
    })
    .expect("plain data serializes")
}
