//! Sanitizer for generated markup.
//!
//! Generated UIs are static views: no scripts, no frames, no external
//! resources, no event handlers. The rewriter strips what it can and the
//! final guard rejects anything that still looks executable.

use std::cell::{Cell, RefCell};

use lol_html::html_content::ContentType;
use lol_html::{doc_comments, doctype, element, rewrite_str, text, RewriteStrSettings};

use super::OverlayError;

pub const DISCLOSURE_BANNER: &str =
    r#"<div class="genui-disclosure" role="note">This UI has been generated by AI.</div>"#;

const DROPPED_ELEMENTS: &str = "script, noscript, iframe, frame, frameset, object, embed, applet, \
     base, link, meta, template, portal, plaintext, xmp, noembed, noframes, \
     animate, set, animateMotion, animateTransform, handler, listener";

const WRAPPERS: &str = "html, head, body";

const URL_ATTRS: &[&str] = &[
    "href",
    "xlink:href",
    "src",
    "srcset",
    "action",
    "formaction",
    "poster",
    "data",
    "background",
    "cite",
    "ping",
    "manifest",
    "codebase",
    "longdesc",
    "lowsrc",
    "dynsrc",
    "icon",
    "profile",
    "usemap",
    "archive",
    "classid",
    "itemtype",
    "xmlns:xlink",
];

const MAX_PASSES: usize = 4;

/// Only in-page anchors and inline raster/vector images survive.
fn safe_url(value: &str) -> bool {
    let v = value.trim();
    v.starts_with('#') || (v.to_ascii_lowercase().starts_with("data:image/") && !v.contains('&'))
}

fn unsafe_css(css: &str) -> bool {
    let squashed: String = css
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '\\')
        .collect::<String>()
        .to_ascii_lowercase();
    ["url(", "expression(", "@import", "javascript:", "behavior:", "-moz-binding", "</"]
        .iter()
        .any(|p| squashed.contains(p))
}

fn strip_code_fence(markup: &str) -> &str {
    let t = markup.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn one_pass(input: &str) -> Result<String, OverlayError> {
    let wrapper = Cell::new(false);
    let style_buf = RefCell::new(String::new());
    let out = rewrite_str(
        input,
        RewriteStrSettings::new()
            .with_enable_esi_tags(false)
            .append_element_content_handler(element!(WRAPPERS, |_el| {
                wrapper.set(true);
                Ok(())
            }))
            .append_element_content_handler(element!(DROPPED_ELEMENTS, |el| {
                el.remove();
                Ok(())
            }))
            .append_element_content_handler(element!("*", |el| {
                let attrs: Vec<(String, String)> = el
                    .attributes()
                    .iter()
                    .map(|a| (a.name(), a.value()))
                    .collect();
                for (name, value) in attrs {
                    let drop = name.starts_with("on")
                        || name == "srcdoc"
                        || (URL_ATTRS.contains(&name.as_str()) && !safe_url(&value))
                        || (name == "style" && unsafe_css(&value));
                    if drop {
                        el.remove_attribute(&name);
                    }
                }
                Ok(())
            }))
            .append_element_content_handler(text!("style", |t| {
                style_buf.borrow_mut().push_str(t.as_str());
                let last = t.last_in_text_node();
                t.remove();
                if last {
                    let css = std::mem::take(&mut *style_buf.borrow_mut());
                    if !unsafe_css(&css) {
                        t.replace(&css, ContentType::Html);
                    }
                }
                Ok(())
            }))
            .append_document_content_handler(doctype!(|_d| {
                wrapper.set(true);
                Ok(())
            }))
            .append_document_content_handler(doc_comments!(|c| {
                c.remove();
                Ok(())
            })),
    )
    .map_err(|e| OverlayError::RejectedMarkup(format!("unparseable markup: {e}")))?;
    if wrapper.get() {
        return Err(OverlayError::RejectedMarkup("full-document wrapper".into()));
    }
    Ok(out)
}

/// True when the text inside any tag still carries an event handler or a
/// script URL, or a script tag survived.
fn looks_executable(html: &str) -> Option<&'static str> {
    let lower = html.to_ascii_lowercase();
    if lower.contains("javascript:") || lower.contains("vbscript:") {
        return Some("script URL");
    }
    let mut rest = lower.as_str();
    while let Some(open) = rest.find('<') {
        rest = &rest[open + 1..];
        let end = rest.find('>').unwrap_or(rest.len());
        let tag = &rest[..end];
        let name = tag.trim_start_matches(|c: char| c.is_whitespace() || c == '/');
        if name.starts_with("script") {
            return Some("script element");
        }
        let bytes = tag.as_bytes();
        for i in 1..bytes.len().saturating_sub(2) {
            let boundary = bytes[i - 1].is_ascii_whitespace() || bytes[i - 1] == b'/';
            if boundary && &bytes[i..i + 2] == b"on" {
                let after = &tag[i + 2..];
                let letters = after.bytes().take_while(u8::is_ascii_alphabetic).count();
                if letters > 0 && after[letters..].trim_start().starts_with('=') {
                    return Some("event handler attribute");
                }
            }
        }
    }
    None
}

/// Sanitizes generated markup, or rejects it.
pub fn sanitize_markup(markup: &str) -> Result<String, OverlayError> {
    let mut current = strip_code_fence(markup).to_string();
    let mut stable = false;
    for _ in 0..MAX_PASSES {
        let next = one_pass(&current)?;
        stable = next == current;
        current = next;
        if stable {
            break;
        }
    }
    if !stable {
        return Err(OverlayError::RejectedMarkup("sanitizer did not converge".into()));
    }
    if let Some(what) = looks_executable(&current) {
        return Err(OverlayError::RejectedMarkup(format!("{what} survived sanitizing")));
    }
    if current.trim().is_empty() {
        return Err(OverlayError::RejectedMarkup("nothing left after sanitizing".into()));
    }
    Ok(current)
}

/// Sanitized markup with the AI disclosure banner on top.
pub fn genui_html(markup: &str) -> Result<String, OverlayError> {
    let body = sanitize_markup(markup)?;
    Ok(format!("{DISCLOSURE_BANNER}{body}"))
}
