/// Pulls model text out of an LLM response: the first fence tagged
/// `minizinc`/`mzn`, else the first fence of any kind, else the whole text.
/// An unterminated fence runs to the end. `None` when nothing is left.
pub fn extract_code(response: &str) -> Option<String> {
    let fences = fences(response);
    let tagged = fences.iter().find(|(tag, _)| {
        let tag = tag.to_ascii_lowercase();
        tag == "minizinc" || tag == "mzn"
    });
    let body = match tagged.or(fences.first()) {
        Some((_, body)) => body.trim(),
        None => response.trim(),
    };
    (!body.is_empty()).then(|| body.to_string())
}

/// `(info-string word, interior)` for each ``` fence.
fn fences(text: &str) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let (info, body) = after.split_once('\n').unwrap_or((after, ""));
        let tag = info.split_whitespace().next().unwrap_or("");
        match body.find("```") {
            Some(close) => {
                out.push((tag, &body[..close]));
                rest = &body[close + 3..];
            }
            None => {
                out.push((tag, body));
                break;
            }
        }
    }
    out
}
