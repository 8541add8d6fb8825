//! `key = value` text format shared by training and run configs. Blank
//! lines and everything after `#` are ignored.

/// `(line number, key, value)`.
pub type KvLine = (usize, String, String);

/// Parsed lines, or `(line number, reason)` for the first bad one.
pub fn kv_pairs(text: &str) -> Result<Vec<KvLine>, (usize, String)> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| (i + 1, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err((i + 1, "empty key".into()));
        }
        pairs.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
