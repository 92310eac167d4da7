//! Aligned plain-text tables for terminal output.

/// Columns are left-aligned for text and right-aligned when every cell in
/// the column parses as a number.
pub fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let numeric: Vec<bool> =
        (0..cols).map(|i| !rows.is_empty() && rows.iter().all(|r| r.get(i).is_some_and(|c| c.trim_end_matches('×').parse::<f64>().is_ok()))).collect();
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = width[i].saturating_sub(c.chars().count());
                if numeric[i] {
                    format!("{}{c}", " ".repeat(pad))
                } else {
                    format!("{c}{}", " ".repeat(pad))
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.push(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        out.push(line((0..cols).map(|i| r.get(i).map(String::as_str).unwrap_or("")).collect()));
    }
    out.join("\n") + "\n"
}
