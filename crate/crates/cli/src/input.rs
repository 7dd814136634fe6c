//! Observation files: JSONL with one `{"t": x}` object per line, or a
//! header-free single-column CSV. `-` reads standard input.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Deserialize)]
struct Line {
    t: f64,
}

/// Streams observations, calling `f(line_number, t)` for each one.
pub fn for_each_observation(
    path: &Path,
    mut f: impl FnMut(usize, f64) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let reader: Box<dyn BufRead> = if path.as_os_str() == "-" {
        Box::new(BufReader::new(io::stdin()))
    } else {
        let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Box::new(BufReader::new(file))
    };
    let mut jsonl: Option<bool> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CliError::Data(format!("{}: line {lineno}: {e}", path.display())))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let is_json = *jsonl.get_or_insert(text.starts_with('{'));
        let bad = |why: String| CliError::Data(format!("{}: line {lineno}: {why}", path.display()));
        let t = if is_json {
            serde_json::from_str::<Line>(text).map_err(|e| bad(e.to_string()))?.t
        } else {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(text.as_bytes());
            let record = rdr
                .records()
                .next()
                .transpose()
                .map_err(|e| bad(e.to_string()))?
                .ok_or_else(|| bad("empty record".into()))?;
            if record.len() != 1 {
                return Err(bad(format!("expected one column, found {}", record.len())));
            }
            let field = record[0].trim();
            if lineno == 1 && field == "t" {
                continue;
            }
            field.parse::<f64>().map_err(|e| bad(format!("`{field}`: {e}")))?
        };
        f(lineno, t)?;
    }
    Ok(())
}
