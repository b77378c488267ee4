//! Header-plus-records JSON-lines files shared by the encoded corpus, signal
//! and weight formats.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

pub(crate) fn to_string<H: Serialize, R: Serialize>(header: &H, records: &[R]) -> Result<String> {
    let mut out = serde_json::to_string(header)?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub(crate) fn write<H: Serialize, R: Serialize>(path: &Path, header: &H, records: &[R]) -> Result<()> {
    let text = to_string(header, records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse<H: DeserializeOwned, R: DeserializeOwned>(text: &str, context: &str) -> Result<(H, Vec<R>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(context, 1, "missing header record"))?;
    let header = serde_json::from_str(first).map_err(|e| Error::parse(context, 1, e.to_string()))?;
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(context, i + 1, e.to_string())))
        .collect::<Result<Vec<R>>>()?;
    Ok((header, records))
}

pub(crate) fn read<H: DeserializeOwned, R: DeserializeOwned>(path: &Path) -> Result<(H, Vec<R>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}
