use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

use crate::args::OutputFormat;

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            let joined: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), joined.join(" ")));
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes a single record; CSV output is a header line plus one row of
/// flattened `a.b` keys.
pub fn emit_record<T: Serialize>(format: OutputFormat, record: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut stdout, record)?;
            writeln!(stdout)?;
        }
        OutputFormat::Csv => {
            let mut pairs = Vec::new();
            flatten("", &serde_json::to_value(record)?, &mut pairs);
            let mut w = csv::Writer::from_writer(stdout);
            w.write_record(pairs.iter().map(|(k, _)| k))?;
            w.write_record(pairs.iter().map(|(_, v)| v))?;
            w.flush()?;
        }
        OutputFormat::Human => {
            let mut pairs = Vec::new();
            flatten("", &serde_json::to_value(record)?, &mut pairs);
            let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in pairs {
                writeln!(stdout, "{k:<width$}  {v}")?;
            }
        }
    }
    Ok(())
}

/// Writes homogeneous rows; CSV uses the struct field names as the header.
pub fn emit_rows<T: Serialize>(format: OutputFormat, rows: &[T]) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut stdout, rows)?;
            writeln!(stdout)?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(stdout);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        OutputFormat::Human => {
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    writeln!(stdout)?;
                }
                let mut pairs = Vec::new();
                flatten("", &serde_json::to_value(row)?, &mut pairs);
                let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in pairs {
                    writeln!(stdout, "{k:<width$}  {v}")?;
                }
            }
        }
    }
    Ok(())
}

pub fn notice(msg: impl AsRef<str>) {
    eprintln!("notice: {}", msg.as_ref());
}

pub fn warning(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattening_nested_values() {
        let v = serde_json::json!({"a": 1.5, "b": {"c": null, "d": true}, "e": [1, 2]});
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        assert_eq!(
            out,
            vec![
                ("a".to_string(), "1.5".to_string()),
                ("b.c".to_string(), String::new()),
                ("b.d".to_string(), "true".to_string()),
                ("e".to_string(), "1 2".to_string()),
            ]
        );
    }
}
