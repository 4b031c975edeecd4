//! Plot-ready data emitters. CSV files start with `#` comment lines echoing
//! the parameters that produced them, so each artifact is reproducible from
//! its own header.

use std::io::{self, Write};

/// Writes one CSV data set: a title line, `# key = value` parameter lines,
/// the column header row, then the data rows.
pub fn write_csv<W: Write>(
    out: &mut W,
    title: &str,
    params: &[(String, String)],
    columns: &[&str],
    rows: &[Vec<String>],
) -> io::Result<()> {
    writeln!(out, "# atomreg {title}")?;
    for (key, value) in params {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Shortest round-trip decimal form of a float; empty string for NaN (used
/// for undefined spectator phases at exact resonance).
pub fn fmt_f64(value: f64) -> String {
    if value.is_nan() {
        String::new()
    } else {
        format!("{value}")
    }
}

pub fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| fmt_f64(v)).unwrap_or_default()
}

/// Writes records as JSON Lines (one object per line).
pub fn write_json_lines<W: Write, T: serde::Serialize>(
    out: &mut W,
    records: &[T],
) -> io::Result<()> {
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_carries_header_comments_and_rows() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            "spectrum v1",
            &[("b0_gauss".into(), "4".into())],
            &["offset_um", "transfer_probability"],
            &[vec!["0".into(), "1".into()], vec!["2.5".into(), "0.006".into()]],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# atomreg spectrum v1\n# b0_gauss = 4\n"));
        assert!(text.contains("offset_um,transfer_probability\n0,1\n2.5,0.006\n"));
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.0, -3.675, 1.0 / 3.0, 6.02e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "");
        assert_eq!(fmt_opt(None), "");
    }
}
