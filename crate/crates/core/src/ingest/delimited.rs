//! Comma-delimited row files with a NULL-preserving quoting rule.
//!
//! An empty unquoted field is SQL `NULL`; a quoted empty field (`""`) is the
//! empty string. Everything else follows RFC 4180: fields containing the
//! delimiter, a quote, CR or LF must be quoted and embedded quotes doubled.
//! Records end with LF or CRLF; a trailing newline at end of input is optional.
//!
//! The `csv` crate discards whether a field was quoted, which makes the
//! NULL/empty distinction unrecoverable, hence this small dedicated parser.

use std::fmt;

pub type Cell = Option<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelimitedError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for DelimitedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for DelimitedError {}

#[derive(Clone, Copy, PartialEq)]
enum State {
    FieldStart,
    Unquoted,
    Quoted,
    QuoteInQuoted,
}

/// Parses a whole document into records of cells.
pub fn parse_delimited(input: &str) -> Result<Vec<Vec<Cell>>, DelimitedError> {
    let input = input.strip_prefix('\u{feff}').unwrap_or(input);
    let mut records = Vec::new();
    let mut record: Vec<Cell> = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut state = State::FieldStart;
    let mut line = 1usize;
    let mut chars = input.chars().peekable();

    let finish_field = |record: &mut Vec<Cell>, field: &mut String, quoted: &mut bool| {
        if field.is_empty() && !*quoted {
            record.push(None);
        } else {
            record.push(Some(std::mem::take(field)));
        }
        *quoted = false;
    };

    while let Some(c) = chars.next() {
        match state {
            State::FieldStart | State::Unquoted => match c {
                ',' => {
                    finish_field(&mut record, &mut field, &mut quoted);
                    state = State::FieldStart;
                }
                '\r' if chars.peek() == Some(&'\n') => {}
                '\n' => {
                    finish_field(&mut record, &mut field, &mut quoted);
                    records.push(std::mem::take(&mut record));
                    state = State::FieldStart;
                    line += 1;
                }
                '"' if state == State::FieldStart => {
                    quoted = true;
                    state = State::Quoted;
                }
                '"' => {
                    return Err(DelimitedError {
                        line,
                        message: "quote inside unquoted field".into(),
                    })
                }
                '\r' => {
                    return Err(DelimitedError {
                        line,
                        message: "bare carriage return outside quotes".into(),
                    })
                }
                _ => {
                    field.push(c);
                    state = State::Unquoted;
                }
            },
            State::Quoted => match c {
                '"' => state = State::QuoteInQuoted,
                '\n' => {
                    field.push(c);
                    line += 1;
                }
                _ => field.push(c),
            },
            State::QuoteInQuoted => match c {
                '"' => {
                    field.push('"');
                    state = State::Quoted;
                }
                ',' => {
                    finish_field(&mut record, &mut field, &mut quoted);
                    state = State::FieldStart;
                }
                '\r' if chars.peek() == Some(&'\n') => {}
                '\n' => {
                    finish_field(&mut record, &mut field, &mut quoted);
                    records.push(std::mem::take(&mut record));
                    state = State::FieldStart;
                    line += 1;
                }
                other => {
                    return Err(DelimitedError {
                        line,
                        message: format!("unexpected `{}` after closing quote", other.escape_debug()),
                    })
                }
            },
        }
    }

    match state {
        State::Quoted => Err(DelimitedError {
            line,
            message: "unterminated quoted field".into(),
        }),
        State::FieldStart if record.is_empty() => Ok(records),
        _ => {
            finish_field(&mut record, &mut field, &mut quoted);
            records.push(record);
            Ok(records)
        }
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty() || s.contains([',', '"', '\r', '\n'])
}

/// Renders one field so that [`parse_delimited`] recovers it exactly.
pub fn encode_cell(cell: &Cell, out: &mut String) {
    match cell {
        None => {}
        Some(s) if needs_quotes(s) => {
            out.push('"');
            for c in s.chars() {
                if c == '"' {
                    out.push('"');
                }
                out.push(c);
            }
            out.push('"');
        }
        Some(s) => out.push_str(s),
    }
}

/// Renders a header plus rows, LF-terminated.
pub fn write_delimited<'a>(
    header: impl IntoIterator<Item = &'a str>,
    rows: impl IntoIterator<Item = Vec<Cell>>,
) -> String {
    let mut out = String::new();
    let header: Vec<Cell> = header.into_iter().map(|h| Some(h.to_string())).collect();
    write_record(&header, &mut out);
    for row in rows {
        write_record(&row, &mut out);
    }
    out
}

fn write_record(row: &[Cell], out: &mut String) {
    for (i, cell) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        encode_cell(cell, out);
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &str) -> Cell {
        Some(v.to_string())
    }

    #[test]
    fn null_versus_empty_string() {
        let rows = parse_delimited("a,b,c\n1,,\"\"\n").unwrap();
        assert_eq!(rows[1], vec![s("1"), None, s("")]);
    }

    #[test]
    fn quoted_fields_with_specials() {
        let rows = parse_delimited("x,y\r\n\"he said \"\"hi\"\"\",\"a,b\nc\"\r\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], vec![s("he said \"hi\""), s("a,b\nc")]);
    }

    #[test]
    fn missing_trailing_newline_and_trailing_null() {
        let rows = parse_delimited("a,b\n1,").unwrap();
        assert_eq!(rows[1], vec![s("1"), None]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(parse_delimited("a\"b\n").is_err());
        assert!(parse_delimited("\"abc").is_err());
        assert!(parse_delimited("\"a\"b\n").is_err());
        assert!(parse_delimited("a\rb").is_err());
    }

    #[test]
    fn empty_document() {
        assert!(parse_delimited("").unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            rows in prop::collection::vec(
                prop::collection::vec(prop::option::of("[a-z,\"\r\n ]{0,6}"), 2..4usize), 0..6)
        ) {
            let width = rows.first().map_or(2, Vec::len);
            let rows: Vec<Vec<Cell>> = rows.into_iter().map(|mut r| { r.resize(width, None); r }).collect();
            let header: Vec<String> = (0..width).map(|i| format!("c{i}")).collect();
            let text = write_delimited(header.iter().map(String::as_str), rows.clone());
            let parsed = parse_delimited(&text).unwrap();
            prop_assert_eq!(parsed.len(), rows.len() + 1);
            prop_assert_eq!(&parsed[1..], &rows[..]);
        }
    }
}
