//! Description comment scripts and a reader for them.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DocView;
use crate::model::{ObjectId, TableRef};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqlDialect {
    /// `COMMENT ON TABLE ... IS '...'`.
    #[default]
    AnsiCommentOn,
    /// `sp_addextendedproperty` / `sp_updateextendedproperty` guarded by an
    /// existence check, so the script can be re-run.
    ExtendedProperties,
}

impl SqlDialect {
    pub fn file_name(self) -> &'static str {
        match self {
            SqlDialect::AnsiCommentOn => "comments.sql",
            SqlDialect::ExtendedProperties => "extended_properties.sql",
        }
    }
}

fn literal(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn ansi_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn bracket(s: &str) -> String {
    format!("[{}]", s.replace(']', "]]"))
}

/// One statement per object with a non-empty description, tables first,
/// each followed by its columns in ordinal order.
pub fn emit_sql(view: &DocView<'_>, dialect: SqlDialect) -> String {
    let mut out = String::from("-- Generated schema descriptions\n");
    for t in view.sorted_tables() {
        let tr = t.table_ref();
        let text = view.store.text(&ObjectId::Table(tr.clone()));
        if !text.is_empty() {
            push_statement(&mut out, dialect, &tr, None, text);
        }
        for c in &t.columns {
            let text = view.store.text(&ObjectId::Column(tr.column(c.name.clone())));
            if !text.is_empty() {
                push_statement(&mut out, dialect, &tr, Some(&c.name), text);
            }
        }
    }
    out
}

fn push_statement(out: &mut String, dialect: SqlDialect, t: &TableRef, column: Option<&str>, text: &str) {
    match dialect {
        SqlDialect::AnsiCommentOn => {
            let target = match column {
                None => format!("TABLE {}.{}", ansi_ident(&t.schema), ansi_ident(&t.table)),
                Some(c) => format!(
                    "COLUMN {}.{}.{}",
                    ansi_ident(&t.schema),
                    ansi_ident(&t.table),
                    ansi_ident(c)
                ),
            };
            let _ = writeln!(out, "COMMENT ON {target} IS {};", literal(text));
        }
        SqlDialect::ExtendedProperties => {
            let object = literal(&format!("{}.{}", bracket(&t.schema), bracket(&t.table)));
            let minor = match column {
                None => "0".to_string(),
                Some(c) => format!("COLUMNPROPERTY(OBJECT_ID(N{object}), N{}, 'ColumnId')", literal(c)),
            };
            let mut args = format!(
                "@name = N'MS_Description', @value = N{}, @level0type = N'SCHEMA', @level0name = N{}, \
                 @level1type = N'TABLE', @level1name = N{}",
                literal(text),
                literal(&t.schema),
                literal(&t.table)
            );
            if let Some(c) = column {
                let _ = write!(args, ", @level2type = N'COLUMN', @level2name = N{}", literal(c));
            }
            let _ = writeln!(
                out,
                "IF EXISTS (SELECT 1 FROM sys.extended_properties WHERE major_id = OBJECT_ID(N{object}) \
                 AND minor_id = {minor} AND name = N'MS_Description')\n    \
                 EXEC sys.sp_updateextendedproperty {args};\nELSE\n    \
                 EXEC sys.sp_addextendedproperty {args};\nGO"
            );
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("offset {offset}: {message}")]
pub struct SqlParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    /// Quoted identifier, either `"..."` or `[...]`.
    Ident(String),
    Str(String),
    Punct(char),
}

fn err(offset: usize, message: impl Into<String>) -> SqlParseError {
    SqlParseError {
        offset,
        message: message.into(),
    }
}

/// Reads a quoted run closed by `close`, where a doubled `close` stands
/// for one literal character. `i` is just past the opening quote.
fn quoted(chars: &[(usize, char)], mut i: usize, close: char, start: usize) -> Result<(String, usize), SqlParseError> {
    let mut s = String::new();
    loop {
        match chars.get(i) {
            None => return Err(err(start, "unterminated quoted text")),
            Some(&(_, c)) if c == close => {
                if chars.get(i + 1).is_some_and(|&(_, d)| d == close) {
                    s.push(close);
                    i += 2;
                } else {
                    return Ok((s, i + 1));
                }
            }
            Some(&(_, c)) => {
                s.push(c);
                i += 1;
            }
        }
    }
}

fn tokenize(script: &str) -> Result<Vec<(usize, Tok)>, SqlParseError> {
    let chars: Vec<(usize, char)> = script.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(&(off, c)) = chars.get(i) {
        let next = chars.get(i + 1).map(|&(_, d)| d);
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && next == Some('-') {
            while chars.get(i).is_some_and(|&(_, d)| d != '\n') {
                i += 1;
            }
        } else if (c == 'N' || c == 'n') && next == Some('\'') {
            let (s, j) = quoted(&chars, i + 2, '\'', off)?;
            out.push((off, Tok::Str(s)));
            i = j;
        } else if c == '\'' {
            let (s, j) = quoted(&chars, i + 1, '\'', off)?;
            out.push((off, Tok::Str(s)));
            i = j;
        } else if c == '"' {
            let (s, j) = quoted(&chars, i + 1, '"', off)?;
            out.push((off, Tok::Ident(s)));
            i = j;
        } else if c == '[' {
            let (s, j) = quoted(&chars, i + 1, ']', off)?;
            out.push((off, Tok::Ident(s)));
            i = j;
        } else if c.is_alphanumeric() || c == '_' || c == '@' {
            let mut w = String::new();
            while let Some(&(_, d)) = chars.get(i).filter(|(_, d)| d.is_alphanumeric() || *d == '_' || *d == '@') {
                w.push(d);
                i += 1;
            }
            out.push((off, Tok::Word(w)));
        } else {
            out.push((off, Tok::Punct(c)));
            i += 1;
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Cursor {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SqlParseError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw) => Ok(()),
            other => Err(err(at, format!("expected {kw}, found {other:?}"))),
        }
    }

    fn punct(&mut self, p: char) -> Result<(), SqlParseError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Punct(c)) if c == p => Ok(()),
            other => Err(err(at, format!("expected `{p}`, found {other:?}"))),
        }
    }

    fn ident(&mut self) -> Result<String, SqlParseError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Ident(s)) | Some(Tok::Word(s)) => Ok(s),
            other => Err(err(at, format!("expected identifier, found {other:?}"))),
        }
    }

    fn string(&mut self) -> Result<String, SqlParseError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Str(s)) => Ok(s),
            other => Err(err(at, format!("expected string literal, found {other:?}"))),
        }
    }

    /// A dotted name of one or more identifiers.
    fn path(&mut self) -> Result<Vec<String>, SqlParseError> {
        let mut parts = vec![self.ident()?];
        while self.peek() == Some(&Tok::Punct('.')) {
            self.pos += 1;
            parts.push(self.ident()?);
        }
        Ok(parts)
    }
}

fn is_word(t: Option<&Tok>, w: &str) -> bool {
    matches!(t, Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
}

/// Recovers the descriptions written by [`emit_sql`] in either dialect.
/// For extended properties only the `sp_addextendedproperty` branch is read.
pub fn parse_sql(script: &str) -> Result<BTreeMap<ObjectId, String>, SqlParseError> {
    let mut c = Cursor {
        toks: tokenize(script)?,
        pos: 0,
        end: script.len(),
    };
    let mut out = BTreeMap::new();
    while let Some(tok) = c.peek().cloned() {
        let at = c.offset();
        if is_word(Some(&tok), "COMMENT") {
            c.pos += 1;
            c.keyword("ON")?;
            let kind = c.ident()?.to_ascii_uppercase();
            let path = c.path()?;
            c.keyword("IS")?;
            let text = c.string()?;
            c.punct(';')?;
            let id = match (kind.as_str(), path.as_slice()) {
                ("TABLE", [s, t]) => ObjectId::Table(TableRef::new(s, t)),
                ("COLUMN", [s, t, col]) => ObjectId::Column(TableRef::new(s, t).column(col)),
                _ => return Err(err(at, format!("unsupported comment target {kind} {}", path.join(".")))),
            };
            out.insert(id, text);
        } else if is_word(Some(&tok), "EXEC") {
            c.pos += 1;
            let proc = c.path()?;
            let add = proc.last().is_some_and(|p| p.eq_ignore_ascii_case("sp_addextendedproperty"));
            let mut args: BTreeMap<String, String> = BTreeMap::new();
            loop {
                let at = c.offset();
                let name = match c.next() {
                    Some(Tok::Word(w)) if w.starts_with('@') => w.to_ascii_lowercase(),
                    other => return Err(err(at, format!("expected @parameter, found {other:?}"))),
                };
                c.punct('=')?;
                args.insert(name, c.string()?);
                match c.next() {
                    Some(Tok::Punct(',')) => continue,
                    Some(Tok::Punct(';')) => break,
                    other => return Err(err(c.offset(), format!("expected `,` or `;`, found {other:?}"))),
                }
            }
            if add && args.get("@name").map(String::as_str) == Some("MS_Description") {
                let get = |k: &str| {
                    args.get(k)
                        .cloned()
                        .ok_or_else(|| err(at, format!("missing {k}")))
                };
                let table = TableRef::new(get("@level0name")?, get("@level1name")?);
                let id = match args.get("@level2name") {
                    Some(col) => ObjectId::Column(table.column(col.clone())),
                    None => ObjectId::Table(table),
                };
                out.insert(id, get("@value")?);
            }
        } else {
            c.pos += 1;
        }
    }
    Ok(out)
}
