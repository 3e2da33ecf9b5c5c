//! Versioned line-oriented text formats for models and scenarios, plus the
//! CSV tables.
//!
//! Text documents are one `key value…` record per line, whitespace
//! separated. Floats are written with 17 significant digits so a reload is
//! bit-identical.

pub mod csv_out;
pub mod model;
pub mod scenario;

use crate::error::{Result, SimError};

pub(crate) fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), line: 0 }
    }

    pub(crate) fn malformed(&self, msg: impl Into<String>) -> SimError {
        SimError::Malformed { line: self.line, msg: msg.into() }
    }

    /// Next non-empty line, split into tokens.
    pub(crate) fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok(toks);
            }
        }
        Err(self.malformed("unexpected end of document"))
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    pub(crate) fn record(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next_tokens()?;
        if toks[0] != key {
            return Err(self.malformed(format!("expected `{key}`, found `{}`", toks[0])));
        }
        Ok(toks[1..].to_vec())
    }

    pub(crate) fn floats(&self, toks: &[&str], expected: Option<usize>) -> Result<Vec<f64>> {
        if let Some(n) = expected {
            if toks.len() != n {
                return Err(SimError::Core(underlay_core::Error::Dimension { expected: n, got: toks.len() }));
            }
        }
        toks.iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.malformed(format!("malformed number `{t}`"))),
            })
            .collect()
    }

    pub(crate) fn float(&mut self, key: &str) -> Result<f64> {
        let toks = self.record(key)?;
        Ok(self.floats(&toks, Some(1))?[0])
    }

    pub(crate) fn uint<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let toks = self.record(key)?;
        if toks.len() != 1 {
            return Err(self.malformed(format!("`{key}` takes one value")));
        }
        toks[0].parse().map_err(|_| self.malformed(format!("malformed integer `{}`", toks[0])))
    }

    pub(crate) fn header(&mut self, magic: &'static str, kind: &'static str, version: u32) -> Result<()> {
        let toks = self.next_tokens()?;
        if toks[0] != magic {
            return Err(self.malformed(format!("not a {kind} document")));
        }
        match toks.get(1) {
            Some(v) if *v == version.to_string() => Ok(()),
            found => Err(SimError::Version { kind, found: found.unwrap_or(&"").to_string(), expected: version }),
        }
    }

    pub(crate) fn finish(&mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                self.line = i + 1;
                return Err(self.malformed("trailing content"));
            }
        }
        Ok(())
    }
}

pub(crate) fn push_record(out: &mut String, key: &str, values: impl IntoIterator<Item = String>) {
    out.push_str(key);
    for v in values {
        out.push(' ');
        out.push_str(&v);
    }
    out.push('\n');
}
