//! Line-oriented tokenizer shared by the graph, operation, matrix and
//! checkpoint text formats. Blank lines and `#` comments are skipped;
//! every token keeps the 1-based line it came from.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<&'a str>,
}

impl<'a> Line<'a> {
    pub fn keyword(&self) -> &'a str {
        self.tokens[0]
    }

    pub fn expect_keyword(&self, kw: &str) -> Result<()> {
        if self.keyword() == kw {
            Ok(())
        } else {
            Err(Error::parse(
                self.number,
                format!("expected `{kw}`, found `{}`", self.keyword()),
            ))
        }
    }

    pub fn expect_len(&self, len: usize) -> Result<()> {
        if self.tokens.len() == len {
            Ok(())
        } else {
            Err(Error::parse(
                self.number,
                format!("expected {len} fields, found {}", self.tokens.len()),
            ))
        }
    }

    pub fn field<T: FromStr>(&self, idx: usize) -> Result<T> {
        let tok = self
            .tokens
            .get(idx)
            .ok_or_else(|| Error::parse(self.number, format!("missing field {}", idx + 1)))?;
        tok.parse()
            .map_err(|_| Error::parse(self.number, format!("cannot parse `{tok}`")))
    }
}

pub struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    pub fn new(src: &'a str) -> Self {
        Lines {
            inner: src.lines().enumerate(),
            last_line: 0,
        }
    }

    /// Line number of the most recently yielded line (0 before the first).
    pub fn position(&self) -> usize {
        self.last_line
    }

    pub fn require(&mut self, what: &str) -> Result<Line<'a>> {
        let pos = self.last_line;
        self.next().ok_or_else(|| {
            Error::parse(pos + 1, format!("unexpected end of input, expected {what}"))
        })
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = Line<'a>;

    fn next(&mut self) -> Option<Line<'a>> {
        for (idx, raw) in self.inner.by_ref() {
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if !tokens.is_empty() {
                self.last_line = idx + 1;
                return Some(Line {
                    number: idx + 1,
                    tokens,
                });
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_blank_lines() {
        let src = "# header\n\ngraph 3 directed  # trailing\n  \nedge 1 2 0.5\n";
        let lines: Vec<_> = Lines::new(src).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].number, 3);
        assert_eq!(lines[0].tokens, vec!["graph", "3", "directed"]);
        assert_eq!(lines[1].field::<f64>(3).unwrap(), 0.5);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let src = "\n\nedge 1 x 2\n";
        let line = Lines::new(src).next().unwrap();
        match line.field::<usize>(2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
