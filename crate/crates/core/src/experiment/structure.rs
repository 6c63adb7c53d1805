use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clusternet::ClusterArchitecture;
use crate::error::{Error, Result};

/// Hidden-layer layout written `H*W` (FCN) or `q;Hf*Wf;Hc*Wc` (ClusterNet).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Structure {
    Fcn {
        hidden: Vec<usize>,
    },
    ClusterNet {
        q: usize,
        function_hidden: Vec<usize>,
        context_hidden: Vec<usize>,
    },
}

impl Structure {
    pub fn fcn_sizes(hidden: &[usize], input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(hidden);
        s.push(output);
        s
    }

    pub fn clusternet(
        &self,
        input_width: usize,
        output_width: usize,
    ) -> Option<ClusterArchitecture> {
        match self {
            Structure::ClusterNet {
                q,
                function_hidden,
                context_hidden,
            } => Some(ClusterArchitecture {
                input_width,
                output_width,
                clusters: *q,
                function_hidden: function_hidden.clone(),
                context_hidden: context_hidden.clone(),
            }),
            Structure::Fcn { .. } => None,
        }
    }

    pub fn clusters(&self) -> Option<usize> {
        match self {
            Structure::ClusterNet { q, .. } => Some(*q),
            Structure::Fcn { .. } => None,
        }
    }
}

fn uniform(h: &[usize]) -> String {
    match h.first() {
        Some(&w) if h.iter().all(|&x| x == w) => format!("{}*{w}", h.len()),
        _ => h
            .iter()
            .map(|w| format!("1*{w}"))
            .collect::<Vec<_>>()
            .join("+"),
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Fcn { hidden } => f.write_str(&uniform(hidden)),
            Structure::ClusterNet {
                q,
                function_hidden,
                context_hidden,
            } => {
                write!(
                    f,
                    "{q};{};{}",
                    uniform(function_hidden),
                    uniform(context_hidden)
                )
            }
        }
    }
}

struct Parser<'a> {
    spec: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Structure {
            spec: self.spec.to_string(),
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.spec[self.pos..].chars().next()
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.fail(format!("expected {what}")));
        }
        let n: usize = self.spec[start..self.pos]
            .parse()
            .map_err(|_| self.fail(format!("{what} is too large")))?;
        if n == 0 {
            self.pos = start;
            return Err(self.fail(format!("{what} must be positive")));
        }
        Ok(n)
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(format!("expected `{c}`")))
        }
    }

    /// `H*W`
    fn layers(&mut self) -> Result<Vec<usize>> {
        let h = self.number("layer count")?;
        self.expect('*')?;
        let w = self.number("layer width")?;
        Ok(vec![w; h])
    }

    fn end(&self) -> Result<()> {
        if self.pos == self.spec.len() {
            Ok(())
        } else {
            Err(self.fail("unexpected trailing input"))
        }
    }
}

pub fn parse_structure(spec: &str) -> Result<Structure> {
    let mut p = Parser { spec, pos: 0 };
    if spec.contains(';') {
        let q = p.number("cluster count")?;
        p.expect(';')?;
        let function_hidden = p.layers()?;
        p.expect(';')?;
        let context_hidden = p.layers()?;
        p.end()?;
        Ok(Structure::ClusterNet {
            q,
            function_hidden,
            context_hidden,
        })
    } else {
        let hidden = p.layers()?;
        p.end()?;
        Ok(Structure::Fcn { hidden })
    }
}

impl FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_structure(s)
    }
}

impl TryFrom<String> for Structure {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        parse_structure(&s)
    }
}

impl From<Structure> for String {
    fn from(s: Structure) -> String {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn position(spec: &str) -> usize {
        match parse_structure(spec).unwrap_err() {
            Error::Structure { position, .. } => position,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fcn() {
        assert_eq!(
            parse_structure("3*32").unwrap(),
            Structure::Fcn {
                hidden: vec![32; 3]
            }
        );
    }

    #[test]
    fn clusternet() {
        assert_eq!(
            parse_structure("4;3*64;1*5").unwrap(),
            Structure::ClusterNet {
                q: 4,
                function_hidden: vec![64; 3],
                context_hidden: vec![5]
            }
        );
    }

    #[test]
    fn malformed_report_positions() {
        assert_eq!(position("4;;"), 2);
        assert_eq!(position("3*"), 2);
        assert_eq!(position("3*32x"), 4);
        assert_eq!(position("0*8"), 0);
        assert_eq!(position(""), 0);
        assert_eq!(position("4;3*64"), 6);
        assert_eq!(position("4;3*64;1*5;"), 10);
    }

    #[test]
    fn display_round_trips() {
        for s in ["3*32", "4;3*64;1*5", "2;1*8;2*3"] {
            assert_eq!(parse_structure(s).unwrap().to_string(), s);
        }
    }
}
