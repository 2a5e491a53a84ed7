use super::RuleSpec;
use crate::error::{LnnError, Result};
use crate::schema::Feature;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    And,
    Or,
    Not,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn error(line: usize, column: usize, message: impl Into<String>) -> LnnError {
    LnnError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        let single = match c {
            '&' => Some(Tok::And),
            '|' => Some(Tok::Or),
            '!' => Some(Tok::Not),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            col += 1;
            out.push(Token {
                tok,
                line: l,
                column: cl,
            });
        } else if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c.is_ascii_alphabetic() {
            let mut name = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    name.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Ident(name),
                line: l,
                column: cl,
            });
        } else {
            return Err(error(l, cl, format!("unexpected character '{c}'")));
        }
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn or(&mut self) -> Result<RuleSpec> {
        let mut items = vec![self.and()?];
        while self.peek().tok == Tok::Or {
            self.bump();
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            RuleSpec::Or(items)
        })
    }

    fn and(&mut self) -> Result<RuleSpec> {
        let mut items = vec![self.unary()?];
        while self.peek().tok == Tok::And {
            self.bump();
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            RuleSpec::And(items)
        })
    }

    fn unary(&mut self) -> Result<RuleSpec> {
        let t = self.bump();
        match t.tok {
            Tok::Not => Ok(RuleSpec::Not(Box::new(self.unary()?))),
            Tok::LParen => {
                let inner = self.or()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(error(close.line, close.column, "expected ')'"));
                }
                Ok(inner)
            }
            Tok::Ident(name) => name.parse::<Feature>().map(RuleSpec::Feature).map_err(|_| {
                let valid: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
                error(
                    t.line,
                    t.column,
                    format!("unknown feature '{name}' (expected one of {})", valid.join(", ")),
                )
            }),
            Tok::End => Err(error(t.line, t.column, "unexpected end of rule")),
            other => Err(error(
                t.line,
                t.column,
                format!("expected a feature, '!' or '(', found {}", describe(&other)),
            )),
        }
    }
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Ident(_) => "a name",
        Tok::And => "'&'",
        Tok::Or => "'|'",
        Tok::Not => "'!'",
        Tok::LParen => "'('",
        Tok::RParen => "')'",
        Tok::End => "end of input",
    }
}

/// Parses rule text. `&` binds tighter than `|`, `!` tightest; chains of the
/// same operator become one n-ary node, parenthesized groups stay separate.
pub fn parse_rule(text: &str) -> Result<RuleSpec> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
    };
    let rule = p.or()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(error(
            t.line,
            t.column,
            format!("unexpected {} after rule", describe(&t.tok)),
        ));
    }
    Ok(rule)
}
