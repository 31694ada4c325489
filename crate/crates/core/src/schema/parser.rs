//! Recursive-descent parser for the schema language.
//!
//! ```text
//! catalog   := event+ ;
//! event     := "event" STRING "{" node "}" ;
//! node      := composite | primitive ;
//! composite := OP "(" node ("," node)* ")" ;
//! primitive := "prim" "(" "channel" "=" STRING "," "predicate" "=" pred ")" ;
//! pred      := IDENT [ "(" param ("," param)* ")" ] ;
//! param     := IDENT "=" (NUMBER | IDENT) ;
//! ```
//!
//! Single-child composites are accepted syntactically and then rejected by
//! the axiom check, so the error names the axiom rather than a token.

use std::collections::BTreeMap;

use super::{
    validate_axioms, EventCatalog, Node, Operator, ParamValue, PredicateRef, PrimitiveNode,
    SchemaError, SchemaTree,
};
use crate::predicates::{PredicateError, PredicateRegistry};

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Num(v) => format!("number {v}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, expected: &str) -> SchemaError {
        SchemaError::Syntax {
            line,
            col,
            expected: expected.to_string(),
        }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, SchemaError> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.chars.peek() {
                if c == '#' {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if c.is_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push(Spanned {
                    tok: Tok::Eof,
                    line,
                    col,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' | ')' | '{' | '}' | ',' | '=' => {
                    self.bump();
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        ',' => Tok::Comma,
                        _ => Tok::Eq,
                    }
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None | Some('\n') => return Err(self.err(line, col, "closing `\"`")),
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                _ => {
                                    return Err(self.err(
                                        self.line,
                                        self.col,
                                        "escape sequence (\\\", \\\\, \\n, \\t)",
                                    ))
                                }
                            },
                            Some(ch) => s.push(ch),
                        }
                    }
                    Tok::Str(s)
                }
                c if c == '-' || c.is_ascii_digit() => Tok::Num(self.number(line, col)?),
                c if c == '_' || c.is_ascii_alphabetic() => {
                    let mut s = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c == '_' || c.is_ascii_alphanumeric() {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                _ => return Err(self.err(line, col, "a token")),
            };
            out.push(Spanned { tok, line, col });
        }
    }

    fn digits(&mut self, s: &mut String) -> usize {
        let mut n = 0;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
                n += 1;
            } else {
                break;
            }
        }
        n
    }

    fn number(&mut self, line: usize, col: usize) -> Result<f64, SchemaError> {
        let mut s = String::new();
        if self.chars.peek() == Some(&'-') {
            s.push('-');
            self.bump();
        }
        if self.digits(&mut s) == 0 {
            return Err(self.err(line, col, "digits"));
        }
        if self.chars.peek() == Some(&'.') {
            s.push('.');
            self.bump();
            if self.digits(&mut s) == 0 {
                return Err(self.err(self.line, self.col, "digits after `.`"));
            }
        }
        if matches!(self.chars.peek(), Some('e' | 'E')) {
            s.push('e');
            self.bump();
            if let Some(&c) = self.chars.peek() {
                if c == '+' || c == '-' {
                    s.push(c);
                    self.bump();
                }
            }
            if self.digits(&mut s) == 0 {
                return Err(self.err(self.line, self.col, "exponent digits"));
            }
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(line, col, "a finite number")),
        }
    }
}

struct Parser<'r> {
    toks: Vec<Spanned>,
    pos: usize,
    registry: &'r PredicateRegistry,
}

impl Parser<'_> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, at: &Spanned, expected: &str) -> SchemaError {
        SchemaError::Syntax {
            line: at.line,
            col: at.col,
            expected: format!("{expected}, found {}", at.tok.describe()),
        }
    }

    fn expect(&mut self, want: Tok, label: &str) -> Result<(), SchemaError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(self.error_at(&t, label))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SchemaError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            _ => Err(self.error_at(&t, &format!("`{kw}`"))),
        }
    }

    fn expect_string(&mut self, label: &str) -> Result<String, SchemaError> {
        let t = self.next();
        match t.tok {
            Tok::Str(s) => Ok(s),
            _ => Err(self.error_at(&t, label)),
        }
    }

    fn expect_ident(&mut self, label: &str) -> Result<String, SchemaError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok(s),
            _ => Err(self.error_at(&t, label)),
        }
    }

    fn catalog(&mut self) -> Result<EventCatalog, SchemaError> {
        let mut catalog = EventCatalog::new();
        loop {
            let schema = self.event()?;
            let violations = validate_axioms(&schema);
            if !violations.is_empty() {
                return Err(SchemaError::AxiomViolation {
                    event: schema.event_type,
                    violations,
                });
            }
            catalog.insert(schema)?;
            if self.peek().tok == Tok::Eof {
                return Ok(catalog);
            }
        }
    }

    fn event(&mut self) -> Result<SchemaTree, SchemaError> {
        self.expect_keyword("event")?;
        let name = self.expect_string("event type string")?;
        if name.is_empty() {
            let t = self.toks[self.pos - 1].clone();
            return Err(self.error_at(&t, "non-empty event type"));
        }
        self.expect(Tok::LBrace, "`{`")?;
        let root = self.node(0)?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(SchemaTree::new(name, root))
    }

    fn node(&mut self, depth: usize) -> Result<Node, SchemaError> {
        let head = self.next();
        if depth >= MAX_DEPTH {
            return Err(self.error_at(&head, "shallower nesting"));
        }
        let Tok::Ident(word) = &head.tok else {
            return Err(self.error_at(&head, "operator or `prim`"));
        };
        if word == "prim" {
            return self.primitive();
        }
        let op = match Operator::from_keyword(word) {
            Some(op) => op,
            None if self.peek().tok == Tok::LParen => {
                return Err(SchemaError::UnknownOperator(word.clone()))
            }
            None => return Err(self.error_at(&head, "operator or `prim`")),
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut children = vec![self.node(depth + 1)?];
        loop {
            let t = self.next();
            match t.tok {
                Tok::Comma => children.push(self.node(depth + 1)?),
                Tok::RParen => break,
                _ => return Err(self.error_at(&t, "`,` or `)`")),
            }
        }
        Ok(Node::composite(op, children))
    }

    fn primitive(&mut self) -> Result<Node, SchemaError> {
        self.expect(Tok::LParen, "`(`")?;
        self.expect_keyword("channel")?;
        self.expect(Tok::Eq, "`=`")?;
        let channel_tok = self.peek().clone();
        let channel = self.expect_string("channel name string")?;
        if channel.is_empty() {
            return Err(self.error_at(&channel_tok, "non-empty channel name"));
        }
        self.expect(Tok::Comma, "`,`")?;
        self.expect_keyword("predicate")?;
        self.expect(Tok::Eq, "`=`")?;
        let predicate = self.predicate()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Node::Primitive(PrimitiveNode { predicate, channel }))
    }

    fn predicate(&mut self) -> Result<PredicateRef, SchemaError> {
        let name = self.expect_ident("predicate name")?;
        let mut params = BTreeMap::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            loop {
                let key = self.expect_ident("parameter name")?;
                self.expect(Tok::Eq, "`=`")?;
                let t = self.next();
                let value = match t.tok {
                    Tok::Num(v) => ParamValue::Number(v),
                    Tok::Ident(s) => ParamValue::Ident(s),
                    _ => return Err(self.error_at(&t, "number or identifier")),
                };
                if params.insert(key.clone(), value).is_some() {
                    return Err(SchemaError::BadParameter {
                        predicate: name,
                        name: key,
                    });
                }
                let t = self.next();
                match t.tok {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    _ => return Err(self.error_at(&t, "`,` or `)`")),
                }
            }
        }
        let pred = PredicateRef { name, params };
        if !pred.name.starts_with("not_") {
            self.registry.resolve(&pred).map_err(|e| match e {
                PredicateError::BadParameter { predicate, name } => {
                    SchemaError::BadParameter { predicate, name }
                }
                _ => SchemaError::UnknownPredicate(pred.name.clone()),
            })?;
        }
        Ok(pred)
    }
}

/// Parses a catalog against the default predicate vocabulary.
pub fn parse_schema(source: &str) -> Result<EventCatalog, SchemaError> {
    parse_schema_with(source, &PredicateRegistry::default())
}

pub fn parse_schema_with(
    source: &str,
    registry: &PredicateRegistry,
) -> Result<EventCatalog, SchemaError> {
    let toks = Lexer::new(source).tokenize()?;
    let mut parser = Parser {
        toks,
        pos: 0,
        registry,
    };
    parser.catalog()
}

/// Like [`parse_schema`] but accepts raw bytes; invalid UTF-8 is reported
/// as a syntax error at the first bad byte.
pub fn parse_schema_bytes(source: &[u8]) -> Result<EventCatalog, SchemaError> {
    match std::str::from_utf8(source) {
        Ok(s) => parse_schema(s),
        Err(e) => {
            let valid = &source[..e.valid_up_to()];
            let line = 1 + valid.iter().filter(|&&b| b == b'\n').count();
            let col = 1 + valid.iter().rev().take_while(|&&b| b != b'\n').count();
            Err(SchemaError::Syntax {
                line,
                col,
                expected: "valid UTF-8".into(),
            })
        }
    }
}
