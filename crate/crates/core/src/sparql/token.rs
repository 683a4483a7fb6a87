//! Hand-written SPARQL lexer.
//!
//! The lexer is deliberately forgiving: it only has to be good enough to find
//! triple patterns, projections and filter expressions in the noisy,
//! partly template-generated queries of public KGQA benchmarks. It fails only
//! when a delimiter is left open, because the rest of the query can then no
//! longer be trusted.

use std::fmt;

use thiserror::Error;

/// Lexical category of a [`Token`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    PrefixedName,
    FullIri,
    Variable,
    Literal,
    Keyword,
    Operator,
    Punctuation,
}

/// A token together with its location in the source query.
///
/// `text` is the verbatim slice of the input, so the original query can be
/// rebuilt from the tokens and the whitespace between them. Keywords are
/// matched case-insensitively; [`Token::normalized`] yields their upper-cased
/// form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Offset of the first character, counted in Unicode scalar values.
    pub position: usize,
}

impl Token {
    /// Upper-cased text for keywords, verbatim text for everything else.
    pub fn normalized(&self) -> String {
        match self.kind {
            TokenKind::Keyword => self.text.to_ascii_uppercase(),
            _ => self.text.clone(),
        }
    }

    /// Case-insensitive keyword test. `kw` must be upper case.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text.eq_ignore_ascii_case(kw)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == p
    }

    pub fn is_operator(&self, op: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == op
    }

    /// The `a` shorthand for the RDF type predicate. Case-sensitive, as in SPARQL.
    pub fn is_rdf_type_shorthand(&self) -> bool {
        self.kind == TokenKind::Keyword && self.text == "a"
    }

    /// IRIs, prefixed names, variables and literals: anything that can fill a
    /// subject, predicate or object slot on its own.
    pub fn is_term(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::PrefixedName | TokenKind::FullIri | TokenKind::Variable | TokenKind::Literal
        )
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.kind, self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("unbalanced delimiter '{delimiter}' at character {position}")]
    UnbalancedDelimiter { delimiter: char, position: usize },
    #[error("empty query")]
    EmptyQuery,
}

/// Split `query` into tokens. Whitespace and `#` comments are dropped.
pub fn tokenize(query: &str) -> Result<Vec<Token>, TokenizeError> {
    if query.trim().is_empty() {
        return Err(TokenizeError::EmptyQuery);
    }
    let chars: Vec<char> = query.chars().collect();
    let mut lexer = Lexer {
        chars: &chars,
        pos: 0,
        tokens: Vec::new(),
    };
    lexer.run()?;
    check_braces(&lexer.tokens)?;
    Ok(lexer.tokens)
}

fn check_braces(tokens: &[Token]) -> Result<(), TokenizeError> {
    let mut open: Vec<&Token> = Vec::new();
    for tok in tokens {
        if tok.is_punct("{") {
            open.push(tok);
        } else if tok.is_punct("}") && open.pop().is_none() {
            return Err(TokenizeError::UnbalancedDelimiter {
                delimiter: '}',
                position: tok.position,
            });
        }
    }
    match open.last() {
        Some(tok) => Err(TokenizeError::UnbalancedDelimiter {
            delimiter: '{',
            position: tok.position,
        }),
        None => Ok(()),
    }
}

struct Lexer<'a> {
    chars: &'a [char],
    pos: usize,
    tokens: Vec<Token>,
}

impl Lexer<'_> {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let text: String = self.chars[start..self.pos].iter().collect();
        self.tokens.push(Token {
            kind,
            text,
            position: start,
        });
    }

    fn run(&mut self) -> Result<(), TokenizeError> {
        while let Some(c) = self.peek(0) {
            let start = self.pos;
            match c {
                c if c.is_whitespace() => self.pos += 1,
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n' && c != '\r') {
                        self.pos += 1;
                    }
                }
                '<' => self.lex_angle(start)?,
                '"' | '\'' => {
                    self.lex_string(c)?;
                    self.lex_literal_suffix();
                    self.push(TokenKind::Literal, start);
                }
                '?' | '$' => {
                    self.pos += 1;
                    let n = self.take_while(is_name_char);
                    if n == 0 {
                        // path modifier `?` (or a stray `$`)
                        self.push(TokenKind::Operator, start);
                    } else {
                        self.push(TokenKind::Variable, start);
                    }
                }
                '{' | '}' | '(' | ')' | '[' | ']' | ',' | ';' => {
                    self.pos += 1;
                    self.push(TokenKind::Punctuation, start);
                }
                '.' if !self.peek(1).is_some_and(|d| d.is_ascii_digit()) => {
                    self.pos += 1;
                    self.push(TokenKind::Punctuation, start);
                }
                c if c.is_ascii_digit() || c == '.' => {
                    self.lex_number();
                    self.push(TokenKind::Literal, start);
                }
                '>' | '!' | '=' => {
                    self.pos += 1;
                    if self.peek(0) == Some('=') && c != '=' {
                        self.pos += 1;
                    }
                    self.push(TokenKind::Operator, start);
                }
                '&' | '|' | '^' => {
                    self.pos += 1;
                    if self.peek(0) == Some(c) {
                        self.pos += 1;
                    }
                    self.push(TokenKind::Operator, start);
                }
                '+' | '-' | '*' | '/' => {
                    self.pos += 1;
                    self.push(TokenKind::Operator, start);
                }
                '_' if self.peek(1) == Some(':') => {
                    self.pos += 2;
                    self.lex_local_part();
                    self.push(TokenKind::PrefixedName, start);
                }
                ':' => {
                    self.pos += 1;
                    self.lex_local_part();
                    self.push(TokenKind::PrefixedName, start);
                }
                '@' => {
                    // stray language tag; keep it attached to nothing
                    self.pos += 1;
                    self.take_while(|c| c.is_alphanumeric() || c == '-');
                    self.push(TokenKind::Literal, start);
                }
                c if is_name_start(c) => self.lex_word(start),
                _ => {
                    self.pos += 1;
                    self.push(TokenKind::Punctuation, start);
                }
            }
        }
        Ok(())
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> usize {
        let start = self.pos;
        while self.peek(0).is_some_and(&pred) {
            self.pos += 1;
        }
        self.pos - start
    }

    /// `<` starts either an IRI reference or a comparison operator.
    fn lex_angle(&mut self, start: usize) -> Result<(), TokenizeError> {
        let rest = &self.chars[start + 1..];
        let mut end = None;
        for (i, &c) in rest.iter().enumerate() {
            if c == '>' {
                end = Some(i);
                break;
            }
            if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
                break;
            }
        }
        let looks_like_iri = rest
            .first()
            .is_some_and(|&c| !matches!(c, '?' | '$' | '=' | '(' | '-' | '+') && !c.is_whitespace());
        match end {
            Some(len) if looks_like_iri || len == 0 => {
                self.pos = start + len + 2;
                self.push(TokenKind::FullIri, start);
            }
            None if starts_with_scheme(rest) => {
                return Err(TokenizeError::UnbalancedDelimiter {
                    delimiter: '<',
                    position: start,
                });
            }
            _ => {
                self.pos += 1;
                if self.peek(0) == Some('=') {
                    self.pos += 1;
                }
                self.push(TokenKind::Operator, start);
            }
        }
        Ok(())
    }

    fn lex_string(&mut self, quote: char) -> Result<(), TokenizeError> {
        let start = self.pos;
        let long = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if long { 3 } else { 1 };
        loop {
            match self.peek(0) {
                None => {
                    return Err(TokenizeError::UnbalancedDelimiter {
                        delimiter: quote,
                        position: start,
                    })
                }
                Some('\\') => self.pos += 2,
                Some(c) if c == quote => {
                    if !long {
                        self.pos += 1;
                        return Ok(());
                    }
                    if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                        self.pos += 3;
                        return Ok(());
                    }
                    self.pos += 1;
                }
                Some('\n') if !long => {
                    return Err(TokenizeError::UnbalancedDelimiter {
                        delimiter: quote,
                        position: start,
                    })
                }
                Some(_) => self.pos += 1,
            }
        }
    }

    /// Language tag or `^^datatype` glued to a string literal.
    fn lex_literal_suffix(&mut self) {
        if self.peek(0) == Some('@') {
            self.pos += 1;
            self.take_while(|c| c.is_alphanumeric() || c == '-');
        } else if self.peek(0) == Some('^') && self.peek(1) == Some('^') {
            let save = self.pos;
            self.pos += 2;
            match self.peek(0) {
                Some('<') => {
                    let n = self.chars[self.pos..].iter().position(|&c| c == '>');
                    match n {
                        Some(n) => self.pos += n + 1,
                        None => self.pos = save,
                    }
                }
                Some(c) if is_name_start(c) || c == ':' => {
                    self.take_while(is_name_char);
                    if self.peek(0) == Some(':') {
                        self.pos += 1;
                        self.lex_local_part();
                    }
                }
                _ => self.pos = save,
            }
        }
    }

    fn lex_number(&mut self) {
        self.take_while(|c| c.is_ascii_digit());
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_digit());
        }
        if matches!(self.peek(0), Some('e' | 'E')) {
            let sign = usize::from(matches!(self.peek(1), Some('+' | '-')));
            if self.peek(1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1 + sign;
                self.take_while(|c| c.is_ascii_digit());
            }
        }
    }

    /// Local part of a prefixed name. Dots are allowed inside but not at the
    /// end, where they terminate the triple instead.
    fn lex_local_part(&mut self) {
        loop {
            match self.peek(0) {
                Some('\\') if self.peek(1).is_some() => self.pos += 2,
                Some('%') if self.peek(1).is_some_and(|c| c.is_ascii_hexdigit()) => self.pos += 1,
                Some(c) if is_name_char(c) || c == ':' => self.pos += 1,
                Some('.') if self.peek(1).is_some_and(|c| is_name_char(c) || c == ':') => {
                    self.pos += 1
                }
                _ => break,
            }
        }
    }

    fn lex_word(&mut self, start: usize) {
        self.take_while(|c| is_name_char(c) || c == '.');
        // a word may not end with a dot
        while self.pos > start + 1 && self.chars[self.pos - 1] == '.' {
            self.pos -= 1;
        }
        if self.peek(0) == Some(':') {
            self.pos += 1;
            self.lex_local_part();
            self.push(TokenKind::PrefixedName, start);
            return;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        if word == "true" || word == "false" {
            self.push(TokenKind::Literal, start);
        } else {
            self.push(TokenKind::Keyword, start);
        }
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '\u{b7}'
}

fn starts_with_scheme(rest: &[char]) -> bool {
    let mut it = rest.iter();
    if !it.next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    for &c in it {
        if c == ':' {
            return true;
        }
        if !(c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) {
            return false;
        }
    }
    false
}
