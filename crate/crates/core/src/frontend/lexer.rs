//! Tokenizer for the Java subset. Comments and whitespace are dropped.

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    /// Keyword that the subset understands.
    Keyword,
    /// Java keyword outside the subset (`try`, `switch`, ...).
    Reserved,
    IntLiteral,
    FloatLiteral,
    StringLiteral,
    CharLiteral,
    Operator,
    Punct,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl Token {
    /// Tokens that survive into the AST as leaves. Punctuation and keywords
    /// whose meaning is carried by a node kind (`if`, `return`, `class`, ...)
    /// are structural.
    pub fn is_content(&self) -> bool {
        match self.kind {
            TokenKind::Ident
            | TokenKind::IntLiteral
            | TokenKind::FloatLiteral
            | TokenKind::StringLiteral
            | TokenKind::CharLiteral
            | TokenKind::Operator => true,
            TokenKind::Keyword => !STRUCTURAL_KEYWORDS.contains(&self.text.as_str()),
            TokenKind::Reserved | TokenKind::Punct | TokenKind::Eof => false,
        }
    }
}

pub(crate) const PRIMITIVE_TYPES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double", "void",
];

pub(crate) const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
];

const STRUCTURAL_KEYWORDS: &[&str] = &[
    "class", "if", "else", "for", "while", "return", "break", "continue", "new",
];

const VALUE_KEYWORDS: &[&str] = &["true", "false", "null", "this"];

const RESERVED: &[&str] = &[
    "assert",
    "case",
    "catch",
    "const",
    "default",
    "do",
    "enum",
    "extends",
    "finally",
    "goto",
    "implements",
    "import",
    "instanceof",
    "interface",
    "native",
    "package",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "throw",
    "throws",
    "transient",
    "try",
    "volatile",
];

// Longest first so that maximal munch works with a linear scan.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "=", "<", ">", "+", "-", "*", "/", "%",
    "!", "~", "&", "|", "^",
];

const PUNCT: &[u8] = b"(){}[];,.";

fn is_keyword(word: &str) -> bool {
    PRIMITIVE_TYPES.contains(&word)
        || MODIFIERS.contains(&word)
        || STRUCTURAL_KEYWORDS.contains(&word)
        || VALUE_KEYWORDS.contains(&word)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn column(&self) -> usize {
        self.src[self.line_start..self.pos].chars().count() + 1
    }

    fn error(&self, expected: &str, found: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column(),
            expected: expected.to_string(),
            found: found.into(),
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        line_start: 0,
    };
    let mut out = Vec::new();

    loop {
        skip_trivia(&mut cur)?;
        let start = cur.pos;
        let (line, column) = (cur.line, cur.column());
        let Some(c) = cur.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                text: String::new(),
                start,
                end: start,
                line,
                column,
            });
            return Ok(out);
        };

        let kind = if c.is_alphabetic() || c == '_' || c == '$' {
            while matches!(cur.peek(), Some(c) if c.is_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            let word = &src[start..cur.pos];
            if is_keyword(word) {
                TokenKind::Keyword
            } else if RESERVED.contains(&word) {
                TokenKind::Reserved
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit())) {
            lex_number(&mut cur)?
        } else if c == '"' {
            lex_quoted(&mut cur, '"')?;
            TokenKind::StringLiteral
        } else if c == '\'' {
            lex_quoted(&mut cur, '\'')?;
            TokenKind::CharLiteral
        } else if c.is_ascii() && PUNCT.contains(&(c as u8)) {
            cur.bump();
            TokenKind::Punct
        } else if let Some(op) = OPERATORS.iter().find(|op| src[start..].starts_with(*op)) {
            for _ in 0..op.len() {
                cur.bump();
            }
            TokenKind::Operator
        } else {
            return Err(cur.error("a token", format!("character {c:?}")));
        };

        out.push(Token {
            kind,
            text: src[start..cur.pos].to_string(),
            start,
            end: cur.pos,
            line,
            column,
        });
    }
}

fn skip_trivia(cur: &mut Cursor<'_>) -> Result<(), ParseError> {
    loop {
        match (cur.peek(), cur.peek_at(1)) {
            (Some(c), _) if c.is_whitespace() => {
                cur.bump();
            }
            (Some('/'), Some('/')) => {
                while !matches!(cur.peek(), None | Some('\n')) {
                    cur.bump();
                }
            }
            (Some('/'), Some('*')) => {
                let err = cur.error("`*/`", "end of input inside block comment");
                cur.bump();
                cur.bump();
                loop {
                    match cur.bump() {
                        None => return Err(err),
                        Some('*') if cur.peek() == Some('/') => {
                            cur.bump();
                            break;
                        }
                        Some(_) => {}
                    }
                }
            }
            _ => return Ok(()),
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<TokenKind, ParseError> {
    let start = cur.pos;
    if cur.peek() == Some('0') && matches!(cur.peek_at(1), Some('x' | 'X')) {
        cur.bump();
        cur.bump();
        let digits_start = cur.pos;
        while matches!(cur.peek(), Some(c) if c.is_ascii_hexdigit() || c == '_') {
            cur.bump();
        }
        if cur.pos == digits_start {
            return Err(cur.error("hex digits", "nothing"));
        }
        if matches!(cur.peek(), Some('l' | 'L')) {
            cur.bump();
        }
        return Ok(TokenKind::IntLiteral);
    }

    let mut float = false;
    let digits = |cur: &mut Cursor<'_>| {
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '_') {
            cur.bump();
        }
    };
    digits(cur);
    if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(c) if c.is_ascii_digit()) {
        float = true;
        cur.bump();
        digits(cur);
    } else if cur.peek() == Some('.') && cur.pos > start {
        // `1.` is a valid double literal unless a member access follows.
        if !matches!(cur.peek_at(1), Some(c) if c.is_alphabetic() || c == '_') {
            float = true;
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        float = true;
        cur.bump();
        if matches!(cur.peek(), Some('+' | '-')) {
            cur.bump();
        }
        let exp_start = cur.pos;
        digits(cur);
        if cur.pos == exp_start {
            return Err(cur.error("exponent digits", "nothing"));
        }
    }
    match cur.peek() {
        Some('f' | 'F' | 'd' | 'D') => {
            cur.bump();
            float = true;
        }
        Some('l' | 'L') if !float => {
            cur.bump();
        }
        _ => {}
    }
    if matches!(cur.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
        return Err(cur.error("end of numeric literal", cur.peek().unwrap().to_string()));
    }
    Ok(if float {
        TokenKind::FloatLiteral
    } else {
        TokenKind::IntLiteral
    })
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char) -> Result<(), ParseError> {
    let err = cur.error(&format!("closing {quote}"), "end of line");
    cur.bump();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err(err),
            Some('\\') => {
                if cur.bump().is_none() {
                    return Err(err);
                }
            }
            Some(c) if c == quote => return Ok(()),
            Some(_) => {}
        }
    }
}
