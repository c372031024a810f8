//! Recursive-descent parser for the Java subset described in `grammar.txt`.

use super::kind::NodeKind;
use super::lexer::{tokenize, Token, TokenKind, MODIFIERS, PRIMITIVE_TYPES};
use crate::error::ParseError;

const MAX_DEPTH: usize = 100;

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=",
];

// Binary operators grouped by precedence, loosest first.
const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^"],
    &["&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["<<", ">>", ">>>"],
    &["+", "-"],
    &["*", "/", "%"],
];

/// Owned tree produced by the parser before it is flattened into an arena.
#[derive(Debug)]
pub(crate) struct RawNode {
    pub kind: NodeKind,
    pub token: Option<String>,
    pub span: (usize, usize),
    pub children: Vec<RawNode>,
}

impl RawNode {
    fn leaf(kind: NodeKind, tok: &Token) -> RawNode {
        RawNode {
            kind,
            token: Some(tok.text.clone()),
            span: (tok.start, tok.end),
            children: Vec::new(),
        }
    }
}

pub(crate) fn parse_compilation_unit(src: &str) -> Result<RawNode, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    p.compilation_unit()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Token {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i]
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].end
        }
    }

    fn is(&self, text: &str) -> bool {
        let t = self.peek();
        t.text == text && matches!(t.kind, TokenKind::Punct | TokenKind::Operator | TokenKind::Keyword)
    }

    fn is_at(&self, n: usize, text: &str) -> bool {
        let t = self.peek_at(n);
        t.text == text && matches!(t.kind, TokenKind::Punct | TokenKind::Operator | TokenKind::Keyword)
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        let found = match t.kind {
            TokenKind::Eof => "end of input".to_string(),
            TokenKind::Reserved => format!("unsupported keyword `{}`", t.text),
            _ => format!("`{}`", t.text),
        };
        ParseError {
            line: t.line,
            column: t.column,
            expected: expected.to_string(),
            found,
        }
    }

    fn expect(&mut self, text: &str) -> PResult<Token> {
        if self.is(text) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("`{text}`")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<Token> {
        if self.peek().kind == TokenKind::Ident {
            Ok(self.bump())
        } else {
            Err(self.error(what))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("shallower nesting"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn node(&self, kind: NodeKind, start: usize, children: Vec<RawNode>) -> RawNode {
        RawNode {
            kind,
            token: None,
            span: (start, self.prev_end().max(start)),
            children,
        }
    }

    // ----- declarations -------------------------------------------------

    fn compilation_unit(&mut self) -> PResult<RawNode> {
        let start = self.peek().start;
        let mut members = Vec::new();
        while !self.at_eof() {
            members.push(self.top_level()?);
        }
        if members.is_empty() {
            return Err(self.error("a class or method declaration"));
        }
        Ok(self.node(NodeKind::CompilationUnit, start, members))
    }

    fn modifiers(&mut self) -> Vec<RawNode> {
        let mut out = Vec::new();
        while self.peek().kind == TokenKind::Keyword && MODIFIERS.contains(&self.peek().text.as_str()) {
            let tok = self.bump();
            out.push(RawNode::leaf(NodeKind::Modifier, &tok));
        }
        out
    }

    fn top_level(&mut self) -> PResult<RawNode> {
        let start = self.peek().start;
        let mods = self.modifiers();
        if self.is("class") {
            self.class_declaration(start, mods)
        } else {
            let ty = self.parse_type()?;
            let name = self.expect_ident("a method name")?;
            if !self.is("(") {
                return Err(self.error("`(` of a method declaration"));
            }
            self.method_rest(start, mods, ty, name)
        }
    }

    fn class_declaration(&mut self, start: usize, mut children: Vec<RawNode>) -> PResult<RawNode> {
        self.expect("class")?;
        let name = self.expect_ident("a class name")?;
        children.push(RawNode::leaf(NodeKind::Name, &name));
        self.expect("{")?;
        while !self.is("}") {
            if self.at_eof() {
                return Err(self.error("`}`"));
            }
            let member_start = self.peek().start;
            let mods = self.modifiers();
            let ty = self.parse_type()?;
            let name = self.expect_ident("a member name")?;
            if self.is("(") {
                children.push(self.method_rest(member_start, mods, ty, name)?);
            } else {
                let mut field = mods;
                field.push(ty);
                field.push(self.declarator_rest(name)?);
                while self.is(",") {
                    self.bump();
                    let name = self.expect_ident("a field name")?;
                    field.push(self.declarator_rest(name)?);
                }
                self.expect(";")?;
                children.push(self.node(NodeKind::FieldDeclaration, member_start, field));
            }
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::ClassDeclaration, start, children))
    }

    fn method_rest(
        &mut self,
        start: usize,
        mut children: Vec<RawNode>,
        ty: RawNode,
        name: Token,
    ) -> PResult<RawNode> {
        children.push(ty);
        children.push(RawNode::leaf(NodeKind::Name, &name));
        self.expect("(")?;
        if !self.is(")") {
            loop {
                let pstart = self.peek().start;
                let mut param = self.modifiers();
                param.push(self.parse_type()?);
                let ident = self.expect_ident("a parameter name")?;
                param.push(RawNode::leaf(NodeKind::Identifier, &ident));
                children.push(self.node(NodeKind::FormalParameter, pstart, param));
                if self.is(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body_start = self.peek().start;
        let stmts = self.block_statements()?;
        children.push(self.node(NodeKind::MethodBody, body_start, stmts));
        Ok(self.node(NodeKind::MethodDeclaration, start, children))
    }

    fn parse_type(&mut self) -> PResult<RawNode> {
        let tok = self.peek().clone();
        let mut ty = match tok.kind {
            TokenKind::Keyword if PRIMITIVE_TYPES.contains(&tok.text.as_str()) => {
                self.bump();
                RawNode::leaf(NodeKind::BasicType, &tok)
            }
            TokenKind::Ident => {
                self.bump();
                RawNode::leaf(NodeKind::ReferenceType, &tok)
            }
            _ => return Err(self.error("a type")),
        };
        if self.is("<") {
            return Err(self.error("a non-generic type"));
        }
        while self.is("[") && self.is_at(1, "]") {
            self.bump();
            self.bump();
            ty = self.node(NodeKind::ArrayType, tok.start, vec![ty]);
        }
        Ok(ty)
    }

    fn declarator_rest(&mut self, name: Token) -> PResult<RawNode> {
        let mut children = vec![RawNode::leaf(NodeKind::Identifier, &name)];
        if self.is("=") {
            let op = self.bump();
            children.push(RawNode::leaf(NodeKind::Operator, &op));
            if self.is("{") {
                return Err(self.error("an expression (array initializers are not supported)"));
            }
            children.push(self.expression()?);
        }
        Ok(self.node(NodeKind::VariableDeclarator, name.start, children))
    }

    // ----- statements ---------------------------------------------------

    fn block_statements(&mut self) -> PResult<Vec<RawNode>> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.is("}") {
            if self.at_eof() {
                return Err(self.error("`}`"));
            }
            stmts.push(self.statement()?);
        }
        self.expect("}")?;
        Ok(stmts)
    }

    fn starts_local_declaration(&self) -> bool {
        let t = self.peek();
        match t.kind {
            TokenKind::Keyword => {
                PRIMITIVE_TYPES.contains(&t.text.as_str()) || MODIFIERS.contains(&t.text.as_str())
            }
            TokenKind::Ident => {
                self.peek_at(1).kind == TokenKind::Ident || (self.is_at(1, "[") && self.is_at(2, "]"))
            }
            _ => false,
        }
    }

    fn local_declaration(&mut self) -> PResult<RawNode> {
        let start = self.peek().start;
        let mut children = self.modifiers();
        children.push(self.parse_type()?);
        loop {
            let name = self.expect_ident("a variable name")?;
            children.push(self.declarator_rest(name)?);
            if self.is(",") {
                self.bump();
            } else {
                break;
            }
        }
        Ok(self.node(NodeKind::LocalVariableDeclaration, start, children))
    }

    fn statement(&mut self) -> PResult<RawNode> {
        self.enter()?;
        let out = self.statement_inner();
        self.leave();
        out
    }

    fn statement_inner(&mut self) -> PResult<RawNode> {
        let start = self.peek().start;
        if self.peek().kind == TokenKind::Reserved {
            return Err(self.error("a statement of the supported subset"));
        }
        if self.is("{") {
            let stmts = self.block_statements()?;
            return Ok(self.node(NodeKind::Block, start, stmts));
        }
        if self.is("if") {
            self.bump();
            let cond = self.paren_expression()?;
            let then = self.statement()?;
            let mut children = vec![cond, then];
            if self.is("else") {
                self.bump();
                children.push(self.statement()?);
            }
            return Ok(self.node(NodeKind::IfStatement, start, children));
        }
        if self.is("while") {
            self.bump();
            let cond = self.paren_expression()?;
            let body = self.statement()?;
            return Ok(self.node(NodeKind::WhileStatement, start, vec![cond, body]));
        }
        if self.is("for") {
            return self.for_statement(start);
        }
        if self.is("return") {
            self.bump();
            let mut children = Vec::new();
            if !self.is(";") {
                children.push(self.expression()?);
            }
            self.expect(";")?;
            return Ok(self.node(NodeKind::ReturnStatement, start, children));
        }
        if self.is("break") || self.is("continue") {
            let kind = if self.is("break") {
                NodeKind::BreakStatement
            } else {
                NodeKind::ContinueStatement
            };
            self.bump();
            self.expect(";")?;
            return Ok(self.node(kind, start, Vec::new()));
        }
        if self.is(";") {
            return Err(self.error("a statement (empty statements are not supported)"));
        }
        if self.starts_local_declaration() {
            let decl = self.local_declaration()?;
            self.expect(";")?;
            let mut decl = decl;
            decl.span.1 = self.prev_end();
            return Ok(decl);
        }
        let expr = self.expression()?;
        let valid = match expr.kind {
            NodeKind::Assignment
            | NodeKind::MethodInvocation
            | NodeKind::ClassCreator
            | NodeKind::PostfixOperation => true,
            NodeKind::PrefixOperation => {
                matches!(expr.children[0].token.as_deref(), Some("++" | "--"))
            }
            _ => false,
        };
        if !valid {
            let tok = &self.tokens[self.pos.saturating_sub(1)];
            return Err(ParseError {
                line: tok.line,
                column: tok.column,
                expected: "an assignment, call, increment or object creation statement".into(),
                found: format!("{} expression", expr.kind),
            });
        }
        self.expect(";")?;
        Ok(self.node(NodeKind::StatementExpression, start, vec![expr]))
    }

    fn paren_expression(&mut self) -> PResult<RawNode> {
        self.expect("(")?;
        let e = self.expression()?;
        self.expect(")")?;
        Ok(e)
    }

    fn for_statement(&mut self, start: usize) -> PResult<RawNode> {
        self.expect("for")?;
        self.expect("(")?;
        let mut children = Vec::new();
        if !self.is(";") {
            let istart = self.peek().start;
            let init = if self.starts_local_declaration() {
                vec![self.local_declaration()?]
            } else {
                self.expression_list()?
            };
            children.push(self.node(NodeKind::ForInit, istart, init));
        }
        self.expect(";")?;
        if !self.is(";") {
            let cstart = self.peek().start;
            let cond = self.expression()?;
            children.push(self.node(NodeKind::ForCondition, cstart, vec![cond]));
        }
        self.expect(";")?;
        if !self.is(")") {
            let ustart = self.peek().start;
            let update = self.expression_list()?;
            children.push(self.node(NodeKind::ForUpdate, ustart, update));
        }
        self.expect(")")?;
        children.push(self.statement()?);
        Ok(self.node(NodeKind::ForStatement, start, children))
    }

    fn expression_list(&mut self) -> PResult<Vec<RawNode>> {
        let mut out = vec![self.expression()?];
        while self.is(",") {
            self.bump();
            out.push(self.expression()?);
        }
        Ok(out)
    }

    // ----- expressions --------------------------------------------------

    fn expression(&mut self) -> PResult<RawNode> {
        self.enter()?;
        let out = self.assignment();
        self.leave();
        out
    }

    fn assignment(&mut self) -> PResult<RawNode> {
        let lhs = self.binary(0)?;
        let t = self.peek();
        if t.kind == TokenKind::Operator && ASSIGN_OPS.contains(&t.text.as_str()) {
            if !matches!(
                lhs.kind,
                NodeKind::Identifier | NodeKind::FieldAccess | NodeKind::ArrayAccess
            ) {
                return Err(self.error("an operator (left side is not assignable)"));
            }
            let op = self.bump();
            let rhs = self.expression()?;
            let start = lhs.span.0;
            let op = RawNode::leaf(NodeKind::Operator, &op);
            return Ok(self.node(NodeKind::Assignment, start, vec![lhs, op, rhs]));
        }
        Ok(lhs)
    }

    fn binary_precedence(&self) -> Option<usize> {
        let t = self.peek();
        if t.kind != TokenKind::Operator {
            return None;
        }
        BINARY_LEVELS
            .iter()
            .position(|ops| ops.contains(&t.text.as_str()))
    }

    /// Precedence climbing over `BINARY_LEVELS`; all levels are left-associative.
    fn binary(&mut self, min_level: usize) -> PResult<RawNode> {
        let mut lhs = self.unary()?;
        while let Some(level) = self.binary_precedence().filter(|&l| l >= min_level) {
            let op = self.bump();
            let rhs = self.binary(level + 1)?;
            let start = lhs.span.0;
            let op = RawNode::leaf(NodeKind::Operator, &op);
            lhs = self.node(NodeKind::BinaryOperation, start, vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<RawNode> {
        let t = self.peek();
        if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "-" | "+" | "!" | "~" | "++" | "--") {
            self.enter()?;
            let op = self.bump();
            let operand = self.unary();
            self.leave();
            let operand = operand?;
            let op = RawNode::leaf(NodeKind::Operator, &op);
            let start = op.span.0;
            return Ok(self.node(NodeKind::PrefixOperation, start, vec![op, operand]));
        }
        let mut e = self.primary()?;
        while self.peek().kind == TokenKind::Operator && matches!(self.peek().text.as_str(), "++" | "--") {
            let op = self.bump();
            let start = e.span.0;
            let op = RawNode::leaf(NodeKind::Operator, &op);
            e = self.node(NodeKind::PostfixOperation, start, vec![e, op]);
        }
        Ok(e)
    }

    fn arguments(&mut self, out: &mut Vec<RawNode>) -> PResult<()> {
        self.expect("(")?;
        if !self.is(")") {
            out.extend(self.expression_list()?);
        }
        self.expect(")")?;
        Ok(())
    }

    fn primary(&mut self) -> PResult<RawNode> {
        let tok = self.peek().clone();
        let mut e = match tok.kind {
            TokenKind::IntLiteral | TokenKind::FloatLiteral | TokenKind::StringLiteral | TokenKind::CharLiteral => {
                self.bump();
                RawNode::leaf(NodeKind::Literal, &tok)
            }
            TokenKind::Keyword if matches!(tok.text.as_str(), "true" | "false" | "null") => {
                self.bump();
                RawNode::leaf(NodeKind::Literal, &tok)
            }
            TokenKind::Keyword if tok.text == "this" => {
                self.bump();
                RawNode::leaf(NodeKind::This, &tok)
            }
            TokenKind::Keyword if tok.text == "new" => self.creator()?,
            TokenKind::Punct if tok.text == "(" => {
                self.bump();
                let inner = self.expression()?;
                self.expect(")")?;
                inner
            }
            TokenKind::Ident => {
                self.bump();
                if self.is("(") {
                    let mut children = vec![RawNode::leaf(NodeKind::Member, &tok)];
                    self.arguments(&mut children)?;
                    self.node(NodeKind::MethodInvocation, tok.start, children)
                } else {
                    RawNode::leaf(NodeKind::Identifier, &tok)
                }
            }
            _ => return Err(self.error("an expression")),
        };

        loop {
            if self.is(".") {
                self.bump();
                let member = self.expect_ident("a member name after `.`")?;
                let start = e.span.0;
                let mut children = vec![e, RawNode::leaf(NodeKind::Member, &member)];
                if self.is("(") {
                    self.arguments(&mut children)?;
                    e = self.node(NodeKind::MethodInvocation, start, children);
                } else {
                    e = self.node(NodeKind::FieldAccess, start, children);
                }
            } else if self.is("[") {
                self.bump();
                let index = self.expression()?;
                self.expect("]")?;
                let start = e.span.0;
                e = self.node(NodeKind::ArrayAccess, start, vec![e, index]);
            } else {
                return Ok(e);
            }
        }
    }

    fn creator(&mut self) -> PResult<RawNode> {
        let start = self.expect("new")?.start;
        let tok = self.peek().clone();
        let ty = match tok.kind {
            TokenKind::Keyword if PRIMITIVE_TYPES.contains(&tok.text.as_str()) => {
                self.bump();
                RawNode::leaf(NodeKind::BasicType, &tok)
            }
            TokenKind::Ident => {
                self.bump();
                RawNode::leaf(NodeKind::ReferenceType, &tok)
            }
            _ => return Err(self.error("a type after `new`")),
        };
        if self.is("[") {
            let mut children = vec![ty];
            while self.is("[") {
                self.bump();
                if self.is("]") {
                    return Err(self.error("an array dimension expression"));
                }
                children.push(self.expression()?);
                self.expect("]")?;
            }
            return Ok(self.node(NodeKind::ArrayCreator, start, children));
        }
        if ty.kind == NodeKind::BasicType {
            return Err(self.error("`[` after a primitive type in `new`"));
        }
        let mut children = vec![ty];
        self.arguments(&mut children)?;
        Ok(self.node(NodeKind::ClassCreator, start, children))
    }
}
