use super::ast::{BinOp, Expr, Func, Var};
use super::lexer::{Token, TokenKind};
use super::{ExprError, Slot};

/// Precedence-climbing parser. Variable legality for `slot` is checked as
/// each identifier is consumed, so errors carry the identifier's position.
pub fn parse(tokens: &[Token], slot: Slot) -> Result<Expr, ExprError> {
    let end = tokens.last().map_or(0, |t| t.offset + 1);
    let mut p = Parser { tokens, pos: 0, slot, end };
    if tokens.is_empty() {
        return Err(ExprError::Syntax { offset: 0, message: "empty expression".into() });
    }
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ExprError::Syntax { offset: tok.offset, message: format!("unexpected {}", tok.kind) });
    }
    Ok(e)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    slot: Slot,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ExprError> {
        let offset = self.offset();
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(ExprError::Syntax { offset, message: format!("expected {kind}, found {}", t.kind) }),
            None => Err(ExprError::Syntax { offset, message: format!("expected {kind}, found end of input") }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(&TokenKind::Caret) {
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        let Some(tok) = self.next() else {
            return Err(ExprError::Syntax { offset, message: "unexpected end of input".into() });
        };
        match tok.kind.clone() {
            TokenKind::Num(x) => Ok(Expr::Num(x)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if self.peek().is_some_and(|t| t.kind == TokenKind::LParen) {
                    self.call(name, offset)
                } else {
                    self.identifier(name, offset)
                }
            }
            other => Err(ExprError::Syntax { offset, message: format!("unexpected {other}") }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ExprError> {
        if let Some(v) = Var::from_name(&name) {
            if !self.slot.allows_var(v) {
                return Err(ExprError::IllegalVariable { offset, name, slot: self.slot });
            }
            return Ok(Expr::Var(v));
        }
        if Func::from_name(&name).is_some() || matches!(name.as_str(), "z" | "zd" | "yq") {
            return Err(ExprError::Syntax { offset, message: format!("'{name}' must be called with arguments") });
        }
        Ok(Expr::Param(name))
    }

    /// Parses `( arg, … )`; returns each argument with its start offset.
    fn arguments(&mut self, slot: Slot) -> Result<Vec<(Expr, usize)>, ExprError> {
        self.expect(TokenKind::LParen)?;
        let saved = std::mem::replace(&mut self.slot, slot);
        let mut args = Vec::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                let at = self.offset();
                args.push((self.expr()?, at));
                if self.eat(&TokenKind::Comma) {
                    continue;
                }
                self.expect(TokenKind::RParen)?;
                break;
            }
        }
        self.slot = saved;
        Ok(args)
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, ExprError> {
        let (expected, state_like) = match name.as_str() {
            "z" => (1, true),
            "zd" | "yq" => (2, true),
            _ => match Func::from_name(&name) {
                Some(_) => (1, false),
                None => {
                    return Err(ExprError::Syntax { offset, message: format!("unknown function '{name}'") });
                }
            },
        };
        let allowed = match name.as_str() {
            "z" => self.slot.allows_state(),
            "zd" => self.slot.allows_delayed(),
            "yq" => self.slot.allows_nonlocal(),
            _ => true,
        };
        if !allowed {
            return Err(ExprError::IllegalVariable { offset, name, slot: self.slot });
        }
        let arg_slot = if state_like { Slot::Constant } else { self.slot };
        let mut args = self.arguments(arg_slot)?;
        if args.len() != expected {
            return Err(ExprError::Arity { offset, name, expected, got: args.len() });
        }
        Ok(match name.as_str() {
            "z" => Expr::State(index(&args[0])?),
            "zd" => {
                let i = index(&args[0])?;
                Expr::Delayed(i, Box::new(args.pop().unwrap().0))
            }
            "yq" => Expr::NonLocal(index(&args[0])?, index(&args[1])?),
            _ => Expr::Call(Func::from_name(&name).unwrap(), Box::new(args.pop().unwrap().0)),
        })
    }
}

fn index((e, offset): &(Expr, usize)) -> Result<usize, ExprError> {
    match e {
        Expr::Num(x) if *x >= 1.0 && x.fract() == 0.0 && *x <= u32::MAX as f64 => Ok(*x as usize),
        _ => Err(ExprError::Syntax { offset: *offset, message: format!("index must be a positive integer, got {e}") }),
    }
}
