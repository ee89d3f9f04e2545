use super::ast::{Atom, CmpOp, Expr, Interval, StlFormula};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Plus,
    Minus,
    Star,
    Bang,
    Amp,
    Pipe,
    Cmp(CmpOp),
    Eof,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(x) => format!("number {x}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::Syntax { position, message: message.into() }
}

fn error_position(e: &Error) -> usize {
    match e {
        Error::Syntax { position, .. } => *position,
        _ => 0,
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBrack,
            b']' => Tok::RBrack,
            b',' => Tok::Comma,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 1;
                }
                Tok::Amp
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 1;
                }
                Tok::Pipe
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                return Err(syntax(i, "`!=` is not supported; use `!(a == b)`"));
            }
            b'!' => Tok::Bang,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                Tok::Cmp(match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (_, false) => CmpOp::Gt,
                    (_, true) => CmpOp::Ge,
                })
            }
            b'=' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(syntax(i, "expected `==`"));
                }
                i += 1;
                Tok::Cmp(CmpOp::Eq)
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s = &text[i..j];
                let x: f64 = s.parse().map_err(|_| syntax(i, format!("malformed number `{s}`")))?;
                i = j - 1;
                Tok::Num(x)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let s = text[i..j].to_string();
                i = j - 1;
                Tok::Ident(s)
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn is_temporal(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name) && *self.peek_at(1) == Tok::LBrack
    }

    fn formula(&mut self) -> Result<StlFormula> {
        let mut lhs = self.disjunction()?;
        while self.is_temporal("U") {
            self.bump();
            let i = self.interval()?;
            let rhs = self.disjunction()?;
            lhs = StlFormula::until(lhs, rhs, i);
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<StlFormula> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            lhs = StlFormula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<StlFormula> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = StlFormula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StlFormula> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(StlFormula::not(self.unary()?));
        }
        for (name, always) in [("F", false), ("G", true)] {
            if self.is_temporal(name) {
                self.bump();
                let i = self.interval()?;
                let f = self.unary()?;
                return Ok(if always { StlFormula::always(i, f) } else { StlFormula::eventually(i, f) });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StlFormula> {
        match self.peek() {
            Tok::Ident(s) if s == "true" => {
                self.bump();
                return Ok(StlFormula::True);
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                return Ok(StlFormula::not(StlFormula::True));
            }
            _ => {}
        }
        let start = self.pos;
        let as_atom = self.atom();
        if as_atom.is_ok() || self.toks[start].0 != Tok::LParen {
            return as_atom.map(StlFormula::Atom);
        }
        let atom_err = as_atom.unwrap_err();
        self.pos = start;
        self.bump();
        let nested = self.formula().and_then(|f| {
            self.expect(Tok::RParen, "`)`")?;
            Ok(f)
        });
        match nested {
            Ok(f) => Ok(f),
            // report whichever reading got further into the input
            Err(e) if error_position(&e) >= error_position(&atom_err) => Err(e),
            Err(_) => Err(atom_err),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            t => {
                return Err(syntax(self.offset(), format!("expected a comparison operator, found {}", describe(t))));
            }
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Atom { lhs, op, rhs })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Minus => {
                if let Tok::Num(x) = *self.peek() {
                    self.bump();
                    Ok(Expr::Num(-x))
                } else {
                    Ok(Expr::Neg(Box::new(self.factor()?)))
                }
            }
            Tok::Ident(name) if name == "D" && *self.peek() == Tok::LParen => {
                self.bump();
                let inner_at = self.offset();
                let species = match self.bump() {
                    Tok::Ident(s) => s,
                    t => return Err(syntax(inner_at, format!("expected a species name, found {}", describe(&t)))),
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Delta(species))
            }
            Tok::Ident(name) => Ok(Expr::Var(name)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            t => Err(syntax(at, format!("expected an operand, found {}", describe(&t)))),
        }
    }

    fn number(&mut self, allow_inf: bool) -> Result<Option<f64>> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(Some(x)),
            Tok::Ident(s) if allow_inf && s == "inf" => Ok(None),
            t => Err(syntax(at, format!("expected a time bound, found {}", describe(&t)))),
        }
    }

    fn interval(&mut self) -> Result<Interval> {
        let at = self.offset();
        self.expect(Tok::LBrack, "`[`")?;
        let lo = self.number(false)?.unwrap_or(0.0);
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.number(true)?;
        self.expect(Tok::RBrack, "`]`")?;
        if !(lo >= 0.0) || !lo.is_finite() {
            return Err(syntax(at, format!("interval lower bound {lo} must be nonnegative")));
        }
        if let Some(h) = hi {
            if !(h > lo) || !h.is_finite() {
                return Err(syntax(at, format!("interval [{lo},{h}] is empty or not finite")));
            }
        }
        Ok(Interval { lo, hi })
    }
}

/// Parses formula text.
///
/// Grammar, loosest binding first: `φ U[a,b] ψ` (left associative),
/// `φ | ψ`, `φ & ψ`, then the prefix operators `!φ`, `F[a,b] φ`,
/// `G[a,b] φ`. Atoms compare arithmetic expressions over species names,
/// numbers, `+ - *` and `D(name)`. `true` and `false` are constants and
/// `inf` may close an interval.
pub fn parse_stl(text: &str) -> Result<StlFormula> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(syntax(p.offset(), format!("unexpected {}", describe(p.peek()))));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(s: &str) -> Expr {
        Expr::Var(s.into())
    }

    fn atom(lhs: Expr, op: CmpOp, rhs: f64) -> StlFormula {
        StlFormula::Atom(Atom { lhs, op, rhs: Expr::Num(rhs) })
    }

    #[test]
    fn epidemic_termination() {
        let f = parse_stl("(I > 0) U[100,120] (I == 0)").unwrap();
        assert_eq!(
            f,
            StlFormula::until(
                atom(var("I"), CmpOp::Gt, 0.0),
                atom(var("I"), CmpOp::Eq, 0.0),
                Interval::bounded(100.0, 120.0)
            )
        );
        assert_eq!(f.horizon(), 120.0);
    }

    #[test]
    fn switch_property_desugars() {
        let f = parse_stl("G[0,300](L1p - L3p >= 0) & F[300,600](L3p - L1p >= 0)").unwrap();
        let diff = |a: &str, b: &str| Expr::Sub(Box::new(var(a)), Box::new(var(b)));
        let expect = StlFormula::and(
            StlFormula::always(Interval::bounded(0.0, 300.0), atom(diff("L1p", "L3p"), CmpOp::Ge, 0.0)),
            StlFormula::eventually(Interval::bounded(300.0, 600.0), atom(diff("L3p", "L1p"), CmpOp::Ge, 0.0)),
        );
        assert_eq!(f, expect);
        assert_eq!(f.horizon(), 600.0);
    }

    #[test]
    fn missing_operand() {
        let e = parse_stl("F[0,10]").unwrap_err();
        assert!(matches!(e, Error::Syntax { position: 7, .. }), "{e}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        for (text, pos) in [("(S > 1", 6), ("S > ", 4), ("S ? 1", 2), ("F[3,1](S>1)", 1), ("S > 1 )", 6)] {
            match parse_stl(text) {
                Err(Error::Syntax { position, .. }) => assert_eq!(position, pos, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn precedence() {
        let f = parse_stl("a > 0 | b > 0 & !c > 0 U[0,1] d > 0").unwrap();
        let (a, b, c, d) = (
            atom(var("a"), CmpOp::Gt, 0.0),
            atom(var("b"), CmpOp::Gt, 0.0),
            atom(var("c"), CmpOp::Gt, 0.0),
            atom(var("d"), CmpOp::Gt, 0.0),
        );
        let expect = StlFormula::until(
            StlFormula::or(a, StlFormula::and(b, StlFormula::not(c))),
            d,
            Interval::bounded(0.0, 1.0),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn until_is_left_associative() {
        let f = parse_stl("a>0 U[0,1] b>0 U[1,2] c>0").unwrap();
        assert!(matches!(f, StlFormula::Until(ref l, _, _) if matches!(**l, StlFormula::Until(..))));
    }

    #[test]
    fn parenthesized_arithmetic_vs_formula() {
        let f = parse_stl("(a + b) * 2 >= (c)").unwrap();
        assert!(matches!(f, StlFormula::Atom(_)));
        let g = parse_stl("((a > 1))").unwrap();
        assert_eq!(g, atom(var("a"), CmpOp::Gt, 1.0));
    }

    #[test]
    fn delta_and_constants() {
        let f = parse_stl("G[10,200](D(LacZ) <= 0) | false").unwrap();
        assert_eq!(f.identifiers(), vec!["LacZ".to_string()]);
        assert_eq!(parse_stl("true").unwrap(), StlFormula::True);
        let u = parse_stl("F[2,inf] x > 1").unwrap();
        assert!(matches!(u, StlFormula::Until(_, _, Interval { hi: None, .. })));
        assert_eq!(u.horizon(), 2.0);
    }

    #[test]
    fn species_named_like_operators() {
        // F, G and U are operators only in front of `[`
        let f = parse_stl("F + G > U").unwrap();
        assert_eq!(f.identifiers(), vec!["F", "G", "U"]);
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "(I > 0) U[100,120] (I == 0)",
            "G[0,300](L1p - L3p >= 0) & F[300,600](L3p - L1p >= 0)",
            "!(-x * 2.5 + -3 < D(y)) | false",
            "F[0.125,inf] -(a - b) == 1e-3",
        ] {
            let f = parse_stl(text).unwrap();
            let printed = f.to_string();
            let again = parse_stl(&printed).unwrap();
            assert_eq!(f, again, "{printed}");
            assert_eq!(printed, again.to_string());
        }
    }
}
