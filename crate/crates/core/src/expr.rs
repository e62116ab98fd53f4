//! Closed-form initial fields: numbers, `x`, `y`, `pi`, `sin`, `cos`,
//! `+ - * /` and parentheses.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.sum()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(Error::Expr(format!("unexpected {} at position {}", t.describe(), p.pos))),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Sin(e) => e.eval(x, y).sin(),
            Expr::Cos(e) => e.eval(x, y).cos(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                }
            }
        }
    }

    fn uses_y(&self) -> bool {
        match self {
            Expr::Y => true,
            Expr::Num(_) | Expr::X => false,
            Expr::Neg(e) | Expr::Sin(e) | Expr::Cos(e) => e.uses_y(),
            Expr::Bin(_, a, b) => a.uses_y() || b.uses_y(),
        }
    }

    /// Samples the expression at the grid points.
    pub fn sample(&self, grid: Grid) -> Result<Field> {
        if grid.ndim() == 1 && self.uses_y() {
            return Err(Error::Expr("`y` is not defined on a 1D grid".into()));
        }
        let f = Field::from_fn(grid, |x, y| self.eval(x, y));
        if !f.is_finite() {
            return Err(Error::Expr("expression evaluates to a non-finite value on the grid".into()));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("`{s}`"),
            Token::Op(c) => format!("`{c}`"),
            Token::Open => "`(`".into(),
            Token::Close => "`)`".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' | '-' | '*' | '/' => {
                out.push(Token::Op(c));
                i += 1;
            }
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // Exponent: e or E, optional sign, digits.
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| Error::Expr(format!("bad number {text:?}")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character {other:?} at position {i}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { Op::Add } else { Op::Sub };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { Op::Mul } else { Op::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.pos;
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::Open) => {
                let e = self.sum()?;
                self.expect_close()?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "sin" | "cos" => {
                    match self.next() {
                        Some(Token::Open) => {}
                        _ => return Err(Error::Expr(format!("`{name}` must be followed by `(`"))),
                    }
                    let arg = Box::new(self.sum()?);
                    self.expect_close()?;
                    Ok(if name == "sin" { Expr::Sin(arg) } else { Expr::Cos(arg) })
                }
                other => Err(Error::Expr(format!("unknown identifier `{other}` at position {at}"))),
            },
            Some(t) => Err(Error::Expr(format!("unexpected {} at position {at}", t.describe()))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        match self.next() {
            Some(Token::Close) => Ok(()),
            _ => Err(Error::Expr("missing `)`".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eval(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(eval("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(eval("5 - 3 - 1", 0.0, 0.0), 1.0);
        assert_eq!(eval("-2 * -3", 0.0, 0.0), 6.0);
        assert_eq!(eval("2e-1 + 1.5E1", 0.0, 0.0), 15.2);
    }

    #[test]
    fn functions_and_variables() {
        let x = 0.3;
        let got = eval("0.6 + 0.2*cos(2*pi*x)", x, 0.0);
        assert_eq!(got, 0.6 + 0.2 * (2.0 * PI * x).cos());
        assert_eq!(eval("sin(x) * cos(y)", 0.5, 0.25), 0.5f64.sin() * 0.25f64.cos());
    }

    #[test]
    fn rejects_unknown_input() {
        for bad in ["exp(x)", "x ^ 2", "cos x", "(1 + 2", "1 +", "", "2 3", "z"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Expr(_))), "{bad:?} should fail");
        }
    }

    #[test]
    fn y_needs_a_2d_grid() {
        let g = Grid::new_1d(8, 1.0).unwrap();
        assert!(Expr::parse("cos(y)").unwrap().sample(g).is_err());
        assert!(Expr::parse("1 / (x - x)").unwrap().sample(g).is_err());
        let f = Expr::parse("x").unwrap().sample(g).unwrap();
        assert_eq!(f.values()[4], 0.5);
    }
}
