//! Coefficient expressions: arithmetic over parameter names.
//!
//! A family's monomial coefficients are small expression trees over the
//! declared parameters (e.g. `q - 1` or `-(1 + p)`), evaluated by tree walk
//! when the family is instantiated at a concrete parameter point.  Only
//! `+ - * ^` with nonnegative integer powers and real literals are supported;
//! the families of interest are polynomial in the parameters.

use std::fmt;

use super::{FamilyError, ParamPoint};

/// Arithmetic expression over parameter names and real literals.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Param(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    /// Evaluate at the given parameter point.
    pub fn eval(&self, mu: &ParamPoint) -> Result<f64, FamilyError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Param(name) => mu.get(name)?,
            Expr::Add(a, b) => a.eval(mu)? + b.eval(mu)?,
            Expr::Sub(a, b) => a.eval(mu)? - b.eval(mu)?,
            Expr::Mul(a, b) => a.eval(mu)? * b.eval(mu)?,
            Expr::Neg(a) => -a.eval(mu)?,
            Expr::Pow(a, k) => a.eval(mu)?.powi(*k as i32),
        })
    }

    /// True if the expression is the literal zero (used to prune coefficient
    /// tables; symbolic cancellations like `a - a` are deliberately not
    /// detected).
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Constant-fold addition; keeps tables tidy after expansion.
    pub fn add(self, other: Expr) -> Expr {
        match (&self, &other) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (Expr::Const(c), _) if *c == 0.0 => other,
            (_, Expr::Const(c)) if *c == 0.0 => self,
            _ => Expr::Add(Box::new(self), Box::new(other)),
        }
    }

    /// Constant-fold multiplication.
    pub fn mul(self, other: Expr) -> Expr {
        match (&self, &other) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (Expr::Const(c), _) | (_, Expr::Const(c)) if *c == 0.0 => Expr::Const(0.0),
            (Expr::Const(c), _) if *c == 1.0 => other,
            (_, Expr::Const(c)) if *c == 1.0 => self,
            _ => Expr::Mul(Box::new(self), Box::new(other)),
        }
    }

    /// Negation with constant folding.
    pub fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized rendering; `parse_family` accepts this output, so
    /// serialization round-trips through the family grammar.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({})", c)
                } else {
                    write!(f, "{}", c)
                }
            }
            Expr::Param(name) => write!(f, "{}", name),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Neg(a) => write!(f, "(0 - {})", a),
            Expr::Pow(a, k) => write!(f, "({} ^ {})", a, k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu() -> ParamPoint {
        ParamPoint::new(&["a", "p", "q"], &[0.5, -2.0, 2.0]).unwrap()
    }

    #[test]
    fn eval_basic_arithmetic() {
        let e = Expr::Sub(
            Box::new(Expr::Param("q".into())),
            Box::new(Expr::Const(1.0)),
        );
        assert_eq!(e.eval(&mu()).unwrap(), 1.0);
    }

    #[test]
    fn eval_power_and_negation() {
        // -(p^2) = -4
        let e = Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Param("p".into())), 2)));
        assert_eq!(e.eval(&mu()).unwrap(), -4.0);
    }

    #[test]
    fn unknown_parameter_is_an_error() {
        let e = Expr::Param("zeta".into());
        assert!(matches!(
            e.eval(&mu()),
            Err(FamilyError::UnknownParameter { .. })
        ));
    }

    #[test]
    fn display_round_trips_through_eval() {
        let e = Expr::Mul(
            Box::new(Expr::Add(
                Box::new(Expr::Param("a".into())),
                Box::new(Expr::Const(2.0)),
            )),
            Box::new(Expr::Neg(Box::new(Expr::Param("q".into())))),
        );
        // (a + 2) * (-q) = 2.5 * -2 = -5
        assert_eq!(e.eval(&mu()).unwrap(), -5.0);
        let printed = format!("{}", e);
        assert!(printed.contains("a + 2"));
    }
}
