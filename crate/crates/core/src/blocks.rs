//! The classical theta building blocks and their sparse series shape.
//!
//! Every block is a sum `Σ c_j x^{e_j}` over strictly increasing exponents
//! with small integer coefficients, or (for `χ`) a quotient of two such sums:
//!
//! * `f(-x) = Σ_n (-1)^n x^{n(3n-1)/2}` (pentagonal exponents)
//! * `f(x)  = f(-y)` at `y = -x`, i.e. `(-x;-x)_∞`
//! * `φ(±x) = 1 + 2 Σ_{n≥1} (±1)^n x^{n²}`
//! * `ψ(±x) = Σ_{n≥0} (±1)^{n(n+1)/2} x^{n(n+1)/2}`
//! * `χ(x) = f(x)/f(-x²)`, `χ(-x) = f(-x)/f(-x²)`

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Sign of the argument a block is evaluated at: `+x` or `-x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    FMinus,
    FPlus,
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
    ChiPlus,
    ChiMinus,
}

impl BlockKind {
    pub const ALL: [BlockKind; 8] = [
        BlockKind::FMinus,
        BlockKind::FPlus,
        BlockKind::PhiPlus,
        BlockKind::PhiMinus,
        BlockKind::PsiPlus,
        BlockKind::PsiMinus,
        BlockKind::ChiPlus,
        BlockKind::ChiMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::FMinus => "f_minus",
            BlockKind::FPlus => "f_plus",
            BlockKind::PhiPlus => "phi_plus",
            BlockKind::PhiMinus => "phi_minus",
            BlockKind::PsiPlus => "psi_plus",
            BlockKind::PsiMinus => "psi_minus",
            BlockKind::ChiPlus => "chi_plus",
            BlockKind::ChiMinus => "chi_minus",
        }
    }

    /// The term shape of a block that is a plain sparse sum, `None` for `χ`.
    pub(crate) fn shape(self) -> Option<(Shape, Sign)> {
        match self {
            BlockKind::FMinus => Some((Shape::Pentagonal, Sign::Minus)),
            BlockKind::FPlus => Some((Shape::Pentagonal, Sign::Plus)),
            BlockKind::PhiPlus => Some((Shape::Square, Sign::Plus)),
            BlockKind::PhiMinus => Some((Shape::Square, Sign::Minus)),
            BlockKind::PsiPlus => Some((Shape::Triangular, Sign::Plus)),
            BlockKind::PsiMinus => Some((Shape::Triangular, Sign::Minus)),
            BlockKind::ChiPlus | BlockKind::ChiMinus => None,
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BlockKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown theta block `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Shape {
    Pentagonal,
    Square,
    Triangular,
}

impl Shape {
    /// Largest absolute coefficient, used by the tail bound.
    pub(crate) fn max_coefficient(self) -> u32 {
        match self {
            Shape::Square => 2,
            Shape::Pentagonal | Shape::Triangular => 1,
        }
    }

    pub(crate) fn terms(self, sign: Sign) -> Terms {
        Terms { shape: self, sign, step: 0 }
    }
}

/// Iterator over `(exponent, coefficient)` in strictly increasing exponent order.
#[derive(Clone, Debug)]
pub(crate) struct Terms {
    shape: Shape,
    sign: Sign,
    step: u64,
}

impl Iterator for Terms {
    type Item = (u64, i64);

    fn next(&mut self) -> Option<(u64, i64)> {
        let step = self.step;
        self.step += 1;
        let (exponent, coefficient) = match self.shape {
            Shape::Pentagonal => {
                if step == 0 {
                    (0, 1)
                } else {
                    // steps 1,2 -> n=1 ; 3,4 -> n=2 ; ...
                    let n = step.div_ceil(2);
                    let e = if step % 2 == 1 { n * (3 * n - 1) / 2 } else { n * (3 * n + 1) / 2 };
                    let base = if n.is_multiple_of(2) { 1 } else { -1 };
                    let c = match self.sign {
                        Sign::Minus => base,
                        Sign::Plus => base * parity(e),
                    };
                    (e, c)
                }
            }
            Shape::Square => {
                let n = step;
                let e = n * n;
                let c = if n == 0 { 1 } else { 2 };
                let c = match self.sign {
                    Sign::Plus => c,
                    Sign::Minus => c * parity(n),
                };
                (e, c)
            }
            Shape::Triangular => {
                let n = step;
                let e = n * (n + 1) / 2;
                let c = match self.sign {
                    Sign::Plus => 1,
                    Sign::Minus => parity(e),
                };
                (e, c)
            }
        };
        Some((exponent, coefficient))
    }
}

fn parity(e: u64) -> i64 {
    if e.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first(kind: BlockKind, count: usize) -> Vec<(u64, i64)> {
        let (shape, sign) = kind.shape().unwrap();
        shape.terms(sign).take(count).collect()
    }

    #[test]
    fn pentagonal_minus_matches_euler() {
        assert_eq!(
            first(BlockKind::FMinus, 7),
            vec![(0, 1), (1, -1), (2, -1), (5, 1), (7, 1), (12, -1), (15, -1)]
        );
    }

    #[test]
    fn pentagonal_plus_is_negated_argument() {
        // (-q;-q)_inf = (1+q)(1-q^2)(1+q^3)... = 1 + q - q^2 + ...
        assert_eq!(
            first(BlockKind::FPlus, 7),
            vec![(0, 1), (1, 1), (2, -1), (5, -1), (7, -1), (12, -1), (15, 1)]
        );
    }

    #[test]
    fn squares_and_triangles() {
        assert_eq!(first(BlockKind::PhiPlus, 4), vec![(0, 1), (1, 2), (4, 2), (9, 2)]);
        assert_eq!(first(BlockKind::PhiMinus, 4), vec![(0, 1), (1, -2), (4, 2), (9, -2)]);
        assert_eq!(first(BlockKind::PsiPlus, 5), vec![(0, 1), (1, 1), (3, 1), (6, 1), (10, 1)]);
        assert_eq!(first(BlockKind::PsiMinus, 5), vec![(0, 1), (1, -1), (3, -1), (6, 1), (10, 1)]);
    }

    #[test]
    fn names_round_trip() {
        for k in BlockKind::ALL {
            assert_eq!(k.name().parse::<BlockKind>().unwrap(), k);
        }
        assert!("theta".parse::<BlockKind>().is_err());
    }
}
