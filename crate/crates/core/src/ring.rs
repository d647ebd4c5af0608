use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring elements are stored as exact rationals; the ring decides which
/// rationals are legal and how to reduce them.
pub type Scalar = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoefficientRing {
    Integers,
    Rationals,
    ModP(u64),
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl CoefficientRing {
    pub fn mod_p(p: u64) -> Result<Self> {
        if is_prime(p) {
            Ok(CoefficientRing::ModP(p))
        } else {
            Err(Error::Parse(format!("{p} is not prime")))
        }
    }

    /// Accepts `Z`, `Q`, `Zp:<p>` and `Z2`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "z" | "integers" => Ok(CoefficientRing::Integers),
            "Q" | "q" | "rationals" => Ok(CoefficientRing::Rationals),
            "Z2" | "z2" => Ok(CoefficientRing::ModP(2)),
            other => {
                let rest = other
                    .strip_prefix("Zp:")
                    .or_else(|| other.strip_prefix("zp:"))
                    .ok_or_else(|| Error::Parse(format!("unknown ring {other}")))?;
                let p: u64 = rest.parse().map_err(|_| Error::Parse(format!("bad prime {rest}")))?;
                Self::mod_p(p)
            }
        }
    }

    pub fn is_field(&self) -> bool {
        !matches!(self, CoefficientRing::Integers)
    }

    pub fn require_field(&self) -> Result<()> {
        if self.is_field() {
            Ok(())
        } else {
            Err(Error::NotAField(self.to_string()))
        }
    }

    /// The field used when an integer computation needs division.
    pub fn field_of_fractions(&self) -> Self {
        match self {
            CoefficientRing::Integers => CoefficientRing::Rationals,
            other => *other,
        }
    }

    pub fn normalize(&self, x: Scalar) -> Scalar {
        match self {
            CoefficientRing::Rationals => x,
            CoefficientRing::Integers => {
                debug_assert!(x.is_integer(), "non-integer {x} in an integer ring");
                x
            }
            CoefficientRing::ModP(p) => {
                let p = BigInt::from(*p);
                let num = x.numer().mod_floor(&p);
                let den = x.denom().mod_floor(&p);
                assert!(!den.is_zero(), "denominator divisible by the characteristic");
                let inv = den.modpow(&(&p - 2u32), &p);
                BigRational::from_integer((num * inv).mod_floor(&p))
            }
        }
    }

    pub fn from_i64(&self, v: i64) -> Scalar {
        self.normalize(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn zero(&self) -> Scalar {
        Scalar::zero()
    }

    pub fn one(&self) -> Scalar {
        self.normalize(Scalar::one())
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.normalize(a + b)
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.normalize(a - b)
    }

    pub fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.normalize(a * b)
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        self.normalize(-a)
    }

    pub fn inv(&self, a: &Scalar) -> Scalar {
        assert!(!a.is_zero(), "inverse of zero");
        match self {
            CoefficientRing::Integers => {
                assert!(a.abs().is_one(), "{a} is not a unit in Z");
                a.clone()
            }
            _ => self.normalize(a.recip()),
        }
    }

    /// Lifts an element to a small integer representative: symmetric
    /// residues mod p, the value itself over Z.
    pub fn lift_symmetric(&self, a: &Scalar) -> BigInt {
        match self {
            CoefficientRing::ModP(p) => {
                let r = self.normalize(a.clone()).to_integer();
                let p = BigInt::from(*p);
                if &r * 2 > p {
                    r - p
                } else {
                    r
                }
            }
            _ => {
                debug_assert!(a.is_integer());
                a.to_integer()
            }
        }
    }

    pub fn format_scalar(&self, a: &Scalar) -> String {
        a.to_string()
    }

    pub fn parse_scalar(&self, s: &str) -> Result<Scalar> {
        let s = s.trim();
        let v = if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad scalar {s}")))?;
            let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad scalar {s}")))?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s}")));
            }
            BigRational::new(n, d)
        } else {
            let n: BigInt = s.parse().map_err(|_| Error::Parse(format!("bad scalar {s}")))?;
            BigRational::from_integer(n)
        };
        if *self == CoefficientRing::Integers && !v.is_integer() {
            return Err(Error::Parse(format!("{s} is not an integer")));
        }
        Ok(self.normalize(v))
    }
}

impl fmt::Display for CoefficientRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientRing::Integers => write!(f, "Z"),
            CoefficientRing::Rationals => write!(f, "Q"),
            CoefficientRing::ModP(p) => write!(f, "Zp:{p}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_p_reduces_fractions() {
        let r = CoefficientRing::ModP(5);
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(r.normalize(half), r.from_i64(3));
        assert_eq!(r.from_i64(-1), r.from_i64(4));
        assert_eq!(r.lift_symmetric(&r.from_i64(4)), BigInt::from(-1));
    }

    #[test]
    fn parse_round_trips() {
        for s in ["Z", "Q", "Zp:5", "Zp:2"] {
            assert_eq!(CoefficientRing::parse(s).unwrap().to_string(), s);
        }
        assert!(CoefficientRing::parse("Zp:6").is_err());
        assert_eq!(CoefficientRing::parse("Z2").unwrap(), CoefficientRing::ModP(2));
    }
}
