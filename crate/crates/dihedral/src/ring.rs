//! Exact coefficient rings: the rationals, the integers, and prime fields.
//!
//! Every scalar carries its ring so that mixed-ring arithmetic is caught at
//! the matrix boundary instead of producing silent nonsense. Arithmetic is
//! exact in all three rings; no floating point appears anywhere in the crate.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::LinalgError;

/// The supported exact coefficient rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RingSpec {
    /// The field of rational numbers.
    Rationals,
    /// The ring of integers.
    Integers,
    /// The field with `p` elements, `p` prime.
    PrimeField(u64),
}

impl RingSpec {
    /// 0 for the rationals and the integers, `p` for a prime field.
    pub fn characteristic(self) -> u64 {
        match self {
            RingSpec::Rationals | RingSpec::Integers => 0,
            RingSpec::PrimeField(p) => p,
        }
    }

    pub fn is_field(self) -> bool {
        !matches!(self, RingSpec::Integers)
    }

    /// Check the prime-field invariant.
    pub fn validate(self) -> Result<(), LinalgError> {
        if let RingSpec::PrimeField(p) = self {
            if !is_prime(p) {
                return Err(LinalgError::NotPrime(p));
            }
        }
        Ok(())
    }

    pub fn zero(self) -> Scalar {
        Scalar::from_int(self, 0)
    }

    pub fn one(self) -> Scalar {
        Scalar::from_int(self, 1)
    }

    /// The image of `v` in this ring.
    pub fn from_i64(self, v: i64) -> Scalar {
        Scalar::from_int(self, v)
    }

    /// Interpret an exact rational as an element of this ring.
    ///
    /// Fails when the value is not representable: a true fraction in the
    /// integers, or a denominator divisible by `p` in a prime field.
    pub fn from_rational(self, q: &BigRational) -> Result<Scalar, LinalgError> {
        match self {
            RingSpec::Rationals => Ok(Scalar {
                ring: self,
                value: Value::Rat(q.clone()),
            }),
            RingSpec::Integers => {
                if q.denom().is_one() {
                    Ok(Scalar {
                        ring: self,
                        value: Value::Int(q.numer().clone()),
                    })
                } else {
                    Err(LinalgError::RingMismatch(format!(
                        "{q} is not an integer"
                    )))
                }
            }
            RingSpec::PrimeField(p) => {
                let num = reduce_mod(q.numer(), p);
                let den = reduce_mod(q.denom(), p);
                if den == 0 {
                    return Err(LinalgError::RingMismatch(format!(
                        "denominator of {q} vanishes mod {p}"
                    )));
                }
                let inv = mod_inverse(den, p);
                Ok(Scalar {
                    ring: self,
                    value: Value::Mod(mul_mod(num, inv, p)),
                })
            }
        }
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingSpec::Rationals => write!(f, "Q"),
            RingSpec::Integers => write!(f, "Z"),
            RingSpec::PrimeField(p) => write!(f, "F{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Value {
    Rat(BigRational),
    Int(BigInt),
    Mod(u64),
}

/// An exact scalar in one of the supported rings.
///
/// Rationals are kept in lowest terms (the representation canonicalizes on
/// construction), integers are arbitrary precision, and prime-field elements
/// are canonical residues in `[0, p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    ring: RingSpec,
    value: Value,
}

impl Scalar {
    pub fn from_int(ring: RingSpec, v: i64) -> Scalar {
        let value = match ring {
            RingSpec::Rationals => Value::Rat(BigRational::from_integer(BigInt::from(v))),
            RingSpec::Integers => Value::Int(BigInt::from(v)),
            RingSpec::PrimeField(p) => Value::Mod(reduce_mod(&BigInt::from(v), p)),
        };
        Scalar { ring, value }
    }

    pub fn from_bigint(ring: RingSpec, v: &BigInt) -> Scalar {
        let value = match ring {
            RingSpec::Rationals => Value::Rat(BigRational::from_integer(v.clone())),
            RingSpec::Integers => Value::Int(v.clone()),
            RingSpec::PrimeField(p) => Value::Mod(reduce_mod(v, p)),
        };
        Scalar { ring, value }
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn is_zero(&self) -> bool {
        match &self.value {
            Value::Rat(q) => q.is_zero(),
            Value::Int(n) => n.is_zero(),
            Value::Mod(r) => *r == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match &self.value {
            Value::Rat(q) => q.is_one(),
            Value::Int(n) => n.is_one(),
            Value::Mod(r) => *r == 1,
        }
    }

    /// The underlying integer, when the scalar lives in the integers.
    pub fn as_bigint(&self) -> Option<&BigInt> {
        match &self.value {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    /// The underlying rational, when the scalar lives in the rationals.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match &self.value {
            Value::Rat(q) => Some(q),
            _ => None,
        }
    }

    fn assert_same_ring(&self, other: &Scalar) {
        assert_eq!(
            self.ring, other.ring,
            "scalar arithmetic across different rings"
        );
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        self.assert_same_ring(other);
        let value = match (&self.value, &other.value) {
            (Value::Rat(a), Value::Rat(b)) => Value::Rat(a + b),
            (Value::Int(a), Value::Int(b)) => Value::Int(a + b),
            (Value::Mod(a), Value::Mod(b)) => {
                let p = self.ring.characteristic();
                Value::Mod(add_mod(*a, *b, p))
            }
            _ => unreachable!(),
        };
        Scalar {
            ring: self.ring,
            value,
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        self.assert_same_ring(other);
        let value = match (&self.value, &other.value) {
            (Value::Rat(a), Value::Rat(b)) => Value::Rat(a * b),
            (Value::Int(a), Value::Int(b)) => Value::Int(a * b),
            (Value::Mod(a), Value::Mod(b)) => {
                let p = self.ring.characteristic();
                Value::Mod(mul_mod(*a, *b, p))
            }
            _ => unreachable!(),
        };
        Scalar {
            ring: self.ring,
            value,
        }
    }

    pub fn neg(&self) -> Scalar {
        let value = match &self.value {
            Value::Rat(a) => Value::Rat(-a),
            Value::Int(a) => Value::Int(-a),
            Value::Mod(a) => {
                let p = self.ring.characteristic();
                Value::Mod(if *a == 0 { 0 } else { p - *a })
            }
        };
        Scalar {
            ring: self.ring,
            value,
        }
    }

    /// Multiplicative inverse; `None` for zero or for a non-unit integer.
    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            return None;
        }
        let value = match &self.value {
            Value::Rat(a) => Value::Rat(a.recip()),
            Value::Int(a) => {
                if a.is_one() || (-a).is_one() {
                    Value::Int(a.clone())
                } else {
                    return None;
                }
            }
            Value::Mod(a) => Value::Mod(mod_inverse(*a, self.ring.characteristic())),
        };
        Some(Scalar {
            ring: self.ring,
            value,
        })
    }

    /// `self / other` in a field (and for exact integer division by units).
    pub fn div(&self, other: &Scalar) -> Scalar {
        let inv = other.inv().expect("division by a non-unit");
        self.mul(&inv)
    }

    /// The value as an exact rational, defined for all three rings
    /// (a residue lifts to its canonical representative).
    pub fn lift_to_rational(&self) -> BigRational {
        match &self.value {
            Value::Rat(q) => q.clone(),
            Value::Int(n) => BigRational::from_integer(n.clone()),
            Value::Mod(r) => BigRational::from_integer(BigInt::from(*r)),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Value::Rat(q) => {
                if q.denom().is_one() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Value::Int(n) => write!(f, "{n}"),
            Value::Mod(r) => write!(f, "{r}"),
        }
    }
}

fn reduce_mod(v: &BigInt, p: u64) -> u64 {
    let m = BigInt::from(p);
    let r = v.mod_floor(&m);
    let (_, digits) = r.to_u64_digits();
    match digits.as_slice() {
        [] => 0,
        [d] => *d,
        _ => unreachable!("residue exceeds u64"),
    }
}

fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 + b as u128) % p as u128) as u64
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // Extended Euclid on (a, p); p prime and a nonzero mod p.
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (p as i128, a as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    assert_eq!(r, 1, "{a} is not invertible mod {p}");
    ((t % p as i128 + p as i128) % p as i128) as u64
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn characteristic() {
        assert_eq!(RingSpec::Rationals.characteristic(), 0);
        assert_eq!(RingSpec::Integers.characteristic(), 0);
        assert_eq!(RingSpec::PrimeField(7).characteristic(), 7);
    }

    #[test]
    fn prime_validation() {
        assert!(RingSpec::PrimeField(2).validate().is_ok());
        assert!(RingSpec::PrimeField(97).validate().is_ok());
        assert_eq!(
            RingSpec::PrimeField(91).validate(),
            Err(LinalgError::NotPrime(91))
        );
        assert_eq!(
            RingSpec::PrimeField(1).validate(),
            Err(LinalgError::NotPrime(1))
        );
    }

    #[test]
    fn residues_are_canonical() {
        let r = RingSpec::PrimeField(5);
        assert_eq!(r.from_i64(-1), r.from_i64(4));
        assert_eq!(r.from_i64(12), r.from_i64(2));
        assert!(r.from_i64(10).is_zero());
    }

    #[test]
    fn rational_arithmetic_is_exact() {
        let q = RingSpec::Rationals;
        let third = q.from_i64(1).div(&q.from_i64(3));
        let sum = third.add(&third).add(&third);
        assert!(sum.is_one());
    }

    #[test]
    fn field_inverse() {
        let f = RingSpec::PrimeField(13);
        for v in 1..13 {
            let s = f.from_i64(v);
            assert!(s.mul(&s.inv().unwrap()).is_one());
        }
        assert_eq!(f.from_i64(0).inv(), None);
        let z = RingSpec::Integers;
        assert_eq!(z.from_i64(2).inv(), None);
        assert!(z.from_i64(-1).inv().is_some());
    }

    #[test]
    fn rational_into_prime_field() {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let f5 = RingSpec::PrimeField(5).from_rational(&half).unwrap();
        assert_eq!(f5, RingSpec::PrimeField(5).from_i64(3)); // 2 * 3 = 6 = 1 mod 5
        assert!(RingSpec::PrimeField(2).from_rational(&half).is_err());
        assert!(RingSpec::Integers.from_rational(&half).is_err());
    }
}
