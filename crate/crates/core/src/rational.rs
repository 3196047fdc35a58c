//! Exact rational helpers and "p/q" string (de)serialization.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parses "p/q", "p" or "-p/q". Decimals and floats are rejected.
pub fn parse_q(s: &str) -> Result<Q, Error> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not an exact rational: {s:?}"));
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let ok = |x: &str| {
        let body = x.strip_prefix(['-', '+']).unwrap_or(x);
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    if !ok(n) || !ok(d) || d.starts_with(['-', '+']) {
        return Err(bad());
    }
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Q::new(n, d))
}

pub fn fmt_q(x: &Q) -> String {
    x.to_string()
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| if x.is_negative() { f64::MIN } else { f64::MAX })
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().abs().ln();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().unwrap().ln() + (shift as f64) * std::f64::consts::LN_2
}

/// Natural log of |x|, accurate even when x under- or overflows f64.
pub fn ln_abs(x: &Q) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

pub fn min_q<'a>(a: &'a Q, b: &'a Q) -> &'a Q {
    if a <= b { a } else { b }
}

pub fn max_q<'a>(a: &'a Q, b: &'a Q) -> &'a Q {
    if a >= b { a } else { b }
}

pub fn pow(x: &Q, e: u32) -> Q {
    num_traits::pow(x.clone(), e as usize)
}

/// serde adapter: a single rational as a "p/q" string.
pub mod qstr {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let raw = String::deserialize(d)?;
        parse_q(&raw).map_err(serde::de::Error::custom)
    }
}

/// serde adapter: a list of rationals.
pub mod qvec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// serde adapter: a closed pair ["p/q","p/q"].
pub mod qpair {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &(Q, Q), s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&[fmt_q(&x.0), fmt_q(&x.1)], s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(Q, Q), D::Error> {
        let [a, b] = <[String; 2]>::deserialize(d)?;
        let a = parse_q(&a).map_err(serde::de::Error::custom)?;
        let b = parse_q(&b).map_err(serde::de::Error::custom)?;
        Ok((a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("2/6").unwrap(), q(1, 3));
        assert_eq!(parse_q("-3").unwrap(), qi(-3));
        assert_eq!(fmt_q(&q(4, 2)), "2");
        assert_eq!(fmt_q(&q(-1, 3)), "-1/3");
        assert!(parse_q("0.5").is_err());
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("1/-2").is_err());
        assert!(parse_q("").is_err());
    }

    #[test]
    fn logs_of_tiny_values() {
        let tiny = pow(&q(1, 3), 2000);
        let expect = -2000.0 * 3f64.ln();
        assert!((ln_abs(&tiny) - expect).abs() < 1e-9 * expect.abs());
        assert!((ln_abs(&q(1, 4)) - 0.25f64.ln()).abs() < 1e-15);
    }
}
