//! Exact scalars: Gaussian rationals, reduced fractions used as twist keys,
//! and positive reals of the form `pi^e * prod p^r` with rational exponents.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};

use crate::error::{invalid, Result};

/// Parses `"3"`, `"-2/5"`, `"0.125"` or `"1.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return Err(invalid("empty rational"));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d == 0 {
            return Err(invalid(format!("zero denominator in {t:?}")));
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..]
                .parse()
                .map_err(|_| invalid(format!("bad exponent in {t:?}")))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(invalid(format!("not a number: {t:?}")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(invalid(format!("not a number: {t:?}")));
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer = Integer::from_str(if all.is_empty() { "0" } else { &all })
        .map_err(|_| invalid(format!("not a number: {t:?}")))?;
    let scale = exponent - frac_part.len() as i32;
    let ten = Integer::from(10);
    let mut r = Rational::from(numer);
    if scale >= 0 {
        r *= ten.pow(scale as u32);
    } else {
        r /= ten.pow((-scale) as u32);
    }
    if negative {
        r = -r;
    }
    Ok(r)
}

/// Exact element of Q(i).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GaussRational {
    pub re: Rational,
    pub im: Rational,
}

impl GaussRational {
    pub fn new(re: impl Into<Rational>, im: impl Into<Rational>) -> Self {
        Self { re: re.into(), im: im.into() }
    }

    pub fn real(re: impl Into<Rational>) -> Self {
        Self { re: re.into(), im: Rational::new() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::real(1)
    }

    pub fn i() -> Self {
        Self::new(0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn is_real(&self) -> bool {
        self.im == 0
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: Rational::from(-&self.im) }
    }

    /// |z|^2, exact.
    pub fn norm(&self) -> Rational {
        Rational::from(&self.re * &self.re) + Rational::from(&self.im * &self.im)
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self { re: Rational::from(&self.re * k), im: Rational::from(&self.im * k) }
    }

    pub fn inv(&self) -> Option<Self> {
        let n = self.norm();
        if n == 0 {
            return None;
        }
        Some(Self {
            re: Rational::from(&self.re / &n),
            im: Rational::from(-&self.im) / n,
        })
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn to_complex(&self, prec: u32) -> Complex {
        Complex::with_val(prec, (&self.re, &self.im))
    }

    /// Parses `"re,im"` (each a rational or decimal) or a bare real.
    pub fn parse(text: &str) -> Result<Self> {
        match text.split_once(',') {
            Some((re, im)) => Ok(Self::new(parse_rational(re)?, parse_rational(im)?)),
            None => Ok(Self::real(parse_rational(text)?)),
        }
    }
}

impl From<Rational> for GaussRational {
    fn from(r: Rational) -> Self {
        Self::real(r)
    }
}

impl From<i64> for GaussRational {
    fn from(v: i64) -> Self {
        Self::real(v)
    }
}

impl Add for &GaussRational {
    type Output = GaussRational;
    fn add(self, o: &GaussRational) -> GaussRational {
        GaussRational {
            re: Rational::from(&self.re + &o.re),
            im: Rational::from(&self.im + &o.im),
        }
    }
}

impl Sub for &GaussRational {
    type Output = GaussRational;
    fn sub(self, o: &GaussRational) -> GaussRational {
        GaussRational {
            re: Rational::from(&self.re - &o.re),
            im: Rational::from(&self.im - &o.im),
        }
    }
}

impl Mul for &GaussRational {
    type Output = GaussRational;
    fn mul(self, o: &GaussRational) -> GaussRational {
        let rr = Rational::from(&self.re * &o.re);
        let ii = Rational::from(&self.im * &o.im);
        let ri = Rational::from(&self.re * &o.im);
        let ir = Rational::from(&self.im * &o.re);
        GaussRational { re: rr - ii, im: ri + ir }
    }
}

impl Neg for &GaussRational {
    type Output = GaussRational;
    fn neg(self) -> GaussRational {
        GaussRational { re: Rational::from(-&self.re), im: Rational::from(-&self.im) }
    }
}

impl fmt::Display for GaussRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re == 0, self.im == 0) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => {
                if self.im < 0 {
                    write!(f, "({}-{}i)", self.re, Rational::from(-&self.im))
                } else {
                    write!(f, "({}+{}i)", self.re, self.im)
                }
            }
        }
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A reduced fraction `num/den` with `den >= 1`; the key type for linear twists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fraction {
    num: i64,
    den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(invalid("fraction with zero denominator"));
        }
        let sign = if (num < 0) != (den < 0) && num != 0 { -1 } else { 1 };
        let (n, d) = (num.unsigned_abs(), den.unsigned_abs());
        let g = gcd_u64(n, d).max(1);
        Ok(Self { num: sign * (n / g) as i64, den: d / g })
    }

    pub fn integer(n: i64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    /// Representative in `[0, 1)`; `e(-n alpha)` depends only on this.
    pub fn reduce_mod_one(&self) -> Self {
        let d = self.den as i64;
        Self { num: self.num.rem_euclid(d), den: self.den }
    }

    pub fn recip(&self) -> Result<Self> {
        Self::new(self.den as i64, self.num)
    }

    pub fn to_rational(&self) -> Rational {
        Rational::from((self.num, self.den))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let (n, d) = t.split_once('/').unwrap_or((t, "1"));
        let n: i64 = n.trim().parse().map_err(|_| invalid(format!("bad fraction {t:?}")))?;
        let d: i64 = d.trim().parse().map_err(|_| invalid(format!("bad fraction {t:?}")))?;
        Self::new(n, d)
    }
}

impl Neg for Fraction {
    type Output = Fraction;
    fn neg(self) -> Fraction {
        Fraction { num: -self.num, den: self.den }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Positive real `pi^pi_exp * prod base^exp`, bases positive integers
/// (primes after trial division, otherwise an unsplit cofactor).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PowerProduct {
    pi_exp: Rational,
    bases: BTreeMap<Integer, Rational>,
}

const TRIAL_LIMIT: u32 = 100_000;

fn factor_into(n: &Integer, exp: &Rational, out: &mut BTreeMap<Integer, Rational>) {
    let mut n = n.clone();
    let mut p: u32 = 2;
    while p <= TRIAL_LIMIT && n > 1 {
        if Integer::from(p) * Integer::from(p) > n {
            break;
        }
        let mut k = 0u32;
        while n.is_divisible_u(p) {
            n.div_exact_u_mut(p);
            k += 1;
        }
        if k > 0 {
            let e = out.entry(Integer::from(p)).or_default();
            *e += Rational::from(exp * k);
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        let e = out.entry(n).or_default();
        *e += exp;
    }
}

impl PowerProduct {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn pi_power(e: Rational) -> Self {
        Self { pi_exp: e, bases: BTreeMap::new() }
    }

    pub fn from_rational(r: &Rational) -> Result<Self> {
        if *r <= 0 {
            return Err(invalid(format!("power product needs a positive value, got {r}")));
        }
        let mut bases = BTreeMap::new();
        factor_into(r.numer(), &Rational::from(1), &mut bases);
        factor_into(r.denom(), &Rational::from(-1), &mut bases);
        Ok(Self { pi_exp: Rational::new(), bases }.normalized())
    }

    /// `base^exp` for a positive rational base and rational exponent.
    pub fn rational_power(base: &Rational, exp: &Rational) -> Result<Self> {
        Ok(Self::from_rational(base)?.pow(exp))
    }

    /// Parses `"pi^<rational>"`, `"pi"` or a positive decimal/rational.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("pi") {
            let rest = rest.trim();
            if rest.is_empty() {
                return Ok(Self::pi_power(Rational::from(1)));
            }
            let exp = rest
                .strip_prefix('^')
                .ok_or_else(|| invalid(format!("expected pi^<rational>, got {t:?}")))?;
            let exp = exp.trim().trim_start_matches('(').trim_end_matches(')');
            return Ok(Self::pi_power(parse_rational(exp)?));
        }
        Self::from_rational(&parse_rational(t)?)
    }

    fn normalized(mut self) -> Self {
        self.bases.retain(|_, e| *e != 0);
        self
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.pi_exp += &other.pi_exp;
        for (b, e) in &other.bases {
            *out.bases.entry(b.clone()).or_default() += e;
        }
        out.normalized()
    }

    pub fn pow(&self, k: &Rational) -> Self {
        let bases = self
            .bases
            .iter()
            .map(|(b, e)| (b.clone(), Rational::from(e * k)))
            .collect();
        Self { pi_exp: Rational::from(&self.pi_exp * k), bases }.normalized()
    }

    pub fn is_one(&self) -> bool {
        self.pi_exp == 0 && self.bases.is_empty()
    }

    pub fn pi_exponent(&self) -> &Rational {
        &self.pi_exp
    }

    /// The exact rational value when there is no pi part and all exponents are integers.
    pub fn to_rational(&self) -> Option<Rational> {
        if self.pi_exp != 0 {
            return None;
        }
        let mut acc = Rational::from(1);
        for (b, e) in &self.bases {
            if *e.denom() != 1 {
                return None;
            }
            let k = e.numer().to_i32()?;
            let power = Rational::from(b.clone()).pow(k);
            acc *= power;
        }
        Some(acc)
    }

    pub fn to_float(&self, prec: u32) -> Float {
        let wp = prec + 32;
        let mut log = Float::with_val(wp, Constant::Pi).ln() * Float::with_val(wp, &self.pi_exp);
        for (b, e) in &self.bases {
            log += Float::with_val(wp, b).ln() * Float::with_val(wp, e);
        }
        Float::with_val(prec, log.exp())
    }
}

impl fmt::Display for PowerProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.to_rational() {
            return write!(f, "{r}");
        }
        let mut parts = Vec::new();
        if self.pi_exp != 0 {
            parts.push(format!("pi^({})", self.pi_exp));
        }
        for (b, e) in &self.bases {
            parts.push(if *e == 1 { format!("{b}") } else { format!("{b}^({e})") });
        }
        write!(f, "{}", parts.join("*"))
    }
}
