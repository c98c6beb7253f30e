//! Complex Gamma, Hurwitz zeta, Dirichlet characters with cyclic unit groups, L-functions and
//! Gauss sums, all at a caller-chosen binary precision.

use rug::float::Constant;
use rug::{Complex, Float, Integer, Rational};

use crate::bernoulli::BernoulliTable;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_PRECISION: u32 = 128;

/// Extra bits allowed on top of the requested precision before giving up.
const MAX_EXTRA_BITS: u32 = 4096;

fn abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

fn round_to(z: Complex, prec: u32) -> Complex {
    Complex::with_val(prec, z)
}

/// `e(x) = exp(2 pi i x)` for `x = num/den`, reduced mod 1 before rounding.
pub fn e_fraction(num: i64, den: u64, prec: u32) -> Complex {
    let r = num.rem_euclid(den as i64) as u64;
    let wp = prec + 16;
    let angle = Float::with_val(wp, Constant::Pi) * 2u32 * Float::with_val(wp, r) / Float::with_val(wp, den);
    let (sin, cos) = angle.sin_cos(Float::new(wp));
    Complex::with_val(prec, (cos, sin))
}

fn is_nonpositive_integer(s: &Complex) -> bool {
    s.imag().is_zero() && s.real().is_integer() && *s.real() <= 0
}

/// `log Gamma(z)` for `Re z` large, by the Stirling series; `None` if the series does not
/// reach `2^-wp` within the Bernoulli table.
fn ln_gamma_stirling(z: &Complex, wp: u32) -> Option<Complex> {
    let table = BernoulliTable::shared();
    let half_ln_2pi = Float::with_val(wp, Float::with_val(wp, Constant::Pi) * 2u32).ln() / 2u32;
    let ln_z = Complex::with_val(wp, z.ln_ref());
    let mut acc = Complex::with_val(wp, z - 0.5f64) * &ln_z - z + half_ln_2pi;
    let z_inv = Complex::with_val(wp, z.recip_ref());
    let z_inv2 = Complex::with_val(wp, z_inv.square_ref());
    let mut zp = z_inv;
    let tol = Float::with_val(wp, Float::i_exp(1, -(wp as i32)));
    for k in 1..=table.max_degree() / 2 {
        let b = table.number(2 * k)?;
        let coeff = Float::with_val(wp, b) / ((2 * k * (2 * k - 1)) as u32);
        let term = Complex::with_val(wp, &zp * &coeff);
        let small = abs(&term) < tol;
        acc += term;
        if small {
            return Some(acc);
        }
        zp *= &z_inv2;
    }
    None
}

/// `Gamma(s)` with relative error about `2^-prec`; a pole error at `0, -1, -2, ...`.
pub fn gamma(s: &Complex, prec: u32) -> Result<Complex> {
    if is_nonpositive_integer(s) {
        return Err(Error::Pole { at: s.to_string() });
    }
    let wp = prec + 32;
    let s = Complex::with_val(wp, s);
    if *s.real() < 0.5 {
        // Gamma(s) = pi / (sin(pi s) Gamma(1 - s))
        let pi = Float::with_val(wp, Constant::Pi);
        let one_minus = Complex::with_val(wp, 1 - &s);
        let g = gamma(&one_minus, wp)?;
        let sin = Complex::with_val(wp, &s * &pi).sin();
        return Ok(round_to(Complex::with_val(wp, pi) / (sin * g), prec));
    }
    let mut target = 12 + wp as u64 / 4;
    loop {
        let shift = (target as f64 - s.real().to_f64()).max(0.0).ceil() as u32;
        let shifted = Complex::with_val(wp, &s + shift);
        if let Some(lg) = ln_gamma_stirling(&shifted, wp) {
            let mut prod = Complex::with_val(wp, 1);
            for k in 0..shift {
                prod *= Complex::with_val(wp, &s + k);
            }
            return Ok(round_to(lg.exp() / prod, prec));
        }
        target *= 2;
        if target > 1 << 16 {
            return Err(Error::PrecisionExhausted(format!("Stirling series for Gamma({s})")));
        }
    }
}

/// One Euler-Maclaurin evaluation with cutoff `n`, correction terms summed until they drop below
/// `2^-bits` of the running sum; `None` when the correction series stalls.
fn hurwitz_em(s: &Complex, a: &Rational, n: u32, wp: u32, bits: u32) -> Option<Complex> {
    let table = BernoulliTable::shared();
    let mut sum = Complex::new(wp);
    let minus_s = Complex::with_val(wp, -s);
    for k in 0..n {
        let base = Float::with_val(wp, Rational::from(a + k));
        let ln = base.ln();
        sum += Complex::with_val(wp, &minus_s * &ln).exp();
    }
    let x = Float::with_val(wp, Rational::from(a + n));
    let ln_x = Float::with_val(wp, x.ln_ref());
    let x_pow_ms = Complex::with_val(wp, &minus_s * &ln_x).exp();
    // integral tail and half end point
    let tail = Complex::with_val(wp, &x_pow_ms * &x) / Complex::with_val(wp, s - 1u32);
    sum += tail;
    sum += Complex::with_val(wp, &x_pow_ms / 2u32);
    let tol = Float::with_val(wp, Float::i_exp(1, -(bits as i32))) * abs(&sum).max(&Float::with_val(wp, 1e-300));
    // term_k = B_2k/(2k)! * s(s+1)...(s+2k-2) * x^{-s-2k+1}
    let x_inv = Float::with_val(wp, x.recip_ref());
    let x_inv2 = Float::with_val(wp, x_inv.square_ref());
    let mut rising = Complex::with_val(wp, s);
    let mut xp = Complex::with_val(wp, &x_pow_ms * &x_inv);
    let mut fact = Integer::from(2);
    for k in 1..=table.max_degree() / 2 {
        let b = Float::with_val(wp, table.number(2 * k)?) / Float::with_val(wp, &fact);
        let term = Complex::with_val(wp, &rising * &xp) * b;
        let small = abs(&term) < tol;
        sum += term;
        if small {
            return Some(sum);
        }
        let j = 2 * k as u32;
        rising *= Complex::with_val(wp, s + (j - 1));
        rising *= Complex::with_val(wp, s + j);
        xp *= &x_inv2;
        fact *= (j + 1) * (j + 2);
    }
    None
}

/// Guard bits covering the cancellation in `sum (k+a)^{-s}` when `sigma < 0`.
fn cancellation_bits(s: &Complex, a: &Rational, n: u32) -> u32 {
    let sigma = s.real().to_f64();
    let top = (a.to_f64() + n as f64).log2();
    ((sigma.min(0.0).abs() + 1.0) * top).ceil() as u32 + 32
}

fn hurwitz_at(s: &Complex, a: &Rational, prec: u32, extra: u32) -> Option<Complex> {
    let abs_s = abs(s).to_f64();
    let mut n = (abs_s * 2.0).max(10.0).max(prec as f64 / 6.0).ceil() as u32;
    for _ in 0..8 {
        let bits = prec + cancellation_bits(s, a, n);
        let wp = bits + extra;
        if let Some(v) = hurwitz_em(&Complex::with_val(wp, s), a, n, wp, bits) {
            return Some(v);
        }
        n *= 2;
    }
    None
}

/// `zeta(s, a) = sum_{k>=0} (k + a)^{-s}` for rational `a > 0`, by Euler-Maclaurin summation.
///
/// When `sigma < 1/2` the value is recomputed with 64 more working bits and accepted only if
/// both agree to `prec` bits (relative, or absolute when `|zeta| < 1`); otherwise the working
/// precision keeps growing up to a cap.
pub fn hurwitz_zeta(s: &Complex, a: &Rational, prec: u32) -> Result<Complex> {
    if *a <= 0 {
        return Err(invalid(format!("Hurwitz parameter must be positive, got {a}")));
    }
    if s.imag().is_zero() && *s.real() == 1 {
        return Err(Error::Pole { at: "1".into() });
    }
    let exhausted = || Error::PrecisionExhausted(format!("Hurwitz zeta at s = {s}, a = {a}"));
    if *s.real() >= 0.5 {
        return hurwitz_at(s, a, prec, 0).map(|v| round_to(v, prec)).ok_or_else(exhausted);
    }
    let mut extra = 0;
    while extra <= MAX_EXTRA_BITS {
        let lo = hurwitz_at(s, a, prec, extra).ok_or_else(exhausted)?;
        let hi = hurwitz_at(s, a, prec, extra + 64).ok_or_else(exhausted)?;
        let diff = abs(&Complex::with_val(hi.prec().0, &hi - &lo));
        let scale = abs(&hi).max(&Float::with_val(hi.prec().0, 1)) >> prec as i32;
        if diff <= scale {
            return Ok(round_to(hi, prec));
        }
        extra = if extra == 0 { 64 } else { extra * 2 };
    }
    Err(exhausted())
}

/// `zeta(s) = zeta(s, 1)`
pub fn riemann_zeta(s: &Complex, prec: u32) -> Result<Complex> {
    hurwitz_zeta(s, &Rational::from(1), prec)
}

/// Modular exponentiation on `u64`.
fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    r
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn euler_phi(n: u64) -> u64 {
    prime_factors(n).iter().fold(n, |acc, p| acc / p * (p - 1))
}

/// Smallest generator of `(Z/q)^*`, if the group is cyclic.
fn primitive_root(q: u64) -> Option<u64> {
    if q <= 2 {
        return Some(1);
    }
    let phi = euler_phi(q);
    let ps = prime_factors(phi);
    (2..q).find(|&g| gcd(g, q) == 1 && ps.iter().all(|&p| pow_mod(g, phi / p, q) != 1))
}

/// A Dirichlet character modulo `q` with `(Z/q)^*` cyclic (q = 1, 2, 4, p^k, 2p^k).
///
/// With generator `g` and `a = g^k`, the character of index `j` is `chi(a) = e(j k / phi(q))`;
/// values are kept as exact exponents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletCharacter {
    modulus: u64,
    order: u64,
    index: u64,
    /// discrete logarithm of each residue, `None` for residues sharing a factor with `q`
    dlog: Vec<Option<u64>>,
}

impl DirichletCharacter {
    pub fn new(modulus: u64, index: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(invalid("modulus must be positive"));
        }
        let g = primitive_root(modulus)
            .ok_or_else(|| invalid(format!("(Z/{modulus})^* is not cyclic")))?;
        let order = euler_phi(modulus);
        let mut dlog = vec![None; modulus as usize];
        let mut x = 1 % modulus;
        for k in 0..order {
            dlog[x as usize] = Some(k);
            x = x * g % modulus;
        }
        Ok(Self { modulus, order, index: index % order, dlog })
    }

    pub fn principal(modulus: u64) -> Result<Self> {
        Self::new(modulus, 0)
    }

    /// All `phi(q)` characters, principal first.
    pub fn all(modulus: u64) -> Result<Vec<Self>> {
        let first = Self::new(modulus, 0)?;
        Ok((0..first.order).map(|j| Self { index: j, ..first.clone() }).collect())
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `phi(q)`
    pub fn group_order(&self) -> u64 {
        self.order
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn is_principal(&self) -> bool {
        self.index == 0
    }

    pub fn conj(&self) -> Self {
        Self { index: (self.order - self.index) % self.order, ..self.clone() }
    }

    /// `chi(a) = e(k / order())` as `Some(k)`, `None` when `gcd(a, q) > 1`.
    pub fn exponent(&self, a: i64) -> Option<u64> {
        let r = a.rem_euclid(self.modulus as i64) as usize;
        self.dlog[r].map(|k| (k * self.index) % self.order)
    }

    pub fn value(&self, a: i64, prec: u32) -> Complex {
        match self.exponent(a) {
            Some(k) => e_fraction(k as i64, self.order, prec),
            None => Complex::new(prec),
        }
    }

    /// Real-valued characters take only the values 0 and +-1.
    pub fn is_real(&self) -> bool {
        (2 * self.index).is_multiple_of(self.order)
    }
}

/// `L(s, chi) = q^{-s} sum_{a=1}^{q} chi(a) zeta(s, a/q)`.
pub fn dirichlet_l(s: &Complex, chi: &DirichletCharacter, prec: u32) -> Result<Complex> {
    if chi.is_principal() && s.imag().is_zero() && *s.real() == 1 {
        return Err(Error::Pole { at: "1".into() });
    }
    let q = chi.modulus();
    let wp = prec + 16;
    let mut acc = Complex::new(wp);
    for a in 1..=q {
        if chi.exponent(a as i64).is_none() {
            continue;
        }
        let z = hurwitz_zeta(s, &Rational::from((a, q)), wp)?;
        acc += z * chi.value(a as i64, wp);
    }
    let ln_q = Float::with_val(wp, q).ln();
    let scale = Complex::with_val(wp, -Complex::with_val(wp, s) * ln_q).exp();
    Ok(round_to(acc * scale, prec))
}

/// `tau(chi) = sum_{a mod q} chi(a) e(a/q)`.
pub fn gauss_sum(chi: &DirichletCharacter, prec: u32) -> Complex {
    let q = chi.modulus();
    let mut acc = Complex::new(prec + 16);
    for a in 0..q {
        if let Some(k) = chi.exponent(a as i64) {
            // e(k/order + a/q) in one rounding
            let den = chi.group_order() * q;
            let num = k * q + a * chi.group_order();
            acc += e_fraction(num as i64, den, prec + 16);
        }
    }
    round_to(acc, prec)
}
