//! Expansion coefficients `C_{mu,l}`, `A_{mu,nu}(s)` and the polynomials `R_nu`, `P_nu`,
//! `V_mu`, `Q_nu` attached to a degree-two functional-equation datum.
//!
//! Everything is exact over Q(i): the data have rational `lambda_j` and Gaussian-rational
//! `mu_j`, so `theta_F` is rational and no rounding enters.

use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};

use crate::bernoulli::{bernoulli_polynomial, binomial_row};
use crate::error::{invalid, Result};
use crate::fe_core::FunctionalEquationDatum;
use crate::number::GaussRational;
use crate::poly::{ComplexPolynomial, RationalPolynomial};

/// Constant `A` used when a remainder bound of the form `A^{|s|} (|s|^{|sigma|} + 1)` has to be
/// turned into a number. The estimates only assert that some `A` exists.
pub const REMAINDER_CONSTANT_A: f64 = 4.0;

fn factorial(n: usize) -> Integer {
    Integer::from(Integer::factorial(n as u32))
}

/// `C(-mu, k) = (-1)^k C(mu + k - 1, k)`
fn binom_neg(mu: usize, k: usize) -> Integer {
    let b = Integer::from(Integer::binomial_u(((mu + k).saturating_sub(1)) as u32, k as u32));
    if k.is_multiple_of(2) {
        b
    } else {
        -b
    }
}

/// `C_{mu,l} = (-1)^{l-mu} (l-1)! e_{mu-1}(1, 1/2, ..., 1/(l-1))`.
pub fn c_coeff(mu: usize, ell: usize) -> Result<Rational> {
    if mu < 1 || ell < mu {
        return Err(invalid(format!("C_{{mu,l}} needs 1 <= mu <= l, got mu = {mu}, l = {ell}")));
    }
    // e[j] = elementary symmetric sum of degree j over 1/1..1/(l-1)
    let mut e = vec![Rational::new(); mu];
    e[0] = Rational::from(1);
    for k in 1..ell {
        let inv = Rational::from((1, k as u64));
        for j in (1..mu).rev() {
            let t = Rational::from(&e[j - 1] * &inv);
            e[j] += t;
        }
    }
    let sign = if (ell - mu).is_multiple_of(2) { 1 } else { -1 };
    Ok(Rational::from(&e[mu - 1] * factorial(ell - 1)) * sign)
}

/// `A_{mu,nu}(s) = sum_{k=0}^{nu-mu} C(-mu,k) C_{mu+k,nu} (2s - 1 + i theta_F)^k`.
pub fn a_coeff(datum: &FunctionalEquationDatum, mu: usize, nu: usize) -> Result<ComplexPolynomial> {
    if mu < 1 || nu < mu {
        return Err(invalid(format!("A_{{mu,nu}} needs 1 <= mu <= nu, got mu = {mu}, nu = {nu}")));
    }
    let eta = eta_poly(datum);
    let mut pw = ComplexPolynomial::one();
    let mut acc = ComplexPolynomial::zero();
    for k in 0..=nu - mu {
        let c = c_coeff(mu + k, nu)? * binom_neg(mu, k);
        acc = &acc + &pw.scale(&GaussRational::real(c));
        pw = &pw * &eta;
    }
    Ok(acc)
}

/// `2s - 1 + i theta_F`
pub fn eta_poly(datum: &FunctionalEquationDatum) -> ComplexPolynomial {
    ComplexPolynomial::linear(GaussRational::new(-1, datum.theta()), GaussRational::real(2))
}

fn bernoulli_at(n: usize, arg: &ComplexPolynomial) -> ComplexPolynomial {
    bernoulli_polynomial(n).to_complex_poly().compose(arg)
}

/// `B_{nu+1}(1 - 2s - i theta_F)`
fn shifted_bernoulli(datum: &FunctionalEquationDatum, nu: usize) -> ComplexPolynomial {
    let arg = ComplexPolynomial::linear(
        GaussRational::new(1, -datum.theta()),
        GaussRational::real(-2),
    );
    bernoulli_at(nu + 1, &arg)
}

fn bernoulli_at_one(n: usize) -> GaussRational {
    GaussRational::real(bernoulli_polynomial(n).eval(&Rational::from(1)))
}

/// `R_nu(s)` through the H-invariants.
pub fn r_poly(datum: &FunctionalEquationDatum, nu: usize) -> ComplexPolynomial {
    let n = nu + 1;
    let s = ComplexPolynomial::monomial(GaussRational::one(), 1);
    let one_minus_s = ComplexPolynomial::linear(GaussRational::one(), GaussRational::real(-1));
    let row = binomial_row(n);
    let sign = if nu.is_multiple_of(2) { 1 } else { -1 };
    let mut sum = ComplexPolynomial::zero();
    for (k, c) in row.iter().enumerate() {
        let h = datum.h_invariant(k);
        let c = GaussRational::real(Rational::from(c));
        let left = s.pow((n - k) as u32).scale(&(&h * &c).scale(&Rational::from(sign)));
        let right = one_minus_s.pow((n - k) as u32).scale(&(&h.conj() * &c));
        sum = &sum + &(&left - &right);
    }
    let half = sum.scale(&GaussRational::real(Rational::from((1, 2))));
    let base = &shifted_bernoulli(datum, nu) + &ComplexPolynomial::constant(bernoulli_at_one(n));
    &base + &half
}

/// `B_{nu+1}(1) - sum_j [B_{nu+1}(lambda_j (1-s) + conj mu_j) + B_{nu+1}(1 - lambda_j s - mu_j)] / lambda_j^nu`
pub fn p_poly_alternative(datum: &FunctionalEquationDatum, nu: usize) -> ComplexPolynomial {
    let n = nu + 1;
    let mut acc = ComplexPolynomial::constant(bernoulli_at_one(n));
    for f in datum.factors() {
        let lam = GaussRational::real(f.lambda().clone());
        let first = ComplexPolynomial::linear(&lam + &f.mu().conj(), -&lam);
        let second = ComplexPolynomial::linear(&GaussRational::one() - f.mu(), -&lam);
        let both = &bernoulli_at(n, &first) + &bernoulli_at(n, &second);
        let scale = Rational::from(f.lambda().pow(-(nu as i32)));
        acc = &acc - &both.scale(&GaussRational::real(scale));
    }
    acc
}

/// `R_nu(s)` from Bernoulli polynomials at the individual Gamma-factor arguments.
pub fn r_poly_alternative(datum: &FunctionalEquationDatum, nu: usize) -> ComplexPolynomial {
    &shifted_bernoulli(datum, nu) + &p_poly_alternative(datum, nu)
}

/// `P_nu(s) = R_nu(s) - B_{nu+1}(1 - 2s - i theta_F)`
pub fn p_poly(datum: &FunctionalEquationDatum, nu: usize) -> ComplexPolynomial {
    &r_poly(datum, nu) - &shifted_bernoulli(datum, nu)
}

/// `V_1..V_max` from `R_1..R_max` (index 0 unused), via powers of `G(x) = sum R_nu x^nu / (nu(nu+1))`.
fn v_from_r(r: &[ComplexPolynomial], max: usize) -> Vec<ComplexPolynomial> {
    let g: Vec<ComplexPolynomial> = (0..=max)
        .map(|nu| {
            if nu == 0 {
                ComplexPolynomial::zero()
            } else {
                let w = Rational::from((1, (nu * (nu + 1)) as u64));
                r[nu].scale(&GaussRational::real(w))
            }
        })
        .collect();
    let mut v = vec![ComplexPolynomial::zero(); max + 1];
    // power[mu] holds the coefficient of x^mu in G^m
    let mut power = g.clone();
    let mut m_fact = Integer::from(1);
    for m in 1..=max {
        m_fact *= m as u32;
        let inv = GaussRational::real(Rational::from((1, m_fact.clone())));
        for mu in m..=max {
            v[mu] = &v[mu] + &power[mu].scale(&inv);
        }
        if m == max {
            break;
        }
        let mut next = vec![ComplexPolynomial::zero(); max + 1];
        for (i, pi) in power.iter().enumerate().skip(m) {
            if pi.is_zero() {
                continue;
            }
            for (j, gj) in g.iter().enumerate().skip(1) {
                if i + j > max {
                    break;
                }
                next[i + j] = &next[i + j] + &(pi * gj);
            }
        }
        power = next;
    }
    for (mu, p) in v.iter_mut().enumerate() {
        if mu % 2 == 1 {
            *p = -&*p;
        }
    }
    v
}

pub fn v_poly(datum: &FunctionalEquationDatum, mu: usize) -> ComplexPolynomial {
    PolynomialSystem::new(datum, mu).v(mu).clone()
}

pub fn q_poly(datum: &FunctionalEquationDatum, nu: usize) -> ComplexPolynomial {
    PolynomialSystem::new(datum, nu).q(nu).clone()
}

/// `R_nu`, `V_nu`, `Q_nu` for `nu <= k_max`, built once and read-only afterwards.
#[derive(Clone, Debug)]
pub struct PolynomialSystem {
    datum: FunctionalEquationDatum,
    k_max: usize,
    r: Vec<ComplexPolynomial>,
    v: Vec<ComplexPolynomial>,
    q: Vec<ComplexPolynomial>,
}

impl PolynomialSystem {
    pub fn new(datum: &FunctionalEquationDatum, k_max: usize) -> Self {
        let mut r = vec![ComplexPolynomial::zero()];
        r.extend((1..=k_max).map(|nu| r_poly(datum, nu)));
        let v = v_from_r(&r, k_max);
        let mut q = vec![ComplexPolynomial::one()];
        for nu in 1..=k_max {
            let mut acc = ComplexPolynomial::zero();
            for (mu, vm) in v.iter().enumerate().take(nu + 1).skip(1) {
                let a = a_coeff(datum, mu, nu).expect("1 <= mu <= nu");
                acc = &acc + &(vm * &a);
            }
            q.push(acc);
        }
        Self { datum: datum.clone(), k_max, r, v, q }
    }

    pub fn datum(&self) -> &FunctionalEquationDatum {
        &self.datum
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Panics unless `1 <= nu <= k_max`.
    pub fn r(&self, nu: usize) -> &ComplexPolynomial {
        assert!((1..=self.k_max).contains(&nu), "R_{nu} outside 1..={}", self.k_max);
        &self.r[nu]
    }

    pub fn v(&self, mu: usize) -> &ComplexPolynomial {
        assert!((1..=self.k_max).contains(&mu), "V_{mu} outside 1..={}", self.k_max);
        &self.v[mu]
    }

    pub fn q(&self, nu: usize) -> &ComplexPolynomial {
        assert!(nu <= self.k_max, "Q_{nu} beyond {}", self.k_max);
        &self.q[nu]
    }

    pub fn qs(&self) -> &[ComplexPolynomial] {
        &self.q
    }
}

/// Does `(s + nu - 1)^m` divide `p` with zero remainder?
pub fn divisible_by_shifted_power(p: &ComplexPolynomial, nu: usize, m: u32) -> bool {
    let lin = ComplexPolynomial::linear(GaussRational::real(nu as i64 - 1), GaussRational::one());
    p.div_rem(&lin.pow(m)).is_some_and(|(_, rem)| rem.is_zero())
}

pub const COEFFICIENT_CSV_HEADER: &str = "family,index,power,re,im";

/// Exact coefficients of `Q_0..Q_K`, `R_1..R_K`, `V_1..V_K`, one row per stored power, with
/// rational entries written as `p/q`.
pub fn write_coefficient_csv(system: &PolynomialSystem, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{COEFFICIENT_CSV_HEADER}")?;
    let k = system.k_max();
    let families: [(&str, Vec<(usize, &ComplexPolynomial)>); 3] = [
        ("Q", (0..=k).map(|nu| (nu, system.q(nu))).collect()),
        ("R", (1..=k).map(|nu| (nu, system.r(nu))).collect()),
        ("V", (1..=k).map(|mu| (mu, system.v(mu))).collect()),
    ];
    for (name, polys) in families {
        for (idx, poly) in polys {
            for (power, c) in poly.coefficients().iter().enumerate() {
                writeln!(out, "{name},{idx},{power},{},{}", c.re, c.im)?;
            }
        }
    }
    Ok(())
}

/// Exact comparison of a measured remainder against a bound, both kept squared.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactRemainder {
    pub error_sq: Rational,
    pub bound_sq: Rational,
}

impl ExactRemainder {
    pub fn holds(&self) -> bool {
        self.error_sq <= self.bound_sq
    }

    pub fn error(&self) -> f64 {
        self.error_sq.to_f64().sqrt()
    }

    pub fn bound(&self) -> f64 {
        self.bound_sq.to_f64().sqrt()
    }

    /// error / bound
    pub fn ratio(&self) -> f64 {
        if self.bound_sq == 0 {
            return f64::INFINITY;
        }
        Rational::from(&self.error_sq / &self.bound_sq).to_f64().sqrt()
    }
}

fn shifted(w: &GaussRational, k: usize) -> GaussRational {
    w - &GaussRational::real(k as i64)
}

/// `(w - a)(w - a - 1)...(w - b)`, empty product 1.
fn falling(w: &GaussRational, a: usize, b: usize) -> GaussRational {
    (a..=b).fold(GaussRational::one(), |acc, k| &acc * &shifted(w, k))
}

fn m_squared(m: usize) -> Rational {
    Rational::from((m * m) as u64)
}

/// Inverse-factorial expansion of `1/w`, truncated at `M`, with its remainder bound;
/// exact in Q(i). Requires `1 <= m + 1 <= M < |w|`.
pub fn check_expansion_1overw(w: &GaussRational, m: usize, big_m: usize) -> Result<ExactRemainder> {
    if m + 1 > big_m {
        return Err(invalid(format!("need m + 1 <= M, got m = {m}, M = {big_m}")));
    }
    if w.norm() <= m_squared(big_m) {
        return Err(invalid(format!("need M < |w|, got M = {big_m}, w = {w}")));
    }
    let inv = |z: &GaussRational| z.inv().ok_or_else(|| invalid(format!("w = {w} hits a pole")));
    let mut sum = GaussRational::zero();
    for ell in m + 1..=big_m {
        let term = Rational::from(factorial(ell - 1)) * if ell % 2 == 0 { 1 } else { -1 };
        sum = &sum + &inv(&falling(w, m + 1, ell))?.scale(&term);
    }
    let lead = Rational::from((1, factorial(m))) * if (m + 1).is_multiple_of(2) { 1 } else { -1 };
    let approx = sum.scale(&lead);
    let err = &inv(w)? - &approx;
    let denom = (w * &falling(w, m + 1, big_m)).norm();
    let num = Rational::from((factorial(big_m), factorial(m)));
    let bound_sq = Rational::from(&num * &num) / denom;
    Ok(ExactRemainder { error_sq: err.norm(), bound_sq })
}

/// `1/w^mu` against `sum_{l=mu}^{M} C_{mu,l} / ((w-1)...(w-l))`, with bound
/// `2^M M! / ((mu-1)! |w(w-1)...(w-M)|)`; exact. Requires `1 <= mu <= M <= |w|/2`.
pub fn check_expansion_1overw_mu(w: &GaussRational, mu: usize, big_m: usize) -> Result<ExactRemainder> {
    if mu < 1 || mu > big_m {
        return Err(invalid(format!("need 1 <= mu <= M, got mu = {mu}, M = {big_m}")));
    }
    if w.norm() < m_squared(2 * big_m) {
        return Err(invalid(format!("need M <= |w|/2, got M = {big_m}, w = {w}")));
    }
    let inv = |z: &GaussRational| z.inv().ok_or_else(|| invalid(format!("w = {w} hits a pole")));
    let mut sum = GaussRational::zero();
    for ell in mu..=big_m {
        sum = &sum + &inv(&falling(w, 1, ell))?.scale(&c_coeff(mu, ell)?);
    }
    let err = &inv(&w.pow(mu as u32))? - &sum;
    let denom = (w * &falling(w, 1, big_m)).norm();
    let num = Rational::from((Integer::from(1) << big_m as u32) * factorial(big_m))
        / Rational::from(factorial(mu - 1));
    Ok(ExactRemainder { error_sq: err.norm(), bound_sq: Rational::from(&num * &num) / denom })
}

/// Measured remainder (exact, then rounded) against a numeric bound.
#[derive(Clone, Debug)]
pub struct NumericRemainder {
    pub error: Float,
    pub bound: Float,
}

impl NumericRemainder {
    pub fn ratio(&self) -> f64 {
        Float::with_val(self.error.prec(), &self.error / &self.bound).to_f64()
    }
}

fn abs_float(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

/// `A^{|s|} (|s|^{|sigma|} + 1) / |w (w-1) ... (w-N)|` with `A` = [`REMAINDER_CONSTANT_A`].
fn displayed_bound(s: &Complex, w: &Complex, n: usize, prec: u32) -> Float {
    let abs_s = abs_float(s);
    let sigma = Float::with_val(prec, s.real().abs_ref());
    let a = Float::with_val(prec, REMAINDER_CONSTANT_A).pow(&abs_s);
    let growth = Float::with_val(prec, (&abs_s).pow(&sigma)) + 1u32;
    let mut denom = abs_float(w);
    for k in 1..=n {
        denom *= abs_float(&Complex::with_val(prec, w - k as u32));
    }
    a * growth / denom
}

/// `1/(w + eta)^mu` against `sum_{nu=mu}^{N} A_{mu,nu}(s) / ((w-1)...(w-nu))`, for rational `s`.
/// The bound is the displayed `A^{|s|}(|s|^{|sigma|}+1) / ((mu-1)! |w(w-1)...(w-N)|)`.
pub fn check_shifted_power_expansion(
    datum: &FunctionalEquationDatum,
    s: &GaussRational,
    w: &GaussRational,
    mu: usize,
    n: usize,
    prec: u32,
) -> Result<NumericRemainder> {
    if mu < 1 || mu > n {
        return Err(invalid(format!("need 1 <= mu <= N, got mu = {mu}, N = {n}")));
    }
    if w.norm() < m_squared(2 * n) {
        return Err(invalid(format!("need |w| >= 2N, got N = {n}, w = {w}")));
    }
    let eta = eta_poly(datum).eval(s);
    let lhs = (w + &eta).pow(mu as u32).inv().ok_or_else(|| invalid("w + eta = 0"))?;
    let mut rhs = GaussRational::zero();
    for nu in mu..=n {
        let a = a_coeff(datum, mu, nu)?.eval(s);
        let d = falling(w, 1, nu).inv().ok_or_else(|| invalid(format!("w = {w} hits a pole")))?;
        rhs = &rhs + &(&a * &d);
    }
    let err = Float::with_val(prec, &(&lhs - &rhs).norm()).sqrt();
    let bound = displayed_bound(&s.to_complex(prec), &w.to_complex(prec), n, prec)
        / Float::with_val(prec, factorial(mu - 1));
    Ok(NumericRemainder { error: err, bound })
}

/// Both sides of the exponential expansion at a numeric point.
#[derive(Clone, Debug)]
pub struct ExpExpansionCheck {
    pub lhs: Complex,
    pub rhs: Complex,
    pub difference: Float,
    /// `A^{|s|}(|s|^{|sigma|}+1) / |w(w-1)...(w-N)|`
    pub bound: Float,
}

/// `exp(sum_{nu=1}^N (-1)^nu R_nu(s) / (nu(nu+1) (w+eta)^nu))` against
/// `sum_{nu=0}^N Q_nu(s) / ((w-1)...(w-nu))`. Requires `|w| >= 4(N + |s| + 1)` and `N <= k_max`.
pub fn check_exp_expansion(
    system: &PolynomialSystem,
    s: &Complex,
    w: &Complex,
    n: usize,
) -> Result<ExpExpansionCheck> {
    let prec = s.prec().0.max(w.prec().0);
    if n > system.k_max() {
        return Err(invalid(format!("N = {n} exceeds the system size {}", system.k_max())));
    }
    let need = Float::with_val(prec, abs_float(s) + (n + 1) as u32) * 4u32;
    if abs_float(w) < need {
        return Err(invalid(format!("|w| too small: need at least {}", need.to_f64())));
    }
    let eta = eta_poly(system.datum()).eval_complex(s);
    let x = Complex::with_val(prec, w + &eta).recip();
    let mut expo = Complex::new(prec);
    let mut xp = Complex::with_val(prec, 1);
    for nu in 1..=n {
        xp *= &x;
        let r = system.r(nu).eval_complex(s);
        let mut term = Complex::with_val(prec, &r * &xp) / ((nu * (nu + 1)) as u32);
        if nu % 2 == 1 {
            term = -term;
        }
        expo += term;
    }
    let lhs = expo.exp();
    let mut rhs = Complex::new(prec);
    let mut fall = Complex::with_val(prec, 1);
    for nu in 0..=n {
        if nu > 0 {
            fall *= Complex::with_val(prec, w - nu as u32);
        }
        rhs += Complex::with_val(prec, system.q(nu).eval_complex(s) / &fall);
    }
    let difference = abs_float(&Complex::with_val(prec, &lhs - &rhs));
    let bound = displayed_bound(s, w, n, prec);
    Ok(ExpExpansionCheck { lhs, rhs, difference, bound })
}

/// Point `scale * (-1 + i)` on the ray `arg w = 3 pi / 4`.
pub fn ray_point(scale: i64) -> GaussRational {
    GaussRational::new(-scale, scale)
}

/// `Phi_N(x) = sum_{m=1}^N x^m/m!` and the bound `(2x)^N / N!`; needs `1 <= N <= 3x/2`.
pub fn phi_bound_check(n: usize, x: &Rational) -> Result<(Rational, Rational)> {
    if n < 1 || n as u64 > Rational::from(x * 3u32) / 2u32 {
        return Err(invalid(format!("need 1 <= N <= 3x/2, got N = {n}, x = {x}")));
    }
    let mut value = Rational::new();
    let mut term = Rational::from(1);
    for m in 1..=n {
        term *= x;
        term /= m as u32;
        value += &term;
    }
    let bound = Rational::from(x * 2u32).pow(n as i32) / Rational::from(factorial(n));
    Ok((value, bound))
}

/// `Psi_M(x) = sum_{mu=1}^M x^{2mu}/(mu!)^2` and the bound `(2x)^{2M}/(M!)^2`; needs `1 <= M <= sqrt(2) x`.
pub fn psi_bound_check(big_m: usize, x: &Rational) -> Result<(Rational, Rational)> {
    if big_m < 1 || *x <= 0 || m_squared(big_m) > Rational::from(x * x) * 2u32 {
        return Err(invalid(format!("need 1 <= M <= sqrt(2) x, got M = {big_m}, x = {x}")));
    }
    let x2 = Rational::from(x * x);
    let mut value = Rational::new();
    let mut term = Rational::from(1);
    for mu in 1..=big_m {
        term *= &x2;
        term /= (mu * mu) as u64;
        value += &term;
    }
    let f = Rational::from(factorial(big_m));
    let bound = Rational::from(x * 2u32).pow(2 * big_m as i32) / Rational::from(&f * &f);
    Ok((value, bound))
}

/// Real-coefficient view of a polynomial, when every coefficient is real.
pub fn real_part_if_real(p: &ComplexPolynomial) -> Option<RationalPolynomial> {
    p.coefficients()
        .iter()
        .all(GaussRational::is_real)
        .then(|| p.map(|c| c.re.clone()))
}
