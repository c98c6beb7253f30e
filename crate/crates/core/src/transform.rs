//! The transformation formula's main term and the numerical chain built around it: Laurent
//! data of twists at `s = 1`, the Euler-factor endgame, degree bounds and growth certificates.
//!
//! Everything numerical here runs on the `zeta(s)^2` datum, whose twists have a closed form
//! ([`Zeta2Oracle`]); the formulas themselves take any degree-two datum.

use rayon::prelude::*;
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};

use crate::error::{invalid, Error, Result};
use crate::fe_core::FunctionalEquationDatum;
use crate::number::Fraction;
use crate::qpoly::PolynomialSystem;
use crate::report::{Record, Report};
use crate::special::{dirichlet_l, e_fraction, gauss_sum, DirichletCharacter};
use crate::twist::{zeta2_twist_oracle_many, LinearTwist, Zeta2Oracle};

fn abs_f64(z: &Complex) -> f64 {
    Float::with_val(z.prec().0, z.abs_ref()).to_f64()
}

fn fraction_of(r: &Rational) -> Result<Fraction> {
    let n = r.numer().to_i64().ok_or_else(|| invalid(format!("{r} does not fit a fraction key")))?;
    let d = r.denom().to_i64().ok_or_else(|| invalid(format!("{r} does not fit a fraction key")))?;
    Fraction::new(n, d)
}

/// `-i omega^* (sqrt(q_F) alpha)^{2s - 1 + i theta}`
pub fn transformation_prefactor(datum: &FunctionalEquationDatum, s: &Complex, alpha: Fraction, prec: u32) -> Result<Complex> {
    datum.require_degree_two()?;
    if !alpha.is_positive() {
        return Err(invalid(format!("the transformation formula needs alpha > 0, got {alpha}")));
    }
    let wp = prec + 32;
    let omega_star = datum.root_number_star(wp)?;
    let base = datum.conductor().to_float(wp).sqrt() * Float::with_val(wp, &alpha.to_rational());
    let exponent = Complex::with_val(wp, s) * 2u32 - 1u32 + Complex::with_val(wp, (0, &datum.theta()));
    let power = (exponent * base.ln()).exp();
    Ok(Complex::with_val(prec, power * omega_star * Complex::with_val(wp, (0, -1))))
}

/// The summands `nu = 0..=K` of the main term, prefactor included:
/// `-i omega^* (sqrt(q_F) alpha)^{2s-1+i theta} (i q_F alpha / 2 pi)^nu Q_nu(s)
///  conj-F(s + nu + i theta, -1/(q_F alpha))`, where `conjugate` evaluates the twists of the
/// series with conjugated coefficients.
pub fn transformation_terms(
    system: &PolynomialSystem,
    conjugate: &dyn LinearTwist,
    s: &Complex,
    alpha: Fraction,
    k: usize,
    prec: u32,
) -> Result<Vec<Complex>> {
    let datum = system.datum();
    if k > system.k_max() {
        return Err(invalid(format!("K = {k} exceeds the polynomial system's {}", system.k_max())));
    }
    let wp = prec + 8;
    let pre = transformation_prefactor(datum, s, alpha, wp)?;
    let q_f = datum
        .conductor()
        .to_rational()
        .ok_or_else(|| invalid("the conjugate-twist argument needs a rational conductor"))?;
    let arg = fraction_of(&(-Rational::from((&q_f * alpha.to_rational()).recip_ref())))?;
    let pi = Float::with_val(wp, Constant::Pi);
    let step = Complex::with_val(wp, (0, Float::with_val(wp, &q_f * alpha.to_rational()) / (pi * 2u32)));
    let shift = Complex::with_val(wp, (0, &datum.theta()));
    let s_wp = Complex::with_val(wp, s);
    let mut weight = Complex::with_val(wp, 1);
    let mut out = Vec::with_capacity(k + 1);
    for nu in 0..=k {
        let at = Complex::with_val(wp, &s_wp + nu as u32) + &shift;
        let fbar = conjugate.twist(&at, arg, wp)?;
        let q = system.q(nu).eval_complex(&s_wp);
        let term = Complex::with_val(wp, &pre * &weight) * q * fbar;
        out.push(Complex::with_val(prec, term));
        weight *= &step;
    }
    Ok(out)
}

/// Sum of [`transformation_terms`].
pub fn transformation_main_term(
    system: &PolynomialSystem,
    conjugate: &dyn LinearTwist,
    s: &Complex,
    alpha: Fraction,
    k: usize,
    prec: u32,
) -> Result<Complex> {
    let terms = transformation_terms(system, conjugate, s, alpha, k, prec + 8)?;
    let mut acc = Complex::new(prec + 8);
    for t in terms {
        acc += t;
    }
    Ok(Complex::with_val(prec, acc))
}

/// Contour parameters for Laurent extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionSettings {
    /// Primary and secondary circle radii.
    pub radii: [f64; 2],
    pub nodes: usize,
    /// Node doubling on the primary circle stops here with an error.
    pub max_nodes: usize,
    /// Doubling tolerance relative to `max |f|` on the circle, scaled by `r^{-k}`.
    pub doubling_tol: f64,
    pub prec: u32,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self { radii: [0.25, 0.125], nodes: 128, max_nodes: 1024, doubling_tol: 1e-28, prec: 128 }
    }
}

/// `sum_{k=-m}^{K} c_k (s - center)^k` with per-coefficient error estimates.
#[derive(Clone, Debug)]
pub struct LaurentExpansion {
    pub center: Complex,
    /// `-m`
    pub min_order: i32,
    /// `c_{-m}, ..., c_K`
    pub coefficients: Vec<Complex>,
    pub radii: [f64; 2],
    /// Node count finally used on the primary circle.
    pub nodes: usize,
    /// Spread between the two radii, or the last node-doubling change if larger.
    pub errors: Vec<f64>,
}

impl LaurentExpansion {
    pub fn max_order(&self) -> i32 {
        self.min_order + self.coefficients.len() as i32 - 1
    }

    fn index(&self, k: i32) -> usize {
        assert!((self.min_order..=self.max_order()).contains(&k), "c_{k} was not extracted");
        (k - self.min_order) as usize
    }

    pub fn coeff(&self, k: i32) -> &Complex {
        &self.coefficients[self.index(k)]
    }

    pub fn error(&self, k: i32) -> f64 {
        self.errors[self.index(k)]
    }

    /// `(1/2 pi i) \oint f ds` is `c_{-1}`; this is `|\oint f ds|`.
    pub fn contour_integral_abs(&self) -> f64 {
        2.0 * std::f64::consts::PI * abs_f64(self.coeff(-1))
    }
}

/// A vector-valued function evaluated on circles.
pub type VectorFn<'a> = dyn Fn(&Complex) -> Result<Vec<Complex>> + Sync + 'a;

fn node_point(center: &Complex, r: f64, j: usize, n: usize, wp: u32) -> Complex {
    let z = e_fraction(j as i64, n as u64, wp) * Float::with_val(wp, r);
    z + center
}

fn eval_nodes(f: &VectorFn<'_>, center: &Complex, r: f64, n: usize, js: &[usize], wp: u32) -> Result<Vec<Vec<Complex>>> {
    js.par_iter().map(|&j| f(&node_point(center, r, j, n, wp))).collect()
}

/// Trapezoid coefficients `c_k = N^{-1} r^{-k} sum_j f_j e(-k j/N)` for one component.
fn trapezoid(values: &[Complex], r: f64, min_order: i32, max_order: i32, wp: u32) -> Vec<Complex> {
    let n = values.len();
    let roots: Vec<Complex> = (0..n).map(|j| e_fraction(j as i64, n as u64, wp)).collect();
    (min_order..=max_order)
        .map(|k| {
            let mut acc = Complex::new(wp);
            for (j, v) in values.iter().enumerate() {
                let idx = (-(k as i64) * j as i64).rem_euclid(n as i64) as usize;
                acc += Complex::with_val(wp, v * &roots[idx]);
            }
            let scale = Float::with_val(wp, r).pow(-k) / n as u32;
            acc * scale
        })
        .collect()
}

fn max_abs(values: &[Complex]) -> f64 {
    values.iter().map(abs_f64).fold(0.0, f64::max)
}

/// Laurent coefficients `c_{-m}..c_K` of each component of `f` about `center`, by trapezoidal
/// averaging on two circles. On the primary circle the rule is compared with its even-node
/// half and the node count doubles until the two agree.
pub fn laurent_extract_many(
    f: &VectorFn<'_>,
    center: &Complex,
    m: u32,
    k_max: i32,
    settings: &ExtractionSettings,
) -> Result<Vec<LaurentExpansion>> {
    let wp = settings.prec + 32;
    let center = Complex::with_val(wp, center);
    let (min_order, max_order) = (-(m as i32), k_max);
    let [r1, r2] = settings.radii;
    if !(r1 > 0.0 && r2 > 0.0 && r1 != r2) {
        return Err(invalid("extraction needs two distinct positive radii"));
    }
    if settings.nodes < 4 || !settings.nodes.is_power_of_two() {
        return Err(invalid("node count must be a power of two, at least 4"));
    }
    let mut n = settings.nodes;
    let all: Vec<usize> = (0..n).collect();
    // values[j][component]
    let mut values = eval_nodes(f, &center, r1, n, &all, wp)?;
    let width = values.first().map_or(0, Vec::len);
    let column = |vals: &[Vec<Complex>], c: usize| -> Vec<Complex> { vals.iter().map(|v| v[c].clone()).collect() };
    let rule = |vals: &[Vec<Complex>]| -> Vec<Vec<Complex>> {
        (0..width).map(|c| trapezoid(&column(vals, c), r1, min_order, max_order, wp)).collect()
    };
    // the even nodes form the rule with half as many points
    let evens = |vals: &[Vec<Complex>]| -> Vec<Vec<Complex>> { vals.iter().step_by(2).cloned().collect() };
    let mut coarse = rule(&evens(&values));
    let mut current = rule(&values);
    let mut doubling_change = vec![vec![0.0; (max_order - min_order + 1) as usize]; width];
    loop {
        let mut settled = true;
        for c in 0..width {
            let scale = max_abs(&column(&values, c)).max(f64::MIN_POSITIVE);
            for (i, k) in (min_order..=max_order).enumerate() {
                let change = abs_f64(&Complex::with_val(wp, &current[c][i] - &coarse[c][i]));
                doubling_change[c][i] = change;
                if !(change <= settings.doubling_tol * scale * r1.powi(-k)) {
                    settled = false;
                }
            }
        }
        if settled {
            break;
        }
        if 2 * n > settings.max_nodes {
            return Err(Error::Extraction(format!(
                "node doubling did not settle by {} nodes at radius {r1}",
                settings.max_nodes
            )));
        }
        let odd: Vec<usize> = (0..n).map(|j| 2 * j + 1).collect();
        let fresh = eval_nodes(f, &center, r1, 2 * n, &odd, wp)?;
        let mut merged = Vec::with_capacity(2 * n);
        for (even, odd) in values.into_iter().zip(fresh) {
            merged.push(even);
            merged.push(odd);
        }
        values = merged;
        n *= 2;
        coarse = current;
        current = rule(&values);
    }
    let base: Vec<usize> = (0..settings.nodes).collect();
    let second = eval_nodes(f, &center, r2, settings.nodes, &base, wp)?;
    let mut out = Vec::with_capacity(width);
    for (c, primary) in current.into_iter().enumerate() {
        let other = trapezoid(&column(&second, c), r2, min_order, max_order, wp);
        let errors = primary
            .iter()
            .zip(&other)
            .zip(&doubling_change[c])
            .map(|((a, b), d)| abs_f64(&Complex::with_val(wp, a - b)).max(*d))
            .collect();
        out.push(LaurentExpansion {
            center: Complex::with_val(settings.prec, &center),
            min_order,
            coefficients: primary.into_iter().map(|z| Complex::with_val(settings.prec, z)).collect(),
            radii: settings.radii,
            nodes: n,
            errors,
        });
    }
    Ok(out)
}

/// Scalar form of [`laurent_extract_many`].
pub fn laurent_extract(
    f: &(dyn Fn(&Complex) -> Result<Complex> + Sync),
    center: &Complex,
    m: u32,
    k_max: i32,
    settings: &ExtractionSettings,
) -> Result<LaurentExpansion> {
    let wrapped = |s: &Complex| f(s).map(|v| vec![v]);
    Ok(laurent_extract_many(&wrapped, center, m, k_max, settings)?.remove(0))
}

fn require_zeta2(datum: &FunctionalEquationDatum) -> Result<()> {
    if *datum != FunctionalEquationDatum::zeta2() {
        return Err(invalid("this verification runs on the zeta^2 datum only"));
    }
    Ok(())
}

/// Fractions `a/q` with `1 <= a <= q`, `gcd(a, q) = 1`, for one `q` (`q = 1` gives `1/1`).
pub fn reduced_residues(q: u64) -> Vec<Fraction> {
    (1..=q as i64)
        .filter(|&a| Integer::from(a).gcd(&Integer::from(q)) == 1)
        .map(|a| Fraction::new(a, q as i64).expect("q >= 1"))
        .collect()
}

/// Laurent data of `F(s, a/q)` at `s = 1` for every reduced `a/q` with `q <= q_max`, extracted
/// with pole order 3 so that a vanishing `c_{-3}` can be confirmed.
#[derive(Clone, Debug)]
pub struct TwistLaurentTable {
    pub entries: Vec<(Fraction, LaurentExpansion)>,
    pub lambda_f: Complex,
}

impl TwistLaurentTable {
    pub fn extract(datum: &FunctionalEquationDatum, q_max: u64, settings: &ExtractionSettings) -> Result<Self> {
        require_zeta2(datum)?;
        if q_max == 0 {
            return Err(invalid("q_max must be at least 1"));
        }
        let center = Complex::with_val(settings.prec, 1);
        let mut entries = Vec::new();
        for q in 1..=q_max {
            let alphas = reduced_residues(q);
            let prec = settings.prec + 16;
            let f = |s: &Complex| zeta2_twist_oracle_many(s, &alphas, prec);
            let expansions = laurent_extract_many(&f, &center, 3, 1, settings)?;
            entries.extend(alphas.iter().copied().zip(expansions));
        }
        Ok(Self { entries, lambda_f: datum.lambda_f(settings.prec)? })
    }

    pub fn get(&self, alpha: Fraction) -> Option<&LaurentExpansion> {
        self.entries.iter().find(|(a, _)| *a == alpha).map(|(_, e)| e)
    }

    /// `alpha_F = c_{-2}` of the untwisted function.
    pub fn alpha_f(&self) -> &Complex {
        self.entries[0].1.coeff(-2)
    }

    /// `beta_F = c_{-1}/c_{-2}`
    pub fn beta_of(e: &LaurentExpansion) -> Complex {
        Complex::with_val(e.coefficients[0].prec().0, e.coeff(-1) / e.coeff(-2))
    }

    fn by_denominator(&self) -> Vec<(u64, Vec<&(Fraction, LaurentExpansion)>)> {
        let mut out: Vec<(u64, Vec<&(Fraction, LaurentExpansion)>)> = Vec::new();
        for entry in &self.entries {
            match out.iter_mut().find(|(q, _)| *q == entry.0.den()) {
                Some((_, v)) => v.push(entry),
                None => out.push((entry.0.den(), vec![entry])),
            }
        }
        out
    }
}

/// Tolerances for the Laurent laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LawTolerances {
    pub law: f64,
    pub independence: f64,
    pub imaginary: f64,
    pub pole_order: f64,
    pub lambda: f64,
}

impl Default for LawTolerances {
    fn default() -> Self {
        Self { law: 1e-8, independence: 1e-10, imaginary: 1e-10, pole_order: 1e-10, lambda: 1e-12 }
    }
}

fn max_pairwise(values: &[Complex]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            worst = worst.max(abs_f64(&Complex::with_val(a.prec().0, a - b)));
        }
    }
    worst
}

/// Leading coefficient `c_{-2}(F(., a/q)) = alpha_F / q`, its independence of `a`, the absence
/// of a third-order pole, and `alpha_F = lambda_F conj(alpha_F)`.
pub fn verify_alpha_law(table: &TwistLaurentTable, tol: &LawTolerances) -> Report {
    let mut rep = Report::new("leading Laurent coefficient of twists at s = 1");
    let alpha_f = table.alpha_f().clone();
    let prec = alpha_f.prec().0;
    rep.push(Record::deviation(
        "alpha_F = 1",
        "leading coefficient of zeta(s)^2 at its double pole",
        abs_f64(&Complex::with_val(prec, &alpha_f - 1u32)),
        tol.law,
    ));
    let chain = Complex::with_val(prec, &table.lambda_f * Complex::with_val(prec, alpha_f.conj_ref()));
    rep.push(Record::deviation(
        "alpha_F = lambda_F conj(alpha_F)",
        "reality chain linking alpha_F and the shifted root number",
        abs_f64(&Complex::with_val(prec, &alpha_f - &chain)),
        tol.lambda,
    ));
    for (q, group) in table.by_denominator() {
        for (alpha, e) in &group {
            let expected = Complex::with_val(prec, &alpha_f / q as u32);
            rep.push(Record::deviation(
                format!("c_-2 at a/q = {alpha}"),
                "alpha(a/q) = alpha_F / q",
                abs_f64(&Complex::with_val(prec, e.coeff(-2) - &expected)),
                tol.law,
            ));
            rep.push(Record::deviation(
                format!("c_-3 at a/q = {alpha}"),
                "pole order at s = 1 is at most two",
                abs_f64(e.coeff(-3)),
                tol.pole_order,
            ));
        }
        if group.len() > 1 {
            let leading: Vec<Complex> = group.iter().map(|(_, e)| e.coeff(-2).clone()).collect();
            rep.push(Record::deviation(
                format!("c_-2 independent of a, q = {q}"),
                "alpha(a/q) does not depend on a",
                max_pairwise(&leading),
                tol.independence,
            ));
        }
    }
    rep
}

/// `beta(a/q) = beta_F - 2 log q` with `beta_F = 2 gamma` real, and independence of `a`.
pub fn verify_beta_law(table: &TwistLaurentTable, tol: &LawTolerances) -> Report {
    let mut rep = Report::new("subleading Laurent coefficient of twists at s = 1");
    let beta_f = TwistLaurentTable::beta_of(&table.entries[0].1);
    let prec = beta_f.prec().0;
    let gamma2 = Float::with_val(prec, Constant::Euler) * 2u32;
    rep.push(Record::deviation(
        "beta_F = 2 gamma",
        "constant term of zeta(s) at s = 1, squared expansion",
        abs_f64(&Complex::with_val(prec, &beta_f - &gamma2)),
        tol.law,
    ));
    rep.push(Record::deviation("Im beta_F", "beta_F is real", beta_f.imag().to_f64().abs(), tol.imaginary));
    for (q, group) in table.by_denominator() {
        let log_q = Float::with_val(prec, q).ln() * 2u32;
        let expected = Complex::with_val(prec, &beta_f - log_q);
        let mut betas = Vec::new();
        for (alpha, e) in &group {
            let b = TwistLaurentTable::beta_of(e);
            rep.push(Record::deviation(
                format!("beta at a/q = {alpha}"),
                "beta(a/q) = beta_F - 2 log q",
                abs_f64(&Complex::with_val(prec, &b - &expected)),
                tol.law,
            ));
            betas.push(b);
        }
        if group.len() > 1 {
            rep.push(Record::deviation(
                format!("beta independent of a, q = {q}"),
                "beta(a/q) does not depend on a",
                max_pairwise(&betas),
                tol.independence,
            ));
        }
    }
    rep
}

/// For every non-principal `chi` mod an odd prime `p`: `F(s, chi)` assembled from additive
/// twists has no pole at `s = 1`, and matches `L(s, chi)^2` on the contour.
pub fn verify_chi_holomorphy(p: u64, settings: &ExtractionSettings, tol: f64) -> Result<Report> {
    if p < 3 || (2..p).take_while(|d| d * d <= p).any(|d| p.is_multiple_of(d)) {
        return Err(invalid(format!("{p} is not an odd prime")));
    }
    let prec = settings.prec + 16;
    let chars: Vec<DirichletCharacter> = DirichletCharacter::all(p)?.into_iter().skip(1).collect();
    let alphas: Vec<Fraction> = (1..p as i64).map(|a| Fraction::new(-a, p as i64)).collect::<Result<_>>()?;
    // chi-bar(a) / tau(chi-bar) per character and residue
    let weights: Vec<Vec<Complex>> = chars
        .iter()
        .map(|chi| {
            let bar = chi.conj();
            let tau = gauss_sum(&bar, prec);
            (1..p as i64).map(|a| Complex::with_val(prec, bar.value(a, prec) / &tau)).collect()
        })
        .collect();
    let assemble = |s: &Complex| -> Result<Vec<Complex>> {
        let twists = zeta2_twist_oracle_many(s, &alphas, prec)?;
        Ok(weights
            .iter()
            .map(|w| {
                let mut acc = Complex::new(prec);
                for (t, c) in twists.iter().zip(w) {
                    acc += Complex::with_val(prec, t * c);
                }
                acc
            })
            .collect())
    };
    let center = Complex::with_val(settings.prec, 1);
    let expansions = laurent_extract_many(&assemble, &center, 2, 0, settings)?;
    let mut rep = Report::new(format!("multiplicative twists mod {p} at s = 1"));
    let wp = settings.prec + 32;
    let probe: Vec<Complex> = (0..settings.nodes).map(|j| node_point(&center, settings.radii[0], j, settings.nodes, wp)).collect();
    let mismatch: Vec<Vec<f64>> = probe
        .par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let via = assemble(s)?;
            chars
                .iter()
                .zip(via)
                .map(|(chi, v)| {
                    let l = dirichlet_l(s, chi, prec)?;
                    Ok(abs_f64(&Complex::with_val(prec, v - l.square())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    for (i, (chi, e)) in chars.iter().zip(&expansions).enumerate() {
        let label = format!("chi_{} mod {p}", chi.index());
        rep.push(Record::deviation(format!("{label}: |c_-2|"), "F(s, chi) is holomorphic at s = 1", abs_f64(e.coeff(-2)), tol));
        rep.push(Record::deviation(format!("{label}: |c_-1|"), "F(s, chi) is holomorphic at s = 1", abs_f64(e.coeff(-1)), tol));
        rep.push(Record::deviation(
            format!("{label}: |contour integral|"),
            "F(s, chi) is holomorphic at s = 1",
            e.contour_integral_abs(),
            tol,
        ));
        let worst = mismatch.iter().map(|row| row[i]).fold(0.0, f64::max);
        rep.push(Record::deviation(
            format!("{label}: Gauss-sum assembly vs L(s, chi)^2 on the circle"),
            "sum d(n) chi(n) n^-s = L(s, chi)^2",
            worst,
            tol,
        ));
    }
    Ok(rep)
}

/// Laurent data used to solve for `F_p(1)`.
#[derive(Clone, Debug)]
pub struct EulerFactorAtOne {
    pub p: u64,
    pub alpha_f: Complex,
    pub alpha_twisted: Complex,
    /// `F_p(1) = (p/(p-1)) (1 - alpha(1/p)/alpha_F)^{-1}`
    pub value: Complex,
}

/// `F_p(1)` from the leading Laurent coefficients of `F(s)` and `F(s, 1/p)`.
pub fn euler_factor_at_1(datum: &FunctionalEquationDatum, p: u64, settings: &ExtractionSettings) -> Result<EulerFactorAtOne> {
    require_zeta2(datum)?;
    if p < 2 || (2..p).take_while(|d| d * d <= p).any(|d| p.is_multiple_of(d)) {
        return Err(invalid(format!("{p} is not prime")));
    }
    let prec = settings.prec + 16;
    let alphas = [Fraction::ZERO, Fraction::new(1, p as i64)?];
    let f = |s: &Complex| zeta2_twist_oracle_many(s, &alphas, prec);
    let center = Complex::with_val(settings.prec, 1);
    let e = laurent_extract_many(&f, &center, 2, 0, settings)?;
    let alpha_f = e[0].coeff(-2).clone();
    let alpha_twisted = e[1].coeff(-2).clone();
    let wp = alpha_f.prec().0;
    let ratio = Complex::with_val(wp, &alpha_twisted / &alpha_f);
    let gap = Complex::with_val(wp, 1 - ratio);
    if abs_f64(&gap) < 1e-12 {
        return Err(Error::Extraction(format!("alpha(1/{p}) / alpha_F is numerically 1")));
    }
    let value = Complex::with_val(wp, Float::with_val(wp, Rational::from((p, p - 1))) / gap);
    Ok(EulerFactorAtOne { p, alpha_f, alpha_twisted, value })
}

/// `F_p(s) = prod_j (1 - alpha_j p^{-s})^{-1}`
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFactor {
    pub p: u64,
    pub partial_degree: u32,
    pub roots: Vec<Complex>,
}

impl LocalFactor {
    pub fn value_at(&self, s: &Complex) -> Complex {
        let wp = s.prec().0;
        let ln_p = Float::with_val(wp, self.p).ln();
        let x = Complex::with_val(wp, Complex::with_val(wp, -s) * ln_p).exp();
        let mut acc = Complex::with_val(wp, 1);
        for a in &self.roots {
            acc *= Complex::with_val(wp, 1 - Complex::with_val(wp, a * &x));
        }
        acc.recip()
    }

    /// `|alpha_j| <= 1 + tol` for all roots.
    pub fn roots_bounded(&self, tol: f64) -> bool {
        self.roots.iter().all(|a| abs_f64(a) <= 1.0 + tol)
    }
}

/// Outcome of matching a value `F_p(1)` against local factors of degree at most `d` with
/// `|alpha_j| <= 1`, whose values at 1 have modulus in `[(1+1/p)^{-d}, (1-1/p)^{-d}]`.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalFactorSolution {
    /// The upper end is attained only by `d` roots equal to 1.
    Forced(LocalFactor),
    Infeasible { modulus: f64, lower: f64, upper: f64 },
    Underdetermined { modulus: f64, lower: f64, upper: f64 },
}

pub fn solve_local_factor(value_at_1: &Complex, p: u64, partial_degree_max: u32, tol: f64) -> LocalFactorSolution {
    let pf = p as f64;
    let d = partial_degree_max as i32;
    let upper = (1.0 - 1.0 / pf).powi(-d);
    let lower = (1.0 + 1.0 / pf).powi(-d);
    let modulus = abs_f64(value_at_1);
    let distance_to_upper =
        abs_f64(&Complex::with_val(value_at_1.prec().0, value_at_1 - upper));
    if distance_to_upper <= tol * upper {
        let one = Complex::with_val(value_at_1.prec().0, 1);
        return LocalFactorSolution::Forced(LocalFactor {
            p,
            partial_degree: partial_degree_max,
            roots: vec![one; partial_degree_max as usize],
        });
    }
    if modulus > upper * (1.0 + tol) || modulus < lower * (1.0 - tol) || (modulus - upper).abs() <= tol * upper {
        // the last case: right modulus, wrong phase
        return LocalFactorSolution::Infeasible { modulus, lower, upper };
    }
    LocalFactorSolution::Underdetermined { modulus, lower, upper }
}

/// `floor(log(h/q_F) / log p)`, computed as the largest `k` with `p^k <= h/q_F`.
pub fn degree_bound(h: &Rational, q_f: &Rational, p: u64) -> Result<u32> {
    if *q_f <= 0 {
        return Err(invalid("conductor must be positive"));
    }
    if h < q_f {
        return Err(invalid(format!("h = {h} is below the conductor {q_f}")));
    }
    if p < 2 {
        return Err(invalid(format!("{p} is not prime")));
    }
    let ratio = Rational::from(h / q_f);
    let mut k = 0;
    let mut pk = Integer::from(p);
    while pk <= ratio {
        k += 1;
        pk *= p;
    }
    Ok(k)
}

#[derive(Clone, Debug)]
pub struct GrowthSample {
    pub sigma: f64,
    pub value: Complex,
}

/// `Delta(sigma) = log|F| - [d |sigma| log|sigma| + |sigma| log(h / (2 pi e)^d)]` along a
/// horizontal line, with `C*` fitted on the smaller half of `|sigma|` and tested on the rest.
#[derive(Clone, Debug)]
pub struct GrowthCertificate {
    pub d: f64,
    pub h: f64,
    /// `(sigma, Delta(sigma))`, ordered by increasing `|sigma|`.
    pub deltas: Vec<(f64, f64)>,
    pub c_star: f64,
    /// Least-squares slope of `Delta` against `|sigma|`.
    pub slope: f64,
    /// `|Delta| <= C* log|sigma|` on the held-out points.
    pub bounded: bool,
    /// `|Delta| / (|sigma| log|sigma|)` is non-increasing.
    pub trend: bool,
}

impl GrowthCertificate {
    pub fn pass(&self) -> bool {
        self.bounded && self.trend
    }
}

pub fn growth_certificate(samples: &[GrowthSample], d: f64, h: f64) -> Result<GrowthCertificate> {
    if samples.len() < 2 {
        return Err(invalid("the certificate needs at least two samples"));
    }
    if !(h > 0.0) {
        return Err(invalid("h must be positive"));
    }
    let log_scale = (h / (2.0 * std::f64::consts::PI * std::f64::consts::E).powf(d)).ln();
    let mut deltas = Vec::with_capacity(samples.len());
    for smp in samples {
        let a = -smp.sigma;
        if a <= 1.0 {
            return Err(invalid(format!("samples must lie left of sigma = -1, got {}", smp.sigma)));
        }
        let modulus = Float::with_val(smp.value.prec().0, smp.value.abs_ref());
        if modulus.is_zero() {
            return Err(invalid(format!("F vanishes at sigma = {}", smp.sigma)));
        }
        let log_f = modulus.ln().to_f64();
        deltas.push((smp.sigma, log_f - (d * a * a.ln() + a * log_scale)));
    }
    deltas.sort_by(|x, y| y.0.total_cmp(&x.0));
    let fit = deltas.len().div_ceil(2);
    let c_star = deltas[..fit].iter().map(|(s, dl)| dl.abs() / (-s).ln()).fold(0.0, f64::max);
    let bounded = deltas[fit..].iter().all(|(s, dl)| dl.abs() <= c_star * (-s).ln());
    let ratios: Vec<f64> = deltas.iter().map(|(s, dl)| dl.abs() / (-s * (-s).ln())).collect();
    let trend = ratios.windows(2).all(|w| w[1] <= w[0]);
    let n = deltas.len() as f64;
    let mx = deltas.iter().map(|(s, _)| -s).sum::<f64>() / n;
    let my = deltas.iter().map(|(_, dl)| dl).sum::<f64>() / n;
    let sxy: f64 = deltas.iter().map(|(s, dl)| (-s - mx) * (dl - my)).sum();
    let sxx: f64 = deltas.iter().map(|(s, _)| (-s - mx).powi(2)).sum();
    Ok(GrowthCertificate { d, h, deltas, c_star, slope: sxy / sxx, bounded, trend })
}

/// `F(sigma + i t, alpha)` for the `zeta^2` twists at each `sigma`.
pub fn zeta2_growth_samples(alpha: Fraction, sigmas: &[f64], t: f64, prec: u32) -> Result<Vec<GrowthSample>> {
    sigmas
        .par_iter()
        .map(|&sigma| {
            let s = Complex::with_val(prec, (sigma, t));
            Ok(GrowthSample { sigma, value: crate::twist::zeta2_twist_oracle(&s, alpha, prec)? })
        })
        .collect()
}

/// `D_K(s) = F(s, alpha) - main term` for the `zeta^2` twists.
pub fn transformation_difference(system: &PolynomialSystem, s: &Complex, alpha: Fraction, k: usize, prec: u32) -> Result<Complex> {
    let wp = prec + 8;
    let f = crate::twist::zeta2_twist_oracle(s, alpha, wp)?;
    let main = transformation_main_term(system, &Zeta2Oracle, s, alpha, k, wp)?;
    Ok(Complex::with_val(prec, f - main))
}

/// Polar consistency of the transformation formula: `D_K` has no residue on circles around
/// `s = 1 - nu` (`nu = 1..=min(K-1, 4)`) and no principal part at `s = 1`.
pub fn transformation_consistency(
    system: &PolynomialSystem,
    alpha: Fraction,
    k: usize,
    settings: &ExtractionSettings,
    tol: f64,
) -> Result<Report> {
    require_zeta2(system.datum())?;
    let mut rep = Report::new(format!("transformation formula at alpha = {alpha}, K = {k}"));
    let prec = settings.prec + 8;
    let d = |s: &Complex| transformation_difference(system, s, alpha, k, prec);
    let at_one = laurent_extract(&d, &Complex::with_val(settings.prec, 1), 2, 0, settings)?;
    rep.push(Record::deviation("D_K at s = 1: |c_-2|", "principal parts cancel at s = 1", abs_f64(at_one.coeff(-2)), tol));
    rep.push(Record::deviation("D_K at s = 1: |c_-1|", "principal parts cancel at s = 1", abs_f64(at_one.coeff(-1)), tol));
    for nu in 1..=k.saturating_sub(1).min(4) {
        let center = Complex::with_val(settings.prec, 1 - nu as i64);
        let e = laurent_extract(&d, &center, 2, 0, settings)?;
        rep.push(Record::deviation(
            format!("D_K around s = {}: |contour integral|", 1 - nu as i64),
            "D_K is holomorphic there (divisibility of Q_nu cancels the double pole)",
            e.contour_integral_abs(),
            tol,
        ));
    }
    Ok(rep)
}

/// At `alpha = 1`, `K = 0` the main term is `F(s)` itself for `zeta^2`, so `D_0` vanishes.
pub fn transformation_unit_reduction(system: &PolynomialSystem, points: &[Complex], tol: f64, prec: u32) -> Result<Report> {
    require_zeta2(system.datum())?;
    let devs: Vec<f64> = points
        .par_iter()
        .map(|s| transformation_difference(system, s, Fraction::ONE, 0, prec).map(|v| abs_f64(&v)))
        .collect::<Result<_>>()?;
    let mut rep = Report::new("transformation formula at alpha = 1, K = 0");
    rep.push(Record::deviation(
        format!("max |D_0| over {} points", points.len()),
        "main term reduces to F(s) when alpha = 1",
        devs.into_iter().fold(0.0, f64::max),
        tol,
    ));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twist::zeta2_twist_oracle;

    const PREC: u32 = 128;

    fn c(re: f64, im: f64) -> Complex {
        Complex::with_val(PREC, (re, im))
    }

    fn frac(a: i64, q: i64) -> Fraction {
        Fraction::new(a, q).unwrap()
    }

    fn dist(a: &Complex, b: &Complex) -> f64 {
        abs_f64(&Complex::with_val(PREC, a - b))
    }

    #[test]
    fn extraction_of_a_simple_pole() {
        let settings = ExtractionSettings { nodes: 64, ..Default::default() };
        let f = |s: &Complex| Ok(Complex::with_val(PREC, Complex::with_val(PREC, s - 1u32).recip_ref()));
        let e = laurent_extract(&f, &c(1.0, 0.0), 3, 3, &settings).unwrap();
        for k in -3..=3 {
            let expected = if k == -1 { c(1.0, 0.0) } else { c(0.0, 0.0) };
            assert!(dist(e.coeff(k), &expected) < 1e-25, "c_{k} = {}", e.coeff(k));
        }
    }

    #[test]
    fn extraction_of_an_entire_function() {
        // e^s about 0: c_k = 1/k!
        let f = |s: &Complex| Ok(Complex::with_val(PREC, s.exp_ref()));
        let e = laurent_extract(&f, &c(0.0, 0.0), 1, 5, &ExtractionSettings::default()).unwrap();
        let mut fact = 1.0;
        for k in 0..=5 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.coeff(k).real().to_f64() - 1.0 / fact).abs() < 1e-16);
            assert!(e.error(k) < 1e-20);
        }
        assert!(abs_f64(e.coeff(-1)) < 1e-30);
    }

    #[test]
    fn extraction_reports_non_analyticity() {
        // a branch cut crossing the circle
        let f = |s: &Complex| Ok(Complex::with_val(PREC, s.sqrt_ref()));
        let settings = ExtractionSettings { max_nodes: 256, ..Default::default() };
        assert!(matches!(laurent_extract(&f, &c(0.0, 0.0), 1, 1, &settings), Err(Error::Extraction(_))));
    }

    #[test]
    fn zeta_squared_laurent_data() {
        let oracle = |s: &Complex| zeta2_twist_oracle(s, Fraction::ZERO, PREC + 16);
        let e = laurent_extract(&oracle, &c(1.0, 0.0), 2, 1, &ExtractionSettings::default()).unwrap();
        let gamma2 = Float::with_val(PREC, Constant::Euler) * 2u32;
        assert!(dist(e.coeff(-2), &c(1.0, 0.0)) < 1e-25);
        assert!(dist(e.coeff(-1), &Complex::with_val(PREC, gamma2)) < 1e-25);
        // real on the reals
        for k in -2..=1 {
            assert!(e.coeff(k).imag().to_f64().abs() < 1e-28);
        }
    }

    /// Each `zeta(s, u/q)` has residue 1 at `s = 1`, so the oracle's `c_-2` is
    /// `q^{-2} sum_{u,v} e(-uva/q)`.
    #[test]
    fn twist_leading_coefficient_by_counting() {
        for (a, q) in [(1i64, 2u64), (2, 5), (5, 6)] {
            let oracle = |s: &Complex| zeta2_twist_oracle(s, frac(a, q as i64), PREC + 16);
            let e = laurent_extract(&oracle, &c(1.0, 0.0), 2, 0, &ExtractionSettings::default()).unwrap();
            let mut lead = Complex::new(PREC);
            for u in 1..=q {
                for v in 1..=q {
                    lead += e_fraction(-(u as i64 * v as i64 * a), q, PREC);
                }
            }
            lead /= q * q;
            assert!(dist(e.coeff(-2), &lead) < 1e-25);
            assert!(dist(e.coeff(-2), &c(1.0 / q as f64, 0.0)) < 1e-15);
        }
    }

    #[test]
    fn laurent_laws_small_q() {
        let table = TwistLaurentTable::extract(&FunctionalEquationDatum::zeta2(), 4, &ExtractionSettings::default()).unwrap();
        let alpha = verify_alpha_law(&table, &LawTolerances::default());
        let beta = verify_beta_law(&table, &LawTolerances::default());
        assert!(alpha.all_pass(), "{alpha}");
        assert!(beta.all_pass(), "{beta}");
        let e3 = table.get(frac(1, 3)).unwrap();
        let b = TwistLaurentTable::beta_of(e3);
        let gamma = Float::with_val(PREC, Constant::Euler);
        let expected = gamma * 2u32 - Float::with_val(PREC, 3).ln() * 2u32;
        assert!(dist(&b, &Complex::with_val(PREC, expected)) < 1e-20);
    }

    #[test]
    fn laws_refuse_other_data() {
        assert!(TwistLaurentTable::extract(&FunctionalEquationDatum::zeta(), 2, &ExtractionSettings::default()).is_err());
    }

    #[test]
    fn euler_factor_values() {
        let datum = FunctionalEquationDatum::zeta2();
        for (p, expected) in [(2u64, 4.0), (3, 2.25), (5, 1.5625)] {
            let r = euler_factor_at_1(&datum, p, &ExtractionSettings::default()).unwrap();
            assert!(dist(&r.value, &c(expected, 0.0)) < 1e-20, "p = {p}: {}", r.value);
            match solve_local_factor(&r.value, p, 2, 1e-8) {
                LocalFactorSolution::Forced(lf) => {
                    assert_eq!(lf.partial_degree, 2);
                    assert!(lf.roots.iter().all(|a| dist(a, &c(1.0, 0.0)) == 0.0));
                    assert!(lf.roots_bounded(1e-12));
                    assert!(dist(&lf.value_at(&c(1.0, 0.0)), &r.value) < 1e-20);
                }
                other => panic!("p = {p}: {other:?}"),
            }
        }
    }

    #[test]
    fn local_factor_cases() {
        assert!(matches!(solve_local_factor(&c(4.0, 0.0), 2, 2, 1e-8), LocalFactorSolution::Forced(_)));
        assert!(matches!(solve_local_factor(&c(5.0, 0.0), 2, 2, 1e-8), LocalFactorSolution::Infeasible { .. }));
        assert!(matches!(solve_local_factor(&c(2.0, 0.0), 2, 2, 1e-8), LocalFactorSolution::Underdetermined { .. }));
        // right modulus, wrong phase
        assert!(matches!(solve_local_factor(&c(0.0, 4.0), 2, 2, 1e-8), LocalFactorSolution::Infeasible { .. }));
        // below every admissible value: (1 + 1/2)^{-2} = 4/9
        assert!(matches!(solve_local_factor(&c(0.3, 0.0), 2, 2, 1e-8), LocalFactorSolution::Infeasible { .. }));
    }

    #[test]
    fn degree_bounds() {
        let one = Rational::from(1);
        for p in [2u64, 3, 5, 7, 11, 13, 101] {
            assert_eq!(degree_bound(&Rational::from(p * p), &one, p).unwrap(), 2);
            assert_eq!(degree_bound(&one, &one, p).unwrap(), 0);
        }
        assert_eq!(degree_bound(&Rational::from(8), &one, 2).unwrap(), 3);
        assert_eq!(degree_bound(&Rational::from((7, 2)), &Rational::from((1, 2)), 7).unwrap(), 1);
        assert!(degree_bound(&Rational::from((1, 2)), &one, 2).is_err());
    }

    #[test]
    fn growth_certificate_sensitivity() {
        let sigmas = [-10.0, -20.0, -30.0, -40.0];
        let plain = zeta2_growth_samples(Fraction::ZERO, &sigmas, 5.0, PREC).unwrap();
        let third = zeta2_growth_samples(frac(1, 3), &sigmas, 5.0, PREC).unwrap();
        let ok1 = growth_certificate(&plain, 2.0, 1.0).unwrap();
        let ok9 = growth_certificate(&third, 2.0, 9.0).unwrap();
        let bad = growth_certificate(&third, 2.0, 1.0).unwrap();
        eprintln!("q=1,h=1: {:?} C* {:.3}", ok1.deltas, ok1.c_star);
        eprintln!("q=3,h=9: {:?} C* {:.3}", ok9.deltas, ok9.c_star);
        eprintln!("q=3,h=1: slope {:.4} vs log 9 = {:.4}", bad.slope, 9f64.ln());
        assert!(ok1.pass() && ok9.pass());
        assert!(!bad.pass());
        assert!((bad.slope / 9f64.ln() - 1.0).abs() < 0.2);
    }

    #[test]
    fn main_term_unit_alpha_is_the_function() {
        let system = PolynomialSystem::new(&FunctionalEquationDatum::zeta2(), 2);
        let s = c(2.5, 3.0);
        let main = transformation_main_term(&system, &Zeta2Oracle, &s, Fraction::ONE, 0, PREC).unwrap();
        let f = zeta2_twist_oracle(&s, Fraction::ZERO, PREC).unwrap();
        assert!(dist(&main, &f) < 1e-30);
    }

    #[test]
    fn prefactor_homogeneity() {
        let datum = FunctionalEquationDatum::zeta2();
        let s = c(0.7, -2.0);
        let a = transformation_prefactor(&datum, &s, frac(1, 3), PREC).unwrap();
        let b = transformation_prefactor(&datum, &s, frac(2, 3), PREC).unwrap();
        let two = Complex::with_val(PREC, 2);
        let expected = Complex::with_val(PREC, (&s * Complex::with_val(PREC, 2) - 1u32) * two.ln()).exp();
        assert!(dist(&Complex::with_val(PREC, &b / &a), &expected) < 1e-30);
        assert!(transformation_prefactor(&datum, &s, frac(-1, 3), PREC).is_err());
    }

    #[test]
    fn main_term_decay_table() {
        let system = PolynomialSystem::new(&FunctionalEquationDatum::zeta2(), 12);
        let s = c(3.0, 0.0);
        let terms = transformation_terms(&system, &Zeta2Oracle, &s, frac(1, 2), 12, PREC).unwrap();
        let sizes: Vec<f64> = terms.iter().map(abs_f64).collect();
        for (nu, t) in sizes.iter().enumerate() {
            eprintln!("nu = {nu:2}: |term| = {t:.3e}");
        }
        let k6: f64 = sizes[7..=12].iter().sum();
        let m6 = transformation_main_term(&system, &Zeta2Oracle, &s, frac(1, 2), 6, PREC).unwrap();
        let m12 = transformation_main_term(&system, &Zeta2Oracle, &s, frac(1, 2), 12, PREC).unwrap();
        assert!(dist(&m6, &m12) <= k6 * (1.0 + 1e-12));
    }

    #[test]
    fn polar_consistency_one_half() {
        let system = PolynomialSystem::new(&FunctionalEquationDatum::zeta2(), 6);
        let rep = transformation_consistency(&system, frac(1, 2), 6, &ExtractionSettings::default(), 1e-10).unwrap();
        assert!(rep.all_pass(), "{rep}");
    }

    #[test]
    fn unit_reduction_points() {
        let system = PolynomialSystem::new(&FunctionalEquationDatum::zeta2(), 1);
        let points: Vec<Complex> = (0..20).map(|j| c(0.6 + 0.15 * j as f64, -10.0 + j as f64)).collect();
        let rep = transformation_unit_reduction(&system, &points, 1e-12, PREC).unwrap();
        assert!(rep.all_pass(), "{rep}");
    }

    #[test]
    fn chi_holomorphy_mod_three() {
        let rep = verify_chi_holomorphy(3, &ExtractionSettings::default(), 1e-15).unwrap();
        assert!(rep.all_pass(), "{rep}");
        assert!(verify_chi_holomorphy(2, &ExtractionSettings::default(), 1e-15).is_err());
    }
}
