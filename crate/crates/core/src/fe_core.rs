//! Functional-equation data `Phi(s) = Q^s prod Gamma(lambda_j s + mu_j) F(s)` and the
//! invariants derived from them.

use std::path::Path;

use rug::float::{Constant, Round};
use rug::ops::Pow;
use rug::{Complex, Float, Rational};
use serde::Deserialize;

use crate::bernoulli::bernoulli_polynomial;
use crate::error::{invalid, Error, Result};
use crate::number::{parse_rational, GaussRational, PowerProduct};
use crate::poly::Polynomial;

/// One factor `Gamma(lambda s + mu)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaFactor {
    lambda: Rational,
    mu: GaussRational,
}

impl GammaFactor {
    pub fn new(lambda: Rational, mu: GaussRational) -> Result<Self> {
        if lambda <= 0 {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if mu.re < 0 {
            return Err(invalid(format!("Re(mu) must be nonnegative, got {mu}")));
        }
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn mu(&self) -> &GaussRational {
        &self.mu
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalEquationDatum {
    q: PowerProduct,
    omega: GaussRational,
    factors: Vec<GammaFactor>,
    pole_order: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    lambda: String,
    mu: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDatum {
    #[serde(rename = "Q")]
    q: String,
    omega: String,
    factors: Vec<RawFactor>,
    pole_order: u32,
}

impl FunctionalEquationDatum {
    /// `omega` must be an exact Gaussian rational of modulus one.
    pub fn new(
        q: PowerProduct,
        omega: GaussRational,
        factors: Vec<GammaFactor>,
        pole_order: u32,
    ) -> Result<Self> {
        if omega.norm() != 1 {
            return Err(invalid(format!("|omega| must be 1, got |{omega}|^2 = {}", omega.norm())));
        }
        Ok(Self { q, omega, factors, pole_order })
    }

    /// `zeta(s)^2`: two factors `Gamma(s/2)`, `Q = pi^-1`, `omega = 1`, double pole at 1.
    pub fn zeta2() -> Self {
        let g = GammaFactor::new(Rational::from((1, 2)), GaussRational::zero()).unwrap();
        Self {
            q: PowerProduct::pi_power(Rational::from(-1)),
            omega: GaussRational::one(),
            factors: vec![g.clone(), g],
            pole_order: 2,
        }
    }

    /// `zeta(s)`: one factor `Gamma(s/2)`, `Q = pi^-1/2`.
    pub fn zeta() -> Self {
        Self {
            q: PowerProduct::pi_power(Rational::from((-1, 2))),
            omega: GaussRational::one(),
            factors: vec![GammaFactor::new(Rational::from((1, 2)), GaussRational::zero()).unwrap()],
            pole_order: 1,
        }
    }

    /// Parses a TOML datum with keys `Q`, `omega`, `factors = [{lambda, mu}]`, `pole_order`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawDatum = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = |e: Error| Error::Config(e.to_string());
        let q = PowerProduct::parse(&raw.q).map_err(cfg)?;
        let omega = GaussRational::parse(&raw.omega).map_err(cfg)?;
        let factors = raw
            .factors
            .iter()
            .map(|f| {
                GammaFactor::new(parse_rational(&f.lambda)?, GaussRational::parse(&f.mu)?)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(cfg)?;
        Self::new(q, omega, factors, raw.pole_order).map_err(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn q_param(&self) -> &PowerProduct {
        &self.q
    }

    pub fn omega(&self) -> &GaussRational {
        &self.omega
    }

    pub fn factors(&self) -> &[GammaFactor] {
        &self.factors
    }

    pub fn pole_order(&self) -> u32 {
        self.pole_order
    }

    /// `d_F = 2 sum lambda_j`
    pub fn degree(&self) -> Rational {
        self.factors.iter().map(|f| &f.lambda).sum::<Rational>() * 2u32
    }

    /// Rejects data whose degree is not exactly 2.
    pub fn require_degree_two(&self) -> Result<()> {
        let d = self.degree();
        if d != 2 {
            return Err(Error::NotDegreeTwo { degree: d.to_string() });
        }
        Ok(())
    }

    /// `q_F = (2 pi)^{d_F} Q^2 prod lambda_j^{2 lambda_j}`, kept as an exact power product.
    pub fn conductor(&self) -> PowerProduct {
        let d = self.degree();
        let two_pi = PowerProduct::from_rational(&Rational::from(2))
            .unwrap()
            .mul(&PowerProduct::pi_power(Rational::from(1)));
        let mut out = two_pi.pow(&d).mul(&self.q.pow(&Rational::from(2)));
        for f in &self.factors {
            let e = Rational::from(&f.lambda * 2u32);
            out = out.mul(&PowerProduct::rational_power(&f.lambda, &e).unwrap());
        }
        out
    }

    /// `xi_F = 2 sum (mu_j - 1/2)`
    pub fn xi(&self) -> GaussRational {
        let half = GaussRational::real(Rational::from((1, 2)));
        let sum = self
            .factors
            .iter()
            .fold(GaussRational::zero(), |acc, f| &acc + &(&f.mu - &half));
        sum.scale(&Rational::from(2))
    }

    pub fn eta(&self) -> Rational {
        self.xi().re
    }

    pub fn theta(&self) -> Rational {
        self.xi().im
    }

    /// `H_F(n) = 2 sum B_n(mu_j) / lambda_j^{n-1}`
    pub fn h_invariant(&self, n: usize) -> GaussRational {
        let b: Polynomial<GaussRational> = bernoulli_polynomial(n).to_complex_poly();
        let mut acc = GaussRational::zero();
        for f in &self.factors {
            let lam_pow = Rational::from((&f.lambda).pow(1 - n as i32));
            acc = &acc + &b.eval(&f.mu).scale(&lam_pow);
        }
        acc.scale(&Rational::from(2))
    }

    /// `tau_F = max |Im mu_j / lambda_j|`; undefined without factors.
    pub fn tau(&self) -> Result<Rational> {
        self.factors
            .iter()
            .map(|f| Rational::from(&f.mu.im / &f.lambda).abs())
            .max()
            .ok_or_else(|| invalid("tau is undefined for an empty factor list"))
    }

    /// Shifted root number
    /// `omega e^{-i pi (eta+1)/2} (q_F/(2pi)^2)^{i theta/2} prod lambda_j^{-2i Im mu_j}`,
    /// principal branches throughout. Degree-two data only.
    pub fn root_number_star(&self, prec: u32) -> Result<Complex> {
        self.require_degree_two()?;
        if let Some(exact) = self.root_number_star_exact() {
            return Ok(exact.to_complex(prec));
        }
        let wp = prec + 32;
        let pi = Float::with_val(wp, Constant::Pi);
        let eta = Float::with_val(wp, &self.eta());
        let theta = Float::with_val(wp, &self.theta());
        // collect the total argument, then exponentiate once
        let mut arg = -Float::with_val(wp, &pi * (eta + 1u32)) / 2u32;
        let log_ratio = self.conductor().to_float(wp).ln() - Float::with_val(wp, &pi * 2u32).ln() * 2u32;
        arg += Float::with_val(wp, &theta * &log_ratio) / 2u32;
        for f in &self.factors {
            let lam = Float::with_val(wp, &f.lambda).ln();
            arg -= lam * Float::with_val(wp, &f.mu.im) * 2u32;
        }
        let phase = Complex::with_val(wp, (Float::with_val(wp, arg.cos_ref()), Float::with_val(wp, arg.sin_ref())));
        let out = phase * self.omega.to_complex(wp);
        Ok(Complex::with_val_round(prec, out, (Round::Nearest, Round::Nearest)).0)
    }

    /// Exact shifted root number when `theta_F = 0`, every `mu_j` is real and `eta_F` is an
    /// integer: then it equals `omega (-i)^{eta_F + 1}`.
    pub fn root_number_star_exact(&self) -> Option<GaussRational> {
        if self.degree() != 2 || self.theta() != 0 || self.factors.iter().any(|f| !f.mu.is_real()) {
            return None;
        }
        let eta = self.eta();
        if *eta.denom() != 1 {
            return None;
        }
        let k = (eta.numer().to_i64()? + 1).rem_euclid(4) as u32;
        let minus_i = GaussRational::new(0, -1);
        Some(&self.omega * &minus_i.pow(k))
    }

    /// `lambda_F = -i omega_F^*`
    pub fn lambda_f(&self, prec: u32) -> Result<Complex> {
        let w = self.root_number_star(prec)?;
        Ok(Complex::with_val(prec, (0, -1)) * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn datum(factors: &[(Rational, GaussRational)]) -> FunctionalEquationDatum {
        let fs = factors
            .iter()
            .map(|(l, m)| GammaFactor::new(l.clone(), m.clone()).unwrap())
            .collect();
        FunctionalEquationDatum::new(PowerProduct::one(), GaussRational::one(), fs, 0).unwrap()
    }

    #[test]
    fn zeta2_invariants() {
        let z = FunctionalEquationDatum::zeta2();
        assert_eq!(z.degree(), 2);
        assert!(z.conductor().is_one());
        assert_eq!(z.xi(), GaussRational::real(-2));
        assert_eq!(z.eta(), -2);
        assert_eq!(z.theta(), 0);
        assert_eq!(z.h_invariant(0), GaussRational::real(2));
        assert_eq!(z.h_invariant(1), GaussRational::real(-2));
        assert_eq!(z.h_invariant(2), GaussRational::real(q(4, 3)));
        assert_eq!(z.root_number_star_exact(), Some(GaussRational::i()));
        assert_eq!(z.tau().unwrap(), 0);
        let lf = z.lambda_f(128).unwrap();
        assert_eq!(lf, Complex::with_val(128, (1, 0)));
    }

    #[test]
    fn zeta_and_empty_data() {
        let z = FunctionalEquationDatum::zeta();
        assert_eq!(z.degree(), 1);
        assert!(z.conductor().is_one());
        let empty = datum(&[]);
        assert_eq!(empty.degree(), 0);
        assert!(empty.conductor().is_one());
        assert!(empty.tau().is_err());
        assert!(matches!(z.root_number_star(64), Err(Error::NotDegreeTwo { .. })));
    }

    #[test]
    fn single_factor_examples() {
        assert_eq!(datum(&[(q(1, 1), GaussRational::zero())]).degree(), 2);
        assert!(datum(&[(q(1, 2), GaussRational::real(q(1, 2)))]).xi().is_zero());
        let d = datum(&[(q(1, 2), GaussRational::i())]);
        assert_eq!(d.xi(), GaussRational::new(-1, 2));
        assert_eq!(d.tau().unwrap(), 2);
        let d2 = datum(&[(q(1, 1), GaussRational::new(0, 2)), (q(1, 2), GaussRational::i())]);
        assert_eq!(d2.tau().unwrap(), 2);
    }

    #[test]
    fn root_number_is_unimodular_for_complex_data() {
        let d = datum(&[(q(1, 1), GaussRational::new(q(1, 3), q(3, 2)))]);
        let w = d.root_number_star(256).unwrap();
        let err = (Complex::with_val(256, w.abs_ref()).real().clone() - 1u32).abs().to_f64();
        assert!(err < 1e-70, "{err}");
        // numeric path agrees with the exact shortcut where both apply
        let z = FunctionalEquationDatum::zeta2();
        let forced = FunctionalEquationDatum {
            q: PowerProduct::pi_power(q(-1, 1)),
            ..z.clone()
        };
        assert_eq!(forced.root_number_star_exact(), Some(GaussRational::i()));
    }

    #[test]
    fn h_invariants_match_degree_and_xi() {
        let d = datum(&[(q(1, 2), GaussRational::new(q(1, 3), 2)), (q(3, 2), GaussRational::real(q(5, 7)))]);
        assert_eq!(d.h_invariant(0), GaussRational::real(d.degree()));
        assert_eq!(d.h_invariant(1), d.xi());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
Q = "pi^-1"
omega = "1,0"
pole_order = 2
factors = [ { lambda = "1/2", mu = "0" }, { lambda = "0.5", mu = "0,0" } ]
"#;
        let d = FunctionalEquationDatum::from_toml_str(text).unwrap();
        assert_eq!(d, FunctionalEquationDatum::zeta2());
        let bad = text.replace("\"1,0\"", "\"1,1\"");
        assert!(matches!(FunctionalEquationDatum::from_toml_str(&bad), Err(Error::Config(_))));
        let neg = text.replace("\"1/2\"", "\"-1/2\"");
        assert!(FunctionalEquationDatum::from_toml_str(&neg).is_err());
    }
}
