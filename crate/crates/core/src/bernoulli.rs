//! Exact Bernoulli numbers `B_n = B_n(0)` (so `B_1 = -1/2`) and Bernoulli polynomials.

use std::sync::OnceLock;

use rug::{Complex, Integer, Rational};

use crate::poly::RationalPolynomial;

pub const DEFAULT_MAX_DEGREE: usize = 64;

/// Bernoulli numbers and polynomials up to a fixed degree, built eagerly.
#[derive(Clone, Debug)]
pub struct BernoulliTable {
    numbers: Vec<Rational>,
    polys: Vec<RationalPolynomial>,
}

/// Binomial coefficients `C(n, 0..=n)`.
pub(crate) fn binomial_row(n: usize) -> Vec<Integer> {
    let mut row = vec![Integer::from(1)];
    for k in 1..=n {
        let next = Integer::from(&row[k - 1] * (n - k + 1) as u64) / k as u64;
        row.push(next);
    }
    row
}

impl BernoulliTable {
    pub fn with_max_degree(max: usize) -> Self {
        // sum_{k=0}^{n} C(n+1, k) B_k = 0 for n >= 1
        let mut numbers: Vec<Rational> = Vec::with_capacity(max + 1);
        numbers.push(Rational::from(1));
        for n in 1..=max {
            let row = binomial_row(n + 1);
            let mut acc = Rational::new();
            for (k, b) in numbers.iter().enumerate() {
                if *b != 0 {
                    acc += Rational::from(b * &row[k]);
                }
            }
            numbers.push(-acc / Integer::from(n + 1));
        }
        // B_n(x) = sum_k C(n, k) B_k x^{n-k}
        let polys = (0..=max)
            .map(|n| {
                let row = binomial_row(n);
                RationalPolynomial::new(
                    (0..=n)
                        .map(|j| Rational::from(&numbers[n - j] * &row[n - j]))
                        .collect(),
                )
            })
            .collect();
        Self { numbers, polys }
    }

    /// Shared table of degree [`DEFAULT_MAX_DEGREE`].
    pub fn shared() -> &'static BernoulliTable {
        static TABLE: OnceLock<BernoulliTable> = OnceLock::new();
        TABLE.get_or_init(|| BernoulliTable::with_max_degree(DEFAULT_MAX_DEGREE))
    }

    pub fn max_degree(&self) -> usize {
        self.numbers.len() - 1
    }

    /// `None` beyond the table.
    pub fn number(&self, n: usize) -> Option<&Rational> {
        self.numbers.get(n)
    }

    pub fn polynomial(&self, n: usize) -> Option<&RationalPolynomial> {
        self.polys.get(n)
    }
}

/// `B_n`, from the shared table when it is large enough.
pub fn bernoulli_number(n: usize) -> Rational {
    match BernoulliTable::shared().number(n) {
        Some(b) => b.clone(),
        None => BernoulliTable::with_max_degree(n).numbers.swap_remove(n),
    }
}

pub fn bernoulli_polynomial(n: usize) -> RationalPolynomial {
    match BernoulliTable::shared().polynomial(n) {
        Some(p) => p.clone(),
        None => BernoulliTable::with_max_degree(n).polys.swap_remove(n),
    }
}

/// Horner evaluation at the precision of `z`.
pub fn eval_complex(poly: &RationalPolynomial, z: &Complex) -> Complex {
    poly.eval_complex(z)
}
