use proptest::prelude::*;
use rug::{Complex, Float};
use twistlab::number::Fraction;
use twistlab::twist::{
    additive_from_mult_identity_check, divisor_stream, twist_direct, zeta2_twist_oracle, CharacterRoute,
    LinearTwistQuery, Zeta2Oracle,
};

const PREC: u32 = 128;

fn dist(a: &Complex, b: &Complex) -> f64 {
    Float::with_val(PREC, Complex::with_val(PREC, a - b).abs_ref()).to_f64()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn twist_param() -> impl Strategy<Value = Fraction> {
    (1i64..12, -30i64..30).prop_map(|(q, a)| Fraction::new(a, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn divisor_stream_is_multiplicative(m in 1u64..3000, n in 1u64..3000) {
        prop_assume!(gcd(m, n) == 1);
        let d = divisor_stream();
        prop_assert_eq!(d.get(m * n), d.get(m) * d.get(n));
    }

    #[test]
    fn oracle_is_periodic_and_real_symmetric(sigma in -3.0f64..4.0, t in 0.5f64..15.0, alpha in twist_param(), k in -3i64..3) {
        let s = Complex::with_val(PREC, (sigma, t));
        let shifted = Fraction::new(alpha.num() + k * alpha.den() as i64, alpha.den() as i64).unwrap();
        let f = zeta2_twist_oracle(&s, alpha, PREC).unwrap();
        prop_assert!(dist(&f, &zeta2_twist_oracle(&s, shifted, PREC).unwrap()) <= 1e-30 * (1.0 + f.real().to_f64().abs()));
        // real coefficients: F(conj s, -alpha) = conj F(s, alpha)
        let g = zeta2_twist_oracle(&Complex::with_val(PREC, s.conj_ref()), -alpha, PREC).unwrap();
        let fc = Complex::with_val(PREC, f.conj_ref());
        let scale = Float::with_val(PREC, f.abs_ref()).to_f64().max(1.0);
        prop_assert!(dist(&g, &fc) <= 1e-30 * scale);
    }

    #[test]
    fn direct_series_within_its_tail_bound(sigma in 2.5f64..4.0, t in -10.0f64..10.0, alpha in twist_param()) {
        let stream = divisor_stream();
        let s = Complex::with_val(PREC, (sigma, t));
        let q = LinearTwistQuery { stream: &stream, alpha, s: s.clone() };
        let sum = twist_direct(&q, 3000, PREC).unwrap();
        let oracle = zeta2_twist_oracle(&s, alpha, PREC).unwrap();
        prop_assert!(dist(&sum.value, &oracle) <= sum.tail_bound + 1e-25, "{} > {}", dist(&sum.value, &oracle), sum.tail_bound);
    }

    #[test]
    fn additive_from_multiplicative(sigma in 1.5f64..4.0, t in -8.0f64..8.0, p in prop::sample::select(vec![2u64, 3, 5, 7]), a in 1i64..7) {
        prop_assume!(a % p as i64 != 0);
        let s = Complex::with_val(PREC, (sigma, t));
        let c = additive_from_mult_identity_check(&Zeta2Oracle, &s, a, p, CharacterRoute::Native, PREC).unwrap();
        prop_assert!(c.difference < 1e-30, "{:e}", c.difference);
    }
}
