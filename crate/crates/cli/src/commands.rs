//! The four subcommands. Each returns its artifacts as strings so output is byte-stable and the
//! caller decides where it goes.

use std::fmt::Write as _;
use std::sync::Arc;

use rug::{Complex, Float, Rational};
use twistlab::number::Fraction;
use twistlab::qpoly::{divisible_by_shifted_power, r_poly_alternative, write_coefficient_csv, PolynomialSystem};
use twistlab::report::{Record, Report, REPORT_CSV_HEADER};
use twistlab::transform::{
    degree_bound, euler_factor_at_1, growth_certificate, solve_local_factor, transformation_consistency,
    transformation_unit_reduction, verify_alpha_law, verify_beta_law, verify_chi_holomorphy, zeta2_growth_samples,
    ExtractionSettings, LawTolerances, LocalFactorSolution, TwistLaurentTable,
};
use twistlab::twist::{
    additive_from_mult_identity_check, divisor_stream, p2_coefficientwise_check, twist_grid, write_grid_csv,
    CharacterRoute, DirectTwist, LinearTwist, Zeta2Oracle,
};
use twistlab::Result;

use crate::config::{GridSource, RunConfig};

/// Tolerance for the principal part of `(s-1)^2 F(s, chi)` at `s = 1`.
pub const CHI_HOLOMORPHY_TOL: f64 = 1e-15;
/// Tolerance for the `alpha = 1`, `K = 0` reduction.
pub const UNIT_REDUCTION_TOL: f64 = 1e-12;
pub const UNIT_REDUCTION_POINTS: usize = 20;
/// Coefficients compared in the exact `p = 2` identity.
pub const P2_COEFFICIENTS: usize = 10_000;
/// Abscissae at which the additive-from-multiplicative identity is evaluated.
pub const IDENTITY_SIGMAS: [(i64, i64); 2] = [(5, 2), (3, 1)];

/// What a command produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    /// Human-readable report or table.
    pub text: String,
    /// Machine-readable companion, when the command has one.
    pub csv: Option<String>,
    pub pass: bool,
}

fn settings(rc: &RunConfig) -> ExtractionSettings {
    ExtractionSettings { prec: rc.precision, ..ExtractionSettings::default() }
}

fn abs_f64(z: &Complex) -> f64 {
    Float::with_val(z.prec().0, z.abs_ref()).to_f64()
}

fn fmt_complex(z: &Complex) -> String {
    let (re, im) = (z.real().to_f64(), z.imag().to_f64());
    if im.abs() < 1e-30 {
        format!("{re:.12}")
    } else {
        format!("{re:.12} {} {:.12}i", if im < 0.0 { "-" } else { "+" }, im.abs())
    }
}

fn render(reports: &[Report]) -> Outcome {
    let mut text = String::new();
    let mut csv = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        writeln!(text, "{r}").unwrap();
        let mut buf = Vec::new();
        r.write_csv_rows(&mut buf).expect("writing to memory");
        csv.push_str(&String::from_utf8(buf).expect("ascii"));
    }
    let total: usize = reports.iter().map(|r| r.records.len()).sum();
    let failed: usize = reports.iter().map(|r| r.failures().count()).sum();
    writeln!(text, "TOTAL: {total} records, {failed} failed: {}", if failed == 0 { "PASS" } else { "FAIL" }).unwrap();
    Outcome { text, csv: Some(csv), pass: failed == 0 }
}

/// `(s + nu - 1)^m` as text.
fn shifted_power(nu: usize, m: u32) -> String {
    match nu {
        1 => format!("s^{m}"),
        _ => format!("(s+{})^{m}", nu - 1),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Exact table of `Q_0..Q_K`, `R_1..R_K`, `V_1..V_K` with the divisibility and degree checks.
pub fn cmd_polys(rc: &RunConfig) -> Result<Outcome> {
    let m = rc.datum.pole_order();
    let sys = PolynomialSystem::new(&rc.datum, rc.k);
    let mut text = format!("instance {}, K = {}\n", rc.instance, rc.k);
    let mut pass = true;
    writeln!(text, "Q_0 = {}", sys.q(0).display_in("s")).unwrap();
    for nu in 1..=rc.k {
        let q = sys.q(nu);
        let div = m == 0 || divisible_by_shifted_power(q, nu, m);
        let deg = q.degree() == Some(2 * nu);
        pass &= div && deg;
        let div_text =
            if m == 0 { String::new() } else { format!("  [divisible by {}: {}]", shifted_power(nu, m), verdict(div)) };
        writeln!(text, "Q_{nu} = {}{div_text}  [degree {}: {}]", q.display_in("s"), 2 * nu, verdict(deg)).unwrap();
    }
    for nu in 1..=rc.k {
        let r = sys.r(nu);
        let same = *r == r_poly_alternative(&rc.datum, nu);
        pass &= same;
        writeln!(text, "R_{nu} = {}  [both R forms agree: {}]", r.display_in("s"), verdict(same)).unwrap();
    }
    for mu in 1..=rc.k {
        writeln!(text, "V_{mu} = {}", sys.v(mu).display_in("s")).unwrap();
    }
    writeln!(text, "checks: {}", verdict(pass)).unwrap();
    let mut csv = Vec::new();
    write_coefficient_csv(&sys, &mut csv).expect("writing to memory");
    Ok(Outcome { text, csv: Some(String::from_utf8(csv).expect("ascii")), pass })
}

/// Deterministic points `sigma > 1/2` for the `alpha = 1` reduction, avoiding `s = 1`.
pub fn unit_reduction_points(prec: u32) -> Vec<Complex> {
    (0..UNIT_REDUCTION_POINTS)
        .map(|j| {
            let sigma = Float::with_val(prec, Rational::from((11 + 3 * j as i64, 20)));
            let t = Float::with_val(prec, Rational::from((2 * j as i64 - 19, 2)));
            Complex::with_val(prec, (sigma, t))
        })
        .collect()
}

fn identity_section(rc: &RunConfig) -> Result<Report> {
    let mut rep = Report::new("additive twists from multiplicative twists");
    if rc.primes.contains(&2) {
        let chk = p2_coefficientwise_check(&divisor_stream(), P2_COEFFICIENTS)?;
        rep.push(Record::flag(
            format!("p = 2, coefficients n <= {}", chk.checked),
            "d(n)(-1)^n equals the coefficients of F - 2F/F_2 exactly",
            format!("{} mismatches", chk.mismatches.len()),
            "0 mismatches",
            chk.holds(),
        ));
    }
    for &p in &rc.primes {
        for &(sn, sd) in &IDENTITY_SIGMAS {
            let sigma = Rational::from((sn, sd));
            let mut worst = 0.0f64;
            for t in &rc.t {
                let s = Complex::with_val(rc.precision, (&sigma, t));
                for a in 1..p as i64 {
                    let chk = additive_from_mult_identity_check(&Zeta2Oracle, &s, a, p, CharacterRoute::Native, rc.precision)?;
                    worst = worst.max(chk.difference);
                }
            }
            rep.push(Record::deviation(
                format!("p = {p}, sigma = {sigma}: max |lhs - rhs| over a and t"),
                "F(s,-a/p) from the character twists, the Gauss sums and F_p",
                worst,
                rc.tol,
            ));
        }
    }
    Ok(rep)
}

fn growth_section(rc: &RunConfig) -> Result<Report> {
    let mut rep = Report::new("growth certificates");
    let sigmas = rc.sigmas_f64();
    for pair in &rc.growth_pairs {
        let alpha = Fraction::new(1, pair.q as i64)?.reduce_mod_one();
        let h = pair.h.to_f64();
        for t in &rc.t {
            let samples = zeta2_growth_samples(alpha, &sigmas, t.to_f64(), rc.precision)?;
            let cert = growth_certificate(&samples, 2.0, h)?;
            let measured = format!(
                "C* = {:.3}, slope {:.4}, bounded {}, trend {}",
                cert.c_star,
                cert.slope,
                verdict(cert.bounded),
                verdict(cert.trend)
            );
            rep.push(Record::flag(
                format!("q = {}, h = {}, t = {t}", pair.q, pair.h),
                format!("F(s, {alpha}) has growth |sigma|^(2|sigma|) (h/(2 pi e)^2)^|sigma| |sigma|^C*"),
                measured,
                "|Delta| <= C* log|sigma| on held-out points, |Delta|/(|sigma| log|sigma|) non-increasing",
                cert.pass(),
            ));
        }
    }
    Ok(rep)
}

/// The full chain on the `zeta^2` instance. Sections appear in a fixed order.
pub fn cmd_verify(rc: &RunConfig) -> Result<Outcome> {
    let st = settings(rc);
    let tol = LawTolerances { law: rc.tol, ..LawTolerances::default() };
    let mut reports = Vec::new();

    let table = TwistLaurentTable::extract(&rc.datum, rc.q_max, &st)?;
    reports.push(verify_alpha_law(&table, &tol));
    reports.push(verify_beta_law(&table, &tol));

    for &p in rc.primes.iter().filter(|&&p| p > 2) {
        reports.push(verify_chi_holomorphy(p, &st, CHI_HOLOMORPHY_TOL)?);
    }

    let sys = PolynomialSystem::new(&rc.datum, rc.k);
    for &alpha in &rc.alphas {
        reports.push(transformation_consistency(&sys, alpha, rc.k, &st, rc.tol)?);
    }
    reports.push(transformation_unit_reduction(&sys, &unit_reduction_points(rc.precision), UNIT_REDUCTION_TOL, rc.precision)?);

    reports.push(identity_section(rc)?);
    reports.push(growth_section(rc)?);
    Ok(render(&reports))
}

/// Per prime: `alpha(1/p)`, the solved `F_p(1)`, the forced local factor and the degree bound.
pub fn cmd_euler(rc: &RunConfig) -> Result<Outcome> {
    let st = settings(rc);
    let q_f = rc
        .datum
        .conductor()
        .to_rational()
        .ok_or_else(|| twistlab::Error::Config("the conductor is not rational".into()))?;
    let mut reports = Vec::new();
    for &p in &rc.primes {
        let mut rep = Report::new(format!("Euler factor at p = {p}"));
        let e = euler_factor_at_1(&rc.datum, p, &st)?;
        let ratio = Complex::with_val(e.alpha_f.prec().0, &e.alpha_twisted / &e.alpha_f);
        let inv_p = Float::with_val(53, Rational::from((1, p))).to_f64();
        rep.push(Record::flag(
            "alpha(1/p) / alpha_F",
            "leading Laurent coefficient of F(s, 1/p) relative to F(s)",
            fmt_complex(&ratio),
            format!("{inv_p:.12}"),
            abs_f64(&Complex::with_val(53, &ratio - inv_p)) <= rc.tol,
        ));
        let expected = Float::with_val(rc.precision, Rational::from((p * p, (p - 1) * (p - 1))));
        let dev = abs_f64(&Complex::with_val(rc.precision, &e.value - &expected));
        let mut rec = Record::deviation(
            "F_p(1)",
            "F_p(1) = (1 - 1/p)^(-2)",
            dev,
            rc.tol,
        );
        rec.measured = format!("{} (deviation {dev:.3e})", fmt_complex(&e.value));
        rep.push(rec);

        let bound = degree_bound(&Rational::from(p * p), &q_f, p)?;
        rep.push(Record::exact("degree bound at h = p^2", "partial degree <= log(h/q_F)/log p", bound, 2));
        let (measured, ok) = match solve_local_factor(&e.value, p, bound, rc.tol) {
            LocalFactorSolution::Forced(lf) => {
                let roots: Vec<String> = lf.roots.iter().map(fmt_complex).collect();
                let ok = lf.partial_degree == 2 && lf.roots.iter().all(|a| abs_f64(&Complex::with_val(53, a - 1u32)) <= rc.tol);
                (format!("forced: partial degree {}, roots ({})", lf.partial_degree, roots.join(", ")), ok)
            }
            LocalFactorSolution::Infeasible { modulus, lower, upper } => {
                (format!("infeasible: |F_p(1)| = {modulus:.12} outside [{lower:.12}, {upper:.12}]"), false)
            }
            LocalFactorSolution::Underdetermined { modulus, lower, upper } => {
                (format!("underdetermined: |F_p(1)| = {modulus:.12} inside ({lower:.12}, {upper:.12})"), false)
            }
        };
        rep.push(Record::flag(
            "local factor",
            "the value at 1 forces (1 - p^-s)^-2",
            measured,
            "forced: partial degree 2, roots (1, 1)",
            ok,
        ));
        reports.push(rep);
    }
    Ok(render(&reports))
}

/// CSV of `F(sigma + i t, alpha)` over the grid.
pub fn cmd_twist_grid(rc: &RunConfig) -> Result<Outcome> {
    let source: Box<dyn LinearTwist> = match rc.source {
        GridSource::Oracle => Box::new(Zeta2Oracle),
        GridSource::Direct => Box::new(DirectTwist::new(Arc::new(divisor_stream()), rc.terms)),
    };
    let rows = twist_grid(source.as_ref(), &rc.sigma_grid, &rc.t, &rc.alphas, rc.precision)?;
    let mut buf = Vec::new();
    write_grid_csv(&rows, &mut buf).expect("writing to memory");
    Ok(Outcome { text: String::from_utf8(buf).expect("ascii"), csv: None, pass: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Command, FileConfig, Overrides};

    fn rc(cmd: Command, file: &str) -> RunConfig {
        RunConfig::resolve(cmd, &FileConfig::from_toml_str(file).unwrap(), &Overrides::default()).unwrap()
    }

    #[test]
    fn polys_k0_is_a_single_row() {
        let out = cmd_polys(&rc(Command::Polys, "K = 0")).unwrap();
        let rows: Vec<&str> = out.text.lines().filter(|l| l.starts_with(['Q', 'R', 'V'])).collect();
        assert_eq!(rows, vec!["Q_0 = 1"]);
        assert!(out.pass);
    }

    #[test]
    fn polys_k1_row() {
        let out = cmd_polys(&rc(Command::Polys, "K = 1")).unwrap();
        assert!(out.text.contains("Q_1 = -s^2  [divisible by s^2: PASS]  [degree 2: PASS]"), "{}", out.text);
        assert!(out.text.contains("R_1 = 2*s^2"));
    }

    #[test]
    fn unit_points_avoid_the_pole() {
        let pts = unit_reduction_points(64);
        assert_eq!(pts.len(), UNIT_REDUCTION_POINTS);
        for p in &pts {
            assert!(p.real().to_f64() > 0.5);
            assert!(*p != Complex::with_val(64, 1));
        }
    }

    #[test]
    fn grid_csv_shape() {
        let out = cmd_twist_grid(&rc(Command::TwistGrid, "precision = 64\nalphas = [\"1/2\"]")).unwrap();
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], twistlab::twist::GRID_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2,0,1/2,"));
    }
}
