//! Run configuration: a TOML file, command-line overrides on top, then per-command defaults.

use std::path::{Path, PathBuf};

use rug::Rational;
use serde::Deserialize;
use twistlab::fe_core::FunctionalEquationDatum;
use twistlab::number::{parse_rational, Fraction};
use twistlab::{Error, Result};

pub const MIN_PRECISION: u32 = 64;
pub const MAX_PRECISION: u32 = 4096;
pub const MAX_K: usize = 16;
pub const MAX_QMAX: u64 = 24;
pub const MAX_EULER_PRIME: u64 = 13;

/// A number in the config file, written either as a TOML number or as a string such as `"-5/2"`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Int(n) => n.to_string(),
            Scalar::Float(x) => x.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

/// Either one value or a list of them.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany {
    One(Scalar),
    Many(Vec<Scalar>),
}

impl OneOrMany {
    fn texts(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.text()],
            OneOrMany::Many(v) => v.iter().map(Scalar::text).collect(),
        }
    }
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub precision: Option<u32>,
    pub instance: Option<String>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub qmax: Option<u64>,
    pub primes: Option<Vec<u64>>,
    pub sigma_grid: Option<OneOrMany>,
    pub t: Option<OneOrMany>,
    pub tol: Option<Scalar>,
    pub alphas: Option<OneOrMany>,
    pub growth_pairs: Option<Vec<String>>,
    pub source: Option<String>,
    pub terms: Option<usize>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl FileConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// Values given on the command line, as raw text. They win over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub precision: Option<u32>,
    pub instance: Option<String>,
    pub k: Option<usize>,
    pub qmax: Option<u64>,
    pub primes: Option<String>,
    pub sigma_grid: Option<String>,
    pub t: Option<String>,
    pub tol: Option<String>,
    pub alphas: Option<String>,
    pub growth_pairs: Option<String>,
    pub source: Option<String>,
    pub terms: Option<usize>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Polys,
    Verify,
    Euler,
    TwistGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridSource {
    Oracle,
    Direct,
}

/// A `(q, h)` pair for the growth certificate of `F(s, 1/q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthPair {
    pub q: u64,
    pub h: Rational,
}

/// Fully resolved and validated settings for one command.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub precision: u32,
    pub instance: String,
    pub datum: FunctionalEquationDatum,
    pub k: usize,
    pub q_max: u64,
    pub primes: Vec<u64>,
    pub sigma_grid: Vec<Rational>,
    pub t: Vec<Rational>,
    pub tol: f64,
    pub alphas: Vec<Fraction>,
    pub growth_pairs: Vec<GrowthPair>,
    pub source: GridSource,
    pub terms: usize,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Flag text if present, else the file's list, else `default`.
fn pick_list(flag: &Option<String>, file: Option<Vec<String>>, default: &[&str]) -> Vec<String> {
    match (flag, file) {
        (Some(text), _) => split_list(text),
        (None, Some(v)) => v,
        (None, None) => default.iter().map(|s| s.to_string()).collect(),
    }
}

fn parse_rationals(name: &str, items: &[String]) -> Result<Vec<Rational>> {
    if items.is_empty() {
        return Err(cfg(format!("{name} must not be empty")));
    }
    items.iter().map(|s| parse_rational(s).map_err(|e| cfg(format!("{name}: {e}")))).collect()
}

fn parse_alpha(text: &str) -> std::result::Result<Fraction, String> {
    if let Ok(f) = Fraction::parse(text) {
        return Ok(f);
    }
    let r = parse_rational(text).map_err(|e| e.to_string())?;
    let num = r.numer().to_i64().ok_or("numerator out of range")?;
    let den = r.denom().to_i64().ok_or("denominator out of range")?;
    Fraction::new(num, den).map_err(|e| e.to_string())
}

fn parse_pair(text: &str) -> Result<GrowthPair> {
    let (q, h) = text
        .split_once(':')
        .ok_or_else(|| cfg(format!("growth pair {text:?} is not of the form q:h")))?;
    let q: u64 = q.trim().parse().map_err(|_| cfg(format!("growth pair {text:?}: bad q")))?;
    if q == 0 {
        return Err(cfg("growth pair: q must be positive"));
    }
    let h = parse_rational(h.trim()).map_err(|e| cfg(format!("growth pair {text:?}: {e}")))?;
    if h <= 0 {
        return Err(cfg(format!("growth pair {text:?}: h must be positive")));
    }
    Ok(GrowthPair { q, h })
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

fn load_instance(name: &str) -> Result<FunctionalEquationDatum> {
    match name {
        "zeta2" => Ok(FunctionalEquationDatum::zeta2()),
        "zeta" => Ok(FunctionalEquationDatum::zeta()),
        path => FunctionalEquationDatum::from_path(path),
    }
}

impl RunConfig {
    /// Layers `flags` over `file` over the defaults of `command`, then checks the guard rails.
    pub fn resolve(command: Command, file: &FileConfig, flags: &Overrides) -> Result<Self> {
        let precision = flags.precision.or(file.precision).unwrap_or(128);
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&precision) {
            return Err(cfg(format!("precision {precision} outside {MIN_PRECISION}..={MAX_PRECISION}")));
        }
        let instance = flags.instance.clone().or_else(|| file.instance.clone()).unwrap_or_else(|| "zeta2".into());
        let datum = load_instance(&instance)?;

        let k = flags.k.or(file.k).unwrap_or(8);
        if k > MAX_K {
            return Err(cfg(format!("K = {k} exceeds {MAX_K}")));
        }
        let q_max = flags.qmax.or(file.qmax).unwrap_or(6);
        if !(1..=MAX_QMAX).contains(&q_max) {
            return Err(cfg(format!("qmax = {q_max} outside 1..={MAX_QMAX}")));
        }

        let primes_text = pick_list(
            &flags.primes,
            file.primes.as_ref().map(|v| v.iter().map(u64::to_string).collect()),
            &["2", "3", "5"],
        );
        let primes = primes_text
            .iter()
            .map(|s| s.parse::<u64>().map_err(|_| cfg(format!("primes: {s:?} is not an integer"))))
            .collect::<Result<Vec<_>>>()?;
        if primes.is_empty() {
            return Err(cfg("primes must not be empty"));
        }
        if let Some(p) = primes.iter().find(|&&p| !is_prime(p)) {
            return Err(cfg(format!("primes: {p} is not prime")));
        }

        let (sigma_default, t_default, alpha_default): (&[&str], &[&str], &[&str]) = match command {
            Command::TwistGrid => (&["2", "3"], &["0"], &["0", "1/2", "1/3"]),
            _ => (&["-10", "-20", "-30", "-40"], &["5"], &["1/2", "1/3", "2/3"]),
        };
        let sigma_grid =
            parse_rationals("sigma grid", &pick_list(&flags.sigma_grid, file.sigma_grid.as_ref().map(OneOrMany::texts), sigma_default))?;
        let t = parse_rationals("t", &pick_list(&flags.t, file.t.as_ref().map(OneOrMany::texts), t_default))?;

        let tol_text = flags.tol.clone().or_else(|| file.tol.as_ref().map(Scalar::text)).unwrap_or_else(|| "1e-8".into());
        // f64 parsing rounds correctly; rationals such as "1/1000" go through rug
        let tol = match tol_text.trim().parse::<f64>() {
            Ok(x) => x,
            Err(_) => parse_rational(&tol_text).map_err(|e| cfg(format!("tol: {e}")))?.to_f64(),
        };
        if !(tol > 0.0) {
            return Err(cfg("tol must be positive"));
        }

        let alphas = pick_list(&flags.alphas, file.alphas.as_ref().map(OneOrMany::texts), alpha_default)
            .iter()
            .map(|s| parse_alpha(s).map_err(|e| cfg(format!("alphas: {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if alphas.is_empty() {
            return Err(cfg("alphas must not be empty"));
        }

        let growth_pairs = pick_list(&flags.growth_pairs, file.growth_pairs.clone(), &["1:1", "3:9"])
            .iter()
            .map(|s| parse_pair(s))
            .collect::<Result<Vec<_>>>()?;

        let source = match flags.source.clone().or_else(|| file.source.clone()).as_deref() {
            None | Some("oracle") => GridSource::Oracle,
            Some("direct") => GridSource::Direct,
            Some(other) => return Err(cfg(format!("source {other:?} is neither \"oracle\" nor \"direct\""))),
        };
        let terms = flags.terms.or(file.terms).unwrap_or(100_000);
        if terms == 0 {
            return Err(cfg("terms must be positive"));
        }

        let rc = Self {
            command,
            precision,
            instance,
            datum,
            k,
            q_max,
            primes,
            sigma_grid,
            t,
            tol,
            alphas,
            growth_pairs,
            source,
            terms,
            out: flags.out.clone().or_else(|| file.out.clone()),
            csv: flags.csv.clone().or_else(|| file.csv.clone()),
        };
        rc.check_command()?;
        Ok(rc)
    }

    fn check_command(&self) -> Result<()> {
        let zeta2 = self.datum == FunctionalEquationDatum::zeta2();
        match self.command {
            Command::Polys => self.datum.require_degree_two(),
            Command::Verify => {
                if !zeta2 {
                    return Err(cfg("verify runs on the zeta2 instance only"));
                }
                if let Some(a) = self.alphas.iter().find(|a| !a.is_positive() || a.is_integer()) {
                    return Err(cfg(format!("alphas: {a} must be positive and not an integer")));
                }
                if let Some(s) = self.sigma_grid.iter().find(|s| **s > -2) {
                    return Err(cfg(format!("sigma grid: growth samples need sigma <= -2, got {s}")));
                }
                if self.sigma_grid.len() < 2 {
                    return Err(cfg("sigma grid: the growth certificate needs at least two points"));
                }
                Ok(())
            }
            Command::Euler => {
                if !zeta2 {
                    return Err(cfg("euler runs on the zeta2 instance only"));
                }
                if let Some(p) = self.primes.iter().find(|&&p| p > MAX_EULER_PRIME) {
                    return Err(cfg(format!("primes: {p} exceeds {MAX_EULER_PRIME}")));
                }
                Ok(())
            }
            Command::TwistGrid => {
                if !zeta2 {
                    return Err(cfg("twist-grid evaluates the zeta2 instance only"));
                }
                if self.source == GridSource::Direct {
                    if let Some(s) = self.sigma_grid.iter().find(|s| **s <= 1) {
                        return Err(cfg(format!("direct series need sigma > 1, got {s}")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn sigmas_f64(&self) -> Vec<f64> {
        self.sigma_grid.iter().map(Rational::to_f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(cmd: Command, file: &str, flags: Overrides) -> Result<RunConfig> {
        RunConfig::resolve(cmd, &FileConfig::from_toml_str(file)?, &flags)
    }

    #[test]
    fn defaults_per_command() {
        let v = resolve(Command::Verify, "", Overrides::default()).unwrap();
        assert_eq!((v.precision, v.k, v.q_max), (128, 8, 6));
        assert_eq!(v.primes, vec![2, 3, 5]);
        assert_eq!(v.sigma_grid.len(), 4);
        assert_eq!(v.growth_pairs.len(), 2);
        assert_eq!(v.tol, 1e-8);
        let g = resolve(Command::TwistGrid, "", Overrides::default()).unwrap();
        assert_eq!(g.alphas[0], Fraction::ZERO);
        assert_eq!(g.sigma_grid, vec![Rational::from(2), Rational::from(3)]);
    }

    #[test]
    fn flags_override_file_and_scalars_take_both_forms() {
        let file = "precision = 96\nK = 3\nsigma_grid = [-10, \"-25/2\", -30.5]\nt = 2.5\ntol = \"1e-9\"\n";
        let flags = Overrides { k: Some(2), ..Default::default() };
        let rc = resolve(Command::Verify, file, flags).unwrap();
        assert_eq!(rc.precision, 96);
        assert_eq!(rc.k, 2);
        assert_eq!(rc.sigma_grid[1], Rational::from((-25, 2)));
        assert_eq!(rc.sigma_grid[2], Rational::from((-61, 2)));
        assert_eq!(rc.t, vec![Rational::from((5, 2))]);
        assert_eq!(rc.tol, 1e-9);
        let flags = Overrides { sigma_grid: Some("-3,-4".into()), ..Default::default() };
        let rc = resolve(Command::Verify, file, flags).unwrap();
        assert_eq!(rc.sigma_grid, vec![Rational::from(-3), Rational::from(-4)]);
    }

    #[test]
    fn guard_rails() {
        let bad = |file: &str| resolve(Command::Verify, file, Overrides::default()).is_err();
        assert!(bad("precision = 32"));
        assert!(bad("K = 17"));
        assert!(bad("qmax = 25"));
        assert!(bad("qmax = 0"));
        assert!(bad("primes = [2, 4]"));
        assert!(bad("tol = -1"));
        assert!(bad("unknown = 1"));
        assert!(bad("alphas = [\"1\"]"));
        assert!(bad("sigma_grid = [-1, -10]"));
        assert!(bad("growth_pairs = [\"3\"]"));
        assert!(bad("instance = \"zeta\""));
        assert!(resolve(Command::Verify, "K = 16\nqmax = 24", Overrides::default()).is_ok());
        let e = |p: &str| resolve(Command::Euler, &format!("primes = [{p}]"), Overrides::default());
        assert!(e("13").is_ok());
        assert!(e("17").is_err());
        let direct = "source = \"direct\"\nsigma_grid = [1]";
        assert!(resolve(Command::TwistGrid, direct, Overrides::default()).is_err());
    }

    #[test]
    fn growth_pairs_and_alphas_parse() {
        let rc = resolve(
            Command::Verify,
            "growth_pairs = [\"3:1\", \"2:4\"]\nalphas = [\"0.5\", \"2/3\"]",
            Overrides::default(),
        )
        .unwrap();
        assert_eq!(rc.growth_pairs[0], GrowthPair { q: 3, h: Rational::from(1) });
        assert_eq!(rc.alphas, vec![Fraction::new(1, 2).unwrap(), Fraction::new(2, 3).unwrap()]);
    }
}
