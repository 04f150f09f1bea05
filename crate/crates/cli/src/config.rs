//! TOML job description.
//!
//! Symbols and digits are one-based in the file and zero-based in the
//! library. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use afflab_core::ifs::{self, AffineIfs, Alphabet, Generator, TailEnvelope};
use afflab_core::linalg::SquareMatrix;
use afflab_core::symbolic::{LevelKPotential, DEFAULT_WORD_BUDGET};

use crate::CliError;

pub const WORD_BUDGET_ENV: &str = "AFFLAB_WORD_BUDGET";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub seed: Option<u64>,
    pub system: SystemConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub dim: DimConfig,
    pub pressure: Option<PressureConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub certify: Option<CertifyConfig>,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `finite`, `diag_geometric` or `diag_power`.
    pub kind: String,
    /// Finite systems: one row-major `d×d` array per map.
    pub maps: Option<Vec<Vec<Vec<f64>>>>,
    pub scales: Option<Vec<f64>>,
    pub ratios: Option<Vec<f64>>,
    pub shift: Option<f64>,
    pub exponents: Option<Vec<f64>>,
    /// One-based symbols of the working alphabet.
    pub alphabet: Option<Vec<usize>>,
    pub envelope: Option<EnvelopeConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    /// `geometric` or `power_law`.
    pub kind: String,
    pub scale: f64,
    pub ratio: Option<f64>,
    pub shift: Option<f64>,
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "default_words")]
    pub words: u64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_gamma_len")]
    pub max_gamma_len: usize,
    #[serde(default = "default_check_depth")]
    pub check_depth: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_words() -> u64 {
    DEFAULT_WORD_BUDGET
}
fn default_depth() -> usize {
    8
}
fn default_gamma_len() -> usize {
    afflab_core::pressure::DEFAULT_MAX_GAMMA_LEN
}
fn default_check_depth() -> usize {
    afflab_core::pressure::DEFAULT_CHECK_DEPTH
}
fn default_tolerance() -> f64 {
    1e-10
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            words: default_words(),
            depth: default_depth(),
            max_gamma_len: default_gamma_len(),
            check_depth: default_check_depth(),
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimConfig {
    /// Truncation levels for infinite families.
    pub levels: Option<Vec<usize>>,
    pub s_infinity_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureConfig {
    pub s: Vec<f64>,
    /// Explicit depths; otherwise `1, 2, 4, …` up to `budget.depth`.
    pub depths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub potential: PotentialConfig,
    /// Targets, one vector per row.
    pub alpha: Option<Vec<Vec<f64>>>,
    /// One-dimensional grid `[start, stop]` with `points` values, endpoints included.
    pub alpha_range: Option<[f64; 2]>,
    pub points: Option<usize>,
    pub level: Option<usize>,
    /// One CSV per level.
    pub levels: Option<Vec<usize>>,
    pub q_cap: Option<f64>,
    /// Truncations for infinite families.
    pub truncations: Option<Vec<usize>>,
    pub s_infinity_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `digit_frequency` or `table`.
    pub kind: String,
    /// `digit_frequency`: one component per listed one-based digit.
    pub digits: Option<Vec<usize>>,
    /// `table`: block length of the tables.
    pub level: Option<usize>,
    /// `table`: one table of `ℓ^level` values per component.
    pub components: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Defaults to the shortest length with truncation error `<= 1e-6`.
    pub word_length: Option<usize>,
    /// `uniform`, `svf` or `weights`.
    #[serde(default = "default_measure")]
    pub measure: String,
    /// Exponent for `measure = "svf"`.
    pub s: Option<f64>,
    #[serde(default = "default_level")]
    pub level: usize,
    pub weights: Option<Vec<f64>>,
    /// Explicit `a_1, a_2, …`, used cyclically.
    pub translations: Option<Vec<Vec<f64>>>,
    /// Seed for sampled translations; defaults to the run seed.
    pub translation_seed: Option<u64>,
}

fn default_points() -> usize {
    10_000
}
fn default_measure() -> String {
    "uniform".into()
}
fn default_level() -> usize {
    1
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            points: default_points(),
            word_length: None,
            measure: default_measure(),
            s: None,
            level: default_level(),
            weights: None,
            translations: None,
            translation_seed: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

/// Where the word budget came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetSource {
    Config,
    Env,
}

impl BudgetSource {
    pub fn label(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Env => "env",
        }
    }
}

/// Parsed config plus the raw bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: JobConfig,
    pub raw: Vec<u8>,
    pub budget_source: BudgetSource,
}

pub fn load(path: &Path, env_budget: Option<&str>) -> Result<LoadedConfig, CliError> {
    let raw = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(raw, env_budget)
}

pub fn parse(raw: Vec<u8>, env_budget: Option<&str>) -> Result<LoadedConfig, CliError> {
    let text = std::str::from_utf8(&raw).map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
    let mut config: JobConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut budget_source = BudgetSource::Config;
    if let Some(v) = env_budget {
        config.budget.words = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{WORD_BUDGET_ENV} must be a positive integer, got {v:?}")))?;
        budget_source = BudgetSource::Env;
    }
    config.validate()?;
    Ok(LoadedConfig {
        config,
        raw,
        budget_source,
    })
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require<T: Clone>(field: &Option<T>, name: &str) -> Result<T, CliError> {
    field.clone().ok_or_else(|| bad(format!("missing `{name}`")))
}

fn positive(x: f64, name: &str) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("`{name}` must be positive and finite, got {x}")))
    }
}

fn at_least_one(x: usize, name: &str) -> Result<(), CliError> {
    if x >= 1 {
        Ok(())
    } else {
        Err(bad(format!("`{name}` must be at least 1")))
    }
}

fn increasing(levels: &[usize], name: &str) -> Result<(), CliError> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad(format!("`{name}` must be positive and strictly increasing")));
    }
    Ok(())
}

impl JobConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let b = &self.budget;
        if b.words == 0 {
            return Err(bad("`budget.words` must be at least 1"));
        }
        at_least_one(b.depth, "budget.depth")?;
        at_least_one(b.check_depth, "budget.check_depth")?;
        positive(b.tolerance, "budget.tolerance")?;
        if let Some(t) = self.dim.s_infinity_tolerance {
            positive(t, "dim.s_infinity_tolerance")?;
        }
        if let Some(levels) = &self.dim.levels {
            increasing(levels, "dim.levels")?;
        }
        if let Some(p) = &self.pressure {
            if p.s.is_empty() {
                return Err(bad("`pressure.s` is empty"));
            }
            if let Some(d) = &p.depths {
                if d.is_empty() || d.contains(&0) {
                    return Err(bad("`pressure.depths` must be non-empty and positive"));
                }
            }
        }
        if let Some(c) = &self.certify {
            if c.s.is_empty() {
                return Err(bad("`certify.s` is empty"));
            }
        }
        if let Some(sp) = &self.spectrum {
            if let Some(q) = sp.q_cap {
                positive(q, "spectrum.q_cap")?;
            }
            if let Some(t) = sp.s_infinity_tolerance {
                positive(t, "spectrum.s_infinity_tolerance")?;
            }
            if let Some(k) = sp.level {
                at_least_one(k, "spectrum.level")?;
            }
            if let Some(levels) = &sp.levels {
                increasing(levels, "spectrum.levels")?;
            }
            if let Some(t) = &sp.truncations {
                increasing(t, "spectrum.truncations")?;
            }
            match (&sp.alpha, &sp.alpha_range) {
                (Some(_), Some(_)) => return Err(bad("give either `spectrum.alpha` or `spectrum.alpha_range`")),
                (None, None) => return Err(bad("missing `spectrum.alpha` or `spectrum.alpha_range`")),
                (None, Some(_)) => at_least_one(sp.points.unwrap_or(0), "spectrum.points")?,
                _ => {}
            }
        }
        at_least_one(self.render.level, "render.level")?;
        Ok(())
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn build_ifs(&self) -> Result<AffineIfs, CliError> {
        let sys = &self.system;
        let ifs = match sys.kind.as_str() {
            "finite" => {
                let maps = require(&sys.maps, "system.maps")?;
                let mut out = Vec::with_capacity(maps.len());
                for (i, rows) in maps.iter().enumerate() {
                    let d = rows.len();
                    if d == 0 || rows.iter().any(|r| r.len() != d) {
                        return Err(bad(format!("map {} is not a square array", i + 1)));
                    }
                    out.push(SquareMatrix::from_row_major(d, rows.concat())?);
                }
                AffineIfs::finite(out)?
            }
            "diag_geometric" => {
                let scales = require(&sys.scales, "system.scales")?;
                let ratios = require(&sys.ratios, "system.ratios")?;
                if scales.len() != ratios.len() || scales.is_empty() {
                    return Err(bad("`system.scales` and `system.ratios` must have equal, non-zero length"));
                }
                infinite(Generator::DiagGeometric { scales, ratios }, &sys.envelope)?
            }
            "diag_power" => {
                let scales = require(&sys.scales, "system.scales")?;
                let exponents = require(&sys.exponents, "system.exponents")?;
                let shift = sys.shift.unwrap_or(0.0);
                if scales.len() != exponents.len() || scales.is_empty() {
                    return Err(bad("`system.scales` and `system.exponents` must have equal, non-zero length"));
                }
                if !(shift > -1.0) {
                    return Err(bad("`system.shift` must exceed -1"));
                }
                infinite(
                    Generator::DiagPower {
                        scales,
                        shift,
                        exponents,
                    },
                    &sys.envelope,
                )?
            }
            other => return Err(bad(format!("unknown system kind {other:?}"))),
        };
        ifs::validate(&ifs, ifs::DEFAULT_PROBE_DEPTH)?;
        Ok(ifs)
    }

    /// The working alphabet: `system.alphabet`, or every map of a finite system.
    pub fn alphabet(&self, ifs: &AffineIfs) -> Result<Alphabet, CliError> {
        match &self.system.alphabet {
            Some(symbols) => {
                if symbols.contains(&0) {
                    return Err(bad("`system.alphabet` is one-based"));
                }
                let a = Alphabet::new(symbols.iter().map(|s| s - 1).collect())?;
                if let Some(n) = ifs.len() {
                    if let Some(&s) = a.symbols().iter().find(|&&s| s >= n) {
                        return Err(bad(format!("symbol {} exceeds the {n} maps", s + 1)));
                    }
                }
                Ok(a)
            }
            None if ifs.is_finite() => Ok(ifs.full_alphabet()?),
            None => Err(bad("infinite families need `system.alphabet`")),
        }
    }
}

fn infinite(generator: Generator, envelope: &Option<EnvelopeConfig>) -> Result<AffineIfs, CliError> {
    let env = match envelope {
        None => generator
            .default_envelope()
            .ok_or_else(|| bad("generator has no default envelope"))?,
        Some(e) => match e.kind.as_str() {
            "geometric" => TailEnvelope::Geometric {
                scale: e.scale,
                ratio: require(&e.ratio, "system.envelope.ratio")?,
            },
            "power_law" => TailEnvelope::PowerLaw {
                scale: e.scale,
                shift: e.shift.unwrap_or(0.0),
                exponent: require(&e.exponent, "system.envelope.exponent")?,
            },
            other => return Err(bad(format!("unknown envelope kind {other:?}"))),
        },
    };
    Ok(AffineIfs::infinite(generator, env)?)
}

impl PotentialConfig {
    pub fn build(&self, alphabet_size: usize) -> Result<LevelKPotential, CliError> {
        match self.kind.as_str() {
            "digit_frequency" => {
                let digits = require(&self.digits, "spectrum.potential.digits")?;
                if digits.is_empty() {
                    return Err(bad("`spectrum.potential.digits` is empty"));
                }
                if let Some(&d) = digits.iter().find(|&&d| d == 0 || d > alphabet_size) {
                    return Err(bad(format!("digit {d} outside 1..={alphabet_size}")));
                }
                let comps = digits
                    .iter()
                    .map(|&d| (0..alphabet_size).map(|j| if j + 1 == d { 1.0 } else { 0.0 }).collect())
                    .collect();
                Ok(LevelKPotential::new(1, alphabet_size, comps)?)
            }
            "table" => {
                let level = require(&self.level, "spectrum.potential.level")?;
                let comps = require(&self.components, "spectrum.potential.components")?;
                LevelKPotential::new(level, alphabet_size, comps)
                    .map_err(|e| bad(format!("incomplete potential table: {e}")))
            }
            other => Err(bad(format!("unknown potential kind {other:?}"))),
        }
    }
}

impl SpectrumConfig {
    pub fn grid(&self) -> Vec<Vec<f64>> {
        if let Some(a) = &self.alpha {
            return a.clone();
        }
        let [lo, hi] = self.alpha_range.unwrap_or([0.0, 0.0]);
        let n = self.points.unwrap_or(1);
        if n == 1 {
            return vec![vec![lo]];
        }
        (0..n)
            .map(|i| vec![if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MORAN: &str = r#"
seed = 3
[system]
kind = "finite"
maps = [ [[0.3333333333333333, 0.0], [0.0, 0.3333333333333333]],
         [[0.3333333333333333, 0.0], [0.0, 0.3333333333333333]] ]
"#;

    #[test]
    fn parses_minimal_config() {
        let c = parse(MORAN.as_bytes().to_vec(), None).unwrap();
        assert_eq!(c.config.budget.words, DEFAULT_WORD_BUDGET);
        assert_eq!(c.config.seed(None), 3);
        assert_eq!(c.config.seed(Some(9)), 9);
        let ifs = c.config.build_ifs().unwrap();
        assert_eq!(c.config.alphabet(&ifs).unwrap().len(), 2);
    }

    #[test]
    fn env_overrides_budget() {
        let c = parse(MORAN.as_bytes().to_vec(), Some("1234")).unwrap();
        assert_eq!(c.config.budget.words, 1234);
        assert_eq!(c.budget_source, BudgetSource::Env);
        assert!(parse(MORAN.as_bytes().to_vec(), Some("lots")).is_err());
        assert!(parse(MORAN.as_bytes().to_vec(), Some("0")).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = format!("{MORAN}\nfoo = 1\n");
        assert!(matches!(parse(unknown.into_bytes(), None), Err(CliError::Config(_))));
        let tol = format!("{MORAN}\n[budget]\ntolerance = 0.0\n");
        assert!(parse(tol.into_bytes(), None).is_err());
        let expanding = "[system]\nkind = \"finite\"\nmaps = [[[2.0]]]\n";
        let c = parse(expanding.as_bytes().to_vec(), None).unwrap();
        assert!(c.config.build_ifs().is_err());
        let ragged = "[system]\nkind = \"finite\"\nmaps = [[[0.2, 0.0], [0.1]]]\n";
        let c = parse(ragged.as_bytes().to_vec(), None).unwrap();
        assert!(c.config.build_ifs().is_err());
    }

    #[test]
    fn incomplete_table_is_a_config_error() {
        let p = PotentialConfig {
            kind: "table".into(),
            digits: None,
            level: Some(2),
            components: Some(vec![vec![0.0, 1.0, 0.5]]),
        };
        assert!(matches!(p.build(2), Err(CliError::Config(_))));
        let d = PotentialConfig {
            kind: "digit_frequency".into(),
            digits: Some(vec![2]),
            level: None,
            components: None,
        };
        assert_eq!(d.build(3).unwrap().components()[0], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn alpha_range_includes_endpoints() {
        let s = SpectrumConfig {
            potential: PotentialConfig {
                kind: "digit_frequency".into(),
                digits: Some(vec![1]),
                level: None,
                components: None,
            },
            alpha: None,
            alpha_range: Some([0.1, 0.9]),
            points: Some(9),
            level: None,
            levels: None,
            q_cap: None,
            truncations: None,
            s_infinity_tolerance: None,
        };
        let g = s.grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.1]);
        assert_eq!(g[8], vec![0.9]);
    }
}
