//! Flat `key = value` config with `[section]` headers.
//!
//! ```text
//! [input]
//! path = data/synthetic_panel.csv
//! reporters = CZ, HU, PL, SK
//!
//! [model]
//! trend = bexr
//! trend.SK = ex
//! ```
//!
//! Lines starting with `#` or `;` are comments. Lists are comma separated.
//! Relative input paths resolve against the config file's directory;
//! the output directory resolves against the working directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dgp::{DgpSpec, EffectMode, Heteroskedasticity, BETA_NAMES};
use crate::error::{Error, Result};
use crate::gravity::{GrowthUnits, Relation};
use crate::ivdiag::PhIndicators;
use crate::montecarlo::Analysis;

/// Parsed sections in file order of keys. Keys keep their case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDocument::default();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", i + 1)))?;
                current = name.trim().to_ascii_lowercase();
                doc.sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            if current.is_empty() {
                return Err(Error::Config(format!("line {}: key outside any section", i + 1)));
            }
            let key = k.trim().to_string();
            let section = doc.sections.entry(current.clone()).or_default();
            if section.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{current}.{key}`", i + 1)));
            }
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn keys(&self, section: &str) -> impl Iterator<Item = &String> {
        self.sections.get(section).into_iter().flat_map(|s| s.keys())
    }

    /// Rejects keys outside `allowed` (a trailing `.` allows any suffix).
    fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        for key in self.keys(section) {
            let ok = allowed.iter().any(|a| match a.strip_suffix('.') {
                Some(prefix) => key.strip_prefix(prefix).is_some_and(|r| r.starts_with('.')),
                None => key == a,
            });
            if !ok {
                return Err(Error::Config(format!("unknown key `{section}.{key}`")));
            }
        }
        Ok(())
    }

    fn parsed<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{section}.{key}`: cannot parse {v:?}"))),
        }
    }

    fn list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.get(section, key).map(split_list)
    }
}

pub fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RobustMode {
    /// Robust errors iff Pagan-Hall rejects.
    #[default]
    Auto,
    On,
    Off,
}

impl RobustMode {
    pub fn force(self) -> Option<bool> {
        match self {
            RobustMode::Auto => None,
            RobustMode::On => Some(true),
            RobustMode::Off => Some(false),
        }
    }
}

/// Which residuals feed the cross-sectional dependence tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualSource {
    #[default]
    FixedEffects,
    PooledOls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    /// Optional reporter-by-year world totals for the share block.
    pub totals: Option<PathBuf>,
    /// Reporters to run, in column order; empty means every reporter in the file.
    pub reporters: Vec<String>,
    /// Partner universe; each reporter uses it minus itself. `None` keeps the file's partners.
    pub partners: Option<Vec<String>>,
    /// Partners coded 1 in the dummy; `None` reads the `cee_partner` column.
    pub cee: Option<Vec<String>>,
    pub years: Option<(i32, i32)>,
    pub max_gap: usize,
    pub growth_units: GrowthUnits,
    pub relations: Vec<Relation>,
    pub adf_lags: usize,
    /// Table-4 variable keys tested with a trend, for every reporter.
    pub trend: Vec<String>,
    /// Extra trend variables per reporter.
    pub trend_by_reporter: BTreeMap<String, Vec<String>>,
    /// Pagan-Hall level of the robust-path switch.
    pub alpha: f64,
    pub hausman_alpha: f64,
    pub robust: RobustMode,
    pub pagan_hall_indicators: PhIndicators,
    pub cd_residuals: ResidualSource,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Variable keys of the unit-root table, in row order.
pub const UNIT_ROOT_VARIABLES: [&str; 11] = [
    "ex", "im", "outfdi", "infdi", "gdpav", "gdpdif", "gdpcav", "gdpcdif", "gdpg", "popav", "bexr",
];

pub const DEFAULT_SEED: u64 = 20_030_101;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            totals: None,
            reporters: Vec::new(),
            partners: None,
            cee: None,
            years: None,
            max_gap: 2,
            growth_units: GrowthUnits::PercentagePoints,
            relations: Relation::ALL.to_vec(),
            adf_lags: 2,
            trend: Vec::new(),
            trend_by_reporter: BTreeMap::new(),
            alpha: 0.05,
            hausman_alpha: 0.05,
            robust: RobustMode::Auto,
            pagan_hall_indicators: PhIndicators::Instruments,
            cd_residuals: ResidualSource::FixedEffects,
            output_dir: PathBuf::from("out"),
            seed: DEFAULT_SEED,
        }
    }
}

const SECTIONS: [&str; 7] = ["input", "panel", "model", "output", "run", "dgp", "mc"];

impl PipelineConfig {
    /// Reads and parses `path`, resolving relative input paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, ConfigDocument)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc = ConfigDocument::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let cfg = Self::from_document(&doc, base)?;
        Ok((cfg, doc))
    }

    pub fn from_document(doc: &ConfigDocument, base: &Path) -> Result<Self> {
        for s in doc.sections.keys() {
            if !SECTIONS.contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown section `[{s}]`")));
            }
        }
        doc.check_keys("input", &["path", "totals", "reporters", "reporter"])?;
        doc.check_keys("panel", &["partners", "cee", "first_year", "last_year", "max_gap", "growth_units"])?;
        doc.check_keys(
            "model",
            &[
                "relationships",
                "adf_lags",
                "trend",
                "trend.",
                "alpha",
                "hausman_alpha",
                "robust",
                "pagan_hall_indicators",
                "cd_residuals",
            ],
        )?;
        doc.check_keys("output", &["dir"])?;
        doc.check_keys("run", &["seed"])?;

        let mut cfg = PipelineConfig::default();
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() { p } else { base.join(p) }
        };
        if let Some(p) = doc.get("input", "path") {
            cfg.input = resolve(p);
        }
        cfg.totals = doc.get("input", "totals").map(resolve);
        if let Some(r) = doc.list("input", "reporters").or_else(|| doc.list("input", "reporter")) {
            cfg.reporters = r;
        }
        cfg.partners = doc.list("panel", "partners");
        cfg.cee = doc.list("panel", "cee");
        let first: Option<i32> = doc.parsed("panel", "first_year")?;
        let last: Option<i32> = doc.parsed("panel", "last_year")?;
        cfg.years = match (first, last) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Config("set both panel.first_year and panel.last_year".into())),
        };
        if let Some(g) = doc.parsed("panel", "max_gap")? {
            cfg.max_gap = g;
        }
        if let Some(u) = doc.get("panel", "growth_units") {
            cfg.growth_units = match u.to_ascii_lowercase().as_str() {
                "percent" | "percentage_points" => GrowthUnits::PercentagePoints,
                "fraction" => GrowthUnits::Fraction,
                other => return Err(Error::Config(format!("unknown growth_units `{other}`"))),
            };
        }
        if let Some(rs) = doc.list("model", "relationships") {
            cfg.relations = rs.iter().map(|r| r.parse()).collect::<Result<_>>()?;
        }
        if let Some(l) = doc.parsed("model", "adf_lags")? {
            cfg.adf_lags = l;
        }
        if let Some(t) = doc.list("model", "trend") {
            cfg.trend = t;
        }
        for key in doc.keys("model") {
            if let Some(rep) = key.strip_prefix("trend.") {
                cfg.trend_by_reporter
                    .insert(rep.to_string(), doc.list("model", key).unwrap_or_default());
            }
        }
        if let Some(a) = doc.parsed("model", "alpha")? {
            cfg.alpha = a;
        }
        if let Some(a) = doc.parsed("model", "hausman_alpha")? {
            cfg.hausman_alpha = a;
        }
        if let Some(r) = doc.get("model", "robust") {
            cfg.robust = match r.to_ascii_lowercase().as_str() {
                "auto" => RobustMode::Auto,
                "on" | "true" | "yes" => RobustMode::On,
                "off" | "false" | "no" => RobustMode::Off,
                other => return Err(Error::Config(format!("unknown robust mode `{other}`"))),
            };
        }
        if let Some(i) = doc.get("model", "pagan_hall_indicators") {
            cfg.pagan_hall_indicators = i.parse()?;
        }
        if let Some(r) = doc.get("model", "cd_residuals") {
            cfg.cd_residuals = match r.to_ascii_lowercase().as_str() {
                "fe" | "within" => ResidualSource::FixedEffects,
                "ols" | "pooled" => ResidualSource::PooledOls,
                other => return Err(Error::Config(format!("unknown cd_residuals `{other}`"))),
            };
        }
        if let Some(d) = doc.get("output", "dir") {
            cfg.output_dir = PathBuf::from(d);
        }
        if let Some(s) = doc.parsed("run", "seed")? {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("input.path is required".into()));
        }
        if let Some(p) = &self.partners {
            if p.len() < 2 {
                return Err(Error::Config("partner set needs at least 2 partners".into()));
            }
            if let Some(c) = &self.cee {
                if let Some(bad) = c.iter().find(|x| !p.contains(x)) {
                    return Err(Error::Config(format!("CEE partner `{bad}` is not in the partner set")));
                }
            }
        }
        if let Some((a, b)) = self.years {
            if b < a + 3 {
                return Err(Error::Config(format!("year range {a}-{b} covers fewer than 4 periods")));
            }
        }
        if self.relations.is_empty() {
            return Err(Error::Config("no relationships selected".into()));
        }
        for (key, a) in [("model.alpha", self.alpha), ("model.hausman_alpha", self.hausman_alpha)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("{key} = {a} outside (0, 1)")));
            }
        }
        for v in self.trend.iter().chain(self.trend_by_reporter.values().flatten()) {
            if !UNIT_ROOT_VARIABLES.contains(&v.as_str()) {
                return Err(Error::Config(format!("unknown unit-root variable `{v}` in trend list")));
            }
        }
        Ok(())
    }

    pub fn has_trend(&self, reporter: &str, variable: &str) -> bool {
        self.trend.iter().any(|v| v == variable)
            || self
                .trend_by_reporter
                .get(reporter)
                .is_some_and(|vs| vs.iter().any(|v| v == variable))
    }

    /// Canonical text of the effective settings, hashed into the provenance
    /// footer. Paths appear by file name only so reports do not depend on
    /// where the repository lives.
    pub fn canonical(&self) -> String {
        let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let list = |v: &[String]| v.join(",");
        let mut s = String::new();
        s += &format!("input={}\n", name(&self.input));
        s += &format!("totals={}\n", self.totals.as_deref().map(name).unwrap_or_default());
        s += &format!("reporters={}\n", list(&self.reporters));
        s += &format!("partners={}\n", self.partners.as_deref().map(list).unwrap_or_default());
        s += &format!("cee={}\n", self.cee.as_deref().map(list).unwrap_or_default());
        s += &format!("years={:?}\n", self.years);
        s += &format!("max_gap={}\n", self.max_gap);
        s += &format!("growth_units={:?}\n", self.growth_units);
        s += &format!(
            "relationships={}\n",
            self.relations.iter().map(|r| r.key()).collect::<Vec<_>>().join(",")
        );
        s += &format!("adf_lags={}\n", self.adf_lags);
        s += &format!("trend={}\n", list(&self.trend));
        for (r, v) in &self.trend_by_reporter {
            s += &format!("trend.{r}={}\n", list(v));
        }
        s += &format!("alpha={}\nhausman_alpha={}\n", self.alpha, self.hausman_alpha);
        s += &format!("robust={:?}\n", self.robust);
        s += &format!("pagan_hall_indicators={:?}\n", self.pagan_hall_indicators);
        s += &format!("cd_residuals={:?}\n", self.cd_residuals);
        s += &format!("seed={}\n", self.seed);
        s
    }
}

/// `[dgp]` and `[mc]` sections.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub analyses: Vec<Analysis>,
    pub reps: usize,
}

impl McConfig {
    pub fn from_document(doc: &ConfigDocument) -> Result<Self> {
        let dgp = dgp_from_document(doc)?;
        doc.check_keys("mc", &["reps", "analyses"])?;
        let reps = doc.parsed("mc", "reps")?.unwrap_or(1000);
        let analyses = match doc.list("mc", "analyses") {
            Some(a) => a.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => Analysis::ALL.to_vec(),
        };
        Ok(Self { dgp, analyses, reps })
    }
}

/// Builds a [`DgpSpec`] from `[dgp]`, starting from the default design.
pub fn dgp_from_document(doc: &ConfigDocument) -> Result<DgpSpec> {
    doc.check_keys(
        "dgp",
        &[
            "n_entities",
            "n_periods",
            "first_year",
            "intercept",
            "beta",
            "beta.",
            "sigma_alpha",
            "sigma_e",
            "sigma_fdi_between",
            "sigma_fdi_within",
            "effect_corr",
            "endogeneity",
            "hetero",
            "cross_dependence",
            "persistence",
            "seed",
        ],
    )?;
    let mut spec = DgpSpec::default();
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = doc.parsed("dgp", stringify!($field))? {
                spec.$field = v;
            }
        };
    }
    set!(n_entities);
    set!(n_periods);
    set!(first_year);
    set!(intercept);
    set!(sigma_alpha);
    set!(sigma_e);
    set!(sigma_fdi_between);
    set!(sigma_fdi_within);
    set!(endogeneity);
    set!(cross_dependence);
    set!(persistence);
    set!(seed);
    if let Some(b) = doc.list("dgp", "beta") {
        spec.beta = b
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("dgp.beta: cannot parse {v:?}"))))
            .collect::<Result<_>>()?;
    }
    for (j, name) in BETA_NAMES.iter().enumerate() {
        if let Some(v) = doc.parsed::<f64>("dgp", &format!("beta.{name}"))? {
            if j < spec.beta.len() {
                spec.beta[j] = v;
            }
        }
    }
    if let Some(rho) = doc.parsed::<f64>("dgp", "effect_corr")? {
        spec.effect_mode = if rho == 0.0 { EffectMode::Random } else { EffectMode::Correlated(rho) };
    }
    if let Some(g) = doc.parsed::<f64>("dgp", "hetero")? {
        spec.heteroskedasticity = if g == 0.0 { Heteroskedasticity::None } else { Heteroskedasticity::Fdi(g) };
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment
[input]
path = data/panel.csv
reporters = CZ, HU

[panel]
partners = CZ, HU, PL, AT
cee = CZ, HU, PL
first_year = 2000
last_year = 2013

[model]
relationships = exports_outfdi
trend = bexr
trend.HU = ex, im
robust = on

[run]
seed = 7
";

    #[test]
    fn parses_sections_and_lists() {
        let doc = ConfigDocument::parse(SAMPLE).unwrap();
        let cfg = PipelineConfig::from_document(&doc, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.input, PathBuf::from("/cfg/data/panel.csv"));
        assert_eq!(cfg.reporters, vec!["CZ", "HU"]);
        assert_eq!(cfg.years, Some((2000, 2013)));
        assert_eq!(cfg.relations.len(), 1);
        assert_eq!(cfg.robust, RobustMode::On);
        assert_eq!(cfg.seed, 7);
        assert!(cfg.has_trend("HU", "im") && !cfg.has_trend("CZ", "im") && cfg.has_trend("CZ", "bexr"));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let bad = ConfigDocument::parse("[model]\nalhpa = 0.1\n").unwrap();
        assert!(PipelineConfig::from_document(&bad, Path::new("")).is_err());
        assert!(ConfigDocument::parse("[model\n").is_err());
        assert!(ConfigDocument::parse("alpha = 1\n").is_err());
        assert!(ConfigDocument::parse("[a]\nx=1\nx=2\n").is_err());
    }

    #[test]
    fn validation_invariants() {
        let mut cfg = PipelineConfig { input: "x.csv".into(), ..Default::default() };
        cfg.partners = Some(vec!["A".into()]);
        assert!(cfg.validate().is_err());
        cfg.partners = Some(vec!["A".into(), "B".into()]);
        cfg.cee = Some(vec!["C".into()]);
        assert!(cfg.validate().is_err());
        cfg.cee = None;
        cfg.years = Some((2000, 2002));
        assert!(cfg.validate().is_err());
        cfg.years = Some((2000, 2003));
        cfg.validate().unwrap();
    }

    #[test]
    fn dgp_section_overrides_defaults() {
        let doc = ConfigDocument::parse("[dgp]\nn_entities = 8\nbeta.fdi = 0.0\neffect_corr = 0.7\n[mc]\nreps = 200\nanalyses = hausman, fe_fdi\n").unwrap();
        let mc = McConfig::from_document(&doc).unwrap();
        assert_eq!(mc.dgp.n_entities, 8);
        assert_eq!(mc.dgp.beta[0], 0.0);
        assert_eq!(mc.dgp.effect_mode, EffectMode::Correlated(0.7));
        assert_eq!(mc.reps, 200);
        assert_eq!(mc.analyses, vec![Analysis::Hausman, Analysis::FeFdi]);
    }
}
