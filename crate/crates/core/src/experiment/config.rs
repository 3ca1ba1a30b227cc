use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};
use crate::walk::{IncrementLaw, Support};

/// The named experiments, one per acceptance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentId {
    KilledGeometric,
    ConditionalExponential,
    HittingAsymptotics,
    GreenConvergence,
    QuadratureAform,
    KacMoments,
    KnightIdentity,
    FddMarginal,
    ReflectedEquivalence,
    HeavytailSlopes,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::KilledGeometric,
        ExperimentId::ConditionalExponential,
        ExperimentId::HittingAsymptotics,
        ExperimentId::GreenConvergence,
        ExperimentId::QuadratureAform,
        ExperimentId::KacMoments,
        ExperimentId::KnightIdentity,
        ExperimentId::FddMarginal,
        ExperimentId::ReflectedEquivalence,
        ExperimentId::HeavytailSlopes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::KilledGeometric => "killed-geometric",
            ExperimentId::ConditionalExponential => "conditional-exponential",
            ExperimentId::HittingAsymptotics => "hitting-asymptotics",
            ExperimentId::GreenConvergence => "green-convergence",
            ExperimentId::QuadratureAform => "quadrature-aform",
            ExperimentId::KacMoments => "kac-moments",
            ExperimentId::KnightIdentity => "knight-identity",
            ExperimentId::FddMarginal => "fdd-marginal",
            ExperimentId::ReflectedEquivalence => "reflected-equivalence",
            ExperimentId::HeavytailSlopes => "heavytail-slopes",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::KilledGeometric => "local time at N of the walk killed below 1, started at N, is geometric",
            ExperimentId::ConditionalExponential => "L / N given L > 0 is close to an exponential law",
            ExperimentId::HittingAsymptotics => "exact hitting probabilities against U(x, N) and their 1/N asymptotics",
            ExperimentId::GreenConvergence => "rescaled killed Green function against 2 min(u, v)",
            ExperimentId::QuadratureAform => "quadrature of the killed heat kernel against 2 min(u, v)",
            ExperimentId::KacMoments => "empirical local-time moments against Kac permutation sums",
            ExperimentId::KnightIdentity => "reflected simple walk local times against the branching-chain law",
            ExperimentId::FddMarginal => "rescaled reflected field against compound-Poisson marginals",
            ExperimentId::ReflectedEquivalence => "reflected field against a sum of independent killed excursions",
            ExperimentId::HeavytailSlopes => "power-tail walks: exponentiality, hitting slope and start invariance",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

/// Everything a run depends on. Unset fields take per-experiment defaults.
///
/// The text form is INI:
///
/// ```ini
/// [experiment]
/// id = killed-geometric
/// seed = 7
/// laws = simple, mine
///
/// [params]
/// levels = 50, 100
/// samples = 10000
///
/// [law.mine]
/// support = -1:1/4, 0:1/2, 1:1/4
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub laws: Option<Vec<IncrementLaw>>,
    pub levels: Option<Vec<u64>>,
    pub u_list: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub cap: Option<u64>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    /// Experiment-specific keys from `[params]`.
    pub extra: BTreeMap<String, String>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        ExperimentConfig {
            id,
            laws: None,
            levels: None,
            u_list: None,
            samples: None,
            cap: None,
            seed: DEFAULT_SEED,
            workers: None,
            out_dir: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_laws(mut self, laws: &[IncrementLaw]) -> Self {
        self.laws = Some(laws.to_vec());
        self
    }

    pub fn with_levels(mut self, levels: &[u64]) -> Self {
        self.levels = Some(levels.to_vec());
        self
    }

    pub fn with_u_list(mut self, u: &[f64]) -> Self {
        self.u_list = Some(u.to_vec());
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        let mut experiment: Option<HashMap<String, String>> = None;
        let mut params: BTreeMap<String, String> = BTreeMap::new();
        let mut law_blocks: HashMap<String, HashMap<String, String>> = HashMap::new();
        for (section, props) in ini.iter() {
            let map: HashMap<String, String> = props
                .iter()
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect();
            match section.map(str::trim) {
                None if map.is_empty() => {}
                None => return Err(Error::config("keys must sit under a [section]")),
                Some("experiment") => experiment = Some(map),
                Some("params") => params.extend(map),
                Some(s) if s.starts_with("law.") => {
                    law_blocks.insert(s["law.".len()..].trim().to_string(), map);
                }
                Some(other) => return Err(Error::config(format!("unknown section [{other}]"))),
            }
        }
        let mut exp = experiment.ok_or_else(|| Error::config("missing [experiment] section"))?;
        let id: ExperimentId = exp
            .remove("id")
            .ok_or_else(|| Error::config("[experiment] needs an 'id'"))?
            .parse()?;
        let mut cfg = ExperimentConfig::new(id);
        if let Some(seed) = exp.remove("seed") {
            cfg.seed = parse_scalar("seed", &seed)?;
        }
        if let Some(w) = exp.remove("workers") {
            let w: usize = parse_scalar("workers", &w)?;
            cfg.workers = (w > 0).then_some(w);
        }
        if let Some(out) = exp.remove("out") {
            cfg.out_dir = Some(PathBuf::from(out));
        }
        if let Some(names) = exp.remove("laws").or_else(|| exp.remove("law")) {
            let mut laws = Vec::new();
            for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let law = match law_blocks.remove(name) {
                    Some(mut props) => {
                        props.insert("name".into(), name.to_string());
                        IncrementLaw::new(crate::walk::LawSpec::from_properties(&props)?)?
                    }
                    None => IncrementLaw::bundled(name)?,
                };
                laws.push(law);
            }
            cfg.laws = Some(laws);
        }
        if let Some(key) = exp.keys().next() {
            return Err(Error::config(format!("unknown [experiment] key '{key}'")));
        }
        if let Some(name) = law_blocks.keys().next() {
            return Err(Error::config(format!("[law.{name}] is not listed in 'laws'")));
        }
        if let Some(v) = params.remove("levels") {
            cfg.levels = Some(parse_list("levels", &v)?);
        }
        if let Some(v) = params.remove("u_list") {
            cfg.u_list = Some(parse_list("u_list", &v)?);
        }
        if let Some(v) = params.remove("samples") {
            cfg.samples = Some(parse_scalar("samples", &v)?);
        }
        if let Some(v) = params.remove("cap") {
            cfg.cap = Some(parse_scalar("cap", &v)?);
        }
        cfg.extra = params;
        Ok(cfg)
    }

    /// Canonical INI text; parsing it gives back an equal config.
    pub fn to_ini(&self) -> String {
        let join = |v: &[String]| v.join(", ");
        let mut s = String::new();
        s.push_str("[experiment]\n");
        s.push_str(&format!("id = {}\n", self.id));
        s.push_str(&format!("seed = {}\n", self.seed));
        if let Some(w) = self.workers {
            s.push_str(&format!("workers = {w}\n"));
        }
        if let Some(out) = &self.out_dir {
            s.push_str(&format!("out = {}\n", out.display()));
        }
        if let Some(laws) = &self.laws {
            let names: Vec<String> = laws.iter().map(|l| l.name().to_string()).collect();
            s.push_str(&format!("laws = {}\n", join(&names)));
        }
        s.push_str("\n[params]\n");
        if let Some(v) = &self.levels {
            s.push_str(&format!(
                "levels = {}\n",
                join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>())
            ));
        }
        if let Some(v) = &self.u_list {
            s.push_str(&format!(
                "u_list = {}\n",
                join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>())
            ));
        }
        if let Some(v) = self.samples {
            s.push_str(&format!("samples = {v}\n"));
        }
        if let Some(v) = self.cap {
            s.push_str(&format!("cap = {v}\n"));
        }
        for (k, v) in &self.extra {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for law in self.laws.iter().flatten() {
            if IncrementLaw::bundled(law.name()).is_ok_and(|b| b == *law) {
                continue;
            }
            s.push_str(&format!("\n[law.{}]\n", law.name()));
            match law.support() {
                Support::Finite(pairs) => {
                    let items: Vec<String> = pairs.iter().map(|(v, p)| format!("{v}:{p}")).collect();
                    s.push_str(&format!("support = {}\n", join(&items)));
                }
                Support::PowerTail { alpha, symmetric } => {
                    s.push_str(&format!("alpha = {alpha}\nsymmetric = {symmetric}\n"));
                }
            }
        }
        s
    }
}

fn parse_scalar<T: FromStr>(key: &str, text: &str) -> Result<T> {
    let cleaned: String = text.trim().chars().filter(|&c| c != '_').collect();
    cleaned
        .parse()
        .map_err(|_| Error::config(format!("'{key}': cannot parse '{text}'")))
}

fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::config(format!("'{key}' is empty")));
    }
    items.into_iter().map(|t| parse_scalar(key, t)).collect()
}

/// Typed access to a config that remembers which keys were read, so keys a
/// run never looks at are reported instead of silently ignored.
pub(crate) struct Params<'a> {
    cfg: &'a ExperimentConfig,
    used: RefCell<BTreeSet<&'static str>>,
}

impl<'a> Params<'a> {
    pub(crate) fn new(cfg: &'a ExperimentConfig) -> Self {
        Params {
            cfg,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn mark(&self, key: &'static str) {
        self.used.borrow_mut().insert(key);
    }

    pub(crate) fn laws(&self, default: &[&str]) -> Result<Vec<IncrementLaw>> {
        self.mark("laws");
        match &self.cfg.laws {
            Some(l) if l.is_empty() => Err(Error::config("'laws' is empty")),
            Some(l) => Ok(l.clone()),
            None => default.iter().map(|n| IncrementLaw::bundled(n)).collect(),
        }
    }

    pub(crate) fn levels(&self, default: &[u64]) -> Result<Vec<u64>> {
        self.mark("levels");
        let v = self.cfg.levels.clone().unwrap_or_else(|| default.to_vec());
        if v.contains(&0) {
            return Err(Error::config("levels must be >= 1"));
        }
        Ok(v)
    }

    pub(crate) fn u_list(&self, default: &[f64]) -> Result<Vec<f64>> {
        self.mark("u_list");
        let v = self.cfg.u_list.clone().unwrap_or_else(|| default.to_vec());
        if v.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(Error::config("u values must be positive"));
        }
        Ok(v)
    }

    pub(crate) fn samples(&self, default: usize) -> Result<usize> {
        self.mark("samples");
        let n = self.cfg.samples.unwrap_or(default);
        if n < 2 {
            return Err(Error::config("samples must be >= 2"));
        }
        Ok(n)
    }

    pub(crate) fn cap(&self, default: u64) -> u64 {
        self.mark("cap");
        self.cfg.cap.unwrap_or(default)
    }

    pub(crate) fn get<T: FromStr>(&self, key: &'static str, default: T) -> Result<T> {
        self.mark(key);
        match self.cfg.extra.get(key) {
            Some(v) => parse_scalar(key, v),
            None => Ok(default),
        }
    }

    pub(crate) fn list<T: FromStr + Clone>(&self, key: &'static str, default: &[T]) -> Result<Vec<T>> {
        self.mark(key);
        match self.cfg.extra.get(key) {
            Some(v) => parse_list(key, v),
            None => Ok(default.to_vec()),
        }
    }

    /// Fails on any configured key the run did not read.
    pub(crate) fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let typed = [
            ("laws", self.cfg.laws.is_some()),
            ("levels", self.cfg.levels.is_some()),
            ("u_list", self.cfg.u_list.is_some()),
            ("samples", self.cfg.samples.is_some()),
            ("cap", self.cfg.cap.is_some()),
        ];
        let unused = typed
            .iter()
            .filter(|(k, set)| *set && !used.contains(k))
            .map(|(k, _)| k.to_string())
            .chain(self.cfg.extra.keys().filter(|k| !used.contains(k.as_str())).cloned())
            .next();
        match unused {
            Some(k) => Err(Error::config(format!("'{k}' is not used by {}", self.cfg.id))),
            None => Ok(()),
        }
    }
}
