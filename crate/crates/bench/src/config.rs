//! Run configuration: one TOML section per problem family.
//!
//! Every key is optional and falls back to the published experiment
//! settings. Unknown keys are rejected so that typos never silently run the
//! default.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use tibpalm_core::bregman::GeometryKind;
use tibpalm_core::engine::{
    compute_rho, validate_schedule, EngineError, InertialSchedule, InertialSequence, Variant,
};
use tibpalm_core::problems::{sigrec_make, SignalRecovery, SigrecParams, SigrecSpec};
use tibpalm_core::prox::SparsityBudget;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Syntax(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Engine(#[from] EngineError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Nmf,
    Sigrec,
    Qfp,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Nmf => "nmf",
            ProblemKind::Sigrec => "sigrec",
            ProblemKind::Qfp => "qfp",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nmf" => Ok(ProblemKind::Nmf),
            "sigrec" => Ok(ProblemKind::Sigrec),
            "qfp" => Ok(ProblemKind::Qfp),
            other => Err(ConfigError::Invalid(format!("unknown problem kind {other:?}"))),
        }
    }
}

/// An inertial sequence as written in a config file: a number in [0, 1] or
/// the string `"(k-1)/(k+2)"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Seq(pub InertialSequence);

impl Serialize for Seq {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            InertialSequence::Constant(c) => s.serialize_f64(c),
            InertialSequence::Extrapolation => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Seq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string(),
            Raw::Num(x) => x.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map(Seq).map_err(serde::de::Error::custom)
    }
}

/// Explicit inertial coefficients. Absent entries fall back to the
/// family's recipe for the variant; `beta*` default to the matching `alpha*`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InertiaKeys {
    pub alpha1: Option<Seq>,
    pub alpha2: Option<Seq>,
    pub beta1: Option<Seq>,
    pub beta2: Option<Seq>,
}

impl InertiaKeys {
    /// Overlays the explicit keys on a recipe schedule.
    pub fn resolve(&self, recipe: InertialSchedule) -> InertialSchedule {
        let pick = |v: Option<Seq>, fallback| v.map_or(fallback, |s| s.0);
        let alpha1 = pick(self.alpha1, recipe.alpha1);
        let alpha2 = pick(self.alpha2, recipe.alpha2);
        let beta1 = pick(self.beta1, if self.alpha1.is_some() { alpha1 } else { recipe.beta1 });
        let beta2 = pick(self.beta2, if self.alpha2.is_some() { alpha2 } else { recipe.beta2 });
        InertialSchedule { alpha1, alpha2, beta1, beta2, rho: recipe.rho }
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn skip_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigrecConfig {
    pub variants: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Rows and columns of A.
    pub n: usize,
    pub m: usize,
    pub noisy: bool,
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
    pub eta_factor: f64,
    pub sparsity: f64,
    pub noise_std: f64,
    /// `"auto"`, `"mahalanobis"` or `"euclid"`. Auto picks Euclidean only for
    /// the variants that require it.
    pub geometry_x: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<Seq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<Seq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<Seq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<Seq>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "skip_false")]
    pub override_theory: bool,
    pub timing: bool,
}

impl Default for SigrecConfig {
    fn default() -> Self {
        let p = SigrecParams::default();
        let spec = SigrecSpec::new(40, 200, 0, false);
        Self {
            variants: names(&["tibpalm", "tibam", "ibpalm", "bpalm"]),
            variant: None,
            n: spec.n,
            m: spec.m,
            noisy: false,
            gamma: p.gamma,
            mu: p.mu,
            lambda: p.lambda,
            eta_factor: p.eta_factor,
            sparsity: spec.sparsity,
            noise_std: spec.noise_std,
            geometry_x: "auto".into(),
            alpha1: None,
            alpha2: None,
            beta1: None,
            beta2: None,
            tol: 1e-4,
            max_iter: 200_000,
            seed: 0,
            repetitions: 10,
            out: "out/sigrec".into(),
            override_theory: false,
            timing: true,
        }
    }
}

impl SigrecConfig {
    pub fn params(&self) -> SigrecParams {
        SigrecParams { gamma: self.gamma, mu: self.mu, lambda: self.lambda, eta_factor: self.eta_factor }
    }

    pub fn spec(&self, seed: u64) -> SigrecSpec {
        SigrecSpec { sparsity: self.sparsity, noise_std: self.noise_std, ..SigrecSpec::new(self.n, self.m, seed, self.noisy) }
    }

    pub fn inertia(&self) -> InertiaKeys {
        InertiaKeys { alpha1: self.alpha1, alpha2: self.alpha2, beta1: self.beta1, beta2: self.beta2 }
    }

    /// Whether the run uses the Euclidean x-geometry.
    pub fn euclidean_x(&self, v: Variant) -> bool {
        match self.geometry_x.as_str() {
            "euclid" => true,
            "mahalanobis" => false,
            _ => v.requires_euclidean(),
        }
    }

    /// `0.99ρ/4` for the two-step methods, `0.99ρ/2` for the one-step ones.
    pub fn recipe(v: Variant, rho: f64) -> InertialSchedule {
        let q = 0.99 * rho.max(0.0);
        match v {
            Variant::Tibpalm | Variant::Tibam => InertialSchedule::symmetric(q / 4.0, q / 4.0, rho),
            Variant::Ibpalm | Variant::Ipalm | Variant::Gipalm => InertialSchedule::symmetric(q / 2.0, 0.0, rho),
            Variant::Bpalm | Variant::Palm => InertialSchedule::none(rho),
        }
    }

    pub fn instance(&self, seed: u64) -> Result<SignalRecovery, ConfigError> {
        sigrec_make(&self.spec(seed), self.params()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Margin for the geometry the variant runs in.
    pub fn rho(&self, p: &SignalRecovery, v: Variant) -> f64 {
        if self.euclidean_x(v) {
            compute_rho(p, &p.euclidean_geometries()).unwrap_or(0.0)
        } else {
            p.rho()
        }
    }

    pub fn schedule(&self, p: &SignalRecovery, v: Variant) -> InertialSchedule {
        let rho = self.rho(p, v);
        self.inertia().resolve(Self::recipe(v, rho))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QfpConfig {
    pub variants: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// `"problem1"` for the bundled 5×5 data or `"random"`.
    pub instance: String,
    /// Dimension of random instances.
    pub dim: usize,
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub lo: f64,
    pub hi: f64,
    pub mu: f64,
    /// Geometry pairs written `"x/y"`, e.g. `"kl/is"`.
    pub pairs: Vec<String>,
    /// `[α₁, α₂]` per schedule; β follows α.
    pub schedules: Vec<[f64; 2]>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub out: PathBuf,
    pub override_theory: bool,
    pub timing: bool,
}

impl Default for QfpConfig {
    fn default() -> Self {
        let p = tibpalm_core::problems::QfpParams::default();
        let kinds = ["kl", "is", "euclid"];
        let pairs = kinds.iter().flat_map(|x| kinds.iter().map(move |y| format!("{x}/{y}"))).collect();
        Self {
            variants: names(&["tibpalm"]),
            variant: None,
            instance: "problem1".into(),
            dim: 5,
            c: p.c,
            d: p.d,
            gamma: p.gamma,
            lo: p.lo,
            hi: p.hi,
            mu: p.mu,
            pairs,
            schedules: vec![[0.5, 0.0], [0.2, 0.3]],
            tol: 1e-4,
            max_iter: 100_000,
            seed: 0,
            repetitions: 30,
            out: "out/qfp".into(),
            override_theory: true,
            timing: true,
        }
    }
}

impl QfpConfig {
    pub fn params(&self) -> tibpalm_core::problems::QfpParams {
        tibpalm_core::problems::QfpParams {
            c: self.c,
            d: self.d,
            gamma: self.gamma,
            lo: self.lo,
            hi: self.hi,
            mu: self.mu,
        }
    }

    pub fn instance(&self, seed: u64) -> Result<tibpalm_core::problems::Qfp, ConfigError> {
        use tibpalm_core::problems::Qfp;
        let q = match self.instance.as_str() {
            "problem1" => Qfp::problem1(self.params()),
            "random" => Qfp::random(self.dim, seed, self.params()),
            other => return Err(ConfigError::Invalid(format!("unknown qfp instance {other:?}"))),
        };
        q.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn parsed_pairs(&self) -> Result<Vec<(GeometryKind, GeometryKind)>, ConfigError> {
        self.pairs
            .iter()
            .map(|p| {
                let (x, y) = p
                    .split_once('/')
                    .ok_or_else(|| ConfigError::Invalid(format!("geometry pair {p:?} must look like \"kl/is\"")))?;
                let parse = |t: &str| {
                    t.parse::<GeometryKind>()
                        .ok()
                        .filter(|k| *k != GeometryKind::Mahalanobis)
                        .ok_or_else(|| ConfigError::Invalid(format!("qfp geometry {t:?} (use kl, is or euclid)")))
                };
                Ok((parse(x)?, parse(y)?))
            })
            .collect()
    }

    pub fn schedule_label(s: [f64; 2]) -> &'static str {
        if s[1] == 0.0 {
            "one-step"
        } else {
            "two-step"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfConfig {
    pub variants: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Column sparsity budget as a fraction of the rows.
    pub sparsity: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<Seq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<Seq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<Seq>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<Seq>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub out: PathBuf,
    pub override_theory: bool,
    pub timing: bool,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            variants: names(&["palm", "ipalm", "gipalm", "tibpalm"]),
            variant: None,
            rows: 60,
            cols: 40,
            rank: 10,
            sparsity: 0.25,
            lambda: 0.5,
            alpha1: None,
            alpha2: None,
            beta1: None,
            beta2: None,
            tol: 0.0,
            max_iter: 1000,
            seed: 0,
            repetitions: 1,
            out: "out/nmf".into(),
            override_theory: true,
            timing: true,
        }
    }
}

impl NmfConfig {
    pub fn inertia(&self) -> InertiaKeys {
        InertiaKeys { alpha1: self.alpha1, alpha2: self.alpha2, beta1: self.beta1, beta2: self.beta2 }
    }

    /// 0.2/0.3 for the two-step method, 0.5 for the one-step ones. No global
    /// Lipschitz constant exists, so the margin is 0.
    pub fn recipe(v: Variant) -> InertialSchedule {
        match v {
            Variant::Tibpalm | Variant::Tibam => InertialSchedule::symmetric(0.2, 0.3, 0.0),
            Variant::Ibpalm | Variant::Ipalm | Variant::Gipalm => InertialSchedule::symmetric(0.5, 0.0, 0.0),
            Variant::Bpalm | Variant::Palm => InertialSchedule::none(0.0),
        }
    }

    pub fn schedule(&self, v: Variant) -> InertialSchedule {
        self.inertia().resolve(Self::recipe(v))
    }

    pub fn budget(&self) -> Result<SparsityBudget, ConfigError> {
        SparsityBudget::new(self.sparsity).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// The whole file. Sections for other families are parsed and checked too.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    sigrec: Option<SigrecConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qfp: Option<QfpConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmf: Option<NmfConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunConfig {
    Sigrec(SigrecConfig),
    Qfp(QfpConfig),
    Nmf(NmfConfig),
}

/// Overrides taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub variant: Option<String>,
    pub out: Option<PathBuf>,
    pub override_theory: bool,
}

macro_rules! common {
    ($self:ident, $c:ident => $e:expr) => {
        match $self {
            RunConfig::Sigrec($c) => $e,
            RunConfig::Qfp($c) => $e,
            RunConfig::Nmf($c) => $e,
        }
    };
}

impl RunConfig {
    pub fn defaults(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Sigrec => RunConfig::Sigrec(SigrecConfig::default()),
            ProblemKind::Qfp => RunConfig::Qfp(QfpConfig::default()),
            ProblemKind::Nmf => RunConfig::Nmf(NmfConfig::default()),
        }
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            RunConfig::Sigrec(_) => ProblemKind::Sigrec,
            RunConfig::Qfp(_) => ProblemKind::Qfp,
            RunConfig::Nmf(_) => ProblemKind::Nmf,
        }
    }

    /// The variants this config runs, in order.
    pub fn variants(&self) -> Result<Vec<Variant>, ConfigError> {
        let (list, single) = common!(self, c => (&c.variants, &c.variant));
        let names: Vec<&String> = match single {
            Some(v) => vec![v],
            None => list.iter().collect(),
        };
        if names.is_empty() {
            return Err(ConfigError::Invalid("no variants selected".into()));
        }
        names.into_iter().map(|n| n.parse::<Variant>().map_err(ConfigError::from)).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        let (seed, reps) = common!(self, c => (c.seed, c.repetitions));
        (0..reps as u64).map(|r| seed + r).collect()
    }

    pub fn tol(&self) -> f64 {
        common!(self, c => c.tol)
    }

    pub fn max_iter(&self) -> usize {
        common!(self, c => c.max_iter)
    }

    pub fn out(&self) -> &PathBuf {
        common!(self, c => &c.out)
    }

    pub fn override_theory(&self) -> bool {
        common!(self, c => c.override_theory)
    }

    pub fn timing(&self) -> bool {
        common!(self, c => c.timing)
    }

    pub fn apply(&mut self, cli: &CliOverrides) -> Result<(), ConfigError> {
        common!(self, c => {
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            if let Some(v) = &cli.variant {
                c.variant = Some(v.clone());
            }
            if let Some(o) = &cli.out {
                c.out = o.clone();
            }
            c.override_theory |= cli.override_theory;
        });
        self.validate()
    }

    /// Canonical text: a single section with every resolved key.
    pub fn emit(&self) -> String {
        let mut file = ConfigFile::default();
        match self {
            RunConfig::Sigrec(c) => file.sigrec = Some(c.clone()),
            RunConfig::Qfp(c) => file.qfp = Some(c.clone()),
            RunConfig::Nmf(c) => file.nmf = Some(c.clone()),
        }
        toml::to_string(&file).expect("config serializes")
    }

    /// Checks values, variant names, capabilities and schedule admissibility.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let variants = self.variants()?;
        let (tol, reps) = common!(self, c => (c.tol, c.repetitions));
        if !(tol >= 0.0) {
            return Err(ConfigError::Invalid(format!("tol must be nonnegative, got {tol}")));
        }
        if reps == 0 {
            return Err(ConfigError::Invalid("repetitions must be at least 1".into()));
        }
        let over = self.override_theory();
        let admissible = |s: &InertialSchedule, v: Variant| -> Result<(), ConfigError> {
            if over {
                return Ok(());
            }
            validate_schedule(&v.effective_schedule(s)).map(|_| ()).map_err(|e| match e {
                EngineError::Inadmissible { lhs, rho } => ConfigError::Invalid(format!(
                    "{v}: inadmissible schedule, 2(alpha1 + alpha2) = {lhs} >= rho = {rho}; set override_theory to run anyway"
                )),
                EngineError::NonPositiveRho(r) => ConfigError::Invalid(format!(
                    "{v}: margin rho = {r} is not positive; set override_theory to run anyway"
                )),
                e => e.into(),
            })
        };
        match self {
            RunConfig::Sigrec(c) => {
                if !["auto", "mahalanobis", "euclid"].contains(&c.geometry_x.as_str()) {
                    return Err(ConfigError::Invalid(format!(
                        "sigrec geometry_x {:?} (use auto, mahalanobis or euclid)",
                        c.geometry_x
                    )));
                }
                let p = c.instance(c.seed)?;
                for v in variants {
                    if v.requires_euclidean() && !c.euclidean_x(v) {
                        return Err(EngineError::Capability {
                            variant: v,
                            reason: "x-block geometry must be euclid".into(),
                        }
                        .into());
                    }
                    admissible(&c.schedule(&p, v), v)?;
                }
            }
            RunConfig::Qfp(c) => {
                let pairs = c.parsed_pairs()?;
                if c.schedules.is_empty() || pairs.is_empty() {
                    return Err(ConfigError::Invalid("qfp needs at least one pair and one schedule".into()));
                }
                let q = c.instance(c.seed)?;
                for v in variants {
                    if v.requires_euclidean() || v == Variant::Tibam {
                        return Err(EngineError::Capability {
                            variant: v,
                            reason: "qfp runs the Bregman linearized variants only".into(),
                        }
                        .into());
                    }
                    for &(gx, gy) in &pairs {
                        let g = q.geometries(gx, gy).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                        let rho = compute_rho(&q, &g).unwrap_or(0.0);
                        for s in &c.schedules {
                            for a in s {
                                InertialSequence::from_str(&a.to_string())?;
                            }
                            admissible(&InertialSchedule::symmetric(s[0], s[1], rho), v)?;
                        }
                    }
                }
            }
            RunConfig::Nmf(c) => {
                c.budget()?;
                if c.rank == 0 || c.rank > c.cols {
                    return Err(ConfigError::Invalid(format!("nmf rank {} must lie in 1..={}", c.rank, c.cols)));
                }
                for v in variants {
                    if v == Variant::Tibam {
                        return Err(EngineError::Capability {
                            variant: v,
                            reason: "problem has no exact block minimizer".into(),
                        }
                        .into());
                    }
                    admissible(&c.schedule(v), v)?;
                }
            }
        }
        Ok(())
    }
}

/// Parses the section for `kind`, applies defaults and validates. A missing
/// section means all defaults.
pub fn parse_config(text: &str, kind: ProblemKind) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, kind, &CliOverrides::default())
}

/// Like [`parse_config`], with command-line overrides applied before validation.
pub fn parse_config_with(text: &str, kind: ProblemKind, cli: &CliOverrides) -> Result<RunConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
    let mut cfg = match kind {
        ProblemKind::Sigrec => RunConfig::Sigrec(file.sigrec.unwrap_or_default()),
        ProblemKind::Qfp => RunConfig::Qfp(file.qfp.unwrap_or_default()),
        ProblemKind::Nmf => RunConfig::Nmf(file.nmf.unwrap_or_default()),
    };
    cfg.apply(cli)?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path, kind: ProblemKind, cli: &CliOverrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_with(&text, kind, cli)
}
