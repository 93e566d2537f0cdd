//! Experiment configuration files (TOML) and the bundled reproduction suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intertwine::SpectralMap;
use crate::moments::MomentWeight;
use crate::spectra::SpectrumSpec;

pub const MIN_DIM: usize = 8;
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Which result of the theory the experiment reproduces.
    pub anchor: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

/// Overrides of the default tolerance of individual checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub action: Option<f64>,
    pub temporal: Option<f64>,
    pub eigenstate: Option<f64>,
    pub witness: Option<f64>,
    pub diagonal: Option<f64>,
    pub hermiticity: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub closed_form: Option<f64>,
    pub gamma_independence: Option<f64>,
    pub h_tau: Option<f64>,
    pub probe: Option<f64>,
    pub projection: Option<f64>,
    pub commutant: Option<f64>,
    pub leakage: Option<f64>,
}

impl Tolerances {
    fn values(&self) -> [(&'static str, Option<f64>); 16] {
        [
            ("action", self.action),
            ("temporal", self.temporal),
            ("eigenstate", self.eigenstate),
            ("witness", self.witness),
            ("diagonal", self.diagonal),
            ("hermiticity", self.hermiticity),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("closed_form", self.closed_form),
            ("gamma_independence", self.gamma_independence),
            ("h_tau", self.h_tau),
            ("probe", self.probe),
            ("projection", self.projection),
            ("commutant", self.commutant),
            ("leakage", self.leakage),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Eds,
    Delta { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LadderSpec {
    Boson,
    Quon { q: f64 },
}

impl LadderSpec {
    pub fn q(&self) -> f64 {
        match self {
            Self::Boson => 1.0,
            Self::Quon { q } => *q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeCase {
    /// `h = N`, `x = (a†)²`.
    Boson,
    /// Quon `h = a†a`, `x = (a†)²`; needs `q`.
    Quon,
    /// `h = N`, `x = 1 + N`.
    Invertible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Normalization, action identity, temporal stability and eigenstate
    /// property at random in-disc parameters.
    VcsVerify {
        dim: usize,
        family: FamilySpec,
        spectra: Vec<SpectrumSpec>,
        trials: usize,
        j_max: f64,
        times: Vec<f64>,
        /// γ offset of the lowering operator for the mismatch witness.
        #[serde(default)]
        witness_offset: Option<f64>,
    },
    /// Resolution-of-identity residuals against the Cesàro horizon. A
    /// δ-family with `delta = 0` runs the failure demonstration instead.
    Resolution {
        dim: usize,
        family: FamilySpec,
        spectra: Vec<SpectrumSpec>,
        weights: Vec<MomentWeight>,
        horizons: Vec<f64>,
        #[serde(default)]
        nodes: Option<usize>,
        /// Accepted range of the fitted off-diagonal decay exponent.
        #[serde(default)]
        decay_range: Option<[f64; 2]>,
    },
    /// One of the four worked examples on the GK ladder.
    IntertwineExample {
        dim: usize,
        example: usize,
        spectra: Vec<SpectrumSpec>,
        gammas: Vec<f64>,
    },
    /// `H = N₁⁻¹(x† f(h) x)` for boson or quon ladders with `x = (a†)²`,
    /// checked against the closed forms.
    Nonisospectral {
        dim: usize,
        ladders: Vec<LadderSpec>,
        map: SpectralMap,
    },
    /// Whether `f` commutes with the construction, plus the sufficient
    /// condition and the range diagnostic.
    CommutationProbe {
        dim: usize,
        case: ProbeCase,
        #[serde(default)]
        q: Option<f64>,
        map: SpectralMap,
        l_max: usize,
        #[serde(default)]
        expected_deficiency: Option<usize>,
    },
    /// Grid superpotential ladder, convergence in the grid step.
    SusyGrid {
        /// `W(x) = Σ c_k x^k`.
        superpotential: Vec<f64>,
        lo: f64,
        hi: f64,
        margin: f64,
        sizes: Vec<usize>,
        map: SpectralMap,
        #[serde(default = "one")]
        hbar: f64,
        #[serde(default = "one")]
        mass: f64,
        order_range: [f64; 2],
    },
}

fn one() -> f64 {
    1.0
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::VcsVerify { .. } => "vcs-verify",
            Self::Resolution { .. } => "resolution",
            Self::IntertwineExample { .. } => "intertwine-example",
            Self::Nonisospectral { .. } => "nonisospectral",
            Self::CommutationProbe { .. } => "commutation-probe",
            Self::SusyGrid { .. } => "susy-grid",
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn check_dim(dim: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&dim) {
        return Err(bad(format!("dim = {dim} outside [{MIN_DIM}, {MAX_DIM}]")));
    }
    Ok(())
}

fn non_empty<T>(what: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(bad(format!("{what} must not be empty")));
    }
    Ok(())
}

fn positive(what: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(bad(format!("{what} must be positive, got {x}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(bad("name must not be empty"));
        }
        if self.anchor.trim().is_empty() {
            return Err(bad("anchor must not be empty"));
        }
        for (k, v) in self.tolerances.values() {
            if let Some(v) = v {
                positive(&format!("tolerances.{k}"), v)?;
            }
        }
        match &self.experiment {
            Experiment::VcsVerify {
                dim,
                spectra,
                trials,
                j_max,
                times,
                ..
            } => {
                check_dim(*dim)?;
                non_empty("spectra", spectra)?;
                non_empty("times", times)?;
                if *trials == 0 {
                    return Err(bad("trials must be positive"));
                }
                positive("j_max", *j_max)?;
            }
            Experiment::Resolution {
                dim,
                spectra,
                weights,
                horizons,
                ..
            } => {
                check_dim(*dim)?;
                non_empty("spectra", spectra)?;
                non_empty("horizons", horizons)?;
                if weights.len() != spectra.len() {
                    return Err(bad("one weight per spectrum is required"));
                }
                for &g in horizons {
                    positive("horizon", g)?;
                }
            }
            Experiment::IntertwineExample {
                dim,
                example,
                spectra,
                gammas,
            } => {
                check_dim(*dim)?;
                non_empty("spectra", spectra)?;
                non_empty("gammas", gammas)?;
                if !(1..=4).contains(example) {
                    return Err(bad(format!("example = {example}, choose 1 to 4")));
                }
            }
            Experiment::Nonisospectral { dim, ladders, .. } => {
                check_dim(*dim)?;
                non_empty("ladders", ladders)?;
            }
            Experiment::CommutationProbe { dim, case, q, .. } => {
                check_dim(*dim)?;
                if *case == ProbeCase::Quon && q.is_none() {
                    return Err(bad("case = \"quon\" needs q"));
                }
            }
            Experiment::SusyGrid {
                sizes, lo, hi, margin, ..
            } => {
                non_empty("sizes", sizes)?;
                if sizes.iter().any(|s| !(MIN_DIM..=MAX_DIM).contains(s)) {
                    return Err(bad(format!("grid sizes must lie in [{MIN_DIM}, {MAX_DIM}]")));
                }
                if !(hi > lo) {
                    return Err(bad("hi must exceed lo"));
                }
                if !(*margin >= 0.0) {
                    return Err(bad("margin must be nonnegative"));
                }
            }
        }
        Ok(())
    }
}

/// Shipped configurations, `(name, toml)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("example1-susy-qm", include_str!("../configs/example1-susy-qm.toml")),
    ("example2", include_str!("../configs/example2.toml")),
    ("example3", include_str!("../configs/example3.toml")),
    ("example4", include_str!("../configs/example4.toml")),
    ("boson-example2", include_str!("../configs/boson-example2.toml")),
    ("quon-closed-forms", include_str!("../configs/quon-closed-forms.toml")),
    ("boson-square", include_str!("../configs/boson-square.toml")),
    ("boson-exp", include_str!("../configs/boson-exp.toml")),
    ("susy-grid-linear", include_str!("../configs/susy-grid-linear.toml")),
    ("susy-grid-cubic", include_str!("../configs/susy-grid-cubic.toml")),
    ("vcs-eds", include_str!("../configs/vcs-eds.toml")),
    ("vcs-delta", include_str!("../configs/vcs-delta.toml")),
    ("resolution-eds", include_str!("../configs/resolution-eds.toml")),
    ("resolution-delta", include_str!("../configs/resolution-delta.toml")),
    ("delta-zero-failure", include_str!("../configs/delta-zero-failure.toml")),
    ("commutation-boson", include_str!("../configs/commutation-boson.toml")),
    ("commutation-quon", include_str!("../configs/commutation-quon.toml")),
    (
        "commutation-invertible",
        include_str!("../configs/commutation-invertible.toml"),
    ),
];

pub fn list_bundled() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
