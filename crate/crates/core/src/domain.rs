//! Model parameters, the strategy-count lattice, and the JSON config document.
//!
//! Every other module consumes these types. They are plain values: once a
//! [`ModelConfig`] has passed [`validate`] it can be shared freely between
//! worker threads.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Marginalised,
    Dominant,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Marginalised, Group::Dominant];

    pub fn label(self) -> &'static str {
        match self {
            Group::Marginalised => "M",
            Group::Dominant => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    High,
    Low,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::High, Strategy::Low];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::High => "H",
            Strategy::Low => "L",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rating {
    Good,
    Bad,
}

impl Rating {
    pub const ALL: [Rating; 2] = [Rating::Good, Rating::Bad];

    pub fn label(self) -> &'static str {
        match self {
            Rating::Good => "G",
            Rating::Bad => "B",
        }
    }
}

/// Provider head-counts per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProviderPopulation {
    pub z_d: usize,
    pub z_m: usize,
}

impl ProviderPopulation {
    pub fn new(z_d: usize, z_m: usize) -> Self {
        Self { z_d, z_m }
    }

    pub fn total(&self) -> usize {
        self.z_d + self.z_m
    }

    pub fn size_of(&self, group: Group) -> usize {
        match group {
            Group::Marginalised => self.z_m,
            Group::Dominant => self.z_d,
        }
    }

    /// Number of lattice states, `(Z_M + 1)(Z_D + 1)`.
    pub fn num_states(&self) -> usize {
        (self.z_m + 1) * (self.z_d + 1)
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        let z_d = self.z_d;
        (0..=self.z_m).flat_map(move |h_m| (0..=z_d).map(move |h_d| State { h_m, h_d }))
    }
}

/// The user-side triple (rating bias, rating sensitivity, consumer involvement).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPopulation {
    pub epsilon: f64,
    pub gamma: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlatformPolicy {
    pub k_g: usize,
    pub k_m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    pub b: f64,
    pub c: f64,
}

impl EconomicParams {
    /// Per-interaction payoff of a provider playing `strategy`.
    pub fn payoff(&self, strategy: Strategy) -> f64 {
        match strategy {
            Strategy::High => self.b - self.c,
            Strategy::Low => self.b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub beta: f64,
    pub mu: f64,
}

/// Point `(h_M, h_D)` of the strategy-count lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub h_m: usize,
    pub h_d: usize,
}

impl State {
    pub fn new(h_m: usize, h_d: usize) -> Self {
        Self { h_m, h_d }
    }

    pub fn high_count(&self, group: Group) -> usize {
        match group {
            Group::Marginalised => self.h_m,
            Group::Dominant => self.h_d,
        }
    }
}

/// Sign convention of the imitation probabilities.
///
/// `Standard` makes the better-earning strategy more likely to spread.
/// `Literal` applies the `∓` convention to `Δu = u_L − u_H` verbatim, which
/// favours the worse-earning strategy; kept for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FermiSign {
    #[default]
    Standard,
    Literal,
}

/// How the Good-rated marginalised count is mixed when the focal provider is
/// itself a marginalised provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FocalConditioning {
    /// The focal's own rating is fixed and only the other H-players are mixed.
    #[default]
    Exact,
    /// `Binomial(h_M, 1 − ε)` over every marginalised H-player, clamped to
    /// counts consistent with the focal's rating.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub population: ProviderPopulation,
    pub users: UserPopulation,
    pub policy: PlatformPolicy,
    pub economics: EconomicParams,
    pub evolution: EvolutionParams,
    pub fermi_sign: FermiSign,
    pub focal_conditioning: FocalConditioning,
}

impl Default for ModelConfig {
    /// Two groups of 20, `μ = 1/40`, `c = 1`, `b = 1.2`, `β = 20`, with the
    /// user triple `(0.3, 0.6, 10)` and a full Good-rated list `k_G = 10`.
    fn default() -> Self {
        Self {
            population: ProviderPopulation::new(20, 20),
            users: UserPopulation {
                epsilon: 0.3,
                gamma: 0.6,
                k: 10,
            },
            policy: PlatformPolicy { k_g: 10, k_m: 0 },
            economics: EconomicParams { b: 1.2, c: 1.0 },
            evolution: EvolutionParams {
                beta: 20.0,
                mu: 1.0 / 40.0,
            },
            fermi_sign: FermiSign::Standard,
            focal_conditioning: FocalConditioning::Exact,
        }
    }
}

impl ModelConfig {
    pub fn with_users(mut self, epsilon: f64, gamma: f64, k: usize) -> Self {
        self.users = UserPopulation { epsilon, gamma, k };
        self
    }

    pub fn with_policy(mut self, k_g: usize, k_m: usize) -> Self {
        self.policy = PlatformPolicy { k_g, k_m };
        self
    }

    pub fn with_population(mut self, z_d: usize, z_m: usize) -> Self {
        self.population = ProviderPopulation::new(z_d, z_m);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.users.epsilon = epsilon;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.users.gamma = gamma;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.evolution.beta = beta;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.evolution.mu = mu;
        self
    }
}

/// A single violated invariant of a [`ModelConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    DominantTooSmall,
    MarginalisedTooSmall,
    EpsilonRange,
    GammaRange,
    KZero,
    KExceedsPopulation,
    KgExceedsK,
    KmExceedsKg,
    CostNotPositive,
    BNotAboveC,
    BetaNegative,
    MuRange,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Violation::DominantTooSmall => "z_d must be at least 2",
            Violation::MarginalisedTooSmall => "z_m must be at least 2",
            Violation::EpsilonRange => "epsilon must lie in [0, 1]",
            Violation::GammaRange => "gamma must lie in [0, 1]",
            Violation::KZero => "k must be at least 1",
            Violation::KExceedsPopulation => "k exceeds the provider population",
            Violation::KgExceedsK => "k_G exceeds k",
            Violation::KmExceedsKg => "k_M exceeds k_G",
            Violation::CostNotPositive => "c must be positive",
            Violation::BNotAboveC => "b must exceed c",
            Violation::BetaNegative => "beta must be finite and nonnegative",
            Violation::MuRange => "mu must lie in [0, 1]",
        };
        f.write_str(msg)
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Returns the config unchanged when every invariant holds, otherwise every
/// violated invariant.
pub fn validate(config: &ModelConfig) -> Result<ModelConfig> {
    let mut v = Vec::new();
    let pop = &config.population;
    if pop.z_d < 2 {
        v.push(Violation::DominantTooSmall);
    }
    if pop.z_m < 2 {
        v.push(Violation::MarginalisedTooSmall);
    }
    if !in_unit(config.users.epsilon) {
        v.push(Violation::EpsilonRange);
    }
    if !in_unit(config.users.gamma) {
        v.push(Violation::GammaRange);
    }
    if config.users.k == 0 {
        v.push(Violation::KZero);
    }
    if config.users.k > pop.total() {
        v.push(Violation::KExceedsPopulation);
    }
    if config.policy.k_g > config.users.k {
        v.push(Violation::KgExceedsK);
    }
    if config.policy.k_m > config.policy.k_g {
        v.push(Violation::KmExceedsKg);
    }
    let econ = &config.economics;
    if !(econ.c > 0.0) {
        v.push(Violation::CostNotPositive);
    }
    if !(econ.b > econ.c) {
        v.push(Violation::BNotAboveC);
    }
    if !(config.evolution.beta >= 0.0 && config.evolution.beta.is_finite()) {
        v.push(Violation::BetaNegative);
    }
    if !in_unit(config.evolution.mu) {
        v.push(Violation::MuRange);
    }
    if v.is_empty() {
        Ok(*config)
    } else {
        Err(Error::InvalidConfig(v))
    }
}

/// Lexicographic lattice index `h_M · (Z_D + 1) + h_D`.
pub fn state_index(state: State, population: ProviderPopulation) -> Result<usize> {
    if state.h_m > population.z_m || state.h_d > population.z_d {
        return Err(Error::StateOutOfBounds {
            h_m: state.h_m,
            h_d: state.h_d,
            z_m: population.z_m,
            z_d: population.z_d,
        });
    }
    Ok(state.h_m * (population.z_d + 1) + state.h_d)
}

pub fn state_from_index(index: usize, population: ProviderPopulation) -> Result<State> {
    let len = population.num_states();
    if index >= len {
        return Err(Error::IndexOutOfBounds { index, len });
    }
    let w = population.z_d + 1;
    Ok(State {
        h_m: index / w,
        h_d: index % w,
    })
}

/// Keys of the flat JSON config document.
pub const CONFIG_KEYS: [&str; 13] = [
    "z_d",
    "z_m",
    "epsilon",
    "gamma",
    "k",
    "k_g",
    "k_m",
    "b",
    "c",
    "beta",
    "mu",
    "fermi_sign",
    "focal_conditioning",
];

/// Flat serialized form of a [`ModelConfig`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub z_d: usize,
    pub z_m: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub k: usize,
    pub k_g: usize,
    pub k_m: usize,
    pub b: f64,
    pub c: f64,
    pub beta: f64,
    pub mu: f64,
    #[serde(default)]
    pub fermi_sign: FermiSign,
    #[serde(default)]
    pub focal_conditioning: FocalConditioning,
}

impl From<&ModelConfig> for ConfigDocument {
    fn from(c: &ModelConfig) -> Self {
        Self {
            z_d: c.population.z_d,
            z_m: c.population.z_m,
            epsilon: c.users.epsilon,
            gamma: c.users.gamma,
            k: c.users.k,
            k_g: c.policy.k_g,
            k_m: c.policy.k_m,
            b: c.economics.b,
            c: c.economics.c,
            beta: c.evolution.beta,
            mu: c.evolution.mu,
            fermi_sign: c.fermi_sign,
            focal_conditioning: c.focal_conditioning,
        }
    }
}

impl From<&ConfigDocument> for ModelConfig {
    fn from(d: &ConfigDocument) -> Self {
        Self {
            population: ProviderPopulation::new(d.z_d, d.z_m),
            users: UserPopulation {
                epsilon: d.epsilon,
                gamma: d.gamma,
                k: d.k,
            },
            policy: PlatformPolicy { k_g: d.k_g, k_m: d.k_m },
            economics: EconomicParams { b: d.b, c: d.c },
            evolution: EvolutionParams { beta: d.beta, mu: d.mu },
            fermi_sign: d.fermi_sign,
            focal_conditioning: d.focal_conditioning,
        }
    }
}

fn field<T: serde::de::DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<T> {
    let value = map.get(key).ok_or_else(|| Error::ConfigKey {
        key: key.to_string(),
        message: "missing".to_string(),
    })?;
    serde_json::from_value(value.clone()).map_err(|e| Error::ConfigKey {
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn field_or_default<T: serde::de::DeserializeOwned + Default>(map: &Map<String, Value>, key: &str) -> Result<T> {
    if map.contains_key(key) {
        field(map, key)
    } else {
        Ok(T::default())
    }
}

/// Parses and validates a JSON config document. Diagnostics name the
/// offending key.
pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::ConfigDocument(e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::ConfigDocument("top level must be a JSON object".to_string()))?;
    if let Some(unknown) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(Error::ConfigKey {
            key: unknown.clone(),
            message: "unknown key".to_string(),
        });
    }
    let doc = ConfigDocument {
        z_d: field(map, "z_d")?,
        z_m: field(map, "z_m")?,
        epsilon: field(map, "epsilon")?,
        gamma: field(map, "gamma")?,
        k: field(map, "k")?,
        k_g: field(map, "k_g")?,
        k_m: field(map, "k_m")?,
        b: field(map, "b")?,
        c: field(map, "c")?,
        beta: field(map, "beta")?,
        mu: field(map, "mu")?,
        fermi_sign: field_or_default(map, "fermi_sign")?,
        focal_conditioning: field_or_default(map, "focal_conditioning")?,
    };
    validate(&ModelConfig::from(&doc))
}

pub fn config_to_json(config: &ModelConfig) -> String {
    serde_json::to_string_pretty(&ConfigDocument::from(config)).expect("config document always serializes")
}
