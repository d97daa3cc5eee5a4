//! Stationary-distribution metrics: cooperation mass, regime, UX and DPR.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Group, ProviderPopulation};
use crate::dynamics::StationaryResult;
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::payoff::UtilityTable;

/// Threshold above which a group counts as mostly cooperative (strict).
pub const MOSTLY_COOPERATIVE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Neither group mostly cooperative.
    A,
    /// Only the dominant group mostly cooperative.
    B,
    /// Both groups mostly cooperative.
    C,
    /// Only the marginalised group mostly cooperative; anomalous.
    #[serde(rename = "B'")]
    BPrime,
}

impl Regime {
    pub fn classify(mostly_cooperative_m: bool, mostly_cooperative_d: bool) -> Self {
        match (mostly_cooperative_m, mostly_cooperative_d) {
            (false, false) => Regime::A,
            (false, true) => Regime::B,
            (true, true) => Regime::C,
            (true, false) => Regime::BPrime,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::A => "A",
            Regime::B => "B",
            Regime::C => "C",
            Regime::BPrime => "B'",
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Regime::BPrime
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub coop_mass_m: f64,
    pub coop_mass_d: f64,
    pub mostly_cooperative_m: bool,
    pub mostly_cooperative_d: bool,
    pub regime: Regime,
    pub regime_anomalous: bool,
    pub sigma_star_m: f64,
    pub sigma_star_d: f64,
    pub ux: f64,
    pub u_bar_m: f64,
    pub u_bar_d: f64,
    pub dpr: f64,
    /// Both group utilities were zero and DPR was set to 1.
    pub dpr_degenerate: bool,
}

/// Stationary mass on the `h_g = Z_g` edge.
pub fn cooperation_mass(h_star: &[f64], population: ProviderPopulation, group: Group) -> f64 {
    let full = population.size_of(group);
    let mut acc = NeumaierSum::default();
    for (s, p) in population.states().zip(h_star) {
        if s.high_count(group) == full {
            acc.add(*p);
        }
    }
    acc.value()
}

pub fn regime(coop_mass_m: f64, coop_mass_d: f64) -> Regime {
    Regime::classify(coop_mass_m > MOSTLY_COOPERATIVE, coop_mass_d > MOSTLY_COOPERATIVE)
}

/// Expected H-fraction `σ*_g` of one group.
pub fn sigma_star(h_star: &[f64], population: ProviderPopulation, group: Group) -> f64 {
    let z = population.size_of(group) as f64;
    let mut acc = NeumaierSum::default();
    for (s, p) in population.states().zip(h_star) {
        acc.add(p * s.high_count(group) as f64 / z);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserExperience {
    pub sigma_star_m: f64,
    pub sigma_star_d: f64,
    pub ux: f64,
}

pub fn user_experience(h_star: &[f64], population: ProviderPopulation) -> UserExperience {
    let sigma_star_m = sigma_star(h_star, population, Group::Marginalised);
    let sigma_star_d = sigma_star(h_star, population, Group::Dominant);
    let ux = (sigma_star_m * population.z_m as f64 + sigma_star_d * population.z_d as f64) / population.total() as f64;
    UserExperience {
        sigma_star_m,
        sigma_star_d,
        ux,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityRatio {
    pub u_bar_m: f64,
    pub u_bar_d: f64,
    pub dpr: f64,
    pub degenerate: bool,
}

/// Ratio of the worse-off to the better-off group's stationary average
/// utility. `utilities` holds one table per lattice state.
pub fn demographic_parity_ratio(
    h_star: &[f64],
    utilities: &[UtilityTable],
    population: ProviderPopulation,
) -> Result<ParityRatio> {
    let mut m = NeumaierSum::default();
    let mut d = NeumaierSum::default();
    for ((s, p), u) in population.states().zip(h_star).zip(utilities) {
        m.add(p * u.group_average(Group::Marginalised, s, population));
        d.add(p * u.group_average(Group::Dominant, s, population));
    }
    let (u_bar_m, u_bar_d) = (m.value(), d.value());
    if u_bar_m < 0.0 || u_bar_d < 0.0 || !u_bar_m.is_finite() || !u_bar_d.is_finite() {
        return Err(Error::Domain(format!(
            "group utilities must be nonnegative, got ({u_bar_m}, {u_bar_d})"
        )));
    }
    let hi = u_bar_m.max(u_bar_d);
    let (dpr, degenerate) = if hi == 0.0 {
        (1.0, true)
    } else {
        (u_bar_m.min(u_bar_d) / hi, false)
    };
    Ok(ParityRatio {
        u_bar_m,
        u_bar_d,
        dpr,
        degenerate,
    })
}

pub fn report(stationary: &StationaryResult, utilities: &[UtilityTable]) -> Result<MetricsReport> {
    let pop = stationary.population;
    let h = &stationary.distribution;
    let coop_mass_m = cooperation_mass(h, pop, Group::Marginalised);
    let coop_mass_d = cooperation_mass(h, pop, Group::Dominant);
    let regime = regime(coop_mass_m, coop_mass_d);
    let ux = user_experience(h, pop);
    let parity = demographic_parity_ratio(h, utilities, pop)?;
    Ok(MetricsReport {
        coop_mass_m,
        coop_mass_d,
        mostly_cooperative_m: coop_mass_m > MOSTLY_COOPERATIVE,
        mostly_cooperative_d: coop_mass_d > MOSTLY_COOPERATIVE,
        regime,
        regime_anomalous: regime.is_anomalous(),
        sigma_star_m: ux.sigma_star_m,
        sigma_star_d: ux.sigma_star_d,
        ux: ux.ux,
        u_bar_m: parity.u_bar_m,
        u_bar_d: parity.u_bar_d,
        dpr: parity.dpr,
        dpr_degenerate: parity.degenerate,
    })
}
