//! Expected per-provider utility at a lattice state.
//!
//! `u(g, s | h) = π(s) · Σ_r P(r | g, s) · Σ_z P(Z_GM = z) · p(g, r | Z_GD, z)`
//! with `π(H) = b − c`, `π(L) = b`. Dominant H-players are always rated Good,
//! so `Z_GD` is deterministic; each marginalised H-player is rated Good with
//! probability `1 − ε`, so `Z_GM` is a binomial mixture.
//!
//! When a `(group, strategy)` category is empty at a state its utility is
//! still defined: the focal is treated as a hypothetical member and the
//! other providers' counts are kept as close to the state as the group size
//! allows. Such values only ever enter the dynamics multiplied by zero.

use serde::Serialize;

use crate::domain::{FocalConditioning, Group, ModelConfig, ProviderPopulation, Rating, State, Strategy};
use crate::error::{Error, Result};
use crate::numeric::{binomial_pmf, NeumaierSum};
use crate::recsel::{choice_row, FocalDescriptor, RatingConfiguration};

/// Probability that a provider of `group` playing `strategy` holds rating G.
pub fn rating_probability(group: Group, strategy: Strategy, epsilon: f64) -> f64 {
    match (group, strategy) {
        (_, Strategy::Low) => 0.0,
        (Group::Marginalised, Strategy::High) => 1.0 - epsilon,
        (Group::Dominant, Strategy::High) => 1.0,
    }
}

/// A focal provider as seen by the payoff model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PayoffFocal {
    pub group: Group,
    pub strategy: Strategy,
    pub rating: Rating,
}

impl PayoffFocal {
    pub fn new(group: Group, strategy: Strategy, rating: Rating) -> Self {
        Self {
            group,
            strategy,
            rating,
        }
    }
}

/// Distribution of the Good-rated marginalised count `Z_GM`, indexed by value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmMixture {
    pub masses: Vec<f64>,
}

impl GmMixture {
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.masses.iter().copied().enumerate().filter(|&(_, m)| m > 0.0)
    }
}

/// Number of H-players among the *other* members of the focal's group.
fn others_high(group: Group, strategy: Strategy, state: State, pop: ProviderPopulation) -> usize {
    let h = state.high_count(group);
    let others = pop.size_of(group) - 1;
    match strategy {
        Strategy::High => h.saturating_sub(1),
        Strategy::Low => h.min(others),
    }
}

fn check_focal(focal: PayoffFocal, state: State, pop: ProviderPopulation) -> Result<()> {
    if state.h_m > pop.z_m || state.h_d > pop.z_d {
        return Err(Error::StateOutOfBounds {
            h_m: state.h_m,
            h_d: state.h_d,
            z_m: pop.z_m,
            z_d: pop.z_d,
        });
    }
    let feasible_rating = !matches!(
        (focal.group, focal.strategy, focal.rating),
        (_, Strategy::Low, Rating::Good) | (Group::Dominant, Strategy::High, Rating::Bad)
    );
    if !feasible_rating {
        return Err(Error::InconsistentFocal(format!(
            "{}-player of group {} cannot hold rating {}",
            focal.strategy.label(),
            focal.group.label(),
            focal.rating.label()
        )));
    }
    let h = state.high_count(focal.group);
    let members = match focal.strategy {
        Strategy::High => h,
        Strategy::Low => pop.size_of(focal.group) - h,
    };
    if members == 0 {
        return Err(Error::InconsistentFocal(format!(
            "no {}-player in group {} at state ({}, {})",
            focal.strategy.label(),
            focal.group.label(),
            state.h_m,
            state.h_d
        )));
    }
    Ok(())
}

/// `Bin(n, p)` probability rows for every `n` in `0..=max_n`.
#[derive(Debug, Clone)]
struct BinomialRows {
    rows: Vec<Vec<f64>>,
}

impl BinomialRows {
    fn new(max_n: usize, p: f64) -> Self {
        let rows = (0..=max_n)
            .map(|n| (0..=n).map(|x| binomial_pmf(n, p, x)).collect())
            .collect();
        Self { rows }
    }

    fn pmf(&self, n: usize, x: usize) -> f64 {
        self.rows[n][x]
    }
}

fn mixture_unchecked(
    state: State,
    focal: PayoffFocal,
    binom: &BinomialRows,
    mode: FocalConditioning,
    pop: ProviderPopulation,
) -> GmMixture {
    let mut masses = vec![0.0; pop.z_m + 1];
    let focal_is_mg = focal.group == Group::Marginalised && focal.rating == Rating::Good;
    match mode {
        FocalConditioning::Exact => {
            let (others, offset) = match focal.group {
                Group::Marginalised => (
                    others_high(Group::Marginalised, focal.strategy, state, pop),
                    usize::from(focal_is_mg),
                ),
                Group::Dominant => (state.h_m, 0),
            };
            for z in 0..=others {
                masses[z + offset] += binom.pmf(others, z);
            }
        }
        FocalConditioning::Naive => {
            let focal_is_mb = focal.group == Group::Marginalised && focal.rating == Rating::Bad;
            let lo = usize::from(focal_is_mg);
            let hi = if focal_is_mb { pop.z_m - 1 } else { pop.z_m };
            for z in 0..=state.h_m {
                masses[z.clamp(lo, hi)] += binom.pmf(state.h_m, z);
            }
        }
    }
    GmMixture { masses }
}

/// Distribution of `Z_GM` seen by `focal` at `state`.
pub fn gm_mixture(
    state: State,
    focal: PayoffFocal,
    epsilon: f64,
    mode: FocalConditioning,
    population: ProviderPopulation,
) -> Result<GmMixture> {
    check_focal(focal, state, population)?;
    let binom = BinomialRows::new(population.z_m, 1.0 - epsilon);
    Ok(mixture_unchecked(state, focal, &binom, mode, population))
}

/// `Z_GD` seen by the focal; dominant ratings are deterministic.
fn good_dominant(state: State, focal: PayoffFocal, pop: ProviderPopulation) -> usize {
    match focal.group {
        Group::Marginalised => state.h_d,
        Group::Dominant => {
            others_high(Group::Dominant, focal.strategy, state, pop) + usize::from(focal.rating == Rating::Good)
        }
    }
}

/// The four utilities at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityTable {
    pub m_high: f64,
    pub m_low: f64,
    pub d_high: f64,
    pub d_low: f64,
}

impl UtilityTable {
    pub fn get(&self, group: Group, strategy: Strategy) -> f64 {
        match (group, strategy) {
            (Group::Marginalised, Strategy::High) => self.m_high,
            (Group::Marginalised, Strategy::Low) => self.m_low,
            (Group::Dominant, Strategy::High) => self.d_high,
            (Group::Dominant, Strategy::Low) => self.d_low,
        }
    }

    /// Strategy-share weighted mean utility of `group` at `state`.
    pub fn group_average(&self, group: Group, state: State, pop: ProviderPopulation) -> f64 {
        let z = pop.size_of(group) as f64;
        let h = state.high_count(group) as f64;
        self.get(group, Strategy::Low) * (z - h) / z + self.get(group, Strategy::High) * h / z
    }
}

/// Utility evaluator for one config with every choice table precomputed.
#[derive(Debug, Clone)]
pub struct PayoffModel {
    config: ModelConfig,
    // [z_gd * (Z_M + 1) + z_gm][focal index]
    choice: Vec<[Option<f64>; 4]>,
    binom: BinomialRows,
}

fn focal_slot(focal: FocalDescriptor) -> usize {
    match (focal.group, focal.rating) {
        (Group::Marginalised, Rating::Good) => 0,
        (Group::Marginalised, Rating::Bad) => 1,
        (Group::Dominant, Rating::Good) => 2,
        (Group::Dominant, Rating::Bad) => 3,
    }
}

impl PayoffModel {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let pop = config.population;
        let mut choice = Vec::with_capacity((pop.z_d + 1) * (pop.z_m + 1));
        for z_gd in 0..=pop.z_d {
            for z_gm in 0..=pop.z_m {
                let cfg = RatingConfiguration::new(pop, z_gd, z_gm)?;
                choice.push(choice_row(&cfg, &config.users, &config.policy)?);
            }
        }
        Ok(Self {
            config: *config,
            choice,
            binom: BinomialRows::new(pop.z_m, 1.0 - config.users.epsilon),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn choice_at(&self, z_gd: usize, z_gm: usize, focal: FocalDescriptor) -> f64 {
        let idx = z_gd * (self.config.population.z_m + 1) + z_gm;
        self.choice[idx][focal_slot(focal)].expect("focal is always a member of its own rating configuration")
    }

    /// Expected utility of a provider of `group` playing `strategy`.
    pub fn utility(&self, group: Group, strategy: Strategy, state: State) -> Result<f64> {
        let pop = self.config.population;
        if state.h_m > pop.z_m || state.h_d > pop.z_d {
            return Err(Error::StateOutOfBounds {
                h_m: state.h_m,
                h_d: state.h_d,
                z_m: pop.z_m,
                z_d: pop.z_d,
            });
        }
        let p_good = rating_probability(group, strategy, self.config.users.epsilon);
        let mut acc = NeumaierSum::default();
        for rating in Rating::ALL {
            let p_rating = match rating {
                Rating::Good => p_good,
                Rating::Bad => 1.0 - p_good,
            };
            if p_rating == 0.0 {
                continue;
            }
            let focal = PayoffFocal::new(group, strategy, rating);
            let z_gd = good_dominant(state, focal, pop);
            let mixture = mixture_unchecked(state, focal, &self.binom, self.config.focal_conditioning, pop);
            let descriptor = FocalDescriptor::new(group, rating);
            for (z, mass) in mixture.support() {
                acc.add(p_rating * mass * self.choice_at(z_gd, z, descriptor));
            }
        }
        Ok(self.config.economics.payoff(strategy) * acc.value())
    }

    pub fn table(&self, state: State) -> Result<UtilityTable> {
        Ok(UtilityTable {
            m_high: self.utility(Group::Marginalised, Strategy::High, state)?,
            m_low: self.utility(Group::Marginalised, Strategy::Low, state)?,
            d_high: self.utility(Group::Dominant, Strategy::High, state)?,
            d_low: self.utility(Group::Dominant, Strategy::Low, state)?,
        })
    }

    /// Utility tables for every lattice state in lexicographic order.
    pub fn all_tables(&self) -> Result<Vec<UtilityTable>> {
        self.config.population.states().map(|s| self.table(s)).collect()
    }
}

/// One-off utility evaluation. Builds the full choice memo; prefer
/// [`PayoffModel`] when evaluating many states.
pub fn utility(group: Group, strategy: Strategy, state: State, config: &ModelConfig) -> Result<f64> {
    PayoffModel::new(config)?.utility(group, strategy, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recsel::choice_probability;

    #[test]
    fn rating_probabilities() {
        assert_eq!(rating_probability(Group::Dominant, Strategy::High, 0.3), 1.0);
        assert!((rating_probability(Group::Marginalised, Strategy::High, 0.3) - 0.7).abs() < 1e-15);
        assert_eq!(rating_probability(Group::Marginalised, Strategy::Low, 0.3), 0.0);
        assert_eq!(rating_probability(Group::Dominant, Strategy::Low, 0.3), 0.0);
    }

    #[test]
    fn mixture_examples() {
        let pop = ProviderPopulation::new(20, 20);
        let m = gm_mixture(
            State::new(0, 4),
            PayoffFocal::new(Group::Dominant, Strategy::Low, Rating::Bad),
            0.3,
            FocalConditioning::Exact,
            pop,
        )
        .unwrap();
        assert_eq!(m.support().collect::<Vec<_>>(), vec![(0, 1.0)]);

        let m = gm_mixture(
            State::new(1, 4),
            PayoffFocal::new(Group::Marginalised, Strategy::High, Rating::Good),
            0.3,
            FocalConditioning::Exact,
            pop,
        )
        .unwrap();
        assert_eq!(m.support().collect::<Vec<_>>(), vec![(1, 1.0)]);

        let m = gm_mixture(
            State::new(2, 4),
            PayoffFocal::new(Group::Dominant, Strategy::High, Rating::Good),
            0.5,
            FocalConditioning::Exact,
            pop,
        )
        .unwrap();
        assert_eq!(&m.masses[..3], &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn exact_and_naive_mixtures_differ_for_marginalised_focal() {
        let pop = ProviderPopulation::new(5, 5);
        let focal = PayoffFocal::new(Group::Marginalised, Strategy::High, Rating::Good);
        let exact = gm_mixture(State::new(3, 2), focal, 0.4, FocalConditioning::Exact, pop).unwrap();
        let naive = gm_mixture(State::new(3, 2), focal, 0.4, FocalConditioning::Naive, pop).unwrap();
        assert_eq!(exact.masses[0], 0.0);
        assert_eq!(naive.masses[0], 0.0);
        assert!((exact.masses[1] - 0.4 * 0.4).abs() < 1e-15);
        // naive: Bin(3, 0.6) with z = 0 folded into z = 1
        assert!((naive.masses[1] - (0.4f64.powi(3) + 3.0 * 0.6 * 0.16)).abs() < 1e-15);
        let s: f64 = naive.masses.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mixture_rejects_inconsistent_focal() {
        let pop = ProviderPopulation::new(5, 5);
        let r = gm_mixture(
            State::new(0, 2),
            PayoffFocal::new(Group::Marginalised, Strategy::High, Rating::Good),
            0.1,
            FocalConditioning::Exact,
            pop,
        );
        assert!(matches!(r, Err(Error::InconsistentFocal(_))));
        let r = gm_mixture(
            State::new(2, 2),
            PayoffFocal::new(Group::Dominant, Strategy::Low, Rating::Good),
            0.1,
            FocalConditioning::Exact,
            pop,
        );
        assert!(r.is_err());
        let r = gm_mixture(
            State::new(6, 2),
            PayoffFocal::new(Group::Dominant, Strategy::Low, Rating::Bad),
            0.1,
            FocalConditioning::Exact,
            pop,
        );
        assert!(matches!(r, Err(Error::StateOutOfBounds { .. })));
    }

    #[test]
    fn uniform_choice_utilities() {
        let cfg = ModelConfig::default().with_users(0.3, 0.0, 7).with_policy(0, 0);
        let model = PayoffModel::new(&cfg).unwrap();
        for s in cfg.population.states() {
            let t = model.table(s).unwrap();
            for g in Group::ALL {
                assert!((t.get(g, Strategy::High) - 0.2 / 40.0).abs() < 1e-15);
                assert!((t.get(g, Strategy::Low) - 1.2 / 40.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_bias_reduces_to_bad_rating() {
        let cfg = ModelConfig::default()
            .with_population(6, 5)
            .with_users(1.0, 0.7, 4)
            .with_policy(3, 1);
        let model = PayoffModel::new(&cfg).unwrap();
        let state = State::new(3, 2);
        let u = model.utility(Group::Marginalised, Strategy::High, state).unwrap();
        // ε = 1: every marginalised H-player is Bad, so Z_GM = 0.
        let rc = RatingConfiguration::new(cfg.population, 2, 0).unwrap();
        let p = choice_probability(
            FocalDescriptor::new(Group::Marginalised, Rating::Bad),
            &rc,
            &cfg.users,
            &cfg.policy,
        )
        .unwrap();
        assert!((u - 0.2 * p).abs() < 1e-15);
    }

    #[test]
    fn utilities_bounded_by_b() {
        let cfg = ModelConfig::default()
            .with_population(6, 4)
            .with_users(0.2, 0.9, 3)
            .with_policy(3, 2);
        let model = PayoffModel::new(&cfg).unwrap();
        for t in model.all_tables().unwrap() {
            for g in Group::ALL {
                for s in Strategy::ALL {
                    let u = t.get(g, s);
                    assert!((0.0..=cfg.economics.b).contains(&u));
                }
            }
        }
    }

    #[test]
    fn diagonal_symmetry_without_bias() {
        let cfg = ModelConfig::default().with_users(0.0, 0.6, 10).with_policy(5, 0);
        let model = PayoffModel::new(&cfg).unwrap();
        for a in 0..=20 {
            let t = model.table(State::new(a, a)).unwrap();
            assert!((t.m_high - t.d_high).abs() < 1e-12);
            assert!((t.m_low - t.d_low).abs() < 1e-12);
        }
    }
}
