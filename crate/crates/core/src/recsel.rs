//! Exact probability that a given provider is shown and then chosen.
//!
//! A list of `k` providers is built in three stages:
//!
//! 1. `k̂_M = min(k_M, Z_GM)` providers drawn uniformly without replacement
//!    from the Good-rated marginalised providers;
//! 2. `k̂_G − k̂_M` drawn from the remaining Good-rated providers of either
//!    group, where `k̂_G = min(k_G, Z_G)`;
//! 3. `k_R = k − k̂_G` drawn from every provider not yet shown.
//!
//! The user then picks one listed provider with probability proportional to
//! its weight (1 for Good, `1 − γ` for Bad), or uniformly when all weights
//! are zero. After stages 1–2 the list holds exactly `k̂_G` Good-rated
//! providers, so the only random part of the list composition that matters
//! is the hypergeometric number of Good-rated providers among the stage-3
//! draws. Conditioning on the stage in which the focal provider enters and
//! summing over that count gives the exact choice probability.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::domain::{Group, PlatformPolicy, ProviderPopulation, Rating, UserPopulation};
use crate::error::{Error, Result};
use crate::numeric::{ln_choose, NeumaierSum};

/// Good-rated counts per group for one snapshot of the roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RatingConfiguration {
    pub population: ProviderPopulation,
    pub z_gd: usize,
    pub z_gm: usize,
}

impl RatingConfiguration {
    pub fn new(population: ProviderPopulation, z_gd: usize, z_gm: usize) -> Result<Self> {
        if z_gd > population.z_d || z_gm > population.z_m {
            return Err(Error::Domain(format!(
                "rating configuration (Z_GD={z_gd}, Z_GM={z_gm}) exceeds group sizes ({}, {})",
                population.z_d, population.z_m
            )));
        }
        Ok(Self { population, z_gd, z_gm })
    }

    pub fn total(&self) -> usize {
        self.population.total()
    }

    pub fn good(&self) -> usize {
        self.z_gd + self.z_gm
    }

    pub fn bad(&self) -> usize {
        self.total() - self.good()
    }

    /// Head-count of the `(group, rating)` category.
    pub fn count(&self, group: Group, rating: Rating) -> usize {
        match (group, rating) {
            (Group::Marginalised, Rating::Good) => self.z_gm,
            (Group::Marginalised, Rating::Bad) => self.population.z_m - self.z_gm,
            (Group::Dominant, Rating::Good) => self.z_gd,
            (Group::Dominant, Rating::Bad) => self.population.z_d - self.z_gd,
        }
    }
}

/// Policy floors clipped to what the roster can supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EffectivePolicy {
    pub k: usize,
    pub k_hat_m: usize,
    pub k_hat_g: usize,
    pub k_r: usize,
}

impl EffectivePolicy {
    pub fn derive(cfg: &RatingConfiguration, k: usize, policy: &PlatformPolicy) -> Result<Self> {
        if k > cfg.total() {
            return Err(Error::Domain(format!(
                "list length k={k} exceeds population {}",
                cfg.total()
            )));
        }
        if policy.k_m > policy.k_g || policy.k_g > k {
            return Err(Error::Domain(format!(
                "policy requires k_M <= k_G <= k, got k_M={}, k_G={}, k={k}",
                policy.k_m, policy.k_g
            )));
        }
        let k_hat_g = policy.k_g.min(cfg.good());
        let k_hat_m = policy.k_m.min(cfg.z_gm);
        Ok(Self {
            k,
            k_hat_m,
            k_hat_g,
            k_r: k - k_hat_g,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FocalDescriptor {
    pub group: Group,
    pub rating: Rating,
}

impl FocalDescriptor {
    pub const ALL: [FocalDescriptor; 4] = [
        FocalDescriptor::new(Group::Marginalised, Rating::Good),
        FocalDescriptor::new(Group::Marginalised, Rating::Bad),
        FocalDescriptor::new(Group::Dominant, Rating::Good),
        FocalDescriptor::new(Group::Dominant, Rating::Bad),
    ];

    pub const fn new(group: Group, rating: Rating) -> Self {
        Self { group, rating }
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.group.label(), self.rating.label())
    }

    fn check(&self, cfg: &RatingConfiguration) -> Result<()> {
        if cfg.count(self.group, self.rating) == 0 {
            return Err(Error::InconsistentFocal(format!(
                "no {} provider rated {} in (Z_GD={}, Z_GM={})",
                self.group.label(),
                self.rating.label(),
                cfg.z_gd,
                cfg.z_gm
            )));
        }
        Ok(())
    }
}

/// Per-stage inclusion probabilities of the focal provider. `stage2` and
/// `stage3` are conditional on not having been shown earlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inclusion {
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
    pub total: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if num == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Probability that exactly `x` of `n` draws without replacement from `pool`
/// items, `marked` of them marked, are marked.
pub fn hypergeometric_pmf(pool: usize, marked: usize, n: usize, x: usize) -> Result<f64> {
    if marked > pool || n > pool {
        return Err(Error::Domain(format!(
            "hypergeometric parameters out of range: N={pool}, K={marked}, n={n}"
        )));
    }
    if x > n || x > marked || n - x > pool - marked {
        return Ok(0.0);
    }
    let ln = ln_choose(marked, x) + ln_choose(pool - marked, n - x) - ln_choose(pool, n);
    Ok(ln.exp())
}

fn hypergeometric_support(pool: usize, marked: usize, n: usize) -> std::ops::RangeInclusive<usize> {
    let lo = n.saturating_sub(pool - marked);
    let hi = n.min(marked);
    lo..=hi
}

/// `E[f(X)]` for `X ~ Hypergeometric(pool, marked, n)`.
///
/// Only the lowest support point is evaluated in log space; the rest
/// follow from the ratio `P(x+1)/P(x) = (K−x)(n−x) / ((x+1)(N−K−n+x+1))`.
fn hypergeometric_expectation(pool: usize, marked: usize, n: usize, f: impl Fn(usize) -> f64) -> Result<f64> {
    let support = hypergeometric_support(pool, marked, n);
    let (lo, hi) = (*support.start(), *support.end());
    let mut pmf = hypergeometric_pmf(pool, marked, n, lo)?;
    let mut acc = NeumaierSum::default();
    for x in lo..=hi {
        acc.add(pmf * f(x));
        if x < hi {
            let num = ((marked - x) * (n - x)) as f64;
            let den = ((x + 1) * (pool - marked + x + 1 - n)) as f64;
            pmf *= num / den;
        }
    }
    Ok(acc.value())
}

pub fn inclusion_probability(
    focal: FocalDescriptor,
    cfg: &RatingConfiguration,
    pol: &EffectivePolicy,
) -> Result<Inclusion> {
    focal.check(cfg)?;
    let stage3_pool = cfg.total() - pol.k_hat_g;
    let (stage1, stage2) = match focal.rating {
        Rating::Good => {
            let s1 = match focal.group {
                Group::Marginalised => ratio(pol.k_hat_m, cfg.z_gm),
                Group::Dominant => 0.0,
            };
            let s2 = ratio(pol.k_hat_g - pol.k_hat_m, cfg.good() - pol.k_hat_m);
            (s1, s2)
        }
        Rating::Bad => (0.0, 0.0),
    };
    let missed_early = (1.0 - stage1) * (1.0 - stage2);
    let stage3 = if missed_early > 0.0 {
        ratio(pol.k_r, stage3_pool)
    } else {
        0.0
    };
    let total = 1.0 - missed_early * (1.0 - stage3);
    Ok(Inclusion {
        stage1,
        stage2,
        stage3,
        total,
    })
}

/// Expected share of the focal provider's weight in the total weight of
/// the shown list, as a function of the number of Good-rated providers shown.
fn choice_share(k: usize, gamma: f64, focal_rating: Rating) -> impl Fn(usize) -> f64 {
    let bad_weight = 1.0 - gamma;
    let focal_weight = match focal_rating {
        Rating::Good => 1.0,
        Rating::Bad => bad_weight,
    };
    move |good_shown: usize| {
        let total = good_shown as f64 + (k - good_shown) as f64 * bad_weight;
        if total == 0.0 {
            1.0 / k as f64
        } else {
            focal_weight / total
        }
    }
}

/// Probability that the focal provider is shown and then chosen for one
/// interaction.
pub fn choice_probability(
    focal: FocalDescriptor,
    cfg: &RatingConfiguration,
    users: &UserPopulation,
    policy: &PlatformPolicy,
) -> Result<f64> {
    let pol = EffectivePolicy::derive(cfg, users.k, policy)?;
    choice_probability_with(focal, cfg, &pol, users.gamma)
}

fn choice_probability_with(
    focal: FocalDescriptor,
    cfg: &RatingConfiguration,
    pol: &EffectivePolicy,
    gamma: f64,
) -> Result<f64> {
    let inc = inclusion_probability(focal, cfg, pol)?;
    let share = choice_share(pol.k, gamma, focal.rating);
    let pool = cfg.total() - pol.k_hat_g;
    let good_in_pool = cfg.good() - pol.k_hat_g;
    let p_early = 1.0 - (1.0 - inc.stage1) * (1.0 - inc.stage2);
    let p_late = (1.0 - p_early) * inc.stage3;

    let mut acc = NeumaierSum::default();
    match focal.rating {
        Rating::Good => {
            if p_early > 0.0 {
                let e = hypergeometric_expectation(pool, good_in_pool, pol.k_r, |x| share(pol.k_hat_g + x))?;
                acc.add(p_early * e);
            }
            if p_late > 0.0 {
                // Focal occupies one stage-3 slot and is one of the pool's Good members.
                let e = hypergeometric_expectation(pool - 1, good_in_pool - 1, pol.k_r - 1, |x| {
                    share(pol.k_hat_g + 1 + x)
                })?;
                acc.add(p_late * e);
            }
        }
        Rating::Bad => {
            if p_late > 0.0 {
                let e = hypergeometric_expectation(pool - 1, good_in_pool, pol.k_r - 1, |x| share(pol.k_hat_g + x))?;
                acc.add(p_late * e);
            }
        }
    }
    Ok(acc.value())
}

/// Choice probabilities for the four `(group, rating)` categories of one
/// rating configuration. Categories with no members are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceProbabilityTable {
    pub config: RatingConfiguration,
    pub policy: EffectivePolicy,
    pub entries: BTreeMap<FocalDescriptor, Option<f64>>,
    pub inclusion: BTreeMap<FocalDescriptor, Option<Inclusion>>,
}

impl ChoiceProbabilityTable {
    pub fn get(&self, focal: FocalDescriptor) -> Option<f64> {
        self.entries.get(&focal).copied().flatten()
    }

    /// `Σ count(category) · p(category)`; equals 1 whenever `k ≥ 1`.
    pub fn total_choice(&self) -> f64 {
        let mut acc = NeumaierSum::default();
        for (focal, p) in &self.entries {
            if let Some(p) = p {
                acc.add(self.config.count(focal.group, focal.rating) as f64 * p);
            }
        }
        acc.value()
    }
}

/// Choice probabilities in [`FocalDescriptor::ALL`] order, skipping the
/// map-building and inclusion bookkeeping of [`choice_table`].
pub(crate) fn choice_row(
    cfg: &RatingConfiguration,
    users: &UserPopulation,
    policy: &PlatformPolicy,
) -> Result<[Option<f64>; 4]> {
    let pol = EffectivePolicy::derive(cfg, users.k, policy)?;
    let mut row = [None; 4];
    for (slot, focal) in row.iter_mut().zip(FocalDescriptor::ALL) {
        if cfg.count(focal.group, focal.rating) > 0 {
            *slot = Some(choice_probability_with(focal, cfg, &pol, users.gamma)?);
        }
    }
    Ok(row)
}

pub fn choice_table(
    cfg: &RatingConfiguration,
    users: &UserPopulation,
    policy: &PlatformPolicy,
) -> Result<ChoiceProbabilityTable> {
    let pol = EffectivePolicy::derive(cfg, users.k, policy)?;
    let mut entries = BTreeMap::new();
    let mut inclusion = BTreeMap::new();
    for focal in FocalDescriptor::ALL {
        if cfg.count(focal.group, focal.rating) == 0 {
            entries.insert(focal, None);
            inclusion.insert(focal, None);
        } else {
            entries.insert(focal, Some(choice_probability_with(focal, cfg, &pol, users.gamma)?));
            inclusion.insert(focal, Some(inclusion_probability(focal, cfg, &pol)?));
        }
    }
    Ok(ChoiceProbabilityTable {
        config: *cfg,
        policy: pol,
        entries,
        inclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MG: FocalDescriptor = FocalDescriptor::new(Group::Marginalised, Rating::Good);
    const MB: FocalDescriptor = FocalDescriptor::new(Group::Marginalised, Rating::Bad);
    const DG: FocalDescriptor = FocalDescriptor::new(Group::Dominant, Rating::Good);
    const DB: FocalDescriptor = FocalDescriptor::new(Group::Dominant, Rating::Bad);

    fn users(gamma: f64, k: usize) -> UserPopulation {
        UserPopulation { epsilon: 0.0, gamma, k }
    }

    fn pol(k_g: usize, k_m: usize) -> PlatformPolicy {
        PlatformPolicy { k_g, k_m }
    }

    #[test]
    fn hypergeometric_examples() {
        assert!((hypergeometric_pmf(10, 4, 3, 2).unwrap() - 0.3).abs() < 1e-14);
        assert_eq!(hypergeometric_pmf(7, 3, 0, 0).unwrap(), 1.0);
        assert!((hypergeometric_pmf(5, 5, 3, 3).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(hypergeometric_pmf(5, 5, 3, 2).unwrap(), 0.0);
        assert!(hypergeometric_pmf(5, 6, 3, 2).is_err());
        assert!(hypergeometric_pmf(5, 2, 6, 2).is_err());
    }

    #[test]
    fn hypergeometric_large_pool_normalised() {
        let s: f64 = (0..=60).map(|x| hypergeometric_pmf(200, 90, 60, x).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stage_one_takes_every_good_marginalised() {
        let p = ProviderPopulation::new(5, 5);
        let cfg = RatingConfiguration::new(p, 2, 3).unwrap();
        let e = EffectivePolicy::derive(&cfg, 6, &pol(4, 4)).unwrap();
        let inc = inclusion_probability(MG, &cfg, &e).unwrap();
        assert_eq!(inc.stage1, 1.0);
        assert_eq!(inc.total, 1.0);
    }

    #[test]
    fn bad_rated_never_shown_without_random_slots() {
        let p = ProviderPopulation::new(5, 5);
        let cfg = RatingConfiguration::new(p, 4, 3).unwrap();
        let e = EffectivePolicy::derive(&cfg, 5, &pol(5, 1)).unwrap();
        assert_eq!(e.k_r, 0);
        assert_eq!(inclusion_probability(MB, &cfg, &e).unwrap().total, 0.0);
        assert_eq!(inclusion_probability(DB, &cfg, &e).unwrap().total, 0.0);
    }

    #[test]
    fn inconsistent_focal_is_rejected() {
        let p = ProviderPopulation::new(3, 3);
        let cfg = RatingConfiguration::new(p, 0, 3).unwrap();
        assert!(matches!(
            choice_probability(DG, &cfg, &users(0.5, 2), &pol(1, 0)),
            Err(Error::InconsistentFocal(_))
        ));
        assert!(RatingConfiguration::new(p, 4, 0).is_err());
    }

    #[test]
    fn uniform_when_no_policy_and_no_sensitivity() {
        let p = ProviderPopulation::new(6, 4);
        for (gd, gm) in [(0, 0), (3, 2), (6, 4)] {
            let cfg = RatingConfiguration::new(p, gd, gm).unwrap();
            for k in 1..=10 {
                let t = choice_table(&cfg, &users(0.0, k), &pol(0, 0)).unwrap();
                for (_, v) in t.entries {
                    if let Some(v) = v {
                        assert!((v - 0.1).abs() < 1e-14, "k={k} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn full_sensitivity_starves_bad_rated() {
        let p = ProviderPopulation::new(5, 5);
        let cfg = RatingConfiguration::new(p, 2, 1).unwrap();
        for k_g in 1..=3 {
            let v = choice_probability(DB, &cfg, &users(1.0, 6), &pol(k_g, 0)).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn zero_weight_falls_back_to_uniform() {
        let p = ProviderPopulation::new(3, 3);
        let cfg = RatingConfiguration::new(p, 0, 0).unwrap();
        let t = choice_table(&cfg, &users(1.0, 3), &pol(2, 1)).unwrap();
        assert!((t.get(MB).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((t.total_choice() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn everyone_good_full_list() {
        let p = ProviderPopulation::new(4, 3);
        let cfg = RatingConfiguration::new(p, 4, 3).unwrap();
        let t = choice_table(&cfg, &users(0.37, 7), &pol(5, 2)).unwrap();
        assert_eq!(t.get(MB), None);
        assert_eq!(t.get(DB), None);
        assert!((t.get(MG).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!((t.get(DG).unwrap() - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_in_gamma() {
        let p = ProviderPopulation::new(6, 5);
        let cfg = RatingConfiguration::new(p, 3, 2).unwrap();
        let mut prev: Option<ChoiceProbabilityTable> = None;
        for i in 0..=10 {
            let g = i as f64 / 10.0;
            let t = choice_table(&cfg, &users(g, 5), &pol(2, 1)).unwrap();
            if let Some(prev) = &prev {
                for f in [MB, DB] {
                    assert!(t.get(f).unwrap() <= prev.get(f).unwrap() + 1e-15);
                }
                for f in [MG, DG] {
                    assert!(t.get(f).unwrap() >= prev.get(f).unwrap() - 1e-15);
                }
            }
            prev = Some(t);
        }
    }
}
