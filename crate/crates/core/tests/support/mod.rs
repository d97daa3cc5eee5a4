//! Brute-force reference computations shared by the integration tests.
//!
//! Providers are bit positions in a `u32`. Every stage draw is enumerated
//! as a subset of the eligible pool, each subset equally likely, and the
//! weighted choice is applied to every resulting list.

#![allow(dead_code)]

use std::collections::HashMap;

use platform_egt::domain::{Group, ModelConfig, PlatformPolicy, State, Strategy};

/// All subsets of `mask` with exactly `size` members.
pub fn subsets(mask: u32, size: usize) -> Vec<u32> {
    subsets_all(mask)
        .into_iter()
        .filter(|s| s.count_ones() as usize == size)
        .collect()
}

/// A concrete roster with fixed ratings.
#[derive(Debug, Clone)]
pub struct Roster {
    pub marginalised: u32,
    pub good: u32,
    pub len: usize,
}

impl Roster {
    /// `z_m` marginalised providers then `z_d` dominant ones; the first
    /// `z_gm` and `z_gd` of each are Good-rated.
    pub fn from_counts(z_d: usize, z_m: usize, z_gd: usize, z_gm: usize) -> Self {
        let all_m = (1u32 << z_m) - 1;
        let good_m = (1u32 << z_gm) - 1;
        let good_d = ((1u32 << z_gd) - 1) << z_m;
        Self {
            marginalised: all_m,
            good: good_m | good_d,
            len: z_d + z_m,
        }
    }

    pub fn all(&self) -> u32 {
        (1u32 << self.len) - 1
    }
}

/// Exact per-provider probability of being chosen, by full enumeration.
pub fn enumerate_choice(roster: &Roster, k: usize, policy: PlatformPolicy, gamma: f64) -> Vec<f64> {
    let mg = roster.good & roster.marginalised;
    let k_hat_m = policy.k_m.min(mg.count_ones() as usize);
    let k_hat_g = policy.k_g.min(roster.good.count_ones() as usize);
    let mut p = vec![0.0; roster.len];
    let s1 = subsets(mg, k_hat_m);
    for &a in &s1 {
        let s2 = subsets(roster.good & !a, k_hat_g - k_hat_m);
        for &b in &s2 {
            let s3 = subsets(roster.all() & !a & !b, k - k_hat_g);
            let w = 1.0 / (s1.len() * s2.len() * s3.len()) as f64;
            for &c in &s3 {
                let list = a | b | c;
                let weight = |i: usize| {
                    if roster.good >> i & 1 == 1 {
                        1.0
                    } else {
                        1.0 - gamma
                    }
                };
                let total: f64 = (0..roster.len).filter(|i| list >> i & 1 == 1).map(weight).sum();
                for i in (0..roster.len).filter(|i| list >> i & 1 == 1) {
                    p[i] += w * if total == 0.0 {
                        1.0 / k as f64
                    } else {
                        weight(i) / total
                    };
                }
            }
        }
    }
    p
}

/// Utility of each provider at `state`, by enumerating every joint rating
/// draw and every list. Marginalised providers come first; within each
/// group H-players precede L-players.
pub fn enumerate_utilities(config: &ModelConfig, state: State) -> Vec<f64> {
    let pop = config.population;
    let (z_m, z_d) = (pop.z_m, pop.z_d);
    let z = z_m + z_d;
    let marginalised = (1u32 << z_m) - 1;
    let high_m = (1u32 << state.h_m) - 1;
    let high_d = ((1u32 << state.h_d) - 1) << z_m;
    let eps = config.users.epsilon;
    let mut cache: HashMap<u32, Vec<f64>> = HashMap::new();
    let mut u = vec![0.0; z];
    // every subset of the marginalised H-players may be rated Good
    for good_m in subsets_all(high_m) {
        let n_good = good_m.count_ones() as i32;
        let n_bad = state.h_m as i32 - n_good;
        let prob = (1.0 - eps).powi(n_good) * eps.powi(n_bad);
        if prob == 0.0 {
            continue;
        }
        let good = good_m | high_d;
        let choice = cache.entry(good).or_insert_with(|| {
            let roster = Roster {
                marginalised,
                good,
                len: z,
            };
            enumerate_choice(&roster, config.users.k, config.policy, config.users.gamma)
        });
        for i in 0..z {
            u[i] += prob * choice[i];
        }
    }
    for (i, v) in u.iter_mut().enumerate() {
        let high = (high_m | high_d) >> i & 1 == 1;
        let strategy = if high { Strategy::High } else { Strategy::Low };
        *v *= config.economics.payoff(strategy);
    }
    u
}

pub fn subsets_all(mask: u32) -> Vec<u32> {
    let mut out = vec![0];
    let mut s = mask;
    while s != 0 {
        out.push(s);
        s = (s - 1) & mask;
    }
    out
}

/// Position in the [`enumerate_utilities`] roster of one member of
/// `(group, strategy)`, if any.
pub fn member(config: &ModelConfig, state: State, group: Group, strategy: Strategy) -> Option<usize> {
    let pop = config.population;
    let (base, size, h) = match group {
        Group::Marginalised => (0, pop.z_m, state.h_m),
        Group::Dominant => (pop.z_m, pop.z_d, state.h_d),
    };
    match strategy {
        Strategy::High if h > 0 => Some(base),
        Strategy::Low if h < size => Some(base + h),
        _ => None,
    }
}

/// Indices of the nondominated points by direct pairwise comparison.
pub fn brute_force_front(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&p| {
            !points
                .iter()
                .any(|&q| q.0 >= p.0 && q.1 >= p.1 && (q.0 > p.0 || q.1 > p.1))
        })
        .collect()
}
