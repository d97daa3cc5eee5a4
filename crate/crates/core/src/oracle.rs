//! Monte Carlo simulator of the concrete process: rating draws, staged list
//! build, weighted choice, payoff. It shares no code with the exact engine
//! beyond the domain types, and serves as ground truth for it.
//!
//! Episodes run in fixed-size batches. Batch `i` uses a ChaCha8 generator
//! seeded with the run seed and switched to stream `i`, and batch tallies
//! are integer counts merged in batch order, so results do not depend on
//! the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{
    validate, FocalConditioning, Group, ModelConfig, PlatformPolicy, ProviderPopulation, Rating, State, Strategy,
    UserPopulation,
};
use crate::error::{Error, Result};
use crate::payoff::PayoffModel;
use crate::recsel::{choice_table, FocalDescriptor, RatingConfiguration};

pub const BATCH_EPISODES: u64 = 16_384;

/// A materialised roster: one entry per provider.
#[derive(Debug, Clone)]
struct Roster {
    group: Vec<Group>,
    strategy: Vec<Strategy>,
}

impl Roster {
    /// Marginalised providers first, H-players before L-players in each group.
    fn new(population: ProviderPopulation, state: State) -> Self {
        let mut group = Vec::with_capacity(population.total());
        let mut strategy = Vec::with_capacity(population.total());
        for g in [Group::Marginalised, Group::Dominant] {
            let h = state.high_count(g);
            for i in 0..population.size_of(g) {
                group.push(g);
                strategy.push(if i < h { Strategy::High } else { Strategy::Low });
            }
        }
        Self { group, strategy }
    }

    fn len(&self) -> usize {
        self.group.len()
    }
}

/// Reusable buffers for one list build.
struct Scratch {
    shown: Vec<bool>,
    list: Vec<usize>,
    candidates: Vec<usize>,
}

impl Scratch {
    fn new(z: usize, k: usize) -> Self {
        Self {
            shown: vec![false; z],
            list: Vec::with_capacity(k),
            candidates: Vec::with_capacity(z),
        }
    }
}

/// Moves `n` uniformly chosen candidates into the list (partial Fisher–Yates).
fn draw_into<R: Rng>(rng: &mut R, n: usize, s: &mut Scratch) {
    let m = s.candidates.len();
    debug_assert!(n <= m);
    for i in 0..n {
        let j = rng.gen_range(i..m);
        s.candidates.swap(i, j);
        let pick = s.candidates[i];
        s.shown[pick] = true;
        s.list.push(pick);
    }
}

/// Builds a list for the given ratings and returns the chosen provider.
fn episode<R: Rng>(
    rng: &mut R,
    group: &[Group],
    good: &[bool],
    users: &UserPopulation,
    policy: &PlatformPolicy,
    s: &mut Scratch,
) -> usize {
    let z = group.len();
    s.shown.iter_mut().for_each(|x| *x = false);
    s.list.clear();

    let z_gm = (0..z).filter(|&i| good[i] && group[i] == Group::Marginalised).count();
    let z_g = good.iter().filter(|&&g| g).count();
    let k_hat_m = policy.k_m.min(z_gm);
    let k_hat_g = policy.k_g.min(z_g);

    s.candidates.clear();
    s.candidates
        .extend((0..z).filter(|&i| good[i] && group[i] == Group::Marginalised));
    draw_into(rng, k_hat_m, s);

    s.candidates.clear();
    s.candidates.extend((0..z).filter(|&i| good[i] && !s.shown[i]));
    draw_into(rng, k_hat_g - k_hat_m, s);

    s.candidates.clear();
    s.candidates.extend((0..z).filter(|&i| !s.shown[i]));
    draw_into(rng, users.k - k_hat_g, s);

    let bad_weight = 1.0 - users.gamma;
    let weight = |i: usize| if good[i] { 1.0 } else { bad_weight };
    let total: f64 = s.list.iter().map(|&i| weight(i)).sum();
    if total <= 0.0 {
        return s.list[rng.gen_range(0..s.list.len())];
    }
    let mut u = rng.gen::<f64>() * total;
    for &i in &s.list {
        let w = weight(i);
        if u < w {
            return i;
        }
        u -= w;
    }
    // Rounding can leave `u` marginally above the last cumulative weight.
    *s.list
        .iter()
        .rev()
        .find(|&&i| weight(i) > 0.0)
        .expect("positive total weight implies a positive entry")
}

/// Runs `episodes` episodes in seeded batches; `body` tallies one batch
/// and batch tallies are summed in order.
fn run_batches<const N: usize, F>(episodes: u64, seed: u64, body: F) -> [u64; N]
where
    F: Fn(&mut ChaCha8Rng, u64, &mut [u64; N]) + Sync,
{
    let batches = episodes.div_ceil(BATCH_EPISODES);
    let tallies: Vec<[u64; N]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = BATCH_EPISODES.min(episodes - b * BATCH_EPISODES);
            let mut t = [0u64; N];
            body(&mut rng, n, &mut t);
            t
        })
        .collect();
    let mut out = [0u64; N];
    for t in tallies {
        for (o, v) in out.iter_mut().zip(t) {
            *o += v;
        }
    }
    out
}

/// Empirical estimate of a per-member probability from the number of
/// episodes in which any of `members` exchangeable providers was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

fn per_member(hits: u64, members: usize, episodes: u64) -> Estimate {
    let n = episodes as f64;
    let q = hits as f64 / n;
    let m = members as f64;
    Estimate {
        mean: q / m,
        stderr: (q * (1.0 - q) / n).sqrt() / m,
    }
}

/// Per-category tallies from a selection run, in [`FocalDescriptor::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRun {
    pub seed: u64,
    pub episodes: u64,
    /// Episodes in which some member of the category was chosen.
    pub chosen: [u64; 4],
    /// Episodes in which the category's first member was listed.
    pub first_listed: [u64; 4],
    pub members: [usize; 4],
}

impl OracleRun {
    fn slot(focal: FocalDescriptor) -> usize {
        FocalDescriptor::ALL
            .iter()
            .position(|f| *f == focal)
            .expect("ALL lists every descriptor")
    }

    /// Per-provider choice frequency for the category; `None` if empty.
    pub fn frequency(&self, focal: FocalDescriptor) -> Option<Estimate> {
        let i = Self::slot(focal);
        (self.members[i] > 0).then(|| per_member(self.chosen[i], self.members[i], self.episodes))
    }

    /// Probability that one given member of the category is listed.
    pub fn inclusion(&self, focal: FocalDescriptor) -> Option<Estimate> {
        let i = Self::slot(focal);
        (self.members[i] > 0).then(|| per_member(self.first_listed[i], 1, self.episodes))
    }

    /// Share of episodes ending in any choice; 1 whenever `k ≥ 1`.
    pub fn choice_rate(&self) -> f64 {
        self.chosen.iter().sum::<u64>() as f64 / self.episodes as f64
    }
}

fn check_episodes(episodes: u64) -> Result<()> {
    if episodes == 0 {
        return Err(Error::Domain("oracle runs need at least one episode".into()));
    }
    Ok(())
}

fn check_list(population: ProviderPopulation, users: &UserPopulation, policy: &PlatformPolicy) -> Result<()> {
    if users.k == 0 || users.k > population.total() || policy.k_g > users.k || policy.k_m > policy.k_g {
        return Err(Error::Domain(format!(
            "list parameters must satisfy 1 <= k <= Z and k_M <= k_G <= k, got k={}, k_G={}, k_M={}",
            users.k, policy.k_g, policy.k_m
        )));
    }
    Ok(())
}

/// Simulates list building and choice for fixed ratings.
pub fn simulate_selection(
    cfg: &RatingConfiguration,
    users: &UserPopulation,
    policy: &PlatformPolicy,
    episodes: u64,
    seed: u64,
) -> Result<OracleRun> {
    check_episodes(episodes)?;
    let pop = cfg.population;
    check_list(pop, users, policy)?;
    let mut group = Vec::with_capacity(pop.total());
    let mut good = Vec::with_capacity(pop.total());
    for focal in FocalDescriptor::ALL {
        for _ in 0..cfg.count(focal.group, focal.rating) {
            group.push(focal.group);
            good.push(focal.rating == Rating::Good);
        }
    }
    let category: Vec<usize> = group
        .iter()
        .zip(&good)
        .map(|(&g, &r)| {
            let rating = if r { Rating::Good } else { Rating::Bad };
            OracleRun::slot(FocalDescriptor::new(g, rating))
        })
        .collect();
    let first: Vec<Option<usize>> = (0..4).map(|c| category.iter().position(|&x| x == c)).collect();
    // slots 0..4 count choices, slots 4..8 count listings of each first member
    let tally: [u64; 8] = run_batches(episodes, seed, |rng, n, t| {
        let mut s = Scratch::new(group.len(), users.k);
        for _ in 0..n {
            let i = episode(rng, &group, &good, users, policy, &mut s);
            t[category[i]] += 1;
            for (c, f) in first.iter().enumerate() {
                if f.is_some_and(|f| s.shown[f]) {
                    t[4 + c] += 1;
                }
            }
        }
    });
    let members = FocalDescriptor::ALL.map(|f| cfg.count(f.group, f.rating));
    let mut chosen = [0; 4];
    let mut first_listed = [0; 4];
    chosen.copy_from_slice(&tally[..4]);
    first_listed.copy_from_slice(&tally[4..]);
    Ok(OracleRun {
        seed,
        episodes,
        chosen,
        first_listed,
        members,
    })
}

/// Tallies from an end-to-end utility run, one slot per `(group, strategy)`
/// in the order MH, ML, DH, DL.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityRun {
    pub seed: u64,
    pub episodes: u64,
    pub state: State,
    pub chosen: [u64; 4],
    pub members: [usize; 4],
    pub payoffs: [f64; 4],
}

pub const PLAYER_TYPES: [(Group, Strategy); 4] = [
    (Group::Marginalised, Strategy::High),
    (Group::Marginalised, Strategy::Low),
    (Group::Dominant, Strategy::High),
    (Group::Dominant, Strategy::Low),
];

fn player_slot(group: Group, strategy: Strategy) -> usize {
    PLAYER_TYPES
        .iter()
        .position(|&p| p == (group, strategy))
        .expect("every pair is listed")
}

pub fn player_label(group: Group, strategy: Strategy) -> String {
    format!("{}{}", group.label(), strategy.label())
}

impl UtilityRun {
    /// Mean payoff per interaction opportunity; `None` if nobody plays it.
    pub fn utility(&self, group: Group, strategy: Strategy) -> Option<Estimate> {
        let i = player_slot(group, strategy);
        (self.members[i] > 0).then(|| {
            let e = per_member(self.chosen[i], self.members[i], self.episodes);
            Estimate {
                mean: e.mean * self.payoffs[i],
                stderr: e.stderr * self.payoffs[i].abs(),
            }
        })
    }
}

/// Simulates rating draws, list build and choice at `state`, tallying
/// choices by player type. Ratings follow each provider's own strategy,
/// which is the exact focal conditioning; the naive mode is a modelling
/// shortcut with no process to simulate and is rejected.
pub fn simulate_utilities(config: &ModelConfig, state: State, episodes: u64, seed: u64) -> Result<UtilityRun> {
    check_episodes(episodes)?;
    let config = validate(config)?;
    if config.focal_conditioning != FocalConditioning::Exact {
        return Err(Error::Domain(
            "the oracle simulates the exact focal conditioning only".into(),
        ));
    }
    let pop = config.population;
    if state.h_m > pop.z_m || state.h_d > pop.z_d {
        return Err(Error::StateOutOfBounds {
            h_m: state.h_m,
            h_d: state.h_d,
            z_m: pop.z_m,
            z_d: pop.z_d,
        });
    }
    let roster = Roster::new(pop, state);
    let slots: Vec<usize> = (0..roster.len())
        .map(|i| player_slot(roster.group[i], roster.strategy[i]))
        .collect();
    let p_good = 1.0 - config.users.epsilon;
    let chosen: [u64; 4] = run_batches(episodes, seed, |rng, n, t| {
        let mut s = Scratch::new(roster.len(), config.users.k);
        let mut good = vec![false; roster.len()];
        for _ in 0..n {
            for (i, g) in good.iter_mut().enumerate() {
                *g = match (roster.group[i], roster.strategy[i]) {
                    (_, Strategy::Low) => false,
                    (Group::Dominant, Strategy::High) => true,
                    (Group::Marginalised, Strategy::High) => rng.gen::<f64>() < p_good,
                };
            }
            let i = episode(rng, &roster.group, &good, &config.users, &config.policy, &mut s);
            t[slots[i]] += 1;
        }
    });
    let members = PLAYER_TYPES.map(|(g, s)| match s {
        Strategy::High => state.high_count(g),
        Strategy::Low => pop.size_of(g) - state.high_count(g),
    });
    let payoffs = PLAYER_TYPES.map(|(_, s)| config.economics.payoff(s));
    Ok(UtilityRun {
        seed,
        episodes,
        state,
        chosen,
        members,
        payoffs,
    })
}

/// Mean payoff and standard error of one `(group, strategy)` provider.
pub fn simulate_utility(
    state: State,
    group: Group,
    strategy: Strategy,
    config: &ModelConfig,
    episodes: u64,
    seed: u64,
) -> Result<Estimate> {
    let run = simulate_utilities(config, state, episodes, seed)?;
    run.utility(group, strategy).ok_or_else(|| {
        Error::InconsistentFocal(format!(
            "no {}-player in group {} at state ({}, {})",
            strategy.label(),
            group.label(),
            state.h_m,
            state.h_d
        ))
    })
}

/// One randomly drawn verification case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleCase {
    pub config: ModelConfig,
    pub ratings: RatingConfiguration,
    pub state: State,
}

/// Draws `count` valid cases with `Z ≤ max_z` (at least 2 per group).
pub fn random_cases(count: usize, max_z: usize, seed: u64) -> Result<Vec<OracleCase>> {
    if max_z < 4 {
        return Err(Error::Domain("random cases need max_z >= 4".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z_d = rng.gen_range(2..=max_z - 2);
        let z_m = rng.gen_range(2..=max_z - z_d);
        let k = rng.gen_range(1..=z_d + z_m);
        let k_g = rng.gen_range(0..=k);
        let k_m = rng.gen_range(0..=k_g);
        let epsilon = rng.gen_range(0.0..1.0);
        let gamma = rng.gen_range(0.0..1.0);
        let config = ModelConfig::default()
            .with_population(z_d, z_m)
            .with_users(epsilon, gamma, k)
            .with_policy(k_g, k_m);
        let ratings = RatingConfiguration::new(config.population, rng.gen_range(0..=z_d), rng.gen_range(0..=z_m))?;
        let state = State::new(rng.gen_range(0..=z_m), rng.gen_range(0..=z_d));
        out.push(OracleCase {
            config: validate(&config)?,
            ratings,
            state,
        });
    }
    Ok(out)
}

pub const DEFAULT_BATTERY_CASES: usize = 20;
pub const DEFAULT_BATTERY_MAX_Z: usize = 12;
pub const DEFAULT_BATTERY_EPISODES: u64 = 1_000_000;

/// One exact-versus-empirical comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub case: usize,
    pub category: String,
    pub exact: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub z_score: f64,
}

fn z_score(exact: f64, e: Estimate) -> f64 {
    let diff = e.mean - exact;
    if e.stderr > 0.0 {
        diff / e.stderr
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Compares every nonempty choice category and player type of `case`
/// against the exact engine.
pub fn check_case(index: usize, case: &OracleCase, episodes: u64, seed: u64) -> Result<Vec<OracleComparison>> {
    let mut out = Vec::new();
    let table = choice_table(&case.ratings, &case.config.users, &case.config.policy)?;
    let run = simulate_selection(&case.ratings, &case.config.users, &case.config.policy, episodes, seed)?;
    for focal in FocalDescriptor::ALL {
        if let (Some(exact), Some(e)) = (table.get(focal), run.frequency(focal)) {
            out.push(OracleComparison {
                case: index,
                category: format!("choice/{}", focal.label()),
                exact,
                empirical: e.mean,
                stderr: e.stderr,
                z_score: z_score(exact, e),
            });
        }
    }
    let model = PayoffModel::new(&case.config)?;
    let urun = simulate_utilities(&case.config, case.state, episodes, seed.wrapping_add(1))?;
    for (g, s) in PLAYER_TYPES {
        if let Some(e) = urun.utility(g, s) {
            let exact = model.utility(g, s, case.state)?;
            out.push(OracleComparison {
                case: index,
                category: format!("utility/{}", player_label(g, s)),
                exact,
                empirical: e.mean,
                stderr: e.stderr,
                z_score: z_score(exact, e),
            });
        }
    }
    Ok(out)
}

/// Runs [`check_case`] over every case; case `i` uses seed `seed + 2i`.
pub fn run_battery(cases: &[OracleCase], episodes: u64, seed: u64) -> Result<Vec<OracleComparison>> {
    let mut out = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        out.extend(check_case(i, case, episodes, seed.wrapping_add(2 * i as u64))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_limit_selection() {
        let pop = ProviderPopulation::new(4, 3);
        let cfg = RatingConfiguration::new(pop, 2, 1).unwrap();
        let users = UserPopulation {
            epsilon: 0.0,
            gamma: 0.0,
            k: 3,
        };
        let run = simulate_selection(&cfg, &users, &PlatformPolicy { k_g: 0, k_m: 0 }, 100_000, 7).unwrap();
        assert_eq!(run.choice_rate(), 1.0);
        for f in FocalDescriptor::ALL {
            let e = run.frequency(f).unwrap();
            assert!((e.mean - 1.0 / 7.0).abs() < 4.0 * e.stderr, "{f:?} {e:?}");
        }
    }

    #[test]
    fn deterministic_and_batch_merged() {
        let pop = ProviderPopulation::new(3, 3);
        let cfg = RatingConfiguration::new(pop, 1, 2).unwrap();
        let users = UserPopulation {
            epsilon: 0.0,
            gamma: 0.4,
            k: 4,
        };
        let pol = PlatformPolicy { k_g: 2, k_m: 1 };
        let n = 3 * BATCH_EPISODES + 17;
        let a = simulate_selection(&cfg, &users, &pol, n, 99).unwrap();
        let b = simulate_selection(&cfg, &users, &pol, n, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.chosen.iter().sum::<u64>(), n);
        let c = simulate_selection(&cfg, &users, &pol, n, 100).unwrap();
        assert_ne!(a.chosen, c.chosen);
    }

    #[test]
    fn zero_episodes_rejected() {
        let pop = ProviderPopulation::new(3, 3);
        let cfg = RatingConfiguration::new(pop, 1, 2).unwrap();
        let users = UserPopulation {
            epsilon: 0.0,
            gamma: 0.4,
            k: 4,
        };
        assert!(simulate_selection(&cfg, &users, &PlatformPolicy { k_g: 0, k_m: 0 }, 0, 1).is_err());
    }

    #[test]
    fn uniform_limit_utility() {
        let config = ModelConfig::default()
            .with_population(4, 4)
            .with_users(0.3, 0.0, 3)
            .with_policy(0, 0);
        let u = simulate_utility(State::new(2, 1), Group::Dominant, Strategy::Low, &config, 200_000, 3).unwrap();
        assert!((u.mean - 1.2 / 8.0).abs() < 4.0 * u.stderr, "{u:?}");
        let u = simulate_utility(
            State::new(2, 1),
            Group::Marginalised,
            Strategy::High,
            &config,
            200_000,
            3,
        )
        .unwrap();
        assert!((u.mean - 0.2 / 8.0).abs() < 4.0 * u.stderr, "{u:?}");
    }

    #[test]
    fn empty_player_type_rejected() {
        let config = ModelConfig::default()
            .with_population(4, 4)
            .with_users(0.3, 0.5, 3)
            .with_policy(1, 0);
        let err = simulate_utility(State::new(4, 1), Group::Marginalised, Strategy::Low, &config, 10, 3);
        assert!(matches!(err, Err(Error::InconsistentFocal(_))));
    }

    #[test]
    fn random_cases_are_valid_and_small() {
        let cases = random_cases(50, 12, 5).unwrap();
        for c in &cases {
            assert!(c.config.population.total() <= 12);
            assert!(validate(&c.config).is_ok());
        }
        assert_eq!(cases, random_cases(50, 12, 5).unwrap());
    }
}
