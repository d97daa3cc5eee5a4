//! The exact engine against seeded Monte Carlo simulation.

use platform_egt::domain::{Group, ModelConfig, PlatformPolicy, ProviderPopulation, State, Strategy, UserPopulation};
use platform_egt::oracle::{simulate_selection, simulate_utilities, simulate_utility, Estimate, PLAYER_TYPES};
use platform_egt::payoff::PayoffModel;
use platform_egt::recsel::{
    choice_table, inclusion_probability, EffectivePolicy, FocalDescriptor, RatingConfiguration,
};
use platform_egt::Rating;

const BAND: f64 = 4.0;

fn within(exact: f64, e: Estimate) -> bool {
    (exact - e.mean).abs() <= BAND * e.stderr
}

#[test]
fn dominant_good_inclusion_matches_simulation() {
    let pop = ProviderPopulation::new(3, 3);
    let cfg = RatingConfiguration::new(pop, 2, 1).unwrap();
    let users = UserPopulation {
        epsilon: 0.0,
        gamma: 0.5,
        k: 3,
    };
    let policy = PlatformPolicy { k_g: 2, k_m: 1 };
    let pol = EffectivePolicy::derive(&cfg, 3, &policy).unwrap();
    let run = simulate_selection(&cfg, &users, &policy, 1_000_000, 11).unwrap();
    for focal in FocalDescriptor::ALL {
        let exact = inclusion_probability(focal, &cfg, &pol).unwrap().total;
        let e = run.inclusion(focal).unwrap();
        assert!(within(exact, e), "{focal:?}: {exact} vs {e:?}");
    }
}

#[test]
fn eight_provider_table_matches_simulation() {
    let pop = ProviderPopulation::new(4, 4);
    let cfg = RatingConfiguration::new(pop, 3, 1).unwrap();
    let users = UserPopulation {
        epsilon: 0.0,
        gamma: 0.7,
        k: 4,
    };
    let policy = PlatformPolicy { k_g: 2, k_m: 1 };
    let table = choice_table(&cfg, &users, &policy).unwrap();
    let run = simulate_selection(&cfg, &users, &policy, 1_000_000, 12).unwrap();
    assert_eq!(run.choice_rate(), 1.0);
    for focal in FocalDescriptor::ALL {
        let e = run.frequency(focal).unwrap();
        let exact = table.get(focal).unwrap();
        assert!(within(exact, e), "{focal:?}: {exact} vs {e:?}");
    }
}

#[test]
fn error_shrinks_with_episodes() {
    let pop = ProviderPopulation::new(5, 4);
    let cfg = RatingConfiguration::new(pop, 2, 3).unwrap();
    let users = UserPopulation {
        epsilon: 0.0,
        gamma: 0.4,
        k: 5,
    };
    let policy = PlatformPolicy { k_g: 3, k_m: 2 };
    let table = choice_table(&cfg, &users, &policy).unwrap();
    let small = simulate_selection(&cfg, &users, &policy, 10_000, 21).unwrap();
    let large = simulate_selection(&cfg, &users, &policy, 1_000_000, 21).unwrap();
    for focal in FocalDescriptor::ALL {
        let exact = table.get(focal).unwrap();
        let (a, b) = (small.frequency(focal).unwrap(), large.frequency(focal).unwrap());
        let ratio = a.stderr / b.stderr;
        assert!((8.0..12.5).contains(&ratio), "{focal:?} ratio {ratio}");
        assert!(within(exact, a) && within(exact, b), "{focal:?}");
    }
}

#[test]
fn full_bias_rates_marginalised_high_as_bad() {
    let config = ModelConfig::default()
        .with_population(5, 5)
        .with_users(1.0, 0.6, 4)
        .with_policy(2, 1);
    let state = State::new(3, 2);
    let run = simulate_utilities(&config, state, 1_000_000, 31).unwrap();
    let model = PayoffModel::new(&config).unwrap();
    for (g, s) in PLAYER_TYPES {
        let exact = model.utility(g, s, state).unwrap();
        let e = run.utility(g, s).unwrap();
        assert!(within(exact, e), "{g:?} {s:?}: {exact} vs {e:?}");
    }
    // with every marginalised provider rated Bad the H-players there are
    // indistinguishable in choice from the L-players
    let h = run.utility(Group::Marginalised, Strategy::High).unwrap().mean / 0.2;
    let l = run.utility(Group::Marginalised, Strategy::Low).unwrap().mean / 1.2;
    assert!((h - l).abs() < 0.002, "{h} {l}");
}

/// Reference utilities at the all-H state of the two-group default roster
/// with `k = k_G = 10`, `γ = 0.6`, `ε = 0.3`, taken from one 10⁷-episode
/// simulation (seed 20202020). The L entries come from the neighbouring
/// rosters (19, 20) and (20, 19); with ten Good-rated slots always filled
/// no Bad-rated provider was ever chosen there.
const REFERENCE_MEAN_MH: f64 = 4.096_325e-3;
const REFERENCE_MEAN_DH: f64 = 5.903_675e-3;
const REFERENCE_SE_H: f64 = 1.555_100_366_355_014e-6;

#[test]
fn reference_utilities_at_full_cooperation() {
    let config = ModelConfig::default().with_users(0.3, 0.6, 10).with_policy(10, 0);
    let model = PayoffModel::new(&config).unwrap();
    let top = State::new(20, 20);
    for (g, mean) in [
        (Group::Marginalised, REFERENCE_MEAN_MH),
        (Group::Dominant, REFERENCE_MEAN_DH),
    ] {
        let exact = model.utility(g, Strategy::High, top).unwrap();
        assert!((exact - mean).abs() <= BAND * REFERENCE_SE_H, "{g:?}: {exact}");
    }
    for g in Group::ALL {
        assert_eq!(model.utility(g, Strategy::Low, top).unwrap(), 0.0);
    }
}

#[test]
fn reference_run_is_reproducible_in_miniature() {
    let config = ModelConfig::default().with_users(0.3, 0.6, 10).with_policy(10, 0);
    let a = simulate_utility(
        State::new(20, 20),
        Group::Marginalised,
        Strategy::High,
        &config,
        50_000,
        20_202_020,
    )
    .unwrap();
    let b = simulate_utility(
        State::new(20, 20),
        Group::Marginalised,
        Strategy::High,
        &config,
        50_000,
        20_202_020,
    )
    .unwrap();
    assert_eq!(a, b);
    let exact = PayoffModel::new(&config)
        .unwrap()
        .utility(Group::Marginalised, Strategy::High, State::new(20, 20))
        .unwrap();
    assert!(within(exact, a));
}

#[test]
fn bad_rated_never_chosen_with_full_sensitivity() {
    let pop = ProviderPopulation::new(4, 4);
    let cfg = RatingConfiguration::new(pop, 2, 1).unwrap();
    let users = UserPopulation {
        epsilon: 0.0,
        gamma: 1.0,
        k: 5,
    };
    let run = simulate_selection(&cfg, &users, &PlatformPolicy { k_g: 1, k_m: 0 }, 100_000, 5).unwrap();
    for focal in FocalDescriptor::ALL.into_iter().filter(|f| f.rating == Rating::Bad) {
        assert_eq!(run.frequency(focal).unwrap().mean, 0.0);
    }
}
