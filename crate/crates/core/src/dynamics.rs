//! Mutation–imitation Markov chain on the `(h_M, h_D)` lattice.
//!
//! Each step one provider either mutates (probability `μ`, weight
//! `count / Z`) or imitates a random peer from its own group using the
//! Fermi rule. Rows have at most five nonzeros: the four lattice neighbours
//! and the self-loop.

use serde::Serialize;

use crate::domain::{state_index, FermiSign, Group, ModelConfig, ProviderPopulation, State, Strategy};
use crate::error::{Error, Result};
use crate::numeric::{logistic, NeumaierSum};
use crate::payoff::{PayoffModel, UtilityTable};

/// Imitation probabilities `(f₊, f₋)` for the H-count to rise or fall,
/// given `delta_u = u_H − u_L`.
///
/// The smaller probability is computed directly and the larger as its
/// complement, so `f₊ + f₋ == 1.0` holds exactly in floating point.
pub fn fermi(delta_u: f64, beta: f64, sign: FermiSign) -> (f64, f64) {
    let x = match sign {
        FermiSign::Standard => beta * delta_u,
        // u_L − u_H under the ∓ convention: H grows when L earns more.
        FermiSign::Literal => -beta * delta_u,
    };
    if x.is_nan() {
        return (0.5, 0.5);
    }
    if x >= 0.0 {
        let down = logistic(-x);
        (1.0 - down, down)
    } else {
        let up = logistic(x);
        (up, 1.0 - up)
    }
}

/// Outgoing probabilities of one state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TransitionRow {
    pub up_m: f64,
    pub down_m: f64,
    pub up_d: f64,
    pub down_d: f64,
    pub stay: f64,
}

impl TransitionRow {
    pub fn sum(&self) -> f64 {
        self.up_m + self.down_m + self.up_d + self.down_d + self.stay
    }

    pub fn drift(&self) -> (f64, f64) {
        (self.up_m - self.down_m, self.up_d - self.down_d)
    }
}

/// Row-stochastic transition matrix stored as one [`TransitionRow`] per
/// lattice state (lexicographic order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub population: ProviderPopulation,
    pub mu: f64,
    pub rows: Vec<TransitionRow>,
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Nonzero entries `(from, to, probability)` of row `i`.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        let w = self.population.z_d + 1;
        let r = &self.rows[i];
        let mut out = Vec::with_capacity(5);
        if r.down_m > 0.0 {
            out.push((i - w, r.down_m));
        }
        if r.down_d > 0.0 {
            out.push((i - 1, r.down_d));
        }
        if r.stay > 0.0 {
            out.push((i, r.stay));
        }
        if r.up_d > 0.0 {
            out.push((i + 1, r.up_d));
        }
        if r.up_m > 0.0 {
            out.push((i + w, r.up_m));
        }
        out
    }

    /// Row vector times matrix, `x P`.
    pub fn apply_left(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, p) in self.row_entries(i) {
                out[j] += xi * p;
            }
        }
        out
    }

    /// Largest `|Σ_j P_ij − 1|` over rows.
    pub fn max_row_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    fn check_irreducible(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::ReducibleChain(
                "mutation probability mu must be positive".to_string(),
            ));
        }
        let pop = self.population;
        for (s, r) in pop.states().zip(&self.rows) {
            let blocked = (s.h_m < pop.z_m && r.up_m <= 0.0)
                || (s.h_m > 0 && r.down_m <= 0.0)
                || (s.h_d < pop.z_d && r.up_d <= 0.0)
                || (s.h_d > 0 && r.down_d <= 0.0);
            if blocked {
                return Err(Error::ReducibleChain(format!(
                    "state ({}, {}) cannot reach all of its neighbours",
                    s.h_m, s.h_d
                )));
            }
        }
        Ok(())
    }
}

fn group_moves(
    group: Group,
    state: State,
    pop: ProviderPopulation,
    utilities: &UtilityTable,
    config: &ModelConfig,
) -> (f64, f64) {
    let mu = config.evolution.mu;
    let z = pop.total() as f64;
    let zg = pop.size_of(group) as f64;
    let h = state.high_count(group) as f64;
    let (f_up, f_down) = fermi(
        utilities.get(group, Strategy::High) - utilities.get(group, Strategy::Low),
        config.evolution.beta,
        config.fermi_sign,
    );
    let pair = (zg - h) / zg * h / (zg - 1.0);
    let up = mu * (zg - h) / z + (1.0 - mu) * pair * f_up;
    let down = mu * h / z + (1.0 - mu) * pair * f_down;
    (up, down)
}

/// Transition matrix from precomputed per-state utilities.
pub fn transition_matrix_from(config: &ModelConfig, utilities: &[UtilityTable]) -> TransitionMatrix {
    let pop = config.population;
    let rows = pop
        .states()
        .zip(utilities)
        .map(|(s, u)| {
            let (up_m, down_m) = group_moves(Group::Marginalised, s, pop, u, config);
            let (up_d, down_d) = group_moves(Group::Dominant, s, pop, u, config);
            let mut out = NeumaierSum::default();
            for p in [up_m, down_m, up_d, down_d] {
                out.add(p);
            }
            TransitionRow {
                up_m,
                down_m,
                up_d,
                down_d,
                stay: 1.0 - out.value(),
            }
        })
        .collect();
    TransitionMatrix {
        population: pop,
        mu: config.evolution.mu,
        rows,
    }
}

pub fn transition_matrix(config: &ModelConfig) -> Result<TransitionMatrix> {
    let utilities = PayoffModel::new(config)?.all_tables()?;
    Ok(transition_matrix_from(config, &utilities))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Grassmann–Taksar–Heyman state reduction on the banded matrix.
    BandedGth,
    /// Cesàro-averaged power iteration.
    PowerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult {
    pub population: ProviderPopulation,
    pub distribution: Vec<f64>,
    /// `‖h* P − h*‖₁`
    pub residual: f64,
    /// Expected one-step change `(E[Δh_M], E[Δh_D])` per state.
    pub drift: Vec<(f64, f64)>,
    pub method: SolverMethod,
    pub iterations: usize,
}

impl StationaryResult {
    pub fn prob(&self, state: State) -> f64 {
        self.distribution[state_index(state, self.population).expect("state in lattice")]
    }
}

const RESIDUAL_TOLERANCE: f64 = 1e-10;
const POWER_ITERATION_CAP: usize = 1_000_000;

fn residual(matrix: &TransitionMatrix, x: &[f64]) -> f64 {
    let y = matrix.apply_left(x);
    let mut acc = NeumaierSum::default();
    for (a, b) in y.iter().zip(x) {
        acc.add((a - b).abs());
    }
    acc.value()
}

/// GTH state reduction exploiting the lattice bandwidth `Z_D + 1`.
/// Works only with off-diagonal entries, so no cancellation occurs.
fn banded_gth(matrix: &TransitionMatrix) -> Vec<f64> {
    let n = matrix.len();
    let w = matrix.population.z_d + 1;
    let width = 2 * w + 1;
    let mut band = vec![0.0f64; n * width];
    let at = |i: usize, j: usize| i * width + (j + w - i);
    for i in 0..n {
        for (j, p) in matrix.row_entries(i) {
            if j != i {
                band[at(i, j)] = p;
            }
        }
    }
    let mut pivots = vec![0.0f64; n];
    for k in (1..n).rev() {
        let lo = k.saturating_sub(w);
        let mut s = NeumaierSum::default();
        for j in lo..k {
            s.add(band[at(k, j)]);
        }
        let s = s.value();
        pivots[k] = s;
        if s <= 0.0 {
            continue;
        }
        for i in lo..k {
            let a_ik = band[at(i, k)];
            if a_ik == 0.0 {
                continue;
            }
            let f = a_ik / s;
            for j in lo..k {
                if j != i {
                    let a_kj = band[at(k, j)];
                    if a_kj != 0.0 {
                        band[at(i, j)] += f * a_kj;
                    }
                }
            }
        }
    }
    let mut x = vec![0.0f64; n];
    x[0] = 1.0;
    for k in 1..n {
        let lo = k.saturating_sub(w);
        let mut acc = NeumaierSum::default();
        for i in lo..k {
            acc.add(x[i] * band[at(i, k)]);
        }
        x[k] = if pivots[k] > 0.0 { acc.value() / pivots[k] } else { 0.0 };
    }
    normalise(&mut x);
    x
}

fn normalise(x: &mut [f64]) {
    let total: f64 = crate::numeric::compensated_sum(x.iter().copied());
    for v in x.iter_mut() {
        *v /= total;
    }
}

fn power_iteration(matrix: &TransitionMatrix) -> (Vec<f64>, usize) {
    let n = matrix.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut avg = x.clone();
    for it in 1..=POWER_ITERATION_CAP {
        x = matrix.apply_left(&x);
        let t = it as f64;
        for (a, v) in avg.iter_mut().zip(&x) {
            *a += (v - *a) / (t + 1.0);
        }
        if it % 1000 == 0 {
            if residual(matrix, &x) < RESIDUAL_TOLERANCE {
                normalise(&mut x);
                return (x, it);
            }
            if residual(matrix, &avg) < RESIDUAL_TOLERANCE {
                normalise(&mut avg);
                return (avg, it);
            }
        }
    }
    normalise(&mut avg);
    (avg, POWER_ITERATION_CAP)
}

/// Stationary distribution of an irreducible chain, with residual and
/// drift diagnostics.
pub fn stationary(matrix: &TransitionMatrix) -> Result<StationaryResult> {
    matrix.check_irreducible()?;
    let drift = matrix.rows.iter().map(TransitionRow::drift).collect();
    let direct = banded_gth(matrix);
    let direct_ok = direct.iter().all(|v| v.is_finite() && *v >= 0.0);
    if direct_ok {
        let r = residual(matrix, &direct);
        if r < RESIDUAL_TOLERANCE {
            return Ok(StationaryResult {
                population: matrix.population,
                distribution: direct,
                residual: r,
                drift,
                method: SolverMethod::BandedGth,
                iterations: 0,
            });
        }
    }
    let (x, iterations) = power_iteration(matrix);
    let r = residual(matrix, &x);
    if !(r < RESIDUAL_TOLERANCE) {
        return Err(Error::Solver(format!(
            "residual {r:.3e} after {iterations} power iterations"
        )));
    }
    Ok(StationaryResult {
        population: matrix.population,
        distribution: x,
        residual: r,
        drift,
        method: SolverMethod::PowerIteration,
        iterations,
    })
}

/// Expected one-step change of `(h_M, h_D)` at every state.
pub fn drift_field(config: &ModelConfig) -> Result<Vec<(State, (f64, f64))>> {
    let m = transition_matrix(config)?;
    Ok(config
        .population
        .states()
        .zip(m.rows.iter().map(TransitionRow::drift))
        .collect())
}
