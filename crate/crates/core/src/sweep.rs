//! Experiment drivers: parameter sweeps, Pareto fronts, `k_G^DPR` maps,
//! `k_M` scans and policy choice under uncertainty in the rating bias.
//!
//! Grid points are evaluated with rayon. Each point is computed serially
//! and results are collected in grid order, so output is bit-identical
//! regardless of the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{validate, ModelConfig, PlatformPolicy};
use crate::dynamics::{stationary, transition_matrix_from, StationaryResult};
use crate::error::{Error, Result};
use crate::metrics::{report, MetricsReport, Regime};
use crate::numeric::compensated_sum;
use crate::payoff::{PayoffModel, UtilityTable};

/// Full pipeline output for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub config: ModelConfig,
    pub utilities: Vec<UtilityTable>,
    pub stationary: StationaryResult,
    pub report: MetricsReport,
}

/// utilities → transition matrix → stationary distribution → metrics.
pub fn evaluate(config: &ModelConfig) -> Result<Evaluation> {
    let config = validate(config)?;
    let utilities = PayoffModel::new(&config)?.all_tables()?;
    let matrix = transition_matrix_from(&config, &utilities);
    let stationary = stationary(&matrix)?;
    let report = report(&stationary, &utilities)?;
    Ok(Evaluation {
        config,
        utilities,
        stationary,
        report,
    })
}

pub fn metrics(config: &ModelConfig) -> Result<MetricsReport> {
    Ok(evaluate(config)?.report)
}

fn evaluate_all(configs: &[ModelConfig]) -> Result<Vec<MetricsReport>> {
    configs.par_iter().map(metrics).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Kg,
    Km,
    Eps,
    Gamma,
}

impl SweepAxis {
    pub fn apply(self, base: &ModelConfig, value: f64) -> ModelConfig {
        let mut c = *base;
        match self {
            SweepAxis::Kg => c.policy.k_g = value.round() as usize,
            SweepAxis::Km => c.policy.k_m = value.round() as usize,
            SweepAxis::Eps => c.users.epsilon = value,
            SweepAxis::Gamma => c.users.gamma = value,
        }
        c
    }

    pub fn is_integer(self) -> bool {
        matches!(self, SweepAxis::Kg | SweepAxis::Km)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Kg => "kg",
            SweepAxis::Km => "km",
            SweepAxis::Eps => "eps",
            SweepAxis::Gamma => "gamma",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kg" => Ok(SweepAxis::Kg),
            "km" => Ok(SweepAxis::Km),
            "eps" => Ok(SweepAxis::Eps),
            "gamma" => Ok(SweepAxis::Gamma),
            other => Err(Error::Domain(format!(
                "unknown sweep axis `{other}` (expected kg, km, eps or gamma)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub policy: PlatformPolicy,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Indices `i` at which the regime differs between rows `i − 1` and `i`.
    pub fn changepoints(&self) -> Vec<usize> {
        (1..self.rows.len())
            .filter(|&i| self.rows[i].report.regime != self.rows[i - 1].report.regime)
            .collect()
    }

    /// Regimes in order of appearance, consecutive duplicates removed.
    pub fn regime_sequence(&self) -> Vec<Regime> {
        let mut out: Vec<Regime> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.report.regime) {
                out.push(r.report.regime);
            }
        }
        out
    }

    /// Row with the largest value of `key`; ties go to the earliest row.
    pub fn argmax_by(&self, key: impl Fn(&MetricsReport) -> f64) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for r in &self.rows {
            if best.is_none_or(|b| key(&r.report) > key(&b.report)) {
                best = Some(r);
            }
        }
        best
    }
}

/// Evaluates the pipeline at each value along `axis`. A failing point
/// aborts the sweep with its diagnosis.
pub fn sweep(base: &ModelConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    let configs: Vec<ModelConfig> = values.iter().map(|&v| axis.apply(base, v)).collect();
    let reports = evaluate_all(&configs)?;
    let rows = values
        .iter()
        .zip(configs.iter().zip(reports))
        .map(|(&axis_value, (c, report))| SweepRow {
            axis_value,
            policy: c.policy,
            report,
        })
        .collect();
    Ok(SweepResult { axis, rows })
}

fn integer_values(range: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    range.map(|v| v as f64).collect()
}

pub fn sweep_kg(base: &ModelConfig, k_g: std::ops::RangeInclusive<usize>) -> Result<SweepResult> {
    sweep(base, SweepAxis::Kg, &integer_values(k_g))
}

pub fn sweep_km(base: &ModelConfig, k_m: std::ops::RangeInclusive<usize>) -> Result<SweepResult> {
    sweep(base, SweepAxis::Km, &integer_values(k_m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub policy: PlatformPolicy,
    pub ux: f64,
    pub dpr: f64,
    pub regime: Regime,
    pub on_front: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoFront {
    /// Every evaluated candidate, in input order, flagged by front membership.
    pub points: Vec<ParetoPoint>,
}

impl ParetoFront {
    pub fn front(&self) -> impl Iterator<Item = &ParetoPoint> {
        self.points.iter().filter(|p| p.on_front)
    }

    pub fn dominated(&self) -> impl Iterator<Item = &ParetoPoint> {
        self.points.iter().filter(|p| !p.on_front)
    }
}

/// `a` dominates `b` when it is no worse in both objectives and strictly
/// better in at least one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// Nondominated mask over `(ux, dpr)` pairs, both maximised. Ties are kept.
///
/// Sort by UX descending (DPR descending within ties) and sweep while
/// tracking the best DPR seen among strictly larger UX values.
pub fn nondominated(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .0
            .total_cmp(&points[a].0)
            .then(points[b].1.total_cmp(&points[a].1))
    });
    let mut mask = vec![false; points.len()];
    let mut best_dpr_above = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        // group equal UX values
        let mut j = i;
        while j < order.len() && points[order[j]].0 == points[order[i]].0 {
            j += 1;
        }
        let group_best = points[order[i]].1;
        for &idx in &order[i..j] {
            let d = points[idx].1;
            mask[idx] = d == group_best && d > best_dpr_above;
        }
        best_dpr_above = best_dpr_above.max(group_best);
        i = j;
    }
    mask
}

pub fn pareto_front(base: &ModelConfig, candidates: &[PlatformPolicy]) -> Result<ParetoFront> {
    if candidates.is_empty() {
        return Err(Error::Domain("pareto front needs at least one candidate".into()));
    }
    let configs: Vec<ModelConfig> = candidates.iter().map(|p| base.with_policy(p.k_g, p.k_m)).collect();
    let reports = evaluate_all(&configs)?;
    Ok(front_from_reports(candidates, &reports))
}

pub fn front_from_reports(candidates: &[PlatformPolicy], reports: &[MetricsReport]) -> ParetoFront {
    let pairs: Vec<(f64, f64)> = reports.iter().map(|r| (r.ux, r.dpr)).collect();
    let mask = nondominated(&pairs);
    let points = candidates
        .iter()
        .zip(reports)
        .zip(mask)
        .map(|((p, r), on_front)| ParetoPoint {
            policy: *p,
            ux: r.ux,
            dpr: r.dpr,
            regime: r.regime,
            on_front,
        })
        .collect();
    ParetoFront { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapCell {
    pub epsilon: f64,
    pub gamma: f64,
    /// `None` when no `k_G` in `0..=k` yields regime C.
    pub kg_dpr: Option<usize>,
    pub dpr: Option<f64>,
}

/// `k_G` maximising DPR among rows in regime C; ties go to the smaller `k_G`.
pub fn kg_dpr(sweep: &SweepResult) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for row in &sweep.rows {
        if row.report.regime != Regime::C {
            continue;
        }
        if best.is_none_or(|(_, d)| row.report.dpr > d) {
            best = Some((row.policy.k_g, row.report.dpr));
        }
    }
    best
}

/// `k_G^DPR` over an `(ε, γ)` grid at `k_M = 0`. Rows follow `epsilons`,
/// columns `gammas`.
pub fn kg_dpr_map(base: &ModelConfig, k: usize, epsilons: &[f64], gammas: &[f64]) -> Result<Vec<MapCell>> {
    for &x in epsilons.iter().chain(gammas) {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!(
                "map grid values must lie in the open interval (0, 1), got {x}"
            )));
        }
    }
    let mut configs = Vec::new();
    for &e in epsilons {
        for &g in gammas {
            for k_g in 0..=k {
                let mut c = base.with_policy(k_g, 0);
                c.users = crate::domain::UserPopulation {
                    epsilon: e,
                    gamma: g,
                    k,
                };
                configs.push(c);
            }
        }
    }
    let reports = evaluate_all(&configs)?;
    let per_cell = k + 1;
    let mut cells = Vec::with_capacity(epsilons.len() * gammas.len());
    for (ci, chunk) in reports.chunks(per_cell).enumerate() {
        let (e, g) = (epsilons[ci / gammas.len()], gammas[ci % gammas.len()]);
        let rows = chunk
            .iter()
            .enumerate()
            .map(|(k_g, r)| SweepRow {
                axis_value: k_g as f64,
                policy: PlatformPolicy { k_g, k_m: 0 },
                report: *r,
            })
            .collect();
        let best = kg_dpr(&SweepResult {
            axis: SweepAxis::Kg,
            rows,
        });
        cells.push(MapCell {
            epsilon: e,
            gamma: g,
            kg_dpr: best.map(|b| b.0),
            dpr: best.map(|b| b.1),
        });
    }
    Ok(cells)
}

/// Result of fixing `k_G` by the `UX × DPR` rule at `k_M = 0` and then
/// scanning `k_M`.
#[derive(Debug, Clone, Serialize)]
pub struct AntiDiscriminationScan {
    pub kg_scan: SweepResult,
    pub k_g: usize,
    pub km_scan: SweepResult,
    pub best_k_m: usize,
    pub best_dpr: f64,
}

impl AntiDiscriminationScan {
    /// `max − min` of a metric over the `k_M` scan.
    pub fn spread(&self, key: impl Fn(&MetricsReport) -> f64) -> f64 {
        let vals: Vec<f64> = self.km_scan.rows.iter().map(|r| key(&r.report)).collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

/// `k_G = argmax UX × DPR` over `0..=k` at `k_M = 0` (smallest on ties).
pub fn select_kg_for_km_scan(base: &ModelConfig) -> Result<(usize, SweepResult)> {
    let scan = sweep_kg(&base.with_policy(0, 0), 0..=base.users.k)?;
    let best = scan
        .argmax_by(|r| r.ux * r.dpr)
        .map(|r| r.policy.k_g)
        .expect("k_G scan is never empty");
    Ok((best, scan))
}

pub fn anti_discrimination_scan(base: &ModelConfig) -> Result<AntiDiscriminationScan> {
    let (k_g, kg_scan) = select_kg_for_km_scan(base)?;
    let km_scan = sweep_km(&base.with_policy(k_g, 0), 0..=k_g)?;
    let best = km_scan.argmax_by(|r| r.dpr).expect("k_M scan is never empty");
    Ok(AntiDiscriminationScan {
        k_g,
        best_k_m: best.policy.k_m,
        best_dpr: best.report.dpr,
        kg_scan,
        km_scan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    ExpectedDpr,
    MaximinDpr,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::ExpectedDpr, Objective::MaximinDpr];

    pub fn label(self) -> &'static str {
        match self {
            Objective::ExpectedDpr => "expected_dpr",
            Objective::MaximinDpr => "maximin_dpr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    /// Regime C at every belief-grid value of ε.
    EveryGridPoint,
    /// Regime C at the interval midpoint only.
    Midpoint,
}

/// Uniform belief over `[epsilon_min, epsilon_max]`, discretised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintySpec {
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub resolution: usize,
    pub feasibility: Feasibility,
}

pub const DEFAULT_BELIEF_RESOLUTION: usize = 15;

impl UncertaintySpec {
    /// Interval of the given width centred on `epsilon`, clipped to `[0, 1]`.
    pub fn centred(epsilon: f64, width: f64) -> Self {
        Self {
            epsilon_min: (epsilon - width / 2.0).max(0.0),
            epsilon_max: (epsilon + width / 2.0).min(1.0),
            resolution: DEFAULT_BELIEF_RESOLUTION,
            feasibility: Feasibility::EveryGridPoint,
        }
    }

    pub fn width(&self) -> f64 {
        self.epsilon_max - self.epsilon_min
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&self.epsilon_min)
            || !(0.0..=1.0).contains(&self.epsilon_max)
            || self.epsilon_min > self.epsilon_max
        {
            return Err(Error::Domain(format!(
                "belief interval [{}, {}] must satisfy 0 <= min <= max <= 1",
                self.epsilon_min, self.epsilon_max
            )));
        }
        if self.width() == 0.0 {
            return Ok(vec![self.epsilon_min]);
        }
        if self.resolution < 2 {
            return Err(Error::Domain(
                "belief grid needs at least 2 points for a nonzero width".into(),
            ));
        }
        let n = self.resolution;
        Ok((0..n)
            .map(|i| {
                if i == n - 1 {
                    self.epsilon_max
                } else {
                    self.epsilon_min + self.width() * i as f64 / (n - 1) as f64
                }
            })
            .collect())
    }
}

/// DPR and regime of one candidate at each belief-grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateProfile {
    pub policy: PlatformPolicy,
    pub epsilons: Vec<f64>,
    pub dpr: Vec<f64>,
    pub regimes: Vec<Regime>,
}

impl CandidateProfile {
    pub fn worst_dpr(&self) -> f64 {
        self.dpr.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn average_dpr(&self) -> f64 {
        compensated_sum(self.dpr.iter().copied()) / self.dpr.len() as f64
    }

    pub fn score(&self, objective: Objective) -> f64 {
        match objective {
            Objective::ExpectedDpr => self.average_dpr(),
            Objective::MaximinDpr => self.worst_dpr(),
        }
    }

    pub fn feasible(&self, rule: Feasibility) -> bool {
        match rule {
            Feasibility::EveryGridPoint => self.regimes.iter().all(|r| *r == Regime::C),
            Feasibility::Midpoint => {
                let n = self.regimes.len();
                if n % 2 == 1 {
                    self.regimes[n / 2] == Regime::C
                } else {
                    self.regimes[n / 2 - 1] == Regime::C && self.regimes[n / 2] == Regime::C
                }
            }
        }
    }
}

pub fn candidate_profiles(
    base: &ModelConfig,
    candidates: &[PlatformPolicy],
    epsilons: &[f64],
) -> Result<Vec<CandidateProfile>> {
    let mut configs = Vec::with_capacity(candidates.len() * epsilons.len());
    for p in candidates {
        for &e in epsilons {
            configs.push(base.with_policy(p.k_g, p.k_m).with_epsilon(e));
        }
    }
    let reports = evaluate_all(&configs)?;
    Ok(candidates
        .iter()
        .zip(reports.chunks(epsilons.len()))
        .map(|(p, rs)| CandidateProfile {
            policy: *p,
            epsilons: epsilons.to_vec(),
            dpr: rs.iter().map(|r| r.dpr).collect(),
            regimes: rs.iter().map(|r| r.regime).collect(),
        })
        .collect())
}

/// Best feasible profile under `objective`; ties go to the smaller `k_G`,
/// then the smaller `k_M`.
pub fn select_policy<'a>(
    profiles: impl IntoIterator<Item = &'a CandidateProfile>,
    objective: Objective,
    feasibility: Feasibility,
) -> Option<&'a CandidateProfile> {
    let mut best: Option<&CandidateProfile> = None;
    for p in profiles {
        if !p.feasible(feasibility) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let (s, t) = (p.score(objective), b.score(objective));
                s > t || (s == t && (p.policy.k_g, p.policy.k_m) < (b.policy.k_g, b.policy.k_m))
            }
        };
        if better {
            best = Some(p);
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct UncertaintyOutcome {
    pub objective: Objective,
    pub chosen: CandidateProfile,
    pub worst_dpr: f64,
    pub avg_dpr: f64,
    /// Best `k_M = 0` candidate under the same objective and feasibility rule.
    pub baseline: Option<CandidateProfile>,
}

impl UncertaintyOutcome {
    pub fn baseline_worst_dpr(&self) -> Option<f64> {
        self.baseline.as_ref().map(CandidateProfile::worst_dpr)
    }
}

/// Chooses a policy for each objective from already evaluated profiles.
pub fn choose_under_uncertainty(
    profiles: &[CandidateProfile],
    objective: Objective,
    feasibility: Feasibility,
) -> Result<UncertaintyOutcome> {
    let chosen = select_policy(profiles, objective, feasibility)
        .ok_or_else(|| Error::Infeasible(format!("no candidate keeps regime C under the {feasibility:?} rule")))?;
    let baseline = select_policy(profiles.iter().filter(|p| p.policy.k_m == 0), objective, feasibility);
    Ok(UncertaintyOutcome {
        objective,
        worst_dpr: chosen.worst_dpr(),
        avg_dpr: chosen.average_dpr(),
        chosen: chosen.clone(),
        baseline: baseline.cloned(),
    })
}

pub fn optimize_under_uncertainty(
    spec: &UncertaintySpec,
    objective: Objective,
    base: &ModelConfig,
    candidates: &[PlatformPolicy],
) -> Result<UncertaintyOutcome> {
    let grid = spec.grid()?;
    let profiles = candidate_profiles(base, candidates, &grid)?;
    choose_under_uncertainty(&profiles, objective, spec.feasibility)
}

/// Every `(k_G, k_M)` with `k_M ≤ k_G ≤ k`.
pub fn all_policies(k: usize) -> Vec<PlatformPolicy> {
    (0..=k)
        .flat_map(|k_g| (0..=k_g).map(move |k_m| PlatformPolicy { k_g, k_m }))
        .collect()
}

/// One row of an uncertainty-width scan.
#[derive(Debug, Clone, Serialize)]
pub struct UncertaintyRow {
    pub width: f64,
    pub outcome: UncertaintyOutcome,
}

/// Both objectives at each width of a belief interval centred on
/// `epsilon_true`. Candidate profiles are shared between objectives.
pub fn uncertainty_scan(
    base: &ModelConfig,
    epsilon_true: f64,
    widths: &[f64],
    resolution: usize,
    feasibility: Feasibility,
    candidates: &[PlatformPolicy],
) -> Result<Vec<UncertaintyRow>> {
    let mut rows = Vec::new();
    for &width in widths {
        let mut spec = UncertaintySpec::centred(epsilon_true, width);
        spec.resolution = resolution;
        spec.feasibility = feasibility;
        let profiles = candidate_profiles(base, candidates, &spec.grid()?)?;
        for objective in Objective::ALL {
            rows.push(UncertaintyRow {
                width,
                outcome: choose_under_uncertainty(&profiles, objective, feasibility)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig::default()
            .with_population(5, 5)
            .with_users(0.3, 0.7, 4)
            .with_policy(2, 0)
            .with_beta(200.0)
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("kg".parse::<SweepAxis>().unwrap(), SweepAxis::Kg);
        assert_eq!("gamma".parse::<SweepAxis>().unwrap(), SweepAxis::Gamma);
        assert!("k".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn singleton_sweep_matches_direct() {
        let base = small();
        let s = sweep_kg(&base, 3..=3).unwrap();
        assert_eq!(s.rows.len(), 1);
        let direct = metrics(&base.with_policy(3, 0)).unwrap();
        assert_eq!(s.rows[0].report, direct);
    }

    #[test]
    fn failed_point_aborts() {
        let base = small();
        assert!(matches!(sweep_kg(&base, 0..=5), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn identical_points_all_on_front() {
        let pts = vec![(0.5, 0.5); 4];
        assert!(nondominated(&pts).into_iter().all(|x| x));
    }

    #[test]
    fn front_small_cases() {
        let pts = [(1.0, 0.0), (0.0, 1.0), (0.5, 0.5), (0.4, 0.4), (1.0, 0.0), (0.5, 0.2)];
        assert_eq!(nondominated(&pts), vec![true, true, true, false, true, false]);
    }

    #[test]
    fn belief_grid() {
        let s = UncertaintySpec::centred(0.35, 0.0);
        assert_eq!(s.grid().unwrap(), vec![0.35]);
        let s = UncertaintySpec::centred(0.35, 0.525);
        let g = s.grid().unwrap();
        assert_eq!(g.len(), 15);
        assert!((g[0] - 0.0875).abs() < 1e-15);
        assert!((g[14] - 0.6125).abs() < 1e-15);
        let mut bad = s;
        bad.resolution = 1;
        assert!(bad.grid().is_err());
    }

    #[test]
    fn singleton_candidate_is_returned() {
        let base = small();
        let only = [PlatformPolicy { k_g: 4, k_m: 1 }];
        let spec = UncertaintySpec {
            epsilon_min: 0.2,
            epsilon_max: 0.4,
            resolution: 3,
            feasibility: Feasibility::EveryGridPoint,
        };
        for objective in Objective::ALL {
            match optimize_under_uncertainty(&spec, objective, &base, &only) {
                Ok(o) => {
                    assert_eq!(o.chosen.policy, only[0]);
                    for (e, d) in o.chosen.epsilons.iter().zip(&o.chosen.dpr) {
                        let direct = metrics(&base.with_policy(4, 1).with_epsilon(*e)).unwrap();
                        assert_eq!(direct.dpr, *d);
                    }
                }
                Err(Error::Infeasible(_)) => {
                    let p = candidate_profiles(&base, &only, &spec.grid().unwrap()).unwrap();
                    assert!(!p[0].feasible(Feasibility::EveryGridPoint));
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn empty_feasible_set_is_diagnosed() {
        let base = small().with_users(0.3, 0.0, 4);
        let only = [PlatformPolicy { k_g: 0, k_m: 0 }];
        let spec = UncertaintySpec::centred(0.3, 0.0);
        let err = optimize_under_uncertainty(&spec, Objective::MaximinDpr, &base, &only).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn all_policies_count() {
        assert_eq!(all_policies(20).len(), 231);
        assert!(all_policies(4).iter().all(|p| p.k_m <= p.k_g && p.k_g <= 4));
    }
}
