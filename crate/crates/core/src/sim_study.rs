//! Simulation scenarios A–E and the relative-MSE / relative-bias summary
//! of competing mean-difference estimators.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_engine::{chain_rng, SamplerConfig};
use crate::density_families::{CaseDensity, FamilyKind};
use crate::error::{Error, Result};
use crate::functionals::{estimate, GqteFunctional};
use crate::induced_density::TwoSampleData;
use crate::pipeline::{fit_model, DfChoice, ModelChoice};
use crate::quantile_core::{normal, BasisFamily, LinkFunction, Percentile};
use crate::stats;

pub const STANDIN_VERSION: &str = "standin-v1";
const STANDIN_CASES: &str = include_str!("../data/standin_cases.csv");
const STANDIN_CONTROLS: &str = include_str!("../data/standin_controls.csv");

pub const TRUTH_DRAWS: usize = 10_000_000;
const TRUTH_SEED: u64 = 0x5eed_de17a;
const GAMMA_SHAPE: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            _ => Err(Error::input(format!("unknown scenario '{s}' (expected A, B, C, D or E)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub n1: usize,
    pub n2: usize,
    /// Population means of the two gamma samples in scenario E.
    pub gamma_means: (f64, f64),
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId) -> Self {
        let d = standin();
        Self {
            id,
            n1: 100,
            n2: 1000,
            gamma_means: (d.case_mean, d.control_mean),
        }
    }

    pub fn with_sizes(mut self, n1: usize, n2: usize) -> Self {
        self.n1 = n1;
        self.n2 = n2;
        self
    }

    /// How the true Δ is obtained.
    pub fn provenance(&self) -> &'static str {
        match self.id {
            ScenarioId::A | ScenarioId::E => "analytic",
            ScenarioId::B | ScenarioId::C => "monte-carlo",
            ScenarioId::D => "stand-in",
        }
    }
}

struct StandIn {
    cases: Vec<f64>,
    controls: Vec<f64>,
    case_mean: f64,
    control_mean: f64,
}

fn parse_bundled(text: &str) -> Vec<f64> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().expect("bundled stand-in data is numeric"))
        .collect()
}

fn standin() -> &'static StandIn {
    static DATA: OnceLock<StandIn> = OnceLock::new();
    DATA.get_or_init(|| {
        let cases = parse_bundled(STANDIN_CASES);
        let controls = parse_bundled(STANDIN_CONTROLS);
        StandIn {
            case_mean: stats::mean(&cases),
            control_mean: stats::mean(&controls),
            cases,
            controls,
        }
    })
}

/// The bundled stand-in (cases, controls) for scenario D.
pub fn standin_samples() -> (&'static [f64], &'static [f64]) {
    let d = standin();
    (&d.cases, &d.controls)
}

fn baseline_quantile(u: f64) -> f64 {
    let z = normal::quantile(Percentile::new(u).expect("u lies in (0, 1)"));
    (7.0 + 1.5 * z).exp()
}

fn shift_b(u: f64) -> f64 {
    if u > 0.9 {
        2.0
    } else {
        1.0
    }
}

fn shift_c(u: f64) -> f64 {
    8.0 * u * (1.0 - u)
}

/// y₁ for scenarios B and C at the uniform draw `u`.
pub fn shifted_case(id: ScenarioId, u: f64) -> f64 {
    let s = match id {
        ScenarioId::B => shift_b(u),
        ScenarioId::C => shift_c(u),
        _ => panic!("scenario {id} is not a shifted-quantile scenario"),
    };
    baseline_quantile(u) * s.exp()
}

fn resample<R: Rng + ?Sized>(pool: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

fn controls_lognormal() -> CaseDensity {
    CaseDensity::log_normal(7.0, 1.5).expect("valid parameters")
}

/// One synthetic (cases, controls) pair.
pub fn generate_with<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<TwoSampleData> {
    let (y1, y2) = match spec.id {
        ScenarioId::A => {
            let y1 = CaseDensity::log_normal(7.5, 1.75)?.sample_n(spec.n1, rng);
            (y1, controls_lognormal().sample_n(spec.n2, rng))
        }
        ScenarioId::B | ScenarioId::C => {
            let y1 = (0..spec.n1)
                .map(|_| shifted_case(spec.id, Open01.sample(rng)))
                .collect();
            (y1, controls_lognormal().sample_n(spec.n2, rng))
        }
        ScenarioId::D => {
            let (cases, controls) = standin_samples();
            (resample(cases, spec.n1, rng), resample(controls, spec.n2, rng))
        }
        ScenarioId::E => {
            let (m1, m2) = spec.gamma_means;
            let y1 = CaseDensity::gamma(GAMMA_SHAPE, GAMMA_SHAPE / m1)?.sample_n(spec.n1, rng);
            (y1, CaseDensity::gamma(GAMMA_SHAPE, GAMMA_SHAPE / m2)?.sample_n(spec.n2, rng))
        }
    };
    TwoSampleData::new(y1, y2)
}

pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<TwoSampleData> {
    generate_with(spec, &mut chain_rng(seed, 0))
}

/// Monte Carlo mean difference with its standard error, from `draws`
/// independent draws of each population.
pub fn monte_carlo_delta(id: ScenarioId, draws: usize, seed: u64) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::input("Monte Carlo needs at least two draws"));
    }
    let mut rng = chain_rng(seed, 0);
    let case: Box<dyn Fn(f64) -> f64> = match id {
        ScenarioId::A => Box::new(|z: f64| (7.5 + 1.75 * z).exp()),
        ScenarioId::B | ScenarioId::C => Box::new(move |z: f64| {
            let u = normal::cdf(z);
            let s = if id == ScenarioId::B { shift_b(u) } else { shift_c(u) };
            (7.0 + 1.5 * z + s).exp()
        }),
        _ => {
            return Err(Error::input(format!(
                "scenario {id} has a closed-form or empirical truth"
            )))
        }
    };
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let d = case(z1) - (7.0 + 1.5 * z2).exp();
        sum += d;
        sum_sq += d * d;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn lognormal_mean(mu: f64, sigma: f64) -> f64 {
    (mu + 0.5 * sigma * sigma).exp()
}

/// The population mean difference E(y₁) − E(y₂).
pub fn true_delta(spec: &ScenarioSpec) -> f64 {
    static CACHE_B: OnceLock<f64> = OnceLock::new();
    static CACHE_C: OnceLock<f64> = OnceLock::new();
    let mc = |id| {
        monte_carlo_delta(id, TRUTH_DRAWS, TRUTH_SEED)
            .expect("shifted scenarios support Monte Carlo")
            .0
    };
    match spec.id {
        ScenarioId::A => lognormal_mean(7.5, 1.75) - lognormal_mean(7.0, 1.5),
        ScenarioId::B => *CACHE_B.get_or_init(|| mc(ScenarioId::B)),
        ScenarioId::C => *CACHE_C.get_or_init(|| mc(ScenarioId::C)),
        ScenarioId::D => {
            let d = standin();
            d.case_mean - d.control_mean
        }
        ScenarioId::E => spec.gamma_means.0 - spec.gamma_means.1,
    }
}

/// A mean-difference estimator compared in the study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    /// ȳ₁ − ȳ₂.
    Baseline,
    /// Posterior mean of the mean difference under the given model, fitted
    /// to the `root`-th root of the data and mapped back through the
    /// moment of order `root`.
    Gqte {
        model: ModelChoice,
        sampler: SamplerConfig,
        root: u32,
    },
    /// Reports the true Δ.
    Oracle,
}

impl Estimator {
    /// Log link on cube-root data with the natural-spline basis and λ
    /// chosen by the L1 criterion.
    pub fn gqte(family: FamilyKind, sampler: SamplerConfig) -> Self {
        Self::Gqte {
            model: ModelChoice::new(
                family,
                LinkFunction::Log,
                BasisFamily::NaturalCubicSpline,
                DfChoice::Auto { max: crate::df_selection::DEFAULT_DF_MAX },
            ),
            sampler,
            root: 3,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Baseline => "baseline".into(),
            Self::Gqte { model, .. } => format!("gqte-{}", model.family.name()),
            Self::Oracle => "oracle".into(),
        }
    }

    fn apply(&self, data: &TwoSampleData, truth: f64, seed: u64) -> Result<f64> {
        match self {
            Self::Baseline => Ok(stats::mean(data.y1()) - stats::mean(data.y2())),
            Self::Oracle => Ok(truth),
            Self::Gqte { model, sampler, root } => {
                let config = SamplerConfig {
                    seed,
                    ..sampler.clone()
                };
                let scaled = if *root == 1 {
                    data.clone()
                } else {
                    data.powered(1.0 / *root as f64)?
                };
                let fit = fit_model(&scaled, model, &config)?;
                let est = estimate(&GqteFunctional::moment(*root)?, &fit.draws, &scaled, &fit.spec)?;
                Ok(est.mean[0])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub estimator: String,
    /// Percentage reduction in MSE relative to the baseline.
    pub rmse: f64,
    /// Relative bias in percent.
    pub rb: f64,
    pub mse: f64,
    pub mean: f64,
    pub valid: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: ScenarioId,
    pub n1: usize,
    pub n2: usize,
    pub replicates: usize,
    pub seed: u64,
    pub true_delta: f64,
    pub truth_source: String,
    /// MSE of ȳ₁ − ȳ₂ over all replicates.
    pub baseline_mse: f64,
    pub rows: Vec<EstimatorMetrics>,
}

/// RMSE and RB for one estimator. Failed replicates (`None`) are dropped
/// from both the estimator and the baseline before comparison.
pub fn summarize(name: &str, estimates: &[Option<f64>], baseline: &[f64], truth: f64) -> EstimatorMetrics {
    let pairs: Vec<(f64, f64)> = estimates
        .iter()
        .zip(baseline)
        .filter_map(|(e, b)| e.map(|e| (e, *b)))
        .collect();
    let valid = pairs.len();
    let failed = estimates.len() - valid;
    if valid == 0 {
        return EstimatorMetrics {
            estimator: name.to_string(),
            rmse: f64::NAN,
            rb: f64::NAN,
            mse: f64::NAN,
            mean: f64::NAN,
            valid,
            failed,
        };
    }
    let n = valid as f64;
    let mse = pairs.iter().map(|(e, _)| (e - truth).powi(2)).sum::<f64>() / n;
    let base = pairs.iter().map(|(_, b)| (b - truth).powi(2)).sum::<f64>() / n;
    let mean = pairs.iter().map(|(e, _)| e).sum::<f64>() / n;
    EstimatorMetrics {
        estimator: name.to_string(),
        rmse: (base - mse) / base * 100.0,
        rb: (mean - truth) / truth * 100.0,
        mse,
        mean,
        valid,
        failed,
    }
}

/// Runs every estimator on `replicates` independent data sets. Replicate r
/// draws its data from substream 2r+1 and its chain seed from 2r+2.
pub fn run_study(
    spec: &ScenarioSpec,
    estimators: &[Estimator],
    replicates: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if replicates < 2 {
        return Err(Error::input("a study needs at least two replicates"));
    }
    if estimators.is_empty() {
        return Err(Error::input("no estimators requested"));
    }
    let truth = true_delta(spec);
    let results: Vec<(f64, Vec<Option<f64>>)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = generate_with(spec, &mut chain_rng(seed, 2 * r + 1))?;
            let chain_seed = chain_rng(seed, 2 * r + 2).random::<u64>();
            let base = stats::mean(data.y1()) - stats::mean(data.y2());
            let values = estimators
                .iter()
                .map(|e| e.apply(&data, truth, chain_seed).ok())
                .collect();
            Ok((base, values))
        })
        .collect::<Result<_>>()?;
    let baseline: Vec<f64> = results.iter().map(|(b, _)| *b).collect();
    let baseline_mse = baseline.iter().map(|b| (b - truth).powi(2)).sum::<f64>() / replicates as f64;
    let rows = estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let column: Vec<Option<f64>> = results.iter().map(|(_, v)| v[k]).collect();
            summarize(&e.name(), &column, &baseline, truth)
        })
        .collect();
    Ok(MetricsReport {
        scenario: spec.id,
        n1: spec.n1,
        n2: spec.n2,
        replicates,
        seed,
        true_delta: truth,
        truth_source: spec.provenance().to_string(),
        baseline_mse,
        rows,
    })
}

impl MetricsReport {
    /// Metadata lines prefixed by `#`, then one row per estimator.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# scenario,{}", self.scenario);
        let _ = writeln!(out, "# n1,{}", self.n1);
        let _ = writeln!(out, "# n2,{}", self.n2);
        let _ = writeln!(out, "# replicates,{}", self.replicates);
        let _ = writeln!(out, "# seed,{}", self.seed);
        let _ = writeln!(out, "# true_delta,{}", self.true_delta);
        let _ = writeln!(out, "# truth_source,{}", self.truth_source);
        if self.scenario == ScenarioId::D || self.scenario == ScenarioId::E {
            let _ = writeln!(out, "# data,stand-in {STANDIN_VERSION}");
        }
        let _ = writeln!(out, "# baseline_mse,{}", self.baseline_mse);
        out.push_str("estimator,rmse,rb,mse,mean,valid,failed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.estimator, r.rmse, r.rb, r.mse, r.mean, r.valid, r.failed
            );
        }
        out
    }

    pub fn row(&self, estimator: &str) -> Option<&EstimatorMetrics> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_a_controls_follow_the_lognormal() {
        for seed in 0..5 {
            let data = generate(&ScenarioSpec::new(ScenarioId::A), seed).unwrap();
            let f = controls_lognormal();
            let ks = stats::ks_statistic_sorted(data.y2(), |y| f.cdf(y));
            assert!(ks < 0.05, "seed {seed}: D = {ks}");
            assert_eq!((data.n1(), data.n2()), (100, 1000));
        }
    }

    #[test]
    fn scenario_b_and_c_generators() {
        let e = std::f64::consts::E;
        for u in [0.05, 0.3, 0.5, 0.9, 0.9000001, 0.97] {
            let g = baseline_quantile(u);
            let expected = if u <= 0.9 { g * e } else { g * e * e };
            assert!((shifted_case(ScenarioId::B, u) / expected - 1.0).abs() < 1e-14);
        }
        assert!((shifted_case(ScenarioId::C, 0.5) / 9f64.exp() - 1.0).abs() < 1e-14);
        assert_eq!(shifted_case(ScenarioId::C, 0.001), baseline_quantile(0.001) * (8.0 * 0.001 * 0.999f64).exp());
    }

    #[test]
    fn generation_is_reproducible() {
        for id in [ScenarioId::A, ScenarioId::B, ScenarioId::C, ScenarioId::D, ScenarioId::E] {
            let spec = ScenarioSpec::new(id).with_sizes(30, 40);
            assert_eq!(generate(&spec, 9).unwrap(), generate(&spec, 9).unwrap());
            assert_ne!(generate(&spec, 9).unwrap(), generate(&spec, 10).unwrap());
        }
    }

    #[test]
    fn scenario_d_resamples_the_stand_in() {
        let (cases, controls) = standin_samples();
        assert_eq!((cases.len(), controls.len()), (118, 2262));
        let data = generate(&ScenarioSpec::new(ScenarioId::D), 3).unwrap();
        assert!(data.y1().iter().all(|y| cases.contains(y)));
        assert!(data.y2().iter().all(|y| controls.contains(y)));
    }

    #[test]
    fn truths() {
        let a = true_delta(&ScenarioSpec::new(ScenarioId::A));
        let oracle = (7.5f64 + 1.53125).exp() - (7.0f64 + 1.125).exp();
        assert!((a - oracle).abs() < 1e-9 && (a - 4982.4).abs() < 0.1);
        let mut e = ScenarioSpec::new(ScenarioId::E);
        e.gamma_means = (1234.5, 1234.5);
        assert_eq!(true_delta(&e), 0.0);
        let d = true_delta(&ScenarioSpec::new(ScenarioId::D));
        let (cases, controls) = standin_samples();
        assert_eq!(d, stats::mean(cases) - stats::mean(controls));
        assert_eq!(true_delta(&ScenarioSpec::new(ScenarioId::E)), d);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature_for_shifted_scenarios() {
        // Midpoint rule over u of g(u)(e^{s(u)} − 1), with g the lognormal
        // quantile; 2e5 points.
        for id in [ScenarioId::B, ScenarioId::C] {
            let m = 200_000;
            let quad: f64 = (0..m)
                .map(|i| {
                    let u = (i as f64 + 0.5) / m as f64;
                    shifted_case(id, u) - baseline_quantile(u)
                })
                .sum::<f64>()
                / m as f64;
            let (mc, se) = monte_carlo_delta(id, 400_000, 11).unwrap();
            assert!((mc - quad).abs() < 4.0 * se, "{id}: mc {mc} ± {se}, quadrature {quad}");
        }
    }

    #[test]
    fn metric_identities() {
        let truth = 10.0;
        let base = [9.0, 12.5, 7.0, 10.2];
        let as_opt: Vec<Option<f64>> = base.iter().map(|&b| Some(b)).collect();
        let m = summarize("baseline", &as_opt, &base, truth);
        assert_eq!(m.rmse, 0.0);
        let oracle = summarize("oracle", &[Some(truth); 4], &base, truth);
        assert_eq!((oracle.rmse, oracle.rb), (100.0, 0.0));
        let partial = summarize("x", &[None, Some(12.5), None, Some(10.2)], &base, truth);
        assert_eq!((partial.valid, partial.failed), (2, 2));
        assert_eq!(partial.rmse, 0.0);
    }

    #[test]
    fn study_with_cheap_estimators() {
        let spec = ScenarioSpec::new(ScenarioId::A);
        let r = run_study(&spec, &[Estimator::Baseline, Estimator::Oracle], 5, 2).unwrap();
        assert_eq!(r.row("baseline").unwrap().rmse, 0.0);
        assert_eq!(r.row("oracle").unwrap().rmse, 100.0);
        assert_eq!(r.row("baseline").unwrap().mse, r.baseline_mse);
        assert_eq!(r, run_study(&spec, &[Estimator::Baseline, Estimator::Oracle], 5, 2).unwrap());
        assert!(run_study(&spec, &[Estimator::Baseline], 1, 2).is_err());
        let csv = run_study(&ScenarioSpec::new(ScenarioId::D), &[Estimator::Baseline], 2, 1)
            .unwrap()
            .to_csv();
        assert!(csv.contains("stand-in"));
    }

    #[test]
    fn scenario_ids_parse() {
        assert_eq!("c".parse::<ScenarioId>().unwrap(), ScenarioId::C);
        assert!("F".parse::<ScenarioId>().is_err());
    }
}
