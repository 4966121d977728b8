//! Time-to-solution, polynomial fits and the scaling benchmark runner.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::generate::Algorithm;
use crate::qubo::{QuboProblem, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2};
use crate::sampler::{AnnealParams, SampleSet, Sampler, SamplerError};
use crate::seed;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
pub const DEFAULT_TARGET: f64 = 0.99;
pub const DEFAULT_WINDOW: usize = 10;
/// Energy tolerance used when counting ground-state reads.
pub const GROUND_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("TTS is undefined for a success probability of {0}")]
    UndefinedTts(f64),
    #[error("design matrix is singular: {0}")]
    Singular(String),
    #[error("need at least {window} values, got {len}")]
    TooShort { len: usize, window: usize },
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("unknown solver `{0}` (expected classic-bar, classic-wall, classic-hunt, sa or sqa)")]
    UnknownSolver(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub p: f64,
    pub ci95: (f64, f64),
    pub successes: usize,
    pub reads: usize,
}

/// Fraction of reads with energy at most `ground_energy + tol`.
pub fn estimate_success_prob(set: &SampleSet, ground_energy: f64, tol: f64) -> SuccessEstimate {
    let reads = set.num_reads();
    let successes = set.count_at_most(ground_energy + tol);
    SuccessEstimate {
        p: if reads == 0 {
            0.0
        } else {
            successes as f64 / reads as f64
        },
        ci95: wilson_interval(successes, reads),
        successes,
        reads,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsEstimate {
    /// Seconds per read.
    pub t_anneal: f64,
    pub p_success: f64,
    pub target: f64,
    /// Seconds to reach the ground state with probability `target`.
    pub tts: f64,
    /// Bounds carried over from an interval on `p_success`; the upper bound
    /// is infinite when the interval reaches zero.
    pub ci95: Option<(f64, f64)>,
}

fn tts_value(t_anneal: f64, p: f64, target: f64) -> f64 {
    if p >= target {
        t_anneal
    } else {
        t_anneal * (1.0 - target).ln() / (1.0 - p).ln()
    }
}

pub fn tts(t_anneal: f64, p_success: f64, target: f64) -> Result<TtsEstimate, BenchError> {
    if !(p_success > 0.0 && p_success <= 1.0) {
        return Err(BenchError::UndefinedTts(p_success));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(BenchError::Config(format!(
            "target must lie in (0, 1), got {target}"
        )));
    }
    Ok(TtsEstimate {
        t_anneal,
        p_success,
        target,
        tts: tts_value(t_anneal, p_success, target),
        ci95: None,
    })
}

/// TTS with an interval derived from the Wilson interval of the estimate.
pub fn tts_with_ci(
    t_anneal: f64,
    est: &SuccessEstimate,
    target: f64,
) -> Result<TtsEstimate, BenchError> {
    let mut out = tts(t_anneal, est.p, target)?;
    let (lo, hi) = est.ci95;
    let upper = if lo > 0.0 {
        tts_value(t_anneal, lo, target)
    } else {
        f64::INFINITY
    };
    out.ci95 = Some((tts_value(t_anneal, hi, target), upper));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub degree: usize,
    /// Coefficient of `x^k` at index `k`.
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    pub ci95: Vec<(f64, f64)>,
    pub residual_variance: f64,
    pub df: usize,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }

    /// Coefficient divided by its standard error.
    pub fn t_statistic(&self, k: usize) -> f64 {
        self.coefficients[k] / self.stderr[k]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit is serialisable")
    }
}

/// Ordinary least squares on the monomial basis `1, x, …, x^degree`.
pub fn fit_poly(xs: &[f64], ys: &[f64], degree: usize) -> Result<RegressionFit, BenchError> {
    if !(1..=2).contains(&degree) {
        return Err(BenchError::Config(format!(
            "degree must be 1 or 2, got {degree}"
        )));
    }
    if xs.len() != ys.len() {
        return Err(BenchError::Config(format!(
            "{} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let cols = degree + 1;
    let rows = xs.len();
    if rows <= cols {
        return Err(BenchError::Singular(format!(
            "{rows} points cannot determine {cols} coefficients with a residual"
        )));
    }
    let design = DMatrix::from_fn(rows, cols, |r, c| xs[r].powi(c as i32));
    let y = DVector::from_column_slice(ys);
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax().max(f64::MIN_POSITIVE);
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(BenchError::Singular("x values are degenerate".into()));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| BenchError::Singular("triangular solve failed".into()))?;

    let residuals = &y - &design * &beta;
    let df = rows - cols;
    let residual_variance = residuals.norm_squared() / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or_else(|| BenchError::Singular("triangular inverse failed".into()))?;
    let cov = &r_inv * r_inv.transpose() * residual_variance;
    let t = StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let stderr: Vec<f64> = (0..cols).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    let ci95 = coefficients
        .iter()
        .zip(&stderr)
        .map(|(c, s)| (c - t * s, c + t * s))
        .collect();
    Ok(RegressionFit {
        degree,
        coefficients,
        stderr,
        ci95,
        residual_variance,
        df,
    })
}

/// Simple moving averages of `window` consecutive times, each divided by the
/// first average.
pub fn sma_increase_rate(times: &[f64], window: usize) -> Result<Vec<f64>, BenchError> {
    if window == 0 {
        return Err(BenchError::Config("window must be at least 1".into()));
    }
    if times.len() < window {
        return Err(BenchError::TooShort {
            len: times.len(),
            window,
        });
    }
    let sma: Vec<f64> = times
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    if sma[0] <= 0.0 {
        return Err(BenchError::Config(
            "first moving average must be positive".into(),
        ));
    }
    Ok(sma.iter().map(|s| s / sma[0]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    ClassicBar,
    ClassicWall,
    ClassicHunt,
    Sa,
    Sqa,
}

impl Solver {
    pub const ALL: [Solver; 5] = [
        Solver::ClassicBar,
        Solver::ClassicWall,
        Solver::ClassicHunt,
        Solver::Sa,
        Solver::Sqa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::ClassicBar => "classic-bar",
            Solver::ClassicWall => "classic-wall",
            Solver::ClassicHunt => "classic-hunt",
            Solver::Sa => "sa",
            Solver::Sqa => "sqa",
        }
    }

    fn algorithm(self) -> Option<Algorithm> {
        match self {
            Solver::ClassicBar => Some(Algorithm::BarTipping),
            Solver::ClassicWall => Some(Algorithm::WallExtending),
            Solver::ClassicHunt => Some(Algorithm::HuntAndKill),
            Solver::Sa | Solver::Sqa => None,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Solver::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| BenchError::UnknownSolver(s.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub solvers: Vec<Solver>,
    pub n_values: Vec<usize>,
    pub reps: usize,
    /// Used by the `sa` and `sqa` solvers; its seed is replaced per repetition.
    pub anneal: AnnealParams,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.solvers.is_empty() {
            return Err(BenchError::Config("no solvers selected".into()));
        }
        if self.n_values.is_empty() {
            return Err(BenchError::Config("empty N range".into()));
        }
        if self.n_values.contains(&0) {
            return Err(BenchError::Config("N must be at least 1".into()));
        }
        if self.reps == 0 {
            return Err(BenchError::Config("reps must be at least 1".into()));
        }
        if self.solvers.iter().any(|s| s.algorithm().is_none()) {
            self.anneal
                .validate(self.solvers.contains(&Solver::Sqa))
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// One `(solver, N)` cell. Sampler rows time a single read; `p_success` and
/// `tts_seconds` are empty for classical generators and `tts_seconds` is
/// empty when no read reached the ground state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: Solver,
    pub n: usize,
    pub reps: usize,
    pub mean_seconds: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_success: Option<f64>,
    pub tts_seconds: Option<f64>,
}

fn mean_ci(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, mean, mean);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

fn bench_cell(cfg: &BenchConfig, solver: Solver, n: usize) -> Result<BenchRow, BenchError> {
    let cell_seed = seed::derive(cfg.seed, solver as u64, n as u64);
    let mut times = Vec::with_capacity(cfg.reps);
    let (p_success, tts_seconds) = match solver.algorithm() {
        Some(algo) => {
            for rep in 0..cfg.reps {
                let s = seed::derive(cell_seed, 0, rep as u64);
                let start = Instant::now();
                let maze = algo
                    .generate(n, s)
                    .map_err(|e| BenchError::Config(e.to_string()))?;
                times.push(start.elapsed().as_secs_f64());
                std::hint::black_box(maze);
            }
            (None, None)
        }
        None => {
            let sampler = if solver == Solver::Sa {
                Sampler::Sa
            } else {
                Sampler::Sqa
            };
            let q = QuboProblem::base(n, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            let (mut successes, mut reads) = (0, 0);
            for rep in 0..cfg.reps {
                let params = AnnealParams {
                    seed: seed::derive(cell_seed, 1, rep as u64),
                    ..cfg.anneal.clone()
                };
                let set = sampler.sample(&q, &params)?;
                let est = estimate_success_prob(&set, 0.0, GROUND_TOL);
                successes += est.successes;
                reads += est.reads;
                times.push(set.per_read_time);
            }
            let p = successes as f64 / reads as f64;
            let t_read = times.iter().sum::<f64>() / times.len() as f64;
            let tts_s = tts(t_read, p, DEFAULT_TARGET).ok().map(|e| e.tts);
            (Some(p), tts_s)
        }
    };
    let (mean_seconds, ci_low, ci_high) = mean_ci(&times);
    Ok(BenchRow {
        solver,
        n,
        reps: cfg.reps,
        mean_seconds,
        ci_low,
        ci_high,
        p_success,
        tts_seconds,
    })
}

/// Runs every `(solver, N)` cell sequentially so timings do not contend.
pub fn run_scaling_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.solvers.len() * cfg.n_values.len());
    for &solver in &cfg.solvers {
        for &n in &cfg.n_values {
            rows.push(bench_cell(cfg, solver, n)?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: io::Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(BenchError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::Bitstring;
    use crate::sampler::Record;

    fn set_with(ground: usize, excited: usize) -> SampleSet {
        let mut records = Vec::new();
        if ground > 0 {
            records.push(Record {
                bitstring: Bitstring::zeros(2),
                energy: 0.0,
                occurrences: ground,
            });
        }
        if excited > 0 {
            records.push(Record {
                bitstring: Bitstring::from_index(1, 2),
                energy: 2.0,
                occurrences: excited,
            });
        }
        SampleSet {
            records,
            per_read_time: 1e-5,
            total_time: 1e-5 * (ground + excited) as f64,
        }
    }

    #[test]
    fn wilson_half_success() {
        let est = estimate_success_prob(&set_with(500, 500), 0.0, GROUND_TOL);
        assert_eq!(est.p, 0.5);
        assert!((est.ci95.0 - 0.469).abs() < 5e-4, "{:?}", est.ci95);
        assert!((est.ci95.1 - 0.531).abs() < 5e-4, "{:?}", est.ci95);
    }

    #[test]
    fn wilson_extremes() {
        let all = estimate_success_prob(&set_with(1000, 0), 0.0, GROUND_TOL);
        assert_eq!(all.p, 1.0);
        assert_eq!(all.ci95.1, 1.0);
        let none = estimate_success_prob(&set_with(0, 1000), 0.0, GROUND_TOL);
        assert_eq!(none.p, 0.0);
        assert_eq!(none.ci95.0, 0.0);
        assert!(matches!(
            tts(1e-5, none.p, 0.99),
            Err(BenchError::UndefinedTts(_))
        ));
    }

    #[test]
    fn tts_examples() {
        let half = tts(20e-6, 0.5, 0.99).unwrap();
        assert!((half.tts * 1e6 - 132.877).abs() < 0.01, "{}", half.tts);
        assert_eq!(tts(20e-6, 0.99, 0.99).unwrap().tts, 20e-6);
        assert_eq!(tts(20e-6, 1.0, 0.99).unwrap().tts, 20e-6);
        assert!(tts(20e-6, 1.5, 0.99).is_err());
    }

    #[test]
    fn tts_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..=99 {
            let t = tts(1.0, k as f64 / 100.0, 0.99).unwrap().tts;
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn tts_interval_brackets_point() {
        let est = estimate_success_prob(&set_with(300, 700), 0.0, GROUND_TOL);
        let t = tts_with_ci(1e-5, &est, 0.99).unwrap();
        let (lo, hi) = t.ci95.unwrap();
        assert!(lo < t.tts && t.tts < hi);
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = fit_poly(&xs, &ys, 1).unwrap();
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-9);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-9);
        assert!(fit.stderr.iter().all(|s| *s < 1e-9));
    }

    #[test]
    fn exact_quadratic() {
        let xs: Vec<f64> = (2..=40).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.855 * x * x + 0.6 * x + 2.2).collect();
        let fit = fit_poly(&xs, &ys, 2).unwrap();
        for (got, want) in fit.coefficients.iter().zip([2.2, 0.6, 0.855]) {
            assert!(((got - want) / want).abs() < 1e-9);
        }
        assert!((fit.predict(10.0) - (85.5 + 6.0 + 2.2)).abs() < 1e-9);
    }

    #[test]
    fn noisy_line_matches_closed_form() {
        // Closed-form simple regression as an independent check.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ys = [1.1, 2.9, 5.2, 6.8, 9.1, 11.0];
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - icpt - slope * x).powi(2))
            .sum();
        let s2 = rss / (n - 2.0);
        let fit = fit_poly(&xs, &ys, 1).unwrap();
        assert!((fit.coefficients[1] - slope).abs() < 1e-12);
        assert!((fit.coefficients[0] - icpt).abs() < 1e-12);
        assert!((fit.stderr[1] - (s2 / sxx).sqrt()).abs() < 1e-12);
        assert!((fit.stderr[0] - (s2 * (1.0 / n + mx * mx / sxx)).sqrt()).abs() < 1e-12);
        // t(0.975, 4) = 2.776445
        assert!((fit.ci95[1].1 - slope - 2.776445 * fit.stderr[1]).abs() < 1e-5);
    }

    #[test]
    fn singular_fits() {
        assert!(matches!(
            fit_poly(&[1.0, 2.0], &[1.0, 2.0], 2),
            Err(BenchError::Singular(_))
        ));
        assert!(matches!(
            fit_poly(&[3.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0], 1),
            Err(BenchError::Singular(_))
        ));
        assert!(fit_poly(&[1.0, 2.0, 3.0], &[1.0, 2.0], 1).is_err());
        assert!(fit_poly(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], 3).is_err());
    }

    #[test]
    fn fit_json_shape() {
        let fit = fit_poly(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.1, 4.9, 7.0], 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
        assert_eq!(v["degree"], 1);
        assert_eq!(v["ci95"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn sma_examples() {
        let times: Vec<f64> = (1..=30).map(f64::from).collect();
        let r = sma_increase_rate(&times, 10).unwrap();
        assert_eq!(r.len(), 21);
        assert_eq!(r[0], 1.0);
        assert!((r[20] - 25.5 / 5.5).abs() < 1e-12);
        assert!((r[20] - 4.636).abs() < 1e-3);
        assert!(sma_increase_rate(&[3.0; 12], 10)
            .unwrap()
            .iter()
            .all(|x| *x == 1.0));
        assert!(matches!(
            sma_increase_rate(&[1.0; 9], 10),
            Err(BenchError::TooShort { len: 9, window: 10 })
        ));
    }

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
        assert!("qpu".parse::<Solver>().is_err());
    }

    fn small_config(solvers: Vec<Solver>, n_values: Vec<usize>) -> BenchConfig {
        BenchConfig {
            solvers,
            n_values,
            reps: 3,
            anneal: AnnealParams {
                reads: 20,
                sweeps: 200,
                ..AnnealParams::default()
            },
            seed: 1,
        }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            run_scaling_bench(&small_config(vec![Solver::ClassicBar], vec![])),
            Err(BenchError::Config(_))
        ));
        assert!(run_scaling_bench(&small_config(vec![], vec![2])).is_err());
        assert!(run_scaling_bench(&small_config(vec![Solver::Sa], vec![0])).is_err());
        let mut c = small_config(vec![Solver::ClassicBar], vec![2]);
        c.reps = 0;
        assert!(run_scaling_bench(&c).is_err());
    }

    #[test]
    fn bench_rows_and_csv_round_trip() {
        let rows = run_scaling_bench(&small_config(Solver::ALL.to_vec(), vec![1, 2])).unwrap();
        assert_eq!(rows.len(), 10);
        for row in &rows {
            assert!(row.mean_seconds > 0.0);
            assert!(row.ci_low <= row.mean_seconds && row.mean_seconds <= row.ci_high);
            match row.solver {
                Solver::Sa | Solver::Sqa => {
                    assert!(row.p_success.unwrap() > 0.0);
                    assert!(row.tts_seconds.unwrap().is_finite());
                }
                _ => assert!(row.p_success.is_none() && row.tts_seconds.is_none()),
            }
        }
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("solver,n,reps,mean_seconds,ci_low,ci_high,p_success,tts_seconds\n")
        );
        assert!(text.contains("\nclassic-bar,1,3,"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }
}
