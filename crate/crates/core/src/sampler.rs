//! Annealing samplers over a [`QuboProblem`].
//!
//! Both samplers start every read from a uniformly random configuration and
//! keep per-variable local fields so a proposed flip is priced in `O(1)`.
//! Reads run in parallel and are merged in read order, so a [`SampleSet`]'s
//! records depend only on the problem and the parameters.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bars::BarAssignment;
use crate::qubo::{Bitstring, QuboProblem};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("invalid anneal parameters: {0}")]
    Params(String),
    #[error("no sample decodes to a feasible assignment")]
    NotFound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealParams {
    pub sweeps: usize,
    pub reads: usize,
    pub seed: u64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub interpolation: Interpolation,
    /// Replica count for the quantum sampler.
    pub trotter_slices: usize,
    pub gamma_max: f64,
    pub gamma_min: f64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            sweeps: 1000,
            reads: 1000,
            seed: 0,
            beta_min: 0.1,
            beta_max: 10.0,
            interpolation: Interpolation::Geometric,
            trotter_slices: 8,
            gamma_max: 3.0,
            gamma_min: 0.01,
        }
    }
}

impl AnnealParams {
    pub fn validate(&self, quantum: bool) -> Result<(), SamplerError> {
        let fail = |msg: &str| Err(SamplerError::Params(msg.to_string()));
        if self.sweeps == 0 {
            return fail("sweeps must be at least 1");
        }
        if self.reads == 0 {
            return fail("reads must be at least 1");
        }
        if !(self.beta_min > 0.0 && self.beta_min < self.beta_max && self.beta_max.is_finite()) {
            return fail("need 0 < beta_min < beta_max < inf");
        }
        if quantum {
            if self.trotter_slices < 2 {
                return fail("trotter_slices must be at least 2");
            }
            if !(self.gamma_min >= 0.0
                && self.gamma_min <= self.gamma_max
                && self.gamma_max.is_finite())
            {
                return fail("need 0 <= gamma_min <= gamma_max < inf");
            }
        }
        Ok(())
    }

    /// Inverse temperature at sweep `s` of `sweeps`.
    pub fn beta_at(&self, s: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.beta_max;
        }
        let frac = s as f64 / (self.sweeps - 1) as f64;
        match self.interpolation {
            Interpolation::Linear => self.beta_min + (self.beta_max - self.beta_min) * frac,
            Interpolation::Geometric => self.beta_min * (self.beta_max / self.beta_min).powf(frac),
        }
    }

    /// Transverse field at sweep `s`, decreasing linearly.
    pub fn gamma_at(&self, s: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.gamma_min;
        }
        let frac = s as f64 / (self.sweeps - 1) as f64;
        self.gamma_max + (self.gamma_min - self.gamma_max) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub bitstring: Bitstring,
    pub energy: f64,
    pub occurrences: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    /// Distinct configurations in order of first appearance.
    pub records: Vec<Record>,
    /// Mean wall time of one read, in seconds.
    pub per_read_time: f64,
    /// Wall time of the whole call, in seconds.
    pub total_time: f64,
}

impl SampleSet {
    fn from_reads(q: &QuboProblem, reads: Vec<(Vec<u8>, Duration)>, total: Duration) -> Self {
        let read_count = reads.len();
        let per_read: Duration = reads.iter().map(|(_, d)| *d).sum();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut records: Vec<Record> = Vec::new();
        for (bits, _) in reads {
            match index.get(&bits) {
                Some(&k) => records[k].occurrences += 1,
                None => {
                    index.insert(bits.clone(), records.len());
                    records.push(Record {
                        energy: q.energy_unchecked(&bits),
                        bitstring: Bitstring(bits),
                        occurrences: 1,
                    });
                }
            }
        }
        SampleSet {
            records,
            per_read_time: per_read.as_secs_f64() / read_count as f64,
            total_time: total.as_secs_f64(),
        }
    }

    pub fn num_reads(&self) -> usize {
        self.records.iter().map(|r| r.occurrences).sum()
    }

    pub fn min_energy(&self) -> Option<f64> {
        self.records.iter().map(|r| r.energy).min_by(f64::total_cmp)
    }

    /// Reads whose energy is at most `threshold`.
    pub fn count_at_most(&self, threshold: f64) -> usize {
        self.records
            .iter()
            .filter(|r| r.energy <= threshold)
            .map(|r| r.occurrences)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sample set is serialisable")
    }
}

/// Which annealer to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Sa,
    Sqa,
}

impl Sampler {
    pub fn sample(self, q: &QuboProblem, p: &AnnealParams) -> Result<SampleSet, SamplerError> {
        match self {
            Sampler::Sa => sample_sa(q, p),
            Sampler::Sqa => sample_sqa(q, p),
        }
    }
}

/// Adjacency form of a QUBO: diagonal weights plus symmetric couplings.
struct Compiled {
    linear: Vec<f64>,
    offsets: Vec<usize>,
    neighbours: Vec<(usize, f64)>,
}

impl Compiled {
    fn new(q: &QuboProblem) -> Self {
        let dim = q.dim();
        let mut linear = vec![0.0; dim];
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (a, b, w) in q.terms() {
            if a == b {
                linear[a] += w;
            } else {
                adj[a].push((b, w));
                adj[b].push((a, w));
            }
        }
        let mut offsets = Vec::with_capacity(dim + 1);
        let mut neighbours = Vec::new();
        offsets.push(0);
        for list in adj {
            neighbours.extend(list);
            offsets.push(neighbours.len());
        }
        Compiled {
            linear,
            offsets,
            neighbours,
        }
    }

    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn row(&self, k: usize) -> &[(usize, f64)] {
        &self.neighbours[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Local fields `h_k + Σ_j J_kj x_j`.
    fn fields(&self, x: &[u8]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                self.linear[k]
                    + self
                        .row(k)
                        .iter()
                        .filter(|(j, _)| x[*j] != 0)
                        .map(|(_, w)| w)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Energy change of flipping `k`.
    #[inline]
    fn delta(&self, x: &[u8], fields: &[f64], k: usize) -> f64 {
        if x[k] == 0 {
            fields[k]
        } else {
            -fields[k]
        }
    }

    #[inline]
    fn flip(&self, x: &mut [u8], fields: &mut [f64], k: usize) {
        let sign = if x[k] == 0 { 1.0 } else { -1.0 };
        x[k] ^= 1;
        for &(j, w) in self.row(k) {
            fields[j] += sign * w;
        }
    }
}

fn random_bits<R: Rng>(rng: &mut R, dim: usize) -> Vec<u8> {
    (0..dim).map(|_| rng.random_bool(0.5) as u8).collect()
}

fn run_reads<F>(q: &QuboProblem, p: &AnnealParams, read: F) -> SampleSet
where
    F: Fn(u64) -> Vec<u8> + Sync,
{
    let started = Instant::now();
    let reads: Vec<(Vec<u8>, Duration)> = (0..p.reads as u64)
        .into_par_iter()
        .map(|r| {
            let t0 = Instant::now();
            let bits = read(r);
            (bits, t0.elapsed())
        })
        .collect();
    SampleSet::from_reads(q, reads, started.elapsed())
}

/// Simulated annealing: `sweeps` sequential single-flip Metropolis passes per
/// read under the inverse-temperature schedule of `p`.
pub fn sample_sa(q: &QuboProblem, p: &AnnealParams) -> Result<SampleSet, SamplerError> {
    p.validate(false)?;
    let model = Compiled::new(q);
    let betas: Vec<f64> = (0..p.sweeps).map(|s| p.beta_at(s)).collect();
    Ok(run_reads(q, p, |r| {
        let mut rng = seed::stream_rng(p.seed, r);
        let mut x = random_bits(&mut rng, model.dim());
        let mut fields = model.fields(&x);
        for &beta in &betas {
            for k in 0..model.dim() {
                let de = model.delta(&x, &fields, k);
                if de <= 0.0 || rng.random::<f64>() < (-beta * de).exp() {
                    model.flip(&mut x, &mut fields, k);
                }
            }
        }
        x
    }))
}

/// Path-integral simulated quantum annealing.
///
/// `trotter_slices` replicas of the classical system at inverse temperature
/// `beta_max` are coupled along imaginary time with
/// `J⊥ = -½ ln tanh(βΓ/P)` while the transverse field `Γ` falls linearly from
/// `gamma_max` to `gamma_min`. Each sweep does a single-spin pass over every
/// slice followed by a world-line pass that flips a variable in all slices at
/// once. Each read reports its lowest-energy slice. With `Γ = 0` the coupling
/// is infinite, only world-line moves survive and the sampler reduces to
/// classical Metropolis on one shared configuration.
pub fn sample_sqa(q: &QuboProblem, p: &AnnealParams) -> Result<SampleSet, SamplerError> {
    p.validate(true)?;
    let model = Compiled::new(q);
    let slices = p.trotter_slices;
    let beta = p.beta_max;
    let beta_slice = beta / slices as f64;
    let couplings: Vec<f64> = (0..p.sweeps)
        .map(|s| {
            let gamma = p.gamma_at(s);
            if gamma > 0.0 {
                -0.5 * (beta * gamma / slices as f64).tanh().ln()
            } else {
                f64::INFINITY
            }
        })
        .collect();

    Ok(run_reads(q, p, |r| {
        let dim = model.dim();
        let mut rng = seed::stream_rng(p.seed, r);
        let mut xs: Vec<Vec<u8>> = (0..slices).map(|_| random_bits(&mut rng, dim)).collect();
        let mut fields: Vec<Vec<f64>> = xs.iter().map(|x| model.fields(x)).collect();

        for &jperp in &couplings {
            if jperp.is_finite() {
                for t in 0..slices {
                    let (prev, next) = ((t + slices - 1) % slices, (t + 1) % slices);
                    for k in 0..dim {
                        let spin = 2.0 * xs[t][k] as f64 - 1.0;
                        let around =
                            (2.0 * xs[prev][k] as f64 - 1.0) + (2.0 * xs[next][k] as f64 - 1.0);
                        let cost = beta_slice * model.delta(&xs[t], &fields[t], k)
                            + 2.0 * jperp * spin * around;
                        if cost <= 0.0 || rng.random::<f64>() < (-cost).exp() {
                            model.flip(&mut xs[t], &mut fields[t], k);
                        }
                    }
                }
            } else {
                // Infinitely stiff imaginary-time coupling: align stray slices.
                for t in 1..slices {
                    for k in 0..dim {
                        if xs[t][k] != xs[0][k] {
                            model.flip(&mut xs[t], &mut fields[t], k);
                        }
                    }
                }
            }
            for k in 0..dim {
                let cost: f64 = beta_slice
                    * (0..slices)
                        .map(|t| model.delta(&xs[t], &fields[t], k))
                        .sum::<f64>();
                if cost <= 0.0 || rng.random::<f64>() < (-cost).exp() {
                    for t in 0..slices {
                        model.flip(&mut xs[t], &mut fields[t], k);
                    }
                }
            }
        }

        let mut best = 0;
        let mut best_energy = f64::INFINITY;
        for (t, x) in xs.iter().enumerate() {
            let e = q.energy_unchecked(x);
            if e < best_energy {
                best = t;
                best_energy = e;
            }
        }
        xs.swap_remove(best)
    }))
}

/// Lowest-energy record that decodes to a feasible assignment, with its index.
/// Ties go to the earliest record.
pub fn best_feasible(
    set: &SampleSet,
    q: &QuboProblem,
) -> Result<(BarAssignment, usize), SamplerError> {
    let mut best: Option<(BarAssignment, usize, f64)> = None;
    for (idx, rec) in set.records.iter().enumerate() {
        if best.as_ref().is_some_and(|(_, _, e)| rec.energy >= *e) {
            continue;
        }
        if let Ok(a) = q.decode(&rec.bitstring) {
            best = Some((a, idx, rec.energy));
        }
    }
    best.map(|(a, idx, _)| (a, idx))
        .ok_or(SamplerError::NotFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::dim_for;

    fn quick(reads: usize, sweeps: usize, seed: u64) -> AnnealParams {
        AnnealParams {
            reads,
            sweeps,
            seed,
            ..AnnealParams::default()
        }
    }

    #[test]
    fn schedules_hit_their_endpoints() {
        let p = quick(1, 100, 0);
        assert!((p.beta_at(0) - 0.1).abs() < 1e-12);
        assert!((p.beta_at(99) - 10.0).abs() < 1e-12);
        assert!((p.beta_at(49) - 1.0).abs() < 0.05);
        assert_eq!(p.gamma_at(0), 3.0);
        assert!((p.gamma_at(99) - 0.01).abs() < 1e-12);
        let lin = AnnealParams {
            interpolation: Interpolation::Linear,
            ..p
        };
        assert!((lin.beta_at(99) - 10.0).abs() < 1e-12);
        assert!((lin.beta_at(33) - (0.1 + 9.9 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn params_are_validated() {
        assert!(quick(0, 10, 0).validate(false).is_err());
        assert!(quick(1, 0, 0).validate(false).is_err());
        let inverted = AnnealParams {
            beta_min: 5.0,
            beta_max: 1.0,
            ..AnnealParams::default()
        };
        assert!(inverted.validate(false).is_err());
        let one_slice = AnnealParams {
            trotter_slices: 1,
            ..AnnealParams::default()
        };
        assert!(one_slice.validate(false).is_ok());
        assert!(one_slice.validate(true).is_err());
    }

    #[test]
    fn sa_reaches_ground_state_for_one_bar() {
        let q = QuboProblem::base(1, 2.0, 2.0).unwrap();
        let set = sample_sa(&q, &quick(100, 1000, 3)).unwrap();
        assert_eq!(set.num_reads(), 100);
        assert!(set.count_at_most(0.0) >= 99);
    }

    #[test]
    fn sqa_reaches_ground_state_for_one_bar() {
        let q = QuboProblem::base(1, 2.0, 2.0).unwrap();
        let set = sample_sqa(&q, &quick(100, 1000, 3)).unwrap();
        assert!(set.count_at_most(0.0) >= 95, "{}", set.count_at_most(0.0));
    }

    #[test]
    fn zero_problem_gives_constant_energy() {
        let mut q = QuboProblem::empty(2).unwrap();
        q.add_offset(1.25);
        let set = sample_sa(&q, &quick(20, 5, 0)).unwrap();
        assert!(set.records.iter().all(|r| r.energy == 1.25));
    }

    #[test]
    fn recorded_energies_match_recomputation() {
        let q = QuboProblem::base(3, 2.0, 2.0).unwrap();
        for set in [
            sample_sa(&q, &quick(30, 50, 1)).unwrap(),
            sample_sqa(&q, &quick(10, 50, 1)).unwrap(),
        ] {
            for rec in &set.records {
                assert_eq!(rec.bitstring.len(), dim_for(3));
                assert_eq!(rec.energy, q.energy(&rec.bitstring).unwrap());
                assert!(rec.occurrences >= 1);
            }
        }
    }

    #[test]
    fn same_seed_same_records() {
        let q = QuboProblem::base(2, 2.0, 2.0).unwrap();
        let p = quick(40, 30, 9);
        assert_eq!(
            sample_sa(&q, &p).unwrap().records,
            sample_sa(&q, &p).unwrap().records
        );
        assert_eq!(
            sample_sqa(&q, &p).unwrap().records,
            sample_sqa(&q, &p).unwrap().records
        );
        let other = quick(40, 30, 10);
        assert_ne!(
            sample_sa(&q, &p).unwrap().records,
            sample_sa(&q, &other).unwrap().records
        );
    }

    #[test]
    fn stiff_coupling_locks_slices_and_still_anneals() {
        let q = QuboProblem::base(1, 2.0, 2.0).unwrap();
        let p = AnnealParams {
            gamma_max: 0.0,
            gamma_min: 0.0,
            ..quick(100, 300, 4)
        };
        let set = sample_sqa(&q, &p).unwrap();
        assert!(set.count_at_most(0.0) >= 95);
    }

    fn record(bits: &str, q: &QuboProblem) -> Record {
        let bitstring: Bitstring = bits.parse().unwrap();
        Record {
            energy: q.energy(&bitstring).unwrap(),
            bitstring,
            occurrences: 1,
        }
    }

    #[test]
    fn best_feasible_selection() {
        let q = QuboProblem::base(1, 2.0, 2.0).unwrap();
        // Layout for N=1: x[0..4] directions, X[4..8] selectors.
        let infeasible = record("11001100", &q);
        let feasible_a = record("01000011", &q);
        let feasible_b = record("00101001", &q);
        let set = SampleSet {
            records: vec![infeasible.clone(), feasible_a, feasible_b],
            per_read_time: 0.0,
            total_time: 0.0,
        };
        let (a, idx) = best_feasible(&set, &q).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(a.start_goal, [(1, 0), (1, 1)]);

        let none = SampleSet {
            records: vec![infeasible],
            per_read_time: 0.0,
            total_time: 0.0,
        };
        assert_eq!(best_feasible(&none, &q), Err(SamplerError::NotFound));
    }

    #[test]
    fn best_feasible_prefers_lower_energy() {
        // A bias toward selector 7 makes the second feasible record strictly better.
        let mut q = QuboProblem::base(1, 2.0, 2.0).unwrap();
        q.add(7, 7, -0.5);
        let set = SampleSet {
            records: vec![
                record("01001100", &q),
                record("00011100", &q),
                record("10000011", &q),
            ],
            per_read_time: 0.0,
            total_time: 0.0,
        };
        // Linear-scan oracle.
        let expected = set
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| q.decode(&r.bitstring).is_ok())
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy))
            .map(|(i, _)| i)
            .unwrap();
        assert_eq!(best_feasible(&set, &q).unwrap().1, expected);
        assert_eq!(expected, 2);
    }

    #[test]
    fn sample_set_json_shape() {
        let q = QuboProblem::base(1, 2.0, 2.0).unwrap();
        let set = sample_sa(&q, &quick(3, 10, 0)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&set.to_json()).unwrap();
        assert!(v["records"][0]["bitstring"].as_str().unwrap().len() == 8);
        assert!(v["per_read_time"].is_number());
        assert!(v["total_time"].is_number());
        let back: SampleSet = serde_json::from_str(&set.to_json()).unwrap();
        assert_eq!(back, set);
    }
}
