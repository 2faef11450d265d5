//! Experiment orchestration: runs the two-stage beamforming/selection loop
//! over the configured time slots for every policy on a shared channel
//! realization (common random numbers), repeats over Monte Carlo trials in
//! parallel, and aggregates per-slot SINR, selection histograms, and
//! CSI-overhead counters.
//!
//! Determinism contract: a fixed master seed produces bit-identical results
//! at any parallelism degree. Per-trial RNG streams are derived by counter
//! from the master seed, and aggregation folds fixed-size trial chunks in
//! trial order.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channel::{ChannelParams, ChannelRealization, ClusterFieldSampler, SegmentShadowSeries};
use crate::config::FileConfig;
use crate::error::{Error, Result};
use crate::prediction::{gp_prepare, kalman_init, kalman_update, ClusterHistory, KalmanState, PosteriorPair};
use crate::scalar::Scalar;
use crate::selection::{
    candidate_set, csi_overhead, ideal_select, random_select, saa_select, CandidateMode,
    CandidateSet, ClusterPlan, Policy, Scenario,
};
use crate::topology::{build_network_paths, NetworkPaths, StreetGraph};

/// Fixed number of trials folded per aggregation chunk; chunk boundaries are
/// independent of the thread count, which keeps float sums bit-identical
/// across parallelism degrees.
const CHUNK: usize = 64;

/// A fully prepared experiment: validated topology, propagation structure,
/// per-cluster plans, and factorized field samplers.
pub struct Experiment<T: Scalar> {
    pub file: FileConfig,
    pub graph: StreetGraph<T>,
    pub network: NetworkPaths<T>,
    pub params: ChannelParams<T>,
    pub plans: Vec<ClusterPlan<T>>,
    samplers: Vec<ClusterFieldSampler<T>>,
}

/// Per-policy outcome of one trial.
#[derive(Debug, Clone)]
pub struct PolicyTrial<T> {
    pub policy: Policy,
    /// Linear networkwide SINR per slot (index `t-1`).
    pub sinr: Vec<T>,
    /// Selected position index per cluster per slot.
    pub selections: Vec<Vec<usize>>,
    /// Hash of the channel realization this policy was evaluated on.
    pub realization_hash: u64,
}

/// Outcome of one trial across all configured policies.
#[derive(Debug, Clone)]
pub struct TrialResult<T> {
    pub policies: Vec<PolicyTrial<T>>,
}

/// Aggregated experiment statistics.
#[derive(Debug, Clone)]
pub struct AggregateStats<T> {
    pub policies: Vec<Policy>,
    pub n_t: usize,
    pub trials: usize,
    pub seed: u64,
    pub average_in_db: bool,
    /// Mean SINR per slot in dB, `[policy][slot-1]`.
    pub per_slot_mean_db: Vec<Vec<T>>,
    /// Grand mean across slots and trials in dB, per policy.
    pub grand_mean_db: Vec<T>,
    /// Selection frequencies `[policy][cluster][slot-2][position]`; slot 1 is
    /// omitted because the initial representative is fixed.
    pub histograms: Vec<Vec<Vec<Vec<T>>>>,
    /// Per-slot channel-estimation count per policy.
    pub overhead_per_slot: Vec<usize>,
    /// Cluster ids and candidate counts, for labeling exports.
    pub cluster_ids: Vec<u32>,
    pub cluster_deltas: Vec<usize>,
}

impl<T: Scalar> Experiment<T> {
    pub fn new(file: FileConfig) -> Result<Self> {
        file.validate()?;
        let graph: StreetGraph<T> = file.graph()?;
        let network = build_network_paths(
            &graph,
            file.source(),
            file.destination(),
            &file.clusters(),
        )?;
        let params: ChannelParams<T> = file.channel_params();
        let plans = (0..network.clusters.len())
            .map(|ci| ClusterPlan::build(&network, ci, &graph, &params))
            .collect::<Result<Vec<_>>>()?;
        let samplers = network
            .clusters
            .iter()
            .map(|c| ClusterFieldSampler::new(c.placement.segment, &c.geometry, &params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Experiment { file, graph, network, params, plans, samplers })
    }

    fn seed(&self) -> u64 {
        self.file.experiment.seed
    }

    /// RNG for a reserved stream; streams 8k.. are per-trial.
    fn stream_rng(&self, stream: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed());
        rng.set_stream(stream);
        rng
    }

    /// Sample one networkwide channel realization.
    pub fn sample_realization(&self, rng: &mut ChaCha12Rng) -> ChannelRealization<T> {
        let segments = self
            .network
            .segment_union
            .iter()
            .map(|&seg| SegmentShadowSeries::sample(seg, &self.params, rng))
            .collect();
        let clusters = self.samplers.iter().map(|s| s.sample(rng)).collect();
        ChannelRealization { segments, clusters }
    }

    /// The experiment-wide scenario set (shared across trials unless
    /// `fresh_scenarios_per_trial` is set).
    pub fn shared_scenarios(&self) -> Vec<Scenario<T>> {
        let mut rng = self.stream_rng(0);
        crate::selection::generate_scenarios(
            self.file.experiment.scenarios,
            self.network.segment_union.len(),
            &mut rng,
        )
    }

    /// Run one full trial: sample a realization and evaluate every policy on
    /// it with common random numbers.
    pub fn run_trial(&self, trial: usize, shared_scenarios: &[Scenario<T>]) -> Result<TrialResult<T>> {
        let base = 8 * (trial as u64 + 1);
        let realization = self.sample_realization(&mut self.stream_rng(base));
        let fresh;
        let scenarios = if self.file.experiment.fresh_scenarios_per_trial {
            fresh = crate::selection::generate_scenarios(
                self.file.experiment.scenarios,
                self.network.segment_union.len(),
                &mut self.stream_rng(base + 4),
            );
            &fresh
        } else {
            shared_scenarios
        };
        let hash = realization_hash(&realization);
        let mut policies = Vec::with_capacity(self.file.experiment.policies.len());
        for &policy in &self.file.experiment.policies {
            let stream = match policy {
                Policy::Random => base + 2,
                Policy::RandomConstrained => base + 3,
                _ => base + 7, // unused by deterministic policies
            };
            let run = self.run_policy(policy, &realization, scenarios, &mut self.stream_rng(stream))?;
            debug_assert_eq!(run.realization_hash, hash);
            policies.push(run);
        }
        Ok(TrialResult { policies })
    }

    fn run_policy(
        &self,
        policy: Policy,
        realization: &ChannelRealization<T>,
        scenarios: &[Scenario<T>],
        rng: &mut ChaCha12Rng,
    ) -> Result<PolicyTrial<T>> {
        let n_c = self.plans.len();
        let n_t = self.params.n_t;
        let period = self.file.experiment.selection_period;
        let mode = if policy.constrained() { CandidateMode::Constrained } else { CandidateMode::Unconstrained };
        let sets: Vec<CandidateSet> =
            self.plans.iter().map(|p| candidate_set(p.delta, mode)).collect();

        // The same relay (the first position) is initially selected in every
        // cluster for all policies.
        let mut reps = vec![0usize; n_c];
        let mut sinr = Vec::with_capacity(n_t);
        let mut selections = vec![vec![0usize; n_t]; n_c];

        let predictive = policy.is_predictive();
        let mut kalman: Vec<KalmanState<T>> = if predictive {
            vec![kalman_init(&self.params); self.network.segment_union.len()]
        } else {
            Vec::new()
        };
        let mut histories: Vec<ClusterHistory<T>> = (0..n_c)
            .map(|_| ClusterHistory::new(self.file.window()))
            .collect();

        for t in 1..=n_t {
            // The ideal policy re-selects with current-slot CSI before
            // beamforming; everyone keeps the fixed initial relay at t = 1.
            if policy == Policy::Ideal && t >= 2 && (t - 2) % period == 0 {
                for (ci, plan) in self.plans.iter().enumerate() {
                    reps[ci] = ideal_select(
                        plan,
                        &sets[ci],
                        t,
                        &realization.segments,
                        &realization.clusters[ci],
                        &self.params,
                    )
                    .chosen;
                }
            }

            let mut v = T::zero();
            for (ci, plan) in self.plans.iter().enumerate() {
                selections[ci][t - 1] = reps[ci];
                v += plan.realized_value(
                    reps[ci],
                    t,
                    &realization.segments,
                    &realization.clusters[ci],
                    &self.params,
                );
            }
            sinr.push(v);

            if matches!(policy, Policy::Random | Policy::RandomConstrained)
                && t < n_t
                && (t - 1) % period == 0
            {
                for ci in 0..n_c {
                    reps[ci] =
                        random_select::<T, _>(self.plans[ci].cluster, &sets[ci], t + 1, rng).chosen;
                }
            }

            if predictive {
                // Absorb the slot-t RSS of every cluster-free segment and of
                // each cluster's current representative.
                for (si, state) in kalman.iter_mut().enumerate() {
                    *state = kalman_update(state, realization.segments[si].z(t), &self.params)?;
                }
                for (ci, hist) in histories.iter_mut().enumerate() {
                    hist.push(t, reps[ci], realization.clusters[ci].z_pair(t, reps[ci]));
                }
                if t < n_t && (t - 1) % period == 0 {
                    for (ci, plan) in self.plans.iter().enumerate() {
                        let geom = &self.network.clusters[ci].geometry;
                        let cond = gp_prepare(&histories[ci], geom, &self.params)?;
                        let posteriors: Vec<PosteriorPair<T>> =
                            (0..plan.delta).map(|c| cond.posterior(c)).collect();
                        reps[ci] = saa_select(
                            plan,
                            &sets[ci],
                            scenarios,
                            &kalman,
                            &posteriors,
                            t + 1,
                            &self.params,
                        )
                        .chosen;
                    }
                }
            }
        }

        Ok(PolicyTrial { policy, sinr, selections, realization_hash: realization_hash(realization) })
    }

    /// Run all trials (in parallel when configured) and aggregate.
    pub fn run_experiment(&self) -> Result<AggregateStats<T>> {
        let run = || self.run_all_trials();
        match self.file.experiment.parallelism {
            0 => run(),
            n => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
                .install(run),
        }
    }

    fn run_all_trials(&self) -> Result<AggregateStats<T>> {
        let shared = self.shared_scenarios();
        let trials = self.file.experiment.trials;
        let chunk_results: Result<Vec<Accumulator<T>>> = (0..trials.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * CHUNK;
                let hi = (lo + CHUNK).min(trials);
                let mut acc = Accumulator::new(self);
                for trial in lo..hi {
                    acc.absorb(&self.run_trial(trial, &shared)?);
                }
                Ok(acc)
            })
            .collect();
        let mut total = Accumulator::new(self);
        for acc in chunk_results? {
            total.merge(acc);
        }
        Ok(total.finish(self))
    }
}

fn realization_hash<T: Scalar>(realization: &ChannelRealization<T>) -> u64 {
    let mut h = DefaultHasher::new();
    for s in &realization.segments {
        s.segment.hash(&mut h);
        for v in s.beta.iter().chain(&s.xi).chain(&s.phi) {
            v.as_f64().to_bits().hash(&mut h);
        }
    }
    for c in &realization.clusters {
        for grid in [&c.beta_in, &c.beta_out, &c.xi_in, &c.xi_out, &c.phi_in, &c.phi_out] {
            for row in grid.iter() {
                for v in row {
                    v.as_f64().to_bits().hash(&mut h);
                }
            }
        }
    }
    h.finish()
}

struct Accumulator<T> {
    trials: usize,
    /// `[policy][slot]` sums of linear SINR.
    linear: Vec<Vec<T>>,
    /// `[policy][slot]` sums of dB SINR (for the dB-averaging convention).
    db: Vec<Vec<T>>,
    /// `[policy][cluster][slot-2][position]` selection counts.
    counts: Vec<Vec<Vec<Vec<u64>>>>,
}

impl<T: Scalar> Accumulator<T> {
    fn new(exp: &Experiment<T>) -> Self {
        let n_p = exp.file.experiment.policies.len();
        let n_t = exp.params.n_t;
        Accumulator {
            trials: 0,
            linear: vec![vec![T::zero(); n_t]; n_p],
            db: vec![vec![T::zero(); n_t]; n_p],
            counts: (0..n_p)
                .map(|_| {
                    exp.plans
                        .iter()
                        .map(|p| vec![vec![0u64; p.delta]; n_t.saturating_sub(1)])
                        .collect()
                })
                .collect(),
        }
    }

    fn absorb(&mut self, trial: &TrialResult<T>) {
        self.trials += 1;
        for (pi, run) in trial.policies.iter().enumerate() {
            for (t, v) in run.sinr.iter().enumerate() {
                self.linear[pi][t] += *v;
                let floored = v.max(T::min_positive_value());
                self.db[pi][t] += T::of(10.0) * floored.log10();
            }
            for (ci, sel) in run.selections.iter().enumerate() {
                for (t, &pos) in sel.iter().enumerate().skip(1) {
                    self.counts[pi][ci][t - 1][pos] += 1;
                }
            }
        }
    }

    fn merge(&mut self, other: Accumulator<T>) {
        self.trials += other.trials;
        for (a, b) in self.linear.iter_mut().zip(other.linear) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.db.iter_mut().zip(other.db) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for (c, d) in a.iter_mut().zip(b) {
                for (e, f) in c.iter_mut().zip(d) {
                    for (x, y) in e.iter_mut().zip(f) {
                        *x += y;
                    }
                }
            }
        }
    }

    fn finish(self, exp: &Experiment<T>) -> AggregateStats<T> {
        let n = T::of(self.trials as f64);
        let ten = T::of(10.0);
        let average_in_db = exp.file.experiment.average_in_db;
        let per_slot_mean_db: Vec<Vec<T>> = self
            .linear
            .iter()
            .zip(&self.db)
            .map(|(lin, db)| {
                lin.iter()
                    .zip(db)
                    .map(|(l, d)| {
                        if average_in_db {
                            *d / n
                        } else {
                            ten * (*l / n).log10()
                        }
                    })
                    .collect()
            })
            .collect();
        let grand_mean_db: Vec<T> = self
            .linear
            .iter()
            .zip(&self.db)
            .map(|(lin, db)| {
                let slots = T::of(lin.len() as f64);
                if average_in_db {
                    let mut acc = T::zero();
                    for d in db {
                        acc += *d;
                    }
                    acc / (n * slots)
                } else {
                    let mut acc = T::zero();
                    for l in lin {
                        acc += *l;
                    }
                    ten * (acc / (n * slots)).log10()
                }
            })
            .collect();
        let histograms: Vec<Vec<Vec<Vec<T>>>> = self
            .counts
            .iter()
            .map(|per_policy| {
                per_policy
                    .iter()
                    .map(|per_cluster| {
                        per_cluster
                            .iter()
                            .map(|per_slot| per_slot.iter().map(|&c| T::of(c as f64) / n).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        AggregateStats {
            policies: exp.file.experiment.policies.clone(),
            n_t: exp.params.n_t,
            trials: self.trials,
            seed: exp.seed(),
            average_in_db,
            per_slot_mean_db,
            grand_mean_db,
            histograms,
            overhead_per_slot: exp
                .file
                .experiment
                .policies
                .iter()
                .map(|&p| csi_overhead(p, &exp.network))
                .collect(),
            cluster_ids: exp.plans.iter().map(|p| p.cluster).collect(),
            cluster_deltas: exp.plans.iter().map(|p| p.delta).collect(),
        }
    }
}

/// Write the aggregate statistics: a per-slot SINR CSV, one selection
/// histogram CSV per policy, and a JSON summary embedding the full config.
/// File names are stamped with the seed and a short config hash.
pub fn export<T: Scalar>(
    stats: &AggregateStats<T>,
    file: &FileConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let stamp = format!("{}_s{}", file.short_hash(), stats.seed);
    let mut written = Vec::new();

    let sinr_path = out_dir.join(format!("sinr_{stamp}.csv"));
    let mut sinr = String::from("slot,policy,mean_sinr_db\n");
    for t in 0..stats.n_t {
        for (pi, policy) in stats.policies.iter().enumerate() {
            sinr.push_str(&format!("{},{},{}\n", t + 1, policy, stats.per_slot_mean_db[pi][t].as_f64()));
        }
    }
    std::fs::write(&sinr_path, sinr)?;
    written.push(sinr_path);

    for (pi, policy) in stats.policies.iter().enumerate() {
        let path = out_dir.join(format!("hist_{policy}_{stamp}.csv"));
        let mut text = String::from("cluster,slot,position,fraction\n");
        for (ci, per_cluster) in stats.histograms[pi].iter().enumerate() {
            for (ti, per_slot) in per_cluster.iter().enumerate() {
                for (pos, frac) in per_slot.iter().enumerate() {
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        stats.cluster_ids[ci],
                        ti + 2,
                        pos + 1,
                        frac.as_f64()
                    ));
                }
            }
        }
        std::fs::write(&path, text)?;
        written.push(path);
    }

    let summary_path = out_dir.join(format!("summary_{stamp}.json"));
    let mut grand = serde_json::Map::new();
    let mut overhead = serde_json::Map::new();
    for (pi, policy) in stats.policies.iter().enumerate() {
        grand.insert(policy.to_string(), serde_json::json!(stats.grand_mean_db[pi].as_f64()));
        overhead.insert(policy.to_string(), serde_json::json!(stats.overhead_per_slot[pi]));
    }
    let summary = serde_json::json!({
        "seed": stats.seed,
        "config_hash": file.short_hash(),
        "trials": stats.trials,
        "n_t": stats.n_t,
        "average_in_db": stats.average_in_db,
        "grand_mean_sinr_db": grand,
        "csi_overhead_per_slot": overhead,
        "outputs": written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "config": serde_json::to_value(file)?,
    });
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    written.push(summary_path);
    Ok(written)
}
