//! Relay-selection policies and their CSI-overhead accounting.
//!
//! Four families of per-cluster policies pick the representative for a slot:
//! the ideal policy (argmax of the realized per-cluster SINR term using full
//! current-slot CSI of every candidate), the randomized policy, and the
//! predictive SAA policy, which maximizes an empirical mean of the one-step
//! posterior surrogate over a shared set of standardized scenarios. Each of
//! the latter two also comes in a constrained variant restricted to the
//! positions nearest the segment ends.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::cluster_value;
use crate::channel::{aggregate_power, ChannelParams, ClusterFieldSeries, SegmentShadowSeries};
use crate::error::Error;
use crate::linalg::psd_sqrt2;
use crate::prediction::{KalmanState, PosteriorPair};
use crate::scalar::Scalar;
use crate::topology::{ClusterId, NetworkPaths, Side};

/// A relay-selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Ideal,
    Random,
    RandomConstrained,
    Saa,
    SaaConstrained,
}

impl Policy {
    pub const ALL: [Policy; 5] =
        [Policy::Ideal, Policy::Random, Policy::RandomConstrained, Policy::Saa, Policy::SaaConstrained];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Ideal => "ideal",
            Policy::Random => "random",
            Policy::RandomConstrained => "random_constrained",
            Policy::Saa => "saa",
            Policy::SaaConstrained => "saa_constrained",
        }
    }

    pub fn constrained(&self) -> bool {
        matches!(self, Policy::RandomConstrained | Policy::SaaConstrained)
    }

    /// Policies that predict the next slot from past RSS (the proposed
    /// scheme) as opposed to estimating every candidate's current channel.
    pub fn is_predictive(&self) -> bool {
        matches!(self, Policy::Saa | Policy::SaaConstrained)
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "ideal" => Ok(Policy::Ideal),
            "random" => Ok(Policy::Random),
            "random_constrained" => Ok(Policy::RandomConstrained),
            "saa" => Ok(Policy::Saa),
            "saa_constrained" => Ok(Policy::SaaConstrained),
            other => Err(Error::Config(format!(
                "unknown policy '{other}' (expected ideal|random|random_constrained|saa|saa_constrained)"
            ))),
        }
    }
}

/// Candidate-set mode of Eq.-style constrained selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    Unconstrained,
    /// The four positions closest to either segment end (fewer if delta < 8).
    Constrained,
}

/// Candidate position indices a policy may select from.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub mode: CandidateMode,
    pub indices: Vec<usize>,
}

pub fn candidate_set(delta: usize, mode: CandidateMode) -> CandidateSet {
    let indices = match mode {
        CandidateMode::Unconstrained => (0..delta).collect(),
        CandidateMode::Constrained => {
            let mut set: Vec<usize> = (0..delta.min(4)).collect();
            for i in delta.saturating_sub(4)..delta {
                if !set.contains(&i) {
                    set.push(i);
                }
            }
            set.sort_unstable();
            set
        }
    };
    CandidateSet { mode, indices }
}

/// One standardized scenario: a unit-normal draw and a uniform phase per
/// cluster-free segment in the networkwide union, plus a unit-normal pair
/// and two uniform phases for the cluster segment. Its density is
/// independent of the candidate position and of the observed history, so the
/// same scenarios are reused by every cluster, candidate, and slot.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    /// (normal, phase) per unique cluster-free segment, aligned with the
    /// network's sorted segment union.
    pub segments: Vec<(T, T)>,
    /// Unit-normal 2-vector for the (incoming, outgoing) cluster pair.
    pub pair: [T; 2],
    pub phase_in: T,
    pub phase_out: T,
}

pub fn generate_scenarios<T: Scalar, R: Rng + ?Sized>(
    n_s: usize,
    union_len: usize,
    rng: &mut R,
) -> Vec<Scenario<T>> {
    (0..n_s)
        .map(|_| Scenario {
            segments: (0..union_len)
                .map(|_| (T::standard_normal(rng), T::standard_uniform(rng)))
                .collect(),
            pair: [T::standard_normal(rng), T::standard_normal(rng)],
            phase_in: T::standard_uniform(rng),
            phase_out: T::standard_uniform(rng),
        })
        .collect()
}

/// Selection produced by one policy for one cluster and slot.
#[derive(Debug, Clone)]
pub struct SelectionDecision<T> {
    pub cluster: ClusterId,
    pub slot: usize,
    pub chosen: usize,
    /// Per-candidate objective values, parallel to the candidate set, for
    /// value-driven policies.
    pub values: Option<Vec<T>>,
}

/// Precomputed per-cluster structure the policies evaluate against: for each
/// side and route, the indices of its segments in the networkwide union and
/// the deterministic path loss per candidate position.
#[derive(Debug, Clone)]
pub struct ClusterPlan<T> {
    pub cluster: ClusterId,
    pub cluster_index: usize,
    pub delta: usize,
    /// Route plans for the incoming side (source -> relay).
    pub incoming: Vec<RoutePlan<T>>,
    /// Route plans for the outgoing side (relay -> destination).
    pub outgoing: Vec<RoutePlan<T>>,
    /// Union indices of every segment in either side's route set.
    pub segment_indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RoutePlan<T> {
    /// Indices into the networkwide segment union, one per traversed segment.
    pub segments: Vec<usize>,
    /// Deterministic path loss (dB) per candidate position.
    pub path_loss: Vec<T>,
}

impl<T: Scalar> ClusterPlan<T> {
    pub fn build(
        network: &NetworkPaths<T>,
        cluster_index: usize,
        graph: &crate::topology::StreetGraph<T>,
        params: &ChannelParams<T>,
    ) -> crate::error::Result<Self> {
        let cp = &network.clusters[cluster_index];
        let delta = cp.placement.delta;
        let side_plan = |side: Side| -> crate::error::Result<Vec<RoutePlan<T>>> {
            cp.side(side)
                .routes
                .iter()
                .enumerate()
                .map(|(ri, route)| {
                    let segments = route
                        .segments
                        .iter()
                        .map(|s| network.union_index(*s).expect("route segment in union"))
                        .collect();
                    let path_loss = (0..delta)
                        .map(|cand| {
                            let full = cp.full_path(side, ri, cand);
                            crate::channel::path_loss_db(graph, &full, params)
                        })
                        .collect::<crate::error::Result<Vec<T>>>()?;
                    Ok(RoutePlan { segments, path_loss })
                })
                .collect()
        };
        let incoming = side_plan(Side::Incoming)?;
        let outgoing = side_plan(Side::Outgoing)?;
        let mut segment_indices: Vec<usize> = incoming
            .iter()
            .chain(outgoing.iter())
            .flat_map(|r| r.segments.iter().copied())
            .collect();
        segment_indices.sort_unstable();
        segment_indices.dedup();
        Ok(ClusterPlan {
            cluster: cp.placement.id,
            cluster_index,
            delta,
            incoming,
            outgoing,
            segment_indices,
        })
    }

    /// Realized aggregate power of one side at a candidate position and slot
    /// (coherent over routes; shared segments contribute the same draw to
    /// every route that traverses them).
    pub fn realized_power(
        &self,
        side: Side,
        candidate: usize,
        slot: usize,
        segments: &[SegmentShadowSeries<T>],
        field: &ClusterFieldSeries<T>,
    ) -> T {
        let (routes, z_pair, phase_pair) = match side {
            Side::Incoming => {
                (&self.incoming, field.z_in(slot, candidate), field.phase_in(slot, candidate))
            }
            Side::Outgoing => {
                (&self.outgoing, field.z_out(slot, candidate), field.phase_out(slot, candidate))
            }
        };
        let mut log_mags = Vec::with_capacity(routes.len());
        let mut phases = Vec::with_capacity(routes.len());
        for r in routes {
            let mut mag = r.path_loss[candidate] + z_pair;
            let mut ph = phase_pair;
            for &si in &r.segments {
                mag += segments[si].z(slot);
                ph += segments[si].phase(slot);
            }
            log_mags.push(mag);
            phases.push(ph);
        }
        aggregate_power(&log_mags, &phases)
    }

    /// Realized per-cluster SINR term at a candidate and slot.
    pub fn realized_value(
        &self,
        candidate: usize,
        slot: usize,
        segments: &[SegmentShadowSeries<T>],
        field: &ClusterFieldSeries<T>,
        params: &ChannelParams<T>,
    ) -> T {
        let f = self.realized_power(Side::Incoming, candidate, slot, segments, field);
        let g = self.realized_power(Side::Outgoing, candidate, slot, segments, field);
        cluster_value(f, g, params)
    }
}

/// Posterior inputs to the surrogate: the per-segment one-step predictors
/// (aligned with the segment union) and the candidate pair posterior.
pub struct SurrogateInputs<'a, T> {
    pub segment_states: &'a [KalmanState<T>],
    /// Symmetric PSD square root of the candidate pair posterior covariance.
    pub pair_sqrt: [[T; 2]; 2],
    pub pair_mu: [T; 2],
}

/// De-standardize one scenario through the posterior statistics and evaluate
/// the per-cluster SINR surrogate at a candidate position.
pub fn surrogate_value<T: Scalar>(
    plan: &ClusterPlan<T>,
    candidate: usize,
    scenario: &Scenario<T>,
    inputs: &SurrogateInputs<'_, T>,
    params: &ChannelParams<T>,
) -> T {
    let z_in = inputs.pair_sqrt[0][0] * scenario.pair[0]
        + inputs.pair_sqrt[0][1] * scenario.pair[1]
        + inputs.pair_mu[0];
    let z_out = inputs.pair_sqrt[1][0] * scenario.pair[0]
        + inputs.pair_sqrt[1][1] * scenario.pair[1]
        + inputs.pair_mu[1];
    let f = side_surrogate(&plan.incoming, candidate, z_in, scenario.phase_in, scenario, inputs);
    let g = side_surrogate(&plan.outgoing, candidate, z_out, scenario.phase_out, scenario, inputs);
    cluster_value(f, g, params)
}

fn side_surrogate<T: Scalar>(
    routes: &[RoutePlan<T>],
    candidate: usize,
    z_pair: T,
    phase_pair: T,
    scenario: &Scenario<T>,
    inputs: &SurrogateInputs<'_, T>,
) -> T {
    let mut log_mags = Vec::with_capacity(routes.len());
    let mut phases = Vec::with_capacity(routes.len());
    for r in routes {
        let mut mag = r.path_loss[candidate] + z_pair;
        let mut ph = phase_pair;
        for &si in &r.segments {
            let state = &inputs.segment_states[si];
            let (v, phi) = scenario.segments[si];
            mag += state.mu + state.var.sqrt() * v;
            ph += phi;
        }
        log_mags.push(mag);
        phases.push(ph);
    }
    aggregate_power(&log_mags, &phases)
}

/// SAA selection: average the surrogate over the shared scenario set per
/// candidate and take the argmax (ties resolve to the lowest index).
pub fn saa_select<T: Scalar>(
    plan: &ClusterPlan<T>,
    candidates: &CandidateSet,
    scenarios: &[Scenario<T>],
    segment_states: &[KalmanState<T>],
    pair_posteriors: &[PosteriorPair<T>],
    slot: usize,
    params: &ChannelParams<T>,
) -> SelectionDecision<T> {
    let inv_n = T::one() / T::of(scenarios.len() as f64);
    let mut values = Vec::with_capacity(candidates.indices.len());
    for &cand in &candidates.indices {
        let post = &pair_posteriors[cand];
        let inputs = SurrogateInputs {
            segment_states,
            pair_sqrt: psd_sqrt2(post.sigma),
            pair_mu: post.mu,
        };
        let mut acc = T::zero();
        for s in scenarios {
            acc += surrogate_value(plan, cand, s, &inputs, params);
        }
        values.push(acc * inv_n);
    }
    let chosen = candidates.indices[argmax(&values)];
    SelectionDecision { cluster: plan.cluster, slot, chosen, values: Some(values) }
}

/// Ideal selection: argmax of the realized per-cluster SINR term over the
/// candidate set using full current-slot CSI.
pub fn ideal_select<T: Scalar>(
    plan: &ClusterPlan<T>,
    candidates: &CandidateSet,
    slot: usize,
    segments: &[SegmentShadowSeries<T>],
    field: &ClusterFieldSeries<T>,
    params: &ChannelParams<T>,
) -> SelectionDecision<T> {
    let values: Vec<T> = candidates
        .indices
        .iter()
        .map(|&cand| plan.realized_value(cand, slot, segments, field, params))
        .collect();
    let chosen = candidates.indices[argmax(&values)];
    SelectionDecision { cluster: plan.cluster, slot, chosen, values: Some(values) }
}

/// Uniformly random selection from the candidate set.
pub fn random_select<T: Scalar, R: Rng + ?Sized>(
    cluster: ClusterId,
    candidates: &CandidateSet,
    slot: usize,
    rng: &mut R,
) -> SelectionDecision<T> {
    let idx = rng.random_range(0..candidates.indices.len());
    SelectionDecision { cluster, slot, chosen: candidates.indices[idx], values: None }
}

fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-slot channel-estimation count of a policy on a given network:
/// current-slot-CSI policies (ideal and randomized) measure both channels of
/// every candidate relay; the predictive scheme measures only the two
/// representative channels per cluster plus one RSS per unique cluster-free
/// segment.
pub fn csi_overhead<T: Scalar>(policy: Policy, network: &NetworkPaths<T>) -> usize {
    if policy.is_predictive() {
        2 * network.n_clusters() + network.segment_union.len()
    } else {
        network.clusters.iter().map(|c| 2 * c.placement.delta).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_set_constrained_delta_50() {
        let c = candidate_set(50, CandidateMode::Constrained);
        assert_eq!(c.indices, vec![0, 1, 2, 3, 46, 47, 48, 49]);
    }

    #[test]
    fn candidate_set_singleton() {
        assert_eq!(candidate_set(1, CandidateMode::Unconstrained).indices, vec![0]);
        assert_eq!(candidate_set(1, CandidateMode::Constrained).indices, vec![0]);
    }

    #[test]
    fn candidate_set_small_delta_overlaps() {
        let c = candidate_set(6, CandidateMode::Constrained);
        assert_eq!(c.indices, vec![0, 1, 2, 3, 4, 5]);
        let c = candidate_set(10, CandidateMode::Constrained);
        assert_eq!(c.indices, vec![0, 1, 2, 3, 6, 7, 8, 9]);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("bogus".parse::<Policy>().is_err());
    }

    #[test]
    fn scenarios_deterministic_and_standardized() {
        use rand::SeedableRng;
        let mut a = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut b = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let sa: Vec<Scenario<f64>> = generate_scenarios(4, 3, &mut a);
        let sb: Vec<Scenario<f64>> = generate_scenarios(4, 3, &mut b);
        for (x, y) in sa.iter().zip(&sb) {
            assert_eq!(x.segments, y.segments);
            assert_eq!(x.pair, y.pair);
        }
        // Moments of the normals and uniformity of the phases.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let scen: Vec<Scenario<f64>> = generate_scenarios(100_000, 1, &mut rng);
        let n = scen.len() as f64;
        let mean: f64 = scen.iter().map(|s| s.segments[0].0).sum::<f64>() / n;
        let var: f64 = scen.iter().map(|s| s.segments[0].0.powi(2)).sum::<f64>() / n - mean * mean;
        assert!(mean.abs() < 3.0 / n.sqrt() * 1.0);
        assert!((var - 1.0).abs() < 3.0 * (2.0f64 / n).sqrt());
        // Kolmogorov-Smirnov at the 1% level for the phases.
        let mut phases: Vec<f64> = scen.iter().map(|s| s.segments[0].1).collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d: f64 = 0.0;
        for (i, &p) in phases.iter().enumerate() {
            let ecdf_hi = (i + 1) as f64 / n;
            let ecdf_lo = i as f64 / n;
            d = d.max((ecdf_hi - p).abs()).max((p - ecdf_lo).abs());
        }
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn random_select_uniform_over_support() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let set = candidate_set(50, CandidateMode::Unconstrained);
        let draws = 100_000;
        let mut counts = vec![0usize; 50];
        for _ in 0..draws {
            let d: SelectionDecision<f64> = random_select(1, &set, 2, &mut rng);
            counts[d.chosen] += 1;
        }
        let expect = draws as f64 / 50.0;
        let sd = (draws as f64 * (1.0 / 50.0) * (49.0 / 50.0)).sqrt();
        for &c in &counts {
            assert!((c as f64 - expect).abs() < 3.0 * sd, "count {c}");
        }
        // Constrained support check.
        let set = candidate_set(50, CandidateMode::Constrained);
        for _ in 0..1000 {
            let d: SelectionDecision<f64> = random_select(1, &set, 2, &mut rng);
            assert!(set.indices.contains(&d.chosen));
        }
        // Singleton always picked.
        let set = candidate_set(1, CandidateMode::Unconstrained);
        let d: SelectionDecision<f64> = random_select(1, &set, 2, &mut rng);
        assert_eq!(d.chosen, 0);
    }
}
