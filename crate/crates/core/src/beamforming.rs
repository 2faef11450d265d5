//! Closed-form optimal amplify-and-forward beamforming across relay
//! clusters, maximizing destination SINR under a shared power budget.
//!
//! With one active representative per cluster, the networkwide optimum
//! decomposes into a sum of independent per-cluster terms driven by the
//! incoming and outgoing aggregate channel powers; the optimal weight vector
//! aligns the per-cluster phases and meets the power constraint with
//! equality.

use num_complex::Complex;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Complex aggregate channels of one cluster representative: the coherent
/// sums over all incoming and outgoing propagation paths.
#[derive(Debug, Clone, Copy)]
pub struct ClusterAggregates<T> {
    pub incoming: Complex<T>,
    pub outgoing: Complex<T>,
}

impl<T: Scalar> ClusterAggregates<T> {
    /// `F_r = |1^T f_r|^2`.
    pub fn incoming_power(&self) -> T {
        self.incoming.norm_sqr()
    }

    /// `G_r = |1^T g_r|^2`.
    pub fn outgoing_power(&self) -> T {
        self.outgoing.norm_sqr()
    }
}

/// Beamforming weight vector, one complex weight per cluster.
#[derive(Debug, Clone)]
pub struct BeamWeights<T> {
    pub w: Vec<Complex<T>>,
}

/// The per-cluster summand of the optimal networkwide SINR:
/// `P_C P_S F G / (P_S sigma_D^2 F + P_C sigma^2 G + sigma^2 sigma_D^2)`.
pub fn cluster_value<T: Scalar>(f_pow: T, g_pow: T, params: &ChannelParams<T>) -> T {
    let num = params.p_c * params.p_s * f_pow * g_pow;
    let den = params.p_s * params.sigma_d2 * f_pow
        + params.p_c * params.sigma2 * g_pow
        + params.sigma2 * params.sigma_d2;
    num / den
}

/// Optimal networkwide SINR and its per-cluster terms.
pub fn optimal_value<T: Scalar>(
    aggregates: &[ClusterAggregates<T>],
    params: &ChannelParams<T>,
) -> (T, Vec<T>) {
    let per: Vec<T> = aggregates
        .iter()
        .map(|a| cluster_value(a.incoming_power(), a.outgoing_power(), params))
        .collect();
    let mut total = T::zero();
    for v in &per {
        total += *v;
    }
    (total, per)
}

/// Optimal weight vector: `sqrt(P_C) D^{-1/2} v_max / ||v_max||`, where the
/// alignment vector carries, per cluster, the conjugated aggregate product
/// over the per-cluster denominator, whitened by `D^{1/2}`:
/// `v_r = sqrt(D_r) P_S (1^T g_r)* (1^T f_r)* / den_r`. Written out, the
/// physical weight is `w_r = c h_r* / den_r`, which conjugate-aligns every
/// cluster and meets the power constraint with equality. Degenerate all-zero
/// aggregates yield the zero vector (a blocked slot).
pub fn optimal_weights<T: Scalar>(
    aggregates: &[ClusterAggregates<T>],
    params: &ChannelParams<T>,
) -> BeamWeights<T> {
    let mut direction = Vec::with_capacity(aggregates.len());
    let mut power = T::zero();
    for a in aggregates {
        let f = a.incoming_power();
        let g = a.outgoing_power();
        let den = params.p_s * params.sigma_d2 * f
            + params.p_c * params.sigma2 * g
            + params.sigma2 * params.sigma_d2;
        let dir = (a.outgoing * a.incoming).conj() / den;
        power += dir.norm_sqr() * (params.p_s * f + params.sigma2);
        direction.push(dir);
    }
    if power == T::zero() {
        return BeamWeights { w: vec![Complex::new(T::zero(), T::zero()); aggregates.len()] };
    }
    let scale = (params.p_c / power).sqrt();
    BeamWeights { w: direction.into_iter().map(|d| d * scale).collect() }
}

/// Power actually drawn by a weight vector: `w^H D w` with
/// `D = P_S diag(F_r) + sigma^2 I`.
pub fn drawn_power<T: Scalar>(
    weights: &BeamWeights<T>,
    aggregates: &[ClusterAggregates<T>],
    params: &ChannelParams<T>,
) -> T {
    let mut acc = T::zero();
    for (w, a) in weights.w.iter().zip(aggregates) {
        acc += w.norm_sqr() * (params.p_s * a.incoming_power() + params.sigma2);
    }
    acc
}

/// SINR achieved by an arbitrary feasible weight vector:
/// `w^H R w / (w^H Q w + sigma_D^2)` with `R = P_S h h^H`,
/// `h_r = (1^T g_r)(1^T f_r)`, `Q = sigma^2 diag(G_r)`, where the stored
/// weights are the physical per-cluster multipliers (the optimization vector
/// stacks their conjugates, so the signal term is `P_S |sum_r w_r h_r|^2`).
/// Errors if the power constraint is violated beyond 1e-6 relative.
pub fn sinr<T: Scalar>(
    weights: &BeamWeights<T>,
    aggregates: &[ClusterAggregates<T>],
    params: &ChannelParams<T>,
) -> Result<T> {
    if weights.w.len() != aggregates.len() {
        return Err(Error::Validation("weight/aggregate length mismatch".into()));
    }
    let power = drawn_power(weights, aggregates, params);
    if power > params.p_c * (T::one() + T::of(1e-6)) {
        return Err(Error::Validation(format!(
            "infeasible weights: w^H D w = {power} exceeds the budget {}",
            params.p_c
        )));
    }
    let mut wh = Complex::new(T::zero(), T::zero());
    let mut interference = T::zero();
    for (w, a) in weights.w.iter().zip(aggregates) {
        let h = a.outgoing * a.incoming;
        wh += *w * h;
        interference += w.norm_sqr() * params.sigma2 * a.outgoing_power();
    }
    let signal = params.p_s * wh.norm_sqr();
    Ok(signal / (interference + params.sigma_d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn unit_params() -> ChannelParams<f64> {
        ChannelParams {
            alpha_l: 2.0,
            alpha_n: 2.0,
            delta_db: 10.0,
            eta2: 40.0,
            gamma: 15.0,
            beta_m: 10.0,
            sigma_xi2: 20.0,
            sigma2: 1.0,
            sigma_d2: 1.0,
            p_s: 1.0,
            p_c: 1.0,
            n_t: 2,
        }
    }

    fn agg(f: Complex<f64>, g: Complex<f64>) -> ClusterAggregates<f64> {
        ClusterAggregates { incoming: f, outgoing: g }
    }

    fn random_instance(rng: &mut ChaCha12Rng, n_c: usize) -> (Vec<ClusterAggregates<f64>>, ChannelParams<f64>) {
        let mut p = unit_params();
        p.p_s = rng.random_range(0.1..50.0);
        p.p_c = rng.random_range(0.1..50.0);
        p.sigma2 = rng.random_range(0.1..5.0);
        p.sigma_d2 = rng.random_range(0.1..5.0);
        let aggs = (0..n_c)
            .map(|_| {
                let mag_f: f64 = rng.random_range(0.01..3.0);
                let mag_g: f64 = rng.random_range(0.01..3.0);
                let ph_f: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let ph_g: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                agg(Complex::from_polar(mag_f, ph_f), Complex::from_polar(mag_g, ph_g))
            })
            .collect();
        (aggs, p)
    }

    #[test]
    fn unit_plugin_gives_one_third() {
        let p = unit_params();
        let aggs = [agg(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0))];
        let (v, per) = optimal_value(&aggs, &p);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(per.len(), 1);
    }

    #[test]
    fn dead_channel_contributes_zero() {
        let p = unit_params();
        let aggs = [
            agg(Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)),
            agg(Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)),
        ];
        let (v, per) = optimal_value(&aggs, &p);
        assert_eq!(per[0], 0.0);
        assert!((v - per[1]).abs() < 1e-15);
    }

    #[test]
    fn additivity_over_clusters() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (aggs, p) = random_instance(&mut rng, 3);
        let (v, _) = optimal_value(&aggs, &p);
        let mut sum = 0.0;
        for a in &aggs {
            sum += optimal_value(&[*a], &p).0;
        }
        assert!((v - sum).abs() < 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn single_cluster_weight_aligns_phases() {
        let p = unit_params();
        let f = Complex::from_polar(0.8, 1.1);
        let g = Complex::from_polar(1.3, 2.0);
        let w = optimal_weights(&[agg(f, g)], &p);
        let expected = -(1.1 + 2.0f64);
        let got = w.w[0].arg();
        let diff = (got - expected).rem_euclid(std::f64::consts::TAU);
        assert!(diff < 1e-9 || (std::f64::consts::TAU - diff) < 1e-9);
    }

    #[test]
    fn optimal_weights_meet_power_with_equality() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n_c = rng.random_range(1..5);
            let (aggs, p) = random_instance(&mut rng, n_c);
            let w = optimal_weights(&aggs, &p);
            let power = drawn_power(&w, &aggs, &p);
            assert!((power - p.p_c).abs() <= 1e-9 * p.p_c);
        }
    }

    #[test]
    fn optimal_weights_achieve_optimal_value() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..200 {
            let n_c = rng.random_range(1..6);
            let (aggs, p) = random_instance(&mut rng, n_c);
            let w = optimal_weights(&aggs, &p);
            let achieved = sinr(&w, &aggs, &p).unwrap();
            let (v, _) = optimal_value(&aggs, &p);
            assert!((achieved - v).abs() <= 1e-8 * v, "achieved {achieved} vs optimal {v}");
        }
    }

    #[test]
    fn common_phase_rotation_leaves_sinr_unchanged() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let (mut aggs, p) = random_instance(&mut rng, 3);
        let w = optimal_weights(&aggs, &p);
        let v0 = sinr(&w, &aggs, &p).unwrap();
        let rot = Complex::from_polar(1.0, 0.9);
        for a in &mut aggs {
            a.incoming *= rot;
        }
        let w = optimal_weights(&aggs, &p);
        let v1 = sinr(&w, &aggs, &p).unwrap();
        assert!((v0 - v1).abs() < 1e-9 * v0);
    }

    #[test]
    fn zero_weights_give_zero_sinr() {
        let p = unit_params();
        let aggs = [agg(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0))];
        let w = BeamWeights { w: vec![Complex::new(0.0, 0.0)] };
        assert_eq!(sinr(&w, &aggs, &p).unwrap(), 0.0);
    }

    #[test]
    fn all_zero_aggregates_give_zero_vector() {
        let p = unit_params();
        let aggs = [agg(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0))];
        let w = optimal_weights(&aggs, &p);
        assert_eq!(w.w[0], Complex::new(0.0, 0.0));
        let (v, _) = optimal_value(&aggs, &p);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn random_feasible_weights_never_beat_optimum() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let n_c = rng.random_range(1..5);
            let (aggs, p) = random_instance(&mut rng, n_c);
            let (v, _) = optimal_value(&aggs, &p);
            // Random direction scaled to a random fraction of the budget.
            let dir: Vec<Complex<f64>> = (0..n_c)
                .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut w = BeamWeights { w: dir };
            let power = drawn_power(&w, &aggs, &p);
            if power == 0.0 {
                continue;
            }
            let frac: f64 = rng.random_range(0.05..1.0);
            let scale = (frac * p.p_c / power).sqrt();
            for c in &mut w.w {
                *c *= scale;
            }
            let achieved = sinr(&w, &aggs, &p).unwrap();
            assert!(achieved <= v + 1e-9 * v.max(1.0), "random w beats optimum");
        }
    }

    #[test]
    fn infeasible_weights_rejected() {
        let p = unit_params();
        let aggs = [agg(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0))];
        let w = BeamWeights { w: vec![Complex::new(10.0, 0.0)] };
        assert!(sinr(&w, &aggs, &p).is_err());
    }

    #[test]
    fn relaxation_bounds_hold() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        for _ in 0..200 {
            let (aggs, p) = random_instance(&mut rng, 1);
            let f = aggs[0].incoming_power();
            let g = aggs[0].outgoing_power();
            let v = cluster_value(f, g, &p);
            assert!(v <= p.p_c * g / p.sigma_d2 * (1.0 + 1e-12) + 1e-300);
            assert!(v <= p.p_s * f / p.sigma2 * (1.0 + 1e-12) + 1e-300);
            // Monotone in F and G.
            assert!(cluster_value(f * 1.01, g, &p) >= v);
            assert!(cluster_value(f, g * 1.01, &p) >= v);
        }
    }
}
