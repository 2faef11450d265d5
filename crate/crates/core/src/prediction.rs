//! One-step-ahead prediction of the combined log-channel terms.
//!
//! Cluster-free segments evolve as an AR(1) shadowing process observed
//! through white multipath noise, so their one-step predictive mean and
//! variance follow a scalar Kalman recursion. The cluster segment's
//! incoming/outgoing pair at a candidate position is predicted by Gaussian
//! process regression against the pairs measured at the previously selected
//! representatives, optionally windowed to the most recent slots.

use std::collections::VecDeque;

use crate::channel::{pair_cov, ChannelParams};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::topology::ClusterGeometry;

/// One-step-ahead predictive state of a cluster-free segment.
#[derive(Debug, Clone, Copy)]
pub struct KalmanState<T> {
    /// Predictive mean of `z(t+1)` given measurements up to `t`.
    pub mu: T,
    /// Predictive variance.
    pub var: T,
    /// Gain used by the latest update; `None` before the first measurement.
    pub gain: Option<T>,
    /// Number of measurements absorbed so far.
    pub t: usize,
}

/// Initial predictive state before any measurement: mean zero, variance
/// `eta2 + sigma_xi2`.
pub fn kalman_init<T: Scalar>(params: &ChannelParams<T>) -> KalmanState<T> {
    KalmanState { mu: T::zero(), var: params.eta2 + params.sigma_xi2, gain: None, t: 0 }
}

/// Absorb the slot-`t+1` measurement and return the state predicting `t+2`.
pub fn kalman_update<T: Scalar>(
    state: &KalmanState<T>,
    z: T,
    params: &ChannelParams<T>,
) -> Result<KalmanState<T>> {
    if !z.is_finite() {
        return Err(Error::Numerical("non-finite channel measurement".into()));
    }
    let kappa = params.kappa();
    let gain = (state.var - params.sigma_xi2) / state.var;
    let mu = kappa * (T::one() - gain) * state.mu + kappa * gain * z;
    let var = (T::one() + kappa * kappa * gain) * params.sigma_xi2
        + (T::one() - kappa * kappa) * params.eta2;
    Ok(KalmanState { mu, var, gain: Some(gain), t: state.t + 1 })
}

/// Measurements of one cluster's previously selected representatives.
#[derive(Debug, Clone)]
pub struct ClusterHistory<T> {
    entries: VecDeque<HistoryEntry<T>>,
    /// Conditioning window in slots; `None` keeps the full history.
    window: Option<usize>,
    /// Latest absorbed slot.
    last_slot: usize,
}

#[derive(Debug, Clone, Copy)]
struct HistoryEntry<T> {
    slot: usize,
    position: usize,
    pair: [T; 2],
}

impl<T: Scalar> ClusterHistory<T> {
    pub fn new(window: Option<usize>) -> Self {
        ClusterHistory { entries: VecDeque::new(), window, last_slot: 0 }
    }

    /// Record the measured (incoming, outgoing) pair of the representative
    /// selected at `slot`. Slots must arrive in order, one entry per slot.
    pub fn push(&mut self, slot: usize, position: usize, pair: [T; 2]) {
        debug_assert!(slot > self.last_slot || self.entries.is_empty());
        self.entries.push_back(HistoryEntry { slot, position, pair });
        self.last_slot = slot;
        if let Some(w) = self.window {
            while self.entries.len() > w {
                self.entries.pop_front();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_slot(&self) -> usize {
        self.last_slot
    }
}

/// Posterior mean and covariance of the (incoming, outgoing) pair at one
/// candidate position for the next slot.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorPair<T> {
    pub mu: [T; 2],
    pub sigma: [[T; 2]; 2],
}

/// Prior pair covariance at any single position and slot (Eq. form:
/// diagonal `eta2 + sigma_xi2`, off-diagonal `eta2 e^{-d_max/beta}`).
pub fn prior_pair<T: Scalar>(geom: &ClusterGeometry<T>, params: &ChannelParams<T>) -> [[T; 2]; 2] {
    let off = params.eta2 * (-geom.d_max / params.beta_m).exp();
    [[params.eta2 + params.sigma_xi2, off], [off, params.eta2 + params.sigma_xi2]]
}

/// Factorized conditioner for one cluster at one slot: the observation
/// covariance is factored once and reused for every candidate position.
pub struct GpConditioner<'a, T: Scalar> {
    geom: &'a ClusterGeometry<T>,
    params: &'a ChannelParams<T>,
    entries: Vec<HistoryEntry<T>>,
    /// Solved `Sigma^{-1} m`, length `2w`.
    weights: Vec<T>,
    factor: Option<Cholesky<T>>,
    /// Slot being predicted.
    target_slot: usize,
}

/// Build the conditioner predicting `history.last_slot() + 1`.
pub fn gp_prepare<'a, T: Scalar>(
    history: &ClusterHistory<T>,
    geom: &'a ClusterGeometry<T>,
    params: &'a ChannelParams<T>,
) -> Result<GpConditioner<'a, T>> {
    let entries: Vec<HistoryEntry<T>> = history.entries.iter().copied().collect();
    let target_slot = history.last_slot + 1;
    if entries.is_empty() {
        return Ok(GpConditioner { geom, params, entries, weights: Vec::new(), factor: None, target_slot });
    }
    let sigma = observation_cov(&entries, geom, params);
    let jitter = T::of(1e-9) * (params.eta2 + params.sigma_xi2);
    let factor = Cholesky::with_jitter(&sigma, jitter)?;
    let mut m = Vec::with_capacity(2 * entries.len());
    for e in &entries {
        m.push(e.pair[0]);
        m.push(e.pair[1]);
    }
    let weights = factor.solve(&m);
    Ok(GpConditioner { geom, params, entries, weights, factor: Some(factor), target_slot })
}

impl<T: Scalar> GpConditioner<'_, T> {
    /// Posterior of the pair at `candidate` for the target slot.
    pub fn posterior(&self, candidate: usize) -> PosteriorPair<T> {
        let prior = prior_pair(self.geom, self.params);
        let Some(factor) = &self.factor else {
            return PosteriorPair { mu: [T::zero(); 2], sigma: prior };
        };
        let cross = self.cross_cov(candidate);
        // mu = cross^T Sigma^{-1} m ; Sigma_post = Kbar - cross^T Sigma^{-1} cross
        let mut mu = [T::zero(); 2];
        for c in 0..2 {
            let mut acc = T::zero();
            for r in 0..cross.rows() {
                acc += cross[(r, c)] * self.weights[r];
            }
            mu[c] = acc;
        }
        let solved = factor.solve_matrix(&cross);
        let mut sigma = prior;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = T::zero();
                for r in 0..cross.rows() {
                    acc += cross[(r, i)] * solved[(r, j)];
                }
                sigma[i][j] -= acc;
            }
        }
        // Exact symmetry despite roundoff.
        let od = (sigma[0][1] + sigma[1][0]) / T::of(2.0);
        sigma[0][1] = od;
        sigma[1][0] = od;
        PosteriorPair { mu, sigma }
    }

    /// Cross covariance between the observed pairs and the target pair at a
    /// candidate position. No multipath term appears: the target lies one
    /// slot ahead of every observation and multipath is white in time.
    fn cross_cov(&self, candidate: usize) -> Matrix<T> {
        let w = self.entries.len();
        let mut m = Matrix::zeros(2 * w, 2);
        for (i, e) in self.entries.iter().enumerate() {
            let lag = T::of((self.target_slot - e.slot) as f64);
            let decay = (-lag / self.params.gamma).exp();
            let block = pair_cov_between(self.geom, e.position, candidate, self.params);
            for r in 0..2 {
                for c in 0..2 {
                    m[(2 * i + r, c)] = decay * block[r][c];
                }
            }
        }
        m
    }
}

/// Covariance of the stacked observation vector (2 entries per history slot).
fn observation_cov<T: Scalar>(
    entries: &[HistoryEntry<T>],
    geom: &ClusterGeometry<T>,
    params: &ChannelParams<T>,
) -> Matrix<T> {
    let w = entries.len();
    Matrix::from_fn(2 * w, 2 * w, |r, c| {
        let (i, ri) = (r / 2, r % 2);
        let (j, rj) = (c / 2, c % 2);
        let lag = T::of((entries[i].slot as f64 - entries[j].slot as f64).abs());
        let decay = (-lag / params.gamma).exp();
        let block = pair_cov_between(geom, entries[i].position, entries[j].position, params);
        let mut v = decay * block[ri][rj];
        if r == c {
            v += params.sigma_xi2;
        }
        v
    })
}

/// 2x2 pair covariance between two candidate positions (shadowing only).
fn pair_cov_between<T: Scalar>(
    geom: &ClusterGeometry<T>,
    i: usize,
    j: usize,
    params: &ChannelParams<T>,
) -> [[T; 2]; 2] {
    pair_cov(geom, i, j, params)
}

/// Direct (non-incremental) conditioning of one candidate.
pub fn gp_condition<T: Scalar>(
    history: &ClusterHistory<T>,
    candidate: usize,
    geom: &ClusterGeometry<T>,
    params: &ChannelParams<T>,
) -> Result<PosteriorPair<T>> {
    Ok(gp_prepare(history, geom, params)?.posterior(candidate))
}

/// Incrementally maintained inverse of the observation covariance, updated
/// by the matrix inversion lemma in O(w^2) per slot instead of refactoring.
pub struct IncrementalGp<T> {
    entries: Vec<HistoryEntry<T>>,
    inv: Matrix<T>,
    window: Option<usize>,
    last_slot: usize,
}

impl<T: Scalar> IncrementalGp<T> {
    pub fn new(window: Option<usize>) -> Self {
        IncrementalGp { entries: Vec::new(), inv: Matrix::zeros(0, 0), window, last_slot: 0 }
    }

    /// Absorb the pair measured at `slot`, growing the cached inverse by a
    /// 2x2 block (and dropping the oldest block when the window overflows).
    pub fn push(
        &mut self,
        slot: usize,
        position: usize,
        pair: [T; 2],
        geom: &ClusterGeometry<T>,
        params: &ChannelParams<T>,
    ) -> Result<()> {
        let entry = HistoryEntry { slot, position, pair };
        let w = self.entries.len();
        if w == 0 {
            let block = diag_block(&entry, geom, params);
            self.inv = invert2_as_matrix(block)?;
            self.entries.push(entry);
            self.last_slot = slot;
        } else {
            // b: cross covariance of existing observations with the new pair.
            let mut b = Matrix::zeros(2 * w, 2);
            for (i, e) in self.entries.iter().enumerate() {
                let lag = T::of((entry.slot - e.slot) as f64);
                let decay = (-lag / params.gamma).exp();
                let block = pair_cov_between(geom, e.position, entry.position, params);
                for r in 0..2 {
                    for c in 0..2 {
                        b[(2 * i + r, c)] = decay * block[r][c];
                    }
                }
            }
            let d = diag_block(&entry, geom, params);
            // u = Sigma^{-1} b ; schur = d - b^T u
            let u = mat_mul(&self.inv, &b);
            let mut schur = [[T::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = d[i][j];
                    for r in 0..2 * w {
                        acc -= b[(r, i)] * u[(r, j)];
                    }
                    schur[i][j] = acc;
                }
            }
            let s_inv = invert2(schur)?;
            let n = 2 * w + 2;
            let mut next = Matrix::zeros(n, n);
            // Top-left: Sigma^{-1} + u s_inv u^T
            for r in 0..2 * w {
                for c in 0..2 * w {
                    let mut acc = self.inv[(r, c)];
                    for i in 0..2 {
                        for j in 0..2 {
                            acc += u[(r, i)] * s_inv[i][j] * u[(c, j)];
                        }
                    }
                    next[(r, c)] = acc;
                }
            }
            // Off blocks: -u s_inv and its transpose; bottom-right: s_inv.
            for r in 0..2 * w {
                for j in 0..2 {
                    let mut acc = T::zero();
                    for i in 0..2 {
                        acc += u[(r, i)] * s_inv[i][j];
                    }
                    next[(r, 2 * w + j)] = -acc;
                    next[(2 * w + j, r)] = -acc;
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    next[(2 * w + i, 2 * w + j)] = s_inv[i][j];
                }
            }
            self.inv = next;
            self.entries.push(entry);
            self.last_slot = slot;
        }
        if let Some(wmax) = self.window {
            while self.entries.len() > wmax {
                self.drop_oldest()?;
            }
        }
        Ok(())
    }

    /// Remove the oldest 2x2 block from the cached inverse: with
    /// `M^{-1} = [[E, F],[F^T, G]]`, the inverse of the trailing block of `M`
    /// is `G - F^T E^{-1} F`.
    fn drop_oldest(&mut self) -> Result<()> {
        let n = self.inv.rows();
        let m = n - 2;
        let mut e = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] = self.inv[(i, j)];
            }
        }
        let e_inv = invert2(e)?;
        let mut next = Matrix::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                let mut acc = self.inv[(2 + r, 2 + c)];
                for i in 0..2 {
                    for j in 0..2 {
                        acc -= self.inv[(2 + r, i)] * e_inv[i][j] * self.inv[(j, 2 + c)];
                    }
                }
                next[(r, c)] = acc;
            }
        }
        self.inv = next;
        self.entries.remove(0);
        Ok(())
    }

    /// Posterior at a candidate for slot `last_slot + 1`; identical to the
    /// direct solve within numerical tolerance.
    pub fn posterior(
        &self,
        candidate: usize,
        geom: &ClusterGeometry<T>,
        params: &ChannelParams<T>,
    ) -> PosteriorPair<T> {
        let prior = prior_pair(geom, params);
        let w = self.entries.len();
        if w == 0 {
            return PosteriorPair { mu: [T::zero(); 2], sigma: prior };
        }
        let target_slot = self.last_slot + 1;
        let mut cross = Matrix::zeros(2 * w, 2);
        let mut m = Vec::with_capacity(2 * w);
        for (i, e) in self.entries.iter().enumerate() {
            let lag = T::of((target_slot - e.slot) as f64);
            let decay = (-lag / params.gamma).exp();
            let block = pair_cov_between(geom, e.position, candidate, params);
            for r in 0..2 {
                for c in 0..2 {
                    cross[(2 * i + r, c)] = decay * block[r][c];
                }
            }
            m.push(e.pair[0]);
            m.push(e.pair[1]);
        }
        let inv_cross = mat_mul(&self.inv, &cross);
        // mu = cross^T (Sigma^{-1} m)
        let weights: Vec<T> = (0..2 * w).map(|r| dot_row(&self.inv, r, &m)).collect();
        let mut mu = [T::zero(); 2];
        for c in 0..2 {
            let mut acc = T::zero();
            for r in 0..2 * w {
                acc += cross[(r, c)] * weights[r];
            }
            mu[c] = acc;
        }
        let mut sigma = prior;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = T::zero();
                for r in 0..2 * w {
                    acc += cross[(r, i)] * inv_cross[(r, j)];
                }
                sigma[i][j] -= acc;
            }
        }
        let od = (sigma[0][1] + sigma[1][0]) / T::of(2.0);
        sigma[0][1] = od;
        sigma[1][0] = od;
        PosteriorPair { mu, sigma }
    }
}

fn diag_block<T: Scalar>(
    entry: &HistoryEntry<T>,
    geom: &ClusterGeometry<T>,
    params: &ChannelParams<T>,
) -> [[T; 2]; 2] {
    let mut block = pair_cov_between(geom, entry.position, entry.position, params);
    block[0][0] += params.sigma_xi2;
    block[1][1] += params.sigma_xi2;
    block
}

fn invert2<T: Scalar>(m: [[T; 2]; 2]) -> Result<[[T; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= T::epsilon() * (m[0][0].abs() + m[1][1].abs()) {
        return Err(Error::Numerical("singular 2x2 block in incremental update".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn invert2_as_matrix<T: Scalar>(m: [[T; 2]; 2]) -> Result<Matrix<T>> {
    let inv = invert2(m)?;
    Ok(Matrix::from_fn(2, 2, |i, j| inv[i][j]))
}

fn mat_mul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(a.cols(), b.rows());
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let av = a[(i, k)];
            if av == T::zero() {
                continue;
            }
            for j in 0..b.cols() {
                let add = av * b[(k, j)];
                let cur = out[(i, j)];
                out[(i, j)] = cur + add;
            }
        }
    }
    out
}

fn dot_row<T: Scalar>(m: &Matrix<T>, row: usize, v: &[T]) -> T {
    let mut acc = T::zero();
    for (c, x) in v.iter().enumerate() {
        acc += m[(row, c)] * *x;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::dbm_to_watt;

    fn params() -> ChannelParams<f64> {
        ChannelParams {
            alpha_l: 2.1,
            alpha_n: 2.1,
            delta_db: 10.0,
            eta2: 40.0,
            gamma: 15.0,
            beta_m: 10.0,
            sigma_xi2: 20.0,
            sigma2: 1.0,
            sigma_d2: 1.0,
            p_s: dbm_to_watt(80.0),
            p_c: dbm_to_watt(100.0),
            n_t: 10,
        }
    }

    fn geom(delta: usize) -> ClusterGeometry<f64> {
        let offsets = crate::topology::relay_positions(100.0, delta).unwrap();
        ClusterGeometry {
            d_in: offsets.clone(),
            d_out: offsets.iter().map(|o| 100.0 - o).collect(),
            d_max: offsets[delta - 1] - offsets[0],
            d_full: 100.0,
            offsets,
        }
    }

    #[test]
    fn kalman_init_values() {
        let s = kalman_init(&params());
        assert_eq!(s.mu, 0.0);
        assert!((s.var - 60.0).abs() < 1e-12);
        assert!(s.gain.is_none());
        let mut p = params();
        p.eta2 = 1.0;
        p.sigma_xi2 = 1e-12; // positive by contract; the limit case
        let s = kalman_init(&p);
        assert!((s.var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kalman_noiseless_limit() {
        let mut p = params();
        p.sigma_xi2 = 1e-15;
        let s = kalman_init(&p);
        let s = kalman_update(&s, 3.7, &p).unwrap();
        assert!((s.gain.unwrap() - 1.0).abs() < 1e-12);
        assert!((s.mu - p.kappa() * 3.7).abs() < 1e-9);
    }

    #[test]
    fn kalman_rejects_non_finite() {
        let p = params();
        let s = kalman_init(&p);
        assert!(kalman_update(&s, f64::NAN, &p).is_err());
    }

    #[test]
    fn kalman_variance_is_measurement_independent() {
        let p = params();
        let mut a = kalman_init(&p);
        let mut b = kalman_init(&p);
        for t in 0..8 {
            a = kalman_update(&a, (t as f64) * 3.1 - 5.0, &p).unwrap();
            b = kalman_update(&b, -(t as f64) * 7.7 + 2.0, &p).unwrap();
            assert_eq!(a.var, b.var);
        }
    }

    #[test]
    fn kalman_variance_bounds() {
        let p = params();
        let kappa = p.kappa();
        let lo = p.sigma_xi2 + (1.0 - kappa * kappa) * p.eta2;
        let hi = p.sigma_xi2 + p.eta2;
        let mut s = kalman_init(&p);
        for t in 0..50 {
            s = kalman_update(&s, (t as f64).sin() * 8.0, &p).unwrap();
            assert!(s.var >= lo - 1e-12 && s.var <= hi + 1e-12);
        }
    }

    #[test]
    fn kalman_variance_converges_to_fixed_point() {
        let p = params();
        let mut s = kalman_init(&p);
        for _ in 0..500 {
            s = kalman_update(&s, 1.0, &p).unwrap();
        }
        let settled = s.var;
        s = kalman_update(&s, -3.0, &p).unwrap();
        assert!((s.var - settled).abs() < 1e-10);
        // The fixed point satisfies the update map applied to itself.
        let kappa = p.kappa();
        let gain = (settled - p.sigma_xi2) / settled;
        let mapped = (1.0 + kappa * kappa * gain) * p.sigma_xi2 + (1.0 - kappa * kappa) * p.eta2;
        assert!((mapped - settled).abs() < 1e-10);
    }

    #[test]
    fn gp_empty_history_returns_prior() {
        let p = params();
        let g = geom(4);
        let h = ClusterHistory::<f64>::new(Some(20));
        let post = gp_condition(&h, 2, &g, &p).unwrap();
        assert_eq!(post.mu, [0.0, 0.0]);
        let prior = prior_pair(&g, &p);
        assert_eq!(post.sigma, prior);
        assert!((prior[0][0] - 60.0).abs() < 1e-12);
        let expected_off = 40.0 * (-(g.d_max) / 10.0f64).exp();
        assert!((prior[0][1] - expected_off).abs() < 1e-12);
    }

    #[test]
    fn gp_posterior_variance_never_exceeds_prior() {
        let p = params();
        let g = geom(5);
        let mut h = ClusterHistory::new(Some(20));
        let mut rng_state = 123u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64 - 1.0) * 10.0
        };
        for slot in 1..=10 {
            let pos = (slot * 3) % 5;
            h.push(slot, pos, [next(), next()]);
            let cond = gp_prepare(&h, &g, &p).unwrap();
            for cand in 0..5 {
                let post = cond.posterior(cand);
                assert!(post.sigma[0][0] <= 60.0 + 1e-9);
                assert!(post.sigma[1][1] <= 60.0 + 1e-9);
                assert!(post.sigma[0][0] > 0.0 && post.sigma[1][1] > 0.0);
                assert_eq!(post.sigma[0][1], post.sigma[1][0]);
            }
        }
    }

    #[test]
    fn incremental_matches_direct_growing_and_windowed() {
        let p = params();
        let g = geom(4);
        for window in [None, Some(5)] {
            let mut h = ClusterHistory::new(window);
            let mut inc = IncrementalGp::new(window);
            let mut rng_state = 7u64;
            let mut next = || {
                rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((rng_state >> 33) as f64 / (1u64 << 31) as f64 - 1.0) * 8.0
            };
            for slot in 1..=10 {
                let pos = (slot * 7 + 1) % 4;
                let pair = [next(), next()];
                h.push(slot, pos, pair);
                inc.push(slot, pos, pair, &g, &p).unwrap();
                let cond = gp_prepare(&h, &g, &p).unwrap();
                for cand in 0..4 {
                    let a = cond.posterior(cand);
                    let b = inc.posterior(cand, &g, &p);
                    for i in 0..2 {
                        assert!((a.mu[i] - b.mu[i]).abs() < 1e-8, "slot {slot} mu");
                        for j in 0..2 {
                            assert!((a.sigma[i][j] - b.sigma[i][j]).abs() < 1e-8, "slot {slot} sigma");
                        }
                    }
                }
            }
        }
    }
}
