//! Statistical mmWave street-canyon channel model.
//!
//! The received power of a path decomposes additively in dB into a
//! deterministic path-loss term, correlated log-normal shadowing, and white
//! multipath fading. Cluster-free segments carry a scalar AR(1) shadowing
//! process in time; the segment hosting a relay cluster carries a space-time
//! Gaussian field over the candidate positions with an exponential spatial
//! kernel and a cross kernel tying the incoming and outgoing channels
//! together. Phases are i.i.d. uniform per segment, slot, and position.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::topology::{ClusterGeometry, PropagationPath, SegmentId, StreetGraph};

/// Channel and power parameters. Powers are linear watts; dB(m) quantities
/// are converted at config load.
#[derive(Debug, Clone)]
pub struct ChannelParams<T> {
    /// LoS path-loss exponent.
    pub alpha_l: T,
    /// NLoS path-loss exponent.
    pub alpha_n: T,
    /// Loss per traversed intersection (dB).
    pub delta_db: T,
    /// Shadowing power (dB^2).
    pub eta2: T,
    /// Shadowing correlation time (slots).
    pub gamma: T,
    /// Shadowing correlation distance (m).
    pub beta_m: T,
    /// Multipath power (dB^2).
    pub sigma_xi2: T,
    /// Relay reception noise power (linear).
    pub sigma2: T,
    /// Destination reception noise power (linear).
    pub sigma_d2: T,
    /// Source transmit power (linear W).
    pub p_s: T,
    /// Total relay power budget (linear W).
    pub p_c: T,
    /// Number of time slots per trial.
    pub n_t: usize,
}

impl<T: Scalar> ChannelParams<T> {
    /// AR(1) coefficient `kappa = e^{-1/gamma}`.
    pub fn kappa(&self) -> T {
        (-T::one() / self.gamma).exp()
    }

    /// `chi = ln(10)/10`, the dB-to-natural-log scale factor.
    pub fn chi(&self) -> T {
        T::of(10.0).ln() / T::of(10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("eta2", self.eta2),
            ("gamma", self.gamma),
            ("beta_m", self.beta_m),
            ("sigma_xi2", self.sigma_xi2),
            ("sigma2", self.sigma2),
            ("sigma_d2", self.sigma_d2),
            ("p_s", self.p_s),
            ("p_c", self.p_c),
        ];
        for (name, v) in pos {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Validation(format!("channel parameter {name} must be positive")));
            }
        }
        let kappa = self.kappa();
        if !(kappa > T::zero() && kappa < T::one()) {
            return Err(Error::Validation("gamma must give 0 < kappa < 1".into()));
        }
        if self.n_t < 2 {
            return Err(Error::Validation("n_t must be at least 2 (selection is one-step-ahead)".into()));
        }
        Ok(())
    }
}

/// Convert dBm to linear watts.
pub fn dbm_to_watt<T: Scalar>(dbm: T) -> T {
    T::of(10.0).powf((dbm - T::of(30.0)) / T::of(10.0))
}

/// Deterministic path loss of a complete path, in dB. The LoS segment enters
/// with its full length and exponent `alpha_l`; fully traversed NLoS segments
/// and the partial traversal of the terminal segment use `alpha_n`; every
/// intersection strictly between the endpoints costs `delta_db`.
pub fn path_loss_db<T: Scalar>(
    graph: &StreetGraph<T>,
    path: &PropagationPath<T>,
    params: &ChannelParams<T>,
) -> Result<T> {
    let lengths: Result<Vec<T>> =
        path.nlos.iter().map(|&s| graph.segment(s).map(|seg| seg.length)).collect();
    path_loss_db_with_lengths(path, &lengths?, params)
}

/// Path loss when the NLoS segment lengths are supplied alongside the path.
pub fn path_loss_db_with_lengths<T: Scalar>(
    path: &PropagationPath<T>,
    nlos_lengths: &[T],
    params: &ChannelParams<T>,
) -> Result<T> {
    assert_eq!(nlos_lengths.len(), path.nlos.len());
    let ten = T::of(10.0);
    let mut acc = params.alpha_l * ten * path.d_los.log10();
    for &len in nlos_lengths {
        acc += params.alpha_n * ten * len.log10();
    }
    if let Some((seg, d)) = path.terminal {
        if d <= T::zero() {
            return Err(Error::Validation(format!(
                "relay on segment {seg} sits exactly on an intersection"
            )));
        }
        acc += params.alpha_n * ten * d.log10();
    }
    acc += params.delta_db * T::of(path.n_intersections as f64);
    Ok(-acc)
}

/// Temporal covariance of the combined shadowing+multipath log-magnitude of
/// one cluster-free segment over `n_t` slots: `eta2 * T + sigma_xi2 * I` with
/// `T[k][l] = e^{-|k-l|/gamma}`.
pub fn temporal_cov<T: Scalar>(n_t: usize, eta2: T, gamma: T, sigma_xi2: T) -> Matrix<T> {
    Matrix::from_fn(n_t, n_t, |k, l| {
        let diff = T::of((k as f64 - l as f64).abs());
        let v = eta2 * (-diff / gamma).exp();
        if k == l {
            v + sigma_xi2
        } else {
            v
        }
    })
}

/// Unit temporal correlation matrix `T[k][l] = e^{-|k-l|/gamma}`.
pub fn unit_temporal<T: Scalar>(n_t: usize, gamma: T) -> Matrix<T> {
    Matrix::from_fn(n_t, n_t, |k, l| {
        let diff = T::of((k as f64 - l as f64).abs());
        (-diff / gamma).exp()
    })
}

/// Spatial shadowing kernel between two positions on the cluster segment,
/// `eta2 * e^{-dist/beta}`. Identical form for the incoming and outgoing
/// fields.
pub fn kernel_ff<T: Scalar>(dist: T, eta2: T, beta_m: T) -> T {
    eta2 * (-dist.abs() / beta_m).exp()
}

/// Cross kernel between the incoming field at the first position and the
/// outgoing field at the second: `eta2 * e^{(eps*dist - d_max)/beta}` with
/// `eps = 1` iff `d_in(second) + d_out(first) >= d_full`. `d_in_m` is the
/// incoming-entry distance of the outgoing-side position, `d_out_n` the
/// outgoing-entry distance of the incoming-side position.
pub fn kernel_fg<T: Scalar>(
    dist: T,
    eta2: T,
    beta_m: T,
    d_full: T,
    d_max: T,
    d_in_m: T,
    d_out_n: T,
) -> T {
    let eps = if d_in_m + d_out_n >= d_full { T::one() } else { -T::one() };
    eta2 * ((eps * dist.abs() - d_max) / beta_m).exp()
}

/// 2x2 cross-covariance block between the (incoming, outgoing) field pair at
/// position `i` and the pair at position `j`, excluding multipath.
pub fn pair_cov<T: Scalar>(geom: &ClusterGeometry<T>, i: usize, j: usize, params: &ChannelParams<T>) -> [[T; 2]; 2] {
    let dist = (geom.offsets[i] - geom.offsets[j]).abs();
    let ff = kernel_ff(dist, params.eta2, params.beta_m);
    // E[f_i g_j]: incoming measured at i, outgoing at j.
    let fg = kernel_fg(dist, params.eta2, params.beta_m, geom.d_full, geom.d_max, geom.d_in[j], geom.d_out[i]);
    // E[g_i f_j]: incoming measured at j, outgoing at i.
    let gf = kernel_fg(dist, params.eta2, params.beta_m, geom.d_full, geom.d_max, geom.d_in[i], geom.d_out[j]);
    [[ff, fg], [gf, ff]]
}

/// Per-slot 2*delta x 2*delta spatial covariance of the stacked
/// (incoming..., outgoing...) field over all candidate positions.
pub fn cluster_spatial_cov<T: Scalar>(geom: &ClusterGeometry<T>, params: &ChannelParams<T>) -> Matrix<T> {
    let delta = geom.offsets.len();
    Matrix::from_fn(2 * delta, 2 * delta, |r, c| {
        let (i, fi) = if r < delta { (r, 0) } else { (r - delta, 1) };
        let (j, fj) = if c < delta { (c, 0) } else { (c - delta, 1) };
        pair_cov(geom, i, j, params)[fi][fj]
    })
}

/// Full space-time covariance of the cluster field over all positions and
/// slots: `T (x) K + sigma_xi2 * I`, with slot-major index `(t, channel)`.
pub fn cluster_cov<T: Scalar>(geom: &ClusterGeometry<T>, params: &ChannelParams<T>) -> Matrix<T> {
    let k = cluster_spatial_cov(geom, params);
    let t = unit_temporal(params.n_t, params.gamma);
    let m = k.rows();
    let n = params.n_t * m;
    Matrix::from_fn(n, n, |r, c| {
        let (tr, cr) = (r / m, r % m);
        let (tc, cc) = (c / m, c % m);
        let v = t[(tr, tc)] * k[(cr, cc)];
        if r == c {
            v + params.sigma_xi2
        } else {
            v
        }
    })
}

/// Shadowing, multipath, and phase series of one cluster-free segment.
/// `beta[t]` spans `t = 0..=n_t` (the initial state is never observed);
/// `xi`, `phi`, and the combined `z` span slots `1..=n_t` at index `t-1`.
#[derive(Debug, Clone)]
pub struct SegmentShadowSeries<T> {
    pub segment: SegmentId,
    pub beta: Vec<T>,
    pub xi: Vec<T>,
    pub phi: Vec<T>,
}

impl<T: Scalar> SegmentShadowSeries<T> {
    /// Sample the AR(1) shadowing plus white multipath and phases.
    pub fn sample<R: Rng + ?Sized>(segment: SegmentId, params: &ChannelParams<T>, rng: &mut R) -> Self {
        let n_t = params.n_t;
        let kappa = params.kappa();
        let innov_sd = ((T::one() - kappa * kappa) * params.eta2).sqrt();
        let mut beta = Vec::with_capacity(n_t + 1);
        beta.push(T::standard_normal(rng) * params.eta2.sqrt());
        for t in 1..=n_t {
            let prev = beta[t - 1];
            beta.push(kappa * prev + T::standard_normal(rng) * innov_sd);
        }
        let xi_sd = params.sigma_xi2.sqrt();
        let xi = (0..n_t).map(|_| T::standard_normal(rng) * xi_sd).collect();
        let phi = (0..n_t).map(|_| T::standard_uniform(rng)).collect();
        SegmentShadowSeries { segment, beta, xi, phi }
    }

    /// Observed combined log-magnitude `z(t) = beta(t) + xi(t)`, `t >= 1`.
    pub fn z(&self, t: usize) -> T {
        self.beta[t] + self.xi[t - 1]
    }

    pub fn phase(&self, t: usize) -> T {
        self.phi[t - 1]
    }
}

/// Space-time field of one cluster segment: per slot and candidate position,
/// the incoming/outgoing combined log-magnitudes and phases.
#[derive(Debug, Clone)]
pub struct ClusterFieldSeries<T> {
    pub segment: SegmentId,
    pub delta: usize,
    /// `beta_in[t-1][i]`, `t = 1..=n_t`: shadowing field, incoming side.
    pub beta_in: Vec<Vec<T>>,
    pub beta_out: Vec<Vec<T>>,
    pub xi_in: Vec<Vec<T>>,
    pub xi_out: Vec<Vec<T>>,
    pub phi_in: Vec<Vec<T>>,
    pub phi_out: Vec<Vec<T>>,
}

impl<T: Scalar> ClusterFieldSeries<T> {
    pub fn z_in(&self, t: usize, pos: usize) -> T {
        self.beta_in[t - 1][pos] + self.xi_in[t - 1][pos]
    }
    pub fn z_out(&self, t: usize, pos: usize) -> T {
        self.beta_out[t - 1][pos] + self.xi_out[t - 1][pos]
    }
    pub fn z_pair(&self, t: usize, pos: usize) -> [T; 2] {
        [self.z_in(t, pos), self.z_out(t, pos)]
    }
    pub fn phase_in(&self, t: usize, pos: usize) -> T {
        self.phi_in[t - 1][pos]
    }
    pub fn phase_out(&self, t: usize, pos: usize) -> T {
        self.phi_out[t - 1][pos]
    }
}

/// Factorized sampler for the separable space-time field: the temporal and
/// spatial factors are computed once and reused across trials.
#[derive(Debug, Clone)]
pub struct ClusterFieldSampler<T> {
    segment: SegmentId,
    delta: usize,
    n_t: usize,
    temporal_factor: Matrix<T>,
    spatial_factor: Matrix<T>,
    sigma_xi: T,
}

impl<T: Scalar> ClusterFieldSampler<T> {
    pub fn new(segment: SegmentId, geom: &ClusterGeometry<T>, params: &ChannelParams<T>) -> Result<Self> {
        let t = unit_temporal(params.n_t, params.gamma);
        let k = cluster_spatial_cov(geom, params);
        let temporal_factor = Cholesky::with_jitter(&t, T::of(1e-9))?.factor().clone();
        let spatial_factor = Cholesky::with_jitter(&k, T::of(1e-9) * params.eta2)?.factor().clone();
        Ok(ClusterFieldSampler {
            segment,
            delta: geom.offsets.len(),
            n_t: params.n_t,
            temporal_factor,
            spatial_factor,
            sigma_xi: params.sigma_xi2.sqrt(),
        })
    }

    /// One realization of the field: `B = L_T W L_K^T` has covariance
    /// `T (x) K`; white multipath and uniform phases are added on top.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterFieldSeries<T> {
        let m = 2 * self.delta;
        let mut w = Matrix::zeros(self.n_t, m);
        for t in 0..self.n_t {
            for c in 0..m {
                w[(t, c)] = T::standard_normal(rng);
            }
        }
        // tmp = L_T * W  (lower-triangular times dense)
        let mut tmp: Matrix<T> = Matrix::zeros(self.n_t, m);
        for t in 0..self.n_t {
            for k in 0..=t {
                let l = self.temporal_factor[(t, k)];
                if l == T::zero() {
                    continue;
                }
                for c in 0..m {
                    let add = l * w[(k, c)];
                    let cur = tmp[(t, c)];
                    tmp[(t, c)] = cur + add;
                }
            }
        }
        // field[t][c] = sum_d tmp[t][d] * L_K[c][d]
        let mut beta_in = vec![vec![T::zero(); self.delta]; self.n_t];
        let mut beta_out = vec![vec![T::zero(); self.delta]; self.n_t];
        for t in 0..self.n_t {
            for c in 0..m {
                let mut acc = T::zero();
                for d in 0..=c {
                    acc += tmp[(t, d)] * self.spatial_factor[(c, d)];
                }
                if c < self.delta {
                    beta_in[t][c] = acc;
                } else {
                    beta_out[t][c - self.delta] = acc;
                }
            }
        }
        let draw_grid = |uniform: bool, rng: &mut R| -> Vec<Vec<T>> {
            (0..self.n_t)
                .map(|_| {
                    (0..self.delta)
                        .map(|_| {
                            if uniform {
                                T::standard_uniform(rng)
                            } else {
                                T::standard_normal(rng) * self.sigma_xi
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let xi_in = draw_grid(false, rng);
        let xi_out = draw_grid(false, rng);
        let phi_in = draw_grid(true, rng);
        let phi_out = draw_grid(true, rng);
        ClusterFieldSeries {
            segment: self.segment,
            delta: self.delta,
            beta_in,
            beta_out,
            xi_in,
            xi_out,
            phi_in,
            phi_out,
        }
    }
}

/// One sampled networkwide channel realization: a scalar series per unique
/// cluster-free segment (shared by every path that traverses it, which is
/// what couples paths statistically) and a space-time field per cluster.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    /// Aligned with the network's sorted segment union.
    pub segments: Vec<SegmentShadowSeries<T>>,
    /// Indexed like the network's cluster list.
    pub clusters: Vec<ClusterFieldSeries<T>>,
}

/// Reconstruct the complex channel gain from its squared-magnitude in dB and
/// its phase in cycles: `|gain|^2 = 10^{F/10}`, `arg = 2*pi*phi`.
pub fn reconstruct_gain<T: Scalar>(f_db: T, phi_cycles: T) -> Complex<T> {
    let mag = (T::of(10.0).ln() * f_db / T::of(20.0)).exp();
    let angle = T::of(2.0) * T::of(std::f64::consts::PI) * phi_cycles;
    Complex::from_polar(mag, angle)
}

/// Squared magnitude of the coherent sum of paths given each path's combined
/// log-magnitude (dB) and phase (cycles):
/// `sum_i sum_k e^{chi/2 (F_i + F_k)} cos(2 pi (phi_i - phi_k))`.
pub fn aggregate_power<T: Scalar>(log_mags_db: &[T], phases_cycles: &[T]) -> T {
    assert_eq!(log_mags_db.len(), phases_cycles.len());
    let chi = T::of(10.0).ln() / T::of(10.0);
    let two_pi = T::of(2.0) * T::of(std::f64::consts::PI);
    let half = chi / T::of(2.0);
    let mags: Vec<T> = log_mags_db.iter().map(|&f| (half * f).exp()).collect();
    let mut acc = T::zero();
    for i in 0..mags.len() {
        for k in 0..mags.len() {
            acc += mags[i] * mags[k] * (two_pi * (phases_cycles[i] - phases_cycles[k])).cos();
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::PropagationPath;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

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

    fn toy_path(d_los: f64, nlos: usize, terminal: f64, n: u32) -> (PropagationPath<f64>, Vec<f64>) {
        let path = PropagationPath {
            segments: (0..=(nlos as u32 + 1)).collect(),
            los: 0,
            nlos: (1..=nlos as u32).collect(),
            terminal: Some((nlos as u32 + 1, terminal)),
            n_intersections: n,
            length: 0.0,
            d_los,
        };
        let lengths = vec![100.0; nlos];
        (path, lengths)
    }

    #[test]
    fn path_loss_all_unit_distances() {
        let mut p = params();
        p.delta_db = 10.0;
        let (path, lengths) = toy_path(1.0, 0, 1.0, 0);
        let a = path_loss_db_with_lengths(&path, &lengths, &p).unwrap();
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn path_loss_hand_computed() {
        let mut p = params();
        p.alpha_l = 2.0;
        p.alpha_n = 2.0;
        let (path, lengths) = toy_path(100.0, 1, 50.0, 2);
        let a = path_loss_db_with_lengths(&path, &lengths, &p).unwrap();
        let expected = -(40.0 + 40.0 + 20.0 * 50f64.log10() + 20.0);
        assert!((a - expected).abs() < 1e-9);
        assert!((a - -133.97940008672037).abs() < 1e-9);
    }

    #[test]
    fn path_loss_intersection_increment() {
        let p = params();
        let (path1, lengths) = toy_path(100.0, 1, 50.0, 2);
        let (path2, _) = toy_path(100.0, 1, 50.0, 3);
        let a1 = path_loss_db_with_lengths(&path1, &lengths, &p).unwrap();
        let a2 = path_loss_db_with_lengths(&path2, &lengths, &p).unwrap();
        assert!((a1 - a2 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn path_loss_rejects_relay_on_intersection() {
        let p = params();
        let (path, lengths) = toy_path(100.0, 1, 0.0, 2);
        assert!(path_loss_db_with_lengths(&path, &lengths, &p).is_err());
    }

    #[test]
    fn temporal_cov_single_slot() {
        let m = temporal_cov(1, 40.0_f64, 15.0, 20.0);
        assert_eq!(m.rows(), 1);
        assert!((m[(0, 0)] - 60.0).abs() < 1e-12);
    }

    #[test]
    fn temporal_cov_adjacent_slots() {
        let m = temporal_cov(2, 40.0_f64, 15.0, 20.0);
        let expected = 40.0 * (-1.0f64 / 15.0).exp();
        assert!((m[(0, 1)] - expected).abs() < 1e-12);
        assert!((m[(0, 1)] - 37.42).abs() < 0.01);
    }

    #[test]
    fn temporal_cov_positive_definite_at_200() {
        let m = temporal_cov(200, 40.0, 15.0, 20.0);
        // min eigenvalue >= 0.99 * sigma_xi2 checked via shifted Cholesky.
        let shifted = Matrix::from_fn(200, 200, |i, j| {
            m[(i, j)] - if i == j { 0.99 * 20.0 } else { 0.0 }
        });
        assert!(Cholesky::new(&shifted).is_some());
    }

    #[test]
    fn kernel_ff_values() {
        assert!((kernel_ff(0.0_f64, 40.0, 10.0) - 40.0).abs() < 1e-12);
        assert!((kernel_ff(10.0, 40.0, 10.0) - 40.0 * (-1.0f64).exp()).abs() < 1e-12);
        let v = kernel_ff(2.0, 40.0, 10.0);
        assert!((v - 40.0 * (-0.2f64).exp()).abs() < 1e-12);
        assert!((v - 32.75).abs() < 0.01);
    }

    #[test]
    fn kernel_fg_same_position_matches_prior() {
        // d_in + d_out = d_full exactly at a common position.
        let v = kernel_fg(0.0_f64, 40.0, 10.0, 100.0, 98.0, 30.0, 70.0);
        assert!((v - 40.0 * (-9.8f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kernel_fg_overlap_and_disjoint_branches() {
        let (eta2, beta, d_full, d_max) = (40.0_f64, 10.0, 100.0, 90.0);
        // Overlap geometry: d_in(m) + d_out(n) = d_full + d_max.
        let v = kernel_fg(d_max, eta2, beta, d_full, d_max, 95.0, 95.0);
        assert!((v - eta2).abs() < 1e-9);
        // Disjoint geometry: d_in(m) + d_out(n) = d_full - d_max.
        let v = kernel_fg(d_max, eta2, beta, d_full, d_max, 5.0, 5.0);
        assert!((v - eta2 * (-2.0 * d_max / beta).exp()).abs() < 1e-9);
    }

    #[test]
    fn kernel_fg_linear_identity() {
        // eps * |d| with the threshold rule collapses to the linear exponent
        // (d_in_m + d_out_n - d_full - d_max) / beta.
        let (eta2, beta, d_full, d_max) = (40.0_f64, 10.0, 100.0, 98.0);
        let offs = [1.0_f64, 25.0, 51.0, 99.0];
        for &on in &offs {
            for &om in &offs {
                let dist = (on - om).abs();
                let v = kernel_fg(dist, eta2, beta, d_full, d_max, om, d_full - on);
                let expected = eta2 * ((om + (d_full - on) - d_full - d_max) / beta).exp();
                assert!((v - expected).abs() < 1e-9 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reconstruct_gain_cases() {
        let g = reconstruct_gain(0.0_f64, 0.0);
        assert!((g.re - 1.0).abs() < 1e-12 && g.im.abs() < 1e-12);
        // F is the dB of the squared magnitude, so |f| = 10^{F/20}.
        let g = reconstruct_gain(-20.0_f64, 0.25);
        assert!((g.norm() - 0.1).abs() < 1e-12);
        assert!((g.arg() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        // Round trip: 10 log10 |g|^2 == F.
        for &f in &[-137.2_f64, -80.0, 3.5] {
            let g = reconstruct_gain(f, 0.77);
            assert!((10.0 * g.norm_sqr().log10() - f).abs() < 1e-9);
        }
    }

    #[test]
    fn aggregate_power_single_path() {
        let v = aggregate_power(&[-120.0_f64], &[0.3]);
        let chi = 10f64.ln() / 10.0;
        assert!((v - (chi * -120.0).exp()).abs() < 1e-25);
    }

    #[test]
    fn aggregate_power_destructive() {
        let v = aggregate_power(&[-100.0_f64, -100.0], &[0.25, 0.75]);
        assert!(v.abs() < 1e-22);
    }

    #[test]
    fn stationary_variance_and_correlation() {
        let p = ChannelParams { n_t: 12, ..params() };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let trials = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut lagged = 0.0;
        for _ in 0..trials {
            let s = SegmentShadowSeries::sample(0, &p, &mut rng);
            let b = s.beta[3];
            sum += b;
            sumsq += b * b;
            lagged += s.beta[3] * s.beta[8];
        }
        let n = trials as f64;
        let mean = sum / n;
        let var = sumsq / n - mean * mean;
        assert!((var - p.eta2).abs() / p.eta2 < 0.03, "var {var}");
        let corr = (lagged / n) / p.eta2;
        let expected = (-5.0f64 / p.gamma).exp();
        assert!((corr - expected).abs() < 0.02, "corr {corr} vs {expected}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = params();
        let geom = ClusterGeometry {
            offsets: vec![25.0, 75.0],
            d_in: vec![25.0, 75.0],
            d_out: vec![75.0, 25.0],
            d_full: 100.0,
            d_max: 50.0,
        };
        let sampler = ClusterFieldSampler::new(9, &geom, &p).unwrap();
        let a = sampler.sample(&mut ChaCha12Rng::seed_from_u64(42));
        let b = sampler.sample(&mut ChaCha12Rng::seed_from_u64(42));
        assert_eq!(a.beta_in, b.beta_in);
        assert_eq!(a.phi_out, b.phi_out);
    }

    #[test]
    fn cluster_cov_reduces_to_prior_pair() {
        let mut p = params();
        p.n_t = 1;
        let geom = ClusterGeometry {
            offsets: vec![50.0],
            d_in: vec![50.0],
            d_out: vec![50.0],
            d_full: 100.0,
            d_max: 0.0,
        };
        let m = cluster_cov(&geom, &p);
        assert_eq!(m.rows(), 2);
        assert!((m[(0, 0)] - 60.0).abs() < 1e-12);
        let off = 40.0 * (-0.0f64 / 10.0).exp();
        assert!((m[(0, 1)] - off).abs() < 1e-12);
        assert!((m.asymmetry()).abs() < 1e-15);
    }

    #[test]
    fn cluster_cov_kronecker_structure() {
        let mut p = params();
        p.n_t = 3;
        let geom = ClusterGeometry {
            offsets: vec![12.5, 50.0, 87.5],
            d_in: vec![12.5, 50.0, 87.5],
            d_out: vec![87.5, 50.0, 12.5],
            d_full: 100.0,
            d_max: 75.0,
        };
        let full = cluster_cov(&geom, &p);
        let k = cluster_spatial_cov(&geom, &p);
        let m = k.rows();
        for r in 0..full.rows() {
            for c in 0..full.cols() {
                let (tr, cr) = (r / m, r % m);
                let (tc, cc) = (c / m, c % m);
                let expected = (-((tr as f64 - tc as f64).abs()) / p.gamma).exp() * k[(cr, cc)]
                    + if r == c { p.sigma_xi2 } else { 0.0 };
                assert!((full[(r, c)] - expected).abs() < 1e-12);
            }
        }
        assert!(full.asymmetry() < 1e-12);
    }

    #[test]
    fn sampled_field_matches_covariance() {
        let mut p = params();
        p.n_t = 2;
        let geom = ClusterGeometry {
            offsets: vec![25.0, 75.0],
            d_in: vec![25.0, 75.0],
            d_out: vec![75.0, 25.0],
            d_full: 100.0,
            d_max: 50.0,
        };
        let sampler = ClusterFieldSampler::new(0, &geom, &p).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let trials = 200_000;
        // Track E[z_in(p0,t1) z_out(p1,t2)] against the full covariance.
        let full = cluster_cov(&geom, &p);
        let mut acc = [0.0f64; 3];
        for _ in 0..trials {
            let f = sampler.sample(&mut rng);
            acc[0] += f.z_in(1, 0) * f.z_out(2, 1);
            acc[1] += f.z_in(1, 0) * f.z_in(1, 0);
            acc[2] += f.z_in(2, 1) * f.z_out(2, 1);
        }
        let n = trials as f64;
        // Flat index (t, c) = t * 2*delta + c; c = pos (incoming) or
        // delta + pos (outgoing). z_in(1,0) -> 0; z_out(2,1) -> 4+3 = 7.
        let cov_a = full[(0, 7)];
        let var_b = full[(0, 0)];
        let cov_c = full[(5, 7)];
        assert!((acc[0] / n - cov_a).abs() < 0.6, "{} vs {}", acc[0] / n, cov_a);
        assert!((acc[1] / n - var_b).abs() < 0.8, "{} vs {}", acc[1] / n, var_b);
        assert!((acc[2] / n - cov_c).abs() < 0.8, "{} vs {}", acc[2] / n, cov_c);
    }
}
