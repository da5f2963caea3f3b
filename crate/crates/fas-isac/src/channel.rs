//! Correlated user-channel synthesis and per-trial channel realizations.
//!
//! User k's channel over the port grid is h_k = √l_k · Υ Λ^(1/2) · conj(g_k)
//! with g_k i.i.d. standard complex Gaussian, so E[h_k h_k^H] = l_k · J_s and
//! the identity-correlation case reduces to h_k = conj(g_k) exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{target_response, SpatialCorrelation};

/// Large-scale link model for one user: distance, path-loss exponent, and
/// receiver noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLink {
    /// Distance from the transmit surface in meters (d_k).
    pub distance: f64,
    /// Path-loss exponent (m).
    pub pathloss_exp: f64,
    /// Receiver noise variance (σ_k²).
    pub noise_var: f64,
}

impl UserLink {
    pub fn new(distance: f64, pathloss_exp: f64, noise_var: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "user distance must be positive, got {distance}"
            )));
        }
        if !(pathloss_exp > 0.0) {
            return Err(Error::InvalidParameter(
                "path-loss exponent must be positive".into(),
            ));
        }
        if !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(
                "noise variance must be positive".into(),
            ));
        }
        Ok(Self {
            distance,
            pathloss_exp,
            noise_var,
        })
    }

    /// Large-scale gain l_k = d_k^(−m).
    pub fn pathloss(&self) -> f64 {
        self.distance.powf(-self.pathloss_exp)
    }
}

/// Draws one standard complex Gaussian CN(0,1): real then imaginary part,
/// each N(0, 1/2). The draw order is part of the reproducibility contract.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Synthesizes one correlated user channel h_k = √l_k · Υ Λ^(1/2) · conj(g_k).
///
/// Draws exactly 2·N_s standard-normal values from `rng` (re/im per port, in
/// port order), so trial reproducibility follows from the seed alone.
pub fn synthesize_user_channel<R: Rng + ?Sized>(
    corr: &SpatialCorrelation,
    link: &UserLink,
    rng: &mut R,
) -> DVector<Complex64> {
    let n = corr.num_ports();
    let g = DVector::from_iterator(n, (0..n).map(|_| complex_gaussian(rng)));
    let scale = link.pathloss().sqrt();
    let f = corr.sqrt_factor();
    // h = √l · F · conj(g) with real F = Υ Λ^(1/2).
    let mut h = DVector::<Complex64>::zeros(n);
    for (j, col) in f.column_iter().enumerate() {
        let gj = g[j].conj();
        for i in 0..n {
            h[i] += gj * col[i];
        }
    }
    h.map(|z| z * scale)
}

/// One channel realization: user channels, target response, steering, and
/// the noise/interference description seen by the radar receiver.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// K×N_s with row k equal to h_k^H (entries conj(h_k[n])).
    pub h: DMatrix<Complex64>,
    /// N_r×N_s rank-one target response G = α a_r a_t^H.
    pub g: DMatrix<Complex64>,
    /// Transmit steering over the full port grid.
    pub a_t: DVector<Complex64>,
    /// Receive-array steering.
    pub a_r: DVector<Complex64>,
    /// Complex round-trip target amplitude α.
    pub alpha: Complex64,
    /// Interference covariance R_c at the radar receiver (Hermitian PSD).
    pub rc: DMatrix<Complex64>,
    /// Radar receiver noise variance σ_b².
    pub sigma_b2: f64,
    /// Noise variance at the sensing-target eavesdropper (σ_r²).
    pub sigma_r2: f64,
    /// Noise variance at internal (user) eavesdroppers (σ_i²).
    pub sigma_eve2: f64,
    /// Per-user receiver noise variances σ_k², length K.
    pub user_noise: Vec<f64>,
}

impl ChannelSet {
    /// Assembles and validates a realization from already-synthesized parts.
    ///
    /// `user_channels` are the column vectors h_k; they are stored adjointed
    /// as the rows of H.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        user_channels: &[DVector<Complex64>],
        a_t: DVector<Complex64>,
        a_r: DVector<Complex64>,
        alpha: Complex64,
        rc: DMatrix<Complex64>,
        sigma_b2: f64,
        sigma_r2: f64,
        sigma_eve2: f64,
        user_noise: Vec<f64>,
    ) -> Result<Self> {
        let ns = a_t.len();
        let nr = a_r.len();
        if user_channels.is_empty() {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        if user_channels.iter().any(|h| h.len() != ns) {
            return Err(Error::DimensionMismatch(
                "user channel length must equal the port count".into(),
            ));
        }
        if user_noise.len() != user_channels.len() {
            return Err(Error::DimensionMismatch(
                "one noise variance per user required".into(),
            ));
        }
        if rc.nrows() != nr || rc.ncols() != nr {
            return Err(Error::DimensionMismatch(format!(
                "R_c must be {nr}×{nr}"
            )));
        }
        if (&rc - rc.adjoint()).norm() > 1e-9 * rc.norm().max(1.0) {
            return Err(Error::InvalidParameter("R_c must be Hermitian".into()));
        }
        if sigma_b2 <= 0.0 || sigma_r2 <= 0.0 || sigma_eve2 <= 0.0 {
            return Err(Error::InvalidParameter(
                "noise variances must be positive".into(),
            ));
        }
        let k = user_channels.len();
        let mut h = DMatrix::zeros(k, ns);
        for (i, hk) in user_channels.iter().enumerate() {
            h.set_row(i, &hk.adjoint());
        }
        let g = target_response(&a_r, &a_t, alpha);
        Ok(Self {
            h,
            g,
            a_t,
            a_r,
            alpha,
            rc,
            sigma_b2,
            sigma_r2,
            sigma_eve2,
            user_noise,
        })
    }

    /// Number of users K.
    pub fn num_users(&self) -> usize {
        self.h.nrows()
    }

    /// Number of ports N_s.
    pub fn num_ports(&self) -> usize {
        self.h.ncols()
    }

    /// Number of receive antennas N_r.
    pub fn num_rx(&self) -> usize {
        self.a_r.len()
    }

    /// User k's channel vector h_k (column form).
    pub fn user_channel(&self, k: usize) -> DVector<Complex64> {
        self.h.row(k).adjoint()
    }

    /// R̃ = R_c + σ_b² I, the total disturbance covariance at the radar
    /// receiver.
    pub fn disturbance_cov(&self) -> DMatrix<Complex64> {
        let nr = self.num_rx();
        &self.rc + DMatrix::<Complex64>::identity(nr, nr) * Complex64::new(self.sigma_b2, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{jakes_correlation, steering_vectors, Direction, FasGeometry};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_corr(n: usize) -> SpatialCorrelation {
        SpatialCorrelation {
            matrix: DMatrix::identity(n, n),
            eigvectors: DMatrix::identity(n, n),
            eigvalues: DVector::from_element(n, 1.0),
        }
    }

    #[test]
    fn identity_correlation_returns_conjugate_gaussian() {
        let corr = identity_corr(6);
        let link = UserLink::new(1.0, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = synthesize_user_channel(&corr, &link, &mut rng);
        // Re-draw the same Gaussians and check h = conj(g) elementwise.
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        for i in 0..6 {
            let g = complex_gaussian(&mut rng2);
            assert_eq!(h[i], g.conj());
        }
    }

    #[test]
    fn synthesis_is_reproducible() {
        let g = FasGeometry::new(3, 3, 1.0, 1.0, 0.125, 4, 0.5).unwrap();
        let corr = jakes_correlation(&g).unwrap();
        let link = UserLink::new(15.0, 2.0, 1.0).unwrap();
        let a = synthesize_user_channel(&corr, &link, &mut ChaCha8Rng::seed_from_u64(42));
        let b = synthesize_user_channel(&corr, &link, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_matches_correlation() {
        // Monte Carlo oracle: cov(h) → l · J_s entrywise within 0.02.
        let g = FasGeometry::new(2, 2, 0.5, 0.5, 0.125, 4, 0.5).unwrap();
        let corr = jakes_correlation(&g).unwrap();
        let link = UserLink::new(1.0, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = corr.num_ports();
        let trials = 100_000;
        let mut acc = DMatrix::<Complex64>::zeros(n, n);
        for _ in 0..trials {
            let h = synthesize_user_channel(&corr, &link, &mut rng);
            acc += &h * h.adjoint();
        }
        acc /= Complex64::new(trials as f64, 0.0);
        for i in 0..n {
            for j in 0..n {
                let want = corr.matrix[(i, j)];
                assert!(
                    (acc[(i, j)].re - want).abs() <= 0.02,
                    "cov[{i}][{j}] re = {} want {want}",
                    acc[(i, j)].re
                );
                assert!(acc[(i, j)].im.abs() <= 0.02);
            }
        }
    }

    #[test]
    fn pathloss_scales_mean_energy() {
        // d=2, m=2 → l = 1/4, E‖h‖² = N_s/4 within 2%.
        let g = FasGeometry::new(2, 2, 0.5, 0.5, 0.125, 4, 0.5).unwrap();
        let corr = jakes_correlation(&g).unwrap();
        let link = UserLink::new(2.0, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            acc += synthesize_user_channel(&corr, &link, &mut rng).norm_squared();
        }
        let mean = acc / trials as f64;
        let want = corr.num_ports() as f64 / 4.0;
        assert!(
            (mean - want).abs() <= 0.02 * want,
            "mean energy {mean}, want {want}"
        );
    }

    #[test]
    fn channel_set_shapes_and_rows() {
        let g = FasGeometry::new(2, 2, 0.5, 0.5, 0.125, 3, 0.5).unwrap();
        let corr = jakes_correlation(&g).unwrap();
        let link = UserLink::new(5.0, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h1 = synthesize_user_channel(&corr, &link, &mut rng);
        let h2 = synthesize_user_channel(&corr, &link, &mut rng);
        let (a_t, a_r) = steering_vectors(&g, Direction::from_degrees(25.0, 0.0));
        let rc = DMatrix::<Complex64>::identity(3, 3) * Complex64::new(1e-8, 0.0);
        let cs = ChannelSet::new(
            &[h1.clone(), h2],
            a_t,
            a_r,
            Complex64::new(1e-4, 0.0),
            rc,
            1e-8,
            1.0,
            1.0,
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(cs.num_users(), 2);
        assert_eq!(cs.num_ports(), 4);
        assert_eq!(cs.num_rx(), 3);
        // Row 0 of H is h_1^H; user_channel round-trips it.
        assert_eq!(cs.user_channel(0), h1);
        assert_eq!(cs.h[(0, 1)], h1[1].conj());
        // G is rank one with the right Frobenius norm.
        let s = cs.g.clone().svd(false, false);
        assert!(s.singular_values[1] <= 1e-12 * s.singular_values[0]);
        assert_abs_diff_eq!(
            cs.g.norm(),
            1e-4 * (12f64).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn channel_set_rejects_bad_inputs() {
        let a_t = DVector::from_element(4, Complex64::new(1.0, 0.0));
        let a_r = DVector::from_element(3, Complex64::new(1.0, 0.0));
        let h = DVector::from_element(4, Complex64::new(1.0, 0.0));
        let rc_bad = DMatrix::<Complex64>::identity(2, 2);
        assert!(ChannelSet::new(
            &[h.clone()],
            a_t.clone(),
            a_r.clone(),
            Complex64::ONE,
            rc_bad,
            1e-8,
            1.0,
            1.0,
            vec![1.0],
        )
        .is_err());
        let mut rc_nonherm = DMatrix::<Complex64>::identity(3, 3);
        rc_nonherm[(0, 1)] = Complex64::new(0.5, 0.5);
        assert!(ChannelSet::new(
            &[h],
            a_t,
            a_r,
            Complex64::ONE,
            rc_nonherm,
            1e-8,
            1.0,
            1.0,
            vec![1.0],
        )
        .is_err());
    }

    #[test]
    fn disturbance_cov_adds_noise_floor() {
        let a_t = DVector::from_element(2, Complex64::new(1.0, 0.0));
        let a_r = DVector::from_element(2, Complex64::new(1.0, 0.0));
        let h = DVector::from_element(2, Complex64::new(1.0, 0.0));
        let rc = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(3.0, 0.0);
        let cs = ChannelSet::new(
            &[h],
            a_t,
            a_r,
            Complex64::ONE,
            rc,
            2.0,
            1.0,
            1.0,
            vec![1.0],
        )
        .unwrap();
        let r = cs.disturbance_cov();
        assert_abs_diff_eq!(r[(0, 0)].re, 5.0);
        assert_abs_diff_eq!(r[(0, 1)].re, 0.0);
    }
}
