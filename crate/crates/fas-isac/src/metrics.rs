//! Secrecy and radar performance metrics for a channel realization, active
//! port subset, and precoder.
//!
//! Power convention: the precoder matrix is stored unnormalized with
//! Tr(W W^H) ≤ P, i.e. transmit power is carried by W itself. SINR formulas
//! therefore use W directly with no standalone power factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};

/// Slack allowed on the power constraint Tr(W W^H) ≤ P.
pub const POWER_TOL: f64 = 1e-9;

/// Ordered set of distinct active port indices (0-based) — the Π selector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortSelection {
    indices: Vec<usize>,
}

impl PortSelection {
    /// Validates distinctness and non-emptiness; indices are kept in the
    /// given order.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter(
                "port selection must be nonempty".into(),
            ));
        }
        let mut seen = indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "port selection indices must be distinct".into(),
            ));
        }
        Ok(Self { indices })
    }

    /// All ports of an N_s-port grid, in index order.
    pub fn full(n_ports: usize) -> Self {
        Self {
            indices: (0..n_ports).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of active ports n_s.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, port: usize) -> bool {
        self.indices.contains(&port)
    }

    /// Errors unless every index addresses a port of an `n_ports` grid.
    pub fn validate_for(&self, n_ports: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n_ports) {
            Some(&bad) => Err(Error::InvalidParameter(format!(
                "port index {bad} out of range for {n_ports} ports"
            ))),
            None => Ok(()),
        }
    }

    /// Binary indicator vector r ∈ {0,1}^{N_s} of this selection.
    pub fn indicator(&self, n_ports: usize) -> Vec<bool> {
        let mut r = vec![false; n_ports];
        for &i in &self.indices {
            r[i] = true;
        }
        r
    }
}

/// Transmit precoder over the active ports with its power budget.
#[derive(Debug, Clone)]
pub struct Precoder {
    /// n_s×K complex beamforming matrix (power absorbed).
    pub w: DMatrix<Complex64>,
    /// Total power budget P: Tr(W W^H) ≤ P.
    pub power_budget: f64,
}

impl Precoder {
    pub fn new(w: DMatrix<Complex64>, power_budget: f64) -> Result<Self> {
        if !(power_budget > 0.0) {
            return Err(Error::InvalidParameter(
                "power budget must be positive".into(),
            ));
        }
        let tr = w.norm_squared();
        if tr > power_budget + POWER_TOL {
            return Err(Error::InvalidParameter(format!(
                "precoder power {tr} exceeds budget {power_budget}"
            )));
        }
        Ok(Self { w, power_budget })
    }

    /// Transmit power actually used, Tr(W W^H) = ‖W‖_F².
    pub fn power_used(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn num_users(&self) -> usize {
        self.w.ncols()
    }
}

/// Columns of `m` at the selected ports, in selection order (M·Π).
pub fn select_columns(m: &DMatrix<Complex64>, sel: &PortSelection) -> DMatrix<Complex64> {
    m.select_columns(sel.indices())
}

/// Entries of `v` at the selected ports (Π^H v).
pub fn select_entries(v: &DVector<Complex64>, sel: &PortSelection) -> DVector<Complex64> {
    DVector::from_iterator(sel.len(), sel.indices().iter().map(|&i| v[i]))
}

/// Full per-user and radar metrics for one (selection, precoder) operating
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// γ_k per user.
    pub user_sinr: Vec<f64>,
    /// R_k = log2(1 + γ_k).
    pub user_rate: Vec<f64>,
    /// Worst-case eavesdropper rate against each user:
    /// max(R_e^target, max over other users).
    pub eve_rate: Vec<f64>,
    /// R_s^k = max(0, R_k − eve_rate_k).
    pub secrecy: Vec<f64>,
    /// Sum secrecy R_s = Σ_k R_s^k.
    pub sum_secrecy: f64,
    /// Radar output SINR γ_b under the MVDR receive filter.
    pub radar_sinr: f64,
}

fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Row k of H_S · W: the received amplitudes ĥ_k^H w_i for all streams i.
/// H rows already store h_k^H, so no further conjugation is needed.
fn rx_amplitudes(
    h: &DMatrix<Complex64>,
    sel: &PortSelection,
    w: &DMatrix<Complex64>,
    k: usize,
) -> Vec<Complex64> {
    let kk = w.ncols();
    let mut out = vec![Complex64::ZERO; kk];
    for (i, amp) in out.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (j, &p) in sel.indices().iter().enumerate() {
            acc += h[(k, p)] * w[(j, i)];
        }
        *amp = acc;
    }
    out
}

fn check_dims(
    h: &DMatrix<Complex64>,
    sel: &PortSelection,
    prec: &Precoder,
) -> Result<()> {
    sel.validate_for(h.ncols())?;
    if prec.w.nrows() != sel.len() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} rows but selection has {} ports",
            prec.w.nrows(),
            sel.len()
        )));
    }
    Ok(())
}

/// Downlink SINR of user k: γ_k = |ĥ_k^H w_k|² / (Σ_{i≠k} |ĥ_k^H w_i|² + σ_k²).
pub fn comm_sinr(
    h: &DMatrix<Complex64>,
    sel: &PortSelection,
    prec: &Precoder,
    k: usize,
    sigma_k2: f64,
) -> Result<f64> {
    check_dims(h, sel, prec)?;
    if k >= h.nrows() {
        return Err(Error::InvalidParameter(format!("user index {k} out of range")));
    }
    let amps = rx_amplitudes(h, sel, &prec.w, k);
    let num = amps[k].norm_sqr();
    let mut den = sigma_k2;
    for (i, a) in amps.iter().enumerate() {
        if i != k {
            den += a.norm_sqr();
        }
    }
    Ok(num / den)
}

/// MVDR receive filter w_r = R̃^{-1} a_r / (a_r^H R̃^{-1} a_r) with
/// R̃ = R_c + σ_b² I; distortionless (w_r^H a_r = 1) by construction.
pub fn mvdr_filter(
    rc: &DMatrix<Complex64>,
    sigma_b2: f64,
    a_r: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let nr = a_r.len();
    if rc.nrows() != nr || rc.ncols() != nr {
        return Err(Error::DimensionMismatch(format!(
            "R_c must be {nr}×{nr}"
        )));
    }
    let r_tilde = rc + DMatrix::<Complex64>::identity(nr, nr) * Complex64::new(sigma_b2, 0.0);
    let x = r_tilde
        .lu()
        .solve(a_r)
        .ok_or_else(|| Error::Numerical("disturbance covariance is singular".into()))?;
    // a_r^H x is real for Hermitian PD R̃; divide by the full complex value
    // so the distortionless product is exactly 1 up to roundoff.
    let denom = a_r.dotc(&x);
    if denom.norm() == 0.0 {
        return Err(Error::Numerical("MVDR normalization is zero".into()));
    }
    let w = x / denom;
    let distortion = (a_r.dotc(&w) - Complex64::ONE).norm();
    if distortion > 1e-10 {
        return Err(Error::Numerical(format!(
            "MVDR distortionless residual {distortion}"
        )));
    }
    Ok(w)
}

/// Radar output SINR γ_b = w_r^H G Π W W^H Π^H G^H w_r / (w_r^H R̃ w_r),
/// with unit-variance symbols (E[ss^H] = I).
pub fn radar_sinr(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
    w_r: &DVector<Complex64>,
) -> Result<f64> {
    sel.validate_for(chan.num_ports())?;
    if prec.w.nrows() != sel.len() {
        return Err(Error::DimensionMismatch(
            "precoder rows must match the active port count".into(),
        ));
    }
    if w_r.len() != chan.num_rx() {
        return Err(Error::DimensionMismatch(
            "radar filter length must match the receive array".into(),
        ));
    }
    // t = w_r^H · G_S is a 1×n_s row; numerator = ‖t W‖².
    let g_s = select_columns(&chan.g, sel);
    let t = g_s.ad_mul(w_r); // (G_S^H w_r), column of conj(t)
    let mut num = 0.0;
    for i in 0..prec.w.ncols() {
        let mut acc = Complex64::ZERO;
        for j in 0..sel.len() {
            // (w_r^H G_S)_j = conj(t_j)
            acc += t[j].conj() * prec.w[(j, i)];
        }
        num += acc.norm_sqr();
    }
    let r_tilde = chan.disturbance_cov();
    let den = w_r.dotc(&(&r_tilde * w_r)).re;
    Ok(num / den)
}

/// Sensing-target eavesdropper SINR on user k's stream:
/// γ_e^r = |â_t^H w_k|² / (Σ_{i≠k} |â_t^H w_i|² + σ_r²).
pub fn eve_sinr_target(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
    k: usize,
) -> Result<f64> {
    check_dims(&chan.h, sel, prec)?;
    if k >= prec.w.ncols() {
        return Err(Error::InvalidParameter(format!("user index {k} out of range")));
    }
    let a_hat = select_entries(&chan.a_t, sel);
    let mut num = 0.0;
    let mut den = chan.sigma_r2;
    for i in 0..prec.w.ncols() {
        let mut acc = Complex64::ZERO;
        for j in 0..sel.len() {
            acc += a_hat[j].conj() * prec.w[(j, i)];
        }
        let p = acc.norm_sqr();
        if i == k {
            num = p;
        } else {
            den += p;
        }
    }
    Ok(num / den)
}

/// Internal eavesdropper SINR: user i overhearing user k's stream,
/// γ_e^i = |ĥ_i^H w_k|² / (Σ_{j≠k,i} |ĥ_i^H w_j|² + σ_i²).
///
/// User i's own stream is excluded from the interference (it can subtract
/// what it decodes), hence the double exclusion j ∉ {k, i}.
pub fn eve_sinr_user(
    h: &DMatrix<Complex64>,
    sel: &PortSelection,
    prec: &Precoder,
    k: usize,
    i: usize,
    sigma_i2: f64,
) -> Result<f64> {
    if i == k {
        return Err(Error::InvalidParameter(
            "eavesdropper index must differ from the target user".into(),
        ));
    }
    check_dims(h, sel, prec)?;
    if k >= h.nrows() || i >= h.nrows() {
        return Err(Error::InvalidParameter("user index out of range".into()));
    }
    let amps = rx_amplitudes(h, sel, &prec.w, i);
    let num = amps[k].norm_sqr();
    let mut den = sigma_i2;
    for (j, a) in amps.iter().enumerate() {
        if j != k && j != i {
            den += a.norm_sqr();
        }
    }
    Ok(num / den)
}

/// Computes the full [`MetricsReport`]: per-user SINRs and rates, worst-case
/// eavesdropper rates over the sensing target and all other users, clamped
/// secrecy rates, and the radar SINR under the MVDR filter for `chan`.
pub fn secrecy_report(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
) -> Result<MetricsReport> {
    let kk = chan.num_users();
    if prec.w.ncols() != kk {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} columns for {kk} users",
            prec.w.ncols()
        )));
    }
    let mut user_sinr = Vec::with_capacity(kk);
    let mut user_rate = Vec::with_capacity(kk);
    let mut eve_rate = Vec::with_capacity(kk);
    let mut secrecy = Vec::with_capacity(kk);
    for k in 0..kk {
        let gk = comm_sinr(&chan.h, sel, prec, k, chan.user_noise[k])?;
        let rk = rate(gk);
        let mut worst = rate(eve_sinr_target(chan, sel, prec, k)?);
        for i in 0..kk {
            if i != k {
                let gi = eve_sinr_user(&chan.h, sel, prec, k, i, chan.sigma_eve2)?;
                worst = worst.max(rate(gi));
            }
        }
        user_sinr.push(gk);
        user_rate.push(rk);
        eve_rate.push(worst);
        secrecy.push((rk - worst).max(0.0));
    }
    let w_r = mvdr_filter(&chan.rc, chan.sigma_b2, &chan.a_r)?;
    let radar = radar_sinr(chan, sel, prec, &w_r)?;
    let sum_secrecy = secrecy.iter().sum();
    Ok(MetricsReport {
        user_sinr,
        user_rate,
        eve_rate,
        secrecy,
        sum_secrecy,
        radar_sinr: radar,
    })
}
