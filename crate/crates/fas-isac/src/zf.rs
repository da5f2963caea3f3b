//! Zero-forcing precoding and the three low-complexity port-selection
//! baselines.
//!
//! The zero-forcing (ZF) precoder inverts the active-port channel so every
//! user sees an interference-free link whose SINR collapses to the closed
//! form P / (σ_k² · Tr((H_S H_S^H)^{-1})). Because that map is monotone, port
//! selection reduces to shaping the Gram spectrum, which the three schemes
//! exploit at different cost points:
//!
//! * [`greedy_removal`] — start from the full grid and repeatedly drop the
//!   port whose removal costs the least sum secrecy while the radar
//!   constraint allows it;
//! * [`gs_tim`] — grow the selection from empty, adding the port minimizing
//!   the Gram trace inverse by explicit inversion;
//! * [`svd_tim`] — the identical greedy loop evaluated through singular
//!   values (Tr((H_S H_S^H)^{-1}) = Σ μ_i^{-2}), returning the same
//!   selections.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{
    eve_sinr_target, mvdr_filter, radar_sinr, select_columns, MetricsReport, PortSelection,
    Precoder,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Relative spectral floor: singular values at or below this fraction of the
/// largest are treated as zero when ranking candidate selections.
const RANK_TOL: f64 = 1e-12;

/// Relative slack on the radar constraint when classifying an operating
/// point as feasible (matches the joint solver's convention).
const FEAS_SLACK: f64 = 1e-6;

/// One zero-forcing operating point: an active-port subset together with the
/// unit-power ZF precoder on it and the resulting metrics.
#[derive(Debug, Clone)]
pub struct ZfSolution {
    /// Active ports, ascending.
    pub selection: PortSelection,
    /// n_s×K zero-forcing precoder normalized to Tr(W W^H) = 1; scale by √P
    /// for transmission at power P.
    pub w_zf: DMatrix<Complex64>,
    /// Tr((H_S H_S^H)^{-1}) on the active ports.
    pub trace_inv: f64,
    /// Metrics at the requested transmit power.
    pub report: MetricsReport,
    /// True when the radar constraint is violated at the returned point, or
    /// when a removal step had no constraint-respecting candidate.
    pub constraint_missed: bool,
    /// (sum secrecy, radar SINR) after each greedy removal step, in step
    /// order (empty for solutions built directly from a fixed selection). A
    /// step whose every candidate was rank-deficient records (0.0, 0.0).
    pub removal_trace: Vec<(f64, f64)>,
}

fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Zero-forcing precoder on the active-port channel `h_s` (rows are h_k^H):
/// W = H^H (H H^H)^{-1} / √Tr((H H^H)^{-1}), returned together with the Gram
/// trace inverse. The result has exactly unit Frobenius norm, so
/// H_S · W = I / √trace_inv.
pub fn zf_precoder(h_s: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, f64)> {
    let k = h_s.nrows();
    let n = h_s.ncols();
    if k == 0 {
        return Err(Error::InvalidParameter("empty channel matrix".into()));
    }
    if n < k {
        return Err(Error::InvalidParameter(format!(
            "zero-forcing needs at least {k} active ports for {k} users, got {n}"
        )));
    }
    let svals = h_s.clone().svd(false, false).singular_values;
    let mu_max = svals.max();
    if !(mu_max > 0.0) || svals.iter().any(|&mu| mu <= RANK_TOL * mu_max) {
        return Err(Error::InvalidParameter(
            "rank-deficient active-port channel: zero-forcing undefined".into(),
        ));
    }
    let gram = h_s * h_s.adjoint();
    let ginv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Gram inversion failed".into()))?;
    let trace_inv = ginv.trace().re;
    if !(trace_inv > 0.0) {
        return Err(Error::Numerical(format!(
            "non-positive Gram trace inverse {trace_inv}"
        )));
    }
    let mut w = h_s.adjoint() * ginv;
    let norm = w.norm();
    w.unscale_mut(norm);
    Ok((w, trace_inv))
}

/// Internal evaluation: ZF precoder on `sel` plus the metrics report at
/// transmit power `power`, reusing a precomputed MVDR filter `w_r`.
fn zf_evaluate(
    chan: &ChannelSet,
    sel: &PortSelection,
    power: f64,
    w_r: &DVector<Complex64>,
) -> Result<(DMatrix<Complex64>, f64, MetricsReport)> {
    let h_s = select_columns(&chan.h, sel);
    let (w_unit, trace_inv) = zf_precoder(&h_s)?;
    let prec = Precoder::new(&w_unit * Complex64::new(power.sqrt(), 0.0), power)?;
    let kk = chan.num_users();
    let mut user_sinr = Vec::with_capacity(kk);
    let mut user_rate = Vec::with_capacity(kk);
    let mut eve_rate = Vec::with_capacity(kk);
    let mut secrecy = Vec::with_capacity(kk);
    for k in 0..kk {
        // Interference-free closed form; inter-user eavesdroppers are nulled
        // by construction, so the sensing target is the worst eavesdropper.
        let gk = power / (chan.user_noise[k] * trace_inv);
        let rk = rate(gk);
        let ek = rate(eve_sinr_target(chan, sel, &prec, k)?);
        user_sinr.push(gk);
        user_rate.push(rk);
        eve_rate.push(ek);
        secrecy.push((rk - ek).max(0.0));
    }
    let radar = radar_sinr(chan, sel, &prec, w_r)?;
    let sum_secrecy = secrecy.iter().sum();
    let report = MetricsReport {
        user_sinr,
        user_rate,
        eve_rate,
        secrecy,
        sum_secrecy,
        radar_sinr: radar,
    };
    Ok((w_unit, trace_inv, report))
}

/// Metrics of the zero-forcing precoder on `sel` at transmit power `power`:
/// interference-free user SINRs P/(σ_k² trace_inv), worst-case eavesdropper
/// rates (the sensing target — inter-user eavesdropping is nulled), and the
/// radar SINR under the MVDR filter.
pub fn zf_metrics(chan: &ChannelSet, sel: &PortSelection, power: f64) -> Result<MetricsReport> {
    if !(power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "transmit power must be positive, got {power}"
        )));
    }
    sel.validate_for(chan.num_ports())?;
    let w_r = mvdr_filter(&chan.rc, chan.sigma_b2, &chan.a_r)?;
    zf_evaluate(chan, sel, power, &w_r).map(|(_, _, report)| report)
}

/// Assembles a [`ZfSolution`] on a given selection, classifying feasibility
/// against the radar floor `zeta`.
pub fn zf_solution(
    chan: &ChannelSet,
    sel: PortSelection,
    power: f64,
    zeta: f64,
) -> Result<ZfSolution> {
    if !(power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "transmit power must be positive, got {power}"
        )));
    }
    if zeta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radar floor must be nonnegative, got {zeta}"
        )));
    }
    sel.validate_for(chan.num_ports())?;
    let w_r = mvdr_filter(&chan.rc, chan.sigma_b2, &chan.a_r)?;
    let (w_zf, trace_inv, report) = zf_evaluate(chan, &sel, power, &w_r)?;
    let constraint_missed = report.radar_sinr < zeta * (1.0 - FEAS_SLACK);
    Ok(ZfSolution {
        selection: sel,
        w_zf,
        trace_inv,
        report,
        constraint_missed,
        removal_trace: Vec::new(),
    })
}

/// Greedy port removal: start from the full grid and drop one port per step,
/// choosing the removal that loses the least zero-forcing sum secrecy among
/// those keeping the radar SINR at or above `zeta`, until `n_active` ports
/// remain. When every candidate removal at some step violates the floor, the
/// least-damaging port is removed anyway and the result is flagged.
pub fn greedy_removal(
    chan: &ChannelSet,
    n_active: usize,
    power: f64,
    zeta: f64,
) -> Result<ZfSolution> {
    let n_ports = chan.num_ports();
    let kk = chan.num_users();
    if n_active < kk {
        return Err(Error::InvalidParameter(format!(
            "need at least {kk} active ports for {kk} users, got {n_active}"
        )));
    }
    if n_active > n_ports {
        return Err(Error::InvalidParameter(format!(
            "cannot activate {n_active} of {n_ports} ports"
        )));
    }
    if !(power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "transmit power must be positive, got {power}"
        )));
    }
    if zeta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radar floor must be nonnegative, got {zeta}"
        )));
    }
    let w_r = mvdr_filter(&chan.rc, chan.sigma_b2, &chan.a_r)?;
    let mut active: Vec<usize> = (0..n_ports).collect();
    let mut dead_end = false;
    let mut removal_trace = Vec::with_capacity(n_ports - n_active);
    while active.len() > n_active {
        // (sum secrecy, radar SINR, position in `active`), best feasible and
        // best overall.
        let mut best_feas: Option<(f64, f64, usize)> = None;
        let mut best_any: Option<(f64, f64, usize)> = None;
        for pos in 0..active.len() {
            let mut cand = active.clone();
            cand.remove(pos);
            let sel = PortSelection::new(cand)?;
            let Ok((_, _, report)) = zf_evaluate(chan, &sel, power, &w_r) else {
                // Rank-deficient candidate: this removal is not available.
                continue;
            };
            let sec = report.sum_secrecy;
            if best_any.is_none_or(|(s, _, _)| sec > s) {
                best_any = Some((sec, report.radar_sinr, pos));
            }
            if report.radar_sinr >= zeta * (1.0 - FEAS_SLACK)
                && best_feas.is_none_or(|(s, _, _)| sec > s)
            {
                best_feas = Some((sec, report.radar_sinr, pos));
            }
        }
        let (pos, step) = match (best_feas, best_any) {
            (Some((sec, rad, pos)), _) => (pos, (sec, rad)),
            (None, Some((sec, rad, pos))) => {
                dead_end = true;
                (pos, (sec, rad))
            }
            // Every removal is rank-deficient: drop the lowest port index
            // deterministically; final assembly reports the defect if it
            // persists.
            (None, None) => (0, (0.0, 0.0)),
        };
        removal_trace.push(step);
        active.remove(pos);
    }
    let mut sol = zf_solution(chan, PortSelection::new(active)?, power, zeta)?;
    sol.constraint_missed |= dead_end;
    sol.removal_trace = removal_trace;
    Ok(sol)
}

/// Candidate ranking key: (rank deficit, trace-inverse cost). Lower is
/// better lexicographically; ties on both fall back to the lowest port
/// index by scan order.
fn candidate_key(h_c: &DMatrix<Complex64>, kk: usize, explicit: bool) -> (usize, f64) {
    let cols = h_c.ncols();
    if cols < kk {
        // Build-up regime: the Gram is structurally singular. Rank
        // candidates by rank deficit first, then by the trace of the
        // pseudo-inverse restricted to the nonzero spectrum.
        let svals = h_c.clone().svd(false, false).singular_values;
        let mu_max = svals.max();
        if !(mu_max > 0.0) {
            return (cols.min(kk), 0.0);
        }
        let mut rank = 0;
        let mut cost = 0.0;
        for &mu in svals.iter() {
            if mu > RANK_TOL * mu_max {
                rank += 1;
                cost += 1.0 / (mu * mu);
            }
        }
        (cols.min(kk) - rank, cost)
    } else if explicit {
        let gram = h_c * h_c.adjoint();
        match gram.try_inverse() {
            Some(inv) => (0, inv.trace().re),
            None => (0, f64::INFINITY),
        }
    } else {
        let svals = h_c.clone().svd(false, false).singular_values;
        let mu_max = svals.max();
        if !(mu_max > 0.0) {
            return (0, f64::INFINITY);
        }
        let mut cost = 0.0;
        for &mu in svals.iter() {
            if mu <= RANK_TOL * mu_max {
                return (0, f64::INFINITY);
            }
            cost += 1.0 / (mu * mu);
        }
        (0, cost)
    }
}

/// Shared greedy loop for the two trace-inverse schemes: grow the selection
/// from empty, each step adding the port that minimizes the ranking key.
fn tim_greedy_loop(
    h: &DMatrix<Complex64>,
    n_active: usize,
    explicit: bool,
) -> Result<PortSelection> {
    let n_ports = h.ncols();
    let kk = h.nrows();
    if kk == 0 {
        return Err(Error::InvalidParameter("empty channel matrix".into()));
    }
    if n_active < kk {
        return Err(Error::InvalidParameter(format!(
            "need at least {kk} active ports for {kk} users, got {n_active}"
        )));
    }
    if n_active > n_ports {
        return Err(Error::InvalidParameter(format!(
            "cannot activate {n_active} of {n_ports} ports"
        )));
    }
    let mut picked: Vec<usize> = Vec::with_capacity(n_active);
    while picked.len() < n_active {
        let mut best: Option<(usize, f64, usize)> = None;
        for j in 0..n_ports {
            if picked.contains(&j) {
                continue;
            }
            let mut cols = picked.clone();
            cols.push(j);
            let h_c = h.select_columns(cols.iter());
            let (deficit, cost) = candidate_key(&h_c, kk, explicit);
            let better = match best {
                None => true,
                Some((bd, bc, _)) => deficit < bd || (deficit == bd && cost < bc),
            };
            if better {
                best = Some((deficit, cost, j));
            }
        }
        // The scan always visits at least one port (n_active ≤ n_ports).
        picked.push(best.expect("nonempty candidate scan").2);
    }
    picked.sort_unstable();
    PortSelection::new(picked)
}

/// Greedy trace-inverse minimization: grow the selection from empty, adding
/// argmin_j Tr((H_{S∪{j}} H_{S∪{j}}^H)^{-1}) by explicit Gram inversion.
/// While the Gram is structurally singular (fewer ports than users) the
/// pseudo-spectrum build-up rule applies: highest rank first, then smallest
/// pseudo-inverse trace.
pub fn gs_tim(h: &DMatrix<Complex64>, n_active: usize) -> Result<PortSelection> {
    tim_greedy_loop(h, n_active, true)
}

/// The same greedy loop as [`gs_tim`] with the cost evaluated through
/// singular values — Tr((H_S H_S^H)^{-1}) = Σ_i μ_i^{-2} — instead of an
/// explicit inverse. A zero singular value makes the cost +∞ (candidate
/// deprioritized). Selections match [`gs_tim`] on every instance.
pub fn svd_tim(h: &DMatrix<Complex64>, n_active: usize) -> Result<PortSelection> {
    tim_greedy_loop(h, n_active, false)
}
