//! Fractional-programming machinery: worst-case eavesdropper selection,
//! auxiliary-variable updates, surrogate-matrix assembly, and the FP-based
//! port utility / per-port scores used for selection.
//!
//! The quadratic-transform surrogate of the sum secrecy rate is, per user,
//!
//! ```text
//! log2((1+u_k)/(1+v_k)) − u_k + v_k
//!   + (1+u_k)·(2Re(δ_k a_k) − |δ_k|² b_k)
//!   − (1+v_k)·(2Re(β_k c_k) − |β_k|² e_k)
//! ```
//!
//! with a_k = ĥ_k^H w_k, b_k = Σ_i |ĥ_k^H w_i|² + σ_k², and c_k, e_k the same
//! quantities through the worst-case eavesdropper channel ĝ_k. At
//! u_k = γ_k, v_k = θ_k, δ_k = conj(a_k)/b_k, β_k = conj(c_k)/e_k the
//! surrogate is tight: it equals Σ_k log2((1+γ_k)/(1+θ_k)).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{
    comm_sinr, eve_sinr_user, mvdr_filter, select_entries, PortSelection, Precoder,
};

/// Identity of the binding eavesdropper for one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveTag {
    /// The sensing target (channel a_t, noise σ_r²).
    Target,
    /// Another downlink user by index (channel h_i, noise σ_i²).
    User(usize),
}

/// Per-user FP auxiliaries plus the worst-case eavesdropper bookkeeping.
///
/// Eavesdropper channels are kept over the full port grid; operations that
/// need the selected sub-vector slice on demand.
#[derive(Debug, Clone)]
pub struct FpState {
    /// u_k: communication-side auxiliary (= γ_k at the update point).
    pub u: Vec<f64>,
    /// v_k: eavesdropper-side auxiliary (= θ_k at the update point).
    pub v: Vec<f64>,
    /// δ_k = conj(a_k)/b_k.
    pub delta: Vec<Complex64>,
    /// β_k = conj(c_k)/e_k.
    pub beta: Vec<Complex64>,
    /// Which eavesdropper is worst-case for each user.
    pub worst_eve: Vec<EveTag>,
    /// Worst-case eavesdropper channel g_k over the full grid, per user.
    pub eve_channels: Vec<DVector<Complex64>>,
    /// Noise variance σ_e at each worst-case eavesdropper.
    pub eve_noise: Vec<f64>,
}

/// Surrogate matrices of the precoder subproblem, on the selected ports.
#[derive(Debug, Clone)]
pub struct Surrogate {
    /// C1: columns (1+u_k)·conj(δ_k)·ĥ_k.
    pub c1: DMatrix<Complex64>,
    /// D1 = Σ_k (1+u_k)|δ_k|² ĥ_k ĥ_k^H.
    pub d1: DMatrix<Complex64>,
    /// C2: columns (1+v_k)·conj(β_k)·ĝ_k.
    pub c2: DMatrix<Complex64>,
    /// D2 = Σ_k (1+v_k)|β_k|² ĝ_k ĝ_k^H.
    pub d2: DMatrix<Complex64>,
    /// D3 = â_t â_t^H (rank one).
    pub d3: DMatrix<Complex64>,
    /// ϱ: radar threshold on Tr(W^H D3 W); 0 disables the constraint.
    pub rho: f64,
}

/// Amplitudes ĝ^H w_i for all streams i, for an arbitrary full-grid channel
/// vector g restricted to the selection.
fn eve_amplitudes(
    g_full: &DVector<Complex64>,
    sel: &PortSelection,
    w: &DMatrix<Complex64>,
) -> Vec<Complex64> {
    let mut amps = vec![Complex64::ZERO; w.ncols()];
    for (i, amp) in amps.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (j, &p) in sel.indices().iter().enumerate() {
            acc += g_full[p].conj() * w[(j, i)];
        }
        *amp = acc;
    }
    amps
}

/// FP-consistent eavesdropper SINR of a candidate channel against user k's
/// stream: |ĝ^H w_k|² / (Σ_{i≠k} |ĝ^H w_i|² + σ²).
///
/// For the sensing target this is exactly the physical eavesdropping SINR.
/// For an internal eavesdropper it counts that user's own stream as
/// interference, which is what the e_k sum of the surrogate assumes — using
/// the same form here keeps the v_k update tight.
fn fp_eve_sinr(
    g_full: &DVector<Complex64>,
    sel: &PortSelection,
    w: &DMatrix<Complex64>,
    k: usize,
    sigma2: f64,
) -> f64 {
    let amps = eve_amplitudes(g_full, sel, w);
    let num = amps[k].norm_sqr();
    let mut den = sigma2;
    for (i, a) in amps.iter().enumerate() {
        if i != k {
            den += a.norm_sqr();
        }
    }
    num / den
}

/// Finds the worst-case eavesdropper of user k under the current precoder.
///
/// Candidates are scored by the physical eavesdropping SINRs (the sensing
/// target's form and the internal form that excludes the eavesdropper's own
/// stream), ties resolved target-first then lowest user index. The returned
/// θ_k is the winner's SINR in the e_k-consistent form — for the target the
/// two coincide; for an internal eavesdropper the consistent form counts its
/// own stream as interference, which is what the v_k update must tighten
/// against.
pub fn worst_case_eavesdropper(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
    k: usize,
) -> Result<(EveTag, DVector<Complex64>, f64, f64)> {
    sel.validate_for(chan.num_ports())?;
    if k >= chan.num_users() {
        return Err(Error::InvalidParameter(format!("user index {k} out of range")));
    }
    let mut tag = EveTag::Target;
    let mut best_ch = chan.a_t.clone();
    let mut best_noise = chan.sigma_r2;
    // For the target, the physical score and the consistent form agree.
    let mut best_score = fp_eve_sinr(&chan.a_t, sel, &prec.w, k, chan.sigma_r2);
    let mut best_theta = best_score;
    for i in 0..chan.num_users() {
        if i == k {
            continue;
        }
        let hi = chan.user_channel(i);
        let score = eve_sinr_user(&chan.h, sel, prec, k, i, chan.sigma_eve2)?;
        if score > best_score {
            best_score = score;
            best_theta = fp_eve_sinr(&hi, sel, &prec.w, k, chan.sigma_eve2);
            tag = EveTag::User(i);
            best_ch = hi;
            best_noise = chan.sigma_eve2;
        }
    }
    Ok((tag, best_ch, best_noise, best_theta))
}

/// Updates all FP auxiliaries at the current precoder: u_k ← γ_k,
/// v_k ← θ_k, δ_k ← conj(a_k)/b_k, β_k ← conj(c_k)/e_k (b_k and e_k sum the
/// received powers of **all** streams plus noise).
pub fn update_auxiliaries(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
) -> Result<FpState> {
    let kk = chan.num_users();
    sel.validate_for(chan.num_ports())?;
    let mut state = FpState {
        u: Vec::with_capacity(kk),
        v: Vec::with_capacity(kk),
        delta: Vec::with_capacity(kk),
        beta: Vec::with_capacity(kk),
        worst_eve: Vec::with_capacity(kk),
        eve_channels: Vec::with_capacity(kk),
        eve_noise: Vec::with_capacity(kk),
    };
    for k in 0..kk {
        let (tag, g, sigma_e, _) = worst_case_eavesdropper(chan, sel, prec, k)?;
        state.worst_eve.push(tag);
        state.eve_channels.push(g);
        state.eve_noise.push(sigma_e);
        state.u.push(0.0);
        state.v.push(0.0);
        state.delta.push(Complex64::ZERO);
        state.beta.push(Complex64::ZERO);
    }
    tighten_auxiliaries(chan, sel, prec, &mut state);
    Ok(state)
}

/// Re-tightens the scalar auxiliaries (u_k, δ_k, v_k, β_k) at the current
/// precoder while keeping the worst-eavesdropper assignment fixed. After
/// this, the surrogate touches the fixed-assignment objective at `prec.w`
/// with matching gradient.
pub fn tighten_auxiliaries(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
    fp: &mut FpState,
) {
    for k in 0..chan.num_users() {
        let hk = chan.user_channel(k);
        let amps = eve_amplitudes(&hk, sel, &prec.w);
        let a = amps[k];
        let b: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() + chan.user_noise[k];
        fp.u[k] = a.norm_sqr() / (b - a.norm_sqr());
        fp.delta[k] = a.conj() / b;

        let eamps = eve_amplitudes(&fp.eve_channels[k], sel, &prec.w);
        let c = eamps[k];
        let e: f64 = eamps.iter().map(|z| z.norm_sqr()).sum::<f64>() + fp.eve_noise[k];
        fp.v[k] = c.norm_sqr() / (e - c.norm_sqr());
        fp.beta[k] = c.conj() / e;
    }
}

/// Unclamped secrecy objective Σ_k [log2(1+γ_k) − log2(1+θ_k)] at a fixed
/// worst-eavesdropper assignment, with θ_k in the e_k-consistent form. This
/// is the quantity the alternation ascends, and the value the surrogate
/// matches exactly right after an auxiliary update.
pub fn fp_secrecy_objective(
    chan: &ChannelSet,
    sel: &PortSelection,
    w: &DMatrix<Complex64>,
    fp: &FpState,
) -> f64 {
    let mut total = 0.0;
    for k in 0..chan.num_users() {
        let hk = chan.user_channel(k);
        let amps = eve_amplitudes(&hk, sel, w);
        let sig = amps[k].norm_sqr();
        let mut den = chan.user_noise[k];
        for (i, a) in amps.iter().enumerate() {
            if i != k {
                den += a.norm_sqr();
            }
        }
        let gamma = sig / den;
        let theta = fp_eve_sinr(&fp.eve_channels[k], sel, w, k, fp.eve_noise[k]);
        total += ((1.0 + gamma) / (1.0 + theta)).log2();
    }
    total
}

/// True (unclamped) sum secrecy: Σ_k [log2(1+γ_k) − log2(1+θ_k^max)], where
/// θ_k^max is the physical worst-eavesdropper SINR — the same scoring that
/// drives the worst-eavesdropper assignment. Line searches ascend this
/// quantity directly, so a step that overshoots past an assignment crossing
/// (improving against the current eavesdropper while handing the stream to
/// another) is rejected instead of oscillating across outer iterations.
pub fn secrecy_ascent_objective(
    chan: &ChannelSet,
    sel: &PortSelection,
    prec: &Precoder,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..chan.num_users() {
        let gamma = comm_sinr(&chan.h, sel, prec, k, chan.user_noise[k])?;
        let mut worst = fp_eve_sinr(&chan.a_t, sel, &prec.w, k, chan.sigma_r2);
        for i in 0..chan.num_users() {
            if i == k {
                continue;
            }
            let s = eve_sinr_user(&chan.h, sel, prec, k, i, chan.sigma_eve2)?;
            if s > worst {
                worst = s;
            }
        }
        total += ((1.0 + gamma) / (1.0 + worst)).log2();
    }
    Ok(total)
}

/// Assembles the surrogate matrices on the selected ports and the radar
/// threshold ϱ = ζ · (w_r^H R̃ w_r)/|α|² (power is carried by W, so no
/// separate P divisor).
pub fn assemble_surrogate(
    fp: &FpState,
    chan: &ChannelSet,
    sel: &PortSelection,
    zeta: f64,
) -> Result<Surrogate> {
    sel.validate_for(chan.num_ports())?;
    let ns = sel.len();
    let kk = chan.num_users();
    if fp.u.len() != kk {
        return Err(Error::DimensionMismatch(
            "FP state user count must match the channel set".into(),
        ));
    }
    let mut c1 = DMatrix::<Complex64>::zeros(ns, kk);
    let mut c2 = DMatrix::<Complex64>::zeros(ns, kk);
    let mut d1 = DMatrix::<Complex64>::zeros(ns, ns);
    let mut d2 = DMatrix::<Complex64>::zeros(ns, ns);
    for k in 0..kk {
        let hk = select_entries(&chan.user_channel(k), sel);
        let gk = select_entries(&fp.eve_channels[k], sel);
        let wu = 1.0 + fp.u[k];
        let wv = 1.0 + fp.v[k];
        c1.set_column(k, &(&hk * (fp.delta[k].conj() * wu)));
        c2.set_column(k, &(&gk * (fp.beta[k].conj() * wv)));
        let du = wu * fp.delta[k].norm_sqr();
        let dv = wv * fp.beta[k].norm_sqr();
        d1 += &hk * hk.adjoint() * Complex64::new(du, 0.0);
        d2 += &gk * gk.adjoint() * Complex64::new(dv, 0.0);
    }
    let a_hat = select_entries(&chan.a_t, sel);
    let d3 = &a_hat * a_hat.adjoint();

    let rho = if zeta > 0.0 {
        let alpha2 = chan.alpha.norm_sqr();
        if alpha2 <= 0.0 {
            return Err(Error::Infeasible(
                "radar threshold ζ > 0 with zero target amplitude".into(),
            ));
        }
        // mvdr_filter enforces the distortionless property w_r^H a_r = 1,
        // which this ϱ formula relies on for rank-one G.
        let w_r = mvdr_filter(&chan.rc, chan.sigma_b2, &chan.a_r)?;
        let r_tilde = chan.disturbance_cov();
        let denom_power = w_r.dotc(&(&r_tilde * &w_r)).re;
        zeta * denom_power / alpha2
    } else {
        0.0
    };

    Ok(Surrogate {
        c1,
        d1,
        c2,
        d2,
        d3,
        rho,
    })
}

/// Hermitian quadratic form Re Tr(W^H A W) (real for Hermitian A).
pub fn quad_form(a: &DMatrix<Complex64>, w: &DMatrix<Complex64>) -> f64 {
    let aw = a * w;
    let mut acc = 0.0;
    for (x, y) in w.iter().zip(aw.iter()) {
        acc += (x.conj() * y).re;
    }
    acc
}

/// 2 Re Tr(W^H M).
pub fn lin_form(m: &DMatrix<Complex64>, w: &DMatrix<Complex64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in w.iter().zip(m.iter()) {
        acc += (x.conj() * y).re;
    }
    2.0 * acc
}

/// The W-dependent quadratic part of the surrogate objective:
/// 2Re Tr(W^H C1) − Tr(W^H D1 W) − 2Re Tr(W^H C2) + Tr(W^H D2 W).
pub fn surrogate_quadratic(sur: &Surrogate, w: &DMatrix<Complex64>) -> f64 {
    lin_form(&sur.c1, w) - quad_form(&sur.d1, w) - lin_form(&sur.c2, w) + quad_form(&sur.d2, w)
}

/// The W-independent remainder of the surrogate objective:
/// Σ_k log2((1+u_k)/(1+v_k)) − u_k + v_k − (1+u_k)|δ_k|²σ_k²
/// + (1+v_k)|β_k|²σ_e².
pub fn surrogate_constant(fp: &FpState, chan: &ChannelSet) -> f64 {
    let mut acc = 0.0;
    for k in 0..fp.u.len() {
        let wu = 1.0 + fp.u[k];
        let wv = 1.0 + fp.v[k];
        acc += (wu / wv).log2() - fp.u[k] + fp.v[k];
        acc -= wu * fp.delta[k].norm_sqr() * chan.user_noise[k];
        acc += wv * fp.beta[k].norm_sqr() * fp.eve_noise[k];
    }
    acc
}

/// Full surrogate objective value at W (constant + quadratic parts). Tight
/// at the auxiliary update point: equals Σ_k log2((1+γ_k)/(1+θ_k)).
pub fn surrogate_value(
    fp: &FpState,
    sur: &Surrogate,
    chan: &ChannelSet,
    w: &DMatrix<Complex64>,
) -> f64 {
    surrogate_constant(fp, chan) + surrogate_quadratic(sur, w)
}

/// FP-based port utility U(r) of a binary activation pattern, with the
/// precoder embedded into the full index space (`w_tilde` is N_s×K with
/// zero rows on inactive ports).
///
/// Per user, with y_i = Σ_n r_n conj(h_k(n)) w̃_{n,i} the masked received
/// amplitudes (and z_i the same through the eavesdropper channel):
///
/// ```text
/// U_k = (1+u_k)·(2Re(δ_k y_k) − |δ_k|² Σ_i |y_i|²)
///     − (1+v_k)·(2Re(β_k z_k) − |β_k|² Σ_i |z_i|²)
/// ```
///
/// which is the port-indexed expansion of the surrogate's W-dependent terms:
/// the |y_i|² sums carry exactly the r_n r_{n'} cross and diagonal products
/// of the selection indicator.
pub fn port_utility(
    fp: &FpState,
    h_full: &DMatrix<Complex64>,
    r: &[bool],
    w_tilde: &DMatrix<Complex64>,
) -> f64 {
    let kk = fp.u.len();
    let streams = w_tilde.ncols();
    let masked_amps = |row_conj: &dyn Fn(usize) -> Complex64| -> Vec<Complex64> {
        let mut amps = vec![Complex64::ZERO; streams];
        for (n, &active) in r.iter().enumerate() {
            if !active {
                continue;
            }
            let cn = row_conj(n);
            for (i, amp) in amps.iter_mut().enumerate() {
                *amp += cn * w_tilde[(n, i)];
            }
        }
        amps
    };
    let mut u_total = 0.0;
    for k in 0..kk {
        // H rows already hold h_k^H, so h_full[(k, n)] = conj(h_k(n)).
        let y = masked_amps(&|n| h_full[(k, n)]);
        let z = masked_amps(&|n| fp.eve_channels[k][n].conj());
        let wu = 1.0 + fp.u[k];
        let wv = 1.0 + fp.v[k];
        let ysum: f64 = y.iter().map(|a| a.norm_sqr()).sum();
        let zsum: f64 = z.iter().map(|a| a.norm_sqr()).sum();
        u_total += wu * (2.0 * (fp.delta[k] * y[k]).re - fp.delta[k].norm_sqr() * ysum);
        u_total -= wv * (2.0 * (fp.beta[k] * z[k]).re - fp.beta[k].norm_sqr() * zsum);
    }
    u_total
}

/// Per-port utility scores Γ_n = Σ_k [ |h_k(n)|·(1+u_k)·|δ_k|
/// − (1+v_k)·|β_k|·|g_k(n)| ]; top-n_s by Γ maximizes Σ_{n∈S} Γ_n exactly.
pub fn gamma_scores(fp: &FpState, h_full: &DMatrix<Complex64>) -> Vec<f64> {
    let n_ports = h_full.ncols();
    let mut gamma = vec![0.0; n_ports];
    for k in 0..fp.u.len() {
        let gain = (1.0 + fp.u[k]) * fp.delta[k].norm();
        let leak = (1.0 + fp.v[k]) * fp.beta[k].norm();
        for (n, g) in gamma.iter_mut().enumerate() {
            *g += h_full[(k, n)].norm() * gain - leak * fp.eve_channels[k][n].norm();
        }
    }
    gamma
}

/// Indices of the n_s largest scores, ties to the lowest index, returned in
/// ascending index order.
pub fn top_ports(scores: &[f64], n_active: usize) -> PortSelection {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(n_active).collect();
    chosen.sort_unstable();
    PortSelection::new(chosen).expect("top_ports produces distinct indices")
}

/// Embeds an n_s×K precoder into the full N_s×K index space (zero rows on
/// inactive ports).
pub fn embed_precoder(
    w: &DMatrix<Complex64>,
    sel: &PortSelection,
    n_ports: usize,
) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(n_ports, w.ncols());
    for (j, &p) in sel.indices().iter().enumerate() {
        for i in 0..w.ncols() {
            out[(p, i)] = w[(j, i)];
        }
    }
    out
}

/// Rows of a full-grid precoder at the selected ports (inverse of
/// [`embed_precoder`] on its active rows).
pub fn extract_precoder(w_tilde: &DMatrix<Complex64>, sel: &PortSelection) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(sel.len(), w_tilde.ncols());
    for (j, &p) in sel.indices().iter().enumerate() {
        for i in 0..w_tilde.ncols() {
            out[(j, i)] = w_tilde[(p, i)];
        }
    }
    out
}
