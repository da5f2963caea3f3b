//! Joint precoding and port selection: the SCA precoder loop with its
//! dual-bisection subproblem, the outer FP alternation, and the radar-centric
//! variant (radar SINR maximized subject to a secrecy floor).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::fp::{
    assemble_surrogate, embed_precoder, extract_precoder, gamma_scores, lin_form, port_utility,
    quad_form, secrecy_ascent_objective, surrogate_quadratic, surrogate_value,
    tighten_auxiliaries, top_ports, update_auxiliaries, FpState, Surrogate,
};
use crate::metrics::{
    mvdr_filter, secrecy_report, select_entries, MetricsReport, PortSelection, Precoder,
};

/// Tuning knobs shared by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Number of ports to activate (n_s).
    pub n_active: usize,
    /// Transmit power budget P (carried by W).
    pub power: f64,
    /// Radar SINR threshold ζ (0 disables the constraint).
    pub zeta: f64,
    /// Secrecy floor for the radar-centric mode.
    pub r_th: f64,
    /// Outer (alternating) iteration cap.
    pub max_outer_iters: usize,
    /// Inner SCA iteration cap.
    pub max_sca_iters: usize,
    /// Convergence threshold ε on ‖W^{(t+1)} − W^{(t)}‖_F².
    pub tol: f64,
    /// Bisection tolerance of the subproblem dual search.
    pub bisection_tol: f64,
    /// Re-score and reselect ports each outer iteration (JPPS); disabling
    /// freezes the initial selection.
    pub reselect: bool,
    /// Draw the initial selection uniformly at random instead of from the
    /// matched-filter Γ scores.
    pub random_init: bool,
    /// Run the deterministic extra starts and the proxy-guided single-swap
    /// refinement around the converged selection; disabling leaves the plain
    /// single-start alternation.
    pub refine: bool,
}

impl SolverOptions {
    /// Defaults for a given port budget and transmit power; the convergence
    /// threshold scales with the power so the stop rule is SNR-free.
    pub fn new(n_active: usize, power: f64) -> Self {
        Self {
            n_active,
            power,
            zeta: 0.0,
            r_th: 0.0,
            max_outer_iters: 30,
            max_sca_iters: 60,
            tol: 1e-4 * power,
            bisection_tol: 1e-6,
            reselect: true,
            random_init: false,
            refine: true,
        }
    }

    fn validate(&self, chan: &ChannelSet) -> Result<()> {
        if self.n_active == 0 || self.n_active > chan.num_ports() {
            return Err(Error::InvalidParameter(format!(
                "n_active = {} must lie in [1, {}]",
                self.n_active,
                chan.num_ports()
            )));
        }
        if chan.num_users() > self.n_active {
            return Err(Error::InvalidParameter(format!(
                "need n_active ≥ K (got n_active = {}, K = {})",
                self.n_active,
                chan.num_users()
            )));
        }
        if !(self.power > 0.0) {
            return Err(Error::InvalidParameter("power must be positive".into()));
        }
        if !(self.tol > 0.0) || !(self.bisection_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.zeta < 0.0 || self.r_th < 0.0 {
            return Err(Error::InvalidParameter(
                "thresholds must be nonnegative".into(),
            ));
        }
        if self.max_outer_iters == 0 || self.max_sca_iters == 0 {
            return Err(Error::InvalidParameter(
                "iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One outer-iteration snapshot of the JPPS solver.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    /// Exact surrogate objective value at this iterate.
    pub surrogate: f64,
    /// True clamped sum secrecy rate.
    pub sum_secrecy: f64,
    pub radar_sinr: f64,
    pub selection: Vec<usize>,
    /// True when this record marks a reselection rolled back after the
    /// precoder subproblem turned infeasible.
    pub reverted: bool,
}

/// Result of the joint optimization.
#[derive(Debug, Clone)]
pub struct JppsOutcome {
    pub selection: PortSelection,
    pub precoder: Precoder,
    pub report: MetricsReport,
    pub trace: Vec<IterRecord>,
    /// Set when no iterate satisfied γ_b ≥ ζ; the returned point is then the
    /// final iterate rather than a constraint-satisfying best.
    pub constraint_missed: bool,
}

/// Radar threshold ϱ = ζ · (w_r^H R̃ w_r)/|α|² on Tr(W^H D3 W), shared by the
/// surrogate assembly and the solvers' feasibility checks.
pub fn radar_rho(chan: &ChannelSet, zeta: f64) -> Result<f64> {
    if zeta <= 0.0 {
        return Ok(0.0);
    }
    let alpha2 = chan.alpha.norm_sqr();
    if alpha2 <= 0.0 {
        return Err(Error::Infeasible(
            "radar threshold ζ > 0 with zero target amplitude".into(),
        ));
    }
    let w_r = mvdr_filter(&chan.rc, chan.sigma_b2, &chan.a_r)?;
    let r_tilde = chan.disturbance_cov();
    Ok(zeta * w_r.dotc(&(&r_tilde * &w_r)).re / alpha2)
}

fn ball_point(m: &DMatrix<Complex64>, radius: f64) -> Option<DMatrix<Complex64>> {
    let n = m.norm();
    if n > 0.0 {
        Some(m * Complex64::new(radius / n, 0.0))
    } else {
        None
    }
}

/// Solves the linearized subproblem
///
/// ```text
/// maximize 2Re Tr(W^H M)   s.t.   ‖W‖_F ≤ √P,  2Re Tr(W^H B) ≥ ϱ
/// ```
///
/// by dual bisection on W(μ) = √P·(M + μB)/‖M + μB‖_F: W(0) if already
/// feasible, otherwise the smallest μ ≥ 0 whose iterate meets the radar
/// constraint (the constraint value is nondecreasing in μ by Cauchy–Schwarz).
/// Returns a structured infeasibility when even the constraint's supremum
/// 2√P‖B‖_F falls short of ϱ.
pub fn solve_precoder_subproblem(
    m: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    power: f64,
    rho: f64,
    bisection_tol: f64,
) -> Result<DMatrix<Complex64>> {
    let radius = power.sqrt();
    if rho <= 0.0 {
        // Constraint inactive: linear objective over the Frobenius ball.
        return Ok(ball_point(m, radius)
            .unwrap_or_else(|| DMatrix::zeros(m.nrows(), m.ncols())));
    }
    let limit = 2.0 * radius * b.norm();
    if limit < rho {
        return Err(Error::Infeasible(format!(
            "radar constraint unreachable: sup 2√P‖B‖ = {limit} < ϱ = {rho}"
        )));
    }
    let w_of = |mu: f64| ball_point(&(m + b * Complex64::new(mu, 0.0)), radius);
    let meets = |w: &DMatrix<Complex64>| lin_form(b, w) >= rho;

    if let Some(w0) = w_of(0.0) {
        if meets(&w0) {
            return Ok(w0);
        }
    }
    // Bracket: double μ until the constraint is met.
    let mut hi = 1.0;
    let mut found = false;
    for _ in 0..60 {
        if let Some(w) = w_of(hi) {
            if meets(&w) {
                found = true;
                break;
            }
        }
        hi *= 2.0;
    }
    if !found {
        return Err(Error::Infeasible(
            "radar constraint not reached within the dual bracket".into(),
        ));
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > bisection_tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        match w_of(mid) {
            Some(w) if meets(&w) => hi = mid,
            _ => lo = mid,
        }
    }
    // Return the feasible endpoint of the final bracket.
    Ok(w_of(hi).expect("M + μB nonzero at a feasible μ"))
}

/// Inner SCA result: the precoder and the exact surrogate (quadratic-part)
/// value at each accepted iterate, starting with the initial point.
#[derive(Debug, Clone)]
pub struct ScaResult {
    pub w: DMatrix<Complex64>,
    /// surrogate_quadratic at W^(0), W^(1), … — non-decreasing.
    pub objective_trace: Vec<f64>,
}

/// SCA loop for the precoder at fixed FP auxiliaries (fixed surrogate).
///
/// Each iteration solves the linearized subproblem at W^(t) and accepts
/// W^(t+1) = W^(t) + τ·(Ŵ − W^(t)) with τ from an exact line search of the
/// quadratic surrogate along the step (τ = 1 whenever the full step already
/// ascends), which keeps the exact surrogate objective non-decreasing. The
/// radar constraint is linearized as its tangent minorant, so every accepted
/// iterate satisfies the true constraint Tr(W^H D3 W) ≥ ϱ.
pub fn sca_precoder(
    sur: &Surrogate,
    w0: &DMatrix<Complex64>,
    opts: &SolverOptions,
) -> Result<ScaResult> {
    let p = opts.power;
    if w0.norm_squared() > p + 1e-9 * p.max(1.0) {
        return Err(Error::InvalidParameter(
            "initial precoder exceeds the power budget".into(),
        ));
    }
    if sur.rho > 0.0 && quad_form(&sur.d3, w0) < sur.rho * (1.0 - 1e-9) {
        return Err(Error::Infeasible(
            "initial precoder violates the radar constraint".into(),
        ));
    }
    let mut w = w0.clone();
    let mut obj = surrogate_quadratic(sur, &w);
    let mut trace = vec![obj];
    for _ in 0..opts.max_sca_iters {
        let m = &sur.c1 - &sur.c2 + &sur.d2 * &w - &sur.d1 * &w;
        let (b, rho_eff) = if sur.rho > 0.0 {
            // Tangent minorant: 2Re Tr(W^H D3 W^t) − Tr(W^tH D3 W^t) ≤
            // Tr(W^H D3 W), so requiring the left side ≥ ϱ keeps accepted
            // iterates truly feasible.
            (&sur.d3 * &w, sur.rho + quad_form(&sur.d3, &w))
        } else {
            (DMatrix::zeros(w.nrows(), w.ncols()), 0.0)
        };
        let w_hat = solve_precoder_subproblem(&m, &b, p, rho_eff, opts.bisection_tol)?;
        let delta = &w_hat - &w;
        // Surrogate along the step: J(W + τΔ) = J(W) + a·τ + q·τ².
        let a = lin_form(&m, &delta);
        let q = quad_form(&sur.d2, &delta) - quad_form(&sur.d1, &delta);
        let tau = if a <= 0.0 {
            0.0
        } else if q >= 0.0 {
            1.0
        } else {
            (a / (-2.0 * q)).min(1.0)
        };
        if tau == 0.0 {
            break; // stationary: the subproblem cannot improve on W
        }
        let step = delta * Complex64::new(tau, 0.0);
        let diff = step.norm_squared();
        w += step;
        let next = surrogate_quadratic(sur, &w);
        debug_assert!(
            next >= obj - 1e-8 * obj.abs().max(1.0),
            "surrogate decreased: {obj} -> {next}"
        );
        obj = next;
        trace.push(obj);
        if diff < opts.tol {
            break;
        }
    }
    Ok(ScaResult {
        w,
        objective_trace: trace,
    })
}

/// Matched-filter precoder on the selected ports (columns ∝ ĥ_k), scaled to
/// the full power budget.
fn matched_filter(chan: &ChannelSet, sel: &PortSelection, power: f64) -> DMatrix<Complex64> {
    let kk = chan.num_users();
    let mut w = DMatrix::<Complex64>::zeros(sel.len(), kk);
    for k in 0..kk {
        let hk = select_entries(&chan.user_channel(k), sel);
        w.set_column(k, &hk);
    }
    let n = w.norm();
    if n > 0.0 {
        w * Complex64::new(power.sqrt() / n, 0.0)
    } else {
        DMatrix::from_element(sel.len(), kk, Complex64::new((power / (sel.len() * kk) as f64).sqrt(), 0.0))
    }
}

/// Radar beam energy Tr(W^H â â^H W) = ‖â^H W‖² of a precoder.
fn radar_energy(a_hat: &nalgebra::DVector<Complex64>, w: &DMatrix<Complex64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.ncols() {
        let mut amp = Complex64::ZERO;
        for j in 0..w.nrows() {
            amp += a_hat[j].conj() * w[(j, i)];
        }
        acc += amp.norm_sqr();
    }
    acc
}

/// Blends a precoder toward the radar-matched rank-one solution until the
/// radar energy threshold holds, rescaling to exactly √P. Errors only when
/// even full radar beamforming (energy P·‖â‖²) cannot reach ϱ.
fn feasibilize(
    w: DMatrix<Complex64>,
    a_hat: &nalgebra::DVector<Complex64>,
    power: f64,
    rho: f64,
) -> Result<DMatrix<Complex64>> {
    if rho <= 0.0 || radar_energy(a_hat, &w) >= rho {
        return Ok(w);
    }
    let cap = power * a_hat.norm_squared();
    if cap < rho {
        return Err(Error::Infeasible(format!(
            "power budget cannot reach the radar threshold: P‖â‖² = {cap} < ϱ = {rho}"
        )));
    }
    let mut w_radar = DMatrix::<Complex64>::zeros(w.nrows(), w.ncols());
    w_radar.set_column(0, &(a_hat * Complex64::new(power.sqrt() / a_hat.norm(), 0.0)));
    let blend = |tau: f64| -> DMatrix<Complex64> {
        let mix = &w * Complex64::new(1.0 - tau, 0.0) + &w_radar * Complex64::new(tau, 0.0);
        match ball_point(&mix, power.sqrt()) {
            Some(scaled) => scaled,
            None => w_radar.clone(),
        }
    };
    // τ = 1 is always feasible; bisect toward the smallest feasible blend.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if radar_energy(a_hat, &blend(mid)) >= rho {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(blend(hi))
}

/// Γ-score initial selection derived from a full-grid matched filter.
fn initial_selection<R: Rng + ?Sized>(
    chan: &ChannelSet,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<PortSelection> {
    let n_ports = chan.num_ports();
    if opts.random_init {
        // Partial Fisher–Yates over the index set, then sorted.
        let mut idx: Vec<usize> = (0..n_ports).collect();
        for i in 0..opts.n_active {
            let j = i + rng.random_range(0..(n_ports - i));
            idx.swap(i, j);
        }
        let mut chosen: Vec<usize> = idx[..opts.n_active].to_vec();
        chosen.sort_unstable();
        return PortSelection::new(chosen);
    }
    let full = PortSelection::full(n_ports);
    let w_mf = matched_filter(chan, &full, opts.power);
    let prec = Precoder::new(w_mf, opts.power)?;
    let fp = update_auxiliaries(chan, &full, &prec)?;
    let gamma = gamma_scores(&fp, &chan.h);
    Ok(top_ports(&gamma, opts.n_active))
}

/// Joint precoding and port selection by alternating FP auxiliary updates,
/// Γ-guided reselection (accepted only when the FP port utility does not
/// decrease), and linearized precoder steps, until the precoder change
/// criterion or the outer iteration cap. Returns the best
/// constraint-satisfying iterate by true sum secrecy; when no iterate
/// satisfies γ_b ≥ ζ the final iterate is returned with `constraint_missed`
/// set.
///
/// With `refine` on (the default) the alternation additionally runs from two
/// deterministic extra starts — a trace-inverse greedy selection
/// (separability-aware) and a matched-filter secrecy greedy selection
/// (leakage-aware) — and then polishes the winning selection with a
/// proxy-guided single-swap search, re-solving only the most promising
/// swaps. Every candidate goes through the same alternation; the best
/// feasible outcome wins.
///
/// `rng` is consumed only when `random_init` is set; the default
/// initialization is fully deterministic.
pub fn jpps<R: Rng + ?Sized>(
    chan: &ChannelSet,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<JppsOutcome> {
    opts.validate(chan)?;
    let sel = initial_selection(chan, opts, rng)?;
    let mut best = solve_with_selection(chan, sel, opts)?;
    let n_ports = chan.num_ports();
    if !opts.refine || opts.n_active >= n_ports {
        return Ok(best);
    }
    let mut fixed = opts.clone();
    fixed.reselect = false;

    for start in [
        tim_greedy_selection(chan, opts.n_active),
        proxy_greedy_selection(chan, opts.n_active, opts.power)?,
    ] {
        let out = solve_with_selection(chan, start, &fixed)?;
        if outcome_improves(&best, &out) {
            best = out;
        }
    }

    // Single-swap polish: rank all one-port swaps of the incumbent by the
    // matched-filter secrecy proxy and re-solve only the top few.
    for _ in 0..(2 * opts.n_active).max(4) {
        let cur_sel = best.selection.indices().to_vec();
        let mut cands: Vec<(f64, Vec<usize>)> = Vec::new();
        for &out_p in &cur_sel {
            for in_p in 0..n_ports {
                if cur_sel.contains(&in_p) {
                    continue;
                }
                let mut sub: Vec<usize> =
                    cur_sel.iter().copied().filter(|&x| x != out_p).collect();
                sub.push(in_p);
                sub.sort_unstable();
                let ps = PortSelection::new(sub)?;
                let proxy = mf_secrecy_proxy(chan, &ps, opts.power)?;
                cands.push((proxy, ps.indices().to_vec()));
            }
        }
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut improved = false;
        for (_, sub) in cands.iter().take(4) {
            let out = solve_with_selection(chan, PortSelection::new(sub.clone())?, &fixed)?;
            if outcome_improves(&best, &out) {
                best = out;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}

/// Feasibility first, then strictly higher clamped sum secrecy.
fn outcome_improves(cur: &JppsOutcome, cand: &JppsOutcome) -> bool {
    if cur.constraint_missed != cand.constraint_missed {
        return cur.constraint_missed;
    }
    cand.report.sum_secrecy > cur.report.sum_secrecy * (1.0 + 1e-9)
}

/// Greedy port growth minimizing Σ_i 1/μ_i² of the grown user sub-channel
/// (rank-deficient growths carry an effectively infinite key); deterministic
/// lowest-index tie rule via strict improvement.
fn tim_greedy_selection(chan: &ChannelSet, n_active: usize) -> PortSelection {
    let ns = chan.num_ports();
    let mut sel: Vec<usize> = Vec::new();
    while sel.len() < n_active {
        let mut best_port = usize::MAX;
        let mut best_key = f64::INFINITY;
        for cand in 0..ns {
            if sel.contains(&cand) {
                continue;
            }
            let mut cols = sel.clone();
            cols.push(cand);
            let sub = chan.h.select_columns(cols.iter());
            let sv = sub.svd(false, false).singular_values;
            let mut key = 0.0;
            for s in sv.iter() {
                key += if *s > 1e-12 { 1.0 / (s * s) } else { 1e18 };
            }
            if key < best_key {
                best_key = key;
                best_port = cand;
            }
        }
        sel.push(best_port);
    }
    sel.sort_unstable();
    PortSelection::new(sel).expect("greedy growth yields distinct in-range ports")
}

/// True-secrecy value of a subset under its matched-filter precoder — the
/// cheap stand-in for a full solve when ranking candidate subsets.
fn mf_secrecy_proxy(chan: &ChannelSet, sel: &PortSelection, power: f64) -> Result<f64> {
    let w = matched_filter(chan, sel, power);
    secrecy_ascent_objective(chan, sel, &Precoder::new(w, power)?)
}

/// Greedy port growth maximizing the matched-filter secrecy proxy.
fn proxy_greedy_selection(
    chan: &ChannelSet,
    n_active: usize,
    power: f64,
) -> Result<PortSelection> {
    let ns = chan.num_ports();
    let mut sel: Vec<usize> = Vec::new();
    while sel.len() < n_active {
        let mut best_port = usize::MAX;
        let mut best_val = f64::NEG_INFINITY;
        for cand in 0..ns {
            if sel.contains(&cand) {
                continue;
            }
            let mut cols = sel.clone();
            cols.push(cand);
            cols.sort_unstable();
            let ps = PortSelection::new(cols)?;
            let val = mf_secrecy_proxy(chan, &ps, power)?;
            if val > best_val {
                best_val = val;
                best_port = cand;
            }
        }
        sel.push(best_port);
    }
    sel.sort_unstable();
    Ok(PortSelection::new(sel).expect("greedy growth yields distinct in-range ports"))
}

/// The JPPS alternation started from a caller-supplied selection (which must
/// have exactly `opts.n_active` ports). With `opts.reselect` off this is the
/// fixed-selection precoder alternation used by baselines and oracles.
pub fn solve_with_selection(
    chan: &ChannelSet,
    sel0: PortSelection,
    opts: &SolverOptions,
) -> Result<JppsOutcome> {
    opts.validate(chan)?;
    sel0.validate_for(chan.num_ports())?;
    if sel0.len() != opts.n_active {
        return Err(Error::InvalidParameter(format!(
            "selection size {} does not match n_active = {}",
            sel0.len(),
            opts.n_active
        )));
    }
    let n_ports = chan.num_ports();
    let p = opts.power;
    let rho = radar_rho(chan, opts.zeta)?;
    // Unit-modulus steering makes ‖â‖² = n_s for every selection, so ϱ that
    // exceeds P·n_s is infeasible outright.
    if rho > p * opts.n_active as f64 {
        return Err(Error::Infeasible(format!(
            "ζ = {} needs radar energy ϱ = {rho} > P·n_s = {}",
            opts.zeta,
            p * opts.n_active as f64
        )));
    }

    let mut sel = sel0;
    let mut a_hat = select_entries(&chan.a_t, &sel);
    let mut w = feasibilize(matched_filter(chan, &sel, p), &a_hat, p, rho)?;

    let mut trace: Vec<IterRecord> = Vec::new();
    let mut best: Option<(PortSelection, DMatrix<Complex64>, MetricsReport)> = None;
    for t in 0..opts.max_outer_iters {
        let prec = Precoder::new(w.clone(), p)?;
        let fp = update_auxiliaries(chan, &sel, &prec)?;

        // Port reselection, guarded by the FP utility.
        let prev_sel = sel.clone();
        let prev_w = w.clone();
        let mut reselected = false;
        if opts.reselect && opts.n_active < n_ports {
            let gamma = gamma_scores(&fp, &chan.h);
            let cand = top_ports(&gamma, opts.n_active);
            if cand != sel {
                let w_emb = embed_precoder(&w, &sel, n_ports);
                let u_cur = port_utility(&fp, &chan.h, &sel.indicator(n_ports), &w_emb);
                let u_cand = port_utility(&fp, &chan.h, &cand.indicator(n_ports), &w_emb);
                if u_cand >= u_cur - 1e-12 * u_cur.abs().max(1.0) {
                    sel = cand;
                    w = extract_precoder(&w_emb, &sel);
                    a_hat = select_entries(&chan.a_t, &sel);
                    w = feasibilize(w, &a_hat, p, rho)?;
                    reselected = true;
                }
            }
        }

        // Re-solve the precoder at the current worst-eve assignment: each
        // inner step re-tightens the scalar auxiliaries at the current W
        // (so the linearization direction is the exact gradient of the
        // fixed-assignment FP objective), takes the subproblem step, and
        // line-searches on the true secrecy objective — never on the stale
        // quadratic, which rewards anti-aligning against old β phases and
        // inflates without improving the secrecy it stands for.
        let mut fp = fp;
        let mut sur = assemble_surrogate(&fp, chan, &sel, opts.zeta)?;
        let w_outer = w.clone();
        let mut infeasible_after_reselect = false;
        for _ in 0..opts.max_sca_iters {
            let m = &sur.c1 - &sur.c2 + &sur.d2 * &w - &sur.d1 * &w;
            let (b, rho_eff) = if sur.rho > 0.0 {
                (&sur.d3 * &w, sur.rho + quad_form(&sur.d3, &w))
            } else {
                (DMatrix::zeros(w.nrows(), w.ncols()), 0.0)
            };
            let w_hat = match solve_precoder_subproblem(&m, &b, p, rho_eff, opts.bisection_tol) {
                Ok(r) => r,
                Err(Error::Infeasible(_)) if reselected => {
                    infeasible_after_reselect = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            // The radar constraint holds on the whole segment (tangent
            // minorant at W plus convexity), so the line search is
            // unconstrained in τ. The step length is chosen on the true
            // worst-eavesdropper secrecy, so a step that merely hands the
            // stream to a different eavesdropper is rejected.
            let delta = &w_hat - &w;
            let f_cur = secrecy_ascent_objective(chan, &sel, &Precoder::new(w.clone(), p)?)?;
            let mut best_tau = 0.0;
            let mut best_f = f_cur;
            let mut tau = 1.0;
            for _ in 0..13 {
                let cand = &w + &delta * Complex64::new(tau, 0.0);
                let f = secrecy_ascent_objective(chan, &sel, &Precoder::new(cand, p)?)?;
                if f > best_f {
                    best_f = f;
                    best_tau = tau;
                }
                tau *= 0.5;
            }
            if best_tau == 0.0 {
                break;
            }
            w += &delta * Complex64::new(best_tau, 0.0);
            if best_f - f_cur <= 1e-8 * (1.0 + f_cur.abs()) {
                break;
            }
            let prec_inner = Precoder::new(w.clone(), p)?;
            tighten_auxiliaries(chan, &sel, &prec_inner, &mut fp);
            sur = assemble_surrogate(&fp, chan, &sel, opts.zeta)?;
        }
        if infeasible_after_reselect {
            // Roll the reselection back and stop.
            sel = prev_sel;
            w = prev_w;
            let prec = Precoder::new(w.clone(), p)?;
            let rep = secrecy_report(chan, &sel, &prec)?;
            trace.push(IterRecord {
                iteration: t,
                surrogate: surrogate_value(&fp, &sur, chan, &w),
                sum_secrecy: rep.sum_secrecy,
                radar_sinr: rep.radar_sinr,
                selection: sel.indices().to_vec(),
                reverted: true,
            });
            break;
        }
        let diff = (&w - &w_outer).norm_squared();

        let prec = Precoder::new(w.clone(), p)?;
        let rep = secrecy_report(chan, &sel, &prec)?;
        trace.push(IterRecord {
            iteration: t,
            surrogate: surrogate_value(&fp, &sur, chan, &w),
            sum_secrecy: rep.sum_secrecy,
            radar_sinr: rep.radar_sinr,
            selection: sel.indices().to_vec(),
            reverted: false,
        });
        let feasible = rep.radar_sinr >= opts.zeta * (1.0 - 1e-6);
        if feasible
            && best
                .as_ref()
                .map_or(true, |(_, _, b)| rep.sum_secrecy > b.sum_secrecy)
        {
            best = Some((sel.clone(), w.clone(), rep));
        }
        if diff < opts.tol {
            break;
        }
    }

    match best {
        Some((selection, w_best, report)) => Ok(JppsOutcome {
            selection,
            precoder: Precoder::new(w_best, p)?,
            report,
            trace,
            constraint_missed: false,
        }),
        None => {
            let precoder = Precoder::new(w, p)?;
            let report = secrecy_report(chan, &sel, &precoder)?;
            Ok(JppsOutcome {
                selection: sel,
                precoder,
                report,
                trace,
                constraint_missed: true,
            })
        }
    }
}

/// Freshly tightened FP state, surrogate, and secrecy value at W — the
/// quantity the radar-centric secrecy floor constrains.
fn secrecy_state_at(
    chan: &ChannelSet,
    sel: &PortSelection,
    w: &DMatrix<Complex64>,
    power: f64,
) -> Result<(FpState, Surrogate, f64)> {
    let prec = Precoder::new(w.clone(), power)?;
    let fp = update_auxiliaries(chan, sel, &prec)?;
    let sur = assemble_surrogate(&fp, chan, sel, 0.0)?;
    let val = secrecy_ascent_objective(chan, sel, &prec)?;
    Ok((fp, sur, val))
}

/// Radar-centric optimization: maximize the radar SINR subject to a secrecy
/// floor r_th on the reported sum secrecy rate (and the power ball), on a
/// fixed Γ-initialized selection.
///
/// With r_th = 0 the floor is vacuous and the solution puts all power on the
/// selected steering direction, the top eigenvector of the rank-one D3.
pub fn radar_centric<R: Rng + ?Sized>(
    chan: &ChannelSet,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<(PortSelection, Precoder, MetricsReport)> {
    opts.validate(chan)?;
    let sel = initial_selection(chan, opts, rng)?;
    radar_centric_with_selection(chan, sel, opts)
}

/// Radar-centric beamforming on a caller-fixed port selection.
///
/// Same optimization as [`radar_centric`] but the port subset is taken as
/// given instead of chosen by Γ scores — used to compare fixed antenna
/// placements against optimized ones on identical channels.
///
/// The driver bisects the radar constraint level, reusing the constrained
/// secrecy maximizer at each level and keeping the largest level whose
/// solution still clears the secrecy floor; a final polish loop alternates a
/// secrecy-repair round with the exchanged SCA subproblem (maximize the
/// linearized radar term subject to the linearized secrecy surrogate ≥ r_th
/// and the power ball).
pub fn radar_centric_with_selection(
    chan: &ChannelSet,
    sel: PortSelection,
    opts: &SolverOptions,
) -> Result<(PortSelection, Precoder, MetricsReport)> {
    opts.validate(chan)?;
    sel.validate_for(chan.num_ports())?;
    if sel.len() != opts.n_active {
        return Err(Error::InvalidParameter(format!(
            "selection size {} does not match n_active = {}",
            sel.len(),
            opts.n_active
        )));
    }
    let p = opts.power;
    let a_hat = select_entries(&chan.a_t, &sel);
    let d3 = &a_hat * a_hat.adjoint();

    if opts.r_th <= 0.0 {
        // Unconstrained: all power on the radar direction (top eigenvector
        // of the rank-one D3).
        let mut w = DMatrix::<Complex64>::zeros(sel.len(), chan.num_users());
        w.set_column(0, &(&a_hat * Complex64::new(p.sqrt() / a_hat.norm(), 0.0)));
        let precoder = Precoder::new(w, p)?;
        let report = secrecy_report(chan, &sel, &precoder)?;
        return Ok((sel, precoder, report));
    }

    // The driver inverts the secrecy/radar trade-off: bisect the radar
    // constraint level ζ and reuse the constrained secrecy maximizer at each
    // level, keeping the largest level whose solution still clears the
    // secrecy floor. Gradient ascent of the radar term from a floor-feasible
    // point stalls instead: at an active floor the linearized step is
    // tangent to the true secrecy surface (worst-case eavesdropper kinks),
    // so it cannot carry the iterate into the beam-dominant regime.
    let rho_unit = radar_rho(chan, 1.0)?;
    // Radar energy ceiling: ‖â^H W‖² ≤ P·n_s by Cauchy–Schwarz on the
    // unit-modulus steering entries, so levels past the matching ζ are
    // unsatisfiable for any precoder.
    let zeta_cap = p * a_hat.norm_squared() / rho_unit;
    let floor = opts.r_th * (1.0 - 1e-9) - 1e-12;
    let inner = |zeta: f64| -> Result<Option<JppsOutcome>> {
        let mut o = opts.clone();
        o.zeta = zeta;
        o.reselect = false;
        o.refine = false;
        match solve_with_selection(chan, sel.clone(), &o) {
            Ok(out) => {
                Ok((!out.constraint_missed && out.report.sum_secrecy >= floor).then_some(out))
            }
            Err(e) if e.is_infeasible() => Ok(None),
            Err(e) => Err(e),
        }
    };

    // Feasibility gate: the unconstrained secrecy maximum must clear the
    // floor, otherwise no radar level admits a feasible precoder.
    let Some(mut best) = inner(0.0)? else {
        return Err(Error::Infeasible(format!(
            "secrecy floor r_th = {} unreachable at P = {p}",
            opts.r_th
        )));
    };
    let (mut lo, mut hi) = (0.0, zeta_cap);
    if let Some(out) = inner(zeta_cap)? {
        best = out;
        lo = zeta_cap;
    }
    if lo < hi {
        for _ in 0..22 {
            let mid = 0.5 * (lo + hi);
            match inner(mid)? {
                Some(out) => {
                    best = out;
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }
    let mut w = best.precoder.w.clone();

    // Polish — alternate two steps per round until the radar energy stalls.
    // (i) Secrecy repair: one SCA ascent of the secrecy surrogate holding
    // the radar quadratic at its current level, rebuilding floor slack with
    // less user-side power. (ii) Radar step: maximize the linearized radar
    // term 2Re Tr(W^H D3 W^(t)) subject to the linearized secrecy surrogate
    // ≥ r_th and the power ball, with the step length bisected to the true
    // floor boundary.
    let clamped_secrecy = |cand: &DMatrix<Complex64>| -> Result<f64> {
        Ok(secrecy_report(chan, &sel, &Precoder::new(cand.clone(), p)?)?.sum_secrecy)
    };
    let floor_ok = |f: f64| f >= floor;
    for _ in 0..opts.max_outer_iters {
        let radar_round_start = quad_form(&d3, &w);

        // (i) Secrecy repair at the current radar level.
        let (_, mut sur_rep, _) = secrecy_state_at(chan, &sel, &w, p)?;
        sur_rep.rho = radar_round_start * (1.0 - 1e-12);
        if let Ok(rep) = sca_precoder(&sur_rep, &w, opts) {
            if floor_ok(clamped_secrecy(&rep.w)?)
                && quad_form(&d3, &rep.w) >= radar_round_start * (1.0 - 1e-9)
            {
                w = rep.w;
            }
        }

        // (ii) Radar ascent step.
        let (_, sur, f_cur) = secrecy_state_at(chan, &sel, &w, p)?;
        let m_sec = &sur.c1 - &sur.c2 + &sur.d2 * &w - &sur.d1 * &w;
        let rho_sec = opts.r_th - f_cur + lin_form(&m_sec, &w);
        let b_rad = &d3 * &w;
        let w_hat = if b_rad.norm() == 0.0 {
            // Degenerate start orthogonal to the beam: nudge toward it.
            let mut nudge = w.clone();
            nudge.set_column(0, &(&a_hat * Complex64::new(1.0, 0.0)));
            ball_point(&nudge, p.sqrt()).unwrap()
        } else {
            match solve_precoder_subproblem(&b_rad, &m_sec, p, rho_sec, opts.bisection_tol) {
                Ok(x) => x,
                Err(e) if e.is_infeasible() => break,
                Err(e) => return Err(e),
            }
        };
        let delta = &w_hat - &w;
        let f_rad_cur = quad_form(&d3, &w);
        let feasible = |tau: f64| -> Result<Option<DMatrix<Complex64>>> {
            let cand = &w + &delta * Complex64::new(tau, 0.0);
            let ok = floor_ok(clamped_secrecy(&cand)?) && quad_form(&d3, &cand) >= f_rad_cur;
            Ok(ok.then_some(cand))
        };
        // Largest feasible step along δ: the radar quadratic is
        // non-decreasing in τ here (PSD curvature, non-negative slope), so
        // only the floor limits τ. Bracket by halving, then bisect.
        let mut accepted: Option<(f64, DMatrix<Complex64>)> = None;
        let mut tau = 1.0;
        for _ in 0..40 {
            if let Some(cand) = feasible(tau)? {
                accepted = Some((tau, cand));
                break;
            }
            tau *= 0.5;
        }
        if let Some((tau_lo, _)) = accepted {
            if tau_lo < 1.0 {
                let (mut t_lo, mut t_hi) = (tau_lo, 2.0 * tau_lo);
                for _ in 0..20 {
                    let mid = 0.5 * (t_lo + t_hi);
                    match feasible(mid)? {
                        Some(cand) => {
                            t_lo = mid;
                            accepted = Some((t_lo, cand));
                        }
                        None => t_hi = mid,
                    }
                }
            }
        }
        if let Some((_, next)) = accepted {
            w = next;
        }

        let gained = quad_form(&d3, &w) - radar_round_start;
        if gained <= 1e-6 * radar_round_start.max(1e-300) {
            break;
        }
    }

    let precoder = Precoder::new(w, p)?;
    let report = secrecy_report(chan, &sel, &precoder)?;
    Ok((sel, precoder, report))
}
