//! Seeded Monte Carlo experiment harness.
//!
//! A [`ScenarioConfig`] describes a deployment (port grid, users, sensing
//! target, noise floors) plus the parameter grids of the supported sweeps.
//! [`run_sweep`] executes one sweep — every grid point × scheme × trial —
//! and aggregates per-point statistics into [`ResultRow`]s;
//! [`run_beampattern`] additionally produces angle-resolved gain curves.
//!
//! Determinism contract:
//! * every trial draws its channel from a ChaCha stream seeded by
//!   [`trial_seed`]`(master, stream, trial)`, a SplitMix-style hash, so
//!   results are independent of execution order and worker count;
//! * sweeps that only change solver parameters (snr, zeta) use `stream = 0`
//!   for every grid point, so all points see the *same* channel draws and
//!   trend comparisons are paired; sweeps that change the channel
//!   distribution itself (area, ports, users) use the grid-point index;
//! * trial results are gathered in (point, trial) order and reduced
//!   sequentially, making CSV output byte-identical across runs and across
//!   worker counts;
//! * wall-time measurement is opt-in (`timing`) because it is the one field
//!   that cannot be deterministic; it reports 0 when disabled.
//!
//! CSV schema (floats printed with 9 significant digits; the swept
//! parameter prints as an integer when it is whole):
//! `scenario,param,scheme,trials,mean_secrecy_bps_hz,std_secrecy,mean_radar_sinr,miss_frac,mean_ms`.

use crate::channel::{synthesize_user_channel, ChannelSet, UserLink};
use crate::error::{Error, Result};
use crate::geometry::{
    jakes_correlation, steering_vectors, Direction, FasGeometry, SpatialCorrelation,
};
use crate::metrics::{select_columns, select_entries, PortSelection, Precoder};
use crate::solver::{
    jpps, radar_centric, radar_centric_with_selection, solve_with_selection, JppsOutcome,
    SolverOptions,
};
use crate::zf::{greedy_removal, gs_tim, svd_tim, zf_precoder, zf_solution};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cap on the number of subsets the exhaustive oracle will enumerate.
const ORACLE_GUARD: u64 = 100_000;

/// Port-selection / precoding scheme identifiers as they appear in output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Joint precoding and port selection (iterative, reselecting).
    Jpps,
    /// Zero-forcing with greedy port removal under the radar constraint.
    Gs,
    /// Zero-forcing with trace-inverse greedy selection (explicit inverses).
    GsTim,
    /// Zero-forcing with trace-inverse greedy selection (singular values).
    SvdTim,
    /// Fixed evenly-spaced ports, same precoder optimization as `Jpps`.
    FpaJpps,
    /// Exhaustive search over all port subsets (guarded; slow).
    Exhaustive,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Jpps => "jpps",
            Scheme::Gs => "gs",
            Scheme::GsTim => "gs-tim",
            Scheme::SvdTim => "svd-tim",
            Scheme::FpaJpps => "fpa-jpps",
            Scheme::Exhaustive => "exhaustive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "jpps" => Ok(Scheme::Jpps),
            "gs" => Ok(Scheme::Gs),
            "gs-tim" => Ok(Scheme::GsTim),
            "svd-tim" => Ok(Scheme::SvdTim),
            "fpa-jpps" => Ok(Scheme::FpaJpps),
            "exhaustive" => Ok(Scheme::Exhaustive),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme `{other}` (expected jpps|gs|gs-tim|svd-tim|fpa-jpps|exhaustive)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What the precoder optimizes at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Maximize sum secrecy subject to the radar floor ζ.
    SecrecyMax,
    /// Maximize radar SINR subject to the secrecy floor `r_th`.
    RadarCentric,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::SecrecyMax => "secrecy-max",
            Mode::RadarCentric => "radar-centric",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "secrecy-max" => Ok(Mode::SecrecyMax),
            "radar-centric" => Ok(Mode::RadarCentric),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode `{other}` (expected secrecy-max|radar-centric)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The supported sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Secrecy vs. transmit SNR over `snr_db`.
    Snr,
    /// Secrecy vs. surface side length (wavelengths) over `area_grid`.
    Area,
    /// Secrecy vs. radar floor ζ over `zeta_grid` (close-range target).
    Zeta,
    /// Secrecy vs. total port count over `ns_grid` at fixed `n_active`.
    Ports,
    /// Secrecy vs. number of users over `users_grid` (disc placement).
    Users,
    /// Per-iteration objective traces at fixed parameters.
    Convergence,
    /// Radar-centric transmit gain pattern across azimuth.
    Beampattern,
}

impl Sweep {
    pub fn label(self) -> &'static str {
        match self {
            Sweep::Snr => "snr",
            Sweep::Area => "area",
            Sweep::Zeta => "zeta",
            Sweep::Ports => "ports",
            Sweep::Users => "users",
            Sweep::Convergence => "convergence",
            Sweep::Beampattern => "beampattern",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "snr" => Ok(Sweep::Snr),
            "area" => Ok(Sweep::Area),
            "zeta" => Ok(Sweep::Zeta),
            "ports" => Ok(Sweep::Ports),
            "users" => Ok(Sweep::Users),
            "convergence" => Ok(Sweep::Convergence),
            "beampattern" => Ok(Sweep::Beampattern),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario `{other}` \
                 (expected snr|area|zeta|ports|users|convergence|beampattern)"
            ))),
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Full description of a Monte Carlo scenario: deployment geometry, user and
/// target placement, noise floors, sweep grids, and execution parameters.
///
/// All lengths tagged "wavelengths" are in carrier wavelengths; distances in
/// meters. `user_distances` empty means "draw uniformly in a disc of
/// `disc_radius` meters" (area-uniform, i.e. radius ∝ √u).
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub ns_x: usize,
    pub ns_y: usize,
    /// Surface side lengths in wavelengths.
    pub area_x: f64,
    pub area_y: f64,
    pub freq_hz: f64,
    pub n_rx: usize,
    /// Receive-array element spacing in wavelengths.
    pub rx_spacing: f64,
    pub num_users: usize,
    /// Fixed user distances (meters); empty → uniform-in-disc placement.
    pub user_distances: Vec<f64>,
    pub disc_radius: f64,
    pub pathloss_exp: f64,
    pub target_distance: f64,
    /// Fixed target azimuth in degrees; `None` → uniform on [−60°, 60°].
    pub target_azimuth_deg: Option<f64>,
    pub sigma_b2: f64,
    pub sigma_r2: f64,
    pub sigma_eve2: f64,
    /// Per-user receiver noise variance (shared by all users).
    pub user_noise: f64,
    pub snr_db: Vec<f64>,
    /// Transmit SNR used by every sweep other than `snr`.
    pub snr_db_fixed: f64,
    pub area_grid: Vec<f64>,
    pub zeta_grid: Vec<f64>,
    pub ns_grid: Vec<usize>,
    pub users_grid: Vec<usize>,
    pub n_active: usize,
    pub zeta: f64,
    /// Secrecy floor for `radar-centric` mode.
    pub r_th: f64,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub mode: Mode,
    /// Target azimuth of the beampattern scenario (degrees).
    pub beam_theta_deg: f64,
    /// Angular resolution of the emitted pattern (degrees).
    pub beam_step_deg: f64,
    /// Record wall time per solve (breaks byte determinism of `mean_ms`).
    pub timing: bool,
}

impl ScenarioConfig {
    /// The built-in `paper-default` profile: the reference deployment used
    /// throughout the documentation — 4×4 ports over a 1λ×1λ surface at
    /// 2.4 GHz, 10 receive antennas, 4 users at {2, 15, 25, 35} m with
    /// path-loss exponent 2, sensing target at 200 m, unit noise, ζ = 1.
    pub fn paper_default() -> Self {
        Self {
            ns_x: 4,
            ns_y: 4,
            area_x: 1.0,
            area_y: 1.0,
            freq_hz: 2.4e9,
            n_rx: 10,
            rx_spacing: 0.5,
            num_users: 4,
            user_distances: vec![2.0, 15.0, 25.0, 35.0],
            disc_radius: 32.0,
            pathloss_exp: 2.0,
            target_distance: 200.0,
            target_azimuth_deg: None,
            sigma_b2: 1e-8,
            sigma_r2: 1.0,
            sigma_eve2: 1.0,
            user_noise: 1.0,
            snr_db: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            snr_db_fixed: 20.0,
            area_grid: vec![0.5, 1.0, 2.0, 3.0],
            zeta_grid: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            ns_grid: vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            users_grid: vec![1, 2, 3, 4, 5, 6],
            n_active: 6,
            zeta: 1.0,
            r_th: 1.0,
            trials: 200,
            seed: 1,
            schemes: vec![
                Scheme::Jpps,
                Scheme::Gs,
                Scheme::GsTim,
                Scheme::SvdTim,
                Scheme::FpaJpps,
            ],
            mode: Mode::SecrecyMax,
            beam_theta_deg: 20.0,
            beam_step_deg: 0.5,
            timing: false,
        }
    }

    /// Scenario-specific profile overrides, applied after
    /// [`ScenarioConfig::paper_default`] and before any user override:
    ///
    /// * `zeta` — the radar floor only bites when the demanded SINR is a
    ///   sizable fraction of the achievable ceiling |α|²·n_s·N_r·P/σ_b², so
    ///   the target moves to 50 m and the clutter-plus-noise power rises to
    ///   0.18 (ceiling ≈ 13.3 at 20 dB SNR, putting ζ = 12 at 90% of it);
    /// * `users` — user count sweeps use disc placement at 5 dB SNR;
    /// * `convergence` — only the iterative schemes have traces;
    /// * `beampattern` — radar-centric mode on a 3×3 grid with a fixed 20°
    ///   target at 10 dB SNR, comparing optimized vs. fixed placements.
    pub fn apply_scenario_defaults(&mut self, sweep: Sweep) {
        match sweep {
            Sweep::Zeta => {
                self.target_distance = 50.0;
                self.sigma_b2 = 0.18;
            }
            Sweep::Users => {
                self.snr_db_fixed = 5.0;
                self.user_distances = Vec::new();
            }
            Sweep::Convergence => {
                self.schemes = vec![Scheme::Jpps, Scheme::Gs];
            }
            Sweep::Beampattern => {
                self.ns_x = 3;
                self.ns_y = 3;
                self.snr_db_fixed = 10.0;
                self.target_azimuth_deg = Some(self.beam_theta_deg);
                self.mode = Mode::RadarCentric;
                self.schemes = vec![Scheme::Jpps, Scheme::FpaJpps];
            }
            _ => {}
        }
    }

    /// Total number of ports of the base geometry.
    pub fn num_ports(&self) -> usize {
        self.ns_x * self.ns_y
    }

    /// Validate the configuration for one sweep. Grid-independent checks
    /// first, then sweep-specific ones (grid non-empty, scheme
    /// applicability, exhaustive guard).
    pub fn validate(&self, sweep: Sweep) -> Result<()> {
        fn positive(v: f64, what: &str) -> Result<()> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )))
            }
        }
        if self.ns_x == 0 || self.ns_y == 0 {
            return Err(Error::InvalidParameter(
                "port grid must have at least one port per axis".into(),
            ));
        }
        if self.n_rx == 0 {
            return Err(Error::InvalidParameter(
                "need at least one receive antenna".into(),
            ));
        }
        positive(self.freq_hz, "carrier frequency")?;
        positive(self.rx_spacing, "receive-array spacing")?;
        positive(self.pathloss_exp, "path-loss exponent")?;
        positive(self.target_distance, "target distance")?;
        positive(self.disc_radius, "disc radius")?;
        positive(self.sigma_b2, "clutter-plus-noise power sigma_b2")?;
        positive(self.sigma_r2, "target-noise power sigma_r2")?;
        positive(self.sigma_eve2, "eavesdropper noise power sigma_eve2")?;
        positive(self.user_noise, "user noise power")?;
        if self.area_x < 0.0 || self.area_y < 0.0 {
            return Err(Error::InvalidParameter(
                "surface side lengths must be nonnegative".into(),
            ));
        }
        if self.zeta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "radar floor zeta must be nonnegative, got {}",
                self.zeta
            )));
        }
        if self.num_users == 0 {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter(
                "scheme list must not be empty".into(),
            ));
        }
        if self.n_active == 0 {
            return Err(Error::InvalidParameter(
                "n_active must be at least 1".into(),
            ));
        }
        if !self.user_distances.is_empty() {
            let need = if sweep == Sweep::Users {
                self.users_grid.iter().copied().max().unwrap_or(0)
            } else {
                self.num_users
            };
            if self.user_distances.len() < need {
                return Err(Error::InvalidParameter(format!(
                    "user_distances lists {} entries but {need} users are requested \
                     (use `user_distances = disc` for random placement)",
                    self.user_distances.len()
                )));
            }
            for &d in &self.user_distances {
                positive(d, "user distance")?;
            }
        }
        if sweep == Sweep::Beampattern {
            positive(self.beam_step_deg, "beam pattern step")?;
        }

        // Sweep grids and the port budget they must respect.
        let min_ports = match sweep {
            Sweep::Ports => {
                if self.ns_grid.is_empty() {
                    return Err(Error::InvalidParameter("ns_grid must not be empty".into()));
                }
                *self.ns_grid.iter().min().expect("non-empty")
            }
            _ => self.num_ports(),
        };
        if self.n_active > min_ports {
            return Err(Error::InvalidParameter(format!(
                "n_active = {} exceeds the smallest port count {min_ports}",
                self.n_active
            )));
        }
        match sweep {
            Sweep::Snr if self.snr_db.is_empty() => {
                return Err(Error::InvalidParameter("snr_db must not be empty".into()))
            }
            Sweep::Area if self.area_grid.is_empty() => {
                return Err(Error::InvalidParameter(
                    "area_grid must not be empty".into(),
                ))
            }
            Sweep::Zeta if self.zeta_grid.is_empty() => {
                return Err(Error::InvalidParameter(
                    "zeta_grid must not be empty".into(),
                ))
            }
            Sweep::Users if self.users_grid.is_empty() => {
                return Err(Error::InvalidParameter(
                    "users_grid must not be empty".into(),
                ))
            }
            Sweep::Zeta => {
                if self.zeta_grid.iter().any(|&z| z < 0.0) {
                    return Err(Error::InvalidParameter(
                        "zeta_grid values must be nonnegative".into(),
                    ));
                }
            }
            Sweep::Users => {
                if self.users_grid.iter().any(|&k| k == 0) {
                    return Err(Error::InvalidParameter(
                        "users_grid values must be at least 1".into(),
                    ));
                }
            }
            _ => {}
        }

        // Scheme applicability.
        let zf_schemes = [Scheme::Gs, Scheme::GsTim, Scheme::SvdTim];
        let max_users = if sweep == Sweep::Users {
            self.users_grid.iter().copied().max().unwrap_or(0)
        } else {
            self.num_users
        };
        if self.schemes.iter().any(|s| zf_schemes.contains(s)) && self.n_active < max_users {
            return Err(Error::InvalidParameter(format!(
                "zero-forcing schemes need n_active >= users ({} < {max_users})",
                self.n_active
            )));
        }
        if self.mode == Mode::RadarCentric {
            for s in &self.schemes {
                if !matches!(s, Scheme::Jpps | Scheme::FpaJpps) {
                    return Err(Error::InvalidParameter(format!(
                        "scheme `{s}` does not support radar-centric mode"
                    )));
                }
            }
        }
        if sweep == Sweep::Convergence {
            for s in &self.schemes {
                if !matches!(s, Scheme::Jpps | Scheme::Gs | Scheme::FpaJpps) {
                    return Err(Error::InvalidParameter(format!(
                        "scheme `{s}` has no iteration trace for the convergence scenario"
                    )));
                }
            }
        }
        if sweep == Sweep::Beampattern {
            for s in &self.schemes {
                if !matches!(s, Scheme::Jpps | Scheme::FpaJpps) {
                    return Err(Error::InvalidParameter(format!(
                        "scheme `{s}` does not produce a beampattern \
                         (use jpps and/or fpa-jpps)"
                    )));
                }
            }
        }
        if self.schemes.contains(&Scheme::Exhaustive) {
            if self.mode == Mode::RadarCentric {
                return Err(Error::InvalidParameter(
                    "the exhaustive scheme supports secrecy-max mode only".into(),
                ));
            }
            let grid: Vec<usize> = match sweep {
                Sweep::Ports => self.ns_grid.clone(),
                _ => vec![self.num_ports()],
            };
            for ns in grid {
                check_oracle_guard(ns, self.n_active)?;
            }
        }
        Ok(())
    }
}

/// Aggregated statistics of one (grid point, scheme) cell. Field names match
/// the CSV columns.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    /// Swept-parameter value at this grid point (iteration index for the
    /// convergence scenario).
    pub param: f64,
    pub scheme: Scheme,
    pub trials: usize,
    pub mean_secrecy_bps_hz: f64,
    pub std_secrecy: f64,
    pub mean_radar_sinr: f64,
    /// Fraction of trials whose solution misses a constraint (or is
    /// infeasible outright, which scores zero secrecy).
    pub miss_frac: f64,
    /// Mean wall time per solve in milliseconds; 0 unless timing is enabled.
    pub mean_ms: f64,
}

/// One angle sample of the averaged beampattern (normalized dB).
#[derive(Debug, Clone, Serialize)]
pub struct PatternRow {
    pub scenario: String,
    pub angle_deg: f64,
    pub scheme: Scheme,
    pub mean_gain_db: f64,
}

/// Deterministic per-trial seed: a SplitMix-style avalanche of
/// (master, stream, trial). `stream` distinguishes grid points whose channel
/// distribution differs; solver-parameter sweeps pass the same stream for
/// every point so trials pair across the grid.
pub fn trial_seed(master: u64, stream: u64, trial: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let a = mix(master.wrapping_add(GOLDEN.wrapping_mul(stream.wrapping_add(1))));
    mix(a ^ GOLDEN.wrapping_mul(trial.wrapping_add(3)))
}

/// Evenly spaced fixed-antenna selection: n_active indices
/// round(i·(N−1)/(n−1)) for i = 0..n. With `n_active == n_ports` this is the
/// identity selection; a single active port sits at the grid midpoint.
pub fn evenly_spaced_selection(n_ports: usize, n_active: usize) -> Result<PortSelection> {
    if n_active == 0 || n_active > n_ports {
        return Err(Error::InvalidParameter(format!(
            "cannot place {n_active} fixed antennas on {n_ports} ports"
        )));
    }
    if n_active == 1 {
        return PortSelection::new(vec![(n_ports - 1) / 2]);
    }
    let step = (n_ports - 1) as f64 / (n_active - 1) as f64;
    let idx: Vec<usize> = (0..n_active)
        .map(|i| (i as f64 * step).round() as usize)
        .collect();
    PortSelection::new(idx)
}

/// Binomial coefficient with saturation just past the oracle guard.
fn binomial_capped(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // Each step holds C(n, i+1) exactly; saturate on genuine u64
        // overflow (the guard comparison only needs "huge").
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}

fn check_oracle_guard(n_ports: usize, n_active: usize) -> Result<()> {
    let count = binomial_capped(n_ports as u64, n_active as u64);
    if count > ORACLE_GUARD {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search over C({n_ports},{n_active}) = {count} subsets \
             exceeds the {ORACLE_GUARD} guard"
        )));
    }
    Ok(())
}

/// Visit every k-subset of {0..n} in lexicographic order.
fn for_each_combination<F: FnMut(&[usize]) -> Result<()>>(
    n: usize,
    k: usize,
    mut f: F,
) -> Result<()> {
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot enumerate {k}-subsets of {n} items"
        )));
    }
    loop {
        f(&idx)?;
        // Advance the rightmost index that can still move.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in (i + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Objective evaluated by [`exhaustive_oracle`] on every subset.
pub enum OracleObjective<'a> {
    /// Maximize zero-forcing sum secrecy (radar-feasible subsets first).
    ZfSecrecy { power: f64, zeta: f64 },
    /// Minimize the Gram trace inverse of the selected columns.
    TraceInverse,
    /// Maximize iteratively optimized sum secrecy (feasible subsets first).
    /// The selection is held fixed for every candidate.
    SolverSecrecy { opts: &'a SolverOptions },
    /// Maximize the sum of per-port scores over the subset.
    GammaTopSum { scores: &'a [f64] },
}

/// Enumerate all `C(N_s, n_active)` port subsets and return the best one
/// with its objective value. Guarded: refuses when the subset count exceeds
/// 10^5. Subsets whose evaluation fails structurally (rank-deficient
/// zero-forcing) are skipped; ties keep the lexicographically first subset.
pub fn exhaustive_oracle(
    chan: &ChannelSet,
    n_active: usize,
    objective: &OracleObjective<'_>,
) -> Result<(PortSelection, f64)> {
    let n_ports = chan.num_ports();
    check_oracle_guard(n_ports, n_active)?;
    if let OracleObjective::GammaTopSum { scores } = objective {
        if scores.len() != n_ports {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for {n_ports} ports",
                scores.len()
            )));
        }
    }
    if let OracleObjective::SolverSecrecy { opts } = objective {
        let best = exhaustive_solver_best(chan, opts)?;
        let value = best.report.sum_secrecy;
        return Ok((best.selection, value));
    }

    // (feasible, value) comparator; `maximize` flips for trace inverse.
    let mut best: Option<(PortSelection, bool, f64)> = None;
    for_each_combination(n_ports, n_active, |idx| {
        let sel = PortSelection::new(idx.to_vec())?;
        let scored: Option<(bool, f64)> = match objective {
            OracleObjective::ZfSecrecy { power, zeta } => {
                match zf_solution(chan, sel.clone(), *power, *zeta) {
                    Ok(sol) => Some((!sol.constraint_missed, sol.report.sum_secrecy)),
                    Err(e) if matches!(e, Error::Io(_)) => return Err(e),
                    Err(_) => None,
                }
            }
            OracleObjective::TraceInverse => {
                let h_s = select_columns(&chan.h, &sel);
                match zf_precoder(&h_s) {
                    // Negate so "larger is better" holds for both senses.
                    Ok((_, trace_inv)) => Some((true, -trace_inv)),
                    Err(e) if matches!(e, Error::Io(_)) => return Err(e),
                    Err(_) => None,
                }
            }
            OracleObjective::GammaTopSum { scores } => {
                Some((true, idx.iter().map(|&i| scores[i]).sum()))
            }
            OracleObjective::SolverSecrecy { .. } => unreachable!("handled above"),
        };
        if let Some((feas, value)) = scored {
            let better = match &best {
                None => true,
                Some((_, bf, bv)) => (feas && !bf) || (feas == *bf && value > *bv),
            };
            if better {
                best = Some((sel, feas, value));
            }
        }
        Ok(())
    })?;
    match best {
        Some((sel, _, value)) => {
            let value = match objective {
                OracleObjective::TraceInverse => -value,
                _ => value,
            };
            Ok((sel, value))
        }
        None => Err(Error::Numerical(
            "no subset admitted a valid evaluation".into(),
        )),
    }
}

/// Best fixed-selection solver outcome over all subsets (feasible first,
/// then sum secrecy; ties keep the lexicographically first subset).
fn exhaustive_solver_best(chan: &ChannelSet, opts: &SolverOptions) -> Result<JppsOutcome> {
    let n_ports = chan.num_ports();
    check_oracle_guard(n_ports, opts.n_active)?;
    let mut fixed = opts.clone();
    fixed.reselect = false;
    fixed.refine = false;
    let mut best: Option<JppsOutcome> = None;
    for_each_combination(n_ports, opts.n_active, |idx| {
        let sel = PortSelection::new(idx.to_vec())?;
        let out = match solve_with_selection(chan, sel, &fixed) {
            Ok(o) => o,
            Err(e) if e.is_infeasible() => return Ok(()),
            Err(e) => return Err(e),
        };
        let take = match &best {
            None => true,
            Some(b) => {
                (!out.constraint_missed && b.constraint_missed)
                    || (out.constraint_missed == b.constraint_missed
                        && out.report.sum_secrecy > b.report.sum_secrecy)
            }
        };
        if take {
            best = Some(out);
        }
        Ok(())
    })?;
    best.ok_or_else(|| Error::Infeasible("every subset was infeasible".into()))
}

/// Transmit gain pattern of a solved precoder: for each azimuth angle,
/// gain(θ) = ‖a(θ)^H Π W‖² with a(θ) the transmit steering vector of the
/// full grid restricted to the active ports, normalized so the pattern peak
/// sits at 0 dB. Returns (angle, gain dB) pairs.
pub fn beampattern(
    geom: &FasGeometry,
    sel: &PortSelection,
    prec: &Precoder,
    angles_deg: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let raw = raw_gain_curve(geom, sel, &prec.w, angles_deg)?;
    let peak = raw.iter().fold(0.0f64, |m, &(_, g)| m.max(g));
    if !(peak > 0.0) {
        return Err(Error::Numerical(
            "beampattern undefined for a zero precoder".into(),
        ));
    }
    Ok(raw
        .into_iter()
        .map(|(a, g)| (a, 10.0 * (g / peak).max(f64::MIN_POSITIVE).log10()))
        .collect())
}

/// Unnormalized gain curve ‖a(θ)^H Π W‖² over the angle grid.
fn raw_gain_curve(
    geom: &FasGeometry,
    sel: &PortSelection,
    w: &DMatrix<Complex64>,
    angles_deg: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if w.nrows() != sel.len() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} rows for {} active ports",
            w.nrows(),
            sel.len()
        )));
    }
    let mut out = Vec::with_capacity(angles_deg.len());
    for &deg in angles_deg {
        let (a_t, _) = steering_vectors(geom, Direction::from_degrees(deg, 0.0));
        let a_hat = select_entries(&a_t, sel);
        let gain: f64 = w
            .column_iter()
            .map(|col| a_hat.dotc(&col).norm_sqr())
            .sum();
        out.push((deg, gain));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// One grid point, fully resolved: geometry, correlation, solver parameters.
struct PointSetup {
    geom: FasGeometry,
    corr: SpatialCorrelation,
    power: f64,
    zeta: f64,
    num_users: usize,
    /// Fixed distances (first `num_users` of the config list) or empty for
    /// disc placement.
    user_distances: Vec<f64>,
    /// Seed stream: grid-point index for channel-changing sweeps, 0 for
    /// solver-parameter sweeps (pairs trials across the grid).
    stream: u64,
    /// The swept-parameter value reported in the `param` column.
    param: f64,
}

impl PointSetup {
    fn options(&self, cfg: &ScenarioConfig) -> SolverOptions {
        let mut opts = SolverOptions::new(self.num_active(cfg), self.power);
        opts.zeta = self.zeta;
        opts.r_th = cfg.r_th;
        opts
    }

    fn num_active(&self, cfg: &ScenarioConfig) -> usize {
        cfg.n_active
    }
}

fn db_to_power(db: f64, noise: f64) -> f64 {
    noise * 10f64.powf(db / 10.0)
}

/// Largest grid factorization ns = nx×ny with ny ≤ √ns ≤ nx.
fn grid_factor(ns: usize) -> (usize, usize) {
    let mut ny = 1;
    let mut d = 1;
    while d * d <= ns {
        if ns % d == 0 {
            ny = d;
        }
        d += 1;
    }
    (ns / ny, ny)
}

fn build_geometry(
    cfg: &ScenarioConfig,
    ns_x: usize,
    ns_y: usize,
    area_x: f64,
    area_y: f64,
) -> Result<(FasGeometry, SpatialCorrelation)> {
    let wavelength = SPEED_OF_LIGHT / cfg.freq_hz;
    let geom = FasGeometry::new(
        ns_x,
        ns_y,
        area_x,
        area_y,
        wavelength,
        cfg.n_rx,
        cfg.rx_spacing,
    )?;
    let corr = jakes_correlation(&geom)?;
    Ok((geom, corr))
}

fn fixed_distances(cfg: &ScenarioConfig, k: usize) -> Vec<f64> {
    if cfg.user_distances.is_empty() {
        Vec::new()
    } else {
        cfg.user_distances[..k].to_vec()
    }
}

fn build_points(cfg: &ScenarioConfig, sweep: Sweep) -> Result<Vec<PointSetup>> {
    let mut points = Vec::new();
    match sweep {
        Sweep::Snr => {
            for &db in &cfg.snr_db {
                let (geom, corr) = build_geometry(cfg, cfg.ns_x, cfg.ns_y, cfg.area_x, cfg.area_y)?;
                points.push(PointSetup {
                    geom,
                    corr,
                    power: db_to_power(db, cfg.user_noise),
                    zeta: cfg.zeta,
                    num_users: cfg.num_users,
                    user_distances: fixed_distances(cfg, cfg.num_users),
                    stream: 0,
                    param: db,
                });
            }
        }
        Sweep::Area => {
            for (i, &side) in cfg.area_grid.iter().enumerate() {
                let (geom, corr) = build_geometry(cfg, cfg.ns_x, cfg.ns_y, side, side)?;
                points.push(PointSetup {
                    geom,
                    corr,
                    power: db_to_power(cfg.snr_db_fixed, cfg.user_noise),
                    zeta: cfg.zeta,
                    num_users: cfg.num_users,
                    user_distances: fixed_distances(cfg, cfg.num_users),
                    stream: i as u64,
                    param: side,
                });
            }
        }
        Sweep::Zeta => {
            for &z in &cfg.zeta_grid {
                let (geom, corr) = build_geometry(cfg, cfg.ns_x, cfg.ns_y, cfg.area_x, cfg.area_y)?;
                points.push(PointSetup {
                    geom,
                    corr,
                    power: db_to_power(cfg.snr_db_fixed, cfg.user_noise),
                    zeta: z,
                    num_users: cfg.num_users,
                    user_distances: fixed_distances(cfg, cfg.num_users),
                    stream: 0,
                    param: z,
                });
            }
        }
        Sweep::Ports => {
            for (i, &ns) in cfg.ns_grid.iter().enumerate() {
                let (nx, ny) = grid_factor(ns);
                let area_y = if ny == 1 { 0.0 } else { cfg.area_y };
                let (geom, corr) = build_geometry(cfg, nx, ny, cfg.area_x, area_y)?;
                points.push(PointSetup {
                    geom,
                    corr,
                    power: db_to_power(cfg.snr_db_fixed, cfg.user_noise),
                    zeta: cfg.zeta,
                    num_users: cfg.num_users,
                    user_distances: fixed_distances(cfg, cfg.num_users),
                    stream: i as u64,
                    param: ns as f64,
                });
            }
        }
        Sweep::Users => {
            for (i, &k) in cfg.users_grid.iter().enumerate() {
                let (geom, corr) = build_geometry(cfg, cfg.ns_x, cfg.ns_y, cfg.area_x, cfg.area_y)?;
                points.push(PointSetup {
                    geom,
                    corr,
                    power: db_to_power(cfg.snr_db_fixed, cfg.user_noise),
                    zeta: cfg.zeta,
                    num_users: k,
                    user_distances: fixed_distances(cfg, k),
                    stream: i as u64,
                    param: k as f64,
                });
            }
        }
        Sweep::Convergence | Sweep::Beampattern => {
            let (geom, corr) = build_geometry(cfg, cfg.ns_x, cfg.ns_y, cfg.area_x, cfg.area_y)?;
            points.push(PointSetup {
                geom,
                corr,
                power: db_to_power(cfg.snr_db_fixed, cfg.user_noise),
                zeta: cfg.zeta,
                num_users: cfg.num_users,
                user_distances: fixed_distances(cfg, cfg.num_users),
                stream: 0,
                param: if sweep == Sweep::Beampattern {
                    cfg.beam_theta_deg
                } else {
                    0.0
                },
            });
        }
    }
    Ok(points)
}

/// Draw one channel instance. Draw order is pinned for reproducibility:
/// target azimuth (only when random), target return phase, then per user in
/// index order the distance (only under disc placement) followed by the
/// correlated channel vector.
fn synthesize_instance(cfg: &ScenarioConfig, point: &PointSetup, seed: u64) -> Result<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_deg = match cfg.target_azimuth_deg {
        Some(t) => t,
        None => -60.0 + 120.0 * rng.random::<f64>(),
    };
    let phase = std::f64::consts::TAU * rng.random::<f64>();
    let mut users = Vec::with_capacity(point.num_users);
    for k in 0..point.num_users {
        let d = if point.user_distances.is_empty() {
            cfg.disc_radius * rng.random::<f64>().sqrt().max(1e-3)
        } else {
            point.user_distances[k]
        };
        let link = UserLink::new(d, cfg.pathloss_exp, cfg.user_noise)?;
        users.push(synthesize_user_channel(&point.corr, &link, &mut rng));
    }
    let (a_t, a_r) = steering_vectors(&point.geom, Direction::from_degrees(theta_deg, 0.0));
    let alpha = Complex64::from_polar(1.0 / cfg.target_distance, phase);
    let rc = DMatrix::<Complex64>::zeros(cfg.n_rx, cfg.n_rx);
    ChannelSet::new(
        &users,
        a_t,
        a_r,
        alpha,
        rc,
        cfg.sigma_b2,
        cfg.sigma_r2,
        cfg.sigma_eve2,
        vec![cfg.user_noise; point.num_users],
    )
}

/// Raw per-trial outcome of one scheme.
struct TrialOutcome {
    secrecy: f64,
    radar: f64,
    missed: bool,
    ms: f64,
    /// Per-iteration (sum secrecy, radar SINR); filled only for the
    /// convergence scenario.
    trace: Vec<(f64, f64)>,
}

impl TrialOutcome {
    fn infeasible(ms: f64) -> Self {
        TrialOutcome {
            secrecy: 0.0,
            radar: 0.0,
            missed: true,
            ms,
            trace: Vec::new(),
        }
    }
}

fn run_scheme(
    cfg: &ScenarioConfig,
    point: &PointSetup,
    chan: &ChannelSet,
    scheme: Scheme,
    seed: u64,
    want_trace: bool,
) -> Result<TrialOutcome> {
    let opts = point.options(cfg);
    // Only consumed under random initialization (off here), but the solver
    // interface wants a generator; derive one deterministically nonetheless.
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 0xA11CE, 0));
    let outcome = |out: JppsOutcome| TrialOutcome {
        secrecy: out.report.sum_secrecy,
        radar: out.report.radar_sinr,
        missed: out.constraint_missed,
        ms: 0.0,
        trace: if want_trace {
            out.trace
                .iter()
                .map(|r| (r.sum_secrecy, r.radar_sinr))
                .collect()
        } else {
            Vec::new()
        },
    };
    match (scheme, cfg.mode) {
        (Scheme::Jpps, Mode::SecrecyMax) => Ok(outcome(jpps(chan, &opts, &mut rng)?)),
        (Scheme::Jpps, Mode::RadarCentric) => {
            let (_, _, report) = radar_centric(chan, &opts, &mut rng)?;
            Ok(TrialOutcome {
                secrecy: report.sum_secrecy,
                radar: report.radar_sinr,
                missed: false,
                ms: 0.0,
                trace: Vec::new(),
            })
        }
        (Scheme::FpaJpps, mode) => {
            let sel = evenly_spaced_selection(chan.num_ports(), opts.n_active)?;
            match mode {
                Mode::SecrecyMax => {
                    let mut fixed = opts.clone();
                    fixed.reselect = false;
                    Ok(outcome(solve_with_selection(chan, sel, &fixed)?))
                }
                Mode::RadarCentric => {
                    let (_, _, report) = radar_centric_with_selection(chan, sel, &opts)?;
                    Ok(TrialOutcome {
                        secrecy: report.sum_secrecy,
                        radar: report.radar_sinr,
                        missed: false,
                        ms: 0.0,
                        trace: Vec::new(),
                    })
                }
            }
        }
        (Scheme::Gs, Mode::SecrecyMax) => {
            let sol = greedy_removal(chan, opts.n_active, point.power, point.zeta)?;
            Ok(TrialOutcome {
                secrecy: sol.report.sum_secrecy,
                radar: sol.report.radar_sinr,
                missed: sol.constraint_missed,
                ms: 0.0,
                trace: if want_trace {
                    sol.removal_trace.clone()
                } else {
                    Vec::new()
                },
            })
        }
        (Scheme::GsTim, Mode::SecrecyMax) | (Scheme::SvdTim, Mode::SecrecyMax) => {
            let sel = if scheme == Scheme::GsTim {
                gs_tim(&chan.h, opts.n_active)?
            } else {
                svd_tim(&chan.h, opts.n_active)?
            };
            let sol = zf_solution(chan, sel, point.power, point.zeta)?;
            Ok(TrialOutcome {
                secrecy: sol.report.sum_secrecy,
                radar: sol.report.radar_sinr,
                missed: sol.constraint_missed,
                ms: 0.0,
                trace: Vec::new(),
            })
        }
        (Scheme::Exhaustive, Mode::SecrecyMax) => {
            Ok(outcome(exhaustive_solver_best(chan, &opts)?))
        }
        (s, Mode::RadarCentric) => Err(Error::InvalidParameter(format!(
            "scheme `{s}` does not support radar-centric mode"
        ))),
    }
}

/// All (scheme → outcome) results of one trial, in config scheme order.
fn run_trial(
    cfg: &ScenarioConfig,
    point: &PointSetup,
    trial: usize,
    want_trace: bool,
) -> Result<Vec<TrialOutcome>> {
    let seed = trial_seed(cfg.seed, point.stream, trial as u64);
    let chan = synthesize_instance(cfg, point, seed)?;
    let mut outs = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let start = std::time::Instant::now();
        let out = match run_scheme(cfg, point, &chan, scheme, seed, want_trace) {
            Ok(o) => o,
            Err(e) if e.is_infeasible() => TrialOutcome::infeasible(0.0),
            Err(e) => return Err(e),
        };
        let ms = if cfg.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        outs.push(TrialOutcome { ms, ..out });
    }
    Ok(outs)
}

fn sample_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.max(0.0).sqrt())
}

/// Run `count` independent work items, optionally on a dedicated worker
/// pool, preserving item order in the returned vector.
fn run_items<T: Send, F: Fn(usize) -> Result<T> + Sync>(
    count: usize,
    workers: usize,
    f: F,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let body = || (0..count).into_par_iter().map(|i| f(i)).collect();
        if workers == 0 {
            body()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
                .install(body)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        (0..count).map(f).collect()
    }
}

/// Execute one sweep: every grid point × scheme × trial, trials distributed
/// over `workers` threads (0 = library default pool), aggregated into one
/// [`ResultRow`] per (point, scheme) in grid order.
///
/// A trial whose solver reports infeasibility contributes zero secrecy and
/// counts toward `miss_frac`; if *every* trial of some (point, scheme) is
/// infeasible the sweep aborts with [`Error::Infeasible`]. The convergence
/// scenario instead emits one row per iteration index (converged trials
/// carry their last value forward).
pub fn run_sweep(cfg: &ScenarioConfig, sweep: Sweep, workers: usize) -> Result<Vec<ResultRow>> {
    cfg.validate(sweep)?;
    if sweep == Sweep::Beampattern {
        return Ok(run_beampattern(cfg, workers)?.0);
    }
    let points = build_points(cfg, sweep)?;
    let want_trace = sweep == Sweep::Convergence;
    let trials = cfg.trials;
    let total = points.len() * trials;
    let results = run_items(total, workers, |item| {
        let point = &points[item / trials];
        run_trial(cfg, point, item % trials, want_trace)
    })?;

    if sweep == Sweep::Convergence {
        return aggregate_convergence(cfg, &results);
    }

    let mut rows = Vec::with_capacity(points.len() * cfg.schemes.len());
    for (pi, point) in points.iter().enumerate() {
        for (si, &scheme) in cfg.schemes.iter().enumerate() {
            let cell: Vec<&TrialOutcome> = (0..trials)
                .map(|t| &results[pi * trials + t][si])
                .collect();
            let secrecy: Vec<f64> = cell.iter().map(|o| o.secrecy).collect();
            let radar: Vec<f64> = cell.iter().map(|o| o.radar).collect();
            let misses = cell.iter().filter(|o| o.missed).count();
            if misses == trials && matches!(scheme, Scheme::Jpps | Scheme::FpaJpps) {
                // Not one trial admitted the constraint set: the scenario
                // itself is infeasible at this grid point.
                return Err(Error::Infeasible(format!(
                    "scheme `{scheme}` missed its constraints in all {trials} trials \
                     at {} = {}",
                    sweep,
                    fmt_param(point.param)
                )));
            }
            let (mean_s, std_s) = sample_stats(&secrecy);
            let (mean_r, _) = sample_stats(&radar);
            let mean_ms = cell.iter().map(|o| o.ms).sum::<f64>() / trials as f64;
            rows.push(ResultRow {
                scenario: sweep.label().to_string(),
                param: point.param,
                scheme,
                trials,
                mean_secrecy_bps_hz: mean_s,
                std_secrecy: std_s,
                mean_radar_sinr: mean_r,
                miss_frac: misses as f64 / trials as f64,
                mean_ms,
            });
        }
    }
    Ok(rows)
}

/// Convergence aggregation: one row per (scheme, iteration index), with the
/// mean taken over all trials after carrying each trial's last recorded
/// value forward to the longest observed trace.
fn aggregate_convergence(
    cfg: &ScenarioConfig,
    results: &[Vec<TrialOutcome>],
) -> Result<Vec<ResultRow>> {
    let trials = cfg.trials;
    let mut rows = Vec::new();
    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        let traces: Vec<&Vec<(f64, f64)>> = results.iter().map(|r| &r[si].trace).collect();
        let max_len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
        if max_len == 0 {
            return Err(Error::Numerical(format!(
                "scheme `{scheme}` produced no iteration trace"
            )));
        }
        let misses = results.iter().filter(|r| r[si].missed).count();
        let mean_ms = results.iter().map(|r| r[si].ms).sum::<f64>() / trials as f64;
        for it in 0..max_len {
            let mut secrecy = Vec::with_capacity(trials);
            let mut radar = Vec::with_capacity(trials);
            for t in traces.iter() {
                // Carry the last value forward once a trial has converged;
                // a trial with no trace at all (infeasible) scores zero.
                let idx = it.min(t.len().saturating_sub(1));
                let (s, r) = t.get(idx).copied().unwrap_or((0.0, 0.0));
                secrecy.push(s);
                radar.push(r);
            }
            let (mean_s, std_s) = sample_stats(&secrecy);
            let (mean_r, _) = sample_stats(&radar);
            rows.push(ResultRow {
                scenario: Sweep::Convergence.label().to_string(),
                param: (it + 1) as f64,
                scheme,
                trials,
                mean_secrecy_bps_hz: mean_s,
                std_secrecy: std_s,
                mean_radar_sinr: mean_r,
                miss_frac: misses as f64 / trials as f64,
                mean_ms,
            });
        }
    }
    Ok(rows)
}

/// Beampattern scenario: radar-centric solves on every trial, averaged
/// angle-resolved gain curves per scheme plus the usual summary rows.
///
/// Per trial each scheme's pattern is normalized to its own 0 dB peak; the
/// emitted curve is the per-angle mean of those normalized patterns in dB.
pub fn run_beampattern(
    cfg: &ScenarioConfig,
    workers: usize,
) -> Result<(Vec<ResultRow>, Vec<PatternRow>)> {
    cfg.validate(Sweep::Beampattern)?;
    let points = build_points(cfg, Sweep::Beampattern)?;
    let point = &points[0];
    let n_angles = (180.0 / cfg.beam_step_deg).round() as usize + 1;
    let angles: Vec<f64> = (0..n_angles)
        .map(|i| -90.0 + i as f64 * cfg.beam_step_deg)
        .filter(|&a| a <= 90.0 + 1e-9)
        .collect();

    struct BeamTrial {
        outcomes: Vec<TrialOutcome>,
        curves: Vec<Vec<f64>>, // per scheme, per angle, normalized dB
    }
    let trials = cfg.trials;
    let results: Vec<BeamTrial> = run_items(trials, workers, |trial| {
        let seed = trial_seed(cfg.seed, point.stream, trial as u64);
        let chan = synthesize_instance(cfg, point, seed)?;
        let opts = point.options(cfg);
        let mut outcomes = Vec::with_capacity(cfg.schemes.len());
        let mut curves = Vec::with_capacity(cfg.schemes.len());
        for &scheme in &cfg.schemes {
            let start = std::time::Instant::now();
            let solved: Result<(PortSelection, Precoder)> = match scheme {
                Scheme::Jpps => {
                    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 0xA11CE, 0));
                    radar_centric(&chan, &opts, &mut rng).map(|(sel, prec, _)| (sel, prec))
                }
                Scheme::FpaJpps => {
                    let sel = evenly_spaced_selection(chan.num_ports(), opts.n_active)?;
                    radar_centric_with_selection(&chan, sel, &opts)
                        .map(|(sel, prec, _)| (sel, prec))
                }
                other => Err(Error::InvalidParameter(format!(
                    "scheme `{other}` does not produce a beampattern"
                ))),
            };
            let ms = if cfg.timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            match solved {
                Ok((sel, prec)) => {
                    let report = crate::metrics::secrecy_report(&chan, &sel, &prec)?;
                    let curve = beampattern(&point.geom, &sel, &prec, &angles)?;
                    outcomes.push(TrialOutcome {
                        secrecy: report.sum_secrecy,
                        radar: report.radar_sinr,
                        missed: false,
                        ms,
                        trace: Vec::new(),
                    });
                    curves.push(curve.into_iter().map(|(_, g)| g).collect());
                }
                Err(e) if e.is_infeasible() => {
                    outcomes.push(TrialOutcome::infeasible(ms));
                    curves.push(vec![0.0; angles.len()]);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(BeamTrial { outcomes, curves })
    })?;

    let mut rows = Vec::new();
    let mut pattern = Vec::new();
    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        let secrecy: Vec<f64> = results.iter().map(|r| r.outcomes[si].secrecy).collect();
        let radar: Vec<f64> = results.iter().map(|r| r.outcomes[si].radar).collect();
        let misses = results.iter().filter(|r| r.outcomes[si].missed).count();
        if misses == trials {
            return Err(Error::Infeasible(format!(
                "scheme `{scheme}` missed its constraints in all {trials} trials"
            )));
        }
        let mean_ms = results.iter().map(|r| r.outcomes[si].ms).sum::<f64>() / trials as f64;
        let (mean_s, std_s) = sample_stats(&secrecy);
        let (mean_r, _) = sample_stats(&radar);
        rows.push(ResultRow {
            scenario: Sweep::Beampattern.label().to_string(),
            param: cfg.beam_theta_deg,
            scheme,
            trials,
            mean_secrecy_bps_hz: mean_s,
            std_secrecy: std_s,
            mean_radar_sinr: mean_r,
            miss_frac: misses as f64 / trials as f64,
            mean_ms,
        });
        for (ai, &angle) in angles.iter().enumerate() {
            let mean_gain =
                results.iter().map(|r| r.curves[si][ai]).sum::<f64>() / trials as f64;
            pattern.push(PatternRow {
                scenario: Sweep::Beampattern.label().to_string(),
                angle_deg: angle,
                scheme,
                mean_gain_db: mean_gain,
            });
        }
    }
    Ok((rows, pattern))
}

// ---------------------------------------------------------------------------
// Configuration parsing
// ---------------------------------------------------------------------------

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| config_err(line, format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| config_err(line, format!("key `{key}`: cannot parse `{s}`")))
        })
        .collect()
}

/// Apply one `key = value` assignment. `line` is the 1-based config-file
/// line for error reporting; command-line overrides pass 0.
pub fn apply_kv(cfg: &mut ScenarioConfig, key: &str, value: &str, line: usize) -> Result<()> {
    let key = key.trim();
    let value = value.trim();
    match key {
        "ns_x" => cfg.ns_x = parse_scalar(key, value, line)?,
        "ns_y" => cfg.ns_y = parse_scalar(key, value, line)?,
        "area_x" => cfg.area_x = parse_scalar(key, value, line)?,
        "area_y" => cfg.area_y = parse_scalar(key, value, line)?,
        "freq_hz" => cfg.freq_hz = parse_scalar(key, value, line)?,
        "n_rx" => cfg.n_rx = parse_scalar(key, value, line)?,
        "rx_spacing" => cfg.rx_spacing = parse_scalar(key, value, line)?,
        "num_users" => cfg.num_users = parse_scalar(key, value, line)?,
        "user_distances" => {
            cfg.user_distances = if value == "disc" {
                Vec::new()
            } else {
                parse_list(key, value, line)?
            }
        }
        "disc_radius" => cfg.disc_radius = parse_scalar(key, value, line)?,
        "pathloss_exp" => cfg.pathloss_exp = parse_scalar(key, value, line)?,
        "target_distance" => cfg.target_distance = parse_scalar(key, value, line)?,
        "target_azimuth_deg" => {
            cfg.target_azimuth_deg = if value == "random" {
                None
            } else {
                Some(parse_scalar(key, value, line)?)
            }
        }
        "sigma_b2" => cfg.sigma_b2 = parse_scalar(key, value, line)?,
        "sigma_r2" => cfg.sigma_r2 = parse_scalar(key, value, line)?,
        "sigma_eve2" => cfg.sigma_eve2 = parse_scalar(key, value, line)?,
        "user_noise" => cfg.user_noise = parse_scalar(key, value, line)?,
        "snr_db" => cfg.snr_db = parse_list(key, value, line)?,
        "snr_db_fixed" => cfg.snr_db_fixed = parse_scalar(key, value, line)?,
        "area_grid" => cfg.area_grid = parse_list(key, value, line)?,
        "zeta_grid" => cfg.zeta_grid = parse_list(key, value, line)?,
        "ns_grid" => cfg.ns_grid = parse_list(key, value, line)?,
        "users_grid" => cfg.users_grid = parse_list(key, value, line)?,
        "n_active" => cfg.n_active = parse_scalar(key, value, line)?,
        "zeta" => cfg.zeta = parse_scalar(key, value, line)?,
        "r_th" => cfg.r_th = parse_scalar(key, value, line)?,
        "trials" => cfg.trials = parse_scalar(key, value, line)?,
        "seed" => cfg.seed = parse_scalar(key, value, line)?,
        "schemes" => {
            let labels: Vec<String> = parse_list(key, value, line)?;
            let mut schemes = Vec::with_capacity(labels.len());
            for l in labels {
                schemes.push(
                    Scheme::parse(&l).map_err(|e| config_err(line, format!("{e}")))?,
                );
            }
            cfg.schemes = schemes;
        }
        "mode" => cfg.mode = Mode::parse(value).map_err(|e| config_err(line, format!("{e}")))?,
        "beam_theta_deg" => cfg.beam_theta_deg = parse_scalar(key, value, line)?,
        "beam_step_deg" => cfg.beam_step_deg = parse_scalar(key, value, line)?,
        "timing" => cfg.timing = parse_scalar(key, value, line)?,
        other => {
            return Err(config_err(line, format!("unknown key `{other}`")));
        }
    }
    Ok(())
}

/// Apply a flat key-value profile: one `key = value` per line, `#` comments,
/// blank lines ignored. Errors carry the 1-based line number.
pub fn apply_config_text(cfg: &mut ScenarioConfig, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        apply_kv(cfg, key, value, line_no)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Swept-parameter formatting: whole values print as integers, everything
/// else with 9 significant digits.
fn fmt_param(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        fmt_float(x)
    }
}

/// CSV header shared by every sweep.
pub const CSV_HEADER: &str =
    "scenario,param,scheme,trials,mean_secrecy_bps_hz,std_secrecy,mean_radar_sinr,miss_frac,mean_ms";

/// Render result rows as CSV (header + one line per row).
pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            fmt_param(r.param),
            r.scheme,
            r.trials,
            fmt_float(r.mean_secrecy_bps_hz),
            fmt_float(r.std_secrecy),
            fmt_float(r.mean_radar_sinr),
            fmt_float(r.miss_frac),
            fmt_float(r.mean_ms),
        ));
    }
    s
}

/// Render beampattern rows as CSV.
pub fn write_pattern_csv(rows: &[PatternRow]) -> String {
    let mut s = String::from("scenario,angle_deg,scheme,mean_gain_db\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.scenario,
            fmt_param(r.angle_deg),
            r.scheme,
            fmt_float(r.mean_gain_db),
        ));
    }
    s
}

/// Render rows as a JSON array (pretty-printed).
pub fn write_json<T: Serialize>(rows: &[T]) -> Result<String> {
    serde_json::to_string_pretty(rows)
        .map_err(|e| Error::Numerical(format!("json serialization failed: {e}")))
}
