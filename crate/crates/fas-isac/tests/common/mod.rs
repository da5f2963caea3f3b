//! Shared instance builders and independent numerical oracles for the
//! integration suites. Everything here is deliberately written against the
//! public API only, and the oracles avoid the library's own solution paths
//! (projected gradients instead of dual bisection, closed forms instead of
//! iterations) so agreement is evidence rather than tautology.
#![allow(dead_code)]

use fas_isac::channel::{complex_gaussian, synthesize_user_channel, ChannelSet, UserLink};
use fas_isac::fp::lin_form;
use fas_isac::geometry::{jakes_correlation, steering_vectors, Direction, FasGeometry};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn random_matrix<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(r, c, |_, _| complex_gaussian(rng))
}

/// Exact Euclidean projection onto {‖W‖_F ≤ √P} ∩ {2Re Tr(B^H W) ≥ ϱ} under
/// the real inner product Re Tr(A^H B): case analysis over ball projection,
/// halfspace projection, and the sphere∩hyperplane ring.
pub fn project_feasible(
    x: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    p: f64,
    rho: f64,
) -> DMatrix<Complex64> {
    let radius = p.sqrt();
    let ball = |y: &DMatrix<Complex64>| {
        let n = y.norm();
        if n <= radius {
            y.clone()
        } else {
            y * Complex64::new(radius / n, 0.0)
        }
    };
    if rho <= 0.0 {
        return ball(x);
    }
    let bnorm = b.norm();
    assert!(bnorm > 0.0, "halfspace with zero normal");
    // Constraint in unit-normal form: Re<b_hat, W> >= c0.
    let c0 = rho / (2.0 * bnorm);
    let bhat = b * Complex64::new(1.0 / bnorm, 0.0);
    let comp = |y: &DMatrix<Complex64>| lin_form(&bhat, y) / 2.0;
    let y1 = ball(x);
    if comp(&y1) >= c0 - 1e-15 * c0.abs().max(1.0) {
        return y1; // ball projection already satisfies the halfspace
    }
    let y2 = x + &bhat * Complex64::new(c0 - comp(x), 0.0);
    if y2.norm() <= radius {
        return y2; // hyperplane projection already inside the ball
    }
    // Project onto the sphere∩hyperplane ring.
    let y_perp = &y2 - &bhat * Complex64::new(c0, 0.0);
    let ring = (p - c0 * c0).max(0.0).sqrt();
    let pn = y_perp.norm();
    if pn == 0.0 {
        return &bhat * Complex64::new(c0, 0.0);
    }
    &bhat * Complex64::new(c0, 0.0) + y_perp * Complex64::new(ring / pn, 0.0)
}

/// Projected-gradient ascent for max 2Re Tr(W^H M) over the feasible set,
/// started from the radar-matched feasible point √P·B/‖B‖ (or the scaled
/// objective direction when the constraint is inactive). Returns the best
/// objective value seen.
pub fn pg_oracle(
    m: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    p: f64,
    rho: f64,
    steps: usize,
    step: f64,
) -> f64 {
    let radius = p.sqrt();
    let mut w = if rho > 0.0 {
        b * Complex64::new(radius / b.norm(), 0.0)
    } else if m.norm() > 0.0 {
        m * Complex64::new(radius / m.norm(), 0.0)
    } else {
        DMatrix::zeros(m.nrows(), m.ncols())
    };
    let mut best = lin_form(m, &w);
    for _ in 0..steps {
        w = project_feasible(&(&w + m * Complex64::new(2.0 * step, 0.0)), b, p, rho);
        best = best.max(lin_form(m, &w));
    }
    best
}

/// Closed-form regularized precoder for the single-user, eavesdropper-free
/// quadratic program max 2Re Tr(W^H C1) − Tr(W^H D1 W) s.t. ‖W‖_F ≤ √P:
/// W(λ) = (D1 + λI)^{-1} C1 with λ ≥ 0 chosen by power complementarity.
pub fn remark1_precoder(
    d1: &DMatrix<Complex64>,
    c1: &DMatrix<Complex64>,
    p: f64,
) -> DMatrix<Complex64> {
    let n = d1.nrows();
    let radius = p.sqrt();
    let w_of = |lam: f64| -> DMatrix<Complex64> {
        let a = d1 + DMatrix::<Complex64>::identity(n, n) * Complex64::new(lam, 0.0);
        a.lu().solve(c1).expect("regularized system solvable")
    };
    // λ = 0 candidate via the pseudo-inverse (D1 may be singular with C1 in
    // its range, e.g. the rank-one single-user case).
    let pinv = d1
        .clone()
        .svd(true, true)
        .pseudo_inverse(1e-12 * d1.norm().max(1.0))
        .expect("svd");
    let w0 = &pinv * c1;
    if w0.norm() <= radius + 1e-12 * radius {
        return w0;
    }
    // Power binds: bisect λ so that ‖W(λ)‖ = √P (norm decreasing in λ).
    let mut lo = 0.0;
    let mut hi = 1.0;
    while w_of(hi).norm() > radius {
        hi *= 2.0;
        assert!(hi < 1e18, "λ bracket exploded");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w_of(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    w_of(0.5 * (lo + hi))
}

/// All k-subsets of {0, …, n−1} in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return if k == 0 { vec![vec![]] } else { out };
    }
    loop {
        out.push(cur.clone());
        // Advance the rightmost index that can still move.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Small line-array channel: n_ports on a 1λ line, K users at staggered
/// distances, unit noise everywhere, target at 20° azimuth.
pub fn line_channel(k: usize, n_ports: usize, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = FasGeometry::new(n_ports, 1, 1.0, 0.0, 0.125, 6, 0.5).unwrap();
    let corr = jakes_correlation(&geom).unwrap();
    let links: Vec<UserLink> = (0..k)
        .map(|i| UserLink::new(2.0 + 8.0 * i as f64, 2.0, 1.0).unwrap())
        .collect();
    let users: Vec<DVector<Complex64>> = links
        .iter()
        .map(|l| synthesize_user_channel(&corr, l, &mut rng))
        .collect();
    let (a_t, a_r) = steering_vectors(&geom, Direction::from_degrees(20.0, 0.0));
    let rc = DMatrix::<Complex64>::zeros(6, 6);
    ChannelSet::new(
        &users,
        a_t,
        a_r,
        Complex64::from_polar(5e-3, 0.7),
        rc,
        1e-8,
        1.0,
        1.0,
        vec![1.0; k],
    )
    .unwrap()
}

/// Scaled-down deployment with the disc user placement used by the
/// user-count sweep: 4×2 grid (N_s = 8) over a 2λ×2λ aperture, K users
/// uniform in a 32 m disc, same noise/target conventions. This is the
/// instance family for the three-scheme exhaustive-oracle comparisons.
pub fn disc_grid_channel(k: usize, seed: u64) -> ChannelSet {
    let c = 299_792_458.0;
    let lambda = c / 2.4e9;
    let geom = FasGeometry::new(4, 2, 2.0, 2.0, lambda, 10, 0.5).unwrap();
    let corr = jakes_correlation(&geom).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_deg = -60.0 + 120.0 * rng.random::<f64>();
    let phase = std::f64::consts::TAU * rng.random::<f64>();
    let users: Vec<DVector<Complex64>> = (0..k)
        .map(|_| {
            let d = 32.0 * rng.random::<f64>().sqrt().max(1e-3);
            let link = UserLink::new(d, 2.0, 1.0).unwrap();
            synthesize_user_channel(&corr, &link, &mut rng)
        })
        .collect();
    let (a_t, a_r) = steering_vectors(&geom, Direction::from_degrees(theta_deg, 0.0));
    let alpha = Complex64::from_polar(1.0 / 200.0, phase);
    let rc = DMatrix::<Complex64>::zeros(10, 10);
    ChannelSet::new(&users, a_t, a_r, alpha, rc, 1e-8, 1.0, 1.0, vec![1.0; k]).unwrap()
}

/// Scaled-down variant of the reference deployment for exhaustive-search
/// comparisons: 4×2 grid (N_s = 8) over a 1λ×1λ aperture, K users at the
/// first K reference distances, same noise/target conventions.
pub fn small_grid_channel(k: usize, seed: u64) -> ChannelSet {
    let c = 299_792_458.0;
    let lambda = c / 2.4e9;
    let geom = FasGeometry::new(4, 2, 1.0, 1.0, lambda, 10, 0.5).unwrap();
    let corr = jakes_correlation(&geom).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_deg = -60.0 + 120.0 * rng.random::<f64>();
    let phase = std::f64::consts::TAU * rng.random::<f64>();
    let dists = [2.0, 15.0, 25.0, 35.0, 45.0, 55.0];
    let links: Vec<UserLink> = dists[..k]
        .iter()
        .map(|&d| UserLink::new(d, 2.0, 1.0).unwrap())
        .collect();
    let users: Vec<DVector<Complex64>> = links
        .iter()
        .map(|l| synthesize_user_channel(&corr, l, &mut rng))
        .collect();
    let (a_t, a_r) = steering_vectors(&geom, Direction::from_degrees(theta_deg, 0.0));
    let alpha = Complex64::from_polar(1.0 / 200.0, phase);
    let rc = DMatrix::<Complex64>::zeros(10, 10);
    ChannelSet::new(&users, a_t, a_r, alpha, rc, 1e-8, 1.0, 1.0, vec![1.0; k]).unwrap()
}

/// Reference deployment used across the trend experiments: 4×4 grid over a
/// 1λ×1λ aperture at 2.4 GHz, 10 receive antennas, four users at
/// {2, 15, 25, 35} m with path-loss exponent 2, target at 200 m / 20°.
pub fn default_grid_channel(seed: u64) -> ChannelSet {
    let c = 299_792_458.0;
    let lambda = c / 2.4e9;
    let geom = FasGeometry::new(4, 4, 1.0, 1.0, lambda, 10, 0.5).unwrap();
    let corr = jakes_correlation(&geom).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Draw order: target azimuth, target phase, then per-user fading.
    let theta_deg = -60.0 + 120.0 * rng.random::<f64>();
    let phase = std::f64::consts::TAU * rng.random::<f64>();
    let dists = [2.0, 15.0, 25.0, 35.0];
    let links: Vec<UserLink> = dists
        .iter()
        .map(|&d| UserLink::new(d, 2.0, 1.0).unwrap())
        .collect();
    let users: Vec<DVector<Complex64>> = links
        .iter()
        .map(|l| synthesize_user_channel(&corr, l, &mut rng))
        .collect();
    let (a_t, a_r) = steering_vectors(&geom, Direction::from_degrees(theta_deg, 0.0));
    let alpha = Complex64::from_polar(1.0 / 200.0, phase);
    let rc = DMatrix::<Complex64>::zeros(10, 10);
    ChannelSet::new(&users, a_t, a_r, alpha, rc, 1e-8, 1.0, 1.0, vec![1.0; 4]).unwrap()
}
