//! Independent-oracle checks for the precoder subproblem, the SCA loop, and
//! the joint port-selection solver.

mod common;

use common::{
    combinations, default_grid_channel, line_channel, pg_oracle, random_matrix, remark1_precoder,
    small_grid_channel,
};
use fas_isac::fp::{assemble_surrogate, lin_form, update_auxiliaries};
use fas_isac::metrics::{PortSelection, Precoder, select_entries};
use fas_isac::solver::{
    jpps, sca_precoder, solve_precoder_subproblem, solve_with_selection, SolverOptions,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dual bisection vs. first-order oracle: the projected-gradient solution
/// must not improve on the bisection objective beyond bisection slop, and
/// both must agree to 1e-4 relative.
#[test]
fn subproblem_matches_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..20 {
        let m = random_matrix(6, 4, &mut rng);
        let b = random_matrix(6, 4, &mut rng);
        let p = 1.0 + 3.0 * rng.random::<f64>();
        let sup = 2.0 * p.sqrt() * b.norm();
        let rho = sup * (0.1 + 0.8 * rng.random::<f64>());
        let w = solve_precoder_subproblem(&m, &b, p, rho, 1e-8).unwrap();
        let obj_bis = lin_form(&m, &w);
        // Returned point is feasible.
        assert!(w.norm_squared() <= p * (1.0 + 1e-9));
        assert!(lin_form(&b, &w) >= rho * (1.0 - 1e-8));
        let obj_pg = pg_oracle(&m, &b, p, rho, 500, 1e-3);
        let scale = obj_bis.abs().max(1e-9);
        assert!(
            obj_pg - obj_bis <= 1e-6 * scale,
            "trial {trial}: oracle beat bisection: {obj_pg} vs {obj_bis}"
        );
        assert!(
            (obj_bis - obj_pg).abs() <= 1e-4 * scale,
            "trial {trial}: gap {:.3e} above 1e-4 relative ({obj_bis} vs {obj_pg})",
            (obj_bis - obj_pg).abs() / scale
        );
    }
}

/// Eavesdropper-free single-user SCA against the regularized closed form
/// (D1 + λI)^{-1} C1 with λ from power complementarity.
#[test]
fn sca_matches_single_user_closed_form() {
    for seed in [3u64, 11, 42] {
        let chan = line_channel(1, 8, seed);
        let sel = PortSelection::new(vec![0, 2, 5, 7]).unwrap();
        let p = 10.0;
        let mut opts = SolverOptions::new(4, p);
        opts.max_sca_iters = 2000;
        opts.tol = 1e-14 * p;
        // Matched-filter start at full power.
        let h0 = select_entries(&chan.user_channel(0), &sel);
        let mut w0 = DMatrix::<Complex64>::zeros(4, 1);
        w0.set_column(0, &h0);
        let w0 = &w0 * Complex64::new(p.sqrt() / w0.norm(), 0.0);
        let prec = Precoder::new(w0.clone(), p).unwrap();
        let mut fp = update_auxiliaries(&chan, &sel, &prec).unwrap();
        // Strip the eavesdropper side so the surrogate is the pure
        // communication quadratic.
        fp.beta[0] = Complex64::ZERO;
        fp.v[0] = 0.0;
        let sur = assemble_surrogate(&fp, &chan, &sel, 0.0).unwrap();
        assert!(sur.c2.norm() == 0.0 && sur.d2.norm() == 0.0);
        let out = sca_precoder(&sur, &w0, &opts).unwrap();
        let oracle = remark1_precoder(&sur.d1, &sur.c1, p);
        let cos = {
            let mut inner = Complex64::ZERO;
            for (a, b) in out.w.iter().zip(oracle.iter()) {
                inner += a.conj() * b;
            }
            inner.norm() / (out.w.norm() * oracle.norm())
        };
        assert!(cos >= 0.999, "seed {seed}: cosine {cos}");
    }
}

/// Joint solver vs. exhaustive selection search (every 3-of-8 subset solved
/// with the fixed-selection alternation): within 5% of the best on at least
/// 90% of seeds, and never below 80% of the best on any seed.
#[test]
fn jpps_within_five_percent_of_exhaustive_selection() {
    let p = 10.0;
    let mut within = 0usize;
    let seeds: Vec<u64> = (0..10).collect();
    for &seed in &seeds {
        let chan = small_grid_channel(2, seed);
        let mut opts = SolverOptions::new(3, p);
        opts.zeta = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = jpps(&chan, &opts, &mut rng).unwrap();

        let mut fixed = opts.clone();
        fixed.reselect = false;
        let mut best = f64::NEG_INFINITY;
        for subset in combinations(8, 3) {
            let sel = PortSelection::new(subset).unwrap();
            let out = solve_with_selection(&chan, sel, &fixed).unwrap();
            if !out.constraint_missed {
                best = best.max(out.report.sum_secrecy);
            }
        }
        let ratio = got.report.sum_secrecy / best;
        assert!(
            ratio >= 0.80,
            "seed {seed}: jpps {} far below exhaustive {best}",
            got.report.sum_secrecy
        );
        if ratio >= 0.95 {
            within += 1;
        }
    }
    assert!(
        within * 10 >= seeds.len() * 9,
        "only {within}/{} seeds within 5% of exhaustive",
        seeds.len()
    );
}

/// On a line array with one dominant-gain cluster the joint solver must land
/// on the exhaustive optimum exactly (same subset, same value).
#[test]
fn jpps_recovers_exhaustive_optimum_on_line_array() {
    let chan = line_channel(2, 8, 1);
    let p = 10.0;
    let opts = SolverOptions::new(3, p);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let got = jpps(&chan, &opts, &mut rng).unwrap();

    let mut fixed = opts.clone();
    fixed.reselect = false;
    let mut best = f64::NEG_INFINITY;
    for subset in combinations(8, 3) {
        let sel = PortSelection::new(subset).unwrap();
        let out = solve_with_selection(&chan, sel, &fixed).unwrap();
        best = best.max(out.report.sum_secrecy);
    }
    assert!(
        got.report.sum_secrecy >= 0.999 * best,
        "jpps {} vs exhaustive {best}",
        got.report.sum_secrecy
    );
}

/// Outer-loop convergence at the reference deployment: the precoder-change
/// stopping rule fires within six outer iterations (median over seeds).
#[test]
fn jpps_converges_within_six_outer_iterations() {
    let mut lens: Vec<usize> = Vec::new();
    for seed in 0..5u64 {
        let chan = default_grid_channel(seed);
        let p = 100.0; // 20 dB over unit noise
        let mut opts = SolverOptions::new(6, p);
        opts.zeta = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = jpps(&chan, &opts, &mut rng).unwrap();
        assert!(!out.constraint_missed);
        lens.push(out.trace.len());
    }
    lens.sort_unstable();
    let median = lens[lens.len() / 2];
    assert!(median <= 6, "median outer iterations {median} (trace lengths {lens:?})");
}
