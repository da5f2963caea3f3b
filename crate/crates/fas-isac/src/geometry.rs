//! Fluid antenna surface geometry: the 2D port grid, Jakes spatial
//! correlation, and far-field steering vectors.
//!
//! Ports live on a regular `ns_x × ns_y` grid stretched over a surface of
//! `area_x × area_y` wavelengths. Port `i` maps to grid coordinates
//! row-major with the y index fastest, matching the vectorization used
//! throughout: `i = n_x · ns_y + n_y` (0-based).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in vacuum [m/s]; used to derive λ from a carrier frequency.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative threshold below which correlation eigenvalues are clamped to 0.
/// j0-based matrices are PSD in exact arithmetic but can pick up tiny
/// negative eigenvalues from roundoff; clamping keeps Λ^(1/2) real.
pub const EIGVAL_CLAMP_REL: f64 = 1e-12;

/// Planar fluid antenna surface plus the receive array layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FasGeometry {
    /// Port count along x (N_s^x).
    pub ns_x: usize,
    /// Port count along y (N_s^y).
    pub ns_y: usize,
    /// Surface extent along x in wavelengths (A_s^x).
    pub area_x: f64,
    /// Surface extent along y in wavelengths (A_s^y).
    pub area_y: f64,
    /// Carrier wavelength λ in meters.
    pub wavelength: f64,
    /// Receive antenna count (N_r).
    pub nr: usize,
    /// Receive ULA element spacing in wavelengths.
    pub rx_spacing: f64,
}

impl FasGeometry {
    /// Validates and builds a geometry.
    pub fn new(
        ns_x: usize,
        ns_y: usize,
        area_x: f64,
        area_y: f64,
        wavelength: f64,
        nr: usize,
        rx_spacing: f64,
    ) -> Result<Self> {
        if ns_x == 0 || ns_y == 0 {
            return Err(Error::InvalidParameter(
                "port counts ns_x, ns_y must be >= 1".into(),
            ));
        }
        if !(wavelength > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if area_x < 0.0 || area_y < 0.0 {
            return Err(Error::InvalidParameter(
                "surface extents must be nonnegative".into(),
            ));
        }
        // A multi-port axis needs positive extent for the spacing to exist.
        if ns_x > 1 && area_x <= 0.0 {
            return Err(Error::InvalidParameter(
                "ns_x > 1 requires area_x > 0".into(),
            ));
        }
        if ns_y > 1 && area_y <= 0.0 {
            return Err(Error::InvalidParameter(
                "ns_y > 1 requires area_y > 0".into(),
            ));
        }
        if nr == 0 {
            return Err(Error::InvalidParameter("nr must be >= 1".into()));
        }
        if !(rx_spacing > 0.0) {
            return Err(Error::InvalidParameter(
                "rx_spacing must be positive".into(),
            ));
        }
        Ok(Self {
            ns_x,
            ns_y,
            area_x,
            area_y,
            wavelength,
            nr,
            rx_spacing,
        })
    }

    /// Convenience constructor taking a carrier frequency instead of λ.
    pub fn with_carrier(
        ns_x: usize,
        ns_y: usize,
        area_x: f64,
        area_y: f64,
        carrier_hz: f64,
        nr: usize,
        rx_spacing: f64,
    ) -> Result<Self> {
        if !(carrier_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "carrier frequency must be positive".into(),
            ));
        }
        Self::new(
            ns_x,
            ns_y,
            area_x,
            area_y,
            SPEED_OF_LIGHT / carrier_hz,
            nr,
            rx_spacing,
        )
    }

    /// Total number of ports N_s = ns_x · ns_y.
    pub fn num_ports(&self) -> usize {
        self.ns_x * self.ns_y
    }

    /// Flat port index for 0-based grid coordinates (y fastest).
    pub fn index_of(&self, nx: usize, ny: usize) -> usize {
        nx * self.ns_y + ny
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn grid_of(&self, i: usize) -> (usize, usize) {
        (i / self.ns_y, i % self.ns_y)
    }
}

/// Physical positions of all ports in meters, in flat index order.
///
/// Ports distribute evenly: along an axis with `n` ports over `a` wavelengths,
/// port `k` sits at `k/(n-1) · a · λ`. An axis with a single port collapses to
/// coordinate 0.
pub fn port_positions(geom: &FasGeometry) -> Vec<[f64; 2]> {
    let step = |k: usize, n: usize, extent_wl: f64| -> f64 {
        if n <= 1 {
            0.0
        } else {
            k as f64 / (n - 1) as f64 * extent_wl * geom.wavelength
        }
    };
    let mut pts = Vec::with_capacity(geom.num_ports());
    for nx in 0..geom.ns_x {
        for ny in 0..geom.ns_y {
            pts.push([
                step(nx, geom.ns_x, geom.area_x),
                step(ny, geom.ns_y, geom.area_y),
            ]);
        }
    }
    pts
}

/// Zeroth-order spherical Bessel function j0(x) = sin(x)/x, j0(0) = 1.
///
/// Near zero the ratio loses precision, so a short Taylor expansion
/// 1 - x²/6 + x⁴/120 takes over for |x| < 1e-4.
pub fn spherical_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Jakes spatial correlation of the port grid with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpatialCorrelation {
    /// J_s: N_s×N_s real symmetric correlation matrix, unit diagonal.
    pub matrix: DMatrix<f64>,
    /// Υ: orthonormal eigenvectors, one per column, matching `eigvalues`.
    pub eigvectors: DMatrix<f64>,
    /// Λ diagonal: eigenvalues sorted descending, clamped to ≥ 0.
    pub eigvalues: DVector<f64>,
}

impl SpatialCorrelation {
    pub fn num_ports(&self) -> usize {
        self.matrix.nrows()
    }

    /// Υ · Λ^(1/2) — the correlation square-root factor used by channel
    /// synthesis. Real because eigenvalues are clamped to ≥ 0.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        let mut f = self.eigvectors.clone();
        for (j, mut col) in f.column_iter_mut().enumerate() {
            col *= self.eigvalues[j].sqrt();
        }
        f
    }
}

/// Builds the Jakes correlation J_s[i][j] = j0(2π Δd_{i,j} / λ) over the port
/// grid and eigendecomposes it.
///
/// Eigenvalues are sorted descending and those below `EIGVAL_CLAMP_REL` times
/// the largest are clamped to exactly 0.
pub fn jakes_correlation(geom: &FasGeometry) -> Result<SpatialCorrelation> {
    let pts = port_positions(geom);
    let n = pts.len();
    let k = 2.0 * std::f64::consts::PI / geom.wavelength;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let dx = pts[i][0] - pts[j][0];
            let dy = pts[i][1] - pts[j][1];
            let v = spherical_j0(k * (dx * dx + dy * dy).sqrt());
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }

    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("correlation eigendecomposition did not converge".into()))?;

    // Sort descending, permuting eigenvectors to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vals = DVector::<f64>::zeros(n);
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = eig.eigenvalues[src];
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    let clamp = EIGVAL_CLAMP_REL * vals[0].max(0.0);
    for v in vals.iter_mut() {
        if *v < clamp {
            *v = 0.0;
        }
    }

    Ok(SpatialCorrelation {
        matrix: m,
        eigvectors: vecs,
        eigvalues: vals,
    })
}

/// A propagation direction as (polar, azimuth) angles in radians.
///
/// θ is measured from the surface broadside (the z axis for the xy-plane
/// grid), φ in the xy plane from the x axis. The receive ULA lies along x,
/// so its phase gradient is sin θ · cos φ per element spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    /// Polar angle θ from broadside, radians.
    pub theta: f64,
    /// Azimuth φ, radians.
    pub phi: f64,
}

impl Direction {
    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Self {
        Self {
            theta: theta_deg.to_radians(),
            phi: phi_deg.to_radians(),
        }
    }

    /// Unit propagation vector (sinθ cosφ, sinθ sinφ, cosθ).
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Far-field steering vectors (a_t over the port grid, a_r over the receive
/// ULA) toward `dir`.
///
/// a_t[n] = exp(j · 2π/λ · Δ_t^n) where Δ_t^n is the planar-wavefront
/// projection of port n's position onto the unit direction, relative to port
/// 0 (the reference). The ULA sits along x with `rx_spacing`·λ element
/// pitch, so a_r[m] = exp(j · 2π · rx_spacing · m · sinθ cosφ).
pub fn steering_vectors(
    geom: &FasGeometry,
    dir: Direction,
) -> (DVector<Complex64>, DVector<Complex64>) {
    let pts = port_positions(geom);
    let u = dir.unit_vector();
    let k = 2.0 * std::f64::consts::PI / geom.wavelength;
    let (x0, y0) = (pts[0][0], pts[0][1]);
    let a_t = DVector::from_iterator(
        pts.len(),
        pts.iter().map(|p| {
            let proj = (p[0] - x0) * u[0] + (p[1] - y0) * u[1];
            Complex64::from_polar(1.0, k * proj)
        }),
    );
    let a_r = DVector::from_iterator(
        geom.nr,
        (0..geom.nr).map(|m| {
            let proj = geom.rx_spacing * geom.wavelength * m as f64 * u[0];
            Complex64::from_polar(1.0, k * proj)
        }),
    );
    (a_t, a_r)
}

/// Rank-one target response G = α · a_r · a_t^H.
pub fn target_response(
    a_r: &DVector<Complex64>,
    a_t: &DVector<Complex64>,
    alpha: Complex64,
) -> DMatrix<Complex64> {
    (a_r * a_t.adjoint()) * alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geom(ns_x: usize, ns_y: usize, ax: f64, ay: f64, lambda: f64) -> FasGeometry {
        FasGeometry::new(ns_x, ns_y, ax, ay, lambda, 4, 0.5).unwrap()
    }

    #[test]
    fn single_port_at_origin() {
        let pts = port_positions(&geom(1, 1, 0.0, 0.0, 0.1));
        assert_eq!(pts, vec![[0.0, 0.0]]);
    }

    #[test]
    fn two_port_line_half_wavelength() {
        // ns_x=2, area_x=0.5, λ=1 m → ports at x=0 and x=0.5 m.
        let pts = port_positions(&geom(2, 1, 0.5, 0.0, 1.0));
        assert_eq!(pts.len(), 2);
        assert_abs_diff_eq!(pts[0][0], 0.0);
        assert_abs_diff_eq!(pts[1][0], 0.5);
        assert_abs_diff_eq!(pts[1][1], 0.0);
    }

    #[test]
    fn square_grid_corner_distance() {
        // 4×4 over 1λ×1λ: opposite corners are √2·λ apart.
        let lambda = 0.125;
        let pts = port_positions(&geom(4, 4, 1.0, 1.0, lambda));
        let (a, b) = (pts[0], pts[15]);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert_abs_diff_eq!(d, 2f64.sqrt() * lambda, epsilon = 1e-15);
    }

    #[test]
    fn three_ghz_grid_positions() {
        // 2×2 grid over 1λ×1λ at 3 GHz: λ ≈ 0.09993 m; y index runs fastest.
        let g = FasGeometry::with_carrier(2, 2, 1.0, 1.0, 3e9, 4, 0.5).unwrap();
        let lam = SPEED_OF_LIGHT / 3e9;
        let pts = port_positions(&g);
        let want = [[0.0, 0.0], [0.0, lam], [lam, 0.0], [lam, lam]];
        for (p, w) in pts.iter().zip(want.iter()) {
            assert_abs_diff_eq!(p[0], w[0], epsilon = 1e-12);
            assert_abs_diff_eq!(p[1], w[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn index_round_trip() {
        let g = geom(5, 3, 1.0, 0.5, 0.1);
        for i in 0..g.num_ports() {
            let (nx, ny) = g.grid_of(i);
            assert_eq!(g.index_of(nx, ny), i);
        }
        assert_eq!(g.index_of(0, 1), 1); // y fastest
    }

    #[test]
    fn geometry_validation() {
        assert!(FasGeometry::new(0, 1, 1.0, 1.0, 0.1, 4, 0.5).is_err());
        assert!(FasGeometry::new(2, 1, 0.0, 1.0, 0.1, 4, 0.5).is_err());
        assert!(FasGeometry::new(1, 1, 0.0, 0.0, -0.1, 4, 0.5).is_err());
        assert!(FasGeometry::new(1, 1, 0.0, 0.0, 0.1, 0, 0.5).is_err());
    }

    #[test]
    fn j0_basics() {
        assert_abs_diff_eq!(spherical_j0(0.0), 1.0);
        // j0(π) = sin(π)/π = 0.
        assert_abs_diff_eq!(spherical_j0(std::f64::consts::PI), 0.0, epsilon = 1e-15);
        // Taylor branch agrees with the ratio just above the crossover.
        let x = 1.0001e-4;
        assert_abs_diff_eq!(spherical_j0(x), x.sin() / x, epsilon = 1e-16);
    }

    #[test]
    fn jakes_unit_diagonal_and_symmetry() {
        let c = jakes_correlation(&geom(4, 4, 1.0, 1.0, 0.125)).unwrap();
        for i in 0..16 {
            assert_eq!(c.matrix[(i, i)], 1.0);
            for j in 0..16 {
                assert_eq!(c.matrix[(i, j)], c.matrix[(j, i)]);
            }
        }
    }

    #[test]
    fn jakes_half_wavelength_zero() {
        // Two ports λ/2 apart → j0(π) = 0 off-diagonal.
        let c = jakes_correlation(&geom(2, 1, 0.5, 0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(c.matrix[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn jakes_elementwise_oracle() {
        // Independent scalar evaluation per pair on the 4×4, 1λ grid.
        let g = geom(4, 4, 1.0, 1.0, 0.125);
        let c = jakes_correlation(&g).unwrap();
        let pts = port_positions(&g);
        let mut max_diff: f64 = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                let want = spherical_j0(2.0 * std::f64::consts::PI * d / g.wavelength);
                max_diff = max_diff.max((c.matrix[(i, j)] - want).abs());
            }
        }
        assert!(max_diff <= 1e-12, "max abs diff {max_diff}");
    }

    #[test]
    fn jakes_eigendecomposition_properties() {
        let c = jakes_correlation(&geom(4, 4, 1.0, 1.0, 0.125)).unwrap();
        // Sorted descending, nonnegative after clamping.
        for w in c.eigvalues.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(c.eigvalues.iter().all(|&v| v >= 0.0));
        // Υ Λ Υ^T reconstructs J_s to ≤ 1e-10 relative error.
        let lam = DMatrix::from_diagonal(&c.eigvalues);
        let rec = &c.eigvectors * lam * c.eigvectors.transpose();
        let rel = (&rec - &c.matrix).norm() / c.matrix.norm();
        assert!(rel <= 1e-10, "reconstruction error {rel}");
        // sqrt factor squares back to J_s as well.
        let f = c.sqrt_factor();
        let rel2 = (&f * f.transpose() - &c.matrix).norm() / c.matrix.norm();
        assert!(rel2 <= 1e-10);
    }

    #[test]
    fn steering_broadside_all_ones() {
        let g = geom(3, 3, 1.0, 1.0, 0.125);
        let (a_t, a_r) = steering_vectors(&g, Direction::from_degrees(0.0, 0.0));
        for v in a_t.iter().chain(a_r.iter()) {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_unit_modulus() {
        let g = geom(4, 4, 1.0, 1.0, 0.125);
        let (a_t, a_r) = steering_vectors(&g, Direction::from_degrees(37.0, 12.0));
        for v in a_t.iter().chain(a_r.iter()) {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_endfire_two_port() {
        // 2 ports λ/2 apart along x, wave arriving endfire (θ=90°, φ=0):
        // path difference λ/2 → phases {0, π}.
        let g = geom(2, 1, 0.5, 0.0, 1.0);
        let (a_t, _) = steering_vectors(&g, Direction::from_degrees(90.0, 0.0));
        assert_abs_diff_eq!(a_t[0].arg(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a_t[1].arg().abs(), std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn target_response_rank_one() {
        let g = geom(3, 2, 1.0, 0.5, 0.125);
        let (a_t, a_r) = steering_vectors(&g, Direction::from_degrees(20.0, 0.0));
        let alpha = Complex64::new(0.3, -0.4);
        let gm = target_response(&a_r, &a_t, alpha);
        assert_eq!(gm.nrows(), g.nr);
        assert_eq!(gm.ncols(), g.num_ports());
        // ‖G‖_F = |α|·√(N_r·N_s) for unit-modulus steering.
        let want = alpha.norm() * ((g.nr * g.num_ports()) as f64).sqrt();
        assert_abs_diff_eq!(gm.norm(), want, epsilon = 1e-12);
        // Rank one: every 2×2 minor vanishes.
        let s = gm.svd(false, false);
        assert!(s.singular_values[1] <= 1e-12 * s.singular_values[0]);
    }

    #[test]
    fn target_response_trivial_cases() {
        let a_r = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let a_t = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let g0 = target_response(&a_r, &a_t, Complex64::new(0.0, 0.0));
        assert_eq!(g0[(0, 0)], Complex64::new(0.0, 0.0));
        let g1 = target_response(&a_r, &a_t, Complex64::new(1.0, 0.0));
        assert_eq!(g1[(0, 0)], Complex64::new(1.0, 0.0));
    }
}
