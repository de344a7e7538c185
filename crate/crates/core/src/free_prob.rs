//! Spectral measures, Hilbert and R-transforms, and the large-n limit of the
//! rank-one spherical integral.
//!
//! For a compactly supported probability measure `μ` on `[γ_min, γ_max]` the
//! Hilbert transform is `H(z) = ∫ dμ(t)/(z - t)` for `z` outside the support,
//! and the R-transform is `R(z) = H⁻¹(z) - 1/z`. The rank-one spherical
//! integral `(1/n) ln E_u[exp(nθ uᵀAu)]` converges to
//! `θν - ½∫ ln(1 + 2θν - 2θt) dμ(t)`, where `ν` depends on which side of the
//! edge values `H_min`, `H_max` the point `2θ` falls.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::error::{ensure, Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};

/// Absolutely continuous probability measure with compact support.
pub trait SpectralMeasure: Send + Sync {
    /// `(γ_min, γ_max)`.
    fn support(&self) -> (f64, f64);

    fn density(&self, t: f64) -> f64;

    /// `∫ f dμ`, by default through `t = mid + half·sin φ`, which flattens
    /// square-root edges of the density.
    fn expect(&self, f: &mut dyn FnMut(f64) -> f64) -> Result<f64> {
        let (lo, hi) = self.support();
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let cfg = QuadratureConfig { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 4000 };
        let r = integrate(
            |phi| {
                let t = mid + half * phi.sin();
                let w = self.density(t) * half * phi.cos();
                if w == 0.0 {
                    0.0
                } else {
                    f(t) * w
                }
            },
            -FRAC_PI_2,
            FRAC_PI_2,
            &cfg,
        )?;
        Ok(r.value)
    }

    /// `H(z)` for `z` outside the open support; at the edges returns the
    /// one-sided limit.
    fn hilbert(&self, z: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if z > lo && z < hi || z.is_nan() {
            return Err(Error::InsideSupport { z, lo, hi });
        }
        self.expect(&mut |t| 1.0 / (z - t))
    }

    /// `(H_min, H_max)`, the limits of `H` at `γ_min⁻` and `γ_max⁺`.
    fn edge_hilbert(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.support();
        Ok((self.hilbert(lo)?, self.hilbert(hi)?))
    }

    fn mean(&self) -> Result<f64> {
        self.expect(&mut |t| t)
    }

    fn variance(&self) -> Result<f64> {
        let m = self.mean()?;
        self.expect(&mut |t| (t - m) * (t - m))
    }
}

/// Wigner semicircle law on `[-2, 2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Semicircle;

pub fn semicircle_measure() -> Semicircle {
    Semicircle
}

impl Semicircle {
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= -2.0 {
            0.0
        } else if t >= 2.0 {
            1.0
        } else {
            0.5 + (t * (4.0 - t * t).sqrt() / 4.0 + (t / 2.0).asin()) / PI
        }
    }

    /// Quantile function, by bisection on the CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut a, mut b) = (-2.0, 2.0);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if self.cdf(m) < p {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

impl SpectralMeasure for Semicircle {
    fn support(&self) -> (f64, f64) {
        (-2.0, 2.0)
    }

    fn density(&self, t: f64) -> f64 {
        if t.abs() >= 2.0 {
            0.0
        } else {
            (4.0 - t * t).sqrt() / (2.0 * PI)
        }
    }

    fn hilbert(&self, z: f64) -> Result<f64> {
        if z.abs() < 2.0 || z.is_nan() {
            return Err(Error::InsideSupport { z, lo: -2.0, hi: 2.0 });
        }
        // (z - √(z²-4))/2 rewritten to avoid cancellation for large |z|.
        let root = (z * z - 4.0).sqrt();
        Ok(2.0 / (z + z.signum() * root))
    }

    fn edge_hilbert(&self) -> Result<(f64, f64)> {
        Ok((-1.0, 1.0))
    }
}

/// A measure given by a numerical density, normalised on construction.
pub struct DensityMeasure {
    lo: f64,
    hi: f64,
    scale: f64,
    density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for DensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMeasure").field("lo", &self.lo).field("hi", &self.hi).finish_non_exhaustive()
    }
}

impl DensityMeasure {
    /// Rescales `density` to unit mass on `[lo, hi]`. Fails if the density
    /// is negative somewhere on a probe grid or has no mass.
    pub fn normalized<F>(lo: f64, hi: f64, density: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ensure(lo.is_finite() && hi.is_finite() && lo < hi, || format!("bad support [{lo}, {hi}]"))?;
        for k in 1..256 {
            let t = lo + (hi - lo) * k as f64 / 256.0;
            let d = density(t);
            ensure(d.is_finite() && d >= 0.0, || format!("density is {d} at {t}"))?;
        }
        let mut m = Self { lo, hi, scale: 1.0, density: Box::new(density) };
        let mass = m.expect(&mut |_| 1.0)?;
        ensure(mass > 0.0 && mass.is_finite(), || format!("density has mass {mass}"))?;
        m.scale = 1.0 / mass;
        Ok(m)
    }
}

impl SpectralMeasure for DensityMeasure {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn density(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            0.0
        } else {
            self.scale * (self.density)(t)
        }
    }
}

/// `R(z) = H⁻¹(z) - 1/z`, inverting `H` by bisection outside the support.
///
/// Defined on `[H_min, H_max]`; near `z = 0` the series `mean + variance·z`
/// is used.
pub fn r_transform(measure: &dyn SpectralMeasure, z: f64) -> Result<f64> {
    let (h_min, h_max) = measure.edge_hilbert()?;
    if !(z >= h_min && z <= h_max) {
        return Err(Error::OutOfRange { value: z, lo: h_min, hi: h_max });
    }
    if z.abs() < 1e-6 {
        return Ok(measure.mean()? + measure.variance()? * z);
    }
    Ok(inverse_hilbert(measure, z)? - 1.0 / z)
}

/// The point `w` outside the support with `H(w) = z`.
pub fn inverse_hilbert(measure: &dyn SpectralMeasure, z: f64) -> Result<f64> {
    let (lo, hi) = measure.support();
    let (h_min, h_max) = measure.edge_hilbert()?;
    if z == h_max {
        return Ok(hi);
    }
    if z == h_min {
        return Ok(lo);
    }
    if z == 0.0 || !(z > h_min && z < h_max) {
        return Err(Error::OutOfRange { value: z, lo: h_min, hi: h_max });
    }
    // H is decreasing on each side; on the right it falls from H_max to 0.
    let (edge, dir) = if z > 0.0 { (hi, 1.0) } else { (lo, -1.0) };
    let eps = 1e-12 * (1.0 + edge.abs());
    let width = (hi - lo).max(1.0);
    let mut near = edge + dir * eps;
    let mut span = width;
    let mut far = edge + dir * span;
    // H(near) - z has the sign of z; find `far` where it flips.
    while (measure.hilbert(far)? - z) * dir > 0.0 {
        near = far;
        span *= 2.0;
        far = edge + dir * span;
        if !far.is_finite() {
            return Err(Error::NoRoot(format!("Hilbert inverse of {z} not bracketed")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        if (measure.hilbert(mid)? - z) * dir > 0.0 {
            near = mid;
        } else {
            far = mid;
        }
    }
    Ok(0.5 * (near + far))
}

/// Edge data of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeData {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

/// Edges of `Y/√n` for a spiked Wigner matrix whose spike has strength
/// `√λ σ²`: an outlier `s + 1/s` detaches above the threshold `s = 1`.
pub fn deformed_edge(snr_strength: f64) -> Result<EdgeData> {
    ensure(snr_strength.is_finite() && snr_strength >= 0.0, || {
        format!("spike strength must be >= 0, got {snr_strength}")
    })?;
    let (gamma_max, h_max) =
        if snr_strength <= 1.0 { (2.0, 1.0) } else { (snr_strength + 1.0 / snr_strength, 1.0 / snr_strength) };
    Ok(EdgeData { gamma_min: -2.0, gamma_max, h_min: -1.0, h_max })
}

/// Inputs of the rank-one spherical integral limit.
///
/// `measure` is the bulk; the edge data may extend beyond its support when an
/// outlier eigenvalue is present.
#[derive(Clone, Copy)]
pub struct GMInput<'a> {
    pub measure: &'a dyn SpectralMeasure,
    pub theta: f64,
    pub edges: EdgeData,
}

impl fmt::Debug for GMInput<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GMInput").field("theta", &self.theta).field("edges", &self.edges).finish_non_exhaustive()
    }
}

impl<'a> GMInput<'a> {
    /// Edge data read off the measure itself.
    pub fn from_measure(measure: &'a dyn SpectralMeasure, theta: f64) -> Result<Self> {
        let (gamma_min, gamma_max) = measure.support();
        let (h_min, h_max) = measure.edge_hilbert()?;
        Self::with_edges(measure, theta, EdgeData { gamma_min, gamma_max, h_min, h_max })
    }

    pub fn with_edges(measure: &'a dyn SpectralMeasure, theta: f64, edges: EdgeData) -> Result<Self> {
        let g = Self { measure, theta, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.measure.support();
        let e = self.edges;
        ensure(self.theta.is_finite(), || format!("theta must be finite, got {}", self.theta))?;
        ensure(e.gamma_min <= lo && e.gamma_max >= hi, || {
            format!("edges [{}, {}] do not contain the support [{lo}, {hi}]", e.gamma_min, e.gamma_max)
        })?;
        ensure(e.h_min < 0.0 && e.h_max > 0.0, || format!("need H_min < 0 < H_max, got {} and {}", e.h_min, e.h_max))
    }
}

/// `ν(θ)`: `R(2θ)` inside `[H_min, H_max]`, otherwise `γ - 1/(2θ)` with the
/// edge on the corresponding side.
pub fn gm_nu(input: &GMInput<'_>) -> Result<f64> {
    input.validate()?;
    let z = 2.0 * input.theta;
    ensure(z != 0.0, || "nu is undefined at theta = 0".into())?;
    let e = input.edges;
    if z > e.h_max {
        Ok(e.gamma_max - 1.0 / z)
    } else if z < e.h_min {
        Ok(e.gamma_min - 1.0 / z)
    } else {
        r_transform(input.measure, z)
    }
}

/// Limit of `(1/n) ln I_n` for a rank-one `B` with eigenvalue `θ`.
pub fn gm_limit(input: &GMInput<'_>) -> Result<f64> {
    input.validate()?;
    let theta = input.theta;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let nu = gm_nu(input)?;
    let base = 1.0 + 2.0 * theta * nu;
    let (lo, hi) = input.measure.support();
    let worst = base - 2.0 * theta * if theta > 0.0 { hi } else { lo };
    if worst < -1e-12 * base.abs().max(1.0) {
        return Err(Error::LogDomain(worst));
    }
    // The argument may vanish at one edge; the singularity is logarithmic.
    let integral = input.measure.expect(&mut |t| (base - 2.0 * theta * t).max(f64::MIN_POSITIVE).ln())?;
    Ok(theta * nu - 0.5 * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Closed form of the semicircle limit: θ² for |2θ| ≤ 1, else
    // 2|θ| - 3/4 - ½ ln|2θ|.
    fn semicircle_oracle(theta: f64) -> f64 {
        let a = theta.abs();
        if 2.0 * a <= 1.0 {
            a * a
        } else {
            2.0 * a - 0.75 - 0.5 * (2.0 * a).ln()
        }
    }

    #[test]
    fn semicircle_hilbert_values() {
        let sc = semicircle_measure();
        assert_eq!(sc.hilbert(2.0).unwrap(), 1.0);
        assert_eq!(sc.hilbert(-2.0).unwrap(), -1.0);
        assert_abs_diff_eq!(sc.hilbert(2.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sc.hilbert(2.0 + 1e-12).unwrap(), 1.0, epsilon = 1e-5);
        assert!(matches!(sc.hilbert(0.3), Err(Error::InsideSupport { .. })));
        let big = sc.hilbert(1e8).unwrap();
        assert_abs_diff_eq!(big * 1e8, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn semicircle_hilbert_matches_quadrature() {
        let sc = semicircle_measure();
        for z in [2.5, 3.0, -2.2, 10.0, 2.0, -2.0] {
            let quad = sc.expect(&mut |t| 1.0 / (z - t)).unwrap();
            assert_abs_diff_eq!(quad, sc.hilbert(z).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let sc = semicircle_measure();
        assert_abs_diff_eq!(sc.expect(&mut |_| 1.0).unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sc.expect(&mut |t| t * t).unwrap(), 1.0, epsilon = 1e-10);
        let mp = DensityMeasure::normalized(0.25, 2.25, |t: f64| ((2.25 - t) * (t - 0.25)).sqrt() / t).unwrap();
        assert_abs_diff_eq!(mp.expect(&mut |_| 1.0).unwrap(), 1.0, epsilon = 1e-8);
        assert!(DensityMeasure::normalized(0.0, 1.0, |t: f64| t - 0.5).is_err());
    }

    #[test]
    fn numeric_semicircle_agrees_with_closed_form() {
        let num = DensityMeasure::normalized(-2.0, 2.0, |t: f64| (4.0 - t * t).max(0.0).sqrt()).unwrap();
        for z in [2.0, 2.3, -3.0, 7.0] {
            assert_abs_diff_eq!(num.hilbert(z).unwrap(), Semicircle.hilbert(z).unwrap(), epsilon = 1e-9);
        }
        for z in [0.3, -0.7, 0.95] {
            assert_abs_diff_eq!(r_transform(&num, z).unwrap(), z, epsilon = 1e-8);
        }
    }

    #[test]
    fn uniform_measure_hilbert() {
        let u = DensityMeasure::normalized(-1.0, 1.0, |_| 1.0).unwrap();
        for z in [1.5f64, -3.0, 10.0] {
            let exact = 0.5 * ((z + 1.0) / (z - 1.0)).ln();
            assert_abs_diff_eq!(u.hilbert(z).unwrap(), exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn semicircle_r_transform_is_identity() {
        let sc = semicircle_measure();
        assert_abs_diff_eq!(r_transform(&sc, 0.5).unwrap(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(r_transform(&sc, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r_transform(&sc, -1.0).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r_transform(&sc, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r_transform(&sc, 1e-9).unwrap(), 1e-9, epsilon = 1e-12);
        assert!(matches!(r_transform(&sc, 1.2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn hilbert_r_round_trip() {
        let sc = semicircle_measure();
        for k in 1..40 {
            for sign in [-1.0, 1.0] {
                let z = sign * k as f64 / 40.0;
                let w = r_transform(&sc, z).unwrap() + 1.0 / z;
                assert_abs_diff_eq!(sc.hilbert(w).unwrap(), z, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn nu_cases() {
        let sc = semicircle_measure();
        let nu = |theta: f64| gm_nu(&GMInput::from_measure(&sc, theta).unwrap()).unwrap();
        assert_abs_diff_eq!(nu(0.25), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(nu(0.5), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nu(1.0), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(nu(-1.0), -1.5, epsilon = 1e-15);
        assert!(gm_nu(&GMInput::from_measure(&sc, 0.0).unwrap()).is_err());
    }

    #[test]
    fn nu_is_continuous_at_edges() {
        let sc = semicircle_measure();
        for k in 0..100 {
            let edges = deformed_edge(0.5 + 0.03 * k as f64).unwrap();
            for h in [edges.h_max, edges.h_min] {
                let d = 1e-11;
                let a = gm_nu(&GMInput::with_edges(&sc, 0.5 * (h - d), edges).unwrap()).unwrap();
                let b = gm_nu(&GMInput::with_edges(&sc, 0.5 * (h + d), edges).unwrap()).unwrap();
                assert!((a - b).abs() <= 1e-8, "k={k} h={h}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn limit_matches_semicircle_closed_form() {
        let sc = semicircle_measure();
        for theta in [0.1, 0.25, 0.4, 0.5, 0.75, 1.0, 2.0, -0.3, -1.0] {
            let g = gm_limit(&GMInput::from_measure(&sc, theta).unwrap()).unwrap();
            assert_abs_diff_eq!(g, semicircle_oracle(theta), epsilon = 1e-9);
        }
        assert_eq!(gm_limit(&GMInput::from_measure(&sc, 0.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn limit_is_nondecreasing() {
        let sc = semicircle_measure();
        let mut prev = 0.0;
        for k in 1..60 {
            let g = gm_limit(&GMInput::from_measure(&sc, 0.05 * k as f64).unwrap()).unwrap();
            assert!(g >= prev - 1e-12);
            prev = g;
        }
    }

    #[test]
    fn inconsistent_edges_are_rejected() {
        let sc = semicircle_measure();
        let inside = EdgeData { gamma_min: -2.0, gamma_max: 1.5, h_min: -1.0, h_max: 1.0 };
        assert!(GMInput::with_edges(&sc, 1.0, inside).is_err());
        let wide = EdgeData { gamma_min: -2.0, gamma_max: 2.0, h_min: -1.0, h_max: 5.0 };
        let g = GMInput::with_edges(&sc, 2.0, wide).unwrap();
        assert!(matches!(gm_limit(&g), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn deformed_edges() {
        assert_eq!(deformed_edge(0.5).unwrap(), EdgeData { gamma_min: -2.0, gamma_max: 2.0, h_min: -1.0, h_max: 1.0 });
        assert_eq!(deformed_edge(1.0).unwrap().gamma_max, 2.0);
        let e = deformed_edge(2.0).unwrap();
        assert_eq!((e.gamma_max, e.h_max), (2.5, 0.5));
        assert!(deformed_edge(-0.1).is_err());
    }

    #[test]
    fn semicircle_cdf_and_quantile() {
        assert_abs_diff_eq!(Semicircle.cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(Semicircle.cdf(2.0), 1.0);
        for p in [0.1, 0.5, 0.93] {
            assert_abs_diff_eq!(Semicircle.cdf(Semicircle.quantile(p)), p, epsilon = 1e-12);
        }
    }
}
