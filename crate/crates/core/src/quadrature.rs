//! Adaptive Gauss–Kronrod quadrature and Gauss–Legendre rules.
//!
//! The adaptive scheme bisects the interval with the largest error estimate
//! until the summed estimate meets `max(abs_tol, rel_tol·|I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{ensure, Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.abs_tol >= 0.0 && self.rel_tol >= 0.0, || "tolerances must be nonnegative".into())?;
        ensure(self.abs_tol > 0.0 || self.rel_tol > 0.0, || "at least one tolerance must be positive".into())?;
        ensure(self.max_intervals >= 1, || "max_intervals must be >= 1".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        resk += WGK[j] * s;
        // Odd Kronrod nodes coincide with the Gauss nodes.
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    let value = resk * half;
    let error = ((resk - resg) * half).abs();
    Segment { a, b, value, error }
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult> {
    integrate_with_breakpoints(f, &[a, b], cfg)
}

/// Adaptive integration over consecutive intervals `[p0, p1], [p1, p2], ...`.
///
/// Breakpoints should sit where the integrand has kinks or endpoint
/// singularities; nodes never touch interval endpoints.
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    cfg.validate()?;
    ensure(points.len() >= 2, || "need at least two integration points".into())?;
    ensure(points.windows(2).all(|w| w[0] <= w[1]), || "breakpoints must be nondecreasing".into())?;
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(&mut f, w[0], w[1]));
        }
    }
    if heap.is_empty() {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0 });
    }
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tol {
            return Ok(QuadResult { value, error, intervals: heap.len() });
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::QuadratureNonConvergence { error, tolerance: tol });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureNonConvergence { error, tolerance: tol });
        }
        heap.push(kronrod15(&mut f, worst.a, mid));
        heap.push(kronrod15(&mut f, mid, worst.b));
    }
}

/// Integral of `f` over `[0, ∞)` through the map `x = t/(1 - t)`.
///
/// `kinks` are points of `[0, ∞)` where the integrand is non-smooth; they are
/// mapped to breakpoints in `t`. The transformed integrand is
/// `f(t/(1-t))/(1-t)²`, finite at `t = 1` whenever `f(x) = O(1/x²)`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut f: F,
    kinks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    let mut pts: Vec<f64> = vec![0.0, 1.0];
    for &x in kinks {
        if x.is_finite() && x > 0.0 {
            pts.push(x / (1.0 + x));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    integrate_with_breakpoints(
        |t| {
            let one_minus = 1.0 - t;
            f(t / one_minus) / (one_minus * one_minus)
        },
        &pts,
        cfg,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = n * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[order - 1 - i] = x;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_and_transcendental() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x| x * x, 0.0, 3.0, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 9.0, epsilon = 1e-13);
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_singularities() {
        let cfg = QuadratureConfig { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 5000 };
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-9);
        let r = integrate(f64::ln, 0.0, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn kinked_integrand_with_breakpoint() {
        let cfg = QuadratureConfig::default();
        let r = integrate_with_breakpoints(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 0.045 + 0.245, epsilon = 1e-14);
    }

    #[test]
    fn half_line() {
        let cfg = QuadratureConfig::default();
        let r = integrate_half_line(|x| 1.0 / (1.0 + x * x), &[], &cfg).unwrap();
        assert_abs_diff_eq!(r.value, std::f64::consts::FRAC_PI_2, epsilon = 1e-11);
        let r = integrate_half_line(|x| (-x).exp(), &[1.0], &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn reports_nonconvergence() {
        let cfg = QuadratureConfig { abs_tol: 1e-14, rel_tol: 0.0, max_intervals: 4 };
        let err = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for order in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(order);
            let sum: f64 = w.iter().sum();
            assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-12);
            let deg = 2 * order - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert_abs_diff_eq!(q, exact, epsilon = 1e-12);
        }
    }
}
