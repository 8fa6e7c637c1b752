//! Globally adaptive Gauss-Kronrod (7, 15) quadrature for complex-valued
//! integrands on finite intervals.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Radial integrals are truncated at this many characteristic widths.
    pub truncation_widths: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
            truncation_widths: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).norm(),
    }
}

/// Integrates `f` over `[a, b]`, optionally pre-split at `breakpoints`
/// (points outside the open interval are ignored).
///
/// Bisects the segment with the largest error estimate until the summed
/// estimate is at most `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Complex64,
{
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(b);

    let mut segments: Vec<Segment> = edges
        .windows(2)
        .map(|w| kronrod(&mut f, w[0], w[1]))
        .collect();
    let mut evaluations = 15 * segments.len();

    loop {
        let value: Complex64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let tolerance = config.abs_tol.max(config.rel_tol * value.norm());
        if error <= tolerance {
            return Ok(QuadratureResult {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        if !error.is_finite() || segments.len() >= config.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                error_estimate: error,
                tolerance,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let Segment { a, b, .. } = segments.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval cannot be split further in f64.
            return Err(Error::QuadratureNonConvergence {
                error_estimate: error,
                tolerance,
            });
        }
        segments.push(kronrod(&mut f, a, mid));
        segments.push(kronrod(&mut f, mid, b));
        evaluations += 30;
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    config: &QuadratureConfig,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, config).map(|r| r.value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let cfg = QuadratureConfig::default();
        let got = integrate_real(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, &[], &cfg).unwrap();
        let want = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert_relative_eq!(got, want, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_tail_and_peaked_integrand() {
        let cfg = QuadratureConfig::default();
        let got = integrate_real(|x| (-x * x).exp(), 0.0, 10.0, &[], &cfg).unwrap();
        assert_relative_eq!(got, std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-12);

        // narrow bump far from the left edge, bracketed by breakpoints
        let bump = |x: f64| (-((x - 700.0) / 0.01).powi(2)).exp();
        let got = integrate_real(bump, 0.0, 1000.0, &[699.95, 700.05], &cfg).unwrap();
        assert_relative_eq!(got, 0.01 * std::f64::consts::PI.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn complex_oscillatory() {
        let cfg = QuadratureConfig::default();
        let r = integrate(
            |x| Complex64::new(0.0, 5.0 * x).exp(),
            0.0,
            std::f64::consts::PI,
            &[],
            &cfg,
        )
        .unwrap();
        // ∫ e^{5ix} = (e^{5iπ} - 1) / (5i) = -2 / (5i) = 0.4i
        assert!((r.value - Complex64::new(0.0, 0.4)).norm() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadratureConfig {
            max_subdivisions: 4,
            ..QuadratureConfig::default()
        };
        let err = integrate_real(|x| x.powf(-0.5), 0.0, 1.0, &[], &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }
}
