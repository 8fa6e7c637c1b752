//! Special functions needed by the mode and spectrum models.

use statrs::function::gamma::ln_gamma;

/// Generalized Laguerre polynomial `L_p^alpha(x)` by the three-term recurrence.
pub fn associated_laguerre(p: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut curr = 1.0 + alpha - x;
    for k in 1..p {
        let k = f64::from(k);
        let next = ((2.0 * k + 1.0 + alpha - x) * curr - (k + alpha) * prev) / (k + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// `p! / (p + m)!` as a product, exact to rounding for the small indices used here.
pub fn factorial_ratio(p: u32, m: u32) -> f64 {
    (p + 1..=p + m).fold(1.0, |acc, j| acc / f64::from(j))
}

/// Exponentially scaled modified Bessel function `e^{-x} I_n(x)` for `x >= 0`.
pub fn bessel_i_scaled(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = f64::from(n);
    if x >= 40.0_f64.max(nf * nf) {
        bessel_i_scaled_asymptotic(nf, x)
    } else {
        bessel_i_scaled_series(nf, x)
    }
}

/// Hankel expansion `e^{-x} I_n(x) ~ (2πx)^{-1/2} Σ (-1)^k a_k(n) / x^k`,
/// summed until the terms stop decreasing.
fn bessel_i_scaled_asymptotic(n: f64, x: f64) -> f64 {
    let mu = 4.0 * n * n;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = f64::from(2 * k - 1);
        term *= -(mu - odd * odd) / (f64::from(k) * 8.0 * x);
        if term.abs() >= last || term == 0.0 {
            break;
        }
        sum += term;
        last = term.abs();
        if last < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Power series `Σ (x/2)^{2k+n} / (k! (k+n)!)` scaled by `e^{-x}`, summed
/// outward from its dominant term so nothing overflows.
fn bessel_i_scaled_series(n: f64, x: f64) -> f64 {
    let quarter_x2 = 0.25 * x * x;
    let peak = (0.5 * ((n * n + x * x).sqrt() - n)).floor().max(0.0);
    let log_peak =
        (2.0 * peak + n) * (0.5 * x).ln() - ln_gamma(peak + 1.0) - ln_gamma(peak + n + 1.0) - x;
    let peak_term = log_peak.exp();

    let mut sum = peak_term;
    let mut term = peak_term;
    let mut k = peak;
    loop {
        k += 1.0;
        term *= quarter_x2 / (k * (k + n));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    let mut term = peak_term;
    let mut k = peak;
    while k > 0.0 {
        term *= k * (k + n) / quarter_x2;
        k -= 1.0;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}
