//! Standard normal CDF, density, and quantile function.
//!
//! The quantile (inverse CDF) uses Acklam's rational approximation followed by
//! one Halley refinement step against the erfc-based CDF, which brings the
//! absolute error below 1e-13 over (0,1) — comfortably inside the 1e-10
//! target needed for confidence-interval half-widths.

use std::f64::consts::PI;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, Phi(x) = erfc(-x/sqrt(2)) / 2.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: the x with Phi(x) = p.
///
/// Returns `-inf`/`+inf` at p = 0/1 and NaN outside [0,1].
pub fn inverse_cdf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    // Acklam's rational approximation (relative error < 1.15e-9).
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley step: u = (Phi(x) - p) / phi(x), x <- x - u / (1 + x*u/2).
    let e = cdf(x) - p;
    let u = e / pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry_and_anchors() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
        for &x in &[-3.0, -1.7, -0.2, 0.9, 2.4] {
            assert!((cdf(x) + cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_roundtrip() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let x = inverse_cdf(p);
            assert!((cdf(x) - p).abs() < 1e-13, "p={p}: cdf(q(p))={}", cdf(x));
        }
    }

    #[test]
    fn quantile_edges() {
        assert_eq!(inverse_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(inverse_cdf(1.0), f64::INFINITY);
        assert!(inverse_cdf(-0.1).is_nan());
        assert_eq!(inverse_cdf(0.5), 0.0);
    }

    // Independent oracle: statrs' own inverse CDF.
    #[test]
    fn quantile_matches_statrs() {
        use statrs::distribution::ContinuousCDF;
        let n = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let ours = inverse_cdf(p);
            let theirs = n.inverse_cdf(p);
            assert!(
                (ours - theirs).abs() < 1e-8,
                "p={p}: ours={ours}, statrs={theirs}"
            );
        }
        // The half-width anchor used by the confidence-interval tests.
        assert!((inverse_cdf(0.975) - 1.959963984540054).abs() < 1e-10);
    }
}
