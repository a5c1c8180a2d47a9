//! Shared special functions.

use crate::error::{Error, Result};

/// Normalized sinc: `sin(pi u) / (pi u)`, with `sinc(0) = 1`.
///
/// This is the Fourier-transform-of-rect convention; the aperture integral
/// of a hard-edged lens produces exactly this function. The unnormalized
/// `sin(u)/u` convention is NOT used anywhere in this crate.
pub fn sinc(u: f64) -> f64 {
    let pu = std::f64::consts::PI * u;
    if pu.abs() < 1e-8 {
        // two-term Taylor expansion; exact 1.0 at u = 0
        1.0 - pu * pu / 6.0
    } else {
        pu.sin() / pu
    }
}

/// Rayleigh two-point resolution limit in the object plane,
/// `1.22 * wavelength * d_object / aperture` (far-field form with
/// `NA ~ aperture / (2 d_object)`, unit refractive index).
pub fn rayleigh_limit(wavelength: f64, d_object: f64, aperture: f64) -> Result<f64> {
    for (name, v) in [
        ("wavelength", wavelength),
        ("d_object", d_object),
        ("aperture", aperture),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(1.22 * wavelength * d_object / aperture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Bisection on a monotone bracket, used to regenerate derived constants
    /// instead of hard-coding them.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        assert!(flo * f(hi) < 0.0, "bracket does not straddle a root");
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if f(mid) * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn sinc_special_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-12);
        for n in [-5i32, -2, -1, 2, 3, 7] {
            assert!(sinc(n as f64).abs() < 1e-12, "sinc({n}) not ~0");
        }
    }

    #[test]
    fn sinc_half_maximum_point() {
        // independent oracle: bisection on sinc(u) = 1/2
        let u_half = bisect(|u| sinc(u) - 0.5, 0.0, 1.0);
        assert_relative_eq!(u_half, 0.6034, max_relative = 1e-3);
        assert_relative_eq!(sinc(0.6034), 0.5, epsilon = 1e-3);
    }

    #[test]
    fn rayleigh_paper_value() {
        // "1.22 lambda d1 / L_t ~ 173 um" for 532 nm, 800 mm, 3 mm
        let r = rayleigh_limit(0.532e-6, 0.8, 3e-3).unwrap();
        assert!((r - 173.1e-6).abs() < 0.5e-6, "got {r}");
        let r = rayleigh_limit(0.532e-6, 0.5, 3e-3).unwrap();
        assert!((r - 108.2e-6).abs() < 0.5e-6, "got {r}");
    }

    #[test]
    fn rayleigh_rejects_non_positive() {
        assert!(rayleigh_limit(0.0, 0.8, 3e-3).is_err());
        assert!(rayleigh_limit(532e-9, -0.8, 3e-3).is_err());
        assert!(rayleigh_limit(532e-9, 0.8, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn sinc_is_even(u in -50.0f64..50.0) {
            prop_assert_eq!(sinc(u), sinc(-u));
        }

        #[test]
        fn rayleigh_scaling_laws(
            lam in 1e-7f64..2e-6,
            d in 0.1f64..2.0,
            ap in 1e-3f64..2e-2,
        ) {
            let base = rayleigh_limit(lam, d, ap).unwrap();
            prop_assert!((rayleigh_limit(2.0 * lam, d, ap).unwrap() / base - 2.0).abs() < 1e-12);
            prop_assert!((rayleigh_limit(lam, 2.0 * d, ap).unwrap() / base - 2.0).abs() < 1e-12);
            prop_assert!((rayleigh_limit(lam, d, 2.0 * ap).unwrap() / base - 0.5).abs() < 1e-12);
        }
    }
}
