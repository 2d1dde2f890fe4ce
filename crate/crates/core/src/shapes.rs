//! Radial shape functions shared by intensity profiles, test fields and
//! cutoffs. All are evaluated on the squared or plain radius in units of the
//! support radius.

use num_traits::{Float, FloatConst};

/// `exp(1 - 1/(1 - r^2))` for `r < 1`, zero outside. Equals 1 at the origin.
pub fn bump<T: Float>(r2: T) -> T {
    if r2 < T::one() {
        (T::one() - T::one() / (T::one() - r2)).exp()
    } else {
        T::zero()
    }
}

/// `cos^2(pi r / 2)` for `r < 1`, zero outside. C1 at the boundary.
pub fn cosine_squared<T: Float + FloatConst>(r: T) -> T {
    if r < T::one() {
        let c = (T::FRAC_PI_2() * r).cos();
        c * c
    } else {
        T::zero()
    }
}

/// Smooth transition from 1 (u <= 0) to 0 (u >= 1), infinitely
/// differentiable.
pub fn smooth_step_down<T: Float>(u: T) -> T {
    let psi = |v: T| {
        if v > T::zero() {
            (-T::one() / v).exp()
        } else {
            T::zero()
        }
    };
    if u <= T::zero() {
        T::one()
    } else if u >= T::one() {
        T::zero()
    } else {
        let a = psi(T::one() - u);
        a / (a + psi(u))
    }
}

/// Surface area of the unit sphere in `R^d` (`2` for `d = 1`).
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (d - 2) as f64 * unit_sphere_area(d - 2),
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        assert_eq!(bump(0.0f64), 1.0);
        assert_eq!(bump(1.0f64), 0.0);
        assert_eq!(bump(4.0f32), 0.0);
        assert!((bump(0.25f64) - (-1.0f64 / 3.0).exp()).abs() < 1e-16);
    }

    #[test]
    fn step_is_monotone_and_pinned() {
        assert_eq!(smooth_step_down(-0.5f64), 1.0);
        assert_eq!(smooth_step_down(1.5f64), 0.0);
        assert!((smooth_step_down(0.5f64) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 1..100 {
            let v = smooth_step_down(i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-13);
    }
}
