//! Scalar trait, small 3-vector helpers and the deterministic 1-D solvers
//! shared by the optics kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

use crate::error::{Error, Result};

/// Floating-point scalar used by the dispersion and phasematching kernels.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Vec3<T> = [T; 3];

pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

pub fn scale<T: Real>(a: &Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn normalize<T: Real>(a: &Vec3<T>) -> Vec3<T> {
    scale(a, T::one() / norm(a))
}

/// Unit vector from polar angle `theta` (from +z) and azimuth `phi` (from +x).
pub fn spherical<T: Real>(theta: T, phi: T) -> Vec3<T> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Bracketed root of `f` on `[a, b]` using regula falsi with the Illinois
/// modification, falling back to bisection when the secant step stalls.
/// Stops when `|f| <= ftol` or the bracket is narrower than `xtol`.
pub fn bracketed_root<T, F>(mut f: F, a: T, b: T, xtol: T, ftol: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa.abs() <= ftol {
        return Ok(a);
    }
    if fb.abs() <= ftol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRoot {
            lo: a.f64(),
            hi: b.f64(),
        });
    }
    let half = T::lit(0.5);
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..400 {
        let width = (b - a).abs();
        let mut x = (a * fb - b * fa) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        if !x.is_finite() || x <= lo || x >= hi {
            x = (a + b) * half;
        }
        let fx = f(x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa = fa * half;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb = fb * half;
            }
            side = 1;
        }
        if (b - a).abs() <= xtol {
            return Ok(best.0);
        }
        // Force a bisection when the bracket is not shrinking fast enough.
        if (b - a).abs() > width * T::lit(0.75) {
            let m = (a + b) * half;
            let fm = f(m)?;
            if fm.abs() <= ftol {
                return Ok(m);
            }
            if fm.signum() == fb.signum() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            side = 0;
        }
    }
    Err(Error::Numeric {
        what: "bracketed root did not converge".into(),
        residual: best.1.f64(),
    })
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_section<T, F>(mut f: F, a: T, b: T, tol: T) -> Result<(T, T)>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d)?;
        }
    }
    let x = (a + b) * T::lit(0.5);
    let fx = f(x)?;
    let mut best = (x, fx);
    for (xi, fi) in [(c, fc), (d, fd)] {
        if fi < best.1 {
            best = (xi, fi);
        }
    }
    Ok(best)
}

/// Trapezoid weights for `n` uniformly spaced samples with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Evenly spaced samples on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Removes 2π jumps by nearest-multiple continuation along the sequence.
pub fn unwrap_phase(phase: &mut [f64]) {
    let tau = std::f64::consts::TAU;
    for i in 1..phase.len() {
        let d = phase[i] - phase[i - 1];
        phase[i] -= tau * (d / tau).round();
    }
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_cubic() {
        let r = bracketed_root(|x: f64| Ok(x * x * x - 2.0), 0.0, 3.0, 1e-15, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn root_requires_sign_change() {
        assert!(bracketed_root(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 1e-12).is_err());
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x: f64| Ok((x - 0.3).powi(2) + 1.0), -2.0, 5.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_works_in_f32() {
        let (x, _) = golden_section(|x: f32| Ok((x - 1.5).powi(2)), 0.0, 4.0, 1e-4).unwrap();
        assert!((x - 1.5).abs() < 1e-3);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let mut p: Vec<f64> = (0..50).map(|i| (0.3 * i as f64).rem_euclid(std::f64::consts::TAU)).collect();
        unwrap_phase(&mut p);
        for (i, v) in p.iter().enumerate() {
            assert!((v - 0.3 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let x = linspace(0.0, 2.0, 11);
        let w = trapezoid_weights(11, 0.2);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| (3.0 * x + 1.0) * w).sum();
        assert!((s - 8.0).abs() < 1e-12);
    }
}
