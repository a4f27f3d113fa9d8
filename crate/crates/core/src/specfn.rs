//! Faddeeva function and the Moshinsky function `M(k, t)`.
//!
//! `w(z) = exp(−z²) erfc(−iz)`. In the closed upper half-plane it is evaluated
//! with Weideman's rational expansion for `|z| < 8` and with the Laplace
//! continued fraction beyond; the lower half-plane goes through the reflection
//! `w(z) = 2 exp(−z²) − w(−z)`.
//!
//! `M(k, t) = ½ exp(y²) erfc(y)` with `y = −exp(−iπ/4) k √t`, i.e.
//! `M = ½ w(iy)`. `M(k, 0) = ½` for every `k`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

const WEIDEMAN_TERMS: usize = 64;
const CONTINUED_FRACTION_RADIUS: f64 = 8.0;
/// Largest `Re(−z²)` for which `exp(−z²)` is representable.
const MAX_EXPONENT: f64 = 708.0;

/// Minimum `|y|` accepted by [`moshinsky_asymptotic`].
pub const ASYMPTOTIC_MIN_ARG: f64 = 4.0;

struct Weideman {
    l: f64,
    coeffs: Vec<f64>,
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = WEIDEMAN_TERMS;
        let m = 2 * n;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        // Samples of exp(-t²)(L² + t²) at t = L tan(θ/2), θ = jπ/M; the
        // expansion coefficients are their cosine transform.
        let f: Vec<f64> = (-(m as i64) + 1..m as i64)
            .map(|j| {
                let t = l * (j as f64 * PI / m as f64 / 2.0).tan();
                (-t * t).exp() * (l * l + t * t)
            })
            .collect();
        let coeffs = (1..=n)
            .map(|p| {
                let mut s = crate::numerics::NeumaierSum::default();
                for (idx, fj) in f.iter().enumerate() {
                    let j = idx as f64 - (m as f64 - 1.0);
                    s.add(fj * (PI * j * p as f64 / m as f64).cos());
                }
                s.value() / (2 * m) as f64
            })
            .collect();
        Weideman { l, coeffs }
    })
}

fn w_weideman(z: Complex64) -> Complex64 {
    let tab = weideman();
    let iz = Complex64::i() * z;
    let lm = tab.l - iz;
    let zz = (tab.l + iz) / lm;
    let mut p = Complex64::new(0.0, 0.0);
    for c in tab.coeffs.iter().rev() {
        p = p * zz + c;
    }
    2.0 * p / (lm * lm) + (1.0 / PI.sqrt()) / lm
}

fn w_continued_fraction(z: Complex64) -> Complex64 {
    let depth = (20.0 + 2600.0 / z.norm_sqr()).ceil() as usize;
    let mut r = Complex64::new(0.0, 0.0);
    for j in (1..=depth).rev() {
        r = (j as f64 / 2.0) / (z - r);
    }
    Complex64::i() / PI.sqrt() / (z - r)
}

fn w_upper(z: Complex64) -> Complex64 {
    if z.norm() >= CONTINUED_FRACTION_RADIUS {
        w_continued_fraction(z)
    } else {
        w_weideman(z)
    }
}

/// `w(z) = exp(−z²) erfc(−iz)`.
///
/// Fails with [`Error::Overflow`] when `z` lies so deep in the lower
/// half-plane that `exp(−z²)` is not representable.
pub fn faddeeva(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    if z.im >= 0.0 {
        let w = w_upper(z);
        // Exactly real on the positive imaginary axis.
        if z.re == 0.0 {
            return Ok(Complex64::new(w.re, 0.0));
        }
        return Ok(w);
    }
    let mz2 = -(z * z);
    if mz2.re > MAX_EXPONENT {
        return Err(Error::Overflow { re: z.re, im: z.im });
    }
    Ok(2.0 * mz2.exp() - w_upper(-z))
}

/// Argument of the Moshinsky function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoshinskyArg {
    pub k: Complex64,
    pub t: f64,
    /// `y = −exp(−iπ/4) k √t`.
    pub y: Complex64,
}

impl MoshinskyArg {
    pub fn new(k: Complex64, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        let phase = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        let y = -phase * k * t.sqrt();
        let expected = -Complex64::i() * k * k * t;
        debug_assert!(
            (y * y - expected).norm() <= 1e-14 * expected.norm().max(f64::MIN_POSITIVE) * 4.0,
            "y² = −ik²t violated"
        );
        Ok(Self { k, t, y })
    }
}

/// `M(k, t) = ½ exp(y²) erfc(y)`.
pub fn moshinsky(k: Complex64, t: f64) -> Result<Complex64> {
    let arg = MoshinskyArg::new(k, t)?;
    if t == 0.0 {
        return Ok(Complex64::new(0.5, 0.0));
    }
    Ok(0.5 * faddeeva(Complex64::i() * arg.y)?)
}

/// `M(k, t)` with the pole exponential removed: `M − exp(y²)` when
/// `Re y < 0` (fourth-quadrant `k`), `M` itself otherwise. Evaluated as
/// `−½ w(−iy)` or `½ w(iy)`, both in the upper half-plane, so there is no
/// cancellation. Its large-`t` expansion is [`moshinsky_asymptotic`].
pub fn moshinsky_algebraic(k: Complex64, t: f64) -> Result<Complex64> {
    let arg = MoshinskyArg::new(k, t)?;
    if t == 0.0 {
        return Ok(Complex64::new(0.5, 0.0));
    }
    let iy = Complex64::i() * arg.y;
    if arg.y.re < 0.0 {
        Ok(-0.5 * faddeeva(-iy)?)
    } else {
        Ok(0.5 * faddeeva(iy)?)
    }
}

/// Coefficient `a_j` of the large-argument series
/// `M ≈ Σ_j a_j / (k√t)^(2j+1)`:
/// `a_j = −exp(iπ/4)/(2√π) · (2j−1)!!/2^j · (−i)^j`.
pub fn asymptotic_coefficient(j: usize) -> Complex64 {
    let mut c = -Complex64::from_polar(1.0, PI / 4.0) / (2.0 * PI.sqrt());
    for i in 1..=j {
        c *= Complex64::new(0.0, -((2 * i - 1) as f64) / 2.0);
    }
    c
}

/// Truncated large-argument series of the algebraic part of `M(k, t)`.
///
/// For `Re y < 0` (fourth-quadrant `k`) the exponential piece `exp(y²)` of
/// `M` is not part of the series; it is exponentially small once the decay
/// stage is over.
pub fn moshinsky_asymptotic(k: Complex64, t: f64, order: usize) -> Result<Complex64> {
    let arg = MoshinskyArg::new(k, t)?;
    if arg.y.norm() < ASYMPTOTIC_MIN_ARG {
        return Err(Error::Domain(format!(
            "|y| = {} is below {ASYMPTOTIC_MIN_ARG}; asymptotic series unreliable",
            arg.y.norm()
        )));
    }
    let x = k * t.sqrt();
    let inv = x.inv();
    let inv2 = inv * inv;
    let mut power = inv;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..=order {
        sum += asymptotic_coefficient(j) * power;
        power *= inv2;
    }
    Ok(sum)
}
