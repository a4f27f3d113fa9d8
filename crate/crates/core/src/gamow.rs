//! Resonant (Gamow) eigenfunctions, expansion coefficients, overlaps and the
//! sum-rule residual.
//!
//! Each state is the regular solution at a pole `k_n`, rescaled so that the
//! completeness normalization `∫₀ᴿ u² dr + i u(R)²/(2k) = 1` holds. With
//! `C_n = ∫₀ᴿ ψ(r,0) u_n(r) dr` (no conjugation) the initial state is
//! recovered as `ψ(r,0) = ½ Σ_n C_n u_n(r)` for `r < R`.

use crate::error::{Error, Result};
use crate::model::{initial_wavefunction, InitialState, InitialStateShape, Potential};
use crate::numerics::{ComplexSum, GaussLegendre};
use crate::poles::{segment_fns, PoleSet, RegularSolution, ResonancePole, SegmentStart};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Absolute tolerance of the overlap and coefficient quadratures.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GamowState {
    pub pole: ResonancePole,
    /// Normalized `(u, u')` at the start of each potential segment.
    starts: Vec<SegmentStart>,
    /// `u_n(R)`.
    pub u_r: Complex64,
    /// `u_n'(R⁻)`.
    pub du_r: Complex64,
    /// `N² = ∫u² + i u(R)²/(2k)` of the unnormalized regular solution.
    pub norm_sq: Complex64,
    range: f64,
    jump: f64,
}

impl GamowState {
    pub fn k(&self) -> Complex64 {
        self.pole.k
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// `(u(r), u'(r))` for `0 ≤ r ≤ R` (`u'` taken from the inside at `R`).
    pub fn eval_with_derivative(&self, r: f64) -> (Complex64, Complex64) {
        let idx = self.starts.iter().rposition(|s| r >= s.segment.r_lo).unwrap_or(0);
        let s = &self.starts[idx];
        let h = (r - s.segment.r_lo).clamp(0.0, s.segment.r_hi - s.segment.r_lo);
        let f = segment_fns(s.x, h);
        (f.c * s.u + f.s * s.du, f.ms * s.u + f.c * s.du)
    }

    pub fn eval(&self, r: f64) -> Complex64 {
        self.eval_with_derivative(r).0
    }

    /// `u'(R⁺)`, including the delta-shell jump.
    pub fn du_r_outside(&self) -> Complex64 {
        self.du_r + self.jump * self.u_r
    }

    /// Largest `|q| = |√(k² − V)|` over the segments; sets the oscillation scale.
    fn max_wavenumber(&self) -> f64 {
        self.starts.iter().map(|s| s.x.norm().sqrt()).fold(0.0, f64::max)
    }

    fn segment_bounds(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().map(|s| (s.segment.r_lo, s.segment.r_hi))
    }
}

/// Builds the normalized resonant state at `pole`.
///
/// The overall sign (`u → −u`) follows the principal square root of `N²`;
/// every bilinear consumed downstream is insensitive to it.
pub fn build_state(p: &Potential, pole: ResonancePole) -> Result<GamowState> {
    let sol = RegularSolution::new(p, pole.k);
    let sq = sol.square_integral();
    let surface = Complex64::i() * sol.u_r * sol.u_r / (2.0 * pole.k);
    let norm_sq = sq + surface;
    if norm_sq.norm() < 1e-12 * (sq.norm() + surface.norm()) || !norm_sq.norm().is_finite() {
        return Err(Error::NormalizationSingular { n: pole.n });
    }
    let a = norm_sq.sqrt().inv();
    let starts = sol
        .starts
        .iter()
        .map(|s| SegmentStart { u: s.u * a, du: s.du * a, ..*s })
        .collect();
    Ok(GamowState {
        pole,
        starts,
        u_r: sol.u_r * a,
        du_r: sol.du_r * a,
        norm_sq,
        range: p.range(),
        jump: p.delta_jump(),
    })
}

/// Number of Gauss–Legendre panels so each spans at most half an oscillation
/// at wavenumber `q`.
fn panels_for(width: f64, q: f64) -> usize {
    ((width * q.max(1.0) / PI).ceil() as usize).max(1)
}

/// Integrates `f` over `[a, b]` with panel doubling until two successive
/// estimates agree to `tol` (absolute).
fn adaptive<F>(a: f64, b: f64, q: f64, tol: f64, f: F) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let rule = GaussLegendre::standard();
    let mut panels = panels_for(b - a, q);
    let mut prev = rule.integrate_panels(a, b, panels, &f);
    let mut change = f64::INFINITY;
    for _ in 0..6 {
        panels *= 2;
        let next = rule.integrate_panels(a, b, panels, &f);
        change = (next - prev).norm();
        if change <= tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::ToleranceNotMet { tol, achieved: change })
}

/// `I_nℓ = ∫₀ᴿ conj(u_ℓ) u_n dr` by per-segment Gauss–Legendre quadrature.
pub fn overlap_quadrature(n: &GamowState, l: &GamowState) -> Result<Complex64> {
    let q = n.max_wavenumber().max(l.max_wavenumber());
    let mut sum = ComplexSum::default();
    for (a, b) in n.segment_bounds() {
        sum.add(adaptive(a, b, q, QUADRATURE_TOL, |r| l.eval(r).conj() * n.eval(r))?);
    }
    Ok(sum.value())
}

/// `I_nℓ = u_n(R) conj(u_ℓ(R)) / (i (k_n − conj k_ℓ))`.
///
/// The Green identity divides out a factor `k_n + conj k_ℓ`, which vanishes
/// for a mirror pair `k_ℓ = −conj k_n`. There `conj u_ℓ = u_n` and the
/// normalization itself gives `I = ∫u_n² = 1 − i u_n(R)²/(2k_n)`.
pub fn overlap_closed(n: &GamowState, l: &GamowState) -> Complex64 {
    let sum = n.k() + l.k().conj();
    if sum.norm() <= 1e-12 * n.k().norm() {
        return 1.0 - Complex64::i() * n.u_r * n.u_r / (2.0 * n.k());
    }
    let den = Complex64::i() * (n.k() - l.k().conj());
    n.u_r * l.u_r.conj() / den
}

/// `C_n = ∫₀ᴿ ψ(r,0) u_n(r) dr`; closed form for box modes.
pub fn expansion_coefficient(state: &GamowState, psi0: &InitialState) -> Result<Complex64> {
    check_support(state, psi0)?;
    match psi0.shape() {
        InitialStateShape::BoxMode { m, radius } => Ok(box_mode_coefficient(state, *m, *radius)),
        InitialStateShape::Sampled { .. } => expansion_coefficient_quadrature(state, psi0),
    }
}

fn check_support(state: &GamowState, psi0: &InitialState) -> Result<()> {
    if psi0.support_radius() > state.range * (1.0 + 1e-12) {
        return Err(Error::InvalidState(format!(
            "initial state extends to {} beyond the potential range {}",
            psi0.support_radius(),
            state.range
        )));
    }
    Ok(())
}

// With g = √(2/R) sin(pr), g'' = −p²g and u'' = −x u on a segment,
// ∫ g u = [g u' − u g'] / (p² − x).
fn box_mode_coefficient(state: &GamowState, m: u32, radius: f64) -> Complex64 {
    let p = m as f64 * PI / radius;
    let amp = (2.0 / radius).sqrt();
    let mut sum = ComplexSum::default();
    for s in &state.starts {
        let lo = s.segment.r_lo;
        let hi = s.segment.r_hi.min(radius);
        if hi <= lo {
            continue;
        }
        let den = p * p - s.x;
        let edge = |r: f64| {
            let f = segment_fns(s.x, r - lo);
            let u = f.c * s.u + f.s * s.du;
            let du = f.ms * s.u + f.c * s.du;
            let g = amp * (p * r).sin();
            let dg = amp * p * (p * r).cos();
            du * g - u * dg
        };
        sum.add((edge(hi) - edge(lo)) / den);
    }
    sum.value()
}

/// `C_n` by quadrature, for any initial state.
pub fn expansion_coefficient_quadrature(state: &GamowState, psi0: &InitialState) -> Result<Complex64> {
    check_support(state, psi0)?;
    let support = psi0.support_radius();
    let mut cuts: Vec<f64> = state.segment_bounds().flat_map(|(a, b)| [a, b]).collect();
    cuts.extend_from_slice(psi0.breakpoints());
    cuts.retain(|&x| x >= 0.0 && x <= support);
    cuts.push(0.0);
    cuts.push(support);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let q = state.max_wavenumber().max(match psi0.shape() {
        InitialStateShape::BoxMode { m, radius } => *m as f64 * PI / radius,
        InitialStateShape::Sampled { .. } => 0.0,
    });
    let mut sum = ComplexSum::default();
    for w in cuts.windows(2) {
        sum.add(adaptive(w[0], w[1], q, QUADRATURE_TOL * 1e-2, |r| {
            initial_wavefunction(psi0, r) * state.eval(r)
        })?);
    }
    Ok(sum.value())
}

/// Dense square matrix of overlaps, indexed like [`ExpansionData::states`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl OverlapMatrix {
    pub fn from_fn<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<Complex64> + Sync,
    {
        // Upper triangle including the diagonal; the rest by I_ℓn = conj(I_nℓ).
        let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        let vals: Vec<Complex64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect::<Result<_>>()?;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (&(i, j), v) in pairs.iter().zip(vals) {
            data[i * dim + j] = v;
            data[j * dim + i] = v.conj();
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }
}

/// Which overlap matrix feeds the double sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    Quadrature,
    Closed,
}

impl OverlapMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OverlapMode::Quadrature => "quadrature",
            OverlapMode::Closed => "closed",
        }
    }
}

/// Position of pole `n` in the `1, −1, 2, −2, …` ordering.
pub fn state_index(n: i64) -> usize {
    2 * (n.unsigned_abs() as usize - 1) + usize::from(n < 0)
}

/// Everything the double sums need for one initial state.
#[derive(Debug, Clone)]
pub struct ExpansionData {
    pub poles: PoleSet,
    /// States ordered `1, −1, 2, −2, …`; truncation `|n| ≤ N` is the prefix
    /// of length `2N`.
    pub states: Vec<GamowState>,
    pub coefficients: Vec<Complex64>,
    pub overlaps_closed: OverlapMatrix,
    pub overlaps_quadrature: Option<OverlapMatrix>,
    pub initial_state: InitialState,
    pub n_max: usize,
}

impl ExpansionData {
    /// Builds states, coefficients and overlaps for `|n| ≤ n_max`.
    /// The quadrature overlap matrix is computed only on request.
    pub fn build(poles: &PoleSet, psi0: &InitialState, n_max: usize, with_quadrature: bool) -> Result<Self> {
        if n_max > poles.len() {
            return Err(Error::InvalidArgument(format!(
                "truncation N = {n_max} exceeds the {} located poles",
                poles.len()
            )));
        }
        psi0.require_unit_norm()?;
        let p = poles.potential();
        let states: Vec<GamowState> = poles
            .symmetric(n_max)
            .into_par_iter()
            .map(|pole| build_state(p, pole))
            .collect::<Result<_>>()?;
        let coefficients: Vec<Complex64> = states
            .par_iter()
            .map(|s| expansion_coefficient(s, psi0))
            .collect::<Result<_>>()?;
        let dim = states.len();
        let overlaps_closed = OverlapMatrix::from_fn(dim, |i, j| Ok(overlap_closed(&states[i], &states[j])))?;
        let overlaps_quadrature = if with_quadrature {
            Some(OverlapMatrix::from_fn(dim, |i, j| overlap_quadrature(&states[i], &states[j]))?)
        } else {
            None
        };
        Ok(Self {
            poles: poles.clone(),
            states,
            coefficients,
            overlaps_closed,
            overlaps_quadrature,
            initial_state: psi0.clone(),
            n_max,
        })
    }

    pub fn overlaps(&self, mode: OverlapMode) -> Result<&OverlapMatrix> {
        match mode {
            OverlapMode::Closed => Ok(&self.overlaps_closed),
            OverlapMode::Quadrature => self.overlaps_quadrature.as_ref().ok_or_else(|| {
                Error::InvalidArgument("quadrature overlaps were not computed for this expansion".into())
            }),
        }
    }

    /// Number of state slots for a symmetric truncation `|n| ≤ n`.
    pub fn truncated_len(&self, n: usize) -> Result<usize> {
        if n > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "truncation N = {n} exceeds the expansion's N = {}",
                self.n_max
            )));
        }
        Ok(2 * n)
    }

    pub fn range(&self) -> f64 {
        self.poles.potential().range()
    }

    pub fn coefficient(&self, n: i64) -> Option<Complex64> {
        self.coefficients.get(state_index(n)).copied()
    }

    pub fn state(&self, n: i64) -> Option<&GamowState> {
        self.states.get(state_index(n))
    }
}

/// `S_N(r) = Σ_{|m|≤N} C_m u_m(r) / k_m`.
pub fn sum_rule_residual(data: &ExpansionData, r: f64, n: usize) -> Result<Complex64> {
    let len = data.truncated_len(n)?;
    Ok(data.states[..len]
        .iter()
        .zip(&data.coefficients)
        .map(|(s, c)| c * s.eval(r) / s.k())
        .collect::<ComplexSum>()
        .value())
}

/// `∫₀ᴿ |S_N(r)|² dr` by quadrature.
pub fn sum_rule_square_norm(data: &ExpansionData, n: usize) -> Result<f64> {
    let len = data.truncated_len(n)?;
    let q = data.states[..len].iter().map(|s| s.max_wavenumber()).fold(0.0, f64::max);
    let mut sum = ComplexSum::default();
    for (a, b) in data.states.first().map(|s| s.segment_bounds().collect::<Vec<_>>()).unwrap_or_default() {
        sum.add(adaptive(a, b, q, 1e-18, |r| {
            Complex64::new(sum_rule_residual(data, r, n).map(|s| s.norm_sqr()).unwrap_or(f64::NAN), 0.0)
        })
        .or_else(|e| match e {
            // The integrand is tiny; accept the finest estimate once the
            // relative change is at rounding level.
            Error::ToleranceNotMet { .. } => {
                let rule = GaussLegendre::standard();
                let panels = panels_for(b - a, q) * 64;
                Ok(rule.integrate_panels(a, b, panels, |r| {
                    Complex64::new(sum_rule_residual(data, r, n).map(|s| s.norm_sqr()).unwrap_or(f64::NAN), 0.0)
                }))
            }
            other => Err(other),
        })?);
    }
    Ok(sum.value().re)
}

/// `½ Σ_{|n|≤N} C_n u_n(r)`, the resonant reconstruction of `ψ(r, 0)`.
pub fn reconstruct_initial(data: &ExpansionData, r: f64, n: usize) -> Result<Complex64> {
    let len = data.truncated_len(n)?;
    Ok(0.5
        * data.states[..len]
            .iter()
            .zip(&data.coefficients)
            .map(|(s, c)| c * s.eval(r))
            .collect::<ComplexSum>()
            .value())
}
