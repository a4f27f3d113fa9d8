//! Direct Crank–Nicolson integration of the radial Schrödinger equation
//! `i ψ_t = −ψ_rr + V ψ` on `[0, L]` with hard walls, used as a reference
//! for `P(t) = ∫₀ᴿ |ψ|² dr` that shares nothing with the resonant expansion.
//!
//! The delta shell is a single-node barrier of height `λ/Δr` at `r = R`,
//! which is second-order accurate because `R` is always a grid node.

use crate::dynamics::{NonescapeSeries, Provenance};
use crate::error::{Error, Result};
use crate::model::{evaluate_potential, initial_wavefunction, InitialState, Potential, PotentialShape};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Norm drift (no absorber) above which a run is rejected.
pub const MAX_NORM_DRIFT: f64 = 1e-7;

/// Grid points next to the far wall watched for reflection contamination.
pub const HORIZON_POINTS: usize = 5;

/// Cosine-ramp absorbing mask on `[L − width, L]`: every step multiplies
/// `ψ` by `exp(−strength·Δt·sin²(πξ/2))`, `ξ` running from 0 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Absorber {
    pub width: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Box length `L`; a multiple of `Δr`.
    pub box_length: f64,
    /// `R/Δr`, so that `R` is a grid node.
    pub intervals_per_range: usize,
    pub time_step: f64,
    pub final_time: f64,
    /// Density threshold `ε` next to the far wall.
    pub leak_threshold: f64,
    /// Largest wavenumber the run must resolve; `Δt·k_max² ≤ 0.5`.
    pub max_wavenumber: f64,
    /// Record `P` every this many steps.
    pub record_every: usize,
    #[serde(default)]
    pub absorber: Option<Absorber>,
    /// Smooth spectral cutoff `E_c`: the initial state is replaced by
    /// `exp(−(H/E_c)^8) ψ0`, removing the band the grid cannot propagate.
    #[serde(default)]
    pub energy_cutoff: Option<f64>,
    /// End of the analysis window; contamination before it is an error.
    #[serde(default)]
    pub analysis_end: Option<f64>,
}

impl GridSpec {
    pub fn dr(&self, range: f64) -> f64 {
        range / self.intervals_per_range as f64
    }

    pub fn steps(&self) -> usize {
        (self.final_time / self.time_step).round() as usize
    }

    /// Structural checks that every run needs.
    fn check_basic(&self, range: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        if !(self.box_length > range) {
            return bad(format!("box length {} must exceed the range {range}", self.box_length));
        }
        if self.intervals_per_range < 2 {
            return bad("need at least 2 intervals across the range".into());
        }
        if !(self.time_step > 0.0 && self.final_time > 0.0 && self.final_time.is_finite()) {
            return bad("time step and final time must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        let cells = self.box_length / self.dr(range);
        if (cells - cells.round()).abs() > 1e-6 * cells {
            return bad(format!("box length {} is not a multiple of dr = {}", self.box_length, self.dr(range)));
        }
        if let Some(a) = self.absorber {
            if !(a.width > 0.0 && a.width < self.box_length - range && a.strength >= 0.0) {
                return bad("absorber must sit outside the range and have non-negative strength".into());
            }
        }
        if let Some(ec) = self.energy_cutoff {
            if !(ec > 0.0 && ec.is_finite()) {
                return bad("energy cutoff must be positive".into());
            }
        }
        Ok(())
    }

    /// The resolution rules of a production run: `L ≥ 10R`, `Δr ≤ R/200`,
    /// `Δt·k_max² ≤ 0.5`.
    pub fn validate(&self, range: f64) -> Result<()> {
        self.check_basic(range)?;
        let bad = |m: String| Err(Error::InvalidGrid(m));
        if self.box_length < 10.0 * range {
            return bad(format!("box length {} is below 10R", self.box_length));
        }
        if self.intervals_per_range < 200 {
            return bad(format!("dr = R/{} is coarser than R/200", self.intervals_per_range));
        }
        let phase = self.time_step * self.max_wavenumber.powi(2);
        if phase > 0.5 + 1e-12 {
            return bad(format!("per-step phase {phase} at k_max exceeds 0.5 rad"));
        }
        Ok(())
    }

    fn refined(&self, factor: usize) -> Self {
        Self {
            intervals_per_range: self.intervals_per_range * factor,
            time_step: self.time_step / factor as f64,
            record_every: self.record_every * factor,
            ..*self
        }
    }
}

/// Constant-coefficient Crank–Nicolson stepper on the interior nodes of a
/// uniform grid with `ψ = 0` at both ends.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    dr: f64,
    dt: f64,
    /// Potential on interior nodes.
    v: Vec<f64>,
    /// Thomas factors of `1 + iΔt/2 H`.
    off: Complex64,
    c_prime: Vec<Complex64>,
    inv_den: Vec<Complex64>,
    mask: Option<Vec<f64>>,
    scratch: Vec<Complex64>,
}

impl CrankNicolson {
    /// `v` holds the potential on nodes `1..=J−1`.
    pub fn new(dr: f64, dt: f64, v: Vec<f64>) -> Self {
        let n = v.len();
        let kin = 1.0 / (dr * dr);
        let half = Complex64::new(0.0, 0.5 * dt);
        let off = -half * kin;
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_den = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let diag = 1.0 + half * (2.0 * kin + v[j]);
            let den = if j == 0 { diag } else { diag - off * c_prime[j - 1] };
            inv_den[j] = den.inv();
            c_prime[j] = off * inv_den[j];
        }
        Self { dr, dt, v, off, c_prime, inv_den, mask: None, scratch: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn with_mask(mut self, mask: Vec<f64>) -> Self {
        assert_eq!(mask.len(), self.v.len());
        self.mask = Some(mask);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    /// Applies `H` (interior nodes, Dirichlet ends).
    pub fn apply_h(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = psi.len();
        let kin = 1.0 / (self.dr * self.dr);
        for j in 0..n {
            let left = if j > 0 { psi[j - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if j + 1 < n { psi[j + 1] } else { Complex64::new(0.0, 0.0) };
            out[j] = kin * (2.0 * psi[j] - left - right) + self.v[j] * psi[j];
        }
    }

    /// One step `ψ ← (1 + iΔt/2 H)⁻¹ (1 − iΔt/2 H) ψ`, then the mask.
    pub fn step(&mut self, psi: &mut [Complex64]) {
        let n = psi.len();
        let zero = Complex64::new(0.0, 0.0);
        let half = Complex64::new(0.0, 0.5 * self.dt);
        let kin = 1.0 / (self.dr * self.dr);
        let y = &mut self.scratch;
        // Right-hand side fused with the forward sweep.
        let mut prev = zero;
        for j in 0..n {
            let left = if j > 0 { psi[j - 1] } else { zero };
            let right = if j + 1 < n { psi[j + 1] } else { zero };
            let h = kin * (2.0 * psi[j] - left - right) + self.v[j] * psi[j];
            let d = psi[j] - half * h;
            prev = (d - self.off * prev) * self.inv_den[j];
            y[j] = prev;
        }
        psi[n - 1] = y[n - 1];
        for j in (0..n - 1).rev() {
            psi[j] = y[j] - self.c_prime[j] * psi[j + 1];
        }
        if let Some(m) = &self.mask {
            for (p, f) in psi.iter_mut().zip(m) {
                *p *= *f;
            }
        }
    }

    /// Extreme eigenvalue bounds of `H` (Gershgorin).
    fn spectral_bounds(&self) -> (f64, f64) {
        let kin = 1.0 / (self.dr * self.dr);
        let lo = self.v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * kin;
        (lo.min(0.0), hi)
    }

    /// `exp(−(H/E_c)^8) ψ` by a Chebyshev expansion on the spectrum of `H`.
    pub fn spectral_filter(&self, psi: &[Complex64], cutoff: f64) -> Vec<Complex64> {
        let (a, b) = self.spectral_bounds();
        let f = |e: f64| (-(e.max(0.0) / cutoff).powi(8)).exp();
        let coeffs = chebyshev_coefficients(f, a, b);
        let n = psi.len();
        let scale = 2.0 / (b - a);
        let shift = (a + b) / (b - a);
        // x = scale·H − shift maps the spectrum into [−1, 1].
        let apply_x = |v: &[Complex64], out: &mut [Complex64]| {
            self.apply_h(v, out);
            for j in 0..n {
                out[j] = scale * out[j] - shift * v[j];
            }
        };
        let mut t_prev = psi.to_vec();
        let mut t_cur = vec![Complex64::new(0.0, 0.0); n];
        apply_x(&t_prev, &mut t_cur);
        let mut acc: Vec<Complex64> = (0..n).map(|j| coeffs[0] * t_prev[j] + coeffs[1] * t_cur[j]).collect();
        let mut t_next = vec![Complex64::new(0.0, 0.0); n];
        for c in &coeffs[2..] {
            apply_x(&t_cur, &mut t_next);
            for j in 0..n {
                t_next[j] = 2.0 * t_next[j] - t_prev[j];
                acc[j] += *c * t_next[j];
            }
            std::mem::swap(&mut t_prev, &mut t_cur);
            std::mem::swap(&mut t_cur, &mut t_next);
        }
        acc
    }
}

/// Chebyshev coefficients of `f` on `[a, b]`, truncated once the tail is
/// below `1e-13` of the largest coefficient. `c_0` carries the usual ½.
fn chebyshev_coefficients(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Vec<f64> {
    let mut m = 1024usize;
    loop {
        let samples: Vec<f64> = (0..m)
            .map(|j| {
                let theta = PI * (j as f64 + 0.5) / m as f64;
                f(0.5 * (b - a) * theta.cos() + 0.5 * (b + a))
            })
            .collect();
        // cos(πk(j+½)/m) = table[k(2j+1) mod 4m]
        let table: Vec<f64> = (0..4 * m).map(|i| (PI * i as f64 / (2 * m) as f64).cos()).collect();
        let coeffs: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|k| {
                let s: f64 = samples.iter().enumerate().map(|(j, fj)| fj * table[(k * (2 * j + 1)) % (4 * m)]).sum();
                let c = 2.0 * s / m as f64;
                if k == 0 { 0.5 * c } else { c }
            })
            .collect();
        let top = coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let tail = coeffs[m - m / 8..].iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        if tail <= 1e-13 * top || m >= 1 << 16 {
            let keep = coeffs.iter().rposition(|c| c.abs() > 1e-14 * top).unwrap_or(1) + 1;
            let mut out = coeffs;
            out.truncate(keep.max(2));
            return out;
        }
        m *= 2;
    }
}

/// Node layout of a run.
#[derive(Debug, Clone)]
struct Layout {
    dr: f64,
    /// Total cells `J`; nodes `0..=J`.
    cells: usize,
    /// Node index of `R`.
    range_node: usize,
}

impl Layout {
    fn new(range: f64, g: &GridSpec) -> Self {
        let dr = g.dr(range);
        let cells = (g.box_length / dr).round() as usize;
        Self { dr, cells, range_node: g.intervals_per_range }
    }

    fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    /// Potential on interior nodes with the delta as a one-node barrier and
    /// segment jumps averaged at nodes that sit on a break.
    fn potential(&self, p: &Potential) -> Vec<f64> {
        let eps = 1e-9 * self.dr;
        let mut v: Vec<f64> = (1..self.cells)
            .map(|j| {
                let r = self.r(j);
                0.5 * (evaluate_potential(p, (r - eps).max(0.0)) + evaluate_potential(p, r + eps))
            })
            .collect();
        if let PotentialShape::DeltaShell { .. } = p.shape() {
            v[self.range_node - 1] += p.delta_jump() / self.dr;
        }
        v
    }

    fn mask(&self, g: &GridSpec) -> Option<Vec<f64>> {
        let a = g.absorber?;
        let start = g.box_length - a.width;
        Some(
            (1..self.cells)
                .map(|j| {
                    let r = self.r(j);
                    if r <= start {
                        1.0
                    } else {
                        let xi = (r - start) / a.width;
                        (-a.strength * g.time_step * (0.5 * PI * xi).sin().powi(2)).exp()
                    }
                })
                .collect(),
        )
    }

    /// Trapezoid `∫₀ᴿ |ψ|²` (interior vector, node `j` at index `j − 1`).
    fn inside(&self, psi: &[Complex64]) -> f64 {
        let jr = self.range_node;
        let body: f64 = psi[..jr - 1].iter().map(|z| z.norm_sqr()).sum();
        self.dr * (body + 0.5 * psi[jr - 1].norm_sqr())
    }

    fn total(&self, psi: &[Complex64]) -> f64 {
        self.dr * psi.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    fn wall_density(&self, psi: &[Complex64]) -> f64 {
        psi[psi.len().saturating_sub(HORIZON_POINTS)..].iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }
}

/// Integrates the TDSE for `ψ0` and records `P(t)`, the grid norm and the
/// contamination flag every `record_every` steps.
pub fn evolve_tdse(p: &Potential, psi0: &InitialState, g: &GridSpec) -> Result<NonescapeSeries> {
    g.validate(p.range())?;
    evolve_tdse_unchecked(p, psi0, g)
}

pub fn evolve_tdse_unchecked(p: &Potential, psi0: &InitialState, g: &GridSpec) -> Result<NonescapeSeries> {
    g.check_basic(p.range())?;
    if psi0.support_radius() > p.range() * (1.0 + 1e-12) {
        return Err(Error::InvalidState("initial state must be supported in [0, R]".into()));
    }
    let layout = Layout::new(p.range(), g);
    let mut cn = CrankNicolson::new(layout.dr, g.time_step, layout.potential(p));
    let mut psi: Vec<Complex64> = (1..layout.cells).map(|j| initial_wavefunction(psi0, layout.r(j))).collect();
    // Discrete normalization, so the grid starts at unit norm.
    let norm0 = layout.total(&psi).sqrt();
    for z in &mut psi {
        *z /= norm0;
    }
    let mut notes = Vec::new();
    if let Some(ec) = g.energy_cutoff {
        psi = cn.spectral_filter(&psi, ec);
        notes.push(format!("initial state filtered by exp(-(H/{ec})^8)"));
    }
    if let Some(mask) = layout.mask(g) {
        cn = cn.with_mask(mask);
        let a = g.absorber.unwrap();
        notes.push(format!(
            "absorbing mask on [{}, {}] with strength {}: norm is not conserved",
            g.box_length - a.width,
            g.box_length,
            a.strength
        ));
    }
    let start_norm = layout.total(&psi);
    let steps = g.steps();
    let mut out = Recorder::default();
    let mut contaminated = false;
    let mut record = |step: usize, psi: &[Complex64], contaminated: bool| {
        out.times.push(step as f64 * g.time_step);
        out.p.push(layout.inside(psi));
        out.norm.push(layout.total(psi));
        out.flags.push(contaminated);
    };
    record(0, &psi, false);
    for step in 1..=steps {
        cn.step(&mut psi);
        if !contaminated && layout.wall_density(&psi) > g.leak_threshold {
            contaminated = true;
        }
        if step % g.record_every == 0 || step == steps {
            record(step, &psi, contaminated);
        }
    }
    if g.absorber.is_none() {
        let drift = out.norm.iter().map(|n| (n - start_norm).abs()).fold(0.0, f64::max);
        if drift > MAX_NORM_DRIFT {
            return Err(Error::UnstableParameters(format!("norm drift {drift:e} exceeds {MAX_NORM_DRIFT:e}")));
        }
    }
    let series = NonescapeSeries {
        imag_residual: vec![0.0; out.times.len()],
        times: out.times,
        p: out.p,
        truncation: None,
        mode: None,
        provenance: Provenance::Oracle,
        norm: Some(out.norm),
        horizon_flag: Some(out.flags),
        notes,
    };
    if let (Some(end), Some(h)) = (g.analysis_end, series.horizon()) {
        if h < end {
            return Err(Error::HorizonTooShort { horizon: h, window_end: end });
        }
    }
    Ok(series)
}

#[derive(Default)]
struct Recorder {
    times: Vec<f64>,
    p: Vec<f64>,
    norm: Vec<f64>,
    flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub factor: usize,
    /// Last record time before any run saw wall contamination.
    pub compared_until: f64,
    /// `max |P_base − P_{base/f}| / P_{base/f²}` over common record times.
    pub deviation_once: f64,
    /// Same between the two refined runs.
    pub deviation_twice: f64,
    /// Same between the base and the finest run.
    pub deviation_base_finest: f64,
    /// `log(deviation_once / deviation_twice) / log f`.
    pub observed_order: f64,
    pub tolerance: f64,
    /// `deviation_once > tolerance`: the base grid is not converged.
    pub exceeds_tolerance: bool,
}

/// Reruns with `Δr` and `Δt` divided by `factor` and by `factor²` and
/// compares `P(t)` on the base record times (relative deviations) up to the
/// earliest contamination horizon of the three runs.
pub fn refine_and_compare(p: &Potential, psi0: &InitialState, g: &GridSpec, factor: usize, tolerance: f64) -> Result<RefinementReport> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!("refinement factor must be at least 2, got {factor}")));
    }
    let specs = [*g, g.refined(factor), g.refined(factor * factor)];
    let runs: Vec<NonescapeSeries> = specs.par_iter().map(|s| evolve_tdse_unchecked(p, psi0, s)).collect::<Result<_>>()?;
    // Reflected components carry grid-dependent phases; only pre-horizon
    // record times are compared.
    let horizon = runs.iter().filter_map(|r| r.horizon()).fold(f64::INFINITY, f64::min);
    let count = runs[0].times.iter().take_while(|&&t| t < horizon).count();
    if count < 2 {
        return Err(Error::EmptyWindow { lo: 0.0, hi: horizon });
    }
    let reference = &runs[2].p;
    let max_dev = |a: &NonescapeSeries, b: &NonescapeSeries| {
        (0..count).map(|i| (a.p[i] - b.p[i]).abs() / reference[i].abs()).fold(0.0, f64::max)
    };
    let once = max_dev(&runs[0], &runs[1]);
    let twice = max_dev(&runs[1], &runs[2]);
    Ok(RefinementReport {
        factor,
        compared_until: runs[0].times[count - 1],
        deviation_once: once,
        deviation_twice: twice,
        deviation_base_finest: max_dev(&runs[0], &runs[2]),
        observed_order: (once / twice).ln() / (factor as f64).ln(),
        tolerance,
        exceeds_tolerance: once > tolerance,
    })
}

/// Free evolution of `g(r − r0) − g(r + r0)`, the odd extension of a
/// Gaussian of width `σ` centered at `r0` (exact with a hard wall at 0):
/// `g(x,t) = (2πσ²)^(−1/4) √(σ²/(σ²+it)) exp(−x²/(4(σ²+it)))`.
pub fn free_gaussian(r: f64, t: f64, r0: f64, sigma: f64) -> Complex64 {
    let s2 = Complex64::new(sigma * sigma, t);
    let pref = (2.0 * PI * sigma * sigma).powf(-0.25) * (sigma * sigma / s2).sqrt();
    let g = |x: f64| (-(x * x) / (4.0 * s2)).exp();
    pref * (g(r - r0) - g(r + r0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeGaussianCheck {
    pub max_density_error: f64,
    pub final_time: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

/// Propagates the odd Gaussian with `V ≡ 0` and compares `|ψ|²` with the
/// analytic density at the final time, over the whole box.
pub fn free_gaussian_check(box_length: f64, dr: f64, dt: f64, final_time: f64, r0: f64, sigma: f64) -> Result<FreeGaussianCheck> {
    let cells = (box_length / dr).round() as usize;
    if cells < 4 {
        return Err(Error::InvalidGrid("box too small".into()));
    }
    let mut cn = CrankNicolson::new(dr, dt, vec![0.0; cells - 1]);
    let mut psi: Vec<Complex64> = (1..cells).map(|j| free_gaussian(j as f64 * dr, 0.0, r0, sigma)).collect();
    let norm = |v: &[Complex64]| dr * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let n0 = norm(&psi);
    let steps = (final_time / dt).round() as usize;
    let mut drift = 0.0f64;
    for _ in 0..steps {
        cn.step(&mut psi);
        drift = drift.max((norm(&psi) - n0).abs());
    }
    let t = steps as f64 * dt;
    let max_density_error = (1..cells)
        .map(|j| (psi[j - 1].norm_sqr() - free_gaussian(j as f64 * dr, t, r0, sigma).norm_sqr()).abs())
        .fold(0.0, f64::max);
    Ok(FreeGaussianCheck { max_density_error, final_time: t, norm_drift: drift, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> GridSpec {
        GridSpec {
            box_length: 20.0,
            intervals_per_range: 200,
            time_step: 1e-3,
            final_time: 1.0,
            leak_threshold: 1e-10,
            max_wavenumber: 20.0,
            record_every: 50,
            absorber: None,
            energy_cutoff: None,
            analysis_end: None,
        }
    }

    #[test]
    fn norm_is_conserved_without_absorber() {
        let p = Potential::delta_shell(6.0, 1.0).unwrap();
        let psi = InitialState::box_mode(1, 1.0).unwrap();
        let s = evolve_tdse(&p, &psi, &small_spec()).unwrap();
        let norm = s.norm.unwrap();
        assert!(norm.iter().all(|n| (n - 1.0).abs() < 1e-8), "{:?}", norm.last());
        assert!((s.p[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn initial_decay_rate_is_the_pole_width() {
        let p = Potential::delta_shell(6.0, 1.0).unwrap();
        let psi = InitialState::box_mode(1, 1.0).unwrap();
        let g = GridSpec { final_time: 3.3, record_every: 20, energy_cutoff: Some(400.0), ..small_spec() };
        let s = evolve_tdse(&p, &psi, &g).unwrap();
        let w = crate::dynamics::probability_window(&s, 1.3, 3.2).unwrap();
        let fit = crate::asymptote::fit_power_law(&w.times.iter().map(|t| t.exp()).collect::<Vec<_>>(), &w.p).unwrap();
        // ln P against t: the power-law fit on e^t gives the exponential rate.
        let k1 = Complex64::new(2.7579383212949247, -0.1404327324662333);
        let gamma = -2.0 * (k1 * k1).im;
        assert!((fit.slope + gamma).abs() < 0.02 * gamma, "{} vs {}", fit.slope, -gamma);
    }

    #[test]
    fn deterministic() {
        let p = Potential::delta_shell(6.0, 1.0).unwrap();
        let psi = InitialState::box_mode(1, 1.0).unwrap();
        let g = GridSpec { final_time: 0.2, ..small_spec() };
        assert_eq!(evolve_tdse(&p, &psi, &g).unwrap(), evolve_tdse(&p, &psi, &g).unwrap());
    }

    #[test]
    fn validation() {
        let g = small_spec();
        assert!(g.validate(1.0).is_ok());
        assert!(GridSpec { intervals_per_range: 20, ..g }.validate(1.0).is_err());
        assert!(GridSpec { box_length: 5.0, ..g }.validate(1.0).is_err());
        assert!(GridSpec { time_step: 0.01, ..g }.validate(1.0).is_err());
        assert!(GridSpec { box_length: 20.0025, ..g }.validate(1.0).is_err());
        assert!(GridSpec { record_every: 0, ..g }.validate(1.0).is_err());
    }

    #[test]
    fn horizon_is_flagged_and_enforced() {
        let p = Potential::delta_shell(6.0, 1.0).unwrap();
        let psi = InitialState::box_mode(1, 1.0).unwrap();
        let g = GridSpec { box_length: 10.0, final_time: 2.0, leak_threshold: 1e-6, ..small_spec() };
        let s = evolve_tdse_unchecked(&p, &psi, &g).unwrap();
        let h = s.horizon().expect("fast components reach the wall");
        assert!(h > 0.0 && h < 2.0);
        let flags = s.horizon_flag.unwrap();
        let first = flags.iter().position(|&f| f).unwrap();
        assert!(flags[first..].iter().all(|&f| f));
        let strict = GridSpec { analysis_end: Some(2.0), ..g };
        assert!(matches!(evolve_tdse_unchecked(&p, &psi, &strict), Err(Error::HorizonTooShort { .. })));
    }

    #[test]
    fn absorber_removes_outgoing_probability() {
        let p = Potential::delta_shell(6.0, 1.0).unwrap();
        let psi = InitialState::box_mode(1, 1.0).unwrap();
        let g = GridSpec {
            final_time: 4.0,
            absorber: Some(Absorber { width: 10.0, strength: 50.0 }),
            ..small_spec()
        };
        let s = evolve_tdse(&p, &psi, &g).unwrap();
        assert!(s.norm.as_ref().unwrap().last().unwrap() < &0.2);
        assert!(!s.notes.is_empty());
    }

    #[test]
    fn spectral_filter_keeps_low_energies() {
        let dr = 0.01;
        let n = 999;
        let cn = CrankNicolson::new(dr, 1e-3, vec![0.0; n]);
        // A discrete sine mode is an exact eigenvector with E = (4/dr²) sin²(k dr/2).
        for (m, expect_kept) in [(3usize, true), (300, false)] {
            let k = m as f64 * PI / (dr * (n + 1) as f64);
            let e = 4.0 / (dr * dr) * (0.5 * k * dr).sin().powi(2);
            let v: Vec<Complex64> = (1..=n).map(|j| Complex64::new((k * j as f64 * dr).sin(), 0.0)).collect();
            let out = cn.spectral_filter(&v, 400.0);
            let factor = (-(e / 400.0).powi(8)).exp();
            let err = v.iter().zip(&out).map(|(a, b)| (a * factor - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "m={m}: {err}");
            assert_eq!(factor > 0.5, expect_kept);
        }
    }

    #[test]
    fn free_gaussian_matches_analytic_density() {
        let c = free_gaussian_check(30.0, 0.005, 5e-4, 1.0, 8.0, 1.0).unwrap();
        assert!(c.max_density_error < 1e-4, "{c:?}");
        assert!(c.norm_drift < 1e-10);
    }

    #[test]
    fn refinement_is_second_order() {
        let p = Potential::delta_shell(6.0, 1.0).unwrap();
        let psi = InitialState::box_mode(1, 1.0).unwrap();
        let g = GridSpec {
            box_length: 10.0,
            intervals_per_range: 100,
            time_step: 1e-3,
            final_time: 0.8,
            record_every: 20,
            leak_threshold: 1e-8,
            energy_cutoff: Some(400.0),
            ..small_spec()
        };
        let r = refine_and_compare(&p, &psi, &g, 2, 1e-3).unwrap();
        assert!((r.observed_order - 2.0).abs() < 0.3, "{r:?}");
        assert!(r.compared_until > 0.1 && r.compared_until < 0.8, "{r:?}");
        assert!(r.deviation_once <= 4.0 * r.deviation_base_finest);
        assert!(!r.exceeds_tolerance);
        let same = refine_and_compare(&p, &psi, &g, 2, 1e-3).unwrap();
        assert_eq!(same, r);
        let coarse = GridSpec { intervals_per_range: 20, time_step: 5e-3, record_every: 4, ..g };
        assert!(refine_and_compare(&p, &psi, &coarse, 2, 1e-4).unwrap().exceeds_tolerance);
    }
}
