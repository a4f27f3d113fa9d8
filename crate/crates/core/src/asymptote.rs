//! Long-time behaviour of the truncated double sum.
//!
//! Substituting `M(k,t) ≈ Σ_j a_j (k√t)^−(2j+1)` into the double sum gives
//! `P_N(t) ≈ Σ_m D_m t^−m` with
//! `D_m = Σ_{j+j'=m−1} a_j conj(a_j') G(2j+1, 2j'+1)` and
//! `G(p,q) = Σ C_n C̄_ℓ I_nℓ / (k_n^p conj(k_ℓ)^q) = ∫₀ᴿ σ_p conj(σ_q) dr`,
//! `σ_p(r) = Σ C_n u_n(r) / k_n^p`. In particular `D_1 = |a_0|² ∫|S_N|²`
//! where `S_N = σ_1` is the truncated sum-rule residual.

use crate::dynamics::{nonescape_algebraic_part, nonescape_probability, NonescapeSeries, TimeGrid};
use crate::error::{Error, Result};
use crate::gamow::{sum_rule_residual, sum_rule_square_norm, ExpansionData, OverlapMode};
use crate::numerics::sum_descending;
use crate::specfn::{asymptotic_coefficient, ASYMPTOTIC_MIN_ARG};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `|a_0| = 1/(2√π)`, the modulus of the leading Moshinsky tail constant.
pub fn leading_constant() -> f64 {
    asymptotic_coefficient(0).norm()
}

/// Relative disagreement between the two `D_1` paths that is reported as a
/// violation.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

/// Ratio of the exponential envelope to the algebraic tail that marks the end
/// of the exponential stage.
pub const EXPONENTIAL_FRACTION: f64 = 1e-4;

/// The algebraic fit window is `[t_a, WINDOW_SPAN·t_a]`.
pub const WINDOW_SPAN: f64 = 2.5;

/// Local two-point slope above which the truncated sum has crossed over to
/// its finite-N `t⁻¹` tail.
pub const CROSSOVER_SLOPE: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCoefficient {
    pub n: usize,
    /// `c₁² Σ C_n C̄_ℓ I_nℓ / (k_n conj k_ℓ)`.
    pub double_sum: f64,
    /// `c₁² ∫₀ᴿ |S_N|² dr`.
    pub integral: f64,
    pub c1: f64,
}

impl TailCoefficient {
    pub fn relative_gap(&self) -> f64 {
        (self.double_sum - self.integral).abs() / self.integral.abs().max(f64::MIN_POSITIVE)
    }
}

/// `G(p,q)` for arbitrary coefficients, wavenumbers and Gram matrix.
pub fn gram_moment<F>(coeffs: &[Complex64], ks: &[Complex64], gram: F, p: i32, q: i32) -> Complex64
where
    F: Fn(usize, usize) -> Complex64,
{
    let len = coeffs.len();
    let a: Vec<Complex64> = (0..len).map(|i| coeffs[i] / ks[i].powi(p)).collect();
    let b: Vec<Complex64> = (0..len).map(|i| coeffs[i] / ks[i].powi(q)).collect();
    let mut terms = Vec::with_capacity(len * len);
    for i in 0..len {
        for j in 0..len {
            terms.push(a[i] * b[j].conj() * gram(i, j));
        }
    }
    sum_descending(&mut terms)
}

fn truncated_inputs(data: &ExpansionData, n: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let len = data.truncated_len(n)?;
    let ks = data.states[..len].iter().map(|s| s.k()).collect();
    Ok((data.coefficients[..len].to_vec(), ks))
}

/// `t⁻¹` coefficient with the leading constant `c₁ = |a_0|`.
pub fn tail_coefficient_t1(data: &ExpansionData, n: usize) -> Result<TailCoefficient> {
    tail_coefficient_t1_with(data, n, leading_constant())
}

/// `t⁻¹` coefficient with an explicit prefactor `c₁`.
pub fn tail_coefficient_t1_with(data: &ExpansionData, n: usize, c1: f64) -> Result<TailCoefficient> {
    let (coeffs, ks) = truncated_inputs(data, n)?;
    let g = gram_moment(&coeffs, &ks, |i, j| data.overlaps_closed.get(i, j), 1, 1);
    let out = TailCoefficient {
        n,
        double_sum: c1 * c1 * g.re,
        integral: c1 * c1 * sum_rule_square_norm(data, n)?,
        c1,
    };
    if out.relative_gap() > EQUIVALENCE_TOL {
        return Err(Error::EquivalenceViolation { double_sum: out.double_sum, integral: out.integral });
    }
    Ok(out)
}

/// `[D_1, …, D_max_order]` from arbitrary coefficients and Gram matrix.
/// `scale` multiplies every `a_j` (so every `D_m` scales by `scale²`).
pub fn tail_expansion_from<F>(
    coeffs: &[Complex64],
    ks: &[Complex64],
    gram: F,
    max_order: usize,
    scale: f64,
) -> Vec<f64>
where
    F: Fn(usize, usize) -> Complex64 + Sync,
{
    (1..=max_order)
        .map(|m| {
            let mut terms: Vec<Complex64> = (0..m)
                .map(|j| {
                    let jp = m - 1 - j;
                    let a = scale * asymptotic_coefficient(j);
                    let b = scale * asymptotic_coefficient(jp);
                    a * b.conj() * gram_moment(coeffs, ks, &gram, 2 * j as i32 + 1, 2 * jp as i32 + 1)
                })
                .collect();
            sum_descending(&mut terms).re
        })
        .collect()
}

/// `[D_1, …, D_max_order]` for the truncation `|n| ≤ n`; `max_order ≤ 3`.
pub fn tail_expansion(data: &ExpansionData, n: usize, max_order: usize) -> Result<Vec<f64>> {
    if max_order == 0 || max_order > 3 {
        return Err(Error::InvalidArgument(format!("tail order must be 1..=3, got {max_order}")));
    }
    let (coeffs, ks) = truncated_inputs(data, n)?;
    Ok(tail_expansion_from(&coeffs, &ks, |i, j| data.overlaps_closed.get(i, j), max_order, 1.0))
}

/// `Σ_m D_m t^−m`.
pub fn evaluate_tail(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().enumerate().map(|(m, d)| d / t.powi(m as i32 + 1)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Least-squares slope of `ln P` against `ln t` over `t_lo ≤ t ≤ t_hi`.
pub fn slope_fit(series: &NonescapeSeries, t_lo: f64, t_hi: f64) -> Result<SlopeFit> {
    let (ts, ps): (Vec<f64>, Vec<f64>) = series
        .times
        .iter()
        .zip(&series.p)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, p)| (*t, *p))
        .unzip();
    fit_power_law(&ts, &ps)
}

/// Least-squares power law through `(t_i, p_i)`; needs at least 8 points.
pub fn fit_power_law(ts: &[f64], ps: &[f64]) -> Result<SlopeFit> {
    if ts.len() < 8 {
        return Err(Error::InvalidArgument(format!("slope fit needs at least 8 points, got {}", ts.len())));
    }
    if let Some((t, p)) = ts.iter().zip(ps).find(|(_, p)| **p <= 0.0) {
        return Err(Error::NonPositiveProbability { t: *t, p: *p });
    }
    let n = ts.len() as f64;
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept, points: ts.len(), t_lo: ts[0], t_hi: ts[ts.len() - 1] })
}

/// Envelope `|C_1|² I_11 exp(−Γ_1 t)` of the slowest exponential term.
pub fn exponential_envelope(data: &ExpansionData, t: f64) -> Result<f64> {
    let s = data.state(1).ok_or_else(|| Error::InvalidArgument("expansion has no states".into()))?;
    let c = data.coefficient(1).unwrap_or_default();
    let i11 = data.overlaps_closed.get(0, 0).re;
    Ok(c.norm_sqr() * i11 * (-s.pole.width() * t).exp())
}

/// Start `t_a` of the algebraic stage: the first time after which the
/// exponential envelope stays below [`EXPONENTIAL_FRACTION`] of the `t⁻³`
/// term `D_3/t³` of the `|n| ≤ n` truncation. The `t⁻¹` and `t⁻²` terms are
/// left out on purpose: they are truncation artifacts that vanish with N.
pub fn algebraic_window_start(data: &ExpansionData, n: usize) -> Result<f64> {
    let d3 = tail_expansion(data, n, 3)?[2].abs();
    let tau = 1.0 / data.state(1).map(|s| s.pole.width()).unwrap_or(1.0);
    // The envelope is monotone and the tail algebraic, so the first crossing
    // on a fine grid is the last one.
    let grid = TimeGrid::logarithmic(tau, 1e8 * tau, 8001)?;
    for &t in grid.points() {
        if exponential_envelope(data, t)? <= EXPONENTIAL_FRACTION * d3 / t.powi(3) {
            return Ok(t);
        }
    }
    Err(Error::EmptyWindow { lo: tau, hi: 1e8 * tau })
}

/// Earliest time at which every retained `M` is in its asymptotic regime
/// (`|y| ≥ 4` for the lowest pole).
pub fn asymptotic_onset(data: &ExpansionData) -> Result<f64> {
    let k = data.state(1).ok_or_else(|| Error::InvalidArgument("expansion has no states".into()))?.k();
    Ok((ASYMPTOTIC_MIN_ARG / k.norm()).powi(2))
}

/// Crossover of the `|n| ≤ n` truncation from `t⁻³` to its finite-N `t⁻¹`
/// tail: the first time from [`asymptotic_onset`] on at which the two-point
/// log-log slope of the algebraic part of `P_N` rises above
/// [`CROSSOVER_SLOPE`]. Searched on a logarithmic grid up to `t_end`; `None`
/// if it does not happen there. The algebraic part is used because for small
/// N the crossover falls inside the exponential stage.
pub fn crossover_time(data: &ExpansionData, n: usize, t_end: f64) -> Result<Option<f64>> {
    let t_start = asymptotic_onset(data)?;
    if t_end <= t_start {
        return Ok(None);
    }
    let decades = (t_end / t_start).log10().max(1.0);
    let grid = TimeGrid::logarithmic(t_start, t_end, (decades * 40.0).ceil() as usize + 1)?;
    let s = nonescape_algebraic_part(data, &grid, n)?;
    for i in 1..s.len() {
        let (p0, p1) = (s.p[i - 1], s.p[i]);
        if p0 <= 0.0 || p1 <= 0.0 {
            continue;
        }
        let slope = (p1.ln() - p0.ln()) / (s.times[i].ln() - s.times[i - 1].ln());
        if slope > CROSSOVER_SLOPE {
            return Ok(Some(s.times[i - 1]));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub d1_sum: f64,
    pub d1_integral: f64,
    /// `D_2`, `D_3`.
    pub higher: Vec<f64>,
    pub sumrule_l2: f64,
    /// `|S_N(r)|` at the study radii.
    pub sumrule_pointwise: Vec<f64>,
    pub crossover_t: Option<f64>,
    pub slope: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub radii: Vec<f64>,
    pub c1: f64,
    /// Common algebraic fit window `[t_a, 2.5 t_a]`.
    pub window: (f64, f64),
    pub rows: Vec<TailRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    /// Multiplier on `c₁`; adjudication outputs must not depend on it.
    pub c1_scale: f64,
    /// Points in the slope-fit window.
    pub window_points: usize,
    /// Upper end of the crossover search, in units of `τ₁`.
    pub crossover_horizon: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { c1_scale: 1.0, window_points: 40, crossover_horizon: 1e10 }
    }
}

/// Tabulates `D_1(N)` both ways, higher tail coefficients, sum-rule norms,
/// fitted slopes in a common algebraic window and crossover times.
pub fn convergence_study(
    data: &ExpansionData,
    n_list: &[usize],
    radii: &[f64],
    opts: StudyOptions,
) -> Result<TailReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("truncation list must be non-empty and ascending".into()));
    }
    let n_ref = *n_list.last().unwrap();
    let t_a = algebraic_window_start(data, n_ref)?;
    let window = (t_a, WINDOW_SPAN * t_a);
    let tau = 1.0 / data.state(1).map(|s| s.pole.width()).unwrap_or(1.0);
    let fit_grid = TimeGrid::logarithmic(window.0, window.1, opts.window_points)?;
    let c1 = leading_constant() * opts.c1_scale;
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let d1 = tail_coefficient_t1_with(data, n, c1)?;
            let tail = tail_expansion(data, n, 3)?;
            let scale2 = opts.c1_scale * opts.c1_scale;
            let series = nonescape_probability(data, &fit_grid, n, OverlapMode::Closed)?;
            let slope = slope_fit(&series, window.0, window.1)?;
            let pointwise = radii
                .iter()
                .map(|&r| sum_rule_residual(data, r, n).map(|s| s.norm()))
                .collect::<Result<_>>()?;
            Ok(TailRow {
                n,
                d1_sum: d1.double_sum,
                d1_integral: d1.integral,
                higher: tail[1..].iter().map(|d| d * scale2).collect(),
                sumrule_l2: sum_rule_square_norm(data, n)?.sqrt(),
                sumrule_pointwise: pointwise,
                crossover_t: crossover_time(data, n, opts.crossover_horizon * tau)?,
                slope,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailReport { radii: radii.to_vec(), c1, window, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Provenance;
    use crate::model::{InitialState, Potential};
    use crate::poles::{locate_poles, SearchWindow};
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn reference() -> &'static ExpansionData {
        static DATA: OnceLock<ExpansionData> = OnceLock::new();
        DATA.get_or_init(|| {
            let p = Potential::delta_shell(6.0, 1.0).unwrap();
            let poles = locate_poles(&p, SearchWindow { re_max: 130.0, im_min: -4.0 }, 1e-12).unwrap();
            let psi = InitialState::box_mode(1, 1.0).unwrap();
            ExpansionData::build(&poles, &psi, 40, false).unwrap()
        })
    }

    fn synthetic(times: Vec<f64>, f: impl Fn(f64) -> f64) -> NonescapeSeries {
        NonescapeSeries {
            p: times.iter().map(|&t| f(t)).collect(),
            imag_residual: vec![0.0; times.len()],
            times,
            truncation: None,
            mode: None,
            provenance: Provenance::Expansion,
            norm: None,
            horizon_flag: None,
            notes: Vec::new(),
        }
    }

    #[test]
    fn leading_constant_value() {
        assert!((leading_constant().powi(2) - 1.0 / (4.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn exact_power_law_slope() {
        let g = TimeGrid::logarithmic(1.0, 1e3, 30).unwrap();
        let s = synthetic(g.points().to_vec(), |t| 7.0 / t);
        let fit = slope_fit(&s, 0.0, f64::INFINITY).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert_eq!(fit.points, 30);
    }

    #[test]
    fn constructed_crossover_drifts() {
        let g = TimeGrid::logarithmic(1.0, 1e8, 200).unwrap();
        let s = synthetic(g.points().to_vec(), |t| 2.0 / t.powi(3) + 1e-9 / t);
        let early = slope_fit(&s, 5.0, 50.0).unwrap().slope;
        let late = slope_fit(&s, 1e6, 1e8).unwrap().slope;
        assert!((early + 3.0).abs() < 0.01, "{early}");
        assert!((late + 1.0).abs() < 0.01, "{late}");
    }

    #[test]
    fn slope_fit_errors() {
        let g = TimeGrid::logarithmic(1.0, 10.0, 10).unwrap();
        let s = synthetic(g.points().to_vec(), |t| 1.0 - t / 5.0);
        assert!(matches!(slope_fit(&s, 0.0, 100.0), Err(Error::NonPositiveProbability { .. })));
        assert!(slope_fit(&s, 1.0, 2.0).is_err());
    }

    #[test]
    fn single_pair_has_positive_coefficient_and_early_crossover() {
        let data = reference();
        let d = tail_coefficient_t1(data, 1).unwrap();
        assert!(d.double_sum > 0.0 && d.integral > 0.0);
        let tau = 1.0 / data.poles.pole(1).unwrap().width();
        let t = crossover_time(data, 1, 1e6 * tau).unwrap();
        assert!(t.is_some_and(|t| t < 10.0 * tau), "{t:?}");
    }

    #[test]
    fn coefficient_paths_agree() {
        let data = reference();
        for n in [1, 2, 5, 10, 20, 40] {
            let d = tail_coefficient_t1(data, n).unwrap();
            assert!(d.double_sum >= 0.0, "N={n}");
            assert!(d.relative_gap() <= EQUIVALENCE_TOL, "N={n}: {d:?}");
        }
    }

    #[test]
    fn t1_entry_is_the_double_sum() {
        let data = reference();
        for n in [3, 12] {
            let tail = tail_expansion(data, n, 3).unwrap();
            let d1 = tail_coefficient_t1(data, n).unwrap().double_sum;
            assert!((tail[0] - d1).abs() <= 1e-12 * d1.abs());
        }
        assert!(tail_expansion(data, 3, 4).is_err());
    }

    #[test]
    fn vanishing_residual_removes_low_orders() {
        // Three "states" with f3 = f1 + f2 and C/k = (1, 1, −1): S ≡ 0.
        let f = [
            vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)],
            vec![Complex64::new(0.2, -1.0), Complex64::new(0.7, 0.1)],
        ];
        let f3: Vec<Complex64> = f[0].iter().zip(&f[1]).map(|(a, b)| a + b).collect();
        let fs = [f[0].clone(), f[1].clone(), f3];
        let gram = |i: usize, j: usize| fs[i].iter().zip(&fs[j]).map(|(a, b)| a * b.conj()).sum();
        let ks = [Complex64::new(2.0, -0.1), Complex64::new(5.0, -0.4), Complex64::new(8.0, -0.7)];
        let coeffs: Vec<Complex64> = ks.iter().zip([1.0, 1.0, -1.0]).map(|(k, s)| k * s).collect();
        let tail = tail_expansion_from(&coeffs, &ks, gram, 3, 1.0);
        let size = tail[2].abs();
        assert!(tail[0].abs() < 1e-15 * size.max(1.0));
        assert!(tail[1].abs() < 1e-15 * size.max(1.0));
        assert!(tail[2] > 0.0);
    }

    #[test]
    fn tail_matches_direct_sum_at_long_times() {
        let data = reference();
        let tau = 1.0 / data.poles.pole(1).unwrap().width();
        let tail = tail_expansion(data, 40, 3).unwrap();
        let g = TimeGrid::logarithmic(1e3 * tau, 1e5 * tau, 9).unwrap();
        let s = nonescape_probability(data, &g, 40, OverlapMode::Closed).unwrap();
        for (t, p) in g.points().iter().zip(&s.p) {
            let approx = evaluate_tail(&tail, *t);
            assert!((approx - p).abs() <= 0.05 * p.abs(), "t={t}: {approx} vs {p}");
        }
    }

    #[test]
    fn adjudication_is_prefactor_independent() {
        let data = reference();
        let base = convergence_study(data, &[5, 10], &[0.5], StudyOptions::default()).unwrap();
        let doubled =
            convergence_study(data, &[5, 10], &[0.5], StudyOptions { c1_scale: 2.0, ..Default::default() }).unwrap();
        assert_eq!(base.window, doubled.window);
        for (a, b) in base.rows.iter().zip(&doubled.rows) {
            assert!((b.d1_sum / a.d1_sum - 4.0).abs() < 1e-12);
            assert_eq!(a.slope, b.slope);
            assert_eq!(a.crossover_t, b.crossover_t);
        }
        let ratio = |r: &TailReport| r.rows[1].d1_integral / r.rows[0].d1_integral;
        assert!((ratio(&base) - ratio(&doubled)).abs() < 1e-12 * ratio(&base));
    }
}
