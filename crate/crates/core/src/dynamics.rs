//! The nonescape probability `P(t) = Σ C_n C̄_ℓ I_nℓ M(k_n,t) conj M(k_ℓ,t)`
//! as a truncated double sum over resonant states.

use crate::error::{Error, Result};
use crate::gamow::{ExpansionData, OverlapMode};
use crate::numerics::sum_descending;
use crate::poles::PoleSet;
use crate::specfn::{moshinsky, moshinsky_algebraic};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Imaginary part of the double sum above which it is treated as broken.
pub const TRUNCATION_UNSTABLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Logarithmic,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    spacing: Spacing,
}

impl TimeGrid {
    pub fn linear(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        check_bounds(t_min, t_max, count, 0.0)?;
        let step = (t_max - t_min) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| t_min + step * i as f64).collect();
        points[count - 1] = t_max;
        Ok(Self { points, spacing: Spacing::Linear })
    }

    pub fn logarithmic(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        check_bounds(t_min, t_max, count, f64::MIN_POSITIVE)?;
        let (a, b) = (t_min.ln(), t_max.ln());
        let mut points: Vec<f64> =
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
        points[0] = t_min;
        points[count - 1] = t_max;
        Ok(Self { points, spacing: Spacing::Logarithmic })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("time grid is empty".into()));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidGrid("times must be finite and non-negative".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly ascending".into()));
        }
        Ok(Self { points, spacing: Spacing::Explicit })
    }

    /// 400 logarithmically spaced points on `[10⁻³, 10³]·τ₁`.
    pub fn default_for(poles: &PoleSet) -> Result<Self> {
        let tau = reference_lifetime(poles)?;
        Self::logarithmic(1e-3 * tau, 1e3 * tau, 400)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_bounds(t_min: f64, t_max: f64, count: usize, floor: f64) -> Result<()> {
    if count < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
    }
    if !(t_min.is_finite() && t_max.is_finite()) || t_min < floor || t_max <= t_min {
        return Err(Error::InvalidGrid(format!("bad time range [{t_min}, {t_max}]")));
    }
    Ok(())
}

/// `τ₁ = 1/Γ₁` of the narrowest resonance.
pub fn reference_lifetime(poles: &PoleSet) -> Result<f64> {
    let pole = poles
        .pole(1)
        .ok_or_else(|| Error::InvalidArgument("no resonance poles: lifetime undefined".into()))?;
    Ok(1.0 / pole.width())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Expansion,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonescapeSeries {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    /// `|Im|` of the double sum (zero for the oracle).
    pub imag_residual: Vec<f64>,
    pub truncation: Option<usize>,
    pub mode: Option<OverlapMode>,
    pub provenance: Provenance,
    /// Total norm on the grid, oracle only.
    pub norm: Option<Vec<f64>>,
    /// Set once the far-wall density exceeded the leak threshold, oracle only.
    pub horizon_flag: Option<Vec<bool>>,
    /// Free-form caveats carried into output metadata.
    pub notes: Vec<String>,
}

impl NonescapeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First flagged time, if any.
    pub fn horizon(&self) -> Option<f64> {
        let flags = self.horizon_flag.as_ref()?;
        flags.iter().position(|&f| f).map(|i| self.times[i])
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            times: pick(&self.times),
            p: pick(&self.p),
            imag_residual: pick(&self.imag_residual),
            truncation: self.truncation,
            mode: self.mode,
            provenance: self.provenance,
            norm: self.norm.as_deref().map(pick),
            horizon_flag: self.horizon_flag.as_ref().map(|f| idx.iter().map(|&i| f[i]).collect()),
            notes: self.notes.clone(),
        }
    }
}

/// `M(k_n, t)` for every state in the truncation, time-major.
fn moshinsky_table<F>(data: &ExpansionData, len: usize, times: &[f64], m: F) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(Complex64, f64) -> Result<Complex64> + Sync,
{
    times
        .par_iter()
        .map(|&t| data.states[..len].iter().map(|s| m(s.k(), t)).collect())
        .collect()
}

/// Truncated double sum for `|n| ≤ n`, using the chosen overlap matrix.
pub fn nonescape_probability(
    data: &ExpansionData,
    grid: &TimeGrid,
    n: usize,
    mode: OverlapMode,
) -> Result<NonescapeSeries> {
    double_sum(data, grid, n, mode, moshinsky)
}

/// The same double sum with every `M` replaced by its algebraic part
/// (pole exponentials removed): the non-exponential component of the
/// truncated `P_N(t)`, whose long-time expansion is `Σ D_m t^−m`.
pub fn nonescape_algebraic_part(data: &ExpansionData, grid: &TimeGrid, n: usize) -> Result<NonescapeSeries> {
    let mut s = double_sum(data, grid, n, OverlapMode::Closed, moshinsky_algebraic)?;
    s.notes.push("algebraic part: pole exponentials removed".into());
    Ok(s)
}

fn double_sum<F>(data: &ExpansionData, grid: &TimeGrid, n: usize, mode: OverlapMode, m: F) -> Result<NonescapeSeries>
where
    F: Fn(Complex64, f64) -> Result<Complex64> + Sync,
{
    let len = data.truncated_len(n)?;
    let overlaps = data.overlaps(mode)?;
    let table = moshinsky_table(data, len, grid.points(), m)?;
    let values: Vec<Complex64> = table
        .par_iter()
        .map(|m| {
            let v: Vec<Complex64> = (0..len).map(|i| data.coefficients[i] * m[i]).collect();
            let mut terms: Vec<Complex64> = Vec::with_capacity(len * len);
            for i in 0..len {
                for j in 0..len {
                    terms.push(v[i] * v[j].conj() * overlaps.get(i, j));
                }
            }
            sum_descending(&mut terms)
        })
        .collect();
    for (&t, z) in grid.points().iter().zip(&values) {
        if z.im.abs() > TRUNCATION_UNSTABLE_TOL * z.re.abs().max(1.0) || !z.re.is_finite() {
            return Err(Error::TruncationUnstable {
                t,
                reason: format!("imaginary residual {:e} at P = {:e}", z.im.abs(), z.re),
            });
        }
    }
    Ok(NonescapeSeries {
        times: grid.points().to_vec(),
        p: values.iter().map(|z| z.re).collect(),
        imag_residual: values.iter().map(|z| z.im.abs()).collect(),
        truncation: Some(n),
        mode: Some(mode),
        provenance: Provenance::Expansion,
        norm: None,
        horizon_flag: None,
        notes: Vec::new(),
    })
}

/// Restriction of `series` to `t_lo ≤ t ≤ t_hi`.
pub fn probability_window(series: &NonescapeSeries, t_lo: f64, t_hi: f64) -> Result<NonescapeSeries> {
    let out = series.select(|i| series.times[i] >= t_lo && series.times[i] <= t_hi);
    if out.is_empty() {
        return Err(Error::EmptyWindow { lo: t_lo, hi: t_hi });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialState, Potential};
    use crate::poles::{locate_poles, SearchWindow};
    use std::sync::OnceLock;

    fn reference() -> &'static ExpansionData {
        static DATA: OnceLock<ExpansionData> = OnceLock::new();
        DATA.get_or_init(|| {
            let p = Potential::delta_shell(6.0, 1.0).unwrap();
            let poles = locate_poles(&p, SearchWindow { re_max: 130.0, im_min: -4.0 }, 1e-12).unwrap();
            let psi = InitialState::box_mode(1, 1.0).unwrap();
            ExpansionData::build(&poles, &psi, 40, true).unwrap()
        })
    }

    #[test]
    fn grids() {
        let g = TimeGrid::linear(0.0, 1.0, 11).unwrap();
        assert_eq!(g.points()[10], 1.0);
        assert!((g.points()[3] - 0.3).abs() < 1e-15);
        let g = TimeGrid::logarithmic(1e-2, 1e2, 5).unwrap();
        assert!((g.points()[2] - 1.0).abs() < 1e-14);
        assert!(TimeGrid::logarithmic(0.0, 1.0, 5).is_err());
        assert!(TimeGrid::linear(1.0, 1.0, 5).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::from_points(vec![-1.0, 1.0]).is_err());
        let d = TimeGrid::default_for(&reference().poles).unwrap();
        let tau = reference_lifetime(&reference().poles).unwrap();
        assert!((d.points()[0] / tau - 1e-3).abs() < 1e-15);
        assert!((d.points()[d.len() - 1] / tau - 1e3).abs() < 1e-12);
    }

    #[test]
    fn initial_value_and_convergence() {
        let data = reference();
        let g = TimeGrid::from_points(vec![0.0]).unwrap();
        let err = |n| (nonescape_probability(data, &g, n, OverlapMode::Closed).unwrap().p[0] - 1.0).abs();
        assert!(err(40) <= 1e-2);
        assert!(err(40) < err(20) && err(20) < err(10) && err(10) < err(5));
    }

    #[test]
    fn modes_agree_and_sum_is_real() {
        let data = reference();
        let tau = reference_lifetime(&data.poles).unwrap();
        let g = TimeGrid::logarithmic(1e-3 * tau, 1e2 * tau, 60).unwrap();
        let a = nonescape_probability(data, &g, 10, OverlapMode::Closed).unwrap();
        let b = nonescape_probability(data, &g, 10, OverlapMode::Quadrature).unwrap();
        for i in 0..g.len() {
            assert!((a.p[i] - b.p[i]).abs() <= 1e-7 * a.p[i].abs(), "t={}", g.points()[i]);
            assert!(a.imag_residual[i] <= 1e-9 * a.p[i].abs().max(1.0));
            assert!(a.p[i] >= -1e-9);
        }
    }

    #[test]
    fn exponential_stage_follows_first_pole() {
        let data = reference();
        let gamma = data.poles.pole(1).unwrap().width();
        let tau = 1.0 / gamma;
        let g = TimeGrid::linear(2.0 * tau, 6.0 * tau, 9).unwrap();
        let s = nonescape_probability(data, &g, 40, OverlapMode::Closed).unwrap();
        let slope = (s.p[8].ln() - s.p[0].ln()) / (g.points()[8] - g.points()[0]);
        assert!((slope + gamma).abs() < 1e-2 * gamma, "{slope} vs {}", -gamma);
    }

    #[test]
    fn truncation_deltas_shrink_in_exponential_stage() {
        let data = reference();
        let tau = reference_lifetime(&data.poles).unwrap();
        let g = TimeGrid::from_points(vec![0.5 * tau, tau, 2.0 * tau]).unwrap();
        let at = |n| nonescape_probability(data, &g, n, OverlapMode::Closed).unwrap().p;
        let (p5, p10, p15, p20, p30) = (at(5), at(10), at(15), at(20), at(30));
        for i in 0..g.len() {
            let d = [(p5[i] - p15[i]).abs(), (p10[i] - p20[i]).abs(), (p20[i] - p30[i]).abs()];
            assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        }
    }

    #[test]
    fn windows() {
        let data = reference();
        let g = TimeGrid::logarithmic(1e-2, 1e2, 41).unwrap();
        let s = nonescape_probability(data, &g, 3, OverlapMode::Closed).unwrap();
        assert_eq!(probability_window(&s, 0.0, f64::INFINITY).unwrap(), s);
        let last = probability_window(&s, 1e2, f64::INFINITY).unwrap();
        assert_eq!(last.times, vec![1e2]);
        let decade = probability_window(&s, 1.0, 10.0).unwrap();
        let inside: Vec<f64> = g.points().iter().copied().filter(|t| (1.0..=10.0).contains(t)).collect();
        assert_eq!(decade.times, inside);
        assert!(inside.len() >= 10);
        assert_eq!(decade.truncation, Some(3));
        assert!(matches!(probability_window(&s, 2e2, 3e2), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn rejects_bad_truncation_and_missing_mode() {
        let data = reference();
        let g = TimeGrid::from_points(vec![1.0]).unwrap();
        assert!(nonescape_probability(data, &g, 41, OverlapMode::Closed).is_err());
        let mut bare = data.clone();
        bare.overlaps_quadrature = None;
        assert!(nonescape_probability(&bare, &g, 5, OverlapMode::Quadrature).is_err());
    }
}
