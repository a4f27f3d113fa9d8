//! Finite-range radial potentials and initial states confined to `[0, R]`.
//!
//! Units are ħ = 2m = 1, so the radial equation reads `u'' + (k² − V) u = 0`
//! and a stationary component evolves with the phase `exp(−i k² t)`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One constant piece `V` on `[r_lo, r_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub r_lo: f64,
    pub r_hi: f64,
    pub v: f64,
}

/// Unvalidated potential description, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialShape {
    PiecewiseConstant { segments: Vec<Segment> },
    DeltaShell { strength: f64, radius: f64 },
}

/// A validated finite-range potential. `V(r) = 0` for every `r > R`.
///
/// The delta shell `λ δ(r − R)` is carried symbolically: [`evaluate_potential`]
/// returns zero everywhere and the singular part is exposed by
/// [`Potential::delta_jump`] as the jump `u'(R⁺) − u'(R⁻) = λ u(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialShape", into = "PotentialShape")]
pub struct Potential {
    shape: PotentialShape,
}

impl Potential {
    pub fn delta_shell(strength: f64, radius: f64) -> Result<Self> {
        PotentialShape::DeltaShell { strength, radius }.try_into()
    }

    pub fn piecewise_constant(segments: Vec<Segment>) -> Result<Self> {
        PotentialShape::PiecewiseConstant { segments }.try_into()
    }

    /// The potential `V ≡ 0` on `[0, radius]`.
    pub fn free(radius: f64) -> Result<Self> {
        Self::piecewise_constant(vec![Segment { r_lo: 0.0, r_hi: radius, v: 0.0 }])
    }

    pub fn shape(&self) -> &PotentialShape {
        &self.shape
    }

    /// The range `R` beyond which the potential vanishes.
    pub fn range(&self) -> f64 {
        match &self.shape {
            PotentialShape::PiecewiseConstant { segments } => segments.last().map_or(0.0, |s| s.r_hi),
            PotentialShape::DeltaShell { radius, .. } => *radius,
        }
    }

    /// Regular (non-singular) pieces covering `[0, R]`.
    pub fn segments(&self) -> Vec<Segment> {
        match &self.shape {
            PotentialShape::PiecewiseConstant { segments } => segments.clone(),
            PotentialShape::DeltaShell { radius, .. } => {
                vec![Segment { r_lo: 0.0, r_hi: *radius, v: 0.0 }]
            }
        }
    }

    /// Derivative jump `λ` at `r = R`; zero when there is no delta shell.
    pub fn delta_jump(&self) -> f64 {
        match &self.shape {
            PotentialShape::DeltaShell { strength, .. } => *strength,
            PotentialShape::PiecewiseConstant { .. } => 0.0,
        }
    }

    pub fn is_free(&self) -> bool {
        self.delta_jump() == 0.0 && self.segments().iter().all(|s| s.v == 0.0)
    }
}

impl TryFrom<PotentialShape> for Potential {
    type Error = Error;

    fn try_from(shape: PotentialShape) -> Result<Self> {
        match &shape {
            PotentialShape::DeltaShell { strength, radius } => {
                if !(strength.is_finite() && *strength > 0.0) {
                    return Err(Error::InvalidPotential(format!(
                        "delta-shell strength must be finite and > 0 (repulsive), got {strength}"
                    )));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidPotential(format!(
                        "delta-shell radius must be finite and > 0, got {radius}"
                    )));
                }
            }
            PotentialShape::PiecewiseConstant { segments } => {
                if segments.is_empty() {
                    return Err(Error::InvalidPotential("no segments".into()));
                }
                if segments[0].r_lo != 0.0 {
                    return Err(Error::InvalidPotential(format!(
                        "segments must start at r = 0, first starts at {}",
                        segments[0].r_lo
                    )));
                }
                for (i, s) in segments.iter().enumerate() {
                    if !(s.r_lo.is_finite() && s.r_hi.is_finite() && s.r_hi > s.r_lo) {
                        return Err(Error::InvalidPotential(format!(
                            "segment {i} has an empty or non-finite interval [{}, {}]",
                            s.r_lo, s.r_hi
                        )));
                    }
                    if !s.v.is_finite() || s.v < 0.0 {
                        return Err(Error::InvalidPotential(format!(
                            "segment {i} value must be finite and >= 0, got {}",
                            s.v
                        )));
                    }
                    if i > 0 && segments[i - 1].r_hi != s.r_lo {
                        return Err(Error::InvalidPotential(format!(
                            "segments {} and {i} are not contiguous",
                            i - 1
                        )));
                    }
                }
            }
        }
        Ok(Self { shape })
    }
}

impl From<Potential> for PotentialShape {
    fn from(p: Potential) -> Self {
        p.shape
    }
}

/// `V(r)` excluding any delta-shell part.
pub fn evaluate_potential(p: &Potential, r: f64) -> f64 {
    match &p.shape {
        PotentialShape::DeltaShell { .. } => 0.0,
        PotentialShape::PiecewiseConstant { segments } => {
            if r > p.range() || r < 0.0 {
                return 0.0;
            }
            segments
                .iter()
                .find(|s| r >= s.r_lo && r < s.r_hi)
                .or(segments.last())
                .map_or(0.0, |s| s.v)
        }
    }
}

/// Unvalidated initial-state description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateShape {
    /// `√(2/R) sin(mπr/R)` on `[0, R]`.
    BoxMode { m: u32, radius: f64 },
    /// Linear interpolation of complex samples, values as `[re, im]`.
    Sampled { grid: Vec<f64>, values: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InitialStateShape", into = "InitialStateShape")]
pub struct InitialState {
    shape: InitialStateShape,
}

impl InitialState {
    pub fn box_mode(m: u32, radius: f64) -> Result<Self> {
        InitialStateShape::BoxMode { m, radius }.try_into()
    }

    pub fn sampled(grid: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        InitialStateShape::Sampled { grid, values: values.iter().map(|z| [z.re, z.im]).collect() }.try_into()
    }

    pub fn shape(&self) -> &InitialStateShape {
        &self.shape
    }

    /// Right end of the support.
    pub fn support_radius(&self) -> f64 {
        match &self.shape {
            InitialStateShape::BoxMode { radius, .. } => *radius,
            InitialStateShape::Sampled { grid, .. } => *grid.last().unwrap_or(&0.0),
        }
    }

    /// Interpolation nodes of a sampled state, empty for a box mode.
    pub fn breakpoints(&self) -> &[f64] {
        match &self.shape {
            InitialStateShape::Sampled { grid, .. } => grid,
            InitialStateShape::BoxMode { .. } => &[],
        }
    }

    /// Rescales a sampled state to unit norm. Box modes are returned as is.
    pub fn normalized(&self) -> Result<Self> {
        match &self.shape {
            InitialStateShape::BoxMode { .. } => Ok(self.clone()),
            InitialStateShape::Sampled { grid, values } => {
                let norm = state_norm(self);
                if norm <= 0.0 {
                    return Err(Error::InvalidState("cannot normalize a zero state".into()));
                }
                let s = norm.sqrt().recip();
                InitialStateShape::Sampled {
                    grid: grid.clone(),
                    values: values.iter().map(|v| [v[0] * s, v[1] * s]).collect(),
                }
                .try_into()
            }
        }
    }

    /// Fails unless the state has unit norm within `1e-10`.
    pub fn require_unit_norm(&self) -> Result<()> {
        let n = state_norm(self);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state norm is {n}, expected 1 within 1e-10")));
        }
        Ok(())
    }
}

impl TryFrom<InitialStateShape> for InitialState {
    type Error = Error;

    fn try_from(shape: InitialStateShape) -> Result<Self> {
        match &shape {
            InitialStateShape::BoxMode { m, radius } => {
                if *m == 0 {
                    return Err(Error::InvalidState("box-mode index m must be positive".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidState(format!("box-mode radius must be > 0, got {radius}")));
                }
            }
            InitialStateShape::Sampled { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(Error::InvalidState(format!(
                        "sampled state needs >= 2 points and matching lengths (grid {}, values {})",
                        grid.len(),
                        values.len()
                    )));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidState("sampled grid must be strictly ascending".into()));
                }
                if grid[0] < 0.0 {
                    return Err(Error::InvalidState("sampled grid must lie in [0, R]".into()));
                }
                if values.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidState("sampled values must be finite".into()));
                }
                let scale = values.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
                let edge = |v: &[f64; 2]| v[0].hypot(v[1]);
                let tol = 1e-8 * scale.max(1e-300);
                if grid[0] == 0.0 && edge(&values[0]) > tol {
                    return Err(Error::InvalidState("sampled state must vanish at r = 0".into()));
                }
                if edge(values.last().unwrap()) > tol {
                    return Err(Error::InvalidState("sampled state must vanish at r = R".into()));
                }
            }
        }
        Ok(Self { shape })
    }
}

impl From<InitialState> for InitialStateShape {
    fn from(s: InitialState) -> Self {
        s.shape
    }
}

/// `ψ(r, 0)`. Zero outside the support.
pub fn initial_wavefunction(s: &InitialState, r: f64) -> Complex64 {
    match &s.shape {
        InitialStateShape::BoxMode { m, radius } => {
            if !(0.0..=*radius).contains(&r) {
                return Complex64::new(0.0, 0.0);
            }
            let k = *m as f64 * std::f64::consts::PI / radius;
            Complex64::new((2.0 / radius).sqrt() * (k * r).sin(), 0.0)
        }
        InitialStateShape::Sampled { grid, values } => {
            if r < grid[0] || r > *grid.last().unwrap() {
                return Complex64::new(0.0, 0.0);
            }
            let i = grid.partition_point(|&x| x <= r).clamp(1, grid.len() - 1);
            let (x0, x1) = (grid[i - 1], grid[i]);
            let (v0, v1) = (values[i - 1], values[i]);
            let s = (r - x0) / (x1 - x0);
            Complex64::new(v0[0] + s * (v1[0] - v0[0]), v0[1] + s * (v1[1] - v0[1]))
        }
    }
}

/// `∫₀ᴿ |ψ|² dr`: exactly 1 for box modes, the exact integral of the
/// piecewise-linear interpolant for sampled states.
pub fn state_norm(s: &InitialState) -> f64 {
    match &s.shape {
        InitialStateShape::BoxMode { .. } => 1.0,
        InitialStateShape::Sampled { grid, values } => {
            let mut sum = crate::numerics::NeumaierSum::default();
            for (x, v) in grid.windows(2).zip(values.windows(2)) {
                let h = x[1] - x[0];
                let a = Complex64::new(v[0][0], v[0][1]);
                let b = Complex64::new(v[1][0], v[1][1]);
                sum.add(h * (a.norm_sqr() + b.norm_sqr() + (a * b.conj()).re) / 3.0);
            }
            sum.value()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn potential_lookup() {
        let d = Potential::delta_shell(6.0, 1.0).unwrap();
        assert_eq!(evaluate_potential(&d, 0.5), 0.0);
        assert_eq!(d.delta_jump(), 6.0);
        let p = Potential::piecewise_constant(vec![
            Segment { r_lo: 0.0, r_hi: 0.8, v: 0.0 },
            Segment { r_lo: 0.8, r_hi: 1.0, v: 10.0 },
        ])
        .unwrap();
        assert_eq!(evaluate_potential(&p, 0.9), 10.0);
        assert_eq!(evaluate_potential(&p, 1.0), 10.0);
        assert_eq!(evaluate_potential(&p, 2.0), 0.0);
        assert_eq!(evaluate_potential(&d, 2.0), 0.0);
        assert_eq!(p.delta_jump(), 0.0);
    }

    #[test]
    fn rejects_invalid_potentials() {
        assert!(matches!(Potential::delta_shell(-1.0, 1.0), Err(Error::InvalidPotential(_))));
        assert!(Potential::delta_shell(0.0, 1.0).is_err());
        assert!(Potential::delta_shell(1.0, f64::NAN).is_err());
        let gap = vec![Segment { r_lo: 0.0, r_hi: 0.5, v: 0.0 }, Segment { r_lo: 0.6, r_hi: 1.0, v: 1.0 }];
        assert!(Potential::piecewise_constant(gap).is_err());
        let late = vec![Segment { r_lo: 0.1, r_hi: 1.0, v: 0.0 }];
        assert!(Potential::piecewise_constant(late).is_err());
        let attractive = vec![Segment { r_lo: 0.0, r_hi: 1.0, v: -2.0 }];
        assert!(Potential::piecewise_constant(attractive).is_err());
    }

    #[test]
    fn box_mode_values() {
        let s1 = InitialState::box_mode(1, 1.0).unwrap();
        assert!((initial_wavefunction(&s1, 0.5).re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(initial_wavefunction(&s1, 1.5), Complex64::new(0.0, 0.0));
        let s2 = InitialState::box_mode(2, 1.0).unwrap();
        assert!(initial_wavefunction(&s2, 0.5).norm() < 1e-15);
        assert_eq!(state_norm(&InitialState::box_mode(3, 1.0).unwrap()), 1.0);
    }

    #[test]
    fn sampled_states() {
        let grid: Vec<f64> = (0..2001).map(|i| i as f64 / 2000.0).collect();
        let values: Vec<Complex64> = grid
            .iter()
            .map(|&r| Complex64::new(2f64.sqrt() * (PI * r).sin(), 0.0))
            .collect();
        let s = InitialState::sampled(grid.clone(), values).unwrap();
        assert!((state_norm(&s) - 1.0).abs() < 1e-6);
        assert!((initial_wavefunction(&s, 0.5).re - 2f64.sqrt()).abs() < 1e-6);
        let n = s.normalized().unwrap();
        assert!((state_norm(&n) - 1.0).abs() < 1e-14);
        n.require_unit_norm().unwrap();

        let zero = InitialState::sampled(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()]).unwrap();
        assert_eq!(state_norm(&zero), 0.0);
        assert!(zero.normalized().is_err());

        let bad = InitialState::sampled(vec![0.0, 0.5, 0.4], vec![Complex64::new(0.0, 0.0); 3]);
        assert!(matches!(bad, Err(Error::InvalidState(_))));
    }

    #[test]
    fn box_modes_are_orthonormal() {
        let rule = crate::numerics::GaussLegendre::standard();
        for m in 1..=6u32 {
            for mp in 1..=6u32 {
                let a = InitialState::box_mode(m, 1.0).unwrap();
                let b = InitialState::box_mode(mp, 1.0).unwrap();
                let v = rule.integrate_panels(0.0, 1.0, 8, |r| {
                    initial_wavefunction(&a, r) * initial_wavefunction(&b, r)
                });
                let expected = if m == mp { 1.0 } else { 0.0 };
                assert!((v.re - expected).abs() < 1e-10, "m={m} m'={mp} -> {v}");
            }
        }
    }

    #[test]
    fn config_round_trip_validates() {
        let json = r#"{"type":"delta_shell","strength":-6,"radius":1}"#;
        let err = serde_json::from_str::<Potential>(json).unwrap_err().to_string();
        assert!(err.contains("strength"), "{err}");
        let json = r#"{"type":"delta_shell","strength":6,"radius":1,"extra":3}"#;
        assert!(serde_json::from_str::<Potential>(json).is_err());
        let p: Potential = serde_json::from_str(r#"{"type":"delta_shell","strength":6,"radius":1}"#).unwrap();
        assert_eq!(p.range(), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn finite_range(r in (1.0f64 + 1e-12)..=10.0, lambda in 0.1f64..100.0, v in 0.0f64..50.0) {
                let d = Potential::delta_shell(lambda, 1.0).unwrap();
                let p = Potential::piecewise_constant(vec![
                    Segment { r_lo: 0.0, r_hi: 0.3, v },
                    Segment { r_lo: 0.3, r_hi: 1.0, v: 2.0 * v },
                ]).unwrap();
                prop_assert_eq!(evaluate_potential(&d, r), 0.0);
                prop_assert_eq!(evaluate_potential(&p, r), 0.0);
            }
        }
    }
}
