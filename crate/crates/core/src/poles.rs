//! Outgoing-wave matching function and its complex zeros.
//!
//! The regular solution (`u(0) = 0`, `u'(0) = 1`) is propagated across the
//! constant pieces with the entire functions `cos(q h)` and `sin(q h)/q` of
//! `q² = k² − V`, so nothing depends on the branch of `q`. The matching
//! function is `J(k) = u'(R⁺) − i k u(R)`; its zeros are the resonance poles.
//!
//! Zeros are located by counting the phase winding of `J` around rectangles
//! in the fourth quadrant, bisecting until every rectangle holds exactly one
//! zero, and polishing each one by Newton's method.

use crate::error::{Error, Result};
use crate::model::{Potential, Segment};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `cos(√x h)`, `sin(√x h)/√x`, `−√x sin(√x h)` and their `x`-derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SegmentFns {
    pub c: Complex64,
    pub s: Complex64,
    pub ms: Complex64,
    pub dc: Complex64,
    pub ds: Complex64,
    pub dms: Complex64,
}

pub(crate) fn segment_fns(x: Complex64, h: f64) -> SegmentFns {
    let xh2 = x * h * h;
    let (c, s, ds);
    if xh2.norm() < 1.0 {
        // Taylor series in −x h²; 20 terms is far below rounding here.
        let mut cs = Complex64::new(0.0, 0.0);
        let mut ss = Complex64::new(0.0, 0.0);
        let mut dss = Complex64::new(0.0, 0.0);
        let mut prev = Complex64::new(0.0, 0.0); // (−x h²)^(m−1)
        let mut pw = Complex64::new(1.0, 0.0); // (−x h²)^m
        let mut fact_even = 1.0; // (2m)!
        for m in 0..20usize {
            let fact_odd = fact_even * (2 * m + 1) as f64;
            cs += pw / fact_even;
            ss += pw / fact_odd;
            dss -= m as f64 * prev / fact_odd;
            prev = pw;
            pw *= -xh2;
            fact_even = fact_odd * (2 * m + 2) as f64;
        }
        c = cs;
        s = ss * h;
        ds = dss * h * h * h;
    } else {
        let q = x.sqrt();
        let qh = q * h;
        c = qh.cos();
        s = qh.sin() / q;
        ds = (h * c - s) / (2.0 * x);
    }
    let dc = -0.5 * h * s;
    SegmentFns { c, s, ms: -x * s, dc, ds, dms: -s - x * ds }
}

/// Values of the regular solution at the start of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStart {
    pub segment: Segment,
    /// `k² − V` on the segment.
    pub x: Complex64,
    pub u: Complex64,
    pub du: Complex64,
}

/// The regular solution at a given `k`, with `∂/∂k` of its end values.
#[derive(Debug, Clone)]
pub struct RegularSolution {
    pub k: Complex64,
    pub starts: Vec<SegmentStart>,
    pub u_r: Complex64,
    /// `u'(R⁻)`.
    pub du_r: Complex64,
    pub u_r_dk: Complex64,
    pub du_r_dk: Complex64,
    pub jump: f64,
}

impl RegularSolution {
    pub fn new(p: &Potential, k: Complex64) -> Self {
        let mut u = Complex64::new(0.0, 0.0);
        let mut du = Complex64::new(1.0, 0.0);
        let mut u_k = Complex64::new(0.0, 0.0);
        let mut du_k = Complex64::new(0.0, 0.0);
        let k2 = k * k;
        let mut starts = Vec::new();
        for seg in p.segments() {
            let x = k2 - seg.v;
            starts.push(SegmentStart { segment: seg, x, u, du });
            let f = segment_fns(x, seg.r_hi - seg.r_lo);
            let two_k = 2.0 * k;
            let nu = f.c * u + f.s * du;
            let ndu = f.ms * u + f.c * du;
            let nu_k = f.c * u_k + f.s * du_k + two_k * (f.dc * u + f.ds * du);
            let ndu_k = f.ms * u_k + f.c * du_k + two_k * (f.dms * u + f.dc * du);
            u = nu;
            du = ndu;
            u_k = nu_k;
            du_k = ndu_k;
        }
        Self { k, starts, u_r: u, du_r: du, u_r_dk: u_k, du_r_dk: du_k, jump: p.delta_jump() }
    }

    /// `u'(R⁺)` after the delta-shell jump.
    pub fn du_r_outside(&self) -> Complex64 {
        self.du_r + self.jump * self.u_r
    }

    /// `J(k)` and `dJ/dk`.
    pub fn matching(&self) -> (Complex64, Complex64) {
        let i = Complex64::i();
        let j = self.du_r_outside() - i * self.k * self.u_r;
        let dj = self.du_r_dk + self.jump * self.u_r_dk - i * self.u_r - i * self.k * self.u_r_dk;
        (j, dj)
    }

    /// `∫₀ᴿ u² dr` from the `k`-derivative of the Wronskian at `R⁻`.
    pub fn square_integral(&self) -> Complex64 {
        (self.du_r * self.u_r_dk - self.u_r * self.du_r_dk) / (2.0 * self.k)
    }

    /// `(u(r), u'(r))` for `0 ≤ r ≤ R`.
    pub fn eval(&self, r: f64) -> (Complex64, Complex64) {
        let idx = self
            .starts
            .iter()
            .rposition(|s| r >= s.segment.r_lo)
            .unwrap_or(0);
        let s = &self.starts[idx];
        let h = (r - s.segment.r_lo).clamp(0.0, s.segment.r_hi - s.segment.r_lo);
        let f = segment_fns(s.x, h);
        (f.c * s.u + f.s * s.du, f.ms * s.u + f.c * s.du)
    }
}

/// `J(k)` and `dJ/dk` for the potential `p`.
pub fn matching_function(p: &Potential, k: Complex64) -> Result<(Complex64, Complex64)> {
    if k == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroWavenumber);
    }
    Ok(RegularSolution::new(p, k).matching())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonancePole {
    /// Nonzero index; `n ≥ 1` in the fourth quadrant, `n ≤ −1` mirrors.
    pub n: i64,
    pub k: Complex64,
    /// `|J(k)|` relative to the largest `|J|` on the enclosing rectangle.
    pub residual: f64,
}

impl ResonancePole {
    /// Decay width `Γ = −2 Im(k²)`.
    pub fn width(&self) -> f64 {
        -2.0 * (self.k * self.k).im
    }
}

/// Maps pole `n` to pole `−n`: `k → −conj(k)`. The matching eigenfunction is
/// `u₋ₙ(r) = conj(uₙ(r))`.
pub fn mirror_state_rule(pole: &ResonancePole) -> ResonancePole {
    ResonancePole { n: -pole.n, k: -pole.k.conj(), residual: pole.residual }
}

/// Fourth-quadrant rectangle `(0, re_max] × [im_min, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchWindow {
    pub re_max: f64,
    pub im_min: f64,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    re0: f64,
    re1: f64,
    im0: f64,
    im1: f64,
}

impl Rect {
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re0, self.im0),
            Complex64::new(self.re1, self.im0),
            Complex64::new(self.re1, self.im1),
            Complex64::new(self.re0, self.im1),
        ]
    }

    fn contains(&self, k: Complex64) -> bool {
        let mr = 1e-12 * (self.re1 - self.re0).max(1.0);
        let mi = 1e-12 * (self.im1 - self.im0).max(1.0);
        k.re >= self.re0 - mr && k.re <= self.re1 + mr && k.im >= self.im0 - mi && k.im <= self.im1 + mi
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    fn split(&self, frac: f64) -> (Rect, Rect) {
        if self.re1 - self.re0 >= self.im1 - self.im0 {
            let m = self.re0 + frac * (self.re1 - self.re0);
            (Rect { re1: m, ..*self }, Rect { re0: m, ..*self })
        } else {
            let m = self.im0 + frac * (self.im1 - self.im0);
            (Rect { im1: m, ..*self }, Rect { im0: m, ..*self })
        }
    }

    fn size(&self) -> f64 {
        (self.re1 - self.re0).max(self.im1 - self.im0)
    }
}

#[derive(Debug)]
enum WindingError {
    /// A zero sits (numerically) on the contour.
    EdgeTooClose,
    Fatal(Error),
}

struct Winding {
    count: i64,
    max_abs: f64,
}

struct Locator<'a> {
    potential: &'a Potential,
    base_step: f64,
}

const CUT_FRACTIONS: [f64; 6] = [0.5, 0.4637, 0.5419, 0.3821, 0.6123, 0.2917];

impl Locator<'_> {
    fn j(&self, k: Complex64) -> Complex64 {
        RegularSolution::new(self.potential, k).matching().0
    }

    fn winding(&self, rect: &Rect) -> Result<Winding, WindingError> {
        let c = rect.corners();
        let mut total = 0.0;
        let mut max_abs: f64 = 0.0;
        let mut min_abs = f64::INFINITY;
        for e in 0..4 {
            let (a, b) = (c[e], c[(e + 1) % 4]);
            let pieces = ((b - a).norm() / self.base_step).ceil().max(1.0) as usize;
            let mut za = a;
            let mut fa = self.j(za);
            for p in 1..=pieces {
                let zb = if p == pieces { b } else { a + (b - a) * (p as f64 / pieces as f64) };
                let fb = self.j(zb);
                total += self.phase_change(za, fa, zb, fb, 0, &mut max_abs, &mut min_abs)?;
                za = zb;
                fa = fb;
            }
            max_abs = max_abs.max(fa.norm());
        }
        if !(min_abs > 1e-13 * max_abs) {
            return Err(WindingError::EdgeTooClose);
        }
        let turns = total / (2.0 * PI);
        let count = turns.round();
        if (turns - count).abs() > 0.05 {
            return Err(WindingError::Fatal(Error::WindingMismatch(format!(
                "non-integer winding {turns:.4} around [{}, {}] x [{}, {}]",
                rect.re0, rect.re1, rect.im0, rect.im1
            ))));
        }
        Ok(Winding { count: count as i64, max_abs })
    }

    #[allow(clippy::too_many_arguments)]
    fn phase_change(
        &self,
        za: Complex64,
        fa: Complex64,
        zb: Complex64,
        fb: Complex64,
        depth: u32,
        max_abs: &mut f64,
        min_abs: &mut f64,
    ) -> Result<f64, WindingError> {
        *max_abs = max_abs.max(fa.norm());
        *min_abs = min_abs.min(fa.norm()).min(fb.norm());
        if fa.norm() == 0.0 || fb.norm() == 0.0 {
            return Err(WindingError::EdgeTooClose);
        }
        let d = (fb / fa).arg();
        if d.abs() <= PI / 4.0 {
            return Ok(d);
        }
        if depth > 48 {
            return Err(WindingError::EdgeTooClose);
        }
        let zm = 0.5 * (za + zb);
        let fm = self.j(zm);
        Ok(self.phase_change(za, fa, zm, fm, depth + 1, max_abs, min_abs)?
            + self.phase_change(zm, fm, zb, fb, depth + 1, max_abs, min_abs)?)
    }

    fn newton(&self, start: Complex64, tol: f64) -> Option<Complex64> {
        let mut k = start;
        for _ in 0..100 {
            let (j, dj) = RegularSolution::new(self.potential, k).matching();
            if dj.norm() == 0.0 || !dj.norm().is_finite() {
                return None;
            }
            let step = j / dj;
            k -= step;
            if !(k.re.is_finite() && k.im.is_finite()) {
                return None;
            }
            if step.norm() <= tol {
                return Some(k);
            }
        }
        None
    }

    /// Finds all zeros in `rect`, which is known to wind `count` times.
    fn isolate(&self, rect: Rect, w: Winding, tol: f64, out: &mut Vec<ResonancePole>) -> Result<()> {
        if w.count == 0 {
            return Ok(());
        }
        if w.count == 1 {
            if let Some(k) = self.newton(rect.center(), tol) {
                if rect.contains(k) {
                    let residual = self.j(k).norm() / w.max_abs;
                    out.push(ResonancePole { n: 0, k, residual });
                    return Ok(());
                }
            }
            if rect.size() < 1e3 * tol {
                return Err(Error::WindingMismatch(format!(
                    "Newton failed to converge inside a single-zero rectangle near {}",
                    rect.center()
                )));
            }
        }
        if rect.size() < 1e-9 {
            return Err(Error::WindingMismatch(format!(
                "{} zeros could not be separated near {} (multiple zero?)",
                w.count,
                rect.center()
            )));
        }
        for frac in CUT_FRACTIONS {
            let (a, b) = rect.split(frac);
            let wa = match self.winding(&a) {
                Ok(w) => w,
                Err(WindingError::EdgeTooClose) => continue,
                Err(WindingError::Fatal(e)) => return Err(e),
            };
            let wb = match self.winding(&b) {
                Ok(w) => w,
                Err(WindingError::EdgeTooClose) => continue,
                Err(WindingError::Fatal(e)) => return Err(e),
            };
            if wa.count + wb.count != w.count || wa.count < 0 || wb.count < 0 {
                return Err(Error::WindingMismatch(format!(
                    "sub-rectangle counts {} + {} != {}",
                    wa.count, wb.count, w.count
                )));
            }
            self.isolate(a, wa, tol, out)?;
            self.isolate(b, wb, tol, out)?;
            return Ok(());
        }
        Err(Error::WindingMismatch(format!("could not cut rectangle near {} away from zeros", rect.center())))
    }
}

/// Resonance poles inside a fourth-quadrant window, with mirrors implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    potential: Potential,
    window: SearchWindow,
    tol: f64,
    /// Fourth-quadrant poles `n = 1..N`, ascending in `Re k`.
    poles: Vec<ResonancePole>,
    winding_count: usize,
}

impl PoleSet {
    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn window(&self) -> SearchWindow {
        self.window
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Number of fourth-quadrant poles `N`.
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Total zero count from the winding audit of the whole window.
    pub fn winding_count(&self) -> usize {
        self.winding_count
    }

    pub fn positive(&self) -> &[ResonancePole] {
        &self.poles
    }

    /// Pole with index `n`, `1 ≤ |n| ≤ N`.
    pub fn pole(&self, n: i64) -> Option<ResonancePole> {
        if n == 0 {
            return None;
        }
        let p = *self.poles.get(n.unsigned_abs() as usize - 1)?;
        Some(if n > 0 { p } else { mirror_state_rule(&p) })
    }

    /// Poles with `|n| ≤ n_max`, ordered `1, −1, 2, −2, …`.
    pub fn symmetric(&self, n_max: usize) -> Vec<ResonancePole> {
        self.poles
            .iter()
            .take(n_max)
            .flat_map(|p| [*p, mirror_state_rule(p)])
            .collect()
    }
}

/// Locates every zero of `J` in `(0, re_max] × [im_min, 0]`.
pub fn locate_poles(p: &Potential, window: SearchWindow, tol: f64) -> Result<PoleSet> {
    if !(window.re_max > 0.0 && window.re_max.is_finite() && window.im_min < 0.0 && window.im_min.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "search window must satisfy re_max > 0 and im_min < 0, got {window:?}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let range = p.range();
    let loc = Locator { potential: p, base_step: 0.05 / range.max(1e-3) };

    // Zeros on or at the real and imaginary axes are rejected outright.
    check_axes(&loc, window, tol)?;

    let re_lo = (1e-6 * window.re_max).min(tol.max(1e-9));
    let strip_width = PI / range;
    let n_strips = ((window.re_max - re_lo) / strip_width).ceil().max(1.0) as usize;
    let strips: Vec<Rect> = (0..n_strips)
        .map(|i| Rect {
            re0: re_lo + i as f64 * strip_width,
            re1: if i + 1 == n_strips { window.re_max } else { re_lo + (i + 1) as f64 * strip_width },
            im0: window.im_min,
            im1: 0.0,
        })
        .collect();

    let results: Vec<Result<(i64, Vec<ResonancePole>)>> = strips
        .par_iter()
        .map(|strip| {
            let mut rect = *strip;
            // Strip edges are nudged if a zero lies on them.
            let mut attempt = 0;
            let w = loop {
                match loc.winding(&rect) {
                    Ok(w) => break w,
                    Err(WindingError::Fatal(e)) => return Err(e),
                    Err(WindingError::EdgeTooClose) if attempt < 5 => {
                        attempt += 1;
                        rect.re1 += 1e-4 * strip_width * attempt as f64;
                        rect.im0 -= 1e-4 * attempt as f64;
                    }
                    Err(WindingError::EdgeTooClose) => {
                        return Err(Error::WindingMismatch(format!(
                            "zero on the boundary of strip [{}, {}]",
                            strip.re0, strip.re1
                        )))
                    }
                }
            };
            let count = w.count;
            let mut found = Vec::new();
            loc.isolate(rect, w, tol, &mut found)?;
            Ok((count, found))
        })
        .collect();

    let mut poles = Vec::new();
    let mut winding_total = 0i64;
    for r in results {
        let (count, found) = r?;
        winding_total += count;
        poles.extend(found);
    }
    // Nudged strip edges can capture the same zero twice.
    poles.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
    let before = poles.len();
    poles.dedup_by(|a, b| (a.k - b.k).norm() <= 1e3 * tol.max(1e-12 * b.k.norm()));
    winding_total -= (before - poles.len()) as i64;
    poles.retain(|q| q.k.re <= window.re_max && q.k.im >= window.im_min);

    for q in &poles {
        if q.k.im.abs() <= tol || q.k.re.abs() <= tol {
            return Err(Error::AxisZero { re: q.k.re, im: q.k.im });
        }
    }
    if winding_total < 0 || poles.len() != winding_total as usize {
        // Recount on the exact window when strips were nudged.
        let exact = Rect { re0: re_lo, re1: window.re_max, im0: window.im_min, im1: 0.0 };
        match loc.winding(&exact) {
            Ok(w) if w.count as usize == poles.len() => winding_total = w.count,
            _ => {
                return Err(Error::WindingMismatch(format!(
                    "{} polished roots but winding count {winding_total}",
                    poles.len()
                )))
            }
        }
    }
    for (i, q) in poles.iter_mut().enumerate() {
        q.n = i as i64 + 1;
    }
    Ok(PoleSet {
        potential: p.clone(),
        window,
        tol,
        poles,
        winding_count: winding_total as usize,
    })
}

fn check_axes(loc: &Locator<'_>, window: SearchWindow, tol: f64) -> Result<()> {
    // A zero within tol of an axis shows up as |J| collapsing relative to its
    // neighbourhood along that axis.
    let n_re = ((window.re_max / loc.base_step).ceil() as usize).max(8);
    let n_im = ((-window.im_min / loc.base_step).ceil() as usize).max(8);
    let probe = |pts: Vec<Complex64>| -> Result<()> {
        let vals: Vec<f64> = pts.iter().map(|&k| loc.j(k).norm()).collect();
        let scale = vals.iter().cloned().fold(0.0, f64::max);
        for (k, v) in pts.iter().zip(&vals) {
            if *v <= 1e-10 * scale {
                if let Some(root) = loc.newton(*k, tol) {
                    if root.im.abs() <= tol || root.re.abs() <= tol {
                        return Err(Error::AxisZero { re: root.re, im: root.im });
                    }
                }
            }
        }
        Ok(())
    };
    probe((1..=n_re).map(|i| Complex64::new(window.re_max * i as f64 / n_re as f64, 0.0)).collect())?;
    probe((0..n_im).map(|i| Complex64::new(0.0, window.im_min * (i as f64 + 0.5) / n_im as f64)).collect())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Segment;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn delta(lambda: f64) -> Potential {
        Potential::delta_shell(lambda, 1.0).unwrap()
    }

    /// k cos k + (λ − ik) sin k, the delta-shell condition worked out by hand.
    fn delta_condition(lambda: f64, k: Complex64) -> Complex64 {
        k * k.cos() + (lambda - Complex64::i() * k) * k.sin()
    }

    #[test]
    fn free_matching_function_is_outgoing_exponential() {
        let p = Potential::free(1.5).unwrap();
        for k in [c(1.0, -0.3), c(7.0, 0.2), c(-2.0, -1.0)] {
            let (j, dj) = matching_function(&p, k).unwrap();
            let e = (-Complex64::i() * k * 1.5).exp();
            assert!((j - e).norm() < 1e-13 * e.norm());
            assert!((dj - (-Complex64::i() * 1.5) * e).norm() < 1e-12 * e.norm());
        }
        assert_eq!(matching_function(&p, c(0.0, 0.0)), Err(Error::ZeroWavenumber));
    }

    #[test]
    fn delta_shell_matches_closed_condition() {
        for k in [c(2.7, -0.15), c(10.0, -1.2), c(0.3, -0.01)] {
            let (j, _) = matching_function(&delta(6.0), k).unwrap();
            assert!((j * k - delta_condition(6.0, k)).norm() < 1e-12 * delta_condition(6.0, k).norm().max(1.0));
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = Potential::piecewise_constant(vec![
            Segment { r_lo: 0.0, r_hi: 0.8, v: 0.0 },
            Segment { r_lo: 0.8, r_hi: 1.0, v: 10.0 },
        ])
        .unwrap();
        for k in [c(2.0, -0.4), c(3.1, -0.01), c(0.05, -0.02), c(11.0, -2.0)] {
            let (_, dj) = matching_function(&p, k).unwrap();
            let h = 1e-6 * k.norm();
            let fd = (matching_function(&p, k + h).unwrap().0 - matching_function(&p, k - h).unwrap().0) / (2.0 * h);
            assert!((dj - fd).norm() < 1e-7 * dj.norm().max(1.0), "{k}: {dj} vs {fd}");
        }
    }

    #[test]
    fn schwarz_reflection() {
        let p = delta(6.0);
        for k in [c(1.3, -0.7), c(5.0, 0.4), c(0.2, -3.0)] {
            let (a, _) = matching_function(&p, -k.conj()).unwrap();
            let (b, _) = matching_function(&p, k).unwrap();
            assert!((a - b.conj()).norm() < 1e-13 * b.norm());
        }
    }

    #[test]
    fn real_axis_scan_has_minima_below_multiples_of_pi() {
        let p = delta(6.0);
        let ks: Vec<f64> = (1..20000).map(|i| i as f64 * 0.001).collect();
        let js: Vec<f64> = ks.iter().map(|&k| matching_function(&p, c(k, 0.0)).unwrap().0.norm()).collect();
        let minima: Vec<f64> = (1..js.len() - 1)
            .filter(|&i| js[i] < js[i - 1] && js[i] < js[i + 1])
            .map(|i| ks[i])
            .collect();
        assert!(minima.len() >= 5);
        for (n, m) in minima.iter().take(5).enumerate() {
            let target = (n + 1) as f64 * PI;
            assert!(*m < target && *m > target - 1.0, "minimum {m} vs {target}");
        }
    }

    #[test]
    fn free_potential_has_no_poles() {
        let set = locate_poles(&Potential::free(1.0).unwrap(), SearchWindow { re_max: 20.0, im_min: -4.0 }, 1e-12).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.winding_count(), 0);
    }

    #[test]
    fn impenetrable_limit() {
        let set = locate_poles(&delta(1000.0), SearchWindow { re_max: 10.0, im_min: -1.0 }, 1e-12).unwrap();
        assert_eq!(set.len(), 3);
        for n in 1..=3 {
            let k = set.pole(n).unwrap().k;
            assert!((k.re - n as f64 * PI).abs() < 0.05);
            assert!(k.im < 0.0);
        }
    }

    /// Dense-grid minimum of |J| followed by Newton, independent of the
    /// winding machinery.
    fn brute_force_first_pole(lambda: f64) -> Complex64 {
        let mut best = (f64::INFINITY, c(0.0, 0.0));
        for i in 1..=400 {
            for j in 1..=200 {
                let k = c(i as f64 * 0.01, -(j as f64) * 0.005);
                let v = delta_condition(lambda, k).norm() / k.norm();
                if v < best.0 {
                    best = (v, k);
                }
            }
        }
        let mut k = best.1;
        for _ in 0..50 {
            let h = 1e-7;
            let d = (delta_condition(lambda, k + h) - delta_condition(lambda, k - h)) / (2.0 * h);
            k -= delta_condition(lambda, k) / d;
        }
        k
    }

    #[test]
    fn reference_first_pole() {
        let set = locate_poles(&delta(6.0), SearchWindow { re_max: 12.0, im_min: -3.0 }, 1e-13).unwrap();
        let k1 = set.pole(1).unwrap().k;
        assert!(k1.re > PI / 2.0 && k1.re < PI * 1.1 && k1.im < 0.0, "{k1}");
        let oracle = brute_force_first_pole(6.0);
        assert!((k1 - oracle).norm() < 1e-10, "{k1} vs {oracle}");
        for p in set.positive() {
            assert!(p.residual <= 1e-10, "{p:?}");
        }
    }

    #[test]
    fn mirror_rule() {
        let p = ResonancePole { n: 1, k: c(2.0, -0.5), residual: 0.0 };
        let m = mirror_state_rule(&p);
        assert_eq!(m.k, c(-2.0, -0.5));
        assert_eq!(m.n, -1);
        assert_eq!(mirror_state_rule(&m), p);
        let set = locate_poles(&delta(6.0), SearchWindow { re_max: 8.0, im_min: -3.0 }, 1e-13).unwrap();
        let k1 = set.pole(1).unwrap().k;
        let km = set.pole(-1).unwrap().k;
        let (ja, _) = matching_function(set.potential(), km).unwrap();
        let (jb, _) = matching_function(set.potential(), k1).unwrap();
        assert!((ja - jb.conj()).norm() < 1e-13);
        assert!(ja.norm() < 1e-11);
    }

    #[test]
    fn enlarging_window_keeps_poles() {
        let p = Potential::piecewise_constant(vec![
            Segment { r_lo: 0.0, r_hi: 0.8, v: 0.0 },
            Segment { r_lo: 0.8, r_hi: 1.0, v: 10.0 },
        ])
        .unwrap();
        let small = locate_poles(&p, SearchWindow { re_max: 15.0, im_min: -3.0 }, 1e-12).unwrap();
        let large = locate_poles(&p, SearchWindow { re_max: 25.0, im_min: -4.0 }, 1e-12).unwrap();
        assert!(!small.is_empty());
        for q in small.positive() {
            assert!(large.positive().iter().any(|r| (r.k - q.k).norm() <= 1e-12), "{q:?}");
        }
    }

    #[test]
    fn winding_audit_counts_reference_window() {
        let set = locate_poles(&delta(6.0), SearchWindow { re_max: 40.5 * PI, im_min: -4.0 }, 1e-12).unwrap();
        assert_eq!(set.len(), set.winding_count());
        assert!(set.len() >= 40);
        // Dense indices, ascending real parts, all fourth quadrant.
        for (i, q) in set.positive().iter().enumerate() {
            assert_eq!(q.n, i as i64 + 1);
            assert!(q.k.re > 0.0 && q.k.im < 0.0);
            assert!(q.residual <= 1e-10);
        }
        assert!(set.positive().windows(2).all(|w| w[0].k.re < w[1].k.re));
        assert_eq!(set.symmetric(2).iter().map(|p| p.n).collect::<Vec<_>>(), vec![1, -1, 2, -2]);
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(locate_poles(&delta(6.0), SearchWindow { re_max: -1.0, im_min: -1.0 }, 1e-12).is_err());
        assert!(locate_poles(&delta(6.0), SearchWindow { re_max: 1.0, im_min: 0.5 }, 1e-12).is_err());
    }
}
