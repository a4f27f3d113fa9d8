//! Reference evaluators that share no code path with the production
//! implementations they check. Everything here runs in double-double
//! (~32 significant digits) arithmetic.

use num_complex::Complex64;

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (s, e) = quick_two_sum(s, e + f);
        Dd { hi: s, lo: e }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from_f64(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from_f64(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CDd {
    re: Dd,
    im: Dd,
}

impl CDd {
    pub fn new(re: Dd, im: Dd) -> Self {
        CDd { re, im }
    }

    pub fn from_c64(z: Complex64) -> Self {
        CDd { re: Dd::from_f64(z.re), im: Dd::from_f64(z.im) }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(self, o: CDd) -> CDd {
        CDd { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn sub(self, o: CDd) -> CDd {
        CDd { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    pub fn mul(self, o: CDd) -> CDd {
        CDd {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn scale(self, s: Dd) -> CDd {
        CDd { re: self.re.mul(s), im: self.im.mul(s) }
    }

    pub fn div(self, o: CDd) -> CDd {
        let den = o.re.mul(o.re).add(o.im.mul(o.im));
        let num = self.mul(CDd { re: o.re, im: o.im.neg() });
        CDd { re: num.re.div(den), im: num.im.div(den) }
    }

    fn norm_f64(self) -> f64 {
        self.to_c64().norm()
    }
}

fn two_over_sqrt_pi() -> Dd {
    Dd::new(1.1283791670955126, 1.533545961316588e-17)
}

fn one_over_sqrt_pi() -> Dd {
    Dd::new(0.5641895835477563, 7.66772980658294e-18)
}

/// Power series `w(z) = Σ_n (iz)^n / Γ(n/2 + 1)` summed in double-double.
/// Reliable to ~1e-15 relative for `|z| ≲ 5.5` (cancellation grows as
/// `exp(|z|²)`).
pub fn faddeeva_series(z: Complex64) -> Complex64 {
    let zd = CDd::from_c64(z);
    let iz = CDd { re: zd.im.neg(), im: zd.re };
    let factor = iz.mul(iz);
    let mut even = CDd::from_c64(Complex64::new(1.0, 0.0));
    let mut odd = iz.scale(two_over_sqrt_pi());
    let mut sum = even.add(odd);
    let r2 = z.norm_sqr();
    let mut n = 0usize;
    loop {
        let two = Dd::from_f64(2.0);
        even = even.mul(factor).scale(two.div(Dd::from_f64((n + 2) as f64)));
        odd = odd.mul(factor).scale(two.div(Dd::from_f64((n + 3) as f64)));
        sum = sum.add(even).add(odd);
        n += 2;
        let small = even.norm_f64().max(odd.norm_f64()) < 1e-34 * sum.norm_f64().max(1e-300);
        if (n as f64 > 2.0 * r2 + 10.0 && small) || n > 4000 {
            break;
        }
    }
    sum.to_c64()
}

/// Laplace continued fraction `w(z) = (i/√π) / (z − ½/(z − 1/(z − (3/2)/…)))`
/// evaluated forward by the modified Lentz method in double-double.
/// Valid for `Im z > 0`; convergence slows as `z` approaches the real axis.
pub fn faddeeva_continued_fraction(z: Complex64) -> Option<Complex64> {
    assert!(z.im > 0.0, "continued fraction oracle needs Im z > 0");
    let zd = CDd::from_c64(z);
    let tiny = CDd::from_c64(Complex64::new(1e-300, 0.0));
    let mut f = zd;
    let mut c = f;
    let mut d = CDd::from_c64(Complex64::new(0.0, 0.0));
    for j in 1..200_000usize {
        let a = Dd::from_f64(-(j as f64) / 2.0);
        d = zd.add(d.scale(a));
        if d.norm_f64() == 0.0 {
            d = tiny;
        }
        c = zd.add(CDd { re: a, im: Dd::ZERO }.div(c));
        if c.norm_f64() == 0.0 {
            c = tiny;
        }
        d = CDd::from_c64(Complex64::new(1.0, 0.0)).div(d);
        let delta = c.mul(d);
        f = f.mul(delta);
        let dev = delta.sub(CDd::from_c64(Complex64::new(1.0, 0.0))).norm_f64();
        if dev < 1e-30 {
            let i_over = CDd { re: Dd::ZERO, im: one_over_sqrt_pi() };
            return Some(i_over.div(f).to_c64());
        }
    }
    None
}
