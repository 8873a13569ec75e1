//! Bessel and Hankel functions of orders 0 and 1 for complex argument.
//!
//! The scattering matrices need these along analytic continuations into the
//! lower half plane, at small arguments (kernel diagonal limits), and near
//! quadrature nodes where the usual 1e-10 accuracy of naive summation is not
//! enough. Small arguments (|z| <= 16) use Maclaurin series accumulated in
//! double-double arithmetic to absorb the cancellation; large arguments use
//! the Poincare asymptotic expansions of `H^(1)` and `H^(2)` truncated at the
//! smallest term.
//!
//! All functions use the principal branch and reject arguments within 0.01
//! radians of the negative real axis.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
// Double-double tail of the constant above.
const EULER_GAMMA_LO: f64 = -4.942_915_152_430_645e-18;

const PI_DD: Dd = Dd {
    hi: 3.141592653589793,
    lo: 1.2246467991473532e-16,
};
const PI_2_DD: Dd = Dd {
    hi: 1.5707963267948966,
    lo: 6.123233995736766e-17,
};
const PI_4_DD: Dd = Dd {
    hi: 0.7853981633974483,
    lo: 3.061616997868383e-17,
};
const LN2_DD: Dd = Dd {
    hi: 0.6931471805599453,
    lo: 2.3190468138462996e-17,
};

const CROSSOVER: f64 = 16.0;
const BRANCH_MARGIN: f64 = 0.01;

// ---------------------------------------------------------------------------
// Double-double scalar and complex arithmetic (just the operations the series
// loops need).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn value(self) -> f64 {
        self.hi + self.lo
    }

    // Accurate (Knuth) addition: the sloppy variant loses half the digits
    // when the operands cancel, which is the normal case in these series.
    #[inline]
    fn add(self, other: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, other.hi);
        let (t1, t2) = two_sum(self.lo, other.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }

    #[inline]
    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let (hi, lo) = quick_two_sum(p, e + self.hi * other.lo + self.lo * other.hi);
        Dd { hi, lo }
    }

    #[inline]
    fn scale(self, s: f64) -> Dd {
        let (p, e) = two_prod(self.hi, s);
        let (hi, lo) = quick_two_sum(p, e + self.lo * s);
        Dd { hi, lo }
    }

    /// Division by an f64 with one Newton correction step.
    #[inline]
    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = (self.hi - p) - e + self.lo;
        let q2 = r / d;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    #[inline]
    fn div_dd(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r1 = self.add(other.mul(Dd::from(q1)).neg());
        let q2 = r1.hi / other.hi;
        let r2 = r1.add(other.mul(Dd::from(q2)).neg());
        let q3 = r2.hi / other.hi;
        let (s1, s2) = quick_two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s1, s2 + q3);
        Dd { hi, lo }
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

/// Natural log of a positive double-double via `2 atanh((m-1)/(m+1))`
/// after a power-of-two range reduction to `m` near 1.
fn ln_dd(x: Dd) -> Dd {
    debug_assert!(x.hi > 0.0);
    let mut e = x.hi.log2().floor() as i32;
    let mut m = x.scale(2f64.powi(-e)); // power-of-two scale is exact
    const SQRT2: f64 = std::f64::consts::SQRT_2;
    if m.hi >= SQRT2 {
        m = m.scale(0.5);
        e += 1;
    }
    let t = m.add(Dd::from(-1.0)).div_dd(m.add(Dd::from(1.0)));
    let t2 = t.mul(t);
    let mut term = Dd::from(1.0);
    let mut sum = term;
    for k in 1..60 {
        term = term.mul(t2);
        let contrib = term.div_f64(2.0 * k as f64 + 1.0);
        sum = sum.add(contrib);
        if contrib.hi.abs() < 1e-35 {
            break;
        }
    }
    t.mul(sum).scale(2.0).add(LN2_DD.scale(e as f64))
}

/// atan for |t| <= 1 (any sign), by the Maclaurin series after folding
/// |t| > tan(pi/8) through the half-angle identity.
fn atan_dd(t: Dd) -> Dd {
    if t.hi < 0.0 {
        return atan_dd(t.neg()).neg();
    }
    const TAN_PI_8: f64 = 0.41421356237309503;
    if t.hi > TAN_PI_8 {
        let u = t.add(Dd::from(-1.0)).div_dd(t.add(Dd::from(1.0)));
        return PI_4_DD.add(atan_dd(u));
    }
    let t2 = t.mul(t);
    let mut pow = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for k in 1..80 {
        pow = pow.mul(t2).neg();
        let contrib = pow.div_f64(2.0 * k as f64 + 1.0);
        sum = sum.add(contrib);
        if contrib.hi.abs() < 1e-35 {
            break;
        }
    }
    t.mul(sum)
}

/// Full four-quadrant arctangent in double-double.
fn atan2_dd(y: Dd, x: Dd) -> Dd {
    if y.hi == 0.0 && y.lo == 0.0 {
        return if x.hi >= 0.0 { Dd::from(0.0) } else { PI_DD };
    }
    if y.hi.abs() <= x.hi.abs() {
        let a = atan_dd(y.div_dd(x));
        if x.hi >= 0.0 {
            a
        } else if y.hi >= 0.0 {
            a.add(PI_DD)
        } else {
            a.add(PI_DD.neg())
        }
    } else {
        let a = atan_dd(x.div_dd(y));
        let half = if y.hi >= 0.0 { PI_2_DD } else { PI_2_DD.neg() };
        half.add(a.neg())
    }
}

#[derive(Debug, Clone, Copy)]
struct Cdd {
    re: Dd,
    im: Dd,
}

impl Cdd {
    #[inline]
    fn zero() -> Self {
        Cdd {
            re: Dd::from(0.0),
            im: Dd::from(0.0),
        }
    }

    #[inline]
    fn from(z: Complex64) -> Self {
        Cdd {
            re: Dd::from(z.re),
            im: Dd::from(z.im),
        }
    }

    #[inline]
    fn value(self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    #[inline]
    fn add(self, other: Cdd) -> Cdd {
        Cdd {
            re: self.re.add(other.re),
            im: self.im.add(other.im),
        }
    }

    #[inline]
    fn mul(self, other: Cdd) -> Cdd {
        let rr = self.re.mul(other.re).add(self.im.mul(other.im).neg());
        let ii = self.re.mul(other.im).add(self.im.mul(other.re));
        Cdd { re: rr, im: ii }
    }

    #[inline]
    fn scale(self, s: f64) -> Cdd {
        Cdd {
            re: self.re.scale(s),
            im: self.im.scale(s),
        }
    }

    #[inline]
    fn div_f64(self, d: f64) -> Cdd {
        Cdd {
            re: self.re.div_f64(d),
            im: self.im.div_f64(d),
        }
    }

    #[inline]
    fn mul_dd(self, s: Dd) -> Cdd {
        Cdd {
            re: self.re.mul(s),
            im: self.im.mul(s),
        }
    }

    #[inline]
    fn neg(self) -> Cdd {
        Cdd {
            re: self.re.neg(),
            im: self.im.neg(),
        }
    }

    #[inline]
    fn norm_estimate(self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }
}

// ---------------------------------------------------------------------------
// Public entry points.
// ---------------------------------------------------------------------------

fn check_arg(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NonFinite {
            context: "special function argument",
        });
    }
    if z.norm() == 0.0 {
        return Err(Error::InvalidArgument(
            "Bessel evaluation at z = 0".into(),
        ));
    }
    let arg = z.im.atan2(z.re);
    if arg.abs() > std::f64::consts::PI - BRANCH_MARGIN {
        return Err(Error::BranchCut { z });
    }
    Ok(())
}

/// `(J_0(z), J_1(z))` on the principal branch.
pub fn bessel_j01(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_arg(z)?;
    if z.norm() <= CROSSOVER {
        let s = series_jy(z);
        Ok((s.j0, s.j1))
    } else {
        let (h01, h11) = asymptotic_h(z, HankelKind::First);
        let (h02, h12) = asymptotic_h(z, HankelKind::Second);
        Ok(((h01 + h02) * 0.5, (h11 + h12) * 0.5))
    }
}

/// `(Y_0(z), Y_1(z))` on the principal branch.
pub fn bessel_y01(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_arg(z)?;
    if z.norm() <= CROSSOVER {
        let s = series_jy(z);
        Ok((s.y0, s.y1))
    } else {
        let (h01, h11) = asymptotic_h(z, HankelKind::First);
        let (h02, h12) = asymptotic_h(z, HankelKind::Second);
        let half_i = Complex64::new(0.0, -0.5);
        Ok(((h01 - h02) * half_i, (h11 - h12) * half_i))
    }
}

/// `(H^(1)_0(z), H^(1)_1(z))` on the principal branch.
pub fn hankel1_01(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_arg(z)?;
    if z.norm() <= CROSSOVER {
        let s = series_jy(z);
        Ok((s.h0, s.h1))
    } else {
        Ok(asymptotic_h(z, HankelKind::First))
    }
}

/// `(J_0, J_1, H^(1)_0, H^(1)_1)` at `z` in one evaluation; the kernel
/// assembly needs all four at every node pair, and the series computes them
/// together anyway.
pub fn bessel_all_01(z: Complex64) -> Result<(Complex64, Complex64, Complex64, Complex64)> {
    check_arg(z)?;
    if z.norm() <= CROSSOVER {
        let s = series_jy(z);
        Ok((s.j0, s.j1, s.h0, s.h1))
    } else {
        let (h01, h11) = asymptotic_h(z, HankelKind::First);
        let (h02, h12) = asymptotic_h(z, HankelKind::Second);
        Ok(((h01 + h02) * 0.5, (h11 + h12) * 0.5, h01, h11))
    }
}

/// `(J_1(z), H^(1)_1(z))` alone: the pair the double-layer kernel needs at
/// every node pair, at roughly half the cost of [`bessel_all_01`].
pub fn bessel_j1h1(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_arg(z)?;
    if z.norm() <= CROSSOVER {
        let s = series_jy_select(z, false, true);
        Ok((s.j1, s.h1))
    } else {
        let h11 = asymptotic_h_order(z, HankelKind::First, 1.0);
        let h12 = asymptotic_h_order(z, HankelKind::Second, 1.0);
        Ok(((h11 + h12) * 0.5, h11))
    }
}

/// `(J_0(z), H^(1)_0(z))` alone, for the wavenumber derivative of the
/// double-layer kernel.
pub fn bessel_j0h0(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_arg(z)?;
    if z.norm() <= CROSSOVER {
        let s = series_jy_select(z, true, false);
        Ok((s.j0, s.h0))
    } else {
        let h01 = asymptotic_h_order(z, HankelKind::First, 0.0);
        let h02 = asymptotic_h_order(z, HankelKind::Second, 0.0);
        Ok(((h01 + h02) * 0.5, h01))
    }
}

/// `H^(1)_n(z)` for `n = 0, ..., nmax` by upward recurrence
/// `H_{n+1} = (2n/z) H_n - H_{n-1}` (stable for the Hankel function).
pub fn hankel1_upward(z: Complex64, nmax: usize) -> Result<Vec<Complex64>> {
    let (h0, h1) = hankel1_01(z)?;
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(h0);
    if nmax >= 1 {
        out.push(h1);
    }
    for n in 1..nmax {
        let next = (2.0 * n as f64) / z * out[n] - out[n - 1];
        out.push(next);
    }
    Ok(out)
}

struct SeriesJy {
    j0: Complex64,
    j1: Complex64,
    y0: Complex64,
    y1: Complex64,
    h0: Complex64,
    h1: Complex64,
}

/// Maclaurin series for J and Y of orders 0 and 1 (DLMF 10.2.2, 10.8.1),
/// all four sums accumulated in one pass in double-double arithmetic.
fn series_jy(z: Complex64) -> SeriesJy {
    series_jy_select(z, true, true)
}

/// Same series restricted to the requested orders; the kernel assembly only
/// ever needs one order at a time, which halves the double-double work.
/// Fields of the skipped order are zero.
fn series_jy_select(z: Complex64, need0: bool, need1: bool) -> SeriesJy {
    // w = z^2/4 must itself carry double-double precision: its rounding
    // error is amplified by the full size of the cancelling terms.
    let zdd = Cdd::from(z);
    let w = zdd.mul(zdd).scale(0.25);

    // t_m = (-1)^m w^m / (m!)^2           (J0 terms)
    // u_m = (-1)^m w^m / (m! (m+1)!)      (J1 terms, before the z/2 factor)
    let gamma = Dd {
        hi: EULER_GAMMA,
        lo: EULER_GAMMA_LO,
    };
    let mut t = Cdd::from(Complex64::new(1.0, 0.0));
    let mut u = t;
    let mut s_j0 = t;
    let mut s_j1 = u;
    let mut s_y0 = Cdd::zero(); // sum of -H_m t_m, m >= 1
    // s_y1 accumulates (H_m + H_{m+1} - 2 gamma) u_m, starting at m = 0.
    let mut s_y1 = u.mul_dd(gamma.scale(-2.0).add(Dd::from(1.0)));
    let mut harmonic = Dd::from(0.0);

    let factor = w.scale(-1.0);
    for m in 1..160 {
        let mf = m as f64;
        if need0 {
            t = t.mul(factor).div_f64(mf * mf);
            // u_m = t_m / (m + 1), avoiding a second series multiplication.
            u = t.div_f64(mf + 1.0);
        } else {
            u = u.mul(factor).div_f64(mf * (mf + 1.0));
        }
        harmonic = harmonic.add(Dd::from(1.0).div_f64(mf));
        if need0 {
            s_j0 = s_j0.add(t);
            s_y0 = s_y0.add(t.mul_dd(harmonic).neg());
        }
        if need1 {
            let harmonic_next = harmonic.add(Dd::from(1.0).div_f64(mf + 1.0));
            s_j1 = s_j1.add(u);
            s_y1 = s_y1.add(u.mul_dd(harmonic.add(harmonic_next).add(gamma.scale(-2.0))));
        }
        let lead = if need0 { t } else { u };
        if lead.norm_estimate() < 1e-36 * (1.0 + s_j0.norm_estimate() + s_j1.norm_estimate()) {
            break;
        }
    }

    // Assemble Y and H in double-double as well: for Im z well above the
    // real axis H^(1) = J + iY is recessive and loses up to 2|Im z|/ln 10
    // digits to cancellation, so the complex log must carry dd precision.
    let j0 = s_j0;
    let j1 = zdd.scale(0.5).mul(s_j1);
    let (log_half_z, inv_z) = if z.im > 0.0 {
        // H^(1) = J + iY is recessive above the real axis, so the log must
        // carry full double-double precision through the cancellation.
        let z_abs2 = zdd.re.mul(zdd.re).add(zdd.im.mul(zdd.im));
        let log_half_z = Cdd {
            re: ln_dd(z_abs2.scale(0.25)).scale(0.5),
            im: atan2_dd(zdd.im, zdd.re),
        };
        let inv_z = Cdd {
            re: zdd.re.div_dd(z_abs2),
            im: zdd.im.div_dd(z_abs2).neg(),
        };
        (log_half_z, inv_z)
    } else {
        // On and below the real axis nothing cancels, so ordinary doubles
        // keep full relative accuracy at a fraction of the cost.
        (Cdd::from((z * 0.5).ln()), Cdd::from(z.finv()))
    };
    let two_over_pi = Dd::from(2.0).div_dd(PI_DD);
    let l_plus_gamma = Cdd {
        re: log_half_z.re.add(gamma),
        im: log_half_z.im,
    };
    let y0 = if need0 {
        l_plus_gamma.mul(j0).add(s_y0).mul_dd(two_over_pi)
    } else {
        Cdd::zero()
    };
    let y1 = if need1 {
        inv_z
            .mul_dd(two_over_pi)
            .neg()
            .add(log_half_z.mul(j1).mul_dd(two_over_pi))
            .add(zdd.mul(s_y1).mul_dd(Dd::from(1.0).div_dd(PI_DD.scale(2.0))).neg())
    } else {
        Cdd::zero()
    };
    let h0 = Cdd {
        re: j0.re.add(y0.im.neg()),
        im: j0.im.add(y0.re),
    };
    let h1 = Cdd {
        re: j1.re.add(y1.im.neg()),
        im: j1.im.add(y1.re),
    };
    SeriesJy {
        j0: j0.value(),
        j1: j1.value(),
        y0: y0.value(),
        y1: y1.value(),
        h0: h0.value(),
        h1: h1.value(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum HankelKind {
    First,
    Second,
}

/// Large-argument expansion (DLMF 10.17.5/10.17.6):
/// `H^(1)_nu(z) ~ sqrt(2/(pi z)) e^{i omega} sum_k i^k a_k(nu) / z^k`
/// with `omega = z - nu pi/2 - pi/4`, truncated at the smallest term.
fn asymptotic_h(z: Complex64, kind: HankelKind) -> (Complex64, Complex64) {
    (
        asymptotic_h_order(z, kind, 0.0),
        asymptotic_h_order(z, kind, 1.0),
    )
}

fn asymptotic_h_order(z: Complex64, kind: HankelKind, nu: f64) -> Complex64 {
    let sign = match kind {
        HankelKind::First => 1.0,
        HankelKind::Second => -1.0,
    };
    let i_sign = Complex64::new(0.0, sign);
    let pi = std::f64::consts::PI;

    let inv_8z = (i_sign / z).unscale(8.0);
    let omega = z - Complex64::new(nu * pi / 2.0 + pi / 4.0, 0.0);
    let prefactor = (Complex64::new(2.0 / pi, 0.0) / z).sqrt() * (i_sign * omega).exp();
    let four_nu2 = 4.0 * nu * nu;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = term.norm();
    for k in 0..48u32 {
        let kf = k as f64;
        let odd = 2.0 * kf + 1.0;
        term *= inv_8z * ((four_nu2 - odd * odd) / (kf + 1.0));
        let mag = term.norm();
        if mag > last {
            break; // smallest term reached; stop before divergence
        }
        sum += term;
        last = mag;
        if mag < 1e-17 {
            break; // below double rounding of the leading term
        }
    }
    prefactor * sum
}
