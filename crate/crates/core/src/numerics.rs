//! Deterministic numerical kernel: adaptive Gauss-Kronrod quadrature on
//! finite and semi-infinite intervals, Brent root bracketing, Richardson
//! differentiation and one-sided limits.

use crate::error::{Error, Result};

/// Integration interval with extended-real endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Accuracy request shared by quadrature and root finding.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_refinements: u32,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_refinements: u32) -> Result<Self> {
        if !(abs_tol >= 0.0) || !(rel_tol >= 0.0) || abs_tol + rel_tol <= 0.0 {
            return Err(Error::InvalidTolerance);
        }
        if max_refinements == 0 {
            return Err(Error::InvalidTolerance);
        }
        Ok(Tolerance {
            abs_tol,
            rel_tol,
            max_refinements,
        })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_refinements: 60,
        }
    }
}

// 15-point Kronrod nodes on [-1,1]; positive half, outermost first,
// center last. Odd indices are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One Gauss-Kronrod 7/15 panel: returns (value, error estimate).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut gauss = WG[3] * fc;
    let mut kronrod = WGK[7] * fc;
    let mut res_abs = WGK[7] * fc.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let value = kronrod * half;
    if value.is_nan() {
        return Err(Error::Domain(format!(
            "integrand returned NaN on panel [{a}, {b}]"
        )));
    }
    let err = rescale_error((kronrod - gauss) * half, res_abs * half.abs(), res_asc * half.abs());
    Ok((value, err))
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    points: &[f64],
    tol: &Tolerance,
) -> Result<f64> {
    let mut segs: Vec<Segment> = Vec::with_capacity(points.len() - 1);
    for w in points.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let (value, error) = qk15(f, w[0], w[1])?;
        segs.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    for _round in 0..tol.max_refinements {
        let total: f64 = segs.iter().map(|s| s.value).sum();
        let total_err: f64 = segs.iter().map(|s| s.error).sum();
        let target = tol.abs_tol.max(tol.rel_tol * total.abs());
        if total_err <= target {
            return Ok(total);
        }

        // Split every segment carrying more than its share of the budget.
        let local = 0.5 * target / segs.len() as f64;
        let mut next = Vec::with_capacity(segs.len() * 2);
        for seg in &segs {
            if seg.error > local && (seg.b - seg.a) > f64::EPSILON * (seg.a.abs() + seg.b.abs()) {
                let mid = 0.5 * (seg.a + seg.b);
                let (v1, e1) = qk15(f, seg.a, mid)?;
                let (v2, e2) = qk15(f, mid, seg.b)?;
                next.push(Segment {
                    a: seg.a,
                    b: mid,
                    value: v1,
                    error: e1,
                });
                next.push(Segment {
                    a: mid,
                    b: seg.b,
                    value: v2,
                    error: e2,
                });
            } else {
                next.push(*seg);
            }
        }
        segs = next;
    }

    let total: f64 = segs.iter().map(|s| s.value).sum();
    let total_err: f64 = segs.iter().map(|s| s.error).sum();
    if total_err <= tol.abs_tol.max(tol.rel_tol * total.abs()) {
        return Ok(total);
    }
    Err(Error::QuadratureFailure {
        estimate: total,
        error: total_err,
        refinements: tol.max_refinements,
    })
}

/// Integrate `f` over `iv`. Semi-infinite intervals are mapped onto (0,1)
/// by the monotone change of variables t = a + s/(1-s).
pub fn integrate<F: Fn(f64) -> f64>(f: F, iv: Interval, tol: &Tolerance) -> Result<f64> {
    integrate_with_breakpoints(f, iv, tol, &[])
}

/// Like [`integrate`], with registered breakpoints that panels never
/// straddle (kinks of piecewise-smooth integrands).
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    iv: Interval,
    tol: &Tolerance,
    breakpoints: &[f64],
) -> Result<f64> {
    if iv.lo.is_infinite() && iv.hi.is_infinite() {
        // split the real line at a finite anchor and recurse
        let mid = breakpoints
            .iter()
            .copied()
            .find(|t| t.is_finite())
            .unwrap_or(0.0);
        let fr: &dyn Fn(f64) -> f64 = &f;
        let left = integrate_with_breakpoints(fr, Interval::new(iv.lo, mid)?, tol, breakpoints)?;
        let right = integrate_with_breakpoints(fr, Interval::new(mid, iv.hi)?, tol, breakpoints)?;
        return Ok(left + right);
    }

    if iv.is_finite() {
        let points = partition(iv.lo, iv.hi, breakpoints, |t| t);
        return adaptive(&f, &points, tol);
    }

    if iv.hi.is_infinite() {
        // t = a + s/(1-s), dt = ds/(1-s)^2, s in (0,1)
        let a = iv.lo;
        let g = move |s: f64| {
            let om = 1.0 - s;
            if om <= 0.0 {
                return 0.0;
            }
            let v = f(a + s / om);
            // a vanishing tail must not turn into 0/0 when om^2 underflows
            if v == 0.0 {
                0.0
            } else {
                v / (om * om)
            }
        };
        let points = partition(0.0, 1.0, breakpoints, |t| (t - a) / (1.0 + (t - a)));
        adaptive(&g, &points, tol)
    } else {
        // t = b - s/(1-s), symmetric map for (-inf, b)
        let b = iv.hi;
        let g = move |s: f64| {
            let om = 1.0 - s;
            if om <= 0.0 {
                return 0.0;
            }
            let v = f(b - s / om);
            if v == 0.0 {
                0.0
            } else {
                v / (om * om)
            }
        };
        let points = partition(0.0, 1.0, breakpoints, |t| (b - t) / (1.0 + (b - t)));
        adaptive(&g, &points, tol)
    }
}

fn partition(lo: f64, hi: f64, breakpoints: &[f64], map: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut points = vec![lo];
    let mut mapped: Vec<f64> = breakpoints
        .iter()
        .map(|&t| map(t))
        .filter(|&s| s.is_finite() && s > lo && s < hi)
        .collect();
    mapped.sort_by(f64::total_cmp);
    mapped.dedup();
    points.extend(mapped);
    points.push(hi);
    points
}

/// Brent root bracketing on a finite interval with a sign change.
pub fn find_root<F: Fn(f64) -> f64>(g: F, bracket: Interval, tol: &Tolerance) -> Result<f64> {
    if !bracket.is_finite() {
        return Err(Error::InvalidInterval {
            lo: bracket.lo,
            hi: bracket.hi,
        });
    }
    let mut a = bracket.lo;
    let mut b = bracket.hi;
    let mut fa = g(a);
    let mut fb = g(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Domain("root function returned NaN at bracket".into()));
    }
    if fa * fb > 0.0 {
        return Err(Error::NoSignChange { lo: a, hi: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.abs_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation / secant
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = g(b);
        if fb.is_nan() {
            return Err(Error::Domain("root function returned NaN".into()));
        }
    }
    Ok(b)
}

/// Central difference with Richardson extrapolation; step proportional
/// to `scale`.
pub fn differentiate<F: Fn(f64) -> f64>(f: F, x: f64, scale: f64) -> Result<f64> {
    let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);

    let mut h = 0.125 * scale;
    let mut prev: Vec<f64> = Vec::new();
    let mut best = f64::NAN;
    let mut best_spread = f64::INFINITY;

    for _ in 0..16 {
        let d = central(h);
        if d.is_nan() || d.is_infinite() {
            return Err(Error::Domain(format!(
                "function not finite near {x} (step {h:.3e})"
            )));
        }
        let mut row = vec![d];
        let mut fac = 4.0;
        for m in 0..prev.len().min(6) {
            let cur = row[m];
            row.push(cur + (cur - prev[m]) / (fac - 1.0));
            fac *= 4.0;
        }
        let diag = *row.last().unwrap();
        if !best.is_nan() {
            let spread = (diag - best).abs();
            if spread < best_spread {
                best_spread = spread;
            } else if spread > 4.0 * best_spread && best_spread < 1e-8 * diag.abs().max(1.0) {
                // rounding noise has taken over
                return Ok(best);
            }
        }
        best = diag;
        prev = row;
        h *= 0.5;
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    FromAbove,
    FromBelow,
}

/// One-sided limit via Richardson extrapolation along geometrically
/// shrinking offsets.
pub fn one_sided_limit<F: Fn(f64) -> f64>(f: F, a: f64, side: Side) -> Result<f64> {
    let sign = match side {
        Side::FromAbove => 1.0,
        Side::FromBelow => -1.0,
    };
    let mut h = 0.25 * a.abs().max(1.0);
    let mut prev: Vec<f64> = Vec::new();
    let mut best = f64::NAN;
    let mut stable = 0u32;

    for _ in 0..48 {
        let v = f(a + sign * h);
        if v.is_nan() || v.is_infinite() {
            // shrink past a region where f is not yet defined
            h *= 0.5;
            prev.clear();
            continue;
        }
        let mut row = vec![v];
        let mut fac = 2.0;
        for m in 0..prev.len().min(5) {
            let cur = row[m];
            row.push(cur + (cur - prev[m]) / (fac - 1.0));
            fac *= 2.0;
        }
        let diag = *row.last().unwrap();
        if !best.is_nan() && (diag - best).abs() <= 1e-11 * diag.abs().max(1.0) {
            stable += 1;
            if stable >= 2 {
                return Ok(diag);
            }
        } else {
            stable = 0;
        }
        best = diag;
        prev = row;
        h *= 0.5;
    }
    Err(Error::LimitNotDetected {
        at: a,
        last: best,
        spread: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn integrate_constant() {
        let v = integrate(|_| 1.0, Interval::new(0.0, 1.0).unwrap(), &tol()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_exponential_tail() {
        let v = integrate(
            |t| (-t).exp(),
            Interval::new(0.0, f64::INFINITY).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn integrate_gumbel_power_density() {
        // density of the 2-fold cut family: e^{-t} exp(-e^{-t}/2) above
        // A2 = -log(2 ln 2); total mass 1
        let a2 = -(2.0 * std::f64::consts::LN_2).ln();
        let v = integrate(
            |t| (-t).exp() * (-(-t).exp() / 2.0).exp(),
            Interval::new(a2, f64::INFINITY).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn integrate_left_tail() {
        let v = integrate(
            |t| t.exp(),
            Interval::new(f64::NEG_INFINITY, 0.0).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_whole_real_line() {
        let iv = Interval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let v = integrate(|t: f64| (-t * t).exp(), iv, &tol()).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn integrate_nan_is_domain_error() {
        let r = integrate(|_| f64::NAN, Interval::new(0.0, 1.0).unwrap(), &tol());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn breakpoint_keeps_kink_off_panels() {
        let v = integrate_with_breakpoints(
            |t: f64| t.abs(),
            Interval::new(-1.0, 1.0).unwrap(),
            &tol(),
            &[0.0],
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn root_linear() {
        let x = find_root(|x| x - 0.5, Interval::new(0.0, 1.0).unwrap(), &tol()).unwrap();
        assert!((x - 0.5).abs() < 1e-10);
    }

    #[test]
    fn root_exp_minus_two() {
        let x = find_root(|x: f64| x.exp() - 2.0, Interval::new(0.0, 2.0).unwrap(), &tol()).unwrap();
        assert!((x - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn root_gumbel_median() {
        // exp(-e^{-x}) = 1/2  =>  x = -log(ln 2)
        let x = find_root(
            |x: f64| (-(-x).exp()).exp() - 0.5,
            Interval::new(-2.0, 2.0).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!((x - (-std::f64::consts::LN_2.ln())).abs() < 1e-10);
        assert!((x - 0.3665129).abs() < 1e-6);
    }

    #[test]
    fn root_requires_sign_change() {
        let r = find_root(|x: f64| x * x + 1.0, Interval::new(-1.0, 1.0).unwrap(), &tol());
        assert!(matches!(r, Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn derivative_of_exp() {
        let d = differentiate(|x: f64| x.exp(), 0.0, 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
    }

    #[test]
    fn derivative_of_square() {
        let d = differentiate(|x| x * x, 3.0, 1.0).unwrap();
        assert!((d - 6.0).abs() < 1e-8);
    }

    #[test]
    fn derivative_of_log_u2() {
        // (log u_2)'(0) = -1 + 1/2 with u_2(t) = e^{-t} exp(-e^{-t}/2)
        let d = differentiate(
            |t: f64| ((-t).exp() * (-(-t).exp() / 2.0).exp()).ln(),
            0.0,
            1.0,
        )
        .unwrap();
        assert!((d + 0.5).abs() < 1e-8);
    }

    #[test]
    fn derivative_grid_against_closed_forms() {
        for k in -4..=4 {
            let x = 10f64.powi(k);
            let d = differentiate(|t: f64| t.ln(), x, x).unwrap();
            assert!((d - 1.0 / x).abs() <= 1e-7 * (1.0 / x).abs().max(1.0), "log at {x}");
            let d = differentiate(|t: f64| t.powi(3), x, x.max(1e-3)).unwrap();
            assert!((d - 3.0 * x * x).abs() <= 1e-7 * (3.0 * x * x).max(1.0), "cube at {x}");
        }
    }

    #[test]
    fn limit_trivial() {
        let v = one_sided_limit(|t| t * (1.0 / t), 0.0, Side::FromAbove).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_u2_at_edge() {
        let a2 = -(2.0 * std::f64::consts::LN_2).ln();
        let v = one_sided_limit(
            |t: f64| (-t).exp() * (-(-t).exp() / 2.0).exp(),
            a2,
            Side::FromAbove,
        )
        .unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn limit_oscillation_rejected() {
        let r = one_sided_limit(|t: f64| (1.0 / t).sin(), 0.0, Side::FromAbove);
        assert!(matches!(r, Err(Error::LimitNotDetected { .. })));
    }

    #[test]
    fn integrate_is_linear() {
        let iv = Interval::new(-1.0, 2.0).unwrap();
        let f = |x: f64| 3.0 * x * x - x;
        let g = |x: f64| x.powi(3) + 2.0;
        let (alpha, beta) = (2.5, -1.75);
        let lhs = integrate(|x| alpha * f(x) + beta * g(x), iv, &tol()).unwrap();
        let rhs = alpha * integrate(f, iv, &tol()).unwrap() + beta * integrate(g, iv, &tol()).unwrap();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
