//! Free max-convolution algebra on distribution functions, classical max
//! powers, renormalization and support-edge location.

use crate::distributions::Cdf;
use crate::error::{Error, Result};
use crate::numerics::{find_root, Interval, Tolerance};

/// Scale/shift pair (a_n, b_n) at index n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormingSequence {
    pub a: f64,
    pub b: f64,
    pub n: u64,
}

impl NormingSequence {
    pub fn new(a: f64, b: f64, n: u64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!("invalid norming scale a={a}, shift b={b}")));
        }
        if n == 0 {
            return Err(Error::InvalidPower);
        }
        Ok(NormingSequence { a, b, n })
    }
}

/// Pairwise free max-convolution: x -> max{F(x) + G(x) - 1, 0}.
pub fn free_max_conv_pair(f: &Cdf, g: &Cdf) -> Cdf {
    let fe = f.eval_fn();
    let ge = g.eval_fn();
    let eval = move |x: f64| {
        let d = (fe(x).clamp(0.0, 1.0) - 1.0) + (ge(x).clamp(0.0, 1.0) - 1.0);
        (d + 1.0).max(0.0)
    };

    let mut breakpoints: Vec<f64> = f
        .breakpoints()
        .iter()
        .chain(g.breakpoints().iter())
        .copied()
        .collect();

    let lo = conv_edge(f, g).unwrap_or_else(|_| f.support_lo().min(g.support_lo()));
    if lo.is_finite() {
        breakpoints.push(lo);
    }
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let hi = f.support_hi().max(g.support_hi());
    let out = Cdf::new(eval, lo, hi).with_breakpoints(breakpoints);

    match (f.density(), g.density()) {
        (Some(uf), Some(ug)) => {
            let fe = f.eval_fn();
            let ge = g.eval_fn();
            out.with_density(move |x: f64| {
                if fe(x) + ge(x) - 1.0 > 0.0 {
                    uf(x) + ug(x)
                } else {
                    0.0
                }
            })
        }
        _ => out,
    }
}

// inf{x : F(x) + G(x) > 1} by bisection on the monotone sum.
fn conv_edge(f: &Cdf, g: &Cdf) -> Result<f64> {
    let h = |x: f64| f.eval(x) + g.eval(x) - 1.0;
    let mut hi = f.quantile(0.999)?.max(g.quantile(0.999)?);
    if h(hi) <= 0.0 {
        for _ in 0..200 {
            hi = 2.0 * hi + 1.0;
            if h(hi) > 0.0 {
                break;
            }
        }
    }
    let mut lo = f.quantile(0.25)?.min(g.quantile(0.25)?);
    while h(lo) > 0.0 {
        lo = 2.0 * lo - 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * mid.abs().max(1.0) {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// n-fold free max power: x -> max{nF(x) - (n-1), 0}.
pub fn free_max_power(f: &Cdf, n: u64) -> Result<Cdf> {
    if n == 0 {
        return Err(Error::InvalidPower);
    }
    if n == 1 {
        return Ok(f.clone());
    }
    let fe = f.eval_fn();
    let nn = n as f64;
    // computed as n(F-1) + 1 so that repeated powers compose tightly
    let eval = move |x: f64| (nn * (fe(x).clamp(0.0, 1.0) - 1.0) + 1.0).max(0.0);

    let lo = support_left_edge(f, n).unwrap_or(f.support_lo());
    let mut breakpoints: Vec<f64> = f.breakpoints().to_vec();
    if lo.is_finite() {
        breakpoints.push(lo);
    }
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let mut out = Cdf::new(eval, lo, f.support_hi()).with_breakpoints(breakpoints);

    if let Some(u) = f.density() {
        let fe = f.eval_fn();
        out = out.with_density(move |x: f64| {
            if nn * (fe(x) - 1.0) + 1.0 > 0.0 {
                nn * u(x)
            } else {
                0.0
            }
        });
        if let Some(rho) = f.log_density_derivative() {
            // (log n·u)' = (log u)' wherever the power is positive
            out = out.with_log_density_derivative(move |x: f64| rho(x));
        }
    }
    Ok(out)
}

/// Classical n-fold max power x -> F(x)^n, for comparison tables.
pub fn classical_max_power(f: &Cdf, n: u64) -> Result<Cdf> {
    if n == 0 {
        return Err(Error::InvalidPower);
    }
    if n == 1 {
        return Ok(f.clone());
    }
    let fe = f.eval_fn();
    let nn = n as f64;
    let eval = move |x: f64| fe(x).clamp(0.0, 1.0).powf(nn);
    let mut out = Cdf::new(eval, f.support_lo(), f.support_hi())
        .with_breakpoints(f.breakpoints().to_vec());
    if let Some(u) = f.density() {
        let fe = f.eval_fn();
        out = out.with_density(move |x: f64| nn * fe(x).clamp(0.0, 1.0).powf(nn - 1.0) * u(x));
    }
    Ok(out)
}

/// Affine reparametrization x -> F(a x + b).
pub fn renormalize(f: &Cdf, s: &NormingSequence) -> Cdf {
    let (a, b) = (s.a, s.b);
    let fe = f.eval_fn();
    let eval = move |x: f64| fe(a * x + b);

    let back = |t: f64| (t - b) / a;
    let lo = back(f.support_lo());
    let hi = back(f.support_hi());
    let breakpoints: Vec<f64> = f.breakpoints().iter().map(|&t| back(t)).collect();

    let mut out = Cdf::new(eval, lo, hi).with_breakpoints(breakpoints);
    if let Some(u) = f.density() {
        out = out.with_density(move |x: f64| a * u(a * x + b));
    }
    if let Some(rho) = f.log_density_derivative() {
        out = out.with_log_density_derivative(move |x: f64| a * rho(a * x + b));
    }
    out
}

/// Known norming constants making the renormalized free max power of a
/// classical law converge: (1, log n) for gamma = 0, (n^{1/gamma}, 0)
/// otherwise.
pub fn norming_constants(law: &crate::distributions::ExtremeValueLaw, n: u64) -> Result<NormingSequence> {
    use crate::distributions::Calculus;
    if law.calculus != Calculus::Classical {
        return Err(Error::NoNormingKnown);
    }
    if n == 0 {
        return Err(Error::InvalidPower);
    }
    let nn = n as f64;
    if law.gamma == 0.0 {
        NormingSequence::new(1.0, nn.ln(), n)
    } else {
        NormingSequence::new(nn.powf(1.0 / law.gamma), 0.0, n)
    }
}

/// Left support edge of the n-fold free max power: inf{x : F(x) > 1 - 1/n}.
pub fn support_left_edge(f: &Cdf, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidPower);
    }
    if n == 1 {
        return Ok(f.support_lo());
    }
    let p = 1.0 - 1.0 / n as f64;

    // reject distributions that never reach above 1 - 1/n
    let probe = if f.support_hi().is_finite() {
        f.support_hi()
    } else {
        match f.quantile(p) {
            Ok(x) => x + 1.0,
            Err(_) => return Err(Error::DegeneratePower),
        }
    };
    if f.eval(probe) <= p {
        return Err(Error::DegeneratePower);
    }

    // closed-form inversion when the cdf carries a quantile
    if let Ok(x) = f.quantile(p) {
        if (f.eval(x) - p).abs() < 1e-12 {
            return Ok(x);
        }
    }

    let tol = Tolerance::default();
    let mut delta = 1e-6;
    for _ in 0..12 {
        let lo = f.quantile((p - delta).max(1e-12)).map_err(|_| Error::DegeneratePower)?;
        let hi = f
            .quantile((p + delta).min(1.0 - 1e-12))
            .map_err(|_| Error::DegeneratePower)?;
        if lo < hi {
            if let Ok(root) = find_root(|x| f.eval(x) - p, Interval::new(lo, hi)?, &tol) {
                return Ok(root);
            }
        }
        delta *= 8.0;
        if delta > 0.5 {
            break;
        }
    }
    Err(Error::DegeneratePower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_law, ExtremeValueLaw, TabulatedCdf};

    fn uniform() -> Cdf {
        TabulatedCdf::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap().to_cdf()
    }

    #[test]
    fn pair_of_uniforms() {
        let u = uniform();
        let conv = free_max_conv_pair(&u, &u);
        assert!((conv.eval(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(conv.eval(0.25), 0.0);
        assert!((conv.support_lo() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pair_with_degenerate_step() {
        let u = uniform();
        let step = Cdf::new(|x: f64| if x >= 0.5 { 1.0 } else { 0.0 }, 0.5, 0.5)
            .with_breakpoints(vec![0.5]);
        let conv = free_max_conv_pair(&u, &step);
        assert!((conv.eval(0.75) - 0.75).abs() < 1e-15);
        assert_eq!(conv.eval(0.25), 0.0);
    }

    #[test]
    fn pair_of_free_gumbels() {
        let psi = make_law(&ExtremeValueLaw::free(0.0).unwrap()).unwrap();
        let conv = free_max_conv_pair(&psi, &psi);
        assert_eq!(conv.eval(std::f64::consts::LN_2), 0.0);
    }

    #[test]
    fn power_identity_and_values() {
        let u = uniform();
        let p1 = free_max_power(&u, 1).unwrap();
        for x in [0.0, 0.3, 0.9] {
            assert_eq!(p1.eval(x), u.eval(x));
        }
        let p4 = free_max_power(&u, 4).unwrap();
        assert!((p4.eval(0.9) - 0.6).abs() < 1e-14);
        assert!(free_max_power(&u, 0).is_err());
    }

    #[test]
    fn gumbel_power_value() {
        let phi = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        let p2 = free_max_power(&phi, 2).unwrap();
        let expected = 2.0 * (-0.5f64).exp() - 1.0;
        assert!((p2.eval(std::f64::consts::LN_2) - expected).abs() < 1e-14);
    }

    #[test]
    fn classical_power_values() {
        let u = uniform();
        assert!((classical_max_power(&u, 2).unwrap().eval(0.5) - 0.25).abs() < 1e-15);
        let phi = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        assert!((classical_max_power(&phi, 3).unwrap().eval(0.0) - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn renormalize_values() {
        let phi0 = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        let s = NormingSequence::new(1.0, (4.0f64).ln(), 4).unwrap();
        let r = renormalize(&phi0, &s);
        for x in [-1.0f64, 0.0, 2.0] {
            let expected = (-(-x).exp() / 4.0).exp();
            assert!((r.eval(x) - expected).abs() < 1e-14);
        }

        let phi1 = make_law(&ExtremeValueLaw::classical(1.0).unwrap()).unwrap();
        let s = NormingSequence::new(4.0, 0.0, 4).unwrap();
        let r = renormalize(&phi1, &s);
        assert!((r.eval(1.0) - (-0.25f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn renormalize_affine_composition() {
        let phi0 = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        let s1 = NormingSequence::new(2.0, 0.5, 2).unwrap();
        let s2 = NormingSequence::new(0.5, -1.0, 2).unwrap();
        let lhs = renormalize(&renormalize(&phi0, &s1), &s2);
        let rhs = renormalize(&phi0, &NormingSequence::new(s1.a * s2.a, s1.a * s2.b + s1.b, 2).unwrap());
        for x in [-2.0, 0.0, 1.5, 7.0] {
            assert!((lhs.eval(x) - rhs.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn norming_constant_values() {
        let g = norming_constants(&ExtremeValueLaw::classical(0.0).unwrap(), 10).unwrap();
        assert_eq!(g.a, 1.0);
        assert!((g.b - 10f64.ln()).abs() < 1e-15);

        let f = norming_constants(&ExtremeValueLaw::classical(2.0).unwrap(), 16).unwrap();
        assert!((f.a - 4.0).abs() < 1e-12);
        assert_eq!(f.b, 0.0);

        let w = norming_constants(&ExtremeValueLaw::classical(-1.0).unwrap(), 7).unwrap();
        assert!((w.a - 1.0 / 7.0).abs() < 1e-15);

        assert!(norming_constants(&ExtremeValueLaw::free(0.0).unwrap(), 4).is_err());
    }

    #[test]
    fn left_edge_uniform() {
        let u = uniform();
        assert!((support_left_edge(&u, 2).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn left_edge_gumbel_renormalized() {
        let phi0 = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        let r = renormalize(&phi0, &NormingSequence::new(1.0, std::f64::consts::LN_2, 2).unwrap());
        let a2 = support_left_edge(&r, 2).unwrap();
        let expected = -(2.0 * std::f64::consts::LN_2).ln();
        assert!((a2 - expected).abs() < 1e-9, "got {a2}, want {expected}");
    }

    #[test]
    fn left_edge_frechet_renormalized() {
        let phi1 = make_law(&ExtremeValueLaw::classical(1.0).unwrap()).unwrap();
        let r = renormalize(&phi1, &NormingSequence::new(2.0, 0.0, 2).unwrap());
        let a2 = support_left_edge(&r, 2).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::LN_2);
        assert!((a2 - expected).abs() < 1e-9);
    }

    #[test]
    fn left_edge_degenerate() {
        let t = TabulatedCdf::new(vec![0.0, 1.0], vec![0.0, 0.4]).unwrap().to_cdf();
        assert!(matches!(support_left_edge(&t, 2), Err(Error::DegeneratePower)));
    }

    #[test]
    fn power_vanishes_at_edge_and_positive_above() {
        let phi0 = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        let p = free_max_power(&phi0, 5).unwrap();
        let edge = support_left_edge(&phi0, 5).unwrap();
        // edge is a numerical root, so the power is zero up to rounding
        assert!(p.eval(edge) < 1e-14);
        assert!(p.eval(edge + 1e-6) > p.eval(edge));
    }
}
