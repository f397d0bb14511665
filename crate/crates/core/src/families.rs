//! Closed-form worked families: renormalized free max powers of the
//! classical extreme value laws, with densities, log-derivatives, support
//! edges and edge densities.

use std::sync::Arc;

use crate::distributions::{Cdf, ExtremeValueLaw};
use crate::error::{Error, Result};
use crate::maxconv::{free_max_power, renormalize, support_left_edge, NormingSequence};
use crate::numerics::{one_sided_limit, Side};
use crate::stein::DensityProfile;

/// A worked family at index n: the cut distribution function, its density
/// profile and the norming that produced it.
#[derive(Debug, Clone)]
pub struct WorkedFamily {
    pub gamma: f64,
    pub n: u64,
    pub cdf: Cdf,
    pub profile: DensityProfile,
    pub norming: NormingSequence,
}

/// -n log(1 - 1/n), evaluated through log1p so precision survives
/// large n.
pub(crate) fn cut_mass_log(n: u64) -> f64 {
    let nn = n as f64;
    -nn * (-1.0 / nn).ln_1p()
}

fn require_n(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::NeedsAtLeastTwo(n));
    }
    Ok(n as f64)
}

/// Cut family from Gumbel samples with norming (1, log n):
/// density e^{-t} exp(-e^{-t}/n) above A_n = -log{-n log(1-1/n)}.
pub fn gumbel_family(n: u64) -> Result<WorkedFamily> {
    let nn = require_n(n)?;
    let nl = cut_mass_log(n); // -n log(1-1/n)
    let l = nl / nn;
    let a = -nl.ln();
    let edge_density = (nn - 1.0) * l;

    let u = Arc::new(move |t: f64| {
        if t > a {
            (-t).exp() * (-(-t).exp() / nn).exp()
        } else {
            0.0
        }
    });
    let rho = Arc::new(move |t: f64| -1.0 + (-t).exp() / nn);

    let eval = move |t: f64| (nn * ((-(-t).exp() / nn).exp() - 1.0) + 1.0).max(0.0);
    let u_cdf = u.clone();
    let rho_cdf = rho.clone();
    let cdf = Cdf::new(eval, a, f64::INFINITY)
        .with_density(move |t| u_cdf(t))
        .with_log_density_derivative(move |t| rho_cdf(t))
        .with_quantile(move |p: f64| -(-nn * ((p - 1.0) / nn).ln_1p()).ln())
        .with_breakpoints(vec![a]);

    Ok(WorkedFamily {
        gamma: 0.0,
        n,
        cdf,
        profile: DensityProfile {
            u,
            rho,
            support_lo: a,
            support_hi: f64::INFINITY,
            edge_density,
            n,
        },
        norming: NormingSequence::new(1.0, nn.ln(), n)?,
    })
}

/// Cut family from Frechet samples with norming (n^{1/gamma}, 0):
/// density gamma t^{-gamma-1} exp(-t^{-gamma}/n) above
/// A_n = {-n log(1-1/n)}^{-1/gamma}.
pub fn frechet_family(gamma: f64, n: u64) -> Result<WorkedFamily> {
    ExtremeValueLaw::classical(gamma)?;
    if gamma <= 0.0 {
        return Err(Error::InvalidLaw(format!(
            "frechet family needs gamma > 0, got {gamma}"
        )));
    }
    let nn = require_n(n)?;
    let nl = cut_mass_log(n);
    let l = nl / nn;
    let a = nl.powf(-1.0 / gamma);
    // u(A+) = gamma (n-1) L / A
    let edge_density = gamma * (nn - 1.0) * l / a;

    let u = Arc::new(move |t: f64| {
        if t > a {
            gamma * t.powf(-gamma - 1.0) * (-t.powf(-gamma) / nn).exp()
        } else {
            0.0
        }
    });
    let rho = Arc::new(move |t: f64| -(gamma + 1.0) / t + gamma / nn * t.powf(-gamma - 1.0));

    let eval = move |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            (nn * ((-t.powf(-gamma) / nn).exp() - 1.0) + 1.0).max(0.0)
        }
    };
    let u_cdf = u.clone();
    let rho_cdf = rho.clone();
    let cdf = Cdf::new(eval, a, f64::INFINITY)
        .with_density(move |t| u_cdf(t))
        .with_log_density_derivative(move |t| rho_cdf(t))
        .with_quantile(move |p: f64| (-nn * ((p - 1.0) / nn).ln_1p()).powf(-1.0 / gamma))
        .with_breakpoints(vec![a]);

    Ok(WorkedFamily {
        gamma,
        n,
        cdf,
        profile: DensityProfile {
            u,
            rho,
            support_lo: a,
            support_hi: f64::INFINITY,
            edge_density,
            n,
        },
        norming: NormingSequence::new(nn.powf(1.0 / gamma), 0.0, n)?,
    })
}

/// Cut family from Weibull samples with norming (n^{1/gamma}, 0):
/// density -gamma |t|^{-gamma-1} exp(-|t|^{-gamma}/n) on (A_n, 0) with
/// A_n = -{-n log(1-1/n)}^{-1/gamma}.
pub fn weibull_family(gamma: f64, n: u64) -> Result<WorkedFamily> {
    ExtremeValueLaw::classical(gamma)?;
    if gamma >= 0.0 {
        return Err(Error::InvalidLaw(format!(
            "weibull family needs gamma < 0, got {gamma}"
        )));
    }
    let nn = require_n(n)?;
    let nl = cut_mass_log(n);
    let l = nl / nn;
    let a = -nl.powf(-1.0 / gamma);
    // u(A+) = -gamma (n-1) L / |A|
    let edge_density = -gamma * (nn - 1.0) * l / a.abs();

    let u = Arc::new(move |t: f64| {
        if t > a && t < 0.0 {
            -gamma * t.abs().powf(-gamma - 1.0) * (-t.abs().powf(-gamma) / nn).exp()
        } else {
            0.0
        }
    });
    let rho =
        Arc::new(move |t: f64| -(gamma + 1.0) / t - gamma / nn * t.abs().powf(-gamma - 1.0));

    let eval = move |t: f64| {
        if t >= 0.0 {
            1.0
        } else {
            (nn * ((-t.abs().powf(-gamma) / nn).exp() - 1.0) + 1.0).max(0.0)
        }
    };
    let u_cdf = u.clone();
    let rho_cdf = rho.clone();
    let cdf = Cdf::new(eval, a, 0.0)
        .with_density(move |t| u_cdf(t))
        .with_log_density_derivative(move |t| rho_cdf(t))
        .with_quantile(move |p: f64| -(-nn * ((p - 1.0) / nn).ln_1p()).powf(-1.0 / gamma))
        .with_breakpoints(vec![a, 0.0]);

    Ok(WorkedFamily {
        gamma,
        n,
        cdf,
        profile: DensityProfile {
            u,
            rho,
            support_lo: a,
            support_hi: 0.0,
            edge_density,
            n,
        },
        norming: NormingSequence::new(nn.powf(1.0 / gamma), 0.0, n)?,
    })
}

// log-derivative blows up at the cut edge for generic samples
const EDGE_GUARD: f64 = 1e-12;

/// Build the n-fold cut family from a user-supplied sample distribution
/// and norming. Density and log-derivative follow by the chain rule when
/// the sample carries them; the log-derivative falls back to numerical
/// differentiation otherwise.
pub fn generic_family(sample: &Cdf, gamma: f64, norming: &NormingSequence) -> Result<WorkedFamily> {
    let n = norming.n;
    require_n(n)?;
    let sample_density = sample.density().ok_or(Error::NoDensity)?;

    let power = free_max_power(sample, n)?;
    let cdf = renormalize(&power, norming);

    let (scale, shift) = (norming.a, norming.b);
    let edge = support_left_edge(sample, n)?;
    let a = (edge - shift) / scale;
    let b = (sample.support_hi() - shift) / scale;

    let nn = n as f64;
    let u = {
        let ud = sample_density.clone();
        let a_edge = a;
        Arc::new(move |t: f64| {
            if t > a_edge {
                nn * scale * ud(scale * t + shift)
            } else {
                0.0
            }
        }) as crate::distributions::RealFn
    };

    let rho: crate::distributions::RealFn = match sample.log_density_derivative() {
        Some(sample_rho) => {
            let a_edge = a;
            Arc::new(move |t: f64| {
                if t > a_edge + EDGE_GUARD {
                    scale * sample_rho(scale * t + shift)
                } else {
                    f64::NAN
                }
            })
        }
        None => {
            let u_for_rho = u.clone();
            let a_edge = a;
            Arc::new(move |t: f64| {
                if t <= a_edge + EDGE_GUARD {
                    return f64::NAN;
                }
                let u_inner = u_for_rho.clone();
                let scale_h = (t - a_edge).min(1.0) * 0.5;
                crate::numerics::differentiate(move |s| u_inner(s).ln(), t, scale_h)
                    .unwrap_or(f64::NAN)
            })
        }
    };

    let u_limit = u.clone();
    let edge_density = one_sided_limit(move |t| u_limit(t), a, Side::FromAbove)
        .unwrap_or_else(|_| u(a + 1e-9 * a.abs().max(1.0)));

    Ok(WorkedFamily {
        gamma,
        n,
        cdf,
        profile: DensityProfile {
            u,
            rho,
            support_lo: a,
            support_hi: b,
            edge_density,
            n,
        },
        norming: *norming,
    })
}
