//! Distribution-function abstraction and the closed-form classical and
//! free extreme value laws.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An evaluable distribution function with optional density and
/// log-density derivative. The universal currency of the library.
#[derive(Clone)]
pub struct Cdf {
    eval: RealFn,
    support_lo: f64,
    support_hi: f64,
    density: Option<RealFn>,
    log_density_derivative: Option<RealFn>,
    quantile_fn: Option<RealFn>,
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for Cdf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cdf")
            .field("support_lo", &self.support_lo)
            .field("support_hi", &self.support_hi)
            .field("has_density", &self.density.is_some())
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl Cdf {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, support_lo: f64, support_hi: f64) -> Self {
        Cdf {
            eval: Arc::new(eval),
            support_lo,
            support_hi,
            density: None,
            log_density_derivative: None,
            quantile_fn: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_density(mut self, u: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.density = Some(Arc::new(u));
        self
    }

    pub fn with_log_density_derivative(
        mut self,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.log_density_derivative = Some(Arc::new(rho));
        self
    }

    pub fn with_quantile(mut self, q: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.quantile_fn = Some(Arc::new(q));
        self
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    /// Evaluate the distribution function; clamps to [0,1].
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x).clamp(0.0, 1.0)
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn density(&self) -> Option<RealFn> {
        self.density.clone()
    }

    pub fn density_at(&self, x: f64) -> Option<f64> {
        self.density.as_ref().map(|u| u(x))
    }

    pub fn log_density_derivative(&self) -> Option<RealFn> {
        self.log_density_derivative.clone()
    }

    pub(crate) fn eval_fn(&self) -> RealFn {
        self.eval.clone()
    }

    /// Generalized inverse inf{x : F(x) >= p}; closed form when known,
    /// otherwise bisection with bracket expansion.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        if let Some(q) = &self.quantile_fn {
            return Ok(q(p));
        }

        let mut lo = if self.support_lo.is_finite() {
            self.support_lo
        } else {
            -1.0
        };
        let mut hi = if self.support_hi.is_finite() {
            self.support_hi
        } else {
            1.0
        };
        // expand until F(lo) < p <= F(hi)
        let mut steps = 0;
        while self.eval(lo) >= p {
            lo = 2.0 * lo - 1.0;
            steps += 1;
            if steps > 200 {
                return Err(Error::Domain(format!("cannot bracket quantile p={p}")));
            }
        }
        while self.eval(hi) < p {
            hi = 2.0 * hi + 1.0;
            steps += 1;
            if steps > 200 {
                return Err(Error::Domain(format!("cannot bracket quantile p={p}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-13 * mid.abs().max(1.0) {
                break;
            }
            if self.eval(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Evaluate a distribution function at a point.
pub fn eval_cdf(cdf: &Cdf, x: f64) -> f64 {
    cdf.eval(x)
}

/// Generalized inverse of a distribution function.
pub fn quantile(cdf: &Cdf, p: f64) -> Result<f64> {
    cdf.quantile(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calculus {
    Classical,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Gumbel,
    Frechet,
    Weibull,
}

/// Classical or free extreme value law, tagged by regime and shape gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeValueLaw {
    pub calculus: Calculus,
    pub regime: Regime,
    pub gamma: f64,
}

const GAMMA_MIN: f64 = 1e-6;

impl ExtremeValueLaw {
    pub fn new(calculus: Calculus, regime: Regime, gamma: f64) -> Result<Self> {
        let consistent = match regime {
            Regime::Gumbel => gamma == 0.0,
            Regime::Frechet => gamma > 0.0,
            Regime::Weibull => gamma < 0.0,
        };
        if !consistent {
            return Err(Error::InvalidLaw(format!(
                "gamma={gamma} inconsistent with regime {regime:?}"
            )));
        }
        if gamma != 0.0 && gamma.abs() < GAMMA_MIN {
            // the regimes have different supports; near-zero shapes are
            // rejected rather than silently coerced to Gumbel
            return Err(Error::InvalidLaw(format!(
                "|gamma|={} below minimum {GAMMA_MIN}",
                gamma.abs()
            )));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidLaw("gamma must be finite".into()));
        }
        Ok(ExtremeValueLaw {
            calculus,
            regime,
            gamma,
        })
    }

    /// Build a law from calculus and shape alone; the regime follows the
    /// sign of gamma.
    pub fn from_gamma(calculus: Calculus, gamma: f64) -> Result<Self> {
        let regime = if gamma == 0.0 {
            Regime::Gumbel
        } else if gamma > 0.0 {
            Regime::Frechet
        } else {
            Regime::Weibull
        };
        Self::new(calculus, regime, gamma)
    }

    pub fn classical(gamma: f64) -> Result<Self> {
        Self::from_gamma(Calculus::Classical, gamma)
    }

    pub fn free(gamma: f64) -> Result<Self> {
        Self::from_gamma(Calculus::Free, gamma)
    }
}

/// Exact closed-form distribution function of an extreme value law.
pub fn make_law(law: &ExtremeValueLaw) -> Result<Cdf> {
    // revalidate: fields are public
    let law = ExtremeValueLaw::new(law.calculus, law.regime, law.gamma)?;
    let g = law.gamma;
    let cdf = match (law.calculus, law.regime) {
        (Calculus::Classical, Regime::Gumbel) => {
            Cdf::new(|x: f64| (-(-x).exp()).exp(), f64::NEG_INFINITY, f64::INFINITY)
                .with_density(|x: f64| (-x - (-x).exp()).exp())
                .with_log_density_derivative(|x: f64| -1.0 + (-x).exp())
                .with_quantile(|p: f64| -(-p.ln()).ln())
        }
        (Calculus::Classical, Regime::Frechet) => {
            Cdf::new(
                move |x: f64| if x > 0.0 { (-x.powf(-g)).exp() } else { 0.0 },
                0.0,
                f64::INFINITY,
            )
            .with_density(move |x: f64| {
                if x > 0.0 {
                    g * (-(g + 1.0) * x.ln() - x.powf(-g)).exp()
                } else {
                    0.0
                }
            })
            .with_log_density_derivative(move |x: f64| -(g + 1.0) / x + g * x.powf(-g - 1.0))
            .with_quantile(move |p: f64| (-p.ln()).powf(-1.0 / g))
            .with_breakpoints(vec![0.0])
        }
        (Calculus::Classical, Regime::Weibull) => {
            Cdf::new(
                move |x: f64| {
                    if x < 0.0 {
                        (-x.abs().powf(-g)).exp()
                    } else {
                        1.0
                    }
                },
                f64::NEG_INFINITY,
                0.0,
            )
            .with_density(move |x: f64| {
                if x < 0.0 {
                    -g * (-(g + 1.0) * x.abs().ln() - x.abs().powf(-g)).exp()
                } else {
                    0.0
                }
            })
            .with_log_density_derivative(move |x: f64| -(g + 1.0) / x - g * x.abs().powf(-g - 1.0))
            .with_quantile(move |p: f64| -(-p.ln()).powf(-1.0 / g))
            .with_breakpoints(vec![0.0])
        }
        (Calculus::Free, Regime::Gumbel) => {
            Cdf::new(
                |x: f64| if x >= 0.0 { 1.0 - (-x).exp() } else { 0.0 },
                0.0,
                f64::INFINITY,
            )
            .with_density(|x: f64| if x > 0.0 { (-x).exp() } else { 0.0 })
            .with_log_density_derivative(|_| -1.0)
            .with_quantile(|p: f64| -(-p).ln_1p())
            .with_breakpoints(vec![0.0])
        }
        (Calculus::Free, Regime::Frechet) => {
            Cdf::new(
                move |x: f64| if x >= 1.0 { 1.0 - x.powf(-g) } else { 0.0 },
                1.0,
                f64::INFINITY,
            )
            .with_density(move |x: f64| if x > 1.0 { g * x.powf(-g - 1.0) } else { 0.0 })
            .with_log_density_derivative(move |x: f64| -(g + 1.0) / x)
            .with_quantile(move |p: f64| (1.0 - p).powf(-1.0 / g))
            .with_breakpoints(vec![1.0])
        }
        (Calculus::Free, Regime::Weibull) => {
            // upper tail is identically 1 for x > 0; density lives on [-1, 0]
            Cdf::new(
                move |x: f64| {
                    if x > 0.0 {
                        1.0
                    } else if x >= -1.0 {
                        1.0 - x.abs().powf(-g)
                    } else {
                        0.0
                    }
                },
                -1.0,
                0.0,
            )
            .with_density(move |x: f64| {
                if x > -1.0 && x < 0.0 {
                    -g * x.abs().powf(-g - 1.0)
                } else {
                    0.0
                }
            })
            .with_log_density_derivative(move |x: f64| -(g + 1.0) / x)
            .with_quantile(move |p: f64| -(1.0 - p).powf(-1.0 / g))
            .with_breakpoints(vec![-1.0, 0.0])
        }
    };
    Ok(cdf)
}

/// User-supplied sample distribution as strictly increasing knots with
/// linear interpolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTabulated", into = "RawTabulated")]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTabulated {
    x: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<f64>,
}

impl TryFrom<RawTabulated> for TabulatedCdf {
    type Error = Error;
    fn try_from(raw: RawTabulated) -> Result<Self> {
        TabulatedCdf::new(raw.x, raw.f)
    }
}

impl From<TabulatedCdf> for RawTabulated {
    fn from(t: TabulatedCdf) -> Self {
        RawTabulated { x: t.xs, f: t.fs }
    }
}

impl TabulatedCdf {
    pub fn new(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if xs.len() != fs.len() {
            return Err(Error::InvalidTabulated("x and F lengths differ".into()));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidTabulated("need at least two knots".into()));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidTabulated("x must be strictly increasing".into()));
        }
        if fs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidTabulated("F must be nondecreasing".into()));
        }
        if fs[0] < 0.0 || *fs.last().unwrap() > 1.0 {
            return Err(Error::InvalidTabulated("F must stay within [0,1]".into()));
        }
        Ok(TabulatedCdf { xs, fs })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.fs.iter().copied())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let xs = &self.xs;
        let fs = &self.fs;
        if x < xs[0] {
            return 0.0;
        }
        if x >= *xs.last().unwrap() {
            return *fs.last().unwrap();
        }
        let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return fs[i],
            Err(i) => i - 1,
        };
        let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        fs[i] + t * (fs[i + 1] - fs[i])
    }

    pub fn to_cdf(&self) -> Cdf {
        let this = self.clone();
        let slopes = self.clone();
        let lo = self.xs[0];
        let hi = *self.xs.last().unwrap();
        Cdf::new(move |x| this.eval(x), lo, hi)
            .with_density(move |x| slopes.slope_at(x))
            .with_breakpoints(self.xs.clone())
    }

    fn slope_at(&self, x: f64) -> f64 {
        let xs = &self.xs;
        if x <= xs[0] || x >= *xs.last().unwrap() {
            return 0.0;
        }
        let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (self.fs[i + 1] - self.fs[i]) / (xs[i + 1] - xs[i])
    }
}
