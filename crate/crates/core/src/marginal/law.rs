//! Univariate target laws.

use std::fmt;
use std::sync::Arc;

use statrs::distribution::{Binomial, Continuous, ContinuousCDF, Discrete, Exp, Normal, Uniform};

use crate::error::{Error, Result};
use crate::quad;

/// Tail mass ignored when integrating over an unbounded range.
pub(crate) const TAIL_EPS: f64 = 1e-15;

/// A continuous law on the real line with density, distribution function
/// and quantile function.
pub trait ContinuousLaw: Send + Sync + fmt::Debug {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    /// `1 - cdf(x)`, overridden where a direct form is more accurate.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }
    fn quantile(&self, u: f64) -> f64;
    /// Closed support `(lo, hi)`; infinite ends are allowed.
    fn support(&self) -> (f64, f64);
    fn mean(&self) -> f64;
    fn variance(&self) -> f64;
    /// Centre of symmetry, if the density is symmetric.
    fn symmetry_center(&self) -> Option<f64> {
        None
    }
    fn name(&self) -> String;
}

pub type Law = Arc<dyn ContinuousLaw>;

#[derive(Clone, Debug)]
pub struct ExponentialLaw {
    rate: f64,
    inner: Exp,
}

impl ExponentialLaw {
    pub fn new(rate: f64) -> Result<Self> {
        let inner = Exp::new(rate)
            .map_err(|e| Error::InvalidParameter(format!("exponential rate {rate}: {e}")))?;
        Ok(ExponentialLaw { rate, inner })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl ContinuousLaw for ExponentialLaw {
    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }
    fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (-self.rate * x).exp()
        }
    }
    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            -(-u).ln_1p() / self.rate
        }
    }
    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn mean(&self) -> f64 {
        1.0 / self.rate
    }
    fn variance(&self) -> f64 {
        1.0 / (self.rate * self.rate)
    }
    fn name(&self) -> String {
        format!("Exp({})", self.rate)
    }
}

#[derive(Clone, Debug)]
pub struct NormalLaw {
    mean: f64,
    sd: f64,
    inner: Normal,
}

impl NormalLaw {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let inner = Normal::new(mean, sd)
            .map_err(|e| Error::InvalidParameter(format!("normal({mean}, {sd}): {e}")))?;
        Ok(NormalLaw { mean, sd, inner })
    }

    pub fn standard() -> Self {
        NormalLaw::new(0.0, 1.0).expect("valid standard normal")
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

impl ContinuousLaw for NormalLaw {
    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }
    fn sf(&self, x: f64) -> f64 {
        self.inner.sf(x)
    }
    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            // one Newton step polishes the library inverse to full precision
            let x = self.inner.inverse_cdf(u);
            let d = self.inner.pdf(x);
            if d > 0.0 {
                let r = if u > 0.5 {
                    (1.0 - u) - self.inner.sf(x)
                } else {
                    self.inner.cdf(x) - u
                };
                x - r / d
            } else {
                x
            }
        }
    }
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn mean(&self) -> f64 {
        self.mean
    }
    fn variance(&self) -> f64 {
        self.sd * self.sd
    }
    fn symmetry_center(&self) -> Option<f64> {
        Some(self.mean)
    }
    fn name(&self) -> String {
        format!("N({}, {})", self.mean, self.sd * self.sd)
    }
}

#[derive(Clone, Debug)]
pub struct UniformLaw {
    lo: f64,
    hi: f64,
    inner: Uniform,
}

impl UniformLaw {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let inner = Uniform::new(lo, hi)
            .map_err(|e| Error::InvalidParameter(format!("uniform({lo}, {hi}): {e}")))?;
        Ok(UniformLaw { lo, hi, inner })
    }
}

impl ContinuousLaw for UniformLaw {
    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }
    fn quantile(&self, u: f64) -> f64 {
        self.lo + u.clamp(0.0, 1.0) * (self.hi - self.lo)
    }
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
    fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
    fn variance(&self) -> f64 {
        (self.hi - self.lo).powi(2) / 12.0
    }
    fn symmetry_center(&self) -> Option<f64> {
        Some(self.mean())
    }
    fn name(&self) -> String {
        format!("U({}, {})", self.lo, self.hi)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied law given by its density, distribution and quantile
/// functions. The three are checked against each other on construction.
#[derive(Clone)]
pub struct CustomLaw {
    name: String,
    pdf: RealFn,
    cdf: RealFn,
    quantile: RealFn,
    support: (f64, f64),
    mean: f64,
    variance: f64,
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl CustomLaw {
    pub fn new(
        name: impl Into<String>,
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Result<Self> {
        let pdf: RealFn = Arc::new(pdf);
        let cdf: RealFn = Arc::new(cdf);
        let quantile: RealFn = Arc::new(quantile);
        let name = name.into();
        let lo = support.0.max(quantile(TAIL_EPS));
        let hi = support.1.min(quantile(1.0 - TAIL_EPS));
        let breaks: Vec<f64> = [0.01, 0.1, 0.5, 0.9, 0.99].iter().map(|&u| quantile(u)).collect();
        let total = quad::integrate_with(|x| pdf(x), lo, hi, &breaks, 1e-12)?;
        if (total - 1.0).abs() > 1e-9 + 2.0 * TAIL_EPS {
            return Err(Error::InvalidParameter(format!(
                "density of {name} integrates to {total}"
            )));
        }
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let x = quantile(u);
            if pdf(x) < 0.0 {
                return Err(Error::InvalidParameter(format!("negative density in {name}")));
            }
            let back = quantile(cdf(x));
            if (back - x).abs() > 1e-9 * x.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "quantile and cdf of {name} disagree at x = {x}: got {back}"
                )));
            }
        }
        let mean = quad::integrate_with(|x| x * pdf(x), lo, hi, &breaks, 1e-12)?;
        let second = quad::integrate_with(|x| (x - mean).powi(2) * pdf(x), lo, hi, &breaks, 1e-12)?;
        Ok(CustomLaw {
            name,
            pdf,
            cdf,
            quantile,
            support,
            mean,
            variance: second,
        })
    }
}

impl ContinuousLaw for CustomLaw {
    fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }
    fn quantile(&self, u: f64) -> f64 {
        (self.quantile)(u)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
    fn mean(&self) -> f64 {
        self.mean
    }
    fn variance(&self) -> f64 {
        self.variance
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// One support point of a discrete law. The label identifies the atom in
/// integer sets; the value is what gets emitted.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Atom {
    pub label: i64,
    pub value: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteLaw {
    name: String,
    atoms: Vec<Atom>,
}

impl DiscreteLaw {
    pub fn new(name: impl Into<String>, mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("discrete law needs atoms".into()));
        }
        atoms.sort_by_key(|a| a.label);
        for w in atoms.windows(2) {
            if w[0].label == w[1].label {
                return Err(Error::InvalidParameter(format!(
                    "duplicate atom label {}",
                    w[0].label
                )));
            }
        }
        if atoms.iter().any(|a| !(a.prob >= 0.0) || !a.value.is_finite()) {
            return Err(Error::InvalidParameter(
                "atom probabilities must be non-negative and values finite".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "atom probabilities sum to {total}"
            )));
        }
        Ok(DiscreteLaw {
            name: name.into(),
            atoms,
        })
    }

    /// Integer-valued law with labels equal to values.
    pub fn from_pmf(name: impl Into<String>, pmf: &[(i64, f64)]) -> Result<Self> {
        let atoms = pmf
            .iter()
            .map(|&(k, prob)| Atom {
                label: k,
                value: k as f64,
                prob,
            })
            .collect();
        DiscreteLaw::new(name, atoms)
    }

    pub fn binomial(trials: u64, prob: f64) -> Result<Self> {
        let b = Binomial::new(prob, trials)
            .map_err(|e| Error::InvalidParameter(format!("binomial({trials}, {prob}): {e}")))?;
        let pmf: Vec<(i64, f64)> = (0..=trials).map(|k| (k as i64, b.pmf(k))).collect();
        DiscreteLaw::from_pmf(format!("Bin({trials}, {prob})"), &pmf)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|a| a.prob * (a.value - m).powi(2)).sum()
    }

    /// Right-continuous distribution function in the value coordinate.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value <= x)
            .map(|a| a.prob)
            .sum::<f64>()
            .min(1.0)
    }
}
