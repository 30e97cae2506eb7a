//! Target marginal distributions, integrals over subsets of their support,
//! restricted sampling and partitions of the support into cells.

mod law;
mod partition;
mod sampler;
mod set;

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

pub use law::{
    Atom, ContinuousLaw, CustomLaw, DiscreteLaw, ExponentialLaw, Law, NormalLaw, UniformLaw,
};
pub use partition::{
    build_partition, cell_probability, find_balanced_subset, BalanceTarget, Partition, PartitionMode,
    MEAN_TOLERANCE,
};
pub use sampler::RestrictedSampler;
pub use set::{BoxSet, Interval, IntervalUnion, PredicateSet, SupportSet};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::{stream, Purpose};
use law::TAIL_EPS;

/// Per-coordinate integrand factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    One,
    Pow(u32),
    /// `exp(i theta x)`.
    Cis(f64),
}

impl Kernel {
    fn eval(self, x: f64) -> Complex64 {
        match self {
            Kernel::One => Complex64::new(1.0, 0.0),
            Kernel::Pow(q) => Complex64::new(x.powi(q as i32), 0.0),
            Kernel::Cis(t) => Complex64::from_polar(1.0, t * x),
        }
    }

    fn is_real(self) -> bool {
        !matches!(self, Kernel::Cis(t) if t != 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BivariateNormal {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
}

impl BivariateNormal {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if !(cov[0][0] > 0.0 && det > 0.0) || (cov[0][1] - cov[1][0]).abs() > 1e-15 {
            return Err(Error::InvalidParameter(format!(
                "bivariate normal covariance {cov:?} is not symmetric positive definite"
            )));
        }
        Ok(BivariateNormal { mean, cov })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    fn sd(&self, k: usize) -> f64 {
        self.cov[k][k].sqrt()
    }

    /// Law of the second coordinate given the first.
    fn conditional(&self, x1: f64) -> NormalLaw {
        let s1 = self.cov[0][0];
        let m = self.mean[1] + self.cov[0][1] / s1 * (x1 - self.mean[0]);
        let v = self.cov[1][1] - self.cov[0][1] * self.cov[0][1] / s1;
        NormalLaw::new(m, v.sqrt()).expect("positive conditional variance")
    }
}

/// Two coordinates with a common base law, dependent through the
/// indicator of a base set `A0`: cell `(l1, l2)` of `A0^{l1} x A0^{l2}`
/// has density `f(x1) f(x2) (1 + (-1)^{l1+l2} c0 / (pi(l1) pi(l2)))`.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    base: Box<Marginal>,
    a0: IntervalUnion,
    p0: f64,
    c0: f64,
}

impl CoupledPair {
    pub fn new(base: Marginal, a0: IntervalUnion, c0: f64) -> Result<Self> {
        if !matches!(base, Marginal::Continuous(_) | Marginal::Discrete(_)) {
            return Err(Error::Unsupported(
                "coupled pair needs a one-dimensional base law".into(),
            ));
        }
        let p0 = base.set_mass(&SupportSet::Intervals(a0.clone()))?;
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "base set has mass {p0}, need (0, 1)"
            )));
        }
        let pair = CoupledPair {
            base: Box::new(base),
            a0,
            p0,
            c0,
        };
        for l1 in 0..2 {
            for l2 in 0..2 {
                let w = pair.weight(l1, l2);
                if w < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "coupling c0 = {c0} gives negative weight {w} on cell ({l1}, {l2})"
                    )));
                }
            }
        }
        Ok(pair)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn base(&self) -> &Marginal {
        &self.base
    }

    pub fn a0(&self) -> &IntervalUnion {
        &self.a0
    }

    fn pi(&self, l: usize) -> f64 {
        if l == 1 {
            self.p0
        } else {
            1.0 - self.p0
        }
    }

    /// Density multiplier on cell `(l1, l2)`.
    pub fn weight(&self, l1: usize, l2: usize) -> f64 {
        let sign = if (l1 + l2).is_multiple_of(2) { 1.0 } else { -1.0 };
        1.0 + sign * self.c0 / (self.pi(l1) * self.pi(l2))
    }

    fn side(&self, l: usize) -> IntervalUnion {
        if l == 1 {
            self.a0.clone()
        } else {
            self.a0.complement()
        }
    }
}

#[derive(Clone, Debug)]
pub enum Marginal {
    Continuous(Law),
    Discrete(DiscreteLaw),
    /// Independent continuous coordinates.
    Product(Vec<Law>),
    BivariateNormal(BivariateNormal),
    CoupledPair(CoupledPair),
}

impl Marginal {
    pub fn continuous(law: impl ContinuousLaw + 'static) -> Self {
        Marginal::Continuous(Arc::new(law))
    }

    pub fn dim(&self) -> usize {
        match self {
            Marginal::Continuous(_) | Marginal::Discrete(_) => 1,
            Marginal::Product(laws) => laws.len(),
            Marginal::BivariateNormal(_) | Marginal::CoupledPair(_) => 2,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Marginal::Continuous(l) => l.name(),
            Marginal::Discrete(d) => d.name().to_string(),
            Marginal::Product(laws) => laws.iter().map(|l| l.name()).collect::<Vec<_>>().join(" x "),
            Marginal::BivariateNormal(b) => format!("N2({:?}, {:?})", b.mean, b.cov),
            Marginal::CoupledPair(c) => format!(
                "coupled pair of {} on {} with c0 = {}",
                c.base.name(),
                c.a0,
                c.c0
            ),
        }
    }

    /// The whole support as a set of the matching kind.
    pub fn full_set(&self) -> SupportSet {
        match self.dim() {
            1 => SupportSet::Intervals(IntervalUnion::real_line()),
            d => SupportSet::Boxes(vec![BoxSet::full(d)]),
        }
    }

    /// `E[prod_k kernel_k(X_k) 1{X in S}]`.
    pub fn integral(&self, set: &SupportSet, kernels: &[Kernel]) -> Result<Complex64> {
        if kernels.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: kernels.len(),
            });
        }
        if let Some(d) = set.dim() {
            if d != self.dim() {
                return Err(Error::Dimension {
                    expected: self.dim(),
                    got: d,
                });
            }
        }
        match set {
            SupportSet::Complement(inner) => {
                let full = self.integral(&self.full_set(), kernels)?;
                Ok(full - self.integral(inner, kernels)?)
            }
            SupportSet::Predicate(p) => Ok(self.predicate_integral(p, kernels)?.0),
            _ => self.exact_integral(set, kernels),
        }
    }

    fn exact_integral(&self, set: &SupportSet, kernels: &[Kernel]) -> Result<Complex64> {
        match (self, set) {
            (Marginal::Continuous(law), SupportSet::Intervals(u)) => {
                continuous_integral(law.as_ref(), u, kernels[0])
            }
            (Marginal::Discrete(d), SupportSet::Intervals(u)) => {
                Ok(discrete_integral(d, |a| u.contains(a.value), kernels[0]))
            }
            (Marginal::Discrete(d), SupportSet::Integers(s)) => {
                Ok(discrete_integral(d, |a| s.contains(&a.label), kernels[0]))
            }
            (Marginal::Continuous(_) | Marginal::Discrete(_), SupportSet::Boxes(bs)) => {
                let mut total = Complex64::new(0.0, 0.0);
                for b in bs {
                    total += self.exact_integral(&SupportSet::Intervals(b.coords[0].clone()), kernels)?;
                }
                Ok(total)
            }
            (Marginal::Product(laws), SupportSet::Boxes(bs)) => {
                let mut total = Complex64::new(0.0, 0.0);
                for b in bs {
                    let mut term = Complex64::new(1.0, 0.0);
                    for ((law, c), &k) in laws.iter().zip(&b.coords).zip(kernels) {
                        term *= continuous_integral(law.as_ref(), c, k)?;
                    }
                    total += term;
                }
                Ok(total)
            }
            (Marginal::CoupledPair(cp), SupportSet::Boxes(bs)) => {
                let mut total = Complex64::new(0.0, 0.0);
                for b in bs {
                    for l1 in 0..2 {
                        let s1 = SupportSet::Intervals(b.coords[0].intersect(&cp.side(l1)));
                        let i1 = cp.base.exact_integral(&s1, &kernels[..1])?;
                        for l2 in 0..2 {
                            let s2 = SupportSet::Intervals(b.coords[1].intersect(&cp.side(l2)));
                            let i2 = cp.base.exact_integral(&s2, &kernels[1..])?;
                            total += i1 * i2 * cp.weight(l1, l2);
                        }
                    }
                }
                Ok(total)
            }
            (Marginal::BivariateNormal(bn), SupportSet::Boxes(bs)) => {
                let mut total = Complex64::new(0.0, 0.0);
                for b in bs {
                    total += bivariate_box_integral(bn, b, kernels)?;
                }
                Ok(total)
            }
            (m, s) => Err(Error::Unsupported(format!(
                "integral of {} over {s}",
                m.name()
            ))),
        }
    }

    /// Monte Carlo estimate over a predicate set, with its standard error.
    fn predicate_integral(&self, p: &PredicateSet, kernels: &[Kernel]) -> Result<(Complex64, f64)> {
        if p.bounds.is_none() {
            return Err(Error::Unsupported(format!(
                "predicate set `{}` has no bounding box",
                p.name
            )));
        }
        if p.samples < 2 {
            return Err(Error::InvalidParameter("predicate needs at least 2 samples".into()));
        }
        let sampler = RestrictedSampler::new(self, &self.full_set())?;
        let mut rng = stream(0x5eed, Purpose::MonteCarlo, name_hash(&p.name));
        let mut x = vec![0.0; self.dim()];
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sq = 0.0;
        for _ in 0..p.samples {
            sampler.sample_into(&mut rng, &mut x)?;
            if p.contains(&x) {
                let v = x
                    .iter()
                    .zip(kernels)
                    .fold(Complex64::new(1.0, 0.0), |acc, (&xi, k)| acc * k.eval(xi));
                sum += v;
                sq += v.norm_sqr();
            }
        }
        let n = p.samples as f64;
        let mean = sum / n;
        let var = (sq / n - mean.norm_sqr()).max(0.0);
        Ok((mean, (var / (n - 1.0)).sqrt()))
    }

    pub fn set_mass(&self, set: &SupportSet) -> Result<f64> {
        let ones = vec![Kernel::One; self.dim()];
        Ok(self.integral(set, &ones)?.re)
    }

    /// Mass with its Monte Carlo standard error (zero for exact sets).
    pub fn set_mass_with_error(&self, set: &SupportSet) -> Result<(f64, f64)> {
        let ones = vec![Kernel::One; self.dim()];
        match set {
            SupportSet::Predicate(p) => {
                let (v, se) = self.predicate_integral(p, &ones)?;
                Ok((v.re, se))
            }
            SupportSet::Complement(inner) if matches!(**inner, SupportSet::Predicate(_)) => {
                let (m, se) = self.set_mass_with_error(inner)?;
                Ok((1.0 - m, se))
            }
            _ => Ok((self.set_mass(set)?, 0.0)),
        }
    }

    /// `∫_S x_k f` for every coordinate `k`.
    pub fn set_mean(&self, set: &SupportSet) -> Result<Vec<f64>> {
        self.set_moment(set, 1)
    }

    /// `∫_S x_k^q f` for every coordinate `k`.
    pub fn set_moment(&self, set: &SupportSet, q: u32) -> Result<Vec<f64>> {
        (0..self.dim())
            .map(|k| {
                let mut kernels = vec![Kernel::One; self.dim()];
                kernels[k] = Kernel::Pow(q);
                Ok(self.integral(set, &kernels)?.re)
            })
            .collect()
    }

    /// `E[exp(i theta' X) 1{X in S}]`.
    pub fn set_cf(&self, set: &SupportSet, theta: &[f64]) -> Result<Complex64> {
        let kernels: Vec<Kernel> = theta.iter().map(|&t| Kernel::Cis(t)).collect();
        self.integral(set, &kernels)
    }

    pub fn cf(&self, theta: &[f64]) -> Result<Complex64> {
        self.set_cf(&self.full_set(), theta)
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        match self {
            Marginal::Continuous(l) => Ok(vec![l.mean()]),
            Marginal::Discrete(d) => Ok(vec![d.mean()]),
            Marginal::Product(laws) => Ok(laws.iter().map(|l| l.mean()).collect()),
            Marginal::BivariateNormal(b) => Ok(b.mean.to_vec()),
            Marginal::CoupledPair(_) => self.set_mean(&self.full_set()),
        }
    }

    /// Covariance matrix of one draw.
    pub fn covariance(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        let mut out = vec![vec![0.0; d]; d];
        match self {
            Marginal::Continuous(l) => out[0][0] = l.variance(),
            Marginal::Discrete(dl) => out[0][0] = dl.variance(),
            Marginal::Product(laws) => {
                for (k, l) in laws.iter().enumerate() {
                    out[k][k] = l.variance();
                }
            }
            Marginal::BivariateNormal(b) => {
                for (i, row) in out.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = b.cov[i][j];
                    }
                }
            }
            Marginal::CoupledPair(cp) => {
                let mu = self.mean()?;
                let full = self.full_set();
                let cross = self.integral(&full, &[Kernel::Pow(1), Kernel::Pow(1)])?.re;
                let var = cp.base.covariance()?[0][0];
                out[0][0] = var;
                out[1][1] = var;
                out[0][1] = cross - mu[0] * mu[1];
                out[1][0] = out[0][1];
            }
        }
        Ok(out)
    }

    /// Distribution function of coordinate `k`, for goodness-of-fit checks.
    pub fn coordinate_cdf(&self, k: usize) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync + '_>> {
        if k >= self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: k + 1,
            });
        }
        Ok(match self {
            Marginal::Continuous(l) => {
                let l = l.clone();
                Box::new(move |x| l.cdf(x))
            }
            Marginal::Discrete(d) => Box::new(move |x| d.cdf(x)),
            Marginal::Product(laws) => {
                let l = laws[k].clone();
                Box::new(move |x| l.cdf(x))
            }
            Marginal::BivariateNormal(b) => {
                let l = NormalLaw::new(b.mean[k], b.sd(k))?;
                Box::new(move |x| l.cdf(x))
            }
            Marginal::CoupledPair(cp) => return cp.base.coordinate_cdf(0),
        })
    }

    /// True for laws whose coordinates take finitely many values.
    pub fn is_discrete(&self) -> bool {
        match self {
            Marginal::Discrete(_) => true,
            Marginal::CoupledPair(cp) => cp.base.is_discrete(),
            _ => false,
        }
    }

    /// Draws from the full law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let sampler = RestrictedSampler::new(self, &self.full_set())?;
        let mut x = vec![0.0; self.dim()];
        sampler.sample_into(rng, &mut x)?;
        Ok(x)
    }
}

fn name_hash(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn discrete_integral(d: &DiscreteLaw, keep: impl Fn(&Atom) -> bool, k: Kernel) -> Complex64 {
    d.atoms()
        .iter()
        .filter(|a| keep(a))
        .map(|a| k.eval(a.value) * a.prob)
        .sum()
}

/// Range outside of which the law has less than `TAIL_EPS` mass.
fn effective_range(law: &dyn ContinuousLaw) -> (f64, f64) {
    let (lo, hi) = law.support();
    let lo = if lo.is_finite() { lo } else { law.quantile(TAIL_EPS) };
    let hi = if hi.is_finite() { hi } else { law.quantile(1.0 - TAIL_EPS) };
    (lo, hi)
}

fn interval_mass(law: &dyn ContinuousLaw, lo: f64, hi: f64) -> f64 {
    let cdf = |x: f64| {
        if x == f64::NEG_INFINITY {
            0.0
        } else if x == f64::INFINITY {
            1.0
        } else {
            law.cdf(x)
        }
    };
    let sf = |x: f64| {
        if x == f64::NEG_INFINITY {
            1.0
        } else if x == f64::INFINITY {
            0.0
        } else {
            law.sf(x)
        }
    };
    if lo.is_finite() && cdf(lo) > 0.5 {
        (sf(lo) - sf(hi)).max(0.0)
    } else {
        (cdf(hi) - cdf(lo)).max(0.0)
    }
}

const QUANTILE_BREAKS: [f64; 11] = [
    1e-6, 1e-3, 0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98, 0.999, 0.999_999,
];

fn continuous_integral(law: &dyn ContinuousLaw, set: &IntervalUnion, k: Kernel) -> Result<Complex64> {
    let (elo, ehi) = effective_range(law);
    let mut total = Complex64::new(0.0, 0.0);
    for part in set.parts() {
        if let Kernel::One = k {
            total += interval_mass(law, part.lo, part.hi);
            continue;
        }
        let lo = part.lo.max(elo);
        let hi = part.hi.min(ehi);
        if hi <= lo {
            continue;
        }
        let mut breaks: Vec<f64> = QUANTILE_BREAKS.iter().map(|&u| law.quantile(u)).collect();
        if let Kernel::Cis(t) = k {
            let period = 2.0 * std::f64::consts::PI / t.abs();
            let count = ((hi - lo) / period).ceil();
            if t != 0.0 && count < 2000.0 {
                breaks.extend((1..count as usize).map(|j| lo + j as f64 * period));
            }
        }
        if k.is_real() {
            let v = quad::integrate_with(|x| k.eval(x).re * law.pdf(x), lo, hi, &breaks, quad::ABS_TOL)?;
            total += v;
        } else {
            total += quad::integrate_with(|x| k.eval(x) * law.pdf(x), lo, hi, &breaks, quad::ABS_TOL)?;
        }
    }
    Ok(total)
}

fn bivariate_box_integral(bn: &BivariateNormal, b: &BoxSet, kernels: &[Kernel]) -> Result<Complex64> {
    let first = NormalLaw::new(bn.mean[0], bn.sd(0))?;
    let (elo, ehi) = effective_range(&first);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner = |x1: f64| -> Complex64 {
        let cond = bn.conditional(x1);
        let v = match kernels[1] {
            Kernel::One => Ok(Complex64::new(
                b.coords[1].parts().iter().map(|p| interval_mass(&cond, p.lo, p.hi)).sum(),
                0.0,
            )),
            Kernel::Pow(1) => Ok(Complex64::new(
                b.coords[1]
                    .parts()
                    .iter()
                    .map(|p| normal_partial_mean(&cond, p.lo, p.hi))
                    .sum(),
                0.0,
            )),
            k => continuous_integral(&cond, &b.coords[1], k),
        };
        match v {
            Ok(v) => v * kernels[0].eval(x1) * first.pdf(x1),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let breaks: Vec<f64> = QUANTILE_BREAKS.iter().map(|&u| first.quantile(u)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for part in b.coords[0].parts() {
        let lo = part.lo.max(elo);
        let hi = part.hi.min(ehi);
        if hi <= lo {
            continue;
        }
        total += quad::integrate_with(inner, lo, hi, &breaks, quad::ABS_TOL)?;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(total)
}

/// `∫_lo^hi x dN(m, s^2)` in closed form.
fn normal_partial_mean(law: &NormalLaw, lo: f64, hi: f64) -> f64 {
    let m = law.mean();
    let s = law.sd();
    let phi = |x: f64| {
        if x.is_infinite() {
            0.0
        } else {
            let z = (x - m) / s;
            (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        }
    };
    m * interval_mass(law, lo, hi) + s * (phi(lo) - phi(hi))
}

/// Labels of the atoms of `d` outside `set`.
pub(crate) fn label_complement(d: &DiscreteLaw, set: &BTreeSet<i64>) -> BTreeSet<i64> {
    d.atoms()
        .iter()
        .map(|a| a.label)
        .filter(|l| !set.contains(l))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp1() -> Marginal {
        Marginal::continuous(ExponentialLaw::new(1.0).unwrap())
    }

    #[test]
    fn exponential_mass_and_mean() {
        let a = -(0.3f64).ln();
        let s = SupportSet::interval(a, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(exp1().set_mass(&s).unwrap(), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(exp1().set_mean(&s).unwrap()[0], 0.661_192, epsilon = 1e-6);
        assert_abs_diff_eq!(exp1().set_mean(&s).unwrap()[0], (a + 1.0) * 0.3, epsilon = 1e-10);
    }

    #[test]
    fn normal_and_uniform_means() {
        let n = Marginal::continuous(NormalLaw::standard());
        let z = 0.524_400_512_708_041;
        let s = SupportSet::interval(z, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(n.set_mean(&s).unwrap()[0], 0.347_693, epsilon = 1e-6);
        let u = Marginal::continuous(UniformLaw::new(0.0, 1.0).unwrap());
        let s = SupportSet::interval(0.0, 0.5).unwrap();
        assert_abs_diff_eq!(u.set_mean(&s).unwrap()[0], 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(u.set_mass(&s.complement()).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn binomial_mass() {
        let b = Marginal::Discrete(DiscreteLaw::binomial(20, 0.4).unwrap());
        let s = SupportSet::integers(0..=7);
        let m = b.set_mass(&s).unwrap();
        assert!((m - 0.416).abs() < 5e-4);
        let via_interval = b.set_mass(&SupportSet::interval(f64::NEG_INFINITY, 7.0).unwrap()).unwrap();
        assert_abs_diff_eq!(m, via_interval, epsilon = 1e-15);
        assert_abs_diff_eq!(b.set_mass(&s.complement()).unwrap(), 1.0 - m, epsilon = 1e-15);
    }

    #[test]
    fn normal_cf() {
        let n = Marginal::continuous(NormalLaw::standard());
        let cf = n.cf(&[1.0]).unwrap();
        assert_abs_diff_eq!(cf.re, (-0.5f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(cf.im, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn bivariate_normal_box() {
        let bn = Marginal::BivariateNormal(
            BivariateNormal::new([0.0, 0.0], [[1.0, -0.5], [-0.5, 1.0]]).unwrap(),
        );
        let a = SupportSet::Boxes(vec![BoxSet::new(vec![
            IntervalUnion::interval(0.2, f64::INFINITY).unwrap(),
            IntervalUnion::interval(f64::NEG_INFINITY, -0.2).unwrap(),
        ])]);
        let p = bn.set_mass(&a).unwrap();
        assert_abs_diff_eq!(p, 0.257_708_6, epsilon = 1e-6);
        // the full box reproduces the moments
        let full = bn.full_set();
        assert_abs_diff_eq!(bn.set_mass(&full).unwrap(), 1.0, epsilon = 1e-9);
        let cross = bn.integral(&full, &[Kernel::Pow(1), Kernel::Pow(1)]).unwrap().re;
        assert_abs_diff_eq!(cross, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn coupled_pair_marginals_and_covariance() {
        let a = -(0.3f64).ln();
        let cp = CoupledPair::new(exp1(), IntervalUnion::interval(a, f64::INFINITY).unwrap(), 0.12).unwrap();
        let m = Marginal::CoupledPair(cp);
        let mu = m.mean().unwrap();
        assert_abs_diff_eq!(mu[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mu[1], 1.0, epsilon = 1e-9);
        let cov = m.covariance().unwrap();
        let d = a / 0.7;
        assert_abs_diff_eq!(cov[0][1], 0.12 * d * d, epsilon = 1e-9);
        assert!(CoupledPair::new(exp1(), IntervalUnion::interval(a, f64::INFINITY).unwrap(), 0.3).is_err());
    }

    #[test]
    fn predicate_mass_has_error_bar() {
        let u2 = Marginal::Product(vec![
            Arc::new(UniformLaw::new(0.0, 1.0).unwrap()),
            Arc::new(UniformLaw::new(0.0, 1.0).unwrap()),
        ]);
        let disc = SupportSet::Predicate(PredicateSet::new(
            "x^2 + y^2 < 1",
            |x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0,
            Some(vec![(0.0, 1.0), (0.0, 1.0)]),
            200_000,
        ));
        let (m, se) = u2.set_mass_with_error(&disc).unwrap();
        assert!((m - std::f64::consts::FRAC_PI_4).abs() < 4.0 * se);
        let unbounded = SupportSet::Predicate(PredicateSet::new("all", |_| true, None, 10));
        assert!(u2.set_mass(&unbounded).is_err());
    }
}
