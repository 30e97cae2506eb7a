//! Draws from a marginal restricted to a subset of its support.

use std::collections::BTreeSet;

use rand::distr::Open01;
use rand::Rng;

use super::law::{ContinuousLaw, DiscreteLaw, Law};
use super::set::{BoxSet, IntervalUnion, SupportSet};
use super::{interval_mass, label_complement, BivariateNormal, Marginal};
use crate::error::{Error, Result};

/// Attempts allowed per draw for rejection sampling.
pub const REJECTION_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
enum UniSampler {
    Continuous {
        law: Law,
        /// `(cdf(lo), cdf(hi), lo, hi)` for each interval.
        pieces: Vec<(f64, f64, f64, f64)>,
        cum: Vec<f64>,
    },
    Discrete {
        values: Vec<f64>,
        cum: Vec<f64>,
    },
}

fn pick(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("non-empty weights");
    cum.partition_point(|&c| c <= u * total).min(cum.len() - 1)
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

impl UniSampler {
    fn continuous(law: &Law, set: &IntervalUnion) -> Option<(Self, f64)> {
        let cdf = |x: f64| {
            if x == f64::NEG_INFINITY {
                0.0
            } else if x == f64::INFINITY {
                1.0
            } else {
                law.cdf(x)
            }
        };
        let mut pieces = Vec::new();
        let mut masses = Vec::new();
        for p in set.parts() {
            let m = interval_mass(law.as_ref(), p.lo, p.hi);
            if m > 0.0 {
                pieces.push((cdf(p.lo), cdf(p.hi), p.lo, p.hi));
                masses.push(m);
            }
        }
        if pieces.is_empty() {
            return None;
        }
        let cum = cumulative(masses);
        let total = *cum.last().unwrap();
        Some((
            UniSampler::Continuous {
                law: law.clone(),
                pieces,
                cum,
            },
            total,
        ))
    }

    fn discrete(d: &DiscreteLaw, keep: impl Fn(i64, f64) -> bool) -> Option<(Self, f64)> {
        let chosen: Vec<_> = d
            .atoms()
            .iter()
            .filter(|a| a.prob > 0.0 && keep(a.label, a.value))
            .collect();
        if chosen.is_empty() {
            return None;
        }
        let values = chosen.iter().map(|a| a.value).collect();
        let cum = cumulative(chosen.iter().map(|a| a.prob));
        let total = *cum.last().unwrap();
        Some((UniSampler::Discrete { values, cum }, total))
    }

    fn for_marginal(m: &Marginal, set: &IntervalUnion) -> Result<Option<(Self, f64)>> {
        match m {
            Marginal::Continuous(law) => Ok(Self::continuous(law, set)),
            Marginal::Discrete(d) => Ok(Self::discrete(d, |_, v| set.contains(v))),
            other => Err(Error::Unsupported(format!(
                "{} is not one-dimensional",
                other.name()
            ))),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            UniSampler::Continuous { law, pieces, cum } => {
                let i = if pieces.len() == 1 {
                    0
                } else {
                    pick(cum, rng.random())
                };
                let (clo, chi, lo, hi) = pieces[i];
                let v: f64 = rng.sample(Open01);
                let x = law.quantile(clo + v * (chi - clo));
                x.clamp(lo, hi)
            }
            UniSampler::Discrete { values, cum } => values[pick(cum, rng.random())],
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    /// Mixture of product-form components, sampled exactly.
    Mixture {
        components: Vec<Vec<UniSampler>>,
        cum: Vec<f64>,
    },
    Gaussian {
        mean: [f64; 2],
        chol: [[f64; 2]; 2],
    },
    Reject {
        base: Box<RestrictedSampler>,
        set: SupportSet,
    },
}

/// Sampler for `f` restricted to a set and renormalised.
#[derive(Clone, Debug)]
pub struct RestrictedSampler {
    dim: usize,
    mass: f64,
    kind: Kind,
}

impl RestrictedSampler {
    pub fn new(marginal: &Marginal, set: &SupportSet) -> Result<Self> {
        let dim = marginal.dim();
        let built = match (marginal, set) {
            (Marginal::Continuous(_) | Marginal::Discrete(_), SupportSet::Intervals(u)) => {
                mixture_of(vec![UniSampler::for_marginal(marginal, u)?.map(|(s, m)| (vec![s], m))])
            }
            (Marginal::Discrete(d), SupportSet::Integers(labels)) => {
                integer_sampler(d, labels)
            }
            (Marginal::Discrete(d), SupportSet::Complement(inner))
                if matches!(**inner, SupportSet::Integers(_)) =>
            {
                let SupportSet::Integers(labels) = &**inner else { unreachable!() };
                integer_sampler(d, &label_complement(d, labels))
            }
            (Marginal::Continuous(_) | Marginal::Discrete(_), SupportSet::Boxes(bs)) => {
                let mut comps = Vec::new();
                for b in bs {
                    comps.push(UniSampler::for_marginal(marginal, &b.coords[0])?.map(|(s, m)| (vec![s], m)));
                }
                mixture_of(comps)
            }
            (Marginal::Product(laws), SupportSet::Boxes(bs)) => {
                let comps = bs
                    .iter()
                    .map(|b| {
                        let mut parts = Vec::with_capacity(laws.len());
                        let mut mass = 1.0;
                        for (law, c) in laws.iter().zip(&b.coords) {
                            let (s, m) = UniSampler::continuous(law, c)?;
                            parts.push(s);
                            mass *= m;
                        }
                        Some((parts, mass))
                    })
                    .collect();
                mixture_of(comps)
            }
            (Marginal::CoupledPair(cp), SupportSet::Boxes(bs)) => {
                let mut comps = Vec::new();
                for b in bs {
                    for l1 in 0..2 {
                        let s1 = UniSampler::for_marginal(cp.base(), &b.coords[0].intersect(&cp.side(l1)))?;
                        for l2 in 0..2 {
                            let s2 = UniSampler::for_marginal(cp.base(), &b.coords[1].intersect(&cp.side(l2)))?;
                            let w = cp.weight(l1, l2);
                            if let (Some((a, ma)), Some((b2, mb))) = (s1.clone(), s2) {
                                if w > 0.0 {
                                    comps.push(Some((vec![a, b2], ma * mb * w)));
                                }
                            }
                        }
                    }
                }
                mixture_of(comps)
            }
            (Marginal::BivariateNormal(bn), SupportSet::Boxes(bs))
                if bs.len() == 1 && bs[0] == BoxSet::full(2) =>
            {
                Ok(Some(gaussian(bn)))
            }
            _ => rejection(marginal, set),
        }?;
        let kind = built.ok_or_else(|| {
            Error::InvalidParameter(format!("set {set} has zero mass under {}", marginal.name()))
        })?;
        let mass = match &kind {
            Kind::Mixture { cum, .. } => *cum.last().unwrap(),
            Kind::Gaussian { .. } => 1.0,
            Kind::Reject { .. } => marginal.set_mass_with_error(set)?.0,
        };
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "set {set} has zero mass under {}",
                marginal.name()
            )));
        }
        Ok(RestrictedSampler { dim, mass, kind })
    }

    /// Mass of the set under the unrestricted law.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when draws are exact rather than rejection-based.
    pub fn is_exact(&self) -> bool {
        !matches!(self.kind, Kind::Reject { .. })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            Kind::Mixture { components, cum } => {
                let i = if components.len() == 1 {
                    0
                } else {
                    pick(cum, rng.random())
                };
                for (o, s) in out.iter_mut().zip(&components[i]) {
                    *o = s.sample(rng);
                }
                Ok(())
            }
            Kind::Gaussian { mean, chol } => {
                let z0: f64 = rng.sample(rand_distr_normal());
                let z1: f64 = rng.sample(rand_distr_normal());
                out[0] = mean[0] + chol[0][0] * z0;
                out[1] = mean[1] + chol[1][0] * z0 + chol[1][1] * z1;
                Ok(())
            }
            Kind::Reject { base, set } => {
                for _ in 0..REJECTION_CAP {
                    base.sample_into(rng, out)?;
                    if set.contains(out) {
                        return Ok(());
                    }
                }
                Err(Error::RejectionCapExceeded {
                    attempts: REJECTION_CAP,
                })
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim];
        self.sample_into(rng, &mut x)?;
        Ok(x)
    }
}

/// Standard normal by inversion, so only one uniform is consumed per draw.
fn rand_distr_normal() -> impl rand::distr::Distribution<f64> {
    struct StdNormal;
    impl rand::distr::Distribution<f64> for StdNormal {
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            let u: f64 = rng.sample(Open01);
            super::NormalLaw::standard().quantile(u)
        }
    }
    StdNormal
}

fn mixture_of(comps: Vec<Option<(Vec<UniSampler>, f64)>>) -> Result<Option<Kind>> {
    let kept: Vec<(Vec<UniSampler>, f64)> = comps.into_iter().flatten().filter(|(_, m)| *m > 0.0).collect();
    if kept.is_empty() {
        return Ok(None);
    }
    let cum = cumulative(kept.iter().map(|(_, m)| *m));
    Ok(Some(Kind::Mixture {
        components: kept.into_iter().map(|(c, _)| c).collect(),
        cum,
    }))
}

fn integer_sampler(d: &DiscreteLaw, labels: &BTreeSet<i64>) -> Result<Option<Kind>> {
    mixture_of(vec![UniSampler::discrete(d, |l, _| labels.contains(&l)).map(|(s, m)| (vec![s], m))])
}

fn gaussian(bn: &BivariateNormal) -> Kind {
    let c = bn.cov();
    let l00 = c[0][0].sqrt();
    let l10 = c[1][0] / l00;
    let l11 = (c[1][1] - l10 * l10).sqrt();
    Kind::Gaussian {
        mean: bn.mean(),
        chol: [[l00, 0.0], [l10, l11]],
    }
}

fn rejection(marginal: &Marginal, set: &SupportSet) -> Result<Option<Kind>> {
    let base = RestrictedSampler::new(marginal, &marginal.full_set())?;
    Ok(Some(Kind::Reject {
        base: Box::new(base),
        set: set.clone(),
    }))
}
