//! Named configurations reproducing the worked examples and simulation
//! studies the crate was built to check.

use crate::covariance::{CovarianceFunction, TailRule};
use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::gbp::GbpModel;
use crate::marginal::{
    Atom, BivariateNormal, BoxSet, ContinuousLaw, CoupledPair, DiscreteLaw, ExponentialLaw, IntervalUnion, Marginal,
    NormalLaw, Partition, SupportSet, UniformLaw,
};
use crate::process::ProcessSpec;

/// Default series length for process presets.
pub const DEFAULT_LENGTH: usize = 2000;
/// Default lattice side for field presets.
pub const DEFAULT_SIDE: usize = 100;

#[derive(Clone, Debug)]
pub enum PresetSpec {
    Process(ProcessSpec),
    Field(FieldSpec),
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Figure quoted alongside the configuration where one is published,
    /// e.g. a covariance constant or a set probability.
    pub published: Option<(&'static str, f64)>,
    /// Built without the covariance validity gate.
    pub unchecked: bool,
    pub spec: PresetSpec,
}

impl Preset {
    pub fn process(&self) -> Option<&ProcessSpec> {
        match &self.spec {
            PresetSpec::Process(p) => Some(p),
            PresetSpec::Field(_) => None,
        }
    }

    pub fn field(&self) -> Option<&FieldSpec> {
        match &self.spec {
            PresetSpec::Field(f) => Some(f),
            PresetSpec::Process(_) => None,
        }
    }
}

pub const PRESET_NAMES: [&str; 12] = [
    "exp-lrd-6.1",
    "gauss-lrd-6.1",
    "uniform-5.9i",
    "uniform2d-5.9ii",
    "bivariate-gauss-6.2",
    "bivariate-exp-6.2",
    "bivariate-binomial-6.2",
    "gauss-field-6.3",
    "gauss-field-6.3b",
    "binary-field-5.10",
    "gauss-field-5.11i",
    "gauss-field-5.11ii",
];

fn upper(law: &NormalLaw, alpha: f64) -> f64 {
    law.quantile(1.0 - alpha)
}

fn upper_tail(lo: f64) -> Result<SupportSet> {
    SupportSet::interval(lo, f64::INFINITY)
}

fn boxes(parts: &[[(f64, f64); 2]]) -> Result<SupportSet> {
    let b = parts
        .iter()
        .map(|p| {
            Ok(BoxSet::new(vec![
                IntervalUnion::interval(p[0].0, p[0].1)?,
                IntervalUnion::interval(p[1].0, p[1].1)?,
            ]))
        })
        .collect::<Result<Vec<_>>>()?;
    SupportSet::union_of_boxes(b)
}

fn process(
    marginal: Marginal,
    set: SupportSet,
    cov: CovarianceFunction,
    unchecked: bool,
) -> Result<ProcessSpec> {
    let p = marginal.set_mass(&set)?;
    let g = if unchecked {
        GbpModel::new_unchecked(p, cov)?
    } else {
        GbpModel::new(p, cov)?
    };
    ProcessSpec::new(marginal, set, g)
}

fn field(marginal: Marginal, cells: Vec<SupportSet>, covs: [CovarianceFunction; 2], side: usize) -> Result<FieldSpec> {
    // Axis probabilities are read off the cells: p1 = A^{10} + A^{11}, p2 = A^{01} + A^{11}.
    let m: Vec<f64> = cells.iter().map(|c| marginal.set_mass(c)).collect::<Result<_>>()?;
    let probs = vec![m[1] + m[3], m[2] + m[3]];
    let partition = Partition::new(&marginal, probs.clone(), cells)?;
    let [c1, c2] = covs;
    let gbps = vec![GbpModel::new(probs[0], c1)?, GbpModel::new(probs[1], c2)?];
    FieldSpec::new(marginal, partition, gbps, vec![side, side])
}

/// Builds the named preset.
pub fn preset(name: &str) -> Result<Preset> {
    let inf = f64::INFINITY;
    let ninf = f64::NEG_INFINITY;
    let std = NormalLaw::standard();
    let exp1 = || -> Result<Marginal> { Ok(Marginal::continuous(ExponentialLaw::new(1.0)?)) };
    let out = match name {
        "exp-lrd-6.1" => Preset {
            name: "exp-lrd-6.1",
            description: "Exp(1) marginal, A = (-ln .3, inf), p = .3, C(k) = .12 k^-.6",
            published: Some(("covariance constant", 0.355)),
            unchecked: false,
            spec: PresetSpec::Process(process(
                exp1()?,
                upper_tail(-(0.3f64).ln())?,
                CovarianceFunction::power_law(0.12, 0.7)?,
                false,
            )?),
        },
        "gauss-lrd-6.1" => Preset {
            name: "gauss-lrd-6.1",
            description: "N(0,1) marginal, A = (z_.3, inf), p = .3, C(k) = .12 k^-.6",
            published: Some(("covariance constant", 0.329)),
            unchecked: false,
            spec: PresetSpec::Process(process(
                Marginal::continuous(std.clone()),
                upper_tail(upper(&std, 0.3))?,
                CovarianceFunction::power_law(0.12, 0.7)?,
                false,
            )?),
        },
        "uniform-5.9i" => Preset {
            name: "uniform-5.9i",
            description: "U(0,1) marginal, A = (0, .3), p = .3, C(k) = .1 e^-.5k",
            published: Some(("covariance factor", 0.25)),
            unchecked: false,
            spec: PresetSpec::Process(process(
                Marginal::continuous(UniformLaw::new(0.0, 1.0)?),
                SupportSet::interval(0.0, 0.3)?,
                CovarianceFunction::exponential(0.1, 0.5)?,
                false,
            )?),
        },
        "uniform2d-5.9ii" => Preset {
            name: "uniform2d-5.9ii",
            description: "U(0,1)^2 marginal, A = (0,.6) x (0,.5), p = .3, C(k) = .1 e^-.5k",
            published: None,
            unchecked: false,
            spec: PresetSpec::Process(process(
                Marginal::Product(vec![
                    std::sync::Arc::new(UniformLaw::new(0.0, 1.0)?),
                    std::sync::Arc::new(UniformLaw::new(0.0, 1.0)?),
                ]),
                boxes(&[[(0.0, 0.6), (0.0, 0.5)]])?,
                CovarianceFunction::exponential(0.1, 0.5)?,
                false,
            )?),
        },
        "bivariate-gauss-6.2" => Preset {
            name: "bivariate-gauss-6.2",
            description: "N(0, [[1,-.5],[-.5,1]]), A = (.2,inf) x (-inf,-.2), C(k) = .2 e^-.1k",
            published: Some(("set probability", 0.258)),
            unchecked: true,
            spec: PresetSpec::Process(process(
                Marginal::BivariateNormal(BivariateNormal::new([0.0, 0.0], [[1.0, -0.5], [-0.5, 1.0]])?),
                boxes(&[[(0.2, inf), (ninf, -0.2)]])?,
                CovarianceFunction::exponential(0.2, 0.1)?,
                true,
            )?),
        },
        "bivariate-exp-6.2" => {
            let a3 = -(0.3f64).ln();
            let a8 = -(0.8f64).ln();
            let pair = CoupledPair::new(exp1()?, IntervalUnion::interval(a3, inf)?, 0.12)?;
            Preset {
                name: "bivariate-exp-6.2",
                description: "coupled Exp(1) pair (p0 = .3, c0 = .12), A = {x1 > -ln .3, x2 > -ln .8} u {x1 > -ln .8, x2 > -ln .3}, C(k) = .12 e^-.2k",
                published: Some(("set probability", 0.339)),
                unchecked: true,
                spec: PresetSpec::Process(process(
                    Marginal::CoupledPair(pair),
                    boxes(&[[(a3, inf), (a8, inf)], [(a8, inf), (a3, inf)]])?,
                    CovarianceFunction::exponential(0.12, 0.2)?,
                    true,
                )?),
            }
        }
        "bivariate-binomial-6.2" => {
            let base = Marginal::Discrete(DiscreteLaw::binomial(20, 0.4)?);
            let pair = CoupledPair::new(base, IntervalUnion::interval(ninf, 7.0)?, 0.12)?;
            Preset {
                name: "bivariate-binomial-6.2",
                description: "coupled Binomial(20,.4) pair (A0 = {x <= 7}, c0 = .12), A = {x1 <= 7, x2 <= 9} u {x1 <= 9, x2 <= 7}, C(k) = .2 e^-.2k",
                published: Some(("set probability", 0.377)),
                unchecked: true,
                spec: PresetSpec::Process(process(
                    Marginal::CoupledPair(pair),
                    boxes(&[[(ninf, 7.0), (ninf, 9.0)], [(ninf, 9.0), (ninf, 7.0)]])?,
                    CovarianceFunction::exponential(0.2, 0.2)?,
                    true,
                )?),
            }
        }
        "gauss-field-6.3" => {
            let z = |a| upper(&std, a);
            let cells = vec![
                SupportSet::intervals(&[(-z(0.25), -z(0.4)), (z(0.4), z(0.25))])?,
                SupportSet::intervals(&[(-z(0.2), -z(0.25)), (z(0.15), inf)])?,
                SupportSet::intervals(&[(ninf, -z(0.2)), (z(0.25), z(0.15))])?,
                SupportSet::interval(-z(0.4), z(0.4))?,
            ];
            Preset {
                name: "gauss-field-6.3",
                description: "N(0,1) field, p1 = .4, C1 = .23 e^-.4i, p2 = .5, C2 = .24 e^-.5i",
                published: None,
                unchecked: false,
                spec: PresetSpec::Field(field(
                    Marginal::continuous(std.clone()),
                    cells,
                    [
                        CovarianceFunction::exponential(0.23, 0.4)?,
                        CovarianceFunction::exponential(0.24, 0.5)?,
                    ],
                    DEFAULT_SIDE,
                )?),
            }
        }
        "gauss-field-6.3b" => {
            let a10 = IntervalUnion::interval(0.5, 1.386)?;
            let a01 = IntervalUnion::interval(0.0, inf)?.difference(&a10);
            let cells = vec![
                SupportSet::Intervals(a10.mirror(0.0)),
                SupportSet::Intervals(a10.clone()),
                SupportSet::Intervals(a01.clone()),
                SupportSet::Intervals(a01.mirror(0.0)),
            ];
            Preset {
                name: "gauss-field-6.3b",
                description: "N(0,1) field, p1 = .5, C1 = .23 e^-.4i, p2 = .549, C2 = .24 e^-.5i",
                published: Some(("p2", 0.549)),
                unchecked: false,
                spec: PresetSpec::Field(field(
                    Marginal::continuous(std.clone()),
                    cells,
                    [
                        CovarianceFunction::exponential(0.23, 0.4)?,
                        CovarianceFunction::exponential(0.24, 0.5)?,
                    ],
                    DEFAULT_SIDE,
                )?),
            }
        }
        "binary-field-5.10" => {
            // Four labelled atoms; only the A^{11} atom carries the value 1.
            let atoms = (0..4)
                .map(|m| Atom {
                    label: m,
                    value: if m == 3 { 1.0 } else { 0.0 },
                    prob: 0.25,
                })
                .collect();
            let marginal = Marginal::Discrete(DiscreteLaw::new("binary", atoms)?);
            let cells = (0..4).map(|m| SupportSet::integers([m])).collect();
            let cov = || CovarianceFunction::tabulated(vec![0.1, 0.05], TailRule::Geometric);
            Preset {
                name: "binary-field-5.10",
                description: "X(t) = product of the two latent bits, p1 = p2 = .5, C(1) = .1",
                published: None,
                unchecked: false,
                spec: PresetSpec::Field(field(marginal, cells, [cov()?, cov()?], DEFAULT_SIDE)?),
            }
        }
        "gauss-field-5.11i" => {
            let a = 0.5;
            let b = (2.0 * std::f64::consts::LN_2).sqrt();
            let cells = vec![
                SupportSet::interval(-a, 0.0)?,
                SupportSet::interval(0.0, a)?,
                SupportSet::intervals(&[(-b, -a), (b, inf)])?,
                SupportSet::intervals(&[(ninf, -b), (a, b)])?,
            ];
            let c = || CovarianceFunction::exponential(0.12, 0.3);
            Preset {
                name: "gauss-field-5.11i",
                description: "N(0,1) field with cell means +-a, a' = .5, b = sqrt(2 ln 2)",
                published: None,
                unchecked: false,
                spec: PresetSpec::Field(field(Marginal::continuous(std.clone()), cells, [c()?, c()?], DEFAULT_SIDE)?),
            }
        }
        "gauss-field-5.11ii" => {
            let za: f64 = 0.2;
            // 4(.5 - zb)(zb - za) = za^2, the root with zb in (za, .5)
            let zb = ((0.5 + za) + ((0.5 - za) * (0.5 - za) - za * za).sqrt()) / 2.0;
            let a = upper(&std, za);
            let b = upper(&std, zb);
            let cells = vec![
                SupportSet::intervals(&[(-a, -b), (b, a)])?,
                SupportSet::interval(ninf, -a)?,
                SupportSet::interval(a, inf)?,
                SupportSet::interval(-b, b)?,
            ];
            let c = || CovarianceFunction::exponential(0.12, 0.3);
            Preset {
                name: "gauss-field-5.11ii",
                description: "N(0,1) field with A10 = (-inf,-a), A01 = (a,inf), A11 = (-b,b), z_a = .2",
                published: None,
                unchecked: false,
                spec: PresetSpec::Field(field(Marginal::continuous(std.clone()), cells, [c()?, c()?], DEFAULT_SIDE)?),
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_preset_builds() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(p.name, name);
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn published_process_figures() {
        let c = |n: &str| {
            let p = preset(n).unwrap();
            p.process().unwrap().theoretical_cov()[0][0] * 0.12
        };
        assert_abs_diff_eq!(c("exp-lrd-6.1"), 0.355, epsilon = 1e-3);
        assert_abs_diff_eq!(c("gauss-lrd-6.1"), 0.329, epsilon = 1e-3);
        let g = preset("bivariate-gauss-6.2").unwrap();
        let s = g.process().unwrap();
        assert_abs_diff_eq!(s.p(), 0.258, epsilon = 5e-4);
        let d = s.theoretical_cov();
        assert_abs_diff_eq!(d[0][0] * 0.2, 0.386, epsilon = 2e-3);
        assert!(d[0][1] < 0.0);
        let e = preset("bivariate-exp-6.2").unwrap();
        assert_abs_diff_eq!(e.process().unwrap().p(), 0.339, epsilon = 5e-4);
    }

    #[test]
    fn uniform_2d_factor() {
        let p = preset("uniform2d-5.9ii").unwrap();
        let d = p.process().unwrap().theoretical_cov();
        let (a1, a2) = (0.6, 0.5);
        for (k, ak) in [a1, a2].iter().enumerate() {
            for (l, al) in [a1, a2].iter().enumerate() {
                let want = (ak - 1.0) * (al - 1.0) / (4.0 * (1.0 - a1 * a2) * (1.0 - a1 * a2));
                assert_abs_diff_eq!(d[k][l], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn field_axis_probabilities() {
        let f = preset("gauss-field-6.3").unwrap();
        let probs = f.field().unwrap().partition().probs().to_vec();
        assert_abs_diff_eq!(probs[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 0.5, epsilon = 1e-12);
        let g = preset("gauss-field-6.3b").unwrap();
        let probs = g.field().unwrap().partition().probs().to_vec();
        assert_abs_diff_eq!(probs[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[1], 0.549, epsilon = 1e-3);
    }
}
