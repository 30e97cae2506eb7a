//! JSON run configuration and its translation into model specifications.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer};

use gbpf_core::covariance::{CovarianceFunction, TailRule, DEFAULT_HORIZON};
use gbpf_core::field::FieldSpec;
use gbpf_core::gbp::GbpModel;
use gbpf_core::marginal::{
    BivariateNormal, BoxSet, ContinuousLaw, DiscreteLaw, ExponentialLaw, IntervalUnion, Marginal, NormalLaw, Partition,
    SupportSet, UniformLaw,
};
use gbpf_core::presets::{self, Preset, PresetSpec};
use gbpf_core::process::ProcessSpec;

use crate::CliError;

/// An interval endpoint: a number or one of `"inf"`, `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Endpoint(pub f64);

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Endpoint(v)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(Endpoint(f64::INFINITY)),
                "-inf" | "-infinity" => Ok(Endpoint(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("bad endpoint `{other}`"))),
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CovSpec {
    Exponential { c: f64, theta: f64 },
    StretchedExponential { c: f64, theta: f64, alpha: f64 },
    TwoExponential { c1: f64, rho1: f64, c2: f64, rho2: f64 },
    PowerLaw { c: f64, h: f64 },
    Tabulated { values: Vec<f64>, #[serde(default)] tail: TailRule },
}

impl CovSpec {
    pub fn build(&self) -> Result<CovarianceFunction, CliError> {
        let f = match self.clone() {
            CovSpec::Exponential { c, theta } => CovarianceFunction::exponential(c, theta),
            CovSpec::StretchedExponential { c, theta, alpha } => {
                CovarianceFunction::stretched_exponential(c, theta, alpha)
            }
            CovSpec::TwoExponential { c1, rho1, c2, rho2 } => CovarianceFunction::two_exponential(c1, rho1, c2, rho2),
            CovSpec::PowerLaw { c, h } => CovarianceFunction::power_law(c, h),
            CovSpec::Tabulated { values, tail } => CovarianceFunction::tabulated(values, tail),
        };
        f.map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MarginalSpec {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Binomial { trials: u64, prob: f64 },
    BivariateNormal { mean: [f64; 2], cov: [[f64; 2]; 2] },
    Product { components: Vec<MarginalSpec> },
}

impl MarginalSpec {
    fn continuous(&self) -> Result<Arc<dyn ContinuousLaw>, CliError> {
        let usage = |e: gbpf_core::Error| CliError::Usage(e.to_string());
        Ok(match self {
            MarginalSpec::Exponential { rate } => Arc::new(ExponentialLaw::new(*rate).map_err(usage)?),
            MarginalSpec::Normal { mean, sd } => Arc::new(NormalLaw::new(*mean, *sd).map_err(usage)?),
            MarginalSpec::Uniform { lo, hi } => Arc::new(UniformLaw::new(*lo, *hi).map_err(usage)?),
            _ => return Err(CliError::Usage("product components must be continuous one-dimensional laws".into())),
        })
    }

    pub fn build(&self) -> Result<Marginal, CliError> {
        let usage = |e: gbpf_core::Error| CliError::Usage(e.to_string());
        Ok(match self {
            MarginalSpec::Binomial { trials, prob } => {
                Marginal::Discrete(DiscreteLaw::binomial(*trials, *prob).map_err(usage)?)
            }
            MarginalSpec::BivariateNormal { mean, cov } => {
                Marginal::BivariateNormal(BivariateNormal::new(*mean, *cov).map_err(usage)?)
            }
            MarginalSpec::Product { components } => {
                Marginal::Product(components.iter().map(|c| c.continuous()).collect::<Result<_, _>>()?)
            }
            other => Marginal::Continuous(other.continuous()?),
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    /// Union of `(lo, hi]` intervals on the line.
    Intervals(Vec<[Endpoint; 2]>),
    /// Integer labels of a discrete law.
    Integers { integers: Vec<i64> },
    /// Union of boxes, each a list of per-coordinate intervals.
    Boxes { boxes: Vec<Vec<[Endpoint; 2]>> },
}

impl SetSpec {
    pub fn build(&self) -> Result<SupportSet, CliError> {
        let usage = |e: gbpf_core::Error| CliError::Usage(e.to_string());
        match self {
            SetSpec::Intervals(parts) => {
                let pairs: Vec<(f64, f64)> = parts.iter().map(|[a, b]| (a.0, b.0)).collect();
                SupportSet::intervals(&pairs).map_err(usage)
            }
            SetSpec::Integers { integers } => Ok(SupportSet::integers(integers.iter().copied())),
            SetSpec::Boxes { boxes } => {
                let b = boxes
                    .iter()
                    .map(|coords| {
                        coords
                            .iter()
                            .map(|[a, b]| IntervalUnion::interval(a.0, b.0))
                            .collect::<Result<Vec<_>, _>>()
                            .map(BoxSet::new)
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(usage)?;
                SupportSet::union_of_boxes(b).map_err(usage)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub p: f64,
    pub covariance: CovSpec,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub p: Option<f64>,
    pub covariance: Option<CovSpec>,
    pub marginal: Option<MarginalSpec>,
    pub set: Option<SetSpec>,
    pub axes: Option<Vec<AxisSpec>>,
    /// Cells listed by mask: bit `k` of the index is the bit of axis `k + 1`.
    pub cells: Option<Vec<SetSpec>>,
    pub n: Option<usize>,
    pub extents: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub max_lag: Option<usize>,
    pub window: Option<Vec<usize>>,
    pub unchecked: Option<bool>,
    pub horizon: Option<u64>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn unchecked(&self) -> bool {
        self.unchecked.unwrap_or(false)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon.unwrap_or(DEFAULT_HORIZON)
    }

    pub fn preset(&self) -> Result<Option<Preset>, CliError> {
        match &self.preset {
            None => Ok(None),
            Some(name) => presets::preset(name).map(Some).map_err(CliError::from),
        }
    }

    fn gbp(&self, p: f64, cov: &CovSpec) -> Result<GbpModel, CliError> {
        let cov = cov.build()?;
        // Always built without the gate; callers decide what a failed check means.
        GbpModel::new_unchecked(p, cov).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// The latent sequence model described by `p` and `covariance`.
    pub fn single_gbp(&self) -> Result<Option<GbpModel>, CliError> {
        match (self.p, &self.covariance) {
            (Some(p), Some(c)) => self.gbp(p, c).map(Some),
            (None, None) => Ok(None),
            _ => Err(CliError::Usage("`p` and `covariance` must be given together".into())),
        }
    }

    pub fn axis_gbps(&self) -> Result<Option<Vec<GbpModel>>, CliError> {
        match &self.axes {
            None => Ok(None),
            Some(axes) => axes.iter().map(|a| self.gbp(a.p, &a.covariance)).collect::<Result<_, _>>().map(Some),
        }
    }

    /// A process model from the preset or the explicit blocks.
    pub fn process_spec(&self) -> Result<ProcessSpec, CliError> {
        if let Some(p) = self.preset()? {
            return match p.spec {
                PresetSpec::Process(s) => Ok(s),
                PresetSpec::Field(_) => Err(CliError::Usage(format!("preset {} describes a field", p.name))),
            };
        }
        let marginal = self.marginal.as_ref().ok_or_else(|| missing("marginal"))?.build()?;
        let set = self.set.as_ref().ok_or_else(|| missing("set"))?.build()?;
        let gbp = self.single_gbp()?.ok_or_else(|| missing("p/covariance"))?;
        ProcessSpec::new(marginal, set, gbp).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// A field model from the preset or the explicit blocks.
    pub fn field_spec(&self) -> Result<FieldSpec, CliError> {
        let spec = if let Some(p) = self.preset()? {
            match p.spec {
                PresetSpec::Field(s) => s,
                PresetSpec::Process(_) => return Err(CliError::Usage(format!("preset {} describes a process", p.name))),
            }
        } else {
            let marginal = self.marginal.as_ref().ok_or_else(|| missing("marginal"))?.build()?;
            let gbps = self.axis_gbps()?.ok_or_else(|| missing("axes"))?;
            let cells = self
                .cells
                .as_ref()
                .ok_or_else(|| missing("cells"))?
                .iter()
                .map(SetSpec::build)
                .collect::<Result<Vec<_>, _>>()?;
            let probs = gbps.iter().map(GbpModel::p).collect();
            let partition = Partition::new(&marginal, probs, cells).map_err(|e| CliError::Usage(e.to_string()))?;
            let n = gbps.len();
            FieldSpec::new(marginal, partition, gbps, vec![presets::DEFAULT_SIDE; n])
                .map_err(|e| CliError::Usage(e.to_string()))?
        };
        match &self.extents {
            Some(e) => spec.with_extents(e.clone()).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(spec),
        }
    }
}

fn missing(what: &str) -> CliError {
    CliError::Usage(format!("config needs `{what}` or a preset"))
}
