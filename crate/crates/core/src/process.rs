//! Stationary processes `X(i) = X^A(i) 1{xi_i = 1} + X^{A^c}(i) 1{xi_i = 0}`
//! driven by a latent binary sequence, with exact moment calculators.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gbp::{BinaryPath, GapTables, GbpModel};
use crate::marginal::{Marginal, RestrictedSampler, SupportSet};
use crate::rng::{stream, Purpose};

/// Tolerance on `|mass(A) - p|`.
pub const P_CONSISTENCY: f64 = 1e-8;
/// Sites per independent value stream.
pub const CHUNK: usize = 4096;
/// Largest index set for configuration enumeration.
pub const CF_ENUM_LIMIT: usize = 16;
/// Largest index set for the expanded closed form.
pub const CF_CLOSED_FORM_LIMIT: usize = 5;

#[derive(Clone, Debug)]
pub struct ProcessSpec {
    marginal: Marginal,
    set: SupportSet,
    complement: SupportSet,
    gbp: GbpModel,
    mass: f64,
    /// `E(X^A)` and `E(X^{A^c})`.
    cond_means: [Vec<f64>; 2],
}

impl ProcessSpec {
    pub fn new(marginal: Marginal, set: SupportSet, gbp: GbpModel) -> Result<Self> {
        let (mass, se) = marginal.set_mass_with_error(&set)?;
        let tol = P_CONSISTENCY.max(4.0 * se);
        if (mass - gbp.p()).abs() > tol {
            return Err(Error::InvalidParameter(format!(
                "set {set} has mass {mass:.10} but the latent sequence has p = {}",
                gbp.p()
            )));
        }
        let complement = set.complement();
        let p = gbp.p();
        let in_a: Vec<f64> = marginal.set_mean(&set)?.iter().map(|v| v / p).collect();
        let in_c: Vec<f64> = marginal
            .set_mean(&complement)?
            .iter()
            .map(|v| v / (1.0 - p))
            .collect();
        Ok(ProcessSpec {
            marginal,
            set,
            complement,
            gbp,
            mass,
            cond_means: [in_c, in_a],
        })
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn set(&self) -> &SupportSet {
        &self.set
    }

    pub fn complement(&self) -> &SupportSet {
        &self.complement
    }

    pub fn gbp(&self) -> &GbpModel {
        &self.gbp
    }

    pub fn p(&self) -> f64 {
        self.gbp.p()
    }

    /// Mass of `A` under the marginal, as computed.
    pub fn set_mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.marginal.dim()
    }

    /// `E(X^A) - E(X^{A^c})`.
    pub fn difference_vector(&self) -> Vec<f64> {
        self.cond_means[1]
            .iter()
            .zip(&self.cond_means[0])
            .map(|(a, c)| a - c)
            .collect()
    }

    /// The rank-one matrix `D = d d'` with `cov(X(i), X(j)) = D C(|i-j|)`.
    pub fn theoretical_cov(&self) -> Vec<Vec<f64>> {
        outer(&self.difference_vector())
    }

    /// Covariance matrix at lag `k`; lag 0 is the marginal covariance.
    pub fn cov_at_lag(&self, k: u64) -> Result<Vec<Vec<f64>>> {
        if k == 0 {
            return self.marginal.covariance();
        }
        let c = self.gbp.cov_at(k);
        Ok(scale(&self.theoretical_cov(), c))
    }

    /// `D^(q) = d^(q) d^(q)'` for the coordinatewise `q`-th powers.
    pub fn moment_cov(&self, q: u32) -> Result<Vec<Vec<f64>>> {
        if q == 0 {
            return Err(Error::InvalidParameter("moment order must be positive".into()));
        }
        let p = self.p();
        let a = self.marginal.set_moment(&self.set, q)?;
        let c = self.marginal.set_moment(&self.complement, q)?;
        let d: Vec<f64> = a.iter().zip(&c).map(|(a, c)| a / p - c / (1.0 - p)).collect();
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                error: f64::INFINITY,
            });
        }
        Ok(outer(&d))
    }

    /// `d*` with `cov(1{X(i) in B1}, 1{X(j) in B2}) = d* C(|i-j|)`.
    pub fn indicator_cov(&self, b1: &SupportSet, b2: &SupportSet) -> Result<f64> {
        let p = self.p();
        let factor = |b: &SupportSet| -> Result<f64> {
            let in_a = self.marginal.set_mass(&self.set.intersect(b))?;
            let in_c = self.marginal.set_mass(&self.complement.intersect(b))?;
            Ok(in_a / p - in_c / (1.0 - p))
        };
        Ok(factor(b1)? * factor(b2)?)
    }

    /// `E(exp(i theta' X^A))` and `E(exp(i theta' X^{A^c}))`.
    pub fn restricted_cfs(&self, theta: &[f64]) -> Result<(Complex64, Complex64)> {
        let p = self.p();
        let a = self.marginal.set_cf(&self.set, theta)? / p;
        let c = self.marginal.set_cf(&self.complement, theta)? / (1.0 - p);
        Ok((a, c))
    }

    /// Joint characteristic function of `X(i_1), ..., X(i_k)` by summing
    /// over all latent configurations.
    pub fn joint_cf(&self, thetas: &[Vec<f64>], indices: &[i64]) -> Result<Complex64> {
        check_indices(thetas, indices, CF_ENUM_LIMIT, self.dim())?;
        let cfs = thetas
            .iter()
            .map(|t| self.restricted_cfs(t))
            .collect::<Result<Vec<_>>>()?;
        let law = self.gbp.full_configuration_law(indices);
        let mut total = Complex64::new(0.0, 0.0);
        for (mask, prob) in law.iter().enumerate() {
            let mut term = Complex64::new(*prob, 0.0);
            for (j, (a, c)) in cfs.iter().enumerate() {
                term *= if mask >> j & 1 == 1 { *a } else { *c };
            }
            total += term;
        }
        Ok(total)
    }

    /// The same quantity through the expansion over index subsets `K` and
    /// ordered block partitions `W` of `K` weighted by `L*(W)`.
    pub fn joint_cf_closed_form(&self, thetas: &[Vec<f64>], indices: &[i64]) -> Result<Complex64> {
        check_indices(thetas, indices, CF_CLOSED_FORM_LIMIT, self.dim())?;
        let k = indices.len();
        let p = self.p();
        let cfs = thetas
            .iter()
            .map(|t| self.restricted_cfs(t))
            .collect::<Result<Vec<_>>>()?;
        let full: Vec<Complex64> = cfs.iter().map(|(a, c)| *a * p + *c * (1.0 - p)).collect();
        let mut total: Complex64 = full.iter().product();
        for kmask in 0usize..1 << k {
            if kmask.count_ones() < 2 {
                continue;
            }
            let members: Vec<usize> = (0..k).filter(|&j| kmask >> j & 1 == 1).collect();
            for blocks in ordered_blocks(&members) {
                let mut weight = 1.0;
                let mut interior = 0usize;
                for b in &blocks {
                    let mut l = p;
                    for w in b.windows(2) {
                        l *= self.gbp.cstar((indices[w[1]] - indices[w[0]]) as u64);
                    }
                    weight *= l;
                    for j in b[0] + 1..*b.last().unwrap() {
                        if kmask >> j & 1 == 0 {
                            interior |= 1 << j;
                        }
                    }
                }
                let mut term = Complex64::new(weight, 0.0);
                for j in 0..k {
                    let (a, c) = cfs[j];
                    term *= if kmask >> j & 1 == 1 {
                        a - c
                    } else if interior >> j & 1 == 1 {
                        c
                    } else {
                        full[j]
                    };
                }
                total += term;
            }
        }
        Ok(total)
    }

    /// Multiplier `p D(B, F) / (p^|B| (1-p)^|F|)` of the product density
    /// when `X(i_j)` lies in `A` for `in_a[j]` and in `A^c` otherwise.
    pub fn joint_density_weight(&self, in_a: &[bool], indices: &[i64]) -> Result<f64> {
        if in_a.len() != indices.len() {
            return Err(Error::Dimension {
                expected: indices.len(),
                got: in_a.len(),
            });
        }
        if indices.len() > CF_ENUM_LIMIT {
            return Err(Error::SizeGuard {
                what: "index set",
                size: indices.len(),
                limit: CF_ENUM_LIMIT,
            });
        }
        let ones: Vec<i64> = indices.iter().zip(in_a).filter(|(_, &b)| b).map(|(&i, _)| i).collect();
        let zeros: Vec<i64> = indices.iter().zip(in_a).filter(|(_, &b)| !b).map(|(&i, _)| i).collect();
        let p = self.p();
        let prob = self.gbp.config_probability(&ones, &zeros)?;
        Ok(prob / (p.powi(ones.len() as i32) * (1.0 - p).powi(zeros.len() as i32)))
    }
}

fn check_indices(thetas: &[Vec<f64>], indices: &[i64], limit: usize, d: usize) -> Result<()> {
    if thetas.len() != indices.len() {
        return Err(Error::Dimension {
            expected: indices.len(),
            got: thetas.len(),
        });
    }
    if indices.is_empty() {
        return Err(Error::InvalidParameter("need at least one index".into()));
    }
    if indices.len() > limit {
        return Err(Error::SizeGuard {
            what: "index set",
            size: indices.len(),
            limit,
        });
    }
    if indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("indices must be strictly increasing".into()));
    }
    if let Some(t) = thetas.iter().find(|t| t.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: t.len(),
        });
    }
    Ok(())
}

/// Splits of a sorted list into consecutive blocks of length at least 2.
fn ordered_blocks(members: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if members.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 2..=members.len() {
        for mut rest in ordered_blocks(&members[first..]) {
            if members.len() - first == 1 {
                continue;
            }
            rest.insert(0, members[..first].to_vec());
            out.push(rest);
        }
    }
    out
}

pub(crate) fn outer(d: &[f64]) -> Vec<Vec<f64>> {
    d.iter().map(|a| d.iter().map(|b| a * b).collect()).collect()
}

pub(crate) fn scale(m: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| v * c).collect()).collect()
}

/// A realised process path.
#[derive(Clone, Debug)]
pub struct ProcessPath {
    /// Row-major `n x d` values.
    pub values: Vec<f64>,
    pub dim: usize,
    pub latent: BinaryPath,
    pub seed: u64,
}

impl ProcessPath {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }
}

/// Reusable simulator: gap tables and cell samplers are built once.
#[derive(Clone, Debug)]
pub struct ProcessSimulator {
    spec: Arc<ProcessSpec>,
    tables: Arc<GapTables>,
    samplers: Arc<[RestrictedSampler; 2]>,
}

impl ProcessSimulator {
    pub fn new(spec: ProcessSpec, n_max: usize) -> Result<Self> {
        let tables = spec.gbp.build_gap_tables(n_max)?;
        let samplers = [
            RestrictedSampler::new(&spec.marginal, &spec.complement)?,
            RestrictedSampler::new(&spec.marginal, &spec.set)?,
        ];
        Ok(ProcessSimulator {
            spec: Arc::new(spec),
            tables: Arc::new(tables),
            samplers: Arc::new(samplers),
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn tables(&self) -> &GapTables {
        &self.tables
    }

    /// One path of length `n`. Output depends only on `(spec, n, seed)`.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<ProcessPath> {
        let mut rng = stream(seed, Purpose::Latent, 0);
        let bits = self.tables.sample_bits(n, &mut rng)?;
        let d = self.spec.dim();
        let mut values = vec![0.0; n * d];
        values
            .par_chunks_mut(CHUNK * d)
            .enumerate()
            .try_for_each(|(c, chunk)| -> Result<()> {
                let mut rng = stream(seed, Purpose::Values, c as u64);
                for (j, row) in chunk.chunks_mut(d).enumerate() {
                    let bit = bits[c * CHUNK + j] as usize;
                    self.samplers[bit].sample_into(&mut rng, row)?;
                }
                Ok(())
            })?;
        Ok(ProcessPath {
            values,
            dim: d,
            latent: BinaryPath {
                bits,
                seed: Some(seed),
                p: self.spec.p(),
                covariance: self.spec.gbp.covariance().clone(),
            },
            seed,
        })
    }
}

/// Builds a simulator for `n` steps and draws one path.
pub fn simulate_process(spec: ProcessSpec, n: usize, seed: u64) -> Result<ProcessPath> {
    ProcessSimulator::new(spec, n)?.simulate(n, seed)
}
