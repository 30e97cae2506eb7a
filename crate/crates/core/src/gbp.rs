//! The latent binary sequence.
//!
//! A model is a success probability `p` and a covariance `C`; with
//! `C*(x) = C(x) / p` the probability that every index of an ordered set
//! `i_0 < ... < i_n` is one equals `p * prod (p + C*(i_j - i_{j-1}))`.
//! Mixed one/zero events follow by inclusion–exclusion over the zeros.
//!
//! Paths are sampled from the gap law between successive ones, which the
//! sequence's loss of memory at every one makes a renewal process. The gap
//! distributions come out of the renewal recursions
//!
//! ```text
//! g(k) = (p + C*(k)) - sum_{j<k} g(j) (p + C*(k - j))
//! h(k) =  p          - sum_{j<k} h(j) (p + C*(k - j))
//! ```
//!
//! where `g` is the gap after a one and `h` the position of the first one.

use std::sync::Arc;

use log::{info, warn};
use rand::Rng;
use serde::Serialize;

use crate::conv::{convolve, KahanSum};
use crate::covariance::{check_assumption, CovarianceFunction, ValidityReport, DEFAULT_HORIZON};
use crate::error::{Error, Result};

/// Largest zero-set accepted by the subset-sum form of `D`.
pub const D_OPERATOR_LIMIT: usize = 20;
/// Largest combined event size accepted by [`GbpModel::config_probability`].
pub const CONFIG_LIMIT: usize = 21;
/// Largest window for [`GbpModel::verify_well_defined`].
pub const WELL_DEFINED_LIMIT: usize = 12;

/// Gap probabilities in `[-CLAMP_TOLERANCE, 0)` are rounding noise.
const CLAMP_TOLERANCE: f64 = 1e-9;
/// Tail mass past the table that is worth logging.
const TAIL_REPORT: f64 = 1e-3;
/// Tables up to this size use the quadratic recursion throughout.
const DIRECT_LIMIT: usize = 4096;
const BLOCK: usize = 256;

#[derive(Clone, Debug)]
pub struct GbpModel {
    p: f64,
    cov: CovarianceFunction,
    validity: ValidityReport,
    checked: bool,
}

impl GbpModel {
    /// Builds a model whose covariance passes the validity check at the
    /// default horizon.
    pub fn new(p: f64, cov: CovarianceFunction) -> Result<Self> {
        Self::with_horizon(p, cov, DEFAULT_HORIZON)
    }

    pub fn with_horizon(p: f64, cov: CovarianceFunction, horizon: u64) -> Result<Self> {
        cov.validate()?;
        let validity = check_assumption(&cov, p, horizon)?;
        if !validity.pass {
            return Err(Error::InvalidCovariance(Box::new(validity)));
        }
        Ok(GbpModel {
            p,
            cov,
            validity,
            checked: true,
        })
    }

    /// Builds a model without requiring the sufficient conditions. Sampling
    /// is then gated by the non-negativity of the gap tables.
    pub fn new_unchecked(p: f64, cov: CovarianceFunction) -> Result<Self> {
        cov.validate()?;
        let validity = check_assumption(&cov, p, DEFAULT_HORIZON)?;
        Ok(GbpModel {
            p,
            cov,
            validity,
            checked: false,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn covariance(&self) -> &CovarianceFunction {
        &self.cov
    }

    pub fn validity(&self) -> &ValidityReport {
        &self.validity
    }

    /// False for models built with [`GbpModel::new_unchecked`].
    pub fn is_checked(&self) -> bool {
        self.checked
    }

    /// `C(lag)`; lag 0 gives the variance `p(1-p)` of a single bit.
    pub fn cov_at(&self, lag: u64) -> f64 {
        if lag == 0 {
            return self.p * (1.0 - self.p);
        }
        self.cov
            .eval(lag)
            .expect("lag outside the covariance table")
    }

    /// `C*(lag) = C(lag) / p`.
    pub fn cstar(&self, lag: u64) -> f64 {
        self.cov_at(lag) / self.p
    }

    /// `p + C*(lag)`, the one-step factor of `L`.
    fn link(&self, lag: u64) -> f64 {
        self.p + self.cstar(lag)
    }

    /// `L(B)`: `1/p` for the empty set, `1` for a singleton, otherwise the
    /// product of `p + C*(gap)` over consecutive sorted elements.
    pub fn l_operator(&self, set: &[i64]) -> f64 {
        match set.len() {
            0 => 1.0 / self.p,
            1 => 1.0,
            _ => {
                let mut sorted = set.to_vec();
                sorted.sort_unstable();
                self.l_sorted(&sorted)
            }
        }
    }

    fn l_sorted(&self, sorted: &[i64]) -> f64 {
        match sorted.len() {
            0 => 1.0 / self.p,
            1 => 1.0,
            _ => sorted
                .windows(2)
                .map(|w| self.link((w[1] - w[0]) as u64))
                .product(),
        }
    }

    /// `D(B, F) = sum_{F' in F} (-1)^|F'| L(B ∪ F')`, by direct subset sum.
    pub fn d_operator(&self, ones: &[i64], zeros: &[i64]) -> Result<f64> {
        if zeros.len() > D_OPERATOR_LIMIT {
            return Err(Error::SizeGuard {
                what: "zero set",
                size: zeros.len(),
                limit: D_OPERATOR_LIMIT,
            });
        }
        check_disjoint(ones, zeros)?;
        let mut base = ones.to_vec();
        base.sort_unstable();
        if zeros.is_empty() {
            return Ok(self.l_sorted(&base));
        }
        let mut total = KahanSum::default();
        let mut work = Vec::with_capacity(base.len() + zeros.len());
        for mask in 0u32..(1u32 << zeros.len()) {
            work.clear();
            work.extend_from_slice(&base);
            for (bit, &z) in zeros.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    work.push(z);
                }
            }
            work.sort_unstable();
            let term = self.l_sorted(&work);
            if mask.count_ones() % 2 == 0 {
                total.add(term);
            } else {
                total.add(-term);
            }
        }
        Ok(total.value())
    }

    /// `P(ones are 1, zeros are 0) = p D(ones, zeros)`.
    pub fn config_probability(&self, ones: &[i64], zeros: &[i64]) -> Result<f64> {
        let size = ones.len() + zeros.len();
        if size == 0 {
            return Err(Error::InvalidParameter(
                "configuration must fix at least one index".into(),
            ));
        }
        if size > CONFIG_LIMIT {
            return Err(Error::SizeGuard {
                what: "configuration",
                size,
                limit: CONFIG_LIMIT,
            });
        }
        Ok(self.p * self.d_operator(ones, zeros)?)
    }

    /// Probabilities of every full configuration of the `m` given indices.
    /// Entry `mask` has index `j` equal to one iff bit `j` is set.
    pub fn full_configuration_law(&self, indices: &[i64]) -> Vec<f64> {
        let m = indices.len();
        let size = 1usize << m;
        // P(all of S are one) for every S, then Möbius inversion over supersets.
        let mut law: Vec<f64> = (0..size)
            .map(|mask| {
                let set: Vec<i64> = (0..m)
                    .filter(|&j| mask & (1 << j) != 0)
                    .map(|j| indices[j])
                    .collect();
                let mut set = set;
                set.sort_unstable();
                self.p * self.l_sorted(&set)
            })
            .collect();
        for j in 0..m {
            let bit = 1 << j;
            for mask in 0..size {
                if mask & bit == 0 {
                    law[mask] -= law[mask | bit];
                }
            }
        }
        law
    }

    /// Exhaustively evaluates `D(B, F)` for every disjoint pair with
    /// `B ∪ F ⊆ {1..m}` non-empty and reports the smallest value.
    pub fn verify_well_defined(&self, m: usize) -> Result<WellDefinedness> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "window must have at least 2 indices, got {m}"
            )));
        }
        if m > WELL_DEFINED_LIMIT {
            return Err(Error::SizeGuard {
                what: "well-definedness window",
                size: m,
                limit: WELL_DEFINED_LIMIT,
            });
        }
        let indices: Vec<i64> = (1..=m as i64).collect();
        let full = self.full_configuration_law(&indices);

        // Ternary code per index: 0 -> zero, 1 -> one, 2 -> free.
        let pow3: Vec<usize> = (0..=m).map(|j| 3usize.pow(j as u32)).collect();
        let total = pow3[m];
        let mut value = vec![0.0f64; total];
        for (mask, &prob) in full.iter().enumerate() {
            let code: usize = (0..m)
                .filter(|&j| mask & (1 << j) != 0)
                .map(|j| pow3[j])
                .sum();
            value[code] = prob;
        }
        for j in 0..m {
            for code in 0..total {
                if (code / pow3[j]) % 3 == 2 {
                    value[code] = value[code - 2 * pow3[j]] + value[code - pow3[j]];
                }
            }
        }

        let all_free = total - 1;
        let mut best: Option<(usize, f64)> = None;
        for (code, &v) in value.iter().enumerate() {
            if code == all_free {
                continue;
            }
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((code, v));
            }
        }
        let (code, prob) = best.expect("at least one configuration");
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        for j in 0..m {
            match (code / pow3[j]) % 3 {
                0 => zeros.push(indices[j]),
                1 => ones.push(indices[j]),
                _ => {}
            }
        }
        let min_d = prob / self.p;
        Ok(WellDefinedness {
            ok: min_d > 0.0,
            min_value: min_d,
            witness: Witness {
                ones,
                zeros,
                value: min_d,
            },
        })
    }

    /// Gap tables to `n_max` by the renewal recursions.
    pub fn build_gap_tables(&self, n_max: usize) -> Result<GapTables> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("gap tables need n_max >= 1".into()));
        }
        if let Some(m) = self.cov.max_lag() {
            if (m as usize) < n_max {
                return Err(Error::OutsideTable {
                    lag: n_max as u64,
                    len: m as usize,
                });
            }
        }
        let mut kernel = Vec::with_capacity(n_max + 1);
        kernel.push(0.0);
        for k in 1..=n_max as u64 {
            kernel.push(self.p + self.cov.eval(k)? / self.p);
        }
        let gap_target = kernel.clone();
        let first_target: Vec<f64> = (0..=n_max)
            .map(|k| if k == 0 { 0.0 } else { self.p })
            .collect();

        let gap = solve_renewal(&gap_target, &kernel)?;
        let first = solve_renewal(&first_target, &kernel)?;

        let gap_cdf = prefix_sums(&gap);
        let first_cdf = prefix_sums(&first);
        let tail = 1.0 - gap_cdf.last().copied().unwrap_or(0.0);
        if tail > TAIL_REPORT {
            info!(
                "gap distribution keeps mass {tail:.3e} beyond lag {n_max} (p = {}, {:?})",
                self.p, self.cov
            );
        }
        Ok(GapTables {
            gap: gap[1..].to_vec(),
            first: first[1..].to_vec(),
            gap_cdf,
            first_cdf,
        })
    }

    /// Builds tables to `n` and samples one path.
    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BinaryPath> {
        let tables = self.build_gap_tables(n)?;
        let bits = tables.sample_bits(n, rng)?;
        Ok(BinaryPath {
            bits,
            seed: None,
            p: self.p,
            covariance: self.cov.clone(),
        })
    }
}

fn check_disjoint(a: &[i64], b: &[i64]) -> Result<()> {
    for x in a {
        if b.contains(x) {
            return Err(Error::InvalidParameter(format!(
                "index {x} is in both the one-set and the zero-set"
            )));
        }
    }
    Ok(())
}

fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut acc = KahanSum::default();
    values[1..]
        .iter()
        .map(|&v| {
            acc.add(v);
            acc.value()
        })
        .collect()
}

fn finalize(k: usize, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOLERANCE {
        warn!("clamping gap probability {value:e} at k = {k} to zero");
        Ok(0.0)
    } else {
        Err(Error::NegativeGapProbability { k, value })
    }
}

/// Solves `x(k) = target(k) - sum_{j=1}^{k-1} x(j) kernel(k - j)` for
/// `k = 1..target.len()-1`; index 0 is unused.
///
/// Small tables run the quadratic recursion with compensated sums. Larger
/// tables use divide and conquer: the left half of every node is finished
/// first and pushed into the right half with one FFT convolution.
fn solve_renewal(target: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    let n = target.len();
    let mut out = vec![0.0; n];
    let mut pending = vec![KahanSum::default(); n];
    if n <= DIRECT_LIMIT + 1 {
        direct_block(1, n, target, kernel, &mut out, &pending)?;
    } else {
        divide(1, n, target, kernel, &mut out, &mut pending)?;
    }
    Ok(out)
}

fn direct_block(
    lo: usize,
    hi: usize,
    target: &[f64],
    kernel: &[f64],
    out: &mut [f64],
    pending: &[KahanSum],
) -> Result<()> {
    for k in lo..hi {
        let mut acc = KahanSum::new(target[k]);
        acc.add(-pending[k].value());
        for j in lo..k {
            acc.add(-out[j] * kernel[k - j]);
        }
        out[k] = finalize(k, acc.value())?;
    }
    Ok(())
}

fn divide(
    lo: usize,
    hi: usize,
    target: &[f64],
    kernel: &[f64],
    out: &mut [f64],
    pending: &mut [KahanSum],
) -> Result<()> {
    if hi - lo <= BLOCK {
        return direct_block(lo, hi, target, kernel, out, pending);
    }
    let mid = lo + (hi - lo) / 2;
    divide(lo, mid, target, kernel, out, pending)?;
    let conv = convolve(&out[lo..mid], &kernel[..hi - lo]);
    for k in mid..hi {
        pending[k].add(conv[k - lo]);
    }
    divide(mid, hi, target, kernel, out, pending)
}

/// Witness of the smallest `D(B, F)` found by exhaustive enumeration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub ones: Vec<i64>,
    pub zeros: Vec<i64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WellDefinedness {
    pub ok: bool,
    pub min_value: f64,
    pub witness: Witness,
}

/// Gap laws and their cumulative sums, all indexed from `k = 1`.
#[derive(Clone, Debug)]
pub struct GapTables {
    gap: Vec<f64>,
    first: Vec<f64>,
    gap_cdf: Vec<f64>,
    first_cdf: Vec<f64>,
}

impl GapTables {
    pub fn n_max(&self) -> usize {
        self.gap.len()
    }

    /// `g[k]`: probability that the next one is exactly `k` steps after a one.
    pub fn gap(&self) -> &[f64] {
        &self.gap
    }

    /// `h[k]`: probability that the first one sits at position `k`.
    pub fn first(&self) -> &[f64] {
        &self.first
    }

    /// `F(k)`, cumulative sums of `g`.
    pub fn gap_cdf(&self) -> &[f64] {
        &self.gap_cdf
    }

    /// `F0(k)`, cumulative sums of `h`.
    pub fn first_cdf(&self) -> &[f64] {
        &self.first_cdf
    }

    /// `min{k >= 1 : F0(k) > u}` if it lies within `limit`.
    pub fn first_position(&self, u: f64, limit: usize) -> Option<usize> {
        invert(&self.first_cdf[..limit.min(self.first_cdf.len())], u)
    }

    /// `min{k >= 1 : F(k) > u}` if it lies within `limit`.
    pub fn next_gap(&self, u: f64, limit: usize) -> Option<usize> {
        invert(&self.gap_cdf[..limit.min(self.gap_cdf.len())], u)
    }

    /// Samples positions `1..=n`. The first one is placed by inverting `F0`
    /// and each later one by inverting `F`; a draw past the window ends the
    /// path.
    pub fn sample_bits<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<u8>> {
        if n > self.first_cdf.len() {
            return Err(Error::InvalidParameter(format!(
                "gap tables reach {} but a path of length {n} was requested",
                self.first_cdf.len()
            )));
        }
        let mut bits = vec![0u8; n];
        if n == 0 {
            return Ok(bits);
        }
        let u: f64 = rng.random();
        let Some(mut pos) = self.first_position(u, n) else {
            return Ok(bits);
        };
        bits[pos - 1] = 1;
        while pos < n {
            let u: f64 = rng.random();
            match self.next_gap(u, n - pos) {
                Some(k) => {
                    pos += k;
                    bits[pos - 1] = 1;
                }
                None => break,
            }
        }
        Ok(bits)
    }
}

fn invert(cdf: &[f64], u: f64) -> Option<usize> {
    let idx = cdf.partition_point(|&v| v <= u);
    (idx < cdf.len()).then_some(idx + 1)
}

/// A realised path with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct BinaryPath {
    pub bits: Vec<u8>,
    pub seed: Option<u64>,
    pub p: f64,
    pub covariance: CovarianceFunction,
}

impl BinaryPath {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

/// Model plus tables, shared across replicates.
#[derive(Clone, Debug)]
pub struct GbpSampler {
    model: Arc<GbpModel>,
    tables: Arc<GapTables>,
}

impl GbpSampler {
    pub fn new(model: GbpModel, n_max: usize) -> Result<Self> {
        let tables = model.build_gap_tables(n_max)?;
        Ok(GbpSampler {
            model: Arc::new(model),
            tables: Arc::new(tables),
        })
    }

    pub fn model(&self) -> &GbpModel {
        &self.model
    }

    pub fn tables(&self) -> &GapTables {
        &self.tables
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BinaryPath> {
        Ok(BinaryPath {
            bits: self.tables.sample_bits(n, rng)?,
            seed: None,
            p: self.model.p,
            covariance: self.model.cov.clone(),
        })
    }
}
