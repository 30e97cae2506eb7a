//! Random fields on `Z^n` driven by `n` independent latent binary sequences,
//! one per axis, with covariance calculators and an enumeration oracle.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gbp::{BinaryPath, GapTables, GbpModel};
use crate::marginal::{cell_probability, Marginal, Partition, RestrictedSampler, MEAN_TOLERANCE};
use crate::process::{outer, CHUNK};
use crate::rng::{stream, Purpose};

/// Largest number of lattice sites times dimension held in memory.
pub const LATTICE_BUDGET: usize = 100_000_000;
/// Largest axis count for the enumeration oracle.
pub const ORACLE_AXES: usize = 6;
/// Largest axis count for the covariance decomposition.
pub const DECOMPOSITION_AXES: usize = 10;
/// Largest total number of latent bits enumerated by `field_joint_cf`.
pub const FIELD_CF_BITS: usize = 12;
const P_CONSISTENCY: f64 = 1e-8;

type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug)]
pub struct FieldSpec {
    marginal: Marginal,
    partition: Partition,
    gbps: Vec<GbpModel>,
    extents: Vec<usize>,
}

impl FieldSpec {
    pub fn new(marginal: Marginal, partition: Partition, gbps: Vec<GbpModel>, extents: Vec<usize>) -> Result<Self> {
        let n = partition.n();
        if gbps.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: gbps.len(),
            });
        }
        if extents.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: extents.len(),
            });
        }
        for (k, (g, p)) in gbps.iter().zip(partition.probs()).enumerate() {
            if (g.p() - p).abs() > P_CONSISTENCY {
                return Err(Error::InvalidParameter(format!(
                    "axis {} has p = {} but the partition uses {p}",
                    k + 1,
                    g.p()
                )));
            }
        }
        Ok(FieldSpec {
            marginal,
            partition,
            gbps,
            extents,
        })
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn gbps(&self) -> &[GbpModel] {
        &self.gbps
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    /// Replaces the lattice extents.
    pub fn with_extents(mut self, extents: Vec<usize>) -> Result<Self> {
        if extents.len() != self.axes() {
            return Err(Error::Dimension {
                expected: self.axes(),
                got: extents.len(),
            });
        }
        self.extents = extents;
        Ok(self)
    }

    /// Number of axes `n`.
    pub fn axes(&self) -> usize {
        self.partition.n()
    }

    pub fn dim(&self) -> usize {
        self.marginal.dim()
    }

    fn probs(&self) -> &[f64] {
        self.partition.probs()
    }

    fn cell_means(&self) -> Vec<Vec<f64>> {
        (0..1usize << self.axes()).map(|m| self.partition.cell_expectation(m)).collect()
    }

    /// Covariance decomposition at lag `t - s`.
    pub fn decomposition(&self, lag: &[i64]) -> Result<CovarianceDecomposition> {
        let n = self.axes();
        self.check_lag(lag)?;
        if n > DECOMPOSITION_AXES {
            return Err(Error::SizeGuard {
                what: "field axes",
                size: n,
                limit: DECOMPOSITION_AXES,
            });
        }
        let d = self.dim();
        let probs = self.probs();
        let means = self.cell_means();
        let zero_axes: Vec<usize> = (0..n).filter(|&k| lag[k] == 0).collect();
        let free: Vec<usize> = (0..n).filter(|&k| lag[k] != 0).collect();
        let o_mask: usize = zero_axes.iter().map(|k| 1 << k).sum();

        let n_k = 1usize << free.len();
        let mut terms = vec![vec![vec![0.0; d]; d]; n_k];
        let mut model_mean = vec![0.0; d];
        for o_state in subsets_of(o_mask) {
            let w = axis_weight(probs, &zero_axes, o_state);
            for (kk, term) in terms.iter_mut().enumerate() {
                let k_mask = spread(kk, &free);
                let mut m = vec![0.0; d];
                for r_state in subsets_of(spread(n_k - 1, &free)) {
                    let mask = o_state | r_state;
                    let mut c = 1.0;
                    for &j in &free {
                        let bit = mask >> j & 1;
                        if k_mask >> j & 1 == 1 {
                            if bit == 0 {
                                c = -c;
                            }
                        } else {
                            c *= if bit == 1 { probs[j] } else { 1.0 - probs[j] };
                        }
                    }
                    for (mi, e) in m.iter_mut().zip(&means[mask]) {
                        *mi += c * e;
                    }
                }
                if kk == 0 {
                    for (a, b) in model_mean.iter_mut().zip(&m) {
                        *a += w * b;
                    }
                }
                add_scaled(term, &outer(&m), w);
            }
        }
        let mut constant = std::mem::take(&mut terms[0]);
        add_scaled(&mut constant, &outer(&model_mean), -1.0);
        if zero_axes.is_empty() {
            constant = vec![vec![0.0; d]; d];
        }
        let terms = terms
            .into_iter()
            .enumerate()
            .skip(1)
            .map(|(kk, m)| {
                let k_set: Vec<usize> = free.iter().enumerate().filter(|(i, _)| kk >> i & 1 == 1).map(|(_, &a)| a).collect();
                (k_set, m)
            })
            .collect();
        Ok(CovarianceDecomposition {
            zero_axes,
            terms,
            constant_term: constant,
        })
    }

    /// `cov(X(t), X(s))` with `lag = t - s`; lag 0 gives the marginal covariance.
    pub fn theoretical_field_cov(&self, lag: &[i64]) -> Result<Matrix> {
        self.check_lag(lag)?;
        if lag.iter().all(|&l| l == 0) {
            return self.marginal.covariance();
        }
        Ok(self.decomposition(lag)?.evaluate(self, lag))
    }

    /// The sum over non-empty `K` of `M_K prod C_k` alone, without the
    /// lag-independent term that appears when some coordinates coincide.
    pub fn printed_field_cov(&self, lag: &[i64]) -> Result<Matrix> {
        let dec = self.decomposition(lag)?;
        let d = self.dim();
        let mut out = vec![vec![0.0; d]; d];
        for (k, m) in &dec.terms {
            add_scaled(&mut out, m, self.c_product(k, lag));
        }
        Ok(out)
    }

    /// The two-axis formulas with `m_0, m_1, m_2` and the `u`-vector forms
    /// of `M*_1, M*_2`, exactly as stated (no constant term).
    pub fn two_axis_cov(&self, lag: &[i64]) -> Result<Matrix> {
        if self.axes() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: self.axes(),
            });
        }
        self.check_lag(lag)?;
        let e = self.cell_means();
        let (p1, p2) = (self.probs()[0], self.probs()[1]);
        // cell masks: 00 -> 0, 10 -> 1, 01 -> 2, 11 -> 3
        let comb = |terms: &[(f64, usize)]| -> Vec<f64> {
            (0..self.dim())
                .map(|i| terms.iter().map(|(c, m)| c * e[*m][i]).sum())
                .collect()
        };
        let u = |a: usize, b: usize| comb(&[(1.0, a), (-1.0, b)]);
        let c1 = self.gbps[0].cov_at(lag[0].unsigned_abs());
        let c2 = self.gbps[1].cov_at(lag[1].unsigned_abs());
        let d = self.dim();
        let mut out = vec![vec![0.0; d]; d];
        match (lag[0] != 0, lag[1] != 0) {
            (true, true) => {
                let m0 = comb(&[(1.0, 1), (1.0, 2), (-1.0, 3), (-1.0, 0)]);
                let m1 = comb(&[(p2, 3), (-p2, 2), (1.0 - p2, 1), (p2 - 1.0, 0)]);
                let m2 = comb(&[(p1, 3), (-p1, 1), (1.0 - p1, 2), (p1 - 1.0, 0)]);
                add_scaled(&mut out, &outer(&m0), c1 * c2);
                add_scaled(&mut out, &outer(&m1), c1);
                add_scaled(&mut out, &outer(&m2), c2);
            }
            (true, false) => {
                add_scaled(&mut out, &outer(&u(3, 2)), p2 * c1);
                add_scaled(&mut out, &outer(&u(1, 0)), (1.0 - p2) * c1);
            }
            (false, true) => {
                add_scaled(&mut out, &outer(&u(3, 1)), p1 * c2);
                add_scaled(&mut out, &outer(&u(2, 0)), (1.0 - p1) * c2);
            }
            (false, false) => return self.marginal.covariance(),
        }
        Ok(out)
    }

    /// Covariance by enumerating every latent configuration at the two sites.
    pub fn field_cov_oracle(&self, lag: &[i64]) -> Result<Matrix> {
        let n = self.axes();
        self.check_lag(lag)?;
        if n > ORACLE_AXES {
            return Err(Error::SizeGuard {
                what: "field axes",
                size: n,
                limit: ORACLE_AXES,
            });
        }
        if lag.iter().all(|&l| l == 0) {
            return self.marginal.covariance();
        }
        let d = self.dim();
        let means = self.cell_means();
        // Per axis: list of (bit at t, bit at s, probability).
        let mut per_axis: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(n);
        for k in 0..n {
            let g = &self.gbps[k];
            let mut opts = Vec::new();
            if lag[k] == 0 {
                for b in 0..2 {
                    let prob = if b == 1 {
                        g.config_probability(&[0], &[])?
                    } else {
                        g.config_probability(&[], &[0])?
                    };
                    opts.push((b, b, prob));
                }
            } else {
                let idx = [0i64, lag[k].abs()];
                for bt in 0..2usize {
                    for bs in 0..2usize {
                        let (mut ones, mut zeros) = (Vec::new(), Vec::new());
                        for (pos, bit) in [(idx[0], bt), (idx[1], bs)] {
                            if bit == 1 {
                                ones.push(pos)
                            } else {
                                zeros.push(pos)
                            }
                        }
                        opts.push((bt, bs, g.config_probability(&ones, &zeros)?));
                    }
                }
            }
            per_axis.push(opts);
        }
        let mut second = vec![vec![0.0; d]; d];
        let mut mean = vec![0.0; d];
        let mut choice = vec![0usize; n];
        loop {
            let (mut mt, mut ms, mut prob) = (0usize, 0usize, 1.0);
            for k in 0..n {
                let (bt, bs, pr) = per_axis[k][choice[k]];
                mt |= bt << k;
                ms |= bs << k;
                prob *= pr;
            }
            for i in 0..d {
                mean[i] += prob * means[mt][i];
                for j in 0..d {
                    second[i][j] += prob * means[mt][i] * means[ms][j];
                }
            }
            let mut k = 0;
            while k < n {
                choice[k] += 1;
                if choice[k] < per_axis[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        add_scaled(&mut second, &outer(&mean), -1.0);
        Ok(second)
    }

    /// Evaluates the merged-cell integral conditions for coordinate `coord`.
    pub fn check_zero_conditions(&self, coord: usize) -> Result<ZeroConditionReport> {
        let n = self.axes();
        let d = self.dim();
        if coord >= d {
            return Err(Error::Dimension { expected: d, got: coord });
        }
        if n > DECOMPOSITION_AXES {
            return Err(Error::SizeGuard {
                what: "field axes",
                size: n,
                limit: DECOMPOSITION_AXES,
            });
        }
        let mu: f64 = self.partition.means().iter().map(|m| m[coord]).sum();
        let mut certified = Vec::new();
        for kp in 1usize..1 << n {
            let axes = bits(kp);
            if self.partition.balance_residual(&axes, coord, mu) <= MEAN_TOLERANCE {
                certified.push(axes);
            }
        }
        let mut forced: Vec<Vec<usize>> = Vec::new();
        for kp in &certified {
            let kp_mask = mask_of(kp);
            for k in subsets_of(kp_mask).filter(|&k| k != 0) {
                let ks = bits(k);
                if !forced.contains(&ks) {
                    forced.push(ks);
                }
            }
        }
        forced.sort();

        // Check every lag pattern: K certified through some K' with O in K'.
        let mut max_forced: f64 = 0.0;
        let mut scale: f64 = 1.0;
        let mut observed_zero = Vec::new();
        for o in 0usize..1 << n {
            let lag: Vec<i64> = (0..n).map(|k| if o >> k & 1 == 1 { 0 } else { 1 }).collect();
            if o == (1 << n) - 1 {
                continue;
            }
            let dec = self.decomposition(&lag)?;
            for (k, m) in &dec.terms {
                scale = scale.max(m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
                let row = m[coord].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let k_mask = mask_of(k);
                let is_forced = certified.iter().any(|kp| {
                    let kp_mask = mask_of(kp);
                    k_mask & !kp_mask == 0 && o & !kp_mask == 0
                });
                if is_forced {
                    max_forced = max_forced.max(row);
                }
                if o == 0 && row <= 1e-9 * scale.max(1.0) && !observed_zero.contains(k) {
                    observed_zero.push(k.clone());
                }
            }
        }
        let exhibited = max_forced <= 1e-9 * scale;
        let all_axes: Vec<usize> = (0..n).collect();
        let fully_balanced = certified.contains(&all_axes);

        let two_axis = if n == 2 {
            let means = self.partition.means();
            let (p1, p2) = (self.probs()[0], self.probs()[1]);
            let hypothesis = certified.contains(&vec![0]) && certified.contains(&vec![1]);
            let claimed = ((p1 + p2) / 2.0 - 0.25) * mu;
            let m11 = means[3][coord];
            let claimed_holds = (m11 - claimed).abs() <= MEAN_TOLERANCE;
            let dec = self.decomposition(&[1, 1])?;
            let m0_row = dec
                .terms
                .iter()
                .find(|(k, _)| k.len() == 2)
                .map(|(_, m)| m[coord].iter().fold(0.0f64, |a, v| a.max(v.abs())))
                .unwrap_or(0.0);
            Some(TwoAxisCheck {
                hypothesis,
                claimed_m11: claimed,
                m11,
                claimed_holds,
                solving_m11: p1 * p2 * mu,
                m0_row_max: m0_row,
                all_zero_exhibited: hypothesis && m0_row <= 1e-9 * scale,
            })
        } else {
            None
        };
        Ok(ZeroConditionReport {
            coordinate: coord,
            mean: mu,
            certified,
            forced_zero: forced,
            observed_zero,
            fully_balanced,
            max_forced_entry: max_forced,
            scale,
            exhibited,
            two_axis,
        })
    }

    /// Joint characteristic function `E exp(i sum theta_j' X(site_j))` by
    /// enumerating the latent bits at every distinct coordinate.
    pub fn field_joint_cf(&self, thetas: &[Vec<f64>], sites: &[Vec<i64>]) -> Result<Complex64> {
        let n = self.axes();
        let d = self.dim();
        if thetas.len() != sites.len() {
            return Err(Error::Dimension {
                expected: sites.len(),
                got: thetas.len(),
            });
        }
        if sites.is_empty() {
            return Err(Error::InvalidParameter("need at least one site".into()));
        }
        for s in sites {
            if s.len() != n {
                return Err(Error::Dimension { expected: n, got: s.len() });
            }
        }
        if let Some(t) = thetas.iter().find(|t| t.len() != d) {
            return Err(Error::Dimension { expected: d, got: t.len() });
        }
        let mut coords: Vec<Vec<i64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut c: Vec<i64> = sites.iter().map(|s| s[k]).collect();
            c.sort_unstable();
            c.dedup();
            coords.push(c);
        }
        let total: usize = coords.iter().map(Vec::len).sum();
        if total > FIELD_CF_BITS {
            return Err(Error::SizeGuard {
                what: "latent bits",
                size: total,
                limit: FIELD_CF_BITS,
            });
        }
        let laws: Vec<Vec<f64>> = coords
            .iter()
            .zip(&self.gbps)
            .map(|(c, g)| g.full_configuration_law(c))
            .collect();
        // Position of each site's coordinate in the per-axis list.
        let pos: Vec<Vec<usize>> = sites
            .iter()
            .map(|s| (0..n).map(|k| coords[k].binary_search(&s[k]).unwrap()).collect())
            .collect();
        let cells = 1usize << n;
        let mut cfs = vec![vec![Complex64::new(0.0, 0.0); cells]; sites.len()];
        for (j, t) in thetas.iter().enumerate() {
            for (m, slot) in cfs[j].iter_mut().enumerate() {
                let mass = self.partition.masses()[m];
                *slot = self.marginal.set_cf(self.partition.cell(m), t)? / mass;
            }
        }
        let mut out = Complex64::new(0.0, 0.0);
        let mut config = vec![0usize; n];
        loop {
            let prob: f64 = (0..n).map(|k| laws[k][config[k]]).product();
            if prob != 0.0 {
                let mut term = Complex64::new(prob, 0.0);
                for (j, pj) in pos.iter().enumerate() {
                    let cell = (0..n).map(|k| (config[k] >> pj[k] & 1) << k).sum::<usize>();
                    term *= cfs[j][cell];
                }
                out += term;
            }
            let mut k = 0;
            while k < n {
                config[k] += 1;
                if config[k] < laws[k].len() {
                    break;
                }
                config[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        Ok(out)
    }

    fn check_lag(&self, lag: &[i64]) -> Result<()> {
        if lag.len() != self.axes() {
            return Err(Error::Dimension {
                expected: self.axes(),
                got: lag.len(),
            });
        }
        Ok(())
    }

    fn c_product(&self, k: &[usize], lag: &[i64]) -> f64 {
        k.iter().map(|&a| self.gbps[a].cov_at(lag[a].unsigned_abs())).product()
    }
}

/// `sum_K M_K prod_{k in K} C_k(|t_k - s_k|) + constant_term`.
#[derive(Clone, Debug)]
pub struct CovarianceDecomposition {
    /// Axes (0-based) where the lag is zero.
    pub zero_axes: Vec<usize>,
    /// Non-empty axis sets `K` with their coefficient matrices.
    pub terms: Vec<(Vec<usize>, Matrix)>,
    /// Lag-independent part, zero unless some coordinates coincide.
    pub constant_term: Matrix,
}

impl CovarianceDecomposition {
    pub fn term(&self, k: &[usize]) -> Option<&Matrix> {
        self.terms.iter().find(|(s, _)| s == k).map(|(_, m)| m)
    }

    pub fn evaluate(&self, spec: &FieldSpec, lag: &[i64]) -> Matrix {
        let mut out = self.constant_term.clone();
        for (k, m) in &self.terms {
            add_scaled(&mut out, m, spec.c_product(k, lag));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TwoAxisCheck {
    /// Both single-axis merged-cell conditions hold.
    pub hypothesis: bool,
    /// `((p1 + p2)/2 - 1/4) mu`.
    pub claimed_m11: f64,
    pub m11: f64,
    pub claimed_holds: bool,
    /// The value of the `A^{11}` integral that makes `m_0` vanish under the hypothesis.
    pub solving_m11: f64,
    pub m0_row_max: f64,
    /// Every off-axis coefficient row vanishes.
    pub all_zero_exhibited: bool,
}

#[derive(Clone, Debug)]
pub struct ZeroConditionReport {
    pub coordinate: usize,
    pub mean: f64,
    /// Axis sets `K'` whose merged-cell condition holds.
    pub certified: Vec<Vec<usize>>,
    /// Axis sets `K` whose coefficient rows must vanish.
    pub forced_zero: Vec<Vec<usize>>,
    /// Axis sets whose row vanishes at lags with all coordinates distinct.
    pub observed_zero: Vec<Vec<usize>>,
    /// The condition holds on all axes at once, so the coordinate is
    /// uncorrelated at every non-zero lag.
    pub fully_balanced: bool,
    pub max_forced_entry: f64,
    pub scale: f64,
    /// The decomposition shows every forced zero.
    pub exhibited: bool,
    pub two_axis: Option<TwoAxisCheck>,
}

fn add_scaled(a: &mut Matrix, b: &Matrix, c: f64) {
    for (ra, rb) in a.iter_mut().zip(b) {
        for (x, y) in ra.iter_mut().zip(rb) {
            *x += c * y;
        }
    }
}

/// All submasks of `mask`, including 0 and `mask`.
fn subsets_of(mask: usize) -> impl Iterator<Item = usize> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

/// Places bit `i` of `compact` at axis `axes[i]`.
fn spread(compact: usize, axes: &[usize]) -> usize {
    axes.iter().enumerate().filter(|(i, _)| compact >> i & 1 == 1).map(|(_, a)| 1 << a).sum()
}

fn axis_weight(probs: &[f64], axes: &[usize], state: usize) -> f64 {
    axes.iter()
        .map(|&a| if state >> a & 1 == 1 { probs[a] } else { 1.0 - probs[a] })
        .product()
}

fn bits(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|k| mask >> k & 1 == 1).collect()
}

fn mask_of(axes: &[usize]) -> usize {
    axes.iter().map(|a| 1 << a).sum()
}

/// A realised field. Sites are stored with the first axis varying slowest.
#[derive(Clone, Debug)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub dim: usize,
    pub extents: Vec<usize>,
    pub latent: Vec<BinaryPath>,
    pub seed: u64,
}

impl FieldSample {
    pub fn sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn index(&self, t: &[usize]) -> usize {
        t.iter().zip(&self.extents).fold(0, |acc, (&ti, &e)| acc * e + ti)
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut t = vec![0; self.extents.len()];
        for (k, &e) in self.extents.iter().enumerate().rev() {
            t[k] = idx % e;
            idx /= e;
        }
        t
    }

    pub fn value(&self, t: &[usize]) -> &[f64] {
        let i = self.index(t);
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }

    /// Cell mask selected by the latent bits at `t`.
    pub fn cell_at(&self, t: &[usize]) -> usize {
        t.iter()
            .enumerate()
            .map(|(k, &tk)| (self.latent[k].bits[tk] as usize) << k)
            .sum()
    }
}

/// Reusable field simulator.
#[derive(Clone, Debug)]
pub struct FieldSimulator {
    spec: Arc<FieldSpec>,
    tables: Vec<Arc<GapTables>>,
    samplers: Arc<Vec<RestrictedSampler>>,
}

impl FieldSimulator {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        let sites = spec
            .extents
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .and_then(|s| s.checked_mul(spec.dim()))
            .unwrap_or(usize::MAX);
        if sites > LATTICE_BUDGET {
            return Err(Error::LatticeBudget {
                cells: sites,
                budget: LATTICE_BUDGET,
            });
        }
        let tables = spec
            .gbps
            .iter()
            .zip(&spec.extents)
            .map(|(g, &e)| g.build_gap_tables(e).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let samplers = (0..1usize << spec.axes())
            .map(|m| RestrictedSampler::new(&spec.marginal, spec.partition.cell(m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSimulator {
            spec: Arc::new(spec),
            tables,
            samplers: Arc::new(samplers),
        })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// One field. Output depends only on `(spec, seed)`.
    pub fn simulate(&self, seed: u64) -> Result<FieldSample> {
        let spec = &self.spec;
        let d = spec.dim();
        let mut latent = Vec::with_capacity(spec.axes());
        for (k, (t, &e)) in self.tables.iter().zip(&spec.extents).enumerate() {
            let mut rng = stream(seed, Purpose::Latent, k as u64);
            latent.push(BinaryPath {
                bits: t.sample_bits(e, &mut rng)?,
                seed: Some(seed),
                p: spec.gbps[k].p(),
                covariance: spec.gbps[k].covariance().clone(),
            });
        }
        let total: usize = spec.extents.iter().product();
        let mut sample = FieldSample {
            values: Vec::new(),
            dim: d,
            extents: spec.extents.clone(),
            latent,
            seed,
        };
        let mut values = vec![0.0; total * d];
        values
            .par_chunks_mut(CHUNK * d)
            .enumerate()
            .try_for_each(|(c, chunk)| -> Result<()> {
                let mut rng = stream(seed, Purpose::Values, c as u64);
                for (j, row) in chunk.chunks_mut(d).enumerate() {
                    let t = sample.coords(c * CHUNK + j);
                    self.samplers[sample.cell_at(&t)].sample_into(&mut rng, row)?;
                }
                Ok(())
            })?;
        sample.values = values;
        Ok(sample)
    }
}

pub fn simulate_field(spec: FieldSpec, seed: u64) -> Result<FieldSample> {
    FieldSimulator::new(spec)?.simulate(seed)
}

/// Mass of cell `mask` implied by the axis probabilities of `spec`.
pub fn nominal_cell_mass(spec: &FieldSpec, mask: usize) -> f64 {
    cell_probability(spec.probs(), mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{CovarianceFunction, TailRule};
    use crate::marginal::{Atom, DiscreteLaw, NormalLaw, SupportSet};
    use crate::presets::preset;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary() -> FieldSpec {
        preset("binary-field-5.10").unwrap().field().unwrap().clone()
    }

    /// Labelled-atom marginal with one atom per cell.
    fn atom_field(probs: &[f64], values: &[f64], c: &[f64]) -> FieldSpec {
        let n = probs.len();
        let atoms = (0..1usize << n)
            .map(|m| Atom {
                label: m as i64,
                value: values[m],
                prob: cell_probability(probs, m),
            })
            .collect();
        let marginal = Marginal::Discrete(DiscreteLaw::new("atoms", atoms).unwrap());
        let cells = (0..1i64 << n).map(|m| SupportSet::integers([m])).collect();
        let partition = Partition::new(&marginal, probs.to_vec(), cells).unwrap();
        let gbps = probs
            .iter()
            .zip(c)
            .map(|(&p, &c)| GbpModel::new_unchecked(p, CovarianceFunction::exponential(c, 0.4).unwrap()).unwrap())
            .collect();
        FieldSpec::new(marginal, partition, gbps, vec![10; n]).unwrap()
    }

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn binary_field_formulas() {
        let f = binary();
        let c = 0.1;
        let off = f.theoretical_field_cov(&[1, 1]).unwrap()[0][0];
        assert_abs_diff_eq!(off, c * c + 0.25 * c + 0.25 * c, epsilon = 1e-12);
        assert_abs_diff_eq!(off, 0.06, epsilon = 1e-12);
        let axis = f.theoretical_field_cov(&[1, 0]).unwrap()[0][0];
        assert_abs_diff_eq!(axis, 0.5 * c + 0.25 * 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(axis, 0.1125, epsilon = 1e-12);
        for lag in [[1, 1], [1, 0], [0, 2], [-3, 2]] {
            let a = f.theoretical_field_cov(&lag).unwrap();
            let b = f.field_cov_oracle(&lag).unwrap();
            assert!(max_diff(&a, &b) < 1e-12, "{lag:?}");
        }
        // the two-axis statement drops the constant when one coordinate is shared
        let stated = f.two_axis_cov(&[1, 0]).unwrap()[0][0];
        assert_abs_diff_eq!(stated, 0.05, epsilon = 1e-12);
        let dec = f.decomposition(&[1, 0]).unwrap();
        assert_abs_diff_eq!(dec.constant_term[0][0], 0.0625, epsilon = 1e-12);
        assert_abs_diff_eq!(f.two_axis_cov(&[2, 3]).unwrap()[0][0], f.theoretical_field_cov(&[2, 3]).unwrap()[0][0], epsilon = 1e-12);
    }

    #[test]
    fn oracle_matches_decomposition_on_random_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3usize {
            for _ in 0..20 {
                let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
                let values: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-2.0..3.0)).collect();
                let c: Vec<f64> = probs.iter().map(|p| rng.random_range(0.0..0.5) * p * (1.0 - p)).collect();
                let f = atom_field(&probs, &values, &c);
                for pattern in 0..3usize.pow(n as u32) {
                    let lag: Vec<i64> = (0..n).map(|k| [0, 1, -2][pattern / 3usize.pow(k as u32) % 3]).collect();
                    let a = f.theoretical_field_cov(&lag).unwrap();
                    let b = f.field_cov_oracle(&lag).unwrap();
                    assert!(max_diff(&a, &b) < 1e-9, "n={n} lag={lag:?}");
                    if lag.iter().all(|&l| l != 0) {
                        assert!(max_diff(&f.printed_field_cov(&lag).unwrap(), &b) < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn single_axis_reduces_to_process_factor() {
        let f = atom_field(&[0.3], &[2.0, 5.0], &[0.05]);
        let d = (5.0f64 - 2.0).powi(2);
        let c = f.gbps()[0].cov_at(3);
        assert_abs_diff_eq!(f.field_cov_oracle(&[3]).unwrap()[0][0], d * c, epsilon = 1e-12);
    }

    #[test]
    fn example_i_only_product_term() {
        let f = preset("gauss-field-5.11i").unwrap().field().unwrap().clone();
        let probs = f.partition().probs().to_vec();
        let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let a = phi(0.0) - phi(0.5);
        let m0 = (a / (probs[0] * (1.0 - probs[0]) * probs[1] * (1.0 - probs[1]))).powi(2);
        let dec = f.decomposition(&[1, 1]).unwrap();
        assert_abs_diff_eq!(dec.term(&[0, 1]).unwrap()[0][0], m0, epsilon = 1e-9);
        assert_abs_diff_eq!(dec.term(&[0]).unwrap()[0][0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(dec.term(&[1]).unwrap()[0][0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn example_ii_product_term_vanishes() {
        let f = preset("gauss-field-5.11ii").unwrap().field().unwrap().clone();
        let report = f.check_zero_conditions(0).unwrap();
        assert!(report.observed_zero.contains(&vec![0, 1]), "{report:?}");
        let dec = f.decomposition(&[2, 1]).unwrap();
        assert!(dec.term(&[0, 1]).unwrap()[0][0].abs() < 1e-9);
        let probs = f.partition().probs().to_vec();
        let a = crate::marginal::ContinuousLaw::quantile(&NormalLaw::standard(), 0.8);
        let int = (-a * a / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for (k, &p) in probs.iter().enumerate() {
            let want = (int / (p * (1.0 - p))).powi(2);
            assert_abs_diff_eq!(dec.term(&[k]).unwrap()[0][0], want, epsilon = 1e-9);
        }
    }

    #[test]
    fn merged_cell_conditions() {
        let (p1, p2) = (0.3, 0.6);
        let build = |x: f64| {
            // unnormalised integrals for a unit mean
            let ints = [1.0 - p1 - p2 + x, p1 - x, p2 - x, x];
            let values: Vec<f64> = (0..4).map(|m| ints[m] / cell_probability(&[p1, p2], m)).collect();
            atom_field(&[p1, p2], &values, &[0.1, 0.1])
        };
        let solving = build(p1 * p2).check_zero_conditions(0).unwrap();
        let two = solving.two_axis.clone().unwrap();
        assert!(two.hypothesis && two.all_zero_exhibited && solving.exhibited);
        assert!(!two.claimed_holds);
        let claimed = build(((p1 + p2) / 2.0 - 0.25) * 1.0).check_zero_conditions(0).unwrap();
        let two = claimed.two_axis.unwrap();
        assert!(two.hypothesis && two.claimed_holds);
        assert!(two.m0_row_max > 1e-4);
        assert!(claimed.forced_zero.contains(&vec![0]) && claimed.exhibited);
    }

    #[test]
    fn fully_balanced_partition_is_uncorrelated() {
        use crate::marginal::{build_partition, PartitionMode};
        let m = Marginal::continuous(NormalLaw::standard());
        let part = build_partition(
            &m,
            &[0.4, 0.5],
            PartitionMode::SymmetricNested {
                center: 0.0,
                balanced_axes: vec![0, 1],
            },
        )
        .unwrap();
        let gbps = vec![
            GbpModel::new(0.4, CovarianceFunction::exponential(0.2, 0.4).unwrap()).unwrap(),
            GbpModel::new(0.5, CovarianceFunction::exponential(0.2, 0.5).unwrap()).unwrap(),
        ];
        let f = FieldSpec::new(m, part, gbps, vec![20, 20]).unwrap();
        let r = f.check_zero_conditions(0).unwrap();
        assert!(r.fully_balanced && r.exhibited);
        for lag in [[1, 0], [0, 1], [2, 3]] {
            assert!(f.theoretical_field_cov(&lag).unwrap()[0][0].abs() < 1e-9);
        }
    }

    #[test]
    fn joint_cf_limits() {
        let f = preset("gauss-field-6.3").unwrap().field().unwrap().clone();
        let one = f.field_joint_cf(&[vec![0.7]], &[vec![3, 4]]).unwrap();
        assert!((one - Complex64::new((-0.245f64).exp(), 0.0)).norm() < 1e-9);
        let two = f.field_joint_cf(&[vec![0.7], vec![0.0]], &[vec![3, 4], vec![5, 9]]).unwrap();
        assert!((two - one).norm() < 1e-9);
        let tiny = |p| GbpModel::new_unchecked(p, CovarianceFunction::tabulated(vec![1e-15, 1e-16], TailRule::Geometric).unwrap()).unwrap();
        let g = FieldSpec::new(
            f.marginal().clone(),
            f.partition().clone(),
            vec![tiny(0.4), tiny(0.5)],
            vec![10, 10],
        )
        .unwrap();
        let t = [vec![0.3], vec![-1.2]];
        let both = g.field_joint_cf(&t, &[vec![1, 1], vec![2, 3]]).unwrap();
        let want = (-(0.09f64 + 1.44) / 2.0).exp();
        assert!((both.re - want).abs() < 1e-9 && both.im.abs() < 1e-9);
    }

    #[test]
    fn simulated_values_lie_in_selected_cells() {
        let f = preset("gauss-field-6.3").unwrap().field().unwrap().clone().with_extents(vec![30, 40]).unwrap();
        let sim = FieldSimulator::new(f.clone()).unwrap();
        let s = sim.simulate(11).unwrap();
        assert_eq!(s.values, sim.simulate(11).unwrap().values);
        for i in 0..s.sites() {
            let t = s.coords(i);
            assert_eq!(s.index(&t), i);
            assert!(f.partition().cell(s.cell_at(&t)).contains(s.value(&t)));
        }
    }

    #[test]
    fn lattice_budget_guard() {
        let f = binary().with_extents(vec![20_000, 20_000]).unwrap();
        assert!(matches!(FieldSimulator::new(f), Err(Error::LatticeBudget { .. })));
    }
}
