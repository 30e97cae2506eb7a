//! Partitions of the support into cells `A^{l_1 ... l_n}`.
//!
//! Cell `mask` collects the points used when the latent bits are `l_k =
//! (mask >> (k-1)) & 1`, so its mass must be `prod_k p_k^{l_k} (1-p_k)^{1-l_k}`.

use std::fmt::Write as _;

use super::law::ContinuousLaw;
use super::set::{IntervalUnion, SupportSet};
use super::Marginal;
use crate::error::{Error, Result};

/// Absolute tolerance, in units of the marginal standard deviation, for
/// first-moment matching.
pub const MEAN_TOLERANCE: f64 = 1e-6;
const MASS_TOLERANCE: f64 = 1e-8;
const OVERLAP_TOLERANCE: f64 = 1e-10;

/// What a balanced subset must match besides its mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BalanceTarget {
    MassOnly,
    Coordinate(usize),
}

#[derive(Clone, Debug)]
pub enum PartitionMode {
    /// Explicit cells, listed by mask.
    UserCells(Vec<SupportSet>),
    /// Mirror-symmetric nested cells about `center` for the listed axes
    /// (0-based), then leftmost splits for the rest.
    SymmetricNested { center: f64, balanced_axes: Vec<usize> },
    /// Mean-matched nested cells for the listed axes, then leftmost splits.
    BalancedNested { balanced_axes: Vec<usize> },
}

#[derive(Clone, Debug)]
pub struct Partition {
    probs: Vec<f64>,
    cells: Vec<SupportSet>,
    masses: Vec<f64>,
    mass_errors: Vec<f64>,
    means: Vec<Vec<f64>>,
}

/// Mass of cell `mask` implied by the axis probabilities.
pub fn cell_probability(probs: &[f64], mask: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| if mask >> k & 1 == 1 { p } else { 1.0 - p })
        .product()
}

impl Partition {
    /// Validates explicit cells against the axis probabilities.
    pub fn new(marginal: &Marginal, probs: Vec<f64>, cells: Vec<SupportSet>) -> Result<Self> {
        let n = probs.len();
        if n == 0 || n > 16 {
            return Err(Error::Partition(format!("need 1 to 16 axes, got {n}")));
        }
        if let Some(p) = probs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Partition(format!("axis probability {p} outside (0, 1)")));
        }
        if cells.len() != 1 << n {
            return Err(Error::Partition(format!(
                "{n} axes need {} cells, got {}",
                1 << n,
                cells.len()
            )));
        }
        let mut masses = Vec::with_capacity(cells.len());
        let mut mass_errors = Vec::with_capacity(cells.len());
        let mut means = Vec::with_capacity(cells.len());
        for (mask, cell) in cells.iter().enumerate() {
            let (m, se) = marginal.set_mass_with_error(cell)?;
            let want = cell_probability(&probs, mask);
            let tol = MASS_TOLERANCE.max(4.0 * se);
            if (m - want).abs() > tol {
                return Err(Error::Partition(format!(
                    "cell {} has mass {m:.12}, expected {want:.12}",
                    label(mask, n)
                )));
            }
            masses.push(m);
            mass_errors.push(se);
            means.push(marginal.set_mean(cell)?);
        }
        let total: f64 = masses.iter().sum();
        let total_se = mass_errors.iter().map(|e| e * e).sum::<f64>().sqrt();
        if (total - 1.0).abs() > MASS_TOLERANCE.max(4.0 * total_se) {
            return Err(Error::Partition(format!("cell masses sum to {total}")));
        }
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                if let Some(overlap) = overlap_mass(marginal, &cells[i], &cells[j])? {
                    if overlap > OVERLAP_TOLERANCE {
                        return Err(Error::Partition(format!(
                            "cells {} and {} overlap with mass {overlap:e}",
                            label(i, n),
                            label(j, n)
                        )));
                    }
                }
            }
        }
        Ok(Partition {
            probs,
            cells,
            masses,
            mass_errors,
            means,
        })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cells(&self) -> &[SupportSet] {
        &self.cells
    }

    pub fn cell(&self, mask: usize) -> &SupportSet {
        &self.cells[mask]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass_errors(&self) -> &[f64] {
        &self.mass_errors
    }

    /// `∫_{cell} x f`, unnormalised.
    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// `E(X^{A^l})`: the mean of the law restricted to the cell.
    pub fn cell_expectation(&self, mask: usize) -> Vec<f64> {
        let m = self.masses[mask];
        self.means[mask].iter().map(|v| v / m).collect()
    }

    pub fn label(&self, mask: usize) -> String {
        label(mask, self.n())
    }

    /// Largest violation of `∫_{A({l_i, i in axes})} x_coord f = mu prod p`
    /// over all patterns on `axes`.
    pub fn balance_residual(&self, axes: &[usize], coord: usize, mu: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for pattern in 0..1usize << axes.len() {
            let mut integral = 0.0;
            for (mask, m) in self.means.iter().enumerate() {
                let matches = axes
                    .iter()
                    .enumerate()
                    .all(|(j, &a)| (mask >> a & 1) == (pattern >> j & 1));
                if matches {
                    integral += m[coord];
                }
            }
            let prob: f64 = axes
                .iter()
                .enumerate()
                .map(|(j, &a)| {
                    if pattern >> j & 1 == 1 {
                        self.probs[a]
                    } else {
                        1.0 - self.probs[a]
                    }
                })
                .product();
            worst = worst.max((integral - mu * prob).abs());
        }
        worst
    }
}

/// `l_1 l_2 ... l_n` as a string, axis 1 first.
pub fn label(mask: usize, n: usize) -> String {
    let mut s = String::with_capacity(n);
    for k in 0..n {
        let _ = write!(s, "{}", mask >> k & 1);
    }
    s
}

fn overlap_mass(marginal: &Marginal, a: &SupportSet, b: &SupportSet) -> Result<Option<f64>> {
    let inter = match (a, b) {
        (SupportSet::Intervals(x), SupportSet::Intervals(y)) => SupportSet::Intervals(x.intersect(y)),
        (SupportSet::Integers(x), SupportSet::Integers(y)) => {
            SupportSet::Integers(x.intersection(y).copied().collect())
        }
        (SupportSet::Boxes(x), SupportSet::Boxes(y)) => {
            let pieces = x
                .iter()
                .flat_map(|bx| y.iter().map(move |by| bx.intersect(by)))
                .filter(|b| !b.is_empty())
                .collect::<Vec<_>>();
            if pieces.is_empty() {
                return Ok(Some(0.0));
            }
            SupportSet::Boxes(pieces)
        }
        _ => return Ok(None),
    };
    Ok(Some(marginal.set_mass(&inter)?))
}

fn univariate_law(m: &Marginal) -> Result<&dyn ContinuousLaw> {
    match m {
        Marginal::Continuous(law) => Ok(law.as_ref()),
        Marginal::Discrete(_) => Err(Error::NotRepresentable(
            "a discrete law cannot in general hit a prescribed mass; supply the set and use the induced p".into(),
        )),
        other => Err(Error::Unsupported(format!(
            "balanced subsets are built for one-dimensional continuous laws, not {}",
            other.name()
        ))),
    }
}

fn to_u(law: &dyn ContinuousLaw, set: &IntervalUnion) -> IntervalUnion {
    set.map_endpoints(|x| {
        if x == f64::NEG_INFINITY {
            0.0
        } else if x == f64::INFINITY {
            1.0
        } else {
            law.cdf(x)
        }
    })
}

fn from_u(law: &dyn ContinuousLaw, set: &IntervalUnion) -> IntervalUnion {
    set.map_endpoints(|u| {
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            law.quantile(u)
        }
    })
}

/// Position `s` measured in mass from the left end of `u_set`, as a `u` value.
fn locate(u_set: &IntervalUnion, s: f64) -> f64 {
    let mut left = s;
    for p in u_set.parts() {
        let len = p.hi - p.lo;
        if left <= len {
            return p.lo + left;
        }
        left -= len;
    }
    u_set.parts().last().map_or(0.0, |p| p.hi)
}

fn window(law: &dyn ContinuousLaw, a: &IntervalUnion, u_set: &IntervalUnion, from: f64, to: f64) -> IntervalUnion {
    let lo = locate(u_set, from);
    let hi = locate(u_set, to);
    let u_win = u_set.intersect(&IntervalUnion::new(&[(lo, hi)]).expect("ordered window"));
    from_u(law, &u_win).intersect(a)
}

/// A subset `A1` of `A` with `mass(A1) = p mass(A)` and, for a coordinate
/// target, `∫_{A1} x f = p ∫_A x f`.
///
/// `A1` is a window of fixed mass sliding through `A` in mass coordinates;
/// its first moment is continuous and monotone in the window position, so
/// the matching position is found by bisection.
pub fn find_balanced_subset(
    marginal: &Marginal,
    a: &IntervalUnion,
    p: f64,
    target: BalanceTarget,
) -> Result<IntervalUnion> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction {p} outside (0, 1)")));
    }
    let law = univariate_law(marginal)?;
    if let BalanceTarget::Coordinate(c) = target {
        if c != 0 {
            return Err(Error::Dimension { expected: 1, got: c + 1 });
        }
    }
    let u_set = to_u(law, a);
    let total: f64 = u_set.parts().iter().map(|q| q.hi - q.lo).sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter(format!("set {a} has zero mass")));
    }
    let w = p * total;
    if target == BalanceTarget::MassOnly {
        return Ok(window(law, a, &u_set, 0.0, w));
    }
    let set_of = |s: &IntervalUnion| SupportSet::Intervals(s.clone());
    let goal = p * marginal.set_mean(&set_of(a))?[0];
    let g = |y: f64| -> Result<f64> {
        let win = window(law, a, &u_set, y - w, y);
        Ok(marginal.set_mean(&set_of(&win))?[0] - goal)
    };
    let (mut lo, mut hi) = (w, total);
    let (mut glo, ghi) = (g(lo)?, g(hi)?);
    if glo > 0.0 || ghi < 0.0 {
        return Err(Error::Partition(format!(
            "window moment does not bracket the target ({glo:e}, {ghi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let gm = g(mid)?;
        if gm.abs() < 1e-14 {
            lo = mid;
            hi = mid;
            break;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    Ok(window(law, a, &u_set, y - w, y))
}

fn check_symmetric(law: &dyn ContinuousLaw, center: f64) -> Result<()> {
    if let Some(c) = law.symmetry_center() {
        if (c - center).abs() <= 1e-12 * c.abs().max(1.0) {
            return Ok(());
        }
    }
    let scale = law.variance().sqrt();
    for i in 1..=40 {
        let x = scale * i as f64 / 10.0;
        let (a, b) = (law.pdf(center + x), law.pdf(center - x));
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300) {
            return Err(Error::Partition(format!(
                "{} is not symmetric about {center}",
                law.name()
            )));
        }
    }
    Ok(())
}

/// Builds a partition by the requested construction.
pub fn build_partition(marginal: &Marginal, probs: &[f64], mode: PartitionMode) -> Result<Partition> {
    let n = probs.len();
    let (balanced, symmetric_center) = match &mode {
        PartitionMode::UserCells(cells) => {
            return Partition::new(marginal, probs.to_vec(), cells.clone());
        }
        PartitionMode::SymmetricNested { center, balanced_axes } => (balanced_axes.clone(), Some(*center)),
        PartitionMode::BalancedNested { balanced_axes } => (balanced_axes.clone(), None),
    };
    let law = univariate_law(marginal)?;
    if let Some(c) = symmetric_center {
        check_symmetric(law, c)?;
    }
    let mut seen = vec![false; n];
    for &a in &balanced {
        if a >= n || seen[a] {
            return Err(Error::Partition(format!("bad balanced axis list {balanced:?}")));
        }
        seen[a] = true;
    }
    let order: Vec<usize> = balanced
        .iter()
        .copied()
        .chain((0..n).filter(|a| !seen[*a]))
        .collect();

    let mut cells: Vec<(usize, IntervalUnion)> = vec![(0, IntervalUnion::real_line())];
    for (step, &axis) in order.iter().enumerate() {
        let p = probs[axis];
        let mut next = Vec::with_capacity(cells.len() * 2);
        for (mask, s) in cells {
            let s1 = if step < balanced.len() {
                match symmetric_center {
                    Some(c) => {
                        let upper = s.intersect(&IntervalUnion::interval(c, f64::INFINITY)?);
                        let h1 = find_balanced_subset(marginal, &upper, p, BalanceTarget::MassOnly)?;
                        h1.union(&h1.mirror(c))
                    }
                    None => find_balanced_subset(marginal, &s, p, BalanceTarget::Coordinate(0))?,
                }
            } else {
                find_balanced_subset(marginal, &s, p, BalanceTarget::MassOnly)?
            };
            let s0 = s.difference(&s1);
            next.push((mask | 1 << axis, s1));
            next.push((mask, s0));
        }
        cells = next;
    }
    cells.sort_by_key(|(m, _)| *m);
    let sets = cells.into_iter().map(|(_, s)| SupportSet::Intervals(s)).collect();
    Partition::new(marginal, probs.to_vec(), sets)
}

#[cfg(test)]
mod tests {
    use super::super::{ExponentialLaw, NormalLaw, UniformLaw};
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_half_is_central() {
        let u = Marginal::continuous(UniformLaw::new(0.0, 1.0).unwrap());
        let a = IntervalUnion::interval(0.0, 1.0).unwrap();
        let a1 = find_balanced_subset(&u, &a, 0.5, BalanceTarget::Coordinate(0)).unwrap();
        assert_eq!(a1.parts().len(), 1);
        assert_abs_diff_eq!(a1.parts()[0].lo, 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(a1.parts()[0].hi, 0.75, epsilon = 1e-9);
    }

    #[test]
    fn normal_half_is_quartiles() {
        let n = Marginal::continuous(NormalLaw::standard());
        let a1 = find_balanced_subset(&n, &IntervalUnion::real_line(), 0.5, BalanceTarget::Coordinate(0)).unwrap();
        assert_abs_diff_eq!(a1.parts()[0].hi, 0.674_489_750_196_081_7, epsilon = 1e-7);
        assert_abs_diff_eq!(a1.parts()[0].lo, -0.674_489_750_196_081_7, epsilon = 1e-7);
    }

    #[test]
    fn exponential_window_matches_moment() {
        let e = Marginal::continuous(ExponentialLaw::new(1.0).unwrap());
        let a = IntervalUnion::interval(0.0, f64::INFINITY).unwrap();
        let a1 = find_balanced_subset(&e, &a, 0.5, BalanceTarget::Coordinate(0)).unwrap();
        let s = SupportSet::Intervals(a1);
        assert_abs_diff_eq!(e.set_mass(&s).unwrap(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(e.set_mean(&s).unwrap()[0], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn section_six_cells() {
        let n = Marginal::continuous(NormalLaw::standard());
        let z = |a: f64| NormalLaw::standard().quantile(1.0 - a);
        let cells = vec![
            SupportSet::intervals(&[(-z(0.25), -z(0.4)), (z(0.4), z(0.25))]).unwrap(),
            SupportSet::intervals(&[(-z(0.2), -z(0.25)), (z(0.15), f64::INFINITY)]).unwrap(),
            SupportSet::intervals(&[(f64::NEG_INFINITY, -z(0.2)), (z(0.25), z(0.15))]).unwrap(),
            SupportSet::interval(-z(0.4), z(0.4)).unwrap(),
        ];
        let part = build_partition(&n, &[0.4, 0.5], PartitionMode::UserCells(cells)).unwrap();
        assert_abs_diff_eq!(part.masses()[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(part.masses()[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(part.masses()[2], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(part.masses()[3], 0.2, epsilon = 1e-12);
        assert_eq!(part.label(1), "10");
    }

    #[test]
    fn overlapping_cells_rejected() {
        let u = Marginal::continuous(UniformLaw::new(0.0, 1.0).unwrap());
        let cells = vec![
            SupportSet::interval(0.4, 1.0).unwrap(),
            SupportSet::interval(0.0, 0.5).unwrap(),
        ];
        assert!(build_partition(&u, &[0.5], PartitionMode::UserCells(cells)).is_err());
    }

    #[test]
    fn symmetric_nested_means_vanish() {
        let n = Marginal::continuous(NormalLaw::standard());
        let part = build_partition(
            &n,
            &[0.4, 0.5],
            PartitionMode::SymmetricNested {
                center: 0.0,
                balanced_axes: vec![0, 1],
            },
        )
        .unwrap();
        for m in part.means() {
            assert!(m[0].abs() < 1e-9);
        }
        let one_axis = build_partition(
            &n,
            &[0.4, 0.5],
            PartitionMode::SymmetricNested {
                center: 0.0,
                balanced_axes: vec![1],
            },
        )
        .unwrap();
        assert!(one_axis.balance_residual(&[1], 0, 0.0) < 1e-9);
        assert!(one_axis.balance_residual(&[0], 0, 0.0) > 1e-3);
    }

    #[test]
    fn balanced_nested_exponential() {
        let e = Marginal::continuous(ExponentialLaw::new(1.0).unwrap());
        let part = build_partition(
            &e,
            &[0.3, 0.6, 0.5],
            PartitionMode::BalancedNested {
                balanced_axes: vec![2, 0],
            },
        )
        .unwrap();
        assert!(part.balance_residual(&[2, 0], 0, 1.0) < MEAN_TOLERANCE);
        assert!(part.balance_residual(&[2], 0, 1.0) < MEAN_TOLERANCE);
        assert!(part.balance_residual(&[0], 0, 1.0) < MEAN_TOLERANCE);
    }

    #[test]
    fn discrete_is_not_representable() {
        let b = Marginal::Discrete(super::super::DiscreteLaw::binomial(5, 0.5).unwrap());
        let r = find_balanced_subset(&b, &IntervalUnion::real_line(), 0.3, BalanceTarget::MassOnly);
        assert!(matches!(r, Err(Error::NotRepresentable(_))));
    }
}
