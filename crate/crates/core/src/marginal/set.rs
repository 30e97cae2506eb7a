//! Subsets of the support.
//!
//! Intervals are half-open, `(lo, hi]`, so that adjacent cells of a
//! partition never share a point. This matters only for discrete laws.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x <= self.hi
    }
}

/// Sorted union of disjoint, non-empty intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct IntervalUnion {
    parts: Vec<Interval>,
}

impl IntervalUnion {
    /// Builds a union from `(lo, hi]` pairs; overlapping or touching pairs
    /// are merged and empty ones dropped.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        for &(lo, hi) in pairs {
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidParameter("interval bound is NaN".into()));
            }
            if lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "interval ({lo}, {hi}] has lo > hi"
                )));
            }
        }
        Ok(Self::from_sorted_unchecked(pairs.to_vec()))
    }

    fn from_sorted_unchecked(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.retain(|&(lo, hi)| hi > lo);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut parts: Vec<Interval> = Vec::with_capacity(pairs.len());
        for (lo, hi) in pairs {
            match parts.last_mut() {
                Some(last) if lo <= last.hi => last.hi = last.hi.max(hi),
                _ => parts.push(Interval { lo, hi }),
            }
        }
        IntervalUnion { parts }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(&[(lo, hi)])
    }

    pub fn real_line() -> Self {
        IntervalUnion {
            parts: vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
        }
    }

    pub fn empty() -> Self {
        IntervalUnion::default()
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.parts.partition_point(|p| p.hi < x);
        idx < self.parts.len() && self.parts[idx].contains(x)
    }

    pub fn intersect(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = self.parts[i];
            let b = other.parts[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if hi > lo {
                out.push((lo, hi));
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::from_sorted_unchecked(out)
    }

    /// Complement within the real line.
    pub fn complement(&self) -> IntervalUnion {
        let mut out = Vec::new();
        let mut start = f64::NEG_INFINITY;
        for p in &self.parts {
            if p.lo > start {
                out.push((start, p.lo));
            }
            start = p.hi;
        }
        if start < f64::INFINITY {
            out.push((start, f64::INFINITY));
        }
        Self::from_sorted_unchecked(out)
    }

    pub fn difference(&self, other: &IntervalUnion) -> IntervalUnion {
        self.intersect(&other.complement())
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        let pairs: Vec<(f64, f64)> = self
            .parts
            .iter()
            .chain(&other.parts)
            .map(|p| (p.lo, p.hi))
            .collect();
        Self::from_sorted_unchecked(pairs)
    }

    /// Reflection `x -> 2c - x`, keeping the half-open convention.
    pub fn mirror(&self, center: f64) -> IntervalUnion {
        let pairs: Vec<(f64, f64)> = self
            .parts
            .iter()
            .map(|p| (2.0 * center - p.hi, 2.0 * center - p.lo))
            .collect();
        Self::from_sorted_unchecked(pairs)
    }

    /// Image under a non-decreasing map of the endpoints.
    pub fn map_endpoints(&self, f: impl Fn(f64) -> f64) -> IntervalUnion {
        let pairs: Vec<(f64, f64)> = self.parts.iter().map(|p| (f(p.lo), f(p.hi))).collect();
        Self::from_sorted_unchecked(pairs)
    }

    /// Endpoints that are finite, for use as quadrature breakpoints.
    pub fn finite_endpoints(&self) -> Vec<f64> {
        self.parts
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|x| x.is_finite())
            .collect()
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "∅");
        }
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "({}, {}]", p.lo, p.hi)?;
        }
        Ok(())
    }
}

/// Product of one interval union per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxSet {
    pub coords: Vec<IntervalUnion>,
}

impl BoxSet {
    pub fn new(coords: Vec<IntervalUnion>) -> Self {
        BoxSet { coords }
    }

    pub fn full(d: usize) -> Self {
        BoxSet {
            coords: vec![IntervalUnion::real_line(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.iter().any(IntervalUnion::is_empty)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.coords.iter().zip(x).all(|(c, &v)| c.contains(v))
    }

    pub fn intersect(&self, other: &BoxSet) -> BoxSet {
        BoxSet {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.intersect(b))
                .collect(),
        }
    }

    /// `self \ other` as disjoint boxes.
    pub fn difference(&self, other: &BoxSet) -> Vec<BoxSet> {
        let mut out = Vec::new();
        let mut prefix: Vec<IntervalUnion> = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let outside = self.coords[k].difference(&other.coords[k]);
            if !outside.is_empty() {
                let mut coords = prefix.clone();
                coords.push(outside);
                coords.extend(self.coords[k + 1..].iter().cloned());
                let b = BoxSet { coords };
                if !b.is_empty() {
                    out.push(b);
                }
            }
            let inside = self.coords[k].intersect(&other.coords[k]);
            if inside.is_empty() {
                return out;
            }
            prefix.push(inside);
        }
        out
    }
}

type PredicateFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A set known only through a membership test. Integrals over it are Monte
/// Carlo estimates with a reported standard error.
#[derive(Clone)]
pub struct PredicateSet {
    pub name: String,
    pub test: PredicateFn,
    /// Bounding box; points outside it are never members.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Number of Monte Carlo draws used for integrals.
    pub samples: usize,
}

impl fmt::Debug for PredicateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateSet")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("samples", &self.samples)
            .finish()
    }
}

impl PredicateSet {
    pub fn new(
        name: impl Into<String>,
        test: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        bounds: Option<Vec<(f64, f64)>>,
        samples: usize,
    ) -> Self {
        PredicateSet {
            name: name.into(),
            test: Arc::new(test),
            bounds,
            samples,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if let Some(b) = &self.bounds {
            if b.iter().zip(x).any(|(&(lo, hi), &v)| v < lo || v > hi) {
                return false;
            }
        }
        (self.test)(x)
    }
}

#[derive(Clone, Debug)]
pub enum SupportSet {
    /// One-dimensional union of intervals, in the value coordinate.
    Intervals(IntervalUnion),
    /// Atom labels of a discrete law.
    Integers(BTreeSet<i64>),
    /// Disjoint union of boxes in `R^d`.
    Boxes(Vec<BoxSet>),
    Complement(Box<SupportSet>),
    Predicate(PredicateSet),
}

impl SupportSet {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ok(SupportSet::Intervals(IntervalUnion::interval(lo, hi)?))
    }

    pub fn intervals(pairs: &[(f64, f64)]) -> Result<Self> {
        Ok(SupportSet::Intervals(IntervalUnion::new(pairs)?))
    }

    pub fn integers(labels: impl IntoIterator<Item = i64>) -> Self {
        SupportSet::Integers(labels.into_iter().collect())
    }

    /// Union of possibly overlapping boxes, stored as disjoint pieces.
    pub fn union_of_boxes(boxes: Vec<BoxSet>) -> Result<Self> {
        let d = boxes.first().map(BoxSet::dim).unwrap_or(0);
        if d == 0 {
            return Err(Error::InvalidParameter("box union needs at least one box".into()));
        }
        let mut pieces: Vec<BoxSet> = Vec::new();
        for b in boxes {
            if b.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: b.dim(),
                });
            }
            let mut fresh = vec![b];
            for existing in &pieces {
                fresh = fresh.iter().flat_map(|f| f.difference(existing)).collect();
            }
            pieces.extend(fresh.into_iter().filter(|b| !b.is_empty()));
        }
        Ok(SupportSet::Boxes(pieces))
    }

    pub fn complement(&self) -> SupportSet {
        match self {
            SupportSet::Complement(inner) => (**inner).clone(),
            SupportSet::Intervals(u) => SupportSet::Intervals(u.complement()),
            SupportSet::Boxes(boxes) => {
                let d = boxes.first().map(BoxSet::dim).unwrap_or(1);
                let mut rest = vec![BoxSet::full(d)];
                for b in boxes {
                    rest = rest.iter().flat_map(|r| r.difference(b)).collect();
                }
                SupportSet::Boxes(rest)
            }
            other => SupportSet::Complement(Box::new(other.clone())),
        }
    }

    /// Intersection. Pairs without an exact representation become a
    /// predicate over the membership tests of both sets.
    pub fn intersect(&self, other: &SupportSet) -> SupportSet {
        match (self, other) {
            (SupportSet::Intervals(a), SupportSet::Intervals(b)) => SupportSet::Intervals(a.intersect(b)),
            (SupportSet::Integers(a), SupportSet::Integers(b)) => {
                SupportSet::Integers(a.intersection(b).copied().collect())
            }
            (SupportSet::Integers(a), SupportSet::Complement(c)) | (SupportSet::Complement(c), SupportSet::Integers(a))
                if matches!(**c, SupportSet::Integers(_)) =>
            {
                let SupportSet::Integers(b) = &**c else { unreachable!() };
                SupportSet::Integers(a.difference(b).copied().collect())
            }
            (SupportSet::Boxes(a), SupportSet::Boxes(b)) => SupportSet::Boxes(
                a.iter()
                    .flat_map(|x| b.iter().map(move |y| x.intersect(y)))
                    .filter(|x| !x.is_empty())
                    .collect(),
            ),
            _ => {
                let d = self.dim().or(other.dim()).unwrap_or(1);
                let bounds = match (self, other) {
                    (SupportSet::Predicate(p), _) | (_, SupportSet::Predicate(p)) => p.bounds.clone(),
                    _ => None,
                }
                .or(Some(vec![(f64::NEG_INFINITY, f64::INFINITY); d]));
                let samples = match (self, other) {
                    (SupportSet::Predicate(p), _) | (_, SupportSet::Predicate(p)) => p.samples,
                    _ => 200_000,
                };
                let (a, b) = (self.clone(), other.clone());
                SupportSet::Predicate(PredicateSet::new(
                    format!("({self}) ∩ ({other})"),
                    move |x: &[f64]| a.contains(x) && b.contains(x),
                    bounds,
                    samples,
                ))
            }
        }
    }

    /// Dimension of the points the set is made of, if it is fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            SupportSet::Intervals(_) | SupportSet::Integers(_) => Some(1),
            SupportSet::Boxes(b) => b.first().map(BoxSet::dim),
            SupportSet::Complement(inner) => inner.dim(),
            SupportSet::Predicate(p) => p.bounds.as_ref().map(Vec::len),
        }
    }

    /// Membership of a point. Integer sets compare against the rounded
    /// value, which matches labels for integer-valued laws.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SupportSet::Intervals(u) => u.contains(x[0]),
            SupportSet::Integers(s) => {
                x[0].fract() == 0.0 && s.contains(&(x[0] as i64))
            }
            SupportSet::Boxes(bs) => bs.iter().any(|b| b.contains(x)),
            SupportSet::Complement(inner) => !inner.contains(x),
            SupportSet::Predicate(p) => p.contains(x),
        }
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportSet::Intervals(u) => write!(f, "{u}"),
            SupportSet::Integers(s) => {
                write!(f, "{{")?;
                for (i, k) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, "}}")
            }
            SupportSet::Boxes(bs) => {
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ∪ ")?;
                    }
                    for (k, c) in b.coords.iter().enumerate() {
                        if k > 0 {
                            write!(f, "×")?;
                        }
                        write!(f, "[{c}]")?;
                    }
                }
                Ok(())
            }
            SupportSet::Complement(inner) => write!(f, "complement of {inner}"),
            SupportSet::Predicate(p) => write!(f, "{{x : {}}}", p.name),
        }
    }
}
