//! Candidate covariance functions `C(x)`, `x >= 1`, and the sufficient
//! conditions under which a pair `(p, C)` drives a well-defined binary
//! sequence.
//!
//! The checker works on a finite horizon. For the parametric families a
//! closed-form admissible region is also available through
//! [`admissible_region`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizon used when a caller does not pick one.
pub const DEFAULT_HORIZON: u64 = 10_000;

/// Absolute slack allowed in the ratio-monotonicity test.
const RATIO_SLACK: f64 = 1e-12;

/// Below this value ratios are numerically meaningless and are not compared.
const RATIO_FLOOR: f64 = 1e-280;

/// How a tabulated covariance is extended past its last entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum TailRule {
    /// Continue geometrically with the ratio of the last two entries.
    #[default]
    Geometric,
    /// Evaluation past the table is an error.
    Reject,
}


#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    Exponential,
    StretchedExponential,
    TwoExponential,
    PowerLaw,
    Tabulated,
}

/// A decreasing positive function on the positive integers.
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceFunction {
    /// `c * exp(-theta * x)`
    Exponential { c: f64, theta: f64 },
    /// `c * exp(-theta * x^alpha)`
    StretchedExponential { c: f64, theta: f64, alpha: f64 },
    /// `c1 * rho1^x + c2 * rho2^x`
    TwoExponential {
        c1: f64,
        rho1: f64,
        c2: f64,
        rho2: f64,
    },
    /// `c * x^(2H - 2)`
    PowerLaw { c: f64, h: f64 },
    /// `values[x - 1]` for `x` inside the table, `tail` beyond it.
    Tabulated { values: Vec<f64>, tail: TailRule },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and positive, got {v}"
        )))
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

impl CovarianceFunction {
    pub fn exponential(c: f64, theta: f64) -> Result<Self> {
        let f = CovarianceFunction::Exponential { c, theta };
        f.validate()?;
        Ok(f)
    }

    pub fn stretched_exponential(c: f64, theta: f64, alpha: f64) -> Result<Self> {
        let f = CovarianceFunction::StretchedExponential { c, theta, alpha };
        f.validate()?;
        Ok(f)
    }

    pub fn two_exponential(c1: f64, rho1: f64, c2: f64, rho2: f64) -> Result<Self> {
        let f = CovarianceFunction::TwoExponential { c1, rho1, c2, rho2 };
        f.validate()?;
        Ok(f)
    }

    pub fn power_law(c: f64, h: f64) -> Result<Self> {
        let f = CovarianceFunction::PowerLaw { c, h };
        f.validate()?;
        Ok(f)
    }

    pub fn tabulated(values: Vec<f64>, tail: TailRule) -> Result<Self> {
        let f = CovarianceFunction::Tabulated { values, tail };
        f.validate()?;
        Ok(f)
    }

    /// Checks parameter domains. Constructors call this; code that builds
    /// variants directly should too.
    pub fn validate(&self) -> Result<()> {
        match *self {
            CovarianceFunction::Exponential { c, theta } => {
                positive("c", c)?;
                positive("theta", theta)
            }
            CovarianceFunction::StretchedExponential { c, theta, alpha } => {
                positive("c", c)?;
                positive("theta", theta)?;
                open_unit("alpha", alpha)
            }
            CovarianceFunction::TwoExponential { c1, rho1, c2, rho2 } => {
                positive("c1", c1)?;
                positive("c2", c2)?;
                open_unit("rho1", rho1)?;
                open_unit("rho2", rho2)
            }
            CovarianceFunction::PowerLaw { c, h } => {
                positive("c", c)?;
                open_unit("H", h)
            }
            CovarianceFunction::Tabulated { ref values, tail } => {
                if values.is_empty() {
                    return Err(Error::InvalidParameter("empty covariance table".into()));
                }
                for (i, &v) in values.iter().enumerate() {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "table entry for lag {} must be finite and positive, got {v}",
                            i + 1
                        )));
                    }
                }
                if tail == TailRule::Geometric && values.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "geometric tail continuation needs at least two table entries".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn family(&self) -> FamilyTag {
        match self {
            CovarianceFunction::Exponential { .. } => FamilyTag::Exponential,
            CovarianceFunction::StretchedExponential { .. } => FamilyTag::StretchedExponential,
            CovarianceFunction::TwoExponential { .. } => FamilyTag::TwoExponential,
            CovarianceFunction::PowerLaw { .. } => FamilyTag::PowerLaw,
            CovarianceFunction::Tabulated { .. } => FamilyTag::Tabulated,
        }
    }

    /// `C(lag)`. Lag 0 is an error: the variance at lag 0 comes from the
    /// marginal, never from `C`.
    pub fn eval(&self, lag: u64) -> Result<f64> {
        if lag == 0 {
            return Err(Error::ZeroLag);
        }
        let x = lag as f64;
        let v = match *self {
            CovarianceFunction::Exponential { c, theta } => c * (-theta * x).exp(),
            CovarianceFunction::StretchedExponential { c, theta, alpha } => {
                c * (-theta * x.powf(alpha)).exp()
            }
            CovarianceFunction::TwoExponential { c1, rho1, c2, rho2 } => {
                c1 * rho1.powf(x) + c2 * rho2.powf(x)
            }
            CovarianceFunction::PowerLaw { c, h } => c * x.powf(2.0 * h - 2.0),
            CovarianceFunction::Tabulated { ref values, tail } => {
                let len = values.len();
                if (lag as usize) <= len {
                    values[lag as usize - 1]
                } else {
                    match tail {
                        TailRule::Reject => return Err(Error::OutsideTable { lag, len }),
                        TailRule::Geometric => {
                            let last = values[len - 1];
                            let ratio = last / values[len - 2];
                            last * ratio.powf((lag - len as u64) as f64)
                        }
                    }
                }
            }
        };
        Ok(v)
    }

    /// Values `C(1), ..., C(n)`.
    pub fn table(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n as u64).map(|k| self.eval(k)).collect()
    }

    /// Largest lag the function can be evaluated at, if bounded.
    pub fn max_lag(&self) -> Option<u64> {
        match self {
            CovarianceFunction::Tabulated {
                values,
                tail: TailRule::Reject,
            } => Some(values.len() as u64),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Clause {
    /// `C(x + 1) > C(x)` somewhere.
    NotDecreasing,
    /// `C(x + 1) / C(x)` drops somewhere.
    RatioNotNondecreasing,
    /// `C(1) >= p (1 - p)`.
    C1TooLarge,
    /// `C(2) <= (p^2 + C(1))^2 / p - p^2`.
    C2TooSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: Clause,
    pub witness_lag: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub pass: bool,
    pub violated_clauses: Vec<Violation>,
    pub horizon: u64,
}

impl ValidityReport {
    pub fn violation(&self, clause: Clause) -> Option<&Violation> {
        self.violated_clauses.iter().find(|v| v.clause == clause)
    }
}

impl std::fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pass {
            return write!(f, "pass (horizon {})", self.horizon);
        }
        write!(f, "fail (horizon {}):", self.horizon)?;
        for v in &self.violated_clauses {
            write!(
                f,
                " {:?} at lag {} (lhs {:.6e}, rhs {:.6e});",
                v.clause, v.witness_lag, v.lhs, v.rhs
            )?;
        }
        Ok(())
    }
}

/// Tests the sufficient conditions on lags `1..=horizon`:
///
/// * `C` non-increasing,
/// * `C(x + 1) / C(x)` non-decreasing in `x`,
/// * `C(1) < p (1 - p)`,
/// * `C(2) > (p^2 + C(1))^2 / p - p^2`.
///
/// The last two are strict and compared exactly. Only the first witness of
/// each violated clause is reported. A table with the rejecting tail rule is
/// checked up to its last entry and the report carries that horizon.
pub fn check_assumption(cov: &CovarianceFunction, p: f64, horizon: u64) -> Result<ValidityReport> {
    open_unit("p", p)?;
    if horizon < 3 {
        return Err(Error::InvalidParameter(format!(
            "validity horizon must be at least 3, got {horizon}"
        )));
    }
    let horizon = match cov.max_lag() {
        Some(m) if m < horizon => {
            if m < 3 {
                return Err(Error::InvalidParameter(format!(
                    "table has {m} entries, at least 3 are needed to check it"
                )));
            }
            m
        }
        _ => horizon,
    };
    let c = cov.table(horizon as usize)?;
    let mut violations = Vec::new();

    for x in 1..c.len() {
        if c[x] > c[x - 1] {
            violations.push(Violation {
                clause: Clause::NotDecreasing,
                witness_lag: x as u64,
                lhs: c[x],
                rhs: c[x - 1],
            });
            break;
        }
    }

    let mut prev_ratio: Option<f64> = None;
    for x in 1..c.len() {
        if c[x] < RATIO_FLOOR {
            break;
        }
        let ratio = c[x] / c[x - 1];
        if let Some(prev) = prev_ratio {
            if ratio < prev - RATIO_SLACK {
                violations.push(Violation {
                    clause: Clause::RatioNotNondecreasing,
                    witness_lag: x as u64,
                    lhs: ratio,
                    rhs: prev,
                });
                break;
            }
        }
        prev_ratio = Some(ratio);
    }

    let pq = p * (1.0 - p);
    if !(c[0] < pq) {
        violations.push(Violation {
            clause: Clause::C1TooLarge,
            witness_lag: 1,
            lhs: c[0],
            rhs: pq,
        });
    }
    let bound = (p * p + c[0]).powi(2) / p - p * p;
    if !(c[1] > bound) {
        violations.push(Violation {
            clause: Clause::C2TooSmall,
            witness_lag: 2,
            lhs: c[1],
            rhs: bound,
        });
    }

    Ok(ValidityReport {
        pass: violations.is_empty(),
        violated_clauses: violations,
        horizon,
    })
}

/// One end of an interval constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Limit {
    Value { value: f64, inclusive: bool },
    /// A bound that depends on other parameters of the family.
    Expression { expr: &'static str, inclusive: bool },
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionBound {
    pub quantity: &'static str,
    pub lower: Limit,
    pub upper: Limit,
}

/// Closed-form sufficient region of a parametric family at a fixed `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleRegion {
    pub family: FamilyTag,
    pub p: f64,
    pub bounds: Vec<RegionBound>,
    /// False when the stated region is not known to imply the conditions;
    /// membership is then confirmed with [`check_assumption`].
    pub sufficiency_verified: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionVerdict {
    pub inside: bool,
    pub sufficiency_verified: bool,
    /// Present when the region is unverified and the parameters are inside.
    pub confirmation: Option<ValidityReport>,
}

impl RegionVerdict {
    /// Inside the region and, where needed, confirmed by the checker.
    pub fn admitted(&self) -> bool {
        self.inside
            && (self.sufficiency_verified
                || self.confirmation.as_ref().is_some_and(|r| r.pass))
    }
}

/// Upper bound on `c` for the power-law family at `(p, H)`.
pub fn power_law_c_bound(p: f64, h: f64) -> f64 {
    let s = 2f64.powf(2.0 * h - 2.0);
    let disc = 4.0 * p - p * 2f64.powf(2.0 * h) + 2f64.powf(4.0 * h - 4.0);
    let second = 0.5 * p * (-2.0 * p + s + disc.max(0.0).sqrt());
    (p * (1.0 - p)).min(second)
}

fn open(value: f64) -> Limit {
    Limit::Value {
        value,
        inclusive: false,
    }
}

/// Sufficient parameter region for a parametric family.
pub fn admissible_region(family: FamilyTag, p: f64) -> Result<AdmissibleRegion> {
    open_unit("p", p)?;
    let pq = p * (1.0 - p);
    let (bounds, verified) = match family {
        FamilyTag::Exponential => (
            vec![
                RegionBound {
                    quantity: "theta",
                    lower: open(0.0),
                    upper: Limit::Unbounded,
                },
                RegionBound {
                    quantity: "c",
                    lower: open(0.0),
                    upper: open(pq),
                },
            ],
            false,
        ),
        FamilyTag::StretchedExponential => (
            vec![
                RegionBound {
                    quantity: "c*exp(theta)",
                    lower: open(pq / 2.0),
                    upper: open(pq),
                },
                RegionBound {
                    quantity: "alpha",
                    lower: Limit::Expression {
                        expr: "log2(p(1-p) / (c*exp(-theta)))",
                        inclusive: false,
                    },
                    upper: open(1.0),
                },
            ],
            true,
        ),
        FamilyTag::TwoExponential => (
            vec![
                RegionBound {
                    quantity: "rho1, rho2",
                    lower: open(0.0),
                    upper: open(1.0),
                },
                RegionBound {
                    quantity: "c1*rho1 + c2*rho2",
                    lower: open(0.0),
                    upper: open(p.powf(1.5) - p * p),
                },
            ],
            true,
        ),
        FamilyTag::PowerLaw => (
            vec![
                RegionBound {
                    quantity: "H",
                    lower: open(0.0),
                    upper: open(1.0),
                },
                RegionBound {
                    quantity: "c",
                    lower: Limit::Value {
                        value: 0.0,
                        inclusive: true,
                    },
                    upper: Limit::Expression {
                        expr: "min{p(1-p), p/2 (-2p + 2^(2H-2) + sqrt(4p - p 2^(2H) + 2^(4H-4)))}",
                        inclusive: false,
                    },
                },
            ],
            true,
        ),
        FamilyTag::Tabulated => {
            return Err(Error::Unsupported(
                "tabulated covariances have no closed region; use check_assumption".into(),
            ))
        }
    };
    Ok(AdmissibleRegion {
        family,
        p,
        bounds,
        sufficiency_verified: verified,
    })
}

impl AdmissibleRegion {
    /// Membership test for concrete parameters of the same family.
    pub fn contains(&self, cov: &CovarianceFunction) -> Result<RegionVerdict> {
        if cov.family() != self.family {
            return Err(Error::InvalidParameter(format!(
                "region is for {:?}, covariance is {:?}",
                self.family,
                cov.family()
            )));
        }
        let p = self.p;
        let pq = p * (1.0 - p);
        let inside = match *cov {
            CovarianceFunction::Exponential { c, theta } => theta > 0.0 && c > 0.0 && c < pq,
            CovarianceFunction::StretchedExponential { c, theta, alpha } => {
                let ce = c * theta.exp();
                let alpha_lo = (pq / (c * (-theta).exp())).log2();
                ce > pq / 2.0 && ce < pq && alpha > alpha_lo && alpha < 1.0
            }
            CovarianceFunction::TwoExponential { c1, rho1, c2, rho2 } => {
                let s = c1 * rho1 + c2 * rho2;
                rho1 > 0.0 && rho1 < 1.0 && rho2 > 0.0 && rho2 < 1.0 && s > 0.0
                    && s < p.powf(1.5) - p * p
            }
            CovarianceFunction::PowerLaw { c, h } => {
                h > 0.0 && h < 1.0 && c >= 0.0 && c < power_law_c_bound(p, h)
            }
            CovarianceFunction::Tabulated { .. } => unreachable!("rejected at construction"),
        };
        let confirmation = if inside && !self.sufficiency_verified {
            Some(check_assumption(cov, p, DEFAULT_HORIZON)?)
        } else {
            None
        };
        Ok(RegionVerdict {
            inside,
            sufficiency_verified: self.sufficiency_verified,
            confirmation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dyadic() -> CovarianceFunction {
        CovarianceFunction::tabulated(vec![0.05, 0.025], TailRule::Geometric).unwrap()
    }

    #[test]
    fn eval_examples() {
        let e = CovarianceFunction::exponential(0.12, 0.1).unwrap();
        assert_abs_diff_eq!(e.eval(1).unwrap(), 0.12 * (-0.1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(e.eval(1).unwrap(), 0.108580, epsilon = 1e-6);

        let pl = CovarianceFunction::power_law(0.12, 0.7).unwrap();
        assert_eq!(pl.eval(1).unwrap(), 0.12);

        let t = CovarianceFunction::tabulated(vec![0.1, 0.05], TailRule::Geometric).unwrap();
        assert_abs_diff_eq!(t.eval(3).unwrap(), 0.025, epsilon = 1e-16);
    }

    #[test]
    fn lag_zero_and_table_end_are_errors() {
        let t = CovarianceFunction::tabulated(vec![0.1, 0.05], TailRule::Reject).unwrap();
        assert!(matches!(t.eval(0), Err(Error::ZeroLag)));
        assert!(matches!(t.eval(3), Err(Error::OutsideTable { lag: 3, len: 2 })));
        assert!(t.eval(2).is_ok());
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(CovarianceFunction::exponential(-0.1, 1.0).is_err());
        assert!(CovarianceFunction::power_law(0.1, 1.0).is_err());
        assert!(CovarianceFunction::tabulated(vec![0.1, f64::NAN], TailRule::Reject).is_err());
        assert!(CovarianceFunction::tabulated(vec![0.1], TailRule::Geometric).is_err());
        assert!(CovarianceFunction::two_exponential(0.1, 1.2, 0.1, 0.5).is_err());
    }

    #[test]
    fn dyadic_passes() {
        let r = check_assumption(&dyadic(), 0.5, 10).unwrap();
        assert!(r.pass, "{r}");
        assert_eq!(r.horizon, 10);
    }

    #[test]
    fn c1_too_large() {
        let t = CovarianceFunction::tabulated(vec![0.3, 0.2, 0.15, 0.12], TailRule::Geometric)
            .unwrap();
        let r = check_assumption(&t, 0.5, 10).unwrap();
        assert!(!r.pass);
        let v = r.violation(Clause::C1TooLarge).unwrap();
        assert_eq!(v.lhs, 0.3);
        assert_eq!(v.rhs, 0.25);
    }

    #[test]
    fn ratio_drop_witness() {
        let t = CovarianceFunction::tabulated(vec![0.05, 0.045, 0.02, 0.01], TailRule::Geometric)
            .unwrap();
        let r = check_assumption(&t, 0.5, 10).unwrap();
        let v = r.violation(Clause::RatioNotNondecreasing).unwrap();
        assert_eq!(v.witness_lag, 2);
        assert_abs_diff_eq!(v.lhs, 0.045f64.recip() * 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(v.rhs, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn boundary_is_strict() {
        // C(1) exactly p(1-p) fails
        let t = CovarianceFunction::tabulated(vec![0.25, 0.2, 0.16], TailRule::Geometric).unwrap();
        let r = check_assumption(&t, 0.5, 5).unwrap();
        assert!(r.violation(Clause::C1TooLarge).is_some());
    }

    #[test]
    fn not_decreasing() {
        let t = CovarianceFunction::tabulated(vec![0.05, 0.06, 0.07], TailRule::Reject).unwrap();
        let r = check_assumption(&t, 0.5, 100).unwrap();
        assert_eq!(r.horizon, 3);
        assert_eq!(r.violation(Clause::NotDecreasing).unwrap().witness_lag, 1);
    }

    #[test]
    fn low_p_exponential_fails_second_clause() {
        // p = .258, C(x) = .2 exp(-.1 x)
        let e = CovarianceFunction::exponential(0.2, 0.1).unwrap();
        let r = check_assumption(&e, 0.258, DEFAULT_HORIZON).unwrap();
        assert!(!r.pass);
        assert_eq!(r.violated_clauses.len(), 1);
        let v = r.violation(Clause::C2TooSmall).unwrap();
        assert_abs_diff_eq!(v.lhs, 0.2 * (-0.2f64).exp(), epsilon = 1e-15);
        assert!(v.rhs > v.lhs);
    }

    #[test]
    fn region_power_law() {
        let region = admissible_region(FamilyTag::PowerLaw, 0.3).unwrap();
        assert_abs_diff_eq!(power_law_c_bound(0.3, 0.7), 0.146732, epsilon = 1e-6);
        let v = region
            .contains(&CovarianceFunction::power_law(0.12, 0.7).unwrap())
            .unwrap();
        assert!(v.inside && v.admitted());
        let v = region
            .contains(&CovarianceFunction::power_law(0.15, 0.7).unwrap())
            .unwrap();
        assert!(!v.inside);
    }

    #[test]
    fn region_exponential_defers_to_checker() {
        let region = admissible_region(FamilyTag::Exponential, 0.5).unwrap();
        assert!(!region.sufficiency_verified);
        let v = region
            .contains(&CovarianceFunction::exponential(0.1, std::f64::consts::LN_2).unwrap())
            .unwrap();
        assert!(v.inside);
        assert!(v.confirmation.as_ref().unwrap().pass);
        assert!(v.admitted());

        // p = .3, c = .2, theta = .1: inside the stated region and the
        // checker confirms it (C(2) = .16375 > .15474).
        let region = admissible_region(FamilyTag::Exponential, 0.3).unwrap();
        let v = region
            .contains(&CovarianceFunction::exponential(0.2, 0.1).unwrap())
            .unwrap();
        assert!(v.inside);
        assert!(v.admitted());
    }

    #[test]
    fn region_tabulated_is_unsupported() {
        assert!(matches!(
            admissible_region(FamilyTag::Tabulated, 0.5),
            Err(Error::Unsupported(_))
        ));
    }
}
