//! Scalar risk functionals over cost distributions.
//!
//! Every criterion here is a loss to be minimized. Finite-support inputs are
//! evaluated exactly, never by sampling.

use std::ops::Add;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("cvar level must lie in [0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("outcome set has no positive weight")]
    NoMass,
    #[error("negative weight {0} in outcome set")]
    NegativeWeight(f64),
    #[error("trial {index}: {reason}")]
    MismatchedTrial { index: usize, reason: String },
}

/// A scalar random cost summarized by its first two moments.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDistribution<S> {
    pub mean: S,
    pub variance: S,
}

impl<S: Scalar> CostDistribution<S> {
    pub fn new(mean: S, variance: S) -> Self {
        Self { mean, variance }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero())
    }

    /// A deterministic cost.
    pub fn point(mean: S) -> Self {
        Self::new(mean, S::zero())
    }

    pub fn is_valid(&self) -> bool {
        self.variance >= S::zero() && self.mean.is_finite_value() && self.variance.is_finite_value()
    }

    /// Same distribution shifted by a sure amount.
    pub fn shifted(&self, amount: S) -> Self {
        Self::new(self.mean.clone() + amount, self.variance.clone())
    }
}

/// Sum of independent costs.
impl<S: Scalar> Add for CostDistribution<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.mean + rhs.mean, self.variance + rhs.variance)
    }
}

impl<S: Scalar> std::iter::Sum for CostDistribution<S> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |acc, d| acc + d)
    }
}

/// Risk-aversion coefficient; the human's type in the numerical study.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct RiskParameter<S>(pub S);

impl<S: Scalar> RiskParameter<S> {
    pub fn new(theta: S) -> Self {
        Self(theta)
    }

    pub fn value(&self) -> &S {
        &self.0
    }

    pub fn is_valid(&self) -> bool {
        self.0 >= S::zero() && self.0.is_finite_value()
    }
}

/// Finite-support random cost. Weights need not be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalOutcome<S> {
    values: Vec<(S, S)>,
}

impl<S: Scalar> EmpiricalOutcome<S> {
    pub fn new(values: Vec<(S, S)>) -> Result<Self, RiskError> {
        if let Some((_, w)) = values.iter().find(|(_, w)| *w < S::zero()) {
            return Err(RiskError::NegativeWeight(w.to_f64()));
        }
        if !values.iter().any(|(_, w)| *w > S::zero()) {
            return Err(RiskError::NoMass);
        }
        Ok(Self { values })
    }

    /// Equally weighted outcomes.
    pub fn uniform(outcomes: Vec<S>) -> Result<Self, RiskError> {
        Self::new(outcomes.into_iter().map(|x| (x, S::one())).collect())
    }

    pub fn values(&self) -> &[(S, S)] {
        &self.values
    }

    pub fn total_weight(&self) -> S {
        self.values.iter().map(|(_, w)| w.clone()).sum()
    }

    pub fn mean(&self) -> S {
        let total = self.total_weight();
        self.values
            .iter()
            .map(|(x, w)| x.clone() * w.clone())
            .sum::<S>()
            / total
    }

    pub fn variance(&self) -> S {
        let mean = self.mean();
        let total = self.total_weight();
        self.values
            .iter()
            .map(|(x, w)| {
                let d = x.clone() - mean.clone();
                d.clone() * d * w.clone()
            })
            .sum::<S>()
            / total
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Self { values: self.values.iter().map(|(x, w)| (f(x), w.clone())).collect() }
    }
}

/// `mean + theta * variance`.
pub fn mean_variance_criterion<S: Scalar>(dist: &CostDistribution<S>, theta: &RiskParameter<S>) -> S {
    dist.mean.clone() + theta.0.clone() * dist.variance.clone()
}

/// Conditional value at risk of a cost: the mean of the worst `1 - alpha`
/// probability mass, taking a fractional share of the boundary atom.
pub fn cvar_aggregate<S: Scalar>(outcomes: &EmpiricalOutcome<S>, alpha: &S) -> Result<S, RiskError> {
    if *alpha < S::zero() || *alpha >= S::one() {
        return Err(RiskError::InvalidAlpha(alpha.to_f64()));
    }
    let total = outcomes.total_weight();
    let tail = S::one() - alpha.clone();
    let mut sorted: Vec<&(S, S)> = outcomes.values.iter().collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut remaining = tail.clone();
    let mut acc = S::zero();
    for (x, w) in sorted {
        if remaining <= S::zero() {
            break;
        }
        let p = w.clone() / total.clone();
        let take = if p < remaining { p } else { remaining.clone() };
        acc = acc + x.clone() * take.clone();
        remaining = remaining - take;
    }
    Ok(acc / tail)
}

/// `E[U(Z)] - theta * E[D(E[Z] - Z)]`, evaluated on the finite support.
///
/// With `U = identity` and `D(x) = x^2` this is `mean - theta * variance`;
/// the mean-variance loss corresponds to a negative `theta` in this form.
pub fn disutility_criterion<S: Scalar>(
    outcomes: &EmpiricalOutcome<S>,
    utility: impl Fn(&S) -> S,
    deviation: impl Fn(&S) -> S,
    theta: &RiskParameter<S>,
) -> S {
    let total = outcomes.total_weight();
    let mean = outcomes.mean();
    let (eu, ed) = outcomes.values.iter().fold((S::zero(), S::zero()), |(eu, ed), (x, w)| {
        (
            eu + utility(x) * w.clone(),
            ed + deviation(&(mean.clone() - x.clone())) * w.clone(),
        )
    });
    eu / total.clone() - theta.0.clone() * (ed / total)
}

/// A risk functional with its parameters fixed, as named in scenario files.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedCriterion<S> {
    Expectation,
    MeanVariance(RiskParameter<S>),
    Cvar(S),
}

impl<S: Scalar> NamedCriterion<S> {
    pub fn evaluate(&self, outcomes: &EmpiricalOutcome<S>) -> Result<S, RiskError> {
        match self {
            Self::Expectation => Ok(outcomes.mean()),
            Self::MeanVariance(theta) => Ok(mean_variance_criterion(
                &CostDistribution::new(outcomes.mean(), outcomes.variance()),
                theta,
            )),
            Self::Cvar(alpha) => cvar_aggregate(outcomes, alpha),
        }
    }
}

/// Two random costs on one finite sample space: `left[i]` and `right[i]`
/// are realized on the same atom `i` with the same weight.
#[derive(Debug, Clone)]
pub struct TrialPair<S> {
    pub left: EmpiricalOutcome<S>,
    pub right: EmpiricalOutcome<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Monotonicity,
    TranslationInvariance,
    Convexity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomOutcome {
    pub axiom: Axiom,
    pub passed: bool,
    pub checks: usize,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn get(&self, axiom: Axiom) -> &AxiomOutcome {
        self.outcomes.iter().find(|o| o.axiom == axiom).expect("all axioms are probed")
    }

    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// Shifts used by the translation-invariance probe.
pub fn default_shifts<S: Scalar>() -> Vec<S> {
    [-3.0, -0.5, 0.0, 1.0, 5.0].iter().map(|&a| S::from_f64(a)).collect()
}

/// Probes monotonicity, translation invariance and convexity of `rho` on the
/// supplied trials. Comparisons allow `tolerance` of absolute slack.
pub fn axiom_probe<S: Scalar>(
    rho: &NamedCriterion<S>,
    trials: &[TrialPair<S>],
    ts: &[S],
    shifts: &[S],
    tolerance: &S,
) -> Result<AxiomReport, RiskError> {
    for (index, pair) in trials.iter().enumerate() {
        let (l, r) = (pair.left.values(), pair.right.values());
        if l.len() != r.len() {
            return Err(RiskError::MismatchedTrial {
                index,
                reason: format!("{} atoms vs {} atoms", l.len(), r.len()),
            });
        }
        if l.iter().zip(r).any(|((_, wl), (_, wr))| wl != wr) {
            return Err(RiskError::MismatchedTrial { index, reason: "atom weights differ".into() });
        }
    }

    let mut mono = AxiomOutcome { axiom: Axiom::Monotonicity, passed: true, checks: 0, counterexample: None };
    let mut trans =
        AxiomOutcome { axiom: Axiom::TranslationInvariance, passed: true, checks: 0, counterexample: None };
    let mut conv = AxiomOutcome { axiom: Axiom::Convexity, passed: true, checks: 0, counterexample: None };

    let fail = |outcome: &mut AxiomOutcome, msg: String| {
        if outcome.passed {
            outcome.passed = false;
            outcome.counterexample = Some(msg);
        }
    };

    for (index, pair) in trials.iter().enumerate() {
        let rho_l = rho.evaluate(&pair.left)?;
        let rho_r = rho.evaluate(&pair.right)?;

        // Monotonicity, in both orientations.
        for (z, zp, rz, rzp, label) in [
            (&pair.left, &pair.right, &rho_l, &rho_r, "left >= right"),
            (&pair.right, &pair.left, &rho_r, &rho_l, "right >= left"),
        ] {
            let dominates = z.values().iter().zip(zp.values()).all(|((a, _), (b, _))| a >= b);
            if dominates {
                mono.checks += 1;
                if rz.clone() + tolerance.clone() < *rzp {
                    fail(&mut mono, format!("trial {index} ({label}): rho(Z)={rz} < rho(Z')={rzp}"));
                }
            }
        }

        for z in [&pair.left, &pair.right] {
            let rz = rho.evaluate(z)?;
            for a in shifts {
                trans.checks += 1;
                let shifted = rho.evaluate(&z.map(|x| x.clone() + a.clone()))?;
                let expected = rz.clone() + a.clone();
                if (shifted.clone() - expected.clone()).abs() > *tolerance {
                    fail(&mut trans, format!("trial {index}, shift {a}: rho(Z+a)={shifted}, rho(Z)+a={expected}"));
                }
            }
        }

        for t in ts {
            conv.checks += 1;
            let one_minus = S::one() - t.clone();
            let mixed = EmpiricalOutcome {
                values: pair
                    .left
                    .values()
                    .iter()
                    .zip(pair.right.values())
                    .map(|((a, w), (b, _))| (t.clone() * a.clone() + one_minus.clone() * b.clone(), w.clone()))
                    .collect(),
            };
            let lhs = rho.evaluate(&mixed)?;
            let rhs = t.clone() * rho_l.clone() + one_minus * rho_r.clone();
            if lhs > rhs.clone() + tolerance.clone() {
                fail(&mut conv, format!("trial {index}, t={t}: rho(mix)={lhs} > {rhs}"));
            }
        }
    }

    Ok(AxiomReport { outcomes: vec![mono, trans, conv] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    fn r(x: f64) -> Rational {
        Rational::from_f64(x)
    }

    #[test]
    fn mean_variance_matches_worked_values() {
        let d = CostDistribution::new(30.0, 400.0);
        assert_eq!(mean_variance_criterion(&d, &RiskParameter(0.01)), 34.0);
        let d = CostDistribution::new(35.0, 100.0);
        assert_eq!(mean_variance_criterion(&d, &RiskParameter(0.05)), 40.0);
        let d = CostDistribution::new(r(35.0), r(100.0));
        assert_eq!(mean_variance_criterion(&d, &RiskParameter(r(0.05))), ratio(40, 1));
    }

    #[test]
    fn risk_neutral_is_the_mean() {
        let d = CostDistribution::new(12.25, 9.0);
        assert_eq!(mean_variance_criterion(&d, &RiskParameter(0.0)), 12.25);
    }

    #[test]
    fn independent_sums_add_moments() {
        let total: CostDistribution<f64> =
            vec![CostDistribution::new(1.0, 2.0), CostDistribution::new(3.0, 4.0)].into_iter().sum();
        assert_eq!(total, CostDistribution::new(4.0, 6.0));
    }

    /// Oracle: expand every atom into equal-mass units, keep the heaviest
    /// `tail` units, average them.
    fn cvar_by_units(atoms: &[(i64, i64)], units_total: i64, tail_units: i64) -> Rational {
        let mut units: Vec<i64> = atoms.iter().flat_map(|&(x, n)| std::iter::repeat(x).take(n as usize)).collect();
        assert_eq!(units.len() as i64, units_total);
        units.sort_unstable_by(|a, b| b.cmp(a));
        let s: i64 = units.iter().take(tail_units as usize).sum();
        ratio(s, tail_units)
    }

    #[test]
    fn cvar_two_point_upper_quarter() {
        let z = EmpiricalOutcome::new(vec![(r(1.0), r(0.5)), (r(3.0), r(0.5))]).unwrap();
        let v = cvar_aggregate(&z, &r(0.75)).unwrap();
        assert_eq!(v, cvar_by_units(&[(1, 2), (3, 2)], 4, 1));
        assert_eq!(v, ratio(3, 1));
    }

    #[test]
    fn cvar_fractional_boundary_atom() {
        // atoms 0,4,8 each mass 1/3; alpha = 1/2 keeps all of 8 and 1/6 of 4
        let z = EmpiricalOutcome::uniform(vec![r(0.0), r(4.0), r(8.0)]).unwrap();
        let v = cvar_aggregate(&z, &ratio(1, 2)).unwrap();
        assert_eq!(v, cvar_by_units(&[(0, 2), (4, 2), (8, 2)], 6, 3));
    }

    #[test]
    fn cvar_at_zero_is_mean_and_point_mass_is_fixed() {
        let z = EmpiricalOutcome::new(vec![(r(2.0), r(1.0)), (r(7.0), r(3.0))]).unwrap();
        assert_eq!(cvar_aggregate(&z, &r(0.0)).unwrap(), z.mean());
        let p = EmpiricalOutcome::new(vec![(10.0, 1.0)]).unwrap();
        for alpha in [0.0, 0.3, 0.99] {
            assert_eq!(cvar_aggregate(&p, &alpha).unwrap(), 10.0);
        }
    }

    #[test]
    fn cvar_rejects_bad_levels() {
        let z = EmpiricalOutcome::uniform(vec![1.0, 2.0]).unwrap();
        assert_eq!(cvar_aggregate(&z, &1.0), Err(RiskError::InvalidAlpha(1.0)));
        assert_eq!(cvar_aggregate(&z, &-0.1), Err(RiskError::InvalidAlpha(-0.1)));
    }

    #[test]
    fn outcome_sets_need_mass() {
        assert_eq!(EmpiricalOutcome::<f64>::new(vec![(1.0, 0.0)]), Err(RiskError::NoMass));
        assert_eq!(EmpiricalOutcome::<f64>::new(vec![(1.0, -1.0), (2.0, 2.0)]), Err(RiskError::NegativeWeight(-1.0)));
    }

    #[test]
    fn disutility_with_square_deviation_is_mean_minus_variance() {
        let z = EmpiricalOutcome::new(vec![(r(1.0), r(1.0)), (r(4.0), r(2.0)), (r(-2.0), r(1.0))]).unwrap();
        // direct finite-support moments: mean = (1 + 8 - 2)/4 = 7/4
        let mean = ratio(7, 4);
        let var = ((r(1.0) - mean.clone()).pow(2) + (r(4.0) - mean.clone()).pow(2) * r(2.0)
            + (r(-2.0) - mean.clone()).pow(2))
            / r(4.0);
        let theta = RiskParameter(r(0.3));
        let j = disutility_criterion(&z, |x| x.clone(), |d| d.clone() * d.clone(), &theta);
        assert_eq!(j, mean - r(0.3) * var);
    }

    #[test]
    fn disutility_without_deviation_is_mean_and_shifts_exactly() {
        let z = EmpiricalOutcome::uniform(vec![r(3.0), r(5.0), r(10.0)]).unwrap();
        let theta = RiskParameter(r(0.7));
        assert_eq!(disutility_criterion(&z, |x| x.clone(), |_| r(0.0), &theta), z.mean());
        let base = disutility_criterion(&z, |x| x.clone(), |d| d.clone() * d.clone(), &theta);
        let shifted = disutility_criterion(&z.map(|x| x.clone() + r(2.5)), |x| x.clone(), |d| d.clone() * d.clone(), &theta);
        assert_eq!(shifted, base + r(2.5));
    }

    fn two_point_grid() -> Vec<TrialPair<Rational>> {
        let vals = [0.0, 1.0, 3.0, 10.0];
        let mut out = Vec::new();
        for &a in &vals {
            for &b in &vals {
                for &c in &vals {
                    for &d in &vals {
                        out.push(TrialPair {
                            left: EmpiricalOutcome::new(vec![(r(a), r(0.5)), (r(b), r(0.5))]).unwrap(),
                            right: EmpiricalOutcome::new(vec![(r(c), r(0.5)), (r(d), r(0.5))]).unwrap(),
                        });
                    }
                }
            }
        }
        out
    }

    fn ts() -> Vec<Rational> {
        [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&t| r(t)).collect()
    }

    #[test]
    fn cvar_is_a_convex_risk_measure_on_grid() {
        let report = axiom_probe(&NamedCriterion::Cvar(r(0.9)), &two_point_grid(), &ts(), &default_shifts(), &r(0.0)).unwrap();
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn mean_variance_fails_monotonicity_only() {
        let report = axiom_probe(
            &NamedCriterion::MeanVariance(RiskParameter(r(1.0))),
            &two_point_grid(),
            &ts(),
            &[r(5.0)],
            &r(0.0),
        )
        .unwrap();
        assert!(report.get(Axiom::TranslationInvariance).passed);
        assert!(report.get(Axiom::Convexity).passed);
        let mono = report.get(Axiom::Monotonicity);
        assert!(!mono.passed);
        assert!(mono.counterexample.is_some());
    }

    #[test]
    fn mismatched_sample_spaces_are_rejected() {
        let bad = TrialPair {
            left: EmpiricalOutcome::uniform(vec![1.0, 2.0]).unwrap(),
            right: EmpiricalOutcome::uniform(vec![1.0]).unwrap(),
        };
        let err = axiom_probe(&NamedCriterion::Expectation, &[bad], &[0.5], &[1.0], &0.0).unwrap_err();
        assert!(matches!(err, RiskError::MismatchedTrial { index: 0, .. }));
    }
}
