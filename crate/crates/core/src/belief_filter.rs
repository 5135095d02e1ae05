//! Posterior over the human's type.
//!
//! Beliefs carry the prior's unnormalized weights on a support set. Under
//! deterministic human strategies a Bayes update only restricts the support,
//! so every reachable posterior is the prior restricted to a subset.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::game_model::{GameSpec, HumanAction, TypeIndex};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("observed {observed} has zero probability under the current belief")]
    ZeroProbability { observed: HumanAction },
    #[error("strategy slice has no action for supported type {0}")]
    MissingType(TypeIndex),
    #[error("belief support is empty")]
    EmptySupport,
}

/// Set of type indices, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TypeSet(u32);

impl TypeSet {
    pub const EMPTY: TypeSet = TypeSet(0);

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub fn singleton(t: TypeIndex) -> Self {
        Self(1 << t)
    }

    /// `{0, .., k-1}`.
    pub fn full(k: usize) -> Self {
        Self(((1u64 << k) - 1) as u32)
    }

    pub fn contains(self, t: TypeIndex) -> bool {
        self.0 & (1 << t) != 0
    }

    pub fn insert(&mut self, t: TypeIndex) {
        self.0 |= 1 << t;
    }

    pub fn with(mut self, t: TypeIndex) -> Self {
        self.insert(t);
        self
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: TypeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending type indices.
    pub fn iter(self) -> impl Iterator<Item = TypeIndex> {
        (0..32).filter(move |&t| self.contains(t))
    }

    /// Every non-empty subset of `self`, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = TypeSet> {
        (1..=self.0).filter(move |b| b & !self.0 == 0).map(TypeSet)
    }
}

impl fmt::Debug for TypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for TypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|t| format!("θ{}", t + 1)).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl FromIterator<TypeIndex> for TypeSet {
    fn from_iter<I: IntoIterator<Item = TypeIndex>>(iter: I) -> Self {
        iter.into_iter().fold(TypeSet::EMPTY, TypeSet::with)
    }
}

/// Machine's belief: supported types with their carried prior weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief<S> {
    weights: BTreeMap<TypeIndex, S>,
}

impl<S: Scalar> Belief<S> {
    /// Types with zero prior weight are left out of the support.
    pub fn from_prior(prior: &[S]) -> Result<Self, FilterError> {
        let weights: BTreeMap<_, _> = prior
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > S::zero())
            .map(|(i, w)| (i, w.clone()))
            .collect();
        if weights.is_empty() {
            return Err(FilterError::EmptySupport);
        }
        Ok(Self { weights })
    }

    /// Prior restricted to `support`.
    pub fn restricted(prior: &[S], support: TypeSet) -> Result<Self, FilterError> {
        let weights: BTreeMap<_, _> = support
            .iter()
            .filter(|&t| t < prior.len() && prior[t] > S::zero())
            .map(|t| (t, prior[t].clone()))
            .collect();
        if weights.is_empty() {
            return Err(FilterError::EmptySupport);
        }
        Ok(Self { weights })
    }

    pub fn support(&self) -> TypeSet {
        self.weights.keys().copied().collect()
    }

    pub fn weight(&self, t: TypeIndex) -> Option<&S> {
        self.weights.get(&t)
    }

    pub fn weights(&self) -> &BTreeMap<TypeIndex, S> {
        &self.weights
    }

    /// Posterior probabilities.
    pub fn normalized(&self) -> BTreeMap<TypeIndex, S> {
        let total: S = self.weights.values().cloned().sum();
        self.weights.iter().map(|(t, w)| (*t, w.clone() / total.clone())).collect()
    }

    pub fn is_point_mass(&self) -> bool {
        self.weights.len() == 1
    }
}

/// Bayes update for a deterministic strategy slice: keeps the supported
/// types whose prescribed action equals the observation.
pub fn bayes_update<S: Scalar>(
    belief: &Belief<S>,
    observed: HumanAction,
    strategy_slice: &BTreeMap<TypeIndex, HumanAction>,
) -> Result<Belief<S>, FilterError> {
    let mut weights = BTreeMap::new();
    for (t, w) in &belief.weights {
        let prescribed = strategy_slice.get(t).ok_or(FilterError::MissingType(*t))?;
        if *prescribed == observed {
            weights.insert(*t, w.clone());
        }
    }
    if weights.is_empty() {
        return Err(FilterError::ZeroProbability { observed });
    }
    Ok(Belief { weights })
}

/// General form: weights multiplied by the likelihood of the observation
/// under each type's (possibly randomized) strategy. Zero posteriors drop
/// out of the support.
pub fn bayes_update_likelihood<S: Scalar>(
    belief: &Belief<S>,
    observed: HumanAction,
    likelihood: &BTreeMap<TypeIndex, S>,
) -> Result<Belief<S>, FilterError> {
    let mut weights = BTreeMap::new();
    for (t, w) in &belief.weights {
        let l = likelihood.get(t).ok_or(FilterError::MissingType(*t))?;
        let post = w.clone() * l.clone();
        if post > S::zero() {
            weights.insert(*t, post);
        }
    }
    if weights.is_empty() {
        return Err(FilterError::ZeroProbability { observed });
    }
    Ok(Belief { weights })
}

/// 0/1 likelihoods of a deterministic slice.
pub fn slice_likelihood<S: Scalar>(
    observed: HumanAction,
    strategy_slice: &BTreeMap<TypeIndex, HumanAction>,
) -> BTreeMap<TypeIndex, S> {
    strategy_slice
        .iter()
        .map(|(t, a)| (*t, if *a == observed { S::one() } else { S::zero() }))
        .collect()
}

/// All supports reachable by restriction: every non-empty subset of the types.
pub fn reachable_supports<S: Scalar>(spec: &GameSpec<S>) -> Vec<TypeSet> {
    TypeSet::full(spec.type_count()).subsets().collect()
}
