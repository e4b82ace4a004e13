//! Hand-crafted causal mechanisms: treatment effects with subtype
//! heterogeneity and the behavior policies that assign actions.
//!
//! Effects are additive on the outcome scale and depend on the action and the
//! latent subtype only. For action `a` with average effect `τ(a)` and a
//! subtype `z` with prior mass `p = p(Z = z)`, `q = 1 - p`:
//!
//! ```text
//! LOW:  Δ(a, z) = τ(a) / (p + q·γ)
//! HIGH: Δ(a, z) = γ·τ(a) / (p·γ + q)
//! ```
//!
//! Every action has one HIGH and one LOW subtype, so `E_z[Δ(a, Z)] = τ(a)` for
//! any `γ` and the HIGH/LOW ratio is exactly `γ`. The arithmetic is generic so
//! the identities can be checked in exact rational arithmetic.

use std::collections::BTreeMap;

use num_traits::Num;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("action set needs at least 2 actions, got {0}")]
    TooFewActions(usize),
    #[error("action names must be unique (`{0}` repeats)")]
    DuplicateAction(String),
    #[error("ATE table has {got} entries, expected {expected}")]
    AteLength { got: usize, expected: usize },
    #[error("τ(0) must be 0")]
    NonZeroBaseline,
    #[error("HIGH/LOW table has {got} rows, expected {expected}")]
    HiloLength { got: usize, expected: usize },
    #[error("action {0}: both subtypes have the same HIGH/LOW level")]
    HiloNotOpposite(usize),
    #[error("γ must be ≥ 1")]
    GammaBelowOne,
    #[error("subtype prior must lie strictly inside (0, 1)")]
    PriorOutOfRange,
    #[error("ε must lie in [0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("action classes must partition actions 1..{0}")]
    NotAPartition(usize),
    #[error("diagnosis level `{0}` has no action class")]
    UnmappedDiagnosis(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub names: Vec<String>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.names.len() < 2 {
            return Err(SpecError::TooFewActions(self.names.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &self.names {
            if !seen.insert(n) {
                return Err(SpecError::DuplicateAction(n.clone()));
            }
        }
        Ok(())
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self {
            names: [
                "No treatment",
                "Donepezil 5 mg",
                "Donepezil 10 mg",
                "Galantamine 24 mg",
                "Galantamine 32 mg",
                "Rivastigmine 12 mg",
                "Memantine 20 mg",
                "Memantine + ChEI",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

/// Average treatment effects in ADAS-Cog change units, actions 0..=7.
pub const DEFAULT_ATE: [f64; 8] = [0.0, -1.95, -2.48, -3.03, -3.20, -2.01, -1.29, -2.64];

pub const DEFAULT_Z_PRIOR: f64 = 0.418;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectLevel {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec<T> {
    pub actions: ActionSet,
    /// `τ(a)` for every action; `τ(0) = 0`.
    pub ate: Vec<T>,
    /// Row `a - 1` gives the level for subtypes `[0, 1]` of action `a`.
    pub hilo: Vec<[EffectLevel; 2]>,
    pub gamma: T,
    /// `p(Z = 1)`.
    pub z_prior: T,
}

/// Alternating table: subtype `z` gets HIGH for action `a` iff `a + z` is even.
pub fn alternating_hilo(k: usize) -> Vec<[EffectLevel; 2]> {
    (1..k)
        .map(|a| {
            if a % 2 == 0 {
                [EffectLevel::High, EffectLevel::Low]
            } else {
                [EffectLevel::Low, EffectLevel::High]
            }
        })
        .collect()
}

impl Default for EffectSpec<f64> {
    fn default() -> Self {
        Self {
            actions: ActionSet::default(),
            ate: DEFAULT_ATE.to_vec(),
            hilo: alternating_hilo(DEFAULT_ATE.len()),
            gamma: 2.0,
            z_prior: DEFAULT_Z_PRIOR,
        }
    }
}

impl<T> EffectSpec<T> {
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn level(&self, a: usize, z: u8) -> EffectLevel {
        self.hilo[a - 1][usize::from(z)]
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> EffectSpec<U> {
        EffectSpec {
            actions: self.actions.clone(),
            ate: self.ate.iter().map(&f).collect(),
            hilo: self.hilo.clone(),
            gamma: f(&self.gamma),
            z_prior: f(&self.z_prior),
        }
    }
}

impl<T: Clone + Num + PartialOrd> EffectSpec<T> {
    pub fn validate(&self) -> Result<(), SpecError> {
        self.actions.validate()?;
        let k = self.actions.len();
        if self.ate.len() != k {
            return Err(SpecError::AteLength { got: self.ate.len(), expected: k });
        }
        if !self.ate[0].is_zero() {
            return Err(SpecError::NonZeroBaseline);
        }
        if self.hilo.len() != k - 1 {
            return Err(SpecError::HiloLength { got: self.hilo.len(), expected: k - 1 });
        }
        if let Some(i) = self.hilo.iter().position(|r| r[0] == r[1]) {
            return Err(SpecError::HiloNotOpposite(i + 1));
        }
        if self.gamma < T::one() {
            return Err(SpecError::GammaBelowOne);
        }
        if !(self.z_prior > T::zero() && self.z_prior < T::one()) {
            return Err(SpecError::PriorOutOfRange);
        }
        Ok(())
    }

    /// `p(Z = z)`.
    pub fn subtype_mass(&self, z: u8) -> T {
        if z == 1 {
            self.z_prior.clone()
        } else {
            T::one() - self.z_prior.clone()
        }
    }

    /// Individual effect `Δ(a, z)` of action `a` relative to action 0.
    pub fn delta(&self, a: usize, z: u8) -> T {
        if a == 0 {
            return T::zero();
        }
        let p = self.subtype_mass(z);
        let q = T::one() - p.clone();
        let tau = self.ate[a].clone();
        let g = self.gamma.clone();
        match self.level(a, z) {
            EffectLevel::Low => tau / (p + q * g),
            EffectLevel::High => g.clone() * tau / (p * g + q),
        }
    }

    pub fn ate(&self) -> &[T] {
        &self.ate
    }

    /// Conditional average effect given the subtype. Heterogeneity runs
    /// through `z` alone, so this equals `delta(a, z)`.
    pub fn cate(&self, a: usize, z: u8) -> T {
        self.delta(a, z)
    }

    /// The two subtype effects of `a` as `(HIGH, LOW)`.
    pub fn high_low(&self, a: usize) -> (T, T) {
        let (d0, d1) = (self.delta(a, 0), self.delta(a, 1));
        match self.level(a, 0) {
            EffectLevel::High => (d0, d1),
            EffectLevel::Low => (d1, d0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Random,
    Covariate,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "covariate" => Ok(Self::Covariate),
            other => Err(format!("unknown policy `{other}` (expected random|covariate)")),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyKind::Random => "random",
            PolicyKind::Covariate => "covariate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub epsilon: f64,
    /// Diagnosis level → effect class (0 = smallest |τ|, 2 = largest).
    pub diagnosis_class_map: BTreeMap<String, usize>,
    /// Partition of actions `1..k` into three classes by `|τ|`.
    pub action_classes: [Vec<usize>; 3],
}

/// Sorts actions `1..k` by `|τ(a)|` (ties by index) and cuts them into three
/// consecutive groups, giving any remainder to the lower groups.
pub fn tertile_classes(ate: &[f64]) -> [Vec<usize>; 3] {
    let mut acts: Vec<usize> = (1..ate.len()).collect();
    acts.sort_by(|a, b| ate[*a].abs().total_cmp(&ate[*b].abs()).then(a.cmp(b)));
    let n = acts.len();
    let base = n / 3;
    let rem = n % 3;
    let mut out: [Vec<usize>; 3] = Default::default();
    let mut it = acts.into_iter();
    for (g, slot) in out.iter_mut().enumerate() {
        let size = base + usize::from(g < rem);
        slot.extend(it.by_ref().take(size));
    }
    out
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, epsilon: f64, ate: &[f64]) -> Self {
        let diagnosis_class_map =
            [("CN", 0), ("MCI", 1), ("Dementia", 2)].map(|(k, v)| (k.to_string(), v)).into();
        Self { kind, epsilon, diagnosis_class_map, action_classes: tertile_classes(ate) }
    }

    pub fn validate(&self, n_actions: usize, diagnosis_levels: &[String]) -> Result<(), SpecError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(SpecError::EpsilonOutOfRange(self.epsilon));
        }
        let mut all: Vec<usize> = self.action_classes.iter().flatten().copied().collect();
        all.sort_unstable();
        if all != (1..n_actions).collect::<Vec<_>>() || self.action_classes.iter().any(Vec::is_empty)
        {
            return Err(SpecError::NotAPartition(n_actions));
        }
        for level in diagnosis_levels {
            match self.diagnosis_class_map.get(level) {
                Some(c) if *c < 3 => {}
                _ => return Err(SpecError::UnmappedDiagnosis(level.clone())),
            }
        }
        Ok(())
    }

    fn effective_epsilon(&self) -> f64 {
        match self.kind {
            PolicyKind::Random => 1.0,
            PolicyKind::Covariate => self.epsilon,
        }
    }

    pub fn class_for(&self, diagnosis: &str) -> &[usize] {
        let c = self.diagnosis_class_map.get(diagnosis).copied().unwrap_or(0);
        &self.action_classes[c]
    }

    /// Draws an action given the previous diagnosis. Exactly two uniforms are
    /// consumed: the exploration branch, then the pick.
    pub fn choose_action<R: Rng + ?Sized>(&self, n_actions: usize, diagnosis: &str, rng: &mut R) -> usize {
        let branch: f64 = rng.random();
        let pick: f64 = rng.random();
        if branch < self.effective_epsilon() {
            ((pick * n_actions as f64) as usize).min(n_actions - 1)
        } else {
            let class = self.class_for(diagnosis);
            class[((pick * class.len() as f64) as usize).min(class.len() - 1)]
        }
    }

    /// Probability that `choose_action` returns `a` for `diagnosis`.
    pub fn assignment_probability(&self, n_actions: usize, diagnosis: &str, a: usize) -> f64 {
        let eps = self.effective_epsilon();
        let class = self.class_for(diagnosis);
        let in_class = if class.contains(&a) { 1.0 / class.len() as f64 } else { 0.0 };
        eps / n_actions as f64 + (1.0 - eps) * in_class
    }
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self::new(PolicyKind::Covariate, 0.5, &DEFAULT_ATE)
    }
}
