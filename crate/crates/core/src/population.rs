//! Labelled colony populations.

use std::fmt;

use crate::error::{ModelError, Result};

/// Ulam-Harris label: the root index followed by the child indices (1 or 2)
/// of every fission on the lineage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Vec<u32>);

impl Label {
    /// Label of the `index`-th initial colony (1-based).
    pub fn root(index: u32) -> Self {
        Label(vec![index])
    }

    pub fn child(&self, which: u32) -> Self {
        let mut path = Vec::with_capacity(self.0.len() + 1);
        path.extend_from_slice(&self.0);
        path.push(which);
        Label(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    /// Number of fissions between the root and this colony.
    pub fn generation(&self) -> usize {
        self.0.len() - 1
    }

    /// True when `self` is `other` or one of its descendants.
    pub fn extends(&self, other: &Label) -> bool {
        self.0.starts_with(&other.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for part in &self.0 {
            if !first {
                f.write_str(".")?;
            }
            write!(f, "{part}")?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Colony {
    pub label: Label,
    pub trait_value: f64,
}

/// Time-stamped colony set with a cached total trait R.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    time: f64,
    colonies: Vec<Colony>,
    total: f64,
}

impl PopulationState {
    /// Population at `time` with root labels 1..=N for the given traits.
    pub fn new(time: f64, traits: &[f64]) -> Result<Self> {
        if !time.is_finite() {
            return Err(ModelError::InvalidInitialPopulation(format!(
                "time must be finite, got {time}"
            )));
        }
        if let Some(&bad) = traits.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(ModelError::InvalidInitialPopulation(format!(
                "traits must be positive and finite, got {bad}"
            )));
        }
        let colonies: Vec<Colony> = traits
            .iter()
            .enumerate()
            .map(|(i, &x)| Colony {
                label: Label::root(i as u32 + 1),
                trait_value: x,
            })
            .collect();
        let total = traits.iter().sum();
        Ok(Self { time, colonies, total })
    }

    /// `n0` colonies sharing `r0` equally, at time 0.
    pub fn uniform(n0: usize, r0: f64) -> Result<Self> {
        if n0 == 0 {
            return Err(ModelError::InvalidInitialPopulation("n0 must be at least 1".into()));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(ModelError::InvalidInitialPopulation(format!(
                "r0 must be positive, got {r0}"
            )));
        }
        Self::new(0.0, &vec![r0 / n0 as f64; n0])
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn colonies(&self) -> &[Colony] {
        &self.colonies
    }

    /// Number of living colonies N.
    pub fn n(&self) -> usize {
        self.colonies.len()
    }

    /// Total resource R (cached).
    pub fn r(&self) -> f64 {
        self.total
    }

    pub fn is_extinct(&self) -> bool {
        self.colonies.is_empty()
    }

    pub fn traits(&self) -> impl Iterator<Item = f64> + '_ {
        self.colonies.iter().map(|c| c.trait_value)
    }

    pub fn find(&self, label: &Label) -> Option<usize> {
        self.colonies.iter().position(|c| &c.label == label)
    }

    /// Largest trait, 0 when extinct.
    pub fn sup_trait(&self) -> f64 {
        self.traits().fold(0.0, f64::max)
    }

    /// Σ x² / R, 0 when extinct.
    pub fn sum_sq_over_r(&self) -> f64 {
        if self.is_extinct() {
            return 0.0;
        }
        self.traits().map(|x| x * x).sum::<f64>() / self.total
    }

    /// Recomputes N and R and checks every structural invariant.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let exact: f64 = self.traits().sum();
        if self.colonies.is_empty() {
            if self.total != 0.0 {
                return Err(format!("extinct population carries mass {}", self.total));
            }
            return Ok(());
        }
        if ((self.total - exact) / exact).abs() > 1e-9 {
            return Err(format!("cached R {} differs from recomputed {}", self.total, exact));
        }
        if let Some(c) = self.colonies.iter().find(|c| !(c.trait_value > 0.0)) {
            return Err(format!("colony {} has non-positive trait {}", c.label, c.trait_value));
        }
        let mut labels: Vec<&Label> = self.colonies.iter().map(|c| &c.label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate labels".into());
        }
        Ok(())
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub(crate) fn colonies_mut(&mut self) -> &mut [Colony] {
        &mut self.colonies
    }

    pub(crate) fn set_total(&mut self, total: f64) {
        self.total = total;
    }

    /// Replaces colony `index` by its children `u1` (trait θx, kept at
    /// `index`) and `u2` (trait (1−θ)x, appended). Returns the index of `u2`.
    pub(crate) fn split(&mut self, index: usize, theta: f64) -> usize {
        let parent = &mut self.colonies[index];
        let x = parent.trait_value;
        let second = Colony {
            label: parent.label.child(2),
            trait_value: (1.0 - theta) * x,
        };
        parent.label = parent.label.child(1);
        parent.trait_value = theta * x;
        self.colonies.push(second);
        self.colonies.len() - 1
    }

    /// Removes colony `index`; the last colony moves into its slot.
    pub(crate) fn remove(&mut self, index: usize) -> Colony {
        let dead = self.colonies.swap_remove(index);
        if self.colonies.is_empty() {
            self.total = 0.0;
        } else {
            self.total -= dead.trait_value;
            if !(self.total > 0.0) {
                self.total = self.traits().sum();
            }
        }
        dead
    }

    /// Index of the colony holding the cumulative trait level `level` in [0, R).
    pub(crate) fn select_by_trait(&self, level: f64) -> usize {
        let mut acc = 0.0;
        for (i, c) in self.colonies.iter().enumerate() {
            acc += c.trait_value;
            if level < acc {
                return i;
            }
        }
        self.colonies.len() - 1
    }

    pub(crate) fn freeze_extinct(&mut self, time: f64) {
        self.colonies.clear();
        self.total = 0.0;
        self.time = time;
    }
}
