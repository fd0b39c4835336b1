//! Masked α-vectors, the lower-bound vector set, and the point-based backup.

use serde::{Deserialize, Serialize};

use crate::model::{is_sorted_subset, Belief, Child, PomdpModel};

/// A linear function over states certifying the value of a conditional
/// plan that starts with `action`.
///
/// A masked vector only stores entries for the states in its mask and may
/// only be evaluated at beliefs whose support lies inside the mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    action: usize,
    mask: Option<Vec<usize>>,
    values: Vec<f64>,
}

impl AlphaVector {
    pub fn full(action: usize, values: Vec<f64>) -> Self {
        Self {
            action,
            mask: None,
            values,
        }
    }

    /// Panics if `mask` is empty, unsorted, or not aligned with `values`.
    pub fn masked(action: usize, mask: Vec<usize>, values: Vec<f64>) -> Self {
        assert!(!mask.is_empty(), "mask must be nonempty");
        assert_eq!(mask.len(), values.len(), "mask and values must align");
        assert!(
            mask.windows(2).all(|w| w[0] < w[1]),
            "mask must be strictly increasing"
        );
        Self {
            action,
            mask: Some(mask),
            values,
        }
    }

    pub fn action(&self) -> usize {
        self.action
    }

    pub fn is_full(&self) -> bool {
        self.mask.is_none()
    }

    /// Mask indices, or `None` for a full vector.
    pub fn mask(&self) -> Option<&[usize]> {
        self.mask.as_deref()
    }

    /// Stored values: dense for a full vector, aligned with the mask otherwise.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize) -> Option<f64> {
        match &self.mask {
            None => self.values.get(s).copied(),
            Some(mask) => mask.binary_search(&s).ok().map(|k| self.values[k]),
        }
    }

    pub fn admits(&self, b: &Belief) -> bool {
        match &self.mask {
            None => true,
            Some(mask) => is_sorted_subset(b.support(), mask),
        }
    }

    /// `α · b`, or `None` when the belief's support leaves the mask.
    pub fn dot(&self, b: &Belief) -> Option<f64> {
        let mask = match &self.mask {
            None => return Some(b.dot(&self.values)),
            Some(mask) => mask,
        };
        let (support, probs) = (b.support(), b.probs());
        if support.len() > mask.len() {
            return None;
        }
        let mut total = 0.0;
        if support.len() * 8 < mask.len() {
            let mut lo = 0;
            for (&s, &p) in support.iter().zip(probs) {
                match mask[lo..].binary_search(&s) {
                    Ok(k) => {
                        total += p * self.values[lo + k];
                        lo += k + 1;
                    }
                    Err(_) => return None,
                }
            }
        } else {
            let mut k = 0;
            for (&s, &p) in support.iter().zip(probs) {
                while k < mask.len() && mask[k] < s {
                    k += 1;
                }
                if k == mask.len() || mask[k] != s {
                    return None;
                }
                total += p * self.values[k];
                k += 1;
            }
        }
        Some(total)
    }
}

/// Γ: a set of α-vectors whose upper envelope lower-bounds the optimal value.
///
/// Vectors added through [`LowerBound::push_protected`] (the blind-policy
/// initializers) keep full masks and are never pruned, so the bound is
/// defined at every belief.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    vectors: Vec<AlphaVector>,
    witnesses: Vec<Option<Belief>>,
    protected: Vec<bool>,
}

impl LowerBound {
    /// Panics unless at least one vector has a full mask.
    pub fn new(vectors: Vec<AlphaVector>) -> Self {
        assert!(
            vectors.iter().any(AlphaVector::is_full),
            "a lower bound needs at least one full-mask vector"
        );
        let n = vectors.len();
        let protected = vectors.iter().map(AlphaVector::is_full).collect();
        Self {
            vectors,
            witnesses: vec![None; n],
            protected,
        }
    }

    pub fn vectors(&self) -> &[AlphaVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn push_protected(&mut self, alpha: AlphaVector) {
        assert!(alpha.is_full(), "protected vectors must have full masks");
        self.vectors.push(alpha);
        self.witnesses.push(None);
        self.protected.push(true);
    }

    /// Appends a vector created by a backup at `witness`.
    pub fn push(&mut self, alpha: AlphaVector, witness: Belief) {
        self.vectors.push(alpha);
        self.witnesses.push(Some(witness));
        self.protected.push(false);
    }

    /// Index and value of the best admissible vector at `b`; ties go to the
    /// lowest index.
    pub fn best(&self, b: &Belief) -> (usize, f64) {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, alpha) in self.vectors.iter().enumerate() {
            if let Some(v) = alpha.dot(b) {
                if v > best.1 {
                    best = (i, v);
                }
            }
        }
        debug_assert!(best.0 != usize::MAX);
        best
    }

    /// `V̲(b)`.
    pub fn value(&self, b: &Belief) -> f64 {
        self.best(b).1
    }

    /// Appends the backup at `b`; returns the new value at `b`.
    pub fn update(&mut self, model: &PomdpModel, b: &Belief) -> f64 {
        let children = model.expand(b);
        self.update_with_children(model, b, &children)
    }

    pub fn update_with_children(
        &mut self,
        model: &PomdpModel,
        b: &Belief,
        children: &[Vec<Child>],
    ) -> f64 {
        let alpha = backup_with_children(model, self, b, children, BackupMode::Masked);
        self.push(alpha, b.clone());
        self.value(b)
    }

    /// Beliefs at which the current vectors were created.
    pub fn creation_witnesses(&self) -> impl Iterator<Item = &Belief> {
        self.witnesses.iter().flatten()
    }

    /// Removes vectors that are not the best admissible vector at any
    /// witness. The value at every witness is unchanged; protected vectors
    /// are always kept. Returns the number of removed vectors.
    pub fn prune(&mut self, witnesses: &[&Belief]) -> usize {
        let mut keep = self.protected.clone();
        for w in witnesses {
            let (i, _) = self.best(w);
            keep[i] = true;
        }
        let before = self.vectors.len();
        let mut idx = 0..;
        self.vectors.retain(|_| keep[idx.next().unwrap()]);
        let mut idx = 0..;
        self.witnesses.retain(|_| keep[idx.next().unwrap()]);
        let mut idx = 0..;
        self.protected.retain(|_| keep[idx.next().unwrap()]);
        before - self.vectors.len()
    }
}

/// Which entries a backup computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackupMode {
    /// Only the entries on the support of the backed-up belief.
    Masked,
    /// Every entry. Successor vectors are restricted to full-mask ones.
    Full,
}

/// Value of the worst possible policy, used for successor entries a masked
/// vector does not store.
pub fn value_floor(model: &PomdpModel) -> f64 {
    model.reward_extrema().r_min / (1.0 - model.discount())
}

/// One-step lookahead Q-values at `b` with continuation `V̲`, together with the
/// maximizing successor vector for each (action, child).
fn lookahead(
    lb: &LowerBound,
    model: &PomdpModel,
    b: &Belief,
    children: &[Vec<Child>],
    full_only: bool,
) -> (Vec<f64>, Vec<Vec<usize>>) {
    let gamma = model.discount();
    let mut q = Vec::with_capacity(children.len());
    let mut choice = Vec::with_capacity(children.len());
    for (a, kids) in children.iter().enumerate() {
        let mut value = model.belief_reward(b, a);
        let mut picks = Vec::with_capacity(kids.len());
        for child in kids {
            let (k, v) = if full_only {
                best_full(lb, &child.belief)
            } else {
                lb.best(&child.belief)
            };
            value += gamma * child.probability * v;
            picks.push(k);
        }
        q.push(value);
        choice.push(picks);
    }
    (q, choice)
}

fn best_full(lb: &LowerBound, b: &Belief) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (i, alpha) in lb.vectors.iter().enumerate() {
        if alpha.is_full() {
            let v = b.dot(&alpha.values);
            if v > best.1 {
                best = (i, v);
            }
        }
    }
    best
}

/// `max_a [R(b,a) + γ Σ_z Pr(z|b,a) V̲(τ(b,a,z))]` for every action.
pub fn lower_q_values(
    model: &PomdpModel,
    lb: &LowerBound,
    b: &Belief,
    children: &[Vec<Child>],
) -> Vec<f64> {
    lookahead(lb, model, b, children, false).0
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Point-based backup at `b`: the vector of `HΓ` that is maximal at `b`,
/// computed on the support of `b`.
pub fn backup(model: &PomdpModel, lb: &LowerBound, b: &Belief) -> AlphaVector {
    let children = model.expand(b);
    backup_with_children(model, lb, b, &children, BackupMode::Masked)
}

/// [`backup`] with precomputed children (`model.expand(b)`).
pub fn backup_with_children(
    model: &PomdpModel,
    lb: &LowerBound,
    b: &Belief,
    children: &[Vec<Child>],
    mode: BackupMode,
) -> AlphaVector {
    let full = mode == BackupMode::Full;
    let (q, choice) = lookahead(lb, model, b, children, full);
    let a = argmax(&q);
    let gamma = model.discount();
    let floor = value_floor(model);
    let n = model.num_states();

    // Successor vector per observation; observations without a child fall
    // back to the floor (masked) or the best full vector against the
    // predicted distribution (full).
    let mut per_obs: Vec<Option<&AlphaVector>> = vec![None; model.num_observations()];
    for (child, &k) in children[a].iter().zip(&choice[a]) {
        per_obs[child.observation] = Some(&lb.vectors[k]);
    }
    let fallback = if full {
        let predicted = Belief::from_mass(model.predict(b, a)).ok();
        predicted.map(|p| &lb.vectors[best_full(lb, &p).0])
    } else {
        None
    };

    let obs = model.observation(a);
    let mut g_cache = vec![f64::NAN; n];
    let mut g = |sp: usize| -> f64 {
        if g_cache[sp].is_nan() {
            let mut total = 0.0;
            for (z, o) in obs.row_iter(sp) {
                let v = per_obs[z]
                    .or(fallback)
                    .and_then(|alpha| alpha.get(sp))
                    .unwrap_or(floor);
                total += o * v;
            }
            g_cache[sp] = total;
        }
        g_cache[sp]
    };
    let trans = model.transition(a);
    let rewards = model.rewards(a);
    let mut entry = |s: usize| -> f64 {
        let cont: f64 = trans.row_iter(s).map(|(sp, t)| t * g(sp)).sum();
        rewards[s] + gamma * cont
    };
    if full {
        AlphaVector::full(a, (0..n).map(&mut entry).collect())
    } else {
        let mask = b.support().to_vec();
        let values = mask.iter().map(|&s| entry(s)).collect();
        AlphaVector::masked(a, mask, values)
    }
}
