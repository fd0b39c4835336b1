//! Sawtooth upper bound: corner values plus interior belief/value points.

use crate::model::{Belief, Child, PomdpModel};

/// Slack when deciding that an interior point adds nothing.
pub const UPPER_PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct UpperPoint {
    pub belief: Belief,
    pub value: f64,
    /// Corner interpolation `Σ_s b_i(s) v(s)`, kept in sync with the corners.
    interp: f64,
}

impl UpperPoint {
    /// How far the point sits below the corner interpolation (negative when
    /// the point is informative).
    fn gap(&self) -> f64 {
        self.value - self.interp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    corners: Vec<f64>,
    points: Vec<UpperPoint>,
}

/// `min_{s ∈ supp(bi)} b(s) / bi(s)`, or 0 if `bi` puts mass where `b` has
/// none. Gives up early once the ratio drops to `floor`.
fn ratio(b: &Belief, bi: &Belief, floor: f64) -> f64 {
    let (bs, bp) = (b.support(), b.probs());
    let mut k = 0;
    let mut c = f64::INFINITY;
    for (&s, &p) in bi.support().iter().zip(bi.probs()) {
        while k < bs.len() && bs[k] < s {
            k += 1;
        }
        if k == bs.len() || bs[k] != s {
            return 0.0;
        }
        c = c.min(bp[k] / p);
        if c <= floor {
            return c;
        }
        k += 1;
    }
    c
}

impl UpperBound {
    pub fn from_corners(corners: Vec<f64>) -> Self {
        Self {
            corners,
            points: Vec::new(),
        }
    }

    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn points(&self) -> &[UpperPoint] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Corner interpolation `Σ_s b(s) v(s)`.
    pub fn interpolate(&self, b: &Belief) -> f64 {
        b.dot(&self.corners)
    }

    fn value_skipping(&self, b: &Belief, skip: Option<usize>) -> f64 {
        let base = self.interpolate(b);
        let mut best = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            let d = p.gap();
            if d >= 0.0 || Some(i) == skip {
                continue;
            }
            // c·d only improves on `best` when c exceeds best/d.
            let threshold = best / d;
            let c = ratio(b, &p.belief, threshold);
            if c > threshold {
                best = c * d;
            }
        }
        base + best
    }

    /// `V̄(b)`: the minimum over the corner interpolation and every interior
    /// point's sawtooth projection.
    pub fn value(&self, b: &Belief) -> f64 {
        self.value_skipping(b, None)
    }

    /// Lowers the bound at `b` to `value` if that is an improvement. Corner
    /// beliefs update the corner values directly. Returns whether anything
    /// changed.
    pub fn insert(&mut self, b: &Belief, value: f64) -> bool {
        if b.support().len() == 1 {
            let s = b.support()[0];
            if value >= self.corners[s] {
                return false;
            }
            self.corners[s] = value;
            for p in &mut self.points {
                if p.belief.as_sparse().get(s) > 0.0 {
                    p.interp = p.belief.dot(&self.corners);
                }
            }
            return true;
        }
        if value >= self.value(b) {
            return false;
        }
        self.points.push(UpperPoint {
            belief: b.clone(),
            value,
            interp: self.interpolate(b),
        });
        true
    }

    /// `Q_a^{V̄}(b)` for every action.
    pub fn q_values(&self, model: &PomdpModel, b: &Belief, children: &[Vec<Child>]) -> Vec<f64> {
        let gamma = model.discount();
        children
            .iter()
            .enumerate()
            .map(|(a, kids)| {
                let cont: f64 = kids
                    .iter()
                    .map(|c| c.probability * self.value(&c.belief))
                    .sum();
                model.belief_reward(b, a) + gamma * cont
            })
            .collect()
    }

    /// Bellman update at `b`; returns `HV̄(b)`.
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
        let hv = self
            .q_values(model, b, children)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        self.insert(b, hv);
        hv
    }

    /// Drops interior points that the rest of the set already matches at
    /// their own belief. Dominance at `b_i` by another point implies
    /// dominance everywhere, so the bound is unchanged. Returns the number
    /// of removed points.
    pub fn prune(&mut self) -> usize {
        let before = self.points.len();
        let mut i = 0;
        while i < self.points.len() {
            let p = &self.points[i];
            if p.gap() >= 0.0
                || self.value_skipping(&p.belief, Some(i)) <= p.value + UPPER_PRUNE_TOL
            {
                self.points.swap_remove(i);
            } else {
                i += 1;
            }
        }
        before - self.points.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::generate_random;
    use proptest::prelude::*;

    fn belief(p: &[f64]) -> Belief {
        Belief::from_dense(p).unwrap()
    }

    #[test]
    fn no_interior_points_is_interpolation() {
        let ub = UpperBound::from_corners(vec![1.0, 3.0]);
        assert!((ub.value(&belief(&[0.25, 0.75])) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_sawtooth() {
        let mut ub = UpperBound::from_corners(vec![0.0, 0.0]);
        // Above the interpolation, so it is not informative.
        assert!(!ub.insert(&belief(&[0.5, 0.5]), 1.0));
        let mut ub2 = UpperBound::from_corners(vec![2.0, 2.0]);
        ub2.insert(&belief(&[0.5, 0.5]), 1.0);
        assert!((ub2.value(&belief(&[0.5, 0.5])) - 1.0).abs() < 1e-12);
        // c = min(0.25/0.5, 0.75/0.5) = 0.5, so 2 + 0.5·(1 − 2).
        assert!((ub2.value(&belief(&[0.25, 0.75])) - 1.5).abs() < 1e-12);
        ub.corners = vec![0.0, 0.0];
        ub.points.push(UpperPoint {
            belief: belief(&[0.5, 0.5]),
            value: 1.0,
            interp: 0.0,
        });
        assert!((ub.value(&belief(&[0.25, 0.75])) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn corner_update_lowers_the_corner() {
        let mut ub = UpperBound::from_corners(vec![5.0, 5.0]);
        ub.insert(&belief(&[0.5, 0.5]), 4.0);
        assert!(ub.insert(&Belief::corner(2, 0), 1.0));
        assert_eq!(ub.corners(), &[1.0, 5.0]);
        assert!((ub.points[0].interp - 3.0).abs() < 1e-12);
        assert!(ub.value(&belief(&[0.5, 0.5])) <= 3.0);
    }

    #[test]
    fn pruning_duplicates_and_uninformative_points() {
        let mut ub = UpperBound::from_corners(vec![4.0, 4.0, 4.0]);
        let b = belief(&[0.2, 0.3, 0.5]);
        ub.insert(&b, 3.0);
        ub.points.push(ub.points[0].clone());
        ub.points.push(UpperPoint {
            belief: belief(&[0.5, 0.5, 0.0]),
            value: 4.5,
            interp: 4.0,
        });
        assert_eq!(ub.prune(), 2);
        assert_eq!(ub.num_points(), 1);
    }

    #[test]
    fn discount_zero_update_is_best_immediate_reward() {
        let m = generate_random(3, 3, 2, 0.0, 5).unwrap();
        let mut ub = UpperBound::from_corners(vec![100.0; 3]);
        let b = belief(&[0.2, 0.3, 0.5]);
        let hv = ub.update(&m, &b);
        let best = (0..3)
            .map(|a| m.belief_reward(&b, a))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((hv - best).abs() < 1e-12);
        assert!((ub.value(&b) - best).abs() < 1e-12);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Belief> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |w| {
            let t: f64 = w.iter().sum();
            (t > 1e-3)
                .then(|| Belief::from_dense(&w.iter().map(|x| x / t).collect::<Vec<_>>()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn never_above_interpolation_and_pruning_preserves_values(
            corners in prop::collection::vec(-5.0f64..5.0, 4),
            pts in prop::collection::vec((simplex(4), -10.0f64..0.0), 1..12),
            queries in prop::collection::vec(simplex(4), 1..8),
        ) {
            let mut ub = UpperBound::from_corners(corners);
            for (b, v) in &pts {
                let target = ub.interpolate(b) + v;
                ub.insert(b, target);
            }
            let before: Vec<f64> = queries.iter().map(|q| ub.value(q)).collect();
            for (q, v) in queries.iter().zip(&before) {
                prop_assert!(*v <= ub.interpolate(q) + 1e-12);
            }
            ub.prune();
            for (q, v) in queries.iter().zip(&before) {
                prop_assert!((ub.value(q) - v).abs() < 1e-9);
            }
        }
    }
}
