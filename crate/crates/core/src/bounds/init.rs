//! Initial bounds: blind-policy vectors below, MDP and fast informed bound
//! above. All three iterate until the max-norm residual drops below a
//! tolerance or an iteration cap is reached.

use log::debug;
use serde::Serialize;

use super::{AlphaVector, LowerBound, UpperBound};
use crate::model::PomdpModel;

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// `R̲ = max_a min_s R(s,a) / (1 − γ)`, the value of the best blind policy
/// in the worst state.
pub fn blind_floor(model: &PomdpModel) -> f64 {
    let best = (0..model.num_actions())
        .map(|a| {
            model
                .rewards(a)
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    best / (1.0 - model.discount())
}

/// Per-action values of "always take `a`", iterated from the floor.
pub fn blind_vectors(
    model: &PomdpModel,
    residual_tol: f64,
    max_iters: usize,
) -> (Vec<Vec<f64>>, Convergence) {
    let (ns, na, gamma) = (model.num_states(), model.num_actions(), model.discount());
    let floor = blind_floor(model);
    let mut alphas = vec![vec![floor; ns]; na];
    let mut next = vec![0.0; ns];
    let mut conv = Convergence {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    while conv.iterations < max_iters {
        let mut residual: f64 = 0.0;
        for (a, alpha) in alphas.iter_mut().enumerate() {
            model.transition(a).right_multiply_dense(alpha, &mut next);
            for (s, (x, n)) in alpha.iter_mut().zip(&next).enumerate() {
                let v = model.reward(s, a) + gamma * n;
                residual = residual.max((v - *x).abs());
                *x = v;
            }
        }
        conv.iterations += 1;
        conv.residual = residual;
        if residual < residual_tol {
            conv.converged = true;
            break;
        }
    }
    debug!("blind vectors: {conv:?}");
    (alphas, conv)
}

/// Lower bound made of one protected full-mask blind-policy vector per action.
pub fn init_lower_blind(model: &PomdpModel, residual_tol: f64, max_iters: usize) -> LowerBound {
    let (alphas, _) = blind_vectors(model, residual_tol, max_iters);
    LowerBound::new(
        alphas
            .into_iter()
            .enumerate()
            .map(|(a, v)| AlphaVector::full(a, v))
            .collect(),
    )
}

/// Fully observable relaxation: state values and the Q table.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpBound {
    pub values: Vec<f64>,
    /// `q[a][s]`.
    pub q: Vec<Vec<f64>>,
    pub convergence: Convergence,
}

/// Value iteration on the underlying MDP, started from `R_max / (1 − γ)` so
/// that every iterate is an upper bound.
pub fn init_upper_mdp(model: &PomdpModel, residual_tol: f64, max_iters: usize) -> MdpBound {
    let (ns, na, gamma) = (model.num_states(), model.num_actions(), model.discount());
    let top = model.reward_extrema().r_max / (1.0 - gamma);
    let mut values = vec![top; ns];
    let mut q = vec![vec![top; ns]; na];
    let mut next = vec![0.0; ns];
    let mut conv = Convergence {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    while conv.iterations < max_iters {
        for (a, qa) in q.iter_mut().enumerate() {
            model.transition(a).right_multiply_dense(&values, &mut next);
            for (s, x) in qa.iter_mut().enumerate() {
                *x = model.reward(s, a) + gamma * next[s];
            }
        }
        let mut residual: f64 = 0.0;
        for (s, v) in values.iter_mut().enumerate() {
            let best = q.iter().map(|qa| qa[s]).fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((best - *v).abs());
            *v = best;
        }
        conv.iterations += 1;
        conv.residual = residual;
        if residual < residual_tol {
            conv.converged = true;
            break;
        }
    }
    debug!("mdp bound: {conv:?}");
    MdpBound {
        values,
        q,
        convergence: conv,
    }
}

/// Fast informed bound vectors, one per action.
#[derive(Debug, Clone, PartialEq)]
pub struct FibBound {
    /// `alphas[a][s]`.
    pub alphas: Vec<Vec<f64>>,
    pub corners: Vec<f64>,
    pub convergence: Convergence,
}

impl FibBound {
    pub fn upper_bound(&self) -> UpperBound {
        UpperBound::from_corners(self.corners.clone())
    }
}

/// Iterates the fast informed bound update starting from the MDP Q table.
/// The update never exceeds the MDP update, so the iterates decrease
/// monotonically and stay valid upper bounds.
pub fn init_upper_fib(
    model: &PomdpModel,
    mdp: &MdpBound,
    residual_tol: f64,
    max_iters: usize,
) -> FibBound {
    let (ns, na, nz, gamma) = (
        model.num_states(),
        model.num_actions(),
        model.num_observations(),
        model.discount(),
    );
    // State-major layout so the inner loop over a' is contiguous.
    let mut cur = vec![0.0; ns * na];
    for (a, qa) in mdp.q.iter().enumerate() {
        for (s, &v) in qa.iter().enumerate() {
            cur[s * na + a] = v;
        }
    }
    let mut next = vec![0.0; ns * na];
    let mut acc = vec![0.0; nz * na];
    let mut touched: Vec<usize> = Vec::new();
    let mut seen = vec![false; nz];
    let mut conv = Convergence {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    while conv.iterations < max_iters {
        let mut residual: f64 = 0.0;
        for a in 0..na {
            let (trans, obs) = (model.transition(a), model.observation(a));
            for s in 0..ns {
                for (sp, t) in trans.row_iter(s) {
                    let src = &cur[sp * na..(sp + 1) * na];
                    for (z, o) in obs.row_iter(sp) {
                        if !seen[z] {
                            seen[z] = true;
                            touched.push(z);
                        }
                        let w = t * o;
                        for (dst, v) in acc[z * na..(z + 1) * na].iter_mut().zip(src) {
                            *dst += w * v;
                        }
                    }
                }
                let mut cont = 0.0;
                for &z in &touched {
                    let row = &mut acc[z * na..(z + 1) * na];
                    cont += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.fill(0.0);
                    seen[z] = false;
                }
                touched.clear();
                let v = model.reward(s, a) + gamma * cont;
                residual = residual.max((v - cur[s * na + a]).abs());
                next[s * na + a] = v;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        conv.iterations += 1;
        conv.residual = residual;
        if residual < residual_tol {
            conv.converged = true;
            break;
        }
    }
    debug!("fast informed bound: {conv:?}");
    let alphas: Vec<Vec<f64>> = (0..na)
        .map(|a| (0..ns).map(|s| cur[s * na + a]).collect())
        .collect();
    let corners = (0..ns)
        .map(|s| {
            cur[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    FibBound {
        alphas,
        corners,
        convergence: conv,
    }
}
