//! Shapley values straight from the definition; exponential in the number
//! of features and used as a test oracle.

use crate::error::{Error, Result};
use crate::learners::{Tree, TreeEnsemble, TreeNode};

/// Largest feature count accepted by the subset enumerators.
pub const MAX_BRUTE_FORCE_FEATURES: usize = 16;

/// Cover-weighted expectation of `tree` when only the features in `known`
/// (a bitmask) are fixed to their values in `x`.
fn conditional_value(tree: &Tree, node: usize, x: &[f64], known: u32) -> f64 {
    match tree.nodes[node] {
        TreeNode::Leaf { value, .. } => value,
        TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
            cover,
        } => {
            if known & (1 << feature) != 0 {
                let next = if x[feature] < threshold { left } else { right };
                conditional_value(tree, next, x, known)
            } else {
                (tree.nodes[left].cover() * conditional_value(tree, left, x, known)
                    + tree.nodes[right].cover() * conditional_value(tree, right, x, known))
                    / cover
            }
        }
    }
}

/// Model output in native units with only `known` features observed.
pub fn coalition_value(model: &TreeEnsemble, x: &[f64], known: u32) -> f64 {
    let w = model.tree_weight();
    model.native_offset()
        + model
            .trees
            .iter()
            .map(|t| w * conditional_value(t, 0, x, known))
            .sum::<f64>()
}

fn factorials(m: usize) -> Vec<f64> {
    let mut f = vec![1.0; m + 1];
    for i in 1..=m {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn guard(model: &TreeEnsemble, x: &[f64]) -> Result<usize> {
    model.validate()?;
    let m = model.n_features();
    if m > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::ComplexityGuard {
            n_features: m,
            max: MAX_BRUTE_FORCE_FEATURES,
        });
    }
    if x.len() != m {
        return Err(Error::Shape(format!(
            "row has {} values, model has {m} features",
            x.len()
        )));
    }
    Ok(m)
}

/// `φ_i = Σ_{S ⊆ N∖{i}} |S|!(M − |S| − 1)!/M! · (v(S ∪ {i}) − v(S))`.
pub fn brute_force_shap(model: &TreeEnsemble, x: &[f64]) -> Result<Vec<f64>> {
    let m = guard(model, x)?;
    let fact = factorials(m);
    let values: Vec<f64> = (0..1u32 << m).map(|s| coalition_value(model, x, s)).collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for s in 0..1u32 << m {
            if s & bit != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            *p += fact[k] * fact[m - k - 1] / fact[m] * (values[(s | bit) as usize] - values[s as usize]);
        }
    }
    Ok(phi)
}

/// Shapley interaction index for `i ≠ j`, halved so that a row of the
/// interaction matrix sums to `φ_i`:
/// `Σ_{S ⊆ N∖{i,j}} |S|!(M − |S| − 2)!/(2(M − 1)!) · ∇_ij(S)`.
/// The diagonal is `φ_i` minus the row's off-diagonal entries.
pub fn brute_force_interactions(model: &TreeEnsemble, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = guard(model, x)?;
    let phi = brute_force_shap(model, x)?;
    let fact = factorials(m);
    let values: Vec<f64> = (0..1u32 << m).map(|s| coalition_value(model, x, s)).collect();
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (bi, bj) = (1u32 << i, 1u32 << j);
            let mut total = 0.0;
            for s in 0..1u32 << m {
                if s & (bi | bj) != 0 {
                    continue;
                }
                let k = s.count_ones() as usize;
                let delta = values[(s | bi | bj) as usize] - values[(s | bi) as usize] - values[(s | bj) as usize]
                    + values[s as usize];
                total += fact[k] * fact[m - k - 2] / (2.0 * fact[m - 1]) * delta;
            }
            out[i][j] = total;
        }
        out[i][i] = phi[i] - (0..m).filter(|&j| j != i).map(|j| out[i][j]).sum::<f64>();
    }
    Ok(out)
}
