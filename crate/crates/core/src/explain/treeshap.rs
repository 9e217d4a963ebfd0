//! Path-dependent TreeSHAP: exact Shapley values of the cover-weighted
//! conditional expectation, in time polynomial in tree size.

use crate::learners::{Tree, TreeNode};

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend(path: &mut Vec<PathElement>, depth: usize, zero: f64, one: f64, feature: Option<usize>) {
    path.truncate(depth);
    path.push(PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        let fi = i as f64;
        path[i + 1].pweight += one * path[i].pweight * (fi + 1.0) / (d + 1.0);
        path[i].pweight = zero * path[i].pweight * (d - fi) / (d + 1.0);
    }
}

fn unwind(path: &mut Vec<PathElement>, depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = depth as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * (d + 1.0) / ((fi + 1.0) * one);
            next_one = tmp - path[i].pweight * zero * (d - fi) / (d + 1.0);
        } else {
            path[i].pweight = path[i].pweight * (d + 1.0) / (zero * (d - fi));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.truncate(depth);
}

fn unwound_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = depth as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = next_one * (d + 1.0) / ((fi + 1.0) * one);
            total += tmp;
            next_one = path[i].pweight - tmp * zero * (d - fi) / (d + 1.0);
        } else {
            total += path[i].pweight / zero / ((d - fi) / (d + 1.0));
        }
    }
    total
}

/// Conditioning for interaction values: `On` fixes the feature to its
/// observed value, `Off` marginalises it out of every path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Condition {
    None,
    On(usize),
    Off(usize),
}

struct Walker<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
    condition: Condition,
}

impl Walker<'_> {
    fn conditioned_feature(&self) -> Option<usize> {
        match self.condition {
            Condition::None => None,
            Condition::On(f) | Condition::Off(f) => Some(f),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: usize,
        parent: &[PathElement],
        mut depth: usize,
        parent_zero: f64,
        parent_one: f64,
        parent_feature: Option<usize>,
        fraction: f64,
    ) {
        if fraction == 0.0 {
            return;
        }
        // a conditioned feature never enters the path, so the parent's path
        // is inherited unchanged
        let extend_here = self.condition == Condition::None || self.conditioned_feature() != parent_feature;
        let mut path: Vec<PathElement> = Vec::with_capacity(depth + 2);
        if extend_here {
            path.extend_from_slice(&parent[..depth]);
            extend(&mut path, depth, parent_zero, parent_one, parent_feature);
        } else {
            path.extend_from_slice(&parent[..=depth]);
        }

        match self.tree.nodes[node] {
            TreeNode::Leaf { value, .. } => {
                for i in 1..=depth {
                    let w = unwound_sum(&path, depth, i);
                    let el = path[i];
                    if let Some(f) = el.feature {
                        self.phi[f] += w * (el.one_fraction - el.zero_fraction) * value * fraction * self.scale;
                    }
                }
            }
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                cover,
            } => {
                let (hot, cold) = if self.x[feature] < threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let hot_zero = self.tree.nodes[hot].cover() / cover;
                let cold_zero = self.tree.nodes[cold].cover() / cover;
                let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);

                if let Some(k) = (1..=depth).find(|&k| path[k].feature == Some(feature)) {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind(&mut path, depth, k);
                    depth -= 1;
                }

                let (mut hot_fraction, mut cold_fraction) = (fraction, fraction);
                let mut child_depth = depth + 1;
                match self.condition {
                    Condition::On(f) if f == feature => {
                        cold_fraction = 0.0;
                        child_depth -= 1;
                    }
                    Condition::Off(f) if f == feature => {
                        hot_fraction *= hot_zero;
                        cold_fraction *= cold_zero;
                        child_depth -= 1;
                    }
                    _ => {}
                }
                let snapshot = path;
                self.recurse(
                    hot,
                    &snapshot,
                    child_depth,
                    hot_zero * incoming_zero,
                    incoming_one,
                    Some(feature),
                    hot_fraction,
                );
                self.recurse(
                    cold,
                    &snapshot,
                    child_depth,
                    cold_zero * incoming_zero,
                    0.0,
                    Some(feature),
                    cold_fraction,
                );
            }
        }
    }
}

/// Adds `scale` times the SHAP values of `tree` at `x` into `phi`.
pub(crate) fn tree_shap_into(tree: &Tree, x: &[f64], phi: &mut [f64], scale: f64, condition: Condition) {
    let mut w = Walker {
        tree,
        x,
        phi,
        scale,
        condition,
    };
    w.recurse(0, &[], 0, 1.0, 1.0, None, 1.0);
}
