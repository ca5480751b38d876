//! d-separation via ball-passing reachability: a path is active when every
//! chain/fork node on it is unconditioned and every collider is in the
//! conditioning set or has a conditioned descendant.

use std::collections::VecDeque;

use super::{CausalDag, GraphError};

impl CausalDag {
    fn resolve_set(&self, names: &[&str]) -> Result<Vec<usize>, GraphError> {
        names.iter().map(|n| self.resolve(n)).collect()
    }

    /// Mask of `seeds` plus all their ancestors.
    fn ancestral_mask(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut mask[v], true) {
                continue;
            }
            stack.extend_from_slice(self.parents_idx(v));
        }
        mask
    }

    /// Mask of the proper descendants of `node`.
    pub(crate) fn descendant_mask(&self, node: usize) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<usize> = self.children_idx(node).to_vec();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut mask[v], true) {
                continue;
            }
            stack.extend_from_slice(self.children_idx(v));
        }
        mask
    }

    /// True iff every path between `x` and `y` is blocked given `z`.
    /// The three sets must be disjoint.
    pub fn d_separated(&self, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool, GraphError> {
        for (set_a, set_b) in [(x, y), (x, z), (y, z)] {
            for a in set_a {
                if set_b.contains(a) {
                    return Err(GraphError::OverlappingSets(a.to_string()));
                }
            }
        }
        let xs = self.resolve_set(x)?;
        let ys = self.resolve_set(y)?;
        let zs = self.resolve_set(z)?;

        let mut in_z = vec![false; self.len()];
        for &v in &zs {
            in_z[v] = true;
        }
        let mut in_y = vec![false; self.len()];
        for &v in &ys {
            in_y[v] = true;
        }
        // Colliders pass the ball upward exactly when they lie in An*(Z).
        let an_z = self.ancestral_mask(&zs);

        // State: (node, arrived-from-parent). Sources start as if arriving
        // from a child, which lets them emit in both directions.
        const UP: usize = 0;
        const DOWN: usize = 1;
        let mut visited = vec![[false; 2]; self.len()];
        let mut queue: VecDeque<(usize, usize)> = xs.iter().map(|&v| (v, UP)).collect();

        while let Some((v, dir)) = queue.pop_front() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if in_y[v] {
                return Ok(false);
            }
            match dir {
                UP => {
                    if !in_z[v] {
                        for &p in self.parents_idx(v) {
                            queue.push_back((p, UP));
                        }
                        for &c in self.children_idx(v) {
                            queue.push_back((c, DOWN));
                        }
                    }
                }
                _ => {
                    if !in_z[v] {
                        for &c in self.children_idx(v) {
                            queue.push_back((c, DOWN));
                        }
                    }
                    if an_z[v] {
                        for &p in self.parents_idx(v) {
                            queue.push_back((p, UP));
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::super::NodeRole;
    use super::*;

    fn dag(nodes: &[&str], edges: &[(&str, &str)]) -> CausalDag {
        CausalDag::new(
            nodes
                .iter()
                .map(|n| (n.to_string(), NodeRole::Rcp))
                .collect(),
            edges
                .iter()
                .map(|(f, t)| (f.to_string(), t.to_string()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn chain_blocked_by_middle() {
        let g = dag(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        assert!(g.d_separated(&["a"], &["c"], &["b"]).unwrap());
        assert!(!g.d_separated(&["a"], &["c"], &[]).unwrap());
    }

    #[test]
    fn collider_blocks_until_conditioned() {
        let g = dag(&["a", "b", "c"], &[("a", "b"), ("c", "b")]);
        assert!(g.d_separated(&["a"], &["c"], &[]).unwrap());
        assert!(!g.d_separated(&["a"], &["c"], &["b"]).unwrap());
    }

    #[test]
    fn fork_blocked_by_root() {
        let g = dag(&["a", "b", "c"], &[("b", "a"), ("b", "c")]);
        assert!(g.d_separated(&["a"], &["c"], &["b"]).unwrap());
        assert!(!g.d_separated(&["a"], &["c"], &[]).unwrap());
    }

    #[test]
    fn conditioned_collider_descendant_opens_path() {
        let g = dag(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("c", "b"), ("b", "d")],
        );
        assert!(!g.d_separated(&["a"], &["c"], &["d"]).unwrap());
    }

    #[test]
    fn overlapping_sets_rejected() {
        let g = dag(&["a", "b"], &[("a", "b")]);
        assert!(matches!(
            g.d_separated(&["a"], &["b"], &["a"]),
            Err(GraphError::OverlappingSets(_))
        ));
    }

    #[test]
    fn unknown_node_rejected() {
        let g = dag(&["a", "b"], &[("a", "b")]);
        assert!(matches!(
            g.d_separated(&["a"], &["zz"], &[]),
            Err(GraphError::UnknownNode(_))
        ));
    }
}
