//! Exhaustive backdoor adjustment-set search. Node counts stay small here,
//! so completeness wins over asymptotics.

use super::{CausalDag, GraphError};

/// All minimal valid adjustment sets for (`treatment`, `outcome`) with size
/// at most `max_size`, ordered by ascending size then lexicographically.
///
/// A set `Z` is valid when (i) it contains no descendant of the treatment and
/// (ii) it d-separates treatment from outcome in the graph with the
/// treatment's outgoing edges removed. A valid set is minimal when no valid
/// proper subset exists; if the empty set is valid, it is the unique minimum.
pub fn backdoor_sets(
    dag: &CausalDag,
    treatment: &str,
    outcome: &str,
    max_size: usize,
) -> Result<Vec<Vec<String>>, GraphError> {
    let t = dag.resolve(treatment)?;
    let y = dag.resolve(outcome)?;
    if t == y {
        return Err(GraphError::SameNode(treatment.to_string()));
    }

    let descendants = dag.descendant_mask(t);
    let cut = dag.without_outgoing(t);

    // Candidates in name order; descendants of the treatment can never
    // appear in a valid set.
    let mut candidates: Vec<usize> = (0..dag.len())
        .filter(|&v| v != t && v != y && !descendants[v])
        .collect();
    candidates.sort_by(|&a, &b| dag.name(a).cmp(dag.name(b)));

    let mut minimal: Vec<Vec<usize>> = Vec::new();
    let mut combo: Vec<usize> = Vec::new();
    for size in 0..=max_size.min(candidates.len()) {
        combinations(&candidates, size, 0, &mut combo, &mut |set| {
            if minimal
                .iter()
                .any(|m| m.iter().all(|v| set.contains(v)))
            {
                return Ok(());
            }
            let z: Vec<&str> = set.iter().map(|&v| dag.name(v)).collect();
            if cut.d_separated(&[dag.name(t)], &[dag.name(y)], &z)? {
                minimal.push(set.to_vec());
            }
            Ok(())
        })?;
    }

    Ok(minimal
        .into_iter()
        .map(|set| set.into_iter().map(|v| dag.name(v).to_string()).collect())
        .collect())
}

fn combinations<E>(
    pool: &[usize],
    size: usize,
    start: usize,
    combo: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> Result<(), E>,
) -> Result<(), E> {
    if combo.len() == size {
        return visit(combo);
    }
    let remaining = size - combo.len();
    for i in start..=pool.len().saturating_sub(remaining) {
        combo.push(pool[i]);
        combinations(pool, size, i + 1, combo, visit)?;
        combo.pop();
    }
    Ok(())
}
