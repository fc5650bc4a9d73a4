//! Fill-reducing column ordering.

use std::collections::BTreeSet;

use super::CscMatrix;

fn merge_into(target: &mut Vec<usize>, extra: &[usize], skip: usize) {
    let mut out = Vec::with_capacity(target.len() + extra.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() || j < extra.len() {
        let next = match (target.get(i), extra.get(j)) {
            (Some(&a), Some(&b)) if a == b => {
                i += 1;
                j += 1;
                a
            }
            (Some(&a), Some(&b)) if a < b => {
                i += 1;
                a
            }
            (Some(_), Some(&b)) => {
                j += 1;
                b
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (None, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        if next != skip {
            out.push(next);
        }
    }
    *target = out;
}

/// Minimum-degree ordering on the pattern of `A + Aᵀ`.
///
/// Ties go to the lower index, so the result depends only on the pattern.
/// Returns `order` with `order[k]` the k-th column to eliminate.
pub fn minimum_degree(a: &CscMatrix) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for p in a.col_ptr[j]..a.col_ptr[j + 1] {
            let i = a.row_idx[p];
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        eliminated[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].retain(|&w| w != v && !eliminated[w]);
            merge_into(&mut adj[u], &nbrs, u);
            queue.insert((adj[u].len(), u));
        }
    }
    order
}
