//! Reverse Cuthill–McKee ordering to keep envelope factors narrow.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::scalar::Field;

/// Symmetric adjacency lists of the pattern of `a` (diagonal dropped).
fn adjacency<S: Field>(a: &CsrMatrix<S>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// BFS level structure from `root`, restricted to unvisited nodes.
fn levels(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = blocked.to_vec();
    seen[root] = true;
    let mut out = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &u in out.last().unwrap() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, blocked: &[bool]) -> usize {
    let mut root = start;
    let mut depth = levels(adj, root, blocked).len();
    loop {
        let lv = levels(adj, root, blocked);
        let candidate = *lv
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| adj[v].len())
            .unwrap();
        let d = levels(adj, candidate, blocked).len();
        if d <= depth {
            return root;
        }
        depth = d;
        root = candidate;
    }
}

/// Permutation `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee<S: Field>(a: &CsrMatrix<S>) -> Vec<usize> {
    let n = a.nrows();
    let adj = adjacency(a);
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(&adj, seed, &visited);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| adj[v].len());
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcm_is_a_permutation_and_shrinks_bandwidth() {
        // path graph 0-5-1-4-2-3 scrambled in the natural numbering
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let mut t = Vec::new();
        for i in 0..6 {
            t.push((i, i, 2.0));
        }
        for &(i, j) in &edges {
            t.push((i, j, -1.0));
            t.push((j, i, -1.0));
        }
        let a = CsrMatrix::from_triplets(6, 6, t);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        let p = a.permute_symmetric(&perm);
        let bw = p.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap();
        assert_eq!(bw, 1);
    }
}
