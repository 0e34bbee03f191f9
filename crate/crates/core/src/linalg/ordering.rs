//! Fill-reducing ordering.
//!
//! Approximate minimum degree on the quotient graph: eliminated pivots become
//! elements, variables adjacent to an element are reached through it instead
//! of through explicit fill edges, and the external degree of each variable is
//! bounded from above using the set-difference sizes `|L_e \ L_p|`. No
//! supervariable detection or mass elimination is done, which is adequate for
//! network-structured KKT matrices.

use std::collections::BTreeSet;

use super::csc::CscMatrix;

/// Symmetric adjacency (diagonal excluded) of a structurally symmetric matrix
/// stored either fully or as its lower triangle.
pub(crate) fn adjacency(a: &CscMatrix) -> Vec<Vec<usize>> {
    let n = a.ncols;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for &i in a.column(j).0 {
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
    adj
}

/// Approximate-minimum-degree permutation. `perm[k]` is the original index of
/// the `k`-th pivot. Ties are broken by the smallest index, so the result is
/// deterministic.
pub fn fill_reducing_ordering(a: &CscMatrix) -> Vec<usize> {
    assert_eq!(a.nrows, a.ncols, "ordering needs a square matrix");
    let n = a.ncols;
    let mut vars = adjacency(a);
    let mut elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut absorbed = vec![false; n];
    let mut eliminated = vec![false; n];
    let mut degree: Vec<usize> = vars.iter().map(Vec::len).collect();
    let mut heap: BTreeSet<(usize, usize)> = (0..n).map(|i| (degree[i], i)).collect();

    let mut mark = vec![usize::MAX; n];
    let mut wmark = vec![usize::MAX; n];
    let mut w = vec![0usize; n];
    let mut perm = Vec::with_capacity(n);

    for step in 0..n {
        let (_, p) = heap.pop_first().expect("heap holds every uneliminated variable");
        perm.push(p);
        eliminated[p] = true;

        // New element: every live variable reachable from p.
        let mut lp = Vec::new();
        mark[p] = step;
        for &i in &vars[p] {
            if !eliminated[i] && mark[i] != step {
                mark[i] = step;
                lp.push(i);
            }
        }
        for e in std::mem::take(&mut elems[p]) {
            if absorbed[e] {
                continue;
            }
            for &i in &members[e] {
                if !eliminated[i] && mark[i] != step {
                    mark[i] = step;
                    lp.push(i);
                }
            }
            absorbed[e] = true;
            members[e] = Vec::new();
        }
        lp.sort_unstable();
        vars[p] = Vec::new();

        for &i in &lp {
            heap.remove(&(degree[i], i));
            elems[i].retain(|&e| !absorbed[e]);
            elems[i].push(p);
            vars[i].retain(|&j| !eliminated[j] && mark[j] != step);
        }

        // |L_e \ L_p| for every element touching L_p.
        for &i in &lp {
            for &e in &elems[i] {
                if e == p {
                    continue;
                }
                if wmark[e] != step {
                    wmark[e] = step;
                    w[e] = members[e].len();
                }
                w[e] -= 1;
            }
        }
        let remaining = n - step - 1;
        let external = lp.len().saturating_sub(1);
        for &i in &lp {
            // Elements wholly inside L_p are redundant with p.
            elems[i].retain(|&e| e == p || w[e] != 0);
            let approx = vars[i].len() + external + elems[i].iter().filter(|&&e| e != p).map(|&e| w[e]).sum::<usize>();
            let d = approx.min(remaining).min(degree[i] + external);
            degree[i] = d;
            heap.insert((d, i));
        }
        for &i in &lp {
            for &e in &elems[i] {
                if e != p && w[e] == 0 && !absorbed[e] {
                    absorbed[e] = true;
                    members[e] = Vec::new();
                }
            }
        }
        members[p] = lp;
    }
    perm
}

/// Inverse of a permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &i) in perm.iter().enumerate() {
        inv[i] = k;
    }
    inv
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&i| i < perm.len() && !std::mem::replace(&mut seen[i], true))
}
