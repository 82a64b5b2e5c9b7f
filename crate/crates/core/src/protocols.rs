//! Optimal protocols: the unitary minimizing `<A>` over the orbit of
//! `rho_0` is a permutation that makes the populations passive w.r.t. `A`.
//!
//! Two constructions are provided. `full_sort` rearranges populations into
//! a globally descending sequence along ascending `A`. `partial_sort`
//! reaches the same minimum but only moves populations *between*
//! `A`-degenerate blocks, leaving each block's interior untouched — fewer
//! transpositions, a different final environment state, identical `<A>`.

use crate::error::{Error, Result};
use crate::qstate::{CMat, C64};

/// A permutation protocol. `perm[i]` is the destination slot of source
/// level `i`; `transpositions` counts the two-level swaps needed
/// (`n - #cycles`).
#[derive(Debug, Clone)]
pub struct Protocol {
    pub perm: Vec<usize>,
    pub transpositions: usize,
    pub final_populations: Vec<f64>,
    pub delta_a: f64,
}

fn cycle_count(perm: &[usize]) -> usize {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = perm[k];
        }
    }
    cycles
}

/// Shortest directed cycle (as a block list) in the residual flow graph;
/// BFS per start node, deterministic tie-breaks toward small indices.
fn shortest_block_cycle(edges: &[(usize, usize)], nblocks: usize) -> Option<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
    for &(s, t) in edges {
        adj[s].push(t);
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let mut best: Option<Vec<usize>> = None;
    for start in 0..nblocks {
        if adj[start].is_empty() {
            continue;
        }
        let mut parent = vec![usize::MAX; nblocks];
        let mut dist = vec![usize::MAX; nblocks];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        'bfs: while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if v == start {
                    let mut path = vec![u];
                    let mut w = u;
                    while w != start {
                        w = parent[w];
                        path.push(w);
                    }
                    path.reverse();
                    if best.as_ref().is_none_or(|b| path.len() < b.len()) {
                        best = Some(path);
                    }
                    break 'bfs;
                }
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
    }
    best
}

fn build(perm: Vec<usize>, p: &[f64], a: &[f64]) -> Protocol {
    let n = p.len();
    let mut final_populations = vec![0.0; n];
    for (src, &dst) in perm.iter().enumerate() {
        final_populations[dst] = p[src];
    }
    let a0: f64 = p.iter().zip(a).map(|(x, y)| x * y).sum();
    let af: f64 = final_populations.iter().zip(a).map(|(x, y)| x * y).sum();
    Protocol {
        transpositions: n - cycle_count(&perm),
        perm,
        final_populations,
        delta_a: af - a0,
    }
}

/// Full sorting protocol: populations in descending order along slots
/// sorted by ascending `A` value (stable index tie-breaks throughout).
pub fn full_sort(p: &[f64], a: &[f64]) -> Result<Protocol> {
    let n = p.len();
    if a.len() != n {
        return Err(Error::Dimension("population/observable length mismatch".into()));
    }
    let mut slots: Vec<usize> = (0..n).collect();
    slots.sort_by(|&i, &j| a[i].partial_cmp(&a[j]).unwrap().then(i.cmp(&j)));
    let mut sources: Vec<usize> = (0..n).collect();
    sources.sort_by(|&i, &j| p[j].partial_cmp(&p[i]).unwrap().then(i.cmp(&j)));
    let mut perm = vec![0usize; n];
    for (rank, &src) in sources.iter().enumerate() {
        perm[src] = slots[rank];
    }
    Ok(build(perm, p, a))
}

/// Partial sorting protocol: same minimal `<A>` as [`full_sort`], moving
/// populations only across `A`-blocks.
///
/// Blocks are maximal groups of slots with equal `A` (within `tol` on the
/// sorted values). The globally sorted population sequence fixes which
/// multiset each block must hold; populations already inside their target
/// block stay put, and the displaced ones are matched to vacant slots in
/// index order.
pub fn partial_sort(p: &[f64], a: &[f64], tol: f64) -> Result<Protocol> {
    let n = p.len();
    if a.len() != n {
        return Err(Error::Dimension("population/observable length mismatch".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].partial_cmp(&a[j]).unwrap().then(i.cmp(&j)));
    // Block id per slot, in ascending-A order.
    let mut block_of = vec![0usize; n];
    let mut nblocks = 0usize;
    for w in 0..n {
        if w > 0 && (a[order[w]] - a[order[w - 1]]).abs() > tol {
            nblocks += 1;
        }
        block_of[order[w]] = nblocks;
    }
    nblocks += 1;

    // Demanded population multiset per block: descending populations fill
    // blocks in ascending-A order. Values are exact copies of entries of
    // `p`, so bit-level counting is faithful.
    let mut sources: Vec<usize> = (0..n).collect();
    sources.sort_by(|&i, &j| p[j].partial_cmp(&p[i]).unwrap().then(i.cmp(&j)));
    let mut demand: Vec<std::collections::BTreeMap<u64, usize>> = vec![Default::default(); nblocks];
    for (rank, &src) in sources.iter().enumerate() {
        *demand[block_of[order[rank]]].entry(p[src].to_bits()).or_insert(0) += 1;
    }

    // A resident stays whenever its block still demands its value — ties
    // never travel. Whatever remains is a genuine mover, and its slot is
    // the vacancy some other mover will land on.
    let mut perm = vec![usize::MAX; n];
    let mut movers: Vec<usize> = Vec::new();
    for i in 0..n {
        let here = block_of[i];
        match demand[here].get_mut(&p[i].to_bits()) {
            Some(c) if *c > 0 => {
                *c -= 1;
                perm[i] = i;
            }
            _ => movers.push(i),
        }
    }
    // Forced cross-block flow: movers queue up per (from, to) pair, in
    // index order; each one targets the lowest-A block demanding its value.
    let mut flow: std::collections::BTreeMap<(usize, usize), std::collections::VecDeque<usize>> =
        Default::default();
    for &src in &movers {
        let bits = p[src].to_bits();
        let blk = (0..nblocks)
            .find(|&b| demand[b].get(&bits).is_some_and(|&c| c > 0))
            .ok_or_else(|| Error::Numerical("partial sort lost track of a population".into()))?;
        *demand[blk].get_mut(&bits).unwrap() -= 1;
        flow.entry((block_of[src], blk)).or_default().push_back(src);
    }
    // Realize the flow with as few transpositions as possible: reciprocal
    // pairs close as plain swaps, the residual circulation is peeled into
    // shortest directed cycles (exact for up to three blocks, a good
    // heuristic beyond).
    let pairs: Vec<(usize, usize)> = flow.keys().copied().collect();
    for &(s, t) in &pairs {
        if s >= t {
            continue;
        }
        while flow.get(&(s, t)).is_some_and(|q| !q.is_empty())
            && flow.get(&(t, s)).is_some_and(|q| !q.is_empty())
        {
            let m1 = flow.get_mut(&(s, t)).unwrap().pop_front().unwrap();
            let m2 = flow.get_mut(&(t, s)).unwrap().pop_front().unwrap();
            perm[m1] = m2;
            perm[m2] = m1;
        }
    }
    loop {
        let edges: Vec<(usize, usize)> = flow
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(&k, _)| k)
            .collect();
        if edges.is_empty() {
            break;
        }
        let cycle = shortest_block_cycle(&edges, nblocks)
            .ok_or_else(|| Error::Numerical("cross-block flow does not balance".into()))?;
        let hop: Vec<usize> = (0..cycle.len())
            .map(|k| {
                let e = (cycle[k], cycle[(k + 1) % cycle.len()]);
                flow.get_mut(&e).unwrap().pop_front().unwrap()
            })
            .collect();
        for k in 0..hop.len() {
            perm[hop[k]] = hop[(k + 1) % hop.len()];
        }
    }
    Ok(build(perm, p, a))
}

/// Exhaustive minimum of `Delta<A>` over all level permutations
/// (Heap's algorithm); guards against dimensions above 9.
pub fn exhaustive_min_delta_a(p: &[f64], a: &[f64]) -> Result<f64> {
    let n = p.len();
    if n > 9 {
        return Err(Error::Dimension(format!("exhaustive search capped at dim 9, got {n}")));
    }
    let a0: f64 = p.iter().zip(a).map(|(x, y)| x * y).sum();
    let mut arr: Vec<f64> = p.to_vec();
    let mut best = f64::INFINITY;
    let mut c = vec![0usize; n];
    let eval = |arr: &[f64]| -> f64 { arr.iter().zip(a).map(|(x, y)| x * y).sum() };
    best = best.min(eval(&arr));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                arr.swap(0, i);
            } else {
                arr.swap(c[i], i);
            }
            best = best.min(eval(&arr));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best - a0)
}

/// Permutation matrix sending basis state `i` to `perm[i]` (a valid
/// unitary implementing the protocol).
pub fn permutation_unitary(perm: &[usize]) -> CMat {
    let n = perm.len();
    let mut u = CMat::zeros(n, n);
    for (src, &dst) in perm.iter().enumerate() {
        u[(dst, src)] = C64::new(1.0, 0.0);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn full_sort_matches_exhaustive_on_random_instances() {
        let mut rng = crate::qstate::rng_from_seed(17);
        for _ in 0..50 {
            let n = 3 + (rng.random::<u32>() % 5) as usize; // 3..=7
            let mut p: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            let a: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 4.0).round() / 2.0).collect();
            let proto = full_sort(&p, &a).unwrap();
            let brute = exhaustive_min_delta_a(&p, &a).unwrap();
            assert!((proto.delta_a - brute).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn partial_sort_same_minimum_never_more_transpositions() {
        let mut rng = crate::qstate::rng_from_seed(23);
        for _ in 0..200 {
            let n = 4 + (rng.random::<u32>() % 6) as usize; // 4..=9
            let mut p: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            // Degenerate-heavy observables exercise the block logic.
            let a: Vec<f64> = (0..n).map(|_| (rng.random::<u32>() % 3) as f64).collect();
            let full = full_sort(&p, &a).unwrap();
            let part = partial_sort(&p, &a, 1e-12).unwrap();
            assert!((full.delta_a - part.delta_a).abs() < 1e-12);
            assert!(
                part.transpositions <= full.transpositions,
                "partial {} > full {}",
                part.transpositions,
                full.transpositions
            );
        }
    }

    #[test]
    fn depletion_example_partial_strictly_cheaper() {
        // Qutrit system (spacing 1) + two qubits, all thermal at beta = 1;
        // deplete the middle system level: A = |1_S><1_S| x I x I.
        let beta = 1.0;
        let mut p = Vec::new();
        let mut a = Vec::new();
        for s in 0..3 {
            for b1 in 0..2 {
                for b2 in 0..2 {
                    p.push((-beta * (s as f64 + b1 as f64 + b2 as f64)).exp());
                    a.push(if s == 1 { 1.0 } else { 0.0 });
                }
            }
        }
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        let full = full_sort(&p, &a).unwrap();
        let part = partial_sort(&p, &a, 1e-12).unwrap();
        assert!((full.delta_a - part.delta_a).abs() < 1e-15);
        assert_eq!(part.transpositions, 3);
        assert_eq!(full.transpositions, 6);
    }

    #[test]
    fn permutation_unitary_realizes_protocol() {
        let p = [0.1, 0.5, 0.4];
        let a = [0.0, 1.0, 2.0];
        let proto = full_sort(&p, &a).unwrap();
        let u = permutation_unitary(&proto.perm);
        let rho = crate::qstate::Density::from_populations(&p).unwrap();
        let out = rho.evolved(&u).unwrap();
        for (x, y) in out.populations().iter().zip(&proto.final_populations) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
