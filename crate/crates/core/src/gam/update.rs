//! Shallow-tree partitions of a term's bin grid, used as the piecewise-constant
//! shape of each boosting update.

/// Per-cell gradient, hessian and weight sums; `k` outputs per cell.
pub(crate) struct CellStats {
    pub k: usize,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub n: Vec<f64>,
}

impl CellStats {
    pub fn new(cells: usize, k: usize) -> Self {
        Self {
            k,
            g: vec![0.0; cells * k],
            h: vec![0.0; cells * k],
            n: vec![0.0; cells],
        }
    }

    pub fn clear(&mut self) {
        self.g.iter_mut().for_each(|v| *v = 0.0);
        self.h.iter_mut().for_each(|v| *v = 0.0);
        self.n.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Half-open bin range per dimension.
type Region = Vec<(usize, usize)>;

/// Newton score Σ g²/h of one group of sums.
fn score(g: &[f64], h: &[f64]) -> f64 {
    g.iter().zip(h).map(|(g, h)| if *h > 1e-12 { g * g / h } else { 0.0 }).sum()
}

/// Running sums of `k` outputs plus a weight.
#[derive(Clone)]
struct Sums {
    g: Vec<f64>,
    h: Vec<f64>,
    n: f64,
}

impl Sums {
    fn zero(k: usize) -> Self {
        Self {
            g: vec![0.0; k],
            h: vec![0.0; k],
            n: 0.0,
        }
    }

    fn add_cell(&mut self, st: &CellStats, c: usize) {
        let k = st.k;
        for o in 0..k {
            self.g[o] += st.g[c * k + o];
            self.h[o] += st.h[c * k + o];
        }
        self.n += st.n[c];
    }

    fn score(&self) -> f64 {
        score(&self.g, &self.h)
    }
}

/// Marginal sums along one dimension: `bins` slots of `k` outputs.
struct Marginal {
    k: usize,
    g: Vec<f64>,
    h: Vec<f64>,
    n: Vec<f64>,
}

impl Marginal {
    fn zero(bins: usize, k: usize) -> Self {
        Self {
            k,
            g: vec![0.0; bins * k],
            h: vec![0.0; bins * k],
            n: vec![0.0; bins],
        }
    }

    fn add(&mut self, slot: usize, st: &CellStats, c: usize) {
        let k = self.k;
        for o in 0..k {
            self.g[slot * k + o] += st.g[c * k + o];
            self.h[slot * k + o] += st.h[c * k + o];
        }
        self.n[slot] += st.n[c];
    }

    /// Best cut in `lo+1..hi` by the summed children score; `None` when no
    /// cut leaves `min_leaf` weight on both sides.
    fn best_cut(&self, lo: usize, hi: usize, min_leaf: f64) -> Option<(usize, f64)> {
        let k = self.k;
        let mut tg = vec![0.0; k];
        let mut th = vec![0.0; k];
        let mut tn = 0.0;
        for b in lo..hi {
            for o in 0..k {
                tg[o] += self.g[b * k + o];
                th[o] += self.h[b * k + o];
            }
            tn += self.n[b];
        }
        let mut lg = vec![0.0; k];
        let mut lh = vec![0.0; k];
        let mut ln = 0.0;
        let mut best: Option<(usize, f64)> = None;
        for cut in lo + 1..hi {
            let b = cut - 1;
            for o in 0..k {
                lg[o] += self.g[b * k + o];
                lh[o] += self.h[b * k + o];
            }
            ln += self.n[b];
            if ln < min_leaf || tn - ln < min_leaf {
                continue;
            }
            let rg: Vec<f64> = tg.iter().zip(&lg).map(|(t, l)| t - l).collect();
            let rh: Vec<f64> = th.iter().zip(&lh).map(|(t, l)| t - l).collect();
            let s = score(&lg, &lh) + score(&rg, &rh);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((cut, s));
            }
        }
        best
    }
}

struct Grid<'a> {
    dims: &'a [usize],
    strides: Vec<usize>,
    st: &'a CellStats,
    min_leaf: f64,
}

impl<'a> Grid<'a> {
    fn new(dims: &'a [usize], st: &'a CellStats, min_leaf: f64) -> Self {
        let mut strides = vec![1; dims.len()];
        for d in (0..dims.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        Self {
            dims,
            strides,
            st,
            min_leaf,
        }
    }

    fn full(&self) -> Region {
        self.dims.iter().map(|&n| (0, n)).collect()
    }

    fn for_each_cell(&self, r: &Region, mut f: impl FnMut(usize, &[usize])) {
        if r.iter().any(|(lo, hi)| lo >= hi) {
            return;
        }
        let mut idx: Vec<usize> = r.iter().map(|x| x.0).collect();
        loop {
            let cell = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
            f(cell, &idx);
            let mut d = idx.len();
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < r[d].1 {
                    break;
                }
                idx[d] = r[d].0;
            }
        }
    }

    fn sums(&self, r: &Region) -> Sums {
        let mut s = Sums::zero(self.st.k);
        self.for_each_cell(r, |c, _| s.add_cell(self.st, c));
        s
    }

    fn marginal(&self, r: &Region, d: usize) -> Marginal {
        let mut m = Marginal::zero(self.dims[d], self.st.k);
        self.for_each_cell(r, |c, idx| m.add(idx[d], self.st, c));
        m
    }

    /// Best (dimension, cut, children score) among `allowed` dimensions.
    fn best_split(&self, r: &Region, allowed: &[usize]) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for &d in allowed {
            if let Some((cut, s)) = self.marginal(r, d).best_cut(r[d].0, r[d].1, self.min_leaf) {
                if best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((d, cut, s));
                }
            }
        }
        best
    }

    /// Root split judged by the score after also splitting both children
    /// once (along any other dimension).
    fn lookahead_root(&self, r: &Region) -> Option<(usize, usize)> {
        let k = self.st.k;
        let nd = self.dims.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for d in 0..nd {
            let others: Vec<usize> = (0..nd).filter(|&e| e != d).collect();
            // joint[e][i_d][i_e], accumulated then prefix-summed over i_d.
            let mut joint: Vec<Marginal> = others
                .iter()
                .map(|&e| Marginal::zero(self.dims[d] * self.dims[e], k))
                .collect();
            let mut along = Marginal::zero(self.dims[d], k);
            self.for_each_cell(r, |c, idx| {
                along.add(idx[d], self.st, c);
                for (j, &e) in others.iter().enumerate() {
                    joint[j].add(idx[d] * self.dims[e] + idx[e], self.st, c);
                }
            });
            let (lo, hi) = r[d];
            // prefix[j][i_d] holds the sums over slabs lo..i_d, laid out like a Marginal.
            let prefix: Vec<Marginal> = others
                .iter()
                .enumerate()
                .map(|(j, &e)| {
                    let ne = self.dims[e];
                    let mut p = Marginal::zero((self.dims[d] + 1) * ne, k);
                    for i_d in lo..hi {
                        for i_e in 0..ne {
                            let (src, prev, dst) = (i_d * ne + i_e, i_d * ne + i_e, (i_d + 1) * ne + i_e);
                            for o in 0..k {
                                p.g[dst * k + o] = p.g[prev * k + o] + joint[j].g[src * k + o];
                                p.h[dst * k + o] = p.h[prev * k + o] + joint[j].h[src * k + o];
                            }
                            p.n[dst] = p.n[prev] + joint[j].n[src];
                        }
                    }
                    p
                })
                .collect();
            let mut left_n = 0.0;
            let total_n: f64 = (lo..hi).map(|b| along.n[b]).sum();
            for cut in lo + 1..hi {
                left_n += along.n[cut - 1];
                if left_n < self.min_leaf || total_n - left_n < self.min_leaf {
                    continue;
                }
                let mut total = 0.0;
                for (from, to) in [(lo, cut), (cut, hi)] {
                    let mut side_best: Option<f64> = None;
                    let mut leaf = 0.0;
                    for (j, &e) in others.iter().enumerate() {
                        let ne = self.dims[e];
                        let p = &prefix[j];
                        let mut m = Marginal::zero(ne, k);
                        for i_e in r[e].0..r[e].1 {
                            let (a, b) = (to * ne + i_e, from * ne + i_e);
                            for o in 0..k {
                                m.g[i_e * k + o] = p.g[a * k + o] - p.g[b * k + o];
                                m.h[i_e * k + o] = p.h[a * k + o] - p.h[b * k + o];
                            }
                            m.n[i_e] = p.n[a] - p.n[b];
                        }
                        if j == 0 {
                            let g: Vec<f64> = (0..k).map(|o| (0..ne).map(|b| m.g[b * k + o]).sum()).collect();
                            let h: Vec<f64> = (0..k).map(|o| (0..ne).map(|b| m.h[b * k + o]).sum()).collect();
                            leaf = score(&g, &h);
                        }
                        if let Some((_, s)) = m.best_cut(r[e].0, r[e].1, self.min_leaf) {
                            if side_best.is_none_or(|b| s > b) {
                                side_best = Some(s);
                            }
                        }
                    }
                    total += side_best.unwrap_or(leaf);
                }
                if best.is_none_or(|(_, _, b)| total > b) {
                    best = Some((d, cut, total));
                }
            }
        }
        best.map(|(d, c, _)| (d, c))
    }
}

fn split_region(r: &Region, d: usize, cut: usize) -> (Region, Region) {
    let mut a = r.clone();
    let mut b = r.clone();
    a[d].1 = cut;
    b[d].0 = cut;
    (a, b)
}

/// Leaf regions for one boosting step.
///
/// One-dimensional terms grow best-first to at most `max_leaves` leaves and
/// only split on positive gain. Interaction terms grow a full tree of depth
/// equal to their order, using each dimension once per path, so a pure
/// interaction with no marginal signal is still reachable.
pub(crate) fn partition(dims: &[usize], st: &CellStats, min_leaf: f64, max_leaves: usize) -> Vec<Region> {
    let grid = Grid::new(dims, st, min_leaf);
    let root = grid.full();
    if dims.len() == 1 {
        let mut leaves = vec![root];
        while leaves.len() < max_leaves {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, r) in leaves.iter().enumerate() {
                let parent = grid.sums(r).score();
                if let Some((_, cut, s)) = grid.best_split(r, &[0]) {
                    let gain = s - parent;
                    if gain > 1e-12 * parent.abs().max(1e-12) && best.is_none_or(|(_, _, b)| gain > b) {
                        best = Some((i, cut, gain));
                    }
                }
            }
            let Some((i, cut, _)) = best else { break };
            let (a, b) = split_region(&leaves[i], 0, cut);
            leaves[i] = a;
            leaves.insert(i + 1, b);
        }
        return leaves;
    }

    let Some((d, cut)) = grid.lookahead_root(&root) else {
        return vec![root];
    };
    let (a, b) = split_region(&root, d, cut);
    let mut stack: Vec<(Region, Vec<usize>)> = vec![
        (a, (0..dims.len()).filter(|&e| e != d).collect()),
        (b, (0..dims.len()).filter(|&e| e != d).collect()),
    ];
    let mut leaves = Vec::new();
    while let Some((r, unused)) = stack.pop() {
        match (unused.is_empty(), grid.best_split(&r, &unused)) {
            (false, Some((e, c, _))) => {
                let rest: Vec<usize> = unused.iter().copied().filter(|&x| x != e).collect();
                let (x, y) = split_region(&r, e, c);
                stack.push((y, rest.clone()));
                stack.push((x, rest));
            }
            _ => leaves.push(r),
        }
    }
    leaves
}

/// Leaf index of every grid cell.
pub(crate) fn leaf_of_cells(dims: &[usize], leaves: &[Region]) -> Vec<u32> {
    let cells: usize = dims.iter().product();
    let mut out = vec![0u32; cells];
    let dummy = CellStats::new(0, 1);
    let grid = Grid::new(dims, &dummy, 0.0);
    for (l, r) in leaves.iter().enumerate() {
        grid.for_each_cell(r, |c, _| out[c] = l as u32);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(g: &[f64], n_per: f64) -> CellStats {
        CellStats {
            k: 1,
            g: g.to_vec(),
            h: vec![n_per; g.len()],
            n: vec![n_per; g.len()],
        }
    }

    #[test]
    fn step_function_gets_one_cut() {
        let st = stats(&[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0], 5.0);
        let leaves = partition(&[6], &st, 2.0, 3);
        assert_eq!(leaves[0], vec![(0, 3)]);
        assert_eq!(leaves.len(), 2);
    }

    #[test]
    fn zero_gradient_keeps_one_leaf() {
        let st = stats(&[0.0; 8], 5.0);
        assert_eq!(partition(&[8], &st, 2.0, 3).len(), 1);
    }

    #[test]
    fn xor_pair_grid_is_split_fully() {
        // 2x2 XOR residual pattern: no marginal signal at all.
        let st = stats(&[1.0, -1.0, -1.0, 1.0], 10.0);
        let leaves = partition(&[2, 2], &st, 2.0, 3);
        assert_eq!(leaves.len(), 4);
        let ids = leaf_of_cells(&[2, 2], &leaves);
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
    }

    #[test]
    fn pair_lookahead_finds_corner() {
        // Signal only where both coordinates are high.
        let mut g = vec![0.0; 16];
        g[15] = 4.0;
        let st = stats(&g, 3.0);
        let leaves = partition(&[4, 4], &st, 2.0, 3);
        assert!(leaves.contains(&vec![(3, 4), (3, 4)]), "{leaves:?}");
    }
}
