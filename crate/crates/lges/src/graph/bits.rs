//! Bitmask mirror of the edit-then-recomplete pipeline for graphs with at
//! most 64 nodes. One u64 row per node holds each adjacency kind; the whole
//! graph lives in fixed stack arrays so candidate evaluation never allocates.
//!
//! Completion maps every consistent extension of a class to the same CPDAG,
//! so this mirror reproduces exactly the graph the Pdag-based path builds;
//! callers depend on bit-for-bit equal validity verdicts and score inputs.

use super::{NodeId, NodeSet, Pdag};

#[derive(Clone, Copy)]
pub(crate) struct BitPdag {
    p: usize,
    pa: [u64; 64],
    ch: [u64; 64],
    ne: [u64; 64],
}

#[inline]
fn bit(v: NodeId) -> u64 {
    1u64 << v
}

/// Ascending iteration over the set bits of a mask.
#[inline]
pub(crate) fn bits(mut m: u64) -> impl Iterator<Item = NodeId> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let v = m.trailing_zeros() as NodeId;
        m &= m - 1;
        Some(v)
    })
}

pub(crate) fn mask_to_nodeset(m: u64) -> NodeSet {
    let mut out = NodeSet::new();
    for v in bits(m) {
        out.insert(v);
    }
    out
}

pub(crate) fn nodeset_to_mask(s: &NodeSet) -> u64 {
    let mut m = 0u64;
    for v in s.iter() {
        m |= bit(v);
    }
    m
}

impl BitPdag {
    /// `None` when the graph has more nodes than a mask row can hold.
    pub(crate) fn from_pdag(e: &Pdag) -> Option<BitPdag> {
        let p = e.node_count();
        if p > 64 {
            return None;
        }
        let mut g = BitPdag { p, pa: [0; 64], ch: [0; 64], ne: [0; 64] };
        for v in 0..p as NodeId {
            for u in e.parents_of(v).iter() {
                g.pa[v as usize] |= bit(u);
                g.ch[u as usize] |= bit(v);
            }
            for u in e.neighbors_of(v).iter() {
                g.ne[v as usize] |= bit(u);
            }
        }
        Some(g)
    }

    #[inline]
    pub(crate) fn adj(&self, v: NodeId) -> u64 {
        self.pa[v as usize] | self.ch[v as usize] | self.ne[v as usize]
    }

    #[inline]
    pub(crate) fn pa(&self, v: NodeId) -> u64 {
        self.pa[v as usize]
    }

    #[inline]
    pub(crate) fn ne(&self, v: NodeId) -> u64 {
        self.ne[v as usize]
    }

    #[inline]
    pub(crate) fn has_undirected(&self, u: NodeId, v: NodeId) -> bool {
        self.ne[u as usize] & bit(v) != 0
    }

    #[inline]
    pub(crate) fn has_directed(&self, u: NodeId, v: NodeId) -> bool {
        self.ch[u as usize] & bit(v) != 0
    }

    pub(crate) fn remove_edge(&mut self, u: NodeId, v: NodeId) {
        self.pa[u as usize] &= !bit(v);
        self.pa[v as usize] &= !bit(u);
        self.ch[u as usize] &= !bit(v);
        self.ch[v as usize] &= !bit(u);
        self.ne[u as usize] &= !bit(v);
        self.ne[v as usize] &= !bit(u);
    }

    /// Turns the undirected edge u -- v into u -> v.
    pub(crate) fn orient(&mut self, u: NodeId, v: NodeId) {
        self.ne[u as usize] &= !bit(v);
        self.ne[v as usize] &= !bit(u);
        self.pa[v as usize] |= bit(u);
        self.ch[u as usize] |= bit(v);
    }

    /// True when every two distinct members of `m` are adjacent.
    pub(crate) fn is_clique(&self, m: u64) -> bool {
        for w in bits(m) {
            if m & !self.adj(w) & !bit(w) != 0 {
                return false;
            }
        }
        true
    }

    /// Mirror of `Pdag::semi_directed_blocked` on masks.
    pub(crate) fn semi_directed_blocked(&self, y: NodeId, x: NodeId, blocker: u64) -> bool {
        if blocker & (bit(y) | bit(x)) != 0 {
            return true;
        }
        let mut seen = bit(y);
        let mut frontier = bit(y);
        while frontier != 0 {
            if frontier & bit(x) != 0 {
                return false;
            }
            let mut next = 0u64;
            for u in bits(frontier) {
                next |= self.ch[u as usize] | self.ne[u as usize];
            }
            frontier = next & !seen & !blocker;
            seen |= frontier;
        }
        true
    }

    /// Dor-Tarsi extension in place. `false` when no consistent extension
    /// exists or the directed part is cyclic, the cases where the Pdag path
    /// returns an error.
    pub(crate) fn extend_to_dag(&mut self) -> bool {
        let p = self.p;
        let mut work = *self;
        let mut alive = if p == 0 { 0 } else { !0u64 >> (64 - p) };
        let mut und_left: u32 = self.ne[..p].iter().map(|m| m.count_ones()).sum::<u32>() / 2;
        let mut stack = [0 as NodeId; 64];
        let mut top = 0usize;
        for v in (0..p as NodeId).rev() {
            stack[top] = v;
            top += 1;
        }
        let mut on_stack = alive;

        while und_left > 0 {
            let v = loop {
                if top == 0 {
                    return false;
                }
                top -= 1;
                let v = stack[top];
                on_stack &= !bit(v);
                if alive & bit(v) != 0 && work.removable_sink(v) {
                    break v;
                }
            };
            let ne_v = work.ne[v as usize];
            und_left -= ne_v.count_ones();
            for w in bits(ne_v) {
                self.orient(w, v);
            }
            let adj_v = work.adj(v);
            for w in bits(adj_v) {
                work.remove_edge(v, w);
            }
            alive &= !bit(v);
            // on_stack keeps entries distinct, so the depth never exceeds p
            let refresh = adj_v & alive & !on_stack;
            on_stack |= refresh;
            for w in bits(refresh) {
                stack[top] = w;
                top += 1;
            }
        }

        // Kahn pass over the fully directed result rejects cycles that were
        // present in the directed part from the start.
        let mut indeg = [0u32; 64];
        let mut ready = [0 as NodeId; 64];
        let mut rtop = 0usize;
        for v in 0..p {
            indeg[v] = self.pa[v].count_ones();
            if indeg[v] == 0 {
                ready[rtop] = v as NodeId;
                rtop += 1;
            }
        }
        let mut seen = 0usize;
        while rtop > 0 {
            rtop -= 1;
            let v = ready[rtop];
            seen += 1;
            for w in bits(self.ch[v as usize]) {
                indeg[w as usize] -= 1;
                if indeg[w as usize] == 0 {
                    ready[rtop] = w;
                    rtop += 1;
                }
            }
        }
        seen == p
    }

    fn removable_sink(&self, v: NodeId) -> bool {
        if self.ch[v as usize] != 0 {
            return false;
        }
        let adj_v = self.adj(v);
        for w in bits(self.ne[v as usize]) {
            if adj_v & !bit(w) & !self.adj(w) != 0 {
                return false;
            }
        }
        true
    }

    /// Replaces a DAG with the CPDAG of its class: skeleton, v-structures,
    /// Meek closure.
    pub(crate) fn recomplete_from_dag(&mut self) {
        let p = self.p;
        let dag_pa = self.pa;
        let dag_ch = self.ch;
        for v in 0..p {
            self.ne[v] = dag_pa[v] | dag_ch[v];
            self.pa[v] = 0;
            self.ch[v] = 0;
        }
        let adj = |a: NodeId| dag_pa[a as usize] | dag_ch[a as usize];
        for z in 0..p as NodeId {
            let pa_z = dag_pa[z as usize];
            let mut compelled = 0u64;
            for a in bits(pa_z) {
                let far = pa_z & !adj(a) & !bit(a);
                if far != 0 {
                    compelled |= far | bit(a);
                }
            }
            for a in bits(compelled) {
                if self.has_undirected(a, z) {
                    self.orient(a, z);
                }
            }
        }
        self.meek_close();
    }

    /// Worklist Meek closure; same fixpoint as the Pdag implementation.
    pub(crate) fn meek_close(&mut self) {
        let p = self.p;
        let mut queue: Vec<(NodeId, NodeId)> = Vec::with_capacity(4 * p);
        let mut queued = [0u64; 64];
        for u in 0..p as NodeId {
            let above = if u >= 63 { 0 } else { self.ne[u as usize] >> (u + 1) << (u + 1) };
            for v in bits(above) {
                queued[u as usize] |= bit(v);
                queue.push((u, v));
            }
        }
        let mut head = 0usize;
        while head < queue.len() {
            let (a, b) = queue[head];
            head += 1;
            queued[a as usize] &= !bit(b);
            if !self.has_undirected(a, b) {
                continue;
            }
            let (t, h) = if self.rule_orients(a, b) {
                (a, b)
            } else if self.rule_orients(b, a) {
                (b, a)
            } else {
                continue;
            };
            self.orient(t, h);
            for x in [t, h] {
                for w in bits(self.adj(x) | bit(x)) {
                    for z in bits(self.ne[w as usize]) {
                        let (lo, hi) = (w.min(z), w.max(z));
                        if queued[lo as usize] & bit(hi) == 0 {
                            queued[lo as usize] |= bit(hi);
                            queue.push((lo, hi));
                        }
                    }
                }
            }
        }
    }

    /// True when some Meek rule orients `u -- v` as `u -> v`.
    fn rule_orients(&self, u: NodeId, v: NodeId) -> bool {
        // R1: a -> u, a not adjacent to v
        if self.pa[u as usize] & !self.adj(v) & !bit(v) != 0 {
            return true;
        }
        // R2: u -> w -> v
        if self.ch[u as usize] & self.pa[v as usize] != 0 {
            return true;
        }
        // R3: u -- w -> v and u -- z -> v with w, z non-adjacent
        let m = self.ne[u as usize] & self.pa[v as usize];
        for w in bits(m) {
            if m & !self.adj(w) & !bit(w) != 0 {
                return true;
            }
        }
        // R4: u -- w -> z -> v with w non-adjacent to v and u adjacent to z
        for w in bits(self.ne[u as usize] & !self.adj(v) & !bit(v)) {
            if self.ch[w as usize] & self.pa[v as usize] & self.adj(u) != 0 {
                return true;
            }
        }
        false
    }
}
