//! Fill-reducing ordering by graph nested dissection with level-structure
//! separators (George's automatic nested dissection).

use std::collections::VecDeque;

/// Subgraphs at or below this size are ordered as they come.
const LEAF_SIZE: usize = 48;

/// Adjacency lists of an undirected graph without self loops.
pub struct Graph {
    pub adj_ptr: Vec<usize>,
    pub adj: Vec<usize>,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.adj_ptr.len() - 1
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]]
    }
}

/// Returns `perm` with `perm[new] = old`.
pub fn nested_dissection(graph: &Graph) -> Vec<usize> {
    let n = graph.n();
    let mut state = State {
        graph,
        label: vec![0; n],
        next_label: 1,
        level: vec![usize::MAX; n],
        order: Vec::with_capacity(n),
    };
    let all: Vec<usize> = (0..n).collect();
    state.dissect(all, 0);
    debug_assert_eq!(state.order.len(), n);
    state.order
}

struct State<'a> {
    graph: &'a Graph,
    // Vertices of the active subproblem share a label.
    label: Vec<usize>,
    next_label: usize,
    level: Vec<usize>,
    order: Vec<usize>,
}

impl State<'_> {
    fn fresh_label(&mut self, nodes: &[usize]) -> usize {
        let l = self.next_label;
        self.next_label += 1;
        for &v in nodes {
            self.label[v] = l;
        }
        l
    }

    fn dissect(&mut self, nodes: Vec<usize>, depth: usize) {
        if nodes.len() <= LEAF_SIZE || depth > 64 {
            self.order.extend_from_slice(&nodes);
            return;
        }
        let lab = self.fresh_label(&nodes);
        let components = self.components(&nodes, lab);
        if components.len() > 1 {
            for comp in components {
                self.dissect(comp, depth + 1);
            }
            return;
        }
        let start = self.pseudo_peripheral(nodes[0], lab);
        let levels = self.level_structure(start, lab);
        let total = nodes.len();
        if levels.len() < 3 {
            self.reset_levels(&levels);
            self.order.extend_from_slice(&nodes);
            return;
        }
        let mut acc = 0;
        let mut mid = 1;
        for (k, lv) in levels.iter().enumerate() {
            acc += lv.len();
            if 2 * acc >= total {
                mid = k;
                break;
            }
        }
        let mid = mid.clamp(1, levels.len() - 2);
        // Level `mid` separates; members with no neighbor in the next level can join the near side.
        let mut part_a: Vec<usize> = levels[..mid].iter().flatten().copied().collect();
        let mut separator = Vec::with_capacity(levels[mid].len());
        for &v in &levels[mid] {
            let touches_far = self
                .graph
                .neighbors(v)
                .iter()
                .any(|&w| self.label[w] == lab && self.level[w] == mid + 1);
            if touches_far {
                separator.push(v);
            } else {
                part_a.push(v);
            }
        }
        let part_b: Vec<usize> = levels[mid + 1..].iter().flatten().copied().collect();
        self.reset_levels(&levels);
        self.dissect(part_a, depth + 1);
        self.dissect(part_b, depth + 1);
        self.order.extend_from_slice(&separator);
    }

    fn components(&mut self, nodes: &[usize], lab: usize) -> Vec<Vec<usize>> {
        let mut comps = Vec::new();
        let mut queue = VecDeque::new();
        for &s in nodes {
            if self.level[s] == usize::MAX - 1 {
                continue;
            }
            let mut comp = vec![s];
            self.level[s] = usize::MAX - 1;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &w in self.graph.neighbors(v) {
                    if self.label[w] == lab && self.level[w] != usize::MAX - 1 {
                        self.level[w] = usize::MAX - 1;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comps.push(comp);
        }
        for &v in nodes {
            self.level[v] = usize::MAX;
        }
        comps
    }

    fn level_structure(&mut self, start: usize, lab: usize) -> Vec<Vec<usize>> {
        let mut levels = vec![vec![start]];
        self.level[start] = 0;
        loop {
            let k = levels.len() - 1;
            let mut next = Vec::new();
            for &v in &levels[k] {
                for &w in self.graph.neighbors(v) {
                    if self.label[w] == lab && self.level[w] == usize::MAX {
                        self.level[w] = k + 1;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }

    fn reset_levels(&mut self, levels: &[Vec<usize>]) {
        for &v in levels.iter().flatten() {
            self.level[v] = usize::MAX;
        }
    }

    fn pseudo_peripheral(&mut self, seed: usize, lab: usize) -> usize {
        let mut start = seed;
        let mut levels = self.level_structure(start, lab);
        for _ in 0..8 {
            let candidate = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| (self.graph.neighbors(v).iter().filter(|&&w| self.label[w] == lab).count(), v))
                .unwrap();
            self.reset_levels(&levels);
            let trial = self.level_structure(candidate, lab);
            if trial.len() > levels.len() {
                start = candidate;
                levels = trial;
            } else {
                self.reset_levels(&trial);
                return start;
            }
        }
        self.reset_levels(&levels);
        start
    }
}
