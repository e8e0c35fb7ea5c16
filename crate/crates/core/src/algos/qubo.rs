use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AlgoError;

/// Minimise `x^T Q x + offset` over binary `x`, with `Q` symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    size: usize,
    q: Vec<f64>,
    offset: f64,
}

/// JSON form: `{"size": V, "entries": [[i, j, value], ...], "offset": 0.0}`.
///
/// Off-diagonal entries set both `Q[i][j]` and `Q[j][i]`; listing both
/// triangles is allowed only with equal values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuboFile {
    pub size: usize,
    pub entries: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub offset: f64,
}

impl QuboProblem {
    pub fn from_dense(size: usize, q: Vec<f64>, offset: f64) -> Result<Self, AlgoError> {
        if size == 0 {
            return Err(AlgoError::Structure("QUBO needs at least one variable".into()));
        }
        if q.len() != size * size {
            return Err(AlgoError::Structure(format!("expected {} entries, got {}", size * size, q.len())));
        }
        for i in 0..size {
            for j in 0..i {
                if (q[i * size + j] - q[j * size + i]).abs() > 1e-12 {
                    return Err(AlgoError::Structure(format!("Q not symmetric at ({i},{j})")));
                }
            }
        }
        if q.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(AlgoError::Structure("non-finite QUBO coefficient".into()));
        }
        Ok(QuboProblem { size, q, offset })
    }

    pub fn zeros(size: usize) -> Self {
        QuboProblem { size, q: vec![0.0; size * size], offset: 0.0 }
    }

    pub fn from_file(file: &QuboFile) -> Result<Self, AlgoError> {
        let n = file.size;
        let mut q = vec![0.0; n * n];
        let mut set = vec![false; n * n];
        for &(i, j, v) in &file.entries {
            if i >= n || j >= n {
                return Err(AlgoError::Structure(format!("entry ({i},{j}) outside size {n}")));
            }
            let (a, b) = (i.min(j), i.max(j));
            if set[a * n + b] && q[a * n + b] != v {
                return Err(AlgoError::Structure(format!("conflicting values for ({a},{b})")));
            }
            set[a * n + b] = true;
            q[a * n + b] = v;
            q[b * n + a] = v;
        }
        Self::from_dense(n, q, file.offset)
    }

    /// Upper-triangle entries (including the diagonal) that are nonzero.
    pub fn to_file(&self) -> QuboFile {
        let mut entries = Vec::new();
        for i in 0..self.size {
            for j in i..self.size {
                let v = self.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        QuboFile { size: self.size, entries, offset: self.offset }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.size + j]
    }

    pub fn energy(&self, x: &[u8]) -> f64 {
        assert_eq!(x.len(), self.size);
        let mut e = self.offset;
        for i in (0..self.size).filter(|&i| x[i] != 0) {
            let row = &self.q[i * self.size..(i + 1) * self.size];
            e += row.iter().zip(x).filter(|(_, &xj)| xj != 0).map(|(q, _)| q).sum::<f64>();
        }
        e
    }

    /// Exhaustive minimum; practical up to about 24 variables.
    pub fn brute_force(&self) -> (Vec<u8>, f64) {
        assert!(self.size <= 26, "brute force over {} variables", self.size);
        let mut best = (vec![0u8; self.size], self.energy(&vec![0u8; self.size]));
        let mut x = vec![0u8; self.size];
        for code in 1u64..(1u64 << self.size) {
            for (i, b) in x.iter_mut().enumerate() {
                *b = ((code >> i) & 1) as u8;
            }
            let e = self.energy(&x);
            if e < best.1 {
                best = (x.clone(), e);
            }
        }
        best
    }

    /// Steepest-descent single-bit flips from `start` until no flip improves.
    pub fn local_search(&self, start: &[u8]) -> (Vec<u8>, f64) {
        let mut x = start.to_vec();
        let mut e = self.energy(&x);
        loop {
            let mut best_flip = None;
            let mut best_delta = -1e-12;
            for i in 0..self.size {
                let d = self.flip_delta(&x, i);
                if d < best_delta {
                    best_delta = d;
                    best_flip = Some(i);
                }
            }
            match best_flip {
                Some(i) => {
                    x[i] ^= 1;
                    e += best_delta;
                }
                None => return (x, e),
            }
        }
    }

    /// Energy change from flipping bit `i`.
    pub fn flip_delta(&self, x: &[u8], i: usize) -> f64 {
        let mut field = self.get(i, i);
        for j in (0..self.size).filter(|&j| j != i && x[j] != 0) {
            field += 2.0 * self.get(i, j);
        }
        if x[i] == 0 {
            field
        } else {
            -field
        }
    }
}

/// Weighted undirected edge list: `{"num_nodes": n, "edges": [[i, j, w], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn unweighted(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        Graph { num_nodes, edges: edges.iter().map(|&(i, j)| (i, j, 1.0)).collect() }
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::unweighted(n, &edges)
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::unweighted(n, &edges)
    }

    /// Uniform-ish random 3-regular simple graph by repeated stub pairing.
    pub fn random_regular3(n: usize, seed: u64) -> Self {
        assert!(n >= 4 && n.is_multiple_of(2), "3-regular graphs need an even node count >= 4");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
            stubs.shuffle(&mut rng);
            let mut edges = Vec::with_capacity(stubs.len() / 2);
            let mut ok = true;
            for pair in stubs.chunks(2) {
                let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if a == b || edges.contains(&(a, b)) {
                    ok = false;
                    break;
                }
                edges.push((a, b));
            }
            if ok {
                return Self::unweighted(n, &edges);
            }
        }
    }

    /// Erdos-Renyi graph with unit weights.
    pub fn random(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(p)).collect();
        Self::unweighted(n, &edges)
    }

    pub fn cut_value(&self, x: &[u8]) -> f64 {
        self.edges.iter().filter(|(i, j, _)| x[*i] != x[*j]).map(|(_, _, w)| w).sum()
    }
}

/// Max-Cut as a QUBO: `Q_ii = -sum_j w_ij`, `Q_ij = w_ij`, so that the cut
/// of `x` equals `-energy(x)`.
pub fn qubo_from_maxcut(graph: &Graph) -> Result<QuboProblem, AlgoError> {
    let n = graph.num_nodes;
    let mut q = vec![0.0; n * n];
    for &(i, j, w) in &graph.edges {
        if i == j {
            return Err(AlgoError::Structure(format!("self-loop at node {i}")));
        }
        if i >= n || j >= n {
            return Err(AlgoError::Structure(format!("edge ({i},{j}) outside {n} nodes")));
        }
        if !w.is_finite() {
            return Err(AlgoError::Structure(format!("non-finite weight on ({i},{j})")));
        }
        q[i * n + j] += w;
        q[j * n + i] += w;
        q[i * n + i] -= w;
        q[j * n + j] -= w;
    }
    QuboProblem::from_dense(n, q, 0.0)
}

/// Ordered disjoint index blocks covering every variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling {
    tiles: Vec<Vec<usize>>,
}

impl Tiling {
    /// Blocks of `tile_size` consecutive variables; the last may be shorter.
    pub fn contiguous(num_vars: usize, tile_size: usize) -> Self {
        assert!(tile_size > 0);
        Tiling { tiles: (0..num_vars).collect::<Vec<_>>().chunks(tile_size).map(<[usize]>::to_vec).collect() }
    }

    /// Consecutive blocks of the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut start = 0;
        let tiles = sizes
            .iter()
            .map(|&s| {
                let t: Vec<usize> = (start..start + s).collect();
                start += s;
                t
            })
            .collect();
        Tiling { tiles }
    }

    pub fn new(tiles: Vec<Vec<usize>>) -> Self {
        Tiling { tiles }
    }

    pub fn tiles(&self) -> &[Vec<usize>] {
        &self.tiles
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.tiles.iter().map(Vec::len).collect()
    }

    pub fn validate(&self, num_vars: usize, max_tile: usize) -> Result<(), AlgoError> {
        let mut seen = vec![false; num_vars];
        for (t, tile) in self.tiles.iter().enumerate() {
            if tile.is_empty() || tile.len() > max_tile {
                return Err(AlgoError::Structure(format!("tile {t} has {} variables (max {max_tile})", tile.len())));
            }
            for &v in tile {
                if v >= num_vars {
                    return Err(AlgoError::Structure(format!("tile {t} names variable {v} >= {num_vars}")));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(AlgoError::Structure(format!("variable {v} appears in two tiles")));
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(AlgoError::Structure(format!("variable {v} is not covered")));
        }
        Ok(())
    }
}

/// The QUBO restricted to one tile with every other variable frozen:
/// `E(tile bits) = constant + sum_i h_i b_i + sum_{i != j} Q_ij b_i b_j`.
#[derive(Clone, Debug)]
pub struct TileSubproblem {
    vars: Vec<usize>,
    constant: f64,
    linear: Vec<f64>,
    coupling: Vec<f64>,
}

impl TileSubproblem {
    pub fn new(problem: &QuboProblem, tile: &[usize], frozen: &[u8]) -> Self {
        let k = tile.len();
        let mut in_tile = vec![false; problem.size()];
        for &v in tile {
            in_tile[v] = true;
        }
        let outside: Vec<usize> = (0..problem.size()).filter(|&v| !in_tile[v]).collect();
        let mut rest = frozen.to_vec();
        for &v in tile {
            rest[v] = 0;
        }
        let constant = problem.energy(&rest);
        let linear = tile
            .iter()
            .map(|&i| {
                problem.get(i, i)
                    + 2.0 * outside.iter().filter(|&&j| frozen[j] != 0).map(|&j| problem.get(i, j)).sum::<f64>()
            })
            .collect();
        let mut coupling = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    coupling[a * k + b] = problem.get(tile[a], tile[b]);
                }
            }
        }
        TileSubproblem { vars: tile.to_vec(), constant, linear, coupling }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn energy(&self, bits: &[u8]) -> f64 {
        let k = self.vars.len();
        let mut e = self.constant;
        for a in (0..k).filter(|&a| bits[a] != 0) {
            e += self.linear[a];
            for b in (0..k).filter(|&b| bits[b] != 0) {
                e += self.coupling[a * k + b];
            }
        }
        e
    }

    pub fn apply(&self, assignment: &mut [u8], bits: &[u8]) {
        for (&v, &b) in self.vars.iter().zip(bits) {
            assignment[v] = b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triangle_optimum_is_two() {
        let g = Graph::complete(3);
        let q = qubo_from_maxcut(&g).unwrap();
        let (x, e) = q.brute_force();
        assert_eq!(-e, 2.0);
        assert_eq!(g.cut_value(&x), 2.0);
    }

    #[test]
    fn path4_optimum_by_enumeration() {
        let g = Graph::path(4);
        // independent oracle: enumerate cuts directly on the graph
        let best = (0u32..16)
            .map(|c| {
                let x: Vec<u8> = (0..4).map(|i| ((c >> i) & 1) as u8).collect();
                g.cut_value(&x)
            })
            .fold(0.0, f64::max);
        assert_eq!(best, 3.0);
        assert_eq!(-qubo_from_maxcut(&g).unwrap().brute_force().1, 3.0);
    }

    #[test]
    fn single_edge_energies() {
        let q = qubo_from_maxcut(&Graph::unweighted(2, &[(0, 1)])).unwrap();
        assert_eq!(q.energy(&[0, 1]), -1.0);
        assert_eq!(q.energy(&[0, 0]), 0.0);
    }

    #[test]
    fn rejects_self_loops_and_asymmetry() {
        assert!(qubo_from_maxcut(&Graph::unweighted(2, &[(1, 1)])).is_err());
        assert!(QuboProblem::from_dense(2, vec![0.0, 1.0, 2.0, 0.0], 0.0).is_err());
        assert!(QuboProblem::from_dense(0, vec![], 0.0).is_err());
    }

    #[test]
    fn qubo_file_round_trip_and_mirroring() {
        let file: QuboFile = serde_json::from_str(r#"{"size":3,"entries":[[0,0,-1.0],[0,2,0.5]],"offset":1.5}"#).unwrap();
        let q = QuboProblem::from_file(&file).unwrap();
        assert_eq!(q.get(2, 0), 0.5);
        assert_eq!(q.energy(&[1, 0, 1]), -1.0 + 1.0 + 1.5);
        assert_eq!(QuboProblem::from_file(&q.to_file()).unwrap(), q);
    }

    #[test]
    fn regular_graph_degrees() {
        let g = Graph::random_regular3(30, 4);
        let mut deg = [0; 30];
        for &(i, j, _) in &g.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        assert!(deg.iter().all(|&d| d == 3));
        assert_eq!(g.edges.len(), 45);
    }

    #[test]
    fn tiling_validation() {
        let t = Tiling::contiguous(30, 8);
        assert_eq!(t.sizes(), vec![8, 8, 8, 6]);
        t.validate(30, 8).unwrap();
        assert!(t.validate(31, 8).is_err());
        assert!(t.validate(30, 6).is_err());
        assert!(Tiling::new(vec![vec![0, 1], vec![1, 2]]).validate(3, 8).is_err());
        assert_eq!(Tiling::from_sizes(&[8, 4]).tiles()[1], vec![8, 9, 10, 11]);
    }

    #[test]
    fn local_search_reaches_a_local_minimum() {
        let q = qubo_from_maxcut(&Graph::random_regular3(16, 2)).unwrap();
        let (x, e) = q.local_search(&[0; 16]);
        assert!((q.energy(&x) - e).abs() < 1e-9);
        assert!((0..16).all(|i| q.flip_delta(&x, i) >= -1e-12));
    }

    proptest! {
        #[test]
        fn tile_energy_recomposes(seed in 0u64..500, bits in proptest::collection::vec(0u8..2, 12), tile_bits in proptest::collection::vec(0u8..2, 5)) {
            let q = qubo_from_maxcut(&Graph::random(12, 0.4, seed)).unwrap();
            let tile = [2usize, 3, 7, 8, 11];
            let sub = TileSubproblem::new(&q, &tile, &bits);
            let mut full = bits.clone();
            sub.apply(&mut full, &tile_bits);
            prop_assert!((sub.energy(&tile_bits) - q.energy(&full)).abs() < 1e-9);
        }

        #[test]
        fn maxcut_energy_is_negative_cut(seed in 0u64..500, bits in proptest::collection::vec(0u8..2, 10)) {
            let g = Graph::random(10, 0.5, seed);
            let q = qubo_from_maxcut(&g).unwrap();
            prop_assert!((q.energy(&bits) + g.cut_value(&bits)).abs() < 1e-9);
        }

        #[test]
        fn flip_delta_matches_recompute(seed in 0u64..200, bits in proptest::collection::vec(0u8..2, 9), i in 0usize..9) {
            let q = qubo_from_maxcut(&Graph::random(9, 0.5, seed)).unwrap();
            let mut flipped = bits.clone();
            flipped[i] ^= 1;
            prop_assert!((q.energy(&flipped) - q.energy(&bits) - q.flip_delta(&bits, i)).abs() < 1e-9);
        }
    }
}
