//! Graph approximation of the Carnot-Caratheodory distance.
//!
//! Nodes are cell centers. A displacement `d = v - u` is admissible when it
//! lies in the span of the fields at the segment midpoint, and costs the norm
//! of the minimum-norm coefficients `a` with `sum_j a_j X_j = d`, i.e.
//! `|C_P^T d|`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::anisotropy::Anisotropy;
use crate::error::{ensure_dim, Error, Result};
use crate::grid::Grid;
use crate::pseudoinverse::pinv;

pub const DEFAULT_TAU_SPAN: f64 = 1e-6;

/// Linear data cached at one half-lattice point.
struct MidData {
    /// Row-major `n x n` projector onto the span.
    pi: Vec<f64>,
    /// Row-major `m x n` matrix `C_P^T`.
    cpt: Vec<f64>,
}

/// Directed graph of admissible horizontal displacements in CSR layout.
#[derive(Debug, Clone)]
pub struct HorizontalGraph {
    grid: Grid,
    radius: usize,
    tau_span: f64,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    max_operator_norm: f64,
}

fn chebyshev_offsets(n: usize, r: usize) -> Vec<Vec<i64>> {
    let side = 2 * r + 1;
    (0..side.pow(n as u32))
        .map(|mut k| {
            let mut off = vec![0i64; n];
            for slot in off.iter_mut().rev() {
                *slot = (k % side) as i64 - r as i64;
                k /= side;
            }
            off
        })
        .filter(|off| off.iter().any(|&v| v != 0))
        .collect()
}

impl HorizontalGraph {
    pub fn build(a: &Anisotropy, grid: &Grid, radius: usize, tau_span: f64) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidParam("neighbor radius must be at least 1".into()));
        }
        if !(tau_span > 0.0 && tau_span.is_finite()) {
            return Err(Error::InvalidParam(format!("tau_span must be positive, got {tau_span}")));
        }
        ensure_dim(a.n(), grid.dim(), "grid dimension")?;
        if !a.domain().contains_box(grid.domain()) {
            return Err(Error::InvalidParam(
                "grid box is not contained in the anisotropy domain".into(),
            ));
        }
        let (n, m) = (a.n(), a.m());
        let res = grid.resolution();

        // Midpoints of two cell centers lie on the lattice of half indices.
        let half = Grid::new(
            grid.domain().clone(),
            res.iter().map(|&r| 2 * r - 1).collect(),
        )?;
        let mid_point = |hidx: &[usize]| -> Vec<f64> {
            hidx.iter()
                .enumerate()
                .map(|(axis, &k)| grid.domain().lo(axis) + (0.5 * k as f64 + 0.5) * grid.spacing()[axis])
                .collect()
        };
        let cache: Vec<(MidData, f64)> = (0..half.len())
            .into_par_iter()
            .map(|k| {
                let x = mid_point(&half.multi_index(k));
                let data = pinv(&a.matrix_at(&x))?;
                let sigma = data.singular_values.first().copied().unwrap_or(0.0);
                let pi = (0..n * n).map(|t| data.pi[(t / n, t % n)]).collect();
                let cpt = (0..m * n).map(|t| data.c_p[(t % n, t / n)]).collect();
                Ok((MidData { pi, cpt }, sigma))
            })
            .collect::<Result<_>>()?;
        let max_operator_norm = cache.iter().map(|c| c.1).fold(0.0, f64::max);

        let offs = chebyshev_offsets(n, radius);
        let adjacency: Vec<Vec<(usize, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|u| {
                let ui = grid.multi_index(u);
                let xu = grid.center_of(&ui);
                let mut out = Vec::new();
                let mut vi = vec![0usize; n];
                let mut hk = vec![0usize; n];
                'next: for off in &offs {
                    for axis in 0..n {
                        let v = ui[axis] as i64 + off[axis];
                        if v < 0 || v >= res[axis] as i64 {
                            continue 'next;
                        }
                        vi[axis] = v as usize;
                        hk[axis] = ui[axis] + vi[axis];
                    }
                    let xv = grid.center_of(&vi);
                    let d: Vec<f64> = xv.iter().zip(&xu).map(|(p, q)| p - q).collect();
                    let norm_d = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let mid = &cache[half.flat_index(&hk)].0;
                    let resid: f64 = (0..n)
                        .map(|i| {
                            let pd: f64 = (0..n).map(|j| mid.pi[i * n + j] * d[j]).sum();
                            (d[i] - pd).powi(2)
                        })
                        .sum::<f64>()
                        .sqrt();
                    if resid > tau_span * norm_d {
                        continue;
                    }
                    let w = (0..m)
                        .map(|i| (0..n).map(|j| mid.cpt[i * n + j] * d[j]).sum::<f64>().powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if w.is_finite() && w > 0.0 {
                        out.push((grid.flat_index(&vi), w));
                    }
                }
                out
            })
            .collect();

        let mut offsets = Vec::with_capacity(grid.len() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for list in adjacency {
            for (v, w) in list {
                targets.push(v);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Ok(HorizontalGraph {
            grid: grid.clone(),
            radius,
            tau_span,
            offsets,
            targets,
            weights,
            max_operator_norm,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn tau_span(&self) -> f64 {
        self.tau_span
    }

    pub fn node_count(&self) -> usize {
        self.grid.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Largest `|C(x)|_2` over all segment midpoints.
    pub fn max_operator_norm(&self) -> f64 {
        self.max_operator_norm
    }

    /// `(target, weight)` pairs leaving `u`.
    pub fn edges(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Edge list as CSV `src,dst,weight`.
    pub fn write_edges_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["src", "dst", "weight"]).map_err(io)?;
        for u in 0..self.node_count() {
            for (v, wt) in self.edges(u) {
                wr.write_record([u.to_string(), v.to_string(), wt.to_string()])
                    .map_err(io)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Shortest-path weights from `source` to every node; unreachable nodes
    /// are `Distance::Infinite`.
    pub fn distances_from(&self, source: usize) -> Vec<Distance> {
        let (dist, _) = self.dijkstra(source, None);
        dist.into_iter().map(Distance::from_raw).collect()
    }

    fn dijkstra(&self, source: usize, target: Option<usize>) -> (Vec<f64>, usize) {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        let mut done = vec![false; self.node_count()];
        let mut heap = BinaryHeap::new();
        let mut expanded = 0;
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            expanded += 1;
            if Some(u) == target {
                break;
            }
            for (v, w) in self.edges(u) {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        (dist, expanded)
    }
}

/// Min-heap entry ordered by distance, then node index.
#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graph distance; serialized as a number or the string `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Finite(f64),
    Infinite,
}

impl Distance {
    fn from_raw(d: f64) -> Self {
        if d.is_finite() {
            Distance::Finite(d)
        } else {
            Distance::Infinite
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Distance::Infinite
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(d) => s.serialize_f64(*d),
            Distance::Infinite => s.serialize_str("infinite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceQuery {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub snapped_from: Vec<f64>,
    pub snapped_to: Vec<f64>,
    pub distance: Distance,
    pub nodes_expanded: usize,
}

/// Distance between the cell centers nearest to `x` and `y`.
pub fn cc_distance(g: &HorizontalGraph, x: &[f64], y: &[f64]) -> Result<DistanceQuery> {
    let s = g.grid.snap(x)?;
    let t = g.grid.snap(y)?;
    let (dist, nodes_expanded) = g.dijkstra(s, Some(t));
    Ok(DistanceQuery {
        from: x.to_vec(),
        to: y.to_vec(),
        snapped_from: g.grid.center(s),
        snapped_to: g.grid.center(t),
        distance: Distance::from_raw(dist[t]),
        nodes_expanded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::CatalogParams;
    use crate::domain::BoxDomain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtin(name: &str) -> Anisotropy {
        Anisotropy::builtin(name, &CatalogParams::default()).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    #[test]
    fn euclidean_graph_is_complete_neighborhood() {
        let e = builtin("euclidean");
        let grid = Grid::uniform(BoxDomain::unit(2), 10).unwrap();
        let g = HorizontalGraph::build(&e, &grid, 2, DEFAULT_TAU_SPAN).unwrap();
        let u = grid.flat_index(&[5, 5]);
        assert_eq!(g.edges(u).count(), 24);
        assert_eq!(g.edges(0).count(), 8);
        for (v, w) in g.edges(u) {
            let d: Vec<f64> = grid.center(v).iter().zip(grid.center(u)).map(|(a, b)| a - b).collect();
            assert!((w - norm(&d)).abs() < 1e-12);
        }
        let q = cc_distance(&g, &[0.3, 0.3], &[0.3, 0.3]).unwrap();
        assert_eq!(q.distance, Distance::Finite(0.0));
    }

    #[test]
    fn single_field_only_moves_along_x1() {
        let a = Anisotropy::from_strings(BoxDomain::unit(2), &[&["1", "0"]], None).unwrap();
        let grid = Grid::uniform(BoxDomain::unit(2), 12).unwrap();
        let g = HorizontalGraph::build(&a, &grid, 3, DEFAULT_TAU_SPAN).unwrap();
        for u in 0..grid.len() {
            for (v, _) in g.edges(u) {
                assert_eq!(grid.multi_index(u)[1], grid.multi_index(v)[1]);
            }
        }
        let q = cc_distance(&g, &[0.1, 0.1], &[0.1, 0.9]).unwrap();
        assert!(q.distance.is_infinite());
        assert_eq!(serde_json::to_value(q.distance).unwrap(), "infinite");
        let q = cc_distance(&g, &[0.1, 0.5], &[0.9, 0.5]).unwrap();
        assert!((q.distance.finite().unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn split_plane_left_half_has_no_vertical_component() {
        let a = builtin("split_plane");
        let grid = Grid::uniform(a.domain().clone(), 20).unwrap();
        let g = HorizontalGraph::build(&a, &grid, 2, DEFAULT_TAU_SPAN).unwrap();
        for u in 0..grid.len() {
            let xu = grid.center(u);
            for (v, _) in g.edges(u) {
                let xv = grid.center(v);
                // Midpoint strictly left of the axis: X_2 vanishes there.
                if 0.5 * (xu[0] + xv[0]) < 0.0 {
                    assert_eq!(grid.multi_index(u)[1], grid.multi_index(v)[1]);
                }
            }
        }
        let left = grid.flat_index(&[2, 10]);
        assert!(g.edges(left).all(|(v, _)| grid.multi_index(v)[1] == 10));
    }

    #[test]
    fn euclidean_distance_and_radius_trend() {
        let e = builtin("euclidean");
        let grid = Grid::uniform(BoxDomain::unit(2), 100).unwrap();
        let g = HorizontalGraph::build(&e, &grid, 3, DEFAULT_TAU_SPAN).unwrap();
        let q = cc_distance(&g, &[0.1, 0.1], &[0.9, 0.9]).unwrap();
        let exact = 0.8 * 2f64.sqrt();
        assert!((q.distance.finite().unwrap() - exact).abs() <= 0.05 * exact);

        let (x, y) = ([0.105, 0.105], [0.905, 0.405]);
        let exact = norm(&[0.8, 0.3]);
        let errs: Vec<f64> = (1..=4)
            .map(|r| {
                let g = HorizontalGraph::build(&e, &grid, r, DEFAULT_TAU_SPAN).unwrap();
                cc_distance(&g, &x, &y).unwrap().distance.finite().unwrap() - exact
            })
            .collect();
        assert!(errs.iter().all(|&d| d >= -1e-12));
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{errs:?}");
        }
        assert!(errs[3] < errs[0]);
    }

    #[test]
    fn metric_properties_on_grushin() {
        let a = builtin("grushin");
        let grid = Grid::uniform(a.domain().clone(), 24).unwrap();
        let g = HorizontalGraph::build(&a, &grid, 2, DEFAULT_TAU_SPAN).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nodes: Vec<usize> = (0..6).map(|_| rng.gen_range(0..grid.len())).collect();
        let table: Vec<Vec<Distance>> = nodes.iter().map(|&s| g.distances_from(s)).collect();
        let slack = 2.0 * grid.spacing()[0];
        for (i, &u) in nodes.iter().enumerate() {
            for (j, &v) in nodes.iter().enumerate() {
                let (Some(duv), Some(dvu)) = (table[i][v].finite(), table[j][u].finite()) else {
                    panic!("grushin graph should be connected")
                };
                assert!((duv - dvu).abs() <= 1e-9);
                let eu = norm(&grid.center(u).iter().zip(grid.center(v)).map(|(p, q)| p - q).collect::<Vec<_>>());
                assert!(duv >= eu / g.max_operator_norm() - slack);
                for (k, &w) in nodes.iter().enumerate() {
                    let (dvw, duw) = (table[j][w].finite().unwrap(), table[i][w].finite().unwrap());
                    assert!(duw <= duv + dvw + 1e-9, "{k}");
                }
            }
        }
    }

    #[test]
    fn parameter_validation_and_export() {
        let e = builtin("euclidean");
        let grid = Grid::uniform(BoxDomain::unit(2), 4).unwrap();
        assert!(HorizontalGraph::build(&e, &grid, 0, 1e-6).is_err());
        assert!(HorizontalGraph::build(&e, &grid, 1, 0.0).is_err());
        let big = Grid::uniform(BoxDomain::cube(2, 0.0, 2.0), 4).unwrap();
        assert!(HorizontalGraph::build(&e, &big, 1, 1e-6).is_err());
        let g = HorizontalGraph::build(&e, &grid, 1, 1e-6).unwrap();
        assert!(cc_distance(&g, &[0.5, 1.5], &[0.5, 0.5]).is_err());
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("src,dst,weight\n0,1,0.25\n"));
        assert_eq!(text.lines().count(), 1 + g.edge_count());
    }

    #[test]
    fn schedule_independent_build() {
        let a = builtin("heisenberg");
        let grid = Grid::uniform(a.domain().clone(), 6).unwrap();
        let g1 = HorizontalGraph::build(&a, &grid, 1, DEFAULT_TAU_SPAN).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let g2 = pool.install(|| HorizontalGraph::build(&a, &grid, 1, DEFAULT_TAU_SPAN).unwrap());
        assert_eq!(g1.targets, g2.targets);
        assert_eq!(
            g1.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            g2.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
    }
}
