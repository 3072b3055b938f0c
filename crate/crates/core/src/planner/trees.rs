//! Spanning-tree selection and counting over the AC branch graph.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::grid::{connectivity, EdgeRef, Network};

/// Partition of the AC branches into a spanning tree and its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub tree: Vec<u64>,
    pub off_tree: Vec<u64>,
}

/// Minimum spanning tree of the AC branches under `weights` (indexed like
/// `net.branches`). Kruskal's algorithm on `(weight, branch id)` keys, so
/// equal weights resolve to the smaller id.
pub fn select_conversions(net: &Network, weights: &[f64]) -> Result<Selection> {
    if weights.len() != net.branches.len() {
        return Err(Error::Planning(format!(
            "{} weights for {} branches",
            weights.len(),
            net.branches.len()
        )));
    }
    let index = net.bus_index();
    let mut order: Vec<usize> = (0..net.branches.len()).collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .total_cmp(&weights[b])
            .then_with(|| net.branches[a].id.cmp(&net.branches[b].id))
    });

    let mut uf = UnionFind::<usize>::new(net.buses.len());
    let mut tree = vec![];
    let mut off_tree = vec![];
    for k in order {
        let br = &net.branches[k];
        if uf.union(index[&br.from_bus], index[&br.to_bus]) {
            tree.push(br.id);
        } else {
            off_tree.push(br.id);
        }
    }
    if tree.len() + 1 != net.buses.len() {
        let conn = connectivity(net, |e| matches!(e, EdgeRef::Branch(_)));
        return Err(Error::Disconnected { components: conn.components });
    }
    tree.sort_unstable();
    off_tree.sort_unstable();
    Ok(Selection { tree, off_tree })
}

/// Number of spanning trees of the AC branch multigraph (Kirchhoff's
/// theorem), computed exactly with fraction-free elimination.
pub fn count_spanning_trees(net: &Network) -> BigInt {
    let n = net.buses.len();
    if n <= 1 {
        return BigInt::one();
    }
    let index = net.bus_index();
    let mut laplacian = vec![vec![BigInt::zero(); n]; n];
    for br in &net.branches {
        let (i, j) = (index[&br.from_bus], index[&br.to_bus]);
        laplacian[i][i] += 1;
        laplacian[j][j] += 1;
        laplacian[i][j] -= 1;
        laplacian[j][i] -= 1;
    }
    let minor: Vec<Vec<BigInt>> = laplacian.into_iter().skip(1).map(|row| row.into_iter().skip(1).collect()).collect();
    bareiss_determinant(minor)
}

/// Determinant by the Bareiss algorithm; every intermediate division is exact.
fn bareiss_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let value = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = value / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    let det = sign * &m[n - 1][n - 1];
    debug_assert!(!det.is_negative());
    det
}
