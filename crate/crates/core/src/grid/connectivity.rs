use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;

use super::{Branch, HvdcLink, Network};

/// Edge handed to a connectivity selector.
#[derive(Debug, Clone, Copy)]
pub enum EdgeRef<'a> {
    Branch(&'a Branch),
    Link(&'a HvdcLink),
}

impl EdgeRef<'_> {
    pub fn endpoints(&self) -> (u64, u64) {
        match self {
            EdgeRef::Branch(b) => (b.from_bus, b.to_bus),
            EdgeRef::Link(l) => (l.from_bus, l.to_bus),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    /// Bus ids per component. Components are ordered by their smallest bus
    /// id and each component is sorted.
    pub components: Vec<Vec<u64>>,
}

/// Partitions the buses of `net` using only the edges accepted by `select`.
pub fn connectivity<F>(net: &Network, mut select: F) -> Connectivity
where
    F: FnMut(EdgeRef<'_>) -> bool,
{
    let index: BTreeMap<u64, usize> = net.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let mut uf = UnionFind::<usize>::new(net.buses.len());

    let edges = net
        .branches
        .iter()
        .map(EdgeRef::Branch)
        .chain(net.hvdc_links.iter().map(EdgeRef::Link));
    for edge in edges {
        if !select(edge) {
            continue;
        }
        let (a, b) = edge.endpoints();
        if let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) {
            uf.union(i, j);
        }
    }

    let mut groups: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (i, bus) in net.buses.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(bus.id);
    }
    let mut components: Vec<Vec<u64>> = groups
        .into_values()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    components.sort();
    Connectivity { connected: components.len() <= 1, components }
}
