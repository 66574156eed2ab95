//! Node partitioners: singleton groups, bridge-cut components, and dispatch
//! over builtin or file-loaded sources.
//!
//! The bridge-cut partitioner deletes all bridge edges and takes the
//! remaining connected components as groups. On motif benchmarks this
//! isolates each 2-edge-connected core (the motif) as one group, which is
//! what lets group-level selection line up with ground truth.

use crate::graph::{Graph, Partition};
use crate::{Error, Result};
use std::path::Path;

/// One group per node: {{0}, {1}, ..., {n-1}}.
pub fn singleton_partition(n: usize) -> Partition {
    Partition::new((0..n).map(|i| vec![i]).collect(), n)
        .expect("singleton groups always form a partition")
}

/// Bridge edges of the graph, found by one DFS with low-link values.
/// Returned with u < v, sorted ascending.
pub fn bridges(graph: &Graph) -> Vec<(usize, usize)> {
    let n = graph.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| graph.adjacency[[i, j]] != 0.0)
                .collect()
        })
        .collect();

    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;
    let mut out = Vec::new();

    // iterative DFS; frame = (node, parent, next neighbor position)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(&mut (u, parent, ref mut next)) = stack.last_mut() {
            if *next < adj[u].len() {
                let v = adj[u][*next];
                *next += 1;
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, u, 0));
                } else if v != parent {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&mut (p, _, _)) = stack.last_mut() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        out.push((p.min(u), p.max(u)));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Deletes all bridges and partitions nodes by the remaining connected
/// components. Groups are sorted internally and ordered by smallest member.
pub fn bridge_partition(graph: &Graph) -> Partition {
    let n = graph.n();
    let bridge_set: std::collections::HashSet<(usize, usize)> =
        bridges(graph).into_iter().collect();

    let mut component = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let c = groups.len();
        let mut members = vec![start];
        component[start] = c;
        let mut queue = vec![start];
        while let Some(u) = queue.pop() {
            for v in 0..n {
                if graph.adjacency[[u, v]] == 0.0
                    || component[v] != usize::MAX
                    || bridge_set.contains(&(u.min(v), u.max(v)))
                {
                    continue;
                }
                component[v] = c;
                members.push(v);
                queue.push(v);
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    Partition::new(groups, n).expect("components partition the node set")
}

/// Where a partition comes from: a builtin partitioner or a JSON file.
#[derive(Debug, Clone)]
pub enum PartitionSource {
    Singleton,
    Bridges,
    File(std::path::PathBuf),
}

impl std::str::FromStr for PartitionSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singleton" => Ok(PartitionSource::Singleton),
            "bridges" => Ok(PartitionSource::Bridges),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => {
                    Ok(PartitionSource::File(std::path::PathBuf::from(path)))
                }
                _ => Err(Error::Invalid(format!(
                    "unknown partition source {other:?} (expected singleton, bridges, or file:PATH)"
                ))),
            },
        }
    }
}

/// Dispatches to a builtin partitioner or loads and validates a file.
/// A file-loaded partition must refer to exactly graph.n() nodes.
pub fn partition_for(graph: &Graph, source: &PartitionSource) -> Result<Partition> {
    match source {
        PartitionSource::Singleton => Ok(singleton_partition(graph.n())),
        PartitionSource::Bridges => Ok(bridge_partition(graph)),
        PartitionSource::File(path) => {
            let partition = crate::io::read_partition(Path::new(path))?;
            if partition.n() != graph.n() {
                return Err(Error::Invalid(format!(
                    "partition covers {} nodes but graph {} has {}",
                    partition.n(),
                    graph.id,
                    graph.n()
                )));
            }
            Ok(partition)
        }
    }
}
