//! Static undirected communication graph between devices.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds the graph; duplicate edges (in either orientation) collapse to one link.
    pub fn build(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoDevices);
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::EdgeOutOfRange { a, b, n });
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { n, adjacency })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::build(n, &edges)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::DeviceOutOfRange {
                index: i,
                n: self.n,
            })
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.get(i).map_or(0, Vec::len)
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// First device not reachable from device 0, if any.
    pub fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    pub fn is_connected(&self) -> bool {
        self.first_unreachable().is_none()
    }
}
