//! Rooted phylogenetic trees and per-node count propagation.
//!
//! Nodes are stored in preorder, so the root is node 0 and every parent
//! precedes its children.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::data::CountMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub label: Option<String>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
    internal: Vec<usize>,
    leaves: Vec<usize>,
}

/// Accumulates nodes in any order, then validates and normalizes.
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node; `parent` must already exist. The first parentless node
    /// is the root and only one is allowed.
    pub fn add_node(&mut self, parent: Option<usize>, label: Option<String>) -> Result<usize> {
        let id = self.nodes.len();
        match parent {
            Some(p) => {
                let node = self
                    .nodes
                    .get_mut(p)
                    .ok_or_else(|| Error::Tree(format!("parent {p} does not exist")))?;
                node.children.push(id);
            }
            None if !self.nodes.is_empty() => {
                return Err(Error::Tree("tree has more than one root".into()))
            }
            None => {}
        }
        self.nodes.push(Node {
            parent,
            children: Vec::new(),
            label,
        });
        Ok(id)
    }

    pub fn set_label(&mut self, id: usize, label: Option<String>) {
        if let Some(node) = self.nodes.get_mut(id) {
            node.label = label;
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Collapses single-child nodes, renumbers in preorder, and checks that
    /// leaves carry unique labels and that there are at least two of them.
    pub fn build(self) -> Result<PhyloTree> {
        if self.nodes.is_empty() {
            return Err(Error::Tree("empty tree".into()));
        }
        let old = self.nodes;
        let mut nodes: Vec<Node> = Vec::with_capacity(old.len());
        let mut stack: Vec<(usize, Option<usize>)> = vec![(0, None)];
        while let Some((mut v, parent)) = stack.pop() {
            while old[v].children.len() == 1 {
                v = old[v].children[0];
            }
            let id = nodes.len();
            nodes.push(Node {
                parent,
                children: Vec::new(),
                label: old[v].label.clone(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            for &c in old[v].children.iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        let mut seen = BTreeMap::new();
        let mut leaves = Vec::new();
        let mut internal = Vec::new();
        for (id, node) in nodes.iter().enumerate() {
            if node.is_leaf() {
                let label = node
                    .label
                    .as_ref()
                    .ok_or_else(|| Error::Tree(format!("leaf {} has no label", leaves.len())))?;
                if seen.insert(label.clone(), id).is_some() {
                    return Err(Error::Tree(format!("duplicate leaf label `{label}`")));
                }
                leaves.push(id);
            } else {
                internal.push(id);
            }
        }
        if leaves.len() < 2 {
            return Err(Error::Tree(format!(
                "tree needs at least two leaves, found {}",
                leaves.len()
            )));
        }
        Ok(PhyloTree {
            nodes,
            internal,
            leaves,
        })
    }
}

impl PhyloTree {
    /// One root with the given leaves as direct children.
    pub fn star<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut b = TreeBuilder::new();
        let root = b.add_node(None, None)?;
        for l in labels {
            b.add_node(Some(root), Some(String::from(l.as_ref())))?;
        }
        b.build()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    /// Internal nodes in preorder; this is the order selection vectors use.
    pub fn internal_nodes(&self) -> &[usize] {
        &self.internal
    }

    /// Leaf nodes in preorder.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = &str> {
        self.leaves
            .iter()
            .map(|&v| self.nodes[v].label.as_deref().unwrap_or(""))
    }

    /// Dotted child-index path from the root, e.g. `r.0.2`.
    pub fn node_path(&self, id: usize) -> String {
        let mut steps = Vec::new();
        let mut v = id;
        while let Some(p) = self.nodes[v].parent {
            let k = self.nodes[p].children.iter().position(|&c| c == v).unwrap_or(0);
            steps.push(k);
            v = p;
        }
        let mut out = String::from("r");
        for k in steps.iter().rev() {
            out.push_str(&format!(".{k}"));
        }
        out
    }

    /// Number of leaves below each node.
    pub fn leaf_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.nodes.len()];
        for v in (0..self.nodes.len()).rev() {
            if self.nodes[v].is_leaf() {
                counts[v] = 1;
            }
            if let Some(p) = self.nodes[v].parent {
                counts[p] += counts[v];
            }
        }
        counts
    }
}

/// Per-sample subtree totals for every node.
///
/// For internal node `j` with child `k`, the branch count `n_jk(X_i)` is the
/// subtree total of `k` and the node total `n_j.(X_i)` is that of `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeCounts {
    n_samples: usize,
    n_nodes: usize,
    totals: Vec<u32>,
    leaf_columns: Vec<usize>,
}

impl TreeCounts {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Subtree totals of sample `i`, indexed by node.
    #[inline]
    pub fn sample(&self, i: usize) -> &[u32] {
        &self.totals[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    pub fn node_total(&self, i: usize, node: usize) -> u32 {
        self.sample(i)[node]
    }

    /// Branch counts below `node` for sample `i`, in child order.
    pub fn branch_counts(&self, tree: &PhyloTree, i: usize, node: usize) -> Vec<u32> {
        let row = self.sample(i);
        tree.children(node).iter().map(|&k| row[k]).collect()
    }

    /// Count-table column of each leaf, in `PhyloTree::leaves` order.
    pub fn leaf_columns(&self) -> &[usize] {
        &self.leaf_columns
    }
}

/// Sums leaf counts up the tree for every sample.
pub fn propagate_tree_counts(m: &CountMatrix, tree: &PhyloTree) -> Result<TreeCounts> {
    let columns: BTreeMap<&str, usize> = m
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let mut leaf_columns = Vec::with_capacity(tree.leaves().len());
    let mut missing_in_table = Vec::new();
    let mut matched = vec![false; m.n_features()];
    for label in tree.leaf_labels() {
        match columns.get(label) {
            Some(&j) => {
                matched[j] = true;
                leaf_columns.push(j);
            }
            None => missing_in_table.push(String::from(label)),
        }
    }
    let missing_in_tree: Vec<String> = matched
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(j, _)| m.feature_names()[j].clone())
        .collect();
    if !missing_in_table.is_empty() || !missing_in_tree.is_empty() {
        return Err(Error::LeafMismatch {
            missing_in_tree,
            missing_in_table,
        });
    }

    let n_nodes = tree.n_nodes();
    let mut totals = vec![0u32; m.n_samples() * n_nodes];
    for i in 0..m.n_samples() {
        let row = m.row(i);
        let out = &mut totals[i * n_nodes..(i + 1) * n_nodes];
        for (&leaf, &j) in tree.leaves().iter().zip(&leaf_columns) {
            out[leaf] = row[j];
        }
        for v in (1..n_nodes).rev() {
            let p = tree.node(v).parent.expect("non-root node has a parent");
            out[p] += out[v];
        }
    }
    Ok(TreeCounts {
        n_samples: m.n_samples(),
        n_nodes,
        totals,
        leaf_columns,
    })
}
