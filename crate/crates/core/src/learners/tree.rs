//! Binary presence-split tree shared by the sequential Hoeffding tree and
//! the vertical tree's model aggregator. Nodes live in an arena and are
//! never removed, so a node index doubles as a stable leaf id.

use serde::{Deserialize, Serialize};

use crate::instance::{majority, ClassCounts, Label, SparseInstance};

pub trait LeafData {
    fn class_counts(&self) -> &ClassCounts;
}

#[derive(Clone, Debug)]
pub enum Node<L> {
    Split {
        attribute: u32,
        present: usize,
        absent: usize,
        /// Class counts frozen at split time; used when a child is empty.
        class_counts: ClassCounts,
    },
    Leaf(L),
}

/// Preorder structural description used to compare trees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeNode {
    Split(u32),
    Leaf,
}

#[derive(Clone, Debug)]
pub struct Tree<L> {
    nodes: Vec<Node<L>>,
}

impl<L: LeafData> Tree<L> {
    pub fn new(root: L) -> Self {
        Self { nodes: vec![Node::Leaf(root)] }
    }

    /// Leaf id reached by `x`.
    pub fn sort(&self, x: &SparseInstance) -> usize {
        let mut at = 0;
        while let Node::Split {
            attribute,
            present,
            absent,
            ..
        } = &self.nodes[at]
        {
            at = if x.is_present(*attribute) { *present } else { *absent };
        }
        at
    }

    /// Majority class of the deepest node on `x`'s path that has seen data.
    pub fn predict(&self, x: &SparseInstance) -> Label {
        let mut at = 0;
        let mut guess = None;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    attribute,
                    present,
                    absent,
                    class_counts,
                } => {
                    guess = majority(class_counts).or(guess);
                    at = if x.is_present(*attribute) { *present } else { *absent };
                }
                Node::Leaf(l) => {
                    return majority(l.class_counts()).or(guess).unwrap_or_else(Label::default_class);
                }
            }
        }
    }

    pub fn leaf(&self, id: usize) -> Option<&L> {
        match self.nodes.get(id) {
            Some(Node::Leaf(l)) => Some(l),
            _ => None,
        }
    }

    pub fn leaf_mut(&mut self, id: usize) -> Option<&mut L> {
        match self.nodes.get_mut(id) {
            Some(Node::Leaf(l)) => Some(l),
            _ => None,
        }
    }

    /// Turns leaf `id` into a split on `attribute` with two fresh leaves.
    /// Returns the (present, absent) child ids.
    pub fn split(&mut self, id: usize, attribute: u32, present_leaf: L, absent_leaf: L) -> (usize, usize) {
        let present = self.nodes.len();
        let absent = present + 1;
        let class_counts = match &self.nodes[id] {
            Node::Leaf(l) => *l.class_counts(),
            Node::Split { .. } => panic!("node {id} is already split"),
        };
        self.nodes[id] = Node::Split {
            attribute,
            present,
            absent,
            class_counts,
        };
        self.nodes.push(Node::Leaf(present_leaf));
        self.nodes.push(Node::Leaf(absent_leaf));
        (present, absent)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &L)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Leaf(l) => Some((i, l)),
            Node::Split { .. } => None,
        })
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, d)) = stack.pop() {
            match &self.nodes[at] {
                Node::Split { present, absent, .. } => {
                    stack.push((*present, d + 1));
                    stack.push((*absent, d + 1));
                }
                Node::Leaf(_) => best = best.max(d),
            }
        }
        best
    }

    pub fn shape(&self) -> Vec<ShapeNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            match &self.nodes[at] {
                Node::Split {
                    attribute,
                    present,
                    absent,
                    ..
                } => {
                    out.push(ShapeNode::Split(*attribute));
                    stack.push(*absent);
                    stack.push(*present);
                }
                Node::Leaf(_) => out.push(ShapeNode::Leaf),
            }
        }
        out
    }
}
