//! Class hierarchy: a rooted tree of opaque labels.
//!
//! Nodes are interned into dense [`NodeId`]s assigned in lexicographic label
//! order, so two taxonomies built from the same edge multiset are identical
//! regardless of edge order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Label reserved for the root in hierarchy files.
pub const ROOT_LABEL: &str = "Root";

/// Prefix of the reserved virtual-category labels (see [`vc_label`]).
pub const VC_PREFIX: &str = "VC:";

/// The reserved virtual-category label for an internal node.
pub fn vc_label(parent: &str) -> String {
    format!("{VC_PREFIX}{parent}")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("empty hierarchy: no edges given")]
    EmptyInput,
    #[error("multiple roots: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("cycle detected among nodes {0:?}")]
    CycleDetected(Vec<String>),
    #[error("node {child:?} has multiple parents {parents:?}")]
    MultipleParents { child: String, parents: Vec<String> },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: &'static str },
    #[error("line {line}: expected \"parent child\", got {content:?}")]
    Parse { line: usize, content: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Dense node handle, valid only for the taxonomy that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    labels: Vec<String>,
    ids: HashMap<String, NodeId>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    depth: Vec<usize>,
    root: NodeId,
}

/// A node together with its proper ancestors, root excluded.
///
/// `members` is ordered from the node itself upwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AncestorSet {
    pub node: NodeId,
    pub members: Vec<NodeId>,
}

impl AncestorSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }
}

fn check_label(label: &str) -> Result<(), TaxonomyError> {
    let invalid = |reason| TaxonomyError::InvalidLabel {
        label: label.to_string(),
        reason,
    };
    if label.is_empty() {
        return Err(invalid("empty"));
    }
    if label.chars().any(char::is_whitespace) {
        return Err(invalid("contains whitespace"));
    }
    if label.starts_with(VC_PREFIX) {
        return Err(invalid("uses the reserved virtual-category prefix"));
    }
    Ok(())
}

impl Taxonomy {
    /// Builds and validates a tree from `(parent, child)` edges.
    ///
    /// The root is the unique label that never appears as a child. Repeated
    /// identical edges are collapsed.
    pub fn from_edges<I, P, C>(edges: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (P, C)>,
        P: AsRef<str>,
        C: AsRef<str>,
    {
        let mut parents_of: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut all: BTreeSet<String> = BTreeSet::new();
        let mut any = false;
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            check_label(p)?;
            check_label(c)?;
            if c == ROOT_LABEL {
                return Err(TaxonomyError::InvalidLabel {
                    label: c.to_string(),
                    reason: "the reserved root label cannot be a child",
                });
            }
            any = true;
            all.insert(p.to_string());
            all.insert(c.to_string());
            parents_of
                .entry(c.to_string())
                .or_default()
                .insert(p.to_string());
        }
        if !any {
            return Err(TaxonomyError::EmptyInput);
        }

        for (child, parents) in &parents_of {
            if parents.len() > 1 {
                return Err(TaxonomyError::MultipleParents {
                    child: child.clone(),
                    parents: parents.iter().cloned().collect(),
                });
            }
        }

        let roots: Vec<String> = all
            .iter()
            .filter(|l| !parents_of.contains_key(*l))
            .cloned()
            .collect();
        match roots.len() {
            0 => return Err(TaxonomyError::CycleDetected(all.into_iter().collect())),
            1 => {}
            _ => return Err(TaxonomyError::MultipleRoots(roots)),
        }

        let labels: Vec<String> = all.into_iter().collect();
        let ids: HashMap<String, NodeId> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), NodeId(i as u32)))
            .collect();
        let root = ids[&roots[0]];

        let mut parent = vec![None; labels.len()];
        let mut children = vec![Vec::new(); labels.len()];
        for (child, ps) in &parents_of {
            let c = ids[child];
            let p = ids[ps.iter().next().expect("non-empty parent set")];
            parent[c.index()] = Some(p);
            children[p.index()].push(c);
        }
        // Ids follow label order, so sorting ids sorts children lexicographically.
        for list in &mut children {
            list.sort_unstable();
        }

        // Every node has at most one parent and exactly one node has none, so
        // anything unreachable from the root sits on a cycle.
        let mut depth = vec![usize::MAX; labels.len()];
        let mut stack = vec![root];
        depth[root.index()] = 0;
        while let Some(n) = stack.pop() {
            for &c in &children[n.index()] {
                depth[c.index()] = depth[n.index()] + 1;
                stack.push(c);
            }
        }
        let unreached: Vec<String> = depth
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == usize::MAX)
            .map(|(i, _)| labels[i].clone())
            .collect();
        if !unreached.is_empty() {
            return Err(TaxonomyError::CycleDetected(unreached));
        }

        Ok(Taxonomy {
            labels,
            ids,
            parent,
            children,
            depth,
            root,
        })
    }

    /// Reads a hierarchy file: one `parent child` pair per line, `#` comment
    /// lines and blank lines ignored.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, TaxonomyError> {
        let mut edges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| TaxonomyError::Io(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            match (fields.next(), fields.next(), fields.next()) {
                (Some(p), Some(c), None) => edges.push((p.to_string(), c.to_string())),
                _ => {
                    return Err(TaxonomyError::Parse {
                        line: i + 1,
                        content: line,
                    })
                }
            }
        }
        Self::from_edges(edges)
    }

    /// Writes the hierarchy in the format accepted by [`Taxonomy::read`],
    /// edges in breadth-first order.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (p, c) in self.edges() {
            writeln!(out, "{}\t{}", self.label(p), self.label(c))?;
        }
        Ok(())
    }

    /// All `(parent, child)` edges, breadth-first from the root.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.len() - 1);
        let mut queue = std::collections::VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            for &c in self.children(n) {
                out.push((n, c));
                queue.push_back(c);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_label(&self) -> &str {
        self.label(self.root)
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.index()]
    }

    pub fn id(&self, label: &str) -> Result<NodeId, TaxonomyError> {
        self.ids
            .get(label)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownNode(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.ids.contains_key(label)
    }

    /// Node ids in lexicographic label order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.labels.len() as u32).map(NodeId)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id.index()]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.index()]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.children[id.index()].is_empty()
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.depth[id.index()]
    }

    /// The node and its proper ancestors, root excluded.
    pub fn ancestor_ids(&self, id: NodeId) -> AncestorSet {
        let mut members = Vec::with_capacity(self.depth(id));
        let mut cur = id;
        while cur != self.root {
            members.push(cur);
            cur = self.parent[cur.index()].expect("non-root has a parent");
        }
        AncestorSet { node: id, members }
    }

    pub fn ancestors(&self, label: &str) -> Result<AncestorSet, TaxonomyError> {
        Ok(self.ancestor_ids(self.id(label)?))
    }

    /// Path from the root down to `id`, both inclusive.
    pub fn path_from_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = self.ancestor_ids(id).members;
        path.push(self.root);
        path.reverse();
        if id == self.root {
            path.truncate(1);
        }
        path
    }

    /// Lowest common ancestor of two nodes; may be the root.
    pub fn lca_ids(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        while self.depth(a) > self.depth(b) {
            a = self.parent[a.index()].expect("deeper node has a parent");
        }
        while self.depth(b) > self.depth(a) {
            b = self.parent[b.index()].expect("deeper node has a parent");
        }
        while a != b {
            a = self.parent[a.index()].expect("non-root has a parent");
            b = self.parent[b.index()].expect("non-root has a parent");
        }
        a
    }

    pub fn lca(&self, a: &str, b: &str) -> Result<&str, TaxonomyError> {
        let l = self.lca_ids(self.id(a)?, self.id(b)?);
        Ok(self.label(l))
    }

    /// True when `ancestor` is `node` or lies above it.
    pub fn is_ancestor_or_self(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut cur = node;
        loop {
            if cur == ancestor {
                return true;
            }
            if self.depth(cur) <= self.depth(ancestor) {
                return false;
            }
            match self.parent(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// The node and all its descendants, in depth-first preorder.
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev());
        }
        out
    }

    pub fn subtree(&self, label: &str) -> Result<BTreeSet<String>, TaxonomyError> {
        let id = self.id(label)?;
        Ok(self
            .subtree_ids(id)
            .into_iter()
            .map(|n| self.label(n).to_string())
            .collect())
    }

    /// Nodes with at least one child: the root first, then the rest in
    /// lexicographic order.
    pub fn internal_node_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        if !self.is_leaf(self.root) {
            out.push(self.root);
        }
        out.extend(
            self.node_ids()
                .filter(|&n| n != self.root && !self.is_leaf(n)),
        );
        out
    }

    pub fn internal_nodes(&self) -> Vec<&str> {
        self.internal_node_ids()
            .into_iter()
            .map(|n| self.label(n))
            .collect()
    }

    /// For a node strictly below `ancestor`, the child of `ancestor` on the
    /// path down to it.
    pub fn child_towards(&self, ancestor: NodeId, node: NodeId) -> Option<NodeId> {
        if self.depth(node) <= self.depth(ancestor) {
            return None;
        }
        let mut cur = node;
        while self.depth(cur) > self.depth(ancestor) + 1 {
            cur = self.parent(cur)?;
        }
        (self.parent(cur) == Some(ancestor)).then_some(cur)
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            writeln!(f, "{:indent$}{}", "", self.label(n), indent = 2 * self.depth(n))?;
            stack.extend(self.children(n).iter().rev());
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::excerpt;
    use super::*;

    fn labels(tax: &Taxonomy, set: &AncestorSet) -> BTreeSet<String> {
        set.members
            .iter()
            .map(|&n| tax.label(n).to_string())
            .collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn chain_depths() {
        let tax = Taxonomy::from_edges([
            ("Root", "CCAT"),
            ("CCAT", "C15"),
            ("C15", "C151"),
            ("C151", "C1511"),
        ])
        .unwrap();
        assert_eq!(tax.depth(tax.id("C1511").unwrap()), 4);
        assert_eq!(tax.root_label(), "Root");
    }

    #[test]
    fn minimal_tree() {
        let tax = Taxonomy::from_edges([("Root", "A")]).unwrap();
        assert_eq!(tax.root_label(), "Root");
        assert_eq!(tax.children(tax.root()).len(), 1);
        assert_eq!(tax.internal_nodes(), vec!["Root"]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Taxonomy::from_edges([("A", "B"), ("B", "A")]),
            Err(TaxonomyError::CycleDetected(_))
        ));
        // Root present, but a detached cycle elsewhere.
        assert_eq!(
            Taxonomy::from_edges([("R", "A"), ("B", "C"), ("C", "B")]),
            Err(TaxonomyError::CycleDetected(vec!["B".into(), "C".into()]))
        );
        assert_eq!(
            Taxonomy::from_edges([("R", "A"), ("S", "B")]),
            Err(TaxonomyError::MultipleRoots(vec!["R".into(), "S".into()]))
        );
        assert_eq!(
            Taxonomy::from_edges([("R", "A"), ("R", "B"), ("A", "C"), ("B", "C")]),
            Err(TaxonomyError::MultipleParents {
                child: "C".into(),
                parents: vec!["A".into(), "B".into()]
            })
        );
        assert_eq!(
            Taxonomy::from_edges(Vec::<(&str, &str)>::new()),
            Err(TaxonomyError::EmptyInput)
        );
        assert!(matches!(
            Taxonomy::from_edges([("R", "VC:x")]),
            Err(TaxonomyError::InvalidLabel { .. })
        ));
        assert!(matches!(
            Taxonomy::from_edges([("X", "Root")]),
            Err(TaxonomyError::InvalidLabel { .. })
        ));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let a = Taxonomy::from_edges([("R", "A"), ("R", "A"), ("A", "B")]).unwrap();
        let b = Taxonomy::from_edges([("A", "B"), ("R", "A")]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_format() {
        let tax = excerpt();
        assert_eq!(tax.len(), 17);
        let err = Taxonomy::read("Root A\nA B C\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            TaxonomyError::Parse {
                line: 2,
                content: "A B C".into()
            }
        );
        let mut buf = Vec::new();
        tax.write(&mut buf).unwrap();
        assert_eq!(Taxonomy::read(buf.as_slice()).unwrap(), tax);
    }

    #[test]
    fn ancestor_sets() {
        let tax = excerpt();
        let a = tax.ancestors("C1511").unwrap();
        assert_eq!(labels(&tax, &a), set(&["C1511", "C151", "C15", "CCAT"]));
        assert!(tax.ancestors("Root").unwrap().is_empty());
        assert_eq!(labels(&tax, &tax.ancestors("CCAT").unwrap()), set(&["CCAT"]));
        assert_eq!(
            tax.ancestors("nope"),
            Err(TaxonomyError::UnknownNode("nope".into()))
        );
        for n in tax.node_ids() {
            assert_eq!(tax.ancestor_ids(n).len(), tax.depth(n));
        }
    }

    #[test]
    fn lowest_common_ancestor() {
        let tax = excerpt();
        assert_eq!(tax.lca("C151", "C152").unwrap(), "C15");
        assert_eq!(tax.lca("E131", "E131").unwrap(), "E131");
        assert_eq!(tax.lca("E131", "G151").unwrap(), "Root");
        assert_eq!(tax.lca("C1511", "C15").unwrap(), "C15");
        assert!(tax.lca("C15", "Z").is_err());
    }

    #[test]
    fn subtrees() {
        let tax = excerpt();
        assert_eq!(
            tax.subtree("C15").unwrap(),
            set(&["C15", "C151", "C1511", "C152"])
        );
        assert_eq!(tax.subtree("E131").unwrap(), set(&["E131"]));
        assert_eq!(tax.subtree("Root").unwrap().len(), tax.len());
    }

    #[test]
    fn internal_node_order() {
        let tax = excerpt();
        assert_eq!(
            tax.internal_nodes(),
            vec!["Root", "C15", "C151", "CCAT", "E12", "E13", "ECAT", "G15", "GCAT"]
        );
    }

    #[test]
    fn child_towards_descendant() {
        let tax = excerpt();
        let id = |l| tax.id(l).unwrap();
        assert_eq!(tax.child_towards(tax.root(), id("C1511")), Some(id("CCAT")));
        assert_eq!(tax.child_towards(id("C15"), id("C1511")), Some(id("C151")));
        assert_eq!(tax.child_towards(id("C15"), id("C15")), None);
        assert_eq!(tax.child_towards(id("E13"), id("C1511")), None);
    }

    #[test]
    fn path_from_root() {
        let tax = excerpt();
        let path: Vec<&str> = tax
            .path_from_root(tax.id("C151").unwrap())
            .into_iter()
            .map(|n| tax.label(n))
            .collect();
        assert_eq!(path, vec!["Root", "CCAT", "C15", "C151"]);
        assert_eq!(tax.path_from_root(tax.root()), vec![tax.root()]);
    }
}
