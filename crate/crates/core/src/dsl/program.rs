use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::parse::{parse, render};
use super::registry::{ModuleKind, ValueType};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProgramNode {
    pub module: ModuleKind,
    /// Question tokens of the string argument; present iff the module takes one.
    pub arg: Option<Vec<String>>,
    pub children: Vec<ProgramNode>,
}

impl ProgramNode {
    pub fn leaf(module: ModuleKind, arg: &str) -> Self {
        ProgramNode { module, arg: Some(arg.split_whitespace().map(String::from).collect()), children: Vec::new() }
    }

    pub fn unary(module: ModuleKind, child: ProgramNode) -> Self {
        ProgramNode { module, arg: None, children: alloc::vec![child] }
    }

    pub fn with_arg(module: ModuleKind, arg: &str, child: ProgramNode) -> Self {
        ProgramNode {
            module,
            arg: Some(arg.split_whitespace().map(String::from).collect()),
            children: alloc::vec![child],
        }
    }

    pub fn binary(module: ModuleKind, left: ProgramNode, right: ProgramNode) -> Self {
        ProgramNode { module, arg: None, children: alloc::vec![left, right] }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ProgramNode::node_count).sum::<usize>()
    }

    /// Arity and argument presence, recursively.
    pub fn is_structurally_valid(&self) -> bool {
        let arg_ok = match &self.arg {
            Some(tokens) => self.module.takes_string_arg() && !tokens.is_empty(),
            None => !self.module.takes_string_arg(),
        };
        arg_ok
            && self.children.len() == self.module.arity()
            && self.children.iter().all(ProgramNode::is_structurally_valid)
    }

    pub fn arg_text(&self) -> Option<String> {
        self.arg.as_ref().map(|t| t.join(" "))
    }
}

/// A typed program tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub root: ProgramNode,
}

impl Program {
    pub fn new(root: ProgramNode) -> Self {
        Program { root }
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn get(&self, path: &NodePath) -> Option<&ProgramNode> {
        let mut node = &self.root;
        for &i in &path.0 {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &NodePath) -> Option<&mut ProgramNode> {
        let mut node = &mut self.root;
        for &i in &path.0 {
            node = node.children.get_mut(i)?;
        }
        Some(node)
    }

    /// All node paths in preorder.
    pub fn paths(&self) -> Vec<NodePath> {
        fn walk(node: &ProgramNode, path: &mut Vec<usize>, out: &mut Vec<NodePath>) {
            out.push(NodePath(path.clone()));
            for (i, c) in node.children.iter().enumerate() {
                path.push(i);
                walk(c, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Paths of all nodes running `module`, in preorder.
    pub fn paths_of(&self, module: ModuleKind) -> Vec<NodePath> {
        self.paths().into_iter().filter(|p| self.get(p).map(|n| n.module) == Some(module)).collect()
    }

    pub fn output_type(&self) -> ValueType {
        self.root.module.output_type()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

impl FromStr for Program {
    type Err = super::parse::SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render(self))
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Child-index path from the root; the empty path is the root.
///
/// Textual form is `/` for the root and `/0/1` for deeper nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        NodePath(v)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid node path {0:?}")]
pub struct PathParseError(pub String);

impl FromStr for NodePath {
    type Err = PathParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "/" {
            return Ok(NodePath::root());
        }
        let rest = s.strip_prefix('/').ok_or_else(|| PathParseError(s.to_string()))?;
        rest.split('/')
            .map(|p| p.parse::<usize>().map_err(|_| PathParseError(s.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(NodePath)
    }
}

impl Serialize for NodePath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodePath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("type error at {path}: expected {expected}, found {found}")]
pub struct TypeError {
    pub path: NodePath,
    pub expected: ValueType,
    pub found: ValueType,
}

/// Checks that every child's output kind matches its parent's input slot.
///
/// Errors are reported at the child's path.
pub fn typecheck(p: &Program) -> Vec<TypeError> {
    fn walk(node: &ProgramNode, path: &NodePath, out: &mut Vec<TypeError>) {
        let inputs = node.module.spec().input_types;
        for (i, child) in node.children.iter().enumerate() {
            let cp = path.child(i);
            if let Some(&expected) = inputs.get(i) {
                let found = child.module.output_type();
                if found != expected {
                    out.push(TypeError { path: cp.clone(), expected, found });
                }
            }
            walk(child, &cp, out);
        }
    }
    let mut out = Vec::new();
    walk(&p.root, &NodePath::root(), &mut out);
    out
}

/// [`typecheck`] plus the requirement that the root decodes to an answer.
pub fn typecheck_full(p: &Program) -> Vec<TypeError> {
    let mut errors = typecheck(p);
    if !p.root.module.is_answer_root() {
        errors.insert(0, TypeError { path: NodePath::root(), expected: ValueType::Answer, found: p.output_type() });
    }
    errors
}

/// Every subtree with its path, in preorder.
pub fn enumerate_subtrees(p: &Program) -> Vec<(NodePath, Program)> {
    fn walk(node: &ProgramNode, path: NodePath, out: &mut Vec<(NodePath, Program)>) {
        out.push((path.clone(), Program::new(node.clone())));
        for (i, c) in node.children.iter().enumerate() {
            walk(c, path.child(i), out);
        }
    }
    let mut out = Vec::new();
    walk(&p.root, NodePath::root(), &mut out);
    out
}

/// A program skeleton with all string arguments erased.
///
/// Rendered like a program but without brackets, e.g. `count(filter(find))`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateSignature(pub String);

impl TemplateSignature {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TemplateSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn template_signature(p: &Program) -> TemplateSignature {
    fn walk(node: &ProgramNode, out: &mut String) {
        out.push_str(node.module.name());
        if !node.children.is_empty() {
            out.push('(');
            for (i, c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                walk(c, out);
            }
            out.push(')');
        }
    }
    let mut s = String::new();
    walk(&p.root, &mut s);
    TemplateSignature(s)
}
