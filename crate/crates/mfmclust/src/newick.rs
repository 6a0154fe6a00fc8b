//! Newick tree text.
//!
//! Branch lengths, internal node labels and bracketed comments are accepted
//! and discarded except that internal labels are kept on the node. Labels may
//! be single-quoted; `''` inside quotes is a literal quote and `_` in an
//! unquoted label reads as a space.

use std::collections::HashSet;

use mfmclust_core::{PhyloTree, TreeBuilder};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("newick parse error at offset {offset}: {message}")]
pub struct NewickError {
    /// Character offset into the input.
    pub offset: usize,
    pub message: String,
}

fn err(offset: usize, message: impl Into<String>) -> NewickError {
    NewickError {
        offset,
        message: message.into(),
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    builder: TreeBuilder,
    leaves: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_space(&mut self) -> Result<(), NewickError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => self.pos += 1,
                Some('[') => {
                    let start = self.pos;
                    while self.peek() != Some(']') {
                        if self.peek().is_none() {
                            return Err(err(start, "unterminated comment"));
                        }
                        self.pos += 1;
                    }
                    self.pos += 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>, NewickError> {
        self.skip_space()?;
        if self.peek() == Some('\'') {
            let start = self.pos;
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(err(start, "unterminated quoted label")),
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        out.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            return Ok(Some(out));
        }
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if "(),:;[".contains(c) || c.is_whitespace() {
                break;
            }
            out.push(if c == '_' { ' ' } else { c });
            self.pos += 1;
        }
        Ok((!out.is_empty()).then_some(out))
    }

    fn branch_length(&mut self) -> Result<(), NewickError> {
        self.skip_space()?;
        if self.peek() != Some(':') {
            return Ok(());
        }
        self.pos += 1;
        self.skip_space()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || "+-.eE".contains(c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map_err(|_| err(start, format!("invalid branch length {text:?}")))?;
        Ok(())
    }

    /// Parses one subtree whose node is attached under `parent`.
    fn subtree(&mut self, parent: Option<usize>) -> Result<(), NewickError> {
        self.skip_space()?;
        let start = self.pos;
        let node = self.builder.add_node(parent, None).map_err(|e| err(start, e.to_string()))?;
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                self.subtree(Some(node))?;
                self.skip_space()?;
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => return Err(err(self.pos, format!("expected ',' or ')', found {c:?}"))),
                    None => return Err(err(self.pos, "unbalanced parentheses: missing ')'")),
                }
            }
            let label = self.label()?;
            self.builder.set_label(node, label);
        } else {
            let at = self.pos;
            match self.label()? {
                Some(l) => {
                    if !self.leaves.insert(l.clone()) {
                        return Err(err(at, format!("duplicate leaf label {l:?}")));
                    }
                    self.builder.set_label(node, Some(l));
                }
                None => return Err(err(at, "leaf without a label")),
            }
        }
        self.branch_length()
    }
}

pub fn parse_newick(text: &str) -> Result<PhyloTree, NewickError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        builder: TreeBuilder::new(),
        leaves: HashSet::new(),
    };
    p.skip_space()?;
    if p.peek().is_none() || p.peek() == Some(';') {
        return Err(err(p.pos, "empty tree"));
    }
    p.subtree(None)?;
    p.skip_space()?;
    match p.peek() {
        Some(';') => p.pos += 1,
        Some(')') => return Err(err(p.pos, "unbalanced parentheses: unexpected ')'")),
        Some(c) => return Err(err(p.pos, format!("expected ';', found {c:?}"))),
        None => return Err(err(p.pos, "missing terminating ';'")),
    }
    p.skip_space()?;
    if p.pos < p.chars.len() {
        return Err(err(p.pos, "trailing characters after ';'"));
    }
    let end = p.pos;
    p.builder.build().map_err(|e| err(end, e.to_string()))
}

fn write_label(out: &mut String, label: &str) {
    let plain = !label.is_empty()
        && label
            .chars()
            .all(|c| !"(),:;[]'_".contains(c) && !c.is_whitespace() || c == ' ');
    if plain {
        out.extend(label.chars().map(|c| if c == ' ' { '_' } else { c }));
    } else {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    }
}

/// Topology-only Newick text for `tree`, children in stored order.
pub fn write_newick(tree: &PhyloTree) -> String {
    fn go(tree: &PhyloTree, v: usize, out: &mut String) {
        let kids = tree.children(v);
        if !kids.is_empty() {
            out.push('(');
            for (k, &c) in kids.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                go(tree, c, out);
            }
            out.push(')');
        }
        if let Some(l) = &tree.node(v).label {
            write_label(out, l);
        }
    }
    let mut out = String::new();
    go(tree, tree.root(), &mut out);
    out.push(';');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_tree() {
        let t = parse_newick("(A,B);").unwrap();
        assert_eq!(t.internal_nodes().len(), 1);
        assert_eq!(t.children(t.root()).len(), 2);
    }

    #[test]
    fn balanced_four() {
        let t = parse_newick("((A,B),(C,D));").unwrap();
        assert_eq!(t.internal_nodes().len(), 3);
        assert_eq!(t.children(t.root()).len(), 2);
    }

    #[test]
    fn lengths_comments_and_labels() {
        let t = parse_newick(" ((A:0.1,B:2e-3)x:1,[note]'C d':0.5)root;\n").unwrap();
        let labels: Vec<&str> = t.leaf_labels().collect();
        assert_eq!(labels, ["A", "B", "C d"]);
    }

    #[test]
    fn unary_chains_collapse() {
        let t = parse_newick("(((A,B)),C);").unwrap();
        assert_eq!(t.internal_nodes().len(), 2);
        let e = parse_newick("((A));").unwrap_err();
        assert!(e.message.contains("leaves") || e.message.contains("leaf"), "{e}");
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse_newick("((A,B);").unwrap_err().offset, 6);
        assert_eq!(parse_newick("(A,B));").unwrap_err().offset, 5);
        let dup = parse_newick("(A,(B,A));").unwrap_err();
        assert_eq!(dup.offset, 6);
        assert!(dup.message.contains("duplicate"));
        assert_eq!(parse_newick("   ").unwrap_err().offset, 3);
        assert!(parse_newick("(A,B)").is_err());
        assert!(parse_newick("(A,B:x);").is_err());
    }

    #[test]
    fn roundtrip() {
        let text = "((A,B),(C,'it''s',E),F);";
        let t = parse_newick(text).unwrap();
        let again = parse_newick(&write_newick(&t)).unwrap();
        assert_eq!(write_newick(&t), write_newick(&again));
        assert_eq!(write_newick(&t), text);
    }
}
