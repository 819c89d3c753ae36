//! Constituency trees, Penn-Treebank bracket I/O and structural queries.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Label of disfluent reparandum nodes.
pub const EDITED: &str = "EDITED";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("internal node `{0}` has no children")]
    InternalNodeWithoutChildren(String),
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("trailing input after tree: `{0}`")]
    TrailingInput(String),
    #[error("head rules line {line}: {message}")]
    HeadRules { line: usize, message: String },
}

/// A constituency tree over a word yield.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Internal { label: String, children: Vec<Tree> },
    Leaf(String),
}

/// A labeled span `(label, start, end)` over fencepost indices of the yield.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constituent {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// A head-percolated `(head, dependent, relation)` tuple. Words are case-folded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependencyTuple {
    pub head: String,
    pub dependent: String,
    pub relation: String,
}

impl Tree {
    pub fn leaf(word: impl Into<String>) -> Tree {
        Tree::Leaf(word.into())
    }

    /// Builds an internal node. Panics on an empty child list.
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        let label = label.into();
        assert!(!children.is_empty(), "internal node `{label}` without children");
        Tree::Internal { label, children }
    }

    /// Preterminal `(tag word)`.
    pub fn preterminal(tag: impl Into<String>, word: impl Into<String>) -> Tree {
        Tree::node(tag, vec![Tree::leaf(word)])
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tree::Internal { label, .. } => Some(label),
            Tree::Leaf(_) => None,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Internal { children, .. } => children,
            Tree::Leaf(_) => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    pub fn is_preterminal(&self) -> bool {
        matches!(self, Tree::Internal { children, .. } if children.len() == 1 && children[0].is_leaf())
    }

    /// The leaf words, left to right.
    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf(w) => out.push(w),
            Tree::Internal { children, .. } => children.iter().for_each(|c| c.collect_words(out)),
        }
    }

    pub fn yield_len(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Internal { children, .. } => children.iter().map(Tree::yield_len).sum(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Internal { children, .. } => 1 + children.iter().map(Tree::internal_count).sum::<usize>(),
        }
    }

    /// Copy of the tree with every subtree rooted at `label` removed. Internal
    /// nodes left without children are removed too; `None` if nothing remains.
    pub fn without_label(&self, label: &str) -> Option<Tree> {
        match self {
            Tree::Leaf(_) => Some(self.clone()),
            Tree::Internal { label: l, .. } if l == label => None,
            Tree::Internal { label: l, children } => {
                let kept: Vec<Tree> = children.iter().filter_map(|c| c.without_label(label)).collect();
                if kept.is_empty() {
                    None
                } else {
                    Some(Tree::Internal { label: l.clone(), children: kept })
                }
            }
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(w) => f.write_str(w),
            Tree::Internal { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Tree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Tree, TreeError> {
        parse_ptb(s)
    }
}

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token::Atom(&text[s..i]));
            }
            match c {
                '(' => tokens.push(Token::Open),
                ')' => tokens.push(Token::Close),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token::Atom(&text[s..]));
    }
    tokens
}

/// Parses a single bracketed tree. An unlabeled outer wrapper `( (S ...) )`
/// around a single tree is stripped.
pub fn parse_ptb(text: &str) -> Result<Tree, TreeError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(TreeError::EmptyInput);
    }
    let mut pos = 0;
    let tree = parse_node(&tokens, &mut pos)?;
    if pos < tokens.len() {
        return Err(match tokens[pos] {
            Token::Close => TreeError::UnbalancedParens,
            _ => TreeError::TrailingInput(render_tokens(&tokens[pos..])),
        });
    }
    Ok(tree)
}

fn render_tokens(tokens: &[Token<'_>]) -> String {
    tokens
        .iter()
        .map(|t| match t {
            Token::Open => "(",
            Token::Close => ")",
            Token::Atom(a) => a,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_node(tokens: &[Token<'_>], pos: &mut usize) -> Result<Tree, TreeError> {
    match tokens.get(*pos) {
        None => return Err(TreeError::UnbalancedParens),
        Some(Token::Close) => return Err(TreeError::UnbalancedParens),
        Some(Token::Atom(a)) => return Err(TreeError::UnexpectedToken(a.to_string())),
        Some(Token::Open) => *pos += 1,
    }
    let label = match tokens.get(*pos) {
        Some(Token::Atom(a)) => {
            *pos += 1;
            Some(a.to_string())
        }
        Some(_) => None,
        None => return Err(TreeError::UnbalancedParens),
    };
    let mut children = Vec::new();
    loop {
        match tokens.get(*pos) {
            None => return Err(TreeError::UnbalancedParens),
            Some(Token::Close) => {
                *pos += 1;
                break;
            }
            Some(Token::Open) => children.push(parse_node(tokens, pos)?),
            Some(Token::Atom(a)) => {
                if label.is_none() {
                    return Err(TreeError::UnexpectedToken(a.to_string()));
                }
                children.push(Tree::Leaf(a.to_string()));
                *pos += 1;
            }
        }
    }
    match label {
        Some(label) if children.is_empty() => Err(TreeError::InternalNodeWithoutChildren(label)),
        Some(label) => Ok(Tree::Internal { label, children }),
        None if children.len() == 1 => Ok(children.pop().unwrap()),
        None if children.is_empty() => Err(TreeError::InternalNodeWithoutChildren(String::new())),
        None => Err(TreeError::UnexpectedToken("(".to_string())),
    }
}

/// Canonical single-line bracketing.
pub fn write_ptb(tree: &Tree) -> String {
    tree.to_string()
}

/// One constituent per qualifying internal node, in pre-order.
pub fn constituents(tree: &Tree, include_preterminals: bool, include_edited: bool) -> Vec<Constituent> {
    let mut out = Vec::new();
    collect_constituents(tree, 0, include_preterminals, include_edited, &mut out);
    out
}

fn collect_constituents(
    tree: &Tree,
    start: usize,
    include_preterminals: bool,
    include_edited: bool,
    out: &mut Vec<Constituent>,
) -> usize {
    match tree {
        Tree::Leaf(_) => start + 1,
        Tree::Internal { label, children } => {
            let slot = out.len();
            let keep = (include_preterminals || !tree.is_preterminal()) && (include_edited || label != EDITED);
            if keep {
                out.push(Constituent { label: label.clone(), start, end: start });
            }
            let mut end = start;
            for c in children {
                end = collect_constituents(c, end, include_preterminals, include_edited, out);
            }
            if keep {
                out[slot].end = end;
            }
            end
        }
    }
}

/// Longest root-to-leaf path counted in internal nodes.
pub fn depth(tree: &Tree) -> usize {
    match tree {
        Tree::Leaf(_) => 0,
        Tree::Internal { children, .. } => 1 + children.iter().map(depth).max().unwrap_or(0),
    }
}

pub fn count_label(tree: &Tree, label: &str) -> usize {
    match tree {
        Tree::Leaf(_) => 0,
        Tree::Internal { label: l, children } => {
            usize::from(l == label) + children.iter().map(|c| count_label(c, label)).sum::<usize>()
        }
    }
}

/// Search direction over a node's children when looking for its head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "left" | "l" | "left-to-right" => Ok(Direction::LeftToRight),
            "right" | "r" | "right-to-left" => Ok(Direction::RightToLeft),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::LeftToRight => "left",
            Direction::RightToLeft => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadRule {
    pub direction: Direction,
    /// Child label patterns in priority order. A trailing `*` matches by prefix.
    pub priorities: Vec<String>,
}

/// Per-parent head-child selection rules.
///
/// For a parent with a rule, each priority pattern is tried in order and the
/// children are scanned in the rule's direction; the first match is the head.
/// If no pattern matches (or the parent has no rule) the first child in the
/// search direction is the head. Leaf children never match a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadRules {
    rules: HashMap<String, HeadRule>,
    default_direction: Direction,
}

const DEFAULT_HEAD_RULES: &str = "\
# parent direction priority...
ADJP left NNS QP NN $ ADVP JJ* VB* ADJP
ADVP right RB* ADVP
CONJP right CC RB IN
FRAG right
INTJ left UH INTJ
NP right NN* NX POS JJR NP PRP CD
PP left IN TO VBG VBN RP FW
PRN left
PRT right RP
QP left CD $ IN NNS NN JJ RB
S left VP S SBAR ADJP UCP NP
SBAR left WH* IN DT S SQ SINV SBAR FRAG
SBARQ left SQ S SINV SBARQ FRAG
SINV left VB* MD VP S SINV
SQ left VB* MD VP SQ
UCP right
VP left VB* TO MD VP ADJP NN* NP
WHNP left WDT WP WP$ WHADJP WHPP WHNP
* right
";

impl Default for HeadRules {
    fn default() -> Self {
        HeadRules::parse(DEFAULT_HEAD_RULES).expect("built-in head rules parse")
    }
}

impl HeadRules {
    pub fn new(default_direction: Direction) -> Self {
        HeadRules { rules: HashMap::new(), default_direction }
    }

    pub fn with_rule(mut self, parent: &str, direction: Direction, priorities: &[&str]) -> Self {
        self.insert(parent, direction, priorities.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn insert(&mut self, parent: &str, direction: Direction, priorities: Vec<String>) {
        self.rules.insert(parent.to_string(), HeadRule { direction, priorities });
    }

    pub fn default_direction(&self) -> Direction {
        self.default_direction
    }

    pub fn rule(&self, parent: &str) -> Option<&HeadRule> {
        self.rules.get(parent)
    }

    /// Reads the plain-text table: `LABEL direction child1 child2 ...` per line,
    /// `*` as LABEL sets the default direction, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TreeError> {
        let mut rules = HeadRules::new(Direction::RightToLeft);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parent = fields.next().unwrap();
            let direction = fields
                .next()
                .ok_or_else(|| TreeError::HeadRules { line: i + 1, message: "missing direction".into() })?
                .parse::<Direction>()
                .map_err(|message| TreeError::HeadRules { line: i + 1, message })?;
            if parent == "*" {
                rules.default_direction = direction;
            } else {
                rules.insert(parent, direction, fields.map(str::to_string).collect());
            }
        }
        Ok(rules)
    }

    /// Serializes to the text format read by [`HeadRules::parse`], sorted by label.
    pub fn to_text(&self) -> String {
        let mut labels: Vec<&String> = self.rules.keys().collect();
        labels.sort();
        let mut out = String::new();
        for label in labels {
            let rule = &self.rules[label];
            out.push_str(label);
            out.push(' ');
            out.push_str(&rule.direction.to_string());
            for p in &rule.priorities {
                out.push(' ');
                out.push_str(p);
            }
            out.push('\n');
        }
        out.push_str(&format!("* {}\n", self.default_direction));
        out
    }

    /// Index of the head child of `parent` among `children` (non-empty).
    pub fn head_child(&self, parent: &str, children: &[Tree]) -> usize {
        debug_assert!(!children.is_empty());
        let (direction, priorities) = match self.rules.get(parent) {
            Some(rule) => (rule.direction, rule.priorities.as_slice()),
            None => (self.default_direction, &[][..]),
        };
        let order: Vec<usize> = match direction {
            Direction::LeftToRight => (0..children.len()).collect(),
            Direction::RightToLeft => (0..children.len()).rev().collect(),
        };
        for pattern in priorities {
            let hit = order
                .iter()
                .copied()
                .find(|&i| children[i].label().is_some_and(|l| label_matches(pattern, l)));
            if let Some(i) = hit {
                return i;
            }
        }
        order[0]
    }
}

fn label_matches(pattern: &str, label: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => label.starts_with(prefix),
        None => pattern == label,
    }
}

/// Head-percolated dependencies, one per non-head child of every internal node.
pub fn dependencies(tree: &Tree, rules: &HeadRules) -> Vec<DependencyTuple> {
    let mut out = Vec::new();
    percolate(tree, rules, &mut out);
    out
}

fn percolate(tree: &Tree, rules: &HeadRules, out: &mut Vec<DependencyTuple>) -> String {
    match tree {
        Tree::Leaf(w) => w.to_lowercase(),
        Tree::Internal { label, children } => {
            let heads: Vec<String> = children.iter().map(|c| percolate(c, rules, out)).collect();
            let h = rules.head_child(label, children);
            for (i, dep) in heads.iter().enumerate() {
                if i != h {
                    out.push(DependencyTuple {
                        head: heads[h].clone(),
                        dependent: dep.clone(),
                        relation: label.clone(),
                    });
                }
            }
            heads[h].clone()
        }
    }
}
