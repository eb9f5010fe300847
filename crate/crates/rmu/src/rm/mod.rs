//! Reward Machine domain types, stepping semantics, and validation.
//!
//! A Reward Machine is a finite automaton `⟨U, u0, F, AP, δ_u, δ_r⟩` whose
//! transitions are guarded by propositional formulas over `AP` and emit
//! scalar rewards. Edges are checked in declaration order; the first
//! satisfied guard fires. If no edge fires, an implicit self-loop with
//! reward 0 is taken, which makes every machine total.

mod parse;

pub use parse::{parse_rm, ParseError};

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RmError {
    #[error("duplicate proposition name `{0}`")]
    DuplicateProp(String),
    #[error("duplicate state id `{0}`")]
    DuplicateState(String),
    #[error("unknown target state `{0}`")]
    UnknownTarget(String),
    #[error("no state marked `init`")]
    MissingInitial,
    #[error("machine has no non-terminal states")]
    Empty,
    #[error("formula literal index {0} out of range for alphabet of size {1}")]
    LiteralOutOfRange(usize, usize),
    #[error("cannot step a terminal RM state (node {0})")]
    SteppedTerminal(usize),
    #[error("node index {0} out of range ({1} nodes)")]
    NodeOutOfRange(usize, usize),
}

/// A named atomic proposition together with its dense index in the alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropId {
    pub name: String,
    pub index: usize,
}

/// An ordered alphabet of atomic propositions with unique names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    props: Vec<PropId>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, RmError> {
        let mut props: Vec<PropId> = Vec::new();
        for name in names {
            let name = name.into();
            if props.iter().any(|p| p.name == name) {
                return Err(RmError::DuplicateProp(name));
            }
            let index = props.len();
            props.push(PropId { name, index });
        }
        Ok(Alphabet { props })
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn props(&self) -> &[PropId] {
        &self.props
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p.name == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.props[index].name
    }

    /// All `2^|AP|` truth assignments.
    pub fn assignments(&self) -> impl Iterator<Item = PropSet> {
        (0..(1u32 << self.len())).map(PropSet::from_bits)
    }
}

/// A truth assignment `σ ∈ 2^AP`, one bit per proposition index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PropSet {
    bits: u32,
}

impl PropSet {
    pub const EMPTY: PropSet = PropSet { bits: 0 };

    pub fn from_bits(bits: u32) -> Self {
        PropSet { bits }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn with(mut self, index: usize) -> Self {
        self.bits |= 1 << index;
        self
    }

    pub fn set(&mut self, index: usize, value: bool) {
        if value {
            self.bits |= 1 << index;
        } else {
            self.bits &= !(1 << index);
        }
    }

    pub fn contains(self, index: usize) -> bool {
        self.bits & (1 << index) != 0
    }

    pub fn union(self, other: PropSet) -> PropSet {
        PropSet { bits: self.bits | other.bits }
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }
}

/// Propositional guard over the alphabet: literals, `!`, `&`, `|`, constants.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Lit(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn lit(index: usize) -> Formula {
        Formula::Lit(index)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Conjunction of a list of formulas; empty list yields `true`.
    pub fn all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    pub fn eval(&self, sigma: PropSet) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Lit(i) => sigma.contains(*i),
            Formula::Not(f) => !f.eval(sigma),
            Formula::And(a, b) => a.eval(sigma) && b.eval(sigma),
            Formula::Or(a, b) => a.eval(sigma) || b.eval(sigma),
        }
    }

    fn max_literal(&self) -> Option<usize> {
        match self {
            Formula::True | Formula::False => None,
            Formula::Lit(i) => Some(*i),
            Formula::Not(f) => f.max_literal(),
            Formula::And(a, b) | Formula::Or(a, b) => a.max_literal().max(b.max_literal()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Not(..) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, alphabet: &Alphabet, min: u8, right: bool) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < min || (right && prec == min && matches!(self, Formula::And(..) | Formula::Or(..)));
        if parens {
            write!(f, "(")?;
        }
        match self {
            Formula::True => write!(f, "true")?,
            Formula::False => write!(f, "false")?,
            Formula::Lit(i) => write!(f, "{}", alphabet.name(*i))?,
            Formula::Not(inner) => {
                write!(f, "!")?;
                inner.fmt_prec(f, alphabet, 3, false)?;
            }
            Formula::And(a, b) => {
                a.fmt_prec(f, alphabet, 2, false)?;
                write!(f, " & ")?;
                b.fmt_prec(f, alphabet, 2, true)?;
            }
            Formula::Or(a, b) => {
                a.fmt_prec(f, alphabet, 1, false)?;
                write!(f, " | ")?;
                b.fmt_prec(f, alphabet, 1, true)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Helper for rendering a formula against a specific alphabet.
pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    alphabet: &'a Alphabet,
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.formula.fmt_prec(f, self.alphabet, 0, false)
    }
}

/// A guarded, reward-emitting edge. `target` is a node index that may be a
/// terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct RmEdge {
    pub guard: Formula,
    pub target: usize,
    pub reward: f64,
}

/// The `(δ_u(u,σ), δ_r(u,σ))` pair returned by [`rm_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmOutcome {
    pub next: usize,
    pub reward: f64,
}

/// A simple Reward Machine. Nodes `0..n_states` are the non-terminal states
/// `U` (in declaration order, with a designated initial state); nodes
/// `n_states..n_states + n_terminals` are the terminals `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMachine {
    alphabet: Alphabet,
    state_names: Vec<String>,
    terminal_names: Vec<String>,
    initial: usize,
    edges: Vec<Vec<RmEdge>>,
}

impl RewardMachine {
    pub fn new(
        alphabet: Alphabet,
        state_names: Vec<String>,
        terminal_names: Vec<String>,
        initial: usize,
        edges: Vec<Vec<RmEdge>>,
    ) -> Result<Self, RmError> {
        if state_names.is_empty() {
            return Err(RmError::Empty);
        }
        let mut seen: Vec<&str> = Vec::new();
        for name in state_names.iter().chain(terminal_names.iter()) {
            if seen.contains(&name.as_str()) {
                return Err(RmError::DuplicateState(name.clone()));
            }
            seen.push(name);
        }
        if initial >= state_names.len() {
            return Err(RmError::MissingInitial);
        }
        let n_nodes = state_names.len() + terminal_names.len();
        assert_eq!(edges.len(), state_names.len(), "one edge list per non-terminal state");
        for list in &edges {
            for edge in list {
                if edge.target >= n_nodes {
                    return Err(RmError::NodeOutOfRange(edge.target, n_nodes));
                }
                if let Some(i) = edge.guard.max_literal() {
                    if i >= alphabet.len() {
                        return Err(RmError::LiteralOutOfRange(i, alphabet.len()));
                    }
                }
            }
        }
        Ok(RewardMachine { alphabet, state_names, terminal_names, initial, edges })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_terminals(&self) -> usize {
        self.terminal_names.len()
    }

    /// Total node count `|U| + |F|`.
    pub fn n_nodes(&self) -> usize {
        self.state_names.len() + self.terminal_names.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        node >= self.state_names.len()
    }

    pub fn node_name(&self, node: usize) -> &str {
        if node < self.state_names.len() {
            &self.state_names[node]
        } else {
            &self.terminal_names[node - self.state_names.len()]
        }
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.state_names
            .iter()
            .chain(self.terminal_names.iter())
            .position(|n| n == name)
    }

    pub fn edges(&self, state: usize) -> &[RmEdge] {
        &self.edges[state]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn display_formula<'a>(&'a self, formula: &'a Formula) -> FormulaDisplay<'a> {
        FormulaDisplay { formula, alphabet: &self.alphabet }
    }
}

/// Standard propositional semantics of a guard.
pub fn eval_formula(f: &Formula, sigma: PropSet) -> bool {
    f.eval(sigma)
}

/// Steps the machine: first satisfied edge in declaration order fires; if
/// none fires, the implicit self-loop with reward 0 is taken.
pub fn rm_step(rm: &RewardMachine, u: usize, sigma: PropSet) -> Result<RmOutcome, RmError> {
    if u >= rm.n_nodes() {
        return Err(RmError::NodeOutOfRange(u, rm.n_nodes()));
    }
    if rm.is_terminal(u) {
        return Err(RmError::SteppedTerminal(u));
    }
    for edge in &rm.edges[u] {
        if edge.guard.eval(sigma) {
            return Ok(RmOutcome { next: edge.target, reward: edge.reward });
        }
    }
    Ok(RmOutcome { next: u, reward: 0.0 })
}

/// Non-failure findings reported by [`validate_rm`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Some assignment has no explicit edge; the implicit self-loop covers it.
    NonTotal { state: String, sigma: Vec<String> },
    /// Two or more edges fire on the same assignment; declaration order resolves it.
    Overlap { state: String, sigma: Vec<String>, edges: Vec<usize> },
    /// State cannot be reached from the initial state under any label sequence.
    Unreachable { state: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sigma_str = |sigma: &[String]| {
            if sigma.is_empty() { "{}".to_string() } else { format!("{{{}}}", sigma.join(", ")) }
        };
        match self {
            Diagnostic::NonTotal { state, sigma } => write!(
                f,
                "state `{state}` has no explicit edge for {} (implicit self-loop applies)",
                sigma_str(sigma)
            ),
            Diagnostic::Overlap { state, sigma, edges } => write!(
                f,
                "state `{state}`: edges {:?} all fire on {} (declaration order resolves)",
                edges,
                sigma_str(sigma)
            ),
            Diagnostic::Unreachable { state } => write!(f, "state `{state}` is unreachable from the initial state"),
        }
    }
}

/// Reports non-total states (before default-edge insertion), guard overlaps,
/// and unreachable states. These are informational, not failures.
pub fn validate_rm(rm: &RewardMachine) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let sigma_names = |sigma: PropSet| -> Vec<String> {
        (0..rm.alphabet.len())
            .filter(|&i| sigma.contains(i))
            .map(|i| rm.alphabet.name(i).to_string())
            .collect()
    };
    for u in 0..rm.n_states() {
        let mut non_total_example = None;
        for sigma in rm.alphabet.assignments() {
            let firing: Vec<usize> = rm.edges[u]
                .iter()
                .enumerate()
                .filter(|(_, e)| e.guard.eval(sigma))
                .map(|(i, _)| i)
                .collect();
            if firing.is_empty() && non_total_example.is_none() {
                non_total_example = Some(sigma);
            }
            if firing.len() > 1 {
                out.push(Diagnostic::Overlap {
                    state: rm.state_names[u].clone(),
                    sigma: sigma_names(sigma),
                    edges: firing,
                });
            }
        }
        if let Some(sigma) = non_total_example {
            out.push(Diagnostic::NonTotal { state: rm.state_names[u].clone(), sigma: sigma_names(sigma) });
        }
    }
    // Reachability over the total transition relation (defaults included).
    let mut reached = vec![false; rm.n_nodes()];
    let mut stack = vec![rm.initial];
    reached[rm.initial] = true;
    while let Some(u) = stack.pop() {
        if rm.is_terminal(u) {
            continue;
        }
        for sigma in rm.alphabet.assignments() {
            let next = rm_step(rm, u, sigma).expect("non-terminal").next;
            if !reached[next] {
                reached[next] = true;
                stack.push(next);
            }
        }
    }
    for u in 0..rm.n_states() {
        if !reached[u] {
            out.push(Diagnostic::Unreachable { state: rm.state_names[u].clone() });
        }
    }
    out
}

/// Serializes a machine back to DSL text. `parse_rm(format_rm(rm))` is
/// structurally equal to `rm`.
pub fn format_rm(rm: &RewardMachine) -> String {
    let mut out = String::new();
    let names: Vec<&str> = rm.alphabet.props().iter().map(|p| p.name.as_str()).collect();
    out.push_str(&format!("props {};\n", names.join(" ")));
    for (i, name) in rm.state_names.iter().enumerate() {
        if i == rm.initial {
            out.push_str(&format!("state {name} init;\n"));
        } else {
            out.push_str(&format!("state {name};\n"));
        }
    }
    for name in &rm.terminal_names {
        out.push_str(&format!("terminal {name};\n"));
    }
    for (u, list) in rm.edges.iter().enumerate() {
        for edge in list {
            out.push_str(&format!(
                "edge {} : {} -> {} @ {};\n",
                rm.state_names[u],
                rm.display_formula(&edge.guard),
                rm.node_name(edge.target),
                edge.reward
            ));
        }
    }
    out
}
