//! Fixed-template genotypes.
//!
//! Every solution is a perfect `r`-ary tree of height `h`, stored as a flat
//! array of symbols in pre-order. All positions are always filled; positions
//! that are not reachable from the root under arity semantics are introns.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::data::FeatureMatrix;

/// Errors raised when building symbol sets or genotypes.
#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("function set is empty")]
    NoFunctions,
    #[error("terminal set is empty (no features and no ERC)")]
    NoTerminals,
    #[error("invalid ERC bounds [{lo}, {hi}]")]
    InvalidErcBounds { lo: f64, hi: f64 },
    #[error("genotype has {got} symbols, template needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("function at leaf position {0}")]
    FunctionAtLeaf(usize),
    #[error("function with arity {arity} at position {position} exceeds template arity {max}")]
    ArityTooLarge { position: usize, arity: usize, max: usize },
    #[error("constant at position {0} is not finite")]
    NonFiniteConstant(usize),
    #[error("template arity must be at least 1")]
    ZeroArity,
}

/// Number of nodes of a perfect `r`-ary tree of height `h`.
pub fn template_size(height: usize, arity: usize) -> usize {
    assert!(arity >= 1, "template arity must be at least 1");
    if arity == 1 {
        return height + 1;
    }
    (arity.pow(height as u32 + 1) - 1) / (arity - 1)
}

/// Operators available to function nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Mul,
    /// Analytic quotient, `a / sqrt(1 + b^2)`.
    Aq,
    Sin,
    Cos,
    Exp,
}

impl Op {
    pub const ALL: [Op; 7] = [Op::Add, Op::Sub, Op::Mul, Op::Aq, Op::Sin, Op::Cos, Op::Exp];

    pub fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Aq => 2,
            Op::Sin | Op::Cos | Op::Exp => 1,
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Aq => "aq",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Scalar application. `args` must hold exactly `arity()` values.
    pub fn apply(self, args: &[f64]) -> f64 {
        match self {
            Op::Add => args[0] + args[1],
            Op::Sub => args[0] - args[1],
            Op::Mul => args[0] * args[1],
            Op::Aq => args[0] / (1.0 + args[1] * args[1]).sqrt(),
            Op::Sin => args[0].sin(),
            Op::Cos => args[0].cos(),
            Op::Exp => args[0].exp(),
        }
    }

    fn apply_unary_in_place(self, a: &mut [f64]) {
        let f: fn(f64) -> f64 = match self {
            Op::Sin => f64::sin,
            Op::Cos => f64::cos,
            Op::Exp => f64::exp,
            _ => unreachable!("binary operator applied as unary"),
        };
        a.iter_mut().for_each(|v| *v = f(*v));
    }

    fn apply_binary_in_place(self, a: &mut [f64], b: &[f64]) {
        let pairs = a.iter_mut().zip(b);
        match self {
            Op::Add => pairs.for_each(|(x, y)| *x += y),
            Op::Sub => pairs.for_each(|(x, y)| *x -= y),
            Op::Mul => pairs.for_each(|(x, y)| *x *= y),
            Op::Aq => pairs.for_each(|(x, y)| *x /= (1.0 + y * y).sqrt()),
            _ => unreachable!("unary operator applied as binary"),
        }
    }
}

/// A node label: a function, a feature reference, or a constant.
///
/// Constants compare by bit pattern, so two symbols are equal exactly when
/// they behave identically.
#[derive(Clone, Copy, Debug)]
pub enum Symbol {
    Function(Op),
    Feature(usize),
    Constant(f64),
}

impl Symbol {
    pub fn arity(&self) -> usize {
        match self {
            Symbol::Function(op) => op.arity(),
            _ => 0,
        }
    }

    pub fn is_function(&self) -> bool {
        matches!(self, Symbol::Function(_))
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Symbol::Function(a), Symbol::Function(b)) => a == b,
            (Symbol::Feature(a), Symbol::Feature(b)) => a == b,
            (Symbol::Constant(a), Symbol::Constant(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Symbol {}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Function(op) => f.write_str(op.name()),
            Symbol::Feature(j) => write!(f, "x{j}"),
            Symbol::Constant(c) => write!(f, "{c}"),
        }
    }
}

/// Closed interval from which ephemeral random constants are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErcRange {
    pub lo: f64,
    pub hi: f64,
}

impl ErcRange {
    /// Bounds spanning every entry of the matrix (`[min x, max x]`).
    pub fn from_features(x: &FeatureMatrix) -> Option<ErcRange> {
        let (lo, hi) = x.value_range()?;
        Some(ErcRange { lo, hi })
    }
}

/// Function and terminal sets shared by every tree of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSets {
    functions: Vec<Op>,
    n_features: usize,
    erc: Option<ErcRange>,
}

impl SymbolSets {
    pub fn new(functions: Vec<Op>, n_features: usize, erc: Option<ErcRange>) -> Result<Self, TreeError> {
        if functions.is_empty() {
            return Err(TreeError::NoFunctions);
        }
        if n_features == 0 && erc.is_none() {
            return Err(TreeError::NoTerminals);
        }
        if let Some(ErcRange { lo, hi }) = erc {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(TreeError::InvalidErcBounds { lo, hi });
            }
        }
        Ok(SymbolSets {
            functions,
            n_features,
            erc,
        })
    }

    /// `{+, -, *, aq}` over `n_features` features, optionally with an ERC.
    pub fn standard(n_features: usize, erc: Option<ErcRange>) -> Result<Self, TreeError> {
        SymbolSets::new(vec![Op::Add, Op::Sub, Op::Mul, Op::Aq], n_features, erc)
    }

    pub fn functions(&self) -> &[Op] {
        &self.functions
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn erc(&self) -> Option<ErcRange> {
        self.erc
    }

    /// Template arity `r`: the largest function arity.
    pub fn arity(&self) -> usize {
        self.functions.iter().map(|op| op.arity()).max().unwrap_or(1)
    }

    pub fn sample_function<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        Symbol::Function(self.functions[rng.random_range(0..self.functions.len())])
    }

    /// Uniform over the `d` features plus one slot for the ERC, if present.
    pub fn sample_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        let options = self.n_features + usize::from(self.erc.is_some());
        let pick = rng.random_range(0..options);
        match self.erc {
            Some(ErcRange { lo, hi }) if pick == self.n_features => Symbol::Constant(rng.random_range(lo..=hi)),
            _ => Symbol::Feature(pick),
        }
    }
}

/// Shape of a perfect `r`-ary tree of height `h`, with pre-order index arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    height: usize,
    arity: usize,
    len: usize,
}

impl Template {
    pub fn new(height: usize, arity: usize) -> Result<Self, TreeError> {
        if arity == 0 {
            return Err(TreeError::ZeroArity);
        }
        Ok(Template {
            height,
            arity,
            len: template_size(height, arity),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Size of a subtree rooted at `depth`.
    pub fn subtree_size(&self, depth: usize) -> usize {
        template_size(self.height - depth, self.arity)
    }

    /// Position of the `k`-th child of the node at `position`, which sits at `depth`.
    pub fn child(&self, position: usize, depth: usize, k: usize) -> usize {
        debug_assert!(depth < self.height && k < self.arity);
        position + 1 + k * self.subtree_size(depth + 1)
    }

    pub fn depth(&self, position: usize) -> usize {
        self.descend(position).0
    }

    pub fn parent(&self, position: usize) -> Option<usize> {
        self.descend(position).1
    }

    /// Children of `position`, empty at maximum depth.
    pub fn children(&self, position: usize) -> Vec<usize> {
        let depth = self.depth(position);
        if depth == self.height {
            return Vec::new();
        }
        (0..self.arity).map(|k| self.child(position, depth, k)).collect()
    }

    /// Walks from the root to `position`, returning its depth and parent.
    fn descend(&self, position: usize) -> (usize, Option<usize>) {
        assert!(position < self.len, "position {position} out of template");
        let (mut node, mut depth, mut parent) = (0, 0, None);
        while node != position {
            let child_size = self.subtree_size(depth + 1);
            let k = (position - node - 1) / child_size;
            parent = Some(node);
            node = node + 1 + k * child_size;
            depth += 1;
        }
        (depth, parent)
    }
}

/// A genotype: `template.len()` symbols in pre-order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenotypeTree {
    template: Template,
    symbols: Vec<Symbol>,
}

impl GenotypeTree {
    pub fn new(template: Template, symbols: Vec<Symbol>) -> Result<Self, TreeError> {
        if symbols.len() != template.len() {
            return Err(TreeError::LengthMismatch {
                expected: template.len(),
                got: symbols.len(),
            });
        }
        for (position, symbol) in symbols.iter().enumerate() {
            match *symbol {
                Symbol::Function(op) => {
                    if template.depth(position) == template.height() {
                        return Err(TreeError::FunctionAtLeaf(position));
                    }
                    if op.arity() > template.arity() {
                        return Err(TreeError::ArityTooLarge {
                            position,
                            arity: op.arity(),
                            max: template.arity(),
                        });
                    }
                }
                Symbol::Constant(c) if !c.is_finite() => return Err(TreeError::NonFiniteConstant(position)),
                _ => {}
            }
        }
        Ok(GenotypeTree { template, symbols })
    }

    pub fn template(&self) -> Template {
        self.template
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, position: usize) -> Symbol {
        self.symbols[position]
    }

    /// Overwrites the symbols at `positions` with those of `donor`.
    ///
    /// Both trees must share the template.
    pub fn copy_from(&mut self, donor: &GenotypeTree, positions: &[usize]) {
        debug_assert_eq!(self.template, donor.template);
        for &p in positions {
            self.symbols[p] = donor.symbols[p];
        }
    }

    /// Replaces one symbol, re-validating the genotype.
    pub fn set_symbol(&mut self, position: usize, symbol: Symbol) -> Result<(), TreeError> {
        let mut symbols = self.symbols.clone();
        symbols[position] = symbol;
        *self = GenotypeTree::new(self.template, symbols)?;
        Ok(())
    }

    /// Pre-order positions that influence the output, in ascending order.
    pub fn active_nodes(&self) -> Vec<usize> {
        let mut active = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((p, depth)) = stack.pop() {
            active.push(p);
            let arity = self.symbols[p].arity();
            for k in (0..arity).rev() {
                stack.push((self.template.child(p, depth, k), depth + 1));
            }
        }
        // pre-order traversal already yields ascending positions
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        active
    }

    /// Highest feature index referenced by an active node.
    pub fn max_active_feature(&self) -> Option<usize> {
        self.active_nodes()
            .into_iter()
            .filter_map(|p| match self.symbols[p] {
                Symbol::Feature(j) => Some(j),
                _ => None,
            })
            .max()
    }

    /// Output for every row of `x`.
    pub fn evaluate(&self, x: &FeatureMatrix) -> Vec<f64> {
        Evaluator::default().evaluate(self, x)
    }

    /// Parenthesized infix rendering of the active subtree.
    pub fn to_infix(&self) -> String {
        let mut out = String::new();
        self.write_infix(0, 0, &mut out);
        out
    }

    fn write_infix(&self, p: usize, depth: usize, out: &mut String) {
        use std::fmt::Write;
        match self.symbols[p] {
            Symbol::Feature(j) => write!(out, "x{j}").unwrap(),
            Symbol::Constant(c) => write!(out, "{c}").unwrap(),
            Symbol::Function(op) => {
                let child = |k| self.template.child(p, depth, k);
                match op {
                    Op::Add | Op::Sub | Op::Mul => {
                        out.push('(');
                        self.write_infix(child(0), depth + 1, out);
                        write!(out, " {} ", op.name()).unwrap();
                        self.write_infix(child(1), depth + 1, out);
                        out.push(')');
                    }
                    _ => {
                        write!(out, "{}(", op.name()).unwrap();
                        for k in 0..op.arity() {
                            if k > 0 {
                                out.push_str(", ");
                            }
                            self.write_infix(child(k), depth + 1, out);
                        }
                        out.push(')');
                    }
                }
            }
        }
    }
}

impl fmt::Display for GenotypeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

/// Vectorized tree evaluation with a reusable buffer pool.
#[derive(Default, Debug)]
pub struct Evaluator {
    pool: Vec<Vec<f64>>,
}

impl Evaluator {
    pub fn evaluate(&mut self, tree: &GenotypeTree, x: &FeatureMatrix) -> Vec<f64> {
        self.eval_node(tree, 0, 0, x)
    }

    /// Returns a buffer obtained from [`Evaluator::evaluate`] to the pool.
    pub fn recycle(&mut self, buffer: Vec<f64>) {
        self.pool.push(buffer);
    }

    fn take(&mut self, n: usize) -> Vec<f64> {
        let mut buffer = self.pool.pop().unwrap_or_default();
        buffer.clear();
        buffer.resize(n, 0.0);
        buffer
    }

    fn eval_node(&mut self, tree: &GenotypeTree, p: usize, depth: usize, x: &FeatureMatrix) -> Vec<f64> {
        match tree.symbols[p] {
            Symbol::Feature(j) => {
                let mut out = self.take(x.n_rows());
                out.copy_from_slice(x.column(j));
                out
            }
            Symbol::Constant(c) => {
                let mut out = self.take(x.n_rows());
                out.fill(c);
                out
            }
            Symbol::Function(op) => {
                let template = tree.template;
                let mut a = self.eval_node(tree, template.child(p, depth, 0), depth + 1, x);
                if op.arity() == 1 {
                    op.apply_unary_in_place(&mut a);
                } else {
                    let b = self.eval_node(tree, template.child(p, depth, 1), depth + 1, x);
                    op.apply_binary_in_place(&mut a, &b);
                    self.pool.push(b);
                }
                a
            }
        }
    }
}

/// Whether any non-intron node of `new` differs from `old`.
///
/// When every active symbol of `new` matches `old`, the active sets coincide
/// too, so both trees compute the same function.
pub fn semantic_change_check(old: &GenotypeTree, new: &GenotypeTree) -> bool {
    debug_assert_eq!(old.template, new.template);
    let template = new.template;
    let mut stack = vec![(0usize, 0usize)];
    while let Some((p, depth)) = stack.pop() {
        if old.symbols[p] != new.symbols[p] {
            return true;
        }
        for k in 0..new.symbols[p].arity() {
            stack.push((template.child(p, depth, k), depth + 1));
        }
    }
    false
}

/// How internal positions are filled during initialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    Full,
    Grow,
}

/// Half-and-Half: Full or Grow with equal probability.
pub fn init_half_and_half<R: Rng + ?Sized>(rng: &mut R, template: Template, sets: &SymbolSets) -> GenotypeTree {
    let method = if rng.random_bool(0.5) {
        InitMethod::Full
    } else {
        InitMethod::Grow
    };
    init_tree(rng, template, sets, method)
}

/// Fills every template position, introns included.
///
/// Full puts functions at every depth below `h`. Grow picks a function with
/// probability 0.5 at each internal position independently, so positions
/// below a terminal may still hold (intron) functions.
pub fn init_tree<R: Rng + ?Sized>(
    rng: &mut R,
    template: Template,
    sets: &SymbolSets,
    method: InitMethod,
) -> GenotypeTree {
    let symbols = (0..template.len())
        .map(|p| {
            if template.depth(p) == template.height() {
                sets.sample_terminal(rng)
            } else {
                match method {
                    InitMethod::Full => sets.sample_function(rng),
                    InitMethod::Grow if rng.random_bool(0.5) => sets.sample_function(rng),
                    InitMethod::Grow => sets.sample_terminal(rng),
                }
            }
        })
        .collect();
    GenotypeTree { template, symbols }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(op: Op) -> Symbol {
        Symbol::Function(op)
    }
    fn x(j: usize) -> Symbol {
        Symbol::Feature(j)
    }

    fn matrix() -> FeatureMatrix {
        FeatureMatrix::from_columns(vec![vec![1.0, 2.0, -3.0], vec![0.5, 0.0, 4.0]]).unwrap()
    }

    #[test]
    fn template_sizes() {
        assert_eq!(template_size(4, 2), 31);
        assert_eq!(template_size(2, 2), 7);
        assert_eq!(template_size(0, 2), 1);
        assert_eq!(template_size(3, 1), 4);
        assert_eq!(template_size(2, 3), 13);
        for (h, want) in [(3, 15), (4, 31), (5, 63)] {
            assert_eq!(template_size(h, 2), want);
        }
        for r in 1..5 {
            for h in 1..6 {
                assert_eq!(template_size(h, r), 1 + r * template_size(h - 1, r));
            }
        }
    }

    #[test]
    fn child_parent_bijection() {
        for (h, r) in [(0, 2), (3, 2), (4, 2), (2, 3), (3, 1)] {
            let t = Template::new(h, r).unwrap();
            assert_eq!(t.parent(0), None);
            for p in 0..t.len() {
                for c in t.children(p) {
                    assert_eq!(t.parent(c), Some(p));
                    assert_eq!(t.depth(c), t.depth(p) + 1);
                }
            }
            // every non-root position is somebody's child exactly once
            let mut seen = vec![0; t.len()];
            for p in 0..t.len() {
                for c in t.children(p) {
                    seen[c] += 1;
                }
            }
            assert!(seen[1..].iter().all(|&n| n == 1));
        }
    }

    #[test]
    fn paper_figure_positions() {
        // h=2, r=2: root 0, children 1 and 4; leaves 2,3 and 5,6
        let t = Template::new(2, 2).unwrap();
        assert_eq!(t.children(0), vec![1, 4]);
        assert_eq!(t.children(1), vec![2, 3]);
        assert_eq!(t.children(4), vec![5, 6]);
    }

    #[test]
    fn full_layout_h2() {
        let sets = SymbolSets::standard(3, None).unwrap();
        let t = Template::new(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = init_tree(&mut rng, t, &sets, InitMethod::Full);
        let functions: Vec<bool> = tree.symbols().iter().map(Symbol::is_function).collect();
        // 1-based positions 1,2,5 are functions
        assert_eq!(functions, vec![true, true, false, false, true, false, false]);
        assert_eq!(tree.active_nodes().len(), 7);
    }

    #[test]
    fn grow_fills_introns_under_terminal_root() {
        let sets = SymbolSets::standard(3, None).unwrap();
        let t = Template::new(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut terminal_roots, mut intron_functions) = (0, 0);
        for _ in 0..400 {
            let tree = init_tree(&mut rng, t, &sets, InitMethod::Grow);
            assert_eq!(tree.len(), 7);
            if !tree.symbol(0).is_function() {
                terminal_roots += 1;
                assert_eq!(tree.active_nodes(), vec![0]);
                // internal positions are drawn independently of the root
                intron_functions += [1, 4].iter().filter(|&&p| tree.symbol(p).is_function()).count();
            }
        }
        assert!(terminal_roots > 0 && intron_functions > 0);
    }

    #[test]
    fn no_erc_means_no_constants() {
        let sets = SymbolSets::standard(2, None).unwrap();
        let t = Template::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let tree = init_half_and_half(&mut rng, t, &sets);
            assert!(!tree.symbols().iter().any(|s| matches!(s, Symbol::Constant(_))));
        }
    }

    #[test]
    fn erc_draws_within_bounds() {
        let sets = SymbolSets::standard(1, Some(ErcRange { lo: -2.0, hi: 3.0 })).unwrap();
        let t = Template::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut constants = 0;
        for _ in 0..500 {
            for s in init_half_and_half(&mut rng, t, &sets).symbols() {
                if let Symbol::Constant(c) = s {
                    constants += 1;
                    assert!((-2.0..=3.0).contains(c));
                }
            }
        }
        assert!(constants > 0);
    }

    #[test]
    fn never_function_at_max_depth() {
        let sets = SymbolSets::new(vec![Op::Add, Op::Mul, Op::Sin], 4, None).unwrap();
        let t = Template::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let tree = init_half_and_half(&mut rng, t, &sets);
            for p in 0..t.len() {
                if t.depth(p) == 3 {
                    assert!(!tree.symbol(p).is_function());
                }
            }
        }
    }

    /// The h=3 tree from the representation figure: only 7 of 15 nodes are active.
    #[test]
    fn figure_tree_has_seven_active_nodes() {
        let t = Template::new(3, 2).unwrap();
        // ×( +( x, exp(y) ), exp(x) ) with introns elsewhere
        let symbols = vec![
            f(Op::Mul),
            f(Op::Add),
            x(0),
            x(0),
            x(2),
            f(Op::Exp),
            x(1),
            x(0),
            f(Op::Exp),
            x(0),
            x(2),
            x(2),
            f(Op::Aq),
            x(0),
            x(0),
        ];
        let tree = GenotypeTree::new(t, symbols).unwrap();
        assert_eq!(tree.active_nodes(), vec![0, 1, 2, 5, 6, 8, 9]);
    }

    #[test]
    fn active_nodes_edge_cases() {
        let t = Template::new(2, 2).unwrap();
        let leafy = GenotypeTree::new(t, vec![x(0); 7]).unwrap();
        assert_eq!(leafy.active_nodes(), vec![0]);
        let full = GenotypeTree::new(t, vec![f(Op::Add), f(Op::Sub), x(0), x(1), f(Op::Mul), x(1), x(0)]).unwrap();
        assert_eq!(full.active_nodes(), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_malformed_trees() {
        let t = Template::new(1, 2).unwrap();
        assert_eq!(
            GenotypeTree::new(t, vec![x(0); 2]).unwrap_err(),
            TreeError::LengthMismatch { expected: 3, got: 2 }
        );
        assert_eq!(
            GenotypeTree::new(t, vec![f(Op::Add), f(Op::Add), x(0)]).unwrap_err(),
            TreeError::FunctionAtLeaf(1)
        );
        assert!(matches!(
            GenotypeTree::new(t, vec![Symbol::Constant(f64::NAN), x(0), x(0)]),
            Err(TreeError::NonFiniteConstant(0))
        ));
        assert_eq!(SymbolSets::standard(0, None).unwrap_err(), TreeError::NoTerminals);
    }

    #[test]
    fn evaluate_basics() {
        let m = matrix();
        let t0 = Template::new(0, 2).unwrap();
        let id = GenotypeTree::new(t0, vec![x(1)]).unwrap();
        assert_eq!(id.evaluate(&m), vec![0.5, 0.0, 4.0]);

        let t = Template::new(1, 2).unwrap();
        let aq = GenotypeTree::new(t, vec![f(Op::Aq), x(0), x(1)]).unwrap();
        let out = aq.evaluate(&m);
        assert_eq!(out[1], 2.0); // denominator sqrt(1 + 0) = 1
        assert_eq!(Op::Aq.apply(&[1.0, 0.0]), 1.0);
        assert!((Op::Aq.apply(&[3.0, 4.0]) - 0.727_606_875_108_999_2).abs() < 1e-15);

        let unary = GenotypeTree::new(t, vec![f(Op::Exp), x(0), x(1)]).unwrap();
        assert_eq!(unary.evaluate(&m), vec![1f64.exp(), 2f64.exp(), (-3f64).exp()]);
    }

    #[test]
    fn non_finite_values_propagate() {
        let m = FeatureMatrix::from_columns(vec![vec![1000.0, 1.0]]).unwrap();
        let t = Template::new(2, 2).unwrap();
        let tree = GenotypeTree::new(t, vec![f(Op::Mul), f(Op::Exp), x(0), x(0), f(Op::Exp), x(0), x(0)]).unwrap();
        let out = tree.evaluate(&m);
        assert!(!out[0].is_finite());
        assert!(out[1].is_finite());
    }

    #[test]
    fn semantic_change() {
        let t = Template::new(2, 2).unwrap();
        let base = GenotypeTree::new(t, vec![f(Op::Add), x(0), x(1), x(2), x(1), x(0), x(0)]).unwrap();
        // positions 2,3 sit under the terminal at 1: introns
        let mut intron = base.clone();
        intron.set_symbol(2, x(3)).unwrap();
        assert!(!semantic_change_check(&base, &intron));
        let mut root = base.clone();
        root.set_symbol(0, f(Op::Mul)).unwrap();
        assert!(semantic_change_check(&base, &root));
        assert!(!semantic_change_check(&base, &base.clone()));
        // activating an intron subtree is a change
        let mut grown = base.clone();
        grown.set_symbol(1, f(Op::Sub)).unwrap();
        assert!(semantic_change_check(&base, &grown));
        assert!(semantic_change_check(&grown, &base));
    }

    #[test]
    fn infix_rendering() {
        let t = Template::new(1, 2).unwrap();
        let sum = GenotypeTree::new(t, vec![f(Op::Add), x(0), x(1)]).unwrap();
        assert_eq!(sum.to_infix(), "(x0 + x1)");
        let leaf = GenotypeTree::new(t, vec![x(3), x(0), x(1)]).unwrap();
        assert_eq!(leaf.to_infix(), "x3");
        let aq = GenotypeTree::new(t, vec![f(Op::Aq), Symbol::Constant(-0.1), x(1)]).unwrap();
        assert_eq!(aq.to_infix(), "aq(-0.1, x1)");
    }
}
