//! Linkage learning: symbol frequencies, (biased) mutual information, and
//! the families of subsets built from them.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use rand::Rng;
use thiserror::Error;

use crate::tree::{GenotypeTree, Symbol};

// Fixed hasher keys make iteration order, and with it every entropy sum,
// reproducible across processes.
type Counts<K> = HashMap<K, u32, BuildHasherDefault<DefaultHasher>>;

#[derive(Debug, Error, PartialEq)]
pub enum LinkageError {
    #[error("similarity matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
    #[error("similarity matrix is empty")]
    Empty,
}

/// How constants are treated when counting symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErcStrategy {
    /// Every distinct constant is its own symbol.
    AllConst,
    /// Constants are not counted at all.
    NoConst,
    /// Constants are mapped to the nearest of the first `γ` distinct values seen.
    BinConst,
}

/// Discrete identity of a symbol for counting purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKey {
    Function(u8),
    Feature(usize),
    /// Bit pattern of the constant (or of its bin).
    Constant(u64),
}

/// On-line binning of constants, capacity `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErcBinTable {
    capacity: usize,
    bins: Vec<f64>,
}

impl ErcBinTable {
    pub const DEFAULT_CAPACITY: usize = 100;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "bin capacity must be positive");
        ErcBinTable {
            capacity,
            bins: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Sorted bin values.
    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn clear(&mut self) {
        self.bins.clear();
    }

    /// Bin for `value`; opens a new bin while capacity remains.
    ///
    /// Once full, the nearest bin wins, ties going to the smaller one.
    pub fn bin(&mut self, value: f64) -> f64 {
        debug_assert!(value.is_finite());
        let at = match self.bins.binary_search_by(|b| b.total_cmp(&value)) {
            Ok(i) => return self.bins[i],
            Err(at) => at,
        };
        if self.bins.len() < self.capacity {
            self.bins.insert(at, value);
            return value;
        }
        let below = at.checked_sub(1).map(|i| self.bins[i]);
        let above = self.bins.get(at).copied();
        match (below, above) {
            (Some(lo), Some(hi)) => {
                if value - lo <= hi - value {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("capacity is at least one"),
        }
    }
}

/// Free-function form of [`ErcBinTable::bin`].
pub fn bin_constant(bins: &mut ErcBinTable, value: f64) -> f64 {
    bins.bin(value)
}

fn symbol_key(symbol: Symbol, strategy: ErcStrategy, bins: &mut ErcBinTable) -> Option<SymbolKey> {
    match symbol {
        Symbol::Function(op) => Some(SymbolKey::Function(op.id())),
        Symbol::Feature(j) => Some(SymbolKey::Feature(j)),
        Symbol::Constant(c) => match strategy {
            ErcStrategy::AllConst => Some(SymbolKey::Constant(c.to_bits())),
            ErcStrategy::NoConst => None,
            ErcStrategy::BinConst => Some(SymbolKey::Constant(bins.bin(c).to_bits())),
        },
    }
}

/// Symbol counts per location and per location pair.
#[derive(Clone, Debug)]
pub struct FrequencyModel {
    population_size: usize,
    len: usize,
    single: Vec<Counts<SymbolKey>>,
    joint: Vec<Counts<(SymbolKey, SymbolKey)>>,
}

impl FrequencyModel {
    pub fn population_size(&self) -> usize {
        self.population_size
    }

    /// Number of genotype locations `ℓ`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counts(&self, i: usize) -> impl Iterator<Item = (SymbolKey, u32)> + '_ {
        self.single[i].iter().map(|(k, c)| (*k, *c))
    }

    /// Joint counts of locations `i < j`.
    pub fn joint_counts(&self, i: usize, j: usize) -> impl Iterator<Item = ((SymbolKey, SymbolKey), u32)> + '_ {
        assert!(i < j);
        self.joint[pair_index(self.len, i, j)].iter().map(|(k, c)| (*k, *c))
    }

    fn entropy_of<'a>(&self, counts: impl Iterator<Item = &'a u32>) -> f64 {
        let n = self.population_size as f64;
        -counts
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    }
}

fn pair_index(len: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < len);
    i * len - i * (i + 1) / 2 + (j - i - 1)
}

/// Counts symbols per location and per pair of locations, in population order.
///
/// Under `NoConst` constants are skipped, so their probability mass is simply
/// absent. Under `BinConst` each constant is first passed through `bins`.
pub fn count_frequencies<'a, I>(population: I, strategy: ErcStrategy, bins: &mut ErcBinTable) -> FrequencyModel
where
    I: IntoIterator<Item = &'a GenotypeTree>,
{
    let mut keys: Vec<Option<SymbolKey>> = Vec::new();
    let mut len = None;
    let mut population_size = 0;
    for tree in population {
        let l = *len.get_or_insert(tree.len());
        assert_eq!(l, tree.len(), "population mixes templates");
        keys.extend(tree.symbols().iter().map(|&s| symbol_key(s, strategy, bins)));
        population_size += 1;
    }
    assert!(population_size > 0, "cannot count an empty population");
    let len = len.unwrap_or(0);

    let mut single = vec![Counts::default(); len];
    let mut joint = vec![Counts::default(); len * len.saturating_sub(1) / 2];
    for row in keys.chunks_exact(len) {
        for i in 0..len {
            let Some(ki) = row[i] else { continue };
            *single[i].entry(ki).or_insert(0) += 1;
            for j in i + 1..len {
                if let Some(kj) = row[j] {
                    *joint[pair_index(len, i, j)].entry((ki, kj)).or_insert(0) += 1;
                }
            }
        }
    }
    FrequencyModel {
        population_size,
        len,
        single,
        joint,
    }
}

/// Base-2 entropy of location `i`.
pub fn entropy(model: &FrequencyModel, i: usize) -> f64 {
    model.entropy_of(model.single[i].values())
}

/// Base-2 joint entropy of locations `i` and `j`.
pub fn joint_entropy(model: &FrequencyModel, i: usize, j: usize) -> f64 {
    match i.cmp(&j) {
        std::cmp::Ordering::Equal => entropy(model, i),
        std::cmp::Ordering::Less => model.entropy_of(model.joint[pair_index(model.len, i, j)].values()),
        std::cmp::Ordering::Greater => joint_entropy(model, j, i),
    }
}

pub fn mutual_information(model: &FrequencyModel, i: usize, j: usize) -> f64 {
    if i == j {
        return entropy(model, i);
    }
    entropy(model, i) + entropy(model, j) - joint_entropy(model, i, j)
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn scaled(&self, factor: f64) -> SquareMatrix {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// One line per row, comma-separated, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:.16e}", self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Entropies of all locations and location pairs of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyTable {
    single: Vec<f64>,
    joint: SquareMatrix,
}

impl EntropyTable {
    pub fn new(model: &FrequencyModel) -> Self {
        let single: Vec<f64> = (0..model.len).map(|i| entropy(model, i)).collect();
        let mut joint = SquareMatrix::zeros(model.len);
        for (i, &h) in single.iter().enumerate() {
            joint.set(i, i, h);
            for j in i + 1..model.len {
                let h = joint_entropy(model, i, j);
                joint.set(i, j, h);
                joint.set(j, i, h);
            }
        }
        EntropyTable { single, joint }
    }

    pub fn single(&self, i: usize) -> f64 {
        self.single[i]
    }

    pub fn joint(&self, i: usize, j: usize) -> f64 {
        self.joint.get(i, j)
    }

    /// Mutual information matrix, `MI(i,i) = H(i)` on the diagonal.
    pub fn mutual_information(&self) -> SquareMatrix {
        SquareMatrix::from_fn(self.single.len(), |i, j| {
            if i == j {
                self.single[i]
            } else {
                self.single[i] + self.single[j] - self.joint.get(i, j)
            }
        })
    }

    /// Bias-corrected mutual information matrix, diagonal fixed to 1.
    pub fn biased_mutual_information(&self, bias: &BiasCoefficients) -> SquareMatrix {
        SquareMatrix::from_fn(self.single.len(), |i, j| {
            if i == j {
                1.0
            } else {
                bias.correct(i, j, self.single[i], self.single[j], self.joint.get(i, j))
            }
        })
    }
}

/// Entropies of the initial population, used to re-bias later estimates.
///
/// `β_i = 1 / H¹(i)` and `β_ij = 2 / H¹(i,j)`; a location with zero initial
/// entropy gets `β = 0`, and so does every pair it takes part in.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasCoefficients {
    initial: EntropyTable,
}

impl BiasCoefficients {
    pub fn beta(&self, i: usize) -> f64 {
        let h = self.initial.single(i);
        if h > 0.0 {
            1.0 / h
        } else {
            0.0
        }
    }

    pub fn beta_pair(&self, i: usize, j: usize) -> f64 {
        let h = self.initial.joint(i, j);
        if h > 0.0 && self.initial.single(i) > 0.0 && self.initial.single(j) > 0.0 {
            2.0 / h
        } else {
            0.0
        }
    }

    // Dividing by the captured entropy instead of multiplying by its
    // reciprocal keeps the capture generation exactly at zero.
    fn correct(&self, i: usize, j: usize, hi: f64, hj: f64, hij: f64) -> f64 {
        let (h1i, h1j, h1ij) = (self.initial.single(i), self.initial.single(j), self.initial.joint(i, j));
        if h1i <= 0.0 || h1j <= 0.0 || h1ij <= 0.0 {
            return 0.0;
        }
        hi / h1i + hj / h1j - 2.0 * (hij / h1ij)
    }
}

/// Records the bias coefficients from a freshly initialized population.
pub fn capture_bias(model: &FrequencyModel) -> BiasCoefficients {
    BiasCoefficients {
        initial: EntropyTable::new(model),
    }
}

/// `β_i H(i) + β_j H(j) − β_ij H(i,j)`.
pub fn biased_mi(model: &FrequencyModel, bias: &BiasCoefficients, i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    bias.correct(i, j, entropy(model, i), entropy(model, j), joint_entropy(model, i, j))
}

/// Family of subsets with a binary merge structure.
///
/// The first `ℓ` subsets are the singletons; every later subset is the union
/// of the two subsets recorded as its children, and the last one is the full
/// location set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fos {
    len: usize,
    subsets: Vec<Vec<usize>>,
    children: Vec<Option<(usize, usize)>>,
}

impl Fos {
    fn singletons(len: usize) -> Self {
        Fos {
            len,
            subsets: (0..len).map(|i| vec![i]).collect(),
            children: vec![None; len],
        }
    }

    fn merge(&mut self, a: usize, b: usize) -> usize {
        let mut merged = [self.subsets[a].as_slice(), self.subsets[b].as_slice()].concat();
        merged.sort_unstable();
        self.subsets.push(merged);
        self.children.push(Some((a, b)));
        self.subsets.len() - 1
    }

    /// Number of genotype locations covered.
    pub fn locations(&self) -> usize {
        self.len
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn children(&self, index: usize) -> Option<(usize, usize)> {
        self.children[index]
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.subsets.len() != 2 * self.len - 1 {
            return Err(format!("{} subsets for {} locations", self.subsets.len(), self.len));
        }
        for i in 0..self.len {
            if self.subsets[i] != [i] || self.children[i].is_some() {
                return Err(format!("subset {i} is not the singleton {{{i}}}"));
            }
        }
        let mut full = 0;
        for (index, subset) in self.subsets.iter().enumerate().skip(self.len) {
            let Some((a, b)) = self.children[index] else {
                return Err(format!("subset {index} has no children"));
            };
            if a >= index || b >= index {
                return Err(format!("subset {index} refers to a later subset"));
            }
            let mut union = [self.subsets[a].as_slice(), self.subsets[b].as_slice()].concat();
            union.sort_unstable();
            if union.windows(2).any(|w| w[0] == w[1]) || &union != subset {
                return Err(format!("subset {index} is not the disjoint union of its children"));
            }
            if subset.len() == self.len {
                full += 1;
            }
        }
        if self.len == 1 {
            full += 1;
        }
        if full != 1 {
            return Err(format!("{full} subsets cover every location"));
        }
        Ok(())
    }
}

/// Average-linkage (UPGMA) tree over a similarity matrix, built with
/// reciprocal-nearest-neighbor chains.
///
/// Clusters are identified by their smallest location. Pairs are ranked by
/// similarity, and equal similarities by the lexicographically smallest
/// `(min id, max id)` pair. Under that strict order the chain algorithm merges
/// exactly the same clusters as the naive "merge the most similar pair" loop.
///
/// The similarity of two clusters is the mean similarity of their location
/// pairs, which equals the size-weighted update
/// `S(k, i∪j) = (|i|·S(k,i) + |j|·S(k,j)) / (|i| + |j|)`. It is kept as a pair
/// sum divided by `|a|·|b|` on demand, so its value does not depend on the
/// order in which the clusters were assembled.
pub fn build_linkage_tree(similarity: &SquareMatrix) -> Result<Fos, LinkageError> {
    let n = similarity.size();
    if n == 0 {
        return Err(LinkageError::Empty);
    }
    for i in 0..n {
        for j in 0..n {
            if !similarity.get(i, j).is_finite() {
                return Err(LinkageError::NonFinite(i, j));
            }
        }
    }

    let mut fos = Fos::singletons(n);
    let mut total = similarity.clone();
    let mut alive = vec![true; n];
    let mut size = vec![1usize; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut remaining = n;

    let better = |s: f64, key: (usize, usize), best: Option<(f64, (usize, usize))>| match best {
        None => true,
        Some((bs, bkey)) => s > bs || (s == bs && key < bkey),
    };

    while remaining > 1 {
        if chain.is_empty() {
            chain.push(alive.iter().position(|&a| a).unwrap());
        }
        let a = *chain.last().unwrap();
        let mut best: Option<(f64, (usize, usize))> = None;
        let mut nearest = a;
        for b in (0..n).filter(|&b| alive[b] && b != a) {
            let key = (a.min(b), a.max(b));
            let s = total.get(a, b) / (size[a] * size[b]) as f64;
            if better(s, key, best) {
                best = Some((s, key));
                nearest = b;
            }
        }
        if chain.len() >= 2 && chain[chain.len() - 2] == nearest {
            chain.truncate(chain.len() - 2);
            let (keep, gone) = (a.min(nearest), a.max(nearest));
            for k in (0..n).filter(|&k| alive[k] && k != keep && k != gone) {
                let t = total.get(k, keep) + total.get(k, gone);
                total.set(k, keep, t);
                total.set(keep, k, t);
            }
            node[keep] = fos.merge(node[keep], node[gone]);
            size[keep] += size[gone];
            alive[gone] = false;
            remaining -= 1;
        } else {
            chain.push(nearest);
        }
    }
    Ok(fos)
}

/// Linkage-tree-shaped family built from uniformly random merges.
pub fn build_random_tree<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Fos {
    assert!(len >= 1);
    let mut fos = Fos::singletons(len);
    let mut clusters: Vec<usize> = (0..len).collect();
    while clusters.len() > 1 {
        let i = rng.random_range(0..clusters.len());
        let a = clusters.swap_remove(i);
        let j = rng.random_range(0..clusters.len());
        let b = clusters.swap_remove(j);
        clusters.push(fos.merge(a, b));
    }
    fos
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Op, Template};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree(symbols: Vec<Symbol>) -> GenotypeTree {
        let t = Template::new(1, 2).unwrap();
        GenotypeTree::new(t, symbols).unwrap()
    }

    #[test]
    fn bin_lookup() {
        let mut bins = ErcBinTable::new(2);
        assert_eq!(bins.bin(1.0), 1.0);
        assert_eq!(bins.bin(2.0), 2.0);
        assert_eq!(bins.bin(1.4), 1.0);
        assert_eq!(bins.bin(1.5), 1.0);
        assert_eq!(bins.bin(1.6), 2.0);
        assert_eq!(bins.bin(-3.0), 1.0);
        assert_eq!(bins.bin(9.0), 2.0);
        assert_eq!(bins.bins(), &[1.0, 2.0]);

        let mut open = ErcBinTable::new(3);
        open.bin(1.0);
        assert_eq!(open.bin(7.3), 7.3);
        assert_eq!(open.bins(), &[1.0, 7.3]);
    }

    #[test]
    fn bin_const_stream_order() {
        let pop = [
            tree(vec![Symbol::Constant(1.0), Symbol::Feature(0), Symbol::Feature(0)]),
            tree(vec![Symbol::Constant(5.0), Symbol::Feature(0), Symbol::Feature(0)]),
            tree(vec![Symbol::Constant(1.4), Symbol::Feature(0), Symbol::Feature(0)]),
        ];
        let mut bins = ErcBinTable::new(2);
        let model = count_frequencies(&pop, ErcStrategy::BinConst, &mut bins);
        let mut counts: Vec<_> = model.counts(0).collect();
        counts.sort();
        assert_eq!(
            counts,
            vec![
                (SymbolKey::Constant(1f64.to_bits()), 2),
                (SymbolKey::Constant(5f64.to_bits()), 1)
            ]
        );
    }

    #[test]
    fn identical_population() {
        let t = tree(vec![Symbol::Function(Op::Add), Symbol::Feature(0), Symbol::Feature(1)]);
        let pop = vec![t; 6];
        let model = count_frequencies(&pop, ErcStrategy::AllConst, &mut ErcBinTable::new(4));
        for i in 0..3 {
            let counts: Vec<_> = model.counts(i).collect();
            assert_eq!(counts.len(), 1);
            assert_eq!(counts[0].1, 6);
            assert_eq!(entropy(&model, i), 0.0);
        }
    }

    #[test]
    fn no_const_drops_constants() {
        let pop = [
            tree(vec![Symbol::Constant(1.0), Symbol::Feature(0), Symbol::Feature(1)]),
            tree(vec![Symbol::Constant(2.0), Symbol::Feature(1), Symbol::Feature(1)]),
        ];
        let model = count_frequencies(&pop, ErcStrategy::NoConst, &mut ErcBinTable::new(4));
        assert_eq!(model.counts(0).count(), 0);
        assert_eq!(entropy(&model, 0), 0.0);
        assert_eq!(model.joint_counts(0, 1).count(), 0);
        assert!((entropy(&model, 1) - 1.0).abs() < 1e-15);
        let all = count_frequencies(&pop, ErcStrategy::AllConst, &mut ErcBinTable::new(4));
        assert!((entropy(&all, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_hand_values() {
        // counts {a:2, b:2, c:4} of 8 -> 1.5 bits
        let symbols = [0, 0, 1, 1, 2, 2, 2, 2];
        let pop: Vec<_> = symbols
            .iter()
            .map(|&s| {
                tree(vec![
                    Symbol::Feature(s),
                    Symbol::Feature(usize::from(s < 2)),
                    Symbol::Feature(0),
                ])
            })
            .collect();
        let model = count_frequencies(&pop, ErcStrategy::AllConst, &mut ErcBinTable::new(1));
        assert!((entropy(&model, 0) - 1.5).abs() < 1e-15);
        assert!((entropy(&model, 1) - 1.0).abs() < 1e-15);
        assert_eq!(entropy(&model, 2), 0.0);
        // location 1 is a function of location 0
        assert!((mutual_information(&model, 0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(mutual_information(&model, 0, 0), entropy(&model, 0));
        assert_eq!(mutual_information(&model, 0, 2), 0.0);
    }

    #[test]
    fn bias_coefficients_and_guard() {
        let symbols = [0, 1, 2, 3];
        let pop: Vec<_> = symbols
            .iter()
            .map(|&s| tree(vec![Symbol::Feature(s % 2), Symbol::Feature(s), Symbol::Feature(0)]))
            .collect();
        let model = count_frequencies(&pop, ErcStrategy::AllConst, &mut ErcBinTable::new(1));
        let bias = capture_bias(&model);
        assert!((bias.beta(0) - 1.0).abs() < 1e-15); // H = 1 bit
        assert!((bias.beta(1) - 0.5).abs() < 1e-15); // H = 2 bits
        assert!((bias.beta_pair(0, 1) - 1.0).abs() < 1e-15); // H(0,1) = 2 bits
        assert_eq!(bias.beta(2), 0.0);
        assert_eq!(bias.beta_pair(0, 2), 0.0);
        assert_eq!(biased_mi(&model, &bias, 0, 1), 0.0);
        assert_eq!(biased_mi(&model, &bias, 0, 2), 0.0);
        assert_eq!(biased_mi(&model, &bias, 1, 1), 1.0);
    }

    #[test]
    fn upgma_update_rule() {
        // sizes 1 and 1: plain mean
        let m = SquareMatrix::from_fn(3, |i, j| match (i.min(j), i.max(j)) {
            (a, b) if a == b => 0.0,
            (0, 1) => 0.9,
            (0, 2) => 0.2,
            (1, 2) => 0.4,
            _ => unreachable!(),
        });
        let fos = build_linkage_tree(&m).unwrap();
        assert_eq!(fos.subsets()[3], vec![0, 1]);
        assert_eq!(fos.subsets()[4], vec![0, 1, 2]);
        fos.validate().unwrap();

        // sizes 2 and 1: S(3, {0,1,2}) = (2·0.3 + 1·0.6) / 3 = 0.4 < 0.42, so
        // {3,4} forms first; an unweighted mean (0.45) would absorb 3 instead
        let m = SquareMatrix::from_fn(5, |i, j| match (i.min(j), i.max(j)) {
            (a, b) if a == b => 0.0,
            (0, 1) => 0.9,
            (0, 2) | (1, 2) => 0.8,
            (0, 3) | (1, 3) => 0.3,
            (2, 3) => 0.6,
            (3, 4) => 0.42,
            (_, 4) => 0.1,
            _ => unreachable!(),
        });
        let fos = build_linkage_tree(&m).unwrap();
        assert_eq!(
            fos.subsets()[5..].to_vec(),
            vec![vec![0, 1], vec![0, 1, 2], vec![3, 4], vec![0, 1, 2, 3, 4]]
        );
    }

    #[test]
    fn all_ties_merge_in_id_order() {
        let fos = build_linkage_tree(&SquareMatrix::zeros(4)).unwrap();
        fos.validate().unwrap();
        assert_eq!(fos.subsets()[4], vec![0, 1]);
        assert_eq!(fos.subsets()[5], vec![0, 1, 2]);
        assert_eq!(fos.subsets()[6], vec![0, 1, 2, 3]);
    }

    #[test]
    fn rejects_non_finite_similarity() {
        let mut m = SquareMatrix::zeros(3);
        m.set(1, 2, f64::NAN);
        assert_eq!(build_linkage_tree(&m).unwrap_err(), LinkageError::NonFinite(1, 2));
    }

    #[test]
    fn random_tree_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let single = build_random_tree(&mut rng, 1);
        assert_eq!(single.subsets(), &[vec![0]]);
        single.validate().unwrap();
        let seven = build_random_tree(&mut rng, 7);
        assert_eq!(seven.len(), 13);
        assert_eq!(seven.subsets()[12], (0..7).collect::<Vec<_>>());
        seven.validate().unwrap();
    }
}
