//! Layered algebraic branching programs built from a set system, with
//! evaluation and exact coefficient expansion over a prime field.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::field::PrimeField;
use crate::error::{Error, Result};
use crate::ground::{MaximalChain, SetSystem, SubsetMask};

/// Largest `n` accepted by coefficient expansion.
pub const EXPANSION_CAP: usize = 12;
/// Largest block size; a block's state must fit in four bits.
pub const MAX_BLOCK_SIZE: usize = 15;

/// The factor contributed by an edge that adds `u` then `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Gadget {
    /// `x_u + x_v`.
    Sum,
    /// `Σ_j x_{u,j} · x_{v,j}` over blocks of size `block_size`.
    InnerProduct { block_size: usize },
}

impl Gadget {
    pub fn block_size(&self) -> usize {
        match *self {
            Gadget::Sum => 1,
            Gadget::InnerProduct { block_size } => block_size,
        }
    }

    fn check(&self) -> Result<()> {
        let b = self.block_size();
        if b == 0 || b > MAX_BLOCK_SIZE {
            return Err(Error::Domain(format!("block size {b} outside 1..={MAX_BLOCK_SIZE}")));
        }
        Ok(())
    }

    /// Number of states a block takes in a monomial row or column index.
    pub fn states(&self) -> usize {
        match *self {
            Gadget::Sum => 2,
            Gadget::InnerProduct { block_size } => block_size,
        }
    }

    /// The maximum rank of a coefficient matrix over an equipartition of `n`
    /// blocks, or `None` on overflow.
    pub fn full_rank(&self, n: usize) -> Option<u64> {
        (self.states() as u64).checked_pow((n / 2) as u32)
    }

    /// Monomials of the gadget on blocks `u`, `v`; every coefficient is one.
    pub fn monomials(&self, u: usize, v: usize) -> Vec<u64> {
        match *self {
            Gadget::Sum => vec![var(u, 1), var(v, 1)],
            Gadget::InnerProduct { block_size } => (1..=block_size).map(|j| var(u, j) | var(v, j)).collect(),
        }
    }
}

/// A monomial packs one four-bit state per block: 0 if the block does not
/// occur, otherwise `j + 1` for variable `x_{b,j}`.
pub fn var(block: usize, state: usize) -> u64 {
    (state as u64) << (4 * block)
}

pub fn block_state(mono: u64, block: usize) -> usize {
    (mono >> (4 * block) & 0xF) as usize
}

/// The multilinear monomial `Π_{u ∈ s} x_u` of the plain gadget.
pub fn support_monomial(s: &SubsetMask) -> u64 {
    s.iter().fold(0, |m, u| m | var(u, 1))
}

/// Field values `w_{t,u}` for positions `t` and elements `u`, both 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightAssignment {
    field: PrimeField,
    n: usize,
    w: Vec<u64>,
}

impl WeightAssignment {
    pub fn new(field: PrimeField, n: usize, w: Vec<u64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: w.len(),
            });
        }
        if let Some(bad) = w.iter().find(|&&x| x >= field.modulus()) {
            return Err(Error::Domain(format!("weight {bad} is not reduced")));
        }
        Ok(WeightAssignment { field, n, w })
    }

    pub fn random<R: Rng + ?Sized>(field: PrimeField, n: usize, rng: &mut R) -> Self {
        let w = (0..n * n).map(|_| field.random(rng)).collect();
        WeightAssignment { field, n, w }
    }

    pub fn ones(field: PrimeField, n: usize) -> Self {
        WeightAssignment { field, n, w: vec![1; n * n] }
    }

    /// The 0/1 substitution `w_{t,u} = [π(t) = u]` for the chain order `π`.
    pub fn indicator(field: PrimeField, chain: &MaximalChain) -> Self {
        let n = chain.n();
        let mut w = vec![0; n * n];
        for (t, &u) in chain.order().iter().enumerate() {
            w[t * n + u] = 1;
        }
        WeightAssignment { field, n, w }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, t: usize, u: usize) -> u64 {
        self.w[t * self.n + u]
    }
}

/// An edge `from → to` labelled `w1 · gadget(u, v) · w2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbpEdge {
    pub from: usize,
    pub to: usize,
    pub u: usize,
    pub v: usize,
    pub w1: u64,
    pub w2: u64,
}

/// Vertices are even-cardinality sets sorted by size; every edge goes from a
/// set `R` to `R ∪ {u, v}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abp {
    n: usize,
    field: PrimeField,
    gadget: Gadget,
    vertices: Vec<SubsetMask>,
    edges: Vec<AbpEdge>,
    source: usize,
    sink: usize,
}

/// Sparse coefficients of a polynomial in packed-monomial form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Coefficients {
    terms: BTreeMap<u64, u64>,
}

impl Coefficients {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, mono: u64) -> u64 {
        self.terms.get(&mono).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn add_term(&mut self, field: &PrimeField, mono: u64, c: u64) {
        let e = self.terms.entry(mono).or_insert(0);
        *e = field.add(*e, c);
        if *e == 0 {
            self.terms.remove(&mono);
        }
    }

    pub fn add_assign(&mut self, field: &PrimeField, other: &Coefficients) {
        for (m, c) in other.iter() {
            self.add_term(field, m, c);
        }
    }

    /// Value at `point`, indexed by `block · block_size + j`.
    pub fn evaluate(&self, field: &PrimeField, block_size: usize, point: &[u64]) -> u64 {
        self.iter().fold(0, |acc, (m, c)| {
            let mut val = c;
            let mut rest = m;
            let mut b = 0;
            while rest != 0 {
                let s = (rest & 0xF) as usize;
                if s > 0 {
                    val = field.mul(val, point[b * block_size + s - 1]);
                }
                rest >>= 4;
                b += 1;
            }
            field.add(acc, val)
        })
    }
}

impl FromIterator<(u64, u64)> for Coefficients {
    fn from_iter<I: IntoIterator<Item = (u64, u64)>>(iter: I) -> Self {
        Coefficients {
            terms: iter.into_iter().filter(|&(_, c)| c != 0).collect(),
        }
    }
}

fn mul_sparse(field: &PrimeField, a: &BTreeMap<u64, u64>, monos: &[u64], scale: u64, out: &mut BTreeMap<u64, u64>) {
    for (&m, &c) in a {
        let c = field.mul(c, scale);
        for &g in monos {
            debug_assert_eq!(m & g, 0, "monomials share a block");
            let e = out.entry(m | g).or_insert(0);
            *e = field.add(*e, c);
        }
    }
}

/// `P_C` for a single chain: the gadget product weighted by `Π_t w_{t,π(t)}`.
pub fn chain_polynomial(chain: &MaximalChain, w: &WeightAssignment, gadget: Gadget) -> Coefficients {
    let field = w.field();
    let order = chain.order();
    let mut scale = 1;
    for (t, &u) in order.iter().enumerate() {
        scale = field.mul(scale, w.get(t, u));
    }
    let mut cur: BTreeMap<u64, u64> = BTreeMap::from([(0, scale)]);
    for pair in order.chunks(2) {
        let mut next = BTreeMap::new();
        mul_sparse(&field, &cur, &gadget.monomials(pair[0], pair[1]), 1, &mut next);
        next.retain(|_, c| *c != 0);
        cur = next;
    }
    Coefficients { terms: cur }
}

impl Abp {
    /// Checks the layered structure and assembles an ABP.
    pub fn from_parts(
        n: usize,
        field: PrimeField,
        gadget: Gadget,
        mut vertices: Vec<SubsetMask>,
        edges: Vec<(SubsetMask, SubsetMask, usize, usize, u64, u64)>,
    ) -> Result<Self> {
        gadget.check()?;
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::Domain(format!("ABP ground size {n} must be even and positive")));
        }
        if let Some(bad) = vertices.iter().find(|s| s.n() != n || s.len() % 2 != 0) {
            return Err(Error::Structure(format!("vertex of size {} is not an even subset of [{n}]", bad.len())));
        }
        vertices.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        vertices.dedup();
        let index: HashMap<&SubsetMask, usize> = vertices.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let source = *index
            .get(&SubsetMask::empty(n))
            .ok_or_else(|| Error::Structure("set system lacks the empty set".into()))?;
        let sink = *index
            .get(&SubsetMask::full(n))
            .ok_or_else(|| Error::Structure("set system lacks the ground set".into()))?;
        let mut out = Vec::with_capacity(edges.len());
        for (r, t, u, v, w1, w2) in edges {
            let (Some(&from), Some(&to)) = (index.get(&r), index.get(&t)) else {
                return Err(Error::Structure("edge endpoint is not a vertex".into()));
            };
            if u >= n || v >= n || u == v || r.contains(u) || r.contains(v) {
                return Err(Error::Structure("edge elements must be two new distinct elements".into()));
            }
            let mut s = r.clone();
            s.insert(u);
            s.insert(v);
            if s != t {
                return Err(Error::Structure("edge target is not R ∪ {u, v}".into()));
            }
            if w1 >= field.modulus() || w2 >= field.modulus() {
                return Err(Error::Domain("edge weight is not reduced".into()));
            }
            out.push(AbpEdge { from, to, u, v, w1, w2 });
        }
        out.sort_by_key(|e| (e.from, e.u, e.v, e.to));
        Ok(Abp {
            n,
            field,
            gadget,
            vertices,
            edges: out,
            source,
            sink,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn gadget(&self) -> Gadget {
        self.gadget
    }

    pub fn vertices(&self) -> &[SubsetMask] {
        &self.vertices
    }

    pub fn edges(&self) -> &[AbpEdge] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Vertex indices grouped by half-cardinality.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut layers = vec![Vec::new(); self.n / 2 + 1];
        for (i, s) in self.vertices.iter().enumerate() {
            layers[s.len() / 2].push(i);
        }
        layers
    }

    /// Number of variables: `n · block_size`.
    pub fn num_variables(&self) -> usize {
        self.n * self.gadget.block_size()
    }

    fn label(&self, e: &AbpEdge, point: &[u64]) -> u64 {
        let f = &self.field;
        let g = match self.gadget {
            Gadget::Sum => f.add(point[e.u], point[e.v]),
            Gadget::InnerProduct { block_size: b } => {
                (0..b).fold(0, |acc, j| f.add(acc, f.mul(point[e.u * b + j], point[e.v * b + j])))
            }
        };
        f.mul(f.mul(e.w1, g), e.w2)
    }
}

fn build_with(x: &SetSystem, w: &WeightAssignment, gadget: Gadget) -> Result<Abp> {
    let n = x.n();
    if w.n() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: w.n(),
        });
    }
    let vertices: Vec<SubsetMask> = x.sets().iter().filter(|s| s.len() % 2 == 0).cloned().collect();
    let mut edges = Vec::new();
    for r in &vertices {
        let k = r.len();
        if k == n {
            continue;
        }
        for u in (0..n).filter(|&u| !r.contains(u)) {
            let mut s = r.clone();
            s.insert(u);
            if !x.contains(&s) {
                continue;
            }
            for v in (0..n).filter(|&v| !s.contains(v)) {
                let mut t = s.clone();
                t.insert(v);
                if x.contains(&t) {
                    edges.push((r.clone(), t, u, v, w.get(k, u), w.get(k + 1, v)));
                }
            }
        }
    }
    Abp::from_parts(n, w.field(), gadget, vertices, edges)
}

/// One vertex per even set of `x`, one edge per chain `R ⊂ S ⊂ T` in `x`
/// with `|R|` even, labelled `w_{|S|,u} (x_u + x_v) w_{|T|,v}`.
pub fn build_abp(x: &SetSystem, w: &WeightAssignment) -> Result<Abp> {
    build_with(x, w, Gadget::Sum)
}

/// The set-multilinear variant: each element is a block of `block_size`
/// variables and edges carry inner products.
pub fn sm_build_abp(x: &SetSystem, block_size: usize, w: &WeightAssignment) -> Result<Abp> {
    build_with(x, w, Gadget::InnerProduct { block_size })
}

/// Sum over source-to-sink paths of the product of edge labels at `point`,
/// indexed by `block · block_size + j`.
pub fn abp_evaluate(abp: &Abp, point: &[u64]) -> Result<u64> {
    if point.len() != abp.num_variables() {
        return Err(Error::Input(format!(
            "point assigns {} variables, ABP has {}",
            point.len(),
            abp.num_variables()
        )));
    }
    let point: Vec<u64> = point.iter().map(|&x| abp.field.reduce(x)).collect();
    let mut val = vec![0u64; abp.vertices.len()];
    val[abp.source] = 1;
    for e in &abp.edges {
        if val[e.from] != 0 {
            let add = abp.field.mul(val[e.from], abp.label(e, &point));
            val[e.to] = abp.field.add(val[e.to], add);
        }
    }
    Ok(val[abp.sink])
}

/// Exact coefficients of the polynomial computed by `abp`.
pub fn expand_coefficients(abp: &Abp) -> Result<Coefficients> {
    expand_coefficients_capped(abp, EXPANSION_CAP)
}

pub fn expand_coefficients_capped(abp: &Abp, cap: usize) -> Result<Coefficients> {
    if abp.n > cap.min(16) {
        return Err(Error::capacity("expansion ground size", abp.n, cap.min(16)));
    }
    let f = abp.field;
    let mut polys: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); abp.vertices.len()];
    polys[abp.source].insert(0, 1);
    let mut current = usize::MAX;
    let mut from = BTreeMap::new();
    for e in &abp.edges {
        if e.from != current {
            current = e.from;
            from = std::mem::take(&mut polys[current]);
            from.retain(|_, c| *c != 0);
        }
        let scale = f.mul(e.w1, e.w2);
        if scale != 0 {
            mul_sparse(&f, &from, &abp.gadget.monomials(e.u, e.v), scale, &mut polys[e.to]);
        }
    }
    let mut terms = std::mem::take(&mut polys[abp.sink]);
    terms.retain(|_, c| *c != 0);
    Ok(Coefficients { terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::GroundSize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field() -> PrimeField {
        PrimeField::default()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn power_set_shapes() {
        let x2 = SetSystem::power_set(GroundSize::new(2).unwrap()).unwrap();
        let a = build_abp(&x2, &WeightAssignment::ones(field(), 2)).unwrap();
        assert_eq!((a.vertices().len(), a.edges().len()), (2, 2));
        let x4 = SetSystem::power_set(GroundSize::new(4).unwrap()).unwrap();
        let a = build_abp(&x4, &WeightAssignment::ones(field(), 4)).unwrap();
        assert_eq!(a.vertices().len(), 8);
        assert_eq!(a.layers().iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 6, 1]);
        let chain = MaximalChain::new(vec![2, 0, 5, 1, 4, 3]).unwrap();
        let p = build_abp(&SetSystem::prefixes(&chain), &WeightAssignment::ones(field(), 6)).unwrap();
        assert_eq!((p.vertices().len(), p.edges().len()), (4, 3));
    }

    #[test]
    fn missing_sink_is_structure_error() {
        let g = GroundSize::new(2).unwrap();
        let x = SetSystem::new(g, vec![SubsetMask::empty(2), SubsetMask::from_elements(2, [0]).unwrap()]).unwrap();
        assert!(matches!(build_abp(&x, &WeightAssignment::ones(field(), 2)), Err(Error::Structure(_))));
    }

    #[test]
    fn evaluation_examples() {
        let x = SetSystem::prefixes(&MaximalChain::identity(2));
        let a = build_abp(&x, &WeightAssignment::ones(field(), 2)).unwrap();
        assert_eq!(abp_evaluate(&a, &[1, 1]).unwrap(), 2);
        assert!(matches!(abp_evaluate(&a, &[1]), Err(Error::Input(_))));
        let x6 = SetSystem::power_set(GroundSize::new(6).unwrap()).unwrap();
        let w = WeightAssignment::random(field(), 6, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(abp_evaluate(&build_abp(&x6, &w).unwrap(), &[0; 6]).unwrap(), 0);
    }

    #[test]
    fn single_chain_expansion() {
        let x = SetSystem::prefixes(&MaximalChain::identity(4));
        let c = expand_coefficients(&build_abp(&x, &WeightAssignment::ones(field(), 4)).unwrap()).unwrap();
        let expected: Coefficients = [
            (var(0, 1) | var(2, 1), 1),
            (var(0, 1) | var(3, 1), 1),
            (var(1, 1) | var(2, 1), 1),
            (var(1, 1) | var(3, 1), 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(c, expected);
    }

    #[test]
    fn parallel_chains_add() {
        let f = field();
        let w = WeightAssignment::random(f, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let a = MaximalChain::new(vec![0, 1, 2, 3]).unwrap();
        let b = MaximalChain::new(vec![2, 3, 1, 0]).unwrap();
        let x = SetSystem::prefixes(&a).union(&SetSystem::prefixes(&b)).unwrap();
        let got = expand_coefficients(&build_abp(&x, &w).unwrap()).unwrap();
        let mut want = chain_polynomial(&a, &w, Gadget::Sum);
        want.add_assign(&f, &chain_polynomial(&b, &w, Gadget::Sum));
        assert_eq!(got, want);
    }

    #[test]
    fn power_set_expansion_matches_per_chain_sum() {
        let f = field();
        let w = WeightAssignment::random(f, 6, &mut ChaCha8Rng::seed_from_u64(11));
        let x = SetSystem::power_set(GroundSize::new(6).unwrap()).unwrap();
        let got = expand_coefficients(&build_abp(&x, &w).unwrap()).unwrap();
        let mut want = Coefficients::default();
        for p in permutations(6) {
            want.add_assign(&f, &chain_polynomial(&MaximalChain::new(p).unwrap(), &w, Gadget::Sum));
        }
        assert_eq!(got, want);
        assert!(got.len() <= 20);
        assert!(got.iter().all(|(m, _)| (0..6).filter(|&b| block_state(m, b) == 1).count() == 3));
    }

    #[test]
    fn evaluation_matches_expansion() {
        let f = field();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = SetSystem::power_set(GroundSize::new(6).unwrap()).unwrap();
        for gadget in [Gadget::Sum, Gadget::InnerProduct { block_size: 2 }] {
            let w = WeightAssignment::random(f, 6, &mut rng);
            let a = match gadget {
                Gadget::Sum => build_abp(&x, &w).unwrap(),
                Gadget::InnerProduct { block_size } => sm_build_abp(&x, block_size, &w).unwrap(),
            };
            let c = expand_coefficients(&a).unwrap();
            for _ in 0..100 {
                let point: Vec<u64> = (0..a.num_variables()).map(|_| f.random(&mut rng)).collect();
                assert_eq!(abp_evaluate(&a, &point).unwrap(), c.evaluate(&f, gadget.block_size(), &point));
            }
        }
    }

    #[test]
    fn block_size_one_is_a_single_monomial() {
        let x = SetSystem::power_set(GroundSize::new(4).unwrap()).unwrap();
        let w = WeightAssignment::random(field(), 4, &mut ChaCha8Rng::seed_from_u64(17));
        let c = expand_coefficients(&sm_build_abp(&x, 1, &w).unwrap()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.iter().next().unwrap().0, (0..4).fold(0, |m, b| m | var(b, 1)));
        let plain = expand_coefficients(&build_abp(&x, &w).unwrap()).unwrap();
        assert_eq!(plain.len(), 6);
    }

    #[test]
    fn expansion_cap() {
        let x = SetSystem::prefixes(&MaximalChain::identity(14));
        let a = build_abp(&x, &WeightAssignment::ones(field(), 14)).unwrap();
        assert!(expand_coefficients(&a).unwrap_err().is_capacity());
        assert_eq!(expand_coefficients_capped(&a, 14).unwrap().len(), 1 << 7);
    }
}
