//! Finite sets `{0, .., n-1}` and total functions between them.
//!
//! This is the substrate for every (co)span construction in the crate:
//! composition, coproducts, pushouts (coequalizers by union-find) and
//! pullbacks. All values are immutable once built.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A total function `{0..dom} -> {0..cod}` stored as a dense table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFinFunction", into = "RawFinFunction")]
pub struct FinFunction {
    cod: usize,
    table: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawFinFunction {
    dom: usize,
    cod: usize,
    table: Vec<usize>,
}

impl TryFrom<RawFinFunction> for FinFunction {
    type Error = Error;

    fn try_from(raw: RawFinFunction) -> Result<Self> {
        if raw.table.len() != raw.dom {
            return Err(Error::DomainMismatch {
                expected: raw.dom,
                found: raw.table.len(),
            });
        }
        FinFunction::new(raw.table, raw.cod)
    }
}

impl From<FinFunction> for RawFinFunction {
    fn from(f: FinFunction) -> Self {
        RawFinFunction {
            dom: f.dom(),
            cod: f.cod,
            table: f.table,
        }
    }
}

impl FinFunction {
    pub fn new(table: Vec<usize>, cod: usize) -> Result<Self> {
        if let Some(&bad) = table.iter().find(|&&x| x >= cod) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                size: cod,
            });
        }
        Ok(FinFunction { cod, table })
    }

    pub fn identity(n: usize) -> Self {
        FinFunction {
            cod: n,
            table: (0..n).collect(),
        }
    }

    /// The unique map out of the empty set.
    pub fn initial(cod: usize) -> Self {
        FinFunction {
            cod,
            table: Vec::new(),
        }
    }

    /// The constant map onto `value`.
    pub fn constant(dom: usize, value: usize, cod: usize) -> Result<Self> {
        FinFunction::new(vec![value; dom], cod)
    }

    pub fn dom(&self) -> usize {
        self.table.len()
    }

    pub fn cod(&self) -> usize {
        self.cod
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn apply(&self, i: usize) -> usize {
        self.table[i]
    }

    /// Diagrammatic composite: first `self`, then `next`.
    pub fn then(&self, next: &FinFunction) -> Result<FinFunction> {
        compose(self, next)
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.cod];
        self.table
            .iter()
            .all(|&x| !std::mem::replace(&mut seen[x], true))
    }

    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.cod];
        for &x in &self.table {
            hit[x] = true;
        }
        hit.into_iter().all(|h| h)
    }

    /// Returns the inverse when the table is a bijection.
    pub fn inverse(&self) -> Option<FinFunction> {
        if self.dom() != self.cod {
            return None;
        }
        let mut inv = vec![usize::MAX; self.cod];
        for (i, &x) in self.table.iter().enumerate() {
            if inv[x] != usize::MAX {
                return None;
            }
            inv[x] = i;
        }
        Some(FinFunction {
            cod: self.dom(),
            table: inv,
        })
    }

    pub fn is_iso(&self) -> bool {
        self.inverse().is_some()
    }

    /// Preimages of every element of the codomain, each in ascending order.
    pub fn fibers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cod];
        for (i, &x) in self.table.iter().enumerate() {
            out[x].push(i);
        }
        out
    }
}

/// `g ∘ f`, i.e. `result[i] = g[f[i]]`.
pub fn compose(f: &FinFunction, g: &FinFunction) -> Result<FinFunction> {
    if f.cod != g.dom() {
        return Err(Error::DomainMismatch {
            expected: g.dom(),
            found: f.cod,
        });
    }
    Ok(FinFunction {
        cod: g.cod,
        table: f.table.iter().map(|&x| g.table[x]).collect(),
    })
}

/// Blockwise sum of functions with left-nested offsets.
pub fn coproduct<'a>(fs: impl IntoIterator<Item = &'a FinFunction>) -> FinFunction {
    let mut table = Vec::new();
    let mut offset = 0;
    for f in fs {
        table.extend(f.table.iter().map(|&x| x + offset));
        offset += f.cod;
    }
    FinFunction { cod: offset, table }
}

/// Injections `n_k -> n_0 + .. + n_{m-1}` for the given block sizes.
pub fn coproduct_injections(sizes: &[usize]) -> Vec<FinFunction> {
    let total = sizes.iter().sum();
    let mut offset = 0;
    sizes
        .iter()
        .map(|&n| {
            let f = FinFunction {
                cod: total,
                table: (offset..offset + n).collect(),
            };
            offset += n;
            f
        })
        .collect()
}

/// Copairing `[f, g]: A + B -> C`.
pub fn copair(f: &FinFunction, g: &FinFunction) -> Result<FinFunction> {
    if f.cod != g.cod {
        return Err(Error::CodomainMismatch {
            left: f.cod,
            right: g.cod,
        });
    }
    let mut table = f.table.clone();
    table.extend_from_slice(&g.table);
    Ok(FinFunction { cod: f.cod, table })
}

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns `true` if the two classes were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Canonical quotient map: classes numbered in order of their smallest member.
    pub fn quotient(&mut self) -> FinFunction {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut table = Vec::with_capacity(n);
        let mut next = 0;
        for x in 0..n {
            let r = self.find(x);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            table.push(label[r]);
        }
        FinFunction { cod: next, table }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushoutResult {
    pub apex: usize,
    pub inj_left: FinFunction,
    pub inj_right: FinFunction,
}

impl PushoutResult {
    /// The quotient `B + C -> apex`.
    pub fn quotient(&self) -> FinFunction {
        copair(&self.inj_left, &self.inj_right).expect("injections share the apex")
    }
}

/// Pushout of the span `B <-f- A -g-> C`.
///
/// The apex is `(B + C)/~` with `f(a) ~ g(a)`; classes are labelled by their
/// smallest member of `B + C`, the `B` block first.
pub fn pushout(f: &FinFunction, g: &FinFunction) -> Result<PushoutResult> {
    if f.dom() != g.dom() {
        return Err(Error::DomainMismatch {
            expected: f.dom(),
            found: g.dom(),
        });
    }
    let b = f.cod;
    let mut uf = UnionFind::new(b + g.cod);
    for (&x, &y) in f.table.iter().zip(&g.table) {
        uf.union(x, b + y);
    }
    let q = uf.quotient();
    let apex = q.cod;
    let (left, right) = q.table.split_at(b);
    Ok(PushoutResult {
        apex,
        inj_left: FinFunction {
            cod: apex,
            table: left.to_vec(),
        },
        inj_right: FinFunction {
            cod: apex,
            table: right.to_vec(),
        },
    })
}

/// Coequalizer of a parallel pair `f, g: A -> B`.
pub fn coequalizer(f: &FinFunction, g: &FinFunction) -> Result<FinFunction> {
    if f.dom() != g.dom() {
        return Err(Error::DomainMismatch {
            expected: f.dom(),
            found: g.dom(),
        });
    }
    if f.cod != g.cod {
        return Err(Error::CodomainMismatch {
            left: f.cod,
            right: g.cod,
        });
    }
    let mut uf = UnionFind::new(f.cod);
    for (&x, &y) in f.table.iter().zip(&g.table) {
        uf.union(x, y);
    }
    Ok(uf.quotient())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PullbackResult {
    pub apex: usize,
    pub proj_left: FinFunction,
    pub proj_right: FinFunction,
}

/// Pullback of the cospan `B -f-> D <-g- C`; pairs `(b, c)` in lexicographic order.
pub fn pullback(f: &FinFunction, g: &FinFunction) -> Result<PullbackResult> {
    if f.cod != g.cod {
        return Err(Error::CodomainMismatch {
            left: f.cod,
            right: g.cod,
        });
    }
    let fibers = g.fibers();
    let (mut pl, mut pr) = (Vec::new(), Vec::new());
    for (b, &d) in f.table.iter().enumerate() {
        for &c in &fibers[d] {
            pl.push(b);
            pr.push(c);
        }
    }
    Ok(PullbackResult {
        apex: pl.len(),
        proj_left: FinFunction {
            cod: f.dom(),
            table: pl,
        },
        proj_right: FinFunction {
            cod: g.dom(),
            table: pr,
        },
    })
}

/// A finite set whose elements carry types drawn from a named type set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedFinSet {
    pub types: Vec<String>,
    pub typing: FinFunction,
}

impl TypedFinSet {
    pub fn new(types: Vec<String>, typing: FinFunction) -> Result<Self> {
        if typing.cod != types.len() {
            return Err(Error::CodomainMismatch {
                left: typing.cod,
                right: types.len(),
            });
        }
        Ok(TypedFinSet { types, typing })
    }

    /// Builds the typing from per-element type names, collecting the type set
    /// in first-seen order.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        let mut types: Vec<String> = Vec::new();
        let mut table = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let idx = match types.iter().position(|t| t == n) {
                Some(i) => i,
                None => {
                    types.push(n.to_string());
                    types.len() - 1
                }
            };
            table.push(idx);
        }
        let cod = types.len();
        TypedFinSet {
            types,
            typing: FinFunction { cod, table },
        }
    }

    pub fn size(&self) -> usize {
        self.typing.dom()
    }

    pub fn type_of(&self, i: usize) -> &str {
        &self.types[self.typing.table[i]]
    }

    pub fn type_names(&self) -> Vec<&str> {
        (0..self.size()).map(|i| self.type_of(i)).collect()
    }

    /// Pulls the typing back along `f: A -> self`.
    pub fn pull_back(&self, f: &FinFunction) -> Result<TypedFinSet> {
        Ok(TypedFinSet {
            types: self.types.clone(),
            typing: compose(f, &self.typing)?,
        })
    }

    /// Checks that `f: dom -> self` is type preserving.
    pub fn check_leg(&self, dom: &TypedFinSet, f: &FinFunction) -> Result<()> {
        if f.dom() != dom.size() || f.cod() != self.size() {
            return Err(Error::DomainMismatch {
                expected: dom.size(),
                found: f.dom(),
            });
        }
        for i in 0..f.dom() {
            let (a, b) = (dom.type_of(i), self.type_of(f.apply(i)));
            if a != b {
                return Err(Error::TypeClash(format!(
                    "element {i} has type `{a}` but maps to an element of type `{b}`"
                )));
            }
        }
        Ok(())
    }

    pub fn coproduct(parts: &[&TypedFinSet]) -> TypedFinSet {
        let names: Vec<&str> = parts.iter().flat_map(|p| p.type_names()).collect();
        TypedFinSet::from_names(&names)
    }
}
