//! Cospans and spans of finite sets as interactions.
//!
//! A cospan `M -> J <- N` is an undirected wiring diagram: `M` collects the
//! ports of the inner boxes (several boxes are one coproduct boundary, in box
//! order), `J` is the set of junctions and `N` the outer ports. Composition is
//! by pushout; spans compose by pullback. Composites come back in canonical
//! label form and are compared with [`cospan_iso`], never by raw equality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Verdict};
use crate::finset::{self, FinFunction, TypedFinSet};

/// `M -left-> J <-right- N`, optionally typed over a set of port types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cospan {
    left: FinFunction,
    right: FinFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    junction_types: Option<TypedFinSet>,
}

impl Cospan {
    pub fn new(left: FinFunction, right: FinFunction) -> Result<Self> {
        if left.cod() != right.cod() {
            return Err(Error::CodomainMismatch {
                left: left.cod(),
                right: right.cod(),
            });
        }
        Ok(Cospan {
            left,
            right,
            junction_types: None,
        })
    }

    /// Typed cospan. Boundary types are induced by the junction types.
    pub fn typed(
        left: FinFunction,
        right: FinFunction,
        junction_types: TypedFinSet,
    ) -> Result<Self> {
        let mut c = Cospan::new(left, right)?;
        if junction_types.size() != c.junctions() {
            return Err(Error::ArityMismatch(format!(
                "{} junction types for {} junctions",
                junction_types.size(),
                c.junctions()
            )));
        }
        c.junction_types = Some(junction_types);
        Ok(c)
    }

    /// Typed cospan whose declared boundary types must agree with the junctions.
    pub fn typed_with_boundaries(
        left: FinFunction,
        right: FinFunction,
        junction_types: TypedFinSet,
        inner: &TypedFinSet,
        outer: &TypedFinSet,
    ) -> Result<Self> {
        junction_types.check_leg(inner, &left)?;
        junction_types.check_leg(outer, &right)?;
        Cospan::typed(left, right, junction_types)
    }

    /// The empty diagram `0 -> 0 <- 0`.
    pub fn empty() -> Self {
        Cospan {
            left: FinFunction::identity(0),
            right: FinFunction::identity(0),
            junction_types: None,
        }
    }

    /// Identity interaction `n -> n <- n`.
    pub fn identity(n: usize) -> Self {
        Cospan {
            left: FinFunction::identity(n),
            right: FinFunction::identity(n),
            junction_types: None,
        }
    }

    pub fn left(&self) -> &FinFunction {
        &self.left
    }

    pub fn right(&self) -> &FinFunction {
        &self.right
    }

    pub fn inner(&self) -> usize {
        self.left.dom()
    }

    pub fn outer(&self) -> usize {
        self.right.dom()
    }

    pub fn junctions(&self) -> usize {
        self.left.cod()
    }

    pub fn junction_types(&self) -> Option<&TypedFinSet> {
        self.junction_types.as_ref()
    }

    pub fn inner_types(&self) -> Option<TypedFinSet> {
        self.junction_types.as_ref().map(|t| {
            t.pull_back(&self.left)
                .expect("left leg lands in junctions")
        })
    }

    pub fn outer_types(&self) -> Option<TypedFinSet> {
        self.junction_types.as_ref().map(|t| {
            t.pull_back(&self.right)
                .expect("right leg lands in junctions")
        })
    }

    /// Whether the outer leg is injective (no outer port is doubled up).
    pub fn has_monic_outer_leg(&self) -> bool {
        self.right.is_injective()
    }
}

fn boundary_types_agree(a: Option<TypedFinSet>, b: Option<TypedFinSet>, what: &str) -> Result<()> {
    match (a, b) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) => {
            let (a, b) = (a.type_names(), b.type_names());
            match a.iter().zip(&b).position(|(x, y)| x != y) {
                None => Ok(()),
                Some(i) => Err(Error::TypeClash(format!(
                    "{what} port {i}: `{}` vs `{}`",
                    a[i], b[i]
                ))),
            }
        }
        _ => Err(Error::TypeClash(format!(
            "{what}: cannot combine a typed and an untyped cospan"
        ))),
    }
}

/// Junction types of a quotient, read off any member of each class.
fn quotient_types(q: &FinFunction, parts: &[Option<&TypedFinSet>]) -> Option<TypedFinSet> {
    let parts: Option<Vec<&TypedFinSet>> = parts.iter().copied().collect();
    let parts = parts?;
    let names: Vec<&str> = parts.iter().flat_map(|p| p.type_names()).collect();
    let mut out = vec![""; q.cod()];
    for (i, &c) in q.table().iter().enumerate() {
        out[c] = names[i];
    }
    Some(TypedFinSet::from_names(&out))
}

/// Nesting: `c1: M -> J1 <- N` followed by `c2: N -> J2 <- P`.
pub fn compose_cospans(c1: &Cospan, c2: &Cospan) -> Result<Cospan> {
    if c1.outer() != c2.inner() {
        return Err(Error::BoundaryMismatch(format!(
            "outer boundary of size {} against inner boundary of size {}",
            c1.outer(),
            c2.inner()
        )));
    }
    boundary_types_agree(c1.outer_types(), c2.inner_types(), "shared boundary")?;
    let po = finset::pushout(&c1.right, &c2.left)?;
    let junction_types = quotient_types(
        &po.quotient(),
        &[c1.junction_types.as_ref(), c2.junction_types.as_ref()],
    );
    Ok(Cospan {
        left: c1.left.then(&po.inj_left)?,
        right: c2.right.then(&po.inj_right)?,
        junction_types,
    })
}

/// Monoidal product: blockwise coproduct of all three objects.
pub fn parallel_cospans(c1: &Cospan, c2: &Cospan) -> Result<Cospan> {
    let junction_types = match (&c1.junction_types, &c2.junction_types) {
        (None, None) => None,
        (Some(a), Some(b)) => Some(TypedFinSet::coproduct(&[a, b])),
        // The empty cospan is a unit for both typed and untyped diagrams.
        (Some(a), None) if c2.junctions() == 0 => Some(a.clone()),
        (None, Some(b)) if c1.junctions() == 0 => Some(b.clone()),
        _ => {
            return Err(Error::TypeClash(
                "cannot take the product of a typed and an untyped cospan".into(),
            ))
        }
    };
    Ok(Cospan {
        left: finset::coproduct([&c1.left, &c2.left]),
        right: finset::coproduct([&c1.right, &c2.right]),
        junction_types,
    })
}

pub fn parallel_all<'a>(cs: impl IntoIterator<Item = &'a Cospan>) -> Result<Cospan> {
    cs.into_iter()
        .try_fold(Cospan::empty(), |acc, c| parallel_cospans(&acc, c))
}

/// Finds a bijection of apexes `J -> J'` commuting with both legs (and
/// types), if there is one.
///
/// Junctions hit by a leg have forced images; the rest are matched by type
/// count, so the search is exhaustive without enumerating permutations.
pub fn cospan_iso(a: &Cospan, b: &Cospan) -> Option<FinFunction> {
    if a.inner() != b.inner() || a.outer() != b.outer() || a.junctions() != b.junctions() {
        return None;
    }
    let n = a.junctions();
    let ty = |c: &Cospan, j: usize| -> String {
        c.junction_types
            .as_ref()
            .map(|t| t.type_of(j).to_string())
            .unwrap_or_default()
    };
    if a.junction_types.is_some() != b.junction_types.is_some() {
        return None;
    }
    let mut fwd = vec![usize::MAX; n];
    let mut bwd = vec![usize::MAX; n];
    let pairs = a
        .left
        .table()
        .iter()
        .zip(b.left.table())
        .chain(a.right.table().iter().zip(b.right.table()));
    for (&x, &y) in pairs {
        if fwd[x] == usize::MAX && bwd[y] == usize::MAX {
            fwd[x] = y;
            bwd[y] = x;
        } else if fwd[x] != y || bwd[y] != x {
            return None;
        }
    }
    for x in 0..n {
        if fwd[x] != usize::MAX && ty(a, x) != ty(b, fwd[x]) {
            return None;
        }
    }
    // Floating junctions: pair them up type by type in ascending order.
    let mut free_b: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for y in (0..n).rev() {
        if bwd[y] == usize::MAX {
            free_b.entry(ty(b, y)).or_default().push(y);
        }
    }
    for x in 0..n {
        if fwd[x] == usize::MAX {
            let y = free_b.get_mut(&ty(a, x))?.pop()?;
            fwd[x] = y;
        }
    }
    Some(FinFunction::new(fwd, n).expect("bijection into n"))
}

pub fn cospans_isomorphic(a: &Cospan, b: &Cospan) -> bool {
    cospan_iso(a, b).is_some()
}

/// A map of interactions: `m: M -> M'`, `j: J -> J'`, `n: N -> N'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CospanMap {
    pub m: FinFunction,
    pub n: FinFunction,
    pub j: FinFunction,
}

impl CospanMap {
    pub fn identity(c: &Cospan) -> Self {
        CospanMap {
            m: FinFunction::identity(c.inner()),
            n: FinFunction::identity(c.outer()),
            j: FinFunction::identity(c.junctions()),
        }
    }

    /// Vertical pasting: `self` then `next`.
    pub fn then(&self, next: &CospanMap) -> Result<CospanMap> {
        Ok(CospanMap {
            m: self.m.then(&next.m)?,
            n: self.n.then(&next.n)?,
            j: self.j.then(&next.j)?,
        })
    }
}

/// Checks that both squares of a cospan map commute pointwise.
pub fn check_cospan_map(sq: &CospanMap, src: &Cospan, tgt: &Cospan) -> Result<Verdict> {
    let shape = [
        ("m", &sq.m, src.inner(), tgt.inner()),
        ("n", &sq.n, src.outer(), tgt.outer()),
        ("j", &sq.j, src.junctions(), tgt.junctions()),
    ];
    for (name, f, dom, cod) in shape {
        if f.dom() != dom || f.cod() != cod {
            return Err(Error::ArityMismatch(format!(
                "component {name} is {}->{}, expected {dom}->{cod}",
                f.dom(),
                f.cod()
            )));
        }
    }
    let check = |leg: &str, bound: &FinFunction, src_leg: &FinFunction, tgt_leg: &FinFunction| {
        for i in 0..bound.dom() {
            let down_right = sq.j.apply(src_leg.apply(i));
            let right_down = tgt_leg.apply(bound.apply(i));
            if down_right != right_down {
                return Verdict::fail(format!(
                    "{leg} square fails at port {i}: j(leg(i)) = {down_right} but leg'({i}') = {right_down}"
                ));
            }
        }
        Verdict::Pass
    };
    Ok(check("inner", &sq.m, &src.left, &tgt.left)
        .and_then(|| check("outer", &sq.n, &src.right, &tgt.right)))
}

/// `X -> A` and `X -> B`, read as a span `A <- X -> B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    left: FinFunction,
    right: FinFunction,
}

impl Span {
    pub fn new(left: FinFunction, right: FinFunction) -> Result<Self> {
        if left.dom() != right.dom() {
            return Err(Error::DomainMismatch {
                expected: left.dom(),
                found: right.dom(),
            });
        }
        Ok(Span { left, right })
    }

    pub fn identity(n: usize) -> Self {
        Span {
            left: FinFunction::identity(n),
            right: FinFunction::identity(n),
        }
    }

    pub fn left(&self) -> &FinFunction {
        &self.left
    }

    pub fn right(&self) -> &FinFunction {
        &self.right
    }

    pub fn apex(&self) -> usize {
        self.left.dom()
    }

    /// The relation `{(left(x), right(x))}` as sorted distinct pairs.
    pub fn relation(&self) -> Vec<(usize, usize)> {
        let mut r: Vec<_> = self
            .left
            .table()
            .iter()
            .copied()
            .zip(self.right.table().iter().copied())
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn is_jointly_monic(&self) -> bool {
        self.relation().len() == self.apex()
    }
}

/// `s1: A <- X -> B` followed by `s2: B <- Y -> C`.
pub fn compose_spans(s1: &Span, s2: &Span) -> Result<Span> {
    if s1.right.cod() != s2.left.cod() {
        return Err(Error::BoundaryMismatch(format!(
            "middle objects differ: {} vs {}",
            s1.right.cod(),
            s2.left.cod()
        )));
    }
    let pb = finset::pullback(&s1.right, &s2.left)?;
    Ok(Span {
        left: pb.proj_left.then(&s1.left)?,
        right: pb.proj_right.then(&s2.right)?,
    })
}

/// A bijection of apexes commuting with the legs, if any.
pub fn span_iso(a: &Span, b: &Span) -> Option<FinFunction> {
    if a.apex() != b.apex() || a.left.cod() != b.left.cod() || a.right.cod() != b.right.cod() {
        return None;
    }
    let mut pool: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for y in (0..b.apex()).rev() {
        pool.entry((b.left.apply(y), b.right.apply(y)))
            .or_default()
            .push(y);
    }
    let table = (0..a.apex())
        .map(|x| pool.get_mut(&(a.left.apply(x), a.right.apply(x)))?.pop())
        .collect::<Option<Vec<_>>>()?;
    FinFunction::new(table, b.apex()).ok()
}

/// The data of a category with two classes of maps closed under composition,
/// containing identities, and admitting completions of `L`-`R` corners.
///
/// Spans with left leg in `L` and right leg in `R` then compose by
/// completing the middle corner. Cospans of finite sets are the dual
/// instance ([`FinSetPushouts`]); lenses are the simple-fibration instance
/// (see [`crate::lens::SimpleFibration`]).
pub trait CompositionContract {
    type Object: Clone + PartialEq + std::fmt::Debug;
    type Morphism: Clone + PartialEq + std::fmt::Debug;

    fn source(&self, f: &Self::Morphism) -> Self::Object;
    fn target(&self, f: &Self::Morphism) -> Self::Object;
    fn identity(&self, x: &Self::Object) -> Self::Morphism;
    /// Diagrammatic order: `f` then `g`.
    fn compose(&self, f: &Self::Morphism, g: &Self::Morphism) -> Result<Self::Morphism>;
    fn in_left_class(&self, f: &Self::Morphism) -> bool;
    fn in_right_class(&self, f: &Self::Morphism) -> bool;
    /// Completes the corner formed by `r` (in `R`) and `l` (in `L`) with a
    /// common target, returning `(l', r')` with `l'` in `L` parallel to `r`
    /// and `r'` in `R` parallel to `l`, so that `l' ; r = r' ; l`.
    fn complete(
        &self,
        r: &Self::Morphism,
        l: &Self::Morphism,
    ) -> Result<(Self::Morphism, Self::Morphism)>;
}

/// Finite sets with all maps in both classes, read in the opposite category so
/// that completing a corner is a pushout: `complete(r, l)` takes maps with a
/// common domain and returns the pushout injections.
#[derive(Debug, Clone, Copy, Default)]
pub struct FinSetPushouts;

impl CompositionContract for FinSetPushouts {
    type Object = usize;
    type Morphism = FinFunction;

    fn source(&self, f: &FinFunction) -> usize {
        f.cod()
    }
    fn target(&self, f: &FinFunction) -> usize {
        f.dom()
    }
    fn identity(&self, x: &usize) -> FinFunction {
        FinFunction::identity(*x)
    }
    fn compose(&self, f: &FinFunction, g: &FinFunction) -> Result<FinFunction> {
        // Opposite category: f then g is g followed by f in FinSet.
        g.then(f)
    }
    fn in_left_class(&self, _: &FinFunction) -> bool {
        true
    }
    fn in_right_class(&self, _: &FinFunction) -> bool {
        true
    }
    fn complete(&self, r: &FinFunction, l: &FinFunction) -> Result<(FinFunction, FinFunction)> {
        let po = finset::pushout(r, l)?;
        Ok((po.inj_left, po.inj_right))
    }
}
