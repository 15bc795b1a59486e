//! Interfaces, lenses and charts over finite sets, and directed wiring
//! diagrams read as lenses.
//!
//! An interface `{I / O}` pairs an input space with an output space. A lens
//! `{I1/O1} -> {I2/O2}` is a forward map `O1 -> O2` with a backward map
//! `O1 × I2 -> I1`; a chart runs both maps forward (`O1 -> O2`,
//! `O1 × I1 -> I2`). Finite maps are dense tables over the mixed-radix
//! (lexicographic, first factor most significant) encoding of products, so
//! nested and flat products share one encoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Verdict};
use crate::finset::FinFunction;
use crate::wiring::CompositionContract;

/// An enumerated set of named values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteSpace {
    names: Vec<String>,
}

impl FiniteSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidTable(format!("duplicate value name `{n}`")));
            }
        }
        Ok(FiniteSpace { names })
    }

    /// `{0, 1, .., n-1}` named by decimal numerals.
    pub fn range(n: usize) -> Self {
        FiniteSpace {
            names: (0..n).map(|k| k.to_string()).collect(),
        }
    }

    /// The one-point space. Its element has the empty name, so products with
    /// it keep the other factor's names.
    pub fn unit() -> Self {
        FiniteSpace {
            names: vec![String::new()],
        }
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn lookup(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownName(format!("no value `{name}` in {:?}", self.names)))
    }

    /// Cartesian product. Pair names concatenate; if that is ambiguous they
    /// are joined with `|` instead.
    pub fn product(&self, other: &FiniteSpace) -> FiniteSpace {
        let pairs = || {
            self.names
                .iter()
                .flat_map(|a| other.names.iter().map(move |b| (a, b)))
        };
        let mut names: Vec<String> = pairs().map(|(a, b)| format!("{a}{b}")).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            names = pairs().map(|(a, b)| format!("{a}|{b}")).collect();
        }
        FiniteSpace { names }
    }

    pub fn product_all<'a>(spaces: impl IntoIterator<Item = &'a FiniteSpace>) -> FiniteSpace {
        spaces
            .into_iter()
            .fold(FiniteSpace::unit(), |acc, s| acc.product(s))
    }
}

/// Mixed-radix encoding of tuples, first coordinate most significant.
pub(crate) fn encode(radices: &[usize], digits: &[usize]) -> usize {
    radices
        .iter()
        .zip(digits)
        .fold(0, |acc, (&r, &d)| acc * r + d)
}

pub(crate) fn decode(radices: &[usize], mut index: usize) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (slot, &r) in digits.iter_mut().zip(radices).rev() {
        *slot = index % r;
        index /= r;
    }
    digits
}

/// `{input / output}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub input: FiniteSpace,
    pub output: FiniteSpace,
}

impl Interface {
    pub fn new(input: FiniteSpace, output: FiniteSpace) -> Self {
        Interface { input, output }
    }

    /// `{1 / 1}`, the monoidal unit.
    pub fn unit() -> Self {
        Interface::new(FiniteSpace::unit(), FiniteSpace::unit())
    }

    pub fn product(&self, other: &Interface) -> Interface {
        Interface::new(
            self.input.product(&other.input),
            self.output.product(&other.output),
        )
    }

    /// Same shape: interfaces are compared by cardinality, names are labels.
    pub fn matches(&self, other: &Interface) -> bool {
        self.input.size() == other.input.size() && self.output.size() == other.output.size()
    }

    fn describe(&self) -> String {
        format!("{{{}/{}}}", self.input.size(), self.output.size())
    }
}

fn expect_match(a: &Interface, b: &Interface, what: &str) -> Result<()> {
    if a.matches(b) {
        Ok(())
    } else {
        Err(Error::InterfaceMismatch(format!(
            "{what}: {} vs {}",
            a.describe(),
            b.describe()
        )))
    }
}

fn check_table(what: &str, table: &[usize], len: usize, bound: usize) -> Result<()> {
    if table.len() != len {
        return Err(Error::InvalidTable(format!(
            "{what} has {} entries, expected {len}",
            table.len()
        )));
    }
    if let Some((k, &v)) = table.iter().enumerate().find(|(_, &v)| v >= bound) {
        return Err(Error::InvalidTable(format!(
            "{what} entry {k} is {v}, out of range for a set of size {bound}"
        )));
    }
    Ok(())
}

/// A lens between finite interfaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lens {
    source: Interface,
    target: Interface,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

impl Lens {
    /// `fwd[o1]`, `bwd[o1 * |I2| + i2]`.
    pub fn new(
        source: Interface,
        target: Interface,
        fwd: Vec<usize>,
        bwd: Vec<usize>,
    ) -> Result<Self> {
        check_table(
            "forward map",
            &fwd,
            source.output.size(),
            target.output.size(),
        )?;
        check_table(
            "backward map",
            &bwd,
            source.output.size() * target.input.size(),
            source.input.size(),
        )?;
        Ok(Lens {
            source,
            target,
            fwd,
            bwd,
        })
    }

    pub fn from_fns(
        source: Interface,
        target: Interface,
        fwd: impl Fn(usize) -> usize,
        bwd: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let (no, ni) = (source.output.size(), target.input.size());
        let f = (0..no).map(fwd).collect();
        let b = (0..no)
            .flat_map(|o| (0..ni).map(move |i| (o, i)))
            .map(|(o, i)| bwd(o, i))
            .collect();
        Lens::new(source, target, f, b)
    }

    pub fn identity(iface: &Interface) -> Self {
        let ni = iface.input.size();
        Lens {
            source: iface.clone(),
            target: iface.clone(),
            fwd: (0..iface.output.size()).collect(),
            bwd: (0..iface.output.size()).flat_map(|_| 0..ni).collect(),
        }
    }

    pub fn source(&self) -> &Interface {
        &self.source
    }

    pub fn target(&self) -> &Interface {
        &self.target
    }

    pub fn fwd(&self, o: usize) -> usize {
        self.fwd[o]
    }

    pub fn bwd(&self, o: usize, i: usize) -> usize {
        self.bwd[o * self.target.input.size() + i]
    }

    pub fn fwd_table(&self) -> &[usize] {
        &self.fwd
    }

    pub fn bwd_table(&self) -> &[usize] {
        &self.bwd
    }
}

/// `l1` then `l2`: `fwd = fwd2 ∘ fwd1`, `bwd(o1, i3) = bwd1(o1, bwd2(fwd1(o1), i3))`.
pub fn lens_compose(l1: &Lens, l2: &Lens) -> Result<Lens> {
    expect_match(&l1.target, &l2.source, "middle interfaces")?;
    Lens::from_fns(
        l1.source.clone(),
        l2.target.clone(),
        |o| l2.fwd(l1.fwd(o)),
        |o, i| l1.bwd(o, l2.bwd(l1.fwd(o), i)),
    )
}

pub fn lens_parallel(l1: &Lens, l2: &Lens) -> Lens {
    let source = l1.source.product(&l2.source);
    let target = l1.target.product(&l2.target);
    let (no2, ni2_src, ni2_tgt) = (
        l2.source.output.size(),
        l2.source.input.size(),
        l2.target.input.size(),
    );
    Lens::from_fns(
        source,
        target,
        |o| {
            let (a, b) = (o / no2, o % no2);
            l1.fwd(a) * l2.target.output.size() + l2.fwd(b)
        },
        |o, i| {
            let (oa, ob) = (o / no2, o % no2);
            let (ia, ib) = (i / ni2_tgt, i % ni2_tgt);
            l1.bwd(oa, ia) * ni2_src + l2.bwd(ob, ib)
        },
    )
    .expect("product of valid lenses is valid")
}

pub fn lens_parallel_all<'a>(ls: impl IntoIterator<Item = &'a Lens>) -> Lens {
    ls.into_iter()
        .fold(Lens::identity(&Interface::unit()), |acc, l| {
            lens_parallel(&acc, l)
        })
}

/// A chart `{I1/O1} => {I2/O2}`: `fwd: O1 -> O2`, `push: O1 × I1 -> I2`.
///
/// Tables are stored as given; use [`check_chart`] to validate charts read
/// from untrusted input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    pub source: Interface,
    pub target: Interface,
    /// `fwd[o1]`.
    pub fwd: Vec<usize>,
    /// `push[o1 * |I1| + i1]`.
    pub push: Vec<usize>,
}

impl Chart {
    pub fn new(
        source: Interface,
        target: Interface,
        fwd: Vec<usize>,
        push: Vec<usize>,
    ) -> Result<Self> {
        let chart = Chart {
            source,
            target,
            fwd,
            push,
        };
        match check_chart(&chart) {
            Verdict::Pass => Ok(chart),
            Verdict::Fail(why) => Err(Error::InvalidTable(why)),
        }
    }

    pub fn from_fns(
        source: Interface,
        target: Interface,
        fwd: impl Fn(usize) -> usize,
        push: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let (no, ni) = (source.output.size(), source.input.size());
        let f = (0..no).map(fwd).collect();
        let p = (0..no)
            .flat_map(|o| (0..ni).map(move |i| (o, i)))
            .map(|(o, i)| push(o, i))
            .collect();
        Chart::new(source, target, f, p)
    }

    pub fn identity(iface: &Interface) -> Self {
        let ni = iface.input.size();
        Chart {
            source: iface.clone(),
            target: iface.clone(),
            fwd: (0..iface.output.size()).collect(),
            push: (0..iface.output.size()).flat_map(|_| 0..ni).collect(),
        }
    }

    pub fn fwd(&self, o: usize) -> usize {
        self.fwd[o]
    }

    pub fn push(&self, o: usize, i: usize) -> usize {
        self.push[o * self.source.input.size() + i]
    }

    /// `self` then `next`.
    pub fn then(&self, next: &Chart) -> Result<Chart> {
        expect_match(&self.target, &next.source, "middle interfaces")?;
        Chart::from_fns(
            self.source.clone(),
            next.target.clone(),
            |o| next.fwd(self.fwd(o)),
            |o, i| next.push(self.fwd(o), self.push(o, i)),
        )
    }

    /// The interface of a finite window `0..=horizon` of the timeline:
    /// a single input `tick` and outputs `0`..`horizon`.
    pub fn timeline_interface(horizon: usize) -> Interface {
        Interface::new(
            FiniteSpace::new(["tick"]).expect("one name"),
            FiniteSpace::range(horizon + 1),
        )
    }

    /// A behaviour on `target` over a window: output `outputs[k]` at time `k`
    /// while receiving `inputs[k]`.
    pub fn timeline(target: &Interface, inputs: &[usize], outputs: &[usize]) -> Result<Chart> {
        if outputs.is_empty() || inputs.len() + 1 < outputs.len() {
            return Err(Error::ArityMismatch(format!(
                "{} inputs for {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let horizon = outputs.len() - 1;
        // The last time step has no successor; its input is never consumed.
        let input_at = |k: usize| inputs.get(k).or(inputs.last()).copied().unwrap_or(0);
        Chart::from_fns(
            Chart::timeline_interface(horizon),
            target.clone(),
            |k| outputs[k],
            |k, _| input_at(k),
        )
    }
}

/// Totality and arity checks; reports the first offending entry.
pub fn check_chart(c: &Chart) -> Verdict {
    let checks = [
        check_table(
            "forward map",
            &c.fwd,
            c.source.output.size(),
            c.target.output.size(),
        ),
        check_table(
            "input map",
            &c.push,
            c.source.output.size() * c.source.input.size(),
            c.target.input.size(),
        ),
    ];
    for r in checks {
        if let Err(e) = r {
            return Verdict::Fail(e.to_string());
        }
    }
    Verdict::Pass
}

/// Objects `(|A|, |A#|)`; maps `(f: A -> B, f♭: A × A# -> B#)`. The left
/// class is the vertical maps (`f` an identity), the right class the
/// cartesian ones (`f♭` the projection). Lenses are spans with a vertical
/// left leg and a cartesian right leg.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleFibration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleMap {
    pub base: FinFunction,
    /// `fiber[a * |A#| + x]`.
    pub fiber: Vec<usize>,
    pub fiber_dom: usize,
    pub fiber_cod: usize,
}

impl SimpleMap {
    fn at(&self, a: usize, x: usize) -> usize {
        self.fiber[a * self.fiber_dom + x]
    }

    pub fn vertical(
        base: usize,
        fiber_dom: usize,
        fiber_cod: usize,
        f: impl Fn(usize, usize) -> usize,
    ) -> Self {
        SimpleMap {
            base: FinFunction::identity(base),
            fiber: (0..base)
                .flat_map(|a| (0..fiber_dom).map(move |x| (a, x)))
                .map(|(a, x)| f(a, x))
                .collect(),
            fiber_dom,
            fiber_cod,
        }
    }

    pub fn cartesian(base: FinFunction, fiber: usize) -> Self {
        let n = base.dom();
        SimpleMap {
            base,
            fiber: (0..n).flat_map(|_| 0..fiber).collect(),
            fiber_dom: fiber,
            fiber_cod: fiber,
        }
    }
}

impl CompositionContract for SimpleFibration {
    type Object = (usize, usize);
    type Morphism = SimpleMap;

    fn source(&self, f: &SimpleMap) -> (usize, usize) {
        (f.base.dom(), f.fiber_dom)
    }
    fn target(&self, f: &SimpleMap) -> (usize, usize) {
        (f.base.cod(), f.fiber_cod)
    }
    fn identity(&self, &(a, x): &(usize, usize)) -> SimpleMap {
        SimpleMap::vertical(a, x, x, |_, x| x)
    }
    fn compose(&self, f: &SimpleMap, g: &SimpleMap) -> Result<SimpleMap> {
        if self.target(f) != self.source(g) {
            return Err(Error::DomainMismatch {
                expected: g.base.dom(),
                found: f.base.cod(),
            });
        }
        let base = f.base.then(&g.base)?;
        let fiber = (0..f.base.dom())
            .flat_map(|a| (0..f.fiber_dom).map(move |x| (a, x)))
            .map(|(a, x)| g.at(f.base.apply(a), f.at(a, x)))
            .collect();
        Ok(SimpleMap {
            base,
            fiber,
            fiber_dom: f.fiber_dom,
            fiber_cod: g.fiber_cod,
        })
    }
    fn in_left_class(&self, f: &SimpleMap) -> bool {
        f.base == FinFunction::identity(f.base.dom())
    }
    fn in_right_class(&self, f: &SimpleMap) -> bool {
        f.fiber_dom == f.fiber_cod
            && (0..f.base.dom()).all(|a| (0..f.fiber_dom).all(|x| f.at(a, x) == x))
    }
    /// `r: (A, X) -> (B, X)` cartesian over `f`, `l: (B, Y) -> (B, X)`
    /// vertical; the completion has apex `(A, Y)`.
    fn complete(&self, r: &SimpleMap, l: &SimpleMap) -> Result<(SimpleMap, SimpleMap)> {
        if !self.in_right_class(r) || !self.in_left_class(l) || self.target(r) != self.target(l) {
            return Err(Error::InvalidLeg(
                "corner is not cartesian against vertical".into(),
            ));
        }
        let (a, y) = (r.base.dom(), l.fiber_dom);
        let l2 = SimpleMap::vertical(a, y, r.fiber_dom, |p, q| l.at(r.base.apply(p), q));
        let r2 = SimpleMap::cartesian(r.base.clone(), y);
        Ok((l2, r2))
    }
}

/// A lens as a span in the simple fibration: `(A, A#) <- (A, B#) -> (B, B#)`.
pub fn lens_as_span(l: &Lens) -> (SimpleMap, SimpleMap) {
    let (na, nb_in) = (l.source.output.size(), l.target.input.size());
    let left = SimpleMap::vertical(na, nb_in, l.source.input.size(), |o, i| l.bwd(o, i));
    let base = FinFunction::new(l.fwd.clone(), l.target.output.size()).expect("valid lens");
    (left, SimpleMap::cartesian(base, nb_in))
}

/// A type of values carried by wires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortKind {
    Finite(FiniteSpace),
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub kind: PortKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

impl Port {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Port {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwdBox {
    pub name: String,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
}

/// Where a wire starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    /// An input port of the outer boundary.
    Outer(usize),
    /// An output port of an inner box.
    Inner { ibox: usize, port: usize },
}

/// Where a wire ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sink {
    /// An output port of the outer boundary.
    Outer(usize),
    /// An input port of an inner box.
    Inner { ibox: usize, port: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Wire {
    pub src: Source,
    pub dst: Sink,
}

/// Inner boxes, an outer boundary, and wires. Every inner input and every
/// outer output must be fed by exactly one source; sources may fan out,
/// and box outputs may feed sibling (or their own) inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedWiringDiagram {
    pub types: Vec<TypeDecl>,
    pub boxes: Vec<DwdBox>,
    pub outer: DwdBox,
    pub wires: Vec<Wire>,
}

/// The resolved source of every sink of a valid diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feeds {
    /// `inner[b][p]` feeds input `p` of box `b`.
    pub inner: Vec<Vec<Source>>,
    /// `outer[q]` feeds outer output `q`.
    pub outer: Vec<Source>,
}

impl DirectedWiringDiagram {
    pub fn type_kind(&self, name: &str) -> Result<&PortKind> {
        self.types
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.kind)
            .ok_or_else(|| Error::UnknownName(format!("type `{name}`")))
    }

    fn source_port(&self, s: Source) -> Result<&Port> {
        let port = match s {
            Source::Outer(p) => self.outer.inputs.get(p),
            Source::Inner { ibox, port } => self.boxes.get(ibox).and_then(|b| b.outputs.get(port)),
        };
        port.ok_or_else(|| Error::UnknownName(format!("source {}", self.describe_source(s))))
    }

    fn sink_port(&self, s: Sink) -> Result<&Port> {
        let port = match s {
            Sink::Outer(p) => self.outer.outputs.get(p),
            Sink::Inner { ibox, port } => self.boxes.get(ibox).and_then(|b| b.inputs.get(port)),
        };
        port.ok_or_else(|| Error::UnknownName(format!("sink {}", self.describe_sink(s))))
    }

    pub fn describe_source(&self, s: Source) -> String {
        match s {
            Source::Outer(p) => format!(
                "outer.{}",
                self.outer.inputs.get(p).map_or("?", |x| x.name.as_str())
            ),
            Source::Inner { ibox, port } => {
                let b = self.boxes.get(ibox);
                format!(
                    "{}.{}",
                    b.map_or("?", |b| b.name.as_str()),
                    b.and_then(|b| b.outputs.get(port))
                        .map_or("?", |x| x.name.as_str())
                )
            }
        }
    }

    pub fn describe_sink(&self, s: Sink) -> String {
        match s {
            Sink::Outer(p) => format!(
                "outer.{}",
                self.outer.outputs.get(p).map_or("?", |x| x.name.as_str())
            ),
            Sink::Inner { ibox, port } => {
                let b = self.boxes.get(ibox);
                format!(
                    "{}.{}",
                    b.map_or("?", |b| b.name.as_str()),
                    b.and_then(|b| b.inputs.get(port))
                        .map_or("?", |x| x.name.as_str())
                )
            }
        }
    }

    /// Validates the diagram and resolves each sink's unique source.
    pub fn feeds(&self) -> Result<Feeds> {
        let all_ports = self
            .boxes
            .iter()
            .chain(std::iter::once(&self.outer))
            .flat_map(|b| b.inputs.iter().chain(&b.outputs));
        for p in all_ports {
            self.type_kind(&p.ty)?;
        }
        let mut inner: Vec<Vec<Option<Source>>> = self
            .boxes
            .iter()
            .map(|b| vec![None; b.inputs.len()])
            .collect();
        let mut outer: Vec<Option<Source>> = vec![None; self.outer.outputs.len()];
        for w in &self.wires {
            let (from, to) = (self.source_port(w.src)?, self.sink_port(w.dst)?);
            if from.ty != to.ty {
                return Err(Error::TypeClash(format!(
                    "{} has type `{}` but {} has type `{}`",
                    self.describe_source(w.src),
                    from.ty,
                    self.describe_sink(w.dst),
                    to.ty
                )));
            }
            if let (Source::Outer(_), Sink::Outer(_)) = (w.src, w.dst) {
                return Err(Error::CyclicThroughOuterInput(format!(
                    "{} -> {}",
                    self.describe_source(w.src),
                    self.describe_sink(w.dst)
                )));
            }
            let slot = match w.dst {
                Sink::Outer(q) => &mut outer[q],
                Sink::Inner { ibox, port } => &mut inner[ibox][port],
            };
            if slot.replace(w.src).is_some() {
                return Err(Error::MultipleFeeds(self.describe_sink(w.dst)));
            }
        }
        let inner = inner
            .into_iter()
            .enumerate()
            .map(|(b, ports)| {
                ports
                    .into_iter()
                    .enumerate()
                    .map(|(p, s)| {
                        s.ok_or_else(|| {
                            Error::DanglingPort(
                                self.describe_sink(Sink::Inner { ibox: b, port: p }),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let outer = outer
            .into_iter()
            .enumerate()
            .map(|(q, s)| s.ok_or_else(|| Error::DanglingPort(self.describe_sink(Sink::Outer(q)))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Feeds { inner, outer })
    }

    pub fn validate(&self) -> Result<()> {
        self.feeds().map(|_| ())
    }

    fn finite_space(&self, ty: &str) -> Result<&FiniteSpace> {
        match self.type_kind(ty)? {
            PortKind::Finite(s) => Ok(s),
            PortKind::Real => Err(Error::KindMismatch(format!(
                "type `{ty}` is real-valued; a finite lens needs finite port types"
            ))),
        }
    }

    fn ports_space(&self, ports: &[Port]) -> Result<FiniteSpace> {
        let spaces = ports
            .iter()
            .map(|p| self.finite_space(&p.ty))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteSpace::product_all(spaces))
    }

    fn ports_radices(&self, ports: &[Port]) -> Result<Vec<usize>> {
        ports
            .iter()
            .map(|p| self.finite_space(&p.ty).map(FiniteSpace::size))
            .collect()
    }

    /// The interface of one box (or of the outer boundary).
    pub fn box_interface(&self, b: &DwdBox) -> Result<Interface> {
        Ok(Interface::new(
            self.ports_space(&b.inputs)?,
            self.ports_space(&b.outputs)?,
        ))
    }

    /// Replaces box `k` by the diagram `inner`, whose boundary must match
    /// the box. Inner boxes take box `k`'s place in the box order.
    pub fn substitute(
        &self,
        k: usize,
        inner: &DirectedWiringDiagram,
    ) -> Result<DirectedWiringDiagram> {
        let slot = self
            .boxes
            .get(k)
            .ok_or_else(|| Error::UnknownName(format!("box index {k}")))?;
        let shape = |ports: &[Port]| ports.iter().map(|p| p.ty.clone()).collect::<Vec<_>>();
        if shape(&slot.inputs) != shape(&inner.outer.inputs)
            || shape(&slot.outputs) != shape(&inner.outer.outputs)
        {
            return Err(Error::BoundaryMismatch(format!(
                "box `{}` does not match the substituted diagram's boundary",
                slot.name
            )));
        }
        let outer_feeds = self.feeds()?;
        let inner_feeds = inner.feeds()?;
        let n_inner = inner.boxes.len();
        let remap_box = |b: usize| if b < k { b } else { b + n_inner - 1 };

        fn resolve_outer(
            s: Source,
            k: usize,
            remap: &dyn Fn(usize) -> usize,
            inner_feeds: &Feeds,
            outer_feeds: &Feeds,
        ) -> Source {
            match s {
                Source::Outer(p) => Source::Outer(p),
                Source::Inner { ibox, port } if ibox == k => {
                    resolve_inner(inner_feeds.outer[port], k, remap, inner_feeds, outer_feeds)
                }
                Source::Inner { ibox, port } => Source::Inner {
                    ibox: remap(ibox),
                    port,
                },
            }
        }
        fn resolve_inner(
            s: Source,
            k: usize,
            remap: &dyn Fn(usize) -> usize,
            inner_feeds: &Feeds,
            outer_feeds: &Feeds,
        ) -> Source {
            match s {
                Source::Inner { ibox, port } => Source::Inner {
                    ibox: k + ibox,
                    port,
                },
                Source::Outer(p) => {
                    resolve_outer(outer_feeds.inner[k][p], k, remap, inner_feeds, outer_feeds)
                }
            }
        }

        let mut boxes = Vec::new();
        boxes.extend(self.boxes[..k].iter().cloned());
        boxes.extend(inner.boxes.iter().cloned());
        boxes.extend(self.boxes[k + 1..].iter().cloned());

        let mut wires = Vec::new();
        for (b, feeds) in outer_feeds.inner.iter().enumerate() {
            if b == k {
                continue;
            }
            for (p, &s) in feeds.iter().enumerate() {
                wires.push(Wire {
                    src: resolve_outer(s, k, &remap_box, &inner_feeds, &outer_feeds),
                    dst: Sink::Inner {
                        ibox: remap_box(b),
                        port: p,
                    },
                });
            }
        }
        for (b, feeds) in inner_feeds.inner.iter().enumerate() {
            for (p, &s) in feeds.iter().enumerate() {
                wires.push(Wire {
                    src: resolve_inner(s, k, &remap_box, &inner_feeds, &outer_feeds),
                    dst: Sink::Inner {
                        ibox: k + b,
                        port: p,
                    },
                });
            }
        }
        for (q, &s) in outer_feeds.outer.iter().enumerate() {
            wires.push(Wire {
                src: resolve_outer(s, k, &remap_box, &inner_feeds, &outer_feeds),
                dst: Sink::Outer(q),
            });
        }
        let mut types = self.types.clone();
        for t in &inner.types {
            match types.iter().find(|u| u.name == t.name) {
                Some(u) if u.kind != t.kind => {
                    return Err(Error::TypeClash(format!(
                        "type `{}` declared twice",
                        t.name
                    )))
                }
                Some(_) => {}
                None => types.push(t.clone()),
            }
        }
        let d = DirectedWiringDiagram {
            types,
            boxes,
            outer: self.outer.clone(),
            wires,
        };
        d.validate()?;
        Ok(d)
    }
}

/// The lens `∏ (box interfaces) -> outer interface` routing values along
/// the wires.
pub fn dwd_to_lens(d: &DirectedWiringDiagram) -> Result<Lens> {
    let feeds = d.feeds()?;
    let box_ifaces = d
        .boxes
        .iter()
        .map(|b| d.box_interface(b))
        .collect::<Result<Vec<_>>>()?;
    let source = box_ifaces
        .iter()
        .fold(Interface::unit(), |acc, i| acc.product(i));
    let target = d.box_interface(&d.outer)?;

    // Flattened port lists in box order; offsets locate a box's ports.
    let mut out_radices = Vec::new();
    let mut out_offset = Vec::new();
    let mut in_radices = Vec::new();
    for b in &d.boxes {
        out_offset.push(out_radices.len());
        out_radices.extend(d.ports_radices(&b.outputs)?);
        in_radices.extend(d.ports_radices(&b.inputs)?);
    }
    let outer_in = d.ports_radices(&d.outer.inputs)?;
    let outer_out = d.ports_radices(&d.outer.outputs)?;

    let read = |s: Source, outs: &[usize], ins: &[usize]| match s {
        Source::Outer(p) => ins[p],
        Source::Inner { ibox, port } => outs[out_offset[ibox] + port],
    };
    Lens::from_fns(
        source,
        target,
        |o| {
            let outs = decode(&out_radices, o);
            let vals: Vec<usize> = feeds.outer.iter().map(|&s| read(s, &outs, &[])).collect();
            encode(&outer_out, &vals)
        },
        |o, i| {
            let outs = decode(&out_radices, o);
            let ins = decode(&outer_in, i);
            let vals: Vec<usize> = feeds
                .inner
                .iter()
                .flatten()
                .map(|&s| read(s, &outs, &ins))
                .collect();
            encode(&in_radices, &vals)
        },
    )
}
