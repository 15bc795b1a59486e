//! Ordinary differential equations `dx/dt = u(x, i)` with readout `e(x)`,
//! composed along directed wiring diagrams whose wires carry reals, and
//! their Euler discretisations as vector-valued Moore machines.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr};
use crate::lens::{DirectedWiringDiagram, Feeds, PortKind, Source};

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    state: Vec<String>,
    inputs: Vec<String>,
    /// Named exposed quantities, over state variables only.
    outputs: Vec<(String, Expr)>,
    /// `field[k]` is the derivative of `state[k]`.
    field: Vec<Expr>,
}

fn check_distinct<'a>(what: &str, names: impl IntoIterator<Item = &'a String>) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::ArityMismatch(format!("{what} `{n}` declared twice")));
        }
    }
    Ok(())
}

impl OdeSystem {
    pub fn new(
        state: Vec<String>,
        inputs: Vec<String>,
        outputs: Vec<(String, Expr)>,
        field: Vec<Expr>,
    ) -> Result<Self> {
        if field.len() != state.len() {
            return Err(Error::ArityMismatch(format!(
                "{} state variables but {} field components",
                state.len(),
                field.len()
            )));
        }
        check_distinct("variable", state.iter().chain(&inputs))?;
        check_distinct("output", outputs.iter().map(|(n, _)| n))?;
        let state_set: HashSet<&str> = state.iter().map(String::as_str).collect();
        for (name, e) in &outputs {
            if let Some(v) = e
                .free_vars()
                .into_iter()
                .find(|v| !state_set.contains(v.as_str()))
            {
                return Err(Error::UnboundVariable(format!("{v} (in output `{name}`)")));
            }
        }
        for (x, e) in state.iter().zip(&field) {
            if let Some(v) = e
                .free_vars()
                .into_iter()
                .find(|v| !state_set.contains(v.as_str()) && !inputs.contains(v))
            {
                return Err(Error::UnboundVariable(format!(
                    "{v} (in the field of `{x}`)"
                )));
            }
        }
        Ok(OdeSystem {
            state,
            inputs,
            outputs,
            field,
        })
    }

    /// Like [`OdeSystem::new`], first replacing parameters by constants.
    pub fn with_params(
        state: Vec<String>,
        inputs: Vec<String>,
        outputs: Vec<(String, Expr)>,
        field: Vec<Expr>,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        // Negative values become negated literals, the shape the parser
        // produces, so printed systems parse back to the same trees.
        let constant = |x: f64| {
            if x.is_sign_negative() {
                Expr::Neg(Box::new(Expr::Num(-x)))
            } else {
                Expr::Num(x)
            }
        };
        let inline = |e: &Expr| e.substitute(&|v| params.get(v).map(|&x| constant(x)));
        OdeSystem::new(
            state,
            inputs,
            outputs
                .iter()
                .map(|(n, e)| (n.clone(), inline(e)))
                .collect(),
            field.iter().map(inline).collect(),
        )
    }

    pub fn state(&self) -> &[String] {
        &self.state
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[(String, Expr)] {
        &self.outputs
    }

    pub fn field(&self) -> &[Expr] {
        &self.field
    }

    pub fn n_state(&self) -> usize {
        self.state.len()
    }

    pub fn n_in(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_out(&self) -> usize {
        self.outputs.len()
    }

    /// Renames a state variable throughout.
    pub fn rename_state(&self, old: &str, new: &str) -> Result<OdeSystem> {
        if !self.state.iter().any(|s| s == old) {
            return Err(Error::UnknownName(format!("state variable `{old}`")));
        }
        let r = |v: &str| {
            if v == old {
                new.to_owned()
            } else {
                v.to_owned()
            }
        };
        OdeSystem::new(
            self.state.iter().map(|s| r(s)).collect(),
            self.inputs.clone(),
            self.outputs
                .iter()
                .map(|(n, e)| (n.clone(), e.rename(&r)))
                .collect(),
            self.field.iter().map(|e| e.rename(&r)).collect(),
        )
    }

    /// The vector field at a point.
    pub fn eval_field(&self, x: &[f64], i: &[f64]) -> Result<Vec<f64>> {
        let env = self.env(x, i)?;
        self.field.iter().map(|e| e.eval(&env)).collect()
    }

    pub fn eval_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let env = self.env(x, &vec![0.0; self.n_in()])?;
        self.outputs.iter().map(|(_, e)| e.eval(&env)).collect()
    }

    fn env(&self, x: &[f64], i: &[f64]) -> Result<std::collections::HashMap<String, f64>> {
        arity("state", self.n_state(), x.len())?;
        arity("input", self.n_in(), i.len())?;
        Ok(self
            .state
            .iter()
            .zip(x)
            .chain(self.inputs.iter().zip(i))
            .map(|(k, v)| (k.clone(), *v))
            .collect())
    }
}

fn arity(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ArityMismatch(format!(
            "{what} vector has length {found}, expected {expected}"
        )))
    }
}

fn check_real_diagram(d: &DirectedWiringDiagram) -> Result<Feeds> {
    let feeds = d.feeds()?;
    for b in d.boxes.iter().chain(std::iter::once(&d.outer)) {
        for p in b.inputs.iter().chain(&b.outputs) {
            if d.type_kind(&p.ty)? != &PortKind::Real {
                return Err(Error::KindMismatch(format!(
                    "port `{}.{}` has finite type `{}`; ODE wiring needs real ports",
                    b.name, p.name, p.ty
                )));
            }
        }
    }
    check_distinct("box", d.boxes.iter().map(|b| &b.name))?;
    Ok(feeds)
}

/// Composite system: states are the components' states prefixed by their
/// box name (`box.var`), each component input is replaced by the exposed
/// expression feeding it, and outer inputs become the composite's inputs.
pub fn dwd_apply_ode(d: &DirectedWiringDiagram, systems: &[OdeSystem]) -> Result<OdeSystem> {
    let feeds = check_real_diagram(d)?;
    if systems.len() != d.boxes.len() {
        return Err(Error::ArityMismatch(format!(
            "diagram has {} boxes, {} systems given",
            d.boxes.len(),
            systems.len()
        )));
    }
    for (b, s) in d.boxes.iter().zip(systems) {
        if b.inputs.len() != s.n_in() || b.outputs.len() != s.n_out() {
            return Err(Error::ArityMismatch(format!(
                "box `{}` has {} inputs and {} outputs; system has {} and {}",
                b.name,
                b.inputs.len(),
                b.outputs.len(),
                s.n_in(),
                s.n_out()
            )));
        }
    }
    let prefixed = |k: usize, e: &Expr| {
        let name = &d.boxes[k].name;
        e.rename(&|v| format!("{name}.{v}"))
    };
    let source_expr = |s: Source| match s {
        Source::Outer(p) => Expr::var(d.outer.inputs[p].name.clone()),
        Source::Inner { ibox, port } => prefixed(ibox, &systems[ibox].outputs[port].1),
    };

    let mut state = Vec::new();
    let mut field = Vec::new();
    for (k, sys) in systems.iter().enumerate() {
        let routed: BTreeMap<&str, Expr> = sys
            .inputs
            .iter()
            .zip(&feeds.inner[k])
            .map(|(name, &src)| (name.as_str(), source_expr(src)))
            .collect();
        let box_name = &d.boxes[k].name;
        for (x, e) in sys.state.iter().zip(&sys.field) {
            state.push(format!("{box_name}.{x}"));
            field.push(e.substitute(&|v| {
                Some(
                    routed
                        .get(v)
                        .cloned()
                        .unwrap_or_else(|| Expr::var(format!("{box_name}.{v}"))),
                )
            }));
        }
    }
    let outputs = d
        .outer
        .outputs
        .iter()
        .zip(&feeds.outer)
        .map(|(p, &src)| (p.name.clone(), source_expr(src)))
        .collect();
    OdeSystem::new(
        state,
        d.outer.inputs.iter().map(|p| p.name.clone()).collect(),
        outputs,
        field,
    )
}

/// A Moore machine on real vectors.
pub trait VectorMoore {
    fn n_state(&self) -> usize;
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn readout(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn step(&self, x: &[f64], i: &[f64]) -> Result<Vec<f64>>;
}

/// `x ↦ x + h·u(x, i)`, reading out `e(x)`.
#[derive(Debug, Clone)]
pub struct EulerMachine {
    h: f64,
    n: (usize, usize, usize),
    field: Vec<Compiled>,
    outputs: Vec<Compiled>,
}

pub fn euler(sys: &OdeSystem, h: f64) -> Result<EulerMachine> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidTable(format!(
            "step size {h} is not positive"
        )));
    }
    let slot = |v: &str| sys.state.iter().chain(&sys.inputs).position(|n| n == v);
    Ok(EulerMachine {
        h,
        n: (sys.n_state(), sys.n_in(), sys.n_out()),
        field: sys
            .field
            .iter()
            .map(|e| e.compile(&slot))
            .collect::<Result<_>>()?,
        outputs: sys
            .outputs
            .iter()
            .map(|(_, e)| e.compile(&slot))
            .collect::<Result<_>>()?,
    })
}

impl EulerMachine {
    pub fn h(&self) -> f64 {
        self.h
    }
}

impl VectorMoore for EulerMachine {
    fn n_state(&self) -> usize {
        self.n.0
    }
    fn n_in(&self) -> usize {
        self.n.1
    }
    fn n_out(&self) -> usize {
        self.n.2
    }
    fn readout(&self, x: &[f64]) -> Result<Vec<f64>> {
        arity("state", self.n.0, x.len())?;
        // Outputs never read inputs; pad the slots they would occupy.
        let mut vals = x.to_vec();
        vals.resize(self.n.0 + self.n.1, 0.0);
        self.outputs.iter().map(|e| e.eval(&vals)).collect()
    }
    fn step(&self, x: &[f64], i: &[f64]) -> Result<Vec<f64>> {
        arity("state", self.n.0, x.len())?;
        arity("input", self.n.1, i.len())?;
        let vals: Vec<f64> = x.iter().chain(i).copied().collect();
        x.iter()
            .zip(&self.field)
            .map(|(xk, e)| Ok(xk + self.h * e.eval(&vals)?))
            .collect()
    }
}

/// The parallel product: states, inputs and outputs concatenated.
pub struct ParallelMachine {
    parts: Vec<Box<dyn VectorMoore>>,
}

impl ParallelMachine {
    pub fn new(parts: Vec<Box<dyn VectorMoore>>) -> Self {
        ParallelMachine { parts }
    }
}

fn split(v: &[f64], sizes: impl Iterator<Item = usize>) -> Vec<&[f64]> {
    let mut out = Vec::new();
    let mut rest = v;
    for n in sizes {
        let (a, b) = rest.split_at(n);
        out.push(a);
        rest = b;
    }
    out
}

impl VectorMoore for ParallelMachine {
    fn n_state(&self) -> usize {
        self.parts.iter().map(|p| p.n_state()).sum()
    }
    fn n_in(&self) -> usize {
        self.parts.iter().map(|p| p.n_in()).sum()
    }
    fn n_out(&self) -> usize {
        self.parts.iter().map(|p| p.n_out()).sum()
    }
    fn readout(&self, x: &[f64]) -> Result<Vec<f64>> {
        arity("state", self.n_state(), x.len())?;
        let xs = split(x, self.parts.iter().map(|p| p.n_state()));
        let mut out = Vec::new();
        for (p, x) in self.parts.iter().zip(xs) {
            out.extend(p.readout(x)?);
        }
        Ok(out)
    }
    fn step(&self, x: &[f64], i: &[f64]) -> Result<Vec<f64>> {
        arity("state", self.n_state(), x.len())?;
        arity("input", self.n_in(), i.len())?;
        let xs = split(x, self.parts.iter().map(|p| p.n_state()));
        let is = split(i, self.parts.iter().map(|p| p.n_in()));
        let mut out = Vec::new();
        for ((p, x), i) in self.parts.iter().zip(xs).zip(is) {
            out.extend(p.step(x, i)?);
        }
        Ok(out)
    }
}

/// A lens between real-vector interfaces given by expressions: `fwd` over
/// the source outputs, `bwd` over the source outputs and target inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorLens {
    pub src_outputs: Vec<String>,
    pub src_inputs: Vec<String>,
    pub tgt_outputs: Vec<String>,
    pub tgt_inputs: Vec<String>,
    /// One per target output.
    pub fwd: Vec<Expr>,
    /// One per source input.
    pub bwd: Vec<Expr>,
}

impl VectorLens {
    fn compile(&self) -> Result<(Vec<Compiled>, Vec<Compiled>)> {
        arity("forward map", self.tgt_outputs.len(), self.fwd.len())?;
        arity("backward map", self.src_inputs.len(), self.bwd.len())?;
        check_distinct(
            "lens variable",
            self.src_outputs.iter().chain(&self.tgt_inputs),
        )?;
        let fwd_slot = |v: &str| self.src_outputs.iter().position(|n| n == v);
        let bwd_slot = |v: &str| {
            self.src_outputs
                .iter()
                .chain(&self.tgt_inputs)
                .position(|n| n == v)
        };
        Ok((
            self.fwd
                .iter()
                .map(|e| e.compile(&fwd_slot))
                .collect::<Result<_>>()?,
            self.bwd
                .iter()
                .map(|e| e.compile(&bwd_slot))
                .collect::<Result<_>>()?,
        ))
    }
}

/// The routing lens of a real-typed diagram. Source ports are named
/// `box.port`, outer ports `outer.port`.
pub fn dwd_to_vector_lens(d: &DirectedWiringDiagram) -> Result<VectorLens> {
    let feeds = check_real_diagram(d)?;
    if d.boxes.iter().any(|b| b.name == "outer") {
        return Err(Error::BoundaryMismatch(
            "a box may not be named `outer`".into(),
        ));
    }
    let box_ports = |pick: fn(&crate::lens::DwdBox) -> &Vec<crate::lens::Port>| {
        d.boxes
            .iter()
            .flat_map(|b| {
                pick(b)
                    .iter()
                    .map(move |p| format!("{}.{}", b.name, p.name))
            })
            .collect::<Vec<_>>()
    };
    let outer_ports = |ps: &[crate::lens::Port]| {
        ps.iter()
            .map(|p| format!("outer.{}", p.name))
            .collect::<Vec<_>>()
    };
    let src_outputs = box_ports(|b| &b.outputs);
    let tgt_inputs = outer_ports(&d.outer.inputs);
    let var_of = |s: Source| match s {
        Source::Outer(p) => Expr::var(tgt_inputs[p].clone()),
        Source::Inner { ibox, port } => {
            let b = &d.boxes[ibox];
            Expr::var(format!("{}.{}", b.name, b.outputs[port].name))
        }
    };
    Ok(VectorLens {
        fwd: feeds.outer.iter().map(|&s| var_of(s)).collect(),
        bwd: feeds.inner.iter().flatten().map(|&s| var_of(s)).collect(),
        src_inputs: box_ports(|b| &b.inputs),
        tgt_outputs: outer_ports(&d.outer.outputs),
        src_outputs,
        tgt_inputs,
    })
}

/// A vector machine seen through a lens.
pub struct LensedMachine<M> {
    inner: M,
    n_in: usize,
    fwd: Vec<Compiled>,
    bwd: Vec<Compiled>,
}

pub fn act_vector_lens<M: VectorMoore>(m: M, l: &VectorLens) -> Result<LensedMachine<M>> {
    arity("lens source outputs", m.n_out(), l.src_outputs.len())?;
    arity("lens source inputs", m.n_in(), l.src_inputs.len())?;
    let (fwd, bwd) = l.compile()?;
    Ok(LensedMachine {
        inner: m,
        n_in: l.tgt_inputs.len(),
        fwd,
        bwd,
    })
}

impl<M: VectorMoore> VectorMoore for LensedMachine<M> {
    fn n_state(&self) -> usize {
        self.inner.n_state()
    }
    fn n_in(&self) -> usize {
        self.n_in
    }
    fn n_out(&self) -> usize {
        self.fwd.len()
    }
    fn readout(&self, x: &[f64]) -> Result<Vec<f64>> {
        let o = self.inner.readout(x)?;
        self.fwd.iter().map(|e| e.eval(&o)).collect()
    }
    fn step(&self, x: &[f64], i: &[f64]) -> Result<Vec<f64>> {
        arity("input", self.n_in, i.len())?;
        let mut vals = self.inner.readout(x)?;
        vals.extend_from_slice(i);
        let inner_in = self
            .bwd
            .iter()
            .map(|e| e.eval(&vals))
            .collect::<Result<Vec<_>>>()?;
        self.inner.step(x, &inner_in)
    }
}

/// Wires vector machines along a real-typed diagram.
pub fn compose_vector_via_dwd(
    d: &DirectedWiringDiagram,
    parts: Vec<Box<dyn VectorMoore>>,
) -> Result<LensedMachine<ParallelMachine>> {
    arity("machine list", d.boxes.len(), parts.len())?;
    act_vector_lens(ParallelMachine::new(parts), &dwd_to_vector_lens(d)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

/// Iterates the Euler step `steps` times. Input `k` is `inputs[k]`, holding
/// the last entry once the signal runs out (systems without inputs may pass
/// an empty signal).
pub fn simulate_ode(
    sys: &OdeSystem,
    h: f64,
    steps: usize,
    init: &[f64],
    inputs: &[Vec<f64>],
) -> Result<OdeTrace> {
    let m = euler(sys, h)?;
    arity("initial state", sys.n_state(), init.len())?;
    let empty = Vec::new();
    let input_at = |k: usize| -> Result<&Vec<f64>> {
        match inputs.get(k).or(inputs.last()) {
            Some(i) => Ok(i),
            None if sys.n_in() == 0 => Ok(&empty),
            None => Err(Error::ArityMismatch(
                "no input signal for a system with inputs".into(),
            )),
        }
    };
    let check = |step: usize, x: &[f64]| match x.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFiniteValue {
            step,
            var: sys.state[k].clone(),
        }),
        None => Ok(()),
    };
    check(0, init)?;
    let mut trace = OdeTrace {
        times: vec![0.0],
        states: vec![init.to_vec()],
        outputs: vec![m.readout(init)?],
    };
    for k in 0..steps {
        let x = m.step(trace.states.last().expect("nonempty"), input_at(k)?)?;
        check(k + 1, &x)?;
        trace.times.push((k + 1) as f64 * h);
        trace.outputs.push(m.readout(&x)?);
        trace.states.push(x);
    }
    Ok(trace)
}
