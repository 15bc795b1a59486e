//! Moore machines with an effect on the update: deterministic, powerset
//! (nondeterministic) or finitely supported distributions with exact
//! rational weights.
//!
//! A machine has states `S`, an interface `{I/O}`, a readout `S -> O` and an
//! update `S × I -> F(S)`, stored densely at index `s * |I| + i`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result, Verdict};
use crate::finset::FinFunction;
use crate::lens::{dwd_to_lens, Chart, DirectedWiringDiagram, FiniteSpace, Interface, Lens};

/// Default cap on the number of traces a simulation may enumerate.
pub const DEFAULT_TRACE_BOUND: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Effect {
    Identity,
    Powerset,
    FiniteDist,
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Effect::Identity => "identity",
            Effect::Powerset => "powerset",
            Effect::FiniteDist => "dist",
        })
    }
}

/// A finitely supported distribution: sorted by state, weights positive,
/// summing to one.
pub type Dist = Vec<(usize, BigRational)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Update {
    Det(Vec<usize>),
    /// Sorted, duplicate-free successor sets; empty means deadlock.
    Pow(Vec<Vec<usize>>),
    Dist(Vec<Dist>),
}

impl Update {
    pub fn effect(&self) -> Effect {
        match self {
            Update::Det(_) => Effect::Identity,
            Update::Pow(_) => Effect::Powerset,
            Update::Dist(_) => Effect::FiniteDist,
        }
    }

    fn len(&self) -> usize {
        match self {
            Update::Det(t) => t.len(),
            Update::Pow(t) => t.len(),
            Update::Dist(t) => t.len(),
        }
    }

    /// Rebuilds the table from per-cell lookups into `self`.
    fn reindex(&self, cells: impl Iterator<Item = usize>) -> Update {
        match self {
            Update::Det(t) => Update::Det(cells.map(|k| t[k]).collect()),
            Update::Pow(t) => Update::Pow(cells.map(|k| t[k].clone()).collect()),
            Update::Dist(t) => Update::Dist(cells.map(|k| t[k].clone()).collect()),
        }
    }
}

/// Merges duplicate states, drops zero weights, checks the total is one.
pub fn normalize_dist(row: impl IntoIterator<Item = (usize, BigRational)>) -> Result<Dist> {
    let mut merged: BTreeMap<usize, BigRational> = BTreeMap::new();
    for (s, w) in row {
        if w.is_negative() {
            return Err(Error::InvalidDistribution(format!(
                "negative weight {w} on state {s}"
            )));
        }
        *merged.entry(s).or_insert_with(BigRational::zero) += w;
    }
    let total: BigRational = merged.values().sum();
    if !total.is_one() {
        return Err(Error::InvalidDistribution(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(merged.into_iter().filter(|(_, w)| !w.is_zero()).collect())
}

fn dirac(s: usize) -> Dist {
    vec![(s, BigRational::one())]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    states: FiniteSpace,
    interface: Interface,
    readout: Vec<usize>,
    update: Update,
}

impl Machine {
    pub fn new(
        states: FiniteSpace,
        interface: Interface,
        readout: Vec<usize>,
        update: Update,
    ) -> Result<Self> {
        let (ns, ni, no) = (
            states.size(),
            interface.input.size(),
            interface.output.size(),
        );
        if readout.len() != ns {
            return Err(Error::InvalidTable(format!(
                "readout has {} entries for {ns} states",
                readout.len()
            )));
        }
        if let Some(&o) = readout.iter().find(|&&o| o >= no) {
            return Err(Error::IndexOutOfRange { index: o, size: no });
        }
        if update.len() != ns * ni {
            return Err(Error::InvalidTable(format!(
                "update has {} entries, expected {ns} states × {ni} inputs",
                update.len()
            )));
        }
        let in_range = |s: usize| {
            if s < ns {
                Ok(())
            } else {
                Err(Error::IndexOutOfRange { index: s, size: ns })
            }
        };
        let update = match update {
            Update::Det(t) => {
                t.iter().try_for_each(|&s| in_range(s))?;
                Update::Det(t)
            }
            Update::Pow(t) => Update::Pow(
                t.into_iter()
                    .map(|mut row| {
                        row.sort_unstable();
                        row.dedup();
                        row.iter().try_for_each(|&s| in_range(s))?;
                        Ok(row)
                    })
                    .collect::<Result<_>>()?,
            ),
            Update::Dist(t) => Update::Dist(
                t.into_iter()
                    .map(|row| {
                        row.iter().try_for_each(|(s, _)| in_range(*s))?;
                        normalize_dist(row)
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Machine {
            states,
            interface,
            readout,
            update,
        })
    }

    pub fn deterministic(
        states: FiniteSpace,
        interface: Interface,
        readout: impl Fn(usize) -> usize,
        update: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let ni = interface.input.size();
        let r = (0..states.size()).map(readout).collect();
        let u = (0..states.size() * ni)
            .map(|k| update(k / ni, k % ni))
            .collect();
        Machine::new(states, interface, r, Update::Det(u))
    }

    /// States `0..n`, inputs `{0, 1}`, readout the state, adds the input
    /// modulo `n`.
    pub fn counter(n: usize) -> Self {
        Machine::deterministic(
            FiniteSpace::range(n),
            Interface::new(FiniteSpace::range(2), FiniteSpace::range(n)),
            |s| s,
            |s, i| (s + i) % n,
        )
        .expect("counter tables are total")
    }

    /// One state, interface `{1/1}`.
    pub fn trivial(effect: Effect) -> Self {
        let update = match effect {
            Effect::Identity => Update::Det(vec![0]),
            Effect::Powerset => Update::Pow(vec![vec![0]]),
            Effect::FiniteDist => Update::Dist(vec![dirac(0)]),
        };
        Machine {
            states: FiniteSpace::unit(),
            interface: Interface::unit(),
            readout: vec![0],
            update,
        }
    }

    /// The timeline restricted to times `0..=horizon`: state `tk` outputs `k`
    /// and steps to `t(k+1)` on the single input; the last state has no
    /// successor.
    pub fn timeline_window(horizon: usize) -> Self {
        let states =
            FiniteSpace::new((0..=horizon).map(|k| format!("t{k}"))).expect("distinct names");
        let update = (0..=horizon)
            .map(|k| if k < horizon { vec![k + 1] } else { vec![] })
            .collect();
        Machine::new(
            states,
            Chart::timeline_interface(horizon),
            (0..=horizon).collect(),
            Update::Pow(update),
        )
        .expect("timeline tables are total")
    }

    pub fn effect(&self) -> Effect {
        self.update.effect()
    }

    pub fn states(&self) -> &FiniteSpace {
        &self.states
    }

    pub fn interface(&self) -> &Interface {
        &self.interface
    }

    pub fn update(&self) -> &Update {
        &self.update
    }

    pub fn readout_table(&self) -> &[usize] {
        &self.readout
    }

    pub fn readout(&self, s: usize) -> usize {
        self.readout[s]
    }

    fn cell(&self, s: usize, i: usize) -> usize {
        s * self.interface.input.size() + i
    }

    /// Successors as a set, whatever the effect (support for distributions).
    pub fn successors(&self, s: usize, i: usize) -> Vec<usize> {
        let k = self.cell(s, i);
        match &self.update {
            Update::Det(t) => vec![t[k]],
            Update::Pow(t) => t[k].clone(),
            Update::Dist(t) => t[k].iter().map(|(s, _)| *s).collect(),
        }
    }

    /// Successors as a distribution; `None` for powerset machines.
    pub fn distribution(&self, s: usize, i: usize) -> Option<Dist> {
        let k = self.cell(s, i);
        match &self.update {
            Update::Det(t) => Some(dirac(t[k])),
            Update::Pow(_) => None,
            Update::Dist(t) => Some(t[k].clone()),
        }
    }

    /// The powerset machine forgetting the weights.
    pub fn support(&self) -> Machine {
        let ni = self.interface.input.size();
        let rows = (0..self.states.size() * ni)
            .map(|k| self.successors(k / ni, k % ni))
            .collect();
        Machine {
            update: Update::Pow(rows),
            ..self.clone()
        }
    }

    /// The transition relation `{(s, i, s')}`, sorted.
    pub fn transitions(&self) -> Vec<(usize, usize, usize)> {
        let ni = self.interface.input.size();
        (0..self.states.size())
            .flat_map(|s| (0..ni).map(move |i| (s, i)))
            .flat_map(|(s, i)| self.successors(s, i).into_iter().map(move |t| (s, i, t)))
            .collect()
    }
}

/// Wraps the machine's interface in a lens: `readout' = fwd ∘ e`,
/// `update'(s, i') = u(s, bwd(e(s), i'))`.
pub fn act_lens(m: &Machine, l: &Lens) -> Result<Machine> {
    if !l.source().matches(&m.interface) {
        return Err(Error::InterfaceMismatch(format!(
            "lens expects {{{}/{}}}, machine has {{{}/{}}}",
            l.source().input.size(),
            l.source().output.size(),
            m.interface.input.size(),
            m.interface.output.size()
        )));
    }
    let ni2 = l.target().input.size();
    let readout = m.readout.iter().map(|&o| l.fwd(o)).collect();
    let cells = (0..m.states.size() * ni2).map(|k| {
        let (s, i2) = (k / ni2, k % ni2);
        m.cell(s, l.bwd(m.readout[s], i2))
    });
    Ok(Machine {
        states: m.states.clone(),
        interface: l.target().clone(),
        readout,
        update: m.update.reindex(cells),
    })
}

/// The parallel product, pairing updates with the effect's monoidal map.
pub fn parallel(m1: &Machine, m2: &Machine) -> Result<Machine> {
    if m1.effect() != m2.effect() {
        return Err(Error::EffectMismatch(format!(
            "{} vs {}",
            m1.effect(),
            m2.effect()
        )));
    }
    let states = m1.states.product(&m2.states);
    let interface = m1.interface.product(&m2.interface);
    let (n2, ni1, ni2, no2) = (
        m2.states.size(),
        m1.interface.input.size(),
        m2.interface.input.size(),
        m2.interface.output.size(),
    );
    let readout = (0..states.size())
        .map(|s| m1.readout[s / n2] * no2 + m2.readout[s % n2])
        .collect();
    let cells = (0..states.size())
        .flat_map(|s| (0..ni1 * ni2).map(move |i| (s, i)))
        .map(|(s, i)| {
            let (a, b) = (s / n2, s % n2);
            let (i1, i2) = (i / ni2, i % ni2);
            (m1.cell(a, i1), m2.cell(b, i2))
        });
    let update = match (&m1.update, &m2.update) {
        (Update::Det(t1), Update::Det(t2)) => {
            Update::Det(cells.map(|(k1, k2)| t1[k1] * n2 + t2[k2]).collect())
        }
        (Update::Pow(t1), Update::Pow(t2)) => Update::Pow(
            cells
                .map(|(k1, k2)| {
                    t1[k1]
                        .iter()
                        .flat_map(|&a| t2[k2].iter().map(move |&b| a * n2 + b))
                        .collect()
                })
                .collect(),
        ),
        (Update::Dist(t1), Update::Dist(t2)) => Update::Dist(
            cells
                .map(|(k1, k2)| {
                    t1[k1]
                        .iter()
                        .flat_map(|(a, p)| t2[k2].iter().map(move |(b, q)| (a * n2 + b, p * q)))
                        .collect()
                })
                .collect(),
        ),
        _ => unreachable!("effects checked equal"),
    };
    Ok(Machine {
        states,
        interface,
        readout,
        update,
    })
}

pub fn parallel_all(ms: &[Machine]) -> Result<Machine> {
    let effect = ms.first().map_or(Effect::Identity, Machine::effect);
    ms.iter()
        .try_fold(Machine::trivial(effect), |acc, m| parallel(&acc, m))
}

/// Wires the machines together along the diagram, in box order.
pub fn compose_via_dwd(d: &DirectedWiringDiagram, ms: &[Machine]) -> Result<Machine> {
    if d.boxes.len() != ms.len() {
        return Err(Error::ArityMismatch(format!(
            "diagram has {} boxes, {} machines given",
            d.boxes.len(),
            ms.len()
        )));
    }
    for (b, m) in d.boxes.iter().zip(ms) {
        let iface = d.box_interface(b)?;
        if !iface.matches(m.interface()) {
            return Err(Error::InterfaceMismatch(format!(
                "box `{}` is {{{}/{}}}, machine is {{{}/{}}}",
                b.name,
                iface.input.size(),
                iface.output.size(),
                m.interface.input.size(),
                m.interface.output.size()
            )));
        }
    }
    act_lens(&parallel_all(ms)?, &dwd_to_lens(d)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub inputs: Vec<usize>,
    pub states: Vec<usize>,
    pub outputs: Vec<usize>,
    /// The run deadlocked before consuming every input; `inputs` holds only
    /// the consumed prefix.
    pub truncated: bool,
}

impl Trace {
    fn start(m: &Machine, s: usize) -> Self {
        Trace {
            inputs: vec![],
            states: vec![s],
            outputs: vec![m.readout(s)],
            truncated: false,
        }
    }

    fn extend(&self, m: &Machine, i: usize, s: usize) -> Self {
        let mut t = self.clone();
        t.inputs.push(i);
        t.states.push(s);
        t.outputs.push(m.readout(s));
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Simulation {
    Deterministic(Trace),
    Nondeterministic(Vec<Trace>),
    Probabilistic(Vec<(Trace, BigRational)>),
}

impl Simulation {
    pub fn traces(&self) -> Vec<&Trace> {
        match self {
            Simulation::Deterministic(t) => vec![t],
            Simulation::Nondeterministic(ts) => ts.iter().collect(),
            Simulation::Probabilistic(ts) => ts.iter().map(|(t, _)| t).collect(),
        }
    }
}

pub fn simulate(m: &Machine, init: usize, inputs: &[usize]) -> Result<Simulation> {
    simulate_bounded(m, init, inputs, DEFAULT_TRACE_BOUND)
}

/// Runs from `init`; nondeterministic and probabilistic runs enumerate every
/// branch, failing with `HorizonTooLarge` past `bound` live branches.
pub fn simulate_bounded(
    m: &Machine,
    init: usize,
    inputs: &[usize],
    bound: usize,
) -> Result<Simulation> {
    if init >= m.states.size() {
        return Err(Error::IndexOutOfRange {
            index: init,
            size: m.states.size(),
        });
    }
    let ni = m.interface.input.size();
    if let Some(&i) = inputs.iter().find(|&&i| i >= ni) {
        return Err(Error::IndexOutOfRange { index: i, size: ni });
    }
    match &m.update {
        Update::Det(t) => {
            let mut trace = Trace::start(m, init);
            for &i in inputs {
                let s = *trace.states.last().expect("nonempty");
                trace = trace.extend(m, i, t[m.cell(s, i)]);
            }
            Ok(Simulation::Deterministic(trace))
        }
        Update::Pow(t) => {
            let mut live = vec![Trace::start(m, init)];
            let mut done = Vec::new();
            for &i in inputs {
                let mut next = Vec::new();
                for trace in live {
                    let s = *trace.states.last().expect("nonempty");
                    let succ = &t[m.cell(s, i)];
                    if succ.is_empty() {
                        done.push(Trace {
                            truncated: true,
                            ..trace
                        });
                        continue;
                    }
                    for &s2 in succ {
                        next.push(trace.extend(m, i, s2));
                    }
                    if next.len() + done.len() > bound {
                        return Err(Error::HorizonTooLarge { bound });
                    }
                }
                live = next;
            }
            done.extend(live);
            done.sort_by(|a, b| a.states.cmp(&b.states));
            Ok(Simulation::Nondeterministic(done))
        }
        Update::Dist(t) => {
            let mut live = vec![(Trace::start(m, init), BigRational::one())];
            for &i in inputs {
                let mut next = Vec::new();
                for (trace, p) in live {
                    let s = *trace.states.last().expect("nonempty");
                    for (s2, q) in &t[m.cell(s, i)] {
                        next.push((trace.extend(m, i, *s2), &p * q));
                    }
                    if next.len() > bound {
                        return Err(Error::HorizonTooLarge { bound });
                    }
                }
                live = next;
            }
            live.sort_by(|a, b| a.0.states.cmp(&b.0.states));
            Ok(Simulation::Probabilistic(live))
        }
    }
}

/// A map of machines over a chart of interfaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineMap {
    pub chart: Chart,
    pub state_map: FinFunction,
}

impl MachineMap {
    pub fn identity(m: &Machine) -> Self {
        MachineMap {
            chart: Chart::identity(&m.interface),
            state_map: FinFunction::identity(m.states.size()),
        }
    }

    /// `self` then `next`.
    pub fn then(&self, next: &MachineMap) -> Result<MachineMap> {
        Ok(MachineMap {
            chart: self.chart.then(&next.chart)?,
            state_map: self.state_map.then(&next.state_map)?,
        })
    }
}

fn pushforward(s: &FinFunction, d: &Dist) -> Dist {
    let mut merged: BTreeMap<usize, BigRational> = BTreeMap::new();
    for (x, w) in d {
        *merged.entry(s.apply(*x)).or_insert_with(BigRational::zero) += w;
    }
    merged.into_iter().collect()
}

/// Checks `e2 ∘ s = h ∘ e1` and `s(u1(x, i)) ~ u2(s x, h#(e1 x, i))` for every
/// state and input. `~` is equality for deterministic machines, image
/// containment once either side is a powerset machine, and pushforward
/// equality for distributions.
pub fn check_machine_map(mm: &MachineMap, m1: &Machine, m2: &Machine) -> Result<Verdict> {
    let (c, s) = (&mm.chart, &mm.state_map);
    if !c.source.matches(&m1.interface) || !c.target.matches(&m2.interface) {
        return Err(Error::ArityMismatch(
            "chart does not span the machines' interfaces".into(),
        ));
    }
    if s.dom() != m1.states.size() || s.cod() != m2.states.size() {
        return Err(Error::ArityMismatch(format!(
            "state map is {} -> {}, machines have {} and {} states",
            s.dom(),
            s.cod(),
            m1.states.size(),
            m2.states.size()
        )));
    }
    if let Verdict::Fail(why) = crate::lens::check_chart(c) {
        return Err(Error::InvalidTable(why));
    }
    use Effect::*;
    let probabilistic = match (m1.effect(), m2.effect()) {
        (Powerset, FiniteDist) | (FiniteDist, Powerset) => {
            return Err(Error::EffectMismatch(format!(
                "cannot compare {} with {}",
                m1.effect(),
                m2.effect()
            )))
        }
        (FiniteDist, _) | (_, FiniteDist) => true,
        _ => false,
    };
    let powerset = m1.effect() == Powerset || m2.effect() == Powerset;
    let sname = |m: &Machine, x: usize| m.states.name(x).to_owned();

    for x in 0..m1.states.size() {
        let o1 = m1.readout(x);
        if m2.readout(s.apply(x)) != c.fwd(o1) {
            return Ok(Verdict::fail(format!(
                "readout square fails at state `{}`",
                sname(m1, x)
            )));
        }
        for i in 0..m1.interface.input.size() {
            let i2 = c.push(o1, i);
            let ok = if probabilistic {
                let lhs = pushforward(s, &m1.distribution(x, i).expect("not powerset"));
                lhs == m2.distribution(s.apply(x), i2).expect("not powerset")
            } else {
                let mut image: Vec<usize> =
                    m1.successors(x, i).iter().map(|&y| s.apply(y)).collect();
                image.sort_unstable();
                image.dedup();
                let target = m2.successors(s.apply(x), i2);
                if powerset {
                    image.iter().all(|y| target.binary_search(y).is_ok())
                } else {
                    image == target
                }
            };
            if !ok {
                return Ok(Verdict::fail(format!(
                    "update square fails at state `{}`, input `{}`",
                    sname(m1, x),
                    m1.interface.input.name(i)
                )));
            }
        }
    }
    Ok(Verdict::Pass)
}

/// Checks that a chart `k` and lenses `l1`, `l2` form a square over the
/// chart `h`: `fwd2 ∘ h = k ∘ fwd1` and
/// `h#(o, bwd1(o, j)) = bwd2(h o, k#(fwd1 o, j))`.
pub fn check_lens_square(h: &Chart, l1: &Lens, l2: &Lens, k: &Chart) -> Verdict {
    if !(l1.source().matches(&h.source)
        && l2.source().matches(&h.target)
        && l1.target().matches(&k.source)
        && l2.target().matches(&k.target))
    {
        return Verdict::fail("boundaries do not line up");
    }
    for o in 0..h.source.output.size() {
        if l2.fwd(h.fwd(o)) != k.fwd(l1.fwd(o)) {
            return Verdict::fail(format!("output square fails at {o}"));
        }
        for j in 0..l1.target().input.size() {
            if h.push(o, l1.bwd(o, j)) != l2.bwd(h.fwd(o), k.push(l1.fwd(o), j)) {
                return Verdict::fail(format!("input square fails at ({o}, {j})"));
            }
        }
    }
    Verdict::Pass
}

/// Acts on a machine map by a square of interactions: the result maps
/// `act_lens(m1, l1)` to `act_lens(m2, l2)` over `k` with the same states.
pub fn act_lens_on_map(mm: &MachineMap, l1: &Lens, l2: &Lens, k: &Chart) -> Result<MachineMap> {
    match check_lens_square(&mm.chart, l1, l2, k) {
        Verdict::Pass => Ok(MachineMap {
            chart: k.clone(),
            state_map: mm.state_map.clone(),
        }),
        Verdict::Fail(why) => Err(Error::InterfaceMismatch(why)),
    }
}

/// State sequences `s0..=sT` with `e(sk) = ok` and `s(k+1)` a possible
/// successor of `sk` under `ik`, where the chart out of the horizon-`T`
/// timeline supplies `ok = fwd(k)` and `ik = push(k, tick)`.
pub fn enumerate_trajectories(
    m: &Machine,
    chart: &Chart,
    horizon: usize,
) -> Result<Vec<Vec<usize>>> {
    if chart.source.output.size() != horizon + 1 || chart.source.input.size() != 1 {
        return Err(Error::ArityMismatch(format!(
            "chart is not out of the horizon-{horizon} timeline"
        )));
    }
    if !chart.target.matches(&m.interface) {
        return Err(Error::InterfaceMismatch(
            "chart target is not the machine's interface".into(),
        ));
    }
    if let Verdict::Fail(why) = crate::lens::check_chart(chart) {
        return Err(Error::InvalidTable(why));
    }
    let mut paths: Vec<Vec<usize>> = (0..m.states.size())
        .filter(|&s| m.readout(s) == chart.fwd(0))
        .map(|s| vec![s])
        .collect();
    for k in 0..horizon {
        let (i, o) = (chart.push(k, 0), chart.fwd(k + 1));
        paths = paths
            .into_iter()
            .flat_map(|p| {
                let last = *p.last().expect("nonempty");
                m.successors(last, i)
                    .into_iter()
                    .filter(|&t| m.readout(t) == o)
                    .map(move |t| {
                        let mut q = p.clone();
                        q.push(t);
                        q
                    })
            })
            .collect();
    }
    Ok(paths)
}

/// The machine map out of the timeline window induced by a trajectory.
pub fn trajectory_map(chart: &Chart, m: &Machine, path: &[usize]) -> Result<MachineMap> {
    Ok(MachineMap {
        chart: chart.clone(),
        state_map: FinFunction::new(path.to_vec(), m.states.size())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lens::{DwdBox, Port, PortKind, Sink, Source, TypeDecl, Wire};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn series() -> DirectedWiringDiagram {
        let bx = |name: &str| DwdBox {
            name: name.into(),
            inputs: vec![Port::new("a", "Bit")],
            outputs: vec![Port::new("b", "Bit")],
        };
        DirectedWiringDiagram {
            types: vec![TypeDecl {
                name: "Bit".into(),
                kind: PortKind::Finite(FiniteSpace::range(2)),
            }],
            boxes: vec![bx("first"), bx("second")],
            outer: DwdBox {
                name: "outer".into(),
                inputs: vec![Port::new("a", "Bit")],
                outputs: vec![Port::new("hi", "Bit"), Port::new("lo", "Bit")],
            },
            wires: vec![
                Wire {
                    src: Source::Outer(0),
                    dst: Sink::Inner { ibox: 0, port: 0 },
                },
                Wire {
                    src: Source::Inner { ibox: 0, port: 0 },
                    dst: Sink::Inner { ibox: 1, port: 0 },
                },
                Wire {
                    src: Source::Inner { ibox: 1, port: 0 },
                    dst: Sink::Outer(0),
                },
                Wire {
                    src: Source::Inner { ibox: 0, port: 0 },
                    dst: Sink::Outer(1),
                },
            ],
        }
    }

    fn forget_first() -> Lens {
        let bit = FiniteSpace::range(2);
        Lens::from_fns(
            Interface::new(bit.clone(), bit.product(&bit)),
            Interface::new(bit.clone(), bit),
            |o| o % 2,
            |_, i| i,
        )
        .unwrap()
    }

    fn mod4() -> Machine {
        compose_via_dwd(&series(), &[Machine::counter(2), Machine::counter(2)]).unwrap()
    }

    #[test]
    fn mod2_counter_traces() {
        let m = Machine::counter(2);
        let Simulation::Deterministic(t) = simulate(&m, 0, &[1, 1, 1]).unwrap() else {
            panic!()
        };
        assert_eq!(t.states, vec![0, 1, 0, 1]);
        let Simulation::Deterministic(t) = simulate(&m, 0, &[0, 0]).unwrap() else {
            panic!()
        };
        assert_eq!(t.states, vec![0, 0, 0]);
    }

    #[test]
    fn series_composite_counts_on_ones() {
        let m = mod4();
        assert_eq!(m.states().names(), &["00", "01", "10", "11"]);
        // State (b1, b2) holds b1 + 2 b2.
        let value = |s: usize| (s / 2) + 2 * (s % 2);
        let state = |v: usize| (v % 2) * 2 + v / 2;
        for v in 0..4 {
            assert_eq!(m.successors(state(v), 1), vec![state((v + 1) % 4)]);
            assert_eq!(value(state(v)), v);
        }
        // Output is the swapped pair (b2, b1).
        for s in 0..4 {
            assert_eq!(m.readout(s), (s % 2) * 2 + s / 2);
        }
    }

    #[test]
    fn identity_lens_leaves_machine() {
        let m = Machine::counter(3);
        assert_eq!(act_lens(&m, &Lens::identity(m.interface())).unwrap(), m);
        assert!(matches!(
            act_lens(&m, &forget_first()),
            Err(Error::InterfaceMismatch(_))
        ));
    }

    #[test]
    fn parity_readout() {
        let p = act_lens(&mod4(), &forget_first()).unwrap();
        let parity: Vec<usize> = (0..4).map(|s| p.readout(s)).collect();
        // First character of the state name is the ones digit.
        assert_eq!(parity, vec![0, 0, 1, 1]);
    }

    #[test]
    fn parallel_with_trivial() {
        let m = Machine::counter(2);
        assert_eq!(
            parallel(&m, &Machine::trivial(Effect::Identity)).unwrap(),
            m
        );
        assert!(matches!(
            parallel(&m, &Machine::trivial(Effect::Powerset)),
            Err(Error::EffectMismatch(_))
        ));
    }

    fn coin() -> Machine {
        let two = FiniteSpace::range(2);
        Machine::new(
            two.clone(),
            Interface::new(FiniteSpace::unit(), two),
            vec![0, 1],
            Update::Dist(vec![
                vec![(0, q(1, 3)), (1, q(2, 3))],
                vec![(0, q(1, 2)), (1, q(1, 2))],
            ]),
        )
        .unwrap()
    }

    #[test]
    fn product_distribution() {
        let p = parallel(&coin(), &coin()).unwrap();
        assert_eq!(
            p.distribution(0, 0).unwrap(),
            vec![(0, q(1, 9)), (1, q(2, 9)), (2, q(2, 9)), (3, q(4, 9))]
        );
        assert_eq!(
            p.distribution(1, 0).unwrap(),
            vec![(0, q(1, 6)), (1, q(1, 6)), (2, q(1, 3)), (3, q(1, 3))]
        );
    }

    #[test]
    fn distribution_rows_must_sum_to_one() {
        let two = FiniteSpace::range(2);
        let bad = Machine::new(
            two.clone(),
            Interface::new(FiniteSpace::unit(), two),
            vec![0, 1],
            Update::Dist(vec![vec![(0, q(1, 3))], vec![(1, q(1, 1))]]),
        );
        assert!(matches!(bad, Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn probabilistic_traces_sum_to_one() {
        let Simulation::Probabilistic(ts) = simulate(&coin(), 0, &[0, 0, 0]).unwrap() else {
            panic!()
        };
        assert_eq!(ts.len(), 8);
        let total: BigRational = ts.iter().map(|(_, p)| p.clone()).sum();
        assert!(total.is_one());
    }

    #[test]
    fn full_relation_counts() {
        let n = 3;
        let m = Machine::new(
            FiniteSpace::range(n),
            Interface::new(FiniteSpace::unit(), FiniteSpace::unit()),
            vec![0; n],
            Update::Pow(vec![(0..n).collect(); n]),
        )
        .unwrap();
        let Simulation::Nondeterministic(ts) = simulate(&m, 0, &[0; 4]).unwrap() else {
            panic!()
        };
        assert_eq!(ts.len(), 81);
        assert!(matches!(
            simulate_bounded(&m, 0, &[0; 4], 50),
            Err(Error::HorizonTooLarge { bound: 50 })
        ));
    }

    #[test]
    fn deadlock_truncates() {
        let m = Machine::timeline_window(2);
        let Simulation::Nondeterministic(ts) = simulate(&m, 0, &[0; 4]).unwrap() else {
            panic!()
        };
        assert_eq!(ts.len(), 1);
        assert!(ts[0].truncated);
        assert_eq!(ts[0].states, vec![0, 1, 2]);
    }

    fn window() -> Chart {
        let bit = FiniteSpace::range(2);
        Chart::timeline(&Interface::new(bit.clone(), bit), &[1, 1, 1], &[0, 1, 0, 1]).unwrap()
    }

    #[test]
    fn trajectory_counts() {
        let m2 = Machine::counter(2);
        let paths = enumerate_trajectories(&m2, &window(), 3).unwrap();
        assert_eq!(paths, vec![vec![0, 1, 0, 1]]);

        let parity = act_lens(&mod4(), &forget_first()).unwrap();
        let paths = enumerate_trajectories(&parity, &window(), 3).unwrap();
        assert_eq!(paths.len(), 2);

        let bit = FiniteSpace::range(2);
        let never =
            Chart::timeline(&Interface::new(bit.clone(), bit), &[1, 1], &[0, 0, 0]).unwrap();
        assert!(enumerate_trajectories(&m2, &never, 2).unwrap().is_empty());
    }

    #[test]
    fn trajectories_are_maps_from_the_timeline() {
        let parity = act_lens(&mod4(), &forget_first()).unwrap();
        let tl = Machine::timeline_window(3);
        for path in enumerate_trajectories(&parity, &window(), 3).unwrap() {
            let mm = trajectory_map(&window(), &parity, &path).unwrap();
            assert!(check_machine_map(&mm, &tl, &parity).unwrap().is_pass());
        }
        let mm = trajectory_map(&window(), &Machine::counter(2), &[0, 1, 1, 1]).unwrap();
        assert!(!check_machine_map(&mm, &tl, &Machine::counter(2))
            .unwrap()
            .is_pass());
    }

    #[test]
    fn identity_maps_pass() {
        for m in [Machine::counter(3), coin(), Machine::timeline_window(2)] {
            assert!(check_machine_map(&MachineMap::identity(&m), &m, &m)
                .unwrap()
                .is_pass());
        }
        let mm = MachineMap {
            chart: Chart::identity(coin().interface()),
            state_map: FinFunction::identity(2),
        };
        assert!(matches!(
            check_machine_map(&mm, &coin(), &coin().support()),
            Err(Error::EffectMismatch(_))
        ));
    }

    #[test]
    fn support_commutes_with_parallel() {
        let a = parallel(&coin(), &coin()).unwrap().support();
        let b = parallel(&coin().support(), &coin().support()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lens_square_carries_maps() {
        let m4 = mod4();
        let tl = Machine::timeline_window(3);
        let bit = FiniteSpace::range(2);
        let full = Interface::new(bit.clone(), bit.product(&bit));
        // Outputs read (twos, ones): counting 0, 1, 2, 3.
        let h = Chart::timeline(&full, &[1, 1, 1], &[0, 1, 2, 3]).unwrap();
        let path = enumerate_trajectories(&m4, &h, 3).unwrap();
        assert_eq!(path.len(), 1);
        let mm = trajectory_map(&h, &m4, &path[0]).unwrap();
        assert!(check_machine_map(&mm, &tl, &m4).unwrap().is_pass());

        let l1 = Lens::identity(tl.interface());
        let l2 = forget_first();
        let k = Chart::from_fns(
            tl.interface().clone(),
            l2.target().clone(),
            |t| l2.fwd(h.fwd(t)),
            |t, j| h.push(t, j),
        )
        .unwrap();
        let acted = act_lens_on_map(&mm, &l1, &l2, &k).unwrap();
        let (a1, a2) = (act_lens(&tl, &l1).unwrap(), act_lens(&m4, &l2).unwrap());
        assert!(check_machine_map(&acted, &a1, &a2).unwrap().is_pass());

        let mut bad = k.clone();
        bad.fwd[0] = 1;
        assert!(act_lens_on_map(&mm, &l1, &l2, &bad).is_err());
    }
}
