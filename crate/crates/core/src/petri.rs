//! Petri nets, their maps and pushouts, open Petri nets, and the action of
//! undirected wiring diagrams on open nets.
//!
//! Wiring diagrams glue open nets along species only: the junctions of a
//! diagram become a discrete net (species, no transitions) and the composite
//! is a pushout of nets. Transitions are never merged by the action.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result, Verdict};
use crate::finset::{self, FinFunction};
use crate::wiring::{self, Cospan, CospanMap};

/// A finite multiset of species, stored sparse and sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiset(Vec<(usize, u32)>);

impl Multiset {
    pub fn empty() -> Self {
        Multiset(Vec::new())
    }

    /// Accepts entries in any order; repeated indices are summed and zero
    /// multiplicities dropped.
    pub fn new(entries: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut acc: BTreeMap<usize, u32> = BTreeMap::new();
        for (s, k) in entries {
            *acc.entry(s).or_default() += k;
        }
        Multiset(acc.into_iter().filter(|&(_, k)| k > 0).collect())
    }

    pub fn singleton(s: usize, k: u32) -> Self {
        Multiset::new([(s, k)])
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, s: usize) -> u32 {
        self.0
            .binary_search_by_key(&s, |&(i, _)| i)
            .map(|k| self.0[k].1)
            .unwrap_or(0)
    }

    /// Total multiplicity.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&(_, k)| k as u64).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().map(|&(i, _)| i)
    }
}

/// `ℕ[f]`: sums multiplicities over the fibers of `f`.
pub fn multiset_push(f: &FinFunction, ms: &Multiset) -> Result<Multiset> {
    if let Some(i) = ms.max_index().filter(|&i| i >= f.dom()) {
        return Err(Error::IndexOutOfRange {
            index: i,
            size: f.dom(),
        });
    }
    Ok(Multiset::new(ms.0.iter().map(|&(s, k)| (f.apply(s), k))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    pub src: Multiset,
    pub tgt: Multiset,
}

impl Transition {
    pub fn new(name: impl Into<String>, src: Multiset, tgt: Multiset) -> Self {
        Transition {
            name: name.into(),
            src,
            tgt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    species: Vec<String>,
    transitions: Vec<Transition>,
}

impl PetriNet {
    pub fn new(species: Vec<String>, transitions: Vec<Transition>) -> Result<Self> {
        let n = species.len();
        for t in &transitions {
            for ms in [&t.src, &t.tgt] {
                if let Some(i) = ms.max_index().filter(|&i| i >= n) {
                    return Err(Error::IndexOutOfRange { index: i, size: n });
                }
            }
        }
        Ok(PetriNet {
            species,
            transitions,
        })
    }

    /// A net with the given species and no transitions.
    pub fn discrete(species: Vec<String>) -> Self {
        PetriNet {
            species,
            transitions: Vec::new(),
        }
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// Disjoint union with left-nested offsets.
    pub fn coproduct<'a>(nets: impl IntoIterator<Item = &'a PetriNet>) -> PetriNet {
        let mut species = Vec::new();
        let mut transitions = Vec::new();
        for net in nets {
            let shift = |ms: &Multiset| {
                Multiset(ms.0.iter().map(|&(s, k)| (s + species.len(), k)).collect())
            };
            transitions.extend(
                net.transitions
                    .iter()
                    .map(|t| Transition::new(t.name.clone(), shift(&t.src), shift(&t.tgt))),
            );
            species.extend(net.species.iter().cloned());
        }
        PetriNet {
            species,
            transitions,
        }
    }
}

/// A species map and a transition map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriMap {
    pub species: FinFunction,
    pub transitions: FinFunction,
}

impl PetriMap {
    pub fn identity(p: &PetriNet) -> Self {
        PetriMap {
            species: FinFunction::identity(p.n_species()),
            transitions: FinFunction::identity(p.n_transitions()),
        }
    }

    pub fn then(&self, next: &PetriMap) -> Result<PetriMap> {
        Ok(PetriMap {
            species: self.species.then(&next.species)?,
            transitions: self.transitions.then(&next.transitions)?,
        })
    }
}

fn check_arity(what: &str, f: &FinFunction, dom: usize, cod: usize) -> Result<()> {
    if f.dom() != dom || f.cod() != cod {
        return Err(Error::ArityMismatch(format!(
            "{what} map is {}->{}, expected {dom}->{cod}",
            f.dom(),
            f.cod()
        )));
    }
    Ok(())
}

/// Checks the source and target squares for every transition.
pub fn check_petri_map(m: &PetriMap, p: &PetriNet, q: &PetriNet) -> Result<Verdict> {
    check_arity("species", &m.species, p.n_species(), q.n_species())?;
    check_arity(
        "transition",
        &m.transitions,
        p.n_transitions(),
        q.n_transitions(),
    )?;
    for (t, tr) in p.transitions.iter().enumerate() {
        let image = &q.transitions[m.transitions.apply(t)];
        for (side, here, there) in [
            ("source", &tr.src, &image.src),
            ("target", &tr.tgt, &image.tgt),
        ] {
            if &multiset_push(&m.species, here)? != there {
                return Ok(Verdict::fail(format!(
                    "{side} square fails at transition `{}` (mapped to `{}`)",
                    tr.name, image.name
                )));
            }
        }
    }
    Ok(Verdict::Pass)
}

#[derive(Debug, Clone)]
pub struct PetriPushout {
    pub net: PetriNet,
    pub inj_left: PetriMap,
    pub inj_right: PetriMap,
}

fn merged_name(members: &[usize], left_size: usize, left: &[String], right: &[String]) -> String {
    let mut names: Vec<&str> = Vec::new();
    let from_left = members.iter().any(|&x| x < left_size);
    for &x in members {
        let name = match (x < left_size, from_left) {
            (true, _) => left[x].as_str(),
            (false, false) => right[x - left_size].as_str(),
            (false, true) => continue,
        };
        if !names.contains(&name) {
            names.push(name);
        }
    }
    names.join("/")
}

/// Pushout of nets `P <-l- A -r-> Q`, computed componentwise on species and
/// transitions. Merged classes take the names of their `P` members
/// (slash-joined when they differ), falling back to `Q` names.
pub fn petri_pushout(
    p: &PetriNet,
    a: &PetriNet,
    q: &PetriNet,
    l: &PetriMap,
    r: &PetriMap,
) -> Result<PetriPushout> {
    for (leg, target, name) in [(l, p, "left"), (r, q, "right")] {
        match check_petri_map(leg, a, target) {
            Ok(Verdict::Pass) => {}
            Ok(Verdict::Fail(why)) => return Err(Error::InvalidLeg(format!("{name} leg: {why}"))),
            Err(e) => return Err(Error::InvalidLeg(format!("{name} leg: {e}"))),
        }
    }
    let sp = finset::pushout(&l.species, &r.species)?;
    let tp = finset::pushout(&l.transitions, &r.transitions)?;

    let species_classes = sp.quotient().fibers();
    let species: Vec<String> = species_classes
        .iter()
        .map(|members| merged_name(members, p.n_species(), &p.species, &q.species))
        .collect();

    let left_names: Vec<String> = p.transitions.iter().map(|t| t.name.clone()).collect();
    let right_names: Vec<String> = q.transitions.iter().map(|t| t.name.clone()).collect();
    let mut transitions = Vec::with_capacity(tp.apex);
    for members in tp.quotient().fibers() {
        let rep = members[0];
        let (tr, inj) = if rep < p.n_transitions() {
            (&p.transitions[rep], &sp.inj_left)
        } else {
            (&q.transitions[rep - p.n_transitions()], &sp.inj_right)
        };
        transitions.push(Transition::new(
            merged_name(&members, p.n_transitions(), &left_names, &right_names),
            multiset_push(inj, &tr.src)?,
            multiset_push(inj, &tr.tgt)?,
        ));
    }
    let net = PetriNet::new(species, transitions)?;
    Ok(PetriPushout {
        net,
        inj_left: PetriMap {
            species: sp.inj_left,
            transitions: tp.inj_left,
        },
        inj_right: PetriMap {
            species: sp.inj_right,
            transitions: tp.inj_right,
        },
    })
}

/// A Petri net with a port map from its interface into its species.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenPetriNet {
    net: PetriNet,
    ports: FinFunction,
    port_types: Option<Vec<String>>,
}

impl OpenPetriNet {
    pub fn new(net: PetriNet, ports: FinFunction) -> Result<Self> {
        if ports.cod() != net.n_species() {
            return Err(Error::CodomainMismatch {
                left: ports.cod(),
                right: net.n_species(),
            });
        }
        Ok(OpenPetriNet {
            net,
            ports,
            port_types: None,
        })
    }

    /// Ports may carry types, checked against typed wiring diagrams.
    pub fn with_port_types(mut self, types: Vec<String>) -> Result<Self> {
        if types.len() != self.interface() {
            return Err(Error::ArityMismatch(format!(
                "{} port types for {} ports",
                types.len(),
                self.interface()
            )));
        }
        self.port_types = Some(types);
        Ok(self)
    }

    /// The closed net `∅ -> S`.
    pub fn closed(net: PetriNet) -> Self {
        let ports = FinFunction::initial(net.n_species());
        OpenPetriNet {
            net,
            ports,
            port_types: None,
        }
    }

    pub fn net(&self) -> &PetriNet {
        &self.net
    }

    pub fn ports(&self) -> &FinFunction {
        &self.ports
    }

    pub fn port_types(&self) -> Option<&[String]> {
        self.port_types.as_deref()
    }

    pub fn interface(&self) -> usize {
        self.ports.dom()
    }
}

/// Monoidal product: disjoint union of nets with stacked interfaces.
pub fn open_parallel(a: &OpenPetriNet, b: &OpenPetriNet) -> OpenPetriNet {
    let port_types = match (&a.port_types, &b.port_types) {
        (Some(x), Some(y)) => Some(x.iter().chain(y).cloned().collect()),
        (Some(x), None) if b.interface() == 0 => Some(x.clone()),
        (None, Some(y)) if a.interface() == 0 => Some(y.clone()),
        _ => None,
    };
    OpenPetriNet {
        net: PetriNet::coproduct([&a.net, &b.net]),
        ports: finset::coproduct([&a.ports, &b.ports]),
        port_types,
    }
}

fn open_parallel_all(systems: &[OpenPetriNet]) -> OpenPetriNet {
    systems.iter().fold(
        OpenPetriNet::closed(PetriNet::discrete(vec![])),
        |acc, s| open_parallel(&acc, s),
    )
}

fn check_wiring_types(uwd: &Cospan, stacked: &OpenPetriNet) -> Result<()> {
    let (Some(inner), Some(ports)) = (uwd.inner_types(), stacked.port_types.as_ref()) else {
        return Ok(());
    };
    for (i, (want, have)) in inner.type_names().iter().zip(ports).enumerate() {
        if want != have {
            return Err(Error::TypeClash(format!(
                "inner port {i} has type `{want}` in the diagram but `{have}` in the system"
            )));
        }
    }
    Ok(())
}

/// Applies an undirected wiring diagram to a family of open nets, one per
/// inner box in order. Floating junctions are named `j0`, `j1`, ...
pub fn uwd_apply(uwd: &Cospan, systems: &[OpenPetriNet]) -> Result<OpenPetriNet> {
    let names: Vec<String> = (0..uwd.junctions()).map(|k| format!("j{k}")).collect();
    uwd_apply_named(uwd, systems, &names)
}

/// As [`uwd_apply`], naming junctions that no port reaches.
pub fn uwd_apply_named(
    uwd: &Cospan,
    systems: &[OpenPetriNet],
    junction_names: &[String],
) -> Result<OpenPetriNet> {
    if junction_names.len() != uwd.junctions() {
        return Err(Error::ArityMismatch(format!(
            "{} junction names for {} junctions",
            junction_names.len(),
            uwd.junctions()
        )));
    }
    let stacked = open_parallel_all(systems);
    if stacked.interface() != uwd.inner() {
        return Err(Error::BoundaryMismatch(format!(
            "systems expose {} ports but the diagram has {} inner ports",
            stacked.interface(),
            uwd.inner()
        )));
    }
    check_wiring_types(uwd, &stacked)?;

    let ports = PetriNet::discrete(vec![String::new(); uwd.inner()]);
    let junctions = PetriNet::discrete(junction_names.to_vec());
    let into_systems = PetriMap {
        species: stacked.ports.clone(),
        transitions: FinFunction::initial(stacked.net.n_transitions()),
    };
    let into_junctions = PetriMap {
        species: uwd.left().clone(),
        transitions: FinFunction::initial(0),
    };
    let po = petri_pushout(
        &stacked.net,
        &ports,
        &junctions,
        &into_systems,
        &into_junctions,
    )?;
    let ports = uwd.right().then(&po.inj_right.species)?;
    let port_types = uwd
        .outer_types()
        .map(|t| t.type_names().into_iter().map(String::from).collect());
    Ok(OpenPetriNet {
        net: po.net,
        ports,
        port_types,
    })
}

/// `m: M -> M'` and a net map whose species part commutes with the ports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenPetriMap {
    pub interface: FinFunction,
    pub net: PetriMap,
}

impl OpenPetriMap {
    pub fn identity(a: &OpenPetriNet) -> Self {
        OpenPetriMap {
            interface: FinFunction::identity(a.interface()),
            net: PetriMap::identity(&a.net),
        }
    }

    pub fn then(&self, next: &OpenPetriMap) -> Result<OpenPetriMap> {
        Ok(OpenPetriMap {
            interface: self.interface.then(&next.interface)?,
            net: self.net.then(&next.net)?,
        })
    }
}

pub fn check_open_map(m: &OpenPetriMap, a: &OpenPetriNet, b: &OpenPetriNet) -> Result<Verdict> {
    check_arity("interface", &m.interface, a.interface(), b.interface())?;
    let verdict = check_petri_map(&m.net, &a.net, &b.net)?;
    Ok(verdict.and_then(|| {
        for i in 0..a.interface() {
            let via_net = m.net.species.apply(a.ports.apply(i));
            let via_iface = b.ports.apply(m.interface.apply(i));
            if via_net != via_iface {
                return Verdict::fail(format!(
                    "port square fails at port {i}: f(p({i})) = `{}` but p'(m({i})) = `{}`",
                    b.net.species[via_net], b.net.species[via_iface]
                ));
            }
        }
        Verdict::Pass
    }))
}

/// The map between composites induced by a map of diagrams and a family of
/// maps of component systems.
///
/// `sq` goes from `uwd` to `uwd2`; `maps[k]` goes from `src[k]` to `tgt[k]`
/// and the stacked interface maps must equal `sq.m`.
pub fn uwd_apply_map(
    sq: &CospanMap,
    uwd: &Cospan,
    uwd2: &Cospan,
    src: &[OpenPetriNet],
    tgt: &[OpenPetriNet],
    maps: &[OpenPetriMap],
) -> Result<(OpenPetriNet, OpenPetriNet, OpenPetriMap)> {
    if src.len() != maps.len() || tgt.len() != maps.len() {
        return Err(Error::ArityMismatch(format!(
            "{} sources, {} targets, {} maps",
            src.len(),
            tgt.len(),
            maps.len()
        )));
    }
    if !wiring::check_cospan_map(sq, uwd, uwd2)?.is_pass() {
        return Err(Error::InvalidLeg("diagram map does not commute".into()));
    }
    for (k, ((m, a), b)) in maps.iter().zip(src).zip(tgt).enumerate() {
        if let Verdict::Fail(why) = check_open_map(m, a, b)? {
            return Err(Error::InvalidLeg(format!("component {k}: {why}")));
        }
    }
    let stacked_iface = finset::coproduct(maps.iter().map(|m| &m.interface));
    if stacked_iface != sq.m {
        return Err(Error::InvalidLeg(
            "inner component of the diagram map is not the sum of the interface maps".into(),
        ));
    }
    let from = uwd_apply(uwd, src)?;
    let to = uwd_apply(uwd2, tgt)?;

    // Species of each composite are a quotient of (stacked species + junctions).
    let quotient_of = |uwd: &Cospan, systems: &[OpenPetriNet]| -> Result<FinFunction> {
        let stacked = open_parallel_all(systems);
        Ok(finset::pushout(&stacked.ports, uwd.left())?.quotient())
    };
    let q_from = quotient_of(uwd, src)?;
    let q_to = quotient_of(uwd2, tgt)?;
    let species_sum = finset::coproduct(maps.iter().map(|m| &m.net.species));
    let upstairs = finset::coproduct([&species_sum, &sq.j]);
    let mut table = vec![usize::MAX; from.net.n_species()];
    for x in 0..q_from.dom() {
        let image = q_to.apply(upstairs.apply(x));
        let slot = &mut table[q_from.apply(x)];
        if *slot != usize::MAX && *slot != image {
            return Err(Error::InvalidLeg(
                "component maps do not descend to the glued species".into(),
            ));
        }
        *slot = image;
    }
    let species = FinFunction::new(table, to.net.n_species())?;
    let transitions = finset::coproduct(maps.iter().map(|m| &m.net.transitions));
    let map = OpenPetriMap {
        interface: sq.n.clone(),
        net: PetriMap {
            species,
            transitions,
        },
    };
    Ok((from, to, map))
}

/// Joint colour refinement over the species of several nets, seeded with
/// extra per-species data. Colours are comparable across the nets.
fn refine_colours(nets: &[&PetriNet], seeds: &[Vec<Vec<usize>>]) -> Vec<Vec<usize>> {
    let mut colours: Vec<Vec<usize>> = Vec::new();
    {
        let mut dict: HashMap<Vec<usize>, usize> = HashMap::new();
        for (net, seed) in nets.iter().zip(seeds) {
            let mut cs = Vec::new();
            for s in 0..net.n_species() {
                let mut key = seed[s].clone();
                let mut sig: Vec<(u32, u32)> = net
                    .transitions
                    .iter()
                    .map(|t| (t.src.count(s), t.tgt.count(s)))
                    .filter(|&(a, b)| a + b > 0)
                    .collect();
                sig.sort_unstable();
                key.push(usize::MAX);
                key.extend(sig.into_iter().flat_map(|(a, b)| [a as usize, b as usize]));
                let n = dict.len();
                cs.push(*dict.entry(key).or_insert(n));
            }
            colours.push(cs);
        }
    }
    loop {
        let before: usize = colours
            .iter()
            .flatten()
            .collect::<std::collections::HashSet<_>>()
            .len();
        let mut dict: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut next = Vec::new();
        for (net, cs) in nets.iter().zip(&colours) {
            let tsig: Vec<Vec<usize>> = net
                .transitions
                .iter()
                .map(|t| {
                    let mut v: Vec<usize> = Vec::new();
                    for (marker, ms) in [(0usize, &t.src), (1, &t.tgt)] {
                        let mut parts: Vec<(usize, u32)> =
                            ms.entries().iter().map(|&(s, k)| (cs[s], k)).collect();
                        parts.sort_unstable();
                        v.push(usize::MAX - marker);
                        v.extend(parts.into_iter().flat_map(|(c, k)| [c, k as usize]));
                    }
                    v
                })
                .collect();
            let mut ncs = Vec::new();
            for s in 0..net.n_species() {
                let mut around: Vec<(u32, u32, &Vec<usize>)> = net
                    .transitions
                    .iter()
                    .zip(&tsig)
                    .filter_map(|(t, sig)| {
                        let (a, b) = (t.src.count(s), t.tgt.count(s));
                        (a + b > 0).then_some((a, b, sig))
                    })
                    .collect();
                around.sort();
                let mut key = vec![cs[s]];
                for (a, b, sig) in around {
                    key.push(usize::MAX - 2);
                    key.push(a as usize);
                    key.push(b as usize);
                    key.extend(sig);
                }
                let n = dict.len();
                ncs.push(*dict.entry(key).or_insert(n));
            }
            next.push(ncs);
        }
        let after: usize = next
            .iter()
            .flatten()
            .collect::<std::collections::HashSet<_>>()
            .len();
        colours = next;
        if after == before {
            return colours;
        }
    }
}

fn iso_search(p: &PetriNet, q: &PetriNet, seeds: [Vec<Vec<usize>>; 2]) -> Option<PetriMap> {
    if p.n_species() != q.n_species() || p.n_transitions() != q.n_transitions() {
        return None;
    }
    let colours = refine_colours(&[p, q], &seeds);
    let (cp, cq) = (&colours[0], &colours[1]);
    let mut hist_p: BTreeMap<usize, usize> = BTreeMap::new();
    let mut hist_q: BTreeMap<usize, usize> = BTreeMap::new();
    cp.iter().for_each(|&c| *hist_p.entry(c).or_default() += 1);
    cq.iter().for_each(|&c| *hist_q.entry(c).or_default() += 1);
    if hist_p != hist_q {
        return None;
    }

    // Most constrained species first.
    let mut order: Vec<usize> = (0..p.n_species()).collect();
    order.sort_by_key(|&s| (hist_p[&cp[s]], s));
    let mut position = vec![0; p.n_species()];
    for (k, &s) in order.iter().enumerate() {
        position[s] = k + 1;
    }
    // Transitions become checkable once their last species is assigned.
    let mut ready: Vec<Vec<usize>> = vec![Vec::new(); p.n_species() + 1];
    for (t, tr) in p.transitions.iter().enumerate() {
        let level = tr
            .src
            .entries()
            .iter()
            .chain(tr.tgt.entries())
            .map(|&(s, _)| position[s])
            .max()
            .unwrap_or(0);
        ready[level].push(t);
    }
    let mut available: HashMap<(Multiset, Multiset), usize> = HashMap::new();
    for t in &q.transitions {
        *available.entry((t.src.clone(), t.tgt.clone())).or_default() += 1;
    }

    struct Search<'a> {
        p: &'a PetriNet,
        cp: &'a [usize],
        cq: &'a [usize],
        order: Vec<usize>,
        ready: Vec<Vec<usize>>,
        assign: Vec<usize>,
        used: Vec<bool>,
        available: HashMap<(Multiset, Multiset), usize>,
    }

    impl Search<'_> {
        fn push(&self, ms: &Multiset) -> Multiset {
            Multiset::new(ms.entries().iter().map(|&(s, k)| (self.assign[s], k)))
        }

        /// Consumes matches for the transitions ready at `level`; undoes and
        /// fails if one is missing.
        fn claim(&mut self, level: usize) -> bool {
            let mut taken = Vec::new();
            for &t in &self.ready[level] {
                let tr = &self.p.transitions[t];
                let key = (self.push(&tr.src), self.push(&tr.tgt));
                match self.available.get_mut(&key) {
                    Some(n) if *n > 0 => {
                        *n -= 1;
                        taken.push(key);
                    }
                    _ => {
                        self.release(taken);
                        return false;
                    }
                }
            }
            true
        }

        fn release(&mut self, keys: Vec<(Multiset, Multiset)>) {
            for key in keys {
                *self.available.get_mut(&key).expect("claimed key") += 1;
            }
        }

        fn unclaim(&mut self, level: usize) {
            let keys: Vec<_> = self.ready[level]
                .iter()
                .map(|&t| {
                    let tr = &self.p.transitions[t];
                    (self.push(&tr.src), self.push(&tr.tgt))
                })
                .collect();
            self.release(keys);
        }

        fn run(&mut self, depth: usize) -> bool {
            if depth == self.order.len() {
                return true;
            }
            let s = self.order[depth];
            for cand in 0..self.cq.len() {
                if self.used[cand] || self.cq[cand] != self.cp[s] {
                    continue;
                }
                self.assign[s] = cand;
                self.used[cand] = true;
                if self.claim(depth + 1) {
                    if self.run(depth + 1) {
                        return true;
                    }
                    self.unclaim(depth + 1);
                }
                self.used[cand] = false;
                self.assign[s] = usize::MAX;
            }
            false
        }
    }

    let mut search = Search {
        p,
        cp,
        cq,
        order,
        ready,
        assign: vec![usize::MAX; p.n_species()],
        used: vec![false; q.n_species()],
        available,
    };
    if !search.claim(0) || !search.run(0) {
        return None;
    }
    let species = FinFunction::new(search.assign.clone(), q.n_species()).ok()?;

    let mut pool: HashMap<(Multiset, Multiset), Vec<usize>> = HashMap::new();
    for (t, tr) in q.transitions.iter().enumerate().rev() {
        pool.entry((tr.src.clone(), tr.tgt.clone()))
            .or_default()
            .push(t);
    }
    let mut ttable = Vec::with_capacity(p.n_transitions());
    for tr in &p.transitions {
        let key = (
            multiset_push(&species, &tr.src).ok()?,
            multiset_push(&species, &tr.tgt).ok()?,
        );
        ttable.push(pool.get_mut(&key)?.pop()?);
    }
    Some(PetriMap {
        species,
        transitions: FinFunction::new(ttable, q.n_transitions()).ok()?,
    })
}

/// Searches for an isomorphism of nets (names are ignored).
///
/// Backtracking over species, seeded by colour refinement and pruned as soon
/// as a transition's species are all placed. Exponential in the worst case;
/// intended for nets of up to a few dozen species.
pub fn petri_iso(p: &PetriNet, q: &PetriNet) -> Option<PetriMap> {
    let seeds = [vec![vec![]; p.n_species()], vec![vec![]; q.n_species()]];
    iso_search(p, q, seeds)
}

/// An isomorphism of open nets that is the identity on the interface.
pub fn open_petri_iso(a: &OpenPetriNet, b: &OpenPetriNet) -> Option<PetriMap> {
    if a.interface() != b.interface() {
        return None;
    }
    let seed = |o: &OpenPetriNet| {
        let mut v = vec![Vec::new(); o.net.n_species()];
        for (i, &s) in o.ports.table().iter().enumerate() {
            v[s].push(i);
        }
        v
    };
    iso_search(&a.net, &b.net, [seed(a), seed(b)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(entries: &[(usize, u32)]) -> Multiset {
        Multiset::new(entries.iter().copied())
    }

    fn ff(table: &[usize], cod: usize) -> FinFunction {
        FinFunction::new(table.to_vec(), cod).unwrap()
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn infection() -> OpenPetriNet {
        let net = PetriNet::new(
            names(&["S", "I"]),
            vec![Transition::new("inf", ms(&[(0, 1), (1, 1)]), ms(&[(1, 2)]))],
        )
        .unwrap();
        OpenPetriNet::new(net, ff(&[0, 1], 2)).unwrap()
    }

    fn recovery() -> OpenPetriNet {
        let net = PetriNet::new(
            names(&["I", "R"]),
            vec![Transition::new("rec", ms(&[(0, 1)]), ms(&[(1, 1)]))],
        )
        .unwrap();
        OpenPetriNet::new(net, ff(&[0, 1], 2)).unwrap()
    }

    fn sir_net() -> PetriNet {
        PetriNet::new(
            names(&["S", "I", "R"]),
            vec![
                Transition::new("inf", ms(&[(0, 1), (1, 1)]), ms(&[(1, 2)])),
                Transition::new("rec", ms(&[(1, 1)]), ms(&[(2, 1)])),
            ],
        )
        .unwrap()
    }

    fn sis_net() -> PetriNet {
        PetriNet::new(
            names(&["S", "I"]),
            vec![
                Transition::new("inf", ms(&[(0, 1), (1, 1)]), ms(&[(1, 2)])),
                Transition::new("rec", ms(&[(1, 1)]), ms(&[(0, 1)])),
            ],
        )
        .unwrap()
    }

    fn sir_uwd() -> Cospan {
        Cospan::new(ff(&[0, 1, 1, 2], 3), FinFunction::identity(3)).unwrap()
    }

    #[test]
    fn multiset_normalizes() {
        let m = Multiset::new([(2, 1), (0, 3), (2, 2), (1, 0)]);
        assert_eq!(m.entries(), &[(0, 3), (2, 3)]);
        assert_eq!(m.total(), 6);
    }

    #[test]
    fn multiset_push_examples() {
        let m = ms(&[(0, 1), (2, 1)]);
        assert_eq!(multiset_push(&FinFunction::identity(3), &m).unwrap(), m);
        // S, I, R -> S, I with R collapsing onto S.
        let collapse = ff(&[0, 1, 0], 2);
        assert_eq!(multiset_push(&collapse, &m).unwrap(), ms(&[(0, 2)]));
        assert!(multiset_push(&collapse, &Multiset::empty())
            .unwrap()
            .is_empty());
        assert!(matches!(
            multiset_push(&ff(&[0], 1), &m),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn net_rejects_bad_index() {
        let err = PetriNet::new(
            names(&["A"]),
            vec![Transition::new("t", ms(&[(1, 1)]), Multiset::empty())],
        );
        assert!(err.is_err());
    }

    #[test]
    fn sir_to_sis_map() {
        let m = PetriMap {
            species: ff(&[0, 1, 0], 2),
            transitions: FinFunction::identity(2),
        };
        assert!(check_petri_map(&m, &sir_net(), &sis_net())
            .unwrap()
            .is_pass());
        assert!(
            check_petri_map(&PetriMap::identity(&sir_net()), &sir_net(), &sir_net())
                .unwrap()
                .is_pass()
        );
        let bad = PetriMap {
            transitions: ff(&[0, 0], 2),
            ..m
        };
        assert!(!check_petri_map(&bad, &sir_net(), &sis_net())
            .unwrap()
            .is_pass());
        let wrong = PetriMap {
            species: FinFunction::identity(3),
            transitions: FinFunction::identity(2),
        };
        assert!(matches!(
            check_petri_map(&wrong, &sir_net(), &sis_net()),
            Err(Error::ArityMismatch(_))
        ));
    }

    #[test]
    fn pushout_of_infection_and_recovery() {
        let shared = PetriNet::discrete(names(&["I"]));
        let l = PetriMap {
            species: ff(&[1], 2),
            transitions: FinFunction::initial(1),
        };
        let r = PetriMap {
            species: ff(&[0], 2),
            transitions: FinFunction::initial(1),
        };
        let po = petri_pushout(infection().net(), &shared, recovery().net(), &l, &r).unwrap();
        assert_eq!(po.net.species(), &names(&["S", "I", "R"])[..]);
        assert_eq!(po.net.n_transitions(), 2);
        assert!(petri_iso(&po.net, &sir_net()).is_some());
        assert!(check_petri_map(&po.inj_left, infection().net(), &po.net)
            .unwrap()
            .is_pass());
        assert!(check_petri_map(&po.inj_right, recovery().net(), &po.net)
            .unwrap()
            .is_pass());
    }

    #[test]
    fn pushout_along_identity() {
        let p = sir_net();
        let id = PetriMap::identity(&p);
        let po = petri_pushout(&p, &p, &p, &id, &id).unwrap();
        assert!(petri_iso(&po.net, &p).is_some());
    }

    #[test]
    fn pushout_rejects_invalid_leg() {
        let bad = PetriMap {
            species: ff(&[0, 1, 0], 2),
            transitions: ff(&[1, 0], 2),
        };
        let id = PetriMap::identity(&sir_net());
        let err = petri_pushout(&sis_net(), &sir_net(), &sir_net(), &bad, &id).unwrap_err();
        assert!(matches!(err, Error::InvalidLeg(_)));
    }

    #[test]
    fn clashing_names_are_slash_joined() {
        let a = PetriNet::discrete(names(&["x"]));
        let p = PetriNet::discrete(names(&["Left", "Other"]));
        let q = PetriNet::discrete(names(&["Right"]));
        let l = PetriMap {
            species: ff(&[0], 2),
            transitions: FinFunction::initial(0),
        };
        let r = PetriMap {
            species: ff(&[0], 1),
            transitions: FinFunction::initial(0),
        };
        let po = petri_pushout(&p, &a, &q, &l, &r).unwrap();
        assert_eq!(po.net.species(), &names(&["Left", "Other"])[..]);

        let p2 = PetriNet::discrete(names(&["A", "B"]));
        let a2 = PetriNet::discrete(names(&["x", "y"]));
        let l2 = PetriMap {
            species: ff(&[0, 1], 2),
            transitions: FinFunction::initial(0),
        };
        let r2 = PetriMap {
            species: ff(&[0, 0], 1),
            transitions: FinFunction::initial(0),
        };
        let po = petri_pushout(&p2, &a2, &q, &l2, &r2).unwrap();
        assert_eq!(po.net.species(), &names(&["A/B"])[..]);
    }

    #[test]
    fn sir_by_wiring() {
        let composite = uwd_apply(&sir_uwd(), &[infection(), recovery()]).unwrap();
        assert_eq!(composite.interface(), 3);
        assert_eq!(composite.net().n_species(), 3);
        assert_eq!(composite.net().n_transitions(), 2);
        assert_eq!(composite.net().species(), &names(&["S", "I", "R"])[..]);
        let expected = OpenPetriNet::new(sir_net(), FinFunction::identity(3)).unwrap();
        assert!(open_petri_iso(&composite, &expected).is_some());
    }

    #[test]
    fn identity_diagram_returns_system() {
        let s = infection();
        let out = uwd_apply(&Cospan::identity(2), std::slice::from_ref(&s)).unwrap();
        assert!(open_petri_iso(&out, &s).is_some());
    }

    #[test]
    fn wiring_rejects_boundary_mismatch() {
        let err = uwd_apply(&sir_uwd(), &[infection()]).unwrap_err();
        assert!(matches!(err, Error::BoundaryMismatch(_)));
    }

    #[test]
    fn typed_wiring_rejects_port_type_clash() {
        let types = crate::finset::TypedFinSet::from_names(&["Pop", "Pop", "Pop"]);
        let uwd = Cospan::typed(ff(&[0, 1, 1, 2], 3), FinFunction::identity(3), types).unwrap();
        let a = infection().with_port_types(names(&["Pop", "Pop"])).unwrap();
        let b = recovery().with_port_types(names(&["Pop", "Rate"])).unwrap();
        assert!(matches!(
            uwd_apply(&uwd, &[a.clone(), b]),
            Err(Error::TypeClash(_))
        ));
        let b = recovery().with_port_types(names(&["Pop", "Pop"])).unwrap();
        let out = uwd_apply(&uwd, &[a, b]).unwrap();
        assert_eq!(out.port_types().unwrap().len(), 3);
    }

    #[test]
    fn floating_junction_becomes_isolated_species() {
        let uwd = Cospan::new(ff(&[0, 1], 3), ff(&[2], 3)).unwrap();
        let out = uwd_apply(&uwd, &[infection()]).unwrap();
        assert_eq!(out.net().species(), &names(&["S", "I", "j2"])[..]);
        assert_eq!(out.ports().table(), &[2]);
    }

    #[test]
    fn parallel_infection_recovery() {
        let p = open_parallel(&infection(), &recovery());
        assert_eq!(p.interface(), 4);
        assert_eq!(p.net().n_species(), 4);
        assert_eq!(p.net().n_transitions(), 2);
        assert_eq!(p.ports().table(), &[0, 1, 2, 3]);
        let unit = OpenPetriNet::closed(PetriNet::discrete(vec![]));
        assert_eq!(open_parallel(&infection(), &unit), infection());
    }

    #[test]
    fn open_sir_to_sis() {
        let sir = OpenPetriNet::new(sir_net(), FinFunction::identity(3)).unwrap();
        let sis = OpenPetriNet::new(sis_net(), FinFunction::identity(2)).unwrap();
        let m = OpenPetriMap {
            interface: ff(&[0, 1, 0], 2),
            net: PetriMap {
                species: ff(&[0, 1, 0], 2),
                transitions: FinFunction::identity(2),
            },
        };
        assert!(check_open_map(&m, &sir, &sis).unwrap().is_pass());
        let mut bad = m.clone();
        bad.interface = ff(&[0, 1, 1], 2);
        assert!(!check_open_map(&bad, &sir, &sis).unwrap().is_pass());
        assert!(check_open_map(&OpenPetriMap::identity(&sir), &sir, &sir)
            .unwrap()
            .is_pass());
    }

    #[test]
    fn iso_examples() {
        let sir = sir_net();
        let found = petri_iso(&sir, &sir).unwrap();
        assert!(check_petri_map(&found, &sir, &sir).unwrap().is_pass());

        // Relabel species by R, S, I.
        let perm = ff(&[1, 2, 0], 3);
        let permuted = PetriNet::new(
            names(&["R", "S", "I"]),
            sir.transitions()
                .iter()
                .map(|t| {
                    Transition::new(
                        t.name.clone(),
                        multiset_push(&perm, &t.src).unwrap(),
                        multiset_push(&perm, &t.tgt).unwrap(),
                    )
                })
                .rev()
                .collect(),
        )
        .unwrap();
        let iso = petri_iso(&sir, &permuted).unwrap();
        assert!(iso.species.is_iso() && iso.transitions.is_iso());
        assert!(check_petri_map(&iso, &sir, &permuted).unwrap().is_pass());

        assert!(petri_iso(&sir, &sis_net()).is_none());
    }

    #[test]
    fn open_iso_respects_ports() {
        let a = OpenPetriNet::new(sir_net(), ff(&[0], 3)).unwrap();
        let b = OpenPetriNet::new(sir_net(), ff(&[2], 3)).unwrap();
        assert!(open_petri_iso(&a, &a).is_some());
        assert!(open_petri_iso(&a, &b).is_none());
    }

    #[test]
    fn iso_on_symmetric_net() {
        // A 4-cycle of single-token transitions: every rotation is an automorphism.
        let cyc = |order: [usize; 4]| {
            let ts = (0..4)
                .map(|k| {
                    Transition::new(
                        format!("t{k}"),
                        ms(&[(order[k], 1)]),
                        ms(&[(order[(k + 1) % 4], 1)]),
                    )
                })
                .collect();
            PetriNet::new(names(&["a", "b", "c", "d"]), ts).unwrap()
        };
        let p = cyc([0, 1, 2, 3]);
        let q = cyc([2, 0, 3, 1]);
        let iso = petri_iso(&p, &q).unwrap();
        assert!(check_petri_map(&iso, &p, &q).unwrap().is_pass());
        // Reversed orientation is not isomorphic to two disjoint 2-cycles.
        let two = PetriNet::new(
            names(&["a", "b", "c", "d"]),
            vec![
                Transition::new("x", ms(&[(0, 1)]), ms(&[(1, 1)])),
                Transition::new("y", ms(&[(1, 1)]), ms(&[(0, 1)])),
                Transition::new("z", ms(&[(2, 1)]), ms(&[(3, 1)])),
                Transition::new("w", ms(&[(3, 1)]), ms(&[(2, 1)])),
            ],
        )
        .unwrap();
        assert!(petri_iso(&p, &two).is_none());
    }
}
