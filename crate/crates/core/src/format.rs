//! JSON documents for systems and maps.
//!
//! Every document carries `"format": 1` and a `"kind"` tag. Output is
//! canonical: keys sorted, two-space indentation, probabilities as exact
//! rational strings, so equal values serialise to identical bytes.
//! Elements are referred to by name; names that are not unique are made so
//! on write by suffixing `_2`, `_3`, ...

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::finset::FinFunction;
use crate::lens::{Chart, FiniteSpace, Interface};
use crate::machine::{Effect, Machine, MachineMap, Update};
use crate::ode::OdeSystem;
use crate::petri::{Multiset, OpenPetriMap, OpenPetriNet, PetriMap, PetriNet, Transition};

pub const FORMAT_VERSION: u64 = 1;

/// Anything that can be read from or written to a document.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Petri(OpenPetriNet),
    Machine(Machine),
    Ode(OdeSystem),
    PetriMap(PetriMapDoc),
    MachineMap(MachineMapDoc),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Petri(_) => "petri",
            Document::Machine(_) => "machine",
            Document::Ode(_) => "ode",
            Document::PetriMap(_) => "petri-map",
            Document::MachineMap(_) => "machine-map",
        }
    }
}

pub fn read_document(text: &str) -> Result<Document> {
    let mut v: Value = serde_json::from_str(text)?;
    match v.get("format").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(Error::Format(format!("unsupported format version {other}"))),
        None => return Err(Error::Format("missing `format` field".into())),
    }
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Format("missing `kind` field".into()))?
        .to_owned();
    if let Value::Object(m) = &mut v {
        m.remove("format");
        m.remove("kind");
    }
    match kind.as_str() {
        "petri" => Ok(Document::Petri(
            serde_json::from_value::<PetriDoc>(v)?.build()?,
        )),
        "machine" => Ok(Document::Machine(
            serde_json::from_value::<MachineDoc>(v)?.build()?,
        )),
        "ode" => Ok(Document::Ode(serde_json::from_value::<OdeDoc>(v)?.build()?)),
        "petri-map" => Ok(Document::PetriMap(serde_json::from_value(v)?)),
        "machine-map" => Ok(Document::MachineMap(serde_json::from_value(v)?)),
        other => Err(Error::Format(format!("unknown document kind `{other}`"))),
    }
}

pub fn write_document(doc: &Document) -> String {
    let body = match doc {
        Document::Petri(p) => serde_json::to_value(PetriDoc::from_net(p)),
        Document::Machine(m) => serde_json::to_value(MachineDoc::from_machine(m)),
        Document::Ode(s) => serde_json::to_value(OdeDoc::from_system(s)),
        Document::PetriMap(m) => serde_json::to_value(m),
        Document::MachineMap(m) => serde_json::to_value(m),
    }
    .expect("documents serialise");
    let mut map = match body {
        Value::Object(m) => m,
        _ => unreachable!("documents are objects"),
    };
    map.insert("format".into(), FORMAT_VERSION.into());
    map.insert("kind".into(), doc.kind().into());
    // serde_json's map is ordered by key, which makes the output canonical.
    let mut out = serde_json::to_string_pretty(&Value::Object(map)).expect("serialises");
    out.push('\n');
    out
}

/// Makes names unique: later duplicates become `name_2`, `name_3`, ...
pub fn dedup_names(names: &[String]) -> Vec<String> {
    let mut taken: HashSet<String> = names.iter().cloned().collect();
    let mut seen = HashSet::new();
    names
        .iter()
        .map(|n| {
            if seen.insert(n.clone()) {
                return n.clone();
            }
            let fresh = (2..)
                .map(|k| format!("{n}_{k}"))
                .find(|c| !taken.contains(c))
                .expect("unbounded");
            taken.insert(fresh.clone());
            seen.insert(fresh.clone());
            fresh
        })
        .collect()
}

fn index_of(names: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut idx = HashMap::new();
    for (k, n) in names.iter().enumerate() {
        if idx.insert(n.clone(), k).is_some() {
            return Err(Error::Format(format!("{what} `{n}` listed twice")));
        }
    }
    Ok(idx)
}

fn lookup(idx: &HashMap<String, usize>, name: &str, what: &str) -> Result<usize> {
    idx.get(name)
        .copied()
        .ok_or_else(|| Error::UnknownName(format!("{what} `{name}`")))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    name: String,
    inputs: BTreeMap<String, u32>,
    outputs: BTreeMap<String, u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortDoc {
    species: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    ty: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PetriDoc {
    species: Vec<String>,
    transitions: Vec<TransitionDoc>,
    #[serde(default)]
    ports: Vec<PortDoc>,
}

impl PetriDoc {
    fn from_net(p: &OpenPetriNet) -> Self {
        let species = dedup_names(p.net().species());
        let names: Vec<String> = p
            .net()
            .transitions()
            .iter()
            .map(|t| t.name.clone())
            .collect();
        let ms = |m: &Multiset| {
            m.entries()
                .iter()
                .map(|&(s, k)| (species[s].clone(), k))
                .collect()
        };
        let transitions = p
            .net()
            .transitions()
            .iter()
            .zip(dedup_names(&names))
            .map(|(t, name)| TransitionDoc {
                name,
                inputs: ms(&t.src),
                outputs: ms(&t.tgt),
            })
            .collect();
        let ports = (0..p.interface())
            .map(|k| PortDoc {
                species: species[p.ports().apply(k)].clone(),
                ty: p.port_types().map(|t| t[k].clone()),
            })
            .collect();
        PetriDoc {
            species,
            transitions,
            ports,
        }
    }

    fn build(self) -> Result<OpenPetriNet> {
        let idx = index_of(&self.species, "species")?;
        index_of(
            &self
                .transitions
                .iter()
                .map(|t| t.name.clone())
                .collect::<Vec<_>>(),
            "transition",
        )?;
        let ms = |m: &BTreeMap<String, u32>| -> Result<Multiset> {
            Ok(Multiset::new(
                m.iter()
                    .map(|(n, &k)| Ok((lookup(&idx, n, "species")?, k)))
                    .collect::<Result<Vec<_>>>()?,
            ))
        };
        let transitions = self
            .transitions
            .iter()
            .map(|t| {
                Ok(Transition::new(
                    t.name.clone(),
                    ms(&t.inputs)?,
                    ms(&t.outputs)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let net = PetriNet::new(self.species.clone(), transitions)?;
        let ports = self
            .ports
            .iter()
            .map(|p| lookup(&idx, &p.species, "species"))
            .collect::<Result<Vec<_>>>()?;
        let open = OpenPetriNet::new(net, FinFunction::new(ports, self.species.len())?)?;
        let typed = self.ports.iter().filter(|p| p.ty.is_some()).count();
        if typed == 0 {
            return Ok(open);
        }
        if typed != self.ports.len() {
            return Err(Error::Format(
                "either every port has a type or none does".into(),
            ));
        }
        open.with_port_types(
            self.ports
                .into_iter()
                .map(|p| p.ty.expect("checked"))
                .collect(),
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CellDoc {
    One(String),
    Set(Vec<String>),
    Dist(BTreeMap<String, String>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineDoc {
    effect: String,
    states: Vec<String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    /// One output name per state.
    readout: Vec<String>,
    /// `update[s][i]`: a state name, a list of them, or `{state: "p/q"}`.
    update: Vec<Vec<CellDoc>>,
}

impl MachineDoc {
    fn from_machine(m: &Machine) -> Self {
        let states = m.states().names();
        let iface = m.interface();
        let ni = iface.input.size();
        let cells = |k: usize| -> CellDoc {
            match m.update() {
                Update::Det(t) => CellDoc::One(states[t[k]].clone()),
                Update::Pow(t) => CellDoc::Set(t[k].iter().map(|&s| states[s].clone()).collect()),
                Update::Dist(t) => CellDoc::Dist(
                    t[k].iter()
                        .map(|(s, p)| (states[*s].clone(), p.to_string()))
                        .collect(),
                ),
            }
        };
        MachineDoc {
            effect: m.effect().to_string(),
            states: states.to_vec(),
            inputs: iface.input.names().to_vec(),
            outputs: iface.output.names().to_vec(),
            readout: m
                .readout_table()
                .iter()
                .map(|&o| iface.output.name(o).to_owned())
                .collect(),
            update: (0..states.len())
                .map(|s| (0..ni).map(|i| cells(s * ni + i)).collect())
                .collect(),
        }
    }

    fn build(self) -> Result<Machine> {
        let states =
            FiniteSpace::new(self.states.clone()).map_err(|e| Error::Format(e.to_string()))?;
        let inputs = FiniteSpace::new(self.inputs).map_err(|e| Error::Format(e.to_string()))?;
        let outputs = FiniteSpace::new(self.outputs).map_err(|e| Error::Format(e.to_string()))?;
        let ns = states.size();
        if self.update.len() != ns || self.update.iter().any(|row| row.len() != inputs.size()) {
            return Err(Error::Format(format!(
                "update must have {ns} rows of {} cells",
                inputs.size()
            )));
        }
        let readout = self
            .readout
            .iter()
            .map(|o| outputs.lookup(o))
            .collect::<Result<Vec<_>>>()?;
        let cells = self.update.into_iter().flatten();
        let effect = match self.effect.as_str() {
            "identity" => Effect::Identity,
            "powerset" => Effect::Powerset,
            "dist" => Effect::FiniteDist,
            other => return Err(Error::Format(format!("unknown effect `{other}`"))),
        };
        let bad = |c: &CellDoc| {
            Error::Format(format!(
                "update cell {c:?} does not fit effect `{}`",
                effect
            ))
        };
        let update = match effect {
            Effect::Identity => Update::Det(
                cells
                    .map(|c| match &c {
                        CellDoc::One(s) => states.lookup(s),
                        _ => Err(bad(&c)),
                    })
                    .collect::<Result<_>>()?,
            ),
            Effect::Powerset => Update::Pow(
                cells
                    .map(|c| match &c {
                        CellDoc::Set(ss) => ss.iter().map(|s| states.lookup(s)).collect(),
                        _ => Err(bad(&c)),
                    })
                    .collect::<Result<_>>()?,
            ),
            Effect::FiniteDist => Update::Dist(
                cells
                    .map(|c| match &c {
                        CellDoc::Dist(row) => row
                            .iter()
                            .map(|(s, p)| {
                                let w = BigRational::from_str(p).map_err(|_| {
                                    Error::InvalidDistribution(format!("`{p}` is not a rational"))
                                })?;
                                Ok((states.lookup(s)?, w))
                            })
                            .collect(),
                        _ => Err(bad(&c)),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Machine::new(states, Interface::new(inputs, outputs), readout, update)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedExpr {
    name: String,
    expr: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDoc {
    var: String,
    expr: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeDoc {
    state: Vec<String>,
    #[serde(default)]
    inputs: Vec<String>,
    outputs: Vec<NamedExpr>,
    field: Vec<FieldDoc>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

impl OdeDoc {
    fn from_system(s: &OdeSystem) -> Self {
        OdeDoc {
            state: s.state().to_vec(),
            inputs: s.inputs().to_vec(),
            outputs: s
                .outputs()
                .iter()
                .map(|(n, e)| NamedExpr {
                    name: n.clone(),
                    expr: e.to_string(),
                })
                .collect(),
            field: s
                .state()
                .iter()
                .zip(s.field())
                .map(|(v, e)| FieldDoc {
                    var: v.clone(),
                    expr: e.to_string(),
                })
                .collect(),
            params: BTreeMap::new(),
        }
    }

    fn build(self) -> Result<OdeSystem> {
        let idx = index_of(&self.state, "state variable")?;
        let mut field: Vec<Option<Expr>> = vec![None; self.state.len()];
        for f in &self.field {
            let k = lookup(&idx, &f.var, "state variable")?;
            if field[k].replace(Expr::parse(&f.expr)?).is_some() {
                return Err(Error::Format(format!("field of `{}` given twice", f.var)));
            }
        }
        let field = field
            .into_iter()
            .zip(&self.state)
            .map(|(e, v)| e.ok_or_else(|| Error::Format(format!("no field for `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|o| Ok((o.name.clone(), Expr::parse(&o.expr)?)))
            .collect::<Result<Vec<_>>>()?;
        OdeSystem::with_params(self.state, self.inputs, outputs, field, &self.params)
    }
}

/// A map of open Petri nets, by element names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PetriMapDoc {
    /// Image of each interface port, by position.
    pub interface: Vec<usize>,
    pub species: BTreeMap<String, String>,
    pub transitions: BTreeMap<String, String>,
}

impl PetriMapDoc {
    pub fn from_map(m: &OpenPetriMap, a: &OpenPetriNet, b: &OpenPetriNet) -> Self {
        let (sa, sb) = (
            dedup_names(a.net().species()),
            dedup_names(b.net().species()),
        );
        let tnames = |p: &OpenPetriNet| {
            dedup_names(
                &p.net()
                    .transitions()
                    .iter()
                    .map(|t| t.name.clone())
                    .collect::<Vec<_>>(),
            )
        };
        let (ta, tb) = (tnames(a), tnames(b));
        PetriMapDoc {
            interface: m.interface.table().to_vec(),
            species: sa
                .iter()
                .enumerate()
                .map(|(k, n)| (n.clone(), sb[m.net.species.apply(k)].clone()))
                .collect(),
            transitions: ta
                .iter()
                .enumerate()
                .map(|(k, n)| (n.clone(), tb[m.net.transitions.apply(k)].clone()))
                .collect(),
        }
    }

    /// Resolves names against the source and target nets.
    pub fn resolve(&self, a: &OpenPetriNet, b: &OpenPetriNet) -> Result<OpenPetriMap> {
        let total = |map: &BTreeMap<String, String>,
                     from: &[String],
                     to: &[String],
                     what: &str|
         -> Result<FinFunction> {
            let (fi, ti) = (index_of(from, what)?, index_of(to, what)?);
            if let Some(extra) = map.keys().find(|k| !fi.contains_key(*k)) {
                return Err(Error::UnknownName(format!(
                    "{what} `{extra}` in the source"
                )));
            }
            let table = from
                .iter()
                .map(|n| {
                    let img = map.get(n).ok_or_else(|| {
                        Error::InvalidTable(format!("{what} `{n}` is not mapped"))
                    })?;
                    lookup(&ti, img, what)
                })
                .collect::<Result<Vec<_>>>()?;
            FinFunction::new(table, to.len())
        };
        let tnames = |p: &OpenPetriNet| {
            p.net()
                .transitions()
                .iter()
                .map(|t| t.name.clone())
                .collect::<Vec<_>>()
        };
        Ok(OpenPetriMap {
            interface: FinFunction::new(self.interface.clone(), b.interface())?,
            net: PetriMap {
                species: total(
                    &self.species,
                    a.net().species(),
                    b.net().species(),
                    "species",
                )?,
                transitions: total(&self.transitions, &tnames(a), &tnames(b), "transition")?,
            },
        })
    }
}

/// A map of machines, by element names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineMapDoc {
    /// Image of each source output.
    pub outputs: BTreeMap<String, String>,
    /// `inputs[o][i]`: target input for source output `o` and input `i`.
    pub inputs: BTreeMap<String, BTreeMap<String, String>>,
    pub states: BTreeMap<String, String>,
}

impl MachineMapDoc {
    pub fn from_map(mm: &MachineMap, m1: &Machine, m2: &Machine) -> Self {
        let (i1, i2) = (m1.interface(), m2.interface());
        MachineMapDoc {
            outputs: (0..i1.output.size())
                .map(|o| {
                    (
                        i1.output.name(o).to_owned(),
                        i2.output.name(mm.chart.fwd(o)).to_owned(),
                    )
                })
                .collect(),
            inputs: (0..i1.output.size())
                .map(|o| {
                    (
                        i1.output.name(o).to_owned(),
                        (0..i1.input.size())
                            .map(|i| {
                                (
                                    i1.input.name(i).to_owned(),
                                    i2.input.name(mm.chart.push(o, i)).to_owned(),
                                )
                            })
                            .collect(),
                    )
                })
                .collect(),
            states: (0..m1.states().size())
                .map(|s| {
                    (
                        m1.states().name(s).to_owned(),
                        m2.states().name(mm.state_map.apply(s)).to_owned(),
                    )
                })
                .collect(),
        }
    }

    pub fn resolve(&self, m1: &Machine, m2: &Machine) -> Result<MachineMap> {
        let (i1, i2) = (m1.interface(), m2.interface());
        let get = |map: &BTreeMap<String, String>, key: &str, what: &str| -> Result<String> {
            map.get(key)
                .cloned()
                .ok_or_else(|| Error::InvalidTable(format!("{what} `{key}` is not mapped")))
        };
        let fwd = (0..i1.output.size())
            .map(|o| {
                i2.output
                    .lookup(&get(&self.outputs, i1.output.name(o), "output")?)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut push = Vec::new();
        for o in 0..i1.output.size() {
            let name = i1.output.name(o);
            let row = self.inputs.get(name).ok_or_else(|| {
                Error::InvalidTable(format!("inputs at output `{name}` are not mapped"))
            })?;
            for i in 0..i1.input.size() {
                push.push(i2.input.lookup(&get(row, i1.input.name(i), "input")?)?);
            }
        }
        let states = (0..m1.states().size())
            .map(|s| {
                m2.states()
                    .lookup(&get(&self.states, m1.states().name(s), "state")?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MachineMap {
            chart: Chart::new(i1.clone(), i2.clone(), fwd, push)?,
            state_map: FinFunction::new(states, m2.states().size())?,
        })
    }
}
