//! The operations behind the command-line front end, over a registry of
//! loaded systems, diagrams and maps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde_json::{json, Value};

use crate::dot;
use crate::dsl::{parse_dwd, parse_uwd, print_dwd, print_uwd, Uwd};
use crate::error::{Error, Result, Verdict};
use crate::format::{read_document, write_document, Document, MachineMapDoc, PetriMapDoc};
use crate::lens::DirectedWiringDiagram;
use crate::machine::{check_machine_map, compose_via_dwd, simulate, Machine, Simulation, Trace};
use crate::ode::{dwd_apply_ode, simulate_ode, OdeSystem, OdeTrace};
use crate::petri::{check_open_map, uwd_apply_named, OpenPetriNet};

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Petri(OpenPetriNet),
    Machine(Machine),
    Ode(OdeSystem),
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Petri(_) => "petri",
            System::Machine(_) => "machine",
            System::Ode(_) => "ode",
        }
    }

    pub fn to_document(&self) -> Document {
        match self {
            System::Petri(p) => Document::Petri(p.clone()),
            System::Machine(m) => Document::Machine(m.clone()),
            System::Ode(s) => Document::Ode(s.clone()),
        }
    }

    pub fn write(&self) -> String {
        write_document(&self.to_document())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagram {
    Undirected(Uwd),
    Directed(DirectedWiringDiagram),
}

impl Diagram {
    /// Chooses the grammar by extension: `.uwd` or `.dwd`.
    pub fn parse(text: &str, path: &Path) -> Result<Diagram> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("uwd") => Ok(Diagram::Undirected(parse_uwd(text)?)),
            Some("dwd") => Ok(Diagram::Directed(parse_dwd(text)?)),
            _ => Err(Error::Format(format!(
                "`{}`: diagrams need a .uwd or .dwd extension",
                path.display()
            ))),
        }
    }

    pub fn print(&self) -> String {
        match self {
            Diagram::Undirected(u) => print_uwd(u),
            Diagram::Directed(d) => print_dwd(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapDoc {
    Petri(PetriMapDoc),
    Machine(MachineMapDoc),
}

/// An error tied to the file it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandError {
    pub error: Error,
    pub file: Option<PathBuf>,
}

impl CommandError {
    pub fn to_json(&self) -> String {
        let mut v = json!({"error": self.error.kind(), "message": self.error.to_string()});
        if let Some(f) = &self.file {
            v["file"] = Value::String(f.display().to_string());
        }
        v.to_string()
    }
}

impl From<Error> for CommandError {
    fn from(error: Error) -> Self {
        CommandError { error, file: None }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.file {
            Some(p) => write!(f, "{}: {}", p.display(), self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

pub type CommandResult<T> = std::result::Result<T, CommandError>;

fn in_file<T>(path: &Path, r: Result<T>) -> CommandResult<T> {
    r.map_err(|error| CommandError {
        error,
        file: Some(path.to_owned()),
    })
}

/// Named systems, diagrams and maps; names are unique within each kind.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    systems: BTreeMap<String, System>,
    diagrams: BTreeMap<String, Diagram>,
    maps: BTreeMap<String, MapDoc>,
}

fn insert_unique<T>(map: &mut BTreeMap<String, T>, name: &str, value: T, what: &str) -> Result<()> {
    if map.contains_key(name) {
        return Err(Error::Format(format!("{what} `{name}` is already loaded")));
    }
    map.insert(name.to_owned(), value);
    Ok(())
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, name: &str, what: &str) -> Result<&'a T> {
    map.get(name)
        .ok_or_else(|| Error::UnknownName(format!("no {what} named `{name}`")))
}

impl Workspace {
    pub fn new() -> Self {
        Workspace::default()
    }

    pub fn add_system(&mut self, name: &str, s: System) -> Result<()> {
        insert_unique(&mut self.systems, name, s, "system")
    }

    pub fn add_diagram(&mut self, name: &str, d: Diagram) -> Result<()> {
        insert_unique(&mut self.diagrams, name, d, "diagram")
    }

    pub fn add_map(&mut self, name: &str, m: MapDoc) -> Result<()> {
        insert_unique(&mut self.maps, name, m, "map")
    }

    pub fn system(&self, name: &str) -> Result<&System> {
        lookup(&self.systems, name, "system")
    }

    pub fn diagram(&self, name: &str) -> Result<&Diagram> {
        lookup(&self.diagrams, name, "diagram")
    }

    pub fn map(&self, name: &str) -> Result<&MapDoc> {
        lookup(&self.maps, name, "map")
    }

    pub fn contains(&self, name: &str) -> bool {
        self.systems.contains_key(name)
            || self.diagrams.contains_key(name)
            || self.maps.contains_key(name)
    }

    /// Loads a file under its path as name; loading the same path twice is
    /// a no-op. Diagrams are recognised by
    /// extension, everything else is read as a JSON document.
    pub fn load(&mut self, path: &Path) -> CommandResult<String> {
        let name = path.display().to_string();
        if self.contains(&name) {
            return Ok(name);
        }
        let text = in_file(path, std::fs::read_to_string(path).map_err(Error::from))?;
        if matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("uwd" | "dwd")
        ) {
            let d = in_file(path, Diagram::parse(&text, path))?;
            in_file(path, self.add_diagram(&name, d))?;
            return Ok(name);
        }
        let added = match in_file(path, read_document(&text))? {
            Document::Petri(p) => self.add_system(&name, System::Petri(p)),
            Document::Machine(m) => self.add_system(&name, System::Machine(m)),
            Document::Ode(s) => self.add_system(&name, System::Ode(s)),
            Document::PetriMap(m) => self.add_map(&name, MapDoc::Petri(m)),
            Document::MachineMap(m) => self.add_map(&name, MapDoc::Machine(m)),
        };
        in_file(path, added)?;
        Ok(name)
    }

    /// Applies a diagram to systems, one per box in order: undirected
    /// diagrams to open Petri nets, directed ones to machines or ODEs.
    pub fn compose(&self, diagram: &str, systems: &[&str]) -> Result<System> {
        let d = self.diagram(diagram)?;
        let parts = systems
            .iter()
            .map(|n| self.system(n))
            .collect::<Result<Vec<_>>>()?;
        let mismatch = |want: &str| {
            let kinds: Vec<&str> = parts.iter().map(|p| p.kind()).collect();
            Error::KindMismatch(format!(
                "diagram `{diagram}` composes {want}, got {kinds:?}"
            ))
        };
        match d {
            Diagram::Undirected(u) => {
                let nets = parts
                    .iter()
                    .map(|p| match p {
                        System::Petri(n) => Ok(n.clone()),
                        _ => Err(mismatch("open Petri nets")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if nets.len() != u.boxes.len() {
                    return Err(Error::ArityMismatch(format!(
                        "diagram has {} boxes, {} systems given",
                        u.boxes.len(),
                        nets.len()
                    )));
                }
                let composite = uwd_apply_named(&u.cospan()?, &nets, &u.junction_names())?;
                Ok(System::Petri(composite))
            }
            Diagram::Directed(dwd) => {
                if parts.iter().all(|p| matches!(p, System::Machine(_))) && !parts.is_empty() {
                    let ms: Vec<Machine> = parts
                        .iter()
                        .map(|p| match p {
                            System::Machine(m) => m.clone(),
                            _ => unreachable!(),
                        })
                        .collect();
                    Ok(System::Machine(compose_via_dwd(dwd, &ms)?))
                } else if parts.iter().all(|p| matches!(p, System::Ode(_))) {
                    let odes: Vec<OdeSystem> = parts
                        .iter()
                        .map(|p| match p {
                            System::Ode(s) => s.clone(),
                            _ => unreachable!(),
                        })
                        .collect();
                    Ok(System::Ode(dwd_apply_ode(dwd, &odes)?))
                } else {
                    Err(mismatch("machines or ODE systems (all of one kind)"))
                }
            }
        }
    }

    pub fn simulate(&self, system: &str, opts: &SimulateOptions) -> Result<SimulationReport> {
        match self.system(system)? {
            System::Machine(m) => simulate_machine(m, opts),
            System::Ode(s) => simulate_ode_system(s, opts),
            System::Petri(_) => Err(Error::KindMismatch(
                "Petri nets have no built-in dynamics to simulate".into(),
            )),
        }
    }

    pub fn check_map(&self, map: &str, from: &str, to: &str) -> Result<Verdict> {
        match (self.map(map)?, self.system(from)?, self.system(to)?) {
            (MapDoc::Petri(doc), System::Petri(a), System::Petri(b)) => {
                check_open_map(&doc.resolve(a, b)?, a, b)
            }
            (MapDoc::Machine(doc), System::Machine(a), System::Machine(b)) => {
                check_machine_map(&doc.resolve(a, b)?, a, b)
            }
            (m, a, b) => Err(Error::KindMismatch(format!(
                "a {} map cannot relate a {} to a {}",
                match m {
                    MapDoc::Petri(_) => "petri",
                    MapDoc::Machine(_) => "machine",
                },
                a.kind(),
                b.kind()
            ))),
        }
    }

    pub fn render(&self, name: &str) -> Result<String> {
        if let Some(s) = self.systems.get(name) {
            return Ok(match s {
                System::Petri(p) => dot::petri_to_dot(p),
                System::Machine(m) => dot::machine_to_dot(m),
                System::Ode(o) => dot::ode_to_dot(o),
            });
        }
        match self.diagram(name)? {
            Diagram::Undirected(u) => Ok(dot::uwd_to_dot(u)),
            Diagram::Directed(d) => Ok(dot::dwd_to_dot(d)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulateOptions {
    /// A state name for machines, comma-separated numbers for ODEs.
    pub init: String,
    /// Machines: input names separated by commas or newlines. ODEs: input
    /// vectors of comma-separated numbers, separated by `;` or newlines.
    pub inputs: String,
    /// Defaults to the number of inputs given; the last input is held.
    pub steps: Option<usize>,
    /// Euler step size (ODEs only); defaults to 0.01.
    pub h: Option<f64>,
}

pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub enum SimulationReport {
    Machine {
        machine: Machine,
        result: Simulation,
    },
    Ode {
        state: Vec<String>,
        outputs: Vec<String>,
        trace: OdeTrace,
    },
}

fn split_list<'a>(s: &'a str, seps: &[char]) -> Vec<&'a str> {
    s.split(seps)
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect()
}

fn hold_last<T: Clone>(given: Vec<T>, steps: usize, fallback: Option<T>) -> Result<Vec<T>> {
    if steps == 0 {
        return Ok(vec![]);
    }
    let last = given.last().cloned().or(fallback).ok_or_else(|| {
        Error::ArityMismatch(format!("{steps} steps requested but no inputs given"))
    })?;
    let mut out = given;
    out.truncate(steps);
    out.resize(steps, last);
    Ok(out)
}

fn simulate_machine(m: &Machine, opts: &SimulateOptions) -> Result<SimulationReport> {
    let init = m.states().lookup(opts.init.trim())?;
    let names = split_list(&opts.inputs, &[',', '\n']);
    let given = names
        .iter()
        .map(|n| m.interface().input.lookup(n))
        .collect::<Result<Vec<_>>>()?;
    // A machine with a single input needs no input list.
    let only = (m.interface().input.size() == 1).then_some(0);
    let steps = opts.steps.unwrap_or(given.len());
    let inputs = hold_last(given, steps, only)?;
    Ok(SimulationReport::Machine {
        machine: m.clone(),
        result: simulate(m, init, &inputs)?,
    })
}

fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    split_list(s, &[','])
        .into_iter()
        .map(|x| {
            x.parse::<f64>()
                .map_err(|_| Error::Format(format!("`{x}` is not a number")))
        })
        .collect()
}

fn simulate_ode_system(s: &OdeSystem, opts: &SimulateOptions) -> Result<SimulationReport> {
    let init = parse_numbers(&opts.init)?;
    let given = split_list(&opts.inputs, &[';', '\n'])
        .into_iter()
        .map(parse_numbers)
        .collect::<Result<Vec<_>>>()?;
    let steps = opts.steps.unwrap_or(given.len());
    let fallback = (s.n_in() == 0).then(Vec::new);
    let inputs = hold_last(given, steps, fallback)?;
    let trace = simulate_ode(s, opts.h.unwrap_or(DEFAULT_STEP), steps, &init, &inputs)?;
    Ok(SimulationReport::Ode {
        state: s.state().to_vec(),
        outputs: s.outputs().iter().map(|(n, _)| n.clone()).collect(),
        trace,
    })
}

fn trace_json(m: &Machine, t: &Trace) -> Value {
    let iface = m.interface();
    json!({
        "inputs": t.inputs.iter().map(|&i| iface.input.name(i)).collect::<Vec<_>>(),
        "states": t.states.iter().map(|&s| m.states().name(s)).collect::<Vec<_>>(),
        "outputs": t.outputs.iter().map(|&o| iface.output.name(o)).collect::<Vec<_>>(),
        "truncated": t.truncated,
    })
}

fn prob(p: &BigRational) -> String {
    p.to_string()
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        let v = match self {
            SimulationReport::Machine { machine, result } => match result {
                Simulation::Deterministic(t) => {
                    json!({"kind": "trace", "trace": trace_json(machine, t)})
                }
                Simulation::Nondeterministic(ts) => json!({
                    "kind": "traces",
                    "traces": ts.iter().map(|t| trace_json(machine, t)).collect::<Vec<_>>(),
                }),
                Simulation::Probabilistic(ts) => json!({
                    "kind": "distribution",
                    "traces": ts
                        .iter()
                        .map(|(t, p)| {
                            let mut v = trace_json(machine, t);
                            v["probability"] = Value::String(prob(p));
                            v
                        })
                        .collect::<Vec<_>>(),
                }),
            },
            SimulationReport::Ode {
                state,
                outputs,
                trace,
            } => json!({
                "kind": "ode-trace",
                "state_names": state,
                "output_names": outputs,
                "times": trace.times,
                "states": trace.states,
                "outputs": trace.outputs,
            }),
        };
        let mut v = v;
        v["format"] = json!(crate::format::FORMAT_VERSION);
        let mut out = serde_json::to_string_pretty(&v).expect("serialises");
        out.push('\n');
        out
    }

    /// One row per step; nondeterministic runs are numbered.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            SimulationReport::Machine { machine, result } => {
                let iface = machine.interface();
                let rows = |out: &mut String, prefix: &str, t: &Trace, suffix: &str| {
                    for k in 0..t.states.len() {
                        let input = t.inputs.get(k).map_or("", |&i| iface.input.name(i));
                        out.push_str(&format!(
                            "{prefix}{k},{input},{},{}{suffix}\n",
                            machine.states().name(t.states[k]),
                            iface.output.name(t.outputs[k])
                        ));
                    }
                };
                match result {
                    Simulation::Deterministic(t) => {
                        out.push_str("step,input,state,output\n");
                        rows(&mut out, "", t, "");
                    }
                    Simulation::Nondeterministic(ts) => {
                        out.push_str("trace,step,input,state,output\n");
                        for (n, t) in ts.iter().enumerate() {
                            rows(&mut out, &format!("{n},"), t, "");
                        }
                    }
                    Simulation::Probabilistic(ts) => {
                        out.push_str("trace,step,input,state,output,probability\n");
                        for (n, (t, p)) in ts.iter().enumerate() {
                            rows(&mut out, &format!("{n},"), t, &format!(",{}", prob(p)));
                        }
                    }
                }
            }
            SimulationReport::Ode {
                state,
                outputs,
                trace,
            } => {
                let header: Vec<String> = std::iter::once("t".to_owned())
                    .chain(state.iter().cloned())
                    .chain(outputs.iter().map(|o| format!("out:{o}")))
                    .collect();
                out.push_str(&header.join(","));
                out.push('\n');
                for k in 0..trace.times.len() {
                    let row: Vec<String> = std::iter::once(trace.times[k])
                        .chain(trace.states[k].iter().copied())
                        .chain(trace.outputs[k].iter().copied())
                        .map(|x| format!("{x:?}"))
                        .collect();
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// JSON report for `check-map`.
pub fn verdict_json(v: &Verdict) -> String {
    let v = match v {
        Verdict::Pass => json!({"result": "pass"}),
        Verdict::Fail(why) => json!({"result": "fail", "reason": why}),
    };
    format!("{v}\n")
}
