//! Graphviz renderings. Node ids are positional, so output is stable.

use std::fmt::Write;

use crate::dsl::Uwd;
use crate::lens::{DirectedWiringDiagram, Sink, Source};
use crate::machine::{Machine, Update};
use crate::ode::OdeSystem;
use crate::petri::OpenPetriNet;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Species as circles, transitions as squares, ports as plain labels.
pub fn petri_to_dot(p: &OpenPetriNet) -> String {
    let net = p.net();
    let mut out = String::from("digraph petri {\n  rankdir=LR;\n");
    for (k, s) in net.species().iter().enumerate() {
        writeln!(out, "  s{k} [shape=circle, label={}];", quote(s)).unwrap();
    }
    for (k, t) in net.transitions().iter().enumerate() {
        writeln!(out, "  t{k} [shape=square, label={}];", quote(&t.name)).unwrap();
        let arc = |out: &mut String, from: String, to: String, n: u32| {
            let label = if n > 1 {
                format!(" [label=\"{n}\"]")
            } else {
                String::new()
            };
            writeln!(out, "  {from} -> {to}{label};").unwrap();
        };
        for &(s, n) in t.src.entries() {
            arc(&mut out, format!("s{s}"), format!("t{k}"), n);
        }
        for &(s, n) in t.tgt.entries() {
            arc(&mut out, format!("t{k}"), format!("s{s}"), n);
        }
    }
    for k in 0..p.interface() {
        let label = match p.port_types() {
            Some(ts) => format!("{k}: {}", ts[k]),
            None => k.to_string(),
        };
        writeln!(out, "  p{k} [shape=plaintext, label={}];", quote(&label)).unwrap();
        writeln!(
            out,
            "  p{k} -> s{} [style=dashed, arrowhead=none];",
            p.ports().apply(k)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// States as circles labelled `state / output`, one edge per transition.
pub fn machine_to_dot(m: &Machine) -> String {
    let iface = m.interface();
    let mut out = String::from("digraph machine {\n  rankdir=LR;\n");
    for s in 0..m.states().size() {
        let label = format!(
            "{} / {}",
            m.states().name(s),
            iface.output.name(m.readout(s))
        );
        writeln!(out, "  s{s} [shape=circle, label={}];", quote(&label)).unwrap();
    }
    let ni = iface.input.size();
    for s in 0..m.states().size() {
        for i in 0..ni {
            let input = iface.input.name(i);
            match m.update() {
                Update::Dist(rows) => {
                    for (t, p) in &rows[s * ni + i] {
                        writeln!(
                            out,
                            "  s{s} -> s{t} [label={}];",
                            quote(&format!("{input} ({p})"))
                        )
                        .unwrap();
                    }
                }
                _ => {
                    for t in m.successors(s, i) {
                        writeln!(out, "  s{s} -> s{t} [label={}];", quote(input)).unwrap();
                    }
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Variables as ellipses; an edge `a -> x` when `a` occurs in the
/// derivative of `x` or in output `x`.
pub fn ode_to_dot(sys: &OdeSystem) -> String {
    let mut out = String::from("digraph ode {\n  rankdir=LR;\n");
    let node = |name: &str| quote(name);
    for x in sys.state() {
        writeln!(out, "  {} [shape=ellipse];", node(x)).unwrap();
    }
    for i in sys.inputs() {
        writeln!(out, "  {} [shape=invtriangle];", node(i)).unwrap();
    }
    for (o, _) in sys.outputs() {
        writeln!(out, "  {} [shape=triangle];", node(&format!("out:{o}"))).unwrap();
    }
    for (x, e) in sys.state().iter().zip(sys.field()) {
        for v in e.free_vars() {
            writeln!(out, "  {} -> {};", node(&v), node(x)).unwrap();
        }
    }
    for (o, e) in sys.outputs() {
        for v in e.free_vars() {
            writeln!(
                out,
                "  {} -> {} [style=dashed];",
                node(&v),
                node(&format!("out:{o}"))
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

/// Junctions as circles, boxes as rectangles, ports as edge labels.
pub fn uwd_to_dot(u: &Uwd) -> String {
    let mut out = String::from("graph uwd {\n");
    for (k, (name, _)) in u.junctions.iter().enumerate() {
        writeln!(out, "  j{k} [shape=circle, label={}];", quote(name)).unwrap();
    }
    for (b, bx) in u.boxes.iter().enumerate() {
        writeln!(out, "  b{b} [shape=box, label={}];", quote(&bx.name)).unwrap();
        for p in &bx.ports {
            writeln!(out, "  b{b} -- j{} [label={}];", p.junction, quote(&p.name)).unwrap();
        }
    }
    for p in &u.outer {
        writeln!(
            out,
            "  {} [shape=plaintext];",
            quote(&format!("outer.{}", p.name))
        )
        .unwrap();
        writeln!(
            out,
            "  {} -- j{} [style=dashed];",
            quote(&format!("outer.{}", p.name)),
            p.junction
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// Boxes as records of their ports; wires as edges.
pub fn dwd_to_dot(d: &DirectedWiringDiagram) -> String {
    let mut out = String::from("digraph dwd {\n  rankdir=LR;\n");
    for (b, bx) in d.boxes.iter().enumerate() {
        writeln!(out, "  b{b} [shape=box, label={}];", quote(&bx.name)).unwrap();
    }
    for (k, p) in d.outer.inputs.iter().enumerate() {
        writeln!(out, "  in{k} [shape=plaintext, label={}];", quote(&p.name)).unwrap();
    }
    for (k, p) in d.outer.outputs.iter().enumerate() {
        writeln!(out, "  out{k} [shape=plaintext, label={}];", quote(&p.name)).unwrap();
    }
    for w in &d.wires {
        let (from, tail) = match w.src {
            Source::Outer(p) => (format!("in{p}"), String::new()),
            Source::Inner { ibox, port } => {
                (format!("b{ibox}"), d.boxes[ibox].outputs[port].name.clone())
            }
        };
        let (to, head) = match w.dst {
            Sink::Outer(p) => (format!("out{p}"), String::new()),
            Sink::Inner { ibox, port } => {
                (format!("b{ibox}"), d.boxes[ibox].inputs[port].name.clone())
            }
        };
        writeln!(
            out,
            "  {from} -> {to} [taillabel={}, headlabel={}];",
            quote(&tail),
            quote(&head)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
