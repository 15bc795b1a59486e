#![allow(dead_code)]

use std::path::PathBuf;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dots::expr::{BinOp, Expr};
use dots::finset::FinFunction;
use dots::lens::{
    DirectedWiringDiagram, DwdBox, FiniteSpace, Interface, Lens, Port, PortKind, Sink, Source,
    TypeDecl, Wire,
};
use dots::machine::{Effect, Machine, Update};
use dots::ode::OdeSystem;
use dots::wiring::Cospan;

pub const DEFAULT_SEED: u64 = 0x00d0_75ee_d5ee_d001;

/// `DOTS_SEED` overrides the default so a failing run can be replayed.
pub fn seed() -> u64 {
    std::env::var("DOTS_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Independent streams per test so adding draws in one does not shift another.
pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed());
    r.set_stream(stream);
    r
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn fin_fn(r: &mut impl Rng, dom: usize, cod: usize) -> FinFunction {
    assert!(cod > 0 || dom == 0);
    FinFunction::new((0..dom).map(|_| r.gen_range(0..cod)).collect(), cod).unwrap()
}

/// A cospan `m -> j <- n` with `j` at most `max_j` (and nonempty when needed).
pub fn cospan(r: &mut impl Rng, m: usize, n: usize, max_j: usize) -> Cospan {
    let lo = usize::from(m + n > 0);
    let j = r.gen_range(lo..=max_j.max(lo));
    Cospan::new(fin_fn(r, m, j), fin_fn(r, n, j)).unwrap()
}

pub fn space(r: &mut impl Rng, max: usize) -> FiniteSpace {
    FiniteSpace::range(r.gen_range(1..=max))
}

pub fn interface(r: &mut impl Rng, max: usize) -> Interface {
    Interface::new(space(r, max), space(r, max))
}

pub fn lens(r: &mut impl Rng, source: &Interface, target: &Interface) -> Lens {
    let (no, ni) = (source.output.size(), target.input.size());
    let fwd = (0..no)
        .map(|_| r.gen_range(0..target.output.size()))
        .collect();
    let bwd = (0..no * ni)
        .map(|_| r.gen_range(0..source.input.size()))
        .collect();
    Lens::new(source.clone(), target.clone(), fwd, bwd).unwrap()
}

fn subset(r: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).filter(|_| r.gen_bool(0.4)).collect()
}

fn dist_row(r: &mut impl Rng, n: usize) -> Vec<(usize, BigRational)> {
    let support: Vec<usize> = {
        let s = subset(r, n);
        if s.is_empty() {
            vec![r.gen_range(0..n)]
        } else {
            s
        }
    };
    let weights: Vec<i64> = support.iter().map(|_| r.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    support
        .into_iter()
        .zip(weights)
        .map(|(s, w)| (s, BigRational::new(w.into(), total.into())))
        .collect()
}

pub fn machine(r: &mut impl Rng, effect: Effect, iface: &Interface, max_states: usize) -> Machine {
    let n = r.gen_range(1..=max_states);
    let cells = n * iface.input.size();
    let readout = (0..n)
        .map(|_| r.gen_range(0..iface.output.size()))
        .collect();
    let update = match effect {
        Effect::Identity => Update::Det((0..cells).map(|_| r.gen_range(0..n)).collect()),
        Effect::Powerset => Update::Pow((0..cells).map(|_| subset(r, n)).collect()),
        Effect::FiniteDist => Update::Dist((0..cells).map(|_| dist_row(r, n)).collect()),
    };
    Machine::new(FiniteSpace::range(n), iface.clone(), readout, update).unwrap()
}

/// Polynomial of degree at most 2 in `vars`, with small nonzero coefficients.
pub fn polynomial(r: &mut impl Rng, vars: &[String]) -> Expr {
    fn coef(r: &mut impl Rng) -> Expr {
        Expr::num(f64::from(r.gen_range(-100..=100)) / 50.0)
    }
    let mut e = coef(r);
    for _ in 0..r.gen_range(1..=3) {
        let mut term = coef(r);
        for _ in 0..r.gen_range(1..=2) {
            if let Some(v) = vars.choose(r) {
                term = Expr::bin(BinOp::Mul, term, Expr::var(v.clone()));
            }
        }
        e = Expr::bin(BinOp::Add, e, term);
    }
    e
}

/// A random real-typed diagram of 2 to 4 boxes with random systems to fill
/// it. Inner inputs may be fed by any box output (feedback included) or an
/// outer input; outer outputs are fed by box outputs.
pub fn ode_diagram(r: &mut impl Rng) -> (DirectedWiringDiagram, Vec<OdeSystem>) {
    let port = |name: String| Port::new(name, "R");
    let nboxes = r.gen_range(2..=4);
    let mut boxes = Vec::new();
    let mut systems = Vec::new();
    for b in 0..nboxes {
        let (ns, ni, no) = (r.gen_range(1..=3), r.gen_range(0..=2), r.gen_range(1..=2));
        let state: Vec<String> = (0..ns).map(|k| format!("x{k}")).collect();
        let inputs: Vec<String> = (0..ni).map(|k| format!("u{k}")).collect();
        let vars: Vec<String> = state.iter().chain(&inputs).cloned().collect();
        let field = (0..ns).map(|_| polynomial(r, &vars)).collect();
        let outputs = (0..no)
            .map(|k| (format!("y{k}"), polynomial(r, &state)))
            .collect();
        systems.push(OdeSystem::new(state, inputs.clone(), outputs, field).unwrap());
        boxes.push(DwdBox {
            name: format!("b{b}"),
            inputs: inputs.into_iter().map(port).collect(),
            outputs: (0..no).map(|k| port(format!("y{k}"))).collect(),
        });
    }
    let outer = DwdBox {
        name: "outer".into(),
        inputs: (0..r.gen_range(0..=2))
            .map(|k| port(format!("v{k}")))
            .collect(),
        outputs: (0..r.gen_range(1..=2))
            .map(|k| port(format!("w{k}")))
            .collect(),
    };
    let inner_sources: Vec<Source> = boxes
        .iter()
        .enumerate()
        .flat_map(|(ibox, b)| (0..b.outputs.len()).map(move |port| Source::Inner { ibox, port }))
        .collect();
    let all_sources: Vec<Source> = (0..outer.inputs.len())
        .map(Source::Outer)
        .chain(inner_sources.iter().copied())
        .collect();
    let mut wires = Vec::new();
    for (ibox, b) in boxes.iter().enumerate() {
        for port in 0..b.inputs.len() {
            wires.push(Wire {
                src: *all_sources.choose(r).unwrap(),
                dst: Sink::Inner { ibox, port },
            });
        }
    }
    for p in 0..outer.outputs.len() {
        wires.push(Wire {
            src: *inner_sources.choose(r).unwrap(),
            dst: Sink::Outer(p),
        });
    }
    let d = DirectedWiringDiagram {
        types: vec![TypeDecl {
            name: "R".into(),
            kind: PortKind::Real,
        }],
        boxes,
        outer,
        wires,
    };
    (d, systems)
}

/// Boxes `first` and `second` with one `Bit` in and out, wired in series;
/// outer outputs are `(hi, lo)` from (second, first).
pub fn series_dwd() -> DirectedWiringDiagram {
    dots::dsl::parse_dwd(&std::fs::read_to_string(fixture("series.dwd")).unwrap()).unwrap()
}
