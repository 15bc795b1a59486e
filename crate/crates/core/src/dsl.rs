//! Text formats for wiring diagrams.
//!
//! Undirected diagrams:
//!
//! ```text
//! junction S: Pop            # type is optional, but all or none
//! junction I: Pop
//! box infection(s: Pop = S, i = I)
//! outer(s = S, i = I)
//! ```
//!
//! Directed diagrams:
//!
//! ```text
//! type Bit = {0, 1}
//! type Real = real
//! box counter in(a: Bit) out(b: Bit)
//! outer in(a: Bit) out(b: Bit)
//! outer.a -> counter.a
//! counter.b -> outer.b
//! ```
//!
//! One declaration per line; `#` starts a comment. Boxes are numbered in
//! declaration order.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::finset::{FinFunction, TypedFinSet};
use crate::lens::{
    DirectedWiringDiagram, DwdBox, FiniteSpace, Port, PortKind, Sink, Source, TypeDecl, Wire,
};
use crate::wiring::Cospan;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Punct(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize_line(text: &str, line: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let column = k + 1;
        if c == '#' {
            break;
        } else if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let start = k;
            while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..k].iter().collect()),
                line,
                column,
            });
        } else if c == '-' && chars.get(k + 1) == Some(&'>') {
            out.push(Token {
                tok: Tok::Arrow,
                line,
                column,
            });
            k += 2;
        } else if "(){},:=.".contains(c) {
            out.push(Token {
                tok: Tok::Punct(c),
                line,
                column,
            });
            k += 1;
        } else {
            return Err(syntax(line, column, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl Cursor {
    fn new(text: &str, line: usize) -> Result<Self> {
        Ok(Cursor {
            toks: tokenize_line(text, line)?,
            pos: 0,
            line,
            end_column: text.chars().count() + 1,
        })
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or((self.line, self.end_column), |t| (t.line, t.column))
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn word(&mut self, what: &str) -> Result<(String, usize, usize)> {
        match self.toks.get(self.pos) {
            Some(Token {
                tok: Tok::Word(w),
                line,
                column,
            }) => {
                let r = (w.clone(), *line, *column);
                self.pos += 1;
                Ok(r)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    /// `( item {, item} )`, possibly empty.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l))
        .filter(|(_, l)| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('#')
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UwdPort {
    pub name: String,
    /// Written type annotation, if any; must match the junction's type.
    pub ty: Option<String>,
    pub junction: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UwdBox {
    pub name: String,
    pub ports: Vec<UwdPort>,
}

/// A parsed undirected wiring diagram with its names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Uwd {
    pub junctions: Vec<(String, Option<String>)>,
    pub boxes: Vec<UwdBox>,
    pub outer: Vec<UwdPort>,
}

impl Uwd {
    pub fn junction_names(&self) -> Vec<String> {
        self.junctions.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Inner ports (boxes in order) and outer ports mapped into junctions.
    pub fn cospan(&self) -> Result<Cospan> {
        let n = self.junctions.len();
        let left = FinFunction::new(
            self.boxes
                .iter()
                .flat_map(|b| b.ports.iter().map(|p| p.junction))
                .collect(),
            n,
        )?;
        let right = FinFunction::new(self.outer.iter().map(|p| p.junction).collect(), n)?;
        let types: Option<Vec<&str>> = self.junctions.iter().map(|(_, t)| t.as_deref()).collect();
        match types {
            Some(ts) if n > 0 => Cospan::typed(left, right, TypedFinSet::from_names(&ts)),
            _ => Cospan::new(left, right),
        }
    }

    /// Builds named diagram text data from a cospan, inventing names.
    pub fn from_cospan(c: &Cospan, box_arities: &[usize]) -> Result<Uwd> {
        if box_arities.iter().sum::<usize>() != c.inner() {
            return Err(Error::ArityMismatch(format!(
                "box arities sum to {}, cospan has {} inner ports",
                box_arities.iter().sum::<usize>(),
                c.inner()
            )));
        }
        let ty = |j: usize| c.junction_types().map(|t| t.type_of(j).to_owned());
        let mut next = 0;
        let boxes = box_arities
            .iter()
            .enumerate()
            .map(|(b, &k)| {
                let ports = (0..k)
                    .map(|p| UwdPort {
                        name: format!("p{}", p + 1),
                        ty: None,
                        junction: c.left().apply(next + p),
                    })
                    .collect();
                next += k;
                UwdBox {
                    name: format!("b{}", b + 1),
                    ports,
                }
            })
            .collect();
        Ok(Uwd {
            junctions: (0..c.junctions())
                .map(|j| (format!("j{}", j + 1), ty(j)))
                .collect(),
            boxes,
            outer: (0..c.outer())
                .map(|p| UwdPort {
                    name: format!("p{}", p + 1),
                    ty: None,
                    junction: c.right().apply(p),
                })
                .collect(),
        })
    }
}

fn uwd_port(
    cur: &mut Cursor,
    junctions: &HashMap<String, usize>,
    jtypes: &[(String, Option<String>)],
) -> Result<UwdPort> {
    let (name, ..) = cur.word("a port name")?;
    let ty = if cur.eat(':') {
        Some(cur.word("a type name")?)
    } else {
        None
    };
    cur.expect('=')?;
    let (jname, line, column) = cur.word("a junction name")?;
    let junction = *junctions.get(&jname).ok_or(Error::UnknownJunction {
        name: jname.clone(),
        line,
        column,
    })?;
    if let Some((t, tl, tc)) = &ty {
        match &jtypes[junction].1 {
            Some(jt) if jt == t => {}
            Some(jt) => {
                return Err(Error::TypeClash(format!(
                "port `{name}` at {tl}:{tc} has type `{t}` but junction `{jname}` has type `{jt}`"
            )))
            }
            None => {
                return Err(Error::TypeClash(format!(
                    "port `{name}` at {tl}:{tc} has type `{t}` but junction `{jname}` is untyped"
                )))
            }
        }
    }
    Ok(UwdPort {
        name,
        ty: ty.map(|t| t.0),
        junction,
    })
}

fn check_unique<'a>(
    names: impl IntoIterator<Item = &'a str>,
    what: &str,
    line: usize,
) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(syntax(line, 1, format!("duplicate {what} `{n}`")));
        }
    }
    Ok(())
}

pub fn parse_uwd(text: &str) -> Result<Uwd> {
    let mut uwd = Uwd {
        junctions: vec![],
        boxes: vec![],
        outer: vec![],
    };
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen_outer = false;
    let mut typed: Option<bool> = None;
    for (line, src) in lines(text) {
        let mut cur = Cursor::new(src, line)?;
        let (kw, ..) = cur.word("`junction`, `box` or `outer`")?;
        match kw.as_str() {
            "junction" => {
                let (name, l, c) = cur.word("a junction name")?;
                let ty = if cur.eat(':') {
                    Some(cur.word("a type name")?.0)
                } else {
                    None
                };
                if *typed.get_or_insert(ty.is_some()) != ty.is_some() {
                    return Err(syntax(
                        l,
                        c,
                        "either every junction has a type or none does",
                    ));
                }
                if index.insert(name.clone(), uwd.junctions.len()).is_some() {
                    return Err(syntax(l, c, format!("junction `{name}` declared twice")));
                }
                uwd.junctions.push((name, ty));
            }
            "box" => {
                let (name, ..) = cur.word("a box name")?;
                if uwd.boxes.iter().any(|b| b.name == name) {
                    return Err(syntax(line, 1, format!("box `{name}` declared twice")));
                }
                let ports = cur.list(|c| uwd_port(c, &index, &uwd.junctions))?;
                check_unique(ports.iter().map(|p| p.name.as_str()), "port", line)?;
                uwd.boxes.push(UwdBox { name, ports });
            }
            "outer" => {
                if seen_outer {
                    return Err(syntax(line, 1, "`outer` declared twice"));
                }
                seen_outer = true;
                uwd.outer = cur.list(|c| uwd_port(c, &index, &uwd.junctions))?;
                check_unique(
                    uwd.outer.iter().map(|p| p.name.as_str()),
                    "outer port",
                    line,
                )?;
            }
            other => return Err(syntax(line, 1, format!("unknown declaration `{other}`"))),
        }
        cur.finish()?;
    }
    uwd.cospan()?;
    Ok(uwd)
}

pub fn print_uwd(u: &Uwd) -> String {
    let mut out = String::new();
    for (name, ty) in &u.junctions {
        match ty {
            Some(t) => out.push_str(&format!("junction {name}: {t}\n")),
            None => out.push_str(&format!("junction {name}\n")),
        }
    }
    let ports = |ps: &[UwdPort]| {
        ps.iter()
            .map(|p| {
                let j = &u.junctions[p.junction].0;
                match &p.ty {
                    Some(t) => format!("{}: {t} = {j}", p.name),
                    None => format!("{} = {j}", p.name),
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    for b in &u.boxes {
        out.push_str(&format!("box {}({})\n", b.name, ports(&b.ports)));
    }
    out.push_str(&format!("outer({})\n", ports(&u.outer)));
    out
}

fn dwd_ports(cur: &mut Cursor, types: &[TypeDecl], line: usize) -> Result<Vec<Port>> {
    let ports = cur.list(|c| {
        let (name, ..) = c.word("a port name")?;
        c.expect(':')?;
        let (ty, l, col) = c.word("a type name")?;
        if !types.iter().any(|t| t.name == ty) {
            return Err(syntax(l, col, format!("unknown type `{ty}`")));
        }
        Ok(Port { name, ty })
    })?;
    check_unique(ports.iter().map(|p| p.name.as_str()), "port", line)?;
    Ok(ports)
}

fn dwd_box_body(
    cur: &mut Cursor,
    types: &[TypeDecl],
    line: usize,
) -> Result<(Vec<Port>, Vec<Port>)> {
    cur.keyword("in")?;
    let inputs = dwd_ports(cur, types, line)?;
    cur.keyword("out")?;
    let outputs = dwd_ports(cur, types, line)?;
    Ok((inputs, outputs))
}

fn endpoint(cur: &mut Cursor) -> Result<(String, String, usize, usize)> {
    let (b, line, column) = cur.word("a box name or `outer`")?;
    cur.expect('.')?;
    let (p, ..) = cur.word("a port name")?;
    Ok((b, p, line, column))
}

pub fn parse_dwd(text: &str) -> Result<DirectedWiringDiagram> {
    let mut d = DirectedWiringDiagram {
        types: vec![],
        boxes: vec![],
        outer: DwdBox {
            name: "outer".into(),
            inputs: vec![],
            outputs: vec![],
        },
        wires: vec![],
    };
    let mut seen_outer = false;
    let mut fed: HashMap<Sink, usize> = HashMap::new();
    for (line, src) in lines(text) {
        let mut cur = Cursor::new(src, line)?;
        match cur.peek() {
            Some(Tok::Word(w)) if w == "type" => {
                cur.pos += 1;
                let (name, l, c) = cur.word("a type name")?;
                cur.expect('=')?;
                let kind = if cur.eat('{') {
                    let mut values = Vec::new();
                    if !cur.eat('}') {
                        loop {
                            values.push(cur.word("a value")?.0);
                            if cur.eat('}') {
                                break;
                            }
                            cur.expect(',')?;
                        }
                    }
                    PortKind::Finite(
                        FiniteSpace::new(values).map_err(|e| syntax(l, c, e.to_string()))?,
                    )
                } else {
                    cur.keyword("real")?;
                    PortKind::Real
                };
                if d.types.iter().any(|t| t.name == name) {
                    return Err(syntax(l, c, format!("type `{name}` declared twice")));
                }
                d.types.push(TypeDecl { name, kind });
            }
            Some(Tok::Word(w)) if w == "box" => {
                cur.pos += 1;
                let (name, l, c) = cur.word("a box name")?;
                if name == "outer" || d.boxes.iter().any(|b| b.name == name) {
                    return Err(syntax(l, c, format!("box name `{name}` is taken")));
                }
                let (inputs, outputs) = dwd_box_body(&mut cur, &d.types, line)?;
                d.boxes.push(DwdBox {
                    name,
                    inputs,
                    outputs,
                });
            }
            Some(Tok::Word(w))
                if w == "outer" && cur.toks.get(1).map(|t| &t.tok) != Some(&Tok::Punct('.')) =>
            {
                cur.pos += 1;
                if seen_outer {
                    return Err(syntax(line, 1, "`outer` declared twice"));
                }
                seen_outer = true;
                let (inputs, outputs) = dwd_box_body(&mut cur, &d.types, line)?;
                d.outer.inputs = inputs;
                d.outer.outputs = outputs;
            }
            _ => {
                let (sb, sp, l, c) = endpoint(&mut cur)?;
                if cur.peek() != Some(&Tok::Arrow) {
                    return Err(cur.err("expected `->`"));
                }
                cur.pos += 1;
                let (tb, tp, tl, tc) = endpoint(&mut cur)?;
                let port_in = |ports: &[Port], p: &str| ports.iter().position(|x| x.name == p);
                let src = if sb == "outer" {
                    port_in(&d.outer.inputs, &sp).map(Source::Outer)
                } else {
                    d.boxes.iter().position(|b| b.name == sb).and_then(|ibox| {
                        port_in(&d.boxes[ibox].outputs, &sp)
                            .map(|port| Source::Inner { ibox, port })
                    })
                }
                .ok_or_else(|| {
                    syntax(
                        l,
                        c,
                        format!("`{sb}.{sp}` is not a source (outer input or box output)"),
                    )
                })?;
                let dst = if tb == "outer" {
                    port_in(&d.outer.outputs, &tp).map(Sink::Outer)
                } else {
                    d.boxes.iter().position(|b| b.name == tb).and_then(|ibox| {
                        port_in(&d.boxes[ibox].inputs, &tp).map(|port| Sink::Inner { ibox, port })
                    })
                }
                .ok_or_else(|| {
                    syntax(
                        tl,
                        tc,
                        format!("`{tb}.{tp}` is not a sink (box input or outer output)"),
                    )
                })?;
                if let Some(first) = fed.insert(dst, line) {
                    return Err(Error::MultipleFeeds(format!(
                        "{tb}.{tp} is fed on lines {first} and {line}"
                    )));
                }
                d.wires.push(Wire { src, dst });
            }
        }
        cur.finish()?;
    }
    d.validate()?;
    Ok(d)
}

pub fn print_dwd(d: &DirectedWiringDiagram) -> String {
    let mut out = String::new();
    for t in &d.types {
        match &t.kind {
            PortKind::Finite(s) => {
                out.push_str(&format!("type {} = {{{}}}\n", t.name, s.names().join(", ")))
            }
            PortKind::Real => out.push_str(&format!("type {} = real\n", t.name)),
        }
    }
    let ports = |ps: &[Port]| {
        ps.iter()
            .map(|p| format!("{}: {}", p.name, p.ty))
            .collect::<Vec<_>>()
            .join(", ")
    };
    for b in &d.boxes {
        out.push_str(&format!(
            "box {} in({}) out({})\n",
            b.name,
            ports(&b.inputs),
            ports(&b.outputs)
        ));
    }
    out.push_str(&format!(
        "outer in({}) out({})\n",
        ports(&d.outer.inputs),
        ports(&d.outer.outputs)
    ));
    for w in &d.wires {
        out.push_str(&format!(
            "{} -> {}\n",
            d.describe_source(w.src),
            d.describe_sink(w.dst)
        ));
    }
    out
}
