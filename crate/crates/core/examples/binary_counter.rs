//! Two mod-2 counters wired in series make a mod-4 counter. Hiding the
//! high bit leaves a machine with two trajectories for each output pattern.

use dots::dsl::parse_dwd;
use dots::lens::{Chart, FiniteSpace, Interface};
use dots::machine::{compose_via_dwd, enumerate_trajectories, simulate, Machine, Simulation};

const SERIES: &str = "\
type Bit = {0, 1}
box first in(a: Bit) out(b: Bit)
box second in(a: Bit) out(b: Bit)
outer in(a: Bit) out(hi: Bit, lo: Bit)
outer.a -> first.a
first.b -> second.a
second.b -> outer.hi
first.b -> outer.lo
";

fn main() -> dots::Result<()> {
    let m2 = Machine::counter(2);
    let m4 = compose_via_dwd(&parse_dwd(SERIES)?, &[m2.clone(), m2.clone()])?;

    let Simulation::Deterministic(t) = simulate(&m4, 0, &[1, 1, 1, 1, 1])? else {
        unreachable!()
    };
    let out = &m4.interface().output;
    let shown: Vec<&str> = t.outputs.iter().map(|&o| out.name(o)).collect();
    println!("mod 4 outputs (hi lo) on 1s: {shown:?}");

    let parity = compose_via_dwd(
        &parse_dwd(
            &SERIES
                .replace("second.b -> outer.hi\n", "")
                .replace("hi: Bit, ", ""),
        )?,
        &[m2.clone(), m2.clone()],
    )?;
    let bit = FiniteSpace::range(2);
    let window = Chart::timeline(&Interface::new(bit.clone(), bit), &[1, 1, 1], &[0, 1, 0, 1])?;
    for (name, m) in [("mod 2", &m2), ("parity of mod 4", &parity)] {
        let paths = enumerate_trajectories(m, &window, 3)?;
        let named: Vec<Vec<&str>> = paths
            .iter()
            .map(|p| p.iter().map(|&s| m.states().name(s)).collect())
            .collect();
        println!("{name}: {} trajectories {named:?}", paths.len());
    }
    Ok(())
}
