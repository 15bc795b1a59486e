//! Nondeterministic and probabilistic machines run through the same
//! simulator; probabilities stay exact rationals.

use num_rational::BigRational;

use dots::lens::{FiniteSpace, Interface};
use dots::machine::{parallel, simulate, Machine, Update};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn main() -> dots::Result<()> {
    let tick = Interface::new(FiniteSpace::new(["tick"])?, FiniteSpace::new(["H", "T"])?);
    let coin = Machine::new(
        FiniteSpace::new(["heads", "tails"])?,
        tick.clone(),
        vec![0, 1],
        Update::Dist(vec![
            vec![(0, q(1, 3)), (1, q(2, 3))],
            vec![(0, q(1, 2)), (1, q(1, 2))],
        ]),
    )?;
    let sim = simulate(&coin, 0, &[0, 0])?;
    if let dots::machine::Simulation::Probabilistic(runs) = &sim {
        for (t, p) in runs {
            let names: Vec<&str> = t.states.iter().map(|&s| coin.states().name(s)).collect();
            println!("{p:>4}  {names:?}");
        }
    }

    let walk = Machine::new(
        FiniteSpace::new(["a", "b", "c"])?,
        Interface::new(
            FiniteSpace::new(["go"])?,
            FiniteSpace::new(["a", "b", "c"])?,
        ),
        vec![0, 1, 2],
        Update::Pow(vec![vec![1, 2], vec![2], vec![]]),
    )?;
    for t in simulate(&walk, 0, &[0, 0])?.traces() {
        let names: Vec<&str> = t.states.iter().map(|&s| walk.states().name(s)).collect();
        println!(
            "{names:?}{}",
            if t.truncated { " (deadlocked)" } else { "" }
        );
    }

    let two_coins = parallel(&coin, &coin)?;
    let row: Vec<String> = two_coins
        .distribution(0, 0)
        .unwrap_or_default()
        .iter()
        .map(|(s, p)| format!("{}: {p}", two_coins.states().name(*s)))
        .collect();
    println!("two coins from (heads, heads): {}", row.join(", "));
    Ok(())
}
