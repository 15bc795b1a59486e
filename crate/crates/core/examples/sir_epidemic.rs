//! Glue an infection net and a recovery net along the infected species,
//! then check the quotient map onto the SIS model.

use dots::dsl::parse_uwd;
use dots::finset::FinFunction;
use dots::petri::{
    check_open_map, uwd_apply_named, Multiset, OpenPetriMap, OpenPetriNet, PetriMap, PetriNet,
    Transition,
};

fn open(species: &[&str], transitions: Vec<Transition>) -> OpenPetriNet {
    let n = species.len();
    let net = PetriNet::new(species.iter().map(|s| s.to_string()).collect(), transitions).unwrap();
    OpenPetriNet::new(net, FinFunction::identity(n)).unwrap()
}

fn main() -> dots::Result<()> {
    let infection = open(
        &["S", "I"],
        vec![Transition::new(
            "infection",
            Multiset::new([(0, 1), (1, 1)]),
            Multiset::singleton(1, 2),
        )],
    );
    let recovery = open(
        &["I", "R"],
        vec![Transition::new(
            "recovery",
            Multiset::singleton(0, 1),
            Multiset::singleton(1, 1),
        )],
    );

    let uwd = parse_uwd(
        "junction S\njunction I\njunction R\n\
         box infection(s = S, i = I)\nbox recovery(i = I, r = R)\n\
         outer(s = S, i = I, r = R)\n",
    )?;
    let sir = uwd_apply_named(
        &uwd.cospan()?,
        &[infection, recovery],
        &uwd.junction_names(),
    )?;
    println!("SIR species: {:?}", sir.net().species());
    for t in sir.net().transitions() {
        println!(
            "  {}: {:?} -> {:?}",
            t.name,
            t.src.entries(),
            t.tgt.entries()
        );
    }

    let sis = open(
        &["S", "I"],
        vec![
            Transition::new(
                "infection",
                Multiset::new([(0, 1), (1, 1)]),
                Multiset::singleton(1, 2),
            ),
            Transition::new(
                "recovery",
                Multiset::singleton(1, 1),
                Multiset::singleton(0, 1),
            ),
        ],
    );
    // Recovered individuals become susceptible again.
    let map = OpenPetriMap {
        interface: FinFunction::new(vec![0, 1, 0], 2)?,
        net: PetriMap {
            species: FinFunction::new(vec![0, 1, 0], 2)?,
            transitions: FinFunction::identity(2),
        },
    };
    println!("SIR -> SIS: {:?}", check_open_map(&map, &sir, &sis)?);
    Ok(())
}
