//! Lotka–Volterra as two open ODEs wired together, stepped with Euler both
//! as one composite system and as composed Euler machines.

use dots::dsl::parse_dwd;
use dots::expr::Expr;
use dots::ode::{
    compose_vector_via_dwd, dwd_apply_ode, euler, simulate_ode, OdeSystem, VectorMoore,
};

fn system(state: &str, input: &str, field: &str) -> dots::Result<OdeSystem> {
    OdeSystem::new(
        vec![state.into()],
        vec![input.into()],
        vec![(state.into(), Expr::var(state))],
        vec![Expr::parse(field)?],
    )
}

fn main() -> dots::Result<()> {
    let rabbits = system("r", "f", "1.1 * r - 0.4 * r * f")?;
    let foxes = system("f", "r", "0.1 * r * f - 0.4 * f")?;
    let d = parse_dwd(
        "type Real = real
box rabbits in(f: Real) out(r: Real)
box foxes in(r: Real) out(f: Real)
outer in() out(rabbits: Real, foxes: Real)
foxes.f -> rabbits.f
rabbits.r -> foxes.r
rabbits.r -> outer.rabbits
foxes.f -> outer.foxes
",
    )?;
    let lv = dwd_apply_ode(&d, &[rabbits.clone(), foxes.clone()])?;
    for (x, e) in lv.state().iter().zip(lv.field()) {
        println!("d{x}/dt = {e}");
    }

    let h = 0.05;
    let trace = simulate_ode(&lv, h, 200, &[10.0, 5.0], &[])?;
    for k in (0..=200).step_by(40) {
        println!(
            "t = {:>5.2}  rabbits {:>8.4}  foxes {:>8.4}",
            trace.times[k], trace.states[k][0], trace.states[k][1]
        );
    }

    let parts: Vec<Box<dyn VectorMoore>> =
        vec![Box::new(euler(&rabbits, h)?), Box::new(euler(&foxes, h)?)];
    let composed = compose_vector_via_dwd(&d, parts)?;
    let whole = euler(&lv, h)?;
    let x = [10.0, 5.0];
    println!("one step, composite system:  {:?}", whole.step(&x, &[])?);
    println!("one step, composed machines: {:?}", composed.step(&x, &[])?);
    Ok(())
}
