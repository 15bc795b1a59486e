//! Pushouts of finite sets and the cospans they compose.

use dots::finset::{pushout, FinFunction};
use dots::wiring::{compose_cospans, cospan_iso, parallel_cospans, Cospan};

fn main() -> dots::Result<()> {
    // Glue {0, 1} and {0, 1, 2} along a single shared point.
    let f = FinFunction::new(vec![1], 2)?;
    let g = FinFunction::new(vec![0], 3)?;
    let po = pushout(&f, &g)?;
    println!(
        "pushout has {} elements; B -> {:?}, C -> {:?}",
        po.apex,
        po.inj_left.table(),
        po.inj_right.table()
    );

    let c1 = Cospan::new(
        FinFunction::new(vec![0, 0], 1)?,
        FinFunction::new(vec![0, 0], 1)?,
    )?;
    let c2 = Cospan::new(
        FinFunction::new(vec![0, 1], 2)?,
        FinFunction::new(vec![1], 2)?,
    )?;
    let c3 = Cospan::new(FinFunction::new(vec![0], 1)?, FinFunction::identity(1))?;
    let left = compose_cospans(&compose_cospans(&c1, &c2)?, &c3)?;
    let right = compose_cospans(&c1, &compose_cospans(&c2, &c3)?)?;
    println!(
        "(c1 c2) c3 has {} junctions, c1 (c2 c3) has {}; iso {:?}",
        left.junctions(),
        right.junctions(),
        cospan_iso(&left, &right).map(|f| f.table().to_vec())
    );
    let both = parallel_cospans(&c1, &c3)?;
    println!(
        "c1 beside c3: {} -> {} <- {}",
        both.inner(),
        both.junctions(),
        both.outer()
    );
    Ok(())
}
