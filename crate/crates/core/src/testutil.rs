//! Fixtures shared by unit tests across modules.

use crate::instance::Instance;

/// Depot at the origin, customers a=(0,3), b=(4,0), e=(0,6) with unit
/// demands, capacity 10, no fixed cost. Hand-checked distances:
/// d(0,a)=3, d(0,b)=4, d(0,e)=6, d(a,b)=5, d(a,e)=3, d(b,e)=7.
pub(crate) fn t4() -> Instance {
    Instance::single_depot(
        "t4",
        (0.0, 0.0),
        &[((0.0, 3.0), 1), ((4.0, 0.0), 1), ((0.0, 6.0), 1)],
        10,
        0.0,
    )
    .unwrap()
}

/// Five collinear nodes: start depot (0,0), customers at (1,0), (2,0),
/// (3,0), end depot at (4,0). Exact distances, so every triangle
/// inequality is tight.
pub(crate) fn collinear() -> Instance {
    Instance::from_parts(
        "collinear",
        vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)],
        vec![0, 1, 1, 1, 0],
        10,
        0.0,
    )
    .unwrap()
}
