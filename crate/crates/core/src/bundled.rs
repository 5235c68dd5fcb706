//! Switched systems shipped with the crate.

use crate::system::SwitchedLinearSystem;

/// Two 2×2 modes, each Hurwitz, unstable under some fast switching.
pub fn example1() -> SwitchedLinearSystem {
    SwitchedLinearSystem::from_rows(
        2,
        &[
            vec![vec![-0.1, -1.0], vec![2.0, -0.1]],
            vec![vec![-0.1, -2.0], vec![1.0, -0.1]],
        ],
    )
    .expect("bundled system")
}

/// Two 2×2 modes stable under arbitrary switching without a common
/// quadratic Lyapunov function.
pub fn example2() -> SwitchedLinearSystem {
    SwitchedLinearSystem::from_rows(
        2,
        &[
            vec![vec![-1.0, -1.0], vec![1.0, -1.0]],
            vec![vec![-1.0, -10.0], vec![0.1, -1.0]],
        ],
    )
    .expect("bundled system")
}

/// Five 3×3 modes.
pub fn example3() -> SwitchedLinearSystem {
    SwitchedLinearSystem::from_rows(
        3,
        &[
            vec![
                vec![-5.0, 1.0, 2.0],
                vec![0.0, -5.0, 1.0],
                vec![0.0, 1.0, -2.0],
            ],
            vec![
                vec![-1.0, 3.0, 1.0],
                vec![0.0, -2.0, 0.0],
                vec![0.0, 1.0, -1.0],
            ],
            vec![
                vec![0.0, 0.0, 3.0],
                vec![-2.0, -1.0, -3.0],
                vec![-1.0, 0.0, -2.0],
            ],
            vec![
                vec![-4.0, 0.0, -3.0],
                vec![2.0, -2.0, 4.0],
                vec![1.0, 0.0, -1.0],
            ],
            vec![
                vec![-1.0, 0.0, 0.0],
                vec![-1.0, -1.0, -1.0],
                vec![-3.0, 0.0, -4.0],
            ],
        ],
    )
    .expect("bundled system")
}

/// Looks a bundled system up by name (`example1`, `example2`, `example3`).
pub fn by_name(name: &str) -> Option<SwitchedLinearSystem> {
    match name {
        "example1" => Some(example1()),
        "example2" => Some(example2()),
        "example3" => Some(example3()),
        _ => None,
    }
}
