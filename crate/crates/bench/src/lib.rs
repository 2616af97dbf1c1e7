//! Fixtures shared by the benchmarks.

use fracreset_core::models::{close_loop, ClosedLoopResetSystem, ElementKind, ResetElement, StateSpaceModel};

/// Plant `1/(s^2 + 0.2 s)` with the lead `s + 1` folded in.
pub fn example_plant() -> StateSpaceModel {
    StateSpaceModel::from_transfer_function(&[1.0, 1.0], &[1.0, 0.2, 0.0], 1.0).expect("valid plant")
}

/// The example plant closed around the given element.
pub fn example_loop(kind: ElementKind) -> ClosedLoopResetSystem {
    let element = ResetElement::new(kind).expect("valid element");
    close_loop(&example_plant(), None, &element).expect("loop closes")
}
