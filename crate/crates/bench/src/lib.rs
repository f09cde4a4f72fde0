//! Shared inputs for the benchmarks.

use cjsr_core::{build_lift, LiftedSet, Mat, MatrixSet, Tsm};

fn mat(n: usize, rows: &[f64]) -> Mat {
    Mat::from_row_slice(n, n, rows)
}

/// The four-mode, four-state system used throughout the test suites.
pub fn example1() -> LiftedSet {
    let modes = MatrixSet::new(vec![
        mat(2, &[0.94, 0.56, -0.35, 0.73]),
        mat(2, &[0.94, 0.56, 0.14, 0.73]),
        mat(2, &[0.94, 0.56, -0.35, 0.46]),
        mat(2, &[0.94, 0.56, 0.14, 0.46]),
    ])
    .expect("square modes of equal size");
    let tsm = Tsm::from_blocks(vec![
        mat(4, &[0., 0., 0., 0., 0., 0., 0., 0., 1., 1., 1., 1., 0., 0., 0., 0.]),
        mat(4, &[0., 1., 1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.]),
        mat(4, &[0., 0., 0., 0., 1., 0., 1., 0., 0., 0., 0., 0., 0., 0., 0., 0.]),
        mat(4, &[0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0.]),
    ])
    .expect("deterministic blocks");
    build_lift(&modes, &tsm).expect("matching label counts")
}
