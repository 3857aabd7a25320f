//! Shared fixtures for unit tests.

use nalgebra::{DMatrix, DVector};

use crate::model::{BoxDistribution, Horizon, PlantModel, UncertaintyModel};

/// Plant of the numerical evaluation example: nominal A at the box midpoints
/// (a = 1, b = 0), C = C_J = I3.
pub fn demo_plant() -> PlantModel {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.3, 1.0, 0.0, 0.0, 1.0]);
    let l = DMatrix::from_row_slice(3, 3, &[1.95, 0.0, 1.0, 1.0, 0.36, 1.0, 0.0, 1.0, -0.87]);
    let c = DMatrix::identity(3, 3);
    let c_j = DMatrix::identity(3, 3);
    PlantModel::new(a, b, c, c_j, l).unwrap()
}

/// Two uncertain diagonal entries, deviations in [-0.5, 0.5] each.
pub fn demo_uncertainty() -> UncertaintyModel {
    let mut e1 = DMatrix::zeros(3, 3);
    e1[(1, 1)] = 1.0;
    let mut e2 = DMatrix::zeros(3, 3);
    e2[(2, 2)] = 1.0;
    UncertaintyModel::new(
        vec![e1, e2],
        DVector::from_row_slice(&[-0.5, -0.5]),
        DVector::from_row_slice(&[0.5, 0.5]),
        BoxDistribution::Uniform,
    )
    .unwrap()
}

pub fn demo_horizon() -> Horizon {
    Horizon::new(5, 1.0).unwrap()
}

/// Scalar desk case: n_x = 1, A = 2, B = C = C_J = L = 1, one uncertain
/// parameter in [-0.5, 0.5].
pub fn scalar_plant() -> PlantModel {
    let one = DMatrix::from_element(1, 1, 1.0);
    PlantModel::new(
        DMatrix::from_element(1, 1, 2.0),
        one.clone(),
        one.clone(),
        one.clone(),
        one,
    )
    .unwrap()
}

pub fn scalar_uncertainty() -> UncertaintyModel {
    UncertaintyModel::new(
        vec![DMatrix::from_element(1, 1, 1.0)],
        DVector::from_row_slice(&[-0.5]),
        DVector::from_row_slice(&[0.5]),
        BoxDistribution::Uniform,
    )
    .unwrap()
}

pub fn scalar_horizon() -> Horizon {
    Horizon::new(2, 1.0).unwrap()
}
