//! Random problem generators shared by property tests.

use proptest::prelude::*;

use crate::kinematics::{fk_position, HalfPlaneConstraint, RobotModel};

#[derive(Debug, Clone)]
pub struct Instance {
    pub robot: RobotModel,
    pub reference: Vec<f64>,
    pub constraint: HalfPlaneConstraint,
}

/// Planar arm with 2..=`max_links` links and a wall 2 to 50 cm beyond the
/// reference pose, facing a random direction.
pub fn planar_instance(max_links: usize) -> impl Strategy<Value = Instance> {
    (2..=max_links)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.5f64..1.5, n),
                prop::collection::vec(-3.0f64..3.0, n),
                0.0f64..std::f64::consts::TAU,
                0.02f64..0.5,
            )
        })
        .prop_map(|(links, reference, heading, margin)| {
            let robot = RobotModel::planar(links).unwrap();
            let normal = vec![heading.cos(), heading.sin()];
            let p = fk_position(&robot, &reference).unwrap();
            let offset = normal[0] * p[0] + normal[1] * p[1] + margin;
            Instance { robot, reference, constraint: HalfPlaneConstraint::new("c", normal, offset) }
        })
}
