//! The merge feature vector shared by dataset construction and the online
//! planner.
//!
//! Layout: `[speed_m, accel_m, length_m, dy_p, dx_p, speed_p, accel_p,
//! length_p, dy_f, dx_f, speed_f, accel_f, length_f]`, offsets relative to M.
//! A missing neighbour is placed 10 km away (ahead for P, behind for F), at
//! M's speed, with zero acceleration and zero length. Offsets are rounded to
//! 2 decimals, everything else to 1.

use crate::safety::VehicleState;

pub const FEATURE_COUNT: usize = 13;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "speed_m", "accel_m", "length_m", "dy_p", "dx_p", "speed_p", "accel_p", "length_p", "dy_f",
    "dx_f", "speed_f", "accel_f", "length_f",
];

pub const ABSENT_OFFSET: f64 = 1.0e4;

pub fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

pub fn merge_features(
    merger: &VehicleState,
    preceding: Option<&VehicleState>,
    following: Option<&VehicleState>,
) -> [f64; FEATURE_COUNT] {
    let kin = |v: f64| round_to(v, 1);
    let pos = |v: f64| round_to(v, 2);
    let neighbour = |n: Option<&VehicleState>, absent_dy: f64| match n {
        Some(n) => [
            pos(n.y - merger.y),
            pos(n.x - merger.x),
            kin(n.speed),
            kin(n.acceleration),
            kin(n.length),
        ],
        None => [absent_dy, 0.0, kin(merger.speed), 0.0, 0.0],
    };
    let p = neighbour(preceding, ABSENT_OFFSET);
    let f = neighbour(following, -ABSENT_OFFSET);
    [
        kin(merger.speed),
        kin(merger.acceleration),
        kin(merger.length),
        p[0],
        p[1],
        p[2],
        p[3],
        p[4],
        f[0],
        f[1],
        f[2],
        f[3],
        f[4],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, length: f64) -> VehicleState {
        VehicleState {
            x,
            y,
            speed: 25.04,
            acceleration: -0.96,
            length,
            width: 2.0,
        }
    }

    #[test]
    fn rounds_lengths_to_one_decimal() {
        let f = merge_features(&v(0.0, 0.0, 4.2637), None, None);
        assert_eq!(f[2], 4.3);
        assert_eq!(f[0], 25.0);
        assert_eq!(f[1], -1.0);
    }

    #[test]
    fn rounds_offsets_to_two_decimals() {
        let f = merge_features(&v(0.0, 0.0, 4.0), Some(&v(1.0, 12.3456, 4.0)), None);
        assert_eq!(f[3], 12.35);
        assert_eq!(f[4], 1.0);
    }

    #[test]
    fn absent_neighbours_are_far_away() {
        let f = merge_features(&v(0.0, 0.0, 4.0), None, None);
        assert_eq!(f[3], ABSENT_OFFSET);
        assert_eq!(f[8], -ABSENT_OFFSET);
        assert_eq!(f[5], f[0]);
        assert_eq!((f[7], f[12]), (0.0, 0.0));
    }
}
