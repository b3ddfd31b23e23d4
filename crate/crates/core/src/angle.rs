//! Headings in degrees, counterclockwise from +x, normalized to `[0, 360)`.

/// Wraps any finite angle into `[0, 360)`.
pub fn normalize_heading(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds up to exactly 360.0
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

/// Bearing from `from` to `to`, normalized. `None` when the points coincide.
pub fn bearing(from: (f64, f64), to: (f64, f64)) -> Option<f64> {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    Some(normalize_heading(dy.atan2(dx).to_degrees()))
}

/// Smallest absolute difference between two headings, in `[0, 180]`.
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = normalize_heading(a - b);
    d.min(360.0 - d)
}
