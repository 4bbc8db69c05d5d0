//! Angle arithmetic on the circle.

use crate::scalar::Real;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<R: Real>(theta: R) -> R {
    let two_pi = R::two_pi();
    let mut w = theta % two_pi;
    if w > R::pi() {
        w = w - two_pi;
    } else if w <= -R::pi() {
        w = w + two_pi;
    }
    w
}

/// Shortest signed distance from `a` to `b` on the circle, in `(-pi, pi]`.
pub fn angular_distance<R: Real>(a: R, b: R) -> R {
    wrap_angle(b - a)
}
