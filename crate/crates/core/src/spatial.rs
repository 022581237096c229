//! Distances, user-local relative positions and qualitative directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Quaternion, UserPose, Vec3};

pub type Matrix3 = [[f64; 3]; 3];

/// Planar components within this band of zero count as "neither side".
pub const DIRECTION_DEAD_ZONE: f64 = 1e-9;

/// Phrase used when the object sits at the user's planar position.
pub const AT_PLAYER: &str = "at the player's position";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePosition {
    /// Object position in the user's local frame.
    pub quantitative: Vec3,
    pub distance: f64,
    pub qualitative: String,
}

/// Rotation matrix of a (not necessarily unit) quaternion `(x, y, z, w)`.
pub fn quat_to_rotation_matrix(q: &Quaternion) -> Result<Matrix3> {
    let Quaternion { x, y, z, w } = q.normalized()?;
    Ok([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ])
}

fn check_finite(v: &Vec3, what: &'static str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn euclidean_distance(a: &Vec3, b: &Vec3) -> Result<f64> {
    check_finite(a, "point")?;
    check_finite(b, "point")?;
    let d = sub(a, b);
    Ok(norm(&d))
}

/// Object position expressed in the user's frame: `Rᵀ (p_o − p_u)`.
pub fn relative_position(object: &Vec3, user: &UserPose) -> Result<RelativePosition> {
    check_finite(object, "object position")?;
    check_finite(&user.position, "user position")?;
    let r = quat_to_rotation_matrix(&user.orientation)?;
    let offset = sub(object, &user.position);
    let quantitative = transpose_mul(&r, &offset);
    Ok(RelativePosition {
        quantitative,
        distance: norm(&offset),
        qualitative: qualitative_direction(&quantitative),
    })
}

/// `y` decides front/back, `x` decides left/right; front/back comes first.
pub fn qualitative_direction(rel: &Vec3) -> String {
    let [x, y, _] = *rel;
    let fb = if y > DIRECTION_DEAD_ZONE {
        Some("front")
    } else if y < -DIRECTION_DEAD_ZONE {
        Some("back")
    } else {
        None
    };
    let lr = if x > DIRECTION_DEAD_ZONE {
        Some("right")
    } else if x < -DIRECTION_DEAD_ZONE {
        Some("left")
    } else {
        None
    };
    match (fb, lr) {
        (None, None) => AT_PLAYER.to_string(),
        (Some(a), Some(b)) => format!("{a} {b}"),
        (Some(a), None) | (None, Some(a)) => a.to_string(),
    }
}

/// Sentence form used by answers: "tray_2 is at the back left of the player".
pub fn direction_sentence(instance: &str, qualitative: &str) -> String {
    if qualitative == AT_PLAYER {
        format!("{instance} is {AT_PLAYER}")
    } else {
        format!("{instance} is at the {qualitative} of the player")
    }
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn transpose_mul(m: &Matrix3, v: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[0][i] * v[0] + m[1][i] * v[1] + m[2][i] * v[2];
    }
    out
}
