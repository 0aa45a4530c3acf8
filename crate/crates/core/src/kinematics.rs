//! Analytic kinematics for a 7-DOF spherical-roll-spherical arm.
//!
//! The arm is modeled as four links on a vertical base: base-to-shoulder
//! `d_bs`, upper arm `d_se`, forearm `d_ew`, and wrist-to-flange `d_wf`,
//! with joint axes alternating z-y-z-y-z-y-z.  The extra degree of freedom
//! is parameterized by the *arm angle* `psi`: the rotation of the elbow
//! about the shoulder-wrist line, measured from the reference plane that
//! contains the shoulder-wrist line and the base z-axis.
//!
//! Besides `psi`, the pose-to-joints map has eight discrete solutions.  All
//! of them are exactly indistinguishable at the flange — flipping the sign
//! of any of q2, q4, q6 (with the matching pi-offsets on the neighbouring
//! roll joints) leaves the end-effector pose unchanged — so [`Branch`]
//! carries one sign bit per pivot to make the inverse unique.

use crate::geometry::{Pose, Quat, Vec3};
use crate::real::Real;
use thiserror::Error;

/// Joint-space configuration, radians, shoulder to flange.
pub type JointVector<R = f64> = [R; 7];

/// Slack allowed beyond the exact reachability boundary before a target is
/// rejected, in meters.  Keeps exactly-stretched poses solvable.
pub const REACH_EPS: f64 = 1e-6;

/// Below this, a rotation axis/plane is treated as degenerate.
const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("target unreachable: shoulder-wrist distance {distance_m} m")]
    Unreachable { distance_m: f64 },
    #[error("arm angle undefined: shoulder-wrist line is parallel to the base axis")]
    Singular,
    #[error("joint {joint} solution {value_rad} rad violates limits")]
    OutOfLimits { joint: usize, value_rad: f64 },
    #[error("non-finite input")]
    InvalidInput,
}

/// Discrete solution family for the inverse kinematics.
///
/// Each flag selects the solution with a non-negative pivot angle; the
/// default picks all three non-negative, the classic "elbow-up" posture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    /// `true` selects q2 >= 0.
    pub shoulder_positive: bool,
    /// `true` selects q4 >= 0 (elbow-up).
    pub elbow_positive: bool,
    /// `true` selects q6 >= 0.
    pub wrist_positive: bool,
}

impl Default for Branch {
    fn default() -> Self {
        Self {
            shoulder_positive: true,
            elbow_positive: true,
            wrist_positive: true,
        }
    }
}

impl Branch {
    /// The branch a given joint vector belongs to.
    pub fn of<R: Real>(q: &JointVector<R>) -> Self {
        Self {
            shoulder_positive: q[1] >= R::zero(),
            elbow_positive: q[3] >= R::zero(),
            wrist_positive: q[5] >= R::zero(),
        }
    }
}

/// Link lengths and joint limits of the arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel<R = f64> {
    /// Base to shoulder center, along base z.
    pub d_bs: R,
    /// Shoulder to elbow.
    pub d_se: R,
    /// Elbow to wrist center.
    pub d_ew: R,
    /// Wrist center to flange.
    pub d_wf: R,
    /// Inclusive (min, max) per joint, radians.
    pub joint_limits: [(R, R); 7],
}

impl<R: Real> Default for ArmModel<R> {
    /// Geometry and limits of a 7 kg / 800 mm-reach collaborative arm.
    fn default() -> Self {
        let lim = |deg: f64| {
            let r = R::of(deg.to_radians());
            (-r, r)
        };
        Self {
            d_bs: R::of(0.340),
            d_se: R::of(0.400),
            d_ew: R::of(0.400),
            d_wf: R::of(0.126),
            joint_limits: [
                lim(170.0),
                lim(120.0),
                lim(170.0),
                lim(120.0),
                lim(170.0),
                lim(120.0),
                lim(175.0),
            ],
        }
    }
}

/// Wrap an angle to `(-pi, pi]`.
fn wrap_angle<R: Real>(a: R) -> R {
    let two_pi = R::of(2.0) * R::PI();
    let mut x = (a + R::PI()) % two_pi;
    if x <= R::zero() {
        x += two_pi;
    }
    x - R::PI()
}

fn clamp_unit<R: Real>(x: R) -> R {
    if x > R::one() {
        R::one()
    } else if x < -R::one() {
        -R::one()
    } else {
        x
    }
}

impl<R: Real> ArmModel<R> {
    /// Shoulder center in the base frame.
    pub fn shoulder(&self) -> Vec3<R> {
        Vec3::new(R::zero(), R::zero(), self.d_bs)
    }

    /// Maximum shoulder-to-wrist distance the arm can span.
    pub fn max_reach(&self) -> R {
        self.d_se + self.d_ew
    }

    /// Flange pose in the base frame for a joint configuration.
    pub fn forward_kinematics(&self, q: &JointVector<R>) -> Pose<R> {
        let [_, _, _, flange] = self.fk_chain(q);
        Pose::new(flange, self.fk_orientation(q))
    }

    fn fk_orientation(&self, q: &JointVector<R>) -> Quat<R> {
        Quat::rot_z(q[0])
            * Quat::rot_y(q[1])
            * Quat::rot_z(q[2])
            * Quat::rot_y(q[3])
            * Quat::rot_z(q[4])
            * Quat::rot_y(q[5])
            * Quat::rot_z(q[6])
    }

    /// Positions of the shoulder, elbow, wrist center and flange.
    pub fn fk_chain(&self, q: &JointVector<R>) -> [Vec3<R>; 4] {
        let s = self.shoulder();
        let r03 = Quat::rot_z(q[0]) * Quat::rot_y(q[1]) * Quat::rot_z(q[2]);
        let e = s + r03.rotate(Vec3::new(R::zero(), R::zero(), self.d_se));
        let r04 = r03 * Quat::rot_y(q[3]);
        let w = e + r04.rotate(Vec3::new(R::zero(), R::zero(), self.d_ew));
        let r07 = r04 * Quat::rot_z(q[4]) * Quat::rot_y(q[5]) * Quat::rot_z(q[6]);
        let f = w + r07.rotate(Vec3::new(R::zero(), R::zero(), self.d_wf));
        [s, e, w, f]
    }

    /// Wrist-center position implied by a flange pose.
    pub fn wrist_center(&self, target: &Pose<R>) -> Vec3<R> {
        target.position
            - target
                .orientation
                .rotate(Vec3::new(R::zero(), R::zero(), self.d_wf))
    }

    /// Check a configuration against the joint limits (inclusive).
    pub fn check_limits(&self, q: &JointVector<R>) -> Result<(), KinematicsError> {
        for (i, (&qi, &(lo, hi))) in q.iter().zip(self.joint_limits.iter()).enumerate() {
            if !(qi >= lo && qi <= hi) {
                return Err(KinematicsError::OutOfLimits {
                    joint: i,
                    value_rad: qi.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Unit vectors spanning the arm-angle reference plane for a given
    /// shoulder-wrist direction: `u` lies in the plane of `sw` and base z,
    /// `v = sw x u` completes the frame.  Fails when `sw` is parallel to z.
    fn arm_angle_frame(&self, sw_hat: Vec3<R>) -> Result<(Vec3<R>, Vec3<R>), KinematicsError> {
        let z = Vec3::unit_z();
        let u_raw = z - sw_hat.scaled(z.dot(sw_hat));
        if u_raw.norm() < R::of(DEGENERATE_TOL) {
            return Err(KinematicsError::Singular);
        }
        let u = u_raw.normalized().expect("norm checked above");
        Ok((u, sw_hat.cross(u)))
    }

    /// Arm angle of a joint configuration, radians in `(-pi, pi]`.
    ///
    /// Returns zero when the elbow is straight (the angle is then
    /// meaningless and ignored by the inverse), and [`KinematicsError::Singular`]
    /// when the shoulder-wrist line is parallel to the base axis.
    pub fn extract_arm_angle(&self, q: &JointVector<R>) -> Result<R, KinematicsError> {
        let [s, e, w, _] = self.fk_chain(q);
        let sw = w - s;
        let sw_hat = sw.normalized().ok_or(KinematicsError::Singular)?;
        let se = e - s;
        let e_perp = se - sw_hat.scaled(se.dot(sw_hat));
        if e_perp.norm() < R::of(DEGENERATE_TOL) {
            return Ok(R::zero());
        }
        let (u, v) = self.arm_angle_frame(sw_hat)?;
        Ok(v.dot(e_perp).atan2(u.dot(e_perp)))
    }

    /// Solve the flange pose for joint angles.
    ///
    /// `psi` fixes the elbow's rotation about the shoulder-wrist line and
    /// `branch` the discrete solution family; together they make the
    /// solution unique.  The pose of an in-limit configuration `q` is solved
    /// back to exactly `q` when called with that configuration's own arm
    /// angle and branch.
    pub fn inverse_kinematics(
        &self,
        target: &Pose<R>,
        psi: R,
        branch: Branch,
    ) -> Result<JointVector<R>, KinematicsError> {
        if !target.is_finite() || !psi.is_finite() {
            return Err(KinematicsError::InvalidInput);
        }

        let s = self.shoulder();
        let w = self.wrist_center(target);
        let sw = w - s;
        let d_sw = sw.norm();

        let eps = R::of(REACH_EPS);
        let max_r = self.d_se + self.d_ew;
        let min_r = (self.d_se - self.d_ew).abs();
        if d_sw > max_r + eps || d_sw < min_r - eps {
            return Err(KinematicsError::Unreachable {
                distance_m: d_sw.to_f64().unwrap_or(f64::NAN),
            });
        }

        // Elbow pivot from the triangle S-E-W (law of cosines).
        let cos_q4 = clamp_unit(
            (d_sw * d_sw - self.d_se * self.d_se - self.d_ew * self.d_ew)
                / (R::of(2.0) * self.d_se * self.d_ew),
        );
        let q4_mag = cos_q4.acos();
        let q4 = if branch.elbow_positive {
            q4_mag
        } else {
            -q4_mag
        };
        let sin_q4 = q4.sin();

        // Elbow position: on the circle of radius r around the point at
        // distance t along SW, at angle psi from the reference plane.
        let sw_hat = sw.normalized().ok_or(KinematicsError::Singular)?;
        let t = (self.d_se * self.d_se + d_sw * d_sw - self.d_ew * self.d_ew) / (R::of(2.0) * d_sw);
        let r2 = self.d_se * self.d_se - t * t;
        let r = if r2 > R::zero() { r2.sqrt() } else { R::zero() };

        let elbow = if sin_q4.abs() < R::of(DEGENERATE_TOL) {
            // Straight (or folded) elbow: E sits on the SW line, psi is moot.
            s + sw_hat.scaled(t)
        } else {
            let (u, v) = self.arm_angle_frame(sw_hat)?;
            s + sw_hat.scaled(t) + (u.scaled(psi.cos()) + v.scaled(psi.sin())).scaled(r)
        };

        // Shoulder pair from the elbow direction
        // e_se = (cos q1 sin q2, sin q1 sin q2, cos q2).
        let e_se = ((elbow - s).normalized()).ok_or(KinematicsError::Singular)?;
        let q2_mag = clamp_unit(e_se.z).acos();
        let q2 = if branch.shoulder_positive {
            q2_mag
        } else {
            -q2_mag
        };
        let sin_q2 = q2.sin();
        let q1 = if sin_q2.abs() < R::of(DEGENERATE_TOL) {
            R::zero() // shoulder roll undefined when the upper arm is vertical
        } else if sin_q2 > R::zero() {
            e_se.y.atan2(e_se.x)
        } else {
            (-e_se.y).atan2(-e_se.x)
        };

        // Upper-arm roll: in the frame after Rz(q1)Ry(q2) the wrist sits at
        // Rz(q3) * (d_ew sin q4, 0, d_se + d_ew cos q4).
        let r02 = Quat::rot_z(q1) * Quat::rot_y(q2);
        let w_local = r02.conjugate().rotate(w - s);
        let xy_ref = self.d_ew * sin_q4;
        let q3 =
            if w_local.x.abs() < R::of(DEGENERATE_TOL) && w_local.y.abs() < R::of(DEGENERATE_TOL) {
                R::zero() // straight elbow: roll is free, pick zero
            } else {
                wrap_angle(w_local.y.atan2(w_local.x) - R::zero().atan2(xy_ref))
            };

        // Wrist triple from the residual rotation R47 = Rz(q5) Ry(q6) Rz(q7).
        let r04 = r02 * Quat::rot_z(q3) * Quat::rot_y(q4);
        let m = (r04.conjugate() * target.orientation).to_matrix();
        let sin_q6_sq = m[0][2] * m[0][2] + m[1][2] * m[1][2];
        let (q5, q6, q7) = if sin_q6_sq.sqrt() < R::of(DEGENERATE_TOL) {
            // q5 and q7 are collinear: fix q5 = 0, then M = Ry(q6) Rz(q7).
            let q6 = m[0][2].atan2(m[2][2]);
            (R::zero(), q6, m[1][0].atan2(m[1][1]))
        } else if branch.wrist_positive {
            (
                m[1][2].atan2(m[0][2]),
                clamp_unit(m[2][2]).acos(),
                m[2][1].atan2(-m[2][0]),
            )
        } else {
            (
                (-m[1][2]).atan2(-m[0][2]),
                -clamp_unit(m[2][2]).acos(),
                (-m[2][1]).atan2(m[2][0]),
            )
        };

        let q = [q1, q2, q3, q4, q5, q6, q7];
        self.check_limits(&q)?;
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Quat, Vec3};
    use approx::assert_abs_diff_eq;
    use core::f64::consts::FRAC_PI_2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arm() -> ArmModel {
        ArmModel::default()
    }

    const HOME_HEIGHT: f64 = 0.340 + 0.400 + 0.400 + 0.126;

    #[test]
    fn fk_home_is_fully_stretched_up() {
        let p = arm().forward_kinematics(&[0.0; 7]);
        assert_abs_diff_eq!(p.position.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.position.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.position.z, HOME_HEIGHT, epsilon = 1e-15);
        assert!(p.orientation.rotation_eq(Quat::identity(), 1e-15));
    }

    #[test]
    fn fk_base_roll_spins_in_place() {
        let p = arm().forward_kinematics(&[FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p.position.z, HOME_HEIGHT, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.y, 0.0, epsilon = 1e-12);
        assert!(p.orientation.rotation_eq(Quat::rot_z(FRAC_PI_2), 1e-12));
    }

    #[test]
    fn fk_elbow_right_angle() {
        // forearm and flange fold forward along +x above the elbow
        let p = arm().forward_kinematics(&[0.0, 0.0, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p.position.x, 0.526, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.z, 0.740, epsilon = 1e-12);
        assert!(p.orientation.rotation_eq(Quat::rot_y(FRAC_PI_2), 1e-12));
    }

    #[test]
    fn fk_shoulder_pitch_lays_arm_horizontal() {
        let p = arm().forward_kinematics(&[0.0, FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p.position.x, 0.926, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.z, 0.340, epsilon = 1e-12);
        assert!(p.orientation.rotation_eq(Quat::rot_y(FRAC_PI_2), 1e-12));
    }

    #[test]
    fn fk_chain_reports_link_points() {
        let [s, e, w, f] = arm().fk_chain(&[0.0; 7]);
        assert_eq!(s, Vec3::new(0.0, 0.0, 0.340));
        assert_abs_diff_eq!(e.z, 0.740, epsilon = 1e-15);
        assert_abs_diff_eq!(w.z, 1.140, epsilon = 1e-15);
        assert_abs_diff_eq!(f.z, HOME_HEIGHT, epsilon = 1e-15);
    }

    #[test]
    fn ik_home_pose_solves_to_zero() {
        // exactly stretched: must not be rejected as unreachable
        let target = Pose::new(Vec3::new(0.0, 0.0, HOME_HEIGHT), Quat::identity());
        let q = arm()
            .inverse_kinematics(&target, 0.0, Branch::default())
            .expect("home pose is reachable");
        for qi in q {
            assert_abs_diff_eq!(qi, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ik_elbow_right_angle_pose() {
        let target = Pose::new(Vec3::new(0.526, 0.0, 0.740), Quat::rot_y(FRAC_PI_2));
        let q = arm()
            .inverse_kinematics(&target, 0.0, Branch::default())
            .expect("reachable");
        let expected = [0.0, 0.0, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0];
        for (qi, ei) in q.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(*qi, *ei, epsilon = 1e-9);
        }
    }

    #[test]
    fn ik_far_target_is_unreachable() {
        let target = Pose::new(Vec3::new(0.0, 0.0, 2.0), Quat::identity());
        let r = arm().inverse_kinematics(&target, 0.0, Branch::default());
        assert!(matches!(r, Err(KinematicsError::Unreachable { .. })));
    }

    #[test]
    fn ik_tight_target_violates_elbow_limit() {
        // wrist center 0.30 m from the shoulder needs |q4| > 120 deg
        let target = Pose::new(Vec3::new(0.30, 0.0, 0.340 + 0.126), Quat::identity());
        let r = arm().inverse_kinematics(&target, 0.0, Branch::default());
        assert!(matches!(
            r,
            Err(KinematicsError::OutOfLimits { joint: 3, .. })
        ));
    }

    #[test]
    fn ik_vertical_wrist_line_with_bent_elbow_is_singular() {
        // wrist center straight above the shoulder but closer than full
        // stretch: the elbow must leave the axis, but the reference plane
        // for psi is undefined.
        let target = Pose::new(Vec3::new(0.0, 0.0, 0.340 + 0.7 + 0.126), Quat::identity());
        let r = arm().inverse_kinematics(&target, 0.0, Branch::default());
        assert!(matches!(r, Err(KinematicsError::Singular)));
    }

    #[test]
    fn ik_non_finite_input_rejected() {
        let target = Pose::new(Vec3::new(f64::NAN, 0.0, 0.5), Quat::identity());
        let r = arm().inverse_kinematics(&target, 0.0, Branch::default());
        assert_eq!(r, Err(KinematicsError::InvalidInput));
    }

    #[test]
    fn arm_angle_zero_for_elbow_in_reference_plane() {
        let q = [0.0, 0.0, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0];
        let psi = arm().extract_arm_angle(&q).unwrap();
        assert_abs_diff_eq!(psi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn arm_angle_follows_base_rotation_offset() {
        // rotating the whole posture about the base z keeps psi fixed,
        // because the reference plane rotates along with the SW line
        let q = [0.9, 0.4, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0];
        let q_rot = [0.9 + 0.5, 0.4, 0.0, FRAC_PI_2, 0.0, 0.0, 0.0];
        let a = arm().extract_arm_angle(&q).unwrap();
        let b = arm().extract_arm_angle(&q_rot).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn branch_of_reads_pivot_signs() {
        let b = Branch::of(&[0.0, -0.3, 0.0, 0.7, 0.0, -0.1, 0.0]);
        assert!(!b.shoulder_positive);
        assert!(b.elbow_positive);
        assert!(!b.wrist_positive);
    }

    /// Random in-limit configuration away from the pivot and reference-plane
    /// singularities, where the pose-psi-branch triple is a bijection.
    fn sample_regular_config(rng: &mut ChaCha8Rng, arm: &ArmModel) -> JointVector<f64> {
        loop {
            let mut q = [0.0; 7];
            for (qi, (lo, hi)) in q.iter_mut().zip(arm.joint_limits.iter()) {
                *qi = rng.random_range(*lo..*hi);
            }
            if q[1].abs() < 0.05 || q[3].abs() < 0.05 || q[5].abs() < 0.05 {
                continue;
            }
            let [s, _, w, _] = arm.fk_chain(&q);
            let sw = (w - s).normalized().unwrap();
            if (1.0 - sw.z.abs()) < 1e-4 {
                continue; // shoulder-wrist line too close to vertical
            }
            return q;
        }
    }

    #[test]
    fn ik_roundtrip_thousand_random_configs() {
        let arm = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e1e);
        for _ in 0..1000 {
            let q = sample_regular_config(&mut rng, &arm);
            let pose = arm.forward_kinematics(&q);
            let psi = arm.extract_arm_angle(&q).expect("regular config");
            let branch = Branch::of(&q);
            let solved = arm
                .inverse_kinematics(&pose, psi, branch)
                .unwrap_or_else(|e| panic!("ik failed for {q:?}: {e}"));
            for (qi, si) in q.iter().zip(solved.iter()) {
                assert!(
                    (qi - si).abs() < 1e-6,
                    "joint mismatch: {q:?} vs {solved:?}"
                );
            }
        }
    }

    #[test]
    fn ik_all_branches_reach_the_same_pose() {
        let arm = arm();
        let q = [0.3, 0.7, -0.4, 1.1, 0.5, 0.8, -0.2];
        let pose = arm.forward_kinematics(&q);
        let psi = arm.extract_arm_angle(&q).unwrap();
        for &sp in &[false, true] {
            for &ep in &[false, true] {
                for &wp in &[false, true] {
                    let branch = Branch {
                        shoulder_positive: sp,
                        elbow_positive: ep,
                        wrist_positive: wp,
                    };
                    let Ok(solved) = arm.inverse_kinematics(&pose, psi, branch) else {
                        continue; // some branches violate limits; fine
                    };
                    let back = arm.forward_kinematics(&solved);
                    assert!((back.position - pose.position).norm() < 1e-9);
                    assert!(back.orientation.rotation_eq(pose.orientation, 1e-9));
                }
            }
        }
    }

    #[test]
    fn ik_single_precision_roundtrip() {
        let arm: ArmModel<f32> = ArmModel::default();
        let q: JointVector<f32> = [0.3, 0.7, -0.4, 1.1, 0.5, 0.8, -0.2];
        let pose = arm.forward_kinematics(&q);
        let psi = arm.extract_arm_angle(&q).unwrap();
        let solved = arm
            .inverse_kinematics(&pose, psi, Branch::of(&q))
            .expect("reachable");
        for (qi, si) in q.iter().zip(solved.iter()) {
            assert!((qi - si).abs() < 1e-4);
        }
    }
}
