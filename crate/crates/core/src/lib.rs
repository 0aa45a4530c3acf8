//! Hand-to-robot teleoperation bridge library.
//!
//! The crate is organized around the data path of a teleoperation session:
//! hand poses are encoded on the wire ([`wire`]), mapped into the robot frame
//! and predicted forward ([`bridge`]), solved to joint space ([`kinematics`]),
//! and followed by an online trajectory generator ([`trajgen`]).  The
//! [`sim`] module replaces the physical devices with seeded models so that
//! the tracking experiments in [`analysis`] are reproducible.
//!
//! The math modules ([`geometry`], [`kinematics`], [`trajgen`]) are generic
//! over the scalar type via [`Real`]; the type aliases at the crate root fix
//! the default `f64` instantiations used by the rest of the system.

pub mod analysis;
pub mod bridge;
pub mod geometry;
pub mod kinematics;
mod real;
pub mod sim;
pub mod trajgen;
pub mod wire;

pub use real::Real;

/// Double-precision 3-vector, the default spatial type.
pub type Vec3 = geometry::Vec3<f64>;
/// Single-precision 3-vector.
pub type Vec3f = geometry::Vec3<f32>;
/// Double-precision unit quaternion.
pub type Quat = geometry::Quat<f64>;
/// Single-precision unit quaternion.
pub type Quatf = geometry::Quat<f32>;
/// Double-precision pose.
pub type Pose = geometry::Pose<f64>;
/// Double-precision rigid transform.
pub type RigidTransform = geometry::RigidTransform<f64>;
/// Double-precision arm model.
pub type ArmModel = kinematics::ArmModel<f64>;
/// Double-precision joint vector.
pub type JointVector = kinematics::JointVector<f64>;
