//! Golden byte fixtures for the wire codec.  The fixture files were
//! produced by an independent implementation of the layout (Python
//! `struct` packing) and are compared bit-exactly in both directions.

use telekin::wire::{
    decode_hand, decode_joint, encode_hand, encode_joint, HandSample, JointStateMsg,
};
use telekin::{Pose, Quat, Vec3};

fn fixture(name: &str) -> Vec<u8> {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read(&path).unwrap_or_else(|e| panic!("missing fixture {path}: {e}"))
}

#[test]
fn hand_identity_golden() {
    let golden = fixture("hand_identity.bin");
    let sample = HandSample {
        seq: 1,
        timestamp_us: 0,
        pose: Pose::new(Vec3::zero(), Quat::identity()),
        confidence: 1.0,
    };
    let encoded = encode_hand(&sample).unwrap();
    assert_eq!(encoded.as_slice(), golden.as_slice());
    assert_eq!(decode_hand(&golden).unwrap(), sample);
    // spot-check the frame prefix: magic, version, type, seq LE
    assert_eq!(
        &golden[..8],
        &[0x48, 0x50, 0x01, 0x01, 0x01, 0x00, 0x00, 0x00]
    );
    // f64 1.0 little-endian for w and for confidence
    assert_eq!(&golden[40..48], &[0, 0, 0, 0, 0, 0, 0xF0, 0x3F]);
    assert_eq!(&golden[72..80], &[0, 0, 0, 0, 0, 0, 0xF0, 0x3F]);
}

#[test]
fn hand_confidence_half_golden() {
    let golden = fixture("hand_conf_half.bin");
    let sample = HandSample {
        seq: 1,
        timestamp_us: 0,
        pose: Pose::new(Vec3::zero(), Quat::identity()),
        confidence: 0.5,
    };
    assert_eq!(encode_hand(&sample).unwrap().as_slice(), golden.as_slice());
    assert_eq!(decode_hand(&golden).unwrap(), sample);
    // f64 0.5 little-endian in the last 8 bytes
    assert_eq!(&golden[72..80], &[0, 0, 0, 0, 0, 0, 0xE0, 0x3F]);
}

#[test]
fn joint_zero_golden() {
    let golden = fixture("joint_zero.bin");
    let msg = JointStateMsg {
        seq: 0,
        timestamp_us: 0,
        positions: [0.0; 7],
        velocities: [0.0; 7],
    };
    assert_eq!(encode_joint(&msg).as_slice(), golden.as_slice());
    assert_eq!(decode_joint(&golden).unwrap(), msg);
    assert_eq!(&golden[..4], &[0x48, 0x50, 0x01, 0x02]);
    assert!(golden[4..].iter().all(|&b| b == 0));
    assert_eq!(golden.len(), 128);
}
