//! Binary datagram protocol for the hand-pose stream (headset to robot)
//! and the joint-state backchannel (robot to headset), plus UDP endpoints.
//!
//! Layouts are fixed and little-endian.  Both message types share a 16-byte
//! header: magic `0x48 0x50`, version, type, `seq: u32`, `timestamp_us:
//! u64`.  Hand messages carry position (3 x f64), orientation quaternion
//! (w, x, y, z as f64) and a confidence scalar: 80 bytes total.  Joint
//! messages carry 7 positions and 7 velocities: 128 bytes total.
//!
//! Delivery is latest-only: no retransmission or acknowledgment.  The
//! [`freshness_gate`] admits a datagram only if it advances the sequence
//! number and is not older than `max_age_us` on the receiver clock.

use crate::geometry::{Pose, Quat, Vec3};
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;
use thiserror::Error;

pub const WIRE_MAGIC: [u8; 2] = [0x48, 0x50];
pub const WIRE_VERSION: u8 = 0x01;
pub const MSG_TYPE_HAND: u8 = 0x01;
pub const MSG_TYPE_JOINT: u8 = 0x02;
pub const HAND_MSG_LEN: usize = 80;
pub const JOINT_MSG_LEN: usize = 128;

/// Default port for the hand-pose stream.
pub const HAND_PORT: u16 = 47800;
/// Default port for the joint-state backchannel.
pub const JOINT_PORT: u16 = 47801;
/// Datagrams older than this on the receiver clock are dropped.
pub const DEFAULT_MAX_AGE_US: u64 = 100_000;
/// Tolerated deviation of the encoded quaternion norm from one.
pub const QUAT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported protocol version")]
    BadVersion,
    #[error("unexpected message type")]
    BadType,
    #[error("datagram truncated or over-long")]
    Truncated,
    #[error("quaternion is not unit norm")]
    NonUnitQuat,
}

/// One tracked hand pose as sent by the headset side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandSample {
    pub seq: u32,
    /// Sender-monotonic microseconds; not corrected across clocks.
    pub timestamp_us: u64,
    pub pose: Pose,
    /// Tracking confidence in [0, 1].
    pub confidence: f64,
}

/// Robot joint state as relayed back to the headset side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointStateMsg {
    pub seq: u32,
    pub timestamp_us: u64,
    pub positions: [f64; 7],
    pub velocities: [f64; 7],
}

fn put_f64(buf: &mut [u8], off: usize, v: f64) -> usize {
    buf[off..off + 8].copy_from_slice(&v.to_le_bytes());
    off + 8
}

fn get_f64(buf: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(buf[off..off + 8].try_into().expect("8-byte slice"))
}

fn encode_header(buf: &mut [u8], msg_type: u8, seq: u32, timestamp_us: u64) {
    buf[0] = WIRE_MAGIC[0];
    buf[1] = WIRE_MAGIC[1];
    buf[2] = WIRE_VERSION;
    buf[3] = msg_type;
    buf[4..8].copy_from_slice(&seq.to_le_bytes());
    buf[8..16].copy_from_slice(&timestamp_us.to_le_bytes());
}

/// Checks magic, version, expected type, then exact length.
fn check_header(buf: &[u8], expect_type: u8, expect_len: usize) -> Result<(), WireError> {
    if buf.len() < 4 {
        return Err(WireError::Truncated);
    }
    if buf[0] != WIRE_MAGIC[0] || buf[1] != WIRE_MAGIC[1] {
        return Err(WireError::BadMagic);
    }
    if buf[2] != WIRE_VERSION {
        return Err(WireError::BadVersion);
    }
    if buf[3] != expect_type {
        return Err(WireError::BadType);
    }
    if buf.len() != expect_len {
        return Err(WireError::Truncated);
    }
    Ok(())
}

fn quat_is_unit(q: Quat) -> bool {
    // written so NaN components fail the test
    (q.norm() - 1.0).abs() <= QUAT_NORM_TOL
}

/// Serialize a hand sample into its 80-byte datagram.
pub fn encode_hand(s: &HandSample) -> Result<[u8; HAND_MSG_LEN], WireError> {
    if !quat_is_unit(s.pose.orientation) {
        return Err(WireError::NonUnitQuat);
    }
    let mut buf = [0u8; HAND_MSG_LEN];
    encode_header(&mut buf, MSG_TYPE_HAND, s.seq, s.timestamp_us);
    let mut off = 16;
    off = put_f64(&mut buf, off, s.pose.position.x);
    off = put_f64(&mut buf, off, s.pose.position.y);
    off = put_f64(&mut buf, off, s.pose.position.z);
    off = put_f64(&mut buf, off, s.pose.orientation.w);
    off = put_f64(&mut buf, off, s.pose.orientation.x);
    off = put_f64(&mut buf, off, s.pose.orientation.y);
    off = put_f64(&mut buf, off, s.pose.orientation.z);
    put_f64(&mut buf, off, s.confidence);
    Ok(buf)
}

/// Parse an 80-byte hand datagram; never panics on arbitrary input.
pub fn decode_hand(buf: &[u8]) -> Result<HandSample, WireError> {
    check_header(buf, MSG_TYPE_HAND, HAND_MSG_LEN)?;
    let seq = u32::from_le_bytes(buf[4..8].try_into().expect("4-byte slice"));
    let timestamp_us = u64::from_le_bytes(buf[8..16].try_into().expect("8-byte slice"));
    let position = Vec3::new(get_f64(buf, 16), get_f64(buf, 24), get_f64(buf, 32));
    let orientation = Quat::new(
        get_f64(buf, 40),
        get_f64(buf, 48),
        get_f64(buf, 56),
        get_f64(buf, 64),
    );
    if !quat_is_unit(orientation) {
        return Err(WireError::NonUnitQuat);
    }
    Ok(HandSample {
        seq,
        timestamp_us,
        pose: Pose::new(position, orientation),
        confidence: get_f64(buf, 72),
    })
}

/// Serialize a joint-state message into its 128-byte datagram.
pub fn encode_joint(m: &JointStateMsg) -> [u8; JOINT_MSG_LEN] {
    let mut buf = [0u8; JOINT_MSG_LEN];
    encode_header(&mut buf, MSG_TYPE_JOINT, m.seq, m.timestamp_us);
    let mut off = 16;
    for v in m.positions.iter().chain(m.velocities.iter()) {
        off = put_f64(&mut buf, off, *v);
    }
    buf
}

/// Parse a 128-byte joint datagram; never panics on arbitrary input.
pub fn decode_joint(buf: &[u8]) -> Result<JointStateMsg, WireError> {
    check_header(buf, MSG_TYPE_JOINT, JOINT_MSG_LEN)?;
    let seq = u32::from_le_bytes(buf[4..8].try_into().expect("4-byte slice"));
    let timestamp_us = u64::from_le_bytes(buf[8..16].try_into().expect("8-byte slice"));
    let mut positions = [0.0; 7];
    let mut velocities = [0.0; 7];
    for (i, p) in positions.iter_mut().enumerate() {
        *p = get_f64(buf, 16 + 8 * i);
    }
    for (i, v) in velocities.iter_mut().enumerate() {
        *v = get_f64(buf, 72 + 8 * i);
    }
    Ok(JointStateMsg {
        seq,
        timestamp_us,
        positions,
        velocities,
    })
}

/// Outcome of the latest-only admission rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accept,
    /// Sequence number did not advance.
    DropReordered,
    /// Older than `max_age_us` on the receiver clock.
    DropStale,
}

/// Latest-only admission: accept iff the sequence number advances and the
/// datagram is no older than `max_age_us` (receiver clock; a timestamp in
/// the receiver's future counts as age zero).
pub fn freshness_gate(
    last_accepted_seq: Option<u32>,
    seq: u32,
    timestamp_us: u64,
    receiver_now_us: u64,
    max_age_us: u64,
) -> Admission {
    if let Some(last) = last_accepted_seq {
        if seq <= last {
            return Admission::DropReordered;
        }
    }
    if receiver_now_us.saturating_sub(timestamp_us) > max_age_us {
        return Admission::DropStale;
    }
    Admission::Accept
}

/// Single-slot handoff between a receiver loop and a consumer; values are
/// transferred whole (no torn reads) and newer values replace older ones.
#[derive(Debug)]
pub struct Mailbox<T>(Arc<Mutex<Option<T>>>);

impl<T> Clone for Mailbox<T> {
    fn clone(&self) -> Self {
        Self(Arc::clone(&self.0))
    }
}

impl<T> Default for Mailbox<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Mailbox<T> {
    pub fn new() -> Self {
        Self(Arc::new(Mutex::new(None)))
    }

    /// Replace the slot with a newer value.
    pub fn put(&self, value: T) {
        *self.0.lock().expect("mailbox poisoned") = Some(value);
    }

    /// Consume the latest value, leaving the slot empty.
    pub fn take(&self) -> Option<T> {
        self.0.lock().expect("mailbox poisoned").take()
    }
}

impl<T: Clone> Mailbox<T> {
    /// Read the latest value without consuming it.
    pub fn peek(&self) -> Option<T> {
        self.0.lock().expect("mailbox poisoned").clone()
    }
}

/// Receiver-side admission counters.
#[derive(Debug, Default)]
pub struct RxStats {
    pub accepted: AtomicU64,
    pub dropped_reordered: AtomicU64,
    pub dropped_stale: AtomicU64,
    pub decode_errors: AtomicU64,
}

/// UDP receiver for the hand stream: reads datagrams, decodes, gates, and
/// publishes the latest accepted sample into a mailbox.
pub struct HandReceiver {
    pub mailbox: Mailbox<HandSample>,
    pub stats: Arc<RxStats>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    local_addr: SocketAddr,
}

impl HandReceiver {
    /// Bind `addr` (e.g. `0.0.0.0:47800`) and start the receive loop on its
    /// own thread.  `now_us` supplies the receiver clock for the gate.
    pub fn bind<A, F>(addr: A, max_age_us: u64, now_us: F) -> io::Result<Self>
    where
        A: ToSocketAddrs,
        F: Fn() -> u64 + Send + 'static,
    {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let local_addr = socket.local_addr()?;
        let mailbox = Mailbox::new();
        let stats = Arc::new(RxStats::default());
        let stop = Arc::new(AtomicBool::new(false));

        let mb = mailbox.clone();
        let st = Arc::clone(&stats);
        let stop_flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || {
            let mut buf = [0u8; 512];
            let mut last_seq: Option<u32> = None;
            while !stop_flag.load(Ordering::Relaxed) {
                let n = match socket.recv(&mut buf) {
                    Ok(n) => n,
                    Err(e)
                        if e.kind() == io::ErrorKind::WouldBlock
                            || e.kind() == io::ErrorKind::TimedOut =>
                    {
                        continue;
                    }
                    Err(_) => break,
                };
                let sample = match decode_hand(&buf[..n]) {
                    Ok(s) => s,
                    Err(_) => {
                        st.decode_errors.fetch_add(1, Ordering::Relaxed);
                        continue;
                    }
                };
                match freshness_gate(
                    last_seq,
                    sample.seq,
                    sample.timestamp_us,
                    now_us(),
                    max_age_us,
                ) {
                    Admission::Accept => {
                        last_seq = Some(sample.seq);
                        st.accepted.fetch_add(1, Ordering::Relaxed);
                        mb.put(sample);
                    }
                    Admission::DropReordered => {
                        st.dropped_reordered.fetch_add(1, Ordering::Relaxed);
                    }
                    Admission::DropStale => {
                        st.dropped_stale.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }
        });

        Ok(Self {
            mailbox,
            stats,
            stop,
            handle: Some(handle),
            local_addr,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Signal the loop to stop and join it.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for HandReceiver {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Send one hand sample as a single datagram.
pub fn send_hand<A: ToSocketAddrs>(
    socket: &UdpSocket,
    to: A,
    sample: &HandSample,
) -> io::Result<()> {
    let buf = encode_hand(sample)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    socket.send_to(&buf, to)?;
    Ok(())
}

/// Send one joint-state message as a single datagram.
pub fn send_joint<A: ToSocketAddrs>(
    socket: &UdpSocket,
    to: A,
    msg: &JointStateMsg,
) -> io::Result<()> {
    socket.send_to(&encode_joint(msg), to)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hand(rng: &mut ChaCha8Rng) -> HandSample {
        let q = Quat::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let q = if q.norm() < 1e-3 {
            Quat::identity()
        } else {
            q.normalized()
        };
        HandSample {
            seq: rng.random(),
            timestamp_us: rng.random(),
            pose: Pose::new(
                Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ),
                q,
            ),
            confidence: rng.random_range(0.0..1.0),
        }
    }

    fn random_joint(rng: &mut ChaCha8Rng) -> JointStateMsg {
        let mut m = JointStateMsg {
            seq: rng.random(),
            timestamp_us: rng.random(),
            positions: [0.0; 7],
            velocities: [0.0; 7],
        };
        for v in m.positions.iter_mut().chain(m.velocities.iter_mut()) {
            *v = rng.random_range(-4.0..4.0);
        }
        m
    }

    #[test]
    fn hand_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let s = random_hand(&mut rng);
            let buf = encode_hand(&s).unwrap();
            assert_eq!(buf.len(), HAND_MSG_LEN);
            let back = decode_hand(&buf).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn joint_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100_000 {
            let m = random_joint(&mut rng);
            let buf = encode_joint(&m);
            assert_eq!(buf.len(), JOINT_MSG_LEN);
            assert_eq!(decode_joint(&buf).unwrap(), m);
        }
    }

    #[test]
    fn decode_error_taxonomy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_hand(&mut rng);
        let buf = encode_hand(&s).unwrap();

        assert_eq!(decode_hand(&buf[..79]), Err(WireError::Truncated));
        assert_eq!(decode_hand(&[]), Err(WireError::Truncated));
        assert_eq!(decode_hand(&buf[..3]), Err(WireError::Truncated));

        let mut bad = buf;
        bad[0] = 0x00;
        assert_eq!(decode_hand(&bad), Err(WireError::BadMagic));

        let mut bad = buf;
        bad[2] = 0x02;
        assert_eq!(decode_hand(&bad), Err(WireError::BadVersion));

        let mut bad = buf;
        bad[3] = MSG_TYPE_JOINT;
        assert_eq!(decode_hand(&bad), Err(WireError::BadType));

        // a joint-length buffer with hand type byte is a type error for the
        // joint decoder
        let j = encode_joint(&random_joint(&mut rng));
        let mut bad = j;
        bad[3] = MSG_TYPE_HAND;
        assert_eq!(decode_joint(&bad), Err(WireError::BadType));

        // zero quaternion
        let mut bad = buf;
        for b in bad[40..72].iter_mut() {
            *b = 0;
        }
        assert_eq!(decode_hand(&bad), Err(WireError::NonUnitQuat));
    }

    #[test]
    fn encode_rejects_non_unit_quaternion() {
        let mut s = HandSample {
            seq: 0,
            timestamp_us: 0,
            pose: Pose::identity(),
            confidence: 1.0,
        };
        s.pose.orientation = Quat::new(0.5, 0.5, 0.0, 0.0);
        assert_eq!(encode_hand(&s), Err(WireError::NonUnitQuat));
        s.pose.orientation = Quat::new(f64::NAN, 0.0, 0.0, 0.0);
        assert_eq!(encode_hand(&s), Err(WireError::NonUnitQuat));
    }

    #[test]
    fn decode_fuzz_never_panics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut decoded = 0u32;
        for i in 0..1_000_000u32 {
            let len = match i % 7 {
                // weight the interesting lengths heavily
                0 => 80,
                1 => 128,
                2 => rng.random_range(0..4),
                _ => rng.random_range(0..200),
            };
            let mut buf = vec![0u8; len];
            rng.fill(&mut buf[..]);
            if i % 3 == 0 && len >= 4 {
                // bias toward passing the header checks
                buf[0] = WIRE_MAGIC[0];
                buf[1] = WIRE_MAGIC[1];
                buf[2] = WIRE_VERSION;
                buf[3] = if i % 2 == 0 {
                    MSG_TYPE_HAND
                } else {
                    MSG_TYPE_JOINT
                };
            }
            if let Ok(s) = decode_hand(&buf) {
                assert!(quat_is_unit(s.pose.orientation));
                decoded += 1;
            }
            if decode_joint(&buf).is_ok() {
                decoded += 1;
            }
        }
        // random bytes essentially never form a unit quaternion, but some
        // joint messages decode; the point is no panics either way
        let _ = decoded;
    }

    #[test]
    fn freshness_gate_rules() {
        // fresh advance
        assert_eq!(
            freshness_gate(Some(5), 6, 1_000, 1_500, 100_000),
            Admission::Accept
        );
        // equal seq is a reorder
        assert_eq!(
            freshness_gate(Some(5), 5, 1_000, 1_500, 100_000),
            Admission::DropReordered
        );
        // advance but twice the max age
        assert_eq!(
            freshness_gate(Some(5), 6, 0, 200_000, 100_000),
            Admission::DropStale
        );
        // first sample: no last seq
        assert_eq!(freshness_gate(None, 0, 0, 0, 100_000), Admission::Accept);
        // timestamp in the receiver's future (clock lead) is fine
        assert_eq!(freshness_gate(None, 1, 2_000, 1_000, 0), Admission::Accept);
        // reorder takes precedence over staleness
        assert_eq!(
            freshness_gate(Some(9), 3, 0, 200_000, 100_000),
            Admission::DropReordered
        );
    }

    #[test]
    fn mailbox_latest_only_handoff() {
        let mb: Mailbox<u32> = Mailbox::new();
        assert_eq!(mb.take(), None);
        mb.put(1);
        mb.put(2);
        assert_eq!(mb.peek(), Some(2));
        assert_eq!(mb.take(), Some(2));
        assert_eq!(mb.take(), None);
    }

    #[test]
    fn udp_loopback_delivers_latest_sample() {
        let rx = HandReceiver::bind("127.0.0.1:0", u64::MAX, || 0).unwrap();
        let to = rx.local_addr();
        let tx = UdpSocket::bind("127.0.0.1:0").unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut last = None;
        for seq in 1..=20u32 {
            let mut s = random_hand(&mut rng);
            s.seq = seq;
            s.timestamp_us = seq as u64 * 1_000;
            send_hand(&tx, to, &s).unwrap();
            last = Some(s);
        }
        // wait for the receiver thread to drain the socket
        let deadline = std::time::Instant::now() + Duration::from_secs(5);
        loop {
            if let Some(got) = mb_peek(&rx) {
                if Some(got) == last {
                    break;
                }
            }
            assert!(
                std::time::Instant::now() < deadline,
                "receiver never caught up"
            );
            std::thread::sleep(Duration::from_millis(5));
        }
        assert!(rx.stats.accepted.load(Ordering::Relaxed) >= 1);
        rx.shutdown();
    }

    fn mb_peek(rx: &HandReceiver) -> Option<HandSample> {
        rx.mailbox.peek()
    }
}
