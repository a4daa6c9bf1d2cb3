//! Procedural walking, turning and sit/stand motion at 10 Hz.
//!
//! The hip follows a planar path built from straight and circular segments
//! while the limbs swing with a gait phase locked to distance travelled.
//! All coordinates are snapped to [`GRID`](super::skeleton::GRID).

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sequence::MotionSequence;
use super::skeleton::{joint, snap_to_grid, Skeleton, NUM_JOINTS};
use crate::error::{Error, Result};

pub const SYNTHETIC_RATE_HZ: f64 = 10.0;

const STRIDE_M: f64 = 1.4;
const S_CURVE_RADIUS: f64 = 3.0;
const S_CURVE_SWEEP: f64 = PI / 3.0;
const U_TURN_RADIUS: f64 = 2.5;
const SIT_DROP_M: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    StraightWalk,
    SCurveWalk,
    UTurnWalk,
    SitStand,
    Stationary,
}

impl MotionKind {
    pub const ALL: [MotionKind; 5] = [
        MotionKind::StraightWalk,
        MotionKind::SCurveWalk,
        MotionKind::UTurnWalk,
        MotionKind::SitStand,
        MotionKind::Stationary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotionKind::StraightWalk => "straight_walk",
            MotionKind::SCurveWalk => "s_curve_walk",
            MotionKind::UTurnWalk => "u_turn_walk",
            MotionKind::SitStand => "sit_stand",
            MotionKind::Stationary => "stationary",
        }
    }

    fn walks(self) -> bool {
        matches!(
            self,
            MotionKind::StraightWalk | MotionKind::SCurveWalk | MotionKind::UTurnWalk
        )
    }
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind {
                what: "motion kind",
                name: s.to_string(),
            })
    }
}

/// Per-subject variation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub speed_mps: f64,
    pub scale: f64,
    pub gait_phase: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        Self {
            speed_mps: 1.0,
            scale: 1.0,
            gait_phase: 0.0,
        }
    }
}

impl BodyParams {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self {
            speed_mps: 1.0 + rng.random_range(-0.03..0.03),
            scale: 1.0 + rng.random_range(-0.04..0.04),
            gait_phase: rng.random_range(0.0..TAU),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    Line(f64),
    /// Signed curvature (positive turns left) and length.
    Arc { curvature: f64, length: f64 },
}

impl Segment {
    fn length(self) -> f64 {
        match self {
            Segment::Line(l) => l,
            Segment::Arc { length, .. } => length,
        }
    }

    fn advance(self, (x, y, th): (f64, f64, f64), u: f64) -> (f64, f64, f64) {
        match self {
            Segment::Line(_) => (x + u * th.cos(), y + u * th.sin(), th),
            Segment::Arc { curvature: k, .. } => {
                let th1 = th + k * u;
                (
                    x + (th1.sin() - th.sin()) / k,
                    y - (th1.cos() - th.cos()) / k,
                    th1,
                )
            }
        }
    }
}

/// Planar path starting at the origin heading +x. Beyond either end it
/// continues straight along the boundary heading.
#[derive(Clone, Debug)]
struct PlanarPath {
    segments: Vec<Segment>,
}

impl PlanarPath {
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let mut state = (0.0, 0.0, 0.0);
        if s <= 0.0 {
            return (s, 0.0, 0.0);
        }
        let mut remaining = s;
        for &seg in &self.segments {
            let len = seg.length();
            if remaining <= len {
                return seg.advance(state, remaining);
            }
            state = seg.advance(state, len);
            remaining -= len;
        }
        Segment::Line(f64::INFINITY).advance(state, remaining)
    }

    fn for_kind(kind: MotionKind, total_length: f64) -> Self {
        let segments = match kind {
            MotionKind::SCurveWalk => {
                let k = 1.0 / S_CURVE_RADIUS;
                let mut segs = vec![Segment::Arc {
                    curvature: k,
                    length: S_CURVE_SWEEP * S_CURVE_RADIUS,
                }];
                let mut covered = segs[0].length();
                let mut sign = -1.0;
                while covered < total_length {
                    let seg = Segment::Arc {
                        curvature: sign * k,
                        length: 2.0 * S_CURVE_SWEEP * S_CURVE_RADIUS,
                    };
                    covered += seg.length();
                    segs.push(seg);
                    sign = -sign;
                }
                segs
            }
            MotionKind::UTurnWalk => {
                let arc = PI * U_TURN_RADIUS;
                let lead = ((total_length - arc) / 2.0).max(0.0);
                vec![
                    Segment::Line(lead),
                    Segment::Arc {
                        curvature: 1.0 / U_TURN_RADIUS,
                        length: arc,
                    },
                ]
            }
            _ => Vec::new(),
        };
        Self { segments }
    }
}

/// Deterministic motion of one subject over time.
#[derive(Clone, Debug)]
pub struct MotionScript {
    pub kind: MotionKind,
    pub body: BodyParams,
    pub duration_s: f64,
    path: PlanarPath,
}

/// Ground-plane position and facing of the scripted subject.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl MotionScript {
    pub fn new(kind: MotionKind, body: BodyParams, duration_s: f64) -> Self {
        let length = if kind.walks() {
            body.speed_mps * duration_s.max(0.0)
        } else {
            0.0
        };
        Self {
            kind,
            body,
            duration_s,
            path: PlanarPath::for_kind(kind, length),
        }
    }

    fn distance(&self, t: f64) -> f64 {
        if self.kind.walks() {
            self.body.speed_mps * t
        } else {
            0.0
        }
    }

    pub fn ground_state(&self, t: f64) -> GroundState {
        let (x, y, heading) = self.path.eval(self.distance(t));
        GroundState { x, y, heading }
    }

    /// Hip drop for the sit/stand cycle: stand 1 s, sit down over 2 s, stay
    /// 2 s, stand up over 2 s, stand 1 s.
    fn sit_depth(&self, t: f64) -> f64 {
        if self.kind != MotionKind::SitStand || t <= 0.0 {
            return 0.0;
        }
        let c = t % 8.0;
        let ease = |u: f64| 0.5 * (1.0 - (PI * u).cos());
        SIT_DROP_M
            * match c {
                c if c < 1.0 => 0.0,
                c if c < 3.0 => ease((c - 1.0) / 2.0),
                c if c < 5.0 => 1.0,
                c if c < 7.0 => 1.0 - ease((c - 5.0) / 2.0),
                _ => 0.0,
            }
    }

    pub fn skeleton_at(&self, t: f64) -> Skeleton {
        let ground = self.ground_state(t);
        let sc = self.body.scale;
        let walking = if self.kind.walks() { 1.0 } else { 0.0 };
        let phase = self.body.gait_phase + TAU * self.distance(t) / STRIDE_M;
        let drop = self.sit_depth(t);

        // body frame: x forward, y left, z up, origin on the ground below the hip
        let mut body = [[0.0f64; 3]; NUM_JOINTS];
        let hip_z = 0.95 * sc - drop + 0.015 * sc * walking * (2.0 * phase).cos();
        let hip_x = -0.5 * drop;
        body[joint::HIP] = [hip_x, 0.0, hip_z];

        let (thigh, shank) = (0.45 * sc, 0.43 * sc);
        for (side, hip_j, knee_j, ankle_j) in [
            (-1.0, joint::RIGHT_HIP, joint::RIGHT_KNEE, joint::RIGHT_ANKLE),
            (1.0, joint::LEFT_HIP, joint::LEFT_KNEE, joint::LEFT_ANKLE),
        ] {
            let hp = [hip_x, side * 0.1 * sc, hip_z];
            body[hip_j] = hp;
            let (knee, ankle) = if drop > 0.0 {
                leg_ik(hp, [0.0, hp[1], 0.07 * sc], thigh, shank)
            } else {
                // right leg leads when sin(phase) > 0
                let swing = -side * 0.35 * walking * phase.sin();
                let flex = 0.4 * walking * 0.5 * (1.0 - side * phase.cos());
                let knee = [
                    hp[0] + thigh * swing.sin(),
                    hp[1],
                    hp[2] - thigh * swing.cos(),
                ];
                let a = swing - flex;
                (knee, [knee[0] + shank * a.sin(), hp[1], knee[2] - shank * a.cos()])
            };
            body[knee_j] = knee;
            body[ankle_j] = ankle;
        }

        let lean = 0.6 * drop;
        let upper = |p: [f64; 3]| -> [f64; 3] {
            let (x, z) = (p[0], p[2]);
            [
                hip_x + x * lean.cos() + z * lean.sin(),
                p[1],
                hip_z - x * lean.sin() + z * lean.cos(),
            ]
        };
        body[joint::SPINE] = upper([0.0, 0.0, 0.22 * sc]);
        body[joint::NECK] = upper([0.02 * sc, 0.0, 0.5 * sc]);
        body[joint::HEAD] = upper([0.05 * sc, 0.0, 0.62 * sc]);
        body[joint::HEAD_TOP] = upper([0.03 * sc, 0.0, 0.75 * sc]);
        for (side, sh, el, wr) in [
            (1.0, joint::LEFT_SHOULDER, joint::LEFT_ELBOW, joint::LEFT_WRIST),
            (-1.0, joint::RIGHT_SHOULDER, joint::RIGHT_ELBOW, joint::RIGHT_WRIST),
        ] {
            let swing = side * 0.3 * walking * phase.sin();
            let shoulder = [0.0, side * 0.18 * sc, 0.47 * sc];
            let elbow = [
                shoulder[0] + 0.28 * sc * swing.sin(),
                side * 0.2 * sc,
                shoulder[2] - 0.28 * sc * swing.cos(),
            ];
            let fa = swing + 0.3;
            let wrist = [
                elbow[0] + 0.25 * sc * fa.sin(),
                side * 0.2 * sc,
                elbow[2] - 0.25 * sc * fa.cos(),
            ];
            body[sh] = upper(shoulder);
            body[el] = upper(elbow);
            body[wr] = upper(wrist);
        }

        let (s, c) = ground.heading.sin_cos();
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (out, p) in joints.iter_mut().zip(&body) {
            *out = [
                snap_to_grid(ground.x + c * p[0] - s * p[1]),
                snap_to_grid(ground.y + s * p[0] + c * p[1]),
                snap_to_grid(p[2]),
            ];
        }
        Skeleton { joints }
    }

    /// Frames at `t = k / 10` for `k in 0..round(duration * 10)`.
    pub fn sequence(&self) -> Result<MotionSequence> {
        let n = (self.duration_s * SYNTHETIC_RATE_HZ).round();
        if !(n >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "duration {} s yields no frames at {SYNTHETIC_RATE_HZ} Hz",
                self.duration_s
            )));
        }
        let frames = (0..n as usize)
            .map(|k| self.skeleton_at(k as f64 / SYNTHETIC_RATE_HZ))
            .collect();
        MotionSequence::new(frames, SYNTHETIC_RATE_HZ)
    }
}

/// Two-link leg with the knee bending forward.
fn leg_ik(hip: [f64; 3], ankle: [f64; 3], thigh: f64, shank: f64) -> ([f64; 3], [f64; 3]) {
    let (dx, dz) = (ankle[0] - hip[0], ankle[2] - hip[2]);
    let d = (dx * dx + dz * dz).sqrt().min(thigh + shank - 1e-9);
    let psi = dz.atan2(dx);
    let cos_a = ((thigh * thigh + d * d - shank * shank) / (2.0 * thigh * d)).clamp(-1.0, 1.0);
    let a = psi + cos_a.acos();
    let knee = [hip[0] + thigh * a.cos(), hip[1], hip[2] + thigh * a.sin()];
    (knee, ankle)
}

/// Seeded synthetic sequence at 10 Hz.
pub fn generate_synthetic(kind: MotionKind, duration_s: f64, seed: u64) -> Result<MotionSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = BodyParams::sample(&mut rng);
    MotionScript::new(kind, body, duration_s).sequence()
}

/// Same as [`generate_synthetic`] with the kind given by name.
pub fn generate_synthetic_named(kind: &str, duration_s: f64, seed: u64) -> Result<MotionSequence> {
    generate_synthetic(kind.parse()?, duration_s, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hip_xy(s: &Skeleton) -> (f64, f64) {
        (s.joints[0][0], s.joints[0][1])
    }

    fn wrap(a: f64) -> f64 {
        let mut a = a % TAU;
        if a > PI {
            a -= TAU;
        } else if a <= -PI {
            a += TAU;
        }
        a
    }

    #[test]
    fn stationary_frames_are_identical() {
        let seq = generate_synthetic(MotionKind::Stationary, 3.0, 5).unwrap();
        assert_eq!(seq.len(), 30);
        assert!(seq.frames.iter().all(|f| *f == seq.frames[0]));
    }

    #[test]
    fn straight_walk_covers_ten_meters() {
        let seq = generate_synthetic(MotionKind::StraightWalk, 10.0, 1).unwrap();
        assert_eq!(seq.len(), 100);
        let (x0, y0) = hip_xy(&seq.frames[0]);
        let (x1, y1) = hip_xy(seq.frames.last().unwrap());
        let d = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        assert!((d - 10.0).abs() <= 0.5, "displacement {d}");
    }

    #[test]
    fn u_turn_reverses_heading() {
        let seq = generate_synthetic(MotionKind::UTurnWalk, 10.0, 2).unwrap();
        let dir = |a: &Skeleton, b: &Skeleton| {
            let (xa, ya) = hip_xy(a);
            let (xb, yb) = hip_xy(b);
            (yb - ya).atan2(xb - xa)
        };
        let n = seq.len();
        let start = dir(&seq.frames[0], &seq.frames[3]);
        let end = dir(&seq.frames[n - 4], &seq.frames[n - 1]);
        let diff = wrap(end - (start + PI)).abs();
        assert!(diff < 15f64.to_radians(), "heading error {} deg", diff.to_degrees());

        // the hip line agrees: left→right hip vector rotated +90° is the facing
        let last = seq.frames[n - 1];
        let l = last.joints[joint::LEFT_HIP];
        let r = last.joints[joint::RIGHT_HIP];
        let facing = (r[0] - l[0]).atan2(-(r[1] - l[1]));
        assert!(wrap(facing - (start + PI)).abs() < 15f64.to_radians());
    }

    #[test]
    fn sit_stand_drops_hip_by_forty_centimeters() {
        let seq = generate_synthetic(MotionKind::SitStand, 8.0, 3).unwrap();
        let z: Vec<f64> = seq.frames.iter().map(|f| f.joints[0][2]).collect();
        let top = z[0];
        let bottom = z.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(((top - bottom) - SIT_DROP_M).abs() < 1e-3, "{}", top - bottom);
        // down over 2 s (frames 10..30), back up by frame 70
        assert!((z[30] - bottom).abs() < 1e-3);
        assert!((z[75] - top).abs() < 1e-3);
        // feet stay on the ground while sitting
        let ankle_z = seq.frames[40].joints[joint::RIGHT_ANKLE][2];
        assert!((ankle_z - seq.frames[40].joints[joint::LEFT_ANKLE][2]).abs() < 1e-9);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        for kind in MotionKind::ALL {
            let a = generate_synthetic(kind, 4.0, 9).unwrap();
            let b = generate_synthetic(kind, 4.0, 9).unwrap();
            assert_eq!(a, b, "{kind}");
        }
        let a = generate_synthetic(MotionKind::StraightWalk, 4.0, 1).unwrap();
        let b = generate_synthetic(MotionKind::StraightWalk, 4.0, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn unknown_kind_is_a_usage_error() {
        assert!(matches!(
            generate_synthetic_named("moonwalk", 1.0, 0),
            Err(Error::UnknownKind { .. })
        ));
        assert_eq!("s_curve_walk".parse::<MotionKind>().unwrap(), MotionKind::SCurveWalk);
    }

    #[test]
    fn generated_frames_round_trip_bitwise_through_decomposition() {
        for kind in MotionKind::ALL {
            let seq = generate_synthetic(kind, 6.0, 4).unwrap();
            for f in &seq.frames {
                let (p, t) = f.decompose();
                assert_eq!(Skeleton::compose(&p, &t), *f);
            }
        }
    }

    #[test]
    fn s_curve_weaves_both_ways() {
        let script = MotionScript::new(MotionKind::SCurveWalk, BodyParams::default(), 20.0);
        let headings: Vec<f64> = (0..200).map(|k| script.ground_state(k as f64 * 0.1).heading).collect();
        let max = headings.iter().cloned().fold(f64::MIN, f64::max);
        let min = headings.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - S_CURVE_SWEEP).abs() < 0.02);
        assert!((min + S_CURVE_SWEEP).abs() < 0.02);
        assert!(headings.iter().all(|h| h.abs() <= S_CURVE_SWEEP + 1e-9));
    }

    #[test]
    fn path_is_continuous() {
        for kind in [MotionKind::SCurveWalk, MotionKind::UTurnWalk] {
            let script = MotionScript::new(kind, BodyParams::default(), 20.0);
            let mut prev = script.ground_state(-1.0);
            for k in -9..250 {
                let g = script.ground_state(k as f64 * 0.1);
                let step = ((g.x - prev.x).powi(2) + (g.y - prev.y).powi(2)).sqrt();
                assert!(step <= 0.1 + 1e-9, "{kind} jump {step} at {k}");
                prev = g;
            }
        }
    }
}
