//! Reproducible synthetic motion corpora.
//!
//! Five deterministic kinematic template families (walk-cycle, sit-down,
//! stand-turn, arm-wave, crouch) animate the 17-keypoint preset skeleton.
//! They are parametric joint-trajectory programs, not learned generators, so
//! the generating family of every track is an exact planted mode label for
//! clustering oracles. Within-family variation comes only from per-track
//! parameter jitter (amplitude, frequency, phase, posture); distinct
//! families stay separated by at least ~1.5× the within-family mean pairwise
//! pose distance (asserted in tests).
//!
//! Two track layouts cover two testing needs:
//!
//! * **pure** (`idle_frames = 0`): each track runs its family program
//!   non-stop. Family labels map cleanly onto density clusters — the layout
//!   used by clustering-quality oracles.
//! * **branching** (`idle_frames > 0`): tracks alternate a *shared* idle
//!   stance (common to all families, gentle sway) with bursts of the family
//!   action, blended smoothly. Pasts that end in idle are followed by
//!   different actions in different tracks, which is what makes ground-truth
//!   futures genuinely multimodal — the regime the robustness sweeps need.
//!
//! Generated coordinates are quantized to `f32` precision at creation so a
//! corpus evaluates identically whether it stayed in memory or went through
//! the (f32 payload) container format.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::stage_rng;
use crate::motion::{MotionCorpus, Pose, Skeleton, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionFamily {
    WalkCycle,
    SitDown,
    StandTurn,
    ArmWave,
    Crouch,
}

impl MotionFamily {
    pub fn name(self) -> &'static str {
        match self {
            MotionFamily::WalkCycle => "walk-cycle",
            MotionFamily::SitDown => "sit-down",
            MotionFamily::StandTurn => "stand-turn",
            MotionFamily::ArmWave => "arm-wave",
            MotionFamily::Crouch => "crouch",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "walk-cycle" => MotionFamily::WalkCycle,
            "sit-down" => MotionFamily::SitDown,
            "stand-turn" => MotionFamily::StandTurn,
            "arm-wave" => MotionFamily::ArmWave,
            "crouch" => MotionFamily::Crouch,
            other => return Err(Error::InvalidArgument(format!("unknown motion family {other:?}"))),
        })
    }

    /// (max amplitude, max frequency in Hz) a spec may request. Amplitude is
    /// meters except for StandTurn where it is radians of torso twist.
    fn param_range(self) -> (f64, f64) {
        match self {
            MotionFamily::WalkCycle => (0.50, 2.5),
            MotionFamily::SitDown => (0.60, 1.0),
            MotionFamily::StandTurn => (1.20, 1.5),
            MotionFamily::ArmWave => (0.35, 3.0),
            MotionFamily::Crouch => (0.55, 1.5),
        }
    }
}

/// Parameters for one family's program. `duty` stretches or shrinks the
/// action bursts in branching layouts (1.0 = the configured action length),
/// which is how different families end up with different mode shares.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMotionSpec {
    pub family: MotionFamily,
    pub amplitude: f64,
    pub frequency: f64,
    pub amplitude_jitter: f64,
    pub frequency_jitter: f64,
    pub posture_jitter: f64,
    pub duty: f64,
}

impl SyntheticMotionSpec {
    pub fn new(family: MotionFamily, amplitude: f64, frequency: f64) -> Self {
        SyntheticMotionSpec {
            family,
            amplitude,
            frequency,
            amplitude_jitter: 0.10,
            frequency_jitter: 0.08,
            posture_jitter: 0.02,
            duty: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let (max_a, max_f) = self.family.param_range();
        let name = self.family.name();
        if !(self.amplitude > 0.0 && self.amplitude <= max_a) {
            return Err(Error::InvalidArgument(format!(
                "{name}: amplitude {} outside (0, {max_a}]",
                self.amplitude
            )));
        }
        if !(self.frequency > 0.0 && self.frequency <= max_f) {
            return Err(Error::InvalidArgument(format!(
                "{name}: frequency {} outside (0, {max_f}]",
                self.frequency
            )));
        }
        for (label, j) in [
            ("amplitude_jitter", self.amplitude_jitter),
            ("frequency_jitter", self.frequency_jitter),
        ] {
            if !(0.0..=0.5).contains(&j) {
                return Err(Error::InvalidArgument(format!("{name}: {label} {j} outside [0, 0.5]")));
            }
        }
        if !(0.0..=0.1).contains(&self.posture_jitter) {
            return Err(Error::InvalidArgument(format!(
                "{name}: posture_jitter {} outside [0, 0.1]",
                self.posture_jitter
            )));
        }
        if !(0.2..=2.0).contains(&self.duty) {
            return Err(Error::InvalidArgument(format!(
                "{name}: duty {} outside [0.2, 2.0]",
                self.duty
            )));
        }
        Ok(())
    }
}

/// The five stock families with their default parameters. Duties descend so
/// branching corpora plant modes with distinctly different population shares.
pub fn default_families() -> Vec<SyntheticMotionSpec> {
    let mut specs = vec![
        SyntheticMotionSpec::new(MotionFamily::WalkCycle, 0.30, 1.2),
        SyntheticMotionSpec::new(MotionFamily::SitDown, 0.45, 0.30),
        SyntheticMotionSpec::new(MotionFamily::StandTurn, 0.80, 0.50),
        SyntheticMotionSpec::new(MotionFamily::ArmWave, 0.18, 1.8),
        SyntheticMotionSpec::new(MotionFamily::Crouch, 0.40, 0.80),
    ];
    for (i, s) in specs.iter_mut().enumerate() {
        s.duty = 1.0 - 0.15 * i as f64;
    }
    specs
}

/// Corpus-level synthesis parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub tracks_per_family: usize,
    pub track_length: usize,
    pub frame_rate: f64,
    /// Frames of shared idle stance per cycle; 0 selects the pure layout.
    pub idle_frames: usize,
    /// Frames of cosine blend on each side of an action burst.
    pub blend_frames: usize,
    /// Frames of family action per cycle (scaled per family by `duty`).
    pub action_frames: usize,
    pub seed: u64,
}

impl SynthesisConfig {
    pub fn pure(tracks_per_family: usize, track_length: usize, frame_rate: f64, seed: u64) -> Self {
        SynthesisConfig {
            tracks_per_family,
            track_length,
            frame_rate,
            idle_frames: 0,
            blend_frames: 4,
            action_frames: 0,
            seed,
        }
    }

    pub fn branching(
        tracks_per_family: usize,
        track_length: usize,
        frame_rate: f64,
        idle_frames: usize,
        action_frames: usize,
        seed: u64,
    ) -> Self {
        SynthesisConfig {
            tracks_per_family,
            track_length,
            frame_rate,
            idle_frames,
            blend_frames: 4,
            action_frames,
            seed,
        }
    }
}

/// Generate a deterministic synthetic corpus. Tracks are ordered
/// family-major (`specs[0]` tracks first), so the planted label of track `i`
/// is `i / tracks_per_family`; `source_id` carries the family name
/// redundantly as `"<family>/<index>"`.
pub fn generate_synthetic(
    specs: &[SyntheticMotionSpec],
    cfg: &SynthesisConfig,
) -> Result<MotionCorpus> {
    if specs.is_empty() {
        return Err(Error::EmptyInput("no synthetic families requested".into()));
    }
    for s in specs {
        s.validate()?;
    }
    if cfg.tracks_per_family == 0 || cfg.track_length == 0 {
        return Err(Error::InvalidArgument(
            "tracks_per_family and track_length must be positive".into(),
        ));
    }
    if cfg.idle_frames > 0 && cfg.action_frames == 0 {
        return Err(Error::InvalidArgument(
            "branching layout needs action_frames > 0".into(),
        ));
    }

    let skeleton = Skeleton::h36m17();
    let mut tracks = Vec::with_capacity(specs.len() * cfg.tracks_per_family);
    for (fi, spec) in specs.iter().enumerate() {
        for ti in 0..cfg.tracks_per_family {
            let label = format!("synth/{}/{}", spec.family.name(), ti);
            let mut rng = stage_rng(cfg.seed, &label);
            let params = TrackParams::draw(spec, cfg, &mut rng);
            let frames = render_track(spec, cfg, &params);
            tracks.push(Track {
                source_id: format!("{}/{:03}", spec.family.name(), fi * cfg.tracks_per_family + ti),
                frames,
            });
        }
    }
    MotionCorpus::new(skeleton, cfg.frame_rate, tracks)
}

/// Per-track realized parameters after jitter.
#[derive(Debug, Clone)]
struct TrackParams {
    amplitude: f64,
    frequency: f64,
    phase: f64,
    sway_phase: f64,
    posture: [f64; 3],
    cycle_offset: usize,
    action_frames: usize,
}

impl TrackParams {
    fn draw(spec: &SyntheticMotionSpec, cfg: &SynthesisConfig, rng: &mut impl Rng) -> Self {
        let aj = spec.amplitude_jitter;
        let fj = spec.frequency_jitter;
        let pj = spec.posture_jitter;
        let amplitude = spec.amplitude * (1.0 + rng.gen_range(-aj..=aj));
        let frequency = spec.frequency * (1.0 + rng.gen_range(-fj..=fj));
        let phase = rng.gen_range(0.0..2.0 * PI);
        let sway_phase = rng.gen_range(0.0..2.0 * PI);
        let posture = [
            rng.gen_range(-pj..=pj),
            rng.gen_range(-pj..=pj),
            rng.gen_range(-pj..=pj),
        ];
        let action_frames = ((cfg.action_frames as f64) * spec.duty).round().max(1.0) as usize;
        let cycle_len = cfg.idle_frames + 2 * cfg.blend_frames + action_frames;
        let cycle_offset = if cfg.idle_frames > 0 { rng.gen_range(0..cycle_len) } else { 0 };
        TrackParams { amplitude, frequency, phase, sway_phase, posture, cycle_offset, action_frames }
    }
}

fn render_track(spec: &SyntheticMotionSpec, cfg: &SynthesisConfig, p: &TrackParams) -> Vec<Pose> {
    let dt = 1.0 / cfg.frame_rate;
    (0..cfg.track_length)
        .map(|frame| {
            let t = frame as f64 * dt;
            let raw = if cfg.idle_frames == 0 {
                action_pose(spec.family, t, p)
            } else {
                let w = action_weight(frame + p.cycle_offset, cfg, p);
                if w <= 0.0 {
                    idle_pose(t, p)
                } else if w >= 1.0 {
                    action_pose(spec.family, t, p)
                } else {
                    mix_pose(&idle_pose(t, p), &action_pose(spec.family, t, p), w)
                }
            };
            quantize_f32(raw)
        })
        .collect()
}

/// Blend weight of the action program at a (cycle-offset) frame index:
/// 0 inside idle, 1 inside the action burst, cosine ramps across blends.
fn action_weight(frame: usize, cfg: &SynthesisConfig, p: &TrackParams) -> f64 {
    let cycle = cfg.idle_frames + 2 * cfg.blend_frames + p.action_frames;
    let pos = frame % cycle;
    let ramp = |u: f64| 0.5 * (1.0 - (PI * u).cos());
    if pos < cfg.idle_frames {
        0.0
    } else if pos < cfg.idle_frames + cfg.blend_frames {
        ramp((pos - cfg.idle_frames) as f64 / cfg.blend_frames as f64)
    } else if pos < cfg.idle_frames + cfg.blend_frames + p.action_frames {
        1.0
    } else {
        let u = (pos - cfg.idle_frames - cfg.blend_frames - p.action_frames) as f64
            / cfg.blend_frames as f64;
        1.0 - ramp(u)
    }
}

fn mix_pose(a: &Pose, b: &Pose, w: f64) -> Pose {
    let coords = a
        .coords()
        .iter()
        .zip(b.coords())
        .map(|(ca, cb)| {
            [
                ca[0] * (1.0 - w) + cb[0] * w,
                ca[1] * (1.0 - w) + cb[1] * w,
                ca[2] * (1.0 - w) + cb[2] * w,
            ]
        })
        .collect();
    Pose::new(coords).expect("mixed pose is finite")
}

fn quantize_f32(mut pose: Pose) -> Pose {
    for c in pose.coords_mut() {
        for v in c.iter_mut() {
            *v = *v as f32 as f64;
        }
    }
    pose
}

// Keypoint indices of the 17-keypoint preset, named for readability. The
// full set is kept even where a program doesn't touch every joint.
#[allow(dead_code)]
const R_HIP: usize = 1;
const R_KNEE: usize = 2;
const R_FOOT: usize = 3;
#[allow(dead_code)]
const L_HIP: usize = 4;
const L_KNEE: usize = 5;
const L_FOOT: usize = 6;
const SPINE: usize = 7;
const THORAX: usize = 8;
const NECK: usize = 9;
const HEAD: usize = 10;
const L_SHOULDER: usize = 11;
const L_ELBOW: usize = 12;
const L_WRIST: usize = 13;
const R_SHOULDER: usize = 14;
const R_ELBOW: usize = 15;
const R_WRIST: usize = 16;

/// Root-relative rest stance shared by all programs (meters; y up, z forward).
fn rest_pose() -> [[f64; 3]; 17] {
    [
        [0.00, 0.00, 0.00],   // hip
        [0.13, 0.00, 0.00],   // r_hip
        [0.13, -0.45, 0.00],  // r_knee
        [0.13, -0.90, 0.00],  // r_foot
        [-0.13, 0.00, 0.00],  // l_hip
        [-0.13, -0.45, 0.00], // l_knee
        [-0.13, -0.90, 0.00], // l_foot
        [0.00, 0.25, 0.00],   // spine
        [0.00, 0.50, 0.00],   // thorax
        [0.00, 0.60, 0.00],   // neck
        [0.00, 0.75, 0.00],   // head
        [-0.20, 0.50, 0.00],  // l_shoulder
        [-0.23, 0.22, 0.00],  // l_elbow
        [-0.25, -0.05, 0.00], // l_wrist
        [0.20, 0.50, 0.00],   // r_shoulder
        [0.23, 0.22, 0.00],   // r_elbow
        [0.25, -0.05, 0.00],  // r_wrist
    ]
}

const TORSO: [usize; 10] =
    [SPINE, THORAX, NECK, HEAD, L_SHOULDER, L_ELBOW, L_WRIST, R_SHOULDER, R_ELBOW, R_WRIST];

/// Shared idle stance: the rest pose with a gentle lateral sway and a faint
/// breathing bob. Identical program across families (per-track phase only),
/// so idle windows from different families are mutual MMGT matches.
fn idle_pose(t: f64, p: &TrackParams) -> Pose {
    let mut c = rest_pose();
    let sway = 0.020 * (2.0 * PI * 0.30 * t + p.sway_phase).sin();
    let bob = 0.008 * (2.0 * PI * 0.25 * t + 1.7 * p.sway_phase).sin();
    for k in TORSO {
        c[k][0] += sway;
        c[k][1] += bob;
    }
    c[HEAD][0] += 0.4 * sway;
    apply_posture(&mut c, p);
    Pose::new(c.to_vec()).expect("idle pose is finite")
}

fn apply_posture(c: &mut [[f64; 3]; 17], p: &TrackParams) {
    for k in TORSO {
        c[k][0] += p.posture[0];
        c[k][1] += p.posture[1];
        c[k][2] += p.posture[2];
    }
}

fn action_pose(family: MotionFamily, t: f64, p: &TrackParams) -> Pose {
    let mut c = rest_pose();
    let a = p.amplitude;
    let omega = 2.0 * PI * p.frequency;
    match family {
        MotionFamily::WalkCycle => {
            let s = (omega * t + p.phase).sin();
            c[R_FOOT][2] += a * s;
            c[L_FOOT][2] -= a * s;
            c[R_KNEE][2] += 0.55 * a * s;
            c[L_KNEE][2] -= 0.55 * a * s;
            c[R_FOOT][1] += 0.40 * a * s.max(0.0);
            c[L_FOOT][1] += 0.40 * a * (-s).max(0.0);
            c[R_KNEE][1] += 0.20 * a * s.max(0.0);
            c[L_KNEE][1] += 0.20 * a * (-s).max(0.0);
            c[R_WRIST][2] -= 0.50 * a * s;
            c[L_WRIST][2] += 0.50 * a * s;
            c[R_ELBOW][2] -= 0.30 * a * s;
            c[L_ELBOW][2] += 0.30 * a * s;
            let bob = 0.05 * a * (2.0 * (omega * t + p.phase)).sin();
            for k in [SPINE, THORAX, NECK, HEAD] {
                c[k][1] += bob;
            }
        }
        MotionFamily::SitDown => {
            let u = 0.5 * (1.0 - (omega * t + p.phase).cos());
            let g = a / 0.45;
            for knee in [R_KNEE, L_KNEE] {
                c[knee][2] += 0.42 * g * u;
                c[knee][1] += 0.10 * g * u;
            }
            for foot in [R_FOOT, L_FOOT] {
                c[foot][2] += 0.34 * g * u;
                c[foot][1] += a * u;
            }
            for k in [THORAX, NECK, HEAD] {
                c[k][2] -= 0.10 * g * u;
            }
            c[HEAD][1] -= 0.03 * g * u;
            for wrist in [R_WRIST, L_WRIST] {
                c[wrist][2] += 0.30 * g * u;
                c[wrist][1] += 0.12 * g * u;
            }
        }
        MotionFamily::StandTurn => {
            let alpha = a * (omega * t + p.phase).sin();
            let (sin_a, cos_a) = alpha.sin_cos();
            for k in TORSO {
                let x = c[k][0];
                let z = c[k][2];
                c[k][0] = x * cos_a + z * sin_a;
                c[k][2] = -x * sin_a + z * cos_a;
            }
            let sway = 0.02 * (omega * t + p.phase).sin();
            for k in [R_KNEE, R_FOOT, L_KNEE, L_FOOT] {
                c[k][0] += sway;
            }
        }
        MotionFamily::ArmWave => {
            let s = (omega * t + p.phase).sin();
            let cph = (omega * t + p.phase).cos();
            c[R_ELBOW] = [0.28 + 0.35 * a * s, 0.48, 0.06];
            c[R_WRIST] = [0.30 + a * s, 0.78 + 0.30 * a * cph, 0.10];
            c[THORAX][0] -= 0.02 * s;
            c[NECK][0] -= 0.02 * s;
            c[HEAD][0] -= 0.02 * s;
        }
        MotionFamily::Crouch => {
            let u = 0.5 * (1.0 - (omega * t + p.phase).cos());
            let g = a / 0.40;
            for foot in [R_FOOT, L_FOOT] {
                c[foot][1] += a * u;
                c[foot][2] += 0.06 * g * u;
            }
            for knee in [R_KNEE, L_KNEE] {
                c[knee][1] += 0.45 * a * u;
                c[knee][2] += 0.30 * g * u;
            }
            c[SPINE][2] += 0.06 * g * u;
            c[THORAX][2] += 0.12 * g * u;
            c[THORAX][1] -= 0.05 * g * u;
            for k in [NECK, HEAD] {
                c[k][2] += 0.16 * g * u;
                c[k][1] -= 0.10 * g * u;
            }
            for wrist in [R_WRIST, L_WRIST] {
                c[wrist][2] += 0.42 * g * u;
                c[wrist][1] += 0.25 * g * u;
            }
            for elbow in [R_ELBOW, L_ELBOW] {
                c[elbow][2] += 0.25 * g * u;
                c[elbow][1] += 0.10 * g * u;
            }
        }
    }
    apply_posture(&mut c, p);
    Pose::new(c.to_vec()).expect("action pose is finite")
}
