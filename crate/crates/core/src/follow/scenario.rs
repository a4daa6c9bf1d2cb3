//! Scenario configs as `key = value` text.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::MotionKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanPath {
    Straight,
    SShaped,
    UShaped,
    SitStand,
}

impl HumanPath {
    pub const ALL: [HumanPath; 4] = [HumanPath::Straight, HumanPath::SShaped, HumanPath::UShaped, HumanPath::SitStand];

    pub fn name(self) -> &'static str {
        match self {
            HumanPath::Straight => "straight",
            HumanPath::SShaped => "s_shaped",
            HumanPath::UShaped => "u_shaped",
            HumanPath::SitStand => "sit_stand",
        }
    }

    pub fn motion_kind(self) -> MotionKind {
        match self {
            HumanPath::Straight => MotionKind::StraightWalk,
            HumanPath::SShaped => MotionKind::SCurveWalk,
            HumanPath::UShaped => MotionKind::UTurnWalk,
            HumanPath::SitStand => MotionKind::SitStand,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSide {
    Front,
    Behind,
    Left,
    Right,
}

impl StartSide {
    pub const ALL: [StartSide; 4] = [StartSide::Front, StartSide::Behind, StartSide::Left, StartSide::Right];

    pub fn name(self) -> &'static str {
        match self {
            StartSide::Front => "front",
            StartSide::Behind => "behind",
            StartSide::Left => "left",
            StartSide::Right => "right",
        }
    }

    /// Direction of the start offset relative to the human's heading.
    pub fn bearing(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            StartSide::Front => 0.0,
            StartSide::Behind => PI,
            StartSide::Left => FRAC_PI_2,
            StartSide::Right => -FRAC_PI_2,
        }
    }
}

macro_rules! named_enum {
    ($t:ty, $what:literal) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$t>::ALL
                    .into_iter()
                    .find(|k| k.name() == s)
                    .ok_or_else(|| Error::UnknownKind {
                        what: $what,
                        name: s.to_string(),
                    })
            }
        }
    };
}

named_enum!(HumanPath, "human path");
named_enum!(StartSide, "robot start");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub human_path: HumanPath,
    pub robot_start: StartSide,
    pub duration_s: f64,
    pub human_speed_mps: f64,
    pub ahead_distance_m: f64,
    pub start_distance_m: f64,
    pub follow_near_m: f64,
    pub follow_far_m: f64,
    pub safety_radius_m: f64,
    /// Keep-out radius used when passing the human.
    pub clearance_m: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            human_path: HumanPath::Straight,
            robot_start: StartSide::Behind,
            duration_s: 30.0,
            human_speed_mps: 1.0,
            ahead_distance_m: 1.5,
            start_distance_m: 2.0,
            follow_near_m: 1.0,
            follow_far_m: 2.5,
            safety_radius_m: 0.6,
            clearance_m: 1.2,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn new(human_path: HumanPath, robot_start: StartSide) -> Self {
        Self {
            human_path,
            robot_start,
            ..Self::default()
        }
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.human_path, self.robot_start)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let positive = [
            ("ahead_distance_m", self.ahead_distance_m),
            ("start_distance_m", self.start_distance_m),
            ("follow_near_m", self.follow_near_m),
            ("safety_radius_m", self.safety_radius_m),
            ("clearance_m", self.clearance_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration_s must be >= 0, got {}", self.duration_s));
        }
        if !(self.human_speed_mps.is_finite() && self.human_speed_mps >= 0.0) {
            return bad(format!("human_speed_mps must be >= 0, got {}", self.human_speed_mps));
        }
        if !(self.follow_far_m > self.follow_near_m) {
            return bad("follow_far_m must exceed follow_near_m".into());
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("{key}: '{v}' is not a number")))
        };
        match key {
            "human_path" => self.human_path = value.parse()?,
            "robot_start" => self.robot_start = value.parse()?,
            "duration_s" => self.duration_s = num(value)?,
            "human_speed_mps" => self.human_speed_mps = num(value)?,
            "ahead_distance_m" => self.ahead_distance_m = num(value)?,
            "start_distance_m" => self.start_distance_m = num(value)?,
            "follow_near_m" => self.follow_near_m = num(value)?,
            "follow_far_m" => self.follow_far_m = num(value)?,
            "safety_radius_m" => self.safety_radius_m = num(value)?,
            "clearance_m" => self.clearance_m = num(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("seed: '{value}' is not an integer")))?
            }
            _ => return Err(Error::InvalidConfig(format!("unknown scenario key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_key_values(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "human_path = {}\nrobot_start = {}\nduration_s = {}\nhuman_speed_mps = {}\nahead_distance_m = {}\n\
             start_distance_m = {}\nfollow_near_m = {}\nfollow_far_m = {}\nsafety_radius_m = {}\nclearance_m = {}\nseed = {}\n",
            self.human_path,
            self.robot_start,
            self.duration_s,
            self.human_speed_mps,
            self.ahead_distance_m,
            self.start_distance_m,
            self.follow_near_m,
            self.follow_far_m,
            self.safety_radius_m,
            self.clearance_m,
            self.seed
        )
    }
}

/// Flat `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key or value", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Every path crossed with every start side.
pub fn scenario_matrix(paths: &[HumanPath], starts: &[StartSide], base: &ScenarioConfig) -> Vec<ScenarioConfig> {
    paths
        .iter()
        .flat_map(|&p| {
            starts.iter().map(move |&s| ScenarioConfig {
                human_path: p,
                robot_start: s,
                ..base.clone()
            })
        })
        .collect()
}
