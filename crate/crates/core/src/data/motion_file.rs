//! Text motion files.
//!
//! ```text
//! stpotr-motion v1 <frame_rate_hz> <num_frames>
//! <51 space-separated floats>   (one line per frame)
//! ```
//!
//! Trailing whitespace on any line is accepted; anything else that deviates
//! is rejected with the offending line and frame.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sequence::MotionSequence;
use super::skeleton::{Skeleton, FRAME_DIM};
use crate::error::{Error, Result};

const MAGIC: &str = "stpotr-motion";
const VERSION: &str = "v1";

pub fn format_motion(seq: &MotionSequence) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION} {} {}", seq.frame_rate_hz, seq.frames.len()).unwrap();
    for frame in &seq.frames {
        let flat = frame.to_flat();
        for (i, v) in flat.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            // shortest representation that parses back to the same bits
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_motion(text: &str) -> Result<MotionSequence> {
    let mut lines = text.split('\n').enumerate();
    let bad = |line: usize, frame: Option<usize>, message: String| Error::MotionFormat {
        line: line + 1,
        frame,
        message,
    };

    let (_, header) = lines.next().ok_or_else(|| bad(0, None, "empty file".into()))?;
    let fields: Vec<&str> = header.trim_end().split(' ').collect();
    if fields.len() != 4 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(bad(
            0,
            None,
            format!("expected header '{MAGIC} {VERSION} <rate> <frames>', got '{}'", header.trim_end()),
        ));
    }
    let rate: f64 = fields[2]
        .parse()
        .ok()
        .filter(|r: &f64| r.is_finite() && *r > 0.0)
        .ok_or_else(|| bad(0, None, format!("invalid frame rate '{}'", fields[2])))?;
    let count: usize = fields[3]
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| bad(0, None, format!("invalid frame count '{}'", fields[3])))?;

    let mut frames = Vec::with_capacity(count);
    for (line_no, raw) in lines {
        let line = raw.trim_end();
        let frame = frames.len();
        if line.is_empty() {
            // only a trailing newline (or trailing blank padding) may follow the last frame
            if frame == count {
                continue;
            }
            return Err(bad(line_no, Some(frame), "empty line".into()));
        }
        if frame >= count {
            return Err(bad(
                line_no,
                Some(frame),
                format!("more frames than the declared {count}"),
            ));
        }
        let values: Vec<&str> = line.split(' ').collect();
        if values.len() != FRAME_DIM {
            return Err(bad(
                line_no,
                Some(frame),
                format!("expected {FRAME_DIM} values, found {}", values.len()),
            ));
        }
        let mut flat = [0.0; FRAME_DIM];
        for (slot, token) in flat.iter_mut().zip(&values) {
            *slot = token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line_no, Some(frame), format!("invalid number '{token}'")))?;
        }
        frames.push(Skeleton::from_flat(&flat)?);
    }
    if frames.len() != count {
        return Err(bad(
            text.lines().count().saturating_sub(1),
            Some(frames.len()),
            format!("declared {count} frames, found {}", frames.len()),
        ));
    }
    MotionSequence::new(frames, rate)
}

pub fn read_motion(path: &Path) -> Result<MotionSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_motion(&text)
}

pub fn write_motion(path: &Path, seq: &MotionSequence) -> Result<()> {
    std::fs::write(path, format_motion(seq)).map_err(|e| Error::io(path, e))
}

/// Extension of motion files in a data directory.
pub const MOTION_EXT: &str = "motion";

/// Paths of every `*.motion` file directly inside `dir`, sorted.
pub fn motion_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == MOTION_EXT) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
