//! CSV log formats. Every file has a header row; numbers are written with
//! six decimals.
//!
//! | file       | header                       |
//! |------------|------------------------------|
//! | IMU        | `t,ax,ay,az,wx,wy,wz`        |
//! | LiDAR      | `t,x,y,z,reflectivity`       |
//! | markers    | `id,x,y,z`                   |
//! | trajectory | `t,x,y,yaw,v,quality`        |
//! | truth      | `t,x,y,yaw,v,yaw_rate,ax,ay` |

use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::estimator::{Quality, VehicleStateEstimate};
use crate::geometry::{Vec2, Vec3};
use crate::horizontation::ImuSample;
use crate::marker_map::{LibraryError, Marker, MarkerLibrary};
use crate::pointcloud::LidarReturn;
use crate::simulator::{GroundTruth, TruthSample};

pub const IMU_HEADER: &str = "t,ax,ay,az,wx,wy,wz";
pub const LIDAR_HEADER: &str = "t,x,y,z,reflectivity";
pub const MARKER_HEADER: &str = "id,x,y,z";
pub const TRAJECTORY_HEADER: &str = "t,x,y,yaw,v,quality";
pub const TRUTH_HEADER: &str = "t,x,y,yaw,v,yaw_rate,ax,ay";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("expected header `{expected}`, found `{found}`")]
    Header {
        expected: &'static str,
        found: String,
    },
}

/// Parses a CSV with the given header, handing each row and its line number
/// to `row`.
fn read_rows<R: Read, T>(
    input: R,
    header: &'static str,
    mut row: impl FnMut(&[&str], u64) -> Result<T, String>,
) -> Result<Vec<T>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let found = rdr
        .headers()
        .map_err(|e| parse_error(&e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(IoError::Header {
            expected: header,
            found,
        });
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = rec.iter().collect();
        if fields.len() != width {
            return Err(IoError::Parse {
                line,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        out.push(row(&fields, line).map_err(|message| IoError::Parse { line, message })?);
    }
    Ok(out)
}

fn parse_error(e: &csv::Error) -> IoError {
    match e.kind() {
        csv::ErrorKind::Io(_) => IoError::Io(std::io::Error::other(e.to_string())),
        _ => IoError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        },
    }
}

fn field<T: FromStr>(fields: &[&str], i: usize, name: &str) -> Result<T, String> {
    fields[i]
        .parse()
        .map_err(|_| format!("invalid {name} `{}`", fields[i]))
}

fn float(fields: &[&str], i: usize, name: &str) -> Result<f64, String> {
    let v: f64 = field(fields, i, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite {name}"))
    }
}

pub fn read_imu<R: Read>(input: R) -> Result<Vec<ImuSample>, IoError> {
    read_rows(input, IMU_HEADER, |f, _| {
        Ok(ImuSample {
            t: float(f, 0, "t")?,
            accel: Vec3::new(float(f, 1, "ax")?, float(f, 2, "ay")?, float(f, 3, "az")?),
            gyro: Vec3::new(float(f, 4, "wx")?, float(f, 5, "wy")?, float(f, 6, "wz")?),
        })
    })
}

pub fn write_imu<W: Write>(mut out: W, samples: &[ImuSample]) -> std::io::Result<()> {
    writeln!(out, "{IMU_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.t, s.accel.x, s.accel.y, s.accel.z, s.gyro.x, s.gyro.y, s.gyro.z
        )?;
    }
    Ok(())
}

pub fn read_lidar<R: Read>(input: R) -> Result<Vec<LidarReturn>, IoError> {
    read_rows(input, LIDAR_HEADER, |f, _| {
        Ok(LidarReturn {
            t: float(f, 0, "t")?,
            p: Vec3::new(float(f, 1, "x")?, float(f, 2, "y")?, float(f, 3, "z")?),
            reflectivity: field(f, 4, "reflectivity")?,
        })
    })
}

pub fn write_lidar<W: Write>(mut out: W, returns: &[LidarReturn]) -> std::io::Result<()> {
    writeln!(out, "{LIDAR_HEADER}")?;
    for r in returns {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{}",
            r.t, r.p.x, r.p.y, r.p.z, r.reflectivity
        )?;
    }
    Ok(())
}

/// Markers with the line each came from.
pub fn read_markers<R: Read>(input: R) -> Result<Vec<(Marker, u64)>, IoError> {
    read_rows(input, MARKER_HEADER, |f, line| {
        Ok((
            Marker {
                id: field(f, 0, "id")?,
                p_ltp: Vec3::new(float(f, 1, "x")?, float(f, 2, "y")?, float(f, 3, "z")?),
            },
            line,
        ))
    })
}

#[derive(Debug, Error)]
pub enum LoadLibraryError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Library(#[from] LibraryError),
}

/// Reads and validates a marker library. An input without any marker rows,
/// including an empty file, is [`LibraryError::Empty`].
pub fn load_library<R: Read>(
    mut input: R,
    min_spacing: f64,
) -> Result<MarkerLibrary, LoadLibraryError> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(IoError::from)?;
    if text.trim().is_empty() {
        return Err(LibraryError::Empty.into());
    }
    let rows = read_markers(text.as_bytes())?;
    Ok(MarkerLibrary::with_lines(rows, min_spacing)?)
}

pub fn write_markers<W: Write>(mut out: W, markers: &[Marker]) -> std::io::Result<()> {
    writeln!(out, "{MARKER_HEADER}")?;
    for m in markers {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            m.id, m.p_ltp.x, m.p_ltp.y, m.p_ltp.z
        )?;
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<VehicleStateEstimate>, IoError> {
    read_rows(input, TRAJECTORY_HEADER, |f, _| {
        Ok(VehicleStateEstimate {
            t: float(f, 0, "t")?,
            position: Vec2::new(float(f, 1, "x")?, float(f, 2, "y")?),
            yaw: float(f, 3, "yaw")?,
            v_og: float(f, 4, "v")?,
            quality: f[5].parse::<Quality>()?,
            offset_disagreement: 0.0,
        })
    })
}

pub fn write_trajectory<W: Write>(
    mut out: W,
    rows: &[VehicleStateEstimate],
) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for e in rows {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            e.t,
            e.position.x,
            e.position.y,
            e.yaw,
            e.v_og,
            e.quality.as_str()
        )?;
    }
    Ok(())
}

pub fn read_truth<R: Read>(input: R) -> Result<GroundTruth, IoError> {
    let samples = read_rows(input, TRUTH_HEADER, |f, _| {
        Ok(TruthSample {
            t: float(f, 0, "t")?,
            p: Vec2::new(float(f, 1, "x")?, float(f, 2, "y")?),
            yaw: float(f, 3, "yaw")?,
            v: float(f, 4, "v")?,
            yaw_rate: float(f, 5, "yaw_rate")?,
            accel: Vec2::new(float(f, 6, "ax")?, float(f, 7, "ay")?),
        })
    })?;
    Ok(GroundTruth { samples })
}

pub fn write_truth<W: Write>(mut out: W, truth: &GroundTruth) -> std::io::Result<()> {
    writeln!(out, "{TRUTH_HEADER}")?;
    for s in &truth.samples {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.t, s.p.x, s.p.y, s.yaw, s.v, s.yaw_rate, s.accel.x, s.accel.y
        )?;
    }
    Ok(())
}
