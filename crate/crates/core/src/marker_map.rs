//! Surveyed marker library and cluster-to-marker identification.

use std::collections::HashMap;

use crate::geometry::{Framed, Vec2, Vec3};
use thiserror::Error;

pub type MarkerId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub id: MarkerId,
    /// Surveyed position in the LTP, meters. Matching uses x and y only.
    pub p_ltp: Vec3,
}

impl Marker {
    pub fn position(&self) -> Framed<Vec2> {
        Framed::ltp(Vec2::from(self.p_ltp))
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::from(self.p_ltp)
    }
}

/// Rough vehicle pose used to orient a LiDAR sighting before matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughPose {
    pub p: Vec2,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LibraryError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("marker library is empty")]
    Empty,
    #[error("duplicate marker id {id} (line {line})")]
    DuplicateId { id: MarkerId, line: u64 },
    #[error("markers {a} and {b} are {distance:.4} m apart, below the minimum {min:.4} m")]
    MarkersTooClose {
        a: MarkerId,
        b: MarkerId,
        distance: f64,
        min: f64,
    },
    #[error("marker {id} has a non-finite position")]
    NonFinite { id: MarkerId },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentifyError {
    #[error("no marker within {radius:.3} m of apparent position ({x:.3}, {y:.3})")]
    NoMarkerInRange { x: f64, y: f64, radius: f64 },
    #[error("ambiguous match: markers {a} ({da:.3} m) and {b} ({db:.3} m)")]
    AmbiguousMatch {
        a: MarkerId,
        da: f64,
        b: MarkerId,
        db: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyConfig {
    /// Largest accepted distance between apparent and surveyed position.
    pub match_radius: f64,
    /// Second-nearest candidates closer than nearest + margin are ambiguous.
    pub tie_margin: f64,
}

impl IdentifyConfig {
    /// Match radius of half the minimum marker spacing, 5 cm tie margin.
    pub fn from_spacing(min_spacing: f64) -> Self {
        Self {
            match_radius: 0.5 * min_spacing,
            tie_margin: 0.05,
        }
    }
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self::from_spacing(crate::pointcloud::PipelineConfig::default().cluster_max_dist)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identification {
    pub marker: Marker,
    /// Distance from the apparent position to the matched marker.
    pub distance: f64,
    /// Apparent LTP position of the sighting.
    pub apparent: Vec2,
}

/// Immutable, validated set of markers with a uniform-grid spatial index.
#[derive(Debug, Clone)]
pub struct MarkerLibrary {
    markers: Vec<Marker>,
    by_id: HashMap<MarkerId, usize>,
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
}

impl MarkerLibrary {
    /// Validates ids and spacing and builds the index. `min_spacing` is the
    /// smallest allowed horizontal distance between two markers.
    pub fn new(markers: Vec<Marker>, min_spacing: f64) -> Result<Self, LibraryError> {
        Self::with_lines(markers.into_iter().map(|m| (m, 0)).collect(), min_spacing)
    }

    /// Like [`MarkerLibrary::new`], with source line numbers for error messages.
    pub fn with_lines(markers: Vec<(Marker, u64)>, min_spacing: f64) -> Result<Self, LibraryError> {
        if markers.is_empty() {
            return Err(LibraryError::Empty);
        }
        let mut by_id = HashMap::with_capacity(markers.len());
        for (i, (m, line)) in markers.iter().enumerate() {
            if !m.p_ltp.is_finite() {
                return Err(LibraryError::NonFinite { id: m.id });
            }
            if by_id.insert(m.id, i).is_some() {
                return Err(LibraryError::DuplicateId {
                    id: m.id,
                    line: *line,
                });
            }
        }
        let markers: Vec<Marker> = markers.into_iter().map(|(m, _)| m).collect();
        let cell = min_spacing.max(0.25);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, m) in markers.iter().enumerate() {
            grid.entry(cell_of(m.xy(), cell)).or_default().push(i);
        }
        let lib = Self {
            markers,
            by_id,
            cell,
            grid,
        };
        for m in &lib.markers {
            for j in lib.within(m.xy(), min_spacing) {
                let other = &lib.markers[j];
                let distance = (other.xy() - m.xy()).norm();
                if other.id != m.id && distance < min_spacing {
                    let (a, b) = (m.id.min(other.id), m.id.max(other.id));
                    return Err(LibraryError::MarkersTooClose {
                        a,
                        b,
                        distance,
                        min: min_spacing,
                    });
                }
            }
        }
        Ok(lib)
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn get(&self, id: MarkerId) -> Option<&Marker> {
        self.by_id.get(&id).map(|&i| &self.markers[i])
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// Indices of markers whose horizontal distance to `p` may be `<= radius`
    /// (a superset drawn from the covering grid cells).
    fn within(&self, p: Vec2, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = cell_of(p, self.cell);
        let reach = (radius / self.cell).ceil() as i64;
        (cx - reach..=cx + reach)
            .flat_map(move |x| (cy - reach..=cy + reach).map(move |y| (x, y)))
            .filter_map(|k| self.grid.get(&k))
            .flatten()
            .copied()
    }

    /// Position `p_m` (vehicle frame) seen from the rough pose, in the LTP.
    pub fn apparent_position(rough: &RoughPose, p_m: Vec2) -> Vec2 {
        rough.p + p_m.rotated(rough.psi)
    }

    /// Resolves a sighting to the nearest marker around its apparent LTP
    /// position `p_r + R(psi_r) p_m`.
    pub fn identify(
        &self,
        rough: &RoughPose,
        p_m: Vec2,
        cfg: &IdentifyConfig,
    ) -> Result<Identification, IdentifyError> {
        let apparent = Self::apparent_position(rough, p_m);
        let search = cfg.match_radius + cfg.tie_margin;
        let mut best: Option<(f64, usize)> = None;
        let mut second: Option<(f64, usize)> = None;
        for i in self.within(apparent, search) {
            let d = (self.markers[i].xy() - apparent).norm();
            // ties on distance resolve by id so results never depend on grid order
            let key = |(d, i): (f64, usize)| (d, self.markers[i].id);
            let cand = (d, i);
            match best {
                Some(b) if key(b) <= key(cand) => {
                    if second.is_none_or(|s| key(cand) < key(s)) {
                        second = Some(cand);
                    }
                }
                _ => {
                    second = best;
                    best = Some(cand);
                }
            }
        }
        match best {
            Some((d, i)) if d <= cfg.match_radius => {
                if let Some((d2, j)) = second {
                    if d2 - d < cfg.tie_margin {
                        return Err(IdentifyError::AmbiguousMatch {
                            a: self.markers[i].id,
                            da: d,
                            b: self.markers[j].id,
                            db: d2,
                        });
                    }
                }
                Ok(Identification {
                    marker: self.markers[i],
                    distance: d,
                    apparent,
                })
            }
            _ => Err(IdentifyError::NoMarkerInRange {
                x: apparent.x,
                y: apparent.y,
                radius: cfg.match_radius,
            }),
        }
    }
}

fn cell_of(p: Vec2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}
