//! Irregularly sampled 2-D tracks and their CSV representation.
//!
//! The on-disk format is a headed CSV `track_id,t,x,y` with one row per fix.
//! Rows of a track are contiguous and times strictly increase within a track.
//! Lines starting with `#` are comments.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::linalg::{Scalar, Vec2};
use crate::transition::Segment;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("track {track}: time does not increase at line {line}")]
    NonMonotoneTime { track: String, line: u64 },
    #[error("track {track}: needs at least two points")]
    TooFewPoints { track: String },
    #[error("no trajectories in input")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One individual's track.
#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub id: String,
    pub times: Vec<T>,
    pub positions: Vec<Vec2<T>>,
}

impl<T: Scalar> Track<T> {
    /// Validates and builds a track.
    pub fn new(id: impl Into<String>, times: Vec<T>, positions: Vec<Vec2<T>>) -> Result<Self, DataError> {
        let id = id.into();
        assert_eq!(times.len(), positions.len(), "times and positions differ in length");
        if times.len() < 2 {
            return Err(DataError::TooFewPoints { track: id });
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DataError::NonMonotoneTime {
                track: id,
                line: (i + 2) as u64,
            });
        }
        Ok(Self { id, times, positions })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        self.times
            .windows(2)
            .zip(self.positions.windows(2))
            .map(|(t, x)| Segment::new(x[0], x[1], t[1] - t[0]))
    }
}

/// A set of independent tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet<T> {
    tracks: Vec<Track<T>>,
}

impl<T: Scalar> TrajectorySet<T> {
    pub fn new(tracks: Vec<Track<T>>) -> Result<Self, DataError> {
        if tracks.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self { tracks })
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn n_segments(&self) -> usize {
        self.tracks.iter().map(|t| t.len() - 1).sum()
    }

    pub fn n_points(&self) -> usize {
        self.tracks.iter().map(Track::len).sum()
    }

    /// All segments, track by track, in time order.
    pub fn segments(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        self.tracks.iter().flat_map(Track::segments)
    }

    /// Positions multiplied by `factor` (times unchanged).
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            tracks: self
                .tracks
                .iter()
                .map(|t| Track {
                    id: t.id.clone(),
                    times: t.times.clone(),
                    positions: t.positions.iter().map(|p| p.scale(factor)).collect(),
                })
                .collect(),
        }
    }

    /// `(min, max)` corners of the positions.
    pub fn bounding_box(&self) -> (Vec2<T>, Vec2<T>) {
        let mut lo = Vec2::new(T::infinity(), T::infinity());
        let mut hi = Vec2::new(T::neg_infinity(), T::neg_infinity());
        for p in self.tracks.iter().flat_map(|t| t.positions.iter()) {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Realized-variance estimate of `γ²`: `Σ‖Δx‖² / (2 Σ Δt)`.
    pub fn quadratic_variation_gamma_sq(&self) -> T {
        let (num, den) = self.segments().fold((T::zero(), T::zero()), |(n, d), s| {
            (n + (s.end - s.start).norm_sq(), d + s.dt)
        });
        num / (T::lit(2.0) * den)
    }

    /// Recentred on the centroid and rescaled to unit RMS radius.
    pub fn anonymized(&self) -> Self {
        let n = T::from_usize(self.n_points()).unwrap_or(T::one());
        let centroid = self
            .tracks
            .iter()
            .flat_map(|t| t.positions.iter())
            .fold(Vec2::zero(), |acc, &p| acc + p)
            .scale(T::one() / n);
        let rms = (self
            .tracks
            .iter()
            .flat_map(|t| t.positions.iter())
            .fold(T::zero(), |acc, &p| acc + (p - centroid).norm_sq())
            / n)
            .sqrt();
        let scale = if rms > T::zero() { T::one() / rms } else { T::one() };
        Self {
            tracks: self
                .tracks
                .iter()
                .map(|t| Track {
                    id: t.id.clone(),
                    times: t.times.clone(),
                    positions: t.positions.iter().map(|&p| (p - centroid).scale(scale)).collect(),
                })
                .collect(),
        }
    }
}

impl TrajectorySet<f64> {
    /// Parses the `track_id,t,x,y` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let expected = ["track_id", "t", "x", "y"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(DataError::Parse {
                line: 1,
                message: format!("expected header `track_id,t,x,y`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }

        struct Building {
            id: String,
            times: Vec<f64>,
            positions: Vec<Vec2<f64>>,
            lines: Vec<u64>,
        }
        let mut done: Vec<Building> = Vec::new();
        let mut current: Option<Building> = None;

        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 4 {
                return Err(DataError::Parse {
                    line,
                    message: format!("expected 4 fields, found {}", rec.len()),
                });
            }
            let id = rec[0].to_string();
            let num = |i: usize, name: &str| -> Result<f64, DataError> {
                let v: f64 = rec[i].parse().map_err(|_| DataError::Parse {
                    line,
                    message: format!("invalid {name} value `{}`", &rec[i]),
                })?;
                if !v.is_finite() {
                    return Err(DataError::Parse {
                        line,
                        message: format!("non-finite {name} value"),
                    });
                }
                Ok(v)
            };
            let (t, x, y) = (num(1, "t")?, num(2, "x")?, num(3, "y")?);

            let same = current.as_ref().is_some_and(|b| b.id == id);
            if !same {
                if done.iter().any(|b| b.id == id) {
                    return Err(DataError::Parse {
                        line,
                        message: format!("rows of track `{id}` are not contiguous"),
                    });
                }
                if let Some(b) = current.take() {
                    done.push(b);
                }
                current = Some(Building {
                    id,
                    times: Vec::new(),
                    positions: Vec::new(),
                    lines: Vec::new(),
                });
            }
            let b = current.as_mut().expect("current track");
            if let Some(&last) = b.times.last() {
                if !(t > last) {
                    return Err(DataError::NonMonotoneTime {
                        track: b.id.clone(),
                        line,
                    });
                }
            }
            b.times.push(t);
            b.positions.push(Vec2::new(x, y));
            b.lines.push(line);
        }
        if let Some(b) = current.take() {
            done.push(b);
        }
        let tracks = done
            .into_iter()
            .map(|b| Track::new(b.id, b.times, b.positions))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tracks)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self, DataError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes the CSV format; floats use the shortest representation that
    /// parses back to the same value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        writeln!(w, "track_id,t,x,y")?;
        for t in &self.tracks {
            for (time, p) in t.times.iter().zip(&t.positions) {
                writeln!(w, "{},{},{},{}", t.id, time, p.x, p.y)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    DataError::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_track_one_segment() {
        let csv = "track_id,t,x,y\na,0,1.5,2\na,1,2,3\n";
        let data = TrajectorySet::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(data.tracks().len(), 1);
        assert_eq!(data.n_segments(), 1);
        let s = data.segments().next().unwrap();
        assert_eq!(s.dt, 1.0);
        assert_eq!(s.start, Vec2::new(1.5, 2.0));
    }

    #[test]
    fn decreasing_time_is_rejected() {
        let csv = "track_id,t,x,y\na,1,0,0\na,0.5,1,1\n";
        match TrajectorySet::read_csv(csv.as_bytes()) {
            Err(DataError::NonMonotoneTime { track, line }) => {
                assert_eq!(track, "a");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_errors() {
        let csv = "# exported\ntrack_id,t,x,y\n# first\na,0,0,0\na,1,1,1\n";
        assert_eq!(TrajectorySet::read_csv(csv.as_bytes()).unwrap().n_points(), 2);

        let single = "track_id,t,x,y\na,0,0,0\n";
        assert!(matches!(
            TrajectorySet::read_csv(single.as_bytes()),
            Err(DataError::TooFewPoints { .. })
        ));
        let garbage = "track_id,t,x,y\na,0,zero,0\n";
        assert!(matches!(
            TrajectorySet::read_csv(garbage.as_bytes()),
            Err(DataError::Parse { line: 2, .. })
        ));
        let header = "id,t,x,y\na,0,0,0\n";
        assert!(matches!(
            TrajectorySet::read_csv(header.as_bytes()),
            Err(DataError::Parse { line: 1, .. })
        ));
        let split = "track_id,t,x,y\na,0,0,0\na,1,0,0\nb,0,0,0\nb,1,0,0\na,2,0,0\n";
        assert!(matches!(
            TrajectorySet::read_csv(split.as_bytes()),
            Err(DataError::Parse { .. })
        ));
        assert!(matches!(
            TrajectorySet::read_csv("track_id,t,x,y\n".as_bytes()),
            Err(DataError::Empty)
        ));
    }

    #[test]
    fn quadratic_variation_of_unit_steps() {
        let tr = Track::new("a", vec![0.0, 1.0, 2.0], vec![Vec2::zero(), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)]).unwrap();
        let data = TrajectorySet::new(vec![tr]).unwrap();
        assert_eq!(data.quadratic_variation_gamma_sq(), 1.0);
    }

    #[test]
    fn anonymized_is_centred() {
        let tr = Track::new("a", vec![0.0, 1.0], vec![Vec2::new(10.0, 10.0), Vec2::new(12.0, 10.0)]).unwrap();
        let a = TrajectorySet::new(vec![tr]).unwrap().anonymized();
        let p = &a.tracks()[0].positions;
        assert_eq!(p[0], Vec2::new(-1.0, 0.0));
        assert_eq!(p[1], Vec2::new(1.0, 0.0));
    }
}
