//! Track model: wall segments, an arc-length parameterized centerline used for
//! progress scoring, and the collision / course-pose queries run every frame.

mod builtin;
mod grid;

pub use builtin::{closed_circuit, s_curve, straight_corridor, CourseBuilder};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Segment, Vec2};
use grid::WallGrid;

/// Side length of the wall lookup grid, meters.
pub const GRID_CELL: f64 = 5.0;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid track: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub pos: Vec2,
    pub yaw: f64,
}

/// Where a point sits relative to the course.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoursePose {
    /// Arc length of the nearest centerline point.
    pub s: f64,
    /// Unit direction of the centerline segment holding the nearest point.
    pub tangent: Vec2,
    /// Signed distance from the centerline, positive to the left.
    pub lateral_offset: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFile {
    name: Option<String>,
    walls: Option<Vec<Segment>>,
    centerline: Option<Vec<Vec2>>,
    start: Option<Pose>,
    finish_s: Option<f64>,
    half_width: Option<f64>,
}

#[derive(Serialize)]
struct TrackFileOut<'a> {
    name: &'a str,
    walls: &'a [Segment],
    centerline: &'a [Vec2],
    start: Pose,
    finish_s: f64,
    half_width: f64,
}

/// A validated, immutable track.
#[derive(Debug, Clone)]
pub struct Track {
    name: String,
    walls: Vec<Segment>,
    centerline: Vec<Vec2>,
    /// Cumulative arc length at each centerline vertex.
    arc: Vec<f64>,
    start: Pose,
    finish_s: f64,
    half_width: f64,
    grid: WallGrid,
}

impl Track {
    pub fn new(
        name: impl Into<String>,
        walls: Vec<Segment>,
        centerline: Vec<Vec2>,
        start: Pose,
        finish_s: f64,
        half_width: f64,
    ) -> Result<Self, TrackError> {
        Self::with_grid_cell(
            name, walls, centerline, start, finish_s, half_width, GRID_CELL,
        )
    }

    /// Same as [`Track::new`] with an explicit lookup-grid cell size. Query
    /// results do not depend on the cell size.
    pub fn with_grid_cell(
        name: impl Into<String>,
        walls: Vec<Segment>,
        centerline: Vec<Vec2>,
        start: Pose,
        finish_s: f64,
        half_width: f64,
        cell: f64,
    ) -> Result<Self, TrackError> {
        let invalid = |m: String| Err(TrackError::Invalid(m));
        if walls.is_empty() {
            return invalid("walls must not be empty".into());
        }
        for (i, w) in walls.iter().enumerate() {
            if !w.a.is_finite() || !w.b.is_finite() {
                return invalid(format!("wall {i} has a non-finite coordinate"));
            }
            if w.length() <= 0.0 {
                return invalid(format!("wall {i} has zero length"));
            }
        }
        if centerline.len() < 2 {
            return invalid("centerline needs at least 2 points".into());
        }
        let mut arc = Vec::with_capacity(centerline.len());
        arc.push(0.0);
        for (i, pair) in centerline.windows(2).enumerate() {
            if !pair[0].is_finite() || !pair[1].is_finite() {
                return invalid(format!("centerline point {i} is not finite"));
            }
            let len = pair[0].distance(pair[1]);
            if len <= 0.0 {
                return invalid(format!("centerline points {i} and {} coincide", i + 1));
            }
            arc.push(arc[i] + len);
        }
        let total = *arc.last().unwrap();
        if !start.pos.is_finite() || !start.yaw.is_finite() {
            return invalid("start pose is not finite".into());
        }
        if finish_s.is_nan() || finish_s <= 0.0 {
            return invalid(format!("finish_s must be positive, got {finish_s}"));
        }
        if finish_s > total {
            return invalid(format!(
                "finish_s exceeds centerline length ({finish_s} > {total})"
            ));
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return invalid(format!("half_width must be positive, got {half_width}"));
        }
        if cell.is_nan() || cell <= 0.0 {
            return invalid(format!("grid cell must be positive, got {cell}"));
        }
        let grid = WallGrid::build(&walls, cell);
        Ok(Track {
            name: name.into(),
            walls,
            centerline,
            arc,
            start,
            finish_s,
            half_width,
            grid,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn finish_s(&self) -> f64 {
        self.finish_s
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn centerline_length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TrackFileOut {
            name: &self.name,
            walls: &self.walls,
            centerline: &self.centerline,
            start: self.start,
            finish_s: self.finish_s,
            half_width: self.half_width,
        })
        .expect("track serializes")
    }

    /// Rotates by `angle` about the origin, then translates by `offset`.
    pub fn rigid_transform(&self, angle: f64, offset: Vec2) -> Track {
        let f = |p: Vec2| p.rotated(angle) + offset;
        Track::new(
            self.name.clone(),
            self.walls.iter().map(|w| w.transformed(f)).collect(),
            self.centerline.iter().map(|&p| f(p)).collect(),
            Pose {
                pos: f(self.start.pos),
                yaw: self.start.yaw + angle,
            },
            self.finish_s.min(self.centerline_length()),
            self.half_width,
        )
        .expect("rigid transform preserves validity")
    }

    /// Distance to the nearest wall along a unit ray, if within `max_range`.
    pub fn ray_cast(&self, origin: Vec2, direction: Vec2, max_range: f64) -> Option<f64> {
        self.grid
            .ray_cast(&self.walls, origin, direction, max_range)
    }

    /// True iff the oriented rectangle `footprint = (length, width)` centered
    /// at `position` with heading `yaw` touches any wall.
    pub fn collides(&self, position: Vec2, yaw: f64, footprint: (f64, f64)) -> bool {
        debug_assert!(footprint.0 > 0.0 && footprint.1 > 0.0);
        let fwd = Vec2::from_angle(yaw);
        let left = fwd.perp();
        let (hl, hw) = (0.5 * footprint.0, 0.5 * footprint.1);
        let corners = [
            position + fwd * hl + left * hw,
            position - fwd * hl + left * hw,
            position - fwd * hl - left * hw,
            position + fwd * hl - left * hw,
        ];
        let lo = corners
            .iter()
            .fold(Vec2::new(f64::INFINITY, f64::INFINITY), |m, c| {
                Vec2::new(m.x.min(c.x), m.y.min(c.y))
            });
        let hi = corners
            .iter()
            .fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, c| {
                Vec2::new(m.x.max(c.x), m.y.max(c.y))
            });

        let inside = |p: Vec2| {
            let r = p - position;
            r.dot(fwd).abs() <= hl && r.dot(left).abs() <= hw
        };
        let edges = [
            Segment::new(corners[0], corners[1]),
            Segment::new(corners[1], corners[2]),
            Segment::new(corners[2], corners[3]),
            Segment::new(corners[3], corners[0]),
        ];
        let mut candidates = Vec::new();
        self.grid.query_box(lo, hi, &mut candidates);
        candidates.iter().any(|&i| {
            let w = &self.walls[i as usize];
            inside(w.a) || inside(w.b) || edges.iter().any(|e| e.intersects(w))
        })
    }

    /// Nearest centerline point to `position`; equidistant candidates resolve
    /// to the lower arc length.
    pub fn course_pose(&self, position: Vec2) -> CoursePose {
        let mut best_d2 = f64::INFINITY;
        let mut best = (0.0, Vec2::new(1.0, 0.0), Vec2::ZERO);
        for (i, pair) in self.centerline.windows(2).enumerate() {
            let seg = Segment::new(pair[0], pair[1]);
            let (p, u) = seg.closest_point(position);
            let d2 = (position - p).length_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                let len = self.arc[i + 1] - self.arc[i];
                best = (self.arc[i] + u * len, (pair[1] - pair[0]).normalized(), p);
            }
        }
        let (s, tangent, nearest) = best;
        let side = if tangent.cross(position - nearest) < 0.0 {
            -1.0
        } else {
            1.0
        };
        CoursePose {
            s,
            tangent,
            lateral_offset: side * best_d2.sqrt(),
        }
    }
}

/// Parses and validates a track file.
pub fn load_track(text: &[u8]) -> Result<Track, TrackError> {
    let raw: TrackFile = serde_json::from_slice(text).map_err(|e| TrackError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let missing = |f: &str| TrackError::Invalid(format!("missing required field `{f}`"));
    Track::new(
        raw.name.ok_or_else(|| missing("name"))?,
        raw.walls.ok_or_else(|| missing("walls"))?,
        raw.centerline.ok_or_else(|| missing("centerline"))?,
        raw.start.ok_or_else(|| missing("start"))?,
        raw.finish_s.ok_or_else(|| missing("finish_s"))?,
        raw.half_width.ok_or_else(|| missing("half_width"))?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const CORRIDOR: &str = r#"{
        "name": "corridor",
        "walls": [[[-10,-5],[110,-5]], [[-10,5],[110,5]], [[-10,-5],[-10,5]], [[110,-5],[110,5]]],
        "centerline": [[0,0],[100,0]],
        "start": {"pos": [0,0], "yaw": 0},
        "finish_s": 90,
        "half_width": 5
    }"#;

    fn corridor() -> Track {
        load_track(CORRIDOR.as_bytes()).unwrap()
    }

    fn l_track() -> Track {
        Track::new(
            "l",
            vec![Segment::new(
                Vec2::new(-50.0, -50.0),
                Vec2::new(-40.0, -50.0),
            )],
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(20.0, 0.0),
                Vec2::new(20.0, 20.0),
            ],
            Pose {
                pos: Vec2::ZERO,
                yaw: 0.0,
            },
            30.0,
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn loads_minimal_corridor() {
        let t = corridor();
        assert_eq!(t.walls().len(), 4);
        assert_eq!(t.name(), "corridor");
        assert_eq!(t.centerline_length(), 100.0);
    }

    #[test]
    fn missing_start_is_named() {
        let text = CORRIDOR.replace(r#""start": {"pos": [0,0], "yaw": 0},"#, "");
        let err = load_track(text.as_bytes()).unwrap_err();
        assert!(matches!(err, TrackError::Invalid(_)));
        assert!(err.to_string().contains("start"), "{err}");
    }

    #[test]
    fn finish_beyond_centerline_rejected() {
        let text = CORRIDOR
            .replace(
                r#""centerline": [[0,0],[100,0]]"#,
                r#""centerline": [[0,0],[5,0]]"#,
            )
            .replace(r#""finish_s": 90"#, r#""finish_s": 10"#);
        let err = load_track(text.as_bytes()).unwrap_err();
        assert!(
            err.to_string()
                .contains("finish_s exceeds centerline length"),
            "{err}"
        );
    }

    #[test]
    fn unknown_field_rejected() {
        let text = CORRIDOR.replace(r#""half_width": 5"#, r#""half_width": 5, "lanes": 2"#);
        assert!(matches!(
            load_track(text.as_bytes()),
            Err(TrackError::Parse { .. })
        ));
    }

    #[test]
    fn parse_error_carries_position() {
        let err = load_track(b"{\n  \"name\": \"x\",\n  \"walls\": [oops]\n}").unwrap_err();
        match err {
            TrackError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let zero_wall = CORRIDOR.replace("[[-10,-5],[-10,5]]", "[[-10,-5],[-10,-5]]");
        assert!(load_track(zero_wall.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("zero length"));
        let dup = CORRIDOR.replace("[[0,0],[100,0]]", "[[0,0],[0,0],[100,0]]");
        assert!(load_track(dup.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("coincide"));
        let no_walls = CORRIDOR.replace(
            r#"[[[-10,-5],[110,-5]], [[-10,5],[110,5]], [[-10,-5],[-10,5]], [[110,-5],[110,5]]]"#,
            "[]",
        );
        assert!(load_track(no_walls.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("walls"));
        let zero_finish = CORRIDOR.replace(r#""finish_s": 90"#, r#""finish_s": 0"#);
        assert!(load_track(zero_finish.as_bytes()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = corridor();
        let back = load_track(t.to_json().as_bytes()).unwrap();
        assert_eq!(back.walls(), t.walls());
        assert_eq!(back.centerline(), t.centerline());
        assert_eq!(back.start(), t.start());
    }

    #[test]
    fn centered_vehicle_clear() {
        assert!(!corridor().collides(Vec2::new(50.0, 0.0), 0.0, (4.5, 1.8)));
    }

    #[test]
    fn near_wall_overlaps() {
        // Center 0.5 m from the y = 5 wall; half width 0.9 > 0.5.
        assert!(corridor().collides(Vec2::new(50.0, 4.5), 0.0, (4.5, 1.8)));
        assert!(!corridor().collides(Vec2::new(50.0, 4.0), 0.0, (4.5, 1.8)));
    }

    #[test]
    fn wall_fully_inside_footprint_collides() {
        let t = Track::new(
            "speck",
            vec![Segment::new(Vec2::new(-0.1, 0.0), Vec2::new(0.1, 0.0))],
            vec![Vec2::ZERO, Vec2::new(1.0, 0.0)],
            Pose {
                pos: Vec2::ZERO,
                yaw: 0.0,
            },
            1.0,
            1.0,
        )
        .unwrap();
        assert!(t.collides(Vec2::ZERO, 0.3, (4.5, 1.8)));
    }

    #[test]
    fn course_pose_on_straight() {
        let cp = corridor().course_pose(Vec2::new(30.0, 2.0));
        assert_eq!(cp.s, 30.0);
        assert_eq!(cp.tangent, Vec2::new(1.0, 0.0));
        assert_eq!(cp.lateral_offset, 2.0);
        assert_eq!(corridor().course_pose(Vec2::ZERO).s, 0.0);
        assert_eq!(
            corridor().course_pose(Vec2::new(40.0, -3.0)).lateral_offset,
            -3.0
        );
    }

    /// Samples the polyline every millimeter and returns (s, distance) of the
    /// nearest sample, preferring the first in arc order on ties.
    fn dense_nearest(t: &Track, p: Vec2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        let mut s0 = 0.0;
        for pair in t.centerline().windows(2) {
            let len = pair[0].distance(pair[1]);
            let n = (len / 1e-3).round() as usize;
            for k in 0..=n {
                let u = k as f64 / n as f64;
                let q = pair[0] + (pair[1] - pair[0]) * u;
                let d = q.distance(p);
                if d < best.1 {
                    best = (s0 + u * len, d);
                }
            }
            s0 += len;
        }
        best
    }

    #[test]
    fn l_corner_matches_dense_sampling() {
        let t = l_track();
        // Off the corner bisector so the nearest point is unique.
        for p in [
            Vec2::new(18.0, 2.5),
            Vec2::new(22.0, -1.0),
            Vec2::new(19.0, 0.5),
            Vec2::new(25.0, 5.0),
            Vec2::new(15.0, 3.0),
            Vec2::new(21.0, 1.5),
            Vec2::new(19.5, 19.0),
        ] {
            let cp = t.course_pose(p);
            let (s, d) = dense_nearest(&t, p);
            assert!((cp.s - s).abs() < 1e-3, "{p:?}: {} vs {s}", cp.s);
            assert!((cp.lateral_offset.abs() - d).abs() < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn equidistant_tie_prefers_lower_s() {
        let t = l_track();
        // Outside the corner both legs are nearest at the shared vertex.
        let cp = t.course_pose(Vec2::new(23.0, -3.0));
        assert_eq!(cp.s, 20.0);
        assert_eq!(cp.tangent, Vec2::new(1.0, 0.0));
        // On the inner bisector (18, 0) and (20, 2) are both 2 m away.
        let cp = t.course_pose(Vec2::new(18.0, 2.0));
        assert_eq!(cp.s, 18.0);
    }

    #[test]
    fn forward_paths_have_monotone_progress() {
        let t = corridor();
        let mut prev = -1.0;
        for k in 0..=1000 {
            let x = k as f64 * 0.1;
            let p = Vec2::new(x, 3.0 * (x * 0.2).sin());
            let s = t.course_pose(p).s;
            assert!(s >= prev);
            prev = s;
        }
        let c = closed_circuit();
        let mut prev = -1.0;
        for &p in c.centerline() {
            let s = c.course_pose(p + Vec2::new(0.3, -0.2)).s;
            assert!(s >= prev - 1e-9, "{s} < {prev}");
            prev = s;
        }
    }

    /// Exact-geometry oracle by perimeter sampling: the footprint touches a
    /// wall if a perimeter sample is within `eps` of it, or a wall endpoint is
    /// inside.
    fn sampled_collides(t: &Track, pos: Vec2, yaw: f64, (l, w): (f64, f64), eps: f64) -> bool {
        let fwd = Vec2::from_angle(yaw);
        let left = fwd.perp();
        let corners = [
            pos + fwd * (l / 2.0) + left * (w / 2.0),
            pos - fwd * (l / 2.0) + left * (w / 2.0),
            pos - fwd * (l / 2.0) - left * (w / 2.0),
            pos + fwd * (l / 2.0) - left * (w / 2.0),
        ];
        let inside = |p: Vec2| {
            let r = p - pos;
            r.dot(fwd).abs() <= l / 2.0 && r.dot(left).abs() <= w / 2.0
        };
        for wall in t.walls() {
            if inside(wall.a) || inside(wall.b) {
                return true;
            }
            for k in 0..4 {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                let n = 2000;
                for i in 0..=n {
                    let p = a + (b - a) * (i as f64 / n as f64);
                    if wall.distance_to_point(p) <= eps {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn min_wall_clearance(t: &Track, pos: Vec2, yaw: f64, (l, w): (f64, f64)) -> f64 {
        // Distance from each wall to the rectangle boundary, approximated via
        // dense boundary sampling; only used to skip razor-thin cases.
        let fwd = Vec2::from_angle(yaw);
        let left = fwd.perp();
        let corners = [
            pos + fwd * (l / 2.0) + left * (w / 2.0),
            pos - fwd * (l / 2.0) + left * (w / 2.0),
            pos - fwd * (l / 2.0) - left * (w / 2.0),
            pos + fwd * (l / 2.0) - left * (w / 2.0),
        ];
        let mut m = f64::INFINITY;
        for wall in t.walls() {
            for k in 0..4 {
                let e = Segment::new(corners[k], corners[(k + 1) % 4]);
                for p in [wall.a, wall.b] {
                    m = m.min(e.distance_to_point(p));
                }
                for p in [e.a, e.b] {
                    m = m.min(wall.distance_to_point(p));
                }
            }
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn collides_matches_sampling_oracle(
            x in -15.0..115.0f64, y in -8.0..8.0f64, yaw in -PI..PI,
        ) {
            let t = corridor();
            let fp = (4.5, 1.8);
            let pos = Vec2::new(x, y);
            // Boundary sampling resolves contact to ~3 mm.
            prop_assume!(min_wall_clearance(&t, pos, yaw, fp) > 5e-3 || t.collides(pos, yaw, fp));
            let eps = 4e-3;
            prop_assert_eq!(t.collides(pos, yaw, fp), sampled_collides(&t, pos, yaw, fp, eps));
        }

        #[test]
        fn collides_invariant_under_rigid_transform(
            x in -15.0..115.0f64, y in -8.0..8.0f64, yaw in -PI..PI,
            angle in -PI..PI, ox in -100.0..100.0f64, oy in -100.0..100.0f64,
        ) {
            let t = corridor();
            let fp = (4.5, 1.8);
            let pos = Vec2::new(x, y);
            prop_assume!(min_wall_clearance(&t, pos, yaw, fp) > 1e-6);
            let moved = t.rigid_transform(angle, Vec2::new(ox, oy));
            let mpos = pos.rotated(angle) + Vec2::new(ox, oy);
            prop_assert_eq!(t.collides(pos, yaw, fp), moved.collides(mpos, yaw + angle, fp));
        }

        #[test]
        fn grid_answers_do_not_depend_on_cell_size(
            x in -10.0..230.0f64, y in -30.0..130.0f64, ang in -PI..PI, yaw in -PI..PI,
            cell in 0.7..40.0f64,
        ) {
            let base = s_curve();
            let other = Track::with_grid_cell(
                base.name(), base.walls().to_vec(), base.centerline().to_vec(),
                base.start(), base.finish_s(), base.half_width(), cell,
            ).unwrap();
            let o = Vec2::new(x, y);
            let d = Vec2::from_angle(ang);
            let brute = base.walls().iter()
                .filter_map(|w| crate::geometry::ray_segment_intersect(o, d, w))
                .fold(f64::INFINITY, f64::min);
            let brute = (brute <= 50.0).then_some(brute);
            prop_assert_eq!(base.ray_cast(o, d, 50.0), brute);
            prop_assert_eq!(other.ray_cast(o, d, 50.0), brute);
            prop_assert_eq!(base.collides(o, yaw, (4.5, 1.8)), other.collides(o, yaw, (4.5, 1.8)));
        }
    }
}
