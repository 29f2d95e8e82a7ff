//! Procedural courses: a centerline built from straights and arcs, walled on
//! both sides at a fixed half width.

use std::f64::consts::PI;

use crate::geometry::{Segment, Vec2};

use super::{Pose, Track};

/// Arc sampling step along the centerline, meters.
const ARC_STEP: f64 = 2.0;

#[derive(Debug, Clone, Copy)]
enum Piece {
    Straight(f64),
    /// Radius and signed turn angle (positive turns left).
    Arc(f64, f64),
}

#[derive(Debug, Clone)]
pub struct CourseBuilder {
    name: String,
    half_width: f64,
    lead_in: f64,
    pieces: Vec<Piece>,
}

impl CourseBuilder {
    pub fn new(name: impl Into<String>, half_width: f64) -> Self {
        Self {
            name: name.into(),
            half_width,
            lead_in: 10.0,
            pieces: Vec::new(),
        }
    }

    pub fn straight(mut self, length: f64) -> Self {
        self.pieces.push(Piece::Straight(length));
        self
    }

    pub fn arc(mut self, radius: f64, turn: f64) -> Self {
        self.pieces.push(Piece::Arc(radius, turn));
        self
    }

    /// Walled run-off behind the start point, meters.
    pub fn lead_in(mut self, length: f64) -> Self {
        self.lead_in = length;
        self
    }

    fn centerline(&self) -> (Vec<Vec2>, Vec<f64>) {
        let mut pts = vec![Vec2::ZERO];
        let mut headings = vec![0.0];
        let (mut p, mut h) = (Vec2::ZERO, 0.0f64);
        for piece in &self.pieces {
            match *piece {
                Piece::Straight(len) => {
                    p += Vec2::from_angle(h) * len;
                    pts.push(p);
                    headings.push(h);
                }
                Piece::Arc(radius, turn) => {
                    let n = ((radius * turn.abs()) / ARC_STEP).ceil().max(1.0) as usize;
                    let center = p + Vec2::from_angle(h).perp() * (radius * turn.signum());
                    let start = p - center;
                    for k in 1..=n {
                        let a = turn * k as f64 / n as f64;
                        pts.push(center + start.rotated(a));
                        headings.push(h + a);
                    }
                    p = *pts.last().unwrap();
                    h += turn;
                }
            }
        }
        (pts, headings)
    }

    fn offset(pts: &[Vec2], headings: &[f64], d: f64) -> Vec<Vec2> {
        pts.iter()
            .zip(headings)
            .map(|(&p, &h)| p + Vec2::from_angle(h).perp() * d)
            .collect()
    }

    fn polyline(pts: &[Vec2]) -> impl Iterator<Item = Segment> + '_ {
        pts.windows(2).map(|w| Segment::new(w[0], w[1]))
    }

    /// Open course with end caps; finish `finish_margin` meters before the end
    /// of the centerline.
    pub fn build_open(&self, finish_margin: f64) -> Track {
        let (pts, hs) = self.centerline();
        let hw = self.half_width;
        let back = Vec2::new(-self.lead_in, 0.0);
        let mut left = vec![back + Vec2::new(0.0, hw)];
        left.extend(Self::offset(&pts, &hs, hw));
        let mut right = vec![back - Vec2::new(0.0, hw)];
        right.extend(Self::offset(&pts, &hs, -hw));
        let mut walls: Vec<Segment> = Self::polyline(&left)
            .chain(Self::polyline(&right))
            .collect();
        walls.push(Segment::new(left[0], right[0]));
        walls.push(Segment::new(*left.last().unwrap(), *right.last().unwrap()));
        let track_len: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
        Track::new(
            self.name.clone(),
            walls,
            pts,
            Pose {
                pos: Vec2::ZERO,
                yaw: 0.0,
            },
            track_len - finish_margin,
            hw,
        )
        .expect("builder produces a valid course")
    }

    /// Closed loop with a barrier across the course `barrier_gap` meters
    /// behind the start; the centerline stops just short of the barrier.
    pub fn build_loop(&self, barrier_gap: f64, finish_margin: f64) -> Track {
        let (pts, hs) = self.centerline();
        let hw = self.half_width;
        let walls_left = Self::offset(&pts, &hs, hw);
        let walls_right = Self::offset(&pts, &hs, -hw);
        let mut walls: Vec<Segment> = Self::polyline(&walls_left)
            .chain(Self::polyline(&walls_right))
            .collect();

        // The loop closes back on the start; barrier sits on the closing
        // straight, `barrier_gap` behind the origin.
        let barrier = Vec2::new(-barrier_gap, 0.0);
        walls.push(Segment::new(
            barrier + Vec2::new(0.0, hw),
            barrier - Vec2::new(0.0, hw),
        ));

        let total: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
        let cut = total - barrier_gap - 2.0;
        let mut center = vec![pts[0]];
        let mut acc = 0.0;
        for w in pts.windows(2) {
            let len = w[0].distance(w[1]);
            if acc + len >= cut {
                center.push(w[0] + (w[1] - w[0]) * ((cut - acc) / len));
                break;
            }
            acc += len;
            center.push(w[1]);
        }
        Track::new(
            self.name.clone(),
            walls,
            center,
            Pose {
                pos: Vec2::ZERO,
                yaw: 0.0,
            },
            cut - finish_margin,
            hw,
        )
        .expect("builder produces a valid loop")
    }
}

/// 10 m wide straight corridor; finish at `length` meters.
pub fn straight_corridor(length: f64) -> Track {
    CourseBuilder::new("straight", 5.0)
        .straight(length + 10.0)
        .build_open(10.0)
}

/// Left then right 90 degree bends of radius 35 m between straights.
pub fn s_curve() -> Track {
    CourseBuilder::new("s_curve", 6.0)
        .straight(40.0)
        .arc(35.0, PI / 2.0)
        .arc(35.0, -PI / 2.0)
        .straight(40.0)
        .build_open(10.0)
}

/// Oval with 120 m straights and 40 m radius hairpins, driven once around.
pub fn closed_circuit() -> Track {
    CourseBuilder::new("circuit", 6.0)
        .straight(60.0)
        .arc(40.0, PI)
        .straight(120.0)
        .arc(40.0, PI)
        .straight(60.0)
        .build_loop(4.0, 10.0)
}
