use crate::geometry::{ray_segment_intersect, Segment, Vec2};

/// Uniform bucket grid over wall segments. Queries return candidate sets that
/// are supersets of the exact answer; callers always run the exact test.
#[derive(Debug, Clone)]
pub(crate) struct WallGrid {
    origin: Vec2,
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<u32>>,
}

const PAD: f64 = 1e-6;

impl WallGrid {
    pub(crate) fn build(walls: &[Segment], cell: f64) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for w in walls {
            for p in [w.a, w.b] {
                min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
                max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
            }
        }
        let origin = min - Vec2::new(cell, cell);
        let cols = ((max.x - origin.x) / cell).floor() as usize + 2;
        let rows = ((max.y - origin.y) / cell).floor() as usize + 2;
        let mut grid = WallGrid {
            origin,
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        };
        for (i, w) in walls.iter().enumerate() {
            let lo = Vec2::new(w.a.x.min(w.b.x) - PAD, w.a.y.min(w.b.y) - PAD);
            let hi = Vec2::new(w.a.x.max(w.b.x) + PAD, w.a.y.max(w.b.y) + PAD);
            let (c0, r0) = grid.cell_of(lo);
            let (c1, r1) = grid.cell_of(hi);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let cell_lo = grid.origin + Vec2::new(c as f64 * cell, r as f64 * cell);
                    let cell_hi = cell_lo + Vec2::new(cell, cell);
                    if segment_touches_box(
                        w,
                        cell_lo - Vec2::new(PAD, PAD),
                        cell_hi + Vec2::new(PAD, PAD),
                    ) {
                        grid.cells[r * cols + c].push(i as u32);
                    }
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.cell).floor();
        let r = ((p.y - self.origin.y) / self.cell).floor();
        (
            c.clamp(0.0, (self.cols - 1) as f64) as usize,
            r.clamp(0.0, (self.rows - 1) as f64) as usize,
        )
    }

    fn bounds(&self) -> (Vec2, Vec2) {
        let hi =
            self.origin + Vec2::new(self.cols as f64 * self.cell, self.rows as f64 * self.cell);
        (self.origin, hi)
    }

    /// Wall indices registered in any cell overlapping the box, sorted and
    /// deduplicated.
    pub(crate) fn query_box(&self, lo: Vec2, hi: Vec2, out: &mut Vec<u32>) {
        out.clear();
        let (gmin, gmax) = self.bounds();
        if hi.x < gmin.x || hi.y < gmin.y || lo.x > gmax.x || lo.y > gmax.y {
            return;
        }
        let (c0, r0) = self.cell_of(lo);
        let (c1, r1) = self.cell_of(hi);
        for r in r0..=r1 {
            for c in c0..=c1 {
                out.extend_from_slice(&self.cells[r * self.cols + c]);
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Nearest wall hit within `max_range` along a unit ray, walking cells in
    /// ray order and stopping once the best hit lies before the current
    /// cell's exit.
    pub(crate) fn ray_cast(
        &self,
        walls: &[Segment],
        origin: Vec2,
        dir: Vec2,
        max_range: f64,
    ) -> Option<f64> {
        let (gmin, gmax) = self.bounds();
        let (mut t_enter, mut t_leave) = (0.0f64, max_range);
        for (o, d, lo, hi) in [
            (origin.x, dir.x, gmin.x, gmax.x),
            (origin.y, dir.y, gmin.y, gmax.y),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (a, b) = ((lo - o) / d, (hi - o) / d);
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t_enter = t_enter.max(a);
                t_leave = t_leave.min(b);
            }
        }
        if t_enter > t_leave {
            return None;
        }

        let start = origin + dir * t_enter;
        let (mut c, mut r) = self.cell_of(start);
        let (step_c, delta_x, mut next_x) =
            axis_setup(start.x, dir.x, self.origin.x, self.cell, c, t_enter);
        let (step_r, delta_y, mut next_y) =
            axis_setup(start.y, dir.y, self.origin.y, self.cell, r, t_enter);

        let mut best = f64::INFINITY;
        loop {
            for &i in &self.cells[r * self.cols + c] {
                if let Some(t) = ray_segment_intersect(origin, dir, &walls[i as usize]) {
                    best = best.min(t);
                }
            }
            let exit = next_x.min(next_y);
            if best <= exit || exit > t_leave {
                break;
            }
            if next_x < next_y {
                let nc = c as isize + step_c;
                if nc < 0 || nc >= self.cols as isize {
                    break;
                }
                c = nc as usize;
                next_x += delta_x;
            } else {
                let nr = r as isize + step_r;
                if nr < 0 || nr >= self.rows as isize {
                    break;
                }
                r = nr as usize;
                next_y += delta_y;
            }
        }
        (best <= max_range).then_some(best)
    }
}

/// Returns (cell step, ray-parameter per cell, ray parameter of the first
/// boundary crossing) for one axis.
fn axis_setup(p: f64, d: f64, origin: f64, cell: f64, idx: usize, t0: f64) -> (isize, f64, f64) {
    if d > 0.0 {
        let boundary = origin + (idx + 1) as f64 * cell;
        (1, cell / d, t0 + (boundary - p) / d)
    } else if d < 0.0 {
        let boundary = origin + idx as f64 * cell;
        (-1, -cell / d, t0 + (boundary - p) / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

fn segment_touches_box(s: &Segment, lo: Vec2, hi: Vec2) -> bool {
    let inside = |p: Vec2| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    if inside(s.a) || inside(s.b) {
        return true;
    }
    let corners = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    (0..4).any(|k| s.intersects(&Segment::new(corners[k], corners[(k + 1) % 4])))
}
