//! Catalog-driven completion: rooms behind open doors and the anchor objects
//! that partly seen rooms are still missing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{consistency_check, labeled, overlaps_nothing, CompletionSampler, SampleContext};
use crate::catalog::{label_histogram, RoomCatalog};
use crate::geometry::convex_polygons_intersect;
use crate::mapping::{Cell, OccupancyGrid};
use crate::scene_graph::{NodeId, ObjectNode, Provenance, RoomNode};
use crate::{OrientedBox, Rect, SceneGraph, Vec2, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Chance of proposing a room behind an open door.
    pub room_probability: f64,
    /// Chance of adding each missing anchor object to a partly seen room.
    pub anchor_probability: f64,
    /// Weight multiplier for labels the map still lacks and for labels whose
    /// furniture was glimpsed behind the door. Generated homes hold every
    /// expected label before any extra room, so a missing one dominates.
    pub label_boost: f64,
    /// Distance from a door center at which its two sides are probed.
    pub door_probe: f64,
    /// Gap between a door's wall line and a proposed footprint.
    pub wall_gap: f64,
    pub min_side: f64,
    /// Least fraction of a proposed footprint that must be unexplored.
    pub min_unknown: f64,
    /// Growth increment of proposed footprints.
    pub step: f64,
    pub placement_tries: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            room_probability: 0.85,
            anchor_probability: 0.5,
            label_boost: 30.0,
            door_probe: 0.5,
            wall_gap: 0.15,
            min_side: 1.5,
            min_unknown: 0.2,
            step: 0.1,
            placement_tries: 50,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PriorSampler {
    pub catalog: RoomCatalog,
    pub cfg: PriorConfig,
}

/// One side of a door with no labeled room behind it.
#[derive(Clone, Copy, Debug)]
struct OpenSide {
    center: Vec2,
    /// Unit vector along the wall.
    along: Vec2,
    /// Unit vector into the unexplored side.
    normal: Vec2,
    half_width: f64,
}

/// Local frame of a door side: `a` along the wall, `b` away from it.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Span {
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
}

impl OpenSide {
    fn to_world(&self, s: Span) -> Rect {
        let p = |a: f64, b: f64| self.center + self.along * a + self.normal * b;
        Rect::bounding(&[p(s.a0, s.b0), p(s.a1, s.b1)]).expect("two points")
    }
}

/// Cells under a rectangle as (index, state); both are None off the grid.
fn grid_cells<'a>(grid: &'a OccupancyGrid, r: &Rect) -> impl Iterator<Item = (Option<usize>, Option<Cell>)> + 'a {
    let res = grid.resolution;
    let x0 = ((r.min.x + 1e-9) / res).floor() as i64;
    let x1 = ((r.max.x - 1e-9) / res).floor() as i64;
    let y0 = ((r.min.y + 1e-9) / res).floor() as i64;
    let y1 = ((r.max.y - 1e-9) / res).floor() as i64;
    (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| {
        let i = grid.index_of_key((x, y));
        (i, i.map(|i| grid.get(i)))
    }))
}

fn rect_gap(a: &Rect, b: &Rect) -> f64 {
    let dx = (a.min.x - b.max.x).max(b.min.x - a.max.x).max(0.0);
    let dy = (a.min.y - b.max.y).max(b.min.y - a.max.y).max(0.0);
    dx.hypot(dy)
}

impl PriorSampler {
    pub fn new(catalog: RoomCatalog) -> Self {
        Self { catalog, cfg: PriorConfig::default() }
    }

    pub fn with_config(catalog: RoomCatalog, cfg: PriorConfig) -> Self {
        Self { catalog, cfg }
    }

    /// Sample `index` of the stream under `seed`.
    pub fn sample_one(&self, current: &SceneGraph, ctx: &SampleContext, seed: u64, index: usize) -> SceneGraph {
        let mut rng = crate::rng::stream(seed, index as u64);
        let mut g = current.clone();
        for side in self.open_sides(current) {
            if !rng.gen_bool(self.cfg.room_probability) {
                continue;
            }
            let before = g.clone();
            if self.propose_room(&mut g, &side, ctx.grid, &mut rng).is_some()
                && (consistency_check(current, &g).is_err() || g.validate().is_err())
            {
                g = before;
            }
        }
        self.add_anchors(&mut g, current, ctx.grid, &mut rng);
        g
    }

    fn open_sides(&self, g: &SceneGraph) -> Vec<OpenSide> {
        let labeled_at = |p: Vec2| {
            g.rooms().any(|r| r.provenance == Provenance::Observed && labeled(&r.label) && r.contains(p))
        };
        let mut out = Vec::new();
        for d in g.doors() {
            let u = Vec2::from_angle(d.bbox.yaw);
            let along = if u.x.abs() >= u.y.abs() { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
            let c = d.bbox.center.xy();
            for s in [1.0, -1.0] {
                let normal = along.perp() * s;
                if !labeled_at(c + normal * self.cfg.door_probe) {
                    out.push(OpenSide { center: c, along, normal, half_width: d.bbox.half_extents.x.max(0.2) });
                }
            }
        }
        out
    }

    fn pick_label(&self, g: &SceneGraph, side: &OpenSide, rng: &mut ChaCha8Rng) -> Option<String> {
        let near = g
            .rooms()
            .find(|r| labeled(&r.label) && r.contains(side.center - side.normal * self.cfg.door_probe))
            .map(|r| r.label.clone());
        let behind = side.to_world(Span { a0: -2.0, a1: 2.0, b0: 0.0, b1: 4.0 });
        let glimpsed: Vec<&str> = g
            .objects()
            .filter(|o| behind.contains(o.center.xy()))
            .filter(|o| o.parent_room.and_then(|p| g.room(p)).is_none_or(|r| !labeled(&r.label)))
            .map(|o| o.label.as_str())
            .collect();
        let weights: Vec<(&String, f64)> = self
            .catalog
            .rooms
            .iter()
            .map(|(label, prior)| {
                let mut w = prior.weight;
                let have = g.rooms().filter(|r| &r.label == label).count();
                if have < prior.expected as usize {
                    w *= self.cfg.label_boost;
                }
                if prior.objects.iter().any(|o| glimpsed.contains(&o.label.as_str())) {
                    w *= self.cfg.label_boost;
                }
                if near.as_deref().is_some_and(|n| !self.catalog.may_neighbour(label, n)) {
                    w = 0.0;
                }
                (label, w)
            })
            .collect();
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if total <= 0.0 {
            return None;
        }
        let mut pick = rng.gen::<f64>() * total;
        for (label, w) in &weights {
            if pick < *w {
                return Some((*label).clone());
            }
            pick -= w;
        }
        weights.iter().rev().find(|w| w.1 > 0.0).map(|w| w.0.clone())
    }

    /// Whether a rectangle cuts into walls, labeled or predicted rooms, or
    /// mostly unexplained occupied cells.
    fn blocked(&self, g: &SceneGraph, grid: Option<&OccupancyGrid>, r: &Rect) -> bool {
        let poly = r.shrink(0.01).corners();
        if g.walls().any(|w| convex_polygons_intersect(&w.bbox.footprint(), &poly)) {
            return true;
        }
        let rooms_hit = g.rooms().any(|o| {
            (o.provenance == Provenance::Predicted || labeled(&o.label)) && o.footprint_bounds().overlap_area(r) > 0.01
        });
        if rooms_hit {
            return true;
        }
        let Some(grid) = grid else { return false };
        let known: Vec<Rect> =
            g.objects().filter_map(|o| Rect::bounding(&o.obb().footprint())).map(|b| b.shrink(-0.1)).collect();
        let (mut unexplained, mut n) = (0usize, 0usize);
        for (i, c) in grid_cells(grid, r) {
            n += 1;
            // Cells of already mapped objects do not block a room.
            if c == Some(Cell::Occupied) && !i.is_some_and(|i| known.iter().any(|b| b.contains(grid.center(i)))) {
                unexplained += 1;
            }
        }
        unexplained * 2 > n
    }

    fn propose_room(
        &self,
        g: &mut SceneGraph,
        side: &OpenSide,
        grid: Option<&OccupancyGrid>,
        rng: &mut ChaCha8Rng,
    ) -> Option<NodeId> {
        let label = self.pick_label(g, side, rng)?;
        let prior = self.catalog.get(&label)?.clone();
        let (lo, hi) = prior.size;
        let w = rng.gen_range(lo..=hi);
        let d = rng.gen_range(lo..=hi);
        let slack = (w / 2.0 - side.half_width).max(0.0);
        let off = if slack > 0.0 { rng.gen_range(-slack..=slack) } else { 0.0 };
        let gap = self.cfg.wall_gap;
        let target = Span { a0: off - w / 2.0, a1: off + w / 2.0, b0: gap, b1: gap + d };
        let mut cur = Span { a0: -side.half_width, a1: side.half_width, b0: gap, b1: gap + 0.5 };
        if self.blocked(g, grid, &side.to_world(cur)) {
            return None;
        }
        let step = self.cfg.step;
        let mut open = [true; 3];
        while open.iter().any(|o| *o) {
            for (k, flag) in open.iter_mut().enumerate() {
                if !*flag {
                    continue;
                }
                let (next, strip) = match k {
                    0 => {
                        let b1 = (cur.b1 + step).min(target.b1);
                        (Span { b1, ..cur }, Span { b0: cur.b1, ..Span { b1, ..cur } })
                    }
                    1 => {
                        let a0 = (cur.a0 - step).max(target.a0);
                        (Span { a0, ..cur }, Span { a1: cur.a0, ..Span { a0, ..cur } })
                    }
                    _ => {
                        let a1 = (cur.a1 + step).min(target.a1);
                        (Span { a1, ..cur }, Span { a0: cur.a1, ..Span { a1, ..cur } })
                    }
                };
                if next == cur || self.blocked(g, grid, &side.to_world(strip)) {
                    *flag = false;
                } else {
                    cur = next;
                }
            }
        }
        let rect = side.to_world(cur);
        if rect.width() < self.cfg.min_side || rect.height() < self.cfg.min_side {
            return None;
        }
        if let Some(grid) = grid {
            let cells: Vec<Option<Cell>> = grid_cells(grid, &rect).map(|c| c.1).collect();
            let unknown = cells.iter().filter(|c| matches!(c, None | Some(Cell::Unknown))).count();
            if (unknown as f64) < self.cfg.min_unknown * cells.len() as f64 {
                return None;
            }
        }

        let id = g.alloc_id();
        let mut room = RoomNode {
            id,
            label,
            centroid: rect.center(),
            footprint: rect.corners(),
            feature: Default::default(),
            provenance: Provenance::Predicted,
        };
        g.upsert(room.clone()).ok()?;
        let area = rect.shrink(0.1);
        let mut labels = Vec::new();
        for op in &prior.objects {
            let n = rng.gen_range(op.count.0..=op.count.1);
            for _ in 0..n {
                if let Some((c, yaw)) = self.place(g, &area, op.half_extents, grid, false, rng) {
                    let oid = g.alloc_id();
                    let node = ObjectNode {
                        id: oid,
                        label: op.label.clone(),
                        center: c,
                        half_extents: op.half_extents,
                        yaw,
                        parent_room: Some(id),
                        provenance: Provenance::Predicted,
                    };
                    if g.upsert(node).is_ok() {
                        labels.push(op.label.clone());
                    }
                }
            }
        }
        room.feature = label_histogram(labels.iter().map(String::as_str));
        g.upsert(room).ok()?;
        Some(id)
    }

    /// Random admissible pose for a box of half extents `half` inside
    /// `area`: clear of nothing boxes, walls and other objects and not on
    /// observed free floor (with `unknown_only`, on an unexplored cell).
    fn place(
        &self,
        g: &SceneGraph,
        area: &Rect,
        half: Vec3,
        grid: Option<&OccupancyGrid>,
        unknown_only: bool,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Vec3, f64)> {
        for _ in 0..self.cfg.placement_tries {
            let yaw = if rng.gen_bool(0.5) { 0.0 } else { std::f64::consts::FRAC_PI_2 };
            let (hx, hy) = if yaw == 0.0 { (half.x, half.y) } else { (half.y, half.x) };
            let (x0, x1) = (area.min.x + hx, area.max.x - hx);
            let (y0, y1) = (area.min.y + hy, area.max.y - hy);
            if x0 > x1 || y0 > y1 {
                continue;
            }
            let c = Vec3::new(rng.gen_range(x0..=x1), rng.gen_range(y0..=y1), half.z);
            let obb = OrientedBox::new(c, half, yaw);
            if g.nothings().any(|n| overlaps_nothing(&obb, &n.bbox)) {
                continue;
            }
            let fp = Rect::new(Vec2::new(c.x - hx, c.y - hy), Vec2::new(c.x + hx, c.y + hy));
            let poly = fp.corners();
            if g.walls().any(|w| convex_polygons_intersect(&w.bbox.footprint(), &poly)) {
                continue;
            }
            if g.objects().any(|o| Rect::bounding(&o.obb().footprint()).is_some_and(|b| rect_gap(&b, &fp) < 0.1)) {
                continue;
            }
            if let Some(grid) = grid {
                let cell = grid.index_of(c.xy()).map(|i| grid.get(i));
                let ok = if unknown_only { matches!(cell, None | Some(Cell::Unknown)) } else { cell != Some(Cell::Free) };
                if !ok {
                    continue;
                }
            }
            return Some((c, yaw));
        }
        None
    }

    /// Objects every room of a label has at least one of, added to
    /// observed rooms that lack them, on unexplored cells of the room.
    fn add_anchors(&self, g: &mut SceneGraph, current: &SceneGraph, grid: Option<&OccupancyGrid>, rng: &mut ChaCha8Rng) {
        let rooms: Vec<RoomNode> = current
            .rooms()
            .filter(|r| r.provenance == Provenance::Observed && labeled(&r.label))
            .cloned()
            .collect();
        for r in rooms {
            let Some(prior) = self.catalog.get(&r.label) else { continue };
            for op in prior.objects.iter().filter(|o| o.count.0 > 0) {
                let have = g.children_of(r.id).filter(|o| o.label == op.label).count() as u32;
                for _ in have..op.count.0 {
                    if !rng.gen_bool(self.cfg.anchor_probability) {
                        continue;
                    }
                    let Some((c, yaw)) = self.place(g, &r.footprint_bounds(), op.half_extents, grid, true, rng) else {
                        continue;
                    };
                    if !r.contains(c.xy()) {
                        continue;
                    }
                    let id = g.alloc_id();
                    let node = ObjectNode {
                        id,
                        label: op.label.clone(),
                        center: c,
                        half_extents: op.half_extents,
                        yaw,
                        parent_room: Some(r.id),
                        provenance: Provenance::Predicted,
                    };
                    if g.upsert(node).is_ok() && consistency_check(current, g).is_err() {
                        let _ = g.remove(id);
                    }
                }
            }
        }
    }
}

impl CompletionSampler for PriorSampler {
    fn sample_with(&self, current: &SceneGraph, ctx: &SampleContext, m: usize, seed: u64) -> Vec<SceneGraph> {
        (0..m).into_par_iter().map(|i| self.sample_one(current, ctx, seed, i)).collect()
    }

    fn name(&self) -> &str {
        "prior"
    }
}
