use super::{GraphError, SceneGraph};
use crate::geometry::convex_polygons_intersect;
use crate::pgm::GrayImage;
use crate::{Rect, Vec2};

/// Height bands rendered for the completion sampler by default.
pub const DEFAULT_BANDS: [(f64, f64); 2] = [(0.0, 0.3), (0.3, 0.5)];

const STRUCTURE_SHADE: u8 = 0;
const OBJECT_SHADE: u8 = 128;
const NOTHING_SHADE: u8 = 200;
const EMPTY_SHADE: u8 = 255;

/// Horizontal slice of a graph between two heights.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    pub image: GrayImage,
    /// World coordinates of the lower-left raster corner.
    pub origin: Vec2,
    pub cell: f64,
    /// No node intersected the band; the image is all white.
    pub empty: bool,
}

/// Rasterize the nodes whose vertical extent overlaps `[z_lo, z_hi]`.
///
/// The raster covers the footprint of the whole graph (independent of the
/// band) so that slices of one graph align cell for cell. Structures are
/// black, objects mid-gray, nothing boxes light gray and everything else
/// white; darker shades win where nodes overlap.
pub fn cross_section_raster(graph: &SceneGraph, z_lo: f64, z_hi: f64, cell: f64) -> Result<CrossSection, GraphError> {
    if !(z_lo < z_hi) || !(cell > 0.0) || !cell.is_finite() {
        return Err(GraphError::InvalidBand { z_lo, z_hi, cell });
    }
    let Some(bounds) = graph.xy_bounds() else {
        return Ok(CrossSection { image: GrayImage::filled(1, 1, EMPTY_SHADE), origin: Vec2::zero(), cell, empty: true });
    };
    let origin = bounds.min - Vec2::new(cell, cell);
    let width = ((bounds.width() / cell).ceil() as usize + 2).max(1);
    let height = ((bounds.height() / cell).ceil() as usize + 2).max(1);
    let mut image = GrayImage::filled(width, height, EMPTY_SHADE);
    let mut empty = true;

    let overlaps = |z0: f64, z1: f64| z0 < z_hi && z1 > z_lo;
    let paint = |poly: &[Vec2], shade: u8, image: &mut GrayImage| {
        let Some(r) = Rect::bounding(poly) else { return };
        let c0 = (((r.min.x - origin.x) / cell).floor().max(0.0) as usize).min(width - 1);
        let c1 = (((r.max.x - origin.x) / cell).floor().max(0.0) as usize).min(width - 1);
        let r0 = (((r.min.y - origin.y) / cell).floor().max(0.0) as usize).min(height - 1);
        let r1 = (((r.max.y - origin.y) / cell).floor().max(0.0) as usize).min(height - 1);
        // Cells are shrunk slightly so that boxes flush with a cell edge do
        // not bleed into the neighbouring cell.
        let eps = cell * 1e-6;
        for gy in r0..=r1 {
            for gx in c0..=c1 {
                let x0 = origin.x + gx as f64 * cell + eps;
                let y0 = origin.y + gy as f64 * cell + eps;
                let sq = [
                    Vec2::new(x0, y0),
                    Vec2::new(x0 + cell - 2.0 * eps, y0),
                    Vec2::new(x0 + cell - 2.0 * eps, y0 + cell - 2.0 * eps),
                    Vec2::new(x0, y0 + cell - 2.0 * eps),
                ];
                if convex_polygons_intersect(&sq, poly) {
                    let row = height - 1 - gy;
                    if shade < image.get(gx, row) {
                        image.set(gx, row, shade);
                    }
                }
            }
        }
    };

    for n in graph.nothings() {
        if overlaps(n.bbox.min.z, n.bbox.max.z) {
            empty = false;
            paint(&n.bbox.footprint(), NOTHING_SHADE, &mut image);
        }
    }
    for o in graph.objects() {
        let b = o.obb();
        let (z0, z1) = b.z_range();
        if overlaps(z0, z1) {
            empty = false;
            paint(&b.footprint(), OBJECT_SHADE, &mut image);
        }
    }
    for s in graph.structures() {
        let (z0, z1) = s.bbox.z_range();
        if overlaps(z0, z1) {
            empty = false;
            paint(&s.bbox.footprint(), STRUCTURE_SHADE, &mut image);
        }
    }
    Ok(CrossSection { image, origin, cell, empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::tests::room;
    use crate::scene_graph::{ObjectNode, Plane, Provenance, StructureKind, StructureNode};
    use crate::{OrientedBox, Vec3};

    fn wall_graph() -> SceneGraph {
        let mut g = SceneGraph::new();
        room(&mut g, "kitchen", 0.0, 0.0, 2.0, 2.0);
        let id = g.alloc_id();
        g.upsert(StructureNode {
            id,
            kind: StructureKind::Wall,
            plane: Plane { normal: Vec3::new(0.0, 1.0, 0.0), offset: 1.0 },
            bbox: OrientedBox::new(Vec3::new(1.0, 1.05, 1.25), Vec3::new(1.0, 0.05, 1.25), 0.0),
            observation_count: 2,
        })
        .unwrap();
        g
    }

    #[test]
    fn wall_draws_dark_line() {
        let g = wall_graph();
        let cs = cross_section_raster(&g, 0.0, 0.3, 0.1).unwrap();
        assert!(!cs.empty);
        let dark_rows: Vec<usize> = (0..cs.image.height)
            .filter(|&r| (0..cs.image.width).any(|c| cs.image.get(c, r) == 0))
            .collect();
        assert_eq!(dark_rows.len(), 1, "{dark_rows:?}");
        let row = dark_rows[0];
        let dark = (0..cs.image.width).filter(|&c| cs.image.get(c, row) == 0).count();
        assert_eq!(dark, 20);
    }

    #[test]
    fn object_above_band_is_excluded() {
        let mut g = SceneGraph::new();
        let id = g.alloc_id();
        g.upsert(ObjectNode {
            id,
            label: "shelf".into(),
            center: Vec3::new(0.0, 0.0, 1.5),
            half_extents: Vec3::new(0.3, 0.3, 0.2),
            yaw: 0.0,
            parent_room: None,
            provenance: Provenance::Observed,
        })
        .unwrap();
        let cs = cross_section_raster(&g, 0.0, 0.3, 0.1).unwrap();
        assert!(cs.empty);
        assert!(cs.image.data.iter().all(|&v| v == 255));
    }

    #[test]
    fn default_bands_differ() {
        let mut g = wall_graph();
        let id = g.alloc_id();
        // Low table top reaching only into the first band.
        g.upsert(ObjectNode {
            id,
            label: "coffee_table".into(),
            center: Vec3::new(1.0, 0.5, 0.15),
            half_extents: Vec3::new(0.4, 0.2, 0.15),
            yaw: 0.0,
            parent_room: None,
            provenance: Provenance::Observed,
        })
        .unwrap();
        let a = cross_section_raster(&g, DEFAULT_BANDS[0].0, DEFAULT_BANDS[0].1, 0.1).unwrap();
        let b = cross_section_raster(&g, DEFAULT_BANDS[1].0, DEFAULT_BANDS[1].1, 0.1).unwrap();
        assert_eq!((a.image.width, a.image.height), (b.image.width, b.image.height));
        assert_ne!(a.image, b.image);
        assert_eq!(a, cross_section_raster(&g, 0.0, 0.3, 0.1).unwrap());
    }

    #[test]
    fn bad_band_rejected() {
        assert!(cross_section_raster(&SceneGraph::new(), 0.5, 0.3, 0.1).is_err());
        assert!(cross_section_raster(&SceneGraph::new(), 0.0, 0.3, 0.0).is_err());
    }
}
