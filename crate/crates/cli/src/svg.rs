use std::fmt::Write;

use navmetrics::{EpisodePair, NavWorld, NodeId};

pub const WIDTH: f64 = 600.0;
pub const HEIGHT: f64 = 600.0;
pub const MARGIN_FRAC: f64 = 0.05;
pub const REFERENCE_COLOR: &str = "#1f77b4";
pub const QUERY_COLOR: &str = "#ff7f0e";

/// Affine world-to-screen map: uniform scale, centred, y flipped so that
/// world "up" is screen "up".
struct Viewport {
    scale: f64,
    offset_x: f64,
    offset_y: f64,
    min_x: f64,
    min_y: f64,
}

impl Viewport {
    fn new(world: &NavWorld) -> Self {
        let (min_x, min_y, max_x, max_y) =
            world.bounding_box().unwrap_or((0.0, 0.0, 1.0, 1.0));
        let margin = WIDTH * MARGIN_FRAC;
        let inner_w = WIDTH - 2.0 * margin;
        let inner_h = HEIGHT - 2.0 * margin;
        let extent_x = (max_x - min_x).max(1e-9);
        let extent_y = (max_y - min_y).max(1e-9);
        let scale = (inner_w / extent_x).min(inner_h / extent_y);
        Viewport {
            scale,
            offset_x: margin + (inner_w - scale * extent_x) / 2.0,
            offset_y: margin + (inner_h - scale * extent_y) / 2.0,
            min_x,
            min_y,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = self.offset_x + self.scale * (x - self.min_x);
        let sy = HEIGHT - (self.offset_y + self.scale * (y - self.min_y));
        (sx, sy)
    }
}

fn polyline_points(world: &NavWorld, vp: &Viewport, path: &[NodeId]) -> String {
    let mut out = String::new();
    for &id in path {
        let (x, y) = world.coord(id).expect("validated before rendering");
        let (sx, sy) = vp.map(x, y);
        if !out.is_empty() {
            out.push(' ');
        }
        write!(out, "{sx:.3},{sy:.3}").unwrap();
    }
    out
}

fn circle(out: &mut String, pos: (f64, f64), r: f64, style: &str) {
    writeln!(
        out,
        r#"  <circle cx="{:.3}" cy="{:.3}" r="{r}" {style}/>"#,
        pos.0, pos.1
    )
    .unwrap();
}

/// One episode as a standalone SVG: the world in light grey, the reference
/// in blue over the query in orange, with start and goal markers and an
/// nDTW caption.
pub fn episode_svg(world: &NavWorld, ep: &EpisodePair, ndtw: f64) -> String {
    let vp = Viewport::new(world);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r##"  <rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();

    for &(a, b) in world.edges() {
        let pa = vp_coord(world, &vp, a);
        let pb = vp_coord(world, &vp, b);
        writeln!(
            out,
            r##"  <line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#dddddd" stroke-width="1"/>"##,
            pa.0, pa.1, pb.0, pb.1
        )
        .unwrap();
    }
    for &id in world.node_ids() {
        circle(&mut out, vp_coord(world, &vp, id), 2.0, r##"fill="#c8c8c8""##);
    }

    let reference = polyline_points(world, &vp, ep.reference());
    let query = polyline_points(world, &vp, ep.query());
    writeln!(
        out,
        r#"  <polyline points="{reference}" fill="none" stroke="{REFERENCE_COLOR}" stroke-width="3" stroke-linejoin="round" stroke-linecap="round"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"  <polyline points="{query}" fill="none" stroke="{QUERY_COLOR}" stroke-width="2" stroke-linejoin="round" stroke-linecap="round"/>"#
    )
    .unwrap();

    let start = vp_coord(world, &vp, ep.reference()[0]);
    let goal = vp_coord(world, &vp, ep.goal());
    let stop = vp_coord(world, &vp, ep.stop());
    circle(&mut out, start, 5.0, &format!(r#"fill="{REFERENCE_COLOR}""#));
    circle(
        &mut out,
        goal,
        7.0,
        &format!(r#"fill="none" stroke="{REFERENCE_COLOR}" stroke-width="2""#),
    );
    circle(&mut out, stop, 4.0, &format!(r#"fill="{QUERY_COLOR}""#));

    writeln!(
        out,
        r#"  <text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="16">nDTW = {ndtw:.3}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

fn vp_coord(world: &NavWorld, vp: &Viewport, id: NodeId) -> (f64, f64) {
    let (x, y) = world.coord(id).expect("validated before rendering");
    vp.map(x, y)
}
