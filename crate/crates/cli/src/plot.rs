//! SVG trajectory plots. Glyphs follow the usual legend: rhombus for a
//! travel-mode change, circle for passing a door, square for moving
//! between rooms and the hallway, double circle for navigation start and
//! stop. Every glyph carries `class="glyph <kind>"`.

use crpsim::projector::World;
use crpsim::rules::Occurrence;
use crpsim::term::Term;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glyph {
    Rhombus,
    Circle,
    Square,
    DoubleCircle,
}

impl Glyph {
    fn name(self) -> &'static str {
        match self {
            Glyph::Rhombus => "mode-change",
            Glyph::Circle => "door-passing",
            Glyph::Square => "room-transition",
            Glyph::DoubleCircle => "nav-start-stop",
        }
    }
}

const NAV_ACTIONS: [&str; 2] = ["go-to", "low-level-nav-plan"];

pub fn glyph_of(e: &Term) -> Option<Glyph> {
    let arg = |i: usize| e.args().get(i);
    match e.functor() {
        "nav-event" if arg(0).is_some_and(|a| a.functor() == "set-travel-mode") => Some(Glyph::Rhombus),
        "passive-sensor-update" if arg(0).is_some_and(|a| a.functor().starts_with("passing-door")) => {
            Some(Glyph::Circle)
        }
        "enter" | "leave" => match arg(0) {
            Some(r) if r.functor().starts_with("door-") => Some(Glyph::Circle),
            Some(_) => Some(Glyph::Square),
            None => None,
        },
        "begin" | "end" | "abort" | "fail" if arg(0).is_some_and(|a| NAV_ACTIONS.contains(&a.functor())) => {
            Some(Glyph::DoubleCircle)
        }
        _ => None,
    }
}

fn glyph_svg(s: &mut String, g: Glyph, x: f64, y: f64, event: &Term) {
    let class = g.name();
    let title = event.to_string().replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let _ = match g {
        Glyph::Rhombus => writeln!(
            s,
            r#"<polygon class="glyph {class}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}"><title>{title}</title></polygon>"#,
            x,
            y - 12.0,
            x + 12.0,
            y,
            x,
            y + 12.0,
            x - 12.0,
            y
        ),
        Glyph::Circle => writeln!(
            s,
            r#"<circle class="glyph {class}" cx="{x:.2}" cy="{y:.2}" r="6"><title>{title}</title></circle>"#
        ),
        Glyph::Square => writeln!(
            s,
            r#"<rect class="glyph {class}" x="{:.2}" y="{:.2}" width="14" height="14"><title>{title}</title></rect>"#,
            x - 7.0,
            y - 7.0
        ),
        Glyph::DoubleCircle => writeln!(
            s,
            r#"<g class="glyph {class}"><circle cx="{x:.2}" cy="{y:.2}" r="8"/><circle cx="{x:.2}" cy="{y:.2}" r="13"/><title>{title}</title></g>"#
        ),
    };
}

/// The map, the robot's trajectory and one glyph per qualifying event
/// that carries a position.
pub fn render(world: &World, occ: &[Occurrence]) -> String {
    let mut xs = vec![world.hallway.xmin, world.hallway.xmax];
    let mut ys = vec![world.hallway.ymin, world.hallway.ymax];
    for r in &world.rooms {
        xs.extend([r.xmin, r.xmax]);
        ys.extend([r.ymin, r.ymax]);
    }
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min) - 50.0;
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 50.0;
    let (x0, x1, y0, y1) = (lo(&xs), hi(&xs), lo(&ys), hi(&ys));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.2} {:.2} {:.2} {:.2}">"#,
        x0,
        y0,
        x1 - x0,
        y1 - y0
    );
    s.push_str("<style>.outline{fill:none;stroke:#444;stroke-width:3}.door{fill:none;stroke:#999;stroke-dasharray:6 4}.path{fill:none;stroke:#c22;stroke-width:4}.glyph{fill:#fff;stroke:#000;stroke-width:2}g.glyph circle{fill:none}</style>\n");
    // y grows upward on the map
    let _ = writeln!(s, r#"<g transform="translate(0 {:.2}) scale(1 -1)">"#, y0 + y1);
    s.push_str("<g id=\"world\">\n");
    for r in std::iter::once(&world.hallway).chain(&world.rooms) {
        let _ = writeln!(
            s,
            r#"<rect class="outline" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"><title>{}</title></rect>"#,
            r.xmin,
            r.ymin,
            r.xmax - r.xmin,
            r.ymax - r.ymin,
            r.id
        );
    }
    for d in &world.doors {
        let _ = writeln!(
            s,
            r#"<circle class="door" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
            d.center.x, d.center.y, d.radius
        );
    }
    s.push_str("</g>\n");

    let pts: Vec<(f64, f64)> = occ.iter().filter_map(|o| Some((o.x?, o.y?))).collect();
    let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        if dedup.last() != Some(&p) {
            dedup.push(p);
        }
    }
    if dedup.len() >= 2 {
        s.push_str(r#"<polyline class="path" points=""#);
        let coords: Vec<String> = dedup.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        s.push_str(&coords.join(" "));
        s.push_str("\"/>\n");
    }
    s.push_str("<g id=\"events\">\n");
    for o in occ {
        if let (Some(g), Some(x), Some(y)) = (glyph_of(&o.event), o.x, o.y) {
            glyph_svg(&mut s, g, x, y, &o.event);
        }
    }
    s.push_str("</g>\n</g>\n</svg>\n");
    s
}
