//! Toy-kitchen object catalog.
//!
//! Every object is built in a design frame and then recentered so its origin
//! is the center of its local bounding box; resting objects therefore sit at
//! `z = height / 2`. Tools lie flat with the handle along local -x.

use crate::geometry::{Aabb, Pose};
use crate::world::shape::{Axis, Primitive};
use crate::world::{Material, Region, SceneObject, ToolClass};

struct Design {
    shape: Vec<Primitive>,
    material: Material,
    tool: Option<(ToolClass, Region)>,
}

fn build(name: &str, design: Design, xy: [f64; 2], yaw: f64) -> SceneObject {
    let bb = design
        .shape
        .iter()
        .fold(Aabb::empty(), |acc, p| acc.union(&p.local_aabb()));
    let c = bb.center();
    let shift = |o: [f64; 3]| [o[0] - c.x, o[1] - c.y, o[2] - c.z];
    let shape = design
        .shape
        .into_iter()
        .map(|p| Primitive {
            offset: shift(p.offset),
            ..p
        })
        .collect();
    let (tool_class, region) = match design.tool {
        Some((class, r)) => (
            Some(class),
            Some(Region {
                center: shift(r.center),
                size: r.size,
            }),
        ),
        None => (None, None),
    };
    let pose = Pose::new([xy[0], xy[1], bb.extents().z * 0.5], [0.0, 0.0, yaw]);
    SceneObject {
        name: name.to_string(),
        shape,
        pose,
        original_pose: pose,
        is_tool: tool_class.is_some(),
        tool_class,
        material: design.material,
        graspable_region: region,
    }
}

fn plain(shape: Vec<Primitive>, material: Material) -> Design {
    Design {
        shape,
        material,
        tool: None,
    }
}

/// A handle lying along -x from the origin, plus a head along +x.
fn handled(class: ToolClass, handle: Primitive, head: Vec<Primitive>) -> Design {
    let hb = handle.local_aabb();
    let e = hb.extents();
    let c = hb.center();
    let region = Region {
        center: [c.x, c.y, c.z],
        size: [e.x, e.y + 0.004, e.z + 0.004],
    };
    let mut shape = vec![handle];
    shape.extend(head);
    Design {
        shape,
        material: Material::Rigid,
        tool: Some((class, region)),
    }
}

/// A ball resting on a slightly slumped base, centered at `center`.
fn ball(radius: f64, center: [f64; 3]) -> Vec<Primitive> {
    let h = 0.6 * radius;
    vec![
        Primitive::sphere(radius, center),
        Primitive::cylinder(0.85 * radius, h, Axis::Z, [center[0], center[1], center[2] - radius + h * 0.5]),
    ]
}

pub fn tomato(name: &str, xy: [f64; 2]) -> SceneObject {
    build(name, plain(ball(0.02, [0.0; 3]), Material::Rigid), xy, 0.0)
}

pub fn apple(name: &str, xy: [f64; 2]) -> SceneObject {
    build(name, plain(ball(0.025, [0.0; 3]), Material::Rigid), xy, 0.0)
}

pub fn cup(name: &str, xy: [f64; 2]) -> SceneObject {
    let shape = vec![Primitive::cylinder(0.025, 0.07, Axis::Z, [0.0; 3])];
    build(name, plain(shape, Material::Rigid), xy, 0.0)
}

pub fn block(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    build(name, plain(vec![Primitive::cuboid([0.04; 3], [0.0; 3])], Material::Rigid), xy, yaw)
}

pub fn plate(name: &str, xy: [f64; 2]) -> SceneObject {
    let shape = vec![Primitive::cylinder(0.07, 0.015, Axis::Z, [0.0; 3])];
    build(name, plain(shape, Material::Rigid), xy, 0.0)
}

/// A wide body on a narrower foot.
pub fn bowl(name: &str, xy: [f64; 2]) -> SceneObject {
    let shape = vec![
        Primitive::cylinder(0.035, 0.015, Axis::Z, [0.0, 0.0, 0.0075]),
        Primitive::cylinder(0.05, 0.025, Axis::Z, [0.0, 0.0, 0.0275]),
    ];
    build(name, plain(shape, Material::Container), xy, 0.0)
}

pub fn dough(name: &str, xy: [f64; 2]) -> SceneObject {
    build(name, plain(ball(0.025, [0.0; 3]), Material::Dough), xy, 0.0)
}

pub fn candy(name: &str, xy: [f64; 2]) -> SceneObject {
    let shape = vec![Primitive::cuboid([0.05, 0.05, 0.02], [0.0; 3])];
    build(name, plain(shape, Material::Granular), xy, 0.0)
}

/// A small toy table: a slab on four legs.
pub fn table_slab(name: &str, xy: [f64; 2]) -> SceneObject {
    let mut shape = vec![Primitive::cuboid([0.14, 0.14, 0.015], [0.0, 0.0, 0.0525])];
    for (x, y) in [(-0.06, -0.06), (-0.06, 0.06), (0.06, -0.06), (0.06, 0.06)] {
        shape.push(Primitive::cuboid([0.015, 0.015, 0.045], [x, y, 0.0225]));
    }
    build(name, plain(shape, Material::Rigid), xy, 0.0)
}

pub fn scoop(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let d = handled(
        ToolClass::Scoop,
        Primitive::cylinder(0.011, 0.10, Axis::X, [-0.05, 0.0, 0.011]),
        vec![Primitive::cuboid([0.08, 0.06, 0.015], [0.04, 0.0, 0.0075])],
    );
    build(name, d, xy, yaw)
}

pub fn spatula(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let d = handled(
        ToolClass::Spatula,
        Primitive::cylinder(0.008, 0.12, Axis::X, [-0.06, 0.0, 0.008]),
        vec![Primitive::cuboid([0.08, 0.06, 0.009], [0.04, 0.0, 0.0045])],
    );
    build(name, d, xy, yaw)
}

pub fn whisk(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let d = handled(
        ToolClass::Whisk,
        Primitive::cylinder(0.015, 0.07, Axis::X, [-0.035, 0.0, 0.016]),
        ball(0.028, [0.028, 0.0, 0.028]),
    );
    build(name, d, xy, yaw)
}

pub fn hammer(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let d = handled(
        ToolClass::Hammer,
        Primitive::cuboid([0.10, 0.03, 0.03], [-0.05, 0.0, 0.0175]),
        vec![Primitive::cuboid([0.035, 0.09, 0.035], [0.0175, 0.0, 0.0175])],
    );
    build(name, d, xy, yaw)
}

/// A round press plate with a short upright knob on top.
pub fn flattener(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let knob = Primitive::cylinder(0.017, 0.03, Axis::Z, [0.0, 0.0, 0.035]);
    let d = Design {
        shape: vec![Primitive::cuboid([0.10, 0.10, 0.02], [0.0, 0.0, 0.01]), knob],
        material: Material::Rigid,
        tool: Some((
            ToolClass::Flattener,
            Region {
                center: [0.0, 0.0, 0.035],
                size: [0.038, 0.038, 0.03],
            },
        )),
    };
    build(name, d, xy, yaw)
}

/// A pointed poking tool: a square grip and a thin shaft.
pub fn skewer(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let d = handled(
        ToolClass::Other,
        Primitive::cuboid([0.07, 0.02, 0.02], [-0.035, 0.0, 0.01]),
        vec![Primitive::cuboid([0.05, 0.012, 0.012], [0.025, 0.0, 0.01])],
    );
    build(name, d, xy, yaw)
}

pub fn knife(name: &str, xy: [f64; 2], yaw: f64) -> SceneObject {
    let d = handled(
        ToolClass::Other,
        Primitive::cuboid([0.09, 0.02, 0.018], [-0.045, 0.0, 0.009]),
        vec![Primitive::cuboid([0.10, 0.025, 0.012], [0.05, 0.0, 0.006])],
    );
    build(name, d, xy, yaw)
}

/// Catalog entry by label.
pub fn by_label(label: &str, name: &str, xy: [f64; 2], yaw: f64) -> Option<SceneObject> {
    Some(match label {
        "tomato" => tomato(name, xy),
        "apple" => apple(name, xy),
        "cup" => cup(name, xy),
        "block" => block(name, xy, yaw),
        "plate" => plate(name, xy),
        "bowl" => bowl(name, xy),
        "dough" => dough(name, xy),
        "candy" => candy(name, xy),
        "table" => table_slab(name, xy),
        "scoop" => scoop(name, xy, yaw),
        "spatula" => spatula(name, xy, yaw),
        "whisk" => whisk(name, xy, yaw),
        "hammer" => hammer(name, xy, yaw),
        "flattener" => flattener(name, xy, yaw),
        "skewer" => skewer(name, xy, yaw),
        "knife" => knife(name, xy, yaw),
        _ => return None,
    })
}

pub const LABELS: [&str; 16] = [
    "tomato", "apple", "cup", "block", "plate", "bowl", "dough", "candy", "table", "scoop", "spatula",
    "whisk", "hammer", "flattener", "skewer", "knife",
];

/// Tools with an entry in the grasping database.
pub const DB_TOOLS: [&str; 5] = ["scoop", "flattener", "whisk", "hammer", "spatula"];
