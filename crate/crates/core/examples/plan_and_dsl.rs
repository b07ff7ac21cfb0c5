//! Parse, validate and re-serialize a high-level plan and a gripper program.
//!
//! ```text
//! cargo run --example plan_and_dsl
//! ```

use tabletop::dsl::{parse_action, validate_sequence, SequenceContext};
use tabletop::plan::{parse_plan, serialize_plan, validate_plan, ObjectEntry};

const PLAN: &str = "\
['pickup', 'original position of scoop', 'scoop', 'none']
['scoop', 'current position of candy', 'candy', 'scoop']
['place', 'original position of scoop', 'none', 'scoop']
";

const PROGRAM: &str = "\
Go-to: current position of candy + (0, 0, 10) cm
Tilt:(0, 30, 0)
Go-to: current position of candy + (0, 0, 1) cm
Tilt:(0, 0, 0)
Grasp: 0
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = parse_plan(PLAN)?;
    let objects = [ObjectEntry::new("scoop", true), ObjectEntry::new("candy", false)];
    println!("plan of {} steps, valid: {}", steps.len(), validate_plan(&steps, &objects).is_valid());
    print!("{}", serialize_plan(&steps));

    let bad = parse_plan("['scoop', 'current position of candy', 'candy', 'spoon']")?;
    println!("\nunknown tool:\n{}", validate_plan(&bad, &objects));

    let actions = PROGRAM.lines().map(parse_action).collect::<Result<Vec<_>, _>>()?;
    let report = validate_sequence(&actions, SequenceContext::new(true));
    println!("\n{} actions, flags: {:?}", actions.len(), report.flags);
    Ok(())
}
