//! Fixtures shared by several test targets.
#![allow(dead_code)]

use std::path::PathBuf;

/// A bracket with a bore and a gusset.
pub const FIXTURE_PART: &str = "\
extrude plane=XY z0=-30 h=20 op=new {
  add rect 0 0 120 70
  sub circle 35 0 12
}
extrude plane=XZ z0=-35 h=70 op=union {
  add rect -50 10 20 80
}
extrude plane=YZ z0=-10 h=20 op=union {
  add polygon -30 -10 -30 40 20 -10
}
";

/// The fixture with every dimension nudged, standing in for a prediction.
pub const FIXTURE_GUESS: &str = "\
extrude plane=XY z0=-28 h=18 op=new {
  add rect 4 0 112 74
  sub circle 30 2 10
}
extrude plane=XZ z0=-35 h=70 op=union {
  add rect -46 12 20 76
}
";

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/golden")
        .join(name)
}
