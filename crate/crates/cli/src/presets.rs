//! Built-in run configurations. Each is a complete TOML document in the
//! same format `vorotop run CONFIG` accepts, so a preset doubles as a
//! starting point: dump it, edit, rerun.

use anyhow::{bail, Result};

use crate::config::RunConfig;

pub const PRESET_NAMES: [&str; 6] = [
    "cantilever",
    "framed_cantilever",
    "arch_two_sites",
    "pushdown_two_sites",
    "free_boundary_cantilever",
    "masked",
];

/// The classic benchmark: left edge clamped, point load at the right-edge
/// midline, full design freedom over positions and metrics.
const CANTILEVER: &str = r#"
[domain]
resolution = [128, 64]

[sites]
grid = [6, 3]
metric = 75.0
seed = 7

[field]
sharpness = 50.0
neighbor_count = 16

[optimize]
volume_target = 0.35
max_iterations = 250

# The starting lattice sits just under the volume target; paired with the
# narrow metric boxes below, the first constrained steps stay in scale
# instead of blasting the walls thin.
[bounds]
metric_diag_max = 150.0
metric_offdiag_limit = 75.0

[[fix]]
region = [[0.0, 0.0], [0.0, 1.0]]
axes = "xy"

[[load]]
region = [[2.0, 0.5], [2.0, 0.5]]
force = [0.0, -1.0]
"#;

/// Cantilever wrapped in a one-element passive solid frame, loaded over the
/// middle fifth of the right edge.
const FRAMED_CANTILEVER: &str = r#"
[domain]
resolution = [128, 64]
frame = 1

[sites]
grid = [8, 4]
metric = 115.0
seed = 7

[field]
sharpness = 50.0
neighbor_count = 16

[optimize]
volume_target = 0.35
max_iterations = 250

[bounds]
metric_diag_max = 230.0
metric_offdiag_limit = 115.0

[[fix]]
region = [[0.0, 0.0], [0.0, 1.0]]
axes = "xy"

[[load]]
region = [[2.0, 0.4], [2.0, 0.6]]
force = [0.0, -1.0]
"#;

/// Two fixed sites stacked on the vertical midline, metric factors as the
/// only design freedom: the optimizer shapes the inter-cell wall into a
/// load path by making horizontal distances expensive.
const ARCH_TWO_SITES: &str = r#"
[domain]
resolution = [64, 64]

[sites]
positions = [[0.5, 0.35], [0.5, 0.65]]
metric = 18.75

[field]
sharpness = 10.0
neighbor_count = 2

[optimize]
volume_target = 0.4
max_iterations = 100
variables = "metrics"

# Narrow boxes keep the MMA move limit (a fraction of the box) in scale
# with the starting metric, so the first constrained steps cannot blast
# the field into razor-thin walls.
[bounds]
metric_diag_max = 150.0
metric_offdiag_limit = 75.0

[[fix]]
region = [[0.0, 0.0], [0.06, 0.0]]
axes = "xy"

[[fix]]
region = [[0.94, 0.0], [1.0, 0.0]]
axes = "xy"

[[load]]
region = [[0.5, 1.0], [0.5, 1.0]]
force = [0.0, -1.0]
"#;

/// Two side-by-side sites with frozen metrics; only positions move. The
/// wall between the cells is a column that must migrate under the load.
const PUSHDOWN_TWO_SITES: &str = r#"
[domain]
resolution = [64, 64]

[sites]
positions = [[0.15, 0.5], [0.55, 0.5]]
metric = 30.0

[field]
sharpness = 10.0
neighbor_count = 2

[optimize]
volume_target = 0.4
max_iterations = 60
variables = "positions"

[[fix]]
region = [[0.0, 0.0], [1.0, 0.0]]
axes = "xy"

[[load]]
region = [[0.48, 1.0], [0.52, 1.0]]
force = [0.0, -1.0]
"#;

/// Free-boundary cantilever: the virtual competitor carves the structure
/// loose from the grid border, so the silhouette is part of the design.
const FREE_BOUNDARY_CANTILEVER: &str = r#"
[domain]
resolution = [128, 64]

[sites]
grid = [8, 4]
metric = 128.0
seed = 7
inset = [0.35, 0.3]

[field]
sharpness = 10.0
boundary_weight = 1e-7
neighbor_count = 16

[optimize]
volume_target = 0.3
max_iterations = 100
compliance_tolerance = 0.0
variables = "positions"

[solver]
max_iterations = 2000

[[fix]]
region = [[0.0, 0.0], [0.0, 1.0]]
axes = "xy"

[[load]]
region = [[2.0, 0.5], [2.0, 0.5]]
force = [0.0, -1.0]
"#;

/// Cantilever over a user-supplied domain mask; run with `--mask PATH`.
const MASKED: &str = r#"
[domain]
resolution = [96, 48]
needs_mask = true

[sites]
grid = [6, 3]
metric = 70.0
seed = 7

[field]
sharpness = 50.0
neighbor_count = 16

[optimize]
volume_target = 0.35
max_iterations = 120

[bounds]
metric_diag_max = 140.0
metric_offdiag_limit = 70.0

[[fix]]
region = [[0.0, 0.0], [0.0, 1.0]]
axes = "xy"

[[load]]
region = [[2.0, 0.5], [2.0, 0.5]]
force = [0.0, -1.0]
"#;

pub fn preset_toml(name: &str) -> Result<&'static str> {
    Ok(match name {
        "cantilever" => CANTILEVER,
        "framed_cantilever" => FRAMED_CANTILEVER,
        "arch_two_sites" => ARCH_TWO_SITES,
        "pushdown_two_sites" => PUSHDOWN_TWO_SITES,
        "free_boundary_cantilever" => FREE_BOUNDARY_CANTILEVER,
        "masked" => MASKED,
        other => bail!(
            "unknown preset {other:?}; available: {}",
            PRESET_NAMES.join(", ")
        ),
    })
}

pub fn preset(name: &str) -> Result<RunConfig> {
    RunConfig::from_toml(preset_toml(name)?)
}
