//! Output writers: PGM images of density fields, a CSV iteration log, and
//! TOML site dumps that `vorotop render` can rasterize again.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use vorotop::pipeline::IterationRecord;
use vorotop::voronoi::{MetricFactor, SiteSet};
use vorotop::Scalar;

/// Binary PGM of a density field: ink on paper, solid black on void white.
/// The first image row is the top of the domain (highest y).
pub fn write_density_pgm(
    path: &Path,
    nx: usize,
    ny: usize,
    values: &[Scalar],
) -> Result<()> {
    assert_eq!(values.len(), nx * ny);
    let file = File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{nx} {ny}\n255\n")?;
    let mut row = Vec::with_capacity(nx);
    for ey in (0..ny).rev() {
        row.clear();
        for ex in 0..nx {
            let v = values[ey * nx + ex].clamp(0.0, 1.0);
            row.push((255.0 * (1.0 - v)).round() as u8);
        }
        w.write_all(&row)?;
    }
    Ok(())
}

/// Appends rows matching [`IterationRecord`], one line per iteration.
pub struct CsvLog {
    w: BufWriter<File>,
}

impl CsvLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "iteration,compliance,volume_fraction,delta,steepness,fem_residual,\
             fem_converged,fem_iterations,t_field_s,t_fem_s,t_update_s"
        )?;
        Ok(Self { w })
    }

    pub fn record(&mut self, r: &IterationRecord<Scalar>) -> Result<()> {
        writeln!(
            self.w,
            "{},{:.10e},{:.8},{:.6e},{},{:.6e},{},{},{:.4},{:.4},{:.4}",
            r.iteration,
            r.compliance,
            r.volume_fraction,
            r.delta,
            r.steepness,
            r.fem_residual,
            r.fem_converged,
            r.fem_iterations,
            r.t_field_s,
            r.t_fem_s,
            r.t_update_s
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Site dump document, unit-height coordinates like the run config.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDump {
    /// Element grid the sites were optimized on.
    pub resolution: [usize; 2],
    #[serde(rename = "site")]
    pub sites: Vec<SiteEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteEntry {
    pub position: [f64; 2],
    /// Metric factor lower triangle `[d00, d10, d11]`.
    pub metric: [f64; 3],
}

/// Serialize sites to TOML, converting core (element) units back to
/// unit height.
pub fn write_sites_toml(
    path: &Path,
    sites: &SiteSet<Scalar, 2>,
    resolution: (usize, usize),
) -> Result<()> {
    let h = resolution.1 as f64;
    let entries = (0..sites.len())
        .map(|i| {
            let p = sites.position(i);
            let t = sites.metric_factor(i).lower_triangle();
            SiteEntry {
                position: [p[0] / h, p[1] / h],
                metric: [t[0] * h, t[1] * h, t[2] * h],
            }
        })
        .collect();
    let dump = SiteDump {
        resolution: [resolution.0, resolution.1],
        sites: entries,
    };
    let text = toml::to_string(&dump).context("serializing site dump")?;
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a site dump and convert to core units for the given height.
pub fn read_sites_toml(path: &Path, height: f64) -> Result<SiteSet<Scalar, 2>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading site dump {}", path.display()))?;
    let dump: SiteDump = toml::from_str(&text).context("parsing site dump")?;
    if dump.sites.is_empty() {
        bail!("site dump holds no sites");
    }
    let positions = dump
        .sites
        .iter()
        .map(|s| Vector2::new(s.position[0] * height, s.position[1] * height))
        .collect();
    let metrics = dump
        .sites
        .iter()
        .map(|s| {
            MetricFactor::from_lower_triangle(&[
                s.metric[0] / height,
                s.metric[1] / height,
                s.metric[2] / height,
            ])
        })
        .collect();
    Ok(SiteSet::new(positions, metrics)?)
}
