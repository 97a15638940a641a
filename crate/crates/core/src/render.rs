//! Heatmaps of one- and two-dimensional regions: plain graymaps, ASCII
//! ramps and a small structured sidecar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{AxisId, ContextId, Region};

/// Density ramp for terminal output, lightest first.
pub const ASCII_RAMP: &[u8] = b" .:-=+*#%@";

/// Memberships over the context axes of a region. Rows run from high to
/// low values of the second axis; columns follow the first axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub context: ContextId,
    pub axes: Vec<AxisId>,
    pub width: usize,
    pub height: usize,
    /// Row-major, `height` rows of `width` values in `[0, 1]`.
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapStats {
    pub max: f64,
    pub mean: f64,
    pub min: f64,
}

/// Sidecar document written next to a graymap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub context: ContextId,
    pub axes: Vec<AxisId>,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub stats: HeatmapStats,
}

impl Heatmap {
    /// Sample `region` on a `resolution`-node grid per context axis.
    pub fn of(region: &Region, resolution: usize) -> Result<Heatmap> {
        let axes = region.context().axes.clone();
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::NotRenderable(axes.len()));
        }
        if resolution < 2 {
            return Err(Error::InvalidGrid("resolution must be at least 2".into()));
        }
        let node = |i: usize| i as f64 / (resolution - 1) as f64;
        let height = if axes.len() == 2 { resolution } else { 1 };
        let mut values = Vec::with_capacity(resolution * height);
        for row in 0..height {
            let y = node(resolution - 1 - row);
            for col in 0..resolution {
                let x = node(col);
                values.push(region.eval_with(|a| if *a == axes[0] { x } else { y }));
            }
        }
        Ok(Heatmap {
            context: region.context().id.clone(),
            axes,
            width: resolution,
            height,
            values,
            label: region.label().map(str::to_string),
        })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.width)
    }

    pub fn stats(&self) -> HeatmapStats {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        let min = self.values.iter().copied().fold(1.0, f64::min);
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        HeatmapStats { max, mean, min }
    }

    /// Plain portable graymap, membership scaled to 0..=255.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n# {}\n{} {}\n255\n", self.axis_note(), self.width, self.height);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| gray(*v).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// One character per sample from [`ASCII_RAMP`].
    pub fn to_ascii(&self) -> String {
        let top = (ASCII_RAMP.len() - 1) as f64;
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.rows() {
            out.extend(row.iter().map(|v| ASCII_RAMP[(v.clamp(0.0, 1.0) * top).round() as usize] as char));
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            context: self.context.clone(),
            axes: self.axes.clone(),
            width: self.width,
            height: self.height,
            label: self.label.clone(),
            stats: self.stats(),
        }
    }

    fn axis_note(&self) -> String {
        match self.axes.as_slice() {
            [x] => format!("{}: columns = {x}", self.context),
            [x, y, ..] => format!("{}: columns = {x}, rows = {y} (high first)", self.context),
            [] => self.context.to_string(),
        }
    }
}

fn gray(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Read back the samples of a plain graymap, scaled to `[0, 1]`.
pub fn parse_pgm(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |m: &str| Error::InvalidGrid(format!("graymap: {m}"));
    let mut tokens = text.lines().filter(|l| !l.starts_with('#')).flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut num = || -> Result<usize> { tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("truncated")) };
    let (w, h, max) = (num()?, num()?, num()?);
    if max == 0 {
        return Err(bad("zero maximum"));
    }
    let values = (0..w * h).map(|_| num().map(|v| v as f64 / max as f64)).collect::<Result<Vec<_>>>()?;
    Ok((w, h, values))
}
