use std::str::FromStr;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::graph::{Area, AreaGraph};
use crate::error::{Error, Result};

/// Attribute distribution for synthetic grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttrDist {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl Default for AttrDist {
    fn default() -> Self {
        AttrDist::Uniform { lo: 0.0, hi: 100.0 }
    }
}

impl FromStr for AttrDist {
    type Err = Error;

    /// `uniform:lo,hi` or `normal:mu,sigma`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad distribution `{s}`, expected uniform:lo,hi or normal:mu,sigma"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [a, b] = nums[..] else { return Err(bad()) };
        match kind.trim() {
            "uniform" if a < b => Ok(AttrDist::Uniform { lo: a, hi: b }),
            "normal" if b > 0.0 => Ok(AttrDist::Normal { mu: a, sigma: b }),
            _ => Err(bad()),
        }
    }
}

/// Parses `RxC`.
pub fn parse_grid_spec(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidInput(format!("bad grid spec `{s}`, expected RxC")))?;
    let r: usize = r.trim().parse().map_err(|_| Error::InvalidInput(format!("bad row count in `{s}`")))?;
    let c: usize = c.trim().parse().map_err(|_| Error::InvalidInput(format!("bad column count in `{s}`")))?;
    Ok((r, c))
}

/// Rook-adjacent `rows × cols` grid of unit cells. Area `r * cols + c` has
/// its centroid at `(c + 0.5, r + 0.5)`.
pub fn generate_grid(rows: usize, cols: usize, rng_seed: u64, dist: AttrDist) -> Result<AreaGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput(format!("grid {rows}x{cols} has no cells")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> f64> = match dist {
        AttrDist::Uniform { lo, hi } => {
            let u = Uniform::new(lo, hi).map_err(|e| Error::InvalidInput(e.to_string()))?;
            Box::new(move |r| u.sample(r))
        }
        AttrDist::Normal { mu, sigma } => {
            let nd = Normal::new(mu, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
            Box::new(move |r| nd.sample(r))
        }
    };
    let areas = (0..rows * cols)
        .map(|i| Area {
            id: i,
            label: i.to_string(),
            attribute: draw(&mut rng),
            centroid: [(i % cols) as f64 + 0.5, (i / cols) as f64 + 0.5],
        })
        .collect();
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    AreaGraph::new(areas, edges)
}

/// Near-square grid shape with exactly `n` cells: the divisor pair closest
/// to √n.
pub fn grid_shape_for(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor().max(1.0) as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    (rows, n / rows)
}

/// Unit-square polygons for a generated grid, with the attribute stored
/// under `attribute`.
pub fn grid_feature_collection(g: &AreaGraph) -> FeatureCollection {
    let features = g
        .areas()
        .iter()
        .map(|a| {
            let [cx, cy] = a.centroid;
            let (x0, y0, x1, y1) = (cx - 0.5, cy - 0.5, cx + 0.5, cy + 0.5);
            let ring = vec![
                vec![x0, y0],
                vec![x1, y0],
                vec![x1, y1],
                vec![x0, y1],
                vec![x0, y0],
            ];
            let mut props = JsonObject::new();
            props.insert("attribute".into(), a.attribute.into());
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(Value::Polygon(vec![ring]))),
                id: Some(geojson::feature::Id::String(a.label.clone())),
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    }
}
