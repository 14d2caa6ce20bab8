//! Dataset ingestion: GeoJSON polygons or a CSV area table plus edge list.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geojson::{FeatureCollection, GeoJson, Value};
use serde::{Deserialize, Serialize};

use super::graph::{Area, AreaGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Geojson,
    Csv,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geojson" | "json" => Ok(Self::Geojson),
            "csv" | "adjacency-csv" => Ok(Self::Csv),
            other => Err(Error::InvalidInput(format!("unknown dataset format `{other}`"))),
        }
    }
}

/// Neighbor rule for polygon inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contiguity {
    /// Shared boundary segment of positive length.
    #[default]
    Rook,
    /// Rook, or at least one shared vertex.
    Queen,
}

impl FromStr for Contiguity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rook" => Ok(Self::Rook),
            "queen" => Ok(Self::Queen),
            other => Err(Error::InvalidInput(format!("unknown contiguity rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub attribute: String,
    pub contiguity: Contiguity,
    /// Edge list for CSV inputs. Defaults to `<stem>.edges.csv` next to the
    /// area table.
    pub edges: Option<PathBuf>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            attribute: "attribute".into(),
            contiguity: Contiguity::Rook,
            edges: None,
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat, opts: &LoadOptions) -> Result<AreaGraph> {
    match format {
        DatasetFormat::Geojson => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_geojson(&text, opts)
        }
        DatasetFormat::Csv => {
            let edges = opts
                .edges
                .clone()
                .unwrap_or_else(|| companion_edges_path(path));
            load_csv(path, &edges, &opts.attribute)
        }
    }
}

/// `dir/areas.csv` → `dir/areas.edges.csv`.
pub fn companion_edges_path(areas: &Path) -> PathBuf {
    let stem = areas
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    areas.with_file_name(format!("{stem}.edges.csv"))
}

type Ring = Vec<[f64; 2]>;

struct Shape {
    rings: Vec<Ring>,
    bbox: [f64; 4],
}

pub fn parse_geojson(text: &str, opts: &LoadOptions) -> Result<AreaGraph> {
    let geo: GeoJson = text.parse().map_err(|e| Error::parse("GeoJSON", e))?;
    let fc = match geo {
        GeoJson::FeatureCollection(fc) => fc,
        GeoJson::Feature(f) => FeatureCollection {
            bbox: None,
            features: vec![f],
            foreign_members: None,
        },
        GeoJson::Geometry(_) => {
            return Err(Error::parse("GeoJSON", "expected a FeatureCollection"));
        }
    };

    let mut areas = Vec::with_capacity(fc.features.len());
    let mut shapes = Vec::with_capacity(fc.features.len());
    for (i, feature) in fc.features.iter().enumerate() {
        let label = feature
            .id
            .as_ref()
            .map(|id| match id {
                geojson::feature::Id::String(s) => s.clone(),
                geojson::feature::Id::Number(n) => n.to_string(),
            })
            .unwrap_or_else(|| i.to_string());
        let attribute = feature
            .property(&opts.attribute)
            .and_then(json_number)
            .ok_or_else(|| Error::MissingAttribute {
                area: label.clone(),
                attribute: opts.attribute.clone(),
            })?;
        let geometry = feature
            .geometry
            .as_ref()
            .ok_or_else(|| Error::parse("GeoJSON", format!("feature `{label}` has no geometry")))?;
        let rings = match &geometry.value {
            Value::Polygon(poly) => polygon_rings(std::slice::from_ref(poly)),
            Value::MultiPolygon(polys) => polygon_rings(polys),
            _ => {
                return Err(Error::parse(
                    "GeoJSON",
                    format!("feature `{label}` is not a Polygon or MultiPolygon"),
                ))
            }
        };
        let centroid = rings_centroid(&rings_by_polygon(&geometry.value));
        shapes.push(Shape {
            bbox: bbox(&rings),
            rings,
        });
        areas.push(Area {
            id: i,
            label,
            attribute,
            centroid,
        });
    }

    let edges = polygon_adjacency(&shapes, opts.contiguity);
    AreaGraph::new(areas, edges)
}

fn json_number(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .filter(|x: &f64| x.is_finite())
}

fn polygon_rings(polys: &[Vec<Vec<Vec<f64>>>]) -> Vec<Ring> {
    polys
        .iter()
        .flat_map(|poly| poly.iter().map(|ring| to_ring(ring)))
        .collect()
}

fn to_ring(ring: &[Vec<f64>]) -> Ring {
    ring.iter()
        .filter(|pos| pos.len() >= 2)
        .map(|pos| [pos[0], pos[1]])
        .collect()
}

/// Per polygon: exterior ring first, then holes.
fn rings_by_polygon(value: &Value) -> Vec<Vec<Ring>> {
    let polys: &[Vec<Vec<Vec<f64>>>] = match value {
        Value::Polygon(p) => std::slice::from_ref(p),
        Value::MultiPolygon(ps) => ps,
        _ => &[],
    };
    polys
        .iter()
        .map(|p| p.iter().map(|r| to_ring(r)).collect())
        .collect()
}

fn bbox(rings: &[Ring]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in rings.iter().flatten() {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    b
}

/// Signed area and area-weighted centroid of a closed or open ring.
fn ring_moments(ring: &Ring) -> (f64, [f64; 2]) {
    let k = ring.len();
    if k < 3 {
        return (0.0, [0.0, 0.0]);
    }
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let [x0, y0] = ring[i];
        let [x1, y1] = ring[(i + 1) % k];
        let cross = x0 * y1 - x1 * y0;
        a2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    let area = a2 / 2.0;
    if area == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    (area, [cx / (6.0 * area), cy / (6.0 * area)])
}

/// Area-weighted centroid; holes subtract. Falls back to the vertex mean for
/// degenerate geometry.
fn rings_centroid(polys: &[Vec<Ring>]) -> [f64; 2] {
    let (mut total, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for poly in polys {
        for (k, ring) in poly.iter().enumerate() {
            let (a, [cx, cy]) = ring_moments(ring);
            let w = if k == 0 { a.abs() } else { -a.abs() };
            total += w;
            sx += w * cx;
            sy += w * cy;
        }
    }
    if total.abs() > 0.0 {
        return [sx / total, sy / total];
    }
    let pts: Vec<&[f64; 2]> = polys.iter().flatten().flatten().collect();
    let k = pts.len().max(1) as f64;
    [
        pts.iter().map(|p| p[0]).sum::<f64>() / k,
        pts.iter().map(|p| p[1]).sum::<f64>() / k,
    ]
}

fn segments(rings: &[Ring]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    rings.iter().flat_map(|r| {
        let k = r.len();
        (0..k).filter_map(move |i| {
            let (a, b) = (r[i], r[(i + 1) % k]);
            (a != b).then_some((a, b))
        })
    })
}

fn shared_length_positive(s: ([f64; 2], [f64; 2]), t: ([f64; 2], [f64; 2]), eps: f64) -> bool {
    let (p, q) = s;
    let d = [q[0] - p[0], q[1] - p[1]];
    let len = d[0].hypot(d[1]);
    if len <= eps {
        return false;
    }
    let u = [d[0] / len, d[1] / len];
    // perpendicular offsets of t's endpoints from s's supporting line
    let off = |r: [f64; 2]| (r[0] - p[0]) * u[1] - (r[1] - p[1]) * u[0];
    if off(t.0).abs() > eps || off(t.1).abs() > eps {
        return false;
    }
    let proj = |r: [f64; 2]| (r[0] - p[0]) * u[0] + (r[1] - p[1]) * u[1];
    let (t0, t1) = (proj(t.0), proj(t.1));
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    hi.min(len) - lo.max(0.0) > eps
}

fn shares_vertex(a: &Shape, b: &Shape, eps: f64) -> bool {
    a.rings.iter().flatten().any(|p| {
        b.rings
            .iter()
            .flatten()
            .any(|q| (p[0] - q[0]).abs() <= eps && (p[1] - q[1]).abs() <= eps)
    })
}

fn polygon_adjacency(shapes: &[Shape], contiguity: Contiguity) -> Vec<(usize, usize)> {
    let extent = shapes
        .iter()
        .flat_map(|s| s.bbox)
        .filter(|v| v.is_finite())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-9 * extent;

    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by(|&a, &b| shapes[a].bbox[0].total_cmp(&shapes[b].bbox[0]));

    let mut edges = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let bi = shapes[i].bbox;
        for &j in &order[k + 1..] {
            let bj = shapes[j].bbox;
            if bj[0] > bi[2] + eps {
                break;
            }
            if bj[1] > bi[3] + eps || bi[1] > bj[3] + eps {
                continue;
            }
            let rook = segments(&shapes[i].rings).any(|s| {
                segments(&shapes[j].rings).any(|t| shared_length_positive(s, t, eps))
            });
            let touch = rook
                || (contiguity == Contiguity::Queen && shares_vertex(&shapes[i], &shapes[j], eps));
            if touch {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_unstable();
    edges
}

#[derive(Debug, Deserialize)]
struct EdgeRecord {
    src: String,
    dst: String,
}

pub fn load_csv(areas_path: &Path, edges_path: &Path, attribute: &str) -> Result<AreaGraph> {
    let mut reader = csv::Reader::from_path(areas_path)
        .map_err(|e| Error::parse(areas_path.display().to_string(), e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(areas_path.display().to_string(), e))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(areas_path.display().to_string(), format!("missing column `{name}`")))
    };
    let attr_name = if headers.iter().any(|h| h.trim() == attribute) {
        attribute
    } else {
        "attribute"
    };
    let (id_col, attr_col, x_col, y_col) = (column("id")?, column(attr_name)?, column("x")?, column("y")?);

    let mut areas = Vec::new();
    let mut index = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(areas_path.display().to_string(), e))?;
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let label = field(id_col).to_string();
        let attribute_value: f64 = field(attr_col)
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::MissingAttribute {
                area: label.clone(),
                attribute: attr_name.to_string(),
            })?;
        let coord = |c: usize| -> Result<f64> {
            field(c).parse().map_err(|_| {
                Error::parse(
                    areas_path.display().to_string(),
                    format!("row {}: bad coordinate `{}`", row + 2, field(c)),
                )
            })
        };
        let centroid = [coord(x_col)?, coord(y_col)?];
        if index.insert(label.clone(), areas.len()).is_some() {
            return Err(Error::parse(
                areas_path.display().to_string(),
                format!("duplicate id `{label}`"),
            ));
        }
        areas.push(Area {
            id: areas.len(),
            label,
            attribute: attribute_value,
            centroid,
        });
    }

    let mut reader = csv::Reader::from_path(edges_path)
        .map_err(|e| Error::parse(edges_path.display().to_string(), e))?;
    let mut edges = Vec::new();
    for record in reader.deserialize::<EdgeRecord>() {
        let rec = record.map_err(|e| Error::parse(edges_path.display().to_string(), e))?;
        let lookup = |id: &str| {
            index.get(id.trim()).copied().ok_or_else(|| {
                Error::parse(edges_path.display().to_string(), format!("unknown area id `{id}`"))
            })
        };
        edges.push((lookup(&rec.src)?, lookup(&rec.dst)?));
    }
    AreaGraph::new(areas, edges)
}

/// Writes the area table and its companion edge list.
pub fn write_csv_dataset(g: &AreaGraph, areas_path: &Path, edges_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(areas_path).map_err(|e| Error::parse("CSV writer", e))?;
    w.write_record(["id", "attribute", "x", "y"])
        .map_err(|e| Error::parse("CSV writer", e))?;
    for a in g.areas() {
        w.write_record([
            a.label.clone(),
            a.attribute.to_string(),
            a.centroid[0].to_string(),
            a.centroid[1].to_string(),
        ])
        .map_err(|e| Error::parse("CSV writer", e))?;
    }
    w.flush().map_err(|e| Error::io(areas_path, e))?;

    let mut w = csv::Writer::from_path(edges_path).map_err(|e| Error::parse("CSV writer", e))?;
    w.write_record(["src", "dst"]).map_err(|e| Error::parse("CSV writer", e))?;
    for (u, v) in g.edges() {
        w.write_record([&g.area(u).label, &g.area(v).label])
            .map_err(|e| Error::parse("CSV writer", e))?;
    }
    w.flush().map_err(|e| Error::io(edges_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64) -> String {
        format!(
            "[[[{x},{y}],[{x1},{y}],[{x1},{y1}],[{x},{y1}],[{x},{y}]]]",
            x1 = x + 1.0,
            y1 = y + 1.0
        )
    }

    fn collection(cells: &[(f64, f64, f64)]) -> String {
        let feats: Vec<String> = cells
            .iter()
            .map(|&(x, y, a)| {
                format!(
                    r#"{{"type":"Feature","properties":{{"attribute":{a}}},"geometry":{{"type":"Polygon","coordinates":{}}}}}"#,
                    square(x, y)
                )
            })
            .collect();
        format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, feats.join(","))
    }

    #[test]
    fn two_touching_squares() {
        let g = parse_geojson(&collection(&[(0.0, 0.0, 1.0), (1.0, 0.0, 2.0)]), &LoadOptions::default()).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.area(0).centroid, [0.5, 0.5]);
    }

    #[test]
    fn three_by_three_rook_degrees() {
        let cells: Vec<_> = (0..9).map(|i| ((i % 3) as f64, (i / 3) as f64, i as f64)).collect();
        let g = parse_geojson(&collection(&cells), &LoadOptions::default()).unwrap();
        // brute force: squares share an edge iff their lower-left corners are
        // one unit apart along exactly one axis
        for i in 0..9 {
            let expect: Vec<usize> = (0..9)
                .filter(|&j| {
                    let (dx, dy) = (cells[i].0 - cells[j].0, cells[i].1 - cells[j].1);
                    dx.abs() + dy.abs() == 1.0
                })
                .collect();
            assert_eq!(g.neighbors(i), expect.as_slice(), "cell {i}");
        }
        assert_eq!(g.neighbors(4).len(), 4);
        assert_eq!(g.neighbors(0).len(), 2);

        let queen = LoadOptions {
            contiguity: Contiguity::Queen,
            ..LoadOptions::default()
        };
        let gq = parse_geojson(&collection(&cells), &queen).unwrap();
        assert_eq!(gq.neighbors(4).len(), 8);
        assert_eq!(gq.neighbors(0).len(), 3);
    }

    #[test]
    fn partial_edge_overlap_counts_as_rook() {
        // a 2-wide block over two unit cells: boundary vertices differ
        let text = format!(
            r#"{{"type":"FeatureCollection","features":[
              {{"type":"Feature","properties":{{"attribute":1}},"geometry":{{"type":"Polygon","coordinates":[[[0,1],[2,1],[2,2],[0,2],[0,1]]]}}}},
              {{"type":"Feature","properties":{{"attribute":2}},"geometry":{{"type":"Polygon","coordinates":{}}}}}]}}"#,
            square(1.0, 0.0)
        );
        let g = parse_geojson(&text, &LoadOptions::default()).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn missing_attribute_is_an_error() {
        let text = collection(&[(0.0, 0.0, 1.0)]).replace("\"attribute\"", "\"other\"");
        assert!(matches!(
            parse_geojson(&text, &LoadOptions::default()),
            Err(Error::MissingAttribute { .. })
        ));
    }

    #[test]
    fn isolated_polygon_is_accepted() {
        let g = parse_geojson(&collection(&[(0.0, 0.0, 1.0), (5.0, 5.0, 2.0)]), &LoadOptions::default()).unwrap();
        assert!(g.neighbors(0).is_empty());
        assert!(g.neighbors(1).is_empty());
    }

    #[test]
    fn csv_edges_are_symmetrized() {
        let dir = tempfile::tempdir().unwrap();
        let areas = dir.path().join("areas.csv");
        fs::write(&areas, "id,attribute,x,y\n0,1.5,0,0\n1,2.5,1,0\n").unwrap();
        fs::write(companion_edges_path(&areas), "src,dst\n0,1\n").unwrap();
        let g = load_dataset(&areas, DatasetFormat::Csv, &LoadOptions::default()).unwrap();
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.attribute(1), 2.5);
    }

    #[test]
    fn csv_unknown_edge_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let areas = dir.path().join("a.csv");
        fs::write(&areas, "id,attribute,x,y\na,1,0,0\n").unwrap();
        fs::write(dir.path().join("a.edges.csv"), "src,dst\na,b\n").unwrap();
        assert!(load_dataset(&areas, DatasetFormat::Csv, &LoadOptions::default()).is_err());
    }
}
