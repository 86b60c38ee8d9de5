//! Scenario documents: lane centerlines, navigable polygons, stop lines and
//! lane connectivity, loaded from JSON.
//!
//! A document is either a single scenario object or a bundle
//! `{"scenarios": [ ... ]}`. One scenario looks like:
//!
//! ```json
//! {
//!   "name": "straight",
//!   "lanes": [
//!     {"id": "main", "centerline": [[0, 0], [200, 0]], "width": 3.5, "speed_limit": 8.3}
//!   ],
//!   "navigable": [[[0, -1.75], [200, -1.75], [200, 1.75], [0, 1.75]]],
//!   "stop_lines": [[[150, -1.75], [150, 1.75]]],
//!   "connections": [{"from": "main", "to": "other"}]
//! }
//! ```
//!
//! `navigable`, `stop_lines` and `connections` are optional. When `navigable`
//! is omitted every lane contributes the strip covered by its width.

use std::collections::HashMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{offset_polyline, polygon_contains, polyline_length, Vec2};

pub const MIN_SPEED_LIMIT: f64 = 4.0;
pub const MAX_SPEED_LIMIT: f64 = 8.3;

/// Lane ends closer than this are considered joined.
const JOIN_TOLERANCE: f64 = 0.01;
const CONTAINMENT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneDoc {
    pub id: String,
    pub centerline: Vec<Vec2>,
    pub width: f64,
    pub speed_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionDoc {
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub name: String,
    pub lanes: Vec<LaneDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub navigable: Option<Vec<Vec<Vec2>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stop_lines: Vec<[Vec2; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub connections: Vec<ConnectionDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleDoc {
    pub scenarios: Vec<ScenarioDoc>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyDoc {
    Bundle(BundleDoc),
    Single(ScenarioDoc),
}

#[derive(Clone, Debug)]
pub struct Lane {
    pub id: String,
    pub centerline: Vec<Vec2>,
    pub width: f64,
    pub speed_limit: f64,
}

impl Lane {
    pub fn length(&self) -> f64 {
        polyline_length(&self.centerline)
    }
}

#[derive(Clone, Debug)]
pub struct NavPolygon {
    pub vertices: Vec<Vec2>,
    /// Bounding circle, used to cull polygons outside the render window.
    pub center: Vec2,
    pub radius: f64,
}

impl NavPolygon {
    fn new(vertices: Vec<Vec2>) -> Self {
        let n = vertices.len().max(1) as f64;
        let sum = vertices.iter().fold(Vec2::default(), |a, &p| a + p);
        let center = sum * (1.0 / n);
        let radius = vertices
            .iter()
            .map(|p| p.dist(center))
            .fold(0.0_f64, f64::max);
        Self {
            vertices,
            center,
            radius,
        }
    }
}

/// Immutable world an agent drives in.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub lanes: Vec<Lane>,
    pub navigable: Vec<NavPolygon>,
    pub stop_lines: Vec<[Vec2; 2]>,
    /// `successors[i]` lists the lanes whose start joins the end of lane `i`.
    pub successors: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn from_doc(doc: &ScenarioDoc) -> Result<Self> {
        let invalid = |msg: String| Error::InvalidScenario {
            scenario: doc.name.clone(),
            msg,
        };
        if doc.lanes.is_empty() {
            return Err(invalid("scenario has no lanes".into()));
        }

        let mut index = HashMap::new();
        let mut lanes = Vec::with_capacity(doc.lanes.len());
        for lane in &doc.lanes {
            if index.insert(lane.id.clone(), lanes.len()).is_some() {
                return Err(invalid(format!("duplicate lane id `{}`", lane.id)));
            }
            if lane.centerline.len() < 2 {
                return Err(invalid(format!(
                    "lane `{}`: centerline needs at least 2 points",
                    lane.id
                )));
            }
            if let Some(bad) = lane.centerline.iter().find(|p| !p.is_finite()) {
                return Err(invalid(format!(
                    "lane `{}`: non-finite point {bad:?}",
                    lane.id
                )));
            }
            for (k, w) in lane.centerline.windows(2).enumerate() {
                if w[0].dist(w[1]) <= 0.0 {
                    return Err(invalid(format!(
                        "lane `{}`: segment {k} has zero length",
                        lane.id
                    )));
                }
            }
            if !(lane.width.is_finite() && lane.width > 0.0) {
                return Err(invalid(format!("lane `{}`: width must be positive", lane.id)));
            }
            if !(MIN_SPEED_LIMIT..=MAX_SPEED_LIMIT).contains(&lane.speed_limit) {
                return Err(invalid(format!(
                    "lane `{}`: speed limit out of range: {} not in [{MIN_SPEED_LIMIT}, {MAX_SPEED_LIMIT}] m/s",
                    lane.id, lane.speed_limit
                )));
            }
            lanes.push(Lane {
                id: lane.id.clone(),
                centerline: lane.centerline.clone(),
                width: lane.width,
                speed_limit: lane.speed_limit,
            });
        }

        let mut successors = vec![Vec::new(); lanes.len()];
        for c in &doc.connections {
            let from = *index
                .get(&c.from)
                .ok_or_else(|| invalid(format!("connection from unknown lane `{}`", c.from)))?;
            let to = *index
                .get(&c.to)
                .ok_or_else(|| invalid(format!("connection to unknown lane `{}`", c.to)))?;
            let end = *lanes[from].centerline.last().unwrap();
            let start = lanes[to].centerline[0];
            if end.dist(start) > JOIN_TOLERANCE {
                return Err(invalid(format!(
                    "connection `{}` -> `{}`: lane ends are {:.3} m apart",
                    c.from,
                    c.to,
                    end.dist(start)
                )));
            }
            if !successors[from].contains(&to) {
                successors[from].push(to);
            }
        }

        let polygons: Vec<Vec<Vec2>> = match &doc.navigable {
            Some(polys) => polys.clone(),
            None => lanes.iter().map(lane_strip).collect(),
        };
        for (k, poly) in polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(invalid(format!("navigable polygon {k} has fewer than 3 vertices")));
            }
            if poly.iter().any(|p| !p.is_finite()) {
                return Err(invalid(format!("navigable polygon {k} has a non-finite vertex")));
            }
        }

        // Every centerline vertex and segment midpoint must be navigable.
        for lane in &lanes {
            let probes = lane
                .centerline
                .iter()
                .copied()
                .chain(lane.centerline.windows(2).map(|w| w[0].lerp(w[1], 0.5)));
            for p in probes {
                if !polygons
                    .iter()
                    .any(|poly| polygon_contains(poly, p, CONTAINMENT_TOLERANCE))
                {
                    return Err(invalid(format!(
                        "lane `{}`: centerline point ({:.3}, {:.3}) lies outside the navigable polygons",
                        lane.id, p.x, p.y
                    )));
                }
            }
        }

        for (k, seg) in doc.stop_lines.iter().enumerate() {
            if !(seg[0].is_finite() && seg[1].is_finite()) || seg[0].dist(seg[1]) <= 0.0 {
                return Err(invalid(format!("stop line {k} is degenerate")));
            }
        }

        Ok(Scenario {
            name: doc.name.clone(),
            lanes,
            navigable: polygons.into_iter().map(NavPolygon::new).collect(),
            stop_lines: doc.stop_lines.clone(),
            successors,
        })
    }

    /// Lanes without predecessors; every lane when the graph has none.
    pub fn source_lanes(&self) -> Vec<usize> {
        let mut has_pred = vec![false; self.lanes.len()];
        for succ in &self.successors {
            for &j in succ {
                has_pred[j] = true;
            }
        }
        let sources: Vec<usize> = (0..self.lanes.len()).filter(|&i| !has_pred[i]).collect();
        if sources.is_empty() {
            (0..self.lanes.len()).collect()
        } else {
            sources
        }
    }

    /// Number of directed lane-to-lane connections.
    pub fn connection_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    /// The same scenario rotated about the origin; used by equivariance tests.
    pub fn rotated(&self, theta: f64) -> Scenario {
        let rot = |p: &Vec2| p.rotated(theta);
        Scenario {
            name: self.name.clone(),
            lanes: self
                .lanes
                .iter()
                .map(|l| Lane {
                    centerline: l.centerline.iter().map(rot).collect(),
                    ..l.clone()
                })
                .collect(),
            navigable: self
                .navigable
                .iter()
                .map(|p| NavPolygon::new(p.vertices.iter().map(rot).collect()))
                .collect(),
            stop_lines: self.stop_lines.iter().map(|s| [rot(&s[0]), rot(&s[1])]).collect(),
            successors: self.successors.clone(),
        }
    }
}

/// Strip polygon covered by a lane: left edge forward, right edge backward.
pub fn lane_strip(lane: &Lane) -> Vec<Vec2> {
    let half = 0.5 * lane.width;
    let mut poly = offset_polyline(&lane.centerline, -half);
    let mut left = offset_polyline(&lane.centerline, half);
    left.reverse();
    poly.extend(left);
    poly
}

/// Parse a scenario document (single scenario or bundle).
pub fn load_scenarios(source: &str) -> Result<Vec<Scenario>> {
    let doc: AnyDoc = serde_json::from_str(source).map_err(|e| Error::Parse {
        what: "scenario document".into(),
        msg: e.to_string(),
    })?;
    let docs = match doc {
        AnyDoc::Bundle(b) => b.scenarios,
        AnyDoc::Single(s) => vec![s],
    };
    docs.iter().map(Scenario::from_doc).collect()
}

pub fn load_scenario_file(path: &FsPath) -> Result<Vec<Scenario>> {
    if !path.exists() {
        return Err(Error::ScenarioNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_scenarios(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_doc(limit: f64) -> String {
        format!(
            r#"{{"name": "s", "lanes": [{{"id": "a", "centerline": [[0,0],[200,0]], "width": 3.5, "speed_limit": {limit}}}]}}"#
        )
    }

    #[test]
    fn single_straight_lane() {
        let s = load_scenarios(&straight_doc(8.3)).unwrap();
        assert_eq!(s.len(), 1);
        let sc = &s[0];
        assert_eq!(sc.lanes.len(), 1);
        assert_eq!(sc.navigable.len(), 1);
        let poly = &sc.navigable[0].vertices;
        let (xmin, xmax) = poly
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
        let (ymin, ymax) = poly
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.y), b.max(p.y)));
        assert!((xmax - xmin - 200.0).abs() < 1e-12);
        assert!((ymax - ymin - 3.5).abs() < 1e-12);
    }

    #[test]
    fn speed_limit_out_of_range() {
        let err = load_scenarios(&straight_doc(12.0)).unwrap_err();
        assert!(err.to_string().contains("speed limit out of range"), "{err}");
        assert!(err.to_string().contains("lane `a`"));
    }

    #[test]
    fn parse_failure_is_reported() {
        assert!(matches!(load_scenarios("{not json"), Err(Error::Parse { .. })));
    }

    #[test]
    fn zero_length_segment_rejected() {
        let doc = r#"{"name": "z", "lanes": [{"id": "a", "centerline": [[0,0],[0,0],[5,0]], "width": 3, "speed_limit": 5}]}"#;
        let err = load_scenarios(doc).unwrap_err();
        assert!(err.to_string().contains("zero length"));
    }

    #[test]
    fn centerline_outside_navigable_rejected() {
        let doc = r#"{"name": "n", "lanes": [{"id": "a", "centerline": [[0,0],[50,0]], "width": 3, "speed_limit": 5}],
            "navigable": [[[0,-1],[20,-1],[20,1],[0,1]]]}"#;
        let err = load_scenarios(doc).unwrap_err();
        assert!(err.to_string().contains("outside the navigable"), "{err}");
    }

    #[test]
    fn disconnected_connection_rejected() {
        let doc = r#"{"name": "c", "lanes": [
            {"id": "a", "centerline": [[0,0],[50,0]], "width": 3, "speed_limit": 5},
            {"id": "b", "centerline": [[60,0],[90,0]], "width": 3, "speed_limit": 5}],
            "connections": [{"from": "a", "to": "b"}]}"#;
        assert!(load_scenarios(doc).unwrap_err().to_string().contains("apart"));
    }

    #[test]
    fn missing_file() {
        let err = load_scenario_file(FsPath::new("/nonexistent/x.json")).unwrap_err();
        assert_eq!(err.to_string(), "scenario not found: /nonexistent/x.json");
    }
}
