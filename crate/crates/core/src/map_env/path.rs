use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

use super::scenario::Scenario;

pub const DEFAULT_SPACING: f64 = 0.5;
pub const DEFAULT_MIN_PATH_LENGTH: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub pos: Vec2,
    pub heading: f64,
    /// Cumulative arclength along the source centerlines, meters.
    pub s: f64,
    pub speed_limit: f64,
    pub lane_width: f64,
}

/// A route through the scenario resampled at fixed arclength spacing.
#[derive(Clone, Debug)]
pub struct Path {
    pub waypoints: Vec<Waypoint>,
    /// Lane indices of the route, in driving order.
    pub lanes: Vec<usize>,
}

impl Path {
    pub fn goal(&self) -> &Waypoint {
        self.waypoints.last().expect("path is nonempty")
    }

    pub fn length(&self) -> f64 {
        self.goal().s
    }

    pub fn start(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    /// Build a path from a lane route, resampling at `spacing` meters.
    pub fn from_route(scenario: &Scenario, route: &[usize], spacing: f64) -> Path {
        assert!(!route.is_empty() && spacing > 0.0);
        // Concatenated vertices with the lane owning the segment that starts at each vertex.
        let mut pts: Vec<Vec2> = Vec::new();
        let mut seg_lane: Vec<usize> = Vec::new();
        for (k, &li) in route.iter().enumerate() {
            let cl = &scenario.lanes[li].centerline;
            // Joined lane ends coincide within tolerance; keep the earlier end.
            pts.extend_from_slice(&cl[usize::from(k > 0)..]);
            seg_lane.extend(std::iter::repeat_n(li, cl.len() - 1));
        }

        let mut cum = Vec::with_capacity(pts.len());
        cum.push(0.0);
        for w in pts.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + w[0].dist(w[1]));
        }
        let total = *cum.last().unwrap();

        let mut samples: Vec<(Vec2, f64, usize)> = Vec::new();
        let mut seg = 0;
        let n_full = (total / spacing).floor() as usize;
        let mut push_at = |s: f64, samples: &mut Vec<(Vec2, f64, usize)>| {
            while seg + 1 < seg_lane.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = ((s - cum[seg]) / len).clamp(0.0, 1.0);
            samples.push((pts[seg].lerp(pts[seg + 1], t), s, seg_lane[seg]));
        };
        for k in 0..=n_full {
            push_at(k as f64 * spacing, &mut samples);
        }
        if total - n_full as f64 * spacing > 1e-6 {
            push_at(total, &mut samples);
        }

        let n = samples.len();
        let waypoints = (0..n)
            .map(|i| {
                let heading = if i + 1 < n {
                    (samples[i + 1].0 - samples[i].0).angle()
                } else {
                    (samples[i].0 - samples[i - 1].0).angle()
                };
                let lane = &scenario.lanes[samples[i].2];
                Waypoint {
                    pos: samples[i].0,
                    heading,
                    s: samples[i].1,
                    speed_limit: lane.speed_limit,
                    lane_width: lane.width,
                }
            })
            .collect();
        Path {
            waypoints,
            lanes: route.to_vec(),
        }
    }

    /// Index of the waypoint nearest to arclength `s`.
    pub fn index_at(&self, s: f64) -> usize {
        match self
            .waypoints
            .binary_search_by(|w| w.s.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.waypoints.len() => self.waypoints.len() - 1,
            Err(i) => {
                if s - self.waypoints[i - 1].s <= self.waypoints[i].s - s {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Interpolated position at arclength `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let w = &self.waypoints;
        if s <= 0.0 {
            return w[0].pos;
        }
        if s >= self.length() {
            return self.goal().pos;
        }
        let i = w.partition_point(|p| p.s <= s).max(1);
        let (a, b) = (&w[i - 1], &w[i]);
        a.pos.lerp(b.pos, (s - a.s) / (b.s - a.s))
    }
}

/// All simple routes from a source lane to a sink lane (or to a lane whose
/// successors are all already on the route).
pub fn enumerate_routes(scenario: &Scenario) -> Vec<Vec<usize>> {
    fn walk(sc: &Scenario, route: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *route.last().unwrap();
        let next: Vec<usize> = sc.successors[last]
            .iter()
            .copied()
            .filter(|j| !route.contains(j))
            .collect();
        if next.is_empty() {
            out.push(route.clone());
            return;
        }
        for j in next {
            route.push(j);
            walk(sc, route, out);
            route.pop();
        }
    }
    let mut out = Vec::new();
    for src in scenario.source_lanes() {
        walk(scenario, &mut vec![src], &mut out);
    }
    out
}

pub fn route_length(scenario: &Scenario, route: &[usize]) -> f64 {
    route.iter().map(|&i| scenario.lanes[i].length()).sum()
}

/// Pick one admissible route uniformly at random and resample it.
pub fn sample_path<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
    min_length: f64,
    spacing: f64,
) -> Result<Path> {
    let admissible: Vec<Vec<usize>> = enumerate_routes(scenario)
        .into_iter()
        .filter(|r| route_length(scenario, r) >= min_length)
        .collect();
    if admissible.is_empty() {
        return Err(Error::NoAdmissibleRoute {
            scenario: scenario.name.clone(),
            min_length,
        });
    }
    let pick = rng.random_range(0..admissible.len());
    Ok(Path::from_route(scenario, &admissible[pick], spacing))
}
