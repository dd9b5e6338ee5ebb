//! Manhattan-grid road network and vehicle-pair kinematics.
//!
//! Lanes run along both axes at multiples of `lane_spacing`. Each pair moves as a
//! rigid body: the receiver trails the transmitter by `pair_distance` on the
//! transmitter's lane. At intersections the pair picks straight, left or right
//! uniformly; the along-lane coordinate wraps toroidally at the area boundary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Lane of constant `y`; vehicles move along `x`.
    Horizontal,
    /// Lane of constant `x`; vehicles move along `y`.
    Vertical,
}

impl Axis {
    pub fn perpendicular(self) -> Axis {
        match self {
            Axis::Horizontal => Axis::Vertical,
            Axis::Vertical => Axis::Horizontal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Heading {
    pub fn axis(self) -> Axis {
        match self {
            Heading::PosX | Heading::NegX => Axis::Horizontal,
            Heading::PosY | Heading::NegY => Axis::Vertical,
        }
    }

    fn unit(self) -> (f64, f64) {
        match self {
            Heading::PosX => (1.0, 0.0),
            Heading::NegX => (-1.0, 0.0),
            Heading::PosY => (0.0, 1.0),
            Heading::NegY => (0.0, -1.0),
        }
    }

    fn is_positive(self) -> bool {
        matches!(self, Heading::PosX | Heading::PosY)
    }

    fn left(self) -> Heading {
        match self {
            Heading::PosX => Heading::PosY,
            Heading::PosY => Heading::NegX,
            Heading::NegX => Heading::NegY,
            Heading::NegY => Heading::PosX,
        }
    }

    fn right(self) -> Heading {
        self.left().left().left()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub area_side_m: f64,
    pub lane_spacing_m: f64,
    pub speed_kmh: f64,
    pub pair_distance_m: f64,
    pub k: usize,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            area_side_m: 250.0,
            lane_spacing_m: 50.0,
            speed_kmh: 60.0,
            pair_distance_m: 15.0,
            k: 80,
        }
    }
}

impl MobilityConfig {
    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config(
                "mobility.k",
                "need at least one vehicle pair",
            ));
        }
        if !(self.area_side_m > 0.0) {
            return Err(Error::config("mobility.area_side_m", "must be positive"));
        }
        if !(self.lane_spacing_m > 0.0) || self.lane_spacing_m > self.area_side_m {
            return Err(Error::config(
                "mobility.lane_spacing_m",
                "must be positive and no larger than the area side",
            ));
        }
        if !(self.speed_kmh > 0.0) {
            return Err(Error::config("mobility.speed_kmh", "must be positive"));
        }
        if !(self.pair_distance_m > 0.0) || self.pair_distance_m >= self.area_side_m {
            return Err(Error::config(
                "mobility.pair_distance_m",
                "must lie in (0, area_side_m)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoadNetwork {
    pub area_side: f64,
    pub lane_spacing: f64,
    /// Lane coordinates, identical for both axes, ascending.
    pub lanes: Vec<f64>,
}

impl RoadNetwork {
    pub fn new(area_side: f64, lane_spacing: f64) -> Result<Self> {
        if !(area_side > 0.0) {
            return Err(Error::config("mobility.area_side_m", "must be positive"));
        }
        if !(lane_spacing > 0.0) || lane_spacing > area_side {
            return Err(Error::config(
                "mobility.lane_spacing_m",
                "must be positive and no larger than the area side",
            ));
        }
        let count = (area_side / lane_spacing).floor() as usize + 1;
        let lanes = (0..count).map(|i| i as f64 * lane_spacing).collect();
        Ok(Self {
            area_side,
            lane_spacing,
            lanes,
        })
    }

    /// Lane whose coordinate is within `tol` of `c`, if any.
    pub fn lane_at(&self, c: f64, tol: f64) -> Option<f64> {
        self.lanes.iter().copied().find(|l| (l - c).abs() <= tol)
    }

    /// Lanes the point lies on, as (axis, lane coordinate).
    pub fn lanes_through(&self, p: Point, tol: f64) -> Vec<(Axis, f64)> {
        let mut out = Vec::with_capacity(2);
        if let Some(y) = self.lane_at(p.y, tol) {
            out.push((Axis::Horizontal, y));
        }
        if let Some(x) = self.lane_at(p.x, tol) {
            out.push((Axis::Vertical, x));
        }
        out
    }

    fn next_lane_above(&self, s: f64) -> Option<f64> {
        self.lanes.iter().copied().find(|&l| l > s)
    }

    fn next_lane_below(&self, s: f64) -> Option<f64> {
        self.lanes.iter().rev().copied().find(|&l| l < s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehiclePair {
    pub id: usize,
    pub tx: Point,
    pub rx: Point,
    pub heading: Heading,
    /// Meters per second.
    pub speed: f64,
    pub pair_distance: f64,
}

impl VehiclePair {
    fn place_receiver(&mut self) {
        let (ux, uy) = self.heading.unit();
        self.rx = Point::new(
            self.tx.x - ux * self.pair_distance,
            self.tx.y - uy * self.pair_distance,
        );
    }

    /// Coordinate of the lane the pair is driving on.
    pub fn lane(&self) -> f64 {
        match self.heading.axis() {
            Axis::Horizontal => self.tx.y,
            Axis::Vertical => self.tx.x,
        }
    }
}

pub fn pair_midpoint(pair: &VehiclePair) -> Point {
    Point::new((pair.tx.x + pair.rx.x) / 2.0, (pair.tx.y + pair.rx.y) / 2.0)
}

/// Places `config.k` pairs uniformly on the lanes: uniform axis, lane, along-lane
/// position and direction.
pub fn init_topology<R: Rng + ?Sized>(
    config: &MobilityConfig,
    rng: &mut R,
) -> Result<(RoadNetwork, Vec<VehiclePair>)> {
    config.validate()?;
    let network = RoadNetwork::new(config.area_side_m, config.lane_spacing_m)?;
    let speed = config.speed_mps();
    let pairs = (0..config.k)
        .map(|id| {
            let horizontal = rng.random_bool(0.5);
            let lane = network.lanes[rng.random_range(0..network.lanes.len())];
            let along = rng.random_range(0.0..config.area_side_m);
            let positive = rng.random_bool(0.5);
            let (tx, heading) = match (horizontal, positive) {
                (true, true) => (Point::new(along, lane), Heading::PosX),
                (true, false) => (Point::new(along, lane), Heading::NegX),
                (false, true) => (Point::new(lane, along), Heading::PosY),
                (false, false) => (Point::new(lane, along), Heading::NegY),
            };
            let mut pair = VehiclePair {
                id,
                tx,
                rx: tx,
                heading,
                speed,
                pair_distance: config.pair_distance_m,
            };
            pair.place_receiver();
            pair
        })
        .collect();
    Ok((network, pairs))
}

/// Advances every pair by `speed * dt` along its lane, turning at intersections.
pub fn step_positions<R: Rng + ?Sized>(
    pairs: &mut [VehiclePair],
    network: &RoadNetwork,
    dt: f64,
    rng: &mut R,
) {
    if !(dt > 0.0) {
        return;
    }
    for pair in pairs.iter_mut() {
        advance(pair, network, pair.speed * dt, rng);
        pair.place_receiver();
    }
}

fn advance<R: Rng + ?Sized>(pair: &mut VehiclePair, network: &RoadNetwork, dist: f64, rng: &mut R) {
    let mut remaining = dist;
    while remaining > 0.0 {
        let heading = pair.heading;
        let along = match heading.axis() {
            Axis::Horizontal => &mut pair.tx.x,
            Axis::Vertical => &mut pair.tx.y,
        };
        // Distance to the next intersection in the direction of travel,
        // wrapping the along-lane coordinate when the boundary is passed.
        let (target, gap) = if heading.is_positive() {
            match network.next_lane_above(*along) {
                Some(c) => (c, c - *along),
                None => {
                    *along -= network.area_side;
                    continue;
                }
            }
        } else {
            match network.next_lane_below(*along) {
                Some(c) => (c, *along - c),
                None => {
                    *along += network.area_side;
                    continue;
                }
            }
        };
        if remaining < gap {
            *along += if heading.is_positive() {
                remaining
            } else {
                -remaining
            };
            break;
        }
        *along = target;
        remaining -= gap;
        pair.heading = match rng.random_range(0..3u8) {
            0 => heading,
            1 => heading.left(),
            _ => heading.right(),
        };
    }
}
