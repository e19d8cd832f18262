//! Conjunctive condition language for delegated access.
//!
//! Serialized as JSON with a `kind` discriminator:
//!
//! ```json
//! {"kind":"all","conditions":[
//!   {"kind":"time_window","start":480,"end":1080,"days":["mon","tue","wed","thu","fri"]},
//!   {"kind":"geofence","center":{"lat":-33.87,"lon":151.21},"radius_m":5000.0,"applies_to":"both"},
//!   {"kind":"transport_types","allowed":["bus","train"]},
//!   {"kind":"role_is","roles":["engineer"]},
//!   {"kind":"max_per_trip","credits":30},
//!   {"kind":"budget_per_period","credits":200,"period":"week"}
//! ]}
//! ```
//!
//! Only conjunction exists, so adding a condition can never widen access.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::time::{self, LogicalTime, Period, Weekday};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Slack added to geofence radii; a point on the boundary counts as inside.
pub const GEOFENCE_TOLERANCE_M: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Great-circle distance (haversine).
pub fn distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoTarget {
    Origin,
    Destination,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// Minutes of day `[start, end)` on the listed weekdays, UTC. `start >
    /// end` wraps past midnight; `start == end` covers the whole day.
    TimeWindow {
        start: u16,
        end: u16,
        days: BTreeSet<Weekday>,
    },
    Geofence {
        center: GeoPoint,
        radius_m: f64,
        applies_to: GeoTarget,
    },
    TransportTypes {
        allowed: BTreeSet<String>,
    },
    RoleIs {
        roles: BTreeSet<String>,
    },
    MaxPerTrip {
        credits: u64,
    },
    /// Per-period spending cap. Evaluated against a single trip it only
    /// requires `amount <= credits`; the running total is enforced by the
    /// access contract's period counters.
    BudgetPerPeriod {
        credits: u64,
        period: Period,
    },
    All {
        conditions: Vec<Condition>,
    },
}

/// Everything a condition may look at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripContext {
    pub at: LogicalTime,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub transport_type: String,
    pub role: String,
    pub amount: u64,
}

impl Default for Condition {
    fn default() -> Self {
        Condition::always()
    }
}

impl Condition {
    /// The empty conjunction.
    pub fn always() -> Self {
        Condition::All {
            conditions: Vec::new(),
        }
    }

    pub fn all(conditions: impl IntoIterator<Item = Condition>) -> Self {
        Condition::All {
            conditions: conditions.into_iter().collect(),
        }
    }

    pub fn transport_types<S: Into<String>>(types: impl IntoIterator<Item = S>) -> Self {
        Condition::TransportTypes {
            allowed: types.into_iter().map(Into::into).collect(),
        }
    }

    pub fn roles<S: Into<String>>(roles: impl IntoIterator<Item = S>) -> Self {
        Condition::RoleIs {
            roles: roles.into_iter().map(Into::into).collect(),
        }
    }

    /// Label reported when this leaf fails.
    pub fn kind(&self) -> &'static str {
        match self {
            Condition::TimeWindow { .. } => "time_window",
            Condition::Geofence { .. } => "geofence",
            Condition::TransportTypes { .. } => "transport_types",
            Condition::RoleIs { .. } => "role_is",
            Condition::MaxPerTrip { .. } => "max_per_trip",
            Condition::BudgetPerPeriod { .. } => "budget_per_period",
            Condition::All { .. } => "all",
        }
    }

    /// Label of the first failing leaf in depth-first, left-to-right order.
    pub fn first_failure(&self, ctx: &TripContext) -> Option<&'static str> {
        match self {
            Condition::All { conditions } => conditions.iter().find_map(|c| c.first_failure(ctx)),
            leaf => (!leaf.leaf_holds(ctx)).then(|| leaf.kind()),
        }
    }

    pub fn allows(&self, ctx: &TripContext) -> bool {
        self.first_failure(ctx).is_none()
    }

    fn leaf_holds(&self, ctx: &TripContext) -> bool {
        match self {
            Condition::TimeWindow { start, end, days } => {
                let minute = time::minute_of_day(ctx.at);
                let in_window = match start.cmp(end) {
                    std::cmp::Ordering::Less => *start <= minute && minute < *end,
                    std::cmp::Ordering::Greater => minute >= *start || minute < *end,
                    std::cmp::Ordering::Equal => true,
                };
                in_window && days.contains(&time::weekday(ctx.at))
            }
            Condition::Geofence {
                center,
                radius_m,
                applies_to,
            } => {
                let inside = |p: GeoPoint| distance_m(*center, p) <= radius_m + GEOFENCE_TOLERANCE_M;
                match applies_to {
                    GeoTarget::Origin => inside(ctx.origin),
                    GeoTarget::Destination => inside(ctx.destination),
                    GeoTarget::Both => inside(ctx.origin) && inside(ctx.destination),
                }
            }
            Condition::TransportTypes { allowed } => allowed.contains(&ctx.transport_type),
            Condition::RoleIs { roles } => roles.contains(&ctx.role),
            Condition::MaxPerTrip { credits } | Condition::BudgetPerPeriod { credits, .. } => ctx.amount <= *credits,
            Condition::All { .. } => unreachable!("conjunctions are not leaves"),
        }
    }

    /// Every `BudgetPerPeriod` bound inside this condition.
    pub fn budgets(&self) -> Vec<(Period, u64)> {
        match self {
            Condition::BudgetPerPeriod { credits, period } => vec![(*period, *credits)],
            Condition::All { conditions } => conditions.iter().flat_map(Condition::budgets).collect(),
            _ => Vec::new(),
        }
    }

    /// Nesting depth; a leaf or an empty conjunction has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Condition::All { conditions } => 1 + conditions.iter().map(Condition::depth).max().unwrap_or(0),
            _ => 1,
        }
    }
}

/// Conjunction of the conditions added along a root-to-node path.
pub fn conjunction<'a>(parts: impl IntoIterator<Item = &'a Condition>) -> Condition {
    Condition::all(parts.into_iter().cloned())
}
