//! Generators for random conditions and a naive evaluator written without
//! reference to the library's.

use std::collections::BTreeSet;

use credchain::access::{Condition, GeoPoint, GeoTarget, TripContext};
use credchain::time::{Period, Weekday};
use proptest::prelude::*;
use proptest::sample::subsequence;

pub const TYPES: [&str; 3] = ["bus", "train", "tram"];
pub const ROLES: [&str; 3] = ["staff", "engineer", "manager"];
pub const AMOUNTS: [u64; 7] = [0, 1, 10, 29, 30, 31, 39];
pub const MINUTES: [u64; 7] = [0, 479, 480, 720, 1079, 1080, 1439];
pub const LATS: [f64; 3] = [52.27, 52.37, 52.47];
pub const LONS: [f64; 3] = [4.80, 4.90, 5.00];

/// 2024-02-12T00:00:00Z, a Monday.
pub const MONDAY: u64 = 1_707_696_000_000;

const DAY_MS: u64 = 86_400_000;

pub fn points() -> Vec<GeoPoint> {
    LATS.iter()
        .flat_map(|&lat| LONS.iter().map(move |&lon| GeoPoint::new(lat, lon)))
        .collect()
}

/// Size of the discretized context grid.
pub const GRID_SIZE: usize = 7 * MINUTES.len() * 9 * 9 * TYPES.len() * ROLES.len() * AMOUNTS.len();

/// Context number `index` of the grid, decoded in mixed radix.
pub fn grid_context(mut index: usize) -> TripContext {
    let mut digit = |radix: usize| {
        let d = index % radix;
        index /= radix;
        d
    };
    let day = digit(7) as u64;
    let minute = MINUTES[digit(MINUTES.len())];
    let points = points();
    let origin = points[digit(9)];
    let destination = points[digit(9)];
    TripContext {
        at: MONDAY + day * DAY_MS + minute * 60_000,
        origin,
        destination,
        transport_type: TYPES[digit(TYPES.len())].to_string(),
        role: ROLES[digit(ROLES.len())].to_string(),
        amount: AMOUNTS[digit(AMOUNTS.len())],
    }
}

pub fn context() -> impl Strategy<Value = TripContext> {
    (0..GRID_SIZE).prop_map(grid_context)
}

fn weekdays() -> impl Strategy<Value = BTreeSet<Weekday>> {
    subsequence(Weekday::ALL.to_vec(), 0..=7).prop_map(|d| d.into_iter().collect())
}

fn labels(from: &'static [&'static str]) -> impl Strategy<Value = BTreeSet<String>> {
    subsequence(from.to_vec(), 0..=from.len()).prop_map(|v| v.into_iter().map(String::from).collect())
}

pub fn leaf() -> impl Strategy<Value = Condition> {
    let period = prop_oneof![Just(Period::Day), Just(Period::Week), Just(Period::Month)];
    let target = prop_oneof![
        Just(GeoTarget::Origin),
        Just(GeoTarget::Destination),
        Just(GeoTarget::Both)
    ];
    prop_oneof![
        // Window bounds on the grid's minutes half the time, to hit edges.
        (
            prop_oneof![0u16..1440, prop::sample::select(MINUTES.map(|m| m as u16).to_vec())],
            prop_oneof![0u16..1440, prop::sample::select(MINUTES.map(|m| m as u16).to_vec())],
            weekdays()
        )
            .prop_map(|(start, end, days)| Condition::TimeWindow { start, end, days }),
        (prop::sample::select(points()), 0.0f64..30_000.0, target).prop_map(|(center, radius_m, applies_to)| {
            Condition::Geofence {
                center,
                radius_m,
                applies_to,
            }
        }),
        labels(&TYPES).prop_map(|allowed| Condition::TransportTypes { allowed }),
        labels(&ROLES).prop_map(|roles| Condition::RoleIs { roles }),
        (0u64..40).prop_map(|credits| Condition::MaxPerTrip { credits }),
        (0u64..40, period).prop_map(|(credits, period)| Condition::BudgetPerPeriod { credits, period }),
    ]
}

/// Condition trees of depth at most 4.
pub fn condition() -> impl Strategy<Value = Condition> {
    leaf().prop_recursive(3, 24, 4, |inner| {
        prop::collection::vec(inner, 0..4).prop_map(|conditions| Condition::All { conditions })
    })
}

/// Weekday by counting days from 1970-01-01, a Thursday.
fn naive_weekday(at: u64) -> Weekday {
    let mut day = Weekday::Thu;
    for _ in 0..(at / DAY_MS) % 7 {
        day = match day {
            Weekday::Mon => Weekday::Tue,
            Weekday::Tue => Weekday::Wed,
            Weekday::Wed => Weekday::Thu,
            Weekday::Thu => Weekday::Fri,
            Weekday::Fri => Weekday::Sat,
            Weekday::Sat => Weekday::Sun,
            Weekday::Sun => Weekday::Mon,
        };
    }
    day
}

/// Whether `minute` is covered by a window, walking from `start` to `end`
/// one minute at a time.
fn window_covers(start: u16, end: u16, minute: u16) -> bool {
    if start == end {
        return true;
    }
    let mut m = start;
    while m != end {
        if m == minute {
            return true;
        }
        m = (m + 1) % 1440;
    }
    false
}

/// Surface distance from the straight-line chord between unit vectors.
fn chord_distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let unit = |p: GeoPoint| {
        let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (u, v) = (unit(a), unit(b));
    let chord = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt();
    2.0 * (chord / 2.0).asin() * 6_371_008.8
}

pub fn naive_allows(condition: &Condition, ctx: &TripContext) -> bool {
    match condition {
        Condition::All { conditions } => {
            let mut ok = true;
            for c in conditions {
                ok &= naive_allows(c, ctx);
            }
            ok
        }
        Condition::TimeWindow { start, end, days } => {
            let minute = ((ctx.at % DAY_MS) / 60_000) as u16;
            window_covers(*start, *end, minute) && days.iter().any(|d| *d == naive_weekday(ctx.at))
        }
        Condition::Geofence {
            center,
            radius_m,
            applies_to,
        } => {
            let inside = |p: GeoPoint| chord_distance_m(*center, p) <= radius_m + 1.0;
            match applies_to {
                GeoTarget::Origin => inside(ctx.origin),
                GeoTarget::Destination => inside(ctx.destination),
                GeoTarget::Both => inside(ctx.origin) && inside(ctx.destination),
            }
        }
        Condition::TransportTypes { allowed } => allowed.iter().any(|t| *t == ctx.transport_type),
        Condition::RoleIs { roles } => roles.iter().any(|r| *r == ctx.role),
        Condition::MaxPerTrip { credits } => ctx.amount <= *credits,
        Condition::BudgetPerPeriod { credits, .. } => ctx.amount <= *credits,
    }
}

/// A delegation path: the root's conditions followed by up to three
/// levels of added conditions.
pub fn delegation_path() -> impl Strategy<Value = Vec<Condition>> {
    prop::collection::vec(condition(), 1..=4)
}
