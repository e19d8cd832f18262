//! Access-control contract: the organisation's delegation tree, trip
//! requests and trip completion.

mod condition;
mod contract;

pub use condition::{
    conjunction, distance_m, Condition, GeoPoint, GeoTarget, TripContext, EARTH_RADIUS_M,
    GEOFENCE_TOLERANCE_M,
};
pub use contract::{
    calls, effective_condition, view, AccessContract, AccessError, Decision, DelegationNode,
    DenialReason, SubLimit, TripRecord, TripRequest, TripStatus, NAME, ROOT_NODE,
};
