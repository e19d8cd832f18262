//! System contract on the base network ledger: principal and channel
//! registrations visible to every participant.

use serde::Deserialize;
use serde_json::{json, Value};

use crate::contract::{parse_args, Contract, ContractError, ContractResult, Directory, TxContext};
use crate::ledger::{ChannelSpec, Principal, WorldState};

pub const NAME: &str = "registry";

pub struct RegistryContract;

#[derive(Deserialize)]
struct RegisterPrincipal {
    principal: Principal,
}

#[derive(Deserialize)]
struct RegisterChannel {
    channel: ChannelSpec,
}

impl Contract for RegistryContract {
    fn name(&self) -> &str {
        NAME
    }

    fn invoke(&self, ctx: &mut TxContext<'_>, operation: &str, args: &Value) -> ContractResult<Value> {
        match operation {
            "register_principal" => {
                let RegisterPrincipal { principal } = parse_args(args)?;
                let key = format!("principal/{}", principal.id);
                if ctx.get(&key)?.is_some() {
                    return Err(ContractError::new("duplicate-principal", principal.id));
                }
                ctx.put_json(&key, &principal);
                Ok(json!({ "id": principal.id }))
            }
            "register_channel" => {
                let RegisterChannel { channel } = parse_args(args)?;
                let key = format!("channel/{}", channel.name);
                if ctx.get(&key)?.is_some() {
                    return Err(ContractError::new("duplicate-channel-name", channel.name));
                }
                ctx.put_json(&key, &channel);
                Ok(json!({ "name": channel.name }))
            }
            other => Err(ContractError::new("unknown-operation", other)),
        }
    }
}

pub fn directory_from_state(state: &WorldState) -> Directory {
    let mut dir = Directory::default();
    for (_, entry) in state.scan("registry/principal/") {
        if let Ok(p) = serde_json::from_slice::<Principal>(&entry.value) {
            dir.insert(p);
        }
    }
    dir
}

pub fn channels_from_state(state: &WorldState) -> Vec<ChannelSpec> {
    state
        .scan("registry/channel/")
        .filter_map(|(_, entry)| serde_json::from_slice(&entry.value).ok())
        .collect()
}
