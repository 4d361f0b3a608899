//! Canonical (pre-injection) responses for the supported mock method set.
//! Every response is a deterministic function of (method, params, chain).

use serde_json::{json, Value};

use super::chain::{Block, SyntheticChain, Transaction};

pub fn quantity_hex(n: u128) -> String {
    format!("0x{n:x}")
}

fn el_ok(id: &Value, result: Value) -> (u16, Value) {
    (200, json!({"jsonrpc": "2.0", "id": id, "result": result}))
}

fn el_err(id: &Value, code: i64, message: &str) -> (u16, Value) {
    (200, json!({"jsonrpc": "2.0", "id": id, "error": {"code": code, "message": message}}))
}

const INVALID_PARAMS: &str = "invalid params";

fn is_address(text: &str) -> bool {
    text.len() == 42
        && text.starts_with("0x")
        && text[2..].bytes().all(|b| b.is_ascii_hexdigit())
}

fn is_block_hash(text: &str) -> bool {
    text.len() == 66
        && text.starts_with("0x")
        && text[2..].bytes().all(|b| b.is_ascii_hexdigit())
}

fn is_quantity(text: &str) -> bool {
    let Some(digits) = text.strip_prefix("0x") else { return false };
    !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_hexdigit())
        && (digits == "0" || !digits.starts_with('0'))
}

/// Resolves a block number/tag/hash param. `Err(())` marks a malformed
/// param; `Ok(None)` a well-formed but unknown block.
fn resolve_block<'a>(chain: &'a SyntheticChain, param: &Value) -> Result<Option<&'a Block>, ()> {
    let Some(text) = param.as_str() else { return Err(()) };
    match text {
        "latest" | "pending" | "safe" => Ok(Some(chain.tip())),
        "earliest" => Ok(chain.block_by_number(0)),
        "finalized" => {
            let slot = (chain.finalized_epochs * 32).min(chain.tip().number);
            Ok(chain.block_by_number(slot))
        }
        _ if is_block_hash(text) => Ok(chain.block_by_hash(text)),
        _ if is_quantity(text) => {
            let number = u64::from_str_radix(&text[2..], 16).map_err(|_| ())?;
            Ok(chain.block_by_number(number))
        }
        _ => Err(()),
    }
}

fn tx_object(tx: &Transaction, block: &Block) -> Value {
    json!({
        "hash": tx.hash,
        "from": tx.from,
        "to": tx.to,
        "value": quantity_hex(tx.value),
        "blockNumber": quantity_hex(tx.block_number as u128),
        "blockHash": block.hash,
        "transactionIndex": quantity_hex(tx.index as u128),
    })
}

fn receipt_object(tx: &Transaction, block: &Block) -> Value {
    json!({
        "transactionHash": tx.hash,
        "transactionIndex": quantity_hex(tx.index as u128),
        "blockNumber": quantity_hex(tx.block_number as u128),
        "blockHash": block.hash,
        "from": tx.from,
        "to": tx.to,
        "status": "0x1",
    })
}

fn block_object(block: &Block, full: bool) -> Value {
    let transactions: Vec<Value> = if full {
        block.transactions.iter().map(|tx| tx_object(tx, block)).collect()
    } else {
        block.transactions.iter().map(|tx| json!(tx.hash)).collect()
    };
    json!({
        "number": quantity_hex(block.number as u128),
        "hash": block.hash,
        "parentHash": block.parent_hash,
        "transactions": transactions,
    })
}

/// Canonical execution-layer response. Unknown methods get the standard
/// method-not-found error object; malformed params a constant
/// invalid-params error.
pub fn canonical_el(
    method: &str,
    params: &[Value],
    id: &Value,
    chain: &SyntheticChain,
) -> (u16, Value) {
    match method {
        "eth_blockNumber" => {
            if !params.is_empty() {
                return el_err(id, -32602, INVALID_PARAMS);
            }
            el_ok(id, json!(quantity_hex(chain.tip().number as u128)))
        }
        "eth_getBalance" => {
            let [address, block] = params else { return el_err(id, -32602, INVALID_PARAMS) };
            let Some(address) = address.as_str().filter(|a| is_address(a)) else {
                return el_err(id, -32602, INVALID_PARAMS);
            };
            match resolve_block(chain, block) {
                Err(()) => el_err(id, -32602, INVALID_PARAMS),
                Ok(None) => el_err(id, -32000, "header not found"),
                // Absent accounts read as zero balance by convention.
                Ok(Some(_)) => el_ok(id, json!(quantity_hex(chain.balance_of(address)))),
            }
        }
        "eth_getBlockByNumber" | "eth_getBlockByHash" => {
            if params.is_empty() || params.len() > 2 {
                return el_err(id, -32602, INVALID_PARAMS);
            }
            let full = match params.get(1) {
                None => false,
                Some(Value::Bool(full)) => *full,
                Some(_) => return el_err(id, -32602, INVALID_PARAMS),
            };
            let block = if method == "eth_getBlockByHash" {
                let Some(text) = params[0].as_str().filter(|h| is_block_hash(h)) else {
                    return el_err(id, -32602, INVALID_PARAMS);
                };
                chain.block_by_hash(text)
            } else {
                match resolve_block(chain, &params[0]) {
                    Err(()) => return el_err(id, -32602, INVALID_PARAMS),
                    Ok(block) => block,
                }
            };
            match block {
                Some(block) => el_ok(id, block_object(block, full)),
                None => el_ok(id, Value::Null),
            }
        }
        "eth_getTransactionReceipt" => {
            let [hash] = params else { return el_err(id, -32602, INVALID_PARAMS) };
            let Some(hash) = hash.as_str().filter(|h| is_block_hash(h)) else {
                return el_err(id, -32602, INVALID_PARAMS);
            };
            match chain.transaction_by_hash(hash) {
                Some(tx) => {
                    let block = chain.block_by_number(tx.block_number).expect("tx block exists");
                    el_ok(id, receipt_object(tx, block))
                }
                None => el_ok(id, Value::Null),
            }
        }
        "eth_getTransactionCount" => {
            let [address, block] = params else { return el_err(id, -32602, INVALID_PARAMS) };
            let Some(address) = address.as_str().filter(|a| is_address(a)) else {
                return el_err(id, -32602, INVALID_PARAMS);
            };
            match resolve_block(chain, block) {
                Err(()) => el_err(id, -32602, INVALID_PARAMS),
                Ok(None) => el_err(id, -32000, "header not found"),
                Ok(Some(_)) => el_ok(id, json!(quantity_hex(chain.nonce_of(address) as u128))),
            }
        }
        "eth_getBlockReceipts" => {
            let [block] = params else { return el_err(id, -32602, INVALID_PARAMS) };
            match resolve_block(chain, block) {
                Err(()) => el_err(id, -32602, INVALID_PARAMS),
                Ok(None) => el_ok(id, Value::Null),
                Ok(Some(block)) => {
                    let receipts: Vec<Value> =
                        block.transactions.iter().map(|tx| receipt_object(tx, block)).collect();
                    el_ok(id, Value::Array(receipts))
                }
            }
        }
        "eth_getBlockTransactionCountByNumber" => {
            let [block] = params else { return el_err(id, -32602, INVALID_PARAMS) };
            match resolve_block(chain, block) {
                Err(()) => el_err(id, -32602, INVALID_PARAMS),
                Ok(None) => el_ok(id, Value::Null),
                Ok(Some(block)) => {
                    el_ok(id, json!(quantity_hex(block.transactions.len() as u128)))
                }
            }
        }
        "eth_newFilter" => {
            let [filter] = params else { return el_err(id, -32602, INVALID_PARAMS) };
            if !filter.is_object() {
                return el_err(id, -32602, INVALID_PARAMS);
            }
            el_ok(id, json!("0x1"))
        }
        "admin_nodeInfo" => {
            if !params.is_empty() {
                return el_err(id, -32602, INVALID_PARAMS);
            }
            el_ok(
                id,
                json!({
                    "id": chain.derived_hex("node-id", 64),
                    "enode": format!("enode://{}@127.0.0.1:30303", &chain.derived_hex("node-key", 128)[2..]),
                    "enr": format!("enr:-{}", &chain.derived_hex("node-enr", 48)[2..]),
                    "ip": "127.0.0.1",
                    "listenAddr": "127.0.0.1:30303",
                    "name": "specdiff-mock/v0.1.0",
                    "ports": {"discovery": 30303, "listener": 30303},
                    "protocols": {"eth": {
                        "network": 1,
                        "head": chain.tip().hash,
                    }},
                }),
            )
        }
        other => el_err(id, -32601, &format!("the method {other} does not exist/is not available")),
    }
}

/// REST operations served by the mock consensus-layer surface.
#[derive(Debug, Clone, PartialEq)]
pub enum RestOp {
    GetBlockHeader { block_id: String },
    GetPeers,
    GetSyncing,
    PublishBlock { body: Value },
}

fn cl_err(status: u16, message: &str) -> (u16, Value) {
    (status, json!({"code": status, "message": message}))
}

fn header_object(chain: &SyntheticChain, block: &Block) -> Value {
    json!({
        "data": {
            "root": block.hash,
            "canonical": true,
            "header": {
                "message": {
                    "slot": block.number.to_string(),
                    "proposer_index": ((block.number * 7) % 256).to_string(),
                    "parent_root": block.parent_hash,
                    "state_root": chain.derived_hex(&format!("state-{}", block.number), 64),
                    "body_root": chain.derived_hex(&format!("body-{}", block.number), 64),
                },
                "signature": chain.derived_hex(&format!("sig-{}", block.number), 192),
            }
        }
    })
}

fn peer_object(chain: &SyntheticChain, index: u64) -> Value {
    json!({
        "peer_id": format!("16Uiu2HAm{}", &chain.derived_hex(&format!("peer-{index}"), 40)[2..]),
        "enr": format!("enr:-{}", &chain.derived_hex(&format!("peer-enr-{index}"), 48)[2..]),
        "last_seen_p2p_address": format!("/ip4/10.0.0.{}/tcp/9000", index + 2),
        "state": "connected",
        "direction": if index % 2 == 0 { "inbound" } else { "outbound" },
    })
}

/// Canonical consensus-layer response.
pub fn canonical_rest(op: &RestOp, chain: &SyntheticChain) -> (u16, Value) {
    match op {
        RestOp::GetBlockHeader { block_id } => {
            let block = match block_id.as_str() {
                "head" => Some(chain.tip()),
                "genesis" => chain.block_by_number(0),
                "finalized" => {
                    let slot = (chain.finalized_epochs * 32).min(chain.tip().number);
                    chain.block_by_number(slot)
                }
                text if is_block_hash(text) => chain.block_by_hash(text),
                text if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) => {
                    match text.parse::<u64>() {
                        Ok(slot) => chain.block_by_number(slot),
                        Err(_) => None,
                    }
                }
                _ => return cl_err(400, "Invalid block ID"),
            };
            match block {
                Some(block) => (200, header_object(chain, block)),
                None => cl_err(404, "Not found"),
            }
        }
        RestOp::GetPeers => {
            let peers: Vec<Value> = (0..3).map(|i| peer_object(chain, i)).collect();
            (200, json!({"data": peers, "meta": {"count": peers.len()}}))
        }
        RestOp::GetSyncing => (
            200,
            json!({"data": {
                "head_slot": chain.current_slot.to_string(),
                "sync_distance": "0",
                "is_syncing": false,
                "is_optimistic": false,
                "el_offline": false,
            }}),
        ),
        RestOp::PublishBlock { body } => {
            let proof_len = body
                .get("proof")
                .and_then(Value::as_array)
                .map(|proof| proof.len());
            match proof_len {
                None => cl_err(400, "Invalid block: missing proof"),
                // The consensus rules require 33 proof entries.
                Some(n) if n != 33 => {
                    cl_err(400, &format!("Invalid block: expected 33 and {n} found"))
                }
                Some(_) => (200, json!({})),
            }
        }
    }
}
