//! Deterministic synthetic chain state shared by every mock node.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::util::{seeded_rng, stable_hash};

pub const DEFAULT_HEIGHT: u64 = 64;
pub const DEFAULT_ACCOUNTS: usize = 128;
pub const DEFAULT_TRANSACTIONS: usize = 256;
pub const DEFAULT_FINALIZED_EPOCHS: u64 = 5;

#[derive(Debug, Clone)]
pub struct Transaction {
    pub hash: String,
    pub from: String,
    pub to: String,
    pub value: u128,
    pub block_number: u64,
    pub index: u64,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub number: u64,
    pub hash: String,
    pub parent_hash: String,
    pub transactions: Vec<Transaction>,
}

/// The chain every mock node serves: blocks 0..=height, funded accounts,
/// and transactions between them. A pure function of the seed.
#[derive(Debug, Clone)]
pub struct SyntheticChain {
    pub blocks: Vec<Block>,
    pub accounts: BTreeMap<String, u128>,
    pub current_slot: u64,
    pub finalized_epochs: u64,
    pub rng_seed: u64,
}

fn hex_bytes<R: Rng>(rng: &mut R, len: usize) -> String {
    const DIGITS: &[u8] = b"0123456789abcdef";
    let mut out = String::with_capacity(2 + len);
    out.push_str("0x");
    for _ in 0..len {
        out.push(DIGITS[rng.gen_range(0..16)] as char);
    }
    out
}

impl SyntheticChain {
    pub fn generate(seed: u64) -> Self {
        let mut rng = seeded_rng(seed ^ stable_hash(b"synthetic-chain"));

        let mut accounts = BTreeMap::new();
        let mut addresses = Vec::with_capacity(DEFAULT_ACCOUNTS);
        while addresses.len() < DEFAULT_ACCOUNTS {
            let address = hex_bytes(&mut rng, 40);
            if !accounts.contains_key(&address) {
                accounts.insert(address.clone(), rng.gen_range(1u128..=1_000_000_000));
                addresses.push(address);
            }
        }

        let mut blocks: Vec<Block> = Vec::with_capacity(DEFAULT_HEIGHT as usize + 1);
        let mut parent = format!("0x{}", "0".repeat(64));
        let mut seen_hashes = Vec::new();
        for number in 0..=DEFAULT_HEIGHT {
            let mut hash = hex_bytes(&mut rng, 64);
            while seen_hashes.contains(&hash) {
                hash = hex_bytes(&mut rng, 64);
            }
            seen_hashes.push(hash.clone());
            blocks.push(Block {
                number,
                hash: hash.clone(),
                parent_hash: parent,
                transactions: Vec::new(),
            });
            parent = hash;
        }

        for _ in 0..DEFAULT_TRANSACTIONS {
            let block_number = rng.gen_range(1..=DEFAULT_HEIGHT);
            let from = addresses.choose(&mut rng).expect("accounts exist").clone();
            let to = addresses.choose(&mut rng).expect("accounts exist").clone();
            let hash = hex_bytes(&mut rng, 64);
            let block = &mut blocks[block_number as usize];
            let index = block.transactions.len() as u64;
            block.transactions.push(Transaction {
                hash,
                from,
                to,
                value: rng.gen_range(1u128..=1_000_000),
                block_number,
                index,
            });
        }

        SyntheticChain {
            blocks,
            accounts,
            current_slot: DEFAULT_HEIGHT,
            finalized_epochs: DEFAULT_FINALIZED_EPOCHS,
            rng_seed: seed,
        }
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain has a genesis block")
    }

    pub fn block_by_number(&self, number: u64) -> Option<&Block> {
        self.blocks.get(number as usize)
    }

    pub fn block_by_hash(&self, hash: &str) -> Option<&Block> {
        let needle = hash.to_ascii_lowercase();
        self.blocks.iter().find(|block| block.hash == needle)
    }

    pub fn transaction_by_hash(&self, hash: &str) -> Option<&Transaction> {
        let needle = hash.to_ascii_lowercase();
        self.blocks.iter().flat_map(|b| b.transactions.iter()).find(|tx| tx.hash == needle)
    }

    pub fn balance_of(&self, address: &str) -> u128 {
        self.accounts.get(&address.to_ascii_lowercase()).copied().unwrap_or(0)
    }

    /// Count of transactions sent from the address, the mock's nonce.
    pub fn nonce_of(&self, address: &str) -> u64 {
        let needle = address.to_ascii_lowercase();
        self.blocks
            .iter()
            .flat_map(|b| b.transactions.iter())
            .filter(|tx| tx.from == needle)
            .count() as u64
    }

    /// A value derived deterministically from the chain seed and a tag;
    /// used for state roots, signatures and node identity strings.
    pub fn derived_hex(&self, tag: &str, len: usize) -> String {
        let mut rng = seeded_rng(self.rng_seed ^ stable_hash(tag.as_bytes()));
        hex_bytes(&mut rng, len)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for (index, block) in self.blocks.iter().enumerate() {
            if block.number != index as u64 {
                return Err(format!("block numbers not contiguous at {index}"));
            }
            if index > 0 && block.parent_hash != self.blocks[index - 1].hash {
                return Err(format!("parent link broken at block {index}"));
            }
        }
        let mut hashes: Vec<&str> = self.blocks.iter().map(|b| b.hash.as_str()).collect();
        hashes.sort_unstable();
        if hashes.windows(2).any(|pair| pair[0] == pair[1]) {
            return Err("duplicate block hash".to_string());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = SyntheticChain::generate(7);
        let b = SyntheticChain::generate(7);
        assert_eq!(a.tip().hash, b.tip().hash);
        assert_eq!(a.accounts, b.accounts);
        let c = SyntheticChain::generate(8);
        assert_ne!(a.tip().hash, c.tip().hash);
    }

    #[test]
    fn invariants_hold() {
        let chain = SyntheticChain::generate(42);
        chain.check_invariants().unwrap();
        assert_eq!(chain.blocks.len() as u64, DEFAULT_HEIGHT + 1);
        assert_eq!(chain.accounts.len(), DEFAULT_ACCOUNTS);
        let total: usize = chain.blocks.iter().map(|b| b.transactions.len()).sum();
        assert_eq!(total, DEFAULT_TRANSACTIONS);
    }

    #[test]
    fn senders_and_recipients_are_funded_accounts() {
        let chain = SyntheticChain::generate(3);
        for block in &chain.blocks {
            for tx in &block.transactions {
                assert!(chain.accounts.contains_key(&tx.from));
                assert!(chain.accounts.contains_key(&tx.to));
            }
        }
    }
}
