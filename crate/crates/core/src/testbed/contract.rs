use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ccip::Call;

/// Key-value contract with three verbs. Any other function name is treated
/// as a callback: its last argument is stored under the function name and
/// the call is counted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvContract {
    pub id: String,
    pub state: BTreeMap<String, Vec<u8>>,
    pub invocations: BTreeMap<String, u64>,
}

impl KvContract {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), ..Default::default() }
    }

    pub fn with_state(mut self, state: impl IntoIterator<Item = (String, Vec<u8>)>) -> Self {
        self.state.extend(state);
        self
    }

    pub fn get(&self, key: &str) -> Option<&[u8]> {
        self.state.get(key).map(Vec::as_slice)
    }

    pub fn invocation_count(&self, function: &str) -> u64 {
        self.invocations.get(function).copied().unwrap_or(0)
    }

    pub fn execute(&mut self, call: &Call) -> Result<Vec<u8>, String> {
        let arg = |i: usize| call.args.get(i).ok_or_else(|| format!("{}: missing argument {i}", call.function));
        let key = |i: usize| arg(i).map(|a| String::from_utf8_lossy(a).into_owned());
        match call.function.as_str() {
            "read" => {
                let k = key(0)?;
                self.state.get(&k).cloned().ok_or_else(|| format!("no such key: {k}"))
            }
            "write" => {
                let k = key(0)?;
                let v = arg(1)?.clone();
                self.state.insert(k, v);
                Ok(Vec::new())
            }
            "invoke" => {
                let name = key(0)?;
                let n = self.invocations.entry(name).or_insert(0);
                *n += 1;
                Ok(n.to_be_bytes().to_vec())
            }
            f => {
                if let Some(last) = call.args.last() {
                    self.state.insert(f.to_string(), last.clone());
                }
                *self.invocations.entry(f.to_string()).or_insert(0) += 1;
                Ok(Vec::new())
            }
        }
    }
}
