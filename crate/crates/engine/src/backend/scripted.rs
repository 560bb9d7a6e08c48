use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use pcr_core::{ChatMessage, DecodeParams};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{check_request, BackendError, Generator};

/// Content hash of a conversation: SHA-256 over its canonical JSON, hex.
pub fn request_key(messages: &[ChatMessage]) -> String {
    let canonical = serde_json::to_vec(messages).expect("messages serialize");
    Sha256::digest(&canonical).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn transcript(messages: &[ChatMessage]) -> String {
    messages.iter().map(|m| format!("{}: {}\n", m.role().as_str(), m.text())).collect()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    /// Every listed substring must occur in the request transcript.
    #[serde(default)]
    contains: Option<OneOrMany>,
    /// Number of assistant messages already in the conversation.
    #[serde(default)]
    turn: Option<usize>,
    responses: Vec<String>,
    #[serde(default)]
    cycle: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptSpec {
    #[serde(default)]
    responses: HashMap<String, Vec<String>>,
    #[serde(default)]
    rules: Vec<RuleSpec>,
    #[serde(default)]
    default: Vec<String>,
    #[serde(default)]
    cycle: bool,
}

#[derive(Debug)]
struct Rule {
    contains: Vec<String>,
    turn: Option<usize>,
    responses: Vec<String>,
    cycle: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Source {
    Keyed(String),
    Rule(usize, String),
    Default,
}

/// Replays canned completions.
///
/// A request is answered, in order of precedence, from
/// 1. `responses[<request key>]` (exact content match, see [`request_key`]),
/// 2. the first rule whose `contains` substrings and `turn` count match,
/// 3. the `default` queue.
///
/// Keyed entries and rules keep one cursor per distinct request, so
/// concurrent callers with different conversations never race for entries;
/// repeating an identical request walks further along its list. The default
/// queue has a single cursor and is meant for strictly sequential scripts.
/// Each call with `n` samples consumes `n` consecutive entries.
#[derive(Debug)]
pub struct ScriptedBackend {
    keyed: HashMap<String, Vec<String>>,
    rules: Vec<Rule>,
    default: Vec<String>,
    cycle_default: bool,
    cursors: Mutex<HashMap<Source, usize>>,
    log: Mutex<Vec<(String, Vec<ChatMessage>)>>,
}

impl ScriptedBackend {
    /// A backend that answers everything from one sequential queue.
    pub fn queue<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        Self::build(ScriptSpec { default: items.into_iter().map(Into::into).collect(), ..ScriptSpec::default() })
    }

    /// Parses a script: either a JSON array (the default queue) or an object
    /// with `responses`, `rules`, `default` and `cycle`.
    pub fn from_value(value: &Value) -> Result<Self, BackendError> {
        let spec = match value {
            Value::Array(_) => ScriptSpec {
                default: serde_json::from_value(value.clone()).map_err(|e| BackendError::BadScript(e.to_string()))?,
                ..ScriptSpec::default()
            },
            _ => serde_json::from_value(value.clone()).map_err(|e| BackendError::BadScript(e.to_string()))?,
        };
        Ok(Self::build(spec))
    }

    fn build(spec: ScriptSpec) -> Self {
        let rules = spec
            .rules
            .into_iter()
            .map(|r| Rule {
                contains: r.contains.map(OneOrMany::into_vec).unwrap_or_default(),
                turn: r.turn,
                responses: r.responses,
                cycle: r.cycle,
            })
            .collect();
        Self {
            keyed: spec.responses,
            rules,
            default: spec.default,
            cycle_default: spec.cycle,
            cursors: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Every request served so far, with its key.
    pub fn requests(&self) -> Vec<(String, Vec<ChatMessage>)> {
        self.log.lock().expect("log lock").clone()
    }

    fn pick(&self, key: &str, messages: &[ChatMessage]) -> (Source, &[String], bool) {
        if let Some(list) = self.keyed.get(key) {
            return (Source::Keyed(key.to_string()), list, false);
        }
        let text = transcript(messages);
        let turns = messages.iter().filter(|m| m.role() == pcr_core::Role::Assistant).count();
        for (i, rule) in self.rules.iter().enumerate() {
            let turn_ok = rule.turn.is_none_or(|t| t == turns);
            if turn_ok && rule.contains.iter().all(|c| text.contains(c.as_str())) {
                return (Source::Rule(i, key.to_string()), &rule.responses, rule.cycle);
            }
        }
        (Source::Default, &self.default, self.cycle_default)
    }
}

impl Generator for ScriptedBackend {
    fn generate(&self, messages: &[ChatMessage], params: &DecodeParams) -> Result<Vec<String>, BackendError> {
        check_request(messages, params)?;
        let key = request_key(messages);
        self.log.lock().expect("log lock").push((key.clone(), messages.to_vec()));
        let (source, list, cycle) = self.pick(&key, messages);
        let n = params.n as usize;
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry(source).or_insert(0);
        let exhausted = || BackendError::ScriptExhausted { key: key.clone() };
        let out = if cycle {
            if list.is_empty() {
                return Err(exhausted());
            }
            (0..n).map(|i| list[(*cursor + i) % list.len()].clone()).collect()
        } else {
            if *cursor + n > list.len() {
                return Err(exhausted());
            }
            list[*cursor..*cursor + n].to_vec()
        };
        *cursor += n;
        Ok(out)
    }
}
