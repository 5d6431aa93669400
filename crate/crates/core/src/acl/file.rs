//! Human-readable rule format: one rule per line,
//! `resource | authorized | contract | path | operation | users`.
//! `*` is the wildcard, users are comma-separated hex keys, `#` starts a comment.

use super::{AccessRule, AclError, Operation, PathPattern, UserSet, Wildcard};
use crate::ccip::ChainId;
use crate::crypto::PublicKey;

pub fn parse_rules(text: &str) -> Result<Vec<AccessRule>, AclError> {
    parse_rules_with(text, |token| token.parse::<PublicKey>().ok())
}

/// Like [`parse_rules`], with a custom resolver for user tokens (for example
/// scenario aliases). Returning `None` fails the line.
pub fn parse_rules_with<F>(text: &str, resolve_user: F) -> Result<Vec<AccessRule>, AclError>
where
    F: Fn(&str) -> Option<PublicKey>,
{
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| AclError::Parse { line: idx + 1, message };
        let cols: Vec<&str> = line.split('|').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(err(format!("expected 6 columns, found {}", cols.len())));
        }
        let resource: ChainId =
            cols[0].parse().map_err(|_| err(format!("bad resource chain {:?}", cols[0])))?;
        let authorized = match cols[1] {
            "*" => Wildcard::Any,
            s => Wildcard::Exactly(s.parse().map_err(|_| err(format!("bad chain {s:?}")))?),
        };
        let contract = match cols[2] {
            "*" => Wildcard::Any,
            "" => return Err(err("empty contract".into())),
            s => Wildcard::Exactly(s.to_string()),
        };
        if cols[3].is_empty() {
            return Err(err("empty path".into()));
        }
        let operate = match cols[4] {
            "*" => Wildcard::Any,
            s => Wildcard::Exactly(s.parse::<Operation>().map_err(|e| err(e.to_string()))?),
        };
        let users = match cols[5] {
            "*" => UserSet::Any,
            s => {
                let mut keys = Vec::new();
                for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    keys.push(resolve_user(token).ok_or_else(|| err(format!("unknown user {token:?}")))?);
                }
                UserSet::Keys(keys)
            }
        };
        let rule = AccessRule {
            resource_blockchain: resource,
            authorized_blockchain: authorized,
            contract,
            resource_path: PathPattern::parse(cols[3]),
            operate,
            user_identity: users,
        };
        rule.validate().map_err(|e| err(e.to_string()))?;
        rules.push(rule);
    }
    Ok(rules)
}

pub fn format_rules(rules: &[AccessRule]) -> String {
    let mut out = String::new();
    for r in rules {
        let authorized = match &r.authorized_blockchain {
            Wildcard::Any => "*".to_string(),
            Wildcard::Exactly(c) => c.to_string(),
        };
        let contract = match &r.contract {
            Wildcard::Any => "*".to_string(),
            Wildcard::Exactly(c) => c.clone(),
        };
        let operate = match &r.operate {
            Wildcard::Any => "*".to_string(),
            Wildcard::Exactly(op) => op.to_string(),
        };
        let users = match &r.user_identity {
            UserSet::Any => "*".to_string(),
            UserSet::Keys(keys) => keys.iter().map(PublicKey::to_hex).collect::<Vec<_>>().join(","),
        };
        out.push_str(&format!(
            "{} | {} | {} | {} | {} | {}\n",
            r.resource_blockchain, authorized, contract, r.resource_path, operate, users
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SigningKeypair;

    #[test]
    fn parses_and_formats() {
        let alice = SigningKeypair::from_seed(b"alice").public_key();
        let text = format!(
            "# resource | authorized | contract | path | op | users\n\
             2 | 1 | kv | price | read | {}\n\
             2 | * | * | balances/* | * | *   # open ledger\n",
            alice.to_hex()
        );
        let rules = parse_rules(&text).unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].user_identity, UserSet::Keys(vec![alice]));
        assert_eq!(rules[1].resource_path, PathPattern::Prefix("balances/".into()));
        assert_eq!(parse_rules(&format_rules(&rules)).unwrap(), rules);
    }

    #[test]
    fn aliases_resolve() {
        let alice = SigningKeypair::from_seed(b"alice").public_key();
        let rules = parse_rules_with("2|1|kv|k|read|@alice", |t| (t == "@alice").then_some(alice))
            .unwrap();
        assert_eq!(rules[0].user_identity, UserSet::Keys(vec![alice]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_rules("\n2|1|kv|k|read").unwrap_err();
        assert!(matches!(e, AclError::Parse { line: 2, .. }));
        assert!(parse_rules("2|1|kv|k|delete|*").is_err());
        assert!(parse_rules("2|x|kv|k|read|*").is_err());
        assert!(parse_rules("2|1|kv|k|read|zz").is_err());
        assert!(parse_rules("2|1|kv|k|read|,").is_err());
    }
}
