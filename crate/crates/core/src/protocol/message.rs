use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node's random identity. Higher ranks beat lower ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rank(pub u64);

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The seven wire message kinds. Two messages are the same message iff
/// every field matches; that identity is the flood deduplication key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    Wakeup,
    Request {
        rank: Rank,
    },
    Approved {
        candidate: Rank,
        referee: Rank,
    },
    Declined {
        candidate: Rank,
        referee: Rank,
    },
    /// Sent by a referee that backs `chosen` but has heard from the
    /// stronger `contender`.
    Dispute {
        chosen: Rank,
        contender: Rank,
    },
    Loses {
        rank: Rank,
    },
    Leader {
        rank: Rank,
    },
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Wakeup => 0,
            Message::Request { .. } => 1,
            Message::Approved { .. } => 2,
            Message::Declined { .. } => 3,
            Message::Dispute { .. } => 4,
            Message::Loses { .. } => 5,
            Message::Leader { .. } => 6,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Message::Wakeup => "wakeup",
            Message::Request { .. } => "request",
            Message::Approved { .. } => "approved",
            Message::Declined { .. } => "declined",
            Message::Dispute { .. } => "dispute",
            Message::Loses { .. } => "loses",
            Message::Leader { .. } => "leader",
        }
    }

    fn fields(&self) -> ([u64; 2], usize) {
        match *self {
            Message::Wakeup => ([0, 0], 0),
            Message::Request { rank } | Message::Loses { rank } | Message::Leader { rank } => {
                ([rank.0, 0], 1)
            }
            Message::Approved { candidate, referee } | Message::Declined { candidate, referee } => {
                ([candidate.0, referee.0], 2)
            }
            Message::Dispute { chosen, contender } => ([chosen.0, contender.0], 2),
        }
    }

    /// Canonical wire form: kind tag, then each rank field as big-endian u64.
    pub fn encode(&self, out: &mut Vec<u8>) {
        let (fields, count) = self.fields();
        out.push(self.tag());
        for f in &fields[..count] {
            out.extend_from_slice(&f.to_be_bytes());
        }
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17);
        self.encode(&mut out);
        out
    }

    /// Decodes one message from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Message, usize)> {
        let bad = |reason: &str| Error::Parse {
            line: 0,
            reason: reason.to_string(),
        };
        let (&tag, rest) = bytes.split_first().ok_or_else(|| bad("empty message"))?;
        let arity = match tag {
            0 => 0,
            1 | 5 | 6 => 1,
            2..=4 => 2,
            _ => return Err(bad(&format!("unknown message tag {tag}"))),
        };
        if rest.len() < arity * 8 {
            return Err(bad("truncated message"));
        }
        let field = |i: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&rest[i * 8..i * 8 + 8]);
            Rank(u64::from_be_bytes(b))
        };
        let msg = match tag {
            0 => Message::Wakeup,
            1 => Message::Request { rank: field(0) },
            2 => Message::Approved {
                candidate: field(0),
                referee: field(1),
            },
            3 => Message::Declined {
                candidate: field(0),
                referee: field(1),
            },
            4 => Message::Dispute {
                chosen: field(0),
                contender: field(1),
            },
            5 => Message::Loses { rank: field(0) },
            _ => Message::Leader { rank: field(0) },
        };
        Ok((msg, 1 + arity * 8))
    }

    pub fn to_hex(&self) -> String {
        self.to_wire().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Message> {
        let bad = || Error::Parse {
            line: 0,
            reason: format!("bad hex payload {s:?}"),
        };
        if !s.len().is_multiple_of(2) {
            return Err(bad());
        }
        let bytes = (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let (msg, used) = Message::decode(&bytes)?;
        if used != bytes.len() {
            return Err(bad());
        }
        Ok(msg)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (fields, count) = self.fields();
        write!(f, "<")?;
        for v in &fields[..count] {
            write!(f, "{v}, ")?;
        }
        write!(f, "{}>", self.kind_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn any_message() -> impl Strategy<Value = Message> {
        (0u8..7, any::<u64>(), any::<u64>()).prop_map(|(t, a, b)| {
            let (a, b) = (Rank(a), Rank(b));
            match t {
                0 => Message::Wakeup,
                1 => Message::Request { rank: a },
                2 => Message::Approved {
                    candidate: a,
                    referee: b,
                },
                3 => Message::Declined {
                    candidate: a,
                    referee: b,
                },
                4 => Message::Dispute {
                    chosen: a,
                    contender: b,
                },
                5 => Message::Loses { rank: a },
                _ => Message::Leader { rank: a },
            }
        })
    }

    proptest! {
        #[test]
        fn wire_round_trip(m in any_message()) {
            let wire = m.to_wire();
            prop_assert!(wire.len() <= 17);
            prop_assert_eq!(Message::decode(&wire).unwrap(), (m, wire.len()));
            prop_assert_eq!(Message::from_hex(&m.to_hex()).unwrap(), m);
        }
    }

    #[test]
    fn known_encodings() {
        assert_eq!(Message::Wakeup.to_hex(), "00");
        assert_eq!(
            Message::Request { rank: Rank(5) }.to_hex(),
            "010000000000000005"
        );
        let d = Message::Dispute {
            chosen: Rank(1),
            contender: Rank(2),
        };
        assert_eq!(d.to_wire()[0], 4);
        assert_eq!(d.to_wire().len(), 17);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Message::decode(&[]).is_err());
        assert!(Message::decode(&[9]).is_err());
        assert!(Message::decode(&[1, 0, 0]).is_err());
        assert!(Message::from_hex("0").is_err());
        assert!(Message::from_hex("0000").is_err());
    }
}
