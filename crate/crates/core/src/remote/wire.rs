//! Framed wire protocol: a 4-byte big-endian payload length followed by a UTF-8 JSON
//! record `{"request_id", "kind", "graph_handle", "body"}` (fields in that order).

use std::io::{self, Read, Write};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Largest payload accepted from a peer.
pub const MAX_FRAME: usize = 1 << 30;

pub const KIND_OK: &str = "ok";
pub const KIND_ERROR: &str = "error";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub request_id: u64,
    pub kind: String,
    pub graph_handle: Option<u64>,
    pub body: Value,
}

impl WireMessage {
    pub fn request(request_id: u64, kind: &str, graph_handle: Option<u64>, body: Value) -> Self {
        Self {
            request_id,
            kind: kind.to_string(),
            graph_handle,
            body,
        }
    }

    pub fn is_response(&self) -> bool {
        self.kind == KIND_OK || self.kind == KIND_ERROR
    }

    pub fn payload(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("wire messages always serialize")
    }

    pub fn from_payload(bytes: &[u8]) -> io::Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// Length prefix plus payload.
pub fn encode_frame(payload: &[u8]) -> Vec<u8> {
    let mut frame = Vec::with_capacity(payload.len() + 4);
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(payload);
    frame
}

/// Splits a complete frame into its payload.
pub fn decode_frame(frame: &[u8]) -> io::Result<&[u8]> {
    if frame.len() < 4 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "short frame"));
    }
    let len = u32::from_be_bytes([frame[0], frame[1], frame[2], frame[3]]) as usize;
    if frame.len() != len + 4 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame length mismatch"));
    }
    Ok(&frame[4..])
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    w.write_all(&encode_frame(payload))?;
    w.flush()
}

pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes"),
        ));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(payload)
}

/// Frame log shared by every connection of a cluster: one line per frame,
/// `<8 hex digit length> <payload>`.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    lines: Arc<Mutex<Vec<String>>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, payload: &[u8]) {
        let line = format!("{:08x} {}", payload.len(), String::from_utf8_lossy(payload));
        self.lines.lock().expect("transcript lock").push(line);
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().expect("transcript lock").clone()
    }

    pub fn clear(&self) {
        self.lines.lock().expect("transcript lock").clear();
    }

    pub fn to_text(&self) -> String {
        let mut s = self.lines().join("\n");
        s.push('\n');
        s
    }

    pub fn request_count(&self) -> usize {
        parse_lines(&self.lines())
            .map(|m| m.iter().filter(|m| !m.is_response()).count())
            .unwrap_or(0)
    }
}

/// Parses transcript lines back into messages, checking each length prefix.
pub fn parse_lines<S: AsRef<str>>(lines: &[S]) -> Result<Vec<WireMessage>, String> {
    lines
        .iter()
        .filter(|l| !l.as_ref().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let line = line.as_ref();
            let (len, payload) = line.split_once(' ').ok_or(format!("line {i}: missing separator"))?;
            let len = usize::from_str_radix(len, 16).map_err(|e| format!("line {i}: {e}"))?;
            if len != payload.len() {
                return Err(format!(
                    "line {i}: length {len} but payload has {} bytes",
                    payload.len()
                ));
            }
            WireMessage::from_payload(payload.as_bytes()).map_err(|e| format!("line {i}: {e}"))
        })
        .collect()
}

/// Every request has exactly one response with the same id, and no response comes
/// before its request.
pub fn check_pairing(messages: &[WireMessage]) -> Result<(), String> {
    use std::collections::HashMap;
    let mut open: HashMap<u64, usize> = HashMap::new();
    let mut answered = std::collections::HashSet::new();
    for (i, m) in messages.iter().enumerate() {
        if m.is_response() {
            if open.remove(&m.request_id).is_none() {
                return Err(format!("frame {i}: response {} without an open request", m.request_id));
            }
            answered.insert(m.request_id);
        } else if open.insert(m.request_id, i).is_some() || answered.contains(&m.request_id) {
            return Err(format!("frame {i}: request id {} reused", m.request_id));
        }
    }
    match open.keys().next() {
        Some(id) => Err(format!("request {id} has no response")),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn field_order_is_fixed() {
        let m = WireMessage::request(7, "ping", None, json!({"b": 1, "a": 2}));
        let text = String::from_utf8(m.payload()).unwrap();
        assert_eq!(
            text,
            r#"{"request_id":7,"kind":"ping","graph_handle":null,"body":{"a":2,"b":1}}"#
        );
    }

    #[test]
    fn frame_roundtrip() {
        let m = WireMessage::request(1, "x", Some(3), json!({}));
        let frame = encode_frame(&m.payload());
        assert_eq!(&frame[..4], &(frame.len() as u32 - 4).to_be_bytes());
        let mut cursor = std::io::Cursor::new(frame.clone());
        let payload = read_frame(&mut cursor).unwrap();
        assert_eq!(WireMessage::from_payload(&payload).unwrap(), m);
        assert_eq!(decode_frame(&frame).unwrap(), &payload[..]);
    }

    #[test]
    fn pairing() {
        let req = WireMessage::request(1, "ping", None, json!({}));
        let resp = WireMessage::request(1, KIND_OK, None, json!({}));
        assert!(check_pairing(&[req.clone(), resp.clone()]).is_ok());
        assert!(check_pairing(&[resp.clone(), req.clone()]).is_err());
        assert!(check_pairing(std::slice::from_ref(&req)).is_err());
        let t = Transcript::new();
        t.record(&req.payload());
        t.record(&resp.payload());
        let parsed = parse_lines(&t.lines()).unwrap();
        assert_eq!(parsed, vec![req, resp]);
        assert_eq!(t.request_count(), 1);
    }
}
