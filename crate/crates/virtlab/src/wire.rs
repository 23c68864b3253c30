//! Length-prefixed JSON frames.
//!
//! A frame is a big-endian `u32` byte length followed by that many bytes of
//! UTF-8 JSON. Requests carry an `"op"` tag (`"sweep"` or `"sequence"`);
//! replies carry `"ok": true` plus the response fields, or
//! `"ok": false, "code", "message"`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::{LabError, SequenceRequest, SequenceResponse, SweepRequest, SweepResponse};

pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("frame truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("frame payload is not a UTF-8 JSON object: {0}")]
    Payload(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Sweep(SweepRequest),
    Sequence(SequenceRequest),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Sweep(SweepResponse),
    Sequence(SequenceResponse),
    Error { code: String, message: String },
}

impl Reply {
    pub fn error(err: &LabError) -> Self {
        let message = match err {
            LabError::BadRequest(m) | LabError::Transport(m) => m.clone(),
            LabError::Remote { message, .. } => message.clone(),
        };
        Reply::Error {
            code: err.code().to_string(),
            message,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = match self {
            Reply::Sweep(r) => to_object(r),
            Reply::Sequence(r) => to_object(r),
            Reply::Error { code, message } => {
                let mut m = Map::new();
                m.insert("code".into(), Value::from(code.as_str()));
                m.insert("message".into(), Value::from(message.as_str()));
                m
            }
        };
        obj.insert("ok".into(), Value::Bool(!matches!(self, Reply::Error { .. })));
        Value::Object(obj)
    }

    pub fn from_json(v: Value) -> Result<Self, LabError> {
        let bad = |m: String| LabError::Transport(format!("malformed reply: {m}"));
        let Value::Object(mut obj) = v else {
            return Err(bad("not an object".into()));
        };
        match obj.remove("ok") {
            Some(Value::Bool(true)) => {
                let v = Value::Object(obj);
                if v.get("bits").is_some() {
                    serde_json::from_value(v).map(Reply::Sequence).map_err(|e| bad(e.to_string()))
                } else {
                    serde_json::from_value(v).map(Reply::Sweep).map_err(|e| bad(e.to_string()))
                }
            }
            Some(Value::Bool(false)) => {
                let field = |k: &str| obj.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
                Ok(Reply::Error {
                    code: field("code"),
                    message: field("message"),
                })
            }
            _ => Err(bad("missing ok flag".into())),
        }
    }
}

fn to_object<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("response types serialize to objects"),
    }
}

pub fn encode_frame(payload: &Value) -> Vec<u8> {
    let body = serde_json::to_vec(payload).expect("JSON values always serialize");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decode one frame from the front of `bytes`; returns the payload and the
/// number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Value, usize), FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::Truncated {
            needed: 4,
            have: bytes.len(),
        });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let end = 4 + len;
    if bytes.len() < end {
        return Err(FrameError::Truncated {
            needed: end,
            have: bytes.len(),
        });
    }
    Ok((parse_payload(&bytes[4..end])?, end))
}

pub fn parse_payload(body: &[u8]) -> Result<Value, FrameError> {
    let text = std::str::from_utf8(body).map_err(|e| FrameError::Payload(e.to_string()))?;
    match serde_json::from_str::<Value>(text) {
        Ok(v @ Value::Object(_)) => Ok(v),
        Ok(_) => Err(FrameError::Payload("top-level value is not an object".into())),
        Err(e) => Err(FrameError::Payload(e.to_string())),
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &Value) -> io::Result<()> {
    w.write_all(&encode_frame(payload))?;
    w.flush()
}

/// Read one raw frame body. `Ok(None)` on clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len_buf) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            FrameError::TooLarge(len),
        ));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_tags() {
        let req = Request::Sequence(SequenceRequest {
            pi_flags: vec![true, false],
            shots: 3,
            power: None,
            seed: 7,
        });
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(v["op"], "sequence");
        assert_eq!(serde_json::from_value::<Request>(v).unwrap(), req);
    }

    #[test]
    fn error_reply_shape() {
        let v = Reply::error(&LabError::BadRequest("nope".into())).to_json();
        assert_eq!(v, serde_json::json!({"ok": false, "code": "bad_request", "message": "nope"}));
        assert!(matches!(Reply::from_json(v).unwrap(), Reply::Error { code, .. } if code == "bad_request"));
    }

    #[test]
    fn truncated_and_oversized_frames() {
        assert!(matches!(decode_frame(&[0, 0]), Err(FrameError::Truncated { .. })));
        assert!(matches!(decode_frame(&[0, 0, 0, 5, b'{']), Err(FrameError::Truncated { .. })));
        assert!(matches!(decode_frame(&[0xff, 0xff, 0xff, 0xff]), Err(FrameError::TooLarge(_))));
        assert!(matches!(decode_frame(&[0, 0, 0, 1, b'7']), Err(FrameError::Payload(_))));
    }
}
