//! `odyssey-wire/1` encoding. One JSON object per line in each direction.
//!
//! Response: `{"action": "CLICK", "args": {"pos1": {"x": 540, "y": 1200}},
//! "raw": "..."}`, or `{"error": "..."}` when the agent refuses a request.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::context::{AgentRequest, PROTOCOL};
use super::{Agent, AgentError, AgentResponse};
use crate::episode::{ActionArgs, ActionKind};

#[derive(Debug, Default, Serialize, Deserialize)]
struct ResponseDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    args: Option<ActionArgs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn encode_request(req: &AgentRequest) -> String {
    serde_json::to_string(req).expect("requests serialize")
}

/// Parses a request line, checking the protocol tag.
pub fn decode_request(line: &str) -> Result<AgentRequest, String> {
    let req: AgentRequest = serde_json::from_str(line).map_err(|e| format!("bad request: {e}"))?;
    if req.protocol != PROTOCOL {
        return Err(format!("unsupported protocol {:?}, expected {PROTOCOL}", req.protocol));
    }
    Ok(req)
}

pub fn encode_response(resp: &AgentResponse) -> String {
    let doc = ResponseDoc {
        action: Some(resp.action.kind().as_str().to_string()),
        args: ActionArgs::of(&resp.action),
        raw: resp.raw.clone(),
        error: None,
    };
    serde_json::to_string(&doc).expect("responses serialize")
}

pub fn encode_error(message: &str) -> String {
    let doc = ResponseDoc {
        error: Some(message.to_string()),
        ..ResponseDoc::default()
    };
    serde_json::to_string(&doc).expect("responses serialize")
}

/// Parses a response line. Anything that is not a well-formed action is
/// [`AgentError::Malformed`]; an `error` object is [`AgentError::Protocol`].
pub fn decode_response(line: &str) -> Result<AgentResponse, AgentError> {
    let malformed = |message: String| AgentError::Malformed {
        raw: line.trim_end().to_string(),
        message,
    };
    let doc: ResponseDoc = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    if let Some(error) = doc.error {
        return Err(AgentError::Protocol(error));
    }
    let name = doc.action.ok_or_else(|| malformed("missing action".into()))?;
    let kind = ActionKind::from_name(&name).ok_or_else(|| malformed(format!("unknown action kind {name:?}")))?;
    let action = ActionArgs::into_action(doc.args, kind, "args").map_err(|e| malformed(e.to_string()))?;
    Ok(AgentResponse { action, raw: doc.raw })
}

/// Serves `agent` over line-delimited streams until EOF. Bad requests and
/// agent refusals are answered with an error object; the loop keeps going.
pub fn serve_lines<R: BufRead, W: Write>(agent: &dyn Agent, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match decode_request(&line) {
            Ok(req) => match agent.act(&req) {
                Ok(resp) => encode_response(&resp),
                Err(e) => encode_error(&e.to_string()),
            },
            Err(e) => encode_error(&e),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{Action, Point};

    #[test]
    fn response_round_trip() {
        for action in [
            Action::Click { pos1: Point::new(540, 1200) },
            Action::Scroll {
                pos1: Point::new(1, 2),
                pos2: Point::new(3, 4),
            },
            Action::Type { text: "yoga \"mat\"".into() },
            Action::Recent,
        ] {
            let resp = AgentResponse {
                action: action.clone(),
                raw: Some("x".into()),
            };
            let line = encode_response(&resp);
            assert_eq!(decode_response(&line).unwrap(), resp);
        }
    }

    #[test]
    fn wire_shape() {
        let line = encode_response(&AgentResponse {
            action: Action::Click { pos1: Point::new(540, 1200) },
            raw: None,
        });
        assert_eq!(line, r#"{"action":"CLICK","args":{"pos1":{"x":540,"y":1200}}}"#);
    }

    #[test]
    fn bad_responses() {
        assert!(matches!(decode_response("not json"), Err(AgentError::Malformed { .. })));
        assert!(matches!(decode_response(r#"{"action":"FLY"}"#), Err(AgentError::Malformed { .. })));
        assert!(matches!(decode_response(r#"{"action":"CLICK"}"#), Err(AgentError::Malformed { .. })));
        assert!(matches!(
            decode_response(r#"{"action":"HOME","args":{"text":"x"}}"#),
            Err(AgentError::Malformed { .. })
        ));
        assert!(matches!(decode_response(r#"{"error":"no"}"#), Err(AgentError::Protocol(_))));
    }
}
