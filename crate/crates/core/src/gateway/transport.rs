//! OpenAI-style `POST {base_url}/chat/completions` client.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EndpointProfile, GatewayError, RawReply, Transport};

pub(crate) struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub(crate) fn new(profile: &EndpointProfile) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(profile.timeout_secs))
            .build()
            .map_err(|e| GatewayError::InvalidProfile(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: usize,
    completion_tokens: usize,
}

fn endpoint_url(base: &str) -> String {
    format!("{}/chat/completions", base.trim_end_matches('/'))
}

impl Transport for HttpTransport {
    fn send(&self, profile: &EndpointProfile, prompt: &str) -> Result<RawReply, GatewayError> {
        let token = profile.credential()?;
        let body = json!({
            "model": profile.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": profile.max_tokens,
            "temperature": profile.temperature,
        });
        let mut req = self.client.post(endpoint_url(&profile.base_url)).json(&body);
        if let Some(token) = token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::EndpointUnavailable(e.to_string())
            }
        })?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(GatewayError::AuthFailure(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(GatewayError::EndpointUnavailable(format!("HTTP {status}")));
        }
        let parsed: CompletionBody = resp.json().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::EndpointUnavailable(format!("bad response body: {e}"))
            }
        })?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::EndpointUnavailable("response has no choices".into()))?;
        Ok(RawReply {
            text,
            usage: parsed.usage.map(|u| (u.prompt_tokens, u.completion_tokens)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatModel, Gateway};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serves one canned HTTP response per entry, returning each raw request.
    fn stub_server(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (code, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                head.push_str(&String::from_utf8_lossy(&buf));
                tx.send(head).unwrap();
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (format!("http://{addr}/v1"), rx)
    }

    #[test]
    fn round_trip_against_stub() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Yes"}}],"usage":{"prompt_tokens":11,"completion_tokens":1}}"#;
        let (base, rx) = stub_server(vec![(200, body.into())]);
        let mut profile = EndpointProfile::http(base, "judge-model");
        profile.auth_env = Some("PATH".into());
        let gw = Gateway::new(profile).unwrap();
        let ex = gw.complete("Are these the same?").unwrap();
        assert_eq!(ex.response_text, "Yes");
        assert_eq!(ex.token_usage.unwrap().prompt, 11);
        assert!(ex.token_usage.unwrap().reported);
        let req = rx.recv().unwrap();
        assert!(req.starts_with("POST /v1/chat/completions"));
        assert!(req.contains("\"model\":\"judge-model\""));
        assert!(req.to_ascii_lowercase().contains("authorization: bearer"));
        assert_eq!(gw.exchanges().len(), 1);
    }

    #[test]
    fn auth_rejection_and_retryable_errors() {
        let ok = r#"{"choices":[{"message":{"content":"No"}}]}"#;
        let (base, _rx) = stub_server(vec![
            (503, "{}".into()),
            (200, ok.into()),
            (401, "{}".into()),
        ]);
        let mut profile = EndpointProfile::http(base, "m");
        profile.backoff_ms = 1;
        let gw = Gateway::new(profile).unwrap();
        let ex = gw.complete("x").unwrap();
        assert_eq!(ex.response_text, "No");
        assert!(!ex.token_usage.unwrap().reported);
        assert!(matches!(gw.complete("x"), Err(GatewayError::AuthFailure(_))));
    }

    #[test]
    fn unset_credential_fails_before_connecting() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        listener.set_nonblocking(true).unwrap();
        let mut profile = EndpointProfile::http(format!("http://{addr}"), "m");
        profile.auth_env = Some("SCRIBE_FORGE_TEST_UNSET_VAR_5678".into());
        let gw = Gateway::new(profile).unwrap();
        assert!(matches!(gw.complete("x"), Err(GatewayError::AuthFailure(_))));
        assert!(listener.accept().is_err());
    }
}
