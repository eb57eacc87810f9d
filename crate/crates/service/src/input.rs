//! Request body decoding: raw uploads, JSON and multipart forms.

use axum::body::{Body, Bytes};
use axum::extract::{FromRequest, Multipart, Request};
use axum::http::{header, HeaderMap, StatusCode};
use serde::Deserialize;
use utalk_core::codec::decode_wav;
use utalk_core::orchestrator::Utterance;

use crate::error::ApiError;

pub const MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;

fn content_type(headers: &HeaderMap) -> String {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

pub async fn read_body(body: Body) -> Result<Bytes, ApiError> {
    axum::body::to_bytes(body, MAX_UPLOAD_BYTES).await.map_err(|_| {
        ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("request body exceeds {MAX_UPLOAD_BYTES} bytes"),
        )
    })
}

/// Form fields as `(name, is_file, bytes)`.
async fn multipart_fields(headers: &HeaderMap, bytes: Bytes) -> Result<Vec<(String, bool, Bytes)>, ApiError> {
    let mut req = Request::new(Body::from(bytes));
    if let Some(ct) = headers.get(header::CONTENT_TYPE) {
        req.headers_mut().insert(header::CONTENT_TYPE, ct.clone());
    }
    let bad = |e: String| ApiError::bad_request("format_error", format!("malformed multipart body: {e}"));
    let mut form = Multipart::from_request(req, &()).await.map_err(|e| bad(e.body_text()))?;
    let mut fields = Vec::new();
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.body_text()))? {
        let name = field.name().unwrap_or("").to_owned();
        let is_file = field.file_name().is_some();
        let data = field.bytes().await.map_err(|e| bad(e.body_text()))?;
        fields.push((name, is_file, data));
    }
    Ok(fields)
}

fn unsupported(ct: &str) -> ApiError {
    ApiError::new(
        StatusCode::UNSUPPORTED_MEDIA_TYPE,
        "unsupported_media_type",
        format!("unsupported content type {ct:?}"),
    )
}

/// Avatar image bytes from a raw body or the `image` (or first file) field.
pub async fn image_upload(headers: &HeaderMap, body: Body) -> Result<Bytes, ApiError> {
    let ct = content_type(headers);
    let bytes = read_body(body).await?;
    if ct == "multipart/form-data" {
        let mut fields = multipart_fields(headers, bytes).await?;
        let pos = fields
            .iter()
            .position(|(n, _, _)| n == "image")
            .or_else(|| fields.iter().position(|(_, f, _)| *f))
            .ok_or_else(|| ApiError::bad_request("image_decode", "form has no image field"))?;
        return Ok(fields.swap_remove(pos).2);
    }
    Ok(bytes)
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

fn audio(bytes: &[u8]) -> Result<Utterance, ApiError> {
    Ok(Utterance::Audio(decode_wav(bytes)?))
}

/// A text or audio utterance from JSON `{"text"}`, a WAV body, or a form
/// with a `text` or `audio` field.
pub async fn utterance(headers: &HeaderMap, body: Body) -> Result<Utterance, ApiError> {
    let ct = content_type(headers);
    let bytes = read_body(body).await?;
    match ct.as_str() {
        "application/json" => {
            let t: TextBody = serde_json::from_slice(&bytes)
                .map_err(|e| ApiError::bad_request("format_error", format!("expected {{\"text\": ...}}: {e}")))?;
            Ok(Utterance::Text(t.text))
        }
        "text/plain" => {
            let t = String::from_utf8(bytes.to_vec())
                .map_err(|_| ApiError::bad_request("format_error", "text body is not UTF-8"))?;
            Ok(Utterance::Text(t))
        }
        "audio/wav" | "audio/x-wav" | "audio/wave" | "audio/vnd.wave" | "application/octet-stream" => audio(&bytes),
        "multipart/form-data" => {
            let fields = multipart_fields(headers, bytes).await?;
            if let Some((_, _, data)) = fields.iter().find(|(n, _, _)| n == "audio") {
                return audio(data);
            }
            if let Some((_, _, data)) = fields.iter().find(|(n, _, _)| n == "text") {
                let t = std::str::from_utf8(data)
                    .map_err(|_| ApiError::bad_request("format_error", "text field is not UTF-8"))?;
                return Ok(Utterance::Text(t.to_owned()));
            }
            Err(ApiError::bad_request("format_error", "form needs a text or audio field"))
        }
        other => Err(unsupported(other)),
    }
}
