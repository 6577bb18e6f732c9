use std::net::SocketAddr;

use axum::extract::{ConnectInfo, FromRequestParts};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use teval_core::model::ClientIp;
use teval_core::wire::ErrorCode;

use crate::error::ApiError;
use crate::AppState;

pub const FORWARDED_FOR: &str = "x-forwarded-for";

/// The respondent's address: the transport peer, or the first
/// `X-Forwarded-For` entry when the proxy header is trusted.
pub struct ClientAddr(pub ClientIp);

impl FromRequestParts<AppState> for ClientAddr {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        if state.trust_proxy_header {
            if let Some(value) = parts.headers.get(FORWARDED_FOR) {
                let first = value.to_str().ok().and_then(|v| v.split(',').next()).unwrap_or_default().trim().to_owned();
                return ClientIp::parse(&first)
                    .map(ClientAddr)
                    .map_err(|e| ApiError::new(ErrorCode::InvalidAddress, e.to_string()));
            }
        }
        parts
            .extensions
            .get::<ConnectInfo<SocketAddr>>()
            .map(|ConnectInfo(addr)| ClientAddr(ClientIp::from(addr.ip())))
            .ok_or_else(|| ApiError::new(ErrorCode::InvalidAddress, "peer address unavailable"))
    }
}

/// Bearer token from the `Authorization` header. Validity is checked by the
/// admin service.
pub struct AdminAuth(pub String);

impl<S: Send + Sync> FromRequestParts<S> for AdminAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(|t| AdminAuth(t.trim().to_owned()))
            .ok_or_else(|| ApiError::new(ErrorCode::Unauthorized, "missing bearer token"))
    }
}
