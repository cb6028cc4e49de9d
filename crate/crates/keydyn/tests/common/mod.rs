#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use keydyn::service::{router, AppState, ServiceConfig};
use keydyn_core::sample::{to_record, KeystrokeSample};
use keydyn_core::synth::{generate_cohort, Cohort, SynthConfig};

pub struct Client {
    pub app: Router,
    pub state: Arc<AppState>,
}

impl Client {
    pub fn new(config: ServiceConfig) -> Self {
        let state = AppState::new(config).unwrap();
        Self {
            app: router(state.clone()),
            state,
        }
    }

    pub async fn send(&self, method: &str, uri: &str, body: String) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(Body::from(body))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    pub async fn post(&self, uri: &str, body: String) -> (StatusCode, Value) {
        let (status, bytes) = self.send("POST", uri, body).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    pub async fn enroll(&self, user: &str, sample: &KeystrokeSample) -> (StatusCode, Value) {
        self.post(&format!("/api/v1/users/{user}/samples"), to_record(sample)).await
    }

    pub async fn authenticate(&self, user: &str, sample: &KeystrokeSample) -> (StatusCode, Value) {
        self.post(&format!("/api/v1/users/{user}/authenticate"), to_record(sample)).await
    }

    pub async fn train(&self, user: &str, params: Value) -> (StatusCode, Value) {
        self.post(&format!("/api/v1/users/{user}/train"), params.to_string()).await
    }
}

pub fn cohort(users: usize, per_session: usize, separation: f64, seed: u64) -> Cohort {
    generate_cohort(&SynthConfig {
        users,
        sessions: 2,
        per_session,
        imposters_per_user: 100,
        separation,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}
