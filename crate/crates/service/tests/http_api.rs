use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use chrono::{Duration, TimeZone, Utc};
use gridauth_core::accounts::LockoutPolicy;
use gridauth_core::grid::GridLayout;
use gridauth_core::key::{encode_ssr, KeyNumber};
use gridauth_core::MockClock;
use gridauth_service::{in_memory_service, router, AuthService, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Api {
    app: Router,
    clock: MockClock,
    service: Arc<AuthService>,
}

impl Api {
    fn new() -> Self {
        let clock = MockClock::new(Utc.with_ymd_and_hms(2024, 3, 16, 9, 0, 0).unwrap());
        let service = in_memory_service(LockoutPolicy::default(), ServiceConfig::default(), &clock, 42);
        Self { app: router(service.clone()), clock, service }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, Option<String>) {
        let builder = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(v) => {
                builder.header(header::CONTENT_TYPE, "application/json").body(Body::from(v.to_string())).unwrap()
            }
            None => builder.body(Body::empty()).unwrap(),
        };
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let retry = res.headers().get(header::RETRY_AFTER).map(|v| v.to_str().unwrap().to_owned());
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value, retry)
    }

    async fn register(&self, name: &str) -> KeyNumber {
        let (status, body, _) = self.call("POST", "/api/v1/register", Some(json!({"username": name}))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["key"].as_str().unwrap().parse().unwrap()
    }

    async fn session(&self, name: &str) -> (String, GridLayout) {
        let (status, body, _) = self.call("POST", "/api/v1/sessions", Some(json!({"username": name}))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        (body["session_id"].as_str().unwrap().to_owned(), serde_json::from_value(body["layout"].clone()).unwrap())
    }

    async fn click(&self, id: &str, row: usize, col: usize) -> (StatusCode, Value) {
        let (s, b, _) =
            self.call("POST", &format!("/api/v1/sessions/{id}/clicks"), Some(json!({"row": row, "col": col}))).await;
        (s, b)
    }

    /// Enters `key`, optionally replacing one position with a garbage click.
    async fn login(&self, name: &str, key: KeyNumber, garbage_at: Option<usize>) -> Vec<(StatusCode, Value)> {
        let (id, mut layout) = self.session(name).await;
        let mut replies = Vec::new();
        for (i, d) in key.digits().into_iter().enumerate() {
            let cell = if garbage_at == Some(i) { layout.garbage_cells()[0] } else { layout.cells_for_digit(d)[0] };
            let (status, body) = self.click(&id, cell.row, cell.col).await;
            if let Some(l) = body.get("layout").filter(|l| !l.is_null()) {
                layout = serde_json::from_value(l.clone()).unwrap();
            }
            replies.push((status, body));
        }
        replies
    }
}

fn other_key(key: KeyNumber) -> KeyNumber {
    let d = key.digits();
    KeyNumber::from_digits([(d[0] + 5) % 10, d[1], d[2], d[3]]).unwrap()
}

fn shape(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[tokio::test]
async fn register_contract() {
    let api = Api::new();
    let (status, body, _) = api.call("POST", "/api/v1/register", Some(json!({"username": "alice1"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let key = body["key"].as_str().unwrap();
    assert_eq!(key.len(), 4);
    assert!(key.bytes().all(|b| b.is_ascii_digit()));
    assert_eq!(shape(&body), ["key".to_owned()].into());

    let (status, body, _) = api.call("POST", "/api/v1/register", Some(json!({"username": "alice1"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].is_string());

    let (status, _, _) = api.call("POST", "/api/v1/register", Some(json!({"username": "a b"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = api.call("POST", "/api/v1/register", Some(json!({"name": "alice2"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn session_layout_shape() {
    let api = Api::new();
    api.register("alice1").await;
    let (status, body, _) = api.call("POST", "/api/v1/sessions", Some(json!({"username": "alice1"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let header: Vec<u64> = serde_json::from_value(body["layout"]["header"].clone()).unwrap();
    assert_eq!(header.len(), 10);
    assert_eq!(header.iter().collect::<BTreeSet<_>>().len(), 10);
    let cells: Vec<Vec<u64>> = serde_json::from_value(body["layout"]["cells"].clone()).unwrap();
    assert_eq!(cells.len(), 10);
    assert!(cells.iter().all(|r| r.len() == 10));
    assert_eq!(cells[0], header);
    assert_eq!(body["session_id"].as_str().unwrap().len(), 32);
}

#[tokio::test]
async fn happy_path_raw_and_shifted_key() {
    let api = Api::new();
    let key = api.register("alice1").await;

    let replies = api.login("alice1", key, None).await;
    for (i, (status, body)) in replies.iter().enumerate() {
        assert_eq!(*status, StatusCode::OK);
        assert_eq!(body["entered"], json!(i + 1));
        if i < 3 {
            assert_eq!(body["status"], "in_progress");
            assert!(body["layout"].is_object());
        }
    }
    assert_eq!(replies[3].1, json!({"entered": 4, "status": "succeeded", "layout": null}));

    let today = api.service.config().calendar.day_of(api.service.now());
    let replies = api.login("alice1", encode_ssr(key, today), None).await;
    assert_eq!(replies[3].1["status"], "succeeded");
}

#[tokio::test]
async fn garbage_click_fails_and_counts() {
    let api = Api::new();
    let key = api.register("bob22").await;
    for pos in 0..4 {
        let replies = api.login("bob22", key, Some(pos)).await;
        assert_eq!(replies[3].1["status"], "failed");
        assert_eq!(replies[3].1["entered"], 4);
        for (_, body) in &replies[..3] {
            assert_eq!(body["status"], "in_progress");
        }
    }
    let store = api.service.store();
    let rec = store.lookup(&"bob22".parse().unwrap()).unwrap();
    assert_eq!(rec.failed_attempts, 4);
}

#[tokio::test]
async fn session_status_endpoint() {
    let api = Api::new();
    let key = api.register("carol").await;
    let (id, layout) = api.session("carol").await;
    let c = layout.cells_for_digit(key.digits()[0])[0];
    let (_, body) = api.click(&id, c.row, c.col).await;
    let layout: GridLayout = serde_json::from_value(body["layout"].clone()).unwrap();
    let c = layout.cells_for_digit(key.digits()[1])[0];
    api.click(&id, c.row, c.col).await;

    let (status, body, _) = api.call("GET", &format!("/api/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "in_progress", "entered": 2}));

    api.clock.advance(Duration::seconds(121));
    let (_, body, _) = api.call("GET", &format!("/api/v1/sessions/{id}"), None).await;
    assert_eq!(body["status"], "expired");
    let (status, body) = api.click(&id, 1, 1).await;
    assert_eq!(status, StatusCode::GONE);
    assert!(body["error"].is_string());

    let (status, _, _) = api.call("GET", "/api/v1/sessions/doesnotexist", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = api.click("doesnotexist", 1, 1).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn finished_session_rejects_clicks_and_bad_coordinates() {
    let api = Api::new();
    let key = api.register("dave1").await;
    let (id, _) = api.session("dave1").await;
    let (status, body) = api.click(&id, 0, 4).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let (status, _, _) =
        api.call("POST", &format!("/api/v1/sessions/{id}/clicks"), Some(json!({"row": -1, "col": 2}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = api.click(&id, 10, 2).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, body, _) = api.call("GET", &format!("/api/v1/sessions/{id}"), None).await;
    assert_eq!(body["entered"], 0);

    let replies = api.login("dave1", key, None).await;
    assert_eq!(replies[3].1["status"], "succeeded");
    let (_, view, _) = api.call("GET", "/api/v1/sessions/x", None).await;
    assert!(view["error"].is_string());

    let (id, mut layout) = api.session("dave1").await;
    for d in key.digits() {
        let c = layout.cells_for_digit(d)[0];
        let (_, body) = api.click(&id, c.row, c.col).await;
        if !body["layout"].is_null() {
            layout = serde_json::from_value(body["layout"].clone()).unwrap();
        }
    }
    let (status, _) = api.click(&id, 1, 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, body, _) = api.call("GET", &format!("/api/v1/sessions/{id}"), None).await;
    assert_eq!(body, json!({"status": "succeeded", "entered": 4}));
}

#[tokio::test]
async fn lockout_over_http() {
    let api = Api::new();
    let key = api.register("erin1").await;
    for _ in 0..5 {
        let replies = api.login("erin1", other_key(key), None).await;
        assert_eq!(replies[3].1["status"], "failed");
    }
    let (status, body, retry) = api.call("POST", "/api/v1/sessions", Some(json!({"username": "erin1"}))).await;
    assert_eq!(status, StatusCode::LOCKED);
    let secs = body["retry_after_seconds"].as_u64().unwrap();
    assert!(secs > 0 && secs <= 1800);
    assert_eq!(retry.unwrap(), secs.to_string());

    api.clock.advance(Duration::minutes(30));
    let replies = api.login("erin1", key, None).await;
    assert_eq!(replies[3].1["status"], "succeeded");
}

#[tokio::test]
async fn unknown_user_is_indistinguishable_from_wrong_key() {
    let api = Api::new();
    let key = api.register("frank").await;
    let real = api.login("frank", other_key(key), None).await;
    let decoy = api.login("nosuchuser", other_key(key), None).await;
    assert_eq!(real.len(), decoy.len());
    for ((rs, rb), (ds, db)) in real.iter().zip(&decoy) {
        assert_eq!(rs, ds);
        assert_eq!(shape(rb), shape(db));
        assert_eq!(rb["status"], db["status"]);
        assert_eq!(rb["entered"], db["entered"]);
    }
    // Even the right key for some other account fails on a decoy session.
    let decoy = api.login("nosuchuser", key, None).await;
    assert_eq!(decoy[3].1["status"], "failed");
}

#[tokio::test]
async fn every_layout_on_the_wire_is_valid() {
    let api = Api::new();
    let key = api.register("grace").await;
    let (id, first) = api.session("grace").await;
    let mut layouts = vec![first];
    for d in key.digits().into_iter().take(3) {
        let c = layouts.last().unwrap().cells_for_digit(d)[0];
        let (_, body) = api.click(&id, c.row, c.col).await;
        // Deserialising re-checks every composition rule.
        layouts.push(serde_json::from_value(body["layout"].clone()).unwrap());
    }
    for pair in layouts.windows(2) {
        assert_ne!(pair[0], pair[1]);
    }
}
