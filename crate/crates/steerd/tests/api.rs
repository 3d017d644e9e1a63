use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thornlet::ccl::parse_parameter_file;
use thornlet::runtime::{RunOptions, RunOutcome, Simulation};
use thornlet::thorns::{load_thorns, registry};
use thornlet_steerd::{serve, Server, SteerHandle};

const PAR: &str = "ActiveThorns = \"slabdriver advect1d nanchecker star\"\n\
                   slabdriver::nx = 51\nslabdriver::max_iterations = 6\n\
                   nanchecker::check_vars = \"advect::flux\"\n";

fn request(
    addr: SocketAddr,
    method: &str,
    path: &str,
    body: Option<Value>,
    token: Option<&str>,
) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(20)))
        .unwrap();
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let auth = token
        .map(|t| format!("Authorization: Bearer {t}\r\n"))
        .unwrap_or_default();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: test\r\nConnection: close\r\n{auth}Content-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let (head, payload) = raw.split_once("\r\n\r\n").unwrap();
    let payload = if head
        .to_ascii_lowercase()
        .contains("transfer-encoding: chunked")
    {
        dechunk(payload)
    } else {
        payload.to_string()
    };
    (
        status,
        serde_json::from_str(&payload).unwrap_or(Value::Null),
    )
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    while let Some((size, rest)) = s.split_once("\r\n") {
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        if n == 0 {
            break;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
    out
}

struct Live {
    server: Server,
    run: thread::JoinHandle<RunOutcome>,
}

fn start(token: Option<&str>) -> Live {
    let thorns = load_thorns().unwrap();
    let pf = parse_parameter_file(PAR).unwrap();
    let options = RunOptions {
        start_paused: true,
        provenance: false,
        ..RunOptions::default()
    };
    let mut sim = Simulation::new(&thorns, &pf, Arc::new(registry()), options).unwrap();
    let handle = SteerHandle::new(&sim)
        .with_token(token.map(String::from))
        .with_slice_timeout(Duration::from_secs(10));
    let server = serve(handle, "127.0.0.1:0").unwrap();
    let run = thread::spawn(move || sim.run());
    Live { server, run }
}

fn wait_until(addr: SocketAddr, what: impl Fn(&Value) -> bool) -> Value {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let (_, st) = request(addr, "GET", "/api/status", None, None);
        if what(&st) {
            return st;
        }
        assert!(Instant::now() < deadline, "timed out; last status {st}");
        thread::sleep(Duration::from_millis(5));
    }
}

fn waiting(st: &Value) -> bool {
    st["waiting"] == json!(true)
}

#[test]
fn introspection_and_steering() {
    let live = start(None);
    let addr = live.server.addr();
    let st = wait_until(addr, waiting);
    assert_eq!(st["state"], "paused");

    let (code, thorns) = request(addr, "GET", "/api/thorns", None, None);
    assert_eq!(code, 200);
    assert_eq!(thorns.as_array().unwrap().len(), 4);
    let (_, params) = request(
        addr,
        "GET",
        "/api/parameters?steerable=1&thorn=nanchecker",
        None,
        None,
    );
    assert!(params
        .as_array()
        .unwrap()
        .iter()
        .any(|p| p["name"] == "check_every"));
    let (_, vars) = request(addr, "GET", "/api/vars?thorn=advect1d", None, None);
    assert_eq!(vars.as_array().unwrap().len(), 2);
    let (code, sched) = request(addr, "GET", "/api/schedule", None, None);
    assert_eq!(code, 200);
    assert!(sched["listing"]
        .as_str()
        .unwrap()
        .contains("advect1d::advect_evolve"));

    let (code, body) = request(
        addr,
        "PUT",
        "/api/parameters/nanchecker/check_every",
        Some(json!({"value": 2})),
        None,
    );
    assert_eq!(code, 200, "{body}");
    assert_eq!(body["effective_at"], 1);
    let (code, body) = request(
        addr,
        "PUT",
        "/api/parameters/advect1d/velocity",
        Some(json!({"value": 2.0})),
        None,
    );
    assert_eq!(code, 403, "{body}");
    let (code, body) = request(
        addr,
        "PUT",
        "/api/parameters/star/central_density",
        Some(json!({"value": -1.0})),
        None,
    );
    assert_eq!(code, 400);
    assert!(body["error"]
        .as_str()
        .unwrap()
        .contains("The central density must be positive"));
    let (code, _) = request(
        addr,
        "PUT",
        "/api/parameters/star/nothing",
        Some(json!({"value": 1})),
        None,
    );
    assert_eq!(code, 404);
    let (code, _) = request(
        addr,
        "PUT",
        "/api/parameters/star/central_density",
        Some(json!({"nope": 1})),
        None,
    );
    assert_eq!(code, 400);
    let (_, steering) = request(addr, "GET", "/api/steering", None, None);
    assert_eq!(steering["pending"].as_array().unwrap().len(), 1);

    let (code, _) = request(addr, "GET", "/api/nowhere", None, None);
    assert_eq!(code, 404);
    let (code, _) = request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "jump"})),
        None,
    );
    assert_eq!(code, 400);

    let (code, body) = request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "resume"})),
        None,
    );
    assert_eq!((code, body["state"].as_str()), (200, Some("running")));
    assert_eq!(live.run.join().unwrap(), RunOutcome::Completed);
    let (_, steering) = request(addr, "GET", "/api/steering", None, None);
    assert_eq!(steering["history"][0]["iteration"], 1);
    let (_, st) = request(addr, "GET", "/api/status", None, None);
    assert_eq!(st["state"], "completed");
    let (code, _) = request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "pause"})),
        None,
    );
    assert_eq!(code, 409);
    let (code, _) = request(addr, "GET", "/api/vars/advect::phi/slice", None, None);
    assert_eq!(code, 503);
}

#[test]
fn stepping_and_slices() {
    let live = start(None);
    let addr = live.server.addr();
    let st = wait_until(addr, waiting);
    let base = st["trace_len"].as_u64().unwrap();

    let (code, _) = request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "step-iteration"})),
        None,
    );
    assert_eq!(code, 200);
    // The run stops again at the boundary before iteration 1.
    let st = wait_until(addr, |s| waiting(s) && s["trace_len"].as_u64() > Some(base));
    assert_eq!(st["iteration"], 0);
    let (code, _) = request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "step-item"})),
        None,
    );
    assert_eq!(code, 200);
    let after = wait_until(addr, |s| {
        waiting(s) && s["trace_len"].as_u64() > st["trace_len"].as_u64()
    });
    assert_eq!(
        after["trace_len"].as_u64().unwrap(),
        st["trace_len"].as_u64().unwrap() + 1
    );
    assert_eq!(after["iteration"], 1);

    let (code, slice) = request(
        addr,
        "GET",
        "/api/vars/advect::phi/slice?stride=5",
        None,
        None,
    );
    assert_eq!(code, 200, "{slice}");
    assert_eq!(slice["values"].as_array().unwrap().len(), 11);
    assert_eq!(slice["axes"][0]["coordinates"][1], 0.1);
    let (code, _) = request(addr, "GET", "/api/vars/advect::nothing/slice", None, None);
    assert_eq!(code, 404);
    let (code, _) = request(addr, "GET", "/api/vars/advect::phi/slice?i=3", None, None);
    assert_eq!(code, 400);
    let (code, _) = request(
        addr,
        "GET",
        "/api/vars/advect::phi/slice?timelevel=7",
        None,
        None,
    );
    assert_eq!(code, 400);

    let (code, _) = request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "terminate"})),
        None,
    );
    assert_eq!(code, 200);
    assert_eq!(live.run.join().unwrap(), RunOutcome::Terminated);
}

#[test]
fn warnings_are_paged() {
    let live = start(None);
    let addr = live.server.addr();
    wait_until(addr, waiting);
    request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "resume"})),
        None,
    );
    live.run.join().unwrap();
    let (code, page) = request(addr, "GET", "/api/warnings?since=0", None, None);
    assert_eq!(code, 200);
    let n = page["next"].as_u64().unwrap();
    let (_, rest) = request(addr, "GET", &format!("/api/warnings?since={n}"), None, None);
    assert_eq!(rest["warnings"].as_array().unwrap().len(), 0);
    let (code, _) = request(addr, "GET", "/api/warnings?since=x", None, None);
    assert_eq!(code, 400);
}

#[test]
fn bearer_token_is_enforced() {
    let live = start(Some("s3cret"));
    let addr = live.server.addr();
    let (code, _) = request(addr, "GET", "/api/status", None, None);
    assert_eq!(code, 401);
    let (code, _) = request(addr, "GET", "/api/status", None, Some("wrong"));
    assert_eq!(code, 401);
    let (code, _) = request(addr, "GET", "/api/status", None, Some("s3cret"));
    assert_eq!(code, 200);
    request(
        addr,
        "POST",
        "/api/control",
        Some(json!({"command": "terminate"})),
        Some("s3cret"),
    );
    live.run.join().unwrap();
}

#[test]
fn occupied_port_is_an_error() {
    let live = start(None);
    let thorns = load_thorns().unwrap();
    let pf = parse_parameter_file(PAR).unwrap();
    let sim = Simulation::new(
        &thorns,
        &pf,
        Arc::new(registry()),
        RunOptions {
            provenance: false,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(serve(SteerHandle::new(&sim), &live.server.addr().to_string()).is_err());
    request(
        live.server.addr(),
        "POST",
        "/api/control",
        Some(json!({"command": "terminate"})),
        None,
    );
    live.run.join().unwrap();
}
