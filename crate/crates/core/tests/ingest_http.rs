use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use distelect_core::ingest::replay::ReplayServer;
use distelect_core::ingest::{
    build_prompt, fetch_race, fetch_token_distribution, tokens_to_shares, CellKey, CellSource, CellStore,
    EndpointConfig, IngestError, LiveSource,
};
use distelect_core::{win_probability, CellMeta, ShareDistribution};

fn meta(state: &str, candidate: &str, opponent: &str) -> CellMeta {
    CellMeta {
        state: state.into(),
        candidate: candidate.into(),
        opponent: opponent.into(),
        year: 2024,
        model: "fixture".into(),
        prompt_fingerprint: String::new(),
    }
}

fn cfg(base_url: String) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(base_url, "stub-model", "test-key");
    cfg.max_retries = 2;
    cfg.backoff_base = Duration::from_millis(20);
    cfg.timeout = Duration::from_secs(5);
    cfg
}

/// Serves a fixed status and body to every request, counting them.
fn canned(status: u16, body: &'static str) -> (String, Arc<AtomicUsize>, Arc<tiny_http::Server>) {
    let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    {
        let server = Arc::clone(&server);
        let hits = Arc::clone(&hits);
        std::thread::spawn(move || {
            for req in server.incoming_requests() {
                hits.fetch_add(1, Ordering::SeqCst);
                let _ = req.respond(tiny_http::Response::from_string(body).with_status_code(status));
            }
        });
    }
    (url, hits, server)
}

#[test]
fn logprobs_become_probabilities() {
    let body = r#"{"choices":[{"logprobs":{"content":[{"token":" 52","logprob":-0.35667494393873245,
        "top_logprobs":[{"token":" 52","logprob":-0.35667494393873245},{"token":"53","logprob":-1.6094379124341003}]}]}}]}"#;
    let (url, hits, _server) = canned(200, body);
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    let raw = fetch_token_distribution(&cfg(url), &prompt).unwrap();
    let got: Vec<(&str, f64)> = raw.entries().iter().map(|e| (e.token.as_str(), e.probability)).collect();
    assert_eq!(got.len(), 2);
    assert_eq!(got[0].0, " 52");
    assert!((got[0].1 - 0.7).abs() < 1e-12);
    assert_eq!(got[1].0, "53");
    assert!((got[1].1 - 0.2).abs() < 1e-12);
    assert_eq!(raw.model(), "stub-model");
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn missing_logprobs_is_malformed() {
    let (url, _, _server) = canned(200, r#"{"choices":[{"message":{"role":"assistant","content":"52"}}]}"#);
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    assert!(matches!(
        fetch_token_distribution(&cfg(url), &prompt),
        Err(IngestError::MalformedResponse(_))
    ));
}

#[test]
fn rejected_credentials_are_not_retried() {
    let (url, hits, _server) = canned(401, r#"{"error":{"message":"bad key"}}"#);
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    assert!(matches!(
        fetch_token_distribution(&cfg(url), &prompt),
        Err(IngestError::Auth { status: 401 })
    ));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn server_errors_are_retried_then_reported() {
    let (url, hits, _server) = canned(503, "overloaded");
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    match fetch_token_distribution(&cfg(url), &prompt) {
        Err(IngestError::Network { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits, _server) = canned(400, "bad request");
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    assert!(matches!(
        fetch_token_distribution(&cfg(url), &prompt),
        Err(IngestError::Http { status: 400, .. })
    ));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_host_backs_off_exponentially() {
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    let start = Instant::now();
    match fetch_token_distribution(&cfg(format!("http://127.0.0.1:{port}")), &prompt) {
        Err(IngestError::Network { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
    // waits of 20 ms and 40 ms between the three attempts
    assert!(start.elapsed() >= Duration::from_millis(60));
}

#[test]
fn replay_server_round_trips_a_race() {
    let c1 = ShareDistribution::new([(52, 0.6), (53, 0.3), (51, 0.1)], 0.9, meta("Iowa", "A", "B")).unwrap();
    let c2 = ShareDistribution::new([(46, 0.5), (47, 0.5)], 1.0, meta("Iowa", "B", "A")).unwrap();
    let server = ReplayServer::start(CellStore::from_cells(vec![c1.clone(), c2.clone()]).unwrap(), "127.0.0.1:0").unwrap();
    let live = LiveSource::new(cfg(server.base_url())).unwrap();

    let race = fetch_race(&live, "Iowa", "A", "B", 2024).unwrap();
    assert_eq!(server.request_count(), 2);
    assert_eq!(race.c1().meta().opponent, "B");
    assert_eq!(race.c2().meta().opponent, "A");
    assert_eq!(race.c1().meta().model, "stub-model");
    assert_eq!(
        race.c1().meta().prompt_fingerprint,
        build_prompt("A", "B", 2024, "Iowa").unwrap().fingerprint()
    );
    assert!((race.c1().conforming_mass() - 0.9).abs() < 1e-12);
    for (share, mass) in c1.masses() {
        assert!((race.c1().prob(*share) - mass).abs() < 1e-12);
    }
    assert_eq!(win_probability(&race).unwrap().p_c1_wins, 1.0);
}

#[test]
fn replay_truncates_to_top_k() {
    let c1 = ShareDistribution::new([(40, 0.5), (41, 0.3), (42, 0.2)], 1.0, meta("Ohio", "A", "B")).unwrap();
    let server = ReplayServer::start(CellStore::from_cells(vec![c1]).unwrap(), "127.0.0.1:0").unwrap();
    let mut config = cfg(server.base_url());
    config.top_k = 2;
    let live = LiveSource::new(config).unwrap();
    let cell = live.get_cell(&CellKey::new("Ohio", "A", "B", 2024)).unwrap();
    // the 0.2 share falls outside the top 2 and counts as nonconforming
    assert!((cell.conforming_mass() - 0.8).abs() < 1e-12);
    assert_eq!(cell.masses().len(), 2);
}

#[test]
fn replay_failures_name_the_candidate() {
    let c1 = ShareDistribution::point(60, 1.0, meta("Iowa", "A", "B")).unwrap();
    let server = ReplayServer::start(CellStore::from_cells(vec![c1]).unwrap(), "127.0.0.1:0").unwrap();
    let live = LiveSource::new(cfg(server.base_url())).unwrap();
    match fetch_race(&live, "Iowa", "A", "B", 2024) {
        Err(IngestError::Cell { candidate, source, .. }) => {
            assert_eq!(candidate, "B");
            assert!(matches!(*source, IngestError::Http { status: 404, .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn replay_requires_a_bearer_token() {
    let c1 = ShareDistribution::point(60, 1.0, meta("Iowa", "A", "B")).unwrap();
    let server = ReplayServer::start(CellStore::from_cells(vec![c1]).unwrap(), "127.0.0.1:0").unwrap();
    let mut config = cfg(server.base_url());
    config.api_key = " ".into();
    let prompt = build_prompt("A", "B", 2024, "Iowa").unwrap();
    assert!(matches!(
        fetch_token_distribution(&config, &prompt),
        Err(IngestError::Auth { status: 401 })
    ));
}

#[test]
fn nonconforming_replay_tokens_are_dropped() {
    let c1 = ShareDistribution::new([(55, 1.0)], 0.25, meta("Utah", "A", "B")).unwrap();
    let server = ReplayServer::start(CellStore::from_cells(vec![c1]).unwrap(), "127.0.0.1:0").unwrap();
    let prompt = build_prompt("A", "B", 2024, "Utah").unwrap();
    let raw = fetch_token_distribution(&cfg(server.base_url()), &prompt).unwrap();
    assert_eq!(raw.entries()[0].token, "N/A");
    let d = tokens_to_shares(&raw, meta("Utah", "A", "B")).unwrap();
    assert!((d.conforming_mass() - 0.25).abs() < 1e-12);
    assert_eq!(d.prob(55), 1.0);
}
