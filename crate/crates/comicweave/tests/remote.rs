mod common;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use comicweave::codec::{decode_image, encode_png};
use comicweave::remote::{
    remote_generate, RemoteEmbeddingProvider, RemoteImageProvider, RemoteProviderConfig,
    RemoteSentimentProvider,
};
use comicweave_core::providers::{
    EmbeddingProvider, ImageProvider, LexiconSentiment, ProviderError, SentimentProvider,
    StubImageProvider, TableEmbedding,
};
use comicweave_core::raster::Raster;
use common::{closed_port_url, MockServer};
use serde_json::{json, Value};

fn fast(url: String, retries: u32) -> RemoteProviderConfig {
    RemoteProviderConfig {
        retries,
        backoff_ms: 5,
        timeout_secs: 5.0,
        ..RemoteProviderConfig::new(url)
    }
}

fn fixed_png() -> Raster {
    let mut r = Raster::new(6, 4, [200, 10, 10, 255]);
    r.put(2, 2, [0, 0, 255, 128]);
    r
}

#[test]
fn fixed_png_passes_through() {
    let png = B64.encode(encode_png(&fixed_png()).unwrap());
    let server = MockServer::start(Box::new(move |_, path, _| {
        assert_eq!(path, "/generate");
        (200, json!({ "png_b64": png }).to_string())
    }));
    let out = remote_generate(&fast(server.url(), 0), "anything", None).unwrap();
    assert_eq!(out, fixed_png());
}

#[test]
fn retries_through_server_errors() {
    let png = B64.encode(encode_png(&fixed_png()).unwrap());
    let server = MockServer::start(Box::new(move |n, _, _| {
        if n < 2 {
            (500, "{}".into())
        } else {
            (200, json!({ "png_b64": png }).to_string())
        }
    }));
    let out = remote_generate(&fast(server.url(), 2), "p", None).unwrap();
    assert_eq!(out, fixed_png());
    assert_eq!(server.hits(), 3);
}

#[test]
fn too_few_retries_exhaust() {
    let server = MockServer::start(Box::new(|_, _, _| (503, "{}".into())));
    let err = remote_generate(&fast(server.url(), 1), "p", None).unwrap_err();
    assert!(
        matches!(err, ProviderError::ExhaustedRetries { attempts: 2, .. }),
        "{err:?}"
    );
    assert_eq!(server.hits(), 2);
}

#[test]
fn unreachable_endpoint_exhausts() {
    let err = remote_generate(&fast(closed_port_url(), 2), "p", None).unwrap_err();
    assert!(
        matches!(err, ProviderError::ExhaustedRetries { attempts: 3, .. }),
        "{err:?}"
    );
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(Box::new(|_, _, _| (400, "{}".into())));
    let err = remote_generate(&fast(server.url(), 3), "p", None).unwrap_err();
    assert!(matches!(err, ProviderError::BadResponse(_)));
    assert_eq!(server.hits(), 1);
}

#[test]
fn garbage_payloads_are_bad_responses() {
    let server = MockServer::start(Box::new(|_, _, _| {
        (200, json!({ "png_b64": B64.encode(b"nope") }).to_string())
    }));
    let err = remote_generate(&fast(server.url(), 0), "p", None).unwrap_err();
    assert!(matches!(err, ProviderError::BadResponse(_)));
}

#[test]
fn slow_server_times_out() {
    let server = MockServer::start(Box::new(|_, _, _| {
        std::thread::sleep(std::time::Duration::from_millis(600));
        (200, "{}".into())
    }));
    let cfg = RemoteProviderConfig {
        timeout_secs: 0.1,
        retries: 0,
        ..RemoteProviderConfig::new(server.url())
    };
    assert_eq!(
        remote_generate(&cfg, "p", None).unwrap_err(),
        ProviderError::Timeout
    );
}

/// Serves the bundled offline providers over the wire format.
fn stub_backend() -> MockServer {
    let image = StubImageProvider::default();
    let lexicon = LexiconSentiment::builtin();
    let table = TableEmbedding::builtin();
    MockServer::start(Box::new(move |_, path, body| {
        let req: Value = serde_json::from_slice(body).unwrap();
        match path {
            "/generate" => {
                let base = req["base_png_b64"]
                    .as_str()
                    .map(|b| decode_image(&B64.decode(b).unwrap()).unwrap());
                let out = image
                    .generate(req["prompt"].as_str().unwrap(), base.as_ref())
                    .unwrap();
                (
                    200,
                    json!({ "png_b64": B64.encode(encode_png(&out).unwrap()) }).to_string(),
                )
            }
            "/classify" => (
                200,
                json!({ "probs": lexicon.classify(req["text"].as_str().unwrap()).unwrap() })
                    .to_string(),
            ),
            "/embed" => match table.embed(req["label"].as_str().unwrap()) {
                Ok(v) => (200, json!({ "vector": v }).to_string()),
                Err(_) => (404, "{}".into()),
            },
            _ => (404, "{}".into()),
        }
    }))
}

#[test]
fn remote_conforms_to_stub_contracts() {
    let server = stub_backend();
    let stub = StubImageProvider::default();
    let remote = RemoteImageProvider::new(fast(server.url(), 0)).unwrap();
    let base = fixed_png();
    for (prompt, b) in [("einstein icon", None), ("a", None), ("b", Some(&base))] {
        assert_eq!(
            remote.generate(prompt, b).unwrap(),
            stub.generate(prompt, b).unwrap()
        );
    }
    assert_eq!(
        remote.generate("x", None).unwrap(),
        remote.generate("x", None).unwrap()
    );
    assert_ne!(
        remote.generate("a", None).unwrap(),
        remote.generate("b", None).unwrap()
    );

    let lexicon = LexiconSentiment::builtin();
    let sentiment = RemoteSentimentProvider::new(fast(server.url(), 0), None).unwrap();
    assert_eq!(sentiment.labels(), lexicon.labels());
    for text in ["angry shout", "", "we eat cake"] {
        let r = sentiment.classify(text).unwrap();
        let l = lexicon.classify(text).unwrap();
        assert_eq!(r.keys().collect::<Vec<_>>(), l.keys().collect::<Vec<_>>());
        for (k, v) in &l {
            assert!((r[k] - v).abs() < 1e-12);
        }
        assert!((r.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    let table = TableEmbedding::builtin();
    let embed = RemoteEmbeddingProvider::new(fast(server.url(), 0), None).unwrap();
    assert_eq!(embed.dimension(), table.dimension());
    assert_eq!(embed.embed("joy").unwrap(), table.embed("joy").unwrap());
    assert!(matches!(
        embed.embed("no-such-label"),
        Err(ProviderError::BadResponse(_))
    ));
}

#[test]
fn remote_sentiment_rejects_foreign_labels() {
    let server = MockServer::start(Box::new(|_, _, _| {
        (200, json!({ "probs": { "mystery": 1.0 } }).to_string())
    }));
    let p = RemoteSentimentProvider::new(fast(server.url(), 0), None).unwrap();
    assert_eq!(
        p.classify("x").unwrap_err(),
        ProviderError::UnknownLabel("mystery".into())
    );
}
