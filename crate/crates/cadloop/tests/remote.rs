use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use cadloop::formats::decode_png;
use cadloop::remote::{RemoteEditor, RemoteRequest};
use cadloop_core::pointcloud::DiscrepancyCloud;
use cadloop_core::refine::{
    build_evidence, DecodeMode, Editor, EditorError, EditorRequest, Evidence, Modality,
};
use cadloop_core::view::{ViewConfig, GRID_HEIGHT, GRID_WIDTH};
use cadloop_core::{TriangleMesh, Vec3};

/// Serves one canned reply per connection and forwards each request body.
fn stub(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/edit", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut request = vec![0; length];
            reader.read_exact(&mut request).unwrap();
            let _ = tx.send(String::from_utf8(request).unwrap());
            let mut stream = reader.into_inner();
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, rx)
}

fn evidence(modality: Modality) -> Evidence {
    let cube = TriangleMesh::cuboid(Vec3::splat(-30.0), Vec3::splat(30.0));
    build_evidence(
        &cube,
        Some(("prev", None)),
        modality,
        &ViewConfig::default(),
        1,
    )
    .unwrap()
}

fn request(ev: &Evidence) -> EditorRequest<'_> {
    EditorRequest {
        target_id: "t7",
        step: 2,
        index: 3,
        evidence: ev,
        mode: DecodeMode::Sample,
        seed: 99,
    }
}

#[test]
fn posts_evidence_and_returns_the_program() {
    let (url, rx) = stub(vec![(
        200,
        r#"{"program":"extrude plane=XY z0=0 h=1 op=new { add rect 0 0 1 1 }"}"#.into(),
    )]);
    let editor = RemoteEditor::new(url, Duration::from_secs(5), 0);
    let ev = evidence(Modality::CrossModal);
    let program = editor.propose(&request(&ev)).unwrap();
    assert!(program.starts_with("extrude"));
    let sent: RemoteRequest = serde_json::from_str(&rx.recv().unwrap()).unwrap();
    assert_eq!(
        (sent.target_id.as_str(), sent.step, sent.index, sent.seed),
        ("t7", 2, 3, 99)
    );
    assert_eq!(
        (sent.modality.as_str(), sent.mode),
        ("cross_modal", DecodeMode::Sample)
    );
    assert_eq!(sent.prev_program.as_deref(), Some("prev"));
    let png = decode_png(&STANDARD.decode(sent.overlay_png_base64.unwrap()).unwrap()).unwrap();
    assert_eq!(
        (png.width as usize, png.height as usize, png.channels),
        (GRID_WIDTH, GRID_HEIGHT, 3)
    );
    let cloud = DiscrepancyCloud::from_bytes(&STANDARD.decode(sent.cloud_base64.unwrap()).unwrap())
        .unwrap();
    assert_eq!(&cloud, ev.cloud.as_ref().unwrap());
}

#[test]
fn image_only_requests_omit_the_cloud() {
    let (url, rx) = stub(vec![(200, r#"{"program":"x"}"#.into())]);
    let ev = evidence(Modality::Image);
    RemoteEditor::new(url, Duration::from_secs(5), 0)
        .propose(&request(&ev))
        .unwrap();
    let raw = rx.recv().unwrap();
    assert!(raw.contains("overlay_png_base64") && !raw.contains("cloud_base64"));
}

#[test]
fn bad_status_and_bad_json_are_bad_responses() {
    let (url, _rx) = stub(vec![
        (500, "{}".into()),
        (200, "not json".into()),
        (200, r#"{"text":"x"}"#.into()),
    ]);
    let editor = RemoteEditor::new(url, Duration::from_secs(5), 2);
    let ev = evidence(Modality::Image);
    for _ in 0..3 {
        assert!(matches!(
            editor.propose(&request(&ev)),
            Err(EditorError::BadResponse(_))
        ));
    }
}

#[test]
fn dead_endpoint_times_out() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let editor = RemoteEditor::new(
        format!("http://127.0.0.1:{port}/edit"),
        Duration::from_millis(500),
        1,
    );
    let ev = evidence(Modality::Image);
    assert!(matches!(
        editor.propose(&request(&ev)),
        Err(EditorError::Timeout(_))
    ));
    assert!(matches!(editor.check(), Err(EditorError::Timeout(_))));
}

#[test]
fn silent_server_times_out_within_the_budget() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/edit", listener.local_addr().unwrap());
    thread::spawn(move || {
        let held: Vec<_> = listener.incoming().take(2).collect();
        thread::sleep(Duration::from_secs(5));
        drop(held);
    });
    let editor = RemoteEditor::new(url, Duration::from_millis(300), 1);
    let ev = evidence(Modality::Image);
    let start = Instant::now();
    assert!(matches!(
        editor.propose(&request(&ev)),
        Err(EditorError::Timeout(_))
    ));
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn retry_recovers_after_a_timeout() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        // First connection: never answer. Second: answer.
        let (first, _) = listener.accept().unwrap();
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            if line == "\r\n" {
                break;
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let reply = r#"{"program":"ok"}"#;
        let mut s = reader.into_inner();
        write!(
            s,
            "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
        drop(first);
    });
    let editor = RemoteEditor::new(format!("http://{addr}/edit"), Duration::from_millis(300), 1);
    let ev = evidence(Modality::Image);
    assert_eq!(editor.propose(&request(&ev)).unwrap(), "ok");
}
