mod common;

use cadloop::formats::{
    cloud_from_json, cloud_to_json, decode_png, depth_raster, encode_png, overlay_raster,
    read_jsonl, sha256_hex, write_jsonl, Raster,
};
use cadloop_core::dsl::{parse, render_mesh};
use cadloop_core::pointcloud::init_discrepancy_cloud;
use cadloop_core::refine::{build_evidence, Modality};
use cadloop_core::view::{encode_views, ViewConfig};
use serde::{Deserialize, Serialize};

use common::{golden, FIXTURE_GUESS, FIXTURE_PART};

fn check_golden(name: &str, raster: &Raster) {
    let path = golden(name);
    if std::env::var_os("CADLOOP_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, encode_png(raster).unwrap()).unwrap();
    }
    let frozen = decode_png(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(&frozen, raster, "{name} differs from the frozen image");
}

#[test]
fn png_round_trip() {
    for channels in [1u8, 3] {
        let data = (0..(7 * 5 * channels as usize))
            .map(|i| (i * 37 % 256) as u8)
            .collect();
        let r = Raster {
            width: 7,
            height: 5,
            channels,
            data,
        };
        assert_eq!(decode_png(&encode_png(&r).unwrap()).unwrap(), r);
    }
    let bad = Raster {
        width: 1,
        height: 1,
        channels: 2,
        data: vec![0, 0],
    };
    assert!(encode_png(&bad).is_err());
    assert!(decode_png(b"not a png").is_err());
}

#[test]
fn golden_overlays_are_frozen() {
    let part = render_mesh(&parse(FIXTURE_PART).unwrap(), 128).unwrap();
    let guess = render_mesh(&parse(FIXTURE_GUESS).unwrap(), 128).unwrap();
    let view = ViewConfig::default();
    check_golden(
        "target_depth.png",
        &depth_raster(&encode_views(&part, &view).unwrap()),
    );
    let first = build_evidence(&part, None, Modality::Image, &view, 0).unwrap();
    check_golden(
        "overlay_t1.png",
        &overlay_raster(first.overlay.as_ref().unwrap()),
    );
    let second = build_evidence(
        &part,
        Some((FIXTURE_GUESS, Some(&guess))),
        Modality::Image,
        &view,
        0,
    )
    .unwrap();
    check_golden(
        "overlay_t2.png",
        &overlay_raster(second.overlay.as_ref().unwrap()),
    );
}

#[test]
fn cloud_json_round_trip() {
    let part = render_mesh(&parse(FIXTURE_PART).unwrap(), 64).unwrap();
    let cloud = init_discrepancy_cloud(&part, 4).unwrap();
    assert_eq!(cloud_from_json(&cloud_to_json(&cloud)).unwrap(), cloud);
    assert!(cloud_from_json("{").is_err());
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Row {
    id: String,
    x: f64,
}

#[test]
fn jsonl_round_trip_and_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.jsonl");
    let rows = vec![
        Row {
            id: "a".into(),
            x: 0.1,
        },
        Row {
            id: "b".into(),
            x: -3e-9,
        },
    ];
    assert_eq!(write_jsonl(&rows, &path).unwrap(), 2);
    assert_eq!(read_jsonl::<Row>(&path).unwrap(), rows);
    std::fs::write(&path, "{\"id\":\"a\",\"x\":1}\n\n{\"id\":2}\n").unwrap();
    let err = read_jsonl::<Row>(&path).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn sha256_known_answer() {
    assert_eq!(
        sha256_hex(b"abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}
