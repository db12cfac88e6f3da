use std::collections::HashMap;

use ecsgfx::gpu::Device;
use ecsgfx::{Error, Image, MaterialData, MeshSource, Primitive, ResourceKind, Resources, ShaderSource, TextureData};
use proptest::prelude::*;

const UNLIT: &str = include_str!("../assets/shaders/unlit.wgsl");

fn registry() -> (Device, Resources, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    Image::filled(2, 2, [255; 4]).save_png(&dir.path().join("white.png")).unwrap();
    let device = Device::new();
    let res = Resources::new(&device, dir.path()).unwrap();
    (device, res, dir)
}

#[test]
fn texture_build_echoes_dimensions_and_allocates_once() {
    let (device, mut res, _dir) = registry();
    let before = device.stats().textures_created;
    let h1 = res.build_texture("a", TextureData::file("white.png")).unwrap();
    let h2 = res.build_texture("a", TextureData::file("white.png")).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(device.stats().textures_created - before, 1);
    let t = res.texture("a").unwrap();
    assert_eq!((t.texture.width(), t.texture.height()), (2, 2));
    assert_eq!((t.image.width, t.image.height), (2, 2));
}

#[test]
fn missing_texture_file_errors() {
    let (_device, mut res, _dir) = registry();
    let err = res.build_texture("b", TextureData::file("nope.png")).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)), "{err}");
    assert_eq!(res.lookup(ResourceKind::Texture, "b"), None);
}

#[test]
fn undecodable_texture_errors() {
    let (_device, mut res, dir) = registry();
    std::fs::write(dir.path().join("junk.png"), b"not an image").unwrap();
    assert!(matches!(
        res.build_texture("j", TextureData::file("junk.png")),
        Err(Error::Decode { .. })
    ));
}

#[test]
fn raw_texture_length_is_checked() {
    let (_device, mut res, _dir) = registry();
    let bad = TextureData::Raw {
        width: 2,
        height: 2,
        channels: 3,
        pixels: vec![0; 11],
    };
    assert!(res.build_texture("bad", bad).is_err());
    let good = TextureData::Raw {
        width: 2,
        height: 1,
        channels: 3,
        pixels: vec![10, 20, 30, 40, 50, 60],
    };
    res.build_texture("good", good).unwrap();
    assert_eq!(res.texture("good").unwrap().image.pixel(1, 0), [40, 50, 60, 255]);
}

#[test]
fn shader_builds_once_per_name() {
    let (_device, mut res, _dir) = registry();
    let a = res.build_shader("unlit", ShaderSource::Wgsl(UNLIT.into())).unwrap();
    let again = res.build_shader("unlit", ShaderSource::Wgsl(UNLIT.into())).unwrap();
    assert_eq!(a, again);
    let b = res.build_shader("unlit-copy", ShaderSource::Wgsl(UNLIT.into())).unwrap();
    assert_ne!(a, b);
    assert_eq!(res.count(ResourceKind::Shader), 2);
}

#[test]
fn broken_shader_reports_diagnostics_and_leaves_registry() {
    let (_device, mut res, _dir) = registry();
    res.build_shader("ok", ShaderSource::Wgsl(UNLIT.into())).unwrap();
    let err = res
        .build_shader("broken", ShaderSource::Wgsl("fn main( {".into()))
        .unwrap_err();
    match err {
        Error::ShaderCompile { name, diagnostics } => {
            assert_eq!(name, "broken");
            assert!(!diagnostics.is_empty());
        }
        other => panic!("expected compile error, got {other}"),
    }
    assert_eq!(res.count(ResourceKind::Shader), 1);
    assert_eq!(res.lookup(ResourceKind::Shader, "broken"), None);
}

#[test]
fn stage_sources_are_concatenated() {
    let (_device, mut res, _dir) = registry();
    let split = UNLIT.find("@vertex").unwrap();
    let stages = ShaderSource::Stages(vec![
        ShaderSource::Wgsl(UNLIT[..split].into()),
        ShaderSource::Wgsl(UNLIT[split..].into()),
    ]);
    res.build_shader("staged", stages).unwrap();
    let entries = res.shader("staged").unwrap().module.entry_points();
    assert!(entries.iter().any(|e| e.name == "fs_main"));
}

#[test]
fn materials_resolve_dependencies_by_name() {
    let (_device, mut res, _dir) = registry();
    let err = res
        .build_material("m", MaterialData::new("default_mesh", &["albedo"]))
        .unwrap_err();
    assert!(
        matches!(&err, Error::DanglingResource { kind: ResourceKind::Shader, name, .. } if name == "default_mesh"),
        "{err}"
    );
    res.build_shader("default_mesh", ShaderSource::Wgsl(UNLIT.into())).unwrap();
    let err = res
        .build_material("m", MaterialData::new("default_mesh", &["albedo"]))
        .unwrap_err();
    assert!(
        matches!(&err, Error::DanglingResource { kind: ResourceKind::Texture, name, .. } if name == "albedo"),
        "{err}"
    );
    assert!(err.to_string().contains("albedo"));
    res.build_texture("albedo", TextureData::file("white.png")).unwrap();
    let data = MaterialData::new("default_mesh", &["albedo"]).with_glossiness(2.0);
    let h = res.build_material("m", data.clone()).unwrap();
    assert_eq!(res.build_material("m", data).unwrap(), h);
    assert_eq!(res.material("m").unwrap().data.glossiness, 2.0);
    assert_eq!(res.count(ResourceKind::Material), 1);
}

#[test]
fn lookup_never_builds_and_respects_kind() {
    let (_device, mut res, _dir) = registry();
    assert_eq!(res.lookup(ResourceKind::Mesh, "cube"), None);
    let h = res.build_mesh("cube", MeshSource::Primitive(Primitive::Cube)).unwrap();
    assert_eq!(res.lookup(ResourceKind::Mesh, "cube"), Some(h));
    assert_eq!(res.lookup(ResourceKind::Texture, "cube"), None);
    assert_eq!(res.count(ResourceKind::Texture), 0);
}

#[test]
fn clear_resets_registries() {
    let (_device, mut res, _dir) = registry();
    res.build_mesh("cube", MeshSource::Primitive(Primitive::Cube)).unwrap();
    res.clear();
    assert_eq!(res.lookup(ResourceKind::Mesh, "cube"), None);
    assert_eq!(res.count(ResourceKind::Mesh), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn first_build_wins_per_name(builds in prop::collection::vec((0usize..4, 0usize..5), 1..40)) {
        let device = Device::new();
        let mut res = Resources::new(&device, ".").unwrap();
        let mut first: HashMap<usize, ecsgfx::Handle> = HashMap::new();
        let before = device.stats().buffers_created;
        for (name, prim) in builds {
            let h = res
                .build_mesh(&format!("m{name}"), MeshSource::Primitive(Primitive::ALL[prim]))
                .unwrap();
            prop_assert_eq!(*first.entry(name).or_insert(h), h);
            prop_assert!(res.count(ResourceKind::Mesh) <= first.len());
        }
        // Each mesh owns a vertex and an index buffer.
        prop_assert_eq!(device.stats().buffers_created - before, 2 * first.len() as u64);
    }
}
