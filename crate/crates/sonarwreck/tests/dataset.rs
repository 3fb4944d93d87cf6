mod common;

use std::fs;
use std::path::Path;

use sonarwreck::dataset::{generate_dataset, read_manifest, sample_id, MANIFEST};
use sonarwreck::config::PipelineConfig;
use sonarwreck::{deff, io};

#[test]
fn output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_config(dir.path(), 8, 64, 3);
    let mut manifests = Vec::new();
    for workers in [1, 3] {
        cfg.workers = Some(workers);
        let out = dir.path().join(format!("w{workers}"));
        generate_dataset(&cfg, &out).unwrap();
        manifests.push((fs::read(out.join(MANIFEST)).unwrap(), out));
    }
    assert_eq!(manifests[0].0, manifests[1].0);
    for r in read_manifest(&manifests[0].1.join(MANIFEST)).unwrap() {
        for f in [&r.image, &r.mask, &r.deff] {
            assert_eq!(fs::read(manifests[0].1.join(f)).unwrap(), fs::read(manifests[1].1.join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn manifest_references_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_config(dir.path(), 10, 64, 11);
    let out = dir.path().join("data");
    let m = generate_dataset(&cfg, &out).unwrap();
    assert!(m.failures.is_empty());
    let records = read_manifest(&out.join(MANIFEST)).unwrap();
    assert_eq!(records, m.records);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.id, sample_id(i as u64));
        assert_eq!(r.provenance.index, i as u64);
        assert_eq!(r.site, r.provenance.site);
        assert!(matches!(r.site.as_deref(), Some("harbor" | "shelf")));
        let img = io::read_gray(&out.join(&r.image)).unwrap();
        let mask = io::read_mask(&out.join(&r.mask)).unwrap();
        let field = deff::read(&out.join(&r.deff)).unwrap();
        assert_eq!(img.dims(), (64, 64));
        assert_eq!(mask.dims(), img.dims());
        assert_eq!(field.bins.dims(), img.dims());
        assert!(mask.count_eq(1) > 0, "{} has no wreck pixels", r.id);
    }
    let train = records.iter().filter(|r| r.split == sonarwreck_core::pipeline::Split::Train).count();
    assert_eq!(train, 8);
}

#[test]
fn every_written_file_is_referenced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_config(dir.path(), 5, 64, 2);
    let out = dir.path().join("data");
    generate_dataset(&cfg, &out).unwrap();
    let mut referenced: Vec<String> = vec![MANIFEST.into()];
    for r in read_manifest(&out.join(MANIFEST)).unwrap() {
        referenced.extend([r.image, r.mask, r.deff]);
    }
    referenced.sort();
    let mut written = Vec::new();
    for sub in ["", "images", "masks", "fields"] {
        for e in fs::read_dir(out.join(sub)).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                written.push(p.strip_prefix(&out).unwrap().to_str().unwrap().to_string());
            }
        }
    }
    written.sort();
    assert_eq!(written, referenced);
}

#[test]
fn ablation_configs_differ_only_in_toggles() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut grid = Vec::new();
    let mut base = None;
    for name in ["rt_on_sf_on", "rt_on_sf_off", "rt_off_sf_on", "rt_off_sf_off"] {
        let mut cfg = PipelineConfig::load(&root.join(format!("{name}.json"))).unwrap();
        grid.push((cfg.synthesis.real_terrain, cfg.synthesis.ship_fracture));
        cfg.synthesis.real_terrain = true;
        cfg.synthesis.ship_fracture = true;
        match &base {
            None => base = Some(cfg),
            Some(b) => assert_eq!(&cfg, b, "{name}"),
        }
    }
    grid.sort();
    assert_eq!(grid, [(false, false), (false, true), (true, false), (true, true)]);
}
