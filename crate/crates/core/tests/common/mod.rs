#![allow(dead_code)]

use std::path::PathBuf;

use phyllo::{parse_descriptor, resolve_parameters, PlantDescriptor};

pub fn descriptor_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../descriptors").join(name)
}

pub fn descriptor_text(name: &str) -> String {
    std::fs::read_to_string(descriptor_path(name)).expect("descriptor fixture")
}

pub fn load(name: &str) -> PlantDescriptor {
    resolve_parameters(&parse_descriptor(&descriptor_text(name)).expect("parses")).expect("resolves")
}
