#![allow(dead_code)]

use std::path::PathBuf;

use heatflux::bench::{catalog_files, load_case, CaseFile};
use heatflux::problem::{FluxLaw, InitialProfile, ProblemSpec, SourceShape};
use proptest::prelude::*;

pub fn catalog_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("catalog")
}

pub fn catalog() -> Vec<CaseFile> {
    catalog_files(&catalog_dir())
        .unwrap()
        .iter()
        .map(|p| load_case(p).unwrap())
        .collect()
}

pub fn shape() -> impl Strategy<Value = SourceShape> {
    prop_oneof![
        (0.3..1.5f64).prop_map(|lambda| SourceShape::LinearX { lambda }),
        (0.2..0.8f64, 0.1..0.6f64).prop_map(|(lambda, mu)| SourceShape::NegSinh { lambda, mu }),
        (0.3..1.5f64, 0.1..2.0f64).prop_map(|(lambda, mu)| SourceShape::NegSin { lambda, mu }),
    ]
}

pub fn eta() -> impl Strategy<Value = f64> {
    prop_oneof![-2.0..-0.2f64, 0.2..2.0f64]
}

pub fn odd_m() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(3.0), Just(5.0), Just(7.0)]
}

/// Integral-family problems: one of the three shapes, F = νV, h = ηx^m with odd m.
pub fn integral_spec() -> impl Strategy<Value = ProblemSpec> {
    (shape(), 0.2..1.5f64, eta(), odd_m())
        .prop_map(|(phi, nu, eta, m)| ProblemSpec::new(phi, FluxLaw::Linear { nu }, InitialProfile::Monomial { eta, m }))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
