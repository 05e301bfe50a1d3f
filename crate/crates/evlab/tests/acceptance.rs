//! Acceptance gate: one test per numbered criterion, each printing a single
//! pass/fail summary line (plus the numbers behind it) and asserting the
//! verdict. Run with `cargo test --test acceptance -- --nocapture` to see the
//! full table.

use evlab::verify::{self, CriterionResult};

const SEED: u64 = 2026;

fn gate(c: CriterionResult) {
    println!("{}", c.summary_line());
    for d in &c.details {
        println!("    {d}");
    }
    assert!(c.pass, "{}", c.summary_line());
}

#[test]
fn criterion_01_ei_dichotomy() {
    gate(verify::criterion1(SEED));
}

#[test]
fn criterion_02_noise_kills_clustering() {
    gate(verify::criterion2(SEED + 1));
}

#[test]
fn criterion_03_clustered_point_process() {
    gate(verify::criterion3(SEED + 2));
}

#[test]
fn criterion_04_poissonian_point_process() {
    gate(verify::criterion4(SEED + 3));
}

#[test]
fn criterion_05_discontinuity_laws() {
    gate(verify::criterion5(SEED + 4));
}

#[test]
fn criterion_06_hitting_return_kac() {
    gate(verify::criterion6(SEED + 5));
}

#[test]
fn criterion_07_spectral_ladder() {
    gate(verify::criterion7());
}

#[test]
fn criterion_08_survival_oracle() {
    gate(verify::criterion8(SEED + 7));
}

#[test]
fn criterion_09_exact_property_suites() {
    gate(verify::criterion9(SEED + 8));
}

#[test]
fn criterion_10_pair_count_diagnostics() {
    gate(verify::criterion10(SEED + 9));
}
