//! Finite-difference checks of every hand-derived gradient.

use smoothlab_core::agents::PolicyKind;
use smoothlab_core::gradcheck::{check_actor, check_critic, check_regularizer_terms, GradCheckConfig, GradCheckReport};

fn assert_clean(report: GradCheckReport) {
    assert!(report.instances >= 100, "{}: only {} instances", report.name, report.instances);
    assert!(report.passed(), "{}: {} failures, first: {}", report.name, report.failures.len(), report.failures[0]);
}

#[test]
fn regularizer_term_gradients_match_finite_differences() {
    assert_clean(check_regularizer_terms(&GradCheckConfig::default()));
}

#[test]
fn gaussian_actor_gradient_matches_finite_differences() {
    assert_clean(check_actor(PolicyKind::Gaussian, &GradCheckConfig::default()));
}

#[test]
fn deterministic_actor_gradient_matches_finite_differences() {
    assert_clean(check_actor(PolicyKind::Deterministic, &GradCheckConfig::default()));
}

#[test]
fn critic_gradient_matches_finite_differences() {
    assert_clean(check_critic(&GradCheckConfig::default()));
}
