use morse_link::plchain::signs::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_forms_match_examples() {
    assert_eq!(sign_commute(3, 1, 1), 1);
    assert_eq!(sign_linksym(1, 0), -1);
    assert_eq!(sign_dualm(2, 0), 1);
    assert_eq!(sign_dualm(1, 0), -1);
    assert!(sign_table_coherent(4));
}

#[test]
fn every_rule_matches_its_linear_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let checks = sign_rule_suite(&mut rng, 4);
    let failures: Vec<_> = checks.iter().filter(|c| !c.holds()).collect();
    assert!(failures.is_empty(), "{} of {} failed, e.g. {:?}", failures.len(), checks.len(), &failures[..failures.len().min(8)]);
}
