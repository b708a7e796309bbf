use cpverif::corpus;
use cpverif::export::to_dot;
use cpverif::tg::analyze;

fn dot(name: &str, reduced: bool) -> String {
    let spec = corpus::load(name).unwrap();
    let (dp, _) = spec.single_dp();
    let a = analyze(&dp).unwrap();
    to_dot(if reduced { &a.reduced } else { &a.full }, &spec.name)
}

#[test]
fn p1_full_matches_golden() {
    assert_eq!(dot("p1", false), include_str!("golden/p1_full.dot"));
}

#[test]
fn p1_reduced_matches_golden() {
    assert_eq!(dot("p1", true), include_str!("golden/p1_reduced.dot"));
}

#[test]
fn p3_reduced_matches_golden() {
    assert_eq!(dot("p3", true), include_str!("golden/p3_reduced.dot"));
}
