use radpair_web::{early_time_json, ensemble_json, evolve_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn evolve_curves_start_and_end_right() {
    let v = parse(evolve_json("ud", 1.0, 2.0).unwrap());
    let t = v["t"].as_array().unwrap();
    assert_eq!(t.len(), v["ps_eq2"].as_array().unwrap().len());
    assert_eq!(t[0].as_f64(), Some(0.0));
    assert!((t.last().unwrap().as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["ps_eq2"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["eff_rate_eq2"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn singlet_start_has_no_mixture_curve() {
    let v = parse(evolve_json("S", 1.0, 1.0).unwrap());
    assert!(v["ps_eq3"].is_null());
    assert!(v["dist_eq2_eq3"].is_null());
}

#[test]
fn ensemble_is_seeded() {
    let a = ensemble_json("mixed", 1.0, 0.5, 2000, 3).unwrap();
    assert_eq!(a, ensemble_json("mixed", 1.0, 0.5, 2000, 3).unwrap());
    let v = parse(a);
    assert_eq!(v["survival"][0].as_f64(), Some(1.0));
}

#[test]
fn oversized_and_invalid_requests_are_rejected() {
    assert!(ensemble_json("ud", 1.0, 100.0, 1_000_000, 1).is_err());
    assert!(evolve_json("Q", 1.0, 1.0).is_err());
    assert!(evolve_json("ud", -1.0, 1.0).is_err());
}

#[test]
fn early_time_defects() {
    let v = parse(early_time_json("ud", 1.0).unwrap());
    let eq3 = v["defect_eq3"].as_array().unwrap();
    assert!((eq3.last().unwrap().as_f64().unwrap() - 0.25).abs() < 1e-3);
    let eq2: Vec<f64> = v["defect_eq2"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(eq2[1] < eq2[0] / 8.0);
}
