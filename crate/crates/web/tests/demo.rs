use reidtrack_web::{confidence_map_json, kernel_profile_json, simulate_json};
use serde_json::Value;

#[test]
fn simulate_reports_a_score_and_every_frame() {
    let v: Value = serde_json::from_str(&simulate_json("normal_high", "centroid", false, 455).unwrap()).unwrap();
    assert_eq!(v["score"]["correct_pct"], "100.00");
    assert_eq!(v["frames"].as_array().unwrap().len(), 455);
    assert_eq!(v["image"], serde_json::json!([960, 540]));
}

#[test]
fn simulate_rejects_unknown_inputs() {
    assert!(simulate_json("nope", "sort", false, 1).is_err());
    assert!(simulate_json("normal_high", "kcf", false, 1).is_err());
}

#[test]
fn kernel_profile_starts_at_one_and_decays() {
    let pts: Vec<(f64, f64)> = serde_json::from_str(&kernel_profile_json(1.5, 6.0, 60).unwrap()).unwrap();
    assert_eq!(pts.len(), 61);
    assert_eq!(pts[0], (0.0, 1.0));
    assert!(pts.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn confidence_map_marks_far_cells_unknown() {
    let gallery = r#"[
        {"label":"a","x":-2,"y":0},{"label":"a","x":-2.3,"y":0.2},{"label":"a","x":-1.8,"y":-0.2},
        {"label":"b","x":2,"y":0},{"label":"b","x":2.3,"y":0.2},{"label":"b","x":1.8,"y":-0.2}
    ]"#;
    let v: Value = serde_json::from_str(&confidence_map_json(gallery, 1.0, 0.7, 21, 5.0).unwrap()).unwrap();
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 21 * 21);
    let at = |r: usize, c: usize| cells[r * 21 + c][0].as_i64().unwrap();
    // Row 10 is y = 0; columns 6 and 14 sit near x = -2 and x = 2.
    assert_eq!(at(10, 6), 0);
    assert_eq!(at(10, 14), 1);
    // Midway between the classes neither is confident.
    assert_eq!(at(10, 10), -1);
    assert!(confidence_map_json("[]", 1.0, 0.5, 10, 1.0).is_err());
}
